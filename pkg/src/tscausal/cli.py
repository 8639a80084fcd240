"""Command-line interface.

Subcommands cover the full workflow: generate a synthetic corpus, pretrain
on it, fine-tune on new series, evaluate graph recovery and root-cause
ranking, and score arbitrary series with a trained model. Every command
that produces tables also renders the matching figures into the same
output directory.

Exit codes: 0 success, 2 configuration problems, 3 data problems,
4 numerical failures, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import torch

from . import report
from .config import build_generation_spec, load_run_config, rca_settings
from .dataio import apply_scaler, fit_scaler, load_csv
from .errors import ConfigError, TscausalError
from .metrics import auroc
from .model import CausalDiscoveryModel, ModelConfig
from .rca import channel_scores, estimate_noise_matrix, fit_reference, rank_root_causes
from .seeding import child_seed
from .synthgen.dataset import generate_dataset, load_manifest, load_split
from .train import (
    TrainConfig,
    evaluate_graph_auroc,
    fit,
    load_checkpoint,
    prepare_split,
    save_checkpoint,
)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _dataset_shape(manifest: dict) -> tuple[int, int]:
    """(num_channels, n_lags) of a single-size dataset."""
    sizes = manifest["spec"]["node_sizes"]
    if len(sizes) != 1:
        raise ConfigError(
            f"training needs a single channel count per dataset, found {sizes}; "
            "generate one dataset per size"
        )
    return int(sizes[0]), int(manifest["spec"]["n_lags"])


def _build_model(args, cfg: dict, num_channels: int, n_lags: int) -> CausalDiscoveryModel:
    section = dict(cfg["model"])
    for key, value in (("num_channels", num_channels), ("n_lags", n_lags)):
        if key in section and int(section[key]) != value:
            raise ConfigError(
                f"model.{key}={section[key]} conflicts with the dataset's {key}={value}"
            )
        section[key] = value
    model_cfg = ModelConfig.from_dict(section)
    torch.manual_seed(child_seed(args.seed, "init"))
    return CausalDiscoveryModel(model_cfg)


def _train_config(args, cfg: dict, mode: str) -> TrainConfig:
    section = {"mode": mode, "seed": args.seed} | dict(cfg["train"])
    section["mode"] = mode
    section["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        section["epochs"] = args.epochs
    return TrainConfig.from_dict(section)


def _load_series_csv(path: str, timestamp_column: str | None):
    series = load_csv(path, timestamp_column=timestamp_column)
    return series


def cmd_gen(args) -> int:
    cfg = load_run_config(args.config)
    spec = build_generation_spec(cfg["generation"], preset=args.preset, seed=args.seed)
    if args.dry_run:
        print(json.dumps(spec.planned_counts(), indent=2, sort_keys=True))
        return 0
    out = _out_dir(args)
    manifest = generate_dataset(spec, out, verbose=args.verbose)
    counts = {name: len(split["series"]) for name, split in manifest["splits"].items()}
    print(f"wrote dataset to {out} (series per split: {json.dumps(counts, sort_keys=True)})")
    return 0


def _save_history(out: Path, result, train_cfg: TrainConfig) -> None:
    rows = []
    for entry in result.history:
        row = {"epoch": entry["epoch"]}
        row.update({f"train_{k}": v for k, v in entry["train"].items()})
        if "val" in entry:
            row.update({f"val_{k}": v for k, v in entry["val"].items()})
        rows.append(row)
    pd.DataFrame(rows).to_csv(out / "history.csv", index=False)
    report.training_curves(result.history, out / "training_curves.png")


def cmd_pretrain(args) -> int:
    cfg = load_run_config(args.config)
    manifest = load_manifest(args.data)
    num_channels, n_lags = _dataset_shape(manifest)
    model = _build_model(args, cfg, num_channels, n_lags)
    train_cfg = _train_config(args, cfg, "pretrain")
    if args.dry_run:
        print(json.dumps({"model": model.config.to_dict(), "train": train_cfg.to_dict()},
                         indent=2, sort_keys=True))
        return 0
    train = prepare_split(load_split(args.data, "train", manifest), n_lags, require_twins=True)
    val = None
    if "val" in manifest["splits"]:
        val = prepare_split(load_split(args.data, "val", manifest), n_lags)
    result = fit(model, train, val, train_cfg, verbose=args.verbose)
    out = _out_dir(args)
    metrics = {
        "mode": "pretrain",
        "epochs_run": len(result.history),
        "best_epoch": result.best_epoch,
        "best_val_total": result.best_val_total,
        "stopped_early": result.stopped_early,
    }
    if val is not None:
        metrics["val_auroc"] = evaluate_graph_auroc(model, val)
    save_checkpoint(
        out / "checkpoint.pt", model, train_config=train_cfg.to_dict(),
        history=result.history, extra={"metrics": metrics},
    )
    _save_history(out, result, train_cfg)
    _write_json(out / "metrics.json", metrics)
    print(json.dumps(metrics, sort_keys=True))
    return 0


def cmd_finetune(args) -> int:
    cfg = load_run_config(args.config)
    model, _ = load_checkpoint(args.checkpoint)
    train_cfg = _train_config(args, cfg, "finetune")
    data_path = Path(args.data)
    n_lags = model.config.n_lags
    if data_path.is_dir():
        manifest = load_manifest(data_path)
        num_channels, data_lags = _dataset_shape(manifest)
        if num_channels != model.config.num_channels:
            raise ConfigError(
                f"dataset has {num_channels} channels, checkpoint expects "
                f"{model.config.num_channels}"
            )
        split = prepare_split(load_split(data_path, args.split, manifest), n_lags)
    else:
        series = _load_series_csv(args.data, args.timestamp_column)
        if series.num_channels != model.config.num_channels:
            raise ConfigError(
                f"series has {series.num_channels} channels, checkpoint expects "
                f"{model.config.num_channels}"
            )
        from .train.data import TensorSplit

        scaled = apply_scaler(series.values, fit_scaler(series.values))
        split = TensorSplit(
            series=torch.as_tensor(scaled[None], dtype=torch.float32),
            graph_targets=torch.zeros(
                1, n_lags * series.num_channels, series.num_channels
            ),
            series_ids=[series.series_id or "series-0"],
            graph_ids=[series.graph_id or ""],
            n_lags=n_lags,
        )
    if args.dry_run:
        print(json.dumps({"train": train_cfg.to_dict(), "series": split.size},
                         indent=2, sort_keys=True))
        return 0
    result = fit(model, split, None, train_cfg, verbose=args.verbose)
    out = _out_dir(args)
    metrics = {
        "mode": "finetune",
        "epochs_run": len(result.history),
        "best_epoch": result.best_epoch,
        "best_total": result.best_val_total,
    }
    save_checkpoint(
        out / "checkpoint.pt", model, train_config=train_cfg.to_dict(),
        history=result.history, extra={"metrics": metrics},
    )
    _save_history(out, result, train_cfg)
    _write_json(out / "metrics.json", metrics)
    print(json.dumps(metrics, sort_keys=True))
    return 0


def cmd_eval_cd(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    manifest = load_manifest(args.data)
    num_channels, n_lags = _dataset_shape(manifest)
    if num_channels != model.config.num_channels or n_lags != model.config.n_lags:
        raise ConfigError(
            f"dataset shape (C={num_channels}, n={n_lags}) does not match checkpoint "
            f"(C={model.config.num_channels}, n={model.config.n_lags})"
        )
    split = prepare_split(load_split(args.data, args.split, manifest), n_lags)
    out = _out_dir(args)
    rows = []
    lag_tallies: dict[int, list[float]] = {}
    first_example = None
    model.eval()
    with torch.no_grad():
        for start in range(0, split.size, 16):
            idx = np.arange(start, min(start + 16, split.size))
            batch = split.slice(idx)
            probs = model(batch["series"]).graph_probs.numpy()
            for row in range(probs.shape[0]):
                target = batch["graph"][row].numpy()
                flat_t = target.ravel()
                score = float("nan")
                if flat_t.min() != flat_t.max():
                    score = auroc(probs[row].ravel(), flat_t)
                    for lag, value in report.per_lag_auroc(
                        probs[row], target, num_channels
                    ).items():
                        lag_tallies.setdefault(lag, []).append(value)
                position = start + row
                rows.append(
                    {
                        "series_id": split.series_ids[position],
                        "graph_id": split.graph_ids[position],
                        "auroc": score,
                    }
                )
                if first_example is None:
                    first_example = (probs[row], target)
    frame = pd.DataFrame(rows)
    frame.to_csv(out / "series_auroc.csv", index=False)
    mean_auroc = float(frame["auroc"].dropna().mean())
    per_lag = {lag: float(np.mean(vals)) for lag, vals in sorted(lag_tallies.items())}
    report.graph_heatmap(
        first_example[0], out / "graph_heatmap.png",
        target=first_example[1], num_channels=num_channels,
    )
    if per_lag:
        report.lag_auroc_bars(per_lag, out / "lag_auroc.png")
    metrics = {
        "split": args.split,
        "num_series": int(len(rows)),
        "mean_auroc": mean_auroc,
        "per_lag_auroc": {str(k): v for k, v in per_lag.items()},
    }
    _write_json(out / "metrics.json", metrics)
    print(json.dumps(metrics, sort_keys=True))
    return 0


def cmd_eval_rca(args) -> int:
    cfg = load_run_config(args.config)
    rca_cfg = rca_settings(cfg["rca"])
    if args.risk is not None:
        rca_cfg["risk"] = args.risk
    if args.q_init is not None:
        rca_cfg["q_init"] = args.q_init
    if args.signed:
        rca_cfg["signed"] = True
    model, _ = load_checkpoint(args.checkpoint)
    reference = _load_series_csv(args.reference, args.timestamp_column)
    online = _load_series_csv(args.online, args.timestamp_column)
    if reference.num_channels != online.num_channels:
        raise ConfigError(
            f"reference has {reference.num_channels} channels, online has "
            f"{online.num_channels}"
        )
    if reference.num_channels != model.config.num_channels:
        raise ConfigError(
            f"series have {reference.num_channels} channels, checkpoint expects "
            f"{model.config.num_channels}"
        )
    params = fit_scaler(reference.values)
    ref_values = apply_scaler(reference.values, params)
    online_values = apply_scaler(online.values, params)

    noise_ref = fit_reference(model, ref_values)
    ref_scores = channel_scores(
        estimate_noise_matrix(model, ref_values), noise_ref, signed=rca_cfg["signed"]
    )
    online_scores = channel_scores(
        estimate_noise_matrix(model, online_values), noise_ref, signed=rca_cfg["signed"]
    )
    result = rank_root_causes(
        ref_scores, online_scores, risk=rca_cfg["risk"], q_init=rca_cfg["q_init"]
    )
    out = _out_dir(args)
    names = list(online.channel_names)
    rows = []
    for rank, channel in enumerate(result.ranking):
        det = result.detections[channel]
        rows.append(
            {
                "rank": rank + 1,
                "channel": channel,
                "channel_name": names[channel],
                "flagged_windows": len(det.flagged_steps),
                "max_excess": det.max_excess,
                "threshold": det.final_threshold,
            }
        )
    pd.DataFrame(rows).to_csv(out / "root_causes.csv", index=False)
    report.score_traces(
        online_scores,
        out / "score_traces.png",
        thresholds=np.array([d.final_threshold for d in result.detections]),
        flagged={d.channel: d.flagged_steps for d in result.detections},
        channel_names=names,
    )
    metrics = {
        "ranking": [int(c) for c in result.ranking],
        "ranking_names": [names[c] for c in result.ranking],
        "flagged": {
            str(d.channel): len(d.flagged_steps)
            for d in result.detections
            if d.flagged_steps
        },
        "risk": rca_cfg["risk"],
        "q_init": rca_cfg["q_init"],
    }
    _write_json(out / "metrics.json", metrics)
    print(json.dumps(metrics, sort_keys=True))
    return 0


def cmd_score(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    series = _load_series_csv(args.data, args.timestamp_column)
    if series.num_channels != model.config.num_channels:
        raise ConfigError(
            f"series has {series.num_channels} channels, checkpoint expects "
            f"{model.config.num_channels}"
        )
    values = apply_scaler(series.values, fit_scaler(series.values))
    probs = model.predict_graph(
        torch.as_tensor(values[None], dtype=torch.float32)
    )[0].numpy()
    noise = estimate_noise_matrix(model, values)
    out = _out_dir(args)
    names = list(series.channel_names)
    n_lags = model.config.n_lags
    row_labels = [
        f"{names[j]}@lag{n_lags - k}"
        for k in range(n_lags)
        for j in range(len(names))
    ]
    pd.DataFrame(probs, index=row_labels, columns=names).to_csv(out / "graph_probs.csv")
    noise_frame = pd.DataFrame(noise, columns=names)
    noise_frame.insert(0, "time", np.arange(noise.shape[0]) + n_lags)
    noise_frame.to_csv(out / "noise_estimates.csv", index=False)
    report.graph_heatmap(probs, out / "graph_heatmap.png", num_channels=len(names))
    metrics = {"num_windows": int(noise.shape[0]), "channels": names}
    _write_json(out / "metrics.json", metrics)
    print(json.dumps(metrics, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tscausal",
        description="Causal discovery and root-cause analysis for multivariate time series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_out: bool = True) -> None:
        p.add_argument("--config", default=None, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=0, help="top-level random seed")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--dry-run", action="store_true", help="print the plan and exit")
        p.add_argument("--verbose", action="store_true", help="progress output")

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--preset", choices=("desk", "paper"), default="desk")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("pretrain", help="pretrain on a synthetic dataset")
    common(p)
    p.add_argument("--data", required=True, help="dataset directory (from gen)")
    p.add_argument("--epochs", type=int, default=None, help="override epoch count")
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("finetune", help="adapt a checkpoint to new series")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset directory or CSV file")
    p.add_argument("--split", default="train", help="split name when --data is a dataset")
    p.add_argument("--timestamp-column", default=None)
    p.add_argument("--epochs", type=int, default=None, help="override epoch count")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("eval-cd", help="graph recovery metrics on a dataset split")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--split", default="test")
    p.set_defaults(func=cmd_eval_cd)

    p = sub.add_parser("eval-rca", help="rank root-cause channels of an incident")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--reference", required=True, help="CSV of normal operation")
    p.add_argument("--online", required=True, help="CSV covering the incident")
    p.add_argument("--timestamp-column", default=None)
    p.add_argument("--risk", type=float, default=None)
    p.add_argument("--q-init", type=float, default=None)
    p.add_argument("--signed", action="store_true", help="keep deviation signs in scores")
    p.set_defaults(func=cmd_eval_rca)

    p = sub.add_parser("score", help="graph probabilities and noise estimates for a CSV")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="CSV file")
    p.add_argument("--timestamp-column", default=None)
    p.set_defaults(func=cmd_score)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TscausalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
