"""Tests for training configuration, batching, loops, and checkpoints."""

import math

import numpy as np
import pytest
import torch

from tscausal.errors import ConfigError, DataError
from tscausal.model import CausalDiscoveryModel, ModelConfig
from tscausal.synthgen.dataset import GenerationSpec, SplitSpec, generate_dataset, load_split
from tscausal.train import (
    FINETUNE_LR,
    PRETRAIN_LR,
    LossBreakdown,
    TrainConfig,
    batch_indices,
    evaluate_graph_auroc,
    finetune_step,
    fit,
    load_checkpoint,
    pretrain_step,
    prepare_split,
    save_checkpoint,
    subsample_windows,
    validate,
)
from tscausal.train.loop import _make_generators
from tscausal.seeding import seed_streams


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    spec = GenerationSpec(
        node_sizes=(4,),
        n_lags=2,
        topology="er",
        density=0.15,
        length=60,
        burn_in=50,
        seed=5,
        splits={
            "train": SplitSpec(graphs=6, series_per_graph=2, interventions=True),
            "val": SplitSpec(graphs=2, series_per_graph=1, interventions=True),
            "test": SplitSpec(graphs=2, series_per_graph=1, interventions=False),
        },
    )
    out = tmp_path_factory.mktemp("dataset")
    generate_dataset(spec, out)
    return out


@pytest.fixture(scope="module")
def train_split(dataset_dir):
    return prepare_split(load_split(dataset_dir, "train"), n_lags=2)


@pytest.fixture(scope="module")
def val_split(dataset_dir):
    return prepare_split(load_split(dataset_dir, "val"), n_lags=2)


def small_model(seed: int = 0) -> CausalDiscoveryModel:
    torch.manual_seed(seed)
    cfg = ModelConfig(
        num_channels=4, n_lags=2, embed_dim=16, num_blocks=2, mixture_components=4
    )
    return CausalDiscoveryModel(cfg)


class TestTrainConfig:
    def test_mode_sets_default_learning_rate(self):
        assert TrainConfig(mode="pretrain").learning_rate == PRETRAIN_LR
        assert TrainConfig(mode="finetune").learning_rate == FINETUNE_LR

    def test_explicit_learning_rate_wins(self):
        assert TrainConfig(mode="finetune", learning_rate=0.5).learning_rate == 0.5

    def test_round_trip(self):
        cfg = TrainConfig(mode="finetune", epochs=7, max_windows=None)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key_raises(self):
        with pytest.raises(ConfigError):
            TrainConfig.from_dict({"mode": "pretrain", "momentum": 0.9})

    def test_bad_values_raise(self):
        with pytest.raises(ConfigError):
            TrainConfig(mode="sideways")
        with pytest.raises(ConfigError):
            TrainConfig(epochs=0)
        with pytest.raises(ConfigError):
            TrainConfig(temperature=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(max_windows=0)


class TestPrepareSplit:
    def test_scaling_to_unit_interval(self, train_split):
        lo = float(train_split.series.min())
        hi = float(train_split.series.max())
        assert lo >= 0.0 and hi <= 1.0
        # every channel of every series actually touches both endpoints
        assert torch.allclose(train_split.series.amin(dim=1), torch.zeros(1))
        assert torch.allclose(train_split.series.amax(dim=1), torch.ones(1))

    def test_twin_uses_clean_scaling(self, dataset_dir):
        from tscausal.dataio import apply_scaler, fit_scaler

        split = load_split(dataset_dir, "train")
        prepared = prepare_split(split, n_lags=2)
        s = split.series[0]
        params = fit_scaler(s.values)
        expected = apply_scaler(split.intervened[s.series_id], params)
        got = prepared.twins[0].numpy()
        assert np.allclose(got, expected, atol=1e-6)

    def test_graph_targets_match_window_layout(self, dataset_dir, train_split):
        split = load_split(dataset_dir, "train")
        flat = split.graphs[train_split.graph_ids[0]].flatten_window()
        assert train_split.graph_targets[0].shape == flat.shape
        assert np.array_equal(train_split.graph_targets[0].numpy(), flat)

    def test_labels_shape_matches_window_count(self, train_split):
        assert train_split.twin_labels.shape == (train_split.size, train_split.num_windows)

    def test_split_without_twins(self, dataset_dir):
        prepared = prepare_split(load_split(dataset_dir, "test"), n_lags=2)
        assert prepared.twins is None and prepared.twin_labels is None
        with pytest.raises(DataError):
            prepare_split(load_split(dataset_dir, "test"), n_lags=2, require_twins=True)


class TestBatching:
    def test_batches_cover_every_row_once(self):
        batches = batch_indices(10, 4)
        seen = np.concatenate(batches)
        assert sorted(seen.tolist()) == list(range(10))
        assert [len(b) for b in batches] == [4, 4, 2]

    def test_shuffle_is_deterministic(self):
        a = batch_indices(20, 8, np.random.default_rng(3))
        b = batch_indices(20, 8, np.random.default_rng(3))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))
        c = batch_indices(20, 8, np.random.default_rng(4))
        assert any(not np.array_equal(x, y) for x, y in zip(a, c))

    def test_subsample_cap_off(self):
        assert torch.equal(subsample_windows(5, None), torch.arange(5))
        assert torch.equal(subsample_windows(5, 9), torch.arange(5))

    def test_subsample_sorted_unique(self):
        g = torch.Generator().manual_seed(0)
        idx = subsample_windows(50, 10, g)
        vals = idx.tolist()
        assert len(vals) == 10
        assert vals == sorted(set(vals))


class TestLossBreakdown:
    def test_total_matches_recomputation_exactly(self):
        named = {"a": torch.tensor(1.37), "b": torch.tensor(0.021)}
        weights = {"a": 1.0, "b": 0.6}
        tensor_total, bd = LossBreakdown.assemble(named, weights)
        assert bd.total == bd.recomputed_total()
        assert math.isclose(float(tensor_total), bd.total, rel_tol=1e-6)

    def test_terms_are_unweighted(self):
        named = {"a": torch.tensor(2.0)}
        _, bd = LossBreakdown.assemble(named, {"a": 0.5})
        assert bd.terms["a"] == 2.0
        assert bd.total == 1.0


class TestSteps:
    def test_pretrain_terms_and_gradients(self, train_split):
        model = small_model()
        cfg = TrainConfig(mode="pretrain", max_windows=16, seed=1)
        gens = _make_generators(seed_streams(cfg.seed))
        batch = train_split.slice(np.arange(4))
        loss, bd = pretrain_step(model, train_split, batch, cfg, gens)
        assert set(bd.terms) == {"recon", "graph", "kl", "intervention"}
        assert math.isfinite(bd.total)
        loss.backward()
        for name in (
            "encoder.embed.project.weight",
            "graph_head.lag_proj.0.weight",
            "intervention_head.score.0.weight",
            "posterior.project.weight",
            "router.net.0.weight",
            "prior.means",
            "decoder.feature.0.weight",
        ):
            param = dict(model.named_parameters())[name]
            assert param.grad is not None, name
            assert float(param.grad.abs().sum()) > 0.0, name

    def test_ablation_flags_drop_terms(self, train_split):
        model = small_model()
        gens = _make_generators(seed_streams(0))
        batch = train_split.slice(np.arange(3))
        cfg = TrainConfig(mode="pretrain", max_windows=16, use_intervention=False)
        _, bd = pretrain_step(model, train_split, batch, cfg, gens)
        assert "intervention" not in bd.terms

    def test_mixup_flag_changes_graph_term(self, train_split):
        batch = train_split.slice(np.arange(3))
        on = TrainConfig(mode="pretrain", max_windows=16, use_mixup=True)
        off = TrainConfig(mode="pretrain", max_windows=16, use_mixup=False)
        _, bd_on = pretrain_step(small_model(), train_split, batch, on, _make_generators(seed_streams(0)))
        _, bd_off = pretrain_step(small_model(), train_split, batch, off, _make_generators(seed_streams(0)))
        # mixup adds a second cross-entropy, so the graph term roughly doubles
        assert bd_on.terms["graph"] > bd_off.terms["graph"] * 1.5

    def test_fixed_prior_has_no_prior_gradients(self, train_split):
        torch.manual_seed(0)
        cfg_m = ModelConfig(
            num_channels=4, n_lags=2, embed_dim=16, num_blocks=2,
            mixture_components=4, fixed_prior=True,
        )
        model = CausalDiscoveryModel(cfg_m)
        assert not any(n.startswith("prior.") for n, _ in model.named_parameters())
        cfg = TrainConfig(mode="pretrain", max_windows=16)
        gens = _make_generators(seed_streams(0))
        loss, _ = pretrain_step(model, train_split, train_split.slice(np.arange(3)), cfg, gens)
        loss.backward()  # still differentiable end to end

    def test_finetune_uses_only_recon_and_kl(self, train_split):
        model = small_model()
        cfg = TrainConfig(mode="finetune", max_windows=16)
        gens = _make_generators(seed_streams(0))
        _, bd = finetune_step(model, train_split, train_split.slice(np.arange(3)), cfg, gens)
        assert set(bd.terms) == {"recon", "kl"}
        assert bd.weights == {"recon": 1.0, "kl": cfg.weight_kl}


class TestFit:
    def test_loss_decreases(self, train_split, val_split):
        model = small_model()
        cfg = TrainConfig(mode="pretrain", epochs=4, batch_size=4, max_windows=16, seed=3)
        result = fit(model, train_split, val_split, cfg)
        first = result.history[0]["train"]["total"]
        last = result.history[-1]["train"]["total"]
        assert last < first

    def test_identical_seeds_identical_curves(self, train_split, val_split):
        cfg = TrainConfig(mode="pretrain", epochs=3, batch_size=4, max_windows=16, seed=3)
        r1 = fit(small_model(), train_split, val_split, cfg)
        r2 = fit(small_model(), train_split, val_split, cfg)
        for a, b in zip(r1.history, r2.history):
            assert a["train"]["total"] == b["train"]["total"]
            assert a["val"]["total"] == b["val"]["total"]

    def test_best_weights_restored(self, train_split, val_split):
        model = small_model()
        cfg = TrainConfig(mode="pretrain", epochs=4, batch_size=4, max_windows=16, seed=3)
        result = fit(model, train_split, val_split, cfg)
        after = validate(model, val_split, cfg, seed_streams(cfg.seed)["eval"])
        assert after.total == result.best_val_total

    def test_early_stopping_on_flat_validation(self, train_split, val_split):
        model = small_model()
        cfg = TrainConfig(
            mode="pretrain", epochs=10, batch_size=4, max_windows=16,
            patience=1, learning_rate=1e-20, seed=3,
        )
        result = fit(model, train_split, val_split, cfg)
        assert result.stopped_early
        assert len(result.history) < 10

    def test_without_validation_monitors_training_total(self, train_split):
        model = small_model()
        cfg = TrainConfig(mode="pretrain", epochs=2, batch_size=4, max_windows=16, seed=3)
        result = fit(model, train_split, None, cfg)
        assert "val" not in result.history[0]
        assert result.best_val_total == min(e["train"]["total"] for e in result.history)


class TestValidate:
    def test_deterministic_across_calls(self, train_split, val_split):
        model = small_model()
        cfg = TrainConfig(mode="pretrain", max_windows=16)
        a = validate(model, val_split, cfg, eval_seed=11)
        b = validate(model, val_split, cfg, eval_seed=11)
        assert a.total == b.total

    def test_restores_training_mode(self, val_split):
        model = small_model()
        model.train()
        validate(model, val_split, TrainConfig(max_windows=16), eval_seed=0)
        assert model.training


class TestEvaluateGraphAuroc:
    def test_in_unit_interval_and_deterministic(self, val_split):
        model = small_model()
        a = evaluate_graph_auroc(model, val_split)
        b = evaluate_graph_auroc(model, val_split)
        assert 0.0 <= a <= 1.0
        assert a == b


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        model = small_model()
        path = tmp_path / "model.pt"
        save_checkpoint(path, model, train_config={"mode": "pretrain"}, history=[{"epoch": 0}])
        loaded, meta = load_checkpoint(path)
        sd1, sd2 = model.state_dict(), loaded.state_dict()
        assert set(sd1) == set(sd2)
        for key in sd1:
            assert torch.equal(sd1[key], sd2[key]), key
        assert meta["train_config"] == {"mode": "pretrain"}
        assert meta["history"] == [{"epoch": 0}]

    def test_double_precision_round_trip(self, tmp_path):
        model = small_model().double()
        path = tmp_path / "model64.pt"
        save_checkpoint(path, model)
        loaded, _ = load_checkpoint(path)
        for key, value in model.state_dict().items():
            assert loaded.state_dict()[key].dtype == value.dtype
            assert torch.equal(loaded.state_dict()[key], value)

    def test_corrupted_payload_rejected(self, tmp_path):
        model = small_model()
        path = tmp_path / "model.pt"
        save_checkpoint(path, model)
        blob = torch.load(path, weights_only=False)
        payload = bytearray(blob["payload"])
        payload[len(payload) // 2] ^= 0xFF
        blob["payload"] = bytes(payload)
        torch.save(blob, path)
        with pytest.raises(DataError, match="checksum"):
            load_checkpoint(path)

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(DataError):
            load_checkpoint(tmp_path / "absent.pt")

    def test_wrong_format_rejected(self, tmp_path):
        path = tmp_path / "other.pt"
        torch.save({"format_version": 99}, path)
        with pytest.raises(DataError):
            load_checkpoint(path)
