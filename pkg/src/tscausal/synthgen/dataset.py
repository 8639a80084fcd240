"""Dataset generation and persistence.

Layout under the output directory:

    manifest.json             ids, seeds, shapes, sha256 per file
    <split>/series/<id>.npy   one columnar array per series (and .do.npy twin)
    <split>/graphs.jsonl      one graph per line, sparse edge list
    <split>/noise.jsonl       one noise spec per line
    <split>/interventions.jsonl

Everything is keyed off the top-level seed through fixed SeedSequence paths,
so regenerating with the same spec reproduces byte-identical files.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError, DataError
from ..types import InterventionRecord, LaggedCausalGraph, MultivariateSeries
from .graphs import sample_graph
from .mechanisms import MechanismSet
from .noise import GaussianMixtureNoiseSpec, sample_noise_model
from .simulate import SimulationResult, apply_intervention, simulate

FORMAT_VERSION = 1
_INTERVENTION_DURATION = (5, 20)  # inclusive range for t2 - t1 + 1


@dataclass
class SplitSpec:
    graphs: int
    series_per_graph: int
    interventions: bool

    def to_dict(self) -> dict:
        return {
            "graphs": self.graphs,
            "series_per_graph": self.series_per_graph,
            "interventions": self.interventions,
        }


@dataclass
class GenerationSpec:
    """Everything needed to regenerate a dataset bit-for-bit."""

    node_sizes: tuple[int, ...]
    n_lags: int
    topology: str
    density: float
    length: int
    burn_in: int
    seed: int
    splits: dict[str, SplitSpec]
    mechanism_hidden: int = 64
    shared_mechanisms: bool = False
    max_noise_components: int = 5

    def __post_init__(self) -> None:
        self.node_sizes = tuple(int(s) for s in self.node_sizes)
        if not self.node_sizes:
            raise ConfigError("node_sizes must not be empty")
        if self.length < self.n_lags + 1:
            raise ConfigError(
                f"length {self.length} shorter than one window (n+1={self.n_lags + 1})"
            )

    def to_dict(self) -> dict:
        return {
            "node_sizes": list(self.node_sizes),
            "n_lags": self.n_lags,
            "topology": self.topology,
            "density": self.density,
            "length": self.length,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "splits": {name: s.to_dict() for name, s in self.splits.items()},
            "mechanism_hidden": self.mechanism_hidden,
            "shared_mechanisms": self.shared_mechanisms,
            "max_noise_components": self.max_noise_components,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "GenerationSpec":
        splits = {name: SplitSpec(**s) for name, s in payload["splits"].items()}
        fields = {k: v for k, v in payload.items() if k != "splits"}
        fields["node_sizes"] = tuple(fields["node_sizes"])
        return cls(splits=splits, **fields)

    def planned_counts(self) -> dict[str, dict[str, int]]:
        """Per-split graph/series counts, for dry runs and logs."""
        out = {}
        for name, split in self.splits.items():
            graphs = split.graphs * len(self.node_sizes)
            out[name] = {
                "graphs": graphs,
                "series": graphs * split.series_per_graph,
                "intervened_series": graphs * split.series_per_graph if split.interventions else 0,
            }
        return out


def desk_generation_spec(seed: int = 0) -> GenerationSpec:
    """Small single-size corpus that trains on one CPU in minutes."""
    return GenerationSpec(
        node_sizes=(5,),
        n_lags=3,
        topology="er",
        density=0.12,
        length=100,
        burn_in=100,
        seed=seed,
        splits={
            "train": SplitSpec(graphs=400, series_per_graph=5, interventions=True),
            "val": SplitSpec(graphs=100, series_per_graph=1, interventions=True),
            "test": SplitSpec(graphs=100, series_per_graph=1, interventions=False),
        },
    )


def paper_generation_spec(seed: int = 0) -> GenerationSpec:
    """Full-scale corpus: node counts 5..40, a thousand training graphs each,
    five series per graph, hundred-step series after a hundred-step burn-in."""
    return GenerationSpec(
        node_sizes=(5, 10, 15, 20, 25, 30, 35, 40),
        n_lags=3,
        topology="er",
        density=0.1,
        length=100,
        burn_in=100,
        seed=seed,
        splits={
            "train": SplitSpec(graphs=1000, series_per_graph=5, interventions=True),
            "val": SplitSpec(graphs=100, series_per_graph=1, interventions=True),
            "test": SplitSpec(graphs=100, series_per_graph=1, interventions=False),
        },
    )


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _npy_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, array)
    return buf.getvalue()


def _graph_bundle(
    spec: GenerationSpec, num_channels: int, graph_index: int, graph_id: str
) -> tuple[LaggedCausalGraph, MechanismSet, GaussianMixtureNoiseSpec]:
    """Graph, mechanisms and noise spec from the graph-level seed path.

    The call sequence on the rng is fixed; loaders rebuilding mechanisms from
    the manifest replay it exactly. A short probe simulation damps the target
    networks of the rare unstable draw until trajectories stay bounded, so
    stored series carry structure instead of clip-guard saturation.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1, graph_index]))
    graph = sample_graph(num_channels, spec.n_lags, spec.topology, spec.density, rng, graph_id)
    mechanisms = MechanismSet.random(
        graph, rng, hidden=spec.mechanism_hidden, shared=spec.shared_mechanisms
    )
    noise_spec = sample_noise_model(num_channels, rng, spec.max_noise_components)
    probe_len = spec.length + spec.burn_in
    for _ in range(12):
        bounded = True
        for stream in (0, 1):
            probe = simulate(
                spec.n_lags, mechanisms, noise_spec, length=probe_len, burn_in=0,
                rng=np.random.default_rng(
                    np.random.SeedSequence([spec.seed, 4, graph_index, stream])
                ),
            )
            if np.abs(probe.series.values).max() > 30.0:
                bounded = False
                break
        if bounded:
            break
        mechanisms.target_g.w3 = mechanisms.target_g.w3 * 0.6
        mechanisms.target_g.b3 = mechanisms.target_g.b3 * 0.6
    return graph, mechanisms, noise_spec


def _simulate_series(
    spec: GenerationSpec,
    mechanisms: MechanismSet,
    noise_spec: GaussianMixtureNoiseSpec,
    graph_index: int,
    series_index: int,
    series_id: str,
    graph_id: str,
) -> SimulationResult:
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 2, graph_index, series_index]))
    return simulate(
        spec.n_lags,
        mechanisms,
        noise_spec,
        spec.length,
        burn_in=spec.burn_in,
        rng=rng,
        series_id=series_id,
        graph_id=graph_id,
    )


def _intervene_series(
    spec: GenerationSpec,
    sim: SimulationResult,
    mechanisms: MechanismSet,
    noise_spec: GaussianMixtureNoiseSpec,
    graph_index: int,
    series_index: int,
) -> tuple[MultivariateSeries, InterventionRecord]:
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 3, graph_index, series_index]))
    lo, hi = _INTERVENTION_DURATION
    duration = int(rng.integers(lo, hi + 1))
    duration = min(duration, spec.length)
    t1 = int(rng.integers(0, spec.length - duration + 1))
    return apply_intervention(
        sim, spec.n_lags, mechanisms, noise_spec, t1, t1 + duration - 1, rng
    )


def generate_dataset(spec: GenerationSpec, out_dir: str | Path, verbose: bool = False) -> dict:
    """Generate and persist every split; returns the manifest dict."""
    out = Path(out_dir)
    manifest: dict = {
        "format_version": FORMAT_VERSION,
        "seed": spec.seed,
        "spec": spec.to_dict(),
        "splits": {},
    }
    graph_index = 0
    for split_name, split in spec.splits.items():
        split_dir = out / split_name
        (split_dir / "series").mkdir(parents=True, exist_ok=True)
        graph_rows, noise_rows, intervention_rows = [], [], []
        graph_entries, series_entries = [], []
        for num_channels in spec.node_sizes:
            for _ in range(split.graphs):
                graph_id = f"g{graph_index:05d}-c{num_channels}"
                graph, mechanisms, noise_spec = _graph_bundle(
                    spec, num_channels, graph_index, graph_id
                )
                ks, js, is_ = np.nonzero(graph.edges)
                graph_rows.append(
                    json.dumps(
                        {
                            "graph_id": graph_id,
                            "num_channels": num_channels,
                            "n_lags": spec.n_lags,
                            "edges": [
                                [int(k), int(j), int(i)] for k, j, i in zip(ks, js, is_)
                            ],
                        },
                        sort_keys=True,
                    )
                )
                noise_rows.append(
                    json.dumps(
                        {"graph_id": graph_id, **noise_spec.to_dict()}, sort_keys=True
                    )
                )
                graph_entries.append(
                    {
                        "graph_id": graph_id,
                        "num_channels": num_channels,
                        "num_edges": graph.num_edges,
                        "seed_path": [spec.seed, 1, graph_index],
                    }
                )
                for series_index in range(split.series_per_graph):
                    series_id = f"{graph_id}-r{series_index}"
                    sim = _simulate_series(
                        spec, mechanisms, noise_spec, graph_index, series_index,
                        series_id, graph_id,
                    )
                    rel = f"{split_name}/series/{series_id}.npy"
                    payload = _npy_bytes(sim.series.values)
                    (out / rel).write_bytes(payload)
                    entry = {
                        "series_id": series_id,
                        "graph_id": graph_id,
                        "file": rel,
                        "shape": list(sim.series.values.shape),
                        "sha256": _sha256(payload),
                        "seed_path": [spec.seed, 2, graph_index, series_index],
                    }
                    if split.interventions:
                        do_series, record = _intervene_series(
                            spec, sim, mechanisms, noise_spec, graph_index, series_index
                        )
                        do_rel = f"{split_name}/series/{series_id}.do.npy"
                        do_payload = _npy_bytes(do_series.values)
                        (out / do_rel).write_bytes(do_payload)
                        entry["do_file"] = do_rel
                        entry["do_sha256"] = _sha256(do_payload)
                        intervention_rows.append(
                            json.dumps(
                                {
                                    "series_id": series_id,
                                    "graph_id": graph_id,
                                    "t1": record.t1,
                                    "t2": record.t2,
                                    "channels": list(record.channels),
                                    "values": list(record.values),
                                },
                                sort_keys=True,
                            )
                        )
                    series_entries.append(entry)
                graph_index += 1
        files = {}
        for fname, rows in (
            ("graphs.jsonl", graph_rows),
            ("noise.jsonl", noise_rows),
            ("interventions.jsonl", intervention_rows),
        ):
            if fname == "interventions.jsonl" and not split.interventions:
                continue
            content = ("\n".join(rows) + "\n").encode() if rows else b""
            (split_dir / fname).write_bytes(content)
            files[fname] = _sha256(content)
        manifest["splits"][split_name] = {
            "graphs": graph_entries,
            "series": series_entries,
            "files": files,
        }
        if verbose:
            print(
                f"[gen] split {split_name}: {len(graph_entries)} graphs, "
                f"{len(series_entries)} series"
            )
    validate_split_disjointness(manifest)
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def validate_split_disjointness(manifest: dict) -> None:
    """Hard error if any graph id appears in more than one split."""
    seen: dict[str, str] = {}
    for split_name, split in manifest["splits"].items():
        for entry in split["graphs"]:
            gid = entry["graph_id"]
            if gid in seen:
                raise DataError(
                    f"graph id {gid} appears in splits {seen[gid]!r} and {split_name!r}"
                )
            seen[gid] = split_name


def load_manifest(dataset_dir: str | Path, verify: bool = False) -> dict:
    path = Path(dataset_dir) / "manifest.json"
    if not path.exists():
        raise DataError(f"no manifest.json under {dataset_dir}")
    manifest = json.loads(path.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise DataError(
            f"unsupported dataset format_version {manifest.get('format_version')!r}"
        )
    validate_split_disjointness(manifest)
    if verify:
        root = Path(dataset_dir)
        for split_name, split in manifest["splits"].items():
            for entry in split["series"]:
                for file_key, sum_key in (("file", "sha256"), ("do_file", "do_sha256")):
                    if file_key not in entry:
                        continue
                    blob = (root / entry[file_key]).read_bytes()
                    if _sha256(blob) != entry[sum_key]:
                        raise DataError(f"checksum mismatch for {entry[file_key]}")
            for fname, digest in split["files"].items():
                blob = (root / split_name / fname).read_bytes()
                if _sha256(blob) != digest:
                    raise DataError(f"checksum mismatch for {split_name}/{fname}")
    return manifest


@dataclass
class DatasetSplit:
    """One split loaded into memory."""

    name: str
    series: list[MultivariateSeries] = field(default_factory=list)
    graphs: dict[str, LaggedCausalGraph] = field(default_factory=dict)
    noise_specs: dict[str, GaussianMixtureNoiseSpec] = field(default_factory=dict)
    intervened: dict[str, np.ndarray] = field(default_factory=dict)
    records: dict[str, InterventionRecord] = field(default_factory=dict)

    @property
    def num_series(self) -> int:
        return len(self.series)


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def load_split(dataset_dir: str | Path, name: str, manifest: dict | None = None) -> DatasetSplit:
    root = Path(dataset_dir)
    manifest = manifest or load_manifest(root)
    if name not in manifest["splits"]:
        raise DataError(f"split {name!r} not in manifest (has {list(manifest['splits'])})")
    split_info = manifest["splits"][name]
    out = DatasetSplit(name=name)
    for row in _read_jsonl(root / name / "graphs.jsonl"):
        edges = np.zeros((row["n_lags"], row["num_channels"], row["num_channels"]))
        for k, j, i in row["edges"]:
            edges[k, j, i] = 1.0
        out.graphs[row["graph_id"]] = LaggedCausalGraph(edges=edges, graph_id=row["graph_id"])
    for row in _read_jsonl(root / name / "noise.jsonl"):
        out.noise_specs[row["graph_id"]] = GaussianMixtureNoiseSpec.from_dict(row)
    for row in _read_jsonl(root / name / "interventions.jsonl"):
        out.records[row["series_id"]] = InterventionRecord(
            series_id=row["series_id"],
            t1=row["t1"],
            t2=row["t2"],
            channels=tuple(row["channels"]),
            values=tuple(row["values"]),
        )
    for entry in split_info["series"]:
        path = root / entry["file"]
        if not path.exists():
            raise DataError(f"missing series file {entry['file']}")
        values = np.load(path)
        out.series.append(
            MultivariateSeries(
                values=values, series_id=entry["series_id"], graph_id=entry["graph_id"]
            )
        )
        if "do_file" in entry:
            out.intervened[entry["series_id"]] = np.load(root / entry["do_file"])
    return out


def rebuild_generation_inputs(
    dataset_dir: str | Path, graph_id: str, manifest: dict | None = None
) -> tuple[LaggedCausalGraph, MechanismSet, GaussianMixtureNoiseSpec]:
    """Reconstruct the exact graph, mechanisms and noise spec behind a stored
    graph id, using the seed path recorded in the manifest."""
    manifest = manifest or load_manifest(dataset_dir)
    spec = GenerationSpec.from_dict(manifest["spec"])
    for split in manifest["splits"].values():
        for entry in split["graphs"]:
            if entry["graph_id"] == graph_id:
                return _graph_bundle(
                    spec, entry["num_channels"], entry["seed_path"][2], graph_id
                )
    raise DataError(f"graph id {graph_id!r} not found in manifest")
