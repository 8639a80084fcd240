"""Synthetic lagged-SCM time series: graphs, mechanisms, noise, datasets."""

from .graphs import sample_graph
from .mechanisms import MechanismSet
from .noise import GaussianMixtureNoiseSpec, sample_noise_model
from .simulate import SimulationResult, apply_intervention, simulate, simulate_with_spikes
from .dataset import (
    DatasetSplit,
    GenerationSpec,
    SplitSpec,
    desk_generation_spec,
    generate_dataset,
    load_manifest,
    load_split,
    paper_generation_spec,
    rebuild_generation_inputs,
    validate_split_disjointness,
)

__all__ = [
    "sample_graph",
    "MechanismSet",
    "GaussianMixtureNoiseSpec",
    "sample_noise_model",
    "SimulationResult",
    "simulate",
    "apply_intervention",
    "simulate_with_spikes",
    "GenerationSpec",
    "SplitSpec",
    "DatasetSplit",
    "generate_dataset",
    "load_manifest",
    "load_split",
    "validate_split_disjointness",
    "rebuild_generation_inputs",
    "desk_generation_spec",
    "paper_generation_spec",
]
