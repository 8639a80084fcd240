"""Evaluation metrics for graph recovery and root-cause ranking."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import DataError


def auroc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve via rank statistics with midrank tie handling.

    Equivalent to the probability that a uniformly drawn positive outscores a
    uniformly drawn negative, ties counting one half.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise DataError(f"{scores.size} scores for {labels.size} labels")
    if not np.isfinite(scores).all():
        raise DataError("scores contain non-finite values")
    pos = labels == 1
    neg = labels == 0
    if not (pos | neg).all():
        raise DataError("labels must be binary 0/1")
    n_pos, n_neg = int(pos.sum()), int(neg.sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUROC undefined: labels contain a single class")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def recall_at_k(
    rankings: Sequence[Sequence[int]],
    truths: Sequence[set[int] | Sequence[int]],
    k: int,
) -> float:
    """Mean over instances of |truth ∩ top-k| / min(k, |truth|).

    ``rankings`` holds channel indices best-first, one list per instance;
    ``truths`` the true root-cause channel sets. Repeated interventions on
    one channel collapse to a single root cause because truths are sets.
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    if len(rankings) != len(truths):
        raise DataError(f"{len(rankings)} rankings for {len(truths)} truth sets")
    if not rankings:
        raise DataError("no instances to evaluate")
    total = 0.0
    for idx, (ranking, truth) in enumerate(zip(rankings, truths)):
        truth_set = set(int(c) for c in truth)
        if not truth_set:
            raise DataError(f"instance {idx} has an empty true root-cause set")
        top = set(int(c) for c in list(ranking)[:k])
        total += len(truth_set & top) / min(k, len(truth_set))
    return total / len(rankings)


def avg_at_k(
    rankings: Sequence[Sequence[int]],
    truths: Sequence[set[int] | Sequence[int]],
    k: int,
) -> float:
    """(1/k) * sum of recall_at_k for k' = 1..k."""
    return sum(recall_at_k(rankings, truths, kk) for kk in range(1, k + 1)) / k


@dataclass
class EvaluationReport:
    """Results of one evaluation run: per-instance rows plus aggregates."""

    task: str
    per_instance: list[dict] = field(default_factory=list)
    aggregates: dict[str, float] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "task": self.task,
            "aggregates": self.aggregates,
            "per_instance": self.per_instance,
            "config": self.config,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def instance_table(self) -> tuple[list[str], list[list]]:
        """Column names and rows for delimited export."""
        if not self.per_instance:
            return [], []
        columns = sorted({key for row in self.per_instance for key in row})
        rows = [[row.get(col, "") for col in columns] for row in self.per_instance]
        return columns, rows
