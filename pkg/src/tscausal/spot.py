"""Streaming peaks-over-threshold anomaly thresholding.

Calibrates an extreme quantile from an initial batch by fitting a
generalized Pareto distribution to the excesses over an empirical
threshold, then keeps refining the fit as new sub-threshold peaks stream
in. The calibration threshold never moves, so the detector suits signals
whose normal regime is stationary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, NumericError

MIN_PEAKS = 10
_GAMMA_ZERO = 1e-12


@dataclass
class TailFit:
    """Generalized Pareto parameters for threshold excesses.

    gamma == 0 degenerates to an exponential tail with scale sigma.
    """

    gamma: float
    sigma: float
    log_likelihood: float


def _log_likelihood(y: np.ndarray, gamma: float, sigma: float) -> float:
    n = y.size
    if sigma <= 0:
        return -math.inf
    if abs(gamma) < _GAMMA_ZERO:
        return -n * math.log(sigma) - float(y.sum()) / sigma
    s = 1.0 + (gamma / sigma) * y
    if np.any(s <= 0):
        return -math.inf
    return -n * math.log(sigma) - (1.0 + 1.0 / gamma) * float(np.log(s).sum())


def _candidate_thetas(y: np.ndarray, grid: int) -> list[float]:
    """Roots of the Grimshaw score equation u(theta) * v(theta) = 1.

    theta must keep 1 + theta * y positive, so the search runs on
    (-1/ymax, 0) and a positive interval bounded by the moment heuristic
    2 * (ymean - ymin) / ymin^2.
    """
    ymin, ymax, ymean = float(y.min()), float(y.max()), float(y.mean())

    def w(theta: float) -> float:
        s = 1.0 + theta * y
        return float(np.mean(1.0 / s) * (1.0 + np.mean(np.log(s))) - 1.0)

    eps = 1e-8 / ymax
    # the negative bracket needs points piling up at both ends: strongly
    # bounded tails put the root next to -1/ymax, light tails next to 0
    left = -1.0 / ymax + eps
    span = -eps - left
    from_left = left + np.geomspace(span * 1e-9, span, grid)
    from_right = -np.geomspace(eps, -left, grid)
    negative = np.unique(np.concatenate([from_left, from_right, np.linspace(left, -eps, grid)]))
    brackets: list[np.ndarray] = [negative]
    if ymin > 0:
        theta_max = max(2.0 * (ymean - ymin) / (ymin**2), 1.0 / ymean)
        brackets.append(np.geomspace(eps, theta_max, grid))
    roots = []
    for points in brackets:
        values = [w(p) for p in points]
        for left, right, flv, frv in zip(points, points[1:], values, values[1:]):
            if flv == 0.0:
                roots.append(float(left))
            elif flv * frv < 0:
                roots.append(float(brentq(w, left, right, xtol=1e-14, rtol=1e-12)))
    return roots


def fit_tail(excesses: np.ndarray, grid: int = 12) -> TailFit:
    """Maximum-likelihood generalized Pareto fit to positive excesses.

    Candidates come from the roots of the Grimshaw equation plus the
    exponential (gamma -> 0) limit; the best log-likelihood wins.
    """
    y = np.asarray(excesses, dtype=np.float64).ravel()
    if y.size < 2:
        raise NumericError(f"tail fit needs at least 2 excesses, got {y.size}")
    if not np.isfinite(y).all() or y.min() <= 0:
        raise NumericError("excesses must be finite and positive")
    if float(y.max()) == float(y.min()):
        raise NumericError("excesses are all identical; tail fit is degenerate")
    best = TailFit(0.0, float(y.mean()), _log_likelihood(y, 0.0, float(y.mean())))
    for theta in _candidate_thetas(y, grid):
        if theta == 0.0:
            continue
        gamma = float(np.mean(np.log(1.0 + theta * y)))
        sigma = gamma / theta
        ll = _log_likelihood(y, gamma, sigma)
        if ll > best.log_likelihood:
            best = TailFit(gamma, sigma, ll)
    return best


def _quantile_from_tail(
    fit: TailFit, base: float, risk: float, total: int, num_peaks: int
) -> float:
    """Extreme quantile z such that P(X > z) = risk, given the tail fit over
    ``num_peaks`` excesses among ``total`` observations."""
    ratio = risk * total / num_peaks
    if abs(fit.gamma) < _GAMMA_ZERO:
        return base + fit.sigma * math.log(1.0 / ratio)
    return base + (fit.sigma / fit.gamma) * (ratio ** (-fit.gamma) - 1.0)


class SpotDetector:
    """Streaming extreme-quantile detector with a fixed calibration level.

    The initial batch sets the peaks threshold (its ``q_init`` empirical
    quantile) once and for all. Scores above the current extreme quantile
    are flagged and discarded; scores between the two thresholds enrich the
    excess pool and tighten the fit.
    """

    def __init__(
        self,
        initial_scores: np.ndarray,
        risk: float = 1e-4,
        q_init: float = 0.98,
        min_peaks: int = MIN_PEAKS,
    ) -> None:
        if not 0.0 < risk < 1.0:
            raise ConfigError(f"risk must be in (0, 1), got {risk}")
        if not 0.0 < q_init < 1.0:
            raise ConfigError(f"q_init must be in (0, 1), got {q_init}")
        scores = np.asarray(initial_scores, dtype=np.float64).ravel()
        if not np.isfinite(scores).all():
            raise NumericError("initial scores contain non-finite values")
        self.risk = risk
        self.peaks_threshold = float(np.quantile(scores, q_init))
        self._count = int(scores.size)
        self._peaks = [
            float(s - self.peaks_threshold) for s in scores if s > self.peaks_threshold
        ]
        if len(self._peaks) < min_peaks:
            raise NumericError(
                f"only {len(self._peaks)} scores exceed the calibration quantile; "
                f"need at least {min_peaks} to fit the tail"
            )
        self.threshold = 0.0
        self._refit()

    @property
    def num_peaks(self) -> int:
        return len(self._peaks)

    @property
    def count(self) -> int:
        return self._count

    def _refit(self) -> None:
        fit = fit_tail(np.asarray(self._peaks))
        self.tail = fit
        self.threshold = _quantile_from_tail(
            fit, self.peaks_threshold, self.risk, self._count, len(self._peaks)
        )

    def update(self, score: float) -> bool:
        """Feed one score; True means it breached the extreme quantile.

        Breaching scores are treated as anomalies and kept out of the fit;
        ordinary peaks extend the excess pool and move the quantile.
        """
        score = float(score)
        if not math.isfinite(score):
            raise NumericError("score is not finite")
        self._count += 1
        if score > self.threshold:
            return True
        if score > self.peaks_threshold:
            self._peaks.append(score - self.peaks_threshold)
            self._refit()
        return False


def pot_threshold(
    scores: np.ndarray, risk: float = 1e-4, q_init: float = 0.98
) -> float:
    """One-shot extreme quantile of a batch of scores."""
    return SpotDetector(scores, risk=risk, q_init=q_init).threshold
