"""Regional aggregation: anomaly gate, coordinate-wise trimmed mean, model update.

The regional server buffers gradients that pass the anomaly gate and, once
``2f + 1`` are buffered (``f = n_region // 3``), applies

    theta <- theta - eta * TrimmedMean(buffer)

then clears the buffer.  ``mode="fedavg"`` swaps in the plain mean and turns
the gate off, which is the vanilla FedAvg baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence, Union

import numpy as np

from .gradient import GradientVector

TAU_ANOMALY = 0.3
MAX_STALENESS = 5
REFERENCE_LAMBDA = 0.1


class AggregationError(ValueError):
    pass


class DimensionMismatch(AggregationError):
    pass


class InsufficientGradients(AggregationError):
    pass


def _values(g) -> np.ndarray:
    return g.values if isinstance(g, GradientVector) else np.asarray(g, dtype=float)


def detect_anomaly(g, reference) -> float:
    """Score in ``[0, 1]`` measuring disagreement with the reference gradient.

    ``0.25 * (1 - cos(g, ref)) + 0.5 * min(1, |ln(|g| / |ref|)| / ln 10)``

    A zero reference (cold start) scores 0.  A zero gradient against a
    non-zero reference takes cosine 0 and the maximal norm term.
    """
    g = _values(g)
    ref = np.asarray(reference, dtype=float)
    if g.shape != ref.shape:
        raise DimensionMismatch(f"gradient has {g.shape}, reference has {ref.shape}")
    nr = float(np.linalg.norm(ref))
    if nr == 0.0:
        return 0.0
    ng = float(np.linalg.norm(g))
    if ng == 0.0:
        return 0.25 + 0.5
    cos = float(np.dot(g, ref) / (ng * nr))
    cos = min(1.0, max(-1.0, cos))
    norm_term = min(1.0, abs(math.log(ng / nr)) / math.log(10.0))
    return 0.5 * (1.0 - cos) * 0.5 + 0.5 * norm_term


def _stack(gradients: Sequence) -> np.ndarray:
    arrs = [_values(g) for g in gradients]
    dims = {a.shape for a in arrs}
    if len(dims) > 1:
        raise DimensionMismatch(f"gradients of differing shapes {sorted(dims)}")
    return np.vstack(arrs)


def trimmed_mean(gradients: Sequence, f: int) -> np.ndarray:
    """Per coordinate: sort, drop the ``f`` smallest and ``f`` largest, average the rest."""
    if f < 0:
        raise AggregationError("f must be non-negative")
    n = len(gradients)
    if n <= 2 * f:
        raise InsufficientGradients(f"need more than 2f={2 * f} gradients, got {n}")
    x = np.sort(_stack(gradients), axis=0)
    return x[f:n - f].mean(axis=0)


def fedavg_mean(gradients: Sequence) -> np.ndarray:
    if not gradients:
        raise InsufficientGradients("fedavg_mean of an empty list")
    return _stack(gradients).mean(axis=0)


def apply_update(theta, agg_gradient, eta: float) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    agg = np.asarray(agg_gradient, dtype=float)
    if theta.shape != agg.shape:
        raise DimensionMismatch("theta and gradient dimensions differ")
    if not eta > 0:
        raise AggregationError("eta must be positive")
    return theta - eta * agg


@dataclass(frozen=True)
class Buffered:
    buffered: int


@dataclass(frozen=True)
class Rejected:
    score: float | None
    reason: Literal["anomaly", "stale"] = "anomaly"


@dataclass(frozen=True)
class Aggregated:
    theta: np.ndarray
    version: int


Outcome = Union[Buffered, Rejected, Aggregated]


@dataclass
class AggregatorState:
    """Mutable state of one regional server."""

    theta_G: np.ndarray
    n_region: int
    eta: float = 0.05
    tau_anomaly: float = TAU_ANOMALY
    max_staleness: int = MAX_STALENESS
    mode: Literal["robust", "fedavg"] = "robust"
    reference_lambda: float = REFERENCE_LAMBDA
    version: int = 0
    buffer: list[GradientVector] = field(default_factory=list)
    reference_gradient: np.ndarray | None = None
    rejection_log: list[tuple[int, float, float]] = field(default_factory=list)
    # evidence since the last threat-window flush
    window_submitted: int = 0
    window_rejected: int = 0
    window_scores: list[float] = field(default_factory=list)
    aggregations: int = 0
    _ref_dir: np.ndarray | None = field(default=None, repr=False)
    _ref_norm: float = field(default=0.0, repr=False)

    def __post_init__(self):
        self.theta_G = np.asarray(self.theta_G, dtype=float).copy()
        if self.n_region < 1:
            raise AggregationError("n_region must be at least 1")
        if self.reference_gradient is None:
            self.reference_gradient = np.zeros_like(self.theta_G)

    @property
    def f(self) -> int:
        return self.n_region // 3

    @property
    def trigger(self) -> int:
        return 2 * self.f + 1

    @property
    def dim(self) -> int:
        return self.theta_G.shape[0]

    def flush_window(self) -> tuple[int, int, list[float]]:
        out = (self.window_submitted, self.window_rejected, self.window_scores)
        self.window_submitted, self.window_rejected, self.window_scores = 0, 0, []
        return out

    def _update_reference(self, agg: np.ndarray) -> None:
        # Direction tracks accepted aggregates; magnitude tracks the median
        # accepted-gradient norm so individual submissions stay comparable.
        lam = self.reference_lambda
        med = float(np.median([np.linalg.norm(g.values) for g in self.buffer]))
        if self._ref_dir is None:
            self._ref_dir, self._ref_norm = agg.copy(), med
        else:
            self._ref_dir = (1 - lam) * self._ref_dir + lam * agg
            self._ref_norm = (1 - lam) * self._ref_norm + lam * med
        nd = float(np.linalg.norm(self._ref_dir))
        if nd > 0 and self._ref_norm > 0:
            self.reference_gradient = self._ref_dir * (self._ref_norm / nd)


def submit_gradient(state: AggregatorState, g: GradientVector, now: float = 0.0) -> Outcome:
    """Run one gradient through the gate and buffer, aggregating at ``2f + 1``."""
    if len(g) != state.dim:
        raise DimensionMismatch(f"gradient has {len(g)} coordinates, model has {state.dim}")
    if state.version - g.model_version > state.max_staleness:
        return Rejected(None, "stale")
    state.window_submitted += 1
    if state.mode == "robust":
        score = detect_anomaly(g, state.reference_gradient)
        state.window_scores.append(score)
        if score >= state.tau_anomaly:
            state.window_rejected += 1
            state.rejection_log.append((g.owner, score, now))
            return Rejected(score, "anomaly")
    state.buffer.append(g)
    if len(state.buffer) < state.trigger:
        return Buffered(len(state.buffer))
    if state.mode == "robust":
        agg = trimmed_mean(state.buffer, state.f)
    else:
        agg = fedavg_mean(state.buffer)
    state.theta_G = apply_update(state.theta_G, agg, state.eta)
    state.version += 1
    state.aggregations += 1
    if state.mode == "robust":
        state._update_reference(agg)
    state.buffer.clear()
    return Aggregated(state.theta_G.copy(), state.version)
