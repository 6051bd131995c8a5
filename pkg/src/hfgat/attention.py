"""Temporal graph attention for per-neighbour collision risk.

A single attention head scores every neighbour against the ego UAV at each
step of a short history window::

    alpha[t, j] = softmax_j( (W_q h_ego[t]) . (W_k h_j[t]) / sqrt(d_k) )

and a logistic readout turns the attention-pooled keys into a risk::

    risk_j = sigmoid( w_out . (sum_t alpha[t, j] W_k h_j[t]) / T + bias )

Softmax normalisation runs over neighbours separately at each time step.

Flat parameter ordering (used by gradients and model broadcasts):
``W_q`` row-major, ``W_k`` row-major, ``w_out``, ``bias``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import RngStream, UavState
from .gradient import GradientVector

D_H = 8
D_K = 8
WINDOW = 10
POS_SCALE = 100.0
VEL_SCALE = 20.0


@dataclass(frozen=True)
class AttentionParams:
    W_q: np.ndarray
    W_k: np.ndarray
    w_out: np.ndarray
    bias: float

    def __post_init__(self):
        W_q = np.asarray(self.W_q, dtype=float)
        W_k = np.asarray(self.W_k, dtype=float)
        w_out = np.asarray(self.w_out, dtype=float)
        if W_q.ndim != 2 or W_q.shape != W_k.shape or w_out.shape != (W_q.shape[0],):
            raise ValueError("inconsistent attention parameter shapes")
        if not (np.all(np.isfinite(W_q)) and np.all(np.isfinite(W_k))
                and np.all(np.isfinite(w_out)) and math.isfinite(self.bias)):
            raise ValueError("attention parameters must be finite")
        object.__setattr__(self, "W_q", W_q)
        object.__setattr__(self, "W_k", W_k)
        object.__setattr__(self, "w_out", w_out)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def d_k(self) -> int:
        return self.W_q.shape[0]

    @property
    def d_h(self) -> int:
        return self.W_q.shape[1]

    @property
    def size(self) -> int:
        return param_count(self.d_k, self.d_h)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.W_q.ravel(), self.W_k.ravel(), self.w_out, [self.bias]])

    @classmethod
    def unflatten(cls, theta: Sequence[float], d_k: int = D_K, d_h: int = D_H) -> "AttentionParams":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (param_count(d_k, d_h),):
            raise ValueError(f"expected {param_count(d_k, d_h)} parameters, got {theta.shape}")
        m = d_k * d_h
        return cls(theta[:m].reshape(d_k, d_h), theta[m:2 * m].reshape(d_k, d_h),
                   theta[2 * m:2 * m + d_k], float(theta[-1]))

    @classmethod
    def zeros(cls, d_k: int = D_K, d_h: int = D_H) -> "AttentionParams":
        return cls.unflatten(np.zeros(param_count(d_k, d_h)), d_k, d_h)

    @classmethod
    def init(cls, rng: RngStream, d_k: int = D_K, d_h: int = D_H, scale: float = 0.1) -> "AttentionParams":
        """Seeded uniform initialisation in ``[-scale, scale]``."""
        theta = rng.gen.uniform(-scale, scale, param_count(d_k, d_h))
        return cls.unflatten(theta, d_k, d_h)


def param_count(d_k: int = D_K, d_h: int = D_H) -> int:
    return 2 * d_k * d_h + d_k + 1


@dataclass
class LocalGraph:
    """Ego UAV plus the temporal windows of its neighbours.

    Windows are ``(T, 6)`` arrays of ``[px, py, pz, vx, vy, vz]`` samples,
    oldest first.  ``ego_window`` defaults to the ego's current state repeated.
    """

    ego: UavState
    neighbor_ids: list[int]
    neighbor_windows: np.ndarray
    ego_window: np.ndarray | None = None

    def __post_init__(self):
        nw = np.asarray(self.neighbor_windows, dtype=float)
        if nw.size == 0:
            t = WINDOW if self.ego_window is None else np.asarray(self.ego_window).shape[0]
            nw = nw.reshape(0, t, 6)
        if nw.ndim != 3 or nw.shape[2] != 6 or nw.shape[1] < 1:
            raise ValueError("neighbor_windows must be shaped (m, T, 6) with T >= 1")
        if nw.shape[0] != len(self.neighbor_ids):
            raise ValueError("one window per neighbour id required")
        self.neighbor_windows = nw
        if self.ego_window is None:
            row = np.concatenate([self.ego.position, self.ego.velocity])
            self.ego_window = np.tile(row, (nw.shape[1], 1))
        else:
            self.ego_window = np.asarray(self.ego_window, dtype=float)
            if self.ego_window.shape != (nw.shape[1], 6):
                raise ValueError("ego_window must match neighbour window length")

    @property
    def window_length(self) -> int:
        return self.neighbor_windows.shape[1]


@dataclass
class RiskAssessment:
    per_neighbor_risk: dict[int, float]
    max_risk: float
    attention: np.ndarray = field(repr=False)

    @property
    def argmax_id(self) -> int | None:
        """Neighbour with the highest risk; ties go to the lowest id."""
        if not self.per_neighbor_risk:
            return None
        return min(self.per_neighbor_risk, key=lambda j: (-self.per_neighbor_risk[j], j))


def _as_samples(x) -> np.ndarray:
    if isinstance(x, UavState):
        return np.concatenate([x.position, x.velocity])[None, :]
    arr = np.asarray(x, dtype=float)
    return arr[None, :] if arr.ndim == 1 else arr


def relative_features(nb: np.ndarray, ego: np.ndarray) -> np.ndarray:
    """Vectorised feature map; ``nb`` is ``(..., 6)`` and broadcasts against ``ego``."""
    dp = nb[..., :3] - ego[..., :3]
    dv = nb[..., 3:] - ego[..., 3:]
    dist = np.sqrt(np.einsum("...i,...i->...", dp, dp))
    with np.errstate(invalid="ignore", divide="ignore"):
        closing = np.where(dist > 0, -np.einsum("...i,...i->...", dp, dv) / np.where(dist > 0, dist, 1.0), 0.0)
    return np.concatenate([dp / POS_SCALE, dv / VEL_SCALE,
                           (dist / POS_SCALE)[..., None], (closing / VEL_SCALE)[..., None]], axis=-1)


def build_features(window, ego) -> np.ndarray:
    """Relative-frame features for one neighbour window, shape ``(T, 8)``.

    Channels are ``[dp/100 (3), dv/20 (3), |dp|/100, closing_speed/20]`` with
    closing speed positive when the pair is approaching.  ``ego`` may be a
    single :class:`UavState` (used for every step) or a ``(T, 6)`` window.
    """
    return relative_features(_as_samples(window), _as_samples(ego))


def ego_features(ego_window: np.ndarray) -> np.ndarray:
    """Query features of the ego: its own motion seen from a co-located ground point."""
    ego_window = _as_samples(ego_window)
    ground = ego_window.copy()
    ground[:, 3:] = 0.0
    return relative_features(ego_window, ground)


@dataclass
class _Forward:
    h_ego: np.ndarray   # (T, d_h)
    h_nb: np.ndarray    # (m, T, d_h)
    q: np.ndarray       # (T, d_k)
    k: np.ndarray       # (m, T, d_k)
    alpha: np.ndarray   # (T, m)
    pooled: np.ndarray  # (m, d_k)
    z: np.ndarray       # (m,)
    risk: np.ndarray    # (m,)


def _softmax_rows(s: np.ndarray) -> np.ndarray:
    s = s - s.max(axis=1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=1, keepdims=True)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def forward(params: AttentionParams, h_ego: np.ndarray, h_nb: np.ndarray) -> _Forward:
    T = h_ego.shape[0]
    m = h_nb.shape[0]
    q = h_ego @ params.W_q.T
    if m == 0:
        empty = np.zeros((T, 0))
        return _Forward(h_ego, h_nb, q, np.zeros((0, T, params.d_k)), empty,
                        np.zeros((0, params.d_k)), np.zeros(0), np.zeros(0))
    k = h_nb @ params.W_k.T
    scores = np.einsum("td,mtd->tm", q, k) / math.sqrt(params.d_k)
    alpha = _softmax_rows(scores)
    pooled = np.einsum("tm,mtd->md", alpha, k) / T
    z = pooled @ params.w_out + params.bias
    return _Forward(h_ego, h_nb, q, k, alpha, pooled, z, _sigmoid(z))


def attention_weights(params: AttentionParams, ego_feats, neighbor_feats) -> np.ndarray:
    """Softmax attention rows, one per time step, over the given neighbours.

    ``ego_feats`` is ``(d_h,)`` or ``(T, d_h)``; ``neighbor_feats`` is a list of
    ``(d_h,)`` vectors or a ``(m, T, d_h)`` array.  With no neighbours an empty
    row is returned.
    """
    h_ego = np.atleast_2d(np.asarray(ego_feats, dtype=float))
    T = h_ego.shape[0]
    nb = np.asarray(neighbor_feats, dtype=float)
    if nb.size == 0:
        return np.zeros((T, 0))
    if nb.ndim == 2:
        nb = nb[:, None, :]
    if nb.shape[1] != T:
        nb = np.broadcast_to(nb, (nb.shape[0], T, nb.shape[2]))
    return forward(params, h_ego, nb).alpha


def graph_features(graph: LocalGraph) -> tuple[np.ndarray, np.ndarray]:
    h_ego = ego_features(graph.ego_window)
    h_nb = relative_features(graph.neighbor_windows, graph.ego_window[None, :, :])
    return h_ego, h_nb


def local_risk(graph: LocalGraph, params: AttentionParams) -> RiskAssessment:
    """Dense attention over every neighbour in ``graph``."""
    h_ego, h_nb = graph_features(graph)
    fw = forward(params, h_ego, h_nb)
    risks = {int(j): float(r) for j, r in zip(graph.neighbor_ids, fw.risk)}
    return RiskAssessment(risks, float(fw.risk.max()) if risks else 0.0, fw.alpha)


def sparse_k(n: int) -> int:
    """Neighbour budget ``ceil(log2 n)``."""
    if n < 2:
        raise ValueError("cluster size must be at least 2")
    return math.ceil(math.log2(n))


def select_sparse_indices(pos: np.ndarray, vel: np.ndarray, ids: np.ndarray,
                          ego_pos: np.ndarray, ego_vel: np.ndarray,
                          leaders: Iterable[int], k: int) -> list[int]:
    """Array form of :func:`select_sparse_neighbors`; returns row indices into ``ids``.

    Candidates must already exclude the ego.
    """
    m = len(ids)
    if m == 0 or k <= 0:
        return []
    d = np.linalg.norm(pos - ego_pos, axis=1)
    by_dist = np.lexsort((ids, d))
    chosen: list[int] = [int(i) for i in by_dist[:3]]
    mask = np.ones(m, dtype=bool)
    mask[chosen] = False
    rest = np.nonzero(mask)[0]
    if rest.size:
        vn = np.linalg.norm(vel[rest], axis=1)
        en = float(np.linalg.norm(ego_vel))
        denom = vn * en
        cos = np.where(denom > 0, vel[rest] @ ego_vel / np.where(denom > 0, denom, 1.0), 0.0)
        order = np.lexsort((ids[rest], -cos))
        for i in rest[order[:2]]:
            chosen.append(int(i))
            mask[i] = False
    leader_ids = np.array(sorted(set(int(x) for x in leaders)), dtype=ids.dtype)
    if leader_ids.size:
        cand = np.nonzero(mask & np.isin(ids, leader_ids))[0]
        for i in cand[np.argsort(ids[cand], kind="stable")]:
            chosen.append(int(i))
            mask[i] = False
    if len(chosen) < k:
        fill = by_dist[mask[by_dist]][: k - len(chosen)]
        chosen.extend(int(i) for i in fill)
    return [int(i) for i in chosen[:k]]


def select_sparse_neighbors(all_states: Sequence[UavState], ego: UavState,
                            leaders: Iterable[int], n: int) -> set[int]:
    """Pick ``min(ceil(log2 n), n - 1)`` regional neighbours for ``ego``.

    Priority: 3 nearest by distance, then the 2 most velocity-aligned of the
    rest (cosine similarity), then cluster leaders, then nearest-fill; the
    list is truncated to the budget.  Ties go to the lower uav_id.
    """
    k = min(sparse_k(n), n - 1)
    others = [s for s in all_states if s.uav_id != ego.uav_id]
    if not others:
        return set()
    ids = np.array([s.uav_id for s in others])
    pos = np.array([s.position for s in others], dtype=float)
    vel = np.array([s.velocity for s in others], dtype=float)
    idx = select_sparse_indices(pos, vel, ids, np.array(ego.position), np.array(ego.velocity),
                                leaders, k)
    return {int(ids[i]) for i in idx}


def _bce(r: float, y: float) -> float:
    r = min(max(r, 1e-12), 1.0 - 1e-12)
    return -(y * math.log(r) + (1.0 - y) * math.log(1.0 - r))


def risk_loss(params: AttentionParams, batch: Sequence[tuple[LocalGraph, int]]) -> float:
    """Mean binary cross-entropy of ``max_risk`` against the near-miss label."""
    if not batch:
        raise ValueError("empty batch")
    total = 0.0
    for graph, label in batch:
        total += _bce(local_risk(graph, params).max_risk, float(label))
    return total / len(batch)


def risk_gradient_flat(params: AttentionParams, batch: Sequence[tuple[LocalGraph, int]]) -> np.ndarray:
    """Analytic gradient of :func:`risk_loss` in the flat parameter ordering.

    Samples without neighbours have a constant ``max_risk`` of 0 and
    contribute nothing but still count in the mean.
    """
    if not batch:
        raise ValueError("empty batch")
    d_k, d_h = params.d_k, params.d_h
    gWq = np.zeros((d_k, d_h))
    gWk = np.zeros((d_k, d_h))
    gw = np.zeros(d_k)
    gb = 0.0
    sq = math.sqrt(d_k)
    for graph, label in batch:
        h_ego, h_nb = graph_features(graph)
        fw = forward(params, h_ego, h_nb)
        m = fw.risk.shape[0]
        if m == 0:
            continue
        ids = np.asarray(graph.neighbor_ids)
        top = int(np.lexsort((ids, -fw.risk))[0])
        r = float(fw.risk[top])
        dz = r - float(label)
        T = h_ego.shape[0]
        w = params.w_out
        gb += dz
        gw += dz * fw.pooled[top]
        a_top = fw.alpha[:, top]                                    # (T,)
        # direct path through the pooled key of the top neighbour
        gWk += dz * np.outer(w, (a_top[:, None] * h_nb[top]).sum(axis=0)) / T
        # path through the softmax scores
        g_t = (fw.k[top] @ w) / T                                   # (T,)
        onehot = np.zeros(m)
        onehot[top] = 1.0
        ds = dz * g_t[:, None] * a_top[:, None] * (onehot[None, :] - fw.alpha) / sq   # (T, m)
        gWk += np.einsum("tm,td,mte->de", ds, fw.q, h_nb)
        gWq += np.einsum("tm,mtd,te->de", ds, fw.k, h_ego)
    n = len(batch)
    return np.concatenate([gWq.ravel(), gWk.ravel(), gw, [gb]]) / n


def risk_gradient(params: AttentionParams, batch: Sequence[tuple[LocalGraph, int]],
                  owner: int = 0, model_version: int = 0) -> GradientVector:
    return GradientVector(risk_gradient_flat(params, batch), owner=owner, model_version=model_version)
