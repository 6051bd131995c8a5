"""Offline initialisation of the risk model on synthetic encounters.

Every federated run starts from the same pretrained parameters so that
learning fine-tunes a working collision-risk model instead of a random one.
Samples are constant-velocity encounters seen through the same Laplace
beacon noise as in flight; a neighbour is labelled a conflict when its
closest approach within ``CONFLICT_HORIZON`` seconds is under
``CONFLICT_MISS`` metres.  The fitted vector ships as ``pretrained.json``;
:func:`fit_pretrained` regenerates it.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import numpy as np
from scipy.optimize import minimize

from ..attention import WINDOW, AttentionParams, LocalGraph, risk_gradient_flat, risk_loss
from ..core import RngStream, UavState
from .decide import closest_approach

CONFLICT_HORIZON = 5.0
CONFLICT_MISS = 10.0
SAMPLE_DT = 0.1
NOISE_SCALE = 4.0
L2 = 1e-4


def _window(p0, v, T, dt, noise=None):
    t = (np.arange(T) - (T - 1)) * dt
    pos = p0[None, :] + t[:, None] * v[None, :]
    if noise is not None:
        pos = pos + noise
    return np.concatenate([pos, np.tile(v, (T, 1))], axis=1)


def synthetic_encounter(rng: RngStream, m: int, conflict: bool, T: int = WINDOW) -> tuple[LocalGraph, int]:
    g = rng.gen
    heading = g.uniform(0, 2 * np.pi)
    speed = g.uniform(8.0, 18.0)
    ego_v = np.array([np.cos(heading), np.sin(heading), 0.0]) * speed
    ego_p = np.array([0.0, 0.0, 100.0])
    windows, label = [], 0
    for j in range(m):
        h = g.uniform(0, 2 * np.pi)
        v = np.array([np.cos(h), np.sin(h), g.normal(0, 0.05)]) * g.uniform(0.0, 18.0)
        if conflict and j == 0:
            tc = g.uniform(0.5, CONFLICT_HORIZON)
            offset = g.normal(0, 3.0, 3) * np.array([1, 1, 0.3])
            p = ego_p + (ego_v - v) * tc + offset
        else:
            p = ego_p + np.append(g.uniform(-100, 100, 2), g.uniform(-5, 5))
        _, miss = closest_approach(p - ego_p, v - ego_v, CONFLICT_HORIZON)
        if np.linalg.norm(miss[0]) < CONFLICT_MISS:
            label = 1
        noise = g.laplace(0, NOISE_SCALE, (T, 3))
        windows.append(_window(p, v, T, SAMPLE_DT, noise))
    ego = UavState(0, tuple(ego_p), tuple(ego_v), 0.0)
    return LocalGraph(ego, list(range(1, m + 1)), np.array(windows), _window(ego_p, ego_v, T, SAMPLE_DT)), label


def synthetic_batch(seed: int, size: int) -> list[tuple[LocalGraph, int]]:
    rng = RngStream.keyed(seed, "pretrain")
    out = []
    for i in range(size):
        m = 1 if i % 2 == 0 else int(rng.gen.integers(2, 9))
        out.append(synthetic_encounter(rng, m, conflict=bool(rng.gen.random() < 0.4)))
    return out


def fit_pretrained(seed: int = 0, size: int = 600, maxiter: int = 150) -> np.ndarray:
    batch = synthetic_batch(seed, size)
    theta0 = AttentionParams.init(RngStream.keyed(seed, "pretrain-init")).flatten()

    def fun(theta):
        p = AttentionParams.unflatten(theta)
        return risk_loss(p, batch) + L2 * theta @ theta, risk_gradient_flat(p, batch) + 2 * L2 * theta

    res = minimize(fun, theta0, jac=True, method="L-BFGS-B", options={"maxiter": maxiter})
    return res.x


@lru_cache(maxsize=1)
def pretrained_params() -> AttentionParams:
    data = json.loads(resources.files("hfgat.engine").joinpath("pretrained.json").read_text())
    return AttentionParams.unflatten(np.array(data["theta"], dtype=float))


def main() -> None:  # pragma: no cover - regeneration helper
    theta = fit_pretrained()
    path = resources.files("hfgat.engine").joinpath("pretrained.json")
    with open(str(path), "w") as fh:
        json.dump({"seed": 0, "theta": [float(x) for x in theta]}, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":  # pragma: no cover
    main()
