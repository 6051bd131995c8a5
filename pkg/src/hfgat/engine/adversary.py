"""Byzantine behaviours applied to honest outputs."""

from __future__ import annotations

import numpy as np

from ..core import RngStream
from ..gradient import GradientVector
from ..simnet import LinkModel
from .config import AdversaryProfile, CommJam, GradientPoison, PositionSpoof


def byzantine_ids(profile: AdversaryProfile, n: int, seed: int) -> frozenset[int]:
    count = round(profile.byzantine_fraction * n)
    if count == 0:
        return frozenset()
    perm = RngStream.keyed(seed, "adversary").gen.permutation(n)
    return frozenset(int(i) for i in perm[:count])


def poison_gradient(b: GradientPoison, g: GradientVector, rng: RngStream) -> GradientVector:
    v = g.values
    if b.mode == "sign_flip":
        out = -b.c * v
    elif b.mode == "scale":
        out = b.c * v
    else:
        # Laplace noise whose expected L2 norm roughly matches the honest one
        scale = float(np.linalg.norm(v)) / np.sqrt(2.0 * max(len(v), 1))
        out = rng.laplace(scale, len(v)) if scale > 0 else np.zeros_like(v)
    return g.with_values(out, meta={**g.meta, "poisoned": b.mode})


def spoof_offset(b: PositionSpoof, rng: RngStream) -> np.ndarray:
    """Fixed-magnitude offset in a uniformly random direction."""
    d = rng.gen.normal(size=3)
    n = np.linalg.norm(d)
    while n < 1e-12:
        d = rng.gen.normal(size=3)
        n = np.linalg.norm(d)
    return b.offset * d / n


def apply_adversary(profile: AdversaryProfile, honest_output, rng: RngStream):
    """Corrupt one honest output of a Byzantine UAV.

    ``GradientVector`` -> gradient poisoning; a position ``(3,)`` array ->
    spoofed position; a :class:`LinkModel` -> jammed link.  Outputs pass
    through unchanged when the profile has no matching behaviour or a zero
    Byzantine fraction.
    """
    if profile.byzantine_fraction == 0:
        return honest_output
    if isinstance(honest_output, GradientVector):
        b = profile.behavior("gradient_poison")
        return poison_gradient(b, honest_output, rng) if b else honest_output
    if isinstance(honest_output, LinkModel):
        b = profile.behavior("comm_jam")
        return honest_output.with_extra_loss(b.extra_loss) if isinstance(b, CommJam) else honest_output
    b = profile.behavior("position_spoof")
    if b is None:
        return honest_output
    return np.asarray(honest_output, float) + spoof_offset(b, rng)
