"""Uncertain-input description and reproducible sampling.

Draws use the counter-based Philox generator keyed by the experiment seed, so
sample j is a pure function of (seed, j): re-running with a larger N leaves
any prefix of the sample set unchanged, and independent sub-streams (for
bootstrap resampling etc.) come from SeedSequence spawn keys rather than from
consuming the main stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "InputDistribution",
    "SampleSet",
    "draw_samples",
    "generator_for",
    "tensor_design",
]


def generator_for(seed: int, purpose: int = 0) -> np.random.Generator:
    """Philox generator on an independent sub-stream of ``seed``.

    purpose=0 is the main sample stream; other purposes (bootstrap, surrogate
    design, ...) get disjoint streams via spawn keys.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(purpose),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class InputDistribution:
    """Independent uniform inputs, dimension i on the interval
    [means[i]*(1 - rho[i]), means[i]*(1 + rho[i])].

    rho[i] = 0 marks a deterministic (degenerate) dimension; downstream
    consumers treat such dimensions as constants.
    """

    means: np.ndarray
    rel_half_widths: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=float))
        object.__setattr__(
            self, "rel_half_widths", np.asarray(self.rel_half_widths, dtype=float)
        )
        if self.means.ndim != 1 or self.means.shape != self.rel_half_widths.shape:
            raise ValueError("means and rel_half_widths must be equal-length vectors")
        if np.any(self.rel_half_widths < 0) or np.any(self.rel_half_widths >= 1):
            raise ValueError(
                f"relative half-widths must lie in [0, 1), got {self.rel_half_widths}"
            )
        if not np.all(np.isfinite(self.means)):
            raise ValueError("means must be finite")

    @property
    def n_dims(self) -> int:
        return self.means.size

    @property
    def lower(self) -> np.ndarray:
        return self.means * (1.0 - self.rel_half_widths)

    @property
    def upper(self) -> np.ndarray:
        return self.means * (1.0 + self.rel_half_widths)

    @property
    def half_widths(self) -> np.ndarray:
        """Absolute half-widths |mean| * rho."""
        return np.abs(self.means) * self.rel_half_widths

    def active_dims(self) -> np.ndarray:
        """Indices of dimensions with nonzero spread."""
        return np.nonzero(self.half_widths > 0)[0]


@dataclass(frozen=True)
class SampleSet:
    """Inputs drawn from a distribution; row j is sample j."""

    inputs: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "inputs", np.asarray(self.inputs, dtype=float))
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be (n_samples, n_dims)")

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[0]


def draw_samples(dist: InputDistribution, n_samples: int, seed: int) -> SampleSet:
    """n_samples i.i.d. draws; any prefix is stable under growing n_samples."""
    if n_samples < 0:
        raise ValueError(f"n_samples must be >= 0, got {n_samples}")
    rng = generator_for(seed, purpose=0)
    u = rng.random((n_samples, dist.n_dims))
    lo = dist.lower
    span = dist.upper - lo
    return SampleSet(lo + span * u, seed)


def tensor_design(dist: InputDistribution, n_points: int, seed: int = 0) -> np.ndarray:
    """Low-discrepancy design over the input box, for surrogate training.

    Active (nonzero-width) dimensions get a full tensor grid when n_points is
    a perfect d-th power (endpoints included); otherwise a greedy maximin
    subset of a seeded uniform cloud, started from the point nearest the box
    center. Degenerate dimensions are pinned at their means.
    """
    if n_points < 1:
        raise ValueError(f"n_points must be >= 1, got {n_points}")
    lo, hi = dist.lower, dist.upper
    active = dist.active_dims()
    out = np.tile(dist.means, (n_points, 1))
    d = active.size
    if d == 0:
        return out
    per_side = round(n_points ** (1.0 / d))
    if per_side**d == n_points and per_side >= 2:
        axes = [np.linspace(lo[i], hi[i], per_side) for i in active]
        mesh = np.meshgrid(*axes, indexing="ij")
        for j, i in enumerate(active):
            out[:, i] = mesh[j].reshape(-1)
        return out
    # greedy maximin fallback in the unit cube of active dims
    rng = generator_for(seed, purpose=3)
    n_cand = max(1024, 32 * n_points)
    cand = rng.random((n_cand, d))
    chosen = [int(np.argmin(np.sum((cand - 0.5) ** 2, axis=1)))]
    dmin = np.sum((cand - cand[chosen[0]]) ** 2, axis=1)
    while len(chosen) < n_points:
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, np.sum((cand - cand[nxt]) ** 2, axis=1))
    pts = cand[chosen]
    for j, i in enumerate(active):
        out[:, i] = lo[i] + (hi[i] - lo[i]) * pts[:, j]
    return out
