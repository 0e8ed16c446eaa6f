"""Uniform simplex samplers, band assignment and rejection volume estimates.

Two samplers are provided, both uniform on the full-dimensional unit
simplex {x >= 0, sum x <= 1} in R^d:

* ``exponential``: d+1 unit exponentials normalized by their sum, with the
  zeroth coordinate projected out; O(d) per point.
* ``sorted_integers``: d distinct random integers in {1, ..., K-1} with
  K = 2^63 - 1, sorted; the first d normalized gaps are the point.
  O(d log d) per point.  Distinctness is enforced by redrawing colliding
  rows (collision probability ~ d^2 / K, negligible).

Streams are deterministic per (seed, stream): the same pair always yields
the bit-identical sample sequence.  A sampler instance is stateful and must
not be shared across threads; parallel estimation uses one stream id per
worker and sums the counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .geometry import Body, Simplex, contains_many

_K_SORTED = 2**63 - 1


@dataclass(frozen=True)
class SamplerConfig:
    dimension: int
    seed: int = 0
    method: str = "exponential"
    stream: int = 0

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.method not in ("exponential", "sorted_integers"):
            raise ValueError(f"unknown sampler method {self.method!r}")


class SimplexSampler:
    """Stateful uniform sampler over the unit simplex for one RNG stream."""

    def __init__(self, cfg: SamplerConfig):
        self.cfg = cfg
        seq = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(cfg.stream,))
        self.rng = np.random.Generator(np.random.PCG64(seq))

    def sample(self, n: int) -> np.ndarray:
        """Return n uniform points as an (n, d) array."""
        if n < 1:
            raise ValueError("n must be >= 1")
        d = self.cfg.dimension
        if self.cfg.method == "exponential":
            u = self.rng.random((n, d + 1))
            zero = u == 0.0
            while zero.any():  # log(0) guard: redraw the offending uniforms
                u[zero] = self.rng.random(int(zero.sum()))
                zero = u == 0.0
            y = -np.log(u)
            y /= y.sum(axis=1, keepdims=True)
            return np.ascontiguousarray(y[:, 1:])
        ints = self.rng.integers(1, _K_SORTED, size=(n, d), dtype=np.int64)
        ints.sort(axis=1)
        if d > 1:
            dup = (np.diff(ints, axis=1) == 0).any(axis=1)
            while dup.any():
                ints[dup] = np.sort(
                    self.rng.integers(1, _K_SORTED, size=(int(dup.sum()), d), dtype=np.int64),
                    axis=1,
                )
                dup = (np.diff(ints, axis=1) == 0).any(axis=1)
        gaps = np.diff(ints, axis=1, prepend=0).astype(float)
        return gaps / float(_K_SORTED)


def sample_unit_simplex(n: int, cfg: SamplerConfig) -> np.ndarray:
    """n uniform points in the unit simplex of R^{cfg.dimension}."""
    return SimplexSampler(cfg).sample(n)


def sample_simplex(n: int, simplex: Simplex, cfg: SamplerConfig) -> np.ndarray:
    """n uniform points in an arbitrary simplex (affine image of unit draws)."""
    if cfg.dimension != simplex.dim:
        raise ValueError("sampler dimension does not match the simplex")
    return simplex.map.apply(sample_unit_simplex(n, cfg))


# ---------------------------------------------------------------------------
# Rejection error model
# ---------------------------------------------------------------------------

# Rows (error -> (m1, m2, confidence)): sampling N = m1 * 10^(m2 + order)
# points bounds the relative error by `error` with the given probability,
# where order = ceil(-log10 p) for target volume fraction p.
REJECTION_TABLE = {
    0.01: (4, 4, 0.955),
    0.02: (9, 3, 0.942),
    0.03: (4, 3, 0.942),
    0.04: (4, 3, 0.972),
    0.05: (2, 3, 0.975),
    0.06: (1, 3, 0.942),
    0.07: (8, 2, 0.952),
    0.08: (6, 2, 0.951),
    0.09: (5, 2, 0.956),
    0.10: (4, 2, 0.955),
}


def required_samples(target_error: float, p_order: int) -> tuple[int, float]:
    """Sample count and confidence for a target relative error.

    ``p_order`` is ceil(-log10 p) for the (estimated) volume fraction p.
    Errors between table rows are rounded down to the next supported row,
    which is conservative (more samples).
    """
    rows = sorted(REJECTION_TABLE)
    if target_error < rows[0] - 1e-12 or target_error > rows[-1] + 1e-12:
        raise ValueError(
            f"target error {target_error} outside supported range [{rows[0]}, {rows[-1]}]"
        )
    supported = max(e for e in rows if e <= target_error + 1e-12)
    m1, m2, confidence = REJECTION_TABLE[supported]
    return m1 * 10 ** (m2 + p_order), confidence


def p_order_from_fraction(p_hat: float, floor: float = 1e-5) -> int:
    """ceil(-log10 p), with p floored away from zero."""
    return math.ceil(-math.log10(max(p_hat, floor)))


@dataclass(frozen=True)
class RejectionEstimate:
    """Hit/trial record of a rejection run over the unit simplex."""

    volume_fraction: float
    hits: int
    trials: int
    std_error: float
    abs_volume: float | None = None
    below_resolution: bool = False

    @classmethod
    def from_counts(cls, hits: int, trials: int, reference_volume: float | None):
        p = hits / trials
        se = math.sqrt(p * (1.0 - p) / trials)
        return cls(
            volume_fraction=p,
            hits=hits,
            trials=trials,
            std_error=se,
            abs_volume=None if reference_volume is None else p * reference_volume,
            below_resolution=hits == 0,
        )


def rejection_volume(
    body: Body,
    n: int,
    cfg: SamplerConfig,
    reference_volume: float | None = None,
    batch: int = 1_000_000,
) -> RejectionEstimate:
    """Estimate vol(body)/vol(unit simplex) by rejection from the simplex.

    The body must already live in the unit-simplex frame.  With
    ``reference_volume`` (normally 1/d!) the absolute volume p * reference
    is recorded as well.  Zero hits produce a below-resolution estimate,
    not an exception.
    """
    if body.simplex is None or not body.simplex.is_unit:
        raise ContractViolation("rejection_volume needs a body over the unit simplex")
    if cfg.dimension != body.dim:
        raise ValueError("sampler dimension does not match the body")
    sampler = SimplexSampler(cfg)
    hits = 0
    remaining = int(n)
    while remaining > 0:
        take = min(remaining, batch)
        pts = sampler.sample(take)
        hits += int(contains_many(body, pts).sum())
        remaining -= take
    return RejectionEstimate.from_counts(hits, int(n), reference_volume)


def estimate_p_order(body: Body, cfg: SamplerConfig, pilot: int = 100_000) -> int:
    """Pilot run estimating ceil(-log10 p) for Table-driven sample sizing."""
    est = rejection_volume(body, pilot, cfg)
    return p_order_from_fraction(est.volume_fraction)


# ---------------------------------------------------------------------------
# Band assignment
# ---------------------------------------------------------------------------


def band_indices(values: np.ndarray, levels: np.ndarray) -> np.ndarray:
    """Band index per value, by binary search over strictly increasing levels.

    With levels z_1 < ... < z_l there are l+1 bands 0..l.  A value equal to
    z_i is assigned to the band below the level (band i-1 in 1-based level
    numbering), which makes ties deterministic.  Values below z_1 / above
    z_l land in the outer (sentinel) bands 0 / l.
    """
    levels = np.asarray(levels, dtype=float)
    if levels.ndim != 1 or (levels.size > 1 and not np.all(np.diff(levels) > 0)):
        raise ValueError("levels must be strictly increasing")
    return np.searchsorted(levels, np.asarray(values, dtype=float), side="left")


def assign_to_bands(points: np.ndarray, family, levels: np.ndarray | None = None) -> np.ndarray:
    """Histogram of band counts for points against a level family.

    ``family`` is either a HyperplaneFamily (linear values, O(n d) to
    evaluate) or an Ellipsoid with explicit ``levels`` (quadratic values,
    O(n d^2)); the binary search itself adds O(n log l).
    """
    if levels is None:
        levels = family.offsets
    evaluate = getattr(family, "values", None) or family.value
    idx = band_indices(evaluate(np.asarray(points, dtype=float)), levels)
    return np.bincount(idx, minlength=len(levels) + 1)
