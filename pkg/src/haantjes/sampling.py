"""Seeded sample generation.

All randomness goes through ``numpy.random.default_rng(seed)`` (the PCG64 bit
generator), so a fixed seed reproduces the same points on every platform.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

MAX_REJECTIONS = 10_000


def make_rng(seed: int | None = 0) -> np.random.Generator:
    return np.random.default_rng(seed)


def sample_box(
    rng: np.random.Generator,
    lo: float | Sequence[float],
    hi: float | Sequence[float],
    dim: int,
    count: int,
    accept: Callable[[np.ndarray], bool] | None = None,
) -> list[np.ndarray]:
    """``count`` uniform points of the box [lo, hi]^dim, rejecting points where ``accept`` is false."""
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (dim,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (dim,))
    out: list[np.ndarray] = []
    rejected = 0
    while len(out) < count:
        x = rng.uniform(lo, hi)
        if accept is None or accept(x):
            out.append(x)
            continue
        rejected += 1
        if rejected > MAX_REJECTIONS + 100 * count:
            raise RuntimeError(f"sampler rejected {rejected} points; the acceptance region looks empty")
    return out


def min_pair_gap(q: np.ndarray) -> float:
    q = np.asarray(q, dtype=float)
    if q.size < 2:
        return np.inf
    d = np.abs(q[:, None] - q[None, :]) + np.diag(np.full(q.size, np.inf))
    return float(d.min())


def separated(n: int, margin: float) -> Callable[[np.ndarray], bool]:
    """Acceptance predicate: the first n coordinates are pairwise at least ``margin`` apart."""
    return lambda x: min_pair_gap(x[:n]) >= margin
