"""Shared data model: point sets, coresets, induced probability vectors.

A point set is an ordered n x d real matrix; row order is significant
because the halving algorithms pair consecutive rows. A coreset is an
ordered multiset of row indices into a point set together with the size of
that universe; its induced probability vector puts mass multiplicity/n_out
on each selected row. Signed measures over the universe (for example
``p_in - q_out``) are represented as plain length-n float vectors.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PointSet",
    "Coreset",
    "ThinConfig",
    "as_points",
    "induced_prob_vectors",
]

THIN_ALGORITHMS = (
    "uniform", "kh", "lkh", "rkh", "kh_compress", "gs_thin", "gs_compress",
    "kt_compress",
)


def as_points(points):
    """Coerce a PointSet or array-like to a validated (n, d) float array."""
    if isinstance(points, PointSet):
        return points.points
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"points must be 2-D (n, d), got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"points must have n >= 1 and d >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points contain non-finite entries")
    return arr


@dataclass(frozen=True)
class PointSet:
    """Ordered collection of n points in R^d (row-major matrix)."""

    points: np.ndarray

    def __post_init__(self):
        arr = as_points(self.points)
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "points", arr)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class Coreset:
    """Ordered multiset of indices into a point set of size n.

    Repeats are permitted (they arise from greedy refinement swaps);
    ``indices`` preserves selection order.
    """

    indices: np.ndarray
    n: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size < 1:
            raise ValueError("coreset needs at least one index")
        if int(self.n) < 1:
            raise ValueError("universe size n must be >= 1")
        if idx.min() < 0 or idx.max() >= self.n:
            raise ValueError(
                f"coreset indices must lie in [0, {self.n}), got range "
                f"[{idx.min()}, {idx.max()}]")
        idx = np.ascontiguousarray(idx)
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "n", int(self.n))

    @property
    def n_out(self):
        return int(self.indices.size)

    def prob_vector(self):
        """Induced probability vector q_out over the n universe indices."""
        q = np.zeros(self.n)
        np.add.at(q, self.indices, 1.0 / self.n_out)
        return q

    def __len__(self):
        return self.n_out


def induced_prob_vectors(points, coreset):
    """Uniform input vector p_in and coreset vector q_out over [0, n).

    Args:
        points: PointSet, (n, d) array, or integer n.
        coreset: Coreset with indices valid for the input.

    Returns:
        (p_in, q_out) length-n float vectors, each summing to 1; q_out
        carries weight multiplicity/n_out on every selected index.
    """
    if isinstance(points, (int, np.integer)):
        n = int(points)
    else:
        n = as_points(points).shape[0]
    if coreset.n != n:
        raise ValueError(
            f"coreset universe size {coreset.n} does not match input n={n}")
    p_in = np.full(n, 1.0 / n)
    return p_in, coreset.prob_vector()


@dataclass
class ThinConfig:
    """Configuration record for a thinning run.

    ``n_out`` applies to the size-targeting algorithms (uniform, rkh,
    gs_thin); ``g`` is the compression level of the compress variants.
    The halvers (kh, lkh) always return n/2 points.
    """

    algorithm: str
    delta: float = 0.5
    n_out: int | None = None
    g: int | None = None
    seed: int = 0
    gs_impl: str = "cubic"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in THIN_ALGORITHMS:
            raise ValueError(
                f"unknown algorithm {self.algorithm!r}; "
                f"expected one of {THIN_ALGORITHMS}")
        if not 0.0 < float(self.delta) < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.g is not None and self.g < 0:
            raise ValueError("compression level g must be nonnegative")
