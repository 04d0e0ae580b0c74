"""Exact softmax attention and its thinned approximation.

Exact attention maps queries, keys, and values to row-stochastic mixtures
of value rows. The approximation selects a representative key-value subset
once, using compress-style thinning under a kernel that multiplies the
exponentiated key inner product by the inner product of values augmented
with a shared max-magnitude coordinate, then runs exact attention on the
selected subset. The selection costs O(d n_out^2) kernel work and the
final attention O(d n n_out), versus Theta(d n^2) for the exact map.
"""

import math
from dataclasses import dataclass

import numpy as np

from .data import Coreset
from .kernels import AttentionKernel
from .thinning import kh_compress

__all__ = [
    "AttentionProblem", "AttentionApproxResult", "exact_attention",
    "thinformer", "attention_max_err",
]


@dataclass(frozen=True)
class AttentionProblem:
    """Queries (n, d), keys (n, d), and values (n, d_v) with shared n."""

    queries: np.ndarray
    keys: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.queries, dtype=np.float64)
        k = np.asarray(self.keys, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
            raise ValueError("queries, keys, values must be 2-D")
        if not (q.shape[0] == k.shape[0] == v.shape[0]):
            raise ValueError("queries, keys, values need a shared row count")
        if q.shape[1] != k.shape[1]:
            raise ValueError("queries and keys need a shared dimension")
        for name, arr in (("queries", q), ("keys", k), ("values", v)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contain non-finite entries")
        object.__setattr__(self, "queries", q)
        object.__setattr__(self, "keys", k)
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.queries.shape[0]

    @property
    def d(self):
        return self.queries.shape[1]


@dataclass
class AttentionApproxResult:
    """Approximate softmax output, the selected key-value pairs, and the
    max-norm error against the exact output when it was computed."""

    t_hat: np.ndarray
    selected: Coreset
    max_err: float | None = None


def exact_attention(problem, subset=None):
    """Softmax attention output over a key-value subset.

    Args:
        problem: AttentionProblem with n queries and key-value pairs.
        subset: index array into the key-value rows (repeats allowed), or
            None for all pairs.

    Each output row is a convex combination of the selected value rows;
    the softmax is computed with per-row max subtraction, which leaves the
    quotient unchanged because the normalization cancels any per-row
    constant.
    """
    q, k, v = problem.queries, problem.keys, problem.values
    if subset is None:
        idx = np.arange(problem.n)
    else:
        idx = np.asarray(subset, dtype=np.int64).ravel()
        if idx.size == 0:
            raise ValueError("key-value subset must be nonempty")
        if idx.min() < 0 or idx.max() >= problem.n:
            raise ValueError("subset indices out of range")
    scores = (q @ k[idx].T) / math.sqrt(problem.d)
    scores -= scores.max(axis=1, keepdims=True)
    weights = np.exp(scores)
    weights /= weights.sum(axis=1, keepdims=True)
    return weights @ v[idx]


def thinformer(problem, g, stream, compute_exact=False):
    """Approximate attention by thinning the key-value pairs once.

    Keys are rescaled by d^(1/4) and values augmented with the shared
    coordinate v_max = max_i ||v_i||_inf, so the selection kernel
    exp(<a, a'>) <b, b'> reproduces exp(<k_i, k_j>/sqrt(d)) times the
    augmented value inner product. Thinning runs compress at level ``g``
    with failure probability 0.5; the uniform rescaling of the selected
    score matrix cancels in the softmax normalization, so the result is
    plain exact attention on the subset.

    Args:
        problem: AttentionProblem; n must be a power of 4.
        g: compression level; the subset has 2^g sqrt(n) pairs.
        stream: RandomStream driving the selection.
        compute_exact: also compute exact attention and the max-norm error.
    """
    k, v = problem.keys, problem.values
    v_max = float(np.abs(v).max())
    scaled_keys = k / problem.d ** 0.25
    augmented = np.hstack([
        scaled_keys, v, np.full((problem.n, 1), v_max)])
    kernel = AttentionKernel(d_key=problem.d)
    selected = kh_compress(augmented, kernel, delta=0.5, g=g, stream=stream)
    t_hat = exact_attention(problem, selected.indices)
    err = None
    if compute_exact:
        err = attention_max_err(t_hat, exact_attention(problem))
    return AttentionApproxResult(t_hat=t_hat, selected=selected, max_err=err)


def attention_max_err(t_hat, t):
    """Entrywise max absolute difference between two attention outputs."""
    t_hat = np.asarray(t_hat, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if t_hat.shape != t.shape:
        raise ValueError(f"shape mismatch: {t_hat.shape} vs {t.shape}")
    return float(np.abs(t_hat - t).max())
