"""Kernel definitions, lazy cross-blocks, and dense kernel matrices.

Five kernel families are supported:

* ``gaussian(eta)``    -- exp(-eta * ||x - y||^2)
* ``linear``           -- <x, y>
* ``attention(d_key)`` -- exp(<a, a'>) * <b, b'> on rows concat(a, b),
  where ``a`` is the rescaled key block (first d_key coordinates) and
  ``b`` the augmented value block
* ``deep(eps, eta_q, eta_kappa, d_raw)`` -- [(1-eps) * kappa + eps] * q on
  rows concat(x, phi(x)); q and kappa are Gaussian kernels on the raw and
  embedded blocks. Embeddings are supplied by the caller; no network
  inference happens here.
* ``tabulated(K)``     -- entries looked up in a fixed SPSD matrix

All kernels expose block evaluation ``cross(X, I, J)`` addressed by row
indices into the full point matrix, which is what the thinning algorithms
consume: rows are materialized lazily so the compress-style algorithms
never build the full n x n matrix. Every scalar evaluation increments a
module-level counter so runtime claims stated in kernel evaluations are
auditable; heavyweight linear algebra elsewhere adds to a separate flop
estimate.

Pair evaluations are exactly symmetric: each formula reduces to dot
products and squared differences, which are commutative in floating point,
and dense matrices additionally mirror the upper triangle so K == K.T to
0 ulp.
"""

import numpy as np

from .data import as_points

__all__ = [
    "Kernel", "GaussianKernel", "LinearKernel", "AttentionKernel",
    "DeepKernel", "TabulatedKernel", "kernel_eval", "kernel_matrix",
    "deep_kernel_eval", "median_heuristic_eta", "parse_kernel_spec",
    "reset_counters", "get_counters", "add_flops",
]

_COUNTERS = {"kernel_evals": 0, "flops_estimate": 0}

# Row-block size for chunked pairwise-difference computations.
_CHUNK = 256


def reset_counters():
    _COUNTERS["kernel_evals"] = 0
    _COUNTERS["flops_estimate"] = 0


def get_counters():
    return dict(_COUNTERS)


def add_flops(n):
    _COUNTERS["flops_estimate"] += int(n)


def _count_evals(n):
    _COUNTERS["kernel_evals"] += int(n)


def _check_pair(x, y):
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite kernel input")
    return x, y


def _sqdist_block(A, B):
    # Direct differences so the (i, j) and (j, i) computations round
    # identically; chunked to bound the (chunk, |B|, d) intermediate.
    out = np.empty((A.shape[0], B.shape[0]))
    for lo in range(0, A.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, A.shape[0])
        diff = A[lo:hi, None, :] - B[None, :, :]
        out[lo:hi] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


class Kernel:
    """Interface shared by all kernel families."""

    def pair(self, x, y):
        """k(x, y) for two raw points (validates shape and finiteness)."""
        raise NotImplementedError

    def cross(self, X, rows, cols):
        """Block (k(x_i, x_j)) for i in rows, j in cols; counts evals."""
        raise NotImplementedError

    def diag(self, X, rows):
        """Vector of k(x_i, x_i) for i in rows."""
        rows = np.asarray(rows, dtype=np.int64)
        return np.array([self.pair(X[i], X[i]) for i in rows])

    def matrix(self, X):
        """Dense n x n kernel matrix, exactly symmetric."""
        X = as_points(X)
        n = X.shape[0]
        M = self.cross(X, np.arange(n), np.arange(n))
        upper = np.triu(M)
        return upper + np.triu(M, 1).T


class GaussianKernel(Kernel):
    """exp(-eta * ||x - y||^2) with bandwidth-inverse eta > 0."""

    def __init__(self, eta):
        if not eta > 0:
            raise ValueError(f"gaussian eta must be positive, got {eta}")
        self.eta = float(eta)

    def pair(self, x, y):
        x, y = _check_pair(x, y)
        _count_evals(1)
        d = x - y
        return float(np.exp(-self.eta * np.dot(d, d)))

    def cross(self, X, rows, cols):
        X = np.asarray(X, dtype=np.float64)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        _count_evals(rows.size * cols.size)
        return np.exp(-self.eta * _sqdist_block(X[rows], X[cols]))

    def diag(self, X, rows):
        _count_evals(len(rows))
        return np.ones(len(rows))

    def __repr__(self):
        return f"GaussianKernel(eta={self.eta})"


class LinearKernel(Kernel):
    """<x, y>; the kernel matrix is the Gram matrix X X^T."""

    def pair(self, x, y):
        x, y = _check_pair(x, y)
        _count_evals(1)
        return float(np.dot(x, y))

    def cross(self, X, rows, cols):
        X = np.asarray(X, dtype=np.float64)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        _count_evals(rows.size * cols.size)
        return X[rows] @ X[cols].T

    def diag(self, X, rows):
        X = np.asarray(X, dtype=np.float64)
        rows = np.asarray(rows, dtype=np.int64)
        _count_evals(rows.size)
        return np.einsum("ij,ij->i", X[rows], X[rows])

    def __repr__(self):
        return "LinearKernel()"


class AttentionKernel(Kernel):
    """exp(<a, a'>) * <b, b'> on rows storing concat(a, b).

    ``d_key`` is the length of the leading block ``a`` (rescaled keys);
    the remainder of each row is the augmented value block ``b``.
    """

    def __init__(self, d_key):
        if d_key < 1:
            raise ValueError("d_key must be >= 1")
        self.d_key = int(d_key)

    def _split(self, Z):
        return Z[:, :self.d_key], Z[:, self.d_key:]

    def pair(self, x, y):
        x, y = _check_pair(x, y)
        if x.size <= self.d_key:
            raise ValueError("attention rows need a value block after d_key")
        _count_evals(1)
        ex = np.exp(np.dot(x[:self.d_key], y[:self.d_key]))
        return float(ex * np.dot(x[self.d_key:], y[self.d_key:]))

    def cross(self, X, rows, cols):
        X = np.asarray(X, dtype=np.float64)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        _count_evals(rows.size * cols.size)
        Ka, Va = self._split(X[rows])
        Kb, Vb = self._split(X[cols])
        return np.exp(Ka @ Kb.T) * (Va @ Vb.T)

    def __repr__(self):
        return f"AttentionKernel(d_key={self.d_key})"


class DeepKernel(Kernel):
    """[(1 - eps) * kappa(phi(x), phi(y)) + eps] * q(x, y).

    Rows store concat(x, phi(x)) with the raw block of length ``d_raw``;
    ``q`` is Gaussian(eta_q) on the raw block and ``kappa`` Gaussian
    (eta_kappa) on the embedding block. Values lie in (0, 1] and equal 1
    when both blocks coincide.
    """

    def __init__(self, eps, eta_q, eta_kappa, d_raw):
        if not 0.0 < eps < 1.0:
            raise ValueError(f"deep-kernel eps must lie in (0, 1), got {eps}")
        if not (eta_q > 0 and eta_kappa > 0):
            raise ValueError("deep-kernel bandwidths must be positive")
        if d_raw < 1:
            raise ValueError("d_raw must be >= 1")
        self.eps = float(eps)
        self.eta_q = float(eta_q)
        self.eta_kappa = float(eta_kappa)
        self.d_raw = int(d_raw)

    def _split(self, Z):
        return Z[:, :self.d_raw], Z[:, self.d_raw:]

    def pair(self, x, y):
        x, y = _check_pair(x, y)
        if x.size <= self.d_raw:
            raise ValueError("deep-kernel rows need an embedding block")
        _count_evals(1)
        return deep_kernel_eval(self.eps, self.eta_q, self.eta_kappa,
                                x[:self.d_raw], y[:self.d_raw],
                                x[self.d_raw:], y[self.d_raw:],
                                _count=False)

    def cross(self, X, rows, cols):
        X = np.asarray(X, dtype=np.float64)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        _count_evals(rows.size * cols.size)
        Xa, Ea = self._split(X[rows])
        Xb, Eb = self._split(X[cols])
        q = np.exp(-self.eta_q * _sqdist_block(Xa, Xb))
        kap = np.exp(-self.eta_kappa * _sqdist_block(Ea, Eb))
        return ((1.0 - self.eps) * kap + self.eps) * q

    def diag(self, X, rows):
        _count_evals(len(rows))
        return np.ones(len(rows))

    def __repr__(self):
        return (f"DeepKernel(eps={self.eps}, eta_q={self.eta_q}, "
                f"eta_kappa={self.eta_kappa}, d_raw={self.d_raw})")


class TabulatedKernel(Kernel):
    """Kernel given by a fixed symmetric matrix.

    Points are single-column rows holding entry ids, so subsets and bins of
    an id matrix keep addressing the right entries. ``np.arange(n)`` as a
    column is the identity labeling.
    """

    def __init__(self, K):
        K = np.asarray(K, dtype=np.float64)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError("tabulated kernel needs a square matrix")
        if not np.all(np.isfinite(K)):
            raise ValueError("tabulated kernel has non-finite entries")
        if not np.array_equal(K, K.T):
            # Mirror the upper triangle so symmetry is exact.
            K = np.triu(K) + np.triu(K, 1).T
        self.K = K

    @staticmethod
    def ids(n):
        """Identity labeling for an n-entry tabulated kernel."""
        return np.arange(n, dtype=np.float64).reshape(-1, 1)

    def _lookup(self, X, rows):
        if X is None:
            return np.asarray(rows, dtype=np.int64)
        X = np.asarray(X)
        return X[np.asarray(rows, dtype=np.int64), 0].astype(np.int64)

    def pair(self, x, y):
        i, j = int(np.asarray(x).ravel()[0]), int(np.asarray(y).ravel()[0])
        _count_evals(1)
        return float(self.K[i, j])

    def cross(self, X, rows, cols):
        ri = self._lookup(X, rows)
        ci = self._lookup(X, cols)
        _count_evals(ri.size * ci.size)
        return self.K[np.ix_(ri, ci)]

    def diag(self, X, rows):
        ri = self._lookup(X, rows)
        _count_evals(ri.size)
        return np.diag(self.K)[ri].copy()

    def matrix(self, X=None):
        if X is None:
            _count_evals(self.K.size)
            return self.K.copy()
        ids = self._lookup(X, np.arange(np.asarray(X).shape[0]))
        _count_evals(ids.size ** 2)
        M = self.K[np.ix_(ids, ids)]
        return np.triu(M) + np.triu(M, 1).T

    def __repr__(self):
        return f"TabulatedKernel(n={self.K.shape[0]})"


def kernel_eval(kernel, x, y):
    """Evaluate k(x, y) for raw points; symmetric to 0 ulp in (x, y)."""
    return kernel.pair(x, y)


def kernel_matrix(kernel, points):
    """Dense SPSD kernel matrix for a point set (exactly symmetric)."""
    if isinstance(kernel, TabulatedKernel):
        return kernel.matrix(points)
    return kernel.matrix(as_points(points))


def deep_kernel_eval(eps, eta_q, eta_kappa, x, y, phi_x, phi_y, _count=True):
    """Deep kernel value [(1-eps) * kappa(phi_x, phi_y) + eps] * q(x, y).

    Embeddings phi_x, phi_y are precomputed by the caller.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    x, y = _check_pair(x, y)
    phi_x, phi_y = _check_pair(phi_x, phi_y)
    if _count:
        _count_evals(1)
    dr = x - y
    de = phi_x - phi_y
    q = np.exp(-eta_q * np.dot(dr, dr))
    kap = np.exp(-eta_kappa * np.dot(de, de))
    return float(((1.0 - eps) * kap + eps) * q)


def median_heuristic_eta(points, max_points=1024):
    """Bandwidth-inverse eta = 1 / (2 * median^2) over pairwise distances.

    This is a common convention, not a prescription of the underlying
    method; the algorithms accept any eta > 0. Large inputs are
    deterministically strided down to ``max_points`` rows first.
    """
    X = as_points(points)
    if X.shape[0] > max_points:
        step = int(np.ceil(X.shape[0] / max_points))
        X = X[::step]
    d2 = _sqdist_block(X, X)
    iu = np.triu_indices(X.shape[0], k=1)
    med = float(np.median(np.sqrt(d2[iu]))) if iu[0].size else 1.0
    if med <= 0:
        med = 1.0
    return 1.0 / (2.0 * med * med)


def parse_kernel_spec(text, tab_matrix=None):
    """Build a kernel from a CLI-style spec string.

    Formats: ``gaussian:eta=0.5``, ``gaussian:median`` (median heuristic is
    resolved by the caller), ``linear``, ``attention:dkey=16``,
    ``deep:eps=0.5,eta_q=1,eta_kappa=1,d_raw=2``, ``tabulated``.
    Returns (kind, kwargs); construction happens in :func:`make_kernel`.
    """
    head, _, rest = text.partition(":")
    head = head.strip().lower()
    params = {}
    if rest:
        for item in rest.split(","):
            if "=" in item:
                k, v = item.split("=", 1)
                params[k.strip()] = v.strip()
            elif item.strip():
                params[item.strip()] = True
    return head, params


def make_kernel(kind, params, tab_matrix=None, points=None):
    """Construct a Kernel from parsed spec parts."""
    if kind == "linear":
        return LinearKernel()
    if kind == "gaussian":
        if params.get("median") or params.get("eta") == "median":
            if points is None:
                raise ValueError("median heuristic needs the point set")
            return GaussianKernel(median_heuristic_eta(points))
        return GaussianKernel(float(params.get("eta", 1.0)))
    if kind == "attention":
        return AttentionKernel(int(params["dkey"]))
    if kind == "deep":
        return DeepKernel(float(params["eps"]), float(params["eta_q"]),
                          float(params["eta_kappa"]), int(params["d_raw"]))
    if kind == "tabulated":
        if tab_matrix is None:
            raise ValueError("tabulated kernel needs a matrix")
        return TabulatedKernel(tab_matrix)
    raise ValueError(f"unknown kernel kind {kind!r}")
