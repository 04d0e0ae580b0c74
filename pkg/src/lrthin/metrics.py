"""Quality metrics and spectral diagnostics.

MMD and the kernel max seminorm measure how well a coreset's empirical
distribution matches its input; the remaining functions evaluate the
closed-form quality of uniform subsampling, eigenvalue spectra and
eps-ranks, and the right-hand sides of the squared-MMD / max-seminorm /
test-power bounds that adapt to approximate low-rankness.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import kernels as _kernels

__all__ = [
    "mmd", "mmd_squared", "kms", "uniform_mmd2_expectation", "spectrum",
    "eps_rank", "BoundInputs", "mmd_bound_rhs", "kms_bound_rhs",
    "ctt_inflation_factor", "gaussian_eigenvalue_decay_bound",
]

# Quadratic forms this far below zero indicate a non-PSD kernel rather
# than rounding; anything in [-NEG_TOL, 0) clamps to 0.
_NEG_TOL = 1e-10
# Singular values below this fraction of the largest are treated as 0 in
# rank decisions.
_RANK_FLOOR = 1e-12


def mmd_squared(K, p, q):
    """Squared MMD (p - q)^T K (p - q) with tiny-negative clamping."""
    K = np.asarray(K, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    if K.shape != (p.size, p.size) or p.size != q.size:
        raise ValueError(
            f"dimension mismatch: K is {K.shape}, p has {p.size}, q has {q.size}")
    w = p - q
    val = float(w @ (K @ w))
    _kernels.add_flops(2 * K.size)
    if val < 0.0:
        if val < -_NEG_TOL:
            raise ValueError(
                f"quadratic form is {val:.3e} < -{_NEG_TOL:.0e}; "
                "kernel matrix is not positive semidefinite")
        val = 0.0
    return val


def mmd(K, p, q):
    """Kernel MMD between weight vectors p and q: sqrt((p-q)^T K (p-q))."""
    return math.sqrt(mmd_squared(K, p, q))


def kms(K, p, q, query_indices):
    """Kernel max seminorm max_{i in I} |e_i^T K (p - q)|."""
    K = np.asarray(K, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    idx = np.asarray(query_indices, dtype=np.int64).ravel()
    if idx.size == 0:
        raise ValueError("query index set must be nonempty")
    if idx.min() < 0 or idx.max() >= K.shape[0]:
        raise ValueError("query indices out of range")
    w = p - q
    return float(np.abs(K[idx] @ w).max())


def uniform_mmd2_expectation(K, n_in, n_out):
    """Exact E[MMD^2] of uniform subsampling without replacement.

    Equals (1/n_out) * (n_in - n_out)/(n_in - 1) * C_K with
    C_K = sum_i p_i K_ii - p^T K p for the uniform input vector p.
    """
    K = np.asarray(K, dtype=np.float64)
    n_in = int(n_in)
    n_out = int(n_out)
    if n_in < 2:
        raise ValueError("closed form needs n_in >= 2")
    if not 1 <= n_out <= n_in:
        raise ValueError(f"need 1 <= n_out <= n_in, got n_out={n_out}")
    if K.shape != (n_in, n_in):
        raise ValueError(f"kernel matrix shape {K.shape} != ({n_in}, {n_in})")
    p = np.full(n_in, 1.0 / n_in)
    c_k = float(np.mean(np.diag(K)) - p @ (K @ p))
    return (1.0 / n_out) * ((n_in - n_out) / (n_in - 1.0)) * c_k


def spectrum(K, asym_tol=1e-8):
    """Descending eigenvalues of a symmetric PSD matrix.

    Negative eigenvalues (rounding noise for SPSD inputs) are floored to 0.
    Raises on asymmetry beyond ``asym_tol`` in max-norm.
    """
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("spectrum needs a square matrix")
    if np.abs(K - K.T).max() > asym_tol:
        raise ValueError("matrix is not symmetric within tolerance")
    vals = scipy.linalg.eigvalsh((K + K.T) / 2.0)[::-1]
    _kernels.add_flops(9 * K.shape[0] ** 3)
    return np.maximum(vals, 0.0)


def eps_rank(M, eps):
    """Number of singular values strictly greater than eps.

    Values below 1e-12 times the largest singular value are treated as 0
    so that eps_rank(M, 0) is the numerical rank.
    """
    M = np.asarray(M, dtype=np.float64)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    sv = scipy.linalg.svdvals(M)
    if sv.size and sv[0] > 0:
        sv = np.where(sv < _RANK_FLOOR * sv[0], 0.0, sv)
    return int(np.count_nonzero(sv > eps))


@dataclass
class BoundInputs:
    """Inputs to the squared-MMD and max-seminorm bound evaluators.

    Attributes:
        sub_gaussian_param: thinning scale nu (> 0).
        tail_prob: bound failure probability delta' in (0, 1), separate
            from any failure probability already spent by the algorithm.
        approx_rank: fixed approximate rank r, or None to optimize over r.
        max_diag_root: D = max over queries of sqrt(K_ii).
        kernel_lipschitz: Lipschitz constant L of the kernel rows.
        query_radius: R = max Euclidean norm over query points.
        query_rank: rank of the query point matrix.
    """

    sub_gaussian_param: float
    tail_prob: float
    approx_rank: int | None = None
    max_diag_root: float | None = None
    kernel_lipschitz: float | None = None
    query_radius: float | None = None
    query_rank: int | None = None

    def __post_init__(self):
        if not self.sub_gaussian_param >= 0:
            raise ValueError("sub_gaussian_param must be nonnegative")
        if not 0.0 < self.tail_prob < 1.0:
            raise ValueError("tail_prob must lie in (0, 1)")


def _lambda_after(eigenvalues, r):
    # (r+1)-th largest eigenvalue with the convention lambda_{n+1} = 0.
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    return float(eigenvalues[r]) if r < eigenvalues.size else 0.0


def mmd_bound_rhs(eigenvalues, inputs, n_in, n_out):
    """High-probability squared-MMD bound, minimized over approximate rank.

    Evaluates nu^2 [e^2 r + e log(1/delta')] + lambda_{r+1} (1/n_out - 1/n_in)
    at ``inputs.approx_rank`` if given, else minimized over r in {0, ..., n}.

    Returns:
        (value, r_star) with r_star the evaluated or minimizing rank.
    """
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    nu2 = inputs.sub_gaussian_param ** 2
    log_term = math.log(1.0 / inputs.tail_prob)
    size_factor = 1.0 / n_out - 1.0 / n_in
    n = eigenvalues.size

    def at(r):
        return (nu2 * (math.e ** 2 * r + math.e * log_term)
                + _lambda_after(eigenvalues, r) * size_factor)

    if inputs.approx_rank is not None:
        r = int(inputs.approx_rank)
        if not 0 <= r <= n:
            raise ValueError(f"approx_rank must lie in [0, {n}]")
        return at(r), r
    values = [at(r) for r in range(n + 1)]
    r_star = int(np.argmin(values))
    return values[r_star], r_star


def kms_bound_rhs(inputs, query_count=None, lipschitz=False):
    """High-probability kernel-max-seminorm bound.

    Without ``lipschitz``: nu * D * sqrt(2 log(2 |I| / delta')) for a
    query set of size |I| = ``query_count``. With ``lipschitz``: the
    rank-adaptive form

        nu * D * sqrt(2 log(4/delta')) * (1 + 32/sqrt(3))
        + nu * D * 32 * sqrt((2/3) rank log(3 e^2 R L / min(D^2, R L)))

    requiring kernel_lipschitz, query_radius, and query_rank.
    """
    nu = inputs.sub_gaussian_param
    d_root = inputs.max_diag_root
    if d_root is None:
        raise ValueError("max_diag_root is required")
    if not lipschitz:
        if query_count is None or query_count < 1:
            raise ValueError("query_count must be >= 1")
        return nu * d_root * math.sqrt(
            2.0 * math.log(2.0 * query_count / inputs.tail_prob))
    if (inputs.kernel_lipschitz is None or inputs.query_radius is None
            or inputs.query_rank is None):
        raise ValueError(
            "lipschitz form needs kernel_lipschitz, query_radius, query_rank")
    lip = inputs.kernel_lipschitz
    radius = inputs.query_radius
    rank = inputs.query_rank
    first = nu * d_root * math.sqrt(2.0 * math.log(4.0 / inputs.tail_prob)) \
        * (1.0 + 32.0 / math.sqrt(3.0))
    ratio = 3.0 * math.e ** 2 * radius * lip / min(d_root ** 2, radius * lip)
    second = nu * d_root * 32.0 * math.sqrt((2.0 / 3.0) * rank * math.log(ratio))
    return first + second


def ctt_inflation_factor(eigs_x, eigs_y, k_inf, m, n, s, n_out, beta_tilde):
    """Error inflation factor of the compressed two-sample test.

    Returns the square root of

        log((m+n)/s) * log(n/beta_tilde) *
        min_{r <= 2 n_out} { ||k||_inf r log(n/beta_tilde)
                             + (lambda_{r+1}(K) + lambda_{r+1}(K')) n_out }.
    """
    if s < 2:
        raise ValueError("coreset count s must be >= 2")
    if not 1 <= n_out <= n:
        raise ValueError(f"need 1 <= n_out <= n, got n_out={n_out}")
    eigs_x = np.asarray(eigs_x, dtype=np.float64)
    eigs_y = np.asarray(eigs_y, dtype=np.float64)
    log_nb = math.log(n / beta_tilde)
    best = math.inf
    for r in range(0, 2 * int(n_out) + 1):
        tail = _lambda_after(eigs_x, r) + _lambda_after(eigs_y, r)
        best = min(best, k_inf * r * log_nb + tail * n_out)
    val = math.log((m + n) / s) * log_nb * best
    return math.sqrt(max(val, 0.0))


def gaussian_eigenvalue_decay_bound(n, d, r, eta, radius):
    """Eigenvalue tail bound for Gaussian kernel matrices on a ball.

    For n points in the radius-``radius`` Euclidean ball in R^d and any
    rank (2e)^d <= r < n, the (r+1)-th largest eigenvalue of the
    Gaussian(eta) kernel matrix is at most

        n * exp(-(d / 2e) * r^(1/d) * log(d r^(1/d) / (4 e^2 eta radius^2))).

    The analogous bound for data on a smooth compact manifold of intrinsic
    dimension d* < d is n * exp(-c * r^(2/(5 d*))) for a data-independent
    constant c; that form is documented here for reference only since c is
    not explicit.

    Raises ValueError outside the bound's validity range.
    """
    if not (2.0 * math.e) ** d <= r < n:
        raise ValueError(
            f"bound requires (2e)^d <= r < n; got r={r}, d={d}, n={n}")
    root = r ** (1.0 / d)
    return n * math.exp(-(d / (2.0 * math.e)) * root
                        * math.log(d * root / (4.0 * math.e ** 2 * eta * radius ** 2)))
