"""Thinning algorithms.

All algorithms take an ordered point sequence and return a
:class:`~lrthin.data.Coreset` of indices into it, consuming randomness only
from the supplied :class:`~lrthin.rng.RandomStream`:

* ``thin_uniform``  -- uniform subsampling without replacement
* ``kh_halve``      -- probabilistic halving biased by a running RKHS sum
* ``lkh_halve``     -- the linear-kernel variant with O(n d) arithmetic and
  adaptive swap thresholds
* ``rkh_thin``      -- repeated halving down to a target size
* ``kh_compress`` / ``gs_compress`` / ``kt_compress`` -- the four-way
  divide-halve-concatenate recursion (output size 2^g sqrt(n))
* ``kh_refine``     -- halving followed by greedy single-point swaps that
  never increase MMD
* ``gs_halve`` / ``gs_thin`` -- halving by a kernelized random walk over
  fractional pair assignments, in a quartic-time variant that re-solves the
  step direction each iteration and a cubic-time variant that maintains the
  needed matrix inverse with block elimination and rank-one corrections

Every halving pass keeps exactly one index from each consecutive input pair
(rows 2i, 2i+1); callers control pairing by row order. Identical
(points, parameters, stream state) produce identical coresets.
"""

import math
import warnings

import numpy as np
import scipy.linalg

from . import kernels as _kernels
from .data import Coreset, as_points

__all__ = [
    "thin_uniform", "kh_halve", "lkh_halve", "rkh_thin", "kh_compress",
    "kt_compress", "kh_refine", "gs_halve", "gs_thin", "gs_compress",
    "thin", "compress_output_size",
]

# |z_i| within this of 1 freezes the coordinate at exactly +/-1.
_FREEZE_TOL = 1e-9


def _require_even(n):
    if n % 2 != 0 or n < 2:
        raise ValueError(f"halving needs an even input size >= 2, got {n}")


def thin_uniform(points, n_out, stream):
    """n_out distinct indices drawn uniformly without replacement.

    Indices are returned in draw order.
    """
    X = as_points(points)
    n = X.shape[0]
    if not 1 <= n_out <= n:
        raise ValueError(f"need 1 <= n_out <= {n}, got {n_out}")
    idx = stream.sample_without_replacement(n, int(n_out))
    return Coreset(np.asarray(idx, dtype=np.int64), n)


# ---------------------------------------------------------------------------
# Kernel Halving family
# ---------------------------------------------------------------------------

def _kh_halve_indices(X, kernel, idx, delta, stream, threshold_constant=None):
    """One halving pass over the subsequence X[idx]; returns kept indices.

    Pair i is (idx[2i], idx[2i+1]). The swap threshold is
    b_i * b_max,i * (1/2 + log(2 n_in / delta)); ``threshold_constant``
    overrides the parenthesized constant (advanced use; the default is the
    analyzed value).
    """
    idx = np.asarray(idx, dtype=np.int64)
    n_loc = idx.size
    _require_even(n_loc)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    const = (0.5 + math.log(2.0 * n_loc / delta)) \
        if threshold_constant is None else float(threshold_constant)

    diag = kernel.diag(X, idx)
    selected = np.empty(n_loc // 2, dtype=np.int64)
    # Positions (within idx) of the points chosen so far; used to evaluate
    # the running-sum inner product from the same kernel rows.
    sel_pos = np.empty(n_loc // 2, dtype=np.int64)
    b_max = 0.0
    for i in range(n_loc // 2):
        a_pos, b_pos = 2 * i, 2 * i + 1
        a_idx, b_idx = idx[a_pos], idx[b_pos]
        kab = kernel.cross(X, np.array([a_idx]), np.array([b_idx]))[0, 0]
        b_sq = max(diag[a_pos] + diag[b_pos] - 2.0 * kab, 0.0)
        b_i = math.sqrt(b_sq)
        b_max = max(b_max, b_i)
        threshold = b_i * b_max * const

        if i == 0:
            alpha = 0.0
        else:
            prev = idx[:2 * i]
            vals = kernel.cross(X, prev, np.array([a_idx, b_idx]))
            dif = vals[:, 0] - vals[:, 1]
            alpha = float(dif.sum() - 2.0 * dif[sel_pos[:i]].sum())

        if threshold <= 0.0:
            # Identical pair: either choice is equivalent; swap w.p. 1/2.
            prob = 0.5
        else:
            prob = min(1.0, 0.5 * max(0.0, 1.0 - alpha / threshold))
        if stream.uniform01() < prob:
            selected[i] = b_idx
            sel_pos[i] = b_pos
        else:
            selected[i] = a_idx
            sel_pos[i] = a_pos
    return selected


def kh_halve(points, kernel, delta, stream, threshold_constant=None):
    """Probabilistic kernel halving; keeps one point per consecutive pair."""
    X = as_points(points)
    sel = _kh_halve_indices(X, kernel, np.arange(X.shape[0]), delta, stream,
                            threshold_constant)
    return Coreset(sel, X.shape[0])


def _lkh_swap_params(sigma_sq, b, delta_i):
    """Adaptive swap threshold and updated sub-Gaussian constant.

    threshold = max(b * sigma * sqrt(2 log(2/delta_i)), b^2) and
    sigma^2 <- sigma^2 + b^2 (1 + (b^2 - 2 a) sigma^2 / a^2)_+.
    """
    a = max(b * math.sqrt(sigma_sq) * math.sqrt(2.0 * math.log(2.0 / delta_i)),
            b * b)
    if a > 0.0:
        sigma_sq = sigma_sq + b * b * max(
            0.0, 1.0 + (b * b - 2.0 * a) * sigma_sq / (a * a))
    return a, sigma_sq


def lkh_halve(points, delta, stream):
    """Linear-kernel halving in O(n d) arithmetic.

    Maintains the running signed sum psi of pair differences; round i uses
    the per-round failure share delta_i = delta / (2 i (log(n/2) + 1)) and
    the adaptive threshold from :func:`_lkh_swap_params`.
    """
    X = as_points(points)
    n = X.shape[0]
    _require_even(n)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    log_share = math.log(n / 2.0) + 1.0
    psi = np.zeros(X.shape[1])
    sigma_sq = 0.0
    selected = np.empty(n // 2, dtype=np.int64)
    for i in range(n // 2):
        diff = X[2 * i] - X[2 * i + 1]
        b = math.sqrt(float(diff @ diff))
        delta_i = delta / (2.0 * (i + 1) * log_share)
        threshold, sigma_sq = _lkh_swap_params(sigma_sq, b, delta_i)
        alpha = float(psi @ diff)
        if threshold <= 0.0:
            prob = 0.5
        else:
            prob = min(1.0, 0.5 * max(0.0, 1.0 - alpha / threshold))
        if stream.uniform01() < prob:
            selected[i] = 2 * i + 1
            psi += diff  # swapped: eta_i = +1
        else:
            selected[i] = 2 * i
            psi -= diff
    return Coreset(selected, n)


def rkh_thin(points, kernel, delta, n_out, stream):
    """Repeated halving with failure share delta/m per round."""
    X = as_points(points)
    n = X.shape[0]
    m = _halving_rounds(n, n_out)
    idx = np.arange(n, dtype=np.int64)
    for _ in range(m):
        idx = _kh_halve_indices(X, kernel, idx, delta / m, stream)
    return Coreset(idx, n)


def _halving_rounds(n_in, n_out):
    if n_out < 1 or n_in % n_out != 0:
        raise ValueError(
            f"n_out={n_out} must be n_in / 2^m for integer m >= 1 (n_in={n_in})")
    ratio = n_in // n_out
    m = ratio.bit_length() - 1
    if 2 ** m != ratio or m < 1:
        raise ValueError(
            f"n_out={n_out} must be n_in / 2^m for integer m >= 1 (n_in={n_in})")
    return m


# ---------------------------------------------------------------------------
# Compress meta-algorithm
# ---------------------------------------------------------------------------

def _validate_compress(n, g):
    a = round(math.log(n, 4))
    if 4 ** a != n:
        raise ValueError(f"compress needs a power-of-4 input size, got {n}")
    if not 0 <= g <= a:
        raise ValueError(f"compression level g must lie in [0, {a}], got {g}")
    return a


def compress_output_size(n_in, g):
    """Output size 2^g sqrt(n_in) of the compress recursion."""
    _validate_compress(n_in, g)
    return 2 ** g * math.isqrt(n_in)


def _compress_recursion(X, idx, g, stream, halve_fn, final_fn):
    """Four-way split, recurse, concatenate, halve.

    ``halve_fn(sub_idx, stream, is_final)`` halves a concatenated index
    sequence; the top-level halving (the one producing the final output) is
    flagged so a refining halver can be substituted there.
    """
    base = 4 ** g

    def rec(sub_idx, substream, is_final):
        if sub_idx.size == base:
            return sub_idx
        quarter = sub_idx.size // 4
        parts = [rec(sub_idx[j * quarter:(j + 1) * quarter],
                     substream.child(j), False) for j in range(4)]
        cat = np.concatenate(parts)
        fn = final_fn if is_final else halve_fn
        return fn(cat, substream.child(4))

    return rec(idx, stream, True)


def _compress_delta(ell, n_in, g, delta):
    # Failure share for a halving call on a concatenation of size ell;
    # log4(n_in) is integral here by the compress size precondition.
    log4_n = round(math.log(n_in, 4))
    return ell * ell / (n_in * 4 ** (g + 1) * (log4_n - g)) * delta


def kh_compress(points, kernel, delta, g, stream, threshold_constant=None):
    """Compress with probabilistic-halving rounds; output 2^g sqrt(n)."""
    X = as_points(points)
    n = X.shape[0]
    _validate_compress(n, g)

    def halve(sub_idx, substream, is_final=False):
        d = _compress_delta(sub_idx.size, n, g, delta)
        return _kh_halve_indices(X, kernel, sub_idx, d, substream,
                                 threshold_constant)

    sel = _compress_recursion(X, np.arange(n, dtype=np.int64), g, stream,
                              halve, halve)
    return Coreset(sel, n)


def kt_compress(points, kernel, delta, g, stream):
    """Compress whose terminal halving (2 n_out -> n_out) greedily refines.

    Identical to :func:`kh_compress` except that the final round runs
    :func:`kh_refine`'s swap stage after halving, so the output MMD never
    exceeds that of the unrefined coreset.
    """
    X = as_points(points)
    n = X.shape[0]
    _validate_compress(n, g)

    def halve(sub_idx, substream):
        d = _compress_delta(sub_idx.size, n, g, delta)
        return _kh_halve_indices(X, kernel, sub_idx, d, substream)

    def final(sub_idx, substream):
        d = _compress_delta(sub_idx.size, n, g, delta)
        return _kh_refine_indices(X, kernel, sub_idx, d, substream)

    sel = _compress_recursion(X, np.arange(n, dtype=np.int64), g, stream,
                              halve, final)
    return Coreset(sel, n)


def _kh_refine_indices(X, kernel, idx, delta, stream):
    """Halve X[idx], then greedily swap each kept point.

    Each original coreset member is replaced (in selection order) by the
    candidate in X[idx] minimizing the resulting MMD to the local input
    distribution; keeping the member is always a candidate, so MMD never
    increases. Swap objectives are evaluated from cached kernel sums in
    O(|idx|) per decision. Ties pick the earliest candidate position.
    """
    idx = np.asarray(idx, dtype=np.int64)
    n_loc = idx.size
    sel = _kh_halve_indices(X, kernel, idx, delta, stream)
    n_out = sel.size

    G = kernel.cross(X, idx, idx)          # local gram, O(n_loc^2) evals
    t = G.mean(axis=1)                     # kernel mean-embedding at each row
    pos_of = {int(v): p for p, v in enumerate(idx)}
    coreset_pos = np.array([pos_of[int(v)] for v in sel], dtype=np.int64)
    s = G[:, coreset_pos].sum(axis=1)      # sums to current coreset members
    _kernels.add_flops(G.size * 2)

    for slot in range(n_out):
        out_pos = coreset_pos[slot]
        s_minus = s - G[:, out_pos]
        # argmin_b MMD^2 after placing b in the open slot, up to constants:
        score = 2.0 * s_minus - 2.0 * n_out * t + np.diag(G)
        best = int(np.argmin(score))
        coreset_pos[slot] = best
        s = s_minus + G[:, best]
    _kernels.add_flops(5 * n_out * n_loc)
    return idx[coreset_pos]


def kh_refine(points, kernel, delta, stream):
    """Probabilistic halving followed by greedy single-point swaps."""
    X = as_points(points)
    sel = _kh_refine_indices(X, kernel, np.arange(X.shape[0]), delta, stream)
    return Coreset(sel, X.shape[0])


# ---------------------------------------------------------------------------
# Gram-Schmidt walk family
# ---------------------------------------------------------------------------

def _paired_difference_matrix(X, kernel, idx):
    """Q_ij = k(a_i,a_j) + k(b_i,b_j) - k(a_i,b_j) - k(b_i,a_j).

    (a_i, b_i) is the i-th consecutive pair of X[idx]; Q is symmetric to
    0 ulp and positive semidefinite for any kernel.
    """
    a = idx[0::2]
    b = idx[1::2]
    Kaa = kernel.cross(X, a, a)
    Kbb = kernel.cross(X, b, b)
    Kab = kernel.cross(X, a, b)
    Q = Kaa + Kbb - Kab - Kab.T
    upper = np.triu(Q)
    return upper + np.triu(Q, 1).T


def _snap(z):
    # Freeze coordinates within tolerance of the boundary at exactly +/-1.
    hit = np.abs(z) >= 1.0 - _FREEZE_TOL
    z[hit] = np.sign(z[hit])


def _step_interval(z, u):
    """Largest interval [lo, hi] with z + delta*u inside [-1, 1]^m."""
    lo, hi = -math.inf, math.inf
    nz = np.flatnonzero(u)
    for i in nz:
        ui = u[i]
        b1 = (-1.0 - z[i]) / ui
        b2 = (1.0 - z[i]) / ui
        if b1 > b2:
            b1, b2 = b2, b1
        lo = max(lo, b1)
        hi = min(hi, b2)
    return lo, hi


def _choose_step(z, u, stream):
    """Random signed step; always consumes exactly one uniform draw."""
    lo, hi = _step_interval(z, u)
    d_plus = abs(hi)
    d_minus = abs(lo)
    denom = d_plus + d_minus
    v = stream.uniform01()
    if denom == 0.0:
        return 0.0
    return d_plus if v < d_minus / denom else -d_minus


def _draw_pivot(active, stream):
    act = np.flatnonzero(active)
    return int(act[stream.uniform_index(act.size)])


def _walk_quartic(Q, stream):
    """Fractional-assignment walk re-solving the step direction each round.

    The direction minimizes u^T Q u subject to u_pivot = 1 and u_i = 0 off
    the active set. The direction system carries the minimum-norm Tikhonov
    ridge 1e-12 * trace(Q) / dim on its diagonal (see _gs_halve_indices),
    which resolves the argmin's ambiguity when Q is singular and leaves
    well-conditioned instances essentially unchanged.
    """
    m = Q.shape[0]
    z = np.zeros(m)
    active = np.ones(m, dtype=bool)
    pivot = _draw_pivot(active, stream)
    while np.any(np.abs(z) != 1.0):
        frozen = np.flatnonzero(active & (np.abs(z) == 1.0))
        if frozen.size:
            active[frozen[0]] = False
        if not active[pivot]:
            pivot = _draw_pivot(active, stream)
        rest = np.flatnonzero(active)
        rest = rest[rest != pivot]
        u = np.zeros(m)
        u[pivot] = 1.0
        if rest.size:
            sub = Q[np.ix_(rest, rest)]
            rhs = Q[rest, pivot]
            try:
                sol = scipy.linalg.cho_solve(
                    scipy.linalg.cho_factor(sub), rhs)
            except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
                # singular even after the ridge: minimum-norm solution
                sol = np.linalg.lstsq(sub, rhs, rcond=None)[0]
            u[rest] = -sol
            _kernels.add_flops(rest.size ** 3 // 3 + 2 * rest.size ** 2)
        delta_t = _choose_step(z, u, stream)
        z += delta_t * u
        _snap(z)
    return z


def _walk_cubic(Q, stream, inverse_check=None):
    """Same walk with the active-submatrix inverse maintained incrementally.

    C tracks (Q restricted to active-minus-pivot)^-1. When a coordinate
    leaves the active set, the inverse of the smaller submatrix is the
    block-elimination inverse corrected by one rank-one (Sherman-Morrison)
    update, costing O(|active|^2) per round instead of a fresh solve.

    Requires positive definite Q (the initial factorization below will have
    verified this). ``inverse_check``, if a list, receives the relative
    Frobenius error of C against a freshly computed inverse each round.
    """
    m = Q.shape[0]
    z = np.zeros(m)
    active = np.ones(m, dtype=bool)
    pivot = _draw_pivot(active, stream)
    c_index = np.flatnonzero(active)
    c_index = c_index[c_index != pivot]
    C = np.linalg.inv(Q[np.ix_(c_index, c_index)]) if c_index.size else \
        np.zeros((0, 0))
    _kernels.add_flops(c_index.size ** 3)

    while np.any(np.abs(z) != 1.0):
        frozen = np.flatnonzero(active & (np.abs(z) == 1.0))
        removed = None
        if frozen.size:
            removed = int(frozen[0])
            active[removed] = False
        old_pivot = pivot
        if not active[pivot]:
            pivot = _draw_pivot(active, stream)
        rest = np.flatnonzero(active)
        rest = rest[rest != pivot]

        if removed is not None:
            # The index leaving C's row/column set: the frozen coordinate,
            # or the freshly drawn pivot when the old pivot froze.
            drop = removed if removed != old_pivot else pivot
            keep = np.flatnonzero(c_index != drop)
            D = C[np.ix_(keep, keep)]
            q_col = Q[c_index[keep], drop]
            if keep.size:
                Dq = D @ q_col
                denom = Q[drop, drop] + q_col @ Dq
                C = D - np.outer(Dq, Dq) / denom
                _kernels.add_flops(4 * keep.size ** 2)
            else:
                C = np.zeros((0, 0))
            c_index = c_index[keep]
            # c_index must now equal the active-minus-pivot set.

        u = np.zeros(m)
        u[pivot] = 1.0
        if rest.size:
            u[rest] = -(C @ Q[rest, pivot])
            _kernels.add_flops(2 * rest.size ** 2)
        if inverse_check is not None and rest.size:
            fresh = np.linalg.inv(Q[np.ix_(rest, rest)])
            err = np.linalg.norm(C - fresh) / np.linalg.norm(fresh)
            inverse_check.append(float(err))

        delta_t = _choose_step(z, u, stream)
        z += delta_t * u
        _snap(z)
    return z


def _gs_halve_indices(X, kernel, idx, stream, impl, inverse_check=None):
    idx = np.asarray(idx, dtype=np.int64)
    _require_even(idx.size)
    Q = _paired_difference_matrix(X, kernel, idx)
    if not np.all(np.isfinite(Q)):
        raise ValueError("non-finite kernel values in the pair matrix")
    # Direction systems carry the minimum-norm ridge on the diagonal; it
    # disambiguates the step direction when Q is only semidefinite (rank
    # deficiency is the norm for smooth kernels at scale) and shifts
    # well-conditioned directions by a relative 1e-12, far below the
    # freeze tolerance. Off-diagonal entries, step sizes, and sign draws
    # are unaffected, so both implementations stay in exact agreement.
    mean_diag = float(np.trace(Q)) / Q.shape[0]
    ridge = 1e-12 * mean_diag
    Q_dir = Q + ridge * np.eye(Q.shape[0])
    if impl == "cubic":
        # Incremental inverse maintenance needs Q positive definite with a
        # numerical margin; rank-deficient instances (where the rank-one
        # updates would drift) take the re-solving walk instead.
        try:
            np.linalg.cholesky(Q - (1e-8 * mean_diag) * np.eye(Q.shape[0]))
        except np.linalg.LinAlgError:
            warnings.warn(
                "pair matrix is not numerically positive definite; "
                "falling back to the quartic walk", RuntimeWarning)
            impl = "quartic"
    if impl == "cubic":
        z = _walk_cubic(Q_dir, stream, inverse_check)
    elif impl == "quartic":
        z = _walk_quartic(Q_dir, stream)
    else:
        raise ValueError(f"impl must be 'quartic' or 'cubic', got {impl!r}")
    keep_first = z == 1.0
    return np.where(keep_first, idx[0::2], idx[1::2])


def gs_halve(points, kernel, stream, impl="cubic", inverse_check=None):
    """Halving via the kernelized walk; keeps one point per pair.

    ``impl='cubic'`` maintains the step-direction inverse incrementally and
    requires a positive definite pair matrix (verified by an initial
    factorization; failure falls back to the quartic walk with a warning).
    Both implementations consume randomness identically, so they produce
    the same coreset on positive definite instances given equal streams.
    ``inverse_check`` (a list) collects per-round relative inverse errors
    from the cubic walk for diagnostics.
    """
    X = as_points(points)
    sel = _gs_halve_indices(X, kernel, np.arange(X.shape[0]), stream, impl,
                            inverse_check)
    return Coreset(sel, X.shape[0])


def gs_thin(points, kernel, n_out, stream, impl="cubic"):
    """Repeated walk-based halving down to n_out = n / 2^m."""
    X = as_points(points)
    n = X.shape[0]
    m = _halving_rounds(n, n_out)
    idx = np.arange(n, dtype=np.int64)
    for _ in range(m):
        idx = _gs_halve_indices(X, kernel, idx, stream, impl)
    return Coreset(idx, n)


def gs_compress(points, kernel, g, stream, impl="cubic"):
    """Compress with walk-based halving; output 2^g sqrt(n)."""
    X = as_points(points)
    n = X.shape[0]
    _validate_compress(n, g)

    def halve(sub_idx, substream, is_final=False):
        return _gs_halve_indices(X, kernel, sub_idx, substream, impl)

    sel = _compress_recursion(X, np.arange(n, dtype=np.int64), g, stream,
                              halve, halve)
    return Coreset(sel, n)


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def thin(points, config, kernel=None, stream=None):
    """Run the algorithm named by a :class:`~lrthin.data.ThinConfig`.

    ``lkh`` ignores ``kernel`` (it is intrinsically linear); the other
    non-uniform algorithms require one. ``stream`` defaults to a fresh
    stream seeded from the config.
    """
    from .rng import RandomStream

    X = as_points(points)
    if stream is None:
        stream = RandomStream(config.seed)
    algo = config.algorithm
    if algo == "uniform":
        return thin_uniform(X, config.n_out, stream)
    if algo == "lkh":
        return lkh_halve(X, config.delta, stream)
    if kernel is None:
        raise ValueError(f"algorithm {algo!r} needs a kernel")
    if algo == "kh":
        return kh_halve(X, kernel, config.delta, stream)
    if algo == "rkh":
        return rkh_thin(X, kernel, config.delta, config.n_out, stream)
    if algo == "kh_compress":
        return kh_compress(X, kernel, config.delta, config.g, stream)
    if algo == "kt_compress":
        return kt_compress(X, kernel, config.delta, config.g, stream)
    if algo == "gs_thin":
        return gs_thin(X, kernel, config.n_out, stream, impl=config.gs_impl)
    if algo == "gs_compress":
        return gs_compress(X, kernel, config.g, stream, impl=config.gs_impl)
    raise ValueError(f"unknown algorithm {algo!r}")
