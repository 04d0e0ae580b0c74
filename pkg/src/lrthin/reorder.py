"""Gradient reordering for epoch-based SGD, plus a desk-scale harness.

After an epoch, the recorded stochastic gradients are halved under the
linear kernel; the steps whose gradients were selected keep their relative
order at the front of the next epoch's permutation and the rest are
reversed onto the back. The prefix-discrepancy diagnostic measures the
worst signed prefix sum this induces, and :func:`run_sgd` compares the
adaptive ordering against random reshuffling on least-squares and logistic
objectives.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import eps_rank
from .rng import RandomStream
from .thinning import lkh_halve

__all__ = [
    "thinned_reorder", "prefix_discrepancy", "SGDProblem", "SGDResult",
    "run_sgd", "gradient_eps_threshold",
]


def thinned_reorder(grads, prior_perm, delta=0.5, stream=None, select=None):
    """Next-epoch permutation from this epoch's recorded gradients.

    Args:
        grads: (n, d) per-step gradients, in the order they were used.
        prior_perm: permutation applied this epoch; entry i is the example
            processed at step i.
        delta: failure probability of the default linear-kernel halving.
        stream: RandomStream for the default halving.
        select: optional override returning the selected step indices
            (an iterable over [0, n)); used for degenerate selectors.

    Selected steps keep their order at the front; unselected steps are
    prepended to the back list, so they appear reversed.
    """
    grads = np.asarray(grads, dtype=np.float64)
    prior_perm = np.asarray(prior_perm, dtype=np.int64)
    n = grads.shape[0]
    if prior_perm.shape != (n,):
        raise ValueError("prior_perm length must match the gradient count")
    if np.sort(prior_perm).tolist() != list(range(n)):
        raise ValueError("prior_perm is not a permutation")
    if select is None:
        if n % 2 != 0:
            raise ValueError("default halving selector needs even n")
        if stream is None:
            raise ValueError("stream required for the halving selector")
        chosen = lkh_halve(grads, delta, stream).indices
    else:
        chosen = np.asarray(list(select(grads)), dtype=np.int64)
    mask = np.zeros(n, dtype=bool)
    mask[chosen] = True
    front, back = [], []
    for i in range(n):
        if mask[i]:
            front.append(prior_perm[i])
        else:
            back.insert(0, prior_perm[i])
    return np.asarray(front + back, dtype=np.int64)


def prefix_discrepancy(grads, signs):
    """max over prefixes j of || sum_{i<=j} signs_i * grads_i ||_2."""
    grads = np.asarray(grads, dtype=np.float64)
    signs = np.asarray(signs, dtype=np.float64).ravel()
    if signs.size != grads.shape[0]:
        raise ValueError("signs length must match the gradient count")
    sums = np.cumsum(signs[:, None] * grads, axis=0)
    return float(np.sqrt((sums * sums).sum(axis=1)).max())


def gradient_eps_threshold(grads, n_epochs):
    """Rank threshold eps_k for an epoch's gradient matrix.

    eps_k = sqrt(9 e log(4 K n log(e n / 2)) log(4 K n))
            * max_i ||x_i - xbar|| / sqrt(n).
    """
    grads = np.asarray(grads, dtype=np.float64)
    n = grads.shape[0]
    centered = grads - grads.mean(axis=0)
    max_dev = float(np.sqrt((centered * centered).sum(axis=1)).max())
    log_a = math.log(4.0 * n_epochs * n * math.log(math.e * n / 2.0))
    log_b = math.log(4.0 * n_epochs * n)
    return math.sqrt(9.0 * math.e * log_a * log_b) * max_dev / math.sqrt(n)


@dataclass
class SGDProblem:
    """Finite-sum objective for the reordering harness.

    ``least_squares``: f_i(w) = (1/2) (<a_i, w> - b_i)^2
    ``logistic``:      f_i(w) = log(1 + exp(-b_i <a_i, w>)), b_i in {-1, +1}
    both plus (l2/2) ||w||^2 when ``l2`` > 0.
    """

    loss_kind: str
    features: np.ndarray
    targets: np.ndarray
    step_size: float
    epochs: int
    l2: float = 0.0
    batch_size: int = 1

    def __post_init__(self):
        if self.loss_kind not in ("least_squares", "logistic"):
            raise ValueError(f"unknown loss {self.loss_kind!r}")
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64).ravel()
        n = self.features.shape[0]
        if self.targets.size != n:
            raise ValueError("targets length must match feature rows")
        if not self.step_size >= 0:
            raise ValueError("step size must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if n % self.batch_size != 0:
            raise ValueError("batch_size must divide n")


@dataclass
class SGDResult:
    losses: list = field(default_factory=list)       # full loss after each epoch
    eps_ranks: list = field(default_factory=list)
    eps_values: list = field(default_factory=list)
    diverged: bool = False
    final_weights: np.ndarray | None = None


def _per_example_grads(problem, w, rows):
    A = problem.features[rows]
    b = problem.targets[rows]
    if problem.loss_kind == "least_squares":
        resid = A @ w - b
        grads = resid[:, None] * A
    else:
        margin = -b * (A @ w)
        # sigmoid(margin) without overflow
        sig = np.where(margin >= 0,
                       1.0 / (1.0 + np.exp(-margin)),
                       np.exp(margin) / (1.0 + np.exp(margin)))
        grads = (-b * sig)[:, None] * A
    if problem.l2 > 0:
        grads = grads + problem.l2 * w
    return grads


def _full_loss(problem, w):
    A, b = problem.features, problem.targets
    if problem.loss_kind == "least_squares":
        resid = A @ w - b
        loss = 0.5 * float(resid @ resid) / A.shape[0]
    else:
        margin = -b * (A @ w)
        loss = float(np.logaddexp(0.0, margin).mean())
    if problem.l2 > 0:
        loss += 0.5 * problem.l2 * float(w @ w)
    return loss


def run_sgd(problem, ordering, seed):
    """Epoch-based SGD with the chosen reordering rule.

    Args:
        problem: SGDProblem.
        ordering: 'random_reshuffle' draws a fresh uniform permutation each
            epoch; 'lkh_reorder' reorders using the recorded gradients with
            halving failure probability 1/(2 K).
        seed: stream seed; fully determines the trajectory.

    Gradients are recorded at the iterate where they were used (per
    example, even when updates are applied per batch). Non-finite losses
    mark the result diverged and stop the run rather than raising.

    Returns:
        SGDResult with per-epoch full losses and gradient-matrix rank
        diagnostics (the eps threshold and the matching eps-rank).
    """
    if ordering not in ("random_reshuffle", "lkh_reorder"):
        raise ValueError(f"unknown ordering {ordering!r}")
    n = problem.features.shape[0]
    d = problem.features.shape[1]
    if ordering == "lkh_reorder" and n % 2 != 0:
        raise ValueError("lkh_reorder needs an even number of examples")
    root = RandomStream(seed)
    perm_stream = root.child(0)
    halve_stream = root.child(1)
    w = np.zeros(d)
    perm = np.asarray(perm_stream.permutation(n), dtype=np.int64)
    result = SGDResult()
    halve_delta = 1.0 / (2.0 * problem.epochs)

    for _ in range(problem.epochs):
        grads = np.empty((n, d))
        for start in range(0, n, problem.batch_size):
            rows = perm[start:start + problem.batch_size]
            g = _per_example_grads(problem, w, rows)
            grads[start:start + problem.batch_size] = g
            w = w - problem.step_size * g.mean(axis=0)
        loss = _full_loss(problem, w)
        result.losses.append(loss)
        if not (math.isfinite(loss) and np.all(np.isfinite(grads))):
            result.diverged = True
            break
        eps_k = gradient_eps_threshold(grads, problem.epochs)
        result.eps_values.append(eps_k)
        result.eps_ranks.append(eps_rank(grads, eps_k))
        if ordering == "random_reshuffle":
            perm = np.asarray(perm_stream.permutation(n), dtype=np.int64)
        else:
            perm = thinned_reorder(grads, perm, delta=halve_delta,
                                   stream=halve_stream)
    result.final_weights = w
    return result
