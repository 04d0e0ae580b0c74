"""Spectral diagnostics and the adaptive quality bounds.

Shows how the squared-MMD bound trades the approximate-rank term against
the eigenvalue tail, why the Gaussian kernel admits closed-form eigenvalue
decay, and how the two-sample error inflation factor grows only
polylogarithmically when spectra decay fast.
"""

import math

import numpy as np

import lrthin as lt

rng = np.random.default_rng(7)
X = rng.random((512, 2))
kernel = lt.GaussianKernel(1.0)
K = lt.kernel_matrix(kernel, X)
eigs = lt.spectrum(K)

print("top eigenvalues of the kernel matrix:")
print("  " + " ".join(f"{v:.3g}" for v in eigs[:10]))
print(f"eps-rank at eps=1e-6*max: {lt.eps_rank(K, 1e-6 * eigs[0])}")

# analytic eigenvalue decay for points in the unit ball (1-d example,
# where the bound activates at small rank)
X1 = rng.uniform(-1, 1, (256, 1))
e1 = lt.spectrum(lt.kernel_matrix(lt.GaussianKernel(2.0), X1))
print("\nGaussian decay bound vs observed (d=1, eta=2, radius 1):")
for r in (6, 10, 20, 40):
    bound = lt.gaussian_eigenvalue_decay_bound(256, 1, r, 2.0, 1.0)
    print(f"  r={r:>3}: lambda_(r+1) = {e1[r]:.3e} <= bound {bound:.3e}")

# squared-MMD bound, optimized over the approximate rank
n_out = 64
nu = math.sqrt(math.log(n_out / 0.5)) / n_out
inputs = lt.BoundInputs(sub_gaussian_param=nu, tail_prob=0.05)
val, r_star = lt.mmd_bound_rhs(eigs, inputs, n_in=512, n_out=n_out)
print(f"\nsquared-MMD bound at n_out={n_out}: {val:.3e} "
      f"(rank term minimized at r={r_star})")

# kernel max seminorm bound over 512 queries
inputs = lt.BoundInputs(sub_gaussian_param=nu, tail_prob=0.05,
                        max_diag_root=1.0)
print(f"max-seminorm bound over 512 queries: "
      f"{lt.kms_bound_rhs(inputs, query_count=512):.3e}")

# two-sample error inflation with fast spectral decay grows ~ polylog(n)
print("\nerror inflation factor / log^5(n) along a doubling grid:")
for exp in range(8, 13):
    n = 2 ** exp
    n_in = 2 * n // 32
    n_out = 2 ** 4 * math.isqrt(n_in)
    r_grid = np.arange(1, 4 * n_out + 2)
    decay = n_in * np.exp(-0.4 * np.sqrt(r_grid))
    val = lt.ctt_inflation_factor(decay, decay, 1.0, n, n, 32, n_out,
                                  0.05 / 1.025)
    print(f"  n=2^{exp}: {val / math.log(n) ** 5:.4f}")
