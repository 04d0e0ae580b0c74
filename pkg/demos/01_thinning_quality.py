"""Compare the thinning algorithms on one dataset.

Draws 1024 uniform points on the unit square, thins them to a range of
coreset sizes with every algorithm, and prints the kernel MMD between the
input and the coreset empirical distributions. Uniform subsampling decays
like n_out^(-1/2); the non-uniform algorithms track n_out^(-1) because the
Gaussian kernel matrix here is effectively low-rank.
"""

import numpy as np

import lrthin as lt

SEED = 0
SIZES = [32, 64, 128, 256, 512]

rng = np.random.default_rng(SEED)
X = rng.random((1024, 2))
kernel = lt.GaussianKernel(1.0)
K = lt.kernel_matrix(kernel, X)
p_in = np.full(1024, 1 / 1024)


def quality(coreset):
    return lt.mmd(K, p_in, coreset.prob_vector())


rows = {}
rows["uniform"] = [quality(lt.thin_uniform(X, no, lt.RandomStream(SEED, 1)))
                   for no in SIZES]
rows["rkh"] = [quality(lt.rkh_thin(X, kernel, 0.5, no, lt.RandomStream(SEED, 2)))
               for no in SIZES]
rows["kh_compress"] = [
    quality(lt.kh_compress(X, kernel, 0.5, g, lt.RandomStream(SEED, 3)))
    for g in range(5)]
rows["kt_compress"] = [
    quality(lt.kt_compress(X, kernel, 0.5, g, lt.RandomStream(SEED, 4)))
    for g in range(5)]
rows["gs_thin"] = [
    quality(lt.gs_thin(X, kernel, no, lt.RandomStream(SEED, 5), impl="quartic"))
    for no in SIZES]
rows["gs_compress"] = [
    quality(lt.gs_compress(X, kernel, g, lt.RandomStream(SEED, 6),
                           impl="quartic"))
    for g in range(5)]

print(f"{'algorithm':>14} " + " ".join(f"n_out={s:>4}" for s in SIZES))
for name, vals in rows.items():
    print(f"{name:>14} " + " ".join(f"{v:10.5f}" for v in vals))

print("\nclosed-form root-mean-squared MMD of uniform subsampling:")
print(" " * 15 + " ".join(
    f"{np.sqrt(lt.uniform_mmd2_expectation(K, 1024, s)):10.5f}"
    for s in SIZES))
