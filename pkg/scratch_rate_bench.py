import json
import time

import numpy as np

import lrthin as lt

N = 1024
SIZES = [32, 64, 128, 256, 512]
SEEDS = 50


def mmds_for_seed(seed):
    rng = np.random.default_rng(seed)
    X = rng.random((N, 2))
    k = lt.GaussianKernel(1.0)
    Km = lt.kernel_matrix(k, X)
    rowmean = Km.mean(axis=1)
    base = float(rowmean.mean())

    def mmd_of(idx):
        sub = Km[np.ix_(idx, idx)].mean()
        return float(np.sqrt(max(base - 2.0 * rowmean[idx].mean() + sub, 0.0)))

    out = {}
    for i, algo in enumerate(["uniform", "rkh", "khc", "ktc", "gsc"]):
        vals = []
        for no in SIZES:
            st = lt.RandomStream(seed, 100 + i)
            g = int(np.log2(no / 32))
            if algo == "uniform":
                c = lt.thin_uniform(X, no, st)
            elif algo == "rkh":
                c = lt.rkh_thin(X, k, 0.5, no, st)
            elif algo == "khc":
                c = lt.kh_compress(X, k, 0.5, g, st)
            elif algo == "ktc":
                c = lt.kt_compress(X, k, 0.5, g, st)
            else:
                c = lt.gs_compress(X, k, g, st)
            vals.append(mmd_of(c.indices))
        out[algo] = vals
    # gs_thin: harvest intermediates of one run (equivalent to separate runs
    # on the same stream by the halving-composition property)
    st = lt.RandomStream(seed, 100 + 5)
    idx = np.arange(N)
    vals = {}
    from lrthin.thinning import _gs_halve_indices
    while idx.size > 32:
        idx = _gs_halve_indices(X, k, idx, st, "cubic")
        if idx.size in SIZES:
            vals[idx.size] = mmd_of(idx)
    out["gs"] = [vals[s] for s in SIZES]
    return out


t0 = time.time()
acc = {a: [] for a in ["uniform", "rkh", "khc", "ktc", "gsc", "gs"]}
for seed in range(SEEDS):
    r = mmds_for_seed(seed)
    for a, v in r.items():
        acc[a].append(v)
    if seed % 10 == 9:
        print(f"seed {seed} done, {time.time() - t0:.1f}s", flush=True)

print(json.dumps({a: np.median(np.array(v), axis=0).tolist()
                  for a, v in acc.items()}))
for a, v in acc.items():
    med = np.median(np.array(v), axis=0)
    slope = np.polyfit(np.log(SIZES), np.log(med), 1)[0]
    print(a, "medians", ["%.5f" % x for x in med], "slope %.3f" % slope)
print(f"total {time.time() - t0:.1f}s")
