"""Pure numpy fallback for the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def best_split(Xn, yn, order, min_leaf):
    n, p = Xn.shape
    if n < 2:
        return -1, -1, 0.0, -np.inf
    total = np.cumsum(yn)[-1]
    ys = yn[order]
    vals = np.take_along_axis(Xn, order, axis=0)
    # split after sorted position i: left holds positions 0..i
    cl = np.cumsum(ys, axis=0)[:-1]
    nl = np.arange(1, n, dtype=np.float64)[:, None]
    nr = n - nl
    sr = total - cl
    with np.errstate(divide="ignore", invalid="ignore"):
        score = cl * cl / nl + sr * sr / nr
    valid = (nl >= min_leaf) & (nr >= min_leaf) & (vals[:-1] < vals[1:])
    score = np.where(valid, score, -np.inf)
    flat = score.T.ravel()
    k = int(np.argmax(flat))
    if not np.isfinite(flat[k]):
        return -1, -1, 0.0, -np.inf
    col, pos = divmod(k, n - 1)
    thr = (vals[pos, col] + vals[pos + 1, col]) / 2.0
    return col, pos, float(thr), float(flat[k])


def concordance_counts(rank, y):
    n = len(rank)
    conc = 0
    ties = 0
    for i in range(n - 1):
        yj = y[i + 1:]
        rj = rank[i + 1:]
        eq = yj == y[i]
        ties += int(eq.sum())
        agree = (rank[i] < rj) == (y[i] < yj)
        conc += int((agree & ~eq).sum())
    return conc, ties
