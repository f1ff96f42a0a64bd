"""Hot numeric kernels, numba-compiled when available.

Every kernel has a pure-numpy twin with identical semantics. Selection happens
once at import time: set ``DLFAULT_DISABLE_NUMBA=1`` to force the numpy path
(also used automatically when numba is not installed). The active path is
exposed as ``BACKEND`` ("numba" or "numpy") so benchmarks and tests can report
which one they exercised.
"""

import math
import os

import numpy as np

_DISABLE = os.environ.get("DLFAULT_DISABLE_NUMBA", "").strip().lower() in (
    "1", "true", "yes", "on",
)

try:
    if _DISABLE:
        raise ImportError("disabled via DLFAULT_DISABLE_NUMBA")
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:
    _HAVE_NUMBA = False


# -- best Gini split for binary CART ------------------------------------------
#
# Score to maximize over cut points: sum_{side} (pos^2 + neg^2) / n_side.
# This is an affine transform of the weighted Gini impurity, computed from
# integer counts only so the numba and numpy paths produce bit-identical
# doubles. Candidate features must be passed in ascending index order; the
# first strict maximum wins, which realizes the "lowest feature index, then
# lowest threshold" tie-break.

def _best_split_loop(X, y, feats):
    n = X.shape[0]
    pos_total = 0
    for i in range(n):
        pos_total += y[i]
    best_feat = -1
    best_thr = 0.0
    best_score = -1.0
    for fi in range(feats.shape[0]):
        f = feats[fi]
        col = X[:, f]
        order = np.argsort(col, kind="mergesort")
        pos_left = 0
        for i in range(n - 1):
            pos_left += y[order[i]]
            lo = col[order[i]]
            hi = col[order[i + 1]]
            if hi <= lo:
                continue
            n_left = i + 1
            n_right = n - n_left
            neg_left = n_left - pos_left
            pos_right = pos_total - pos_left
            neg_right = n_right - pos_right
            score = (pos_left * pos_left + neg_left * neg_left) / n_left + (
                pos_right * pos_right + neg_right * neg_right
            ) / n_right
            if score > best_score:
                best_score = score
                best_feat = f
                best_thr = 0.5 * (lo + hi)
    return best_feat, best_thr, best_score


def _best_split_numpy(X, y, feats):
    n = X.shape[0]
    y64 = y.astype(np.int64)
    pos_total = int(y64.sum())
    best_feat = -1
    best_thr = 0.0
    best_score = -1.0
    for f in feats:
        col = X[:, f]
        order = np.argsort(col, kind="mergesort")
        sorted_col = col[order]
        pos_left = np.cumsum(y64[order])[:-1]
        n_left = np.arange(1, n, dtype=np.int64)
        n_right = n - n_left
        neg_left = n_left - pos_left
        pos_right = pos_total - pos_left
        neg_right = n_right - pos_right
        score = (pos_left * pos_left + neg_left * neg_left) / n_left + (
            pos_right * pos_right + neg_right * neg_right
        ) / n_right
        valid = sorted_col[1:] > sorted_col[:-1]
        if not valid.any():
            continue
        idx = np.nonzero(valid)[0]
        j = idx[np.argmax(score[idx])]
        if score[j] > best_score:
            best_score = float(score[j])
            best_feat = int(f)
            best_thr = 0.5 * (sorted_col[j] + sorted_col[j + 1])
    return best_feat, best_thr, best_score


# -- squared Euclidean distances (KNN) ----------------------------------------

def _sq_dists_loop(points, q):
    n, d = points.shape
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        s = 0.0
        for j in range(d):
            diff = points[i, j] - q[j]
            s += diff * diff
        out[i] = s
    return out


def _sq_dists_numpy(points, q):
    diff = points - q
    return np.einsum("ij,ij->i", diff, diff)


# -- eight-statistic aggregation octet ----------------------------------------
#
# Input must be sorted ascending and free of NaN/Inf; the caller handles the
# filtering and degenerate cases. Output order matches the feature layout:
# max, min, median, mean, var, std, skew, sem.

def _octet_loop(s):
    n = s.shape[0]
    out = np.empty(8, dtype=np.float64)
    out[0] = s[n - 1]
    out[1] = s[0]
    if n % 2 == 1:
        out[2] = s[n // 2]
    else:
        out[2] = 0.5 * (s[n // 2 - 1] + s[n // 2])
    mean = 0.0
    for i in range(n):
        mean += s[i]
    mean /= n
    out[3] = mean
    ss = 0.0
    m3 = 0.0
    for i in range(n):
        d = s[i] - mean
        d2 = d * d
        ss += d2
        m3 += d2 * d
    if n > 1:
        var = ss / (n - 1)
        std = math.sqrt(var)
    else:
        var = 0.0
        std = 0.0
    out[4] = var
    out[5] = std
    m2_pow = (ss / n) ** 1.5  # can underflow to 0 even when ss > 0
    if n >= 3 and m2_pow > 0.0:
        out[6] = (m3 / n) / m2_pow
    else:
        out[6] = 0.0
    out[7] = std / math.sqrt(n)
    return out


def _octet_numpy(s):
    n = s.shape[0]
    mean = float(np.mean(s))
    d = s - mean
    ss = float(np.sum(d * d))
    if n > 1:
        var = ss / (n - 1)
        std = math.sqrt(var)
    else:
        var = 0.0
        std = 0.0
    m2_pow = (ss / n) ** 1.5
    if n >= 3 and m2_pow > 0.0:
        skew = float(np.sum(d**3) / n) / m2_pow
    else:
        skew = 0.0
    if n % 2 == 1:
        median = float(s[n // 2])
    else:
        median = 0.5 * float(s[n // 2 - 1] + s[n // 2])
    return np.array(
        [s[n - 1], s[0], median, mean, var, std, skew, std / math.sqrt(n)],
        dtype=np.float64,
    )


if _HAVE_NUMBA:
    BACKEND = "numba"
    best_split = njit(cache=True)(_best_split_loop)
    sq_dists = njit(cache=True)(_sq_dists_loop)
    octet = njit(cache=True)(_octet_loop)
else:
    BACKEND = "numpy"
    best_split = _best_split_numpy
    sq_dists = _sq_dists_numpy
    octet = _octet_numpy
