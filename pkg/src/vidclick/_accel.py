"""Hot numeric kernels with two interchangeable backends.

The inner loops that dominate cohort-scale runs live here: weighted edit
distance, batched fuzzy pattern scoring, Markov window counting, and the
k-means assignment step.  Each kernel has a numba ``@njit`` implementation
and a pure-numpy fallback.  Selection:

* ``VIDCLICK_BACKEND=numpy``  force the numpy fallback
* ``VIDCLICK_BACKEND=numba``  require numba (raise if unavailable)
* unset                       numba when importable, else numpy

Both implementations of every kernel are importable under ``_nb``/``_np``
suffixes so tests and ``benchmarks/bench_kernels.py`` can compare them.
Integer kernels agree exactly across backends; float kernels agree to
rounding (operation order differs), so a fixed backend must be used when
byte-stable output matters.
"""

from __future__ import annotations

import os

import numpy as np

_FLAG = os.environ.get("VIDCLICK_BACKEND", "").strip().lower()
if _FLAG not in ("", "numba", "numpy"):
    raise RuntimeError(f"VIDCLICK_BACKEND must be 'numba' or 'numpy', got {_FLAG!r}")

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - environment without numba
    HAS_NUMBA = False
    if _FLAG == "numba":
        raise RuntimeError("VIDCLICK_BACKEND=numba but numba is not importable")

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = HAS_NUMBA and _FLAG != "numpy"


def active_backend() -> str:
    """Name of the backend the public kernels dispatch to."""
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# weighted edit distance (turning t into s; delete-from-t costs w_del)
# ---------------------------------------------------------------------------


@njit(cache=True)
def edit_distance_nb(s, t, w_del, w_ins, w_sub):
    ns = s.shape[0]
    nt = t.shape[0]
    prev = np.empty(nt + 1, dtype=np.float64)
    cur = np.empty(nt + 1, dtype=np.float64)
    for j in range(nt + 1):
        prev[j] = j * w_del
    for i in range(1, ns + 1):
        cur[0] = i * w_ins
        si = s[i - 1]
        for j in range(1, nt + 1):
            sub = prev[j - 1] + (0.0 if t[j - 1] == si else w_sub)
            ins = prev[j] + w_ins
            dele = cur[j - 1] + w_del
            best = sub
            if ins < best:
                best = ins
            if dele < best:
                best = dele
            cur[j] = best
        tmp = prev
        prev = cur
        cur = tmp
    return prev[nt]


def edit_distance_np(s, t, w_del, w_ins, w_sub):
    # Row recurrence: row[j] = min(c[j], row[j-1] + w_del) unrolls to a
    # running minimum of c[k] - k*w_del, which np.minimum.accumulate gives.
    nt = t.shape[0]
    jj = np.arange(nt + 1, dtype=np.float64)
    del_ramp = w_del * jj
    prev = del_ramp.copy()
    c = np.empty(nt + 1, dtype=np.float64)
    for i in range(1, s.shape[0] + 1):
        sub = prev[:-1] + np.where(t == s[i - 1], 0.0, w_sub)
        np.minimum(sub, prev[1:] + w_ins, out=c[1:])
        c[0] = i * w_ins
        prev = np.minimum.accumulate(c - del_ramp) + del_ramp
    return float(prev[nt])


# ---------------------------------------------------------------------------
# batched fuzzy pattern weights (the cohort-scale hot path)
#
# For each 4-token pattern against one sequence:
#   pattern occurs contiguously  -> 1 - cosine distance over 4-gram counts
#   no token shared with seq     -> 1 - edit distance, deletions free
#   otherwise                    -> 1 - edit distance, deletions cost w_del
# ---------------------------------------------------------------------------


@njit(cache=True)
def fuzzy_weights_nb(patterns, seq, w_del_partial, w_ins, w_sub):
    n_pat = patterns.shape[0]
    m = seq.shape[0]
    n_g = m - 3 if m >= 4 else 0
    packs = np.empty(n_g, dtype=np.int64)
    for j in range(n_g):
        packs[j] = ((seq[j] * 8 + seq[j + 1]) * 8 + seq[j + 2]) * 8 + seq[j + 3]
    packs = np.sort(packs)
    sq_sum = 0.0
    j = 0
    while j < n_g:
        k = j
        while k < n_g and packs[k] == packs[j]:
            k += 1
        c = k - j
        sq_sum += c * c
        j = k
    seq_mask = 0
    for j in range(m):
        seq_mask |= 1 << seq[j]
    out = np.empty(n_pat, dtype=np.float64)
    for pi in range(n_pat):
        p = patterns[pi]
        pk = ((p[0] * 8 + p[1]) * 8 + p[2]) * 8 + p[3]
        occ = 0
        for j in range(n_g):
            if packs[j] == pk:
                occ += 1
        if occ > 0:
            # pattern profile is a single 4-gram, so |v(p)| = 1
            out[pi] = occ / np.sqrt(sq_sum)
        else:
            pmask = (1 << p[0]) | (1 << p[1]) | (1 << p[2]) | (1 << p[3])
            wd = 0.0 if (pmask & seq_mask) == 0 else w_del_partial
            out[pi] = 1.0 - edit_distance_nb(p, seq, wd, w_ins, w_sub)
    return out


def fuzzy_weights_np(patterns, seq, w_del_partial, w_ins, w_sub):
    m = seq.shape[0]
    if m >= 4:
        packs = ((seq[:-3] * 8 + seq[1:-2]) * 8 + seq[2:-1]) * 8 + seq[3:]
        _, counts = np.unique(packs, return_counts=True)
        sq_sum = float(np.sum(counts.astype(np.float64) ** 2))
    else:
        packs = np.empty(0, dtype=np.int64)
        sq_sum = 0.0
    seq_mask = 0
    for code in np.unique(seq):
        seq_mask |= 1 << int(code)
    out = np.empty(patterns.shape[0], dtype=np.float64)
    for pi in range(patterns.shape[0]):
        p = patterns[pi]
        pk = int(((p[0] * 8 + p[1]) * 8 + p[2]) * 8 + p[3])
        occ = int(np.count_nonzero(packs == pk))
        if occ > 0:
            out[pi] = occ / np.sqrt(sq_sum)
        else:
            pmask = (1 << int(p[0])) | (1 << int(p[1])) | (1 << int(p[2])) | (1 << int(p[3]))
            wd = 0.0 if (pmask & seq_mask) == 0 else w_del_partial
            out[pi] = 1.0 - edit_distance_np(p, seq, wd, w_ins, w_sub)
    return out


# ---------------------------------------------------------------------------
# Markov window counts
# ---------------------------------------------------------------------------


@njit(cache=True)
def transition_counts_nb(seq, order, n_states):
    n_rows = n_states**order
    counts = np.zeros((n_rows, n_states), dtype=np.int64)
    n = seq.shape[0]
    if n <= order:
        return counts
    mod = n_states ** (order - 1)
    idx = 0
    for i in range(order):
        idx = idx * n_states + seq[i]
    for t in range(order, n):
        counts[idx, seq[t]] += 1
        idx = (idx % mod) * n_states + seq[t]
    return counts


def transition_counts_np(seq, order, n_states):
    n_rows = n_states**order
    counts = np.zeros((n_rows, n_states), dtype=np.int64)
    n = seq.shape[0]
    if n <= order:
        return counts
    hist = np.zeros(n - order, dtype=np.int64)
    for j in range(order):
        hist = hist * n_states + seq[j : n - order + j]
    np.add.at(counts, (hist, seq[order:]), 1)
    return counts


# ---------------------------------------------------------------------------
# k-means assignment step
# ---------------------------------------------------------------------------


@njit(cache=True)
def nearest_centroids_nb(X, C):
    n, d = X.shape
    k = C.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = np.inf
        bj = 0
        for j in range(k):
            s = 0.0
            for l in range(d):
                diff = X[i, l] - C[j, l]
                s += diff * diff
            if s < best:
                best = s
                bj = j
        labels[i] = bj
        dists[i] = best
    return labels, dists


def nearest_centroids_np(X, C):
    d2 = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    return labels.astype(np.int64), d2[np.arange(X.shape[0]), labels]


if USE_NUMBA:
    edit_distance = edit_distance_nb
    fuzzy_weights = fuzzy_weights_nb
    transition_counts = transition_counts_nb
    nearest_centroids = nearest_centroids_nb
else:
    edit_distance = edit_distance_np
    fuzzy_weights = fuzzy_weights_np
    transition_counts = transition_counts_np
    nearest_centroids = nearest_centroids_np
