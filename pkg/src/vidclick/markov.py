"""Markov-chain fitting over click operations and k-means clustering.

Transition matrices are row-stochastic over the canonical operation order
(``tokens.CLICK_OPS``); an order-m chain flattens its histories to 8^m rows.
Rows never observed keep a uniform distribution so likelihoods stay defined
(add-one smoothing is available as an alternative).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _accel
from .ingest import Vwss, pause_seconds, seek_dwell_seconds
from .tokens import N_OPS, encode_ops


@dataclass
class TransitionMatrix:
    probs: np.ndarray  # (N_OPS**order, N_OPS), row-stochastic
    counts: np.ndarray  # same shape, int64
    order: int

    def flattened(self) -> np.ndarray:
        return self.probs.reshape(-1)


@dataclass(frozen=True)
class FitReport:
    log_likelihood: float
    n_params: int
    n_transitions: int
    aic: float
    bic: float


def information_criteria(log_likelihood: float, n_params: float, n: float) -> tuple[float, float]:
    """AIC and BIC from a log-likelihood: -2 log L + k p with k = 2 or ln n."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    aic = -2.0 * log_likelihood + 2.0 * n_params
    bic = -2.0 * log_likelihood + n_params * float(np.log(n))
    return aic, bic


def _token_codes(item) -> np.ndarray:
    tokens = item.tokens if hasattr(item, "tokens") else item
    return encode_ops(tokens)


def fit_markov(
    sequences: Sequence, order: int = 1, smoothing: str = "uniform"
) -> tuple[TransitionMatrix, FitReport]:
    """Maximum-likelihood order-m chain from one or more token sequences.

    ``smoothing`` controls unseen rows: "uniform" leaves them at 1/8 each
    (counts untouched), "add_one" adds one pseudo-count to every cell.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    if smoothing not in ("uniform", "add_one"):
        raise ValueError(f"unknown smoothing {smoothing!r}")
    codes = [_token_codes(s) for s in sequences]
    if not any(len(c) > order for c in codes):
        raise ValueError(f"need at least one sequence longer than order={order}")
    n_rows = N_OPS**order
    counts = np.zeros((n_rows, N_OPS), dtype=np.int64)
    for c in codes:
        counts += _accel.transition_counts(c, order, N_OPS)

    basis = counts + 1 if smoothing == "add_one" else counts
    row_sums = basis.sum(axis=1, keepdims=True)
    probs = np.full((n_rows, N_OPS), 1.0 / N_OPS)
    seen = row_sums[:, 0] > 0
    probs[seen] = basis[seen] / row_sums[seen]

    mask = counts > 0
    ll = float((counts[mask] * np.log(probs[mask])).sum())
    n_transitions = int(counts.sum())
    n_params = n_rows * (N_OPS - 1)
    aic, bic = information_criteria(ll, n_params, n_transitions)
    return (
        TransitionMatrix(probs=probs, counts=counts, order=order),
        FitReport(ll, n_params, n_transitions, aic, bic),
    )


def predict_distribution(x: Sequence[float], tm, steps: int = 1) -> np.ndarray:
    """Propagate a state distribution k steps: x P^k."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    probs = tm.probs if isinstance(tm, TransitionMatrix) else np.asarray(tm, dtype=float)
    x = np.asarray(x, dtype=float)
    if abs(x.sum() - 1.0) > 1e-9:
        raise ValueError(f"state distribution must sum to 1, got {x.sum()!r}")
    out = x
    for _ in range(steps):
        out = out @ probs
    return out


@dataclass
class KmeansResult:
    labels: np.ndarray
    centroids: np.ndarray
    wcss: float
    n_iter: int
    wcss_history: list[float] = field(default_factory=list)


def _rng(seed, *extra) -> np.random.Generator:
    # counter-based generator: identical streams across platforms
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, extra)])))


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n)]
    d2 = ((X - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centroids[i] = X[idx]
        d2 = np.minimum(d2, ((X - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _lloyd(X: np.ndarray, centroids: np.ndarray, max_iter: int) -> KmeansResult:
    k = centroids.shape[0]
    labels = np.full(X.shape[0], -1, dtype=np.int64)
    history: list[float] = []
    for it in range(1, max_iter + 1):
        new_labels, dists = _accel.nearest_centroids(X, centroids)
        # re-seed empty clusters at the current farthest point
        order = np.argsort(-dists)
        cursor = 0
        for c in range(k):
            if not np.any(new_labels == c):
                far = order[cursor]
                cursor += 1
                centroids[c] = X[far]
                new_labels[far] = c
                dists[far] = 0.0
        history.append(float(dists.sum()))
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        for c in range(k):
            members = X[labels == c]
            if members.shape[0]:
                centroids[c] = members.mean(axis=0)
    final_labels, final_dists = _accel.nearest_centroids(X, centroids)
    return KmeansResult(
        labels=final_labels,
        centroids=centroids,
        wcss=float(final_dists.sum()),
        n_iter=it,
        wcss_history=history,
    )


def kmeans(
    X, k: int, seed: int = 0, restarts: int = 8, max_iter: int = 300
) -> KmeansResult:
    """Lloyd's algorithm with k-means++ seeding, best of ``restarts`` runs."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional")
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k must be in 1..{X.shape[0]}, got {k}")
    best: KmeansResult | None = None
    for r in range(max(1, restarts)):
        rng = _rng(seed, r)
        centroids = _kmeans_pp_init(X, k, rng)
        result = _lloyd(X, centroids.copy(), max_iter)
        if best is None or result.wcss < best.wcss:
            best = result
    return best


def cluster_transition_matrices(
    matrices: Sequence, k: int, seed: int = 0, restarts: int = 8
) -> KmeansResult:
    """Cluster students by their flattened transition matrices."""
    rows = [
        m.flattened() if isinstance(m, TransitionMatrix) else np.asarray(m, dtype=float).reshape(-1)
        for m in matrices
    ]
    X = np.vstack(rows)
    if k > X.shape[0]:
        raise ValueError(f"k={k} exceeds the number of matrices ({X.shape[0]})")
    return kmeans(X, k, seed=seed, restarts=restarts)


VWSS_METRIC_NAMES = (
    "prop_Pl",
    "prop_Pa",
    "prop_Sf",
    "prop_Sb",
    "prop_Rc",
    "time_on_pause",
    "time_on_seek_fw",
    "time_on_seek_bw",
)


def vwss_metric_vector(v: Vwss) -> np.ndarray:
    """8 summary metrics: 5 click-class proportions (scrolls folded into
    their seek direction, both ratechanges merged) plus 3 dwell times."""
    n = len(v.tokens)
    props = np.zeros(5)
    if n:
        for tok in v.tokens:
            if tok == "Pl":
                props[0] += 1
            elif tok == "Pa":
                props[1] += 1
            elif tok in ("Sf", "SSf"):
                props[2] += 1
            elif tok in ("Sb", "SSb"):
                props[3] += 1
            else:
                props[4] += 1
        props /= n
    return np.concatenate(
        [props, [pause_seconds(v), seek_dwell_seconds(v, "fw"), seek_dwell_seconds(v, "bw")]]
    )


def cluster_vwss_metrics(
    vwss_list: Sequence[Vwss], k: int = 4, seed: int = 0, restarts: int = 8
) -> KmeansResult:
    """K-means over standardized VWSS metric vectors (Euclidean distance)."""
    X = np.vstack([vwss_metric_vector(v) for v in vwss_list])
    mean = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    return kmeans((X - mean) / sd, k, seed=seed, restarts=restarts)
