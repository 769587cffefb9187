"""Relational statistics over student similarity networks.

Undirected dyads throughout: adjacency matrices are symmetric with a zero
diagonal and densities use n(n-1)/2 denominators.  QAP significance comes
from joint row-column permutations drawn with a counter-based generator, so
runs reproduce across machines for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


@dataclass
class Adjacency:
    matrix: np.ndarray  # (n, n) int8, symmetric, zero diagonal
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("adjacency matrix must be square")
        if m.shape[0] != len(self.labels):
            raise ValueError("labels must match matrix size")
        if np.any(m != m.T):
            raise ValueError("adjacency matrix must be symmetric")
        if np.any(np.diag(m) != 0):
            raise ValueError("adjacency matrix must have a zero diagonal")
        self.matrix = m.astype(np.int8)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_ties(self) -> int:
        return int(self.matrix.sum() // 2)


def _check_same_nodes(a: Adjacency, b: Adjacency) -> None:
    if a.labels != b.labels:
        raise ValueError("adjacency matrices are over different node sets")


def comembership_network(assignment: Mapping[str, object]) -> Adjacency:
    """Edge (i, j) iff both nodes share the same category."""
    labels = tuple(assignment)
    values = list(assignment.values())
    n = len(labels)
    m = np.zeros((n, n), dtype=np.int8)
    for i in range(n):
        for j in range(i + 1, n):
            if values[i] == values[j]:
                m[i, j] = m[j, i] = 1
    return Adjacency(m, labels)


def exact_match_matrix(attribute: Mapping[str, object]) -> Adjacency:
    """1 when two students carry exactly the same attribute value."""
    return comembership_network(attribute)


def multiplex_and(a: Adjacency, b: Adjacency) -> Adjacency:
    """Elementwise boolean AND of two relations on the same nodes."""
    _check_same_nodes(a, b)
    return Adjacency(a.matrix & b.matrix, a.labels)


def density(a: Adjacency) -> float:
    possible = a.n * (a.n - 1) // 2
    return a.n_ties / possible if possible else 0.0


@dataclass(frozen=True)
class GroupDensity:
    n_nodes: int
    ties: int
    density: float


def density_by_group(
    a: Adjacency, partition: Mapping[str, object]
) -> tuple[dict[object, GroupDensity], int]:
    """Within-group tie counts/densities plus the external (cross-group) ties."""
    groups: dict[object, list[int]] = {}
    for idx, node in enumerate(a.labels):
        groups.setdefault(partition[node], []).append(idx)
    per_group: dict[object, GroupDensity] = {}
    internal_total = 0
    for g, idxs in groups.items():
        sub = a.matrix[np.ix_(idxs, idxs)]
        ties = int(sub.sum() // 2)
        internal_total += ties
        possible = len(idxs) * (len(idxs) - 1) // 2
        per_group[g] = GroupDensity(len(idxs), ties, ties / possible if possible else 0.0)
    external = a.n_ties - internal_total
    return per_group, external


def ei_index(a: Adjacency, partition: Mapping[str, object]) -> float:
    """(external - internal) / total ties: -1 pure homophily, +1 heterophily."""
    per_group, external = density_by_group(a, partition)
    internal = sum(g.ties for g in per_group.values())
    total = internal + external
    if total == 0:
        raise ValueError("E-I index undefined: network has no ties")
    return (external - internal) / total


def edge_list(a: Adjacency) -> list[str]:
    lines = []
    for i in range(a.n):
        for j in range(i + 1, a.n):
            if a.matrix[i, j]:
                lines.append(f"{a.labels[i]}\t{a.labels[j]}")
    return lines


# ---------------------------------------------------------------------------
# QAP
# ---------------------------------------------------------------------------


def _offdiag(m: np.ndarray) -> np.ndarray:
    mask = ~np.eye(m.shape[0], dtype=bool)
    return m[mask].astype(float)


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float((xc**2).sum()) * float((yc**2).sum()))
    if denom == 0:
        raise ValueError("correlation undefined: a matrix is constant off-diagonal")
    return float((xc * yc).sum() / denom)


def _perm_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed)])))


@dataclass(frozen=True)
class QapCorrelation:
    r: float
    p: float
    n_perm: int
    seed: int


def qap_correlation(a: Adjacency, b: Adjacency, n_perm: int = 1000, seed: int = 0) -> QapCorrelation:
    """Pearson correlation over off-diagonal dyads with a permutation p-value.

    Rows and columns of ``b`` are permuted jointly, preserving its degree
    structure; p counts permuted |r| at least as large as the observed, with
    the add-one convention so p is never exactly 0.
    """
    _check_same_nodes(a, b)
    if n_perm < 1:
        raise ValueError("n_perm must be >= 1")
    x = _offdiag(a.matrix)
    r_obs = _pearson(x, _offdiag(b.matrix))
    rng = _perm_rng(seed)
    n = a.n
    hits = 0
    for _ in range(n_perm):
        perm = rng.permutation(n)
        bp = b.matrix[np.ix_(perm, perm)]
        if abs(_pearson(x, _offdiag(bp))) >= abs(r_obs):
            hits += 1
    return QapCorrelation(r=r_obs, p=(hits + 1) / (n_perm + 1), n_perm=n_perm, seed=seed)


@dataclass(frozen=True)
class QapRegression:
    intercept: float
    coefficients: np.ndarray
    r_squared: float
    p_values: np.ndarray
    n_perm: int
    seed: int


def qap_regression(
    y: Adjacency, xs: Sequence[Adjacency], n_perm: int = 1000, seed: int = 0
) -> QapRegression:
    """OLS of y-dyads on predictor dyads (a linear probability model for
    binary ties), with joint row-column permutation significance.

    The intercept is the y-tie probability when every predictor is 0; each
    coefficient is the probability increment per predictor tie.
    """
    if not xs:
        raise ValueError("need at least one predictor matrix")
    for x in xs:
        _check_same_nodes(y, x)
    if n_perm < 1:
        raise ValueError("n_perm must be >= 1")
    cols = [_offdiag(x.matrix) for x in xs]
    for i in range(len(cols)):
        for j in range(i + 1, len(cols)):
            sd_i, sd_j = cols[i].std(), cols[j].std()
            if sd_i == 0 or sd_j == 0:
                continue
            r = float(np.corrcoef(cols[i], cols[j])[0, 1])
            if abs(r) > 1 - 1e-10:
                raise ValueError(f"collinear predictors: x{i + 1} and x{j + 1} (|r|={abs(r):.6f})")
    design = np.column_stack([np.ones(cols[0].size)] + cols)
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise ValueError("collinear predictors: design matrix is rank deficient")
    pinv = np.linalg.pinv(design)
    y_vec = _offdiag(y.matrix)
    theta = pinv @ y_vec
    resid = y_vec - design @ theta
    sst = float(((y_vec - y_vec.mean()) ** 2).sum())
    r_squared = 1.0 - float((resid**2).sum()) / sst if sst > 0 else 0.0

    rng = _perm_rng(seed)
    n = y.n
    hits = np.zeros(len(xs), dtype=np.int64)
    obs_abs = np.abs(theta[1:])
    for _ in range(n_perm):
        perm = rng.permutation(n)
        yp = _offdiag(y.matrix[np.ix_(perm, perm)])
        theta_p = pinv @ yp
        hits += np.abs(theta_p[1:]) >= obs_abs
    p_values = (hits + 1) / (n_perm + 1)
    return QapRegression(
        intercept=float(theta[0]),
        coefficients=theta[1:],
        r_squared=r_squared,
        p_values=p_values,
        n_perm=n_perm,
        seed=seed,
    )
