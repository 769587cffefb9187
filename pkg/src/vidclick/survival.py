"""Attrition modeling: covariate preparation and proportional-hazards fits.

The primary model is Cox proportional hazards with Breslow tie handling,
maximized by damped Newton iteration.  Weekly dropout is inherently
discrete, so a person-week logistic hazard is available as an alternative
(``model="discrete"``); both report hazard ratios exp(beta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .stats import normal_sf


@dataclass(frozen=True)
class SurvivalRecord:
    student_id: str
    duration: float  # weeks of active participation, >= 1
    event: int  # 1 = dropped out before the final week, 0 = censored
    covariates: Mapping[str, float]


@dataclass
class PreparedCovariates:
    names: tuple[str, ...]
    X: np.ndarray  # (n_records, n_kept)
    durations: np.ndarray
    events: np.ndarray
    scaled: tuple[str, ...]  # covariates that were z-scored
    dropped: list[str] = field(default_factory=list)


@dataclass
class HazardModel:
    names: tuple[str, ...]
    beta: np.ndarray
    hazard_ratios: np.ndarray
    se: np.ndarray
    p_values: np.ndarray
    stars: tuple[str, ...]
    converged: bool
    n_iter: int
    log_likelihood: float
    model: str

    def report_rows(self) -> list[tuple]:
        return [
            (n, float(b), float(hr), float(s), float(p), star)
            for n, b, hr, s, p, star in zip(
                self.names, self.beta, self.hazard_ratios, self.se, self.p_values, self.stars
            )
        ]


def _is_ordinal(values: np.ndarray) -> bool:
    return bool(np.all(values == np.round(values)) and values.min() >= 0 and values.max() <= 3)


def prepare_covariates(
    records: Sequence[SurvivalRecord],
    corr_threshold: float = 0.5,
    no_scale: Sequence[str] | None = None,
) -> PreparedCovariates:
    """Z-score numeric covariates and greedily drop correlated ones.

    Binary/ordinal covariates (values in {0..3}, or any name listed in
    ``no_scale``) keep their raw coding.  For every pair with |Pearson r|
    at or above the threshold, the covariate declared later is dropped.
    Zero-variance numeric covariates are dropped with a diagnostic.
    """
    if len(records) < 2:
        raise ValueError("need at least 2 records")
    names = list(records[0].covariates)
    for r in records:
        if list(r.covariates) != names:
            raise ValueError(f"covariate names differ for student {r.student_id}")
    no_scale = set(no_scale or ())
    dropped: list[str] = []
    columns: dict[str, np.ndarray] = {}
    scaled: list[str] = []
    for name in names:
        col = np.array([float(r.covariates[name]) for r in records])
        if name in no_scale or _is_ordinal(col):
            columns[name] = col
            continue
        sd = col.std()
        if col.max() == col.min() or sd < 1e-12 * (1.0 + abs(col.mean())):
            dropped.append(f"{name}: zero variance")
            continue
        columns[name] = (col - col.mean()) / sd
        scaled.append(name)

    kept: list[str] = []
    for name in columns:
        clash = None
        for prev in kept:
            a, b = columns[prev], columns[name]
            sa, sb = a.std(), b.std()
            if sa == 0 or sb == 0:
                r = 1.0 if np.allclose(a, b) else 0.0
            else:
                r = float(np.corrcoef(a, b)[0, 1])
            if abs(r) >= corr_threshold:
                clash = (prev, r)
                break
        if clash is None:
            kept.append(name)
        else:
            dropped.append(f"{name}: |r|={abs(clash[1]):.3f} with {clash[0]}")

    X = np.column_stack([columns[n] for n in kept]) if kept else np.zeros((len(records), 0))
    return PreparedCovariates(
        names=tuple(kept),
        X=X,
        durations=np.array([float(r.duration) for r in records]),
        events=np.array([int(r.event) for r in records]),
        scaled=tuple(scaled),
        dropped=dropped,
    )


def cox_partial_loglik(
    X: np.ndarray, durations: np.ndarray, events: np.ndarray, beta: np.ndarray
) -> float:
    """Breslow partial log-likelihood at ``beta`` (reference for oracles)."""
    ll, _, _ = _cox_ll_grad_hess(*_sorted(X, durations, events), beta)
    return ll


def _sorted(X, durations, events):
    order = np.argsort(-durations, kind="stable")
    return X[order], durations[order], events[order]


def _cox_ll_grad_hess(Xs, ds, es, beta):
    n, p = Xs.shape
    eta = Xs @ beta
    # stabilize exp() against large linear predictors
    shift = eta.max() if n else 0.0
    w = np.exp(eta - shift)
    S0 = np.cumsum(w)
    S1 = np.cumsum(w[:, None] * Xs, axis=0)
    S2 = np.cumsum(w[:, None, None] * (Xs[:, :, None] * Xs[:, None, :]), axis=0)
    ll = 0.0
    g = np.zeros(p)
    H = np.zeros((p, p))
    i = 0
    while i < n:
        j = i
        while j < n and ds[j] == ds[i]:
            j += 1
        s0 = S0[j - 1]
        s1 = S1[j - 1]
        s2 = S2[j - 1]
        mean = s1 / s0
        cov = s2 / s0 - np.outer(mean, mean)
        for k in range(i, j):
            if es[k]:
                ll += (eta[k] - shift) - math.log(s0)
                g += Xs[k] - mean
                H -= cov
        i = j
    return ll, g, H


def _fit_cox(X, durations, events, tol, max_iter):
    Xs, ds, es = _sorted(X, durations, events)
    p = X.shape[1]
    beta = np.zeros(p)
    ll, g, H = _cox_ll_grad_hess(Xs, ds, es, beta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if np.linalg.norm(g) < tol:
            converged = True
            break
        try:
            step = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError:
            step = g
        t = 1.0
        accepted = False
        while t > 1e-12:
            cand = beta + t * step
            ll_new, g_new, H_new = _cox_ll_grad_hess(Xs, ds, es, cand)
            if ll_new >= ll - 1e-12:
                beta, ll, g, H = cand, ll_new, g_new, H_new
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
    se = np.sqrt(np.diag(np.linalg.inv(-H))) if p else np.zeros(0)
    return beta, se, ll, converged, it


def _expand_person_weeks(X, durations, events):
    rows = []
    labels = []
    for i in range(X.shape[0]):
        weeks = max(1, int(round(durations[i])))
        for w in range(1, weeks + 1):
            rows.append(X[i])
            labels.append(1.0 if (w == weeks and events[i]) else 0.0)
    return np.vstack(rows), np.array(labels)


def _fit_discrete(X, durations, events, tol, max_iter):
    Xp, y = _expand_person_weeks(X, durations, events)
    n, p = Xp.shape
    Z = np.column_stack([np.ones(n), Xp])
    theta = np.zeros(p + 1)
    converged = False
    it = 0
    ll = -n * math.log(2.0)
    for it in range(1, max_iter + 1):
        eta = Z @ theta
        mu = 1.0 / (1.0 + np.exp(-eta))
        g = Z.T @ (y - mu)
        if np.linalg.norm(g) < tol:
            converged = True
            break
        Wdiag = mu * (1.0 - mu)
        H = (Z * Wdiag[:, None]).T @ Z
        theta = theta + np.linalg.solve(H, g)
        ll = float(np.sum(y * np.log(np.clip(mu, 1e-300, 1)) + (1 - y) * np.log(np.clip(1 - mu, 1e-300, 1))))
    eta = Z @ theta
    mu = 1.0 / (1.0 + np.exp(-eta))
    H = (Z * (mu * (1 - mu))[:, None]).T @ Z
    se = np.sqrt(np.diag(np.linalg.inv(H)))
    return theta[1:], se[1:], ll, converged, it


def fit_hazard(
    data: PreparedCovariates | Sequence[SurvivalRecord],
    model: str = "cox",
    corr_threshold: float = 0.5,
    tol: float = 1e-8,
    max_iter: int = 200,
) -> HazardModel:
    """Fit the dropout hazard and report ratios exp(beta).

    A ratio below 1 means the event gets (1 - HR) less likely per unit (or
    standard-deviation) increase of the covariate; above 1, (HR - 1) more
    likely.  Raises when no events are present; a fit that stops before
    reaching the gradient tolerance is returned flagged, not hidden.
    """
    if model not in ("cox", "discrete"):
        raise ValueError(f"model must be 'cox' or 'discrete', got {model!r}")
    prepared = (
        data
        if isinstance(data, PreparedCovariates)
        else prepare_covariates(data, corr_threshold=corr_threshold)
    )
    if prepared.events.sum() < 1:
        raise ValueError("cannot fit a hazard model with zero events")
    if model == "cox":
        beta, se, ll, converged, it = _fit_cox(
            prepared.X, prepared.durations, prepared.events, tol, max_iter
        )
    else:
        beta, se, ll, converged, it = _fit_discrete(
            prepared.X, prepared.durations, prepared.events, tol, max_iter
        )
    z = np.divide(np.abs(beta), se, out=np.zeros_like(beta), where=se > 0)
    p_values = np.array([2.0 * normal_sf(v) for v in z])
    stars = tuple("***" if p < 0.001 else "" for p in p_values)
    return HazardModel(
        names=prepared.names,
        beta=beta,
        hazard_ratios=np.exp(beta),
        se=se,
        p_values=p_values,
        stars=stars,
        converged=converged,
        n_iter=it,
        log_likelihood=ll,
        model=model,
    )
