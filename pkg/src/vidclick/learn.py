"""Feature extraction, trajectory construction, grouped cross-validation,
cost-sensitive L2 logistic regression, and evaluation metrics.

Feature names are namespaced by extractor: ``ngram:``, ``prop:``, ``len``,
``action:``, ``eng:``, ``re:``, ``traj:``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .actions import BehavioralActionVector, BehavioralCatalog, LEVEL_HIGH
from .ingest import Vwss, compute_engagement
from .strdist import contains_contiguous
from .tokens import CLICK_OPS


@dataclass
class FeatureVector:
    features: dict[str, float]
    label: object = None
    group_id: str | None = None


@dataclass(frozen=True)
class FeatureConfig:
    ngram_lengths: tuple[int, ...] = (4, 5)
    proportions: bool = True
    length: bool = True
    action_levels: bool = True
    pattern_flags: bool = False
    catalog: BehavioralCatalog | None = None


def extract_features(
    v: Vwss,
    bav: BehavioralActionVector | None = None,
    cfg: FeatureConfig = FeatureConfig(),
    engagement_level: str | None = None,
) -> FeatureVector:
    """Features for one watching-state sequence.

    Emits token n-gram counts, per-class click proportions, sequence length,
    dichotomized action levels (when ``bav`` is given), an engagement-level
    flag (when given), and catalog-pattern presence flags.
    """
    feats: dict[str, float] = {}
    toks = v.tokens
    n = len(toks)
    if cfg.length:
        feats["len"] = float(n)
    if cfg.proportions:
        counts = {op: 0 for op in CLICK_OPS}
        for t in toks:
            counts[t] += 1
        for op in CLICK_OPS:
            feats[f"prop:{op}"] = counts[op] / n if n else 0.0
    for g in cfg.ngram_lengths:
        for i in range(n - g + 1):
            feats_key = "ngram:" + ",".join(toks[i : i + g])
            feats[feats_key] = feats.get(feats_key, 0.0) + 1.0
    if bav is not None and cfg.action_levels:
        for cat, level in bav.levels.items():
            feats[f"action:{cat}"] = 1.0 if level == LEVEL_HIGH else 0.0
    if engagement_level is not None:
        feats["eng:High"] = 1.0 if engagement_level == LEVEL_HIGH else 0.0
    if cfg.pattern_flags and cfg.catalog is not None:
        for cat, groups in cfg.catalog.categories.items():
            for g_tokens in groups:
                if contains_contiguous(g_tokens, toks):
                    feats[f"re:{','.join(g_tokens)}"] = 1.0
    return FeatureVector(features=feats, group_id=v.student_id)


def truncate_vwss(v: Vwss, n_tokens: int) -> Vwss:
    """Prefix view of a sequence for next-click / in-video feature rows.

    Played time over the prefix is approximated by the dwell after each play
    token, the only signal available once raw events are gone.
    """
    gaps = np.zeros(n_tokens)
    if n_tokens > 1:
        gaps[:-1] = np.diff(v.token_times[:n_tokens])
    played = float(sum(g for t, g in zip(v.tokens[:n_tokens], gaps) if t == "Pl"))
    return replace(
        v,
        tokens=v.tokens[:n_tokens],
        token_times=v.token_times[:n_tokens],
        token_rates=v.token_rates[:n_tokens],
        played_seconds=played,
    )


def prefix_feature_rows(
    v: Vwss,
    bav: BehavioralActionVector | None = None,
    cfg: FeatureConfig = FeatureConfig(),
    min_prefix: int = 1,
) -> list[FeatureVector]:
    """One row per position i: features from tokens[0..i-1], label = token i."""
    rows = []
    for i in range(min_prefix, len(v.tokens)):
        fv = extract_features(truncate_vwss(v, i), bav, cfg)
        fv.label = v.tokens[i]
        rows.append(fv)
    return rows


# ---------------------------------------------------------------------------
# trajectories (course-level dropout features)
# ---------------------------------------------------------------------------

ENGAGEMENT_SYMBOLS = ("L", "H")
QUARTILE_SYMBOLS = ("VL", "L", "H", "VH")


@dataclass
class VideoObservation:
    student_id: str
    video_id: str
    engagement: float
    play_proportion: float
    ipi: float


@dataclass
class Trajectory:
    student_id: str
    videos: tuple[str, ...]
    engagement: tuple[str, ...]
    vpp: tuple[str, ...]
    ipi: tuple[str, ...]


def symbol_proportions(symbols: Sequence[str]) -> dict[str, float]:
    out: dict[str, float] = {}
    for s in symbols:
        out[s] = out.get(s, 0.0) + 1.0
    return {s: c / len(symbols) for s, c in out.items()} if symbols else {}


def build_trajectories(
    observations: Sequence[VideoObservation],
    video_order: Sequence[str] | None = None,
) -> tuple[dict[str, Trajectory], list[str]]:
    """Chronological per-video level strings per student.

    Engagement is median-split within each video separately (video lengths
    differ); play proportion uses equal-width quartiles over the pooled
    corpus; the processing index uses equal-frequency quartiles pooled.
    Ties always go to the upper bin.
    """
    diagnostics: list[str] = []
    if not observations:
        return {}, ["no observations"]
    videos = tuple(video_order) if video_order else tuple(sorted({o.video_id for o in observations}))
    video_rank = {vid: i for i, vid in enumerate(videos)}

    eng_median: dict[str, float] = {}
    for vid in videos:
        vals = [o.engagement for o in observations if o.video_id == vid]
        eng_median[vid] = float(np.median(vals))

    vpp_all = np.array([o.play_proportion for o in observations], dtype=float)
    lo, hi = float(vpp_all.min()), float(vpp_all.max())
    if hi == lo:
        diagnostics.append("degenerate play-proportion range; all observations share one bin")
        vpp_cuts = np.array([])
    else:
        width = (hi - lo) / 4.0
        vpp_cuts = np.array([lo + width, lo + 2 * width, lo + 3 * width])

    ipi_all = np.array([o.ipi for o in observations], dtype=float)
    ipi_cuts = np.quantile(ipi_all, [0.25, 0.5, 0.75])

    def vpp_symbol(x: float) -> str:
        return QUARTILE_SYMBOLS[int((x >= vpp_cuts).sum())] if vpp_cuts.size else "VL"

    def ipi_symbol(x: float) -> str:
        return QUARTILE_SYMBOLS[int((x >= ipi_cuts).sum())]

    by_student: dict[str, list[VideoObservation]] = {}
    for o in observations:
        if o.video_id not in video_rank:
            diagnostics.append(f"student {o.student_id}: video {o.video_id} not in video order; skipped")
            continue
        by_student.setdefault(o.student_id, []).append(o)

    out: dict[str, Trajectory] = {}
    for sid, obs in by_student.items():
        obs.sort(key=lambda o: video_rank[o.video_id])
        out[sid] = Trajectory(
            student_id=sid,
            videos=tuple(o.video_id for o in obs),
            engagement=tuple("H" if o.engagement >= eng_median[o.video_id] else "L" for o in obs),
            vpp=tuple(vpp_symbol(o.play_proportion) for o in obs),
            ipi=tuple(ipi_symbol(o.ipi) for o in obs),
        )
    return out, diagnostics


def trajectory_features(
    traj: Trajectory, ngram_lengths: tuple[int, ...] = (4, 5), include_last: bool = True
) -> FeatureVector:
    """Transition n-grams, lengths, symbol proportions, and last-video levels."""
    feats: dict[str, float] = {}
    for name, symbols in (("eng", traj.engagement), ("vpp", traj.vpp), ("ipi", traj.ipi)):
        feats[f"traj:{name}:len"] = float(len(symbols))
        for g in ngram_lengths:
            for i in range(len(symbols) - g + 1):
                key = f"traj:{name}:ngram:" + ",".join(symbols[i : i + g])
                feats[key] = feats.get(key, 0.0) + 1.0
        for sym, share in symbol_proportions(symbols).items():
            feats[f"traj:{name}:prop:{sym}"] = share
        if include_last and symbols:
            feats[f"traj:{name}:last:{symbols[-1]}"] = 1.0
    return FeatureVector(features=feats, group_id=traj.student_id)


# ---------------------------------------------------------------------------
# grouped cross-validation
# ---------------------------------------------------------------------------


def grouped_kfold(group_ids: Sequence[str], k: int, seed: int = 0) -> np.ndarray:
    """Fold index per row; all rows of a group share one fold, fold sizes
    (in groups) differ by at most one."""
    groups = sorted(set(group_ids))
    if k > len(groups):
        raise ValueError(f"k={k} exceeds the number of distinct groups ({len(groups)})")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed)])))
    perm = list(rng.permutation(len(groups)))
    fold_of_group = {groups[g]: i % k for i, g in enumerate(perm)}
    return np.array([fold_of_group[g] for g in group_ids], dtype=np.int64)


# ---------------------------------------------------------------------------
# cost-sensitive L2 multinomial logistic regression
# ---------------------------------------------------------------------------


@dataclass
class LogisticModel:
    classes: tuple
    feature_names: tuple[str, ...]
    weights: np.ndarray  # (n_features, n_classes)
    intercepts: np.ndarray  # (n_classes,)
    converged: bool
    n_iter: int
    final_loss: float
    final_grad_norm: float
    loss_history: list[float] = field(default_factory=list)

    def _matrix(self, rows: Sequence[FeatureVector]) -> np.ndarray:
        idx = {name: j for j, name in enumerate(self.feature_names)}
        X = np.zeros((len(rows), len(self.feature_names)))
        for i, r in enumerate(rows):
            for name, val in r.features.items():
                j = idx.get(name)
                if j is not None:
                    X[i, j] = val
        return X

    def decision_function(self, rows: Sequence[FeatureVector]) -> np.ndarray:
        return self._matrix(rows) @ self.weights + self.intercepts

    def predict(self, rows: Sequence[FeatureVector]) -> list:
        scores = self.decision_function(rows)
        return [self.classes[i] for i in np.argmax(scores, axis=1)]

    def dump(self) -> str:
        lines = [f"# converged={self.converged} iterations={self.n_iter}"]
        for c_idx, cls in enumerate(self.classes):
            lines.append(f"# class {cls}")
            lines.append(f"(intercept)\t{self.intercepts[c_idx]:.10g}")
            for j, name in enumerate(self.feature_names):
                lines.append(f"{name}\t{self.weights[j, c_idx]:.10g}")
        return "\n".join(lines)


def logistic_loss_grad(
    X: np.ndarray,
    y_idx: np.ndarray,
    sample_weight: np.ndarray,
    W: np.ndarray,
    b: np.ndarray,
    lam: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Weighted mean NLL + (lam/2)||W||^2 (intercepts unpenalized), with
    analytic gradients for W and b."""
    n, _ = X.shape
    total_w = sample_weight.sum()
    z = X @ W + b
    z -= z.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    P = np.exp(log_p)
    ll = log_p[np.arange(n), y_idx]
    loss = float(-(sample_weight * ll).sum() / total_w + 0.5 * lam * (W**2).sum())
    R = P.copy()
    R[np.arange(n), y_idx] -= 1.0
    R *= (sample_weight / total_w)[:, None]
    gW = X.T @ R + lam * W
    gb = R.sum(axis=0)
    return loss, gW, gb


def train_logistic(
    rows: Sequence[FeatureVector],
    lam: float = 1.0,
    class_costs: Mapping | str | None = None,
    rare_threshold: int = 2,
    tol: float = 1e-6,
    max_iter: int = 20000,
) -> LogisticModel:
    """Full-batch gradient descent with backtracking line search.

    Features present (nonzero) in fewer than ``rare_threshold`` rows are
    dropped.  ``class_costs`` weights each class's log-likelihood terms;
    "balanced" uses inverse class frequency.  Deterministic: zero
    initialization, fixed step-size schedule, no randomness.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if not rows:
        raise ValueError("no training rows")
    presence: dict[str, int] = {}
    for r in rows:
        for name, val in r.features.items():
            if val != 0.0:
                presence[name] = presence.get(name, 0) + 1
    names = tuple(sorted(n for n, c in presence.items() if c >= rare_threshold))

    classes = tuple(sorted({r.label for r in rows}, key=repr))
    if len(classes) < 2:
        raise ValueError("training set must contain at least 2 classes")
    class_idx = {c: i for i, c in enumerate(classes)}
    y_idx = np.array([class_idx[r.label] for r in rows], dtype=np.int64)

    idx = {name: j for j, name in enumerate(names)}
    X = np.zeros((len(rows), len(names)))
    for i, r in enumerate(rows):
        for name, val in r.features.items():
            j = idx.get(name)
            if j is not None:
                X[i, j] = val

    if class_costs == "balanced":
        counts = np.bincount(y_idx, minlength=len(classes))
        cost_by_class = len(rows) / (len(classes) * counts.astype(float))
    elif class_costs is None:
        cost_by_class = np.ones(len(classes))
    else:
        cost_by_class = np.array([float(class_costs.get(c, 1.0)) for c in classes])
    sample_weight = cost_by_class[y_idx]

    W = np.zeros((len(names), len(classes)))
    b = np.zeros(len(classes))
    loss, gW, gb = logistic_loss_grad(X, y_idx, sample_weight, W, b, lam)
    history = [loss]
    converged = False
    it = 0
    step = 1.0
    prev_gW = prev_gb = None
    for it in range(1, max_iter + 1):
        gnorm2 = float((gW**2).sum() + (gb**2).sum())
        if math.sqrt(gnorm2) < tol:
            converged = True
            break
        # spectral (Barzilai-Borwein) trial step, safeguarded by Armijo
        # backtracking; counts features condition the problem badly and a
        # fixed-growth step schedule stalls far from the tolerance
        if prev_gW is not None:
            dgW = gW - prev_gW
            dgb = gb - prev_gb
            sy = float((step_W * dgW).sum() + (step_b * dgb).sum())
            ss = float((step_W**2).sum() + (step_b**2).sum())
            if sy > 1e-18:
                step = min(max(ss / sy, 1e-12), 1e8)
        accepted = False
        t = step
        while t > 1e-16:
            W_new = W - t * gW
            b_new = b - t * gb
            loss_new, gW_new, gb_new = logistic_loss_grad(X, y_idx, sample_weight, W_new, b_new, lam)
            if loss_new <= loss - 1e-4 * t * gnorm2:
                step_W = W_new - W
                step_b = b_new - b
                prev_gW, prev_gb = gW, gb
                W, b, loss, gW, gb = W_new, b_new, loss_new, gW_new, gb_new
                history.append(loss)
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
    return LogisticModel(
        classes=classes,
        feature_names=names,
        weights=W,
        intercepts=b,
        converged=converged,
        n_iter=it,
        final_loss=loss,
        final_grad_norm=math.sqrt(float((gW**2).sum() + (gb**2).sum())),
        loss_history=history,
    )


# ---------------------------------------------------------------------------
# evaluation metrics
# ---------------------------------------------------------------------------


@dataclass
class ConfusionSummary:
    classes: tuple
    counts: np.ndarray  # rows = actual, cols = predicted
    accuracy: float
    kappa: float
    #: printed-arithmetic convention: actual-negative row, predicted-positive
    #: cell over that row's total (matches the worked example; unusual naming)
    fnr: float | None
    #: the textbook FN / (FN + TP)
    fnr_conventional: float | None


def evaluate_metrics(
    predictions: Sequence, labels: Sequence, positive_class=None
) -> ConfusionSummary:
    """Accuracy, chance-corrected kappa, and false-negative rates.

    Kappa uses chance agreement sum_c (predicted share of c) x (true share
    of c).  The two FNR fields are populated for binary tasks only.
    """
    if len(predictions) != len(labels):
        raise ValueError("predictions and labels must have equal length")
    if not labels:
        raise ValueError("cannot evaluate empty prediction lists")
    classes = tuple(sorted(set(labels) | set(predictions), key=repr))
    cidx = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for p, l in zip(predictions, labels):
        counts[cidx[l], cidx[p]] += 1
    n = counts.sum()
    accuracy = float(np.trace(counts) / n)
    pred_share = counts.sum(axis=0) / n
    true_share = counts.sum(axis=1) / n
    pe = float((pred_share * true_share).sum())
    if pe >= 1.0:
        kappa = 1.0 if accuracy == 1.0 else math.nan
    else:
        kappa = (accuracy - pe) / (1.0 - pe)

    fnr = fnr_conv = None
    if len(classes) == 2:
        if positive_class is None:
            positive_class = classes[-1]
        pos = cidx[positive_class]
        neg = 1 - pos
        neg_row_total = counts[neg, pos] + counts[neg, neg]
        pos_row_total = counts[pos, neg] + counts[pos, pos]
        fnr = float(counts[neg, pos] / neg_row_total) if neg_row_total else None
        fnr_conv = float(counts[pos, neg] / pos_row_total) if pos_row_total else None
    return ConfusionSummary(
        classes=classes,
        counts=counts,
        accuracy=accuracy,
        kappa=float(kappa),
        fnr=fnr,
        fnr_conventional=fnr_conv,
    )


def grouped_cross_val(
    rows: Sequence[FeatureVector],
    k: int,
    seed: int = 0,
    positive_class=None,
    **train_kwargs,
) -> tuple[list[ConfusionSummary], ConfusionSummary]:
    """Train/evaluate across grouped folds; returns per-fold and pooled summaries."""
    folds = grouped_kfold([r.group_id for r in rows], k, seed)
    all_preds: list = []
    all_labels: list = []
    per_fold = []
    for f in range(k):
        train = [r for r, fi in zip(rows, folds) if fi != f]
        test = [r for r, fi in zip(rows, folds) if fi == f]
        if not test:
            continue
        model = train_logistic(train, **train_kwargs)
        preds = model.predict(test)
        labels = [r.label for r in test]
        per_fold.append(evaluate_metrics(preds, labels, positive_class))
        all_preds.extend(preds)
        all_labels.extend(labels)
    return per_fold, evaluate_metrics(all_preds, all_labels, positive_class)
