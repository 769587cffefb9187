"""Token-sequence distance metrics and fuzzy pattern weights.

Everything here operates on sequences of whole tokens, never on flattened
character strings — "Sf" and "SSf" must stay distinct symbols.  Weights can
be strongly negative for long mismatching sequences; downstream
dichotomization relies on that, so nothing is normalized.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from . import _accel
from .tokens import encode_ops

Token = Hashable


@dataclass(frozen=True)
class EditWeights:
    """Nonnegative penalties for deletion, insertion, and substitution."""

    w_del: float
    w_ins: float
    w_sub: float

    def __post_init__(self) -> None:
        if self.w_del < 0 or self.w_ins < 0 or self.w_sub < 0:
            raise ValueError("edit weights must be nonnegative")


#: Dispatch weights when pattern and sequence share no token at all.
NO_MATCH_WEIGHTS = EditWeights(0.0, 1.0, 1.0)
#: Dispatch weights for partial matches (some tokens shared).
PARTIAL_MATCH_WEIGHTS = EditWeights(0.1, 1.0, 1.0)

PATTERN_LENGTH = 4


@dataclass(frozen=True)
class QgramProfile:
    """Occurrence counts of every q-token window of a sequence."""

    q: int
    counts: Mapping[tuple, int]

    @property
    def norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.counts.values()))


def qgram_profile(seq: Sequence[Token], q: int) -> QgramProfile:
    if q < 1:
        raise ValueError("q must be a positive integer")
    grams = Counter(tuple(seq[i : i + q]) for i in range(len(seq) - q + 1))
    return QgramProfile(q=q, counts=dict(grams))


def qgram_cosine_distance(s: Sequence[Token], t: Sequence[Token], q: int) -> float:
    """Cosine distance between the q-gram count vectors of two sequences.

    Returns a value in [0, 1].  When either sequence is shorter than q its
    profile is empty; the distance is then 1 unless the sequences are
    token-identical, in which case it is 0.
    """
    ps = qgram_profile(s, q)
    pt = qgram_profile(t, q)
    if not ps.counts or not pt.counts:
        return 0.0 if tuple(s) == tuple(t) else 1.0
    dot = sum(c * pt.counts.get(g, 0) for g, c in ps.counts.items())
    return 1.0 - dot / (ps.norm * pt.norm)


def _as_codes(s: Sequence[Token], t: Sequence[Token]) -> tuple[np.ndarray, np.ndarray]:
    vocab: dict[Token, int] = {}
    def enc(seq):
        return np.array([vocab.setdefault(tok, len(vocab)) for tok in seq], dtype=np.int64)
    return enc(s), enc(t)


def weighted_levenshtein(s: Sequence[Token], t: Sequence[Token], w: EditWeights) -> float:
    """Minimum-cost edit distance turning ``t`` into ``s``.

    Deleting a token of ``t`` costs ``w.w_del``, inserting one of ``s``'s
    tokens costs ``w.w_ins``, substituting costs ``w.w_sub`` (0 when the
    tokens already agree).
    """
    cs, ct = _as_codes(s, t)
    return float(_accel.edit_distance(cs, ct, w.w_del, w.w_ins, w.w_sub))


def wlev_table(s: Sequence[Token], t: Sequence[Token], w: EditWeights) -> np.ndarray:
    """Full (len(s)+1, len(t)+1) DP table, for auditing/debug output."""
    ns, nt = len(s), len(t)
    d = np.zeros((ns + 1, nt + 1))
    d[0, :] = w.w_del * np.arange(nt + 1)
    d[:, 0] = w.w_ins * np.arange(ns + 1)
    for i in range(1, ns + 1):
        for j in range(1, nt + 1):
            sub = d[i - 1, j - 1] + (0.0 if s[i - 1] == t[j - 1] else w.w_sub)
            d[i, j] = min(sub, d[i - 1, j] + w.w_ins, d[i, j - 1] + w.w_del)
    return d


def contains_contiguous(p: Sequence[Token], s: Sequence[Token]) -> bool:
    """True when ``p`` occurs as a contiguous run inside ``s``."""
    lp = len(p)
    p = tuple(p)
    return any(tuple(s[i : i + lp]) == p for i in range(len(s) - lp + 1))


def fuzzy_pattern_weight(p: Sequence[Token], s: Sequence[Token]) -> float:
    """Similarity weight of a 4-token click group against a full sequence.

    Dispatch: a contiguous occurrence of ``p`` scores by 4-gram cosine
    similarity; disjoint alphabets score by edit similarity with free
    deletions; anything in between uses cheap (0.1) deletions.  The result
    is 1 for a perfect match and can be far below 0 for long mismatches.
    """
    if len(p) != PATTERN_LENGTH:
        raise ValueError(f"pattern must have exactly {PATTERN_LENGTH} tokens, got {len(p)}")
    if contains_contiguous(p, s):
        return 1.0 - qgram_cosine_distance(p, s, PATTERN_LENGTH)
    if not (set(p) & set(s)):
        return 1.0 - weighted_levenshtein(p, s, NO_MATCH_WEIGHTS)
    return 1.0 - weighted_levenshtein(p, s, PARTIAL_MATCH_WEIGHTS)


def fuzzy_pattern_weights(patterns: Sequence[Sequence[str]], tokens: Sequence[str]) -> np.ndarray:
    """Batched :func:`fuzzy_pattern_weight` over click-op patterns.

    Accelerated path used for cohort-scale scoring; equals the scalar
    function to floating-point rounding.
    """
    for p in patterns:
        if len(p) != PATTERN_LENGTH:
            raise ValueError(f"pattern must have exactly {PATTERN_LENGTH} tokens, got {len(p)}")
    pat = np.vstack([encode_ops(p) for p in patterns]) if patterns else np.empty((0, 4), np.int64)
    seq = encode_ops(tokens)
    return _accel.fuzzy_weights(
        pat, seq, PARTIAL_MATCH_WEIGHTS.w_del, PARTIAL_MATCH_WEIGHTS.w_ins, PARTIAL_MATCH_WEIGHTS.w_sub
    )
