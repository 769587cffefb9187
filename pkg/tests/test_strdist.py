"""Distance metrics: frozen oracle values, reference implementations, properties."""

import math
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidclick.strdist import (
    EditWeights,
    NO_MATCH_WEIGHTS,
    PARTIAL_MATCH_WEIGHTS,
    contains_contiguous,
    fuzzy_pattern_weight,
    fuzzy_pattern_weights,
    qgram_cosine_distance,
    qgram_profile,
    weighted_levenshtein,
    wlev_table,
)
from vidclick.tokens import CLICK_OPS, tokenize_compact

tokens_st = st.lists(st.sampled_from(CLICK_OPS), min_size=0, max_size=12).map(tuple)
small_weights = st.floats(min_value=0.0, max_value=3.0, allow_nan=False)


def reference_wlev(s, t, w_del, w_ins, w_sub):
    """Plain recursive reference for the DP."""

    @lru_cache(maxsize=None)
    def d(i, j):
        if i == 0 and j == 0:
            return 0.0
        best = math.inf
        if j > 0:
            best = min(best, d(i, j - 1) + w_del)
        if i > 0:
            best = min(best, d(i - 1, j) + w_ins)
        if i > 0 and j > 0:
            best = min(best, d(i - 1, j - 1) + (0.0 if s[i - 1] == t[j - 1] else w_sub))
        return best

    return d(len(s), len(t))


def reference_cosine(s, t, q):
    from collections import Counter

    vs = Counter(tuple(s[i : i + q]) for i in range(len(s) - q + 1))
    vt = Counter(tuple(t[i : i + q]) for i in range(len(t) - q + 1))
    if not vs or not vt:
        return 0.0 if tuple(s) == tuple(t) else 1.0
    dot = sum(c * vt.get(g, 0) for g, c in vs.items())
    ns = math.sqrt(sum(v * v for v in vs.values()))
    nt = math.sqrt(sum(v * v for v in vt.values()))
    return 1.0 - dot / (ns * nt)


class TestQgramCosine:
    def test_identical_sequences(self):
        s = tokenize_compact("PlPaSfSf")
        assert qgram_cosine_distance(s, s, 4) == 0.0

    def test_disjoint_gram_sets(self):
        s = ("Sf",) * 4
        t = ("Sb",) * 4
        assert qgram_cosine_distance(s, t, 4) == 1.0

    def test_frozen_overlap_value(self):
        # independently counted 4-grams: dot=2, |v(s)|=sqrt(2), |v(t)|=2
        s = ("Pl", "Pa", "Sf", "Pa", "Sf")
        t = ("Pl", "Pa", "Sf", "Pa", "Sf", "Pl", "Pa")
        expected = 1.0 - 2.0 / (math.sqrt(2.0) * 2.0)
        assert qgram_cosine_distance(s, t, 4) == pytest.approx(expected, abs=1e-12)

    def test_short_sequences(self):
        assert qgram_cosine_distance(("Pl",), ("Pl",), 4) == 0.0
        assert qgram_cosine_distance(("Pl",), ("Pa",), 4) == 1.0
        assert qgram_cosine_distance((), (), 3) == 0.0

    def test_q_zero_rejected(self):
        with pytest.raises(ValueError):
            qgram_cosine_distance(("Pl",), ("Pl",), 0)

    def test_profile_counts(self):
        prof = qgram_profile(("Sf",) * 5, 4)
        assert prof.counts == {("Sf",) * 4: 2}
        assert sum(prof.counts.values()) == 5 - 4 + 1

    @given(s=tokens_st, t=tokens_st, q=st.integers(min_value=1, max_value=5))
    def test_matches_reference_and_is_symmetric(self, s, t, q):
        d = qgram_cosine_distance(s, t, q)
        assert d == pytest.approx(reference_cosine(s, t, q), abs=1e-12)
        assert d == pytest.approx(qgram_cosine_distance(t, s, q), abs=1e-12)
        assert -1e-12 <= d <= 1.0 + 1e-12


class TestWeightedLevenshtein:
    def test_equal_sequences_cost_zero(self):
        s = tokenize_compact("PlSfPaSf")
        assert weighted_levenshtein(s, s, EditWeights(1, 1, 1)) == 0.0

    def test_trailing_deletions(self):
        s = tokenize_compact("PlSfPaSf")
        t = tokenize_compact("PlSfPaSfRfRs")
        assert weighted_levenshtein(s, t, EditWeights(0.1, 1, 1)) == pytest.approx(0.2)

    def test_single_substitution(self):
        assert weighted_levenshtein(("Pl",), ("Pa",), EditWeights(1, 1, 1)) == 1.0

    @given(s=tokens_st, t=tokens_st, wd=small_weights, wi=small_weights, ws=small_weights)
    @settings(max_examples=200)
    def test_matches_recursive_reference(self, s, t, wd, wi, ws):
        got = weighted_levenshtein(s, t, EditWeights(wd, wi, ws))
        assert got == pytest.approx(reference_wlev(s, t, wd, wi, ws), abs=1e-9)

    @given(s=tokens_st, t=tokens_st, u=tokens_st)
    def test_unit_weights_triangle_and_symmetry(self, s, t, u):
        w = EditWeights(1, 1, 1)
        dst = weighted_levenshtein(s, t, w)
        assert dst == pytest.approx(weighted_levenshtein(t, s, w), abs=1e-9)
        assert dst <= (
            weighted_levenshtein(s, u, w) + weighted_levenshtein(u, t, w) + 1e-9
        )

    @given(s=tokens_st, t=tokens_st)
    def test_asymmetric_weights_stay_nonnegative(self, s, t):
        w = PARTIAL_MATCH_WEIGHTS
        assert weighted_levenshtein(s, t, w) >= 0.0
        assert weighted_levenshtein(s, s, w) == 0.0

    def test_negative_weights_rejected(self):
        with pytest.raises(ValueError):
            EditWeights(-0.1, 1, 1)

    def test_dp_table_corner_matches_distance(self):
        s = tokenize_compact("PlSfPaSf")
        t = tokenize_compact("RfSbSbRsPlSbPaSb")
        w = PARTIAL_MATCH_WEIGHTS
        table = wlev_table(s, t, w)
        assert table[-1, -1] == pytest.approx(weighted_levenshtein(s, t, w), abs=1e-9)


# Table 1 fixtures: pattern "PlSfPaSf" against the printed clickstreams.
# Expected weights were computed with the independent brute-force oracle
# (recursive edit distance + Counter-based cosine) before the build.
PATTERN = tokenize_compact("PlSfPaSf")
TABLE1 = [
    ("case1_A", "PlPaPlSfPaSfSbSbPl", 1.0 / math.sqrt(6.0)),
    ("case1_B", "PlPaPlSfPaSfSbSbPlPaSbSbRfRs", 1.0 / math.sqrt(11.0)),
    ("case2_B", "PlPaPlSfPaSfSbSbPlPlSfPaSf", 2.0 / math.sqrt(12.0)),
    ("case3_A", "RfSbSbRs", -3.0),
    ("case3_B", "SSfSSfRsSfSfSfRfRfRfRfRf", -1.7),
    ("case4_A", "RfSbSbRsPlSbPaSb", -1.4),
    ("case4_B", "RfSbSbRsPlSbSfPaSfSb", 0.4),
    ("case5_B", "RsPlSbSSbSfPlSbRsRsPaSbRfSf", 0.1),
    ("case6_A", "RfSbSbRsSbSfPaSfSbPl", -0.6),
]


class TestFuzzyPatternWeight:
    @pytest.mark.parametrize("name,compact,expected", TABLE1)
    def test_frozen_table_values(self, name, compact, expected):
        got = fuzzy_pattern_weight(PATTERN, tokenize_compact(compact))
        assert got == pytest.approx(expected, abs=1e-9), name

    def test_table1_orderings(self):
        w = {name: fuzzy_pattern_weight(PATTERN, tokenize_compact(c)) for name, c, _ in TABLE1}
        assert w["case1_A"] > w["case1_B"]  # longer clickstream dilutes the match
        assert w["case1_A"] < w["case2_B"]  # pattern appearing twice scores higher
        assert w["case3_A"] != w["case3_B"]
        assert w["case4_A"] < w["case4_B"]
        assert w["case4_B"] > w["case5_B"]  # case 5 A is case 4 B
        assert w["case6_A"] < w["case4_B"]  # case 6 B is case 4 B

    def test_perfect_match(self):
        assert fuzzy_pattern_weight(PATTERN, PATTERN) == 1.0

    def test_pattern_length_enforced(self):
        with pytest.raises(ValueError):
            fuzzy_pattern_weight(("Pl", "Pa"), PATTERN)

    def test_dispatch_branches(self):
        # contiguous occurrence -> cosine branch, bounded by [0, 1]
        s = tokenize_compact("RfRfPlSfPaSfRsRs")
        assert contains_contiguous(PATTERN, s)
        assert 0.0 < fuzzy_pattern_weight(PATTERN, s) <= 1.0
        # disjoint alphabet -> free deletions: 1 - 4 insertions
        assert fuzzy_pattern_weight(PATTERN, ("Rf", "Sb", "Sb", "Rs")) == pytest.approx(-3.0)
        # empty sequence -> four insertions, nothing shared
        assert fuzzy_pattern_weight(PATTERN, ()) == pytest.approx(-3.0)

    @given(
        patterns=st.lists(
            st.lists(st.sampled_from(CLICK_OPS), min_size=4, max_size=4).map(tuple),
            min_size=1,
            max_size=6,
        ),
        seq=tokens_st,
    )
    @settings(max_examples=150)
    def test_batched_equals_scalar(self, patterns, seq):
        batch = fuzzy_pattern_weights(patterns, seq)
        scalar = np.array([fuzzy_pattern_weight(p, seq) for p in patterns])
        assert np.allclose(batch, scalar, atol=1e-9)
