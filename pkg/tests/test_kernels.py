"""Numba kernels against their numpy fallbacks, and backend selection."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidclick import _accel

codes_st = st.lists(st.integers(0, 7), min_size=0, max_size=25).map(
    lambda xs: np.array(xs, dtype=np.int64)
)
weight_st = st.floats(min_value=0.0, max_value=3.0, allow_nan=False)

needs_numba = pytest.mark.skipif(not _accel.HAS_NUMBA, reason="numba unavailable")


@needs_numba
class TestBackendEquivalence:
    @given(s=codes_st, t=codes_st, wd=weight_st, wi=weight_st, ws=weight_st)
    @settings(max_examples=150, deadline=None)
    def test_edit_distance(self, s, t, wd, wi, ws):
        nb = _accel.edit_distance_nb(s, t, wd, wi, ws)
        np_ = _accel.edit_distance_np(s, t, wd, wi, ws)
        assert np_ == pytest.approx(nb, abs=1e-12)

    @given(
        pats=st.lists(
            st.lists(st.integers(0, 7), min_size=4, max_size=4), min_size=1, max_size=8
        ).map(lambda xs: np.array(xs, dtype=np.int64)),
        seq=codes_st,
    )
    @settings(max_examples=150, deadline=None)
    def test_fuzzy_weights(self, pats, seq):
        nb = _accel.fuzzy_weights_nb(pats, seq, 0.1, 1.0, 1.0)
        np_ = _accel.fuzzy_weights_np(pats, seq, 0.1, 1.0, 1.0)
        assert np.allclose(nb, np_, atol=1e-12)

    @given(seq=codes_st, order=st.integers(1, 3))
    @settings(max_examples=100, deadline=None)
    def test_transition_counts_exact(self, seq, order):
        nb = _accel.transition_counts_nb(seq, order, 8)
        np_ = _accel.transition_counts_np(seq, order, 8)
        assert np.array_equal(nb, np_)
        expected_total = max(len(seq) - order, 0)
        assert nb.sum() == expected_total

    def test_nearest_centroids_agree(self):
        rng = np.random.Generator(np.random.Philox(1))
        X = np.vstack([rng.normal(0, 1, (30, 5)), rng.normal(9, 1, (30, 5))])
        C = np.array([[0.0] * 5, [9.0] * 5])
        lab_nb, d_nb = _accel.nearest_centroids_nb(X, C)
        lab_np, d_np = _accel.nearest_centroids_np(X, C)
        assert np.array_equal(lab_nb, lab_np)
        assert np.allclose(d_nb, d_np, atol=1e-9)


class TestBackendSelection:
    def run_with_env(self, value):
        env = dict(os.environ)
        if value is None:
            env.pop("VIDCLICK_BACKEND", None)
        else:
            env["VIDCLICK_BACKEND"] = value
        out = subprocess.run(
            [sys.executable, "-c", "import vidclick; print(vidclick.active_backend())"],
            capture_output=True,
            text=True,
            env=env,
        )
        assert out.returncode == 0, out.stderr
        return out.stdout.strip()

    def test_numpy_flag_forces_fallback(self):
        assert self.run_with_env("numpy") == "numpy"

    @needs_numba
    def test_default_prefers_numba(self):
        assert self.run_with_env(None) == "numba"

    def test_bad_flag_rejected(self):
        env = dict(os.environ, VIDCLICK_BACKEND="cuda")
        out = subprocess.run(
            [sys.executable, "-c", "import vidclick"],
            capture_output=True,
            text=True,
            env=env,
        )
        assert out.returncode != 0

    def test_numpy_backend_full_pipeline_smoke(self):
        env = dict(os.environ, VIDCLICK_BACKEND="numpy")
        code = (
            "from vidclick.actions import all_category_weights;"
            "from vidclick.tokens import tokenize_compact;"
            "w = all_category_weights(tokenize_compact('PlPaSbPlSfSfSfSf'));"
            "print(len(w))"
        )
        out = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, env=env
        )
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == "7"
