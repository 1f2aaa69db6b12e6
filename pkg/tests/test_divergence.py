from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mass_functions
from credal_eval.credal import CredalVertices, vertices_exact
from credal_eval.divergence import (
    EPS,
    GroundTruth,
    divergences_to_rows,
    js_divergence,
    js_lambda_scale,
    kl_divergence,
    min_divergence_to_vertices,
)
from credal_eval.errors import ContractViolation
from credal_eval.setfn import LabelSpace, plausibility

probs = st.lists(st.floats(0.0, 1.0), min_size=2, max_size=6).filter(lambda v: sum(v) > 1e-3).map(
    lambda v: np.asarray(v) / sum(v))


class TestKL:
    def test_examples(self):
        assert kl_divergence([1, 0], [0.7, 0.3]) == pytest.approx(-math.log(0.7), abs=1e-12)
        assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
        assert kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-12)

    def test_zero_denominator_is_clamped(self):
        assert kl_divergence([1, 0], [0, 1]) == pytest.approx(-math.log(EPS))

    def test_base(self):
        assert kl_divergence([1, 0], [0.5, 0.5], base=2) == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(ContractViolation):
            kl_divergence([1, 0], [0.2, 0.3, 0.5])

    @settings(max_examples=200)
    @given(probs, st.integers(0, 2**32 - 1))
    def test_nonnegative_and_bounded(self, p, seed):
        q = np.random.default_rng(seed).dirichlet(np.ones(len(p)))
        d = kl_divergence(p, q)
        assert -1e-12 <= d <= -math.log(EPS) + 1e-9


class TestJS:
    def test_examples(self):
        expect = 0.5 * (math.log(1 / 0.75)) + 0.5 * (0.5 * math.log(0.5 / 0.75) + 0.5 * math.log(0.5 / 0.25))
        assert js_divergence([1, 0], [0.5, 0.5]) == pytest.approx(expect, abs=1e-12)
        assert js_divergence([1, 0], [0.5, 0.5]) == pytest.approx(0.215762, abs=1e-6)
        assert js_divergence([0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0, abs=1e-15)
        assert js_divergence([1, 0], [0, 1]) == pytest.approx(math.log(2), abs=1e-9)

    @settings(max_examples=200)
    @given(probs, st.integers(0, 2**32 - 1))
    def test_symmetric_and_bounded(self, p, seed):
        q = np.random.default_rng(seed).dirichlet(np.ones(len(p)))
        a, b = js_divergence(p, q), js_divergence(q, p)
        assert a == pytest.approx(b, abs=1e-12)
        assert -1e-12 <= a <= math.log(2) + 1e-9


class TestNearestVertex:
    def setup_method(self):
        self.v = CredalVertices(LabelSpace(2), np.array([[0.7, 0.3], [0.4, 0.6]]))

    def test_examples(self):
        d, i = min_divergence_to_vertices(GroundTruth(LabelSpace(2), 0), self.v)
        assert (d, i) == (pytest.approx(-math.log(0.7)), 0)
        d, i = min_divergence_to_vertices(GroundTruth(LabelSpace(2), 1), self.v)
        assert (d, i) == (pytest.approx(-math.log(0.6)), 1)
        corner = CredalVertices(LabelSpace(2), np.array([[1.0, 0.0]]))
        assert min_divergence_to_vertices(GroundTruth(LabelSpace(2), 0), corner) == (0.0, 0)

    def test_ties_go_to_lowest_index(self):
        v = CredalVertices(LabelSpace(3), np.array([[0.5, 0.5, 0.0], [0.5, 0.0, 0.5]]))
        assert min_divergence_to_vertices(GroundTruth(LabelSpace(3), 0), v)[1] == 0

    def test_js_kind(self):
        d, _ = min_divergence_to_vertices(GroundTruth(LabelSpace(2), 0), self.v, kind="js")
        assert d == pytest.approx(js_divergence([1, 0], [0.7, 0.3]))

    def test_ground_truth_validation(self):
        with pytest.raises(ContractViolation):
            GroundTruth(LabelSpace(2), 2)
        np.testing.assert_array_equal(GroundTruth(LabelSpace(3), 1).one_hot, [0, 1, 0])

    def test_rows_helper(self):
        out = divergences_to_rows(np.array([1.0, 0.0]), self.v.vertices)
        np.testing.assert_allclose(out, [-math.log(0.7), -math.log(0.4)])

    @settings(max_examples=150, deadline=None)
    @given(mass_functions(max_classes=6), st.data())
    def test_min_kl_is_minus_log_plausibility(self, m, data):
        c = data.draw(st.integers(0, m.space.num_classes - 1))
        d, _ = min_divergence_to_vertices(GroundTruth(m.space, c), vertices_exact(m))
        assert d == pytest.approx(-math.log(max(plausibility(m, 1 << c), EPS)), abs=1e-9)

    @settings(max_examples=100)
    @given(st.integers(2, 6), st.integers(2, 10), st.integers(0, 2**32 - 1))
    def test_adding_vertices_never_increases_distance(self, n, k, seed):
        rows = np.random.default_rng(seed).dirichlet(np.ones(n), size=k)
        y = GroundTruth(LabelSpace(n), 0)
        prev = math.inf
        for j in range(1, k + 1):
            d, _ = min_divergence_to_vertices(y, CredalVertices(LabelSpace(n), rows[:j]))
            assert d <= prev + 1e-15
            prev = d


class TestLambdaScale:
    def test_ratio_of_maxima(self):
        assert js_lambda_scale([0.1, 2.0, 0.5], [0.05, 0.4]) == pytest.approx(5.0)

    def test_rejects_empty_or_zero(self):
        with pytest.raises(ContractViolation):
            js_lambda_scale([], [0.1])
        with pytest.raises(ContractViolation):
            js_lambda_scale([0.1], [0.0])
