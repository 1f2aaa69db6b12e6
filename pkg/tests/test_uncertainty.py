from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from conftest import mass_functions
from credal_eval import oracle
from credal_eval.credal import (
    IntervalPrediction,
    SampleSet,
    credal_width,
    intervals_from_samples,
    lower_prob_from_samples,
    vertices_exact,
)
from credal_eval.errors import CapacityError, ContractViolation, InfeasibleInputError
from credal_eval.setfn import LabelSpace, MassFunction, mobius_inverse
from credal_eval.uncertainty import (
    NS_KINDS,
    EntropyBounds,
    _min_entropy_search,
    commonality_dense,
    credal_uncertainty,
    entropy_bounds,
    greedy_fill,
    interval_vertices,
    max_entropy_point,
    mutual_information,
    nonspecificity,
    ns_dubois,
    ns_korner,
    ns_smets,
    shannon_entropy,
    spec_pal,
)

FIXTURE = {1: 0.4, 2: 0.3, 3: 0.3}


def fixture_mass() -> MassFunction:
    return MassFunction.from_pairs(LabelSpace(2), FIXTURE)


class TestMassMeasures:
    def test_dubois(self):
        assert ns_dubois(fixture_mass()) == pytest.approx(0.3 * math.log(2), abs=1e-12)
        assert ns_dubois(MassFunction.bayesian([0.2, 0.3, 0.5])) == 0.0
        assert ns_dubois(MassFunction.vacuous(LabelSpace(10))) == pytest.approx(math.log(10), abs=1e-12)
        assert ns_dubois(fixture_mass(), base=2) == pytest.approx(0.3)

    def test_smets(self):
        # Q({a}) = 0.7, Q({b}) = 0.6, Q({a,b}) = 0.3
        expect = -(math.log(0.7) + math.log(0.6) + math.log(0.3))
        assert ns_smets(fixture_mass()) == pytest.approx(expect, abs=1e-12)
        assert ns_smets(fixture_mass()) == pytest.approx(2.071473, abs=1e-6)
        assert ns_smets(MassFunction.vacuous(LabelSpace(3))) == 0.0

    def test_smets_skips_zero_commonality(self):
        m = MassFunction(LabelSpace(2), {1: 1.0})
        assert ns_smets(m) == 0.0

    def test_smets_capacity(self):
        m = MassFunction.vacuous(LabelSpace(17))
        with pytest.raises(CapacityError):
            ns_smets(m)

    def test_commonality_table(self):
        q = commonality_dense(fixture_mass())
        np.testing.assert_allclose(q, [1.0, 0.7, 0.6, 0.3])

    def test_korner(self):
        assert ns_korner(fixture_mass()) == pytest.approx(0.7 + 0.6)
        assert ns_korner(MassFunction.bayesian([0.5, 0.5])) == pytest.approx(1.0)
        assert ns_korner(MassFunction.vacuous(LabelSpace(3))) == pytest.approx(3.0)

    def test_pal(self):
        assert spec_pal(fixture_mass()) == pytest.approx(0.7 + 0.15)
        assert spec_pal(MassFunction.bayesian([0.5, 0.5])) == pytest.approx(1.0)
        assert spec_pal(MassFunction.vacuous(LabelSpace(4))) == pytest.approx(0.25)

    def test_dispatch(self):
        m = fixture_mass()
        assert nonspecificity(m, "dubois") == ns_dubois(m)
        assert nonspecificity(m, "smets") == ns_smets(m)
        assert nonspecificity(m, "korner") == ns_korner(m)
        with pytest.raises(ContractViolation):
            nonspecificity(m, "cu")
        with pytest.raises(ContractViolation):
            nonspecificity(m, "hartley")
        assert set(NS_KINDS) == {"dubois", "smets", "korner", "cu"}

    @settings(max_examples=200, deadline=None)
    @given(mass_functions(max_classes=6))
    def test_dubois_range(self, m):
        ns = ns_dubois(m)
        assert 0.0 <= ns <= math.log(m.space.num_classes) + 1e-12
        assert (ns == 0.0) == m.is_bayesian

    @settings(max_examples=200, deadline=None)
    @given(mass_functions(max_classes=6), st.data())
    def test_coarsening_is_monotone(self, m, data):
        a = data.draw(st.sampled_from(sorted(m.focal)))
        extra = data.draw(st.integers(1, m.space.full))
        b = a | extra
        if b == a:
            b = m.space.full
        if b == a:
            return
        delta = data.draw(st.floats(0.0, 1.0)) * m[a]
        moved = dict(m.focal)
        moved[a] -= delta
        moved[b] = moved.get(b, 0.0) + delta
        m2 = MassFunction.from_pairs(m.space, moved)
        assert ns_dubois(m2) >= ns_dubois(m) - 1e-12
        assert ns_korner(m2) >= ns_korner(m) - 1e-12
        assert spec_pal(m2) <= spec_pal(m) + 1e-12


class TestEntropy:
    def test_shannon(self):
        assert shannon_entropy([0.7, 0.3]) == pytest.approx(-(0.7 * math.log(0.7) + 0.3 * math.log(0.3)))
        assert shannon_entropy([0.7, 0.3]) == pytest.approx(0.610864, abs=1e-6)
        assert shannon_entropy([0, 1, 0]) == 0.0
        assert shannon_entropy([0.25] * 4) == pytest.approx(math.log(4))

    def test_mutual_information(self):
        s = SampleSet.of([[0.7, 0.3], [0.4, 0.6]])
        h = shannon_entropy
        expect = h([0.55, 0.45]) - 0.5 * (h([0.7, 0.3]) + h([0.4, 0.6]))
        assert mutual_information(s) == pytest.approx(expect, abs=1e-12)
        assert mutual_information(s) == pytest.approx(0.0462008, abs=1e-6)
        assert mutual_information(SampleSet.of([[0.2, 0.8]] * 3)) == pytest.approx(0.0, abs=1e-15)
        assert mutual_information(SampleSet.of([[1, 0], [0, 1]])) == pytest.approx(math.log(2))


class TestEntropyBounds:
    def test_fixture(self):
        b = entropy_bounds(IntervalPrediction.of([0.4, 0.3], [0.7, 0.6]))
        assert b.upper == pytest.approx(math.log(2), abs=1e-9)
        assert b.lower == pytest.approx(shannon_entropy([0.7, 0.3]), abs=1e-9)
        cu = credal_uncertainty(IntervalPrediction.of([0.4, 0.3], [0.7, 0.6]))
        assert cu == pytest.approx(0.082283, abs=1e-6)

    def test_precise(self):
        p = [0.2, 0.5, 0.3]
        b = entropy_bounds(IntervalPrediction.of(p, p))
        assert b.lower == pytest.approx(shannon_entropy(p), abs=1e-9)
        assert b.upper == pytest.approx(shannon_entropy(p), abs=1e-9)
        assert credal_uncertainty(IntervalPrediction.of(p, p)) == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("n", [2, 3, 5, 12])
    def test_vacuous(self, n):
        b = entropy_bounds(IntervalPrediction.of([0] * n, [1] * n))
        assert b.lower == pytest.approx(0.0, abs=1e-12)
        assert b.upper == pytest.approx(math.log(n), abs=1e-9)

    def test_base(self):
        b = entropy_bounds(IntervalPrediction.of([0, 0], [1, 1]), base=2)
        assert b.upper == pytest.approx(1.0)

    def test_infeasible(self):
        with pytest.raises(InfeasibleInputError):
            IntervalPrediction.of([0.7, 0.7], [0.9, 0.9])

    def test_width(self):
        assert EntropyBounds(0.2, 0.5).width == pytest.approx(0.3)

    def test_water_filling_level(self):
        p = max_entropy_point(IntervalPrediction.of([0.5, 0.0, 0.0], [0.9, 0.3, 0.4]))
        np.testing.assert_allclose(p, [0.5, 0.25, 0.25], atol=1e-9)

    def test_interval_vertices_fixture(self):
        v = interval_vertices(IntervalPrediction.of([0.4, 0.3], [0.7, 0.6]))
        got = {tuple(np.round(r, 12)) for r in v}
        assert got == {(0.7, 0.3), (0.4, 0.6)}

    def test_greedy_fill(self):
        ip = IntervalPrediction.of([0.1, 0.2, 0.1], [0.6, 0.6, 0.6])
        np.testing.assert_allclose(greedy_fill(ip, [2, 0, 1]), [0.2, 0.2, 0.6])

    def test_matches_grid_search(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            ip = oracle.random_intervals(rng, int(rng.integers(2, 4)))
            fast, slow = entropy_bounds(ip), oracle.brute_entropy_bounds(ip, 1e-3)
            assert fast.lower == pytest.approx(slow.lower, abs=1e-4)
            assert fast.upper == pytest.approx(slow.upper, abs=1e-4)

    def test_search_never_beats_exact_minimum(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            ip = oracle.random_intervals(rng, int(rng.integers(2, 9)))
            exact = entropy_bounds(ip).lower
            found = _min_entropy_search(ip)
            assert found >= exact - 1e-12
            assert found <= entropy_bounds(ip).upper + 1e-12

    def test_sandwich_on_random_feasible_points(self):
        rng = np.random.default_rng(2024)
        checked = 0
        while checked < 1000:
            n = int(rng.integers(2, 7))
            s = oracle.random_sample_set(rng, n, int(rng.integers(2, 8)))
            ip = intervals_from_samples(s)
            b = entropy_bounds(ip)
            corners = interval_vertices(ip)
            for _ in range(10):
                # mixtures of samples and polytope corners stay feasible
                src = s.samples if rng.random() < 0.5 else corners
                p = rng.dirichlet(np.ones(src.shape[0])) @ src
                h = shannon_entropy(p)
                assert b.lower - 1e-9 <= h <= b.upper + 1e-9
                checked += 1
            assert 0.0 <= b.lower <= b.upper <= math.log(n) + 1e-12


class TestNonSpecificityTracksWidth:
    def test_positive_rank_correlation(self):
        rng = np.random.default_rng(5)
        ns, width = [], []
        for _ in range(150):
            n = int(rng.integers(3, 6))
            base = rng.dirichlet(np.ones(n) * 2.0)
            spread = rng.uniform(5, 200)
            rows = rng.dirichlet(base * spread + 1e-3, size=int(rng.integers(2, 12)))
            s = SampleSet(LabelSpace(n), rows / rows.sum(axis=1, keepdims=True))
            m = mobius_inverse(lower_prob_from_samples(s))
            v = vertices_exact(m)
            ns.append(ns_dubois(m))
            width.append(np.mean([credal_width(v, c) for c in range(n)]))
        rho = spearmanr(ns, width).statistic
        assert rho > 0
