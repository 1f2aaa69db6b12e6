from __future__ import annotations

import sys

import numpy as np
import pytest
from hypothesis import strategies as st

from credal_eval.credal import SampleSet
from credal_eval.setfn import LabelSpace, MassFunction


@pytest.fixture
def two_class_mass() -> MassFunction:
    # m({a}) = 0.4, m({b}) = 0.3, m({a,b}) = 0.3
    return MassFunction.from_pairs(LabelSpace(2), {1: 0.4, 2: 0.3, 3: 0.3})


@pytest.fixture
def two_samples() -> SampleSet:
    return SampleSet.of([[0.7, 0.3], [0.4, 0.6]])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@st.composite
def mass_functions(draw, min_classes: int = 2, max_classes: int = 5, max_focal: int = 8):
    n = draw(st.integers(min_classes, max_classes))
    full = (1 << n) - 1
    masks = draw(st.lists(st.integers(1, full), min_size=1, max_size=max_focal, unique=True))
    weights = draw(st.lists(st.floats(0.01, 1.0), min_size=len(masks), max_size=len(masks)))
    return MassFunction.from_pairs(LabelSpace(n), zip(masks, weights))


@st.composite
def sample_sets(draw, min_classes: int = 2, max_classes: int = 5, max_samples: int = 8):
    n = draw(st.integers(min_classes, max_classes))
    k = draw(st.integers(1, max_samples))
    seed = draw(st.integers(0, 2**32 - 1))
    alpha = draw(st.sampled_from([0.2, 1.0, 5.0]))
    rows = np.random.default_rng(seed).dirichlet(alpha * np.ones(n), size=k)
    return SampleSet(LabelSpace(n), rows / rows.sum(axis=1, keepdims=True))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
