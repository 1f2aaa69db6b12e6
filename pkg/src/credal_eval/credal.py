"""Credal sets from every prediction encoding.

A credal set is carried around as the list of its extreme points. Sample sets
and probability intervals are first turned into lower probabilities, then into
mass functions, and the vertices are read off the mass function one
permutation of the classes at a time.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, ContractViolation, InfeasibleInputError
from .setfn import (
    DENSE_MAX_CLASSES,
    LabelSpace,
    LowerProbability,
    MassFunction,
    cardinality,
    dense_membership,
    membership_matrix,
    mobius_inverse,
)

EXACT_MAX_CLASSES = 8
PREFIX_THRESHOLD = 0.95
VERTEX_TOL = 1e-9
SAMPLE_SUM_TOL = 1e-6

EXACT = "exact"
APPROXIMATE = "approximate"
NATIVE = "native"


@dataclass(frozen=True, eq=False)
class SampleSet:
    space: LabelSpace
    samples: np.ndarray

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.samples, dtype=float))
        if arr.shape[0] < 1 or arr.shape[1] != self.space.num_classes:
            raise ContractViolation(f"expected K x {self.space.num_classes} samples, got {arr.shape}")
        if (arr < 0).any():
            raise ContractViolation("samples contain negative probabilities")
        if np.abs(arr.sum(axis=1) - 1.0).max() > SAMPLE_SUM_TOL:
            raise ContractViolation("every sample must sum to 1")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @classmethod
    def of(cls, rows: Sequence[Sequence[float]]) -> "SampleSet":
        arr = np.atleast_2d(np.asarray(rows, dtype=float))
        return cls(LabelSpace(arr.shape[1]), arr)

    def __len__(self):
        return self.samples.shape[0]

    def mean(self) -> np.ndarray:
        return self.samples.mean(axis=0)


@dataclass(frozen=True, eq=False)
class IntervalPrediction:
    space: LabelSpace
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        n = self.space.num_classes
        if lo.shape != (n,) or hi.shape != (n,):
            raise ContractViolation(f"interval bounds must have length {n}")
        if (lo < -VERTEX_TOL).any() or (hi > 1 + VERTEX_TOL).any() or (lo > hi + VERTEX_TOL).any():
            raise ContractViolation("interval bounds must satisfy 0 <= lower <= upper <= 1")
        if lo.sum() > 1 + VERTEX_TOL or hi.sum() < 1 - VERTEX_TOL:
            raise InfeasibleInputError(
                f"empty credal set: sum(lower)={lo.sum():.6g}, sum(upper)={hi.sum():.6g}")
        lo = np.clip(lo, 0.0, 1.0)
        hi = np.clip(np.maximum(hi, lo), 0.0, 1.0)
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def of(cls, lower: Sequence[float], upper: Sequence[float]) -> "IntervalPrediction":
        return cls(LabelSpace(len(lower)), np.asarray(lower, float), np.asarray(upper, float))

    def midpoint(self) -> np.ndarray:
        mid = 0.5 * (self.lower + self.upper)
        return mid / mid.sum()


@dataclass(frozen=True, eq=False)
class CredalVertices:
    space: LabelSpace
    vertices: np.ndarray
    provenance: str = EXACT

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.shape[0] == 0 or v.shape[1] != self.space.num_classes:
            raise ContractViolation("credal set needs at least one vertex of the right length")
        v = dedupe_vertices(v)
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return self.vertices.shape[0]

    def contains_vertex(self, p: Sequence[float], tol: float = VERTEX_TOL) -> bool:
        return bool((np.abs(self.vertices - np.asarray(p)).max(axis=1) <= tol).any())


def dedupe_vertices(v: np.ndarray, tol: float = VERTEX_TOL) -> np.ndarray:
    """Drop rows within ``tol`` (max-norm) of an earlier kept row; keeps first-seen order."""
    if v.shape[0] <= 1:
        return v.copy()
    _, first = np.unique(np.round(v, 9), axis=0, return_index=True)
    cand = v[np.sort(first)]
    if cand.shape[0] == 1:
        return cand
    # rounding can split near-equal rows across a grid boundary; merge within tol.
    # Rows within tol (max-norm) project within tol onto a weight vector summing
    # to 1, so only neighbours in projection order need an exact check.
    c = cand.shape[0]
    w = _projection_weights(cand.shape[1])
    proj = cand @ w
    order = np.argsort(proj, kind="stable")
    sp = proj[order]
    hi = np.searchsorted(sp, sp + 2 * tol, side="right")
    counts = hi - np.arange(c) - 1
    total = int(counts.sum())
    if total == 0:
        return cand
    i = np.repeat(np.arange(c), counts)
    j = i + 1 + np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    a, b = order[i], order[j]
    close = np.abs(cand[a] - cand[b]).max(axis=1) <= tol
    lo_idx, hi_idx = np.minimum(a, b)[close], np.maximum(a, b)[close]
    keep = np.ones(c, dtype=bool)
    # pairs sorted by earlier row: keep[x] is final by the time x is the earlier row
    for x, y in sorted(zip(lo_idx.tolist(), hi_idx.tolist())):
        if keep[x]:
            keep[y] = False
    return cand[keep]


@lru_cache(maxsize=64)
def _projection_weights(n: int) -> np.ndarray:
    w = np.random.default_rng(0).random(n) + 0.5
    w /= w.sum()
    w.flags.writeable = False
    return w


def _check_family(space: LabelSpace, family: Iterable[int]) -> tuple[int, ...]:
    fam = tuple(sorted(set(int(a) for a in family)))
    if not fam:
        raise ContractViolation("empty subset family")
    if space.full not in fam:
        raise ContractViolation("subset family must contain the whole label space")
    for a in fam:
        if a <= 0 or a > space.full:
            raise ContractViolation(f"subset {a} outside the label space")
    return fam


def full_family(space: LabelSpace) -> tuple[int, ...]:
    if space.num_classes > DENSE_MAX_CLASSES:
        raise CapacityError(f"full powerset not materialized beyond {DENSE_MAX_CLASSES} classes; use a budget")
    return tuple(range(1, space.size))


@lru_cache(maxsize=16)
def _dense_membership_t(n: int) -> np.ndarray:
    out = dense_membership(n)[1:].T.astype(float)
    out.flags.writeable = False
    return out


def lower_prob_from_samples(s: SampleSet, family: Iterable[int] | None = None) -> LowerProbability:
    """Lower probability of each subset: the smallest probability any sample gives it."""
    space = s.space
    fam = full_family(space) if family is None else _check_family(space, family)
    if len(fam) == space.size - 1:
        mem_t = _dense_membership_t(space.num_classes)
    else:
        mem_t = membership_matrix(fam, space.num_classes).T.astype(float)
    low = (s.samples @ mem_t).min(axis=0)
    np.clip(low, 0.0, 1.0, out=low)
    values = dict(zip(fam, low.tolist()))
    values[space.full] = 1.0
    return LowerProbability(space, values)


def prefix_set(p: np.ndarray, threshold: float = PREFIX_THRESHOLD) -> int:
    """Shortest set of top-ranked classes whose probability reaches ``threshold``."""
    order = np.argsort(-np.asarray(p), kind="stable")
    cum = np.cumsum(np.asarray(p)[order])
    k = int(np.searchsorted(cum, threshold - 1e-12, side="left")) + 1
    k = min(k, len(order))
    mask = 0
    for c in order[:k]:
        mask |= 1 << int(c)
    return mask


class BudgetSelector:
    """Accumulates prefix-set frequencies over any number of sample sets."""

    def __init__(self, space: LabelSpace, budget: int, threshold: float = PREFIX_THRESHOLD):
        n = space.num_classes
        if budget < n + 1:
            raise ContractViolation(f"budget {budget} smaller than N + 1 = {n + 1}")
        self.space = space
        self.budget = int(budget)
        self.threshold = threshold
        self.counts: Counter[int] = Counter()

    def update(self, s: SampleSet) -> None:
        for p in s.samples:
            mask = prefix_set(p, self.threshold)
            if cardinality(mask) > 1 and mask != self.space.full:
                self.counts[mask] += 1

    def family(self) -> list[int]:
        space = self.space
        base = [1 << i for i in range(space.num_classes)] + [space.full]
        extra = sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))
        chosen = [m for m, _ in extra[: self.budget - len(base)]]
        return sorted(set(base) | set(chosen), key=lambda m: (cardinality(m), m))


def select_budget_subsets(samples: SampleSet | Iterable[SampleSet], budget: int,
                          threshold: float = PREFIX_THRESHOLD) -> list[int]:
    if isinstance(samples, SampleSet):
        samples = [samples]
    samples = list(samples)
    if not samples:
        raise ContractViolation("no sample sets supplied")
    sel = BudgetSelector(samples[0].space, budget, threshold)
    for s in samples:
        sel.update(s)
    return sel.family()


@lru_cache(maxsize=16)
def _all_permutations(n: int) -> np.ndarray:
    out = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    out.flags.writeable = False
    return out


def _claim_table(m: MassFunction) -> np.ndarray:
    """claim[S, c]: mass of focal sets containing c and disjoint from S."""
    n = m.space.num_classes
    subsets = dense_membership(n).astype(float)
    mem = m.membership.astype(float)
    disjoint = (subsets @ mem.T) == 0
    return disjoint.astype(float) @ (m.masses[:, None] * mem)


def vertices_exact(m: MassFunction, max_classes: int = EXACT_MAX_CLASSES) -> CredalVertices:
    """Every permutation vertex of the credal set of ``m``, duplicates removed."""
    n = m.space.num_classes
    if n > max_classes:
        raise CapacityError(
            f"exact vertex enumeration capped at {max_classes} classes (got {n}); use vertices_approx")
    perms = _all_permutations(n)
    bits = np.left_shift(1, perms)
    before = np.cumsum(bits, axis=1) - bits
    claim = _claim_table(m)
    verts = np.zeros(perms.shape, dtype=float)
    rows = np.arange(perms.shape[0])[:, None]
    verts[rows, perms] = claim[before, perms]
    return CredalVertices(m.space, verts, EXACT)


def vertices_for_orders(m: MassFunction, orders: np.ndarray) -> np.ndarray:
    """Permutation vertices for each row of ``orders`` (class indices, first claims first)."""
    orders = np.atleast_2d(np.asarray(orders, dtype=np.int64))
    p, n = orders.shape
    # the owner of a focal set is its first member in the order
    first = m.membership[:, orders].argmax(axis=2)
    owner = orders[np.arange(p)[None, :], first]
    flat = (np.arange(p)[None, :] * n + owner).ravel()
    weights = np.broadcast_to(m.masses[:, None], owner.shape).ravel()
    return np.bincount(flat, weights=weights, minlength=p * n).reshape(p, n)


def approx_orders(n: int) -> np.ndarray:
    """Two orders per class: the class first, then the class last; others in index order."""
    rows = []
    for i in range(n):
        rest = [c for c in range(n) if c != i]
        rows.append([i] + rest)
        rows.append(rest + [i])
    return np.array(rows, dtype=np.int64)


def vertices_approx(m: MassFunction) -> CredalVertices:
    verts = vertices_for_orders(m, approx_orders(m.space.num_classes))
    return CredalVertices(m.space, verts, APPROXIMATE)


def vertices(m: MassFunction, mode: str = "auto") -> CredalVertices:
    """Dispatch on ``mode``: exact, approximate, or auto (exact up to the enumeration cap)."""
    if mode in ("exact",):
        return vertices_exact(m)
    if mode in ("approx", "approximate"):
        return vertices_approx(m)
    if mode == "auto":
        if m.space.num_classes <= EXACT_MAX_CLASSES:
            return vertices_exact(m)
        return vertices_approx(m)
    raise ContractViolation(f"unknown vertex mode {mode!r}")


def lower_prob_from_intervals(ip: IntervalPrediction) -> LowerProbability:
    """Tightest lower probability compatible with the intervals, over the full powerset."""
    space = ip.space
    fam = full_family(space)
    mem = dense_membership(space.num_classes)[1:].astype(float)
    from_lower = mem @ ip.lower
    from_upper = 1.0 - (1.0 - mem) @ ip.upper
    low = np.clip(np.maximum(from_lower, from_upper), 0.0, 1.0)
    values = dict(zip(fam, low.tolist()))
    values[space.full] = 1.0
    return LowerProbability(space, values)


def mass_from_intervals(ip: IntervalPrediction) -> MassFunction:
    return mobius_inverse(lower_prob_from_intervals(ip))


def credal_from_intervals(ip: IntervalPrediction, mode: str = "auto") -> CredalVertices:
    return vertices(mass_from_intervals(ip), mode)


def intervals_from_samples(s: SampleSet) -> IntervalPrediction:
    return IntervalPrediction(s.space, s.samples.min(axis=0), s.samples.max(axis=0))


def credal_width(v: CredalVertices, class_index: int) -> float:
    if not 0 <= class_index < v.space.num_classes:
        raise ContractViolation(f"class index {class_index} outside the label space")
    col = v.vertices[:, class_index]
    return float(col.max() - col.min())


def point_vertices(p: Sequence[float]) -> CredalVertices:
    p = np.asarray(p, dtype=float)
    return CredalVertices(LabelSpace(p.shape[0]), p[None, :], NATIVE)
