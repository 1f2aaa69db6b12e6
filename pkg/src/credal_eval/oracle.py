"""Brute-force reference implementations for small label spaces.

These deliberately share no code with the optimized paths beyond the data
types: subsets are enumerated one by one, permutations are walked with
plain loops, and entropy bounds come from a grid search. ``self_test``
runs randomized equivalence batches against the optimized pipeline.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from . import credal, uncertainty
from .credal import CredalVertices, IntervalPrediction, SampleSet
from .errors import CapacityError, DegenerateInputError
from .setfn import LabelSpace, LowerProbability, MassFunction, mobius_inverse
from .uncertainty import EntropyBounds


def _subset_members(mask: int, n: int) -> list[int]:
    return [i for i in range(n) if mask >> i & 1]


def brute_lower_probability(s: SampleSet) -> LowerProbability:
    n = s.space.num_classes
    if n > 12:
        raise CapacityError("brute-force lower probability limited to 12 classes")
    values = {}
    rows = s.samples.tolist()
    for mask in range(1, 1 << n):
        idx = _subset_members(mask, n)
        values[mask] = min(sum(p[i] for i in idx) for p in rows)
    values[(1 << n) - 1] = 1.0
    return LowerProbability(s.space, values)


def brute_mobius(lp: LowerProbability) -> MassFunction:
    """Alternating-sum Möbius inverse over every subset, then clamp and renormalize."""
    n = lp.space.num_classes
    if n > 12:
        raise CapacityError("brute-force Möbius inverse limited to 12 classes")
    raw = {}
    for a in range(1, 1 << n):
        total = 0.0
        b = a
        while True:
            if b:
                sign = -1.0 if (a & ~b).bit_count() % 2 else 1.0
                total += sign * lp[b]
            if b == 0:
                break
            b = (b - 1) & a
        raw[a] = total
    kept = {a: v for a, v in raw.items() if v > 0}
    z = sum(kept.values())
    if z <= 0:
        raise DegenerateInputError("no positive mass")
    return MassFunction.from_pairs(lp.space, {a: v / z for a, v in kept.items()})


def brute_vertices(m: MassFunction) -> CredalVertices:
    n = m.space.num_classes
    if n > 6:
        raise CapacityError("brute-force vertex enumeration limited to 6 classes")
    focal = list(m.focal.items())
    rows = []
    for perm in itertools.permutations(range(n)):
        p = [0.0] * n
        for i, x in enumerate(perm):
            earlier = perm[:i]
            for a, v in focal:
                if a >> x & 1 and not any(a >> y & 1 for y in earlier):
                    p[x] += v
        rows.append(p)
    return CredalVertices(m.space, np.array(rows), credal.EXACT)


def _entropy(points: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(points > 0, points * np.log(np.where(points > 0, points, 1.0)), 0.0)
    return -t.sum(axis=-1)


def _grid(lo: float, hi: float, step: float, extra=()) -> np.ndarray:
    if hi < lo:
        if lo - hi > 1e-9:
            return np.empty(0)
        hi = lo
    pts = np.arange(lo, hi, step)
    pts = np.concatenate([pts, [hi], [x for x in extra if lo <= x <= hi]])
    return np.unique(np.clip(pts, lo, hi))


def brute_entropy_bounds(ip: IntervalPrediction, step: float = 1e-3) -> EntropyBounds:
    """Grid search for the entropy range of an interval credal set (N <= 3).

    The first free coordinate is gridded at ``step`` plus the values where
    pairs of the other coordinates sit on their bounds; for each such value
    the remaining one-dimensional segment is gridded including its ends.
    """
    n = ip.space.num_classes
    if n > 3:
        raise CapacityError("brute-force entropy bounds limited to 3 classes")
    if not 1e-4 <= step <= 1e-2:
        raise ValueError("grid step must lie in [1e-4, 1e-2]")
    lo, hi = ip.lower, ip.upper
    if n == 2:
        a = max(lo[0], 1 - hi[1])
        b = min(hi[0], 1 - lo[1])
        p0 = _grid(a, b, step)
        pts = np.stack([p0, 1 - p0], axis=1)
        h = _entropy(pts)
        return EntropyBounds(float(h.min()), float(h.max()))
    a = max(lo[0], 1 - hi[1] - hi[2])
    b = min(hi[0], 1 - lo[1] - lo[2])
    kinks = [1 - x - y for x in (lo[1], hi[1]) for y in (lo[2], hi[2])]
    best_lo, best_hi = math.inf, -math.inf
    for p0 in _grid(a, b, step, kinks):
        rest = 1 - p0
        c = max(lo[1], rest - hi[2])
        d = min(hi[1], rest - lo[2])
        if d < c - 1e-12:
            continue
        p1 = _grid(c, max(c, d), step)
        pts = np.stack([np.full_like(p1, p0), p1, rest - p1], axis=1)
        h = _entropy(np.clip(pts, 0, 1))
        best_lo = min(best_lo, float(h.min()))
        best_hi = max(best_hi, float(h.max()))
    return EntropyBounds(best_lo, best_hi)


# -- self test ----------------------------------------------------------------

@dataclass
class BatchResult:
    name: str
    cases: int
    max_error: float
    tolerance: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}  {self.name}: {self.cases} cases, max error {self.max_error:.3g} "
                f"(tol {self.tolerance:g}), {self.seconds:.1f}s")


def vertex_set_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric max-norm Hausdorff distance between two finite point sets."""
    diff = np.abs(a[:, None, :] - b[None, :, :]).max(axis=2)
    return float(max(diff.min(axis=1).max(), diff.min(axis=0).max()))


def one_sided_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Largest distance from a point of ``a`` to its nearest point of ``b``."""
    diff = np.abs(a[:, None, :] - b[None, :, :]).max(axis=2)
    return float(diff.min(axis=1).max())


def random_sample_set(rng: np.random.Generator, n: int, k: int) -> SampleSet:
    alpha = rng.choice([0.2, 1.0, 5.0]) * np.ones(n)
    rows = rng.dirichlet(alpha, size=k)
    return SampleSet(LabelSpace(n), rows / rows.sum(axis=1, keepdims=True))


def random_mass(rng: np.random.Generator, n: int, max_focal: int | None = None) -> MassFunction:
    full = (1 << n) - 1
    count = int(rng.integers(1, min(max_focal or full, full) + 1))
    masks = rng.choice(np.arange(1, full + 1), size=count, replace=False)
    w = rng.dirichlet(np.ones(count))
    return MassFunction.from_pairs(LabelSpace(n), zip(masks.tolist(), w.tolist()))


def random_intervals(rng: np.random.Generator, n: int) -> IntervalPrediction:
    s = random_sample_set(rng, n, int(rng.integers(1, 8)))
    ip = credal.intervals_from_samples(s)
    if rng.random() < 0.3:
        # widen upward so the upper bounds are not all reachable
        hi = np.minimum(ip.upper + rng.uniform(0, 0.2, n), 1.0)
        ip = IntervalPrediction(ip.space, ip.lower, hi)
    return ip


def batch_pipeline(rng, cases: int = 500, max_classes: int = 6) -> BatchResult:
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(2, max_classes + 1))
        s = random_sample_set(rng, n, int(rng.integers(1, 21)))
        fast = credal.vertices_exact(mobius_inverse(credal.lower_prob_from_samples(s)))
        slow = brute_vertices(brute_mobius(brute_lower_probability(s)))
        worst = max(worst, vertex_set_distance(fast.vertices, slow.vertices))
    return BatchResult("samples -> lower probability -> masses -> exact vertices",
                       cases, worst, 1e-9, time.perf_counter() - t0)


def batch_approx_subset(rng, cases: int = 200, max_classes: int = 6) -> BatchResult:
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(2, max_classes + 1))
        m = random_mass(rng, n, max_focal=3 * n)
        worst = max(worst, one_sided_distance(credal.vertices_approx(m).vertices, brute_vertices(m).vertices))
    return BatchResult("approximate vertices are exact vertices", cases, worst, 1e-9,
                       time.perf_counter() - t0)


def batch_entropy(rng, cases: int = 100, step: float = 1e-3) -> BatchResult:
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(cases):
        ip = random_intervals(rng, int(rng.integers(2, 4)))
        fast = uncertainty.entropy_bounds(ip)
        slow = brute_entropy_bounds(ip, step)
        worst = max(worst, abs(fast.lower - slow.lower), abs(fast.upper - slow.upper))
    return BatchResult("entropy bounds match grid search", cases, worst, 1e-4, time.perf_counter() - t0)


def self_test(max_classes: int = 6, seed: int = 0) -> list[BatchResult]:
    if not 2 <= max_classes <= 6:
        raise CapacityError("self-test supports 2..6 classes")
    rng = np.random.default_rng(seed)
    return [
        batch_pipeline(rng, max_classes=max_classes),
        batch_approx_subset(rng, max_classes=max_classes),
        batch_entropy(rng),
    ]
