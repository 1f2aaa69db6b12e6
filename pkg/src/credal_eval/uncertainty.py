"""Imprecision and uncertainty measures on masses, intervals and samples.

All logarithms are natural unless ``base`` is given.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .credal import IntervalPrediction, SampleSet, approx_orders
from .errors import CapacityError, ContractViolation
from .setfn import DENSE_MAX_CLASSES, MassFunction

VERTEX_SEARCH_MAX_CLASSES = 10
WATERFILL_TOL = 1e-10


@dataclass(frozen=True)
class EntropyBounds:
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return max(self.upper - self.lower, 0.0)


def _log(x, base: float):
    out = np.log(x)
    return out if base == math.e else out / math.log(base)


def ns_dubois(m: MassFunction, base: float = math.e) -> float:
    """Dubois-Prade non-specificity, sum of m(A) log|A|."""
    return float(m.masses @ _log(m.sizes, base))


def ns_korner(m: MassFunction) -> float:
    return float(m.masses @ m.sizes)


def spec_pal(m: MassFunction) -> float:
    return float(m.masses @ (1.0 / m.sizes))


def commonality_dense(m: MassFunction) -> np.ndarray:
    """Q(A) for every mask A, via the superset-sum transform."""
    n = m.space.num_classes
    if n > DENSE_MAX_CLASSES:
        raise CapacityError(f"commonality table needs the full powerset (N <= {DENSE_MAX_CLASSES})")
    q = np.zeros(m.space.size)
    for mask, v in m.focal.items():
        q[mask] = v
    step = 1
    while step < q.shape[0]:
        view = q.reshape(-1, 2, step)
        view[:, 0, :] += view[:, 1, :]
        step <<= 1
    return q


def ns_smets(m: MassFunction, base: float = math.e) -> float:
    """Smets' commonality measure; subsets with zero commonality contribute nothing."""
    q = commonality_dense(m)[1:]
    q = q[q > 0.0]
    return float(-_log(np.minimum(q, 1.0), base).sum())


def shannon_entropy(p, base: float = math.e) -> float:
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-(nz * _log(nz, base)).sum())


def _entropy_rows(rows: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(rows > 0, rows * np.log(np.where(rows > 0, rows, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def mutual_information(s: SampleSet, base: float = math.e) -> float:
    """Entropy of the mean prediction minus the mean per-sample entropy."""
    mi = shannon_entropy(s.mean()) - float(_entropy_rows(s.samples).mean())
    if base != math.e:
        mi /= math.log(base)
    return max(mi, 0.0)


def max_entropy_point(ip: IntervalPrediction) -> np.ndarray:
    """Maximum-entropy member of the interval credal set (water-filling).

    The optimum is p_c = clamp(t, lower_c, upper_c) for the level t that
    makes the coordinates sum to one; t is found by bisection.
    """
    lo, hi = ip.lower, ip.upper
    a, b = 0.0, 1.0
    p = np.clip(0.5, lo, hi)
    for _ in range(200):
        t = 0.5 * (a + b)
        p = np.clip(t, lo, hi)
        s = p.sum()
        if abs(s - 1.0) <= WATERFILL_TOL:
            break
        if s < 1.0:
            a = t
        else:
            b = t
    return p / p.sum()


def interval_vertices(ip: IntervalPrediction, tol: float = 1e-12) -> np.ndarray:
    """Extreme points of {p : lower <= p <= upper, sum p = 1}.

    Each vertex has at most one coordinate strictly between its bounds.
    """
    n = ip.space.num_classes
    if n > VERTEX_SEARCH_MAX_CLASSES:
        raise CapacityError(f"interval vertex enumeration capped at {VERTEX_SEARCH_MAX_CLASSES} classes")
    lo, hi = ip.lower, ip.upper
    choices = ((np.arange(1 << (n - 1))[:, None] >> np.arange(n - 1)) & 1).astype(bool)
    out = []
    for free in range(n):
        others = [c for c in range(n) if c != free]
        fixed = np.where(choices, hi[others], lo[others])
        rest = 1.0 - fixed.sum(axis=1)
        ok = (rest >= lo[free] - tol) & (rest <= hi[free] + tol)
        if not ok.any():
            continue
        pts = np.empty((int(ok.sum()), n))
        pts[:, others] = fixed[ok]
        pts[:, free] = np.clip(rest[ok], lo[free], hi[free])
        out.append(pts)
    return np.vstack(out)


def greedy_fill(ip: IntervalPrediction, order) -> np.ndarray:
    """Start at the lower bounds and hand out the remaining mass in ``order``."""
    p = ip.lower.copy()
    rem = 1.0 - p.sum()
    for c in order:
        if rem <= 0:
            break
        add = min(ip.upper[c] - ip.lower[c], rem)
        p[c] += add
        rem -= add
    return p


def _min_entropy_search(ip: IntervalPrediction) -> float:
    # local search over fill orders, seeded from the class-first/class-last orders
    best = math.inf
    for start in approx_orders(ip.space.num_classes):
        order = list(start)
        cur = shannon_entropy(greedy_fill(ip, order))
        improved = True
        while improved:
            improved = False
            for i in range(len(order) - 1):
                order[i], order[i + 1] = order[i + 1], order[i]
                h = shannon_entropy(greedy_fill(ip, order))
                if h < cur - 1e-15:
                    cur = h
                    improved = True
                else:
                    order[i], order[i + 1] = order[i + 1], order[i]
        best = min(best, cur)
    return best


def entropy_bounds(ip: IntervalPrediction, base: float = math.e) -> EntropyBounds:
    """Smallest and largest Shannon entropy over the interval credal set."""
    upper = shannon_entropy(max_entropy_point(ip))
    if ip.space.num_classes <= VERTEX_SEARCH_MAX_CLASSES:
        lower = float(_entropy_rows(interval_vertices(ip)).min())
    else:
        lower = _min_entropy_search(ip)
    lower = min(lower, upper)
    scale = 1.0 if base == math.e else 1.0 / math.log(base)
    return EntropyBounds(max(lower, 0.0) * scale, upper * scale)


def credal_uncertainty(ip: IntervalPrediction, base: float = math.e) -> float:
    return entropy_bounds(ip, base).width


DUBOIS = "dubois"
SMETS = "smets"
KORNER = "korner"
CREDAL_UNCERTAINTY = "cu"
NS_KINDS = (DUBOIS, SMETS, KORNER, CREDAL_UNCERTAINTY)


def nonspecificity(m: MassFunction, kind: str = DUBOIS, base: float = math.e) -> float:
    """Mass-based imprecision measure selected by name (credal uncertainty excluded)."""
    if kind == DUBOIS:
        return ns_dubois(m, base)
    if kind == SMETS:
        return ns_smets(m, base)
    if kind == KORNER:
        return ns_korner(m)
    raise ContractViolation(f"{kind!r} is not a mass-based non-specificity measure")
