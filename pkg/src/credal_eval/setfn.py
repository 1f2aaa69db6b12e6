"""Set functions over the powerset of a finite label space.

Subsets are encoded as integer bitmasks: bit ``i`` is set iff class ``i``
belongs to the subset. Python integers are unbounded, so the encoding works
for any number of classes; only operations that materialize the full
powerset are restricted (see ``DENSE_MAX_CLASSES``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ContractViolation, DegenerateInputError, StructuralError

MASS_TOL = 1e-9
DROP_BELOW = 1e-12
DENSE_MAX_CLASSES = 16


@dataclass(frozen=True)
class LabelSpace:
    num_classes: int
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if int(self.num_classes) != self.num_classes or self.num_classes < 2:
            raise ContractViolation(f"label space needs at least 2 classes, got {self.num_classes}")
        if self.class_names is not None:
            names = tuple(str(n) for n in self.class_names)
            if len(names) != self.num_classes:
                raise ContractViolation("class_names length does not match num_classes")
            if len(set(names)) != len(names):
                raise ContractViolation("class names must be distinct")
            object.__setattr__(self, "class_names", names)

    @property
    def full(self) -> int:
        return (1 << self.num_classes) - 1

    @property
    def size(self) -> int:
        return 1 << self.num_classes

    def singleton(self, i: int) -> int:
        if not 0 <= i < self.num_classes:
            raise ContractViolation(f"class index {i} outside 0..{self.num_classes - 1}")
        return 1 << i

    def mask(self, classes: Iterable[int]) -> int:
        out = 0
        for c in classes:
            out |= self.singleton(c)
        return out

    def complement(self, mask: int) -> int:
        return self.full & ~mask

    def contains(self, mask: int) -> bool:
        return 0 <= mask <= self.full

    def label(self, mask: int) -> str:
        names = self.class_names or tuple(str(i) for i in range(self.num_classes))
        return "{" + ",".join(names[i] for i in members(mask)) + "}"


def members(mask: int) -> list[int]:
    """Class indices contained in ``mask``, ascending."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return out


def cardinality(mask: int) -> int:
    return mask.bit_count()


def membership_matrix(masks: Sequence[int], n: int) -> np.ndarray:
    """Boolean matrix of shape (len(masks), n); row k marks the members of masks[k]."""
    if n <= 62:
        arr = np.asarray(masks, dtype=np.int64).reshape(-1, 1)
        return ((arr >> np.arange(n, dtype=np.int64)) & 1).astype(bool)
    nbytes = (n + 7) // 8
    buf = b"".join(int(m).to_bytes(nbytes, "little") for m in masks)
    bits = np.unpackbits(np.frombuffer(buf, dtype=np.uint8).reshape(len(masks), nbytes),
                         axis=1, bitorder="little")
    return bits[:, :n].astype(bool)


@lru_cache(maxsize=32)
def dense_membership(n: int) -> np.ndarray:
    """Membership matrix of every subset 0 .. 2^n - 1 (read-only)."""
    if n > DENSE_MAX_CLASSES:
        raise ContractViolation(f"full powerset not materialized beyond {DENSE_MAX_CLASSES} classes")
    out = membership_matrix(range(1 << n), n)
    out.flags.writeable = False
    return out


@lru_cache(maxsize=32)
def dense_cardinality(n: int) -> np.ndarray:
    out = dense_membership(n).sum(axis=1)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class MassFunction:
    """Sparse basic belief assignment ``mask -> mass``.

    Construct through :meth:`from_pairs` when the input may contain duplicates,
    tiny masses or rounding noise in the total; the plain constructor only
    validates.
    """

    space: LabelSpace
    focal: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        full = self.space.full
        masks = list(self.focal)
        vals = np.fromiter(self.focal.values(), dtype=float, count=len(masks))
        if masks and (min(masks) <= 0 or max(masks) > full):
            bad = next(m for m in masks if m <= 0 or m > full)
            raise ContractViolation(f"focal mask {bad} outside the label space")
        neg = np.flatnonzero(~(vals >= 0.0))
        if neg.size:
            raise ContractViolation(f"negative mass {vals[neg[0]]} on {masks[neg[0]]}")
        total = float(vals.sum())
        if abs(total - 1.0) > MASS_TOL:
            raise ContractViolation(f"masses sum to {total!r}, expected 1")
        object.__setattr__(self, "focal", dict(sorted(self.focal.items())))

    @classmethod
    def from_pairs(cls, space: LabelSpace, pairs: Iterable[tuple[int, float]] | Mapping[int, float],
                   normalize: bool = True) -> "MassFunction":
        acc: dict[int, float] = {}
        if isinstance(pairs, Mapping):
            acc = dict(zip(map(int, pairs.keys()), map(float, pairs.values())))
            if len(acc) != len(pairs):
                # distinct keys collapsing under int(), e.g. numpy and python ints
                acc, pairs = {}, list(pairs.items())
            else:
                pairs = ()
        for mask, mass in pairs:
            acc[int(mask)] = acc.get(int(mask), 0.0) + float(mass)
        acc = {k: v for k, v in acc.items() if v >= DROP_BELOW}
        if normalize:
            total = sum(acc.values())
            if total <= 0.0:
                raise DegenerateInputError("mass function has zero total mass")
            acc = {k: v / total for k, v in acc.items()}
        return cls(space, acc)

    @classmethod
    def bayesian(cls, probs: Sequence[float]) -> "MassFunction":
        space = LabelSpace(len(probs))
        return cls.from_pairs(space, ((1 << i, p) for i, p in enumerate(probs)))

    @classmethod
    def vacuous(cls, space: LabelSpace) -> "MassFunction":
        return cls(space, {space.full: 1.0})

    def __eq__(self, other):
        if not isinstance(other, MassFunction):
            return NotImplemented
        return self.space == other.space and self.focal == other.focal

    def __getitem__(self, mask: int) -> float:
        return self.focal.get(mask, 0.0)

    def __len__(self):
        return len(self.focal)

    @cached_property
    def masks(self) -> tuple[int, ...]:
        return tuple(self.focal)

    @cached_property
    def masses(self) -> np.ndarray:
        return np.fromiter(self.focal.values(), dtype=float, count=len(self.focal))

    @cached_property
    def membership(self) -> np.ndarray:
        return membership_matrix(self.masks, self.space.num_classes)

    @cached_property
    def sizes(self) -> np.ndarray:
        return self.membership.sum(axis=1).astype(float)

    @property
    def is_bayesian(self) -> bool:
        return all(cardinality(m) == 1 for m in self.focal)

    def is_close(self, other: "MassFunction", tol: float = MASS_TOL) -> bool:
        keys = set(self.focal) | set(other.focal)
        return all(abs(self[k] - other[k]) <= tol for k in keys)


@dataclass(frozen=True, eq=False)
class LowerProbability:
    """Lower probability defined on a family of subsets.

    ``values`` maps subset masks to lower bounds; the empty set is implicit.
    ``family`` defaults to the keys of ``values``. A family listing subsets
    with no value is structurally inconsistent and rejected by
    :func:`mobius_inverse`.
    """

    space: LabelSpace
    values: Mapping[int, float]
    family: tuple[int, ...] | None = None

    def __post_init__(self):
        vals = dict(zip(map(int, self.values.keys()), map(float, self.values.values())))
        if vals.pop(0, 0.0) != 0.0:
            raise ContractViolation("lower probability of the empty set must be 0")
        masks = list(vals)
        if masks and (min(masks) < 0 or max(masks) > self.space.full):
            bad = next(m for m in masks if not self.space.contains(m))
            raise ContractViolation(f"subset {bad} outside the label space")
        arr = np.fromiter(vals.values(), dtype=float, count=len(masks))
        out = np.flatnonzero(~((arr >= -MASS_TOL) & (arr <= 1.0 + MASS_TOL)))
        if out.size:
            raise ContractViolation(f"lower probability {arr[out[0]]} of {masks[out[0]]} outside [0, 1]")
        if self.space.full in vals and abs(vals[self.space.full] - 1.0) > MASS_TOL:
            raise ContractViolation("lower probability of the whole label space must be 1")
        object.__setattr__(self, "values", vals)
        fam = tuple(sorted(vals)) if self.family is None else tuple(sorted(set(self.family) - {0}))
        object.__setattr__(self, "family", fam)

    def __getitem__(self, mask: int) -> float:
        if mask == 0:
            return 0.0
        return self.values[mask]

    @property
    def is_full(self) -> bool:
        return len(self.family) == self.space.size - 1

    def is_monotone(self, tol: float = MASS_TOL) -> bool:
        masks = list(self.values)
        vals = np.array([self.values[m] for m in masks])
        mem = membership_matrix(masks, self.space.num_classes).astype(float)
        # sub[i, j]: subset i is contained in subset j
        sub = (mem @ (1.0 - mem).T) == 0
        viol = sub & (vals[:, None] > vals[None, :] + tol)
        return not viol.any()


def belief(m: MassFunction, a: int) -> float:
    return float(sum(v for b, v in m.focal.items() if b & ~a == 0))


def plausibility(m: MassFunction, a: int) -> float:
    return float(sum(v for b, v in m.focal.items() if b & a))


def commonality(m: MassFunction, a: int) -> float:
    if a == 0:
        raise ContractViolation("commonality is undefined for the empty set")
    return float(sum(v for b, v in m.focal.items() if b & a == a))


def singleton_plausibilities(m: MassFunction) -> np.ndarray:
    return m.masses @ m.membership


def singleton_beliefs(m: MassFunction) -> np.ndarray:
    out = np.zeros(m.space.num_classes)
    for mask, v in m.focal.items():
        if cardinality(mask) == 1:
            out[mask.bit_length() - 1] += v
    return out


def pignistic(m: MassFunction) -> np.ndarray:
    """Pignistic transform: each focal mass split evenly among its members."""
    return (m.masses / m.sizes) @ m.membership


def mobius_dense(values: np.ndarray) -> np.ndarray:
    """In-place-free Möbius inverse of a set function stored densely by mask."""
    f = np.array(values, dtype=float)
    size = f.shape[0]
    step = 1
    while step < size:
        view = f.reshape(-1, 2, step)
        view[:, 1, :] -= view[:, 0, :]
        step <<= 1
    return f


def zeta_dense(masses: np.ndarray) -> np.ndarray:
    """Inverse of :func:`mobius_dense`: g(A) = sum over B subset of A of f(B)."""
    f = np.array(masses, dtype=float)
    size = f.shape[0]
    step = 1
    while step < size:
        view = f.reshape(-1, 2, step)
        view[:, 1, :] += view[:, 0, :]
        step <<= 1
    return f


@lru_cache(maxsize=64)
def _inclusion_system(family: tuple[int, ...], n: int) -> np.ndarray:
    # unit lower-triangular: row A has ones at every B in family with B subset of A
    mem = membership_matrix(family, n).astype(float)
    return ((mem @ (1.0 - mem).T) == 0).T.astype(float)


def _order_family(family: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(family, key=lambda m: (cardinality(m), m)))


def raw_mobius(lp: LowerProbability) -> dict[int, float]:
    """Möbius inverse before clamping.

    Full families use the alternating-sum transform. Budgeted families solve
    m(A) = P(A) - sum_{B strict subset of A, B in family} m(B) by increasing
    cardinality; the whole space closes the family with value 1 when absent.
    """
    space = lp.space
    missing = [a for a in lp.family if a not in lp.values]
    if missing:
        raise StructuralError(f"family lists subsets without lower probability: {missing[:5]}")
    if lp.is_full and space.num_classes <= DENSE_MAX_CLASSES:
        dense = np.zeros(space.size)
        keys = np.fromiter(lp.values.keys(), dtype=np.int64, count=len(lp.values))
        dense[keys] = np.fromiter(lp.values.values(), dtype=float, count=len(keys))
        m = mobius_dense(dense)
        m[0] = 0.0
        nz = np.flatnonzero(m)
        return dict(zip(nz.tolist(), m[nz].tolist()))
    fam = set(lp.family)
    fam.add(space.full)
    order = _order_family(fam)
    vals = np.array([lp.values.get(a, 1.0) if a == space.full else lp.values[a] for a in order])
    z = _inclusion_system(order, space.num_classes)
    m = solve_triangular(z, vals, lower=True, unit_diagonal=True, check_finite=False)
    return dict(zip(order, m.tolist()))


def clamp_masses(raw: Mapping[int, float], space: LabelSpace) -> MassFunction:
    kept = {k: v for k, v in raw.items() if v > 0.0}
    total = sum(kept.values())
    if total <= 0.0:
        raise DegenerateInputError("all masses are non-positive after clamping")
    return MassFunction.from_pairs(space, {k: v / total for k, v in kept.items()})


def mobius_inverse(lp: LowerProbability) -> MassFunction:
    """Mass function of a lower probability; negative masses clamped, then renormalized."""
    return clamp_masses(raw_mobius(lp), lp.space)


def lower_probability_of(m: MassFunction, family: Iterable[int] | None = None) -> LowerProbability:
    """Belief function of ``m`` restricted to ``family`` (full powerset by default)."""
    space = m.space
    if family is None:
        if space.num_classes > DENSE_MAX_CLASSES:
            raise ContractViolation("pass an explicit family beyond the dense limit")
        dense = np.zeros(space.size)
        for mask, v in m.focal.items():
            dense[mask] = v
        bel = zeta_dense(dense)
        return LowerProbability(space, {k: float(bel[k]) for k in range(1, space.size)})
    return LowerProbability(space, {a: belief(m, a) for a in family})
