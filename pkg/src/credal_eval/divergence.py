"""Distances between a one-hot ground truth and a credal prediction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .credal import CredalVertices
from .errors import ContractViolation
from .setfn import LabelSpace

EPS = 1e-12
KL = "kl"
JS = "js"


@dataclass(frozen=True)
class GroundTruth:
    space: LabelSpace
    true_class: int

    def __post_init__(self):
        if not 0 <= self.true_class < self.space.num_classes:
            raise ContractViolation(f"true class {self.true_class} outside the label space")

    @property
    def one_hot(self) -> np.ndarray:
        out = np.zeros(self.space.num_classes)
        out[self.true_class] = 1.0
        return out


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1] != q.shape[-1]:
        raise ContractViolation(f"length mismatch: {p.shape[-1]} vs {q.shape[-1]}")
    return p, q


def _kl_rows(p: np.ndarray, q: np.ndarray, eps: float, base: float) -> np.ndarray:
    q = np.maximum(q, eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(np.where(p > 0, p, 1.0)) - np.log(q)), 0.0)
    out = terms.sum(axis=-1)
    if base != math.e:
        out = out / math.log(base)
    return np.maximum(out, 0.0)


def kl_divergence(p: Sequence[float], q: Sequence[float], eps: float = EPS, base: float = math.e) -> float:
    """KL(p || q) with 0 log 0 = 0 and q floored at ``eps``."""
    p, q = _pair(p, q)
    return float(_kl_rows(p, q, eps, base))


def _js_rows(p: np.ndarray, q: np.ndarray, eps: float, base: float) -> np.ndarray:
    mid = 0.5 * (p + q)
    return 0.5 * _kl_rows(p, mid, eps, base) + 0.5 * _kl_rows(q, mid, eps, base)


def js_divergence(p: Sequence[float], q: Sequence[float], eps: float = EPS, base: float = math.e) -> float:
    p, q = _pair(p, q)
    return float(_js_rows(p, q, eps, base))


def divergences_to_rows(target: np.ndarray, rows: np.ndarray, kind: str = KL,
                        eps: float = EPS, base: float = math.e) -> np.ndarray:
    """Divergence from ``target`` to every row of ``rows``."""
    target, rows = _pair(target, np.atleast_2d(rows))
    t = np.broadcast_to(target, rows.shape)
    if kind == KL:
        return _kl_rows(t, rows, eps, base)
    if kind == JS:
        return _js_rows(t, rows, eps, base)
    raise ContractViolation(f"unknown divergence {kind!r}")


def min_divergence_to_vertices(y: GroundTruth, v: CredalVertices, kind: str = KL,
                               eps: float = EPS, base: float = math.e) -> tuple[float, int]:
    """Smallest divergence from the one-hot truth to any vertex, and the first vertex attaining it."""
    d = divergences_to_rows(y.one_hot, v.vertices, kind, eps, base)
    idx = int(np.argmin(d))
    return float(d[idx]), idx


def js_lambda_scale(kl_values: Iterable[float], js_values: Iterable[float]) -> float:
    """Ratio of the largest observed KL to the largest observed JS.

    Divide a KL-calibrated trade-off by this factor to use it with JS.
    """
    kl_values, js_values = list(kl_values), list(js_values)
    if not kl_values or not js_values:
        raise ContractViolation("need at least one KL and one JS value")
    kl_max = max(kl_values)
    js_max = max(js_values)
    if js_max <= 0:
        raise ContractViolation("largest JS divergence must be positive")
    return float(kl_max / js_max)
