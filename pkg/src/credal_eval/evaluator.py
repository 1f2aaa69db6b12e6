"""Per-instance scoring, test-set aggregation and model ranking.

Each instance is scored as E = d + lambda * NS, where d is the divergence
from the one-hot truth to the nearest credal vertex and NS measures the
imprecision of the prediction. Point predictions have NS = 0, so E
reduces to the plain divergence for them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import credal, uncertainty
from .credal import CredalVertices, IntervalPrediction
from .divergence import EPS, JS, KL, GroundTruth, min_divergence_to_vertices
from .errors import ContractViolation, CredalError
from .records import INTERVALS, MASSES, POINT, SAMPLES, PredictionRecord
from .setfn import MassFunction, mobius_inverse, pignistic, singleton_beliefs, singleton_plausibilities

log = logging.getLogger(__name__)

ECE_BINS = 15
DEFAULT_LAMBDAS = tuple(round(0.1 * i, 10) for i in range(1, 11))
VERTEX_MODES = ("auto", "exact", "approximate")


@dataclass(frozen=True)
class EvalConfig:
    lam: float = 1.0
    divergence: str = KL
    ns_kind: str = uncertainty.DUBOIS
    vertex_mode: str = "auto"
    log_base: float = math.e
    epsilon: float = EPS

    def __post_init__(self):
        if not self.lam >= 0:
            raise ContractViolation(f"lambda must be nonnegative, got {self.lam}")
        if self.divergence not in (KL, JS):
            raise ContractViolation(f"unknown divergence {self.divergence!r}")
        if self.ns_kind not in uncertainty.NS_KINDS:
            raise ContractViolation(f"unknown non-specificity measure {self.ns_kind!r}")
        if self.vertex_mode == "approx":
            object.__setattr__(self, "vertex_mode", "approximate")
        if self.vertex_mode not in VERTEX_MODES:
            raise ContractViolation(f"unknown vertex mode {self.vertex_mode!r}")
        if not self.log_base > 1:
            raise ContractViolation("log base must exceed 1")
        if not 0 < self.epsilon <= 1e-6:
            raise ContractViolation("epsilon must lie in (0, 1e-6]")


@dataclass(frozen=True)
class EvaluationRecord:
    instance_id: int
    d: float
    ns: float
    e: float
    correct: bool
    predicted_class: int
    true_class: int
    nearest_vertex_index: int
    credal_width: float
    confidence: float


def predicted_class(pred: PredictionRecord) -> int:
    return int(np.argmax(point_summary(pred)))


def point_summary(pred: PredictionRecord) -> np.ndarray:
    """Single probability vector standing in for the prediction (argmax ties go to the lowest index)."""
    enc, payload = pred.encoding, pred.payload
    if enc == POINT:
        return np.asarray(payload, dtype=float)
    if enc == SAMPLES:
        return payload.mean()
    if enc == MASSES:
        return pignistic(payload)
    if enc == INTERVALS:
        return payload.midpoint()
    raise ContractViolation(f"unknown encoding {enc!r}")


@dataclass
class _Credal:
    vertices: CredalVertices
    ns: float


def _intervals_of_mass(m: MassFunction) -> IntervalPrediction:
    return IntervalPrediction(m.space, singleton_beliefs(m), np.minimum(singleton_plausibilities(m), 1.0))


def _credal_view(pred: PredictionRecord, cfg: EvalConfig, family=None) -> _Credal:
    enc, payload = pred.encoding, pred.payload
    base = cfg.log_base
    if enc == POINT:
        return _Credal(credal.point_vertices(payload), 0.0)
    if enc == SAMPLES:
        m = mobius_inverse(credal.lower_prob_from_samples(payload, family))
        if cfg.ns_kind == uncertainty.CREDAL_UNCERTAINTY:
            ns = uncertainty.credal_uncertainty(credal.intervals_from_samples(payload), base)
        else:
            ns = uncertainty.nonspecificity(m, cfg.ns_kind, base)
        return _Credal(credal.vertices(m, cfg.vertex_mode), ns)
    if enc == INTERVALS:
        m = credal.mass_from_intervals(payload)
        if cfg.ns_kind == uncertainty.CREDAL_UNCERTAINTY:
            ns = uncertainty.credal_uncertainty(payload, base)
        else:
            ns = uncertainty.nonspecificity(m, cfg.ns_kind, base)
        return _Credal(credal.vertices(m, cfg.vertex_mode), ns)
    if enc == MASSES:
        if cfg.ns_kind == uncertainty.CREDAL_UNCERTAINTY:
            ns = uncertainty.credal_uncertainty(_intervals_of_mass(payload), base)
        else:
            ns = uncertainty.nonspecificity(payload, cfg.ns_kind, base)
        return _Credal(credal.vertices(payload, cfg.vertex_mode), ns)
    raise ContractViolation(f"unknown encoding {enc!r}")


def evaluate_instance(pred: PredictionRecord, y: GroundTruth, cfg: EvalConfig,
                      family: Sequence[int] | None = None) -> EvaluationRecord:
    if pred.space.num_classes != y.space.num_classes:
        raise ContractViolation("prediction and ground truth live in different label spaces")
    view = _credal_view(pred, cfg, family)
    d, idx = min_divergence_to_vertices(y, view.vertices, cfg.divergence, cfg.epsilon, cfg.log_base)
    summary = point_summary(pred)
    pc = int(np.argmax(summary))
    return EvaluationRecord(
        instance_id=pred.instance_id,
        d=d,
        ns=view.ns,
        e=d + cfg.lam * view.ns,
        correct=pc == y.true_class,
        predicted_class=pc,
        true_class=y.true_class,
        nearest_vertex_index=idx,
        credal_width=credal.credal_width(view.vertices, pc),
        confidence=float(summary[pc]),
    )


def expected_calibration_error(confidences: Sequence[float], correct: Sequence[bool],
                               n_bins: int = ECE_BINS) -> float:
    """Binned ECE over equal-width, right-inclusive confidence bins."""
    conf = np.asarray(confidences, dtype=float)
    hit = np.asarray(correct, dtype=float)
    if conf.shape != hit.shape:
        raise ContractViolation("confidences and correctness differ in length")
    if conf.size == 0:
        return 0.0
    tracker = _CalibrationBins(n_bins)
    for c, h in zip(conf, hit):
        tracker.add(c, h)
    return tracker.ece()


def _bin_index(conf: float, n_bins: int) -> int:
    return min(max(int(math.ceil(conf * n_bins)) - 1, 0), n_bins - 1)


class _CalibrationBins:
    def __init__(self, n_bins: int = ECE_BINS):
        self.n_bins = n_bins
        self.count = np.zeros(n_bins)
        self.conf = np.zeros(n_bins)
        self.hits = np.zeros(n_bins)

    def add(self, conf: float, hit: float) -> None:
        b = _bin_index(conf, self.n_bins)
        self.count[b] += 1
        self.conf[b] += conf
        self.hits[b] += hit

    def ece(self) -> float:
        total = self.count.sum()
        if total == 0:
            return 0.0
        occ = self.count > 0
        gap = np.abs(self.hits[occ] - self.conf[occ]) / self.count[occ]
        return float((self.count[occ] / total) @ gap)


@dataclass
class MetricStats:
    mean: float | None = None
    std: float | None = None


@dataclass
class SplitStats:
    count: int = 0
    d: MetricStats = field(default_factory=MetricStats)
    ns: MetricStats = field(default_factory=MetricStats)
    e: MetricStats = field(default_factory=MetricStats)


@dataclass
class ModelSummary:
    model_id: str
    overall: SplitStats
    cc: SplitStats
    icc: SplitStats
    accuracy: float
    ece: float
    n_failed: int = 0
    lam: float = 1.0
    divergence: str = KL
    ns_kind: str = uncertainty.DUBOIS

    @property
    def count(self) -> int:
        return self.overall.count

    def e_at(self, lam: float) -> float:
        return self.overall.d.mean + lam * self.overall.ns.mean


class _Welford:
    __slots__ = ("n", "mean", "m2")

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def stats(self) -> MetricStats:
        if self.n == 0:
            return MetricStats()
        return MetricStats(self.mean, math.sqrt(max(self.m2 / self.n, 0.0)))


class Aggregator:
    """Streaming accumulator for one model's evaluation records.

    Memory use does not grow with the number of instances.
    """

    def __init__(self, model_id: str, cfg: EvalConfig | None = None):
        self.model_id = model_id
        self.cfg = cfg or EvalConfig()
        self.splits = {name: {k: _Welford() for k in ("d", "ns", "e")} for name in ("overall", "cc", "icc")}
        self.bins = _CalibrationBins()
        self.n_failed = 0

    def add(self, r: EvaluationRecord) -> None:
        for name in ("overall", "cc" if r.correct else "icc"):
            acc = self.splits[name]
            acc["d"].add(r.d)
            acc["ns"].add(r.ns)
            acc["e"].add(r.e)
        self.bins.add(r.confidence, float(r.correct))

    def fail(self) -> None:
        self.n_failed += 1

    def _split(self, name: str) -> SplitStats:
        acc = self.splits[name]
        return SplitStats(acc["d"].n, acc["d"].stats(), acc["ns"].stats(), acc["e"].stats())

    def summary(self) -> ModelSummary:
        overall = self._split("overall")
        if overall.count == 0:
            raise ContractViolation(f"model {self.model_id!r} has no successfully evaluated instances")
        cc = self._split("cc")
        return ModelSummary(
            model_id=self.model_id,
            overall=overall,
            cc=cc,
            icc=self._split("icc"),
            accuracy=cc.count / overall.count,
            ece=self.bins.ece(),
            n_failed=self.n_failed,
            lam=self.cfg.lam,
            divergence=self.cfg.divergence,
            ns_kind=self.cfg.ns_kind,
        )


def aggregate(records: Iterable[EvaluationRecord], model_id: str = "model",
              cfg: EvalConfig | None = None) -> ModelSummary:
    agg = Aggregator(model_id, cfg)
    for r in records:
        agg.add(r)
    return agg.summary()


@dataclass(frozen=True)
class RankEntry:
    rank: int
    model_id: str
    e_mean: float
    d_mean: float
    ns_mean: float


@dataclass(frozen=True)
class RankingRow:
    lam: float
    entries: tuple[RankEntry, ...]

    @property
    def order(self) -> list[str]:
        return [e.model_id for e in self.entries]

    @property
    def values(self) -> list[float]:
        return [e.e_mean for e in self.entries]


def rank_models(summaries: Sequence[ModelSummary], lambdas: Iterable[float] = DEFAULT_LAMBDAS) -> list[RankingRow]:
    """Order models by mean d + lambda * mean NS for each lambda, lowest first."""
    summaries = list(summaries)
    kinds = {(s.divergence, s.ns_kind) for s in summaries}
    if len(kinds) > 1:
        raise ContractViolation(f"summaries mix divergence/non-specificity settings: {sorted(kinds)}")
    rows = []
    for lam in lambdas:
        scored = sorted(((s.e_at(lam), s.model_id, s) for s in summaries), key=lambda t: (t[0], t[1]))
        entries = tuple(
            RankEntry(i + 1, mid, e, s.overall.d.mean, s.overall.ns.mean)
            for i, (e, mid, s) in enumerate(scored)
        )
        rows.append(RankingRow(float(lam), entries))
    return rows


@dataclass
class ModelRun:
    summary: ModelSummary
    records: list[EvaluationRecord]
    failures: list[tuple[int, str]]

    @property
    def failure_rate(self) -> float:
        total = self.summary.count + len(self.failures)
        return len(self.failures) / total if total else 0.0


def evaluate_stream(model_id: str, predictions: Iterable[PredictionRecord | CredalError],
                    labels: Sequence[int], cfg: EvalConfig, family: Sequence[int] | None = None,
                    keep_records: bool = False,
                    on_record: Callable[[EvaluationRecord], None] | None = None) -> ModelRun:
    """Score a stream of predictions; malformed or failing instances are quarantined.

    ``predictions`` may interleave :class:`CredalError` instances for rows the
    loader rejected; they count as failures.
    """
    agg = Aggregator(model_id, cfg)
    kept: list[EvaluationRecord] = []
    failures: list[tuple[int, str]] = []
    for item in predictions:
        if isinstance(item, CredalError):
            agg.fail()
            iid = getattr(item, "instance_id", None)
            failures.append((-1 if iid is None else iid, str(item)))
            continue
        try:
            if not 0 <= item.instance_id < len(labels):
                raise ContractViolation(f"no label for instance {item.instance_id}")
            y = GroundTruth(item.space, labels[item.instance_id])
            rec = evaluate_instance(item, y, cfg, family)
        except CredalError as exc:
            agg.fail()
            failures.append((item.instance_id, str(exc)))
            continue
        agg.add(rec)
        if keep_records:
            kept.append(rec)
        if on_record is not None:
            on_record(rec)
    if failures:
        log.warning("%s: %d instance(s) failed and were excluded", model_id, len(failures))
    return ModelRun(agg.summary(), kept, failures)

