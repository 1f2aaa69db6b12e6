"""File formats: manifests, prediction streams, labels and result files.

Everything is JSON. A manifest is one JSON document; prediction and result
files are JSON Lines (one object per line) so they can be streamed.

Manifest::

    {"models": [{"model_id": "DE", "encoding": "samples", "num_classes": 10,
                 "predictions_path": "de.jsonl", "budget": 30, "num_samples": 15}]}

Predictions file: a header line followed by one record per instance, in
ascending ``id`` order::

    {"format": "credal-eval/predictions", "encoding": "samples", "num_classes": 10}
    {"id": 0, "samples": [[0.7, 0.3], [0.4, 0.6]]}

Record bodies per encoding: ``"p": [...]`` (point), ``"samples": [[...], ...]``,
``"lower": [...], "upper": [...]`` (intervals), and ``"focal": [[mask, mass], ...]``
(masses, bit i of ``mask`` set iff class i is in the focal set).

Labels file: one integer class index per line; line k (0-based) labels instance k.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .credal import SAMPLE_SUM_TOL, IntervalPrediction, SampleSet
from .errors import CredalError, LoadError, RowError
from .evaluator import (
    EvaluationRecord,
    MetricStats,
    ModelSummary,
    RankEntry,
    RankingRow,
    SplitStats,
)
from .records import ENCODINGS, INTERVALS, MASSES, POINT, SAMPLES, PredictionRecord
from .setfn import DENSE_MAX_CLASSES, LabelSpace, MassFunction, cardinality

log = logging.getLogger(__name__)

PREDICTIONS_FORMAT = "credal-eval/predictions"
MASS_MAX_CLASSES = 64
SIG_DIGITS = 6

SUMMARIES_FILE = "summaries.jsonl"
RANKINGS_FILE = "rankings.jsonl"
PER_INSTANCE_FILE = "per_instance.jsonl"


@dataclass(frozen=True)
class ModelManifest:
    model_id: str
    encoding: str
    num_classes: int
    predictions_path: Path
    budget: int | None = None
    num_samples: int | None = None


def _entry_error(i: int, entry, msg: str) -> LoadError:
    name = entry.get("model_id", f"#{i}") if isinstance(entry, dict) else f"#{i}"
    return LoadError(f"manifest entry {name}: {msg}")


def load_manifest(path: str | os.PathLike) -> list[ModelManifest]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise LoadError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise LoadError(f"manifest {path} is not valid JSON: {exc}") from exc
    models = doc.get("models") if isinstance(doc, dict) else None
    if not isinstance(models, list) or not models:
        raise LoadError(f"manifest {path} needs a non-empty top-level 'models' list")
    out, seen = [], set()
    for i, entry in enumerate(models):
        if not isinstance(entry, dict):
            raise _entry_error(i, entry, "not an object")
        for key in ("model_id", "encoding", "num_classes", "predictions_path"):
            if key not in entry:
                raise _entry_error(i, entry, f"missing field '{key}'")
        mid = str(entry["model_id"])
        if mid in seen:
            raise _entry_error(i, entry, "duplicate model_id")
        seen.add(mid)
        enc = entry["encoding"]
        if enc not in ENCODINGS:
            raise _entry_error(i, entry, f"unknown encoding {enc!r}")
        n = entry["num_classes"]
        if not isinstance(n, int) or n < 2:
            raise _entry_error(i, entry, "num_classes must be an integer >= 2")
        if enc == MASSES and n > MASS_MAX_CLASSES:
            raise _entry_error(i, entry, f"mass files support at most {MASS_MAX_CLASSES} classes")
        if enc == INTERVALS and n > DENSE_MAX_CLASSES:
            raise _entry_error(i, entry, f"interval predictions support at most {DENSE_MAX_CLASSES} classes")
        budget = entry.get("budget")
        if budget is not None and (not isinstance(budget, int) or budget < n + 1):
            raise _entry_error(i, entry, f"budget must be an integer >= num_classes + 1 = {n + 1}")
        k = entry.get("num_samples")
        if k is not None and (not isinstance(k, int) or k < 1):
            raise _entry_error(i, entry, "num_samples must be a positive integer")
        pred_path = Path(entry["predictions_path"])
        if not pred_path.is_absolute():
            pred_path = path.parent / pred_path
        if not pred_path.is_file():
            raise _entry_error(i, entry, f"predictions file {pred_path} not readable")
        out.append(ModelManifest(mid, enc, n, pred_path, budget, k))
    return out


def read_header(path: Path) -> dict:
    with open(path) as fh:
        first = fh.readline()
    try:
        header = json.loads(first)
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: header line is not valid JSON") from exc
    if not isinstance(header, dict) or header.get("format") != PREDICTIONS_FORMAT:
        raise LoadError(f"{path}: missing '{PREDICTIONS_FORMAT}' header line")
    return header


def check_header(manifest: ModelManifest) -> dict:
    header = read_header(manifest.predictions_path)
    where = f"{manifest.model_id} ({manifest.predictions_path.name})"
    if header.get("encoding") != manifest.encoding:
        raise LoadError(f"{where}: header encoding {header.get('encoding')!r} != manifest {manifest.encoding!r}")
    if header.get("num_classes") != manifest.num_classes:
        raise LoadError(f"{where}: header num_classes {header.get('num_classes')} != manifest {manifest.num_classes}")
    k = header.get("num_samples")
    if manifest.num_samples is not None and k is not None and k != manifest.num_samples:
        raise LoadError(f"{where}: header num_samples {k} != manifest {manifest.num_samples}")
    return header


def _vector(row: int, obj, key: str, n: int) -> np.ndarray:
    try:
        arr = np.asarray(obj[key], dtype=float)
    except (KeyError, TypeError, ValueError):
        raise RowError(row, f"missing or non-numeric '{key}'") from None
    if arr.shape[-1:] != (n,) or not np.isfinite(arr).all():
        raise RowError(row, f"'{key}' must hold finite vectors of length {n}")
    return arr


def _probabilities(row: int, arr: np.ndarray) -> None:
    if (arr < 0).any():
        raise RowError(row, "negative probability")
    sums = np.atleast_1d(arr.sum(axis=-1))
    bad = np.abs(sums - 1.0) > SAMPLE_SUM_TOL
    if bad.any():
        raise RowError(row, f"probabilities sum to {sums[bad][0]:.9g}, not 1")


def parse_record(row: int, obj: dict, manifest: ModelManifest, space: LabelSpace) -> PredictionRecord:
    n = space.num_classes
    iid = obj.get("id")
    if not isinstance(iid, int) or iid < 0:
        raise RowError(row, "record needs a nonnegative integer 'id'")
    enc = manifest.encoding
    try:
        if enc == POINT:
            p = _vector(row, obj, "p", n)
            if p.ndim != 1:
                raise RowError(row, "'p' must be a single vector")
            _probabilities(row, p)
            payload = p
        elif enc == SAMPLES:
            s = _vector(row, obj, "samples", n)
            if s.ndim != 2 or s.shape[0] < 1:
                raise RowError(row, "'samples' must be a non-empty K x N matrix")
            if manifest.num_samples is not None and s.shape[0] != manifest.num_samples:
                raise RowError(row, f"expected {manifest.num_samples} samples, got {s.shape[0]}")
            _probabilities(row, s)
            payload = SampleSet(space, s)
        elif enc == INTERVALS:
            lo = _vector(row, obj, "lower", n)
            hi = _vector(row, obj, "upper", n)
            if lo.ndim != 1 or hi.ndim != 1:
                raise RowError(row, "interval bounds must be vectors")
            if (lo > hi).any():
                raise RowError(row, "lower bound exceeds upper bound")
            payload = IntervalPrediction(space, lo, hi)
        else:
            focal = obj.get("focal")
            if not isinstance(focal, list) or not focal:
                raise RowError(row, "'focal' must be a non-empty list of [mask, mass] pairs")
            pairs = []
            for item in focal:
                if not (isinstance(item, list) and len(item) == 2 and isinstance(item[0], int)):
                    raise RowError(row, f"bad focal entry {item!r}")
                mask, mass = item[0], float(item[1])
                if mask <= 0 or mask >= 1 << n:
                    raise RowError(row, f"focal mask {mask} outside 1..2^{n}-1")
                if not math.isfinite(mass) or mass < 0:
                    raise RowError(row, f"invalid mass {mass}")
                pairs.append((mask, mass))
            total = sum(m for _, m in pairs)
            if abs(total - 1.0) > SAMPLE_SUM_TOL:
                raise RowError(row, f"masses sum to {total:.9g}, not 1")
            payload = MassFunction.from_pairs(space, pairs)
    except RowError as exc:
        exc.instance_id = iid
        raise
    except CredalError as exc:
        raise RowError(row, str(exc), iid) from exc
    return PredictionRecord(iid, enc, payload)


def load_predictions(manifest: ModelManifest,
                     on_error: Callable[[RowError], None] | None = None) -> Iterator[PredictionRecord]:
    """Stream records from a predictions file, one line at a time.

    Bad rows raise :class:`RowError` unless ``on_error`` is given, in which
    case it is called and the row skipped. Row numbers are 1-based file lines.
    """
    check_header(manifest)
    space = LabelSpace(manifest.num_classes)
    last = -1
    missing_singletons = 0
    with open(manifest.predictions_path) as fh:
        fh.readline()
        for row, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise RowError(row, f"invalid JSON: {exc.msg}") from None
                if not isinstance(obj, dict):
                    raise RowError(row, "record is not an object")
                rec = parse_record(row, obj, manifest, space)
                if rec.instance_id <= last:
                    raise RowError(row, f"instance id {rec.instance_id} not ascending", rec.instance_id)
            except RowError as exc:
                if on_error is None:
                    raise
                on_error(exc)
                continue
            last = rec.instance_id
            if rec.encoding == MASSES and sum(cardinality(k) == 1 for k in rec.payload.focal) < space.num_classes:
                missing_singletons += 1
            yield rec
    if missing_singletons:
        log.warning("%s: %d mass record(s) do not list every singleton as a focal set",
                    manifest.model_id, missing_singletons)


def iter_with_errors(manifest: ModelManifest) -> Iterator[PredictionRecord | RowError]:
    """Like :func:`load_predictions` but yields bad rows as :class:`RowError` values in place."""
    pending: list[RowError] = []
    for rec in load_predictions(manifest, on_error=pending.append):
        while pending:
            yield pending.pop(0)
        yield rec
    yield from pending


def read_labels(path: str | os.PathLike) -> list[int]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise LoadError(f"cannot read labels {path}: {exc}") from exc
    while lines and not lines[-1].strip():
        lines.pop()
    labels = []
    for i, line in enumerate(lines, start=1):
        try:
            v = int(line.strip())
        except ValueError:
            raise LoadError(f"{path}:{i}: not an integer class index: {line!r}") from None
        if v < 0:
            raise LoadError(f"{path}:{i}: negative class index")
        labels.append(v)
    if not labels:
        raise LoadError(f"labels file {path} is empty")
    return labels


# -- results ---------------------------------------------------------------

def _sig(x):
    if x is None or isinstance(x, (bool, int, str)):
        return x
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def _round_tree(obj):
    if isinstance(obj, dict):
        return {k: _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v) for v in obj]
    return _sig(obj)


def _dumps(obj) -> str:
    return json.dumps(_round_tree(obj), separators=(", ", ": "), allow_nan=False)


def summary_to_dict(s: ModelSummary) -> dict:
    d = asdict(s)
    d["lambda"] = d.pop("lam")
    return d


def _split_from(d: dict) -> SplitStats:
    return SplitStats(d["count"], MetricStats(**d["d"]), MetricStats(**d["ns"]), MetricStats(**d["e"]))


def summary_from_dict(d: dict) -> ModelSummary:
    return ModelSummary(
        model_id=d["model_id"],
        overall=_split_from(d["overall"]),
        cc=_split_from(d["cc"]),
        icc=_split_from(d["icc"]),
        accuracy=d["accuracy"],
        ece=d["ece"],
        n_failed=d["n_failed"],
        lam=d["lambda"],
        divergence=d["divergence"],
        ns_kind=d["ns_kind"],
    )


def rounded_summary(s: ModelSummary) -> ModelSummary:
    """The summary as it reads back after serialization."""
    return summary_from_dict(_round_tree(summary_to_dict(s)))


def ranking_to_dict(r: RankingRow) -> dict:
    return {"lambda": r.lam, "ranking": [asdict(e) for e in r.entries]}


def ranking_from_dict(d: dict) -> RankingRow:
    return RankingRow(d["lambda"], tuple(RankEntry(**e) for e in d["ranking"]))


def record_to_dict(model_id: str, r: EvaluationRecord) -> dict:
    return {
        "model": model_id,
        "instance": r.instance_id,
        "d": r.d,
        "NS": r.ns,
        "E": r.e,
        "correct": r.correct,
        "true_class": r.true_class,
        "predicted_class": r.predicted_class,
        "nearest_vertex": r.nearest_vertex_index,
        "credal_width": r.credal_width,
        "confidence": r.confidence,
    }


def write_results(summaries: Sequence[ModelSummary], rankings: Sequence[RankingRow],
                  per_instance: Iterable[tuple[str, EvaluationRecord]] | None,
                  out_dir: str | os.PathLike) -> list[Path]:
    """Write summaries, rankings and (when given) per-instance records; returns the paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / SUMMARIES_FILE, out / RANKINGS_FILE]
        with open(paths[0], "w") as fh:
            for s in summaries:
                fh.write(_dumps(summary_to_dict(s)) + "\n")
        with open(paths[1], "w") as fh:
            for r in rankings:
                fh.write(_dumps(ranking_to_dict(r)) + "\n")
        if per_instance is not None:
            paths.append(out / PER_INSTANCE_FILE)
            with open(paths[2], "w") as fh:
                for model_id, rec in per_instance:
                    fh.write(_dumps(record_to_dict(model_id, rec)) + "\n")
    except OSError as exc:
        raise LoadError(f"cannot write results to {out}: {exc}") from exc
    return paths


def _read_jsonl(path: Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def read_summaries(path: str | os.PathLike) -> list[ModelSummary]:
    return [summary_from_dict(d) for d in _read_jsonl(Path(path))]


def read_rankings(path: str | os.PathLike) -> list[RankingRow]:
    return [ranking_from_dict(d) for d in _read_jsonl(Path(path))]


def read_per_instance(path: str | os.PathLike) -> list[dict]:
    return _read_jsonl(Path(path))


def write_predictions(path: str | os.PathLike, encoding: str, num_classes: int,
                      records: Iterable[tuple[int, object]], num_samples: int | None = None) -> Path:
    """Write a predictions file. ``records`` yields ``(id, body)``; body follows the encoding.

    Bodies: point -> vector, samples -> K x N matrix, intervals -> (lower, upper),
    masses -> iterable of (mask, mass), a mapping, or a :class:`MassFunction`.
    """
    if encoding not in ENCODINGS:
        raise LoadError(f"unknown encoding {encoding!r}")
    path = Path(path)
    header = {"format": PREDICTIONS_FORMAT, "encoding": encoding, "num_classes": num_classes}
    if num_samples is not None:
        header["num_samples"] = num_samples
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for iid, body in records:
            if encoding == POINT:
                obj = {"id": iid, "p": np.asarray(body, float).tolist()}
            elif encoding == SAMPLES:
                obj = {"id": iid, "samples": np.asarray(body, float).tolist()}
            elif encoding == INTERVALS:
                lo, hi = body
                obj = {"id": iid, "lower": np.asarray(lo, float).tolist(), "upper": np.asarray(hi, float).tolist()}
            else:
                if isinstance(body, MassFunction):
                    body = body.focal
                pairs = body.items() if isinstance(body, Mapping) else body
                obj = {"id": iid, "focal": [[int(k), float(v)] for k, v in pairs]}
            fh.write(json.dumps(obj) + "\n")
    return path


def write_manifest(path: str | os.PathLike, manifests: Iterable[dict]) -> Path:
    path = Path(path)
    path.write_text(json.dumps({"models": list(manifests)}, indent=2) + "\n")
    return path


def write_labels(path: str | os.PathLike, labels: Iterable[int]) -> Path:
    path = Path(path)
    path.write_text("".join(f"{int(y)}\n" for y in labels))
    return path
