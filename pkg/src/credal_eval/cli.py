"""Command-line entry point.

Choosing lambda: a small trade-off favours models whose credal sets reach
close to the truth even when they are wide (suits tasks where the system
may abstain); a large one penalizes imprecision and favours decisive
models (suits tasks where a decision is mandatory).

Exit codes: 0 success, 1 validation error, 2 per-instance failures above
``--max-failures``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import credal, uncertainty
from .credal import EXACT_MAX_CLASSES, BudgetSelector
from .divergence import GroundTruth, min_divergence_to_vertices
from .errors import CredalError, LoadError
from .evaluator import EvalConfig, ModelRun, evaluate_stream, point_summary, rank_models
from .io import (
    ModelManifest,
    iter_with_errors,
    load_manifest,
    load_predictions,
    read_labels,
    write_results,
)
from .oracle import self_test
from .records import INTERVALS, POINT, SAMPLES
from .setfn import (
    DENSE_MAX_CLASSES,
    LabelSpace,
    mobius_inverse,
    singleton_beliefs,
    singleton_plausibilities,
)

log = logging.getLogger("credal_eval")

EXIT_OK, EXIT_INVALID, EXIT_FAILURES = 0, 1, 2
NS_CHOICES = ("dubois", "smets", "korner", "cu")


def parse_lambdas(text: str) -> list[float]:
    """``start:stop:step`` inclusive of stop, or a comma-separated list."""
    if ":" not in text:
        vals = [float(t) for t in text.split(",") if t.strip()]
    else:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("expected start:stop:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise argparse.ArgumentTypeError("need step > 0 and stop >= start")
        count = int(round((stop - start) / step)) + 1
        vals = [round(start + i * step, 12) for i in range(count)]
    if not vals or min(vals) < 0:
        raise argparse.ArgumentTypeError("lambdas must be nonnegative")
    return vals


def family_for(mf: ModelManifest) -> list[int] | None:
    """Subset family for a samples model: full powerset, or a budgeted family from a first pass."""
    if mf.encoding != SAMPLES:
        return None
    budget = mf.budget
    if budget is None and mf.num_classes > DENSE_MAX_CLASSES:
        budget = 3 * mf.num_classes
        log.warning("%s: %d classes and no budget; using %d subsets", mf.model_id, mf.num_classes, budget)
    if budget is None:
        return None
    selector = BudgetSelector(LabelSpace(mf.num_classes), budget)
    for rec in load_predictions(mf, on_error=lambda exc: None):
        selector.update(rec.payload)
    return selector.family()


def run_models(manifests: Sequence[ModelManifest], labels: Sequence[int], cfg: EvalConfig,
               keep_records: bool = False) -> tuple[list[ModelRun], list[str]]:
    runs, problems = [], []
    top = max(labels)
    for mf in manifests:
        if top >= mf.num_classes:
            raise LoadError(f"{mf.model_id}: labels reference class {top} but the model has "
                            f"{mf.num_classes} classes")
        if cfg.vertex_mode == "exact" and mf.encoding != POINT and mf.num_classes > EXACT_MAX_CLASSES:
            raise LoadError(f"{mf.model_id}: exact vertices need <= {EXACT_MAX_CLASSES} classes; use --vertices approx")
        if cfg.ns_kind == "smets" and mf.num_classes > DENSE_MAX_CLASSES:
            raise LoadError(f"{mf.model_id}: the Smets measure needs <= {DENSE_MAX_CLASSES} classes")
        family = family_for(mf)
        try:
            run = evaluate_stream(mf.model_id, iter_with_errors(mf), labels, cfg, family, keep_records)
        except CredalError as exc:
            problems.append(f"{mf.model_id}: {exc}")
            continue
        runs.append(run)
    return runs, problems


def _print_summaries(runs: Sequence[ModelRun], out=None) -> None:
    out = out or sys.stdout
    print(f"{'model':<16}{'n':>7}{'fail':>6}{'acc':>8}{'ece':>8}{'d':>10}{'NS':>10}{'E':>10}", file=out)
    for r in runs:
        s = r.summary
        o = s.overall
        print(f"{s.model_id:<16}{o.count:>7}{len(r.failures):>6}{s.accuracy:>8.4f}{s.ece:>8.4f}"
              f"{o.d.mean:>10.4f}{o.ns.mean:>10.4f}{o.e.mean:>10.4f}", file=out)


def _failure_exit(runs: Sequence[ModelRun], problems: Sequence[str], max_failures: float) -> int:
    code = EXIT_OK
    for p in problems:
        print(f"error: {p}", file=sys.stderr)
        code = EXIT_FAILURES
    for r in runs:
        if r.failure_rate > max_failures:
            print(f"error: {r.summary.model_id}: {len(r.failures)} failed instance(s) "
                  f"({r.failure_rate:.3%}) above threshold {max_failures:.3%}", file=sys.stderr)
            for iid, msg in r.failures[:5]:
                print(f"  instance {iid}: {msg}", file=sys.stderr)
            code = EXIT_FAILURES
    return code


def _config(args, lam: float) -> EvalConfig:
    return EvalConfig(lam=lam, divergence=args.divergence, ns_kind=args.ns, vertex_mode=args.vertices)


def cmd_evaluate(args) -> int:
    manifests = load_manifest(args.manifest)
    labels = read_labels(args.labels)
    cfg = _config(args, args.lam)
    runs, problems = run_models(manifests, labels, cfg, keep_records=args.per_instance)
    summaries = [r.summary for r in runs]
    rankings = rank_models(summaries, [cfg.lam]) if summaries else []
    per_instance = None
    if args.per_instance:
        per_instance = ((r.summary.model_id, rec) for r in runs for rec in r.records)
    write_results(summaries, rankings, per_instance, args.out)
    _print_summaries(runs)
    return _failure_exit(runs, problems, args.max_failures)


def cmd_rank(args) -> int:
    manifests = load_manifest(args.manifest)
    labels = read_labels(args.labels)
    cfg = _config(args, args.lam)
    runs, problems = run_models(manifests, labels, cfg)
    summaries = [r.summary for r in runs]
    rankings = rank_models(summaries, args.lambdas) if summaries else []
    write_results(summaries, rankings, None, args.out)
    for row in rankings:
        listing = ", ".join(f"{e.model_id} {e.e_mean:.3f}" for e in row.entries)
        print(f"lambda={row.lam:g}: {listing}")
    return _failure_exit(runs, problems, args.max_failures)


def _fmt_vec(v) -> str:
    return "(" + ", ".join(f"{x:.6g}" for x in np.asarray(v, dtype=float)) + ")"


def cmd_inspect(args) -> int:
    manifests = {m.model_id: m for m in load_manifest(args.manifest)}
    if args.model not in manifests:
        raise LoadError(f"model {args.model!r} not in manifest")
    mf = manifests[args.model]
    rec = next((r for r in load_predictions(mf) if r.instance_id == args.instance), None)
    if rec is None:
        raise LoadError(f"instance {args.instance} not found for {mf.model_id}")
    space = rec.space
    print(f"model {mf.model_id}  encoding {mf.encoding}  classes {space.num_classes}  instance {rec.instance_id}")
    summary = point_summary(rec)
    print(f"point summary {_fmt_vec(summary)}  predicted class {int(np.argmax(summary))}")
    mode = args.vertices
    if mf.encoding == POINT:
        verts = credal.point_vertices(rec.payload)
        print("point prediction: single vertex, non-specificity 0")
        print(f"entropy {uncertainty.shannon_entropy(rec.payload):.6g}")
    else:
        if mf.encoding == SAMPLES:
            lp = credal.lower_prob_from_samples(rec.payload, family_for(mf))
            m = mobius_inverse(lp)
            ip = credal.intervals_from_samples(rec.payload)
        elif mf.encoding == INTERVALS:
            lp = credal.lower_prob_from_intervals(rec.payload)
            m = mobius_inverse(lp)
            ip = rec.payload
        else:
            lp = None
            m = rec.payload
            ip = credal.IntervalPrediction(space, singleton_beliefs(m), np.minimum(singleton_plausibilities(m), 1))
        if lp is not None:
            print(f"lower probabilities ({len(lp.values)} subsets):")
            for mask in sorted(lp.values, key=lambda k: (k.bit_count(), k))[: args.limit]:
                print(f"  {space.label(mask):<24} {lp.values[mask]:.6g}")
        print(f"masses ({len(m)} focal sets):")
        for mask, v in sorted(m.focal.items(), key=lambda kv: -kv[1])[: args.limit]:
            print(f"  {space.label(mask):<24} {v:.6g}")
        verts = credal.vertices(m, mode)
        print(f"non-specificity (Dubois-Prade) {uncertainty.ns_dubois(m):.6g}")
        if space.num_classes <= DENSE_MAX_CLASSES:
            print(f"non-specificity (Smets)        {uncertainty.ns_smets(m):.6g}")
        print(f"non-specificity (Korner)       {uncertainty.ns_korner(m):.6g}")
        print(f"specificity (Pal)              {uncertainty.spec_pal(m):.6g}")
        eb = uncertainty.entropy_bounds(ip)
        print(f"entropy bounds [{eb.lower:.6g}, {eb.upper:.6g}]  credal uncertainty {eb.width:.6g}")
        if mf.encoding == SAMPLES:
            print(f"mutual information {uncertainty.mutual_information(rec.payload):.6g}")
    print(f"vertices ({len(verts)}, {verts.provenance}):")
    for v in verts.vertices[: args.limit]:
        print(f"  {_fmt_vec(v)}")
    pc = int(np.argmax(summary))
    print(f"credal width of predicted class {credal.credal_width(verts, pc):.6g}")
    if args.labels:
        labels = read_labels(args.labels)
        if rec.instance_id >= len(labels):
            raise LoadError(f"no label for instance {rec.instance_id} in {args.labels}")
        y = GroundTruth(space, labels[rec.instance_id])
        d, idx = min_divergence_to_vertices(y, verts)
        print(f"true class {y.true_class}: KL to nearest vertex {d:.6g} (vertex {idx})")
    return EXIT_OK


def cmd_oracle(args) -> int:
    if not args.self_test:
        print("nothing to do: pass --self-test", file=sys.stderr)
        return EXIT_INVALID
    results = self_test(args.max_classes, args.seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVALID


def _add_metric_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--divergence", choices=("kl", "js"), default="kl")
    p.add_argument("--ns", choices=NS_CHOICES, default="dubois",
                   help="imprecision measure; cu = credal uncertainty (entropy range)")
    p.add_argument("--vertices", choices=("exact", "approx", "auto"), default="auto",
                   help=f"credal vertex enumeration; auto is exact up to {EXACT_MAX_CLASSES} classes")
    p.add_argument("--max-failures", type=float, default=0.001,
                   help="tolerated fraction of failed instances per model (default 0.001)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="credal-eval", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score every model at one trade-off")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--labels", required=True, type=Path)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    _add_metric_options(p)
    p.add_argument("--per-instance", action="store_true", help="also write per-instance records")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank", help="rank models over a sweep of trade-offs")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--labels", required=True, type=Path)
    p.add_argument("--lambdas", required=True, type=parse_lambdas, help="start:stop:step, e.g. 0.1:1.0:0.1")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="trade-off used for the E statistics in the summaries file")
    _add_metric_options(p)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("inspect", help="show the credal pipeline for one instance")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--model", required=True)
    p.add_argument("--instance", required=True, type=int)
    p.add_argument("--labels", type=Path)
    p.add_argument("--vertices", choices=("exact", "approx", "auto"), default="auto")
    p.add_argument("--limit", type=int, default=40, help="max rows printed per listing")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("oracle", help="brute-force equivalence checks")
    p.add_argument("--self-test", action="store_true")
    p.add_argument("--max-classes", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CredalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
