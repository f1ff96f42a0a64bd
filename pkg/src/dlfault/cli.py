"""Command-line entry point.

Subcommands: extract, train, diagnose, localize, seed, kill-check,
export-dist. Exit codes: 0 success, 1 operational error, 2 usage or schema
error.
"""

from __future__ import annotations

import argparse
import json
import math
import subprocess
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import classifiers, features, localizer, mutation, stats
from .errors import DlfaultError
from .indicators import IndicatorConfig, compute_indicators
from .labels import FaultLabelSet
from .trace_model import load_trace, validate_trace

EXIT_OK = 0
EXIT_OPERATIONAL = 1
EXIT_USAGE = 2


@dataclass
class PipelineConfig:
    runs_per_program: int = 10
    alpha: float = stats.DEFAULT_ALPHA
    beta: float = stats.DEFAULT_BETA
    seed: int = 0
    jobs: int = 1
    indicator: dict = field(default_factory=dict)
    classifier: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            doc = json.load(fh)
        cfg = cls()
        for key in ("runs_per_program", "alpha", "beta", "seed", "jobs"):
            if key in doc:
                setattr(cfg, key, doc[key])
        cfg.indicator = doc.get("indicator", {})
        cfg.classifier = doc.get("classifier", {})
        if cfg.runs_per_program < 1:
            raise ValueError("runs_per_program must be >= 1")
        return cfg

    def indicator_config(self) -> IndicatorConfig:
        return IndicatorConfig(**self.indicator)

    def classifier_config(self) -> classifiers.ClassifierConfig:
        return classifiers.ClassifierConfig(**self.classifier)


def _open_output(args):
    if args.output and args.output != "-":
        return open(args.output, "w")
    return sys.stdout


def _extract_one(path, icfg):
    trace = load_trace(path)
    errors = [i for i in validate_trace(trace) if i.severity == "error"]
    if errors:
        raise DlfaultError(f"{path}: {errors[0].message}")
    matrix = compute_indicators(trace, icfg)
    return trace.run_id or str(path), features.extract_features(matrix)


def cmd_extract(args, cfg: PipelineConfig) -> int:
    icfg = cfg.indicator_config()
    rows = []
    failures = 0
    with ThreadPoolExecutor(max_workers=max(1, cfg.jobs)) as pool:
        futures = {pool.submit(_extract_one, p, icfg): p for p in args.traces}
        for path in args.traces:
            fut = next(f for f, p in futures.items() if p == path)
            try:
                rows.append(fut.result())
            except Exception as exc:  # noqa: BLE001 - per-file isolation
                failures += 1
                print(f"warning: skipping {path}: {exc}", file=sys.stderr)
    if not rows:
        print("error: no readable traces", file=sys.stderr)
        return EXIT_USAGE
    out = _open_output(args)
    try:
        features.write_feature_csv(out, rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_train(args, cfg: PipelineConfig) -> int:
    try:
        with open(args.features) as fh:
            run_ids, X, Y = features.read_feature_csv(fh)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if Y is None:
        print("error: feature CSV lacks label columns", file=sys.stderr)
        return EXIT_USAGE
    samples = [
        classifiers.LabeledSample(X[i], FaultLabelSet.from_bools(Y[i]), run_ids[i])
        for i in range(len(run_ids))
    ]
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(samples))
    n_train = max(1, int(round(len(samples) * 0.7)))
    train = [samples[i] for i in order[:n_train]]
    held = [samples[i] for i in order[n_train:]]
    bundle = classifiers.train_diagnosers(train, cfg.classifier_config(), seed=cfg.seed)
    with open(args.output, "w") as fh:
        fh.write(bundle.to_json())
    if held:
        metrics = classifiers.evaluate(bundle, held)
        print(json.dumps({"split": "70/30", **metrics.to_dict()}, indent=2))
    return EXIT_OK


def cmd_diagnose(args, cfg: PipelineConfig) -> int:
    with open(args.bundle) as fh:
        bundle = classifiers.DiagnoserBundle.from_json(fh.read())
    icfg = cfg.indicator_config()
    runs = []
    for path in args.traces:
        try:
            _, feats = _extract_one(path, icfg)
        except Exception as exc:  # noqa: BLE001
            print(f"error: {path}: {exc}", file=sys.stderr)
            return EXIT_OPERATIONAL
        runs.append(feats)
    report = classifiers.diagnose(bundle, runs)
    doc = {"diagnosis": report.to_dict()}
    if args.program:
        with open(args.program) as fh:
            source = fh.read()
        loc = localizer.localize_source(source, report.final)
        doc["localization"] = loc.to_dict()
    out = _open_output(args)
    try:
        json.dump(doc, out, indent=2)
        out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    faults = report.final.to_names()
    print(f"diagnosed faults: {faults if faults else 'none'}", file=sys.stderr)
    return EXIT_OK


def cmd_localize(args, cfg: PipelineConfig) -> int:
    try:
        faults = FaultLabelSet.from_names(
            [f for f in args.faults.split(",") if f]
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    with open(args.program) as fh:
        source = fh.read()
    pm = localizer.parse_program(source)
    for w in pm.warnings:
        print(f"warning: {w}", file=sys.stderr)
    report = localizer.localize(pm, faults)
    doc = report.to_dict()
    if args.emit_spec:
        doc["model_spec"] = pm.derived_spec.to_dict() if pm.derived_spec else None
    out = _open_output(args)
    try:
        json.dump(doc, out, indent=2)
        out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _command_evaluator(template: str):
    """Wrap a shell command as an evaluator: spec JSON on a temp file path
    substituted for {spec}, accuracies JSON array expected on stdout."""

    def run(spec: mutation.ModelSpec):
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            fh.write(spec.to_json())
            path = fh.name
        proc = subprocess.run(
            template.format(spec=path), shell=True, capture_output=True, text=True
        )
        if proc.returncode != 0:
            raise DlfaultError(f"evaluator command failed: {proc.stderr.strip()}")
        return json.loads(proc.stdout)

    return run


def cmd_seed(args, cfg: PipelineConfig) -> int:
    with open(args.spec) as fh:
        spec = mutation.ModelSpec.from_json(fh.read())
    rng = np.random.default_rng(cfg.seed)
    if args.evaluator_cmd:
        mutants = mutation.seed_iteratively(
            spec,
            _command_evaluator(args.evaluator_cmd),
            rng,
            max_types=args.max_types,
            alpha=cfg.alpha,
            beta=cfg.beta,
        )
        doc = {"mutants": [m.to_dict() for m in mutants]}
    else:
        # no evaluator: emit an unchecked plan of distinct fault types
        current = spec
        records = []
        order = rng.permutation(len(mutation.OPERATORS_BY_FAULT))
        fault_types = [list(mutation.OPERATORS_BY_FAULT)[i] for i in order]
        for ft in fault_types[: args.max_types]:
            ops = mutation.OPERATORS_BY_FAULT[ft]
            op = ops[rng.integers(0, len(ops))] if len(ops) > 1 else ops[0]
            try:
                current, rec = mutation.apply_operator(current, op, rng)
            except mutation.NoMutableTarget:
                continue
            records.append(rec)
        if not records:
            print("error: no operator applicable to this spec", file=sys.stderr)
            return EXIT_OPERATIONAL
        plan = mutation.MutationPlan(
            base_spec_id=args.spec, records=tuple(records), rng_seed=cfg.seed
        )
        doc = {"plan": plan.to_dict(), "mutated_spec": current.to_dict()}
    out = _open_output(args)
    try:
        json.dump(doc, out, indent=2)
        out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_kill_check(args, cfg: PipelineConfig) -> int:
    def load_samples(path):
        with open(path) as fh:
            doc = json.load(fh)
        if not isinstance(doc, list):
            raise ValueError(f"{path}: expected a JSON array of accuracies")
        return doc

    try:
        orig = load_samples(args.original)
        mut = load_samples(args.mutant)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    verdict = stats.is_kill(orig, mut, alpha=cfg.alpha, beta=cfg.beta)
    out = _open_output(args)
    try:
        json.dump(verdict.to_dict(), out, indent=2)
        out.write("\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_export_dist(args, cfg: PipelineConfig) -> int:
    try:
        with open(args.features) as fh:
            _run_ids, X, Y = features.read_feature_csv(fh)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if Y is None:
        print("error: feature CSV lacks label columns", file=sys.stderr)
        return EXIT_USAGE
    if args.label not in features.LABEL_NAMES:
        print(
            f"error: unknown label {args.label!r}; choose from {features.LABEL_NAMES}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    li = features.LABEL_NAMES.index(args.label)
    mask = Y[:, li] == 1

    def group_stats(mat):
        if mat.shape[0] == 0:
            return [0, math.nan, math.nan, math.nan, math.nan, math.nan]
        return [
            mat.shape[0],
            float(np.mean(mat)),
            float(np.std(mat, ddof=1)) if mat.shape[0] > 1 else 0.0,
            float(np.min(mat)),
            float(np.median(mat)),
            float(np.max(mat)),
        ]

    out = _open_output(args)
    try:
        cols = ["n", "mean", "std", "min", "median", "max"]
        header = ["feature"] + [f"faulty_{c}" for c in cols] + [f"ok_{c}" for c in cols]
        out.write(",".join(header) + "\n")
        for fi, name in enumerate(features.FEATURE_NAMES):
            faulty = group_stats(X[mask][:, fi : fi + 1])
            ok = group_stats(X[~mask][:, fi : fi + 1])
            out.write(",".join([name] + [str(v) for v in faulty + ok]) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dlfault",
        description="Diagnose and localize training-configuration faults in "
        "deep-learning programs from training traces.",
    )
    parser.add_argument("--config", help="pipeline config JSON")
    parser.add_argument("--seed", type=int, help="RNG seed override")
    parser.add_argument("--jobs", type=int, help="parallel workers for extract")
    parser.add_argument("--output", "-o", help="output file ('-' for stdout)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="trace files -> feature CSV")
    p.add_argument("traces", nargs="+")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="labeled feature CSV -> diagnoser bundle")
    p.add_argument("features")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("diagnose", help="bundle + traces [+ program] -> report")
    p.add_argument("--bundle", required=True)
    p.add_argument("--program")
    p.add_argument("traces", nargs="+")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("localize", help="program + fault list -> line sets")
    p.add_argument("--program", required=True)
    p.add_argument("--faults", required=True, help="comma list, e.g. lr,loss")
    p.add_argument("--emit-spec", action="store_true", help="include derived model spec")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("seed", help="apply fault-seeding operators to a model spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--max-types", type=int, default=5)
    p.add_argument(
        "--evaluator-cmd",
        help="shell command evaluating a spec ({spec} -> path); enables the kill check",
    )
    p.set_defaults(func=cmd_seed)

    p = sub.add_parser("kill-check", help="two accuracy sample files -> verdict")
    p.add_argument("original")
    p.add_argument("mutant")
    p.set_defaults(func=cmd_kill_check)

    p = sub.add_parser("export-dist", help="per-feature stats split by one label")
    p.add_argument("features")
    p.add_argument("--label", required=True)
    p.set_defaults(func=cmd_export_dist)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    except (ValueError, OSError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        cfg.seed = args.seed
    if args.jobs is not None:
        cfg.jobs = args.jobs
    try:
        return args.func(args, cfg)
    except DlfaultError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL


if __name__ == "__main__":
    sys.exit(main())
