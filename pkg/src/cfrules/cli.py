"""Command-line entry point.

    cfrules run RULES.cfr [--summarizer maximin] [--scaler multiply]
                          [--combiner heckerman] [--threshold 0.2]
                          [--trace] [--format text|json]
    cfrules experiment generate --out DIR
    cfrules experiment simulate --n 44 --noise 0.15 --seed 7 --truth mmh --out DIR
    cfrules experiment fit --data DIR --models mmh,mean [--format json]

Exit codes: 0 success, 1 parse/input error, 2 inference error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .antecedent import SummarizerKind, UnknownProposition
from .cf_algebra import CombinerKind, ContradictionError, ScalerKind
from .dsl import ParseError, parse_rulebase
from .engine import MODELS, CycleError, StrategyConfig, WorkingMemory, infer
from .experiment import (
    BASE_CALIBRATION,
    DEFAULT_DESIGN,
    DESCRIPTORS,
    DesignSpec,
    generate_items,
    item_to_cfr,
    read_subjects,
    simulate_subjects,
    write_subjects,
)
from .stats import FitReport, fit_models

EXIT_OK, EXIT_INPUT, EXIT_INFERENCE = 0, 1, 2
SEED_ENV = "CF_ENGINE_SEED"


def _fmt(x) -> str:
    return "n/a" if x is None or x != x else f"{x:.4f}"


def cmd_run(args) -> int:
    path = Path(args.rulebase)
    try:
        rules, facts = parse_rulebase(path.read_bytes())
    except OSError as exc:
        print(f"{path}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INPUT
    except ParseError as exc:
        span = exc.span
        print(f"{path}:{span.line}:{span.column}: {exc.kind.value}: {exc.message}", file=sys.stderr)
        return EXIT_INPUT

    cfg = StrategyConfig(args.summarizer, args.scaler, args.combiner, args.threshold)
    try:
        wm, trace = infer(WorkingMemory(facts), rules, cfg)
    except CycleError as exc:
        print(f"{path}: CycleError: {exc}", file=sys.stderr)
        return EXIT_INFERENCE
    except ContradictionError as exc:
        print(f"{path}: ContradictionError: {exc}", file=sys.stderr)
        return EXIT_INFERENCE
    except UnknownProposition as exc:
        print(f"{path}: UnknownProposition: {exc}", file=sys.stderr)
        return EXIT_INFERENCE

    beliefs = wm.snapshot()
    if args.format == "json":
        doc = {
            "strategy": {
                "summarizer": cfg.summarizer.value,
                "scaler": cfg.scaler.value,
                "combiner": cfg.combiner.value,
                "threshold": cfg.firing_threshold,
            },
            "beliefs": beliefs,
            "trace": trace.to_json(),
        }
        print(json.dumps(doc, indent=2))
    else:
        for prop, cf in beliefs.items():
            print(f"{prop} = {cf:.4f}")
        if args.trace and trace:
            print()
            print(trace.to_text())
    return EXIT_OK


def _load_design(path) -> DesignSpec:
    return DEFAULT_DESIGN if path is None else DesignSpec.load(path)


def _parse_calibration(text: str) -> dict[str, float]:
    values = [float(v) for v in text.split(",")]
    if len(values) != len(DESCRIPTORS) or not all(0.0 <= v <= 1.0 for v in values):
        raise ValueError("calibration takes three values in [0, 1]: highly,moderately,slightly")
    return dict(zip(DESCRIPTORS, values))


def cmd_generate(args) -> int:
    design = _load_design(args.design)
    calib = _parse_calibration(args.calibration) if args.calibration else BASE_CALIBRATION
    items = generate_items(design)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for item in items:
        (out / f"item{item.id:02d}.cfr").write_text(item_to_cfr(item, calib))
    doc = design.to_json()
    doc["items"] = [it.to_dict() for it in items]
    (out / "design.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"wrote {len(items)} items to {out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    seed = args.seed
    if os.environ.get(SEED_ENV):
        seed = int(os.environ[SEED_ENV])
    design = _load_design(args.design)
    subjects = simulate_subjects(args.n, design, MODELS[args.truth], args.noise, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_subjects(subjects, out / "ratings.csv", out / "calibration.csv")
    print(f"wrote {len(subjects)} subjects to {out} (seed {seed})")
    return EXIT_OK


def format_report(rep: FitReport) -> str:
    lines = ["subject form " + " ".join(f"{m:>8}" for m in rep.models)]
    for f in rep.fits:
        cells = []
        for m in rep.models:
            r = f.r_by_model[m]
            mark = "*" if f.significant_by_model[m] else " "
            cells.append(f"{'n/a':>7} " if r is None else f"{r:7.3f}{mark}")
        lines.append(f"{f.subject_id:>7} {f.form:>4} " + " ".join(cells))
    n = len(rep.fits)
    lines.append("")
    lines.append(f"critical r (df={rep.fits[0].df if rep.fits else 0}, alpha=.05): {rep.critical_r:.4f}")
    for m in rep.models:
        lines.append(
            f"{m}: mean r {_fmt(rep.mean_r[m])}, median r {_fmt(rep.median_r[m])}, "
            f"significant {rep.significant_counts[m]}/{n}, excluded {rep.excluded_counts[m]}"
        )
    lines.append(f"best model: {rep.best_model}")
    if rep.anova is not None:
        a = rep.anova
        lines.append(
            f"ANOVA model F({a.df[0]}, {a.df[1]}) = {_fmt(a.F_model)}, p = {a.p_model:.4g}; "
            f"form F = {_fmt(a.F_form)}, p = {a.p_form:.4g}; "
            f"interaction F = {_fmt(a.F_interaction)}, p = {a.p_interaction:.4g}"
        )
    else:
        lines.append(f"ANOVA not available: {rep.anova_error}")
    for m in rep.intermodel_r_mean:
        lines.append(
            f"{m} vs {rep.best_model}: inter-model r mean {_fmt(rep.intermodel_r_mean[m])}, "
            f"median {_fmt(rep.intermodel_r_median[m])}; partial r with {rep.best_model} "
            f"partialled out: mean-based {_fmt(rep.partial_r_mean[m])}, "
            f"median-based {_fmt(rep.partial_r_median[m])}"
        )
    return "\n".join(lines)


def cmd_fit(args) -> int:
    names = [m.strip() for m in args.models.split(",") if m.strip()]
    unknown = [m for m in names if m not in MODELS]
    if unknown:
        print(f"unknown models: {', '.join(unknown)}; known: {', '.join(MODELS)}", file=sys.stderr)
        return EXIT_INPUT
    data = Path(args.data)
    ratings = Path(args.ratings) if args.ratings else data / "ratings.csv"
    calibration = Path(args.calibration) if args.calibration else data / "calibration.csv"
    design = _load_design(args.design)
    subjects = read_subjects(ratings, calibration)
    rep = fit_models(subjects, design, {m: MODELS[m] for m in names}, fisher_z=args.fisher_z)
    text = json.dumps(rep.to_dict(), indent=2) if args.format == "json" else format_report(rep)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.csv:
        Path(args.csv).write_text(rep.to_csv())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfrules", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run forward chaining over a .cfr rulebase")
    run.add_argument("rulebase")
    run.add_argument("--summarizer", default="maximin", choices=[k.value for k in SummarizerKind])
    run.add_argument("--scaler", default="multiply", choices=[k.value for k in ScalerKind])
    run.add_argument("--combiner", default="heckerman", choices=[k.value for k in CombinerKind])
    run.add_argument("--threshold", type=float, default=0.2)
    run.add_argument("--trace", action="store_true", help="print the firing trace")
    run.add_argument("--format", choices=("text", "json"), default="text")
    run.set_defaults(func=cmd_run)

    exp = sub.add_parser("experiment", help="questionnaire design, simulation and model fitting")
    exp_sub = exp.add_subparsers(dest="subcommand", required=True)

    gen = exp_sub.add_parser("generate", help="write item rulebases and design.json")
    gen.add_argument("--out", required=True)
    gen.add_argument("--design")
    gen.add_argument("--calibration", help="highly,moderately,slightly values for the facts")
    gen.set_defaults(func=cmd_generate)

    sim = exp_sub.add_parser("simulate", help="write synthetic subject CSVs")
    sim.add_argument("--n", type=int, default=44)
    sim.add_argument("--noise", type=float, default=0.15)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--truth", choices=sorted(MODELS), default="mmh")
    sim.add_argument("--design")
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    fit = exp_sub.add_parser("fit", help="fit models to subject CSVs")
    fit.add_argument("--data", default=".", help="directory holding ratings.csv and calibration.csv")
    fit.add_argument("--ratings")
    fit.add_argument("--calibration")
    fit.add_argument("--models", default="mmh,mean")
    fit.add_argument("--design")
    fit.add_argument("--format", choices=("text", "json"), default="text")
    fit.add_argument("--out")
    fit.add_argument("--csv", help="also write a flat per-subject CSV summary here")
    fit.add_argument("--fisher-z", action="store_true", help="run the ANOVA on Fisher-z transformed r")
    fit.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
