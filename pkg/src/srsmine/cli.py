"""Command line: ``srsmine classify | generate | reduce | pipeline``.

Exit codes: 0 success, 1 invalid input, 2 some targets had no boundary
found (all artifacts are still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from . import classifier as nb
from . import datagen, reducer
from .guardlang import INTEGER
from .pathfinder import BFS, DEFAULT_MAX_DEPTH, DFS
from .statemodel import ModelError, StateMachine, load_model_file
from .suite import (
    CoverageReport,
    DigestMismatchError,
    DigestMismatchWarning,
    SuiteFormatError,
    TestSuite,
    atomic_write_text,
    coverage,
    read_suite,
    write_suite,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILED_TARGETS = 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    seed: int
    max_depth: int
    out: Optional[str]
    fmt: str
    figures: Optional[str]


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False)


def _parse_initial(text: Optional[str], machine: StateMachine) -> Optional[Dict[str, object]]:
    if text is None:
        return None
    values = {}
    for part in text.split(","):
        name, sep, raw = part.partition("=")
        name = name.strip()
        if not sep:
            raise UsageError(f"--initial: expected name=value, got {part!r}")
        try:
            decl = machine.variable(name)
        except KeyError:
            raise UsageError(f"--initial: unknown variable {name!r}") from None
        try:
            values[name] = int(raw) if decl.kind == INTEGER else float(raw)
        except ValueError:
            raise UsageError(f"--initial: bad value for {name!r}: {raw!r}") from None
    missing = [v.name for v in machine.variables if v.name not in values]
    if missing:
        raise UsageError(f"--initial: no value for {', '.join(missing)}")
    return values


def _parse_clusters(text: str):
    if text == "auto":
        return "auto"
    try:
        k = int(text)
    except ValueError:
        raise UsageError(f"--clusters must be a positive integer or 'auto', got {text!r}") from None
    if k < 1:
        raise UsageError("--clusters must be positive")
    return k


# --- subcommands -----------------------------------------------------------


def cmd_classify(train_paths: Sequence[str], input_path: str, args, out: Optional[str] = None) -> int:
    stop = nb.STOP_WORDS if args.stop_words else None
    sentences = nb.read_sentences(input_path)
    labelled = [(s, l) for s, l in sentences if l is not None]
    rows = []
    model = None
    for i, path in enumerate(train_paths, 1):
        model = nb.train(nb.read_corpus(path), alpha=args.alpha, stop_words=stop)
        if labelled:
            rows.append(nb.evaluate(model, labelled, i))
    predictions = [(s,) + nb.classify(model, s) for s, _ in sentences]
    rules = nb.export_rules(model, args.rules)

    out = out or args.out
    if out:
        atomic_write_text(out, "".join(f"{label}\t{s}\n" for s, label, _ in predictions))
    if args.format == "structured":
        _emit(_dump({
            "evaluation": [{"set": r.set_number, "correct": r.correct, "incorrect": r.incorrect} for r in rows],
            "rules": [{"token": r.token, "label": r.label, "weight": r.weight} for r in rules],
            "predictions": [{"sentence": s, "label": label, "margin": m} for s, label, m in predictions],
        }))
    else:
        if rows:
            _emit(nb.format_report(rows, labelled))
            _emit("")
        _emit("\n".join(str(r) for r in rules))
        if not out:
            _emit("")
            _emit("".join(f"{label}\t{s}\n" for s, label, _ in predictions))
    if args.figures and rows:
        from . import plots

        plots.evaluation_figure(rows, os.path.join(args.figures, "evaluation.png"))
    return EXIT_OK


def _search_config(args, machine: StateMachine) -> datagen.SearchConfig:
    return datagen.SearchConfig(
        seed=args.seed,
        max_evaluations=args.max_evaluations,
        max_restarts=args.max_restarts,
        initial=_parse_initial(args.initial, machine),
    )


def _coverage_output(report: CoverageReport, suite: TestSuite, fmt: str, title: str) -> str:
    if fmt == "structured":
        return _dump({"coverage": report.to_dict(), "failed_targets": [f.to_dict() for f in suite.failed_targets]})
    lines = [report.format_text(title)]
    for f in suite.failed_targets:
        where = "" if f.violated_transition is None else f"; prefix guard mostly violated: {f.violated_transition}"
        lines.append(
            f"  FAILED {f.transition} [{f.guard}] -> {str(f.desired).lower()}: {f.reason} "
            f"(best F {f.best_f}, {f.evaluations} evaluations, {f.restarts} restarts{where})"
        )
    return "\n".join(lines)


def cmd_generate(model_path: str, args, out: Optional[str] = None) -> int:
    machine = load_model_file(model_path)
    config = _search_config(args, machine)
    suite = datagen.generate_suite(machine, config, args.max_depth, args.strategy, args.jobs)
    out = out or args.out or "suite.json"
    write_suite(suite, out)
    report = coverage(suite, machine)
    _emit(_coverage_output(report, suite, args.format, f"coverage ({len(suite)} cases, {out})"))
    if args.figures:
        from . import plots

        plots.coverage_figure([report], ["generated"], os.path.join(args.figures, "coverage.png"))
        plots.boundary_figure(suite, machine, os.path.join(args.figures, "boundaries.png"))
    return EXIT_FAILED_TARGETS if suite.failed_targets else EXIT_OK


def cmd_reduce(suite_path: str, model_path: str, args, out: Optional[str] = None) -> int:
    machine = load_model_file(model_path)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DigestMismatchWarning)
        suite = read_suite(suite_path)
    k = _parse_clusters(args.clusters)
    if not 0.0 <= args.weight <= 1.0:
        raise UsageError("--weight must lie in [0, 1]")
    reduced = reducer.reduce(suite, machine, k, args.weight, repair=not args.no_repair)
    out = out or args.out or "reduced.json"
    write_suite(reduced, out)
    before, after = coverage(suite, machine), coverage(reduced, machine)
    if args.format == "structured":
        payload = {"before": before.to_dict(), "after": after.to_dict(),
                   "size": {"before": len(suite), "after": len(reduced)}, "reduction": reduced.reduction}
        if args.no_repair:
            loss = reducer.coverage_loss(suite, reduced, machine)
            payload["coverage_loss"] = {
                "pairs": [{"transition": t, "outcome": o} for t, o in loss["pairs"]],
                "transitions": loss["transitions"],
            }
        _emit(_dump(payload))
    else:
        _emit(f"reduced {len(suite)} -> {len(reduced)} cases (k={reduced.reduction['k']}, {out})")
        _emit(before.format_text("before"))
        _emit(after.format_text("after"))
        if args.no_repair:
            loss = reducer.coverage_loss(suite, reduced, machine)
            pairs = ", ".join(f"{t}:{str(o).lower()}" for t, o in loss["pairs"]) or "none"
            trans = ", ".join(loss["transitions"]) or "none"
            _emit(f"coverage lost without repair: pairs {pairs}; transitions {trans}")
    if args.figures:
        from . import plots

        plots.coverage_figure([before, after], ["original", "reduced"], os.path.join(args.figures, "reduction_coverage.png"))
        plots.reduction_figure(len(suite), len(reduced), len(reduced.reduction["repaired"]),
                               os.path.join(args.figures, "reduction.png"), reduced.reduction["k"])
    return EXIT_OK


def cmd_pipeline(train_paths: Sequence[str], srs_path: str, model_path: str, args) -> int:
    outdir = args.out or "srsmine-out"
    os.makedirs(outdir, exist_ok=True)
    if args.figures is None and args.with_figures:
        args.figures = os.path.join(outdir, "figures")
    cmd_classify(train_paths, srs_path, args, out=os.path.join(outdir, "classified.tsv"))
    suite_path = os.path.join(outdir, "suite.json")
    status = cmd_generate(model_path, args, out=suite_path)
    cmd_reduce(suite_path, model_path, args, out=os.path.join(outdir, "reduced.json"))
    return status


# --- argument parsing ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    shared.add_argument("--max-depth", type=int, default=DEFAULT_MAX_DEPTH,
                        help=f"longest path explored (default {DEFAULT_MAX_DEPTH})")
    shared.add_argument("--out", help="output file (directory for pipeline)")
    shared.add_argument("--format", choices=("text", "structured"), default="text")
    shared.add_argument("--figures", metavar="DIR", help="also render report figures into DIR")

    gen = argparse.ArgumentParser(add_help=False)
    gen.add_argument("--max-evaluations", type=int, default=10_000)
    gen.add_argument("--max-restarts", type=int, default=10)
    gen.add_argument("--strategy", choices=(DFS, BFS), default=DFS)
    gen.add_argument("--initial", metavar="NAME=V,...", help="fixed initial input instead of a random one")
    gen.add_argument("--jobs", type=int, default=1, help="parallel searches (results are identical)")

    red = argparse.ArgumentParser(add_help=False)
    red.add_argument("--clusters", default="auto", metavar="K|auto")
    red.add_argument("--weight", type=float, default=reducer.DEFAULT_WEIGHT,
                     help="weight of coverage similarity in the distance (default 0.7)")
    red.add_argument("--no-repair", action="store_true", help="report coverage loss instead of repairing it")

    cls = argparse.ArgumentParser(add_help=False)
    cls.add_argument("--alpha", type=float, default=1.0, help="additive smoothing (default 1)")
    cls.add_argument("--stop-words", action="store_true", help="drop common English stop words")
    cls.add_argument("--rules", type=int, default=5, help="rules exported per class (default 5)")

    p = argparse.ArgumentParser(prog="srsmine", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", parents=[shared, cls], help="label requirement sentences FR/NFR")
    c.add_argument("--train", action="append", required=True, help="labelled TSV corpus; repeat for several training sets")
    c.add_argument("--input", required=True, help="sentences to label (optionally labelled, for evaluation)")

    g = sub.add_parser("generate", parents=[shared, gen], help="generate boundary test cases from a model")
    g.add_argument("model")

    r = sub.add_parser("reduce", parents=[shared, red], help="cluster and reduce a test suite")
    r.add_argument("suite")
    r.add_argument("model")

    pl = sub.add_parser("pipeline", parents=[shared, gen, red, cls], help="classify, generate and reduce in one run")
    pl.add_argument("--train", action="append", required=True)
    pl.add_argument("--srs", required=True)
    pl.add_argument("--model", required=True)
    pl.add_argument("--with-figures", action="store_true", help="render figures into OUT/figures")
    return p


def _validate(args) -> None:
    if args.max_depth < 1:
        raise UsageError("--max-depth must be positive")
    if getattr(args, "max_evaluations", 1) < 1:
        raise UsageError("--max-evaluations must be at least 1")
    if getattr(args, "max_restarts", 0) < 0:
        raise UsageError("--max-restarts must be non-negative")
    if getattr(args, "alpha", 1.0) <= 0:
        raise UsageError("--alpha must be positive")
    if getattr(args, "rules", 0) < 0:
        raise UsageError("--rules must be non-negative")
    if hasattr(args, "clusters"):
        _parse_clusters(args.clusters)
        if not 0.0 <= args.weight <= 1.0:
            raise UsageError("--weight must lie in [0, 1]")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; 2 is reserved for failed targets here
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    try:
        _validate(args)
        if args.command == "classify":
            return cmd_classify(args.train, args.input, args)
        if args.command == "generate":
            return cmd_generate(args.model, args)
        if args.command == "reduce":
            return cmd_reduce(args.suite, args.model, args)
        return cmd_pipeline(args.train, args.srs, args.model, args)
    except (ModelError, SuiteFormatError, nb.CorpusError, DigestMismatchError, UsageError) as exc:
        print(f"srsmine: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, TypeError, ValueError) as exc:
        name = getattr(exc, "filename", None)
        prefix = f"{name}: " if name else ""
        print(f"srsmine: {prefix}{exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
