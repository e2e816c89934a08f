"""``devfill`` command line.

Exit status: 0 success or passing verdict, 1 failing verdict or refusal,
2 usage, parse or configuration error, 3 runtime obstruction.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .config import RunConfig, env_threads
from .errors import (CaseConstructionFailed, ConfigError, ContinuationObstructed, CornerAmbiguity, CurveFormatError,
                     DevfillError, GenericityFailure, InsufficientData, SearchBudgetExceeded)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("devfill")


def _key_value(text):
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return key, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {key} is not a number: {value!r}") from None


def _common(p):
    p.add_argument("--grid", type=int, default=512, metavar="N", help="field grid size per axis (>= 64)")
    p.add_argument("--delta", type=float, default=0.02, metavar="FRAC",
                   help="diagonal exclusion band as a fraction of L")
    p.add_argument("--budget", type=int, default=100_000, metavar="N", help="covering search expansion budget")
    p.add_argument("--out", type=Path, default=Path("devfill-out"), metavar="DIR", help="output directory")
    p.add_argument("--force", action="store_true", help="proceed even if the genericity check fails")
    p.add_argument("--tol-scale", type=float, default=1.0, metavar="X", help="scale all refinement tolerances")
    p.add_argument("--tol", type=_key_value, action="append", default=[], metavar="NAME=VALUE",
                   help="override a named tolerance (pinch_h_min, dedup_tol, H_min, trust_radius)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    from .oracle import KINDS

    parser = argparse.ArgumentParser(prog="devfill",
                                     description="Enumerate developable fillings of a closed space curve.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="genericity report for a boundary curve")
    p.add_argument("curve", type=Path)
    _common(p)

    p = sub.add_parser("field", help="bitangency field, zero set and contour plot")
    p.add_argument("curve", type=Path)
    _common(p)

    p = sub.add_parser("solve", help="enumerate and validate fillings; write meshes and a report")
    p.add_argument("curve", type=Path)
    p.add_argument("--mesh-resolution", type=int, nargs=2, default=(64, 8), metavar=("RULINGS", "POINTS"))
    _common(p)

    p = sub.add_parser("synth", help="write a synthetic boundary with known fillings")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--param", type=_key_value, action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--samples", type=int, default=720, help="boundary sample count")
    _common(p)

    p = sub.add_parser("continue", help="track solutions from a report along a sequence of boundaries")
    p.add_argument("report", type=Path)
    p.add_argument("curves", type=Path, nargs="+")
    p.add_argument("--mesh-resolution", type=int, nargs=2, default=(64, 8), metavar=("RULINGS", "POINTS"))
    _common(p)
    return parser


def config_from_args(args):
    return RunConfig(grid=args.grid, delta=args.delta, tol_scale=args.tol_scale, tolerances=dict(args.tol),
                     budget=args.budget, out=args.out, seed=args.seed, force=args.force, threads=env_threads())


def _print(msg):
    print(msg, flush=True)


# -- commands ------------------------------------------------------------------------

def cmd_analyze(args, config):
    from .genericity import genericity_report

    curve = io.read_curve(args.curve)
    report = genericity_report(curve)
    doc = {"curve": args.curve.name, "length": curve.length, "report": report.to_json()}
    io.write_json(doc, config.out / "analysis.json")
    _print(f"verdict: {report.verdict}" + (f" ({'; '.join(report.reasons)})" if report.reasons else ""))
    return EXIT_OK if report.passed else EXIT_FAIL


def _gate(curve, config):
    """Genericity report, or a refusal unless --force."""
    from .genericity import genericity_report

    report = genericity_report(curve)
    if not report.passed and not config.force:
        raise GenericityFailure("curve fails the genericity report: " + "; ".join(report.reasons), report)
    return report


def cmd_field(args, config):
    from .bitangency import sample_field
    from .plotting import write_contour_svg
    from .zeroset import extract_zero_set

    curve = io.read_curve(args.curve)
    report = _gate(curve, config)
    field_ = sample_field(curve, config.grid, config.delta, config.threads)
    zs = extract_zero_set(curve, field_, config.tol_scale)
    field_.save(config.out / "field.bin", config.out / "field.json")
    io.write_json({"curve": args.curve.name, "config": config.to_json(), "zero_set": zs.to_json()},
                  config.out / "zeroset.json")
    write_contour_svg(zs, config.out / "contours.svg", report, title=args.curve.name)
    _print(f"zero set: {len(zs.curves)} component(s), {len(zs.nodes)} node(s)")
    return EXIT_OK


def _write_solutions(curve, surfaces, resolution, out, extra):
    from .surface import mesh

    files = []
    for k, surf in enumerate(surfaces):
        name = f"solution_{k:02d}.obj"
        mesh(surf, tuple(resolution)).write_obj(out / name)
        files.append(name)
    doc = io.solution_report(curve, surfaces, files, extra)
    io.write_json(doc, out / "solution.json")
    return doc


def cmd_solve(args, config):
    from .ruling import enumerate_fillings

    curve = io.read_curve(args.curve)
    report = _gate(curve, config)
    extra = {"curve": args.curve.name, "config": config.to_json(), "genericity": report.verdict}
    try:
        result = enumerate_fillings(curve, config.solver(), report=report, force=True)
    except SearchBudgetExceeded as exc:
        _write_solutions(curve, exc.partial, args.mesh_resolution, config.out,
                         {**extra, "partial": True, "error": str(exc)})
        raise
    extra.update(partial=False, candidates=result.candidates, expansions=result.expansions,
                 rejected=[{"provenance": [list(p) for p in prov], "reason": why} for prov, why in result.rejected])
    _write_solutions(curve, result.surfaces, args.mesh_resolution, config.out, extra)
    _print(f"solutions: {len(result.surfaces)}")
    return EXIT_OK


def cmd_synth(args, config):
    from .oracle import make_case

    try:
        case = make_case(args.kind, n_samples=args.samples, **dict(args.param))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid parameters for {args.kind}: {exc}") from None
    io.write_json(case.curve_json(), config.out / f"{args.kind}.json")
    io.write_json(case.sidecar(), config.out / f"{args.kind}.truth.json")
    _print(f"wrote {args.kind}.json and {args.kind}.truth.json")
    return EXIT_OK


def cmd_continue(args, config):
    from .continuation import continue_solution
    from .ruling import build_surface, validate_candidate

    curve0, sols = io.load_solution_report(args.report)
    solver = config.solver()
    current = []
    for idx, path in sols:
        surf = build_surface(curve0, path, [("report", args.report.name, int(idx))])
        reason = validate_candidate(surf, solver)
        if reason is not None:
            raise GenericityFailure(f"solution {idx} in {args.report.name} is not valid: {reason}")
        current.append(surf)
    for step, cpath in enumerate(args.curves):
        curve = io.read_curve(cpath)
        if not config.force:
            _gate(curve, config)
        doc = {"step": step, "curve": cpath.name, "config": config.to_json(), "solutions": []}
        try:
            nxt = []
            for k, surf in enumerate(current):
                new = continue_solution(surf, curve, config.trust_radius, solver, step_index=step)
                doc["solutions"].append({"index": k, **new.last_step.to_json()})
                nxt.append(new)
        except ContinuationObstructed as exc:
            doc.update(obstructed=True, error=str(exc), solution=k,
                       parameter=list(exc.parameter) if exc.parameter is not None else None)
            io.write_json(doc, config.out / f"step_{step:03d}.json")
            raise
        doc["obstructed"] = False
        io.write_json(doc, config.out / f"step_{step:03d}.json")
        current = nxt
    _write_solutions(current[0].curve if current else curve0, current, args.mesh_resolution, config.out,
                     {"curve": args.curves[-1].name, "config": config.to_json(), "steps": len(args.curves)})
    _print(f"continued {len(current)} solution(s) through {len(args.curves)} step(s)")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "field": cmd_field, "solve": cmd_solve, "synth": cmd_synth,
            "continue": cmd_continue}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        config.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, config)
    except (ConfigError, CurveFormatError, InsufficientData, CornerAmbiguity) as exc:
        print(f"devfill: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GenericityFailure as exc:
        print(f"devfill: refused: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ContinuationObstructed as exc:
        at = f" at step {exc.step}" if exc.step is not None else ""
        print(f"devfill: continuation obstructed{at}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except SearchBudgetExceeded as exc:
        print(f"devfill: {exc}; partial report written ({len(exc.partial)} solution(s))", file=sys.stderr)
        return EXIT_RUNTIME
    except (CaseConstructionFailed, DevfillError) as exc:
        print(f"devfill: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
