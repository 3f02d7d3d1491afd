"""Command line front end: ``apm classify | verify | search | eval``.

Exit codes: 0 ok, 1 search not converged or a check failed (verify), 2 input
error, 3 numeric error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .backend import SpecError, frame_at
from .expr import ExprDomainError
from .geometry import DegeneratePlaneError, bisectional, curvature_package, levi_civita
from .search import DEFAULT_BUDGET, DEFAULT_FLOOR, DEFAULT_PER_START, TARGETS, SearchProblem, synthesize
from .specfile import dump_spec, load_spec
from .structure import classify
from .tensor import TensorError
from .theorems import CHECK_IDS, SuiteConfig, run_suite

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

QUANTITIES = ("F", "R", "rho", "tau", "taustar", "taustarstar", "normnablaP", "h")
VECTOR_COUNTS = {"F": 3, "R": 4, "rho": 2, "h": 2}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _clean(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else "nan"
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


def _dumps(doc) -> str:
    return json.dumps(_clean(doc), indent=2, ensure_ascii=False) + "\n"


def _load(path: str):
    try:
        return load_spec(path)
    except OSError as exc:
        raise CliError(f"{path}: cannot read: {exc.strerror}", EXIT_INPUT) from exc
    except SpecError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from exc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


# --------------------------------------------------------------------------
# classify / verify
# --------------------------------------------------------------------------


def cmd_classify(args) -> int:
    spec = _load(args.file)
    t0 = time.perf_counter()
    try:
        rep = classify(spec, n_points=args.points, seed=args.seed, tol=args.tol)
    except SpecError as exc:
        raise CliError(f"{args.file}: {exc}", EXIT_INPUT) from exc
    timing = round(1000 * (time.perf_counter() - t0), 3) if args.timing else None
    if args.format == "json":
        doc = {"spec_name": spec.name, "seed": args.seed, "tool_version": __version__,
               "classification": rep.to_dict(), "timing_ms": timing}
        _emit(_dumps(doc), args.out)
    else:
        lines = [rep.text()]
        for a in rep.alerts:
            lines.append(f"alert: {a}")
        _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def report_dict(spec, seed, rep, timing) -> dict:
    return {
        "spec_name": spec.name,
        "seed": seed,
        "tool_version": __version__,
        "classification": rep.classification.to_dict(),
        "theorems": [c.to_dict() for c in rep.checks],
        "timing_ms": timing,
    }


def report_text(rep) -> str:
    lines = [rep.classification.text()]
    for a in rep.classification.alerts:
        lines.append(f"alert: {a}")
    width = max(len(c.id) for c in rep.checks) if rep.checks else 0
    for c in rep.checks:
        r = "nan" if not math.isfinite(c.max_residual) else f"{c.max_residual:.3e}"
        lines.append(f"{c.id:<{width}}  {c.status:<7}  residual {r}  tol {c.tolerance:g}")
    counts = {s: sum(c.status == s for c in rep.checks) for s in ("pass", "fail", "vacuous")}
    lines.append(f"{counts['pass']} pass, {counts['fail']} fail, {counts['vacuous']} vacuous")
    return "\n".join(lines) + "\n"


def _suite_ids(arg: str) -> list[str] | None:
    if arg == "all":
        return None
    ids = [s.strip() for s in arg.split(",") if s.strip()]
    unknown = [i for i in ids if i not in CHECK_IDS]
    if unknown or not ids:
        raise CliError(
            f"unknown check id(s): {', '.join(unknown) or '(none given)'}; known: {', '.join(CHECK_IDS)}", EXIT_INPUT
        )
    return ids


def cmd_verify(args) -> int:
    spec = _load(args.file)
    ids = _suite_ids(args.suite)
    config = SuiteConfig(n_points=args.points, n_tuples=args.tuples, seed=args.seed, checks=ids)
    t0 = time.perf_counter()
    try:
        rep = run_suite(spec, config)
    except SpecError as exc:
        raise CliError(f"{args.file}: {exc}", EXIT_INPUT) from exc
    timing = round(1000 * (time.perf_counter() - t0), 3) if args.timing else None
    text = _dumps(report_dict(spec, args.seed, rep, timing)) if args.format == "json" else report_text(rep)
    _emit(text, args.out)
    return EXIT_NOT_CONVERGED if rep.any_failed else EXIT_OK


# --------------------------------------------------------------------------
# search
# --------------------------------------------------------------------------


def cmd_search(args) -> int:
    try:
        problem = SearchProblem(dim=args.dim, target=args.target, floor=args.floor, method=args.method)
    except (SpecError, ValueError) as exc:
        raise CliError(str(exc), EXIT_INPUT) from exc
    if args.budget < 1 or args.per_start < 1:
        raise CliError("--budget and --per-start must be positive", EXIT_INPUT)
    out = Path(args.out or f"searched-{args.target}-d{args.dim}-seed{args.seed}.json")
    res = synthesize(problem, budget=args.budget, seed=args.seed, per_start=args.per_start)
    out.write_text(dump_spec(res.best_spec), encoding="utf-8")
    sidecar = out.with_name(out.stem + ".result.json")
    sidecar.write_text(_dumps(res.to_dict()), encoding="utf-8")
    state = "converged" if res.converged else "not converged"
    print(f"{state} after {res.iterations} evaluations ({res.starts} starts); wrote {out} and {sidecar}")
    for k, v in res.penalty_terms.items():
        print(f"  {k}: {v:.3e}")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


# --------------------------------------------------------------------------
# eval
# --------------------------------------------------------------------------


def _csv(text: str, what: str) -> np.ndarray:
    try:
        vals = [float(s) for s in text.split(",")]
    except ValueError as exc:
        raise CliError(f"{what}: expected comma-separated numbers, got {text!r}", EXIT_INPUT) from exc
    return np.array(vals)


def _components(name: str, arr: np.ndarray) -> list[str]:
    lines = []
    for idx in np.ndindex(arr.shape):
        lines.append(f"{name}[{','.join(str(i + 1) for i in idx)}] = {float(arr[idx])!r}")
    return lines


def cmd_eval(args) -> int:
    spec = _load(args.file)
    d = spec.dim
    point = None
    if spec.backend == "chart":
        if args.point is None:
            raise CliError("--point is required for chart specs", EXIT_INPUT)
        point = _csv(args.point, "--point")
        if point.size != d:
            raise CliError(f"--point needs {d} coordinates, got {point.size}", EXIT_INPUT)
    vectors = [_csv(v, "--vectors") for v in (args.vectors or [])]
    for v in vectors:
        if v.size != d:
            raise CliError(f"vectors need {d} components, got {v.size}", EXIT_INPUT)
    q = args.quantity
    need = VECTOR_COUNTS.get(q)
    if q == "h" and len(vectors) != 2:
        raise CliError("h needs exactly two --vectors", EXIT_INPUT)
    if q != "h" and vectors and len(vectors) != need:
        raise CliError(f"{q} takes {need or 0} vectors, got {len(vectors)}", EXIT_INPUT)
    try:
        frame = frame_at(spec, point)
    except SpecError as exc:
        raise CliError(f"{args.file}: {exc}", EXIT_INPUT) from exc
    conn = levi_civita(frame)
    curv = curvature_package(frame, conn)
    if q == "h":
        print(repr(float(bisectional(frame, curv, vectors[0], vectors[1]))))
        return EXIT_OK
    scalars = {"tau": curv.tau, "taustar": curv.tau_star, "taustarstar": curv.tau_star_star,
               "normnablaP": curv.norm_nabla_P}
    if q in scalars:
        print(repr(float(scalars[q])))
        return EXIT_OK
    tensor = {"F": curv.F.data, "R": curv.R.data, "rho": curv.rho.data}[q]
    if vectors:
        val = tensor
        for v in vectors:
            val = np.tensordot(v, val, axes=(0, 0))
        print(repr(float(val)))
    else:
        print("\n".join(_components(q, tensor)))
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="apm", description="Riemannian almost product manifold toolkit")
    ap.add_argument("--version", action="version", version=f"apm {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, default_points=20):
        p.add_argument("file", help="manifold description (JSON)")
        p.add_argument("--points", type=int, default=default_points, help="sample points for chart specs")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("text", "json"), default="text")
        p.add_argument("--out", help="also write the report to this file")
        p.add_argument("--timing", action="store_true", help="include wall-clock timing in JSON reports")

    p = sub.add_parser("classify", help="class membership (W0, W1+W2, W3)")
    common(p)
    p.add_argument("--tol", type=float, default=None, help="classification tolerance")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("verify", help="run the identity checks")
    common(p)
    p.add_argument("--suite", default="all", help="'all' or comma-separated check ids")
    p.add_argument("--tuples", type=int, default=50, help="random vector tuples per identity")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("search", help="synthesize a Lie group example")
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--target", choices=TARGETS, default="w3")
    p.add_argument("--floor", type=float, default=DEFAULT_FLOOR, help="lower bound on |nabla P|^2")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="objective evaluations")
    p.add_argument("--per-start", type=int, default=DEFAULT_PER_START, help="evaluations per start")
    p.add_argument("--method", choices=("lm", "coordinate"), default="lm")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="spec file to write (sidecar goes next to it)")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="evaluate one quantity at a point")
    p.add_argument("file")
    p.add_argument("--point", help="comma-separated coordinates (chart specs)")
    p.add_argument("--quantity", required=True, choices=QUANTITIES)
    p.add_argument("--vectors", action="append", help="comma-separated vector; repeat per argument")
    p.set_defaults(func=cmd_eval)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "points", 1) is not None and getattr(args, "points", 1) < 1:
        print("apm: error: --points must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except CliError as exc:
        print(f"apm: error: {exc}", file=sys.stderr)
        return exc.code
    except (DegeneratePlaneError, ExprDomainError, TensorError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"apm: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
