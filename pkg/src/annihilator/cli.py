"""Command-line front end.

    annihilator solve problem.json
    annihilator orthogonalize problem.json
    annihilator verify problem.json phase.json

Exit codes: 0 success, 1 usage or problem-file error, 2 solver or
verification failure. Output paths in the problem file are relative to the
problem file's directory.
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .driver import SolveOptions, realify, solve_annihilating_phase, verify
from .errors import AnnihilatorError, SchemaError, SolverFailure
from .extensions import (
    GriddedFunction,
    RealLineFunction,
    SeparableFunction,
    inner_product_matrix,
    marginalize,
    orthogonalize,
    phase_pushforward,
    pullback_l2,
    to_unit_interval,
)
from .functions import ComplexFunction, Gaussian, Polynomial, Sampled, Trigonometric
from .phase import SmoothPhase, samples_csv
from .quadrature import QuadratureOptions

logger = logging.getLogger("annihilator")

EXIT_OK, EXIT_USAGE, EXIT_FAILURE = 0, 1, 2

DEFAULT_OPTIONS = {
    "residual_tol": SolveOptions.residual_tol,
    "abs_tol": QuadratureOptions.abs_tol,
    "scan_points": SolveOptions.scan_points,
    "rank_tol": SolveOptions.rank_tol,
    "max_eps_halvings": SolveOptions.max_eps_halvings,
    "seed": SolveOptions.seed,
    "allow_trivial": SolveOptions.allow_trivial,
}
DEFAULT_OUTPUT = {
    "report_path": "report.json",
    "phase_path": "phase.json",
    "samples_path": "samples.csv",
    "samples_n": 1001,
}
UNIT_KINDS = ("polynomial", "trigonometric", "sampled", "gaussian")
LINE_KINDS = ("gaussian", "sampled", "bspline")


def load_schema():
    text = resources.files("annihilator").joinpath("schema/problem.schema.json").read_text()
    return json.loads(text)


def _pointer(path):
    return "".join(f"/{p}" for p in path)


def _schema_error(err):
    """Translate a jsonschema error into a :class:`SchemaError` with a JSON pointer."""
    path = list(err.absolute_path)
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            path.append(missing[0])
    elif err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = err.schema.get("properties", {})
        extra = [k for k in err.instance if k not in allowed]
        if extra:
            path.append(extra[0])
    return SchemaError(err.message, _pointer(path))


def validate_problem(data):
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        raise _schema_error(jsonschema.exceptions.best_match(errors))


@dataclass
class ProblemFile:
    version: int
    mode: str
    domain: object
    functions: list
    options: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    base_dir: Path = field(default=Path("."), compare=False)

    def to_dict(self):
        return {
            "version": self.version,
            "mode": self.mode,
            "domain": self.domain,
            "functions": self.functions,
            "options": dict(self.options),
            "output": dict(self.output),
        }

    def path(self, key):
        return self.base_dir / self.output[key]


def problem_from_dict(data, base_dir="."):
    """Validate ``data`` and fill every default."""
    validate_problem(data)
    problem = ProblemFile(
        version=data["version"],
        mode=data["mode"],
        domain=data["domain"],
        functions=data["functions"],
        options={**DEFAULT_OPTIONS, **data.get("options", {})},
        output={**DEFAULT_OUTPUT, **data.get("output", {})},
        base_dir=Path(base_dir),
    )
    build_functions(problem)
    return problem


def parse_problem(path):
    """Read, validate and complete a problem file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", "") from exc
    return problem_from_dict(data, path.parent)


def serialize_problem(problem):
    return json.dumps(problem.to_dict(), indent=2)


def _unit_function(spec, ptr):
    kind = spec["kind"]
    if kind not in UNIT_KINDS:
        raise SchemaError(f"kind {kind!r} is not available on the unit interval", f"{ptr}/kind")
    try:
        if kind == "polynomial":
            return Polynomial(spec["coeffs"])
        if kind == "trigonometric":
            return Trigonometric(spec.get("constant", 0.0), spec.get("pairs", ()))
        if kind == "sampled":
            return Sampled(spec["xs"], spec["ys"])
        return Gaussian(spec["coeffs"], spec.get("center", 0.5), spec.get("width", 0.2))
    except ValueError as exc:
        raise SchemaError(str(exc), ptr) from exc


def _line_function(spec, ptr):
    kind = spec["kind"]
    if kind not in LINE_KINDS:
        raise SchemaError(f"kind {kind!r} is not available on the real line", f"{ptr}/kind")
    try:
        if kind == "gaussian":
            return RealLineFunction.gaussian(spec["coeffs"], spec.get("center", 0.0), spec.get("width", 1.0))
        if kind == "sampled":
            return RealLineFunction.sampled(spec["xs"], spec["ys"])
        return RealLineFunction.bspline(spec["knots"], spec["coeffs"], spec.get("degree", 3))
    except (ValueError, KeyError) as exc:
        raise SchemaError(str(exc), ptr) from exc


def _multi_function(spec, ptr, dim, axis):
    kind = spec["kind"]
    if kind == "separable":
        if len(spec["factors"]) != dim:
            raise SchemaError(f"expected {dim} factors", f"{ptr}/factors")
        factors = [_line_function(f, f"{ptr}/factors/{k}") for k, f in enumerate(spec["factors"])]
        return marginalize(SeparableFunction(tuple(factors)), axis)
    if kind == "gridded":
        if len(spec["axes"]) != dim:
            raise SchemaError(f"expected {dim} axes", f"{ptr}/axes")
        try:
            grid = GriddedFunction(tuple(spec["axes"]), np.asarray(spec["values"], dtype=float))
            return marginalize(grid, axis)
        except (ValueError, NotImplementedError) as exc:
            raise SchemaError(str(exc), ptr) from exc
    raise SchemaError(f"kind {kind!r} is not available in several variables", f"{ptr}/kind")


def build_functions(problem):
    """Function objects for the problem: on [0, 1], or on the line after marginalising."""
    domain = problem.domain
    if isinstance(domain, dict):
        dim, axis = domain["real_n"], domain.get("axis", 0)
        if axis >= dim:
            raise SchemaError(f"axis {axis} out of range for {dim} variables", "/domain/axis")

        def make(spec, ptr):
            return _multi_function(spec, ptr, dim, axis)
    elif domain == "real_line":
        make = _line_function
    else:
        make = _unit_function
    out = []
    for j, spec in enumerate(problem.functions):
        ptr = f"/functions/{j}"
        if "re" in spec:
            re, im = make(spec["re"], f"{ptr}/re"), make(spec["im"], f"{ptr}/im")
            out.append(ComplexFunction(re, im) if make is _unit_function else (re, im))
        else:
            out.append(make(spec, ptr))
    return out


def solve_options(problem, seed=None, tol=None):
    o = problem.options
    return SolveOptions(
        residual_tol=float(tol if tol is not None else o["residual_tol"]),
        quad=QuadratureOptions(abs_tol=float(o["abs_tol"])),
        scan_points=int(o["scan_points"]),
        rank_tol=float(o["rank_tol"]),
        max_eps_halvings=int(o["max_eps_halvings"]),
        seed=int(seed if seed is not None else o["seed"]),
        allow_trivial=bool(o["allow_trivial"]),
    )


def _on_line(problem):
    return problem.domain != "unit_interval"


def unit_function_set(problem):
    """The real function family on [0, 1] whose integrals the phase must annihilate."""
    funcs = build_functions(problem)
    if _on_line(problem):
        pulled = []
        for f in funcs:
            if isinstance(f, tuple):
                pulled.append(ComplexFunction(to_unit_interval(f[0]), to_unit_interval(f[1])))
            else:
                pulled.append(to_unit_interval(f))
        funcs = pulled
    return realify(funcs)


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_json(path, data):
    _write(path, json.dumps(data, indent=2) + "\n")


def _say(quiet, message):
    if not quiet:
        print(message)


def _run_solve(problem, opts, quiet):
    fset = unit_function_set(problem)
    try:
        phase, report = solve_annihilating_phase(fset, opts)
    except SolverFailure as exc:
        rep = (exc.diagnostics or {}).get("report")
        data = rep.to_dict() if rep is not None else {"success": False}
        data["error"] = str(exc)
        _write_json(problem.path("report_path"), data)
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    data = report.to_dict()
    if _on_line(problem):
        support = phase_pushforward(phase).support
        data["line_support"] = list(support) if support else None
    _write_json(problem.path("report_path"), data)
    _write(problem.path("phase_path"), phase.to_json() + "\n")
    _write(problem.path("samples_path"), samples_csv(phase, problem.output["samples_n"]))
    _say(quiet, f"solved: max residual {report.max_residual:.3e} (tolerance {opts.residual_tol:g})")
    return EXIT_OK


def _indexed(path, j):
    return path.with_name(f"{path.stem}_{j}{path.suffix}")


def _run_orthogonalize(problem, opts, quiet):
    funcs = build_functions(problem)
    domain = "real_line" if _on_line(problem) else "unit_interval"
    try:
        phases, report = orthogonalize(funcs, opts, domain=domain)
    except SolverFailure as exc:
        _write_json(problem.path("report_path"), {"success": False, "error": str(exc)})
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    data = report.to_dict()
    data["success"] = report.max_inner_product < opts.residual_tol
    _write_json(problem.path("report_path"), data)
    _write_json(problem.path("phase_path"), {"phases": [g.to_dict() for g in phases]})
    for j, g in enumerate(phases):
        _write(_indexed(problem.path("samples_path"), j), samples_csv(g, problem.output["samples_n"]))
    if not data["success"]:
        print(f"orthogonality {report.max_inner_product:.3e} above tolerance", file=sys.stderr)
        return EXIT_FAILURE
    _say(quiet, f"orthogonalized {len(phases)} functions: max |<phi_j, phi_k>| {report.max_inner_product:.3e}")
    return EXIT_OK


def _run_verify(problem, opts, phase_file, quiet):
    try:
        data = json.loads(Path(phase_file).read_text())
        if "phases" in data:
            phases = [SmoothPhase.from_dict(d) for d in data["phases"]]
        else:
            phase = SmoothPhase.from_dict(data)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"cannot read phase file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if "phases" in data:
        funcs = build_functions(problem)
        if _on_line(problem):
            funcs = [pullback_l2(f) for f in funcs]
        if len(phases) != len(funcs):
            print("phase file and problem disagree on the number of functions", file=sys.stderr)
            return EXIT_USAGE
        gram = inner_product_matrix(funcs, phases, opts)
        worst = float(np.max(np.abs(gram - np.diag(np.diag(gram))))) if len(funcs) > 1 else 0.0
        ok = worst < opts.residual_tol
        _write_json(problem.path("report_path"), {"success": ok, "max_inner_product": worst})
    else:
        report = verify(unit_function_set(problem), phase, opts)
        ok = report.success
        _write_json(problem.path("report_path"), report.to_dict())
        worst = report.max_residual
    if not ok:
        print(f"verification failed (worst {worst:.3e})", file=sys.stderr)
        return EXIT_FAILURE
    _say(quiet, f"verified: worst {worst:.3e}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(defaults):
    # subcommands must not reset flags given before the command name
    common = argparse.ArgumentParser(add_help=False)
    kw = {} if defaults else {"default": argparse.SUPPRESS}
    common.add_argument("--seed", type=int, help="override options.seed", **({"default": None} | kw))
    common.add_argument("--tol", type=float, help="override options.residual_tol", **({"default": None} | kw))
    common.add_argument("--quiet", action="store_true", help="print nothing on success",
                        **({"default": False} | kw))
    return common


def build_parser():
    parser = _Parser(prog="annihilator", description="Smooth phases that annihilate integrals.",
                     parents=[_common(True)])
    common = _common(False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("solve", parents=[common], help="find an annihilating phase")
    p.add_argument("problem")
    p = sub.add_parser("orthogonalize", parents=[common], help="phase-orthogonalise a family")
    p.add_argument("problem")
    p = sub.add_parser("verify", parents=[common], help="re-check a phase against a problem")
    p.add_argument("problem")
    p.add_argument("phase")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        problem = parse_problem(args.problem)
        if args.command != "verify" and problem.mode != args.command:
            raise SchemaError(f"problem mode {problem.mode!r} does not match command {args.command!r}", "/mode")
        if args.tol is not None and not args.tol > 0:
            raise SchemaError("--tol must be positive", "/options/residual_tol")
        opts = solve_options(problem, args.seed, args.tol)
    except OSError as exc:
        print(f"cannot read problem file: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as exc:
        print(f"problem file error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "solve":
            return _run_solve(problem, opts, args.quiet)
        if args.command == "orthogonalize":
            return _run_orthogonalize(problem, opts, args.quiet)
        return _run_verify(problem, opts, args.phase, args.quiet)
    except AnnihilatorError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
