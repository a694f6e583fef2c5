"""Top-level solve: a smooth phase annihilating every integral of a family.

The solve follows the induction on the number of functions:

* Case 1, the family stays independent on both sides of some p: build the
  Hobby-Rice partitions of [0, p] and [p, 1], the four-level step phase,
  mollify it and Newton-correct with a bump basis. If Newton fails, halve
  the mollification width and try again.
* Case 2, it is dependent on both sides of some q: each side has fewer
  independent functions, so solve each side separately (rescaled to
  [0, 1]) and glue the two phases at q, where both vanish to all orders.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .corrector import build_bump_basis, newton_correct
from .errors import CorrectorFailure, SolverFailure
from .functions import ComplexFunction, FunctionSet, dependence_bounds, gram_matrix, independent_subset
from .partition import PartitionOptions, solve_partition
from .phase import SmoothPhase, build_g0, concatenate, derivative_continuity, mollify
from .quadrature import DEFAULT_QUADRATURE, QuadratureOptions, residual_vector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveOptions:
    residual_tol: float = 1e-8
    quad: QuadratureOptions = DEFAULT_QUADRATURE
    scan_points: int = 256
    rank_tol: float = 1e-8
    max_eps_halvings: int = 24
    seed: int = 0
    allow_trivial: bool = False
    partition_seeds: int = 24
    newton_max_iter: int = 50

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")


@dataclass
class TraceEntry:
    interval: tuple
    case: str
    point: float
    n_effective: int
    margin: float = float("nan")

    def to_dict(self):
        point = None if np.isnan(self.point) else self.point
        # JSON has no infinity: an exactly singular side is reported as None too
        margin = float(self.margin) if np.isfinite(self.margin) else None
        return {"interval": list(self.interval), "case": self.case, "point": point,
                "n_effective": self.n_effective, "rank_margin": margin}


@dataclass
class SolveReport:
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    eps_final: float = 0.0
    newton_iters: int = 0
    recursion_trace: list = field(default_factory=list)
    r_left: int = 0
    r_right: int = 0
    wall_time: float = 0.0
    residual_tol: float = 0.0
    checks: dict = field(default_factory=dict)

    @property
    def max_residual(self):
        return float(np.max(np.abs(self.residuals))) if len(self.residuals) else 0.0

    @property
    def success(self):
        return self.max_residual < self.residual_tol and all(self.checks.values())

    def to_dict(self):
        return {
            "success": self.success,
            "residuals": [[float(z.real), float(z.imag)] for z in np.asarray(self.residuals, dtype=complex)],
            "max_residual": self.max_residual,
            "residual_tol": self.residual_tol,
            "eps_final": self.eps_final,
            "newton_iters": self.newton_iters,
            "recursion_trace": [t.to_dict() for t in self.recursion_trace],
            "r_left": self.r_left,
            "r_right": self.r_right,
            "wall_time": self.wall_time,
            "checks": dict(self.checks),
        }


def realify(functions):
    """Split complex functions into (Re, Im) pairs; real entries pass through unchanged."""
    entries = []
    for f in functions:
        if isinstance(f, ComplexFunction):
            entries += [f.re, f.im]
        else:
            entries.append(f)
    return FunctionSet(entries)


def _predicted_halvings(exc):
    """Halvings of eps expected to bring Newton into its basin.

    The offset C(eps) that Newton must remove shrinks linearly with eps, and
    so do the first-step reach and contraction reported by the corrector.
    """
    diag = exc.diagnostics or {}
    if "theta" in diag:
        ratio = diag["theta"] / 0.25
    elif "first_step_reach" in diag:
        ratio = diag["first_step_reach"] / 0.5
    else:
        return 1
    return max(1, int(np.ceil(np.log2(ratio))))


def _smallest_relative_eigenvalue(fset, a, b, quad):
    w = np.linalg.eigvalsh(gram_matrix(fset, (a, b), quad))
    return float(w[0] / w[-1]) if w[-1] > 0 else 0.0


def _rank_margin(fset, point, independent, opts):
    """How far the case decision at ``point`` is from the rank threshold.

    The worse of the two sides' smallest relative Gram eigenvalues, divided
    by ``rank_tol`` for an independent split and inverted for a dependent
    one, so values above 1 agree with the decision and values near 1 mean
    the classification could flip.
    """
    sides = [_smallest_relative_eigenvalue(fset, 0.0, point, opts.quad),
             _smallest_relative_eigenvalue(fset, point, 1.0, opts.quad)]
    if independent:
        return min(sides) / opts.rank_tol
    worst = max(sides)
    return opts.rank_tol / worst if worst > 0 else float("inf")


def _global(interval, a, b):
    lo, hi = interval
    return (lo + (hi - lo) * a, lo + (hi - lo) * b)


class _Solver:
    def __init__(self, opts):
        self.opts = opts
        self.report = SolveReport(residual_tol=opts.residual_tol)
        self.eps_seen = []

    def solve(self, fset, interval=(0.0, 1.0), max_n=None):
        opts = self.opts
        norms = fset.l1_norms(opts.quad)
        scale = float(np.max(norms))
        keep = [j for j in range(fset.n) if scale > 0 and norms[j] >= opts.rank_tol * scale]
        if not keep:
            self.report.recursion_trace.append(TraceEntry(interval, "zero", float("nan"), 0))
            return SmoothPhase.zero()
        fset = fset.subset(keep)
        fset = fset.subset(independent_subset(fset, opts.rank_tol, opts.quad))
        n = fset.n
        if max_n is not None and n > max_n:
            raise SolverFailure(
                f"recursion on {interval} did not reduce the number of functions ({n} > {max_n})",
                diagnostics={"interval": interval},
            )

        bounds = dependence_bounds(fset, opts.scan_points, opts.rank_tol, opts.quad)
        if bounds.independent_split:
            p = 0.5 * (bounds.L + bounds.R)
            margin = _rank_margin(fset, p, True, opts)
            self.report.recursion_trace.append(
                TraceEntry(interval, "split-independent", _global(interval, p, p)[0], n, margin))
            return self._case_one(fset, p, scale)

        q = min(max(0.5 * (bounds.L + bounds.R), bounds.R), bounds.L)
        if not 0 < q < 1:
            raise SolverFailure(f"degenerate split point q={q} on {interval}")
        margin = _rank_margin(fset, q, False, opts)
        self.report.recursion_trace.append(TraceEntry(interval, "split-dependent", _global(interval, q, q)[0], n, margin))
        left = self.solve(fset.rescaled(0.0, q), _global(interval, 0.0, q), n - 1)
        right = self.solve(fset.rescaled(q, 1.0), _global(interval, q, 1.0), n - 1)
        return concatenate([left.rescaled(0.0, q), right.rescaled(q, 1.0)])

    def _case_one(self, fset, p, scale):
        opts = self.opts
        popts = PartitionOptions(seeds=opts.partition_seeds, rank_tol=opts.rank_tol, seed=opts.seed, quad=opts.quad)
        left = solve_partition(fset.restrict(0.0, p), popts)
        right = solve_partition(fset.restrict(p, 1.0), popts)
        if not self.report.recursion_trace[:-1]:
            self.report.r_left, self.report.r_right = left.r, right.r
        step = build_g0(left, right)
        tol = min(1e-9 * scale, 0.1 * opts.residual_tol)
        eps = step.min_gap() / 8
        halvings = 0
        last_error = None
        while True:
            smooth = mollify(step, eps)
            try:
                basis = build_bump_basis(step, fset, 2 * eps, opts.seed, opts.quad)
                u, trace = newton_correct(fset, smooth, basis, tol, opts.newton_max_iter, opts.quad)
            except CorrectorFailure as exc:
                logger.info("Newton correction failed at eps=%g: %s", eps, exc)
                last_error = exc
                if halvings >= opts.max_eps_halvings:
                    break
                k = min(_predicted_halvings(exc), opts.max_eps_halvings - halvings)
                halvings += k
                eps *= 0.5 ** k
                continue
            self.report.newton_iters += len(trace) - 1
            self.eps_seen.append(eps)
            return smooth.with_correction(basis.with_u(u))
        raise SolverFailure(
            f"correction failed after {opts.max_eps_halvings} halvings of eps",
            diagnostics={"last_error": str(last_error)},
        )


def solve_annihilating_phase(fset, opts=None):
    """Smooth compactly supported g with |integral f_j exp(ig)| < residual_tol for all j.

    Returns ``(phase, report)``. Raises :class:`SolverFailure` (with the
    report in ``diagnostics``) if no phase reaches the tolerance.
    """
    opts = opts or SolveOptions()
    if isinstance(fset, (list, tuple)):
        fset = FunctionSet(fset)
    if fset.domain != (0.0, 1.0):
        fset = fset.rescaled(*fset.domain)
    start = time.perf_counter()
    solver = _Solver(opts)
    report = solver.report

    if opts.allow_trivial:
        res = residual_vector(fset, None, opts.quad)
        if np.max(np.abs(res)) < opts.residual_tol:
            report.residuals = res
            report.recursion_trace.append(TraceEntry((0.0, 1.0), "trivial", float("nan"), fset.n))
            report.wall_time = time.perf_counter() - start
            return SmoothPhase.zero(), report

    phase = solver.solve(fset)
    report.residuals = residual_vector(fset, phase, opts.quad)
    report.eps_final = min(solver.eps_seen) if solver.eps_seen else 0.0
    report.wall_time = time.perf_counter() - start
    if report.max_residual >= opts.residual_tol:
        raise SolverFailure(
            f"final residual {report.max_residual:.3g} above tolerance {opts.residual_tol:g}",
            best=phase,
            diagnostics={"report": report},
        )
    return phase, report


def verify(fset, phase, opts=None):
    """Independent re-check of a phase: residual, support and smoothness.

    Residuals are recomputed with a 10x tighter quadrature tolerance. The
    report's ``checks`` dict holds one boolean per invariant.
    """
    opts = opts or SolveOptions()
    if isinstance(fset, (list, tuple)):
        fset = FunctionSet(fset)
    start = time.perf_counter()
    report = SolveReport(residual_tol=opts.residual_tol, eps_final=phase.epsilon)
    report.residuals = residual_vector(fset, phase, opts.quad.tightened(10))
    report.checks["residual"] = report.max_residual < opts.residual_tol
    segs = phase.segments
    ends_zero = segs[0].is_level and segs[0].start == 0 and segs[-1].is_level and segs[-1].stop == 0
    if phase.correction is not None and len(phase.correction):
        lo = min(b.support[0] for b in phase.correction.bumps)
        hi = max(b.support[1] for b in phase.correction.bumps)
        ends_zero = ends_zero and segs[0].x1 <= lo and hi <= segs[-1].x0
    report.checks["compact_support"] = bool(ends_zero)
    report.checks["continuity"] = derivative_continuity(phase) < 1e-5
    report.wall_time = time.perf_counter() - start
    return report
