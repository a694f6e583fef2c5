"""Domain reductions and phase-only orthogonalisation.

Functions on the real line are pulled back to (0, 1) through the logistic
map y = 1 / (1 + exp(-x)), whose Jacobian is dx = dy / (y (1 - y)). A phase
g found on (0, 1) then acts on the line as x -> g(logistic(x)). Functions of
several variables are first integrated over all but one coordinate.

Orthogonalisation works from the last function backwards: phi_n = f_n, and
each earlier f_j gets a phase making f_j e^{i g_j} orthogonal to all later
phi_k. Only phases change, so |phi_j| = |f_j| pointwise.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sp_integrate
from scipy.interpolate import BSpline
from scipy.special import expit, logit

from .driver import SolveOptions, realify, solve_annihilating_phase
from .errors import AnnihilatorError, SolverFailure
from .functions import ComplexFunction, FunctionSet, FunctionSpec, Generic, Sampled
from .phase import SmoothPhase
from .quadrature import DEFAULT_QUADRATURE, integrate

logger = logging.getLogger(__name__)

TAIL_RTOL = 1e-12
MAX_RANGE = 1e4


class IntegrabilityError(AnnihilatorError, ValueError):
    """Raised when a function on the line does not look integrable."""


@dataclass(frozen=True, eq=False)
class RealLineFunction:
    """A real function on the whole line.

    kinds:
      * ``gaussian``: polynomial (ascending ``coeffs``) times
        ``exp(-(x - center)**2 / (2 width**2))``
      * ``bspline``: scipy B-spline from ``knots``, ``coeffs``, ``degree``; zero
        outside its base interval
      * ``sampled``: piecewise-linear through ``(xs, ys)``, zero outside
      * ``callable``: any vectorised ``func``; ``support`` may give a hint
    """

    kind: str
    params: dict = field(default_factory=dict)
    func: object = None
    integrability: str = "L1"

    def __post_init__(self):
        if self.kind not in ("gaussian", "bspline", "sampled", "callable"):
            raise ValueError(f"unknown real-line kind {self.kind!r}")
        if self.integrability not in ("L1", "L2", "L1+L2"):
            raise ValueError("integrability must be 'L1', 'L2' or 'L1+L2'")
        p = dict(self.params)
        if self.kind == "gaussian":
            p["coeffs"] = tuple(float(c) for c in p.get("coeffs", (1.0,)))
            p["center"] = float(p.get("center", 0.0))
            p["width"] = float(p.get("width", 1.0))
            if not p["width"] > 0:
                raise ValueError("width must be positive")
        elif self.kind == "bspline":
            p["degree"] = int(p.get("degree", 3))
            p["knots"] = tuple(float(v) for v in p["knots"])
            p["coeffs"] = tuple(float(v) for v in p["coeffs"])
            if len(p["knots"]) != len(p["coeffs"]) + p["degree"] + 1:
                raise ValueError("bspline needs len(knots) == len(coeffs) + degree + 1")
            if np.any(np.diff(p["knots"]) < 0):
                raise ValueError("bspline knots must be non-decreasing")
        elif self.kind == "sampled":
            xs = np.asarray(p["xs"], dtype=float)
            ys = np.asarray(p["ys"], dtype=float)
            if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2 or np.any(np.diff(xs) <= 0):
                raise ValueError("sampled needs strictly increasing xs and ys of equal length >= 2")
            p["xs"], p["ys"] = tuple(xs), tuple(ys)
        elif self.func is None:
            raise ValueError("callable kind needs func")
        object.__setattr__(self, "params", p)

    @classmethod
    def gaussian(cls, coeffs=(1.0,), center=0.0, width=1.0):
        return cls("gaussian", {"coeffs": coeffs, "center": center, "width": width})

    @classmethod
    def sampled(cls, xs, ys):
        return cls("sampled", {"xs": xs, "ys": ys})

    @classmethod
    def bspline(cls, knots, coeffs, degree=3):
        return cls("bspline", {"knots": knots, "coeffs": coeffs, "degree": degree})

    @classmethod
    def from_callable(cls, func, support=None, integrability="L1"):
        params = {} if support is None else {"support": tuple(float(v) for v in support)}
        return cls("callable", params, func, integrability)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "gaussian":
            z = (x - p["center"]) / p["width"]
            return np.polynomial.polynomial.polyval(x, p["coeffs"]) * np.exp(-0.5 * z * z)
        if self.kind == "bspline":
            spline = BSpline(np.array(p["knots"]), np.array(p["coeffs"]), p["degree"], extrapolate=False)
            return np.nan_to_num(spline(x), nan=0.0)
        if self.kind == "sampled":
            return np.interp(x, p["xs"], p["ys"], left=0.0, right=0.0)
        return np.asarray(self.func(x), dtype=float) * np.ones_like(x)

    @property
    def compact_support(self):
        """Exact support for compactly supported kinds, else ``None``."""
        p = self.params
        if self.kind == "bspline":
            k = p["degree"]
            return (p["knots"][k], p["knots"][-k - 1])
        if self.kind == "sampled":
            return (p["xs"][0], p["xs"][-1])
        return None

    @property
    def breakpoints(self):
        if self.kind == "sampled":
            return np.array(self.params["xs"])
        if self.kind == "bspline":
            return np.unique(self.params["knots"])
        return np.empty(0)

    def to_dict(self):
        if self.kind == "callable":
            raise TypeError("callable real-line functions are not serialisable")
        out = {"kind": self.kind}
        for k, v in self.params.items():
            out[k] = list(v) if isinstance(v, tuple) else v
        return out


def _quad(f, a, b, points=()):
    pts = [p for p in points if a < p < b]
    val, _ = sp_integrate.quad(f, a, b, points=pts or None, limit=400, epsabs=0.0, epsrel=1e-12)
    return val


def truncation_range(f, rel_tol=TAIL_RTOL, power=1):
    """Interval outside which the mass of |f|**power is below ``rel_tol`` of the total.

    Compactly supported kinds return their support. Otherwise the interval
    is doubled until the mass gained by the last doubling is negligible;
    if it keeps growing past ``MAX_RANGE`` the function is declared
    non-integrable.
    """
    exact = f.compact_support
    if exact is not None:
        return exact
    p = f.params
    if f.kind == "gaussian":
        lo, hi = p["center"] - p["width"], p["center"] + p["width"]
    elif "support" in p:
        lo, hi = p["support"]
    else:
        lo, hi = -1.0, 1.0

    def g(x):
        return np.abs(f(x)) ** power

    mass = _quad(g, lo, hi)
    while True:
        half = hi - lo
        new_lo, new_hi = lo - half, hi + half
        left = _quad(g, new_lo, lo)
        right = _quad(g, hi, new_hi)
        total = mass + left + right
        if total == 0.0 and half > 1.0:
            return lo, hi
        if left <= rel_tol * total and right <= rel_tol * total:
            return _trim(g, lo, hi, rel_tol * total)
        lo, hi, mass = new_lo, new_hi, total
        if hi - lo > MAX_RANGE:
            raise IntegrabilityError(
                f"|f|^{power} mass keeps growing on [{lo:g}, {hi:g}]; the function does not look integrable"
            )


def _trim(g, lo, hi, allowed, points=100001):
    """Shrink [lo, hi] so that each cut-off piece carries under ``allowed / 4``."""
    x = np.linspace(lo, hi, points)
    cells = 0.5 * (g(x[1:]) + g(x[:-1])) * np.diff(x)
    left = np.concatenate(([0.0], np.cumsum(cells)))
    right = left[-1] - left
    i = int(np.searchsorted(left, 0.25 * allowed, side="right")) - 1
    k = int(np.searchsorted(-right, -0.25 * allowed, side="left"))
    if i >= k:
        return lo, hi
    return float(x[max(i, 0)]), float(x[min(k, points - 1)])


@dataclass(frozen=True, eq=False)
class UnitPullback(FunctionSpec):
    """``y -> f(logit y) / (y (1 - y))**power`` on (0, 1), zero outside ``window``.

    ``power = 1`` preserves integrals (L1 pullback); ``power = 1/2``
    preserves inner products (L2 pullback).
    """

    base: RealLineFunction
    window: tuple
    power: float = 1.0
    kind = "pullback"

    @property
    def knots(self):
        pts = [self.window[0], self.window[1]]
        pts += list(expit(self.base.breakpoints))
        return np.unique([p for p in pts if 0 < p < 1])

    def _eval(self, y):
        lo, hi = self.window
        inside = (y > lo) & (y < hi)
        out = np.zeros(y.shape)
        yi = y[inside]
        out[inside] = self.base(logit(yi)) / (yi * (1.0 - yi)) ** self.power
        return out

    def sampled(self, points=16385):
        """Piecewise-linear version on a grid uniform in x, i.e. clustered near 0 and 1."""
        xlo, xhi = logit(self.window[0]), logit(self.window[1])
        y = expit(np.linspace(xlo, xhi, points))
        y = np.unique(np.clip(y, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0)))
        ys = self._eval(y)
        xs = np.concatenate(([0.0], y, [1.0]))
        return Sampled(xs, np.concatenate(([0.0], ys, [0.0])))


def to_unit_interval(f, power=1.0, rel_tol=TAIL_RTOL, sampled_points=None):
    """Pull ``f`` on the line back to (0, 1) through the logistic map.

    The result integrates to the same value as ``f`` (``power=1``) or has
    the same inner products (``power=1/2``). It is evaluated exactly inside
    the numerically significant window and set to 0 outside; pass
    ``sampled_points`` to get a piecewise-linear :class:`Sampled` instead.
    Raises :class:`IntegrabilityError` if ``|f|**(1/power)`` has no finite
    mass.
    """
    lo, hi = truncation_range(f, rel_tol, power=1.0 / power)
    window = (float(expit(lo)), float(expit(hi)))
    if not 0.0 < window[0] < window[1] < 1.0:
        raise IntegrabilityError(f"significant range [{lo:g}, {hi:g}] is too wide for double precision")
    pulled = UnitPullback(f, window, power)
    return pulled.sampled(sampled_points) if sampled_points else pulled


@dataclass(frozen=True)
class PushedPhase:
    """x -> g(logistic(x)) on the line."""

    phase: SmoothPhase

    def __call__(self, x):
        return self.phase(expit(np.asarray(x, dtype=float)))

    @property
    def support(self):
        """Compact x-range outside which the pushed phase is 0, or ``None`` if g is 0."""
        ends = [(s.x0, s.x1) for s in self.phase.segments if not (s.is_level and s.start == 0.0)]
        corr = self.phase.correction
        if corr is not None:
            ends += [b.support for b, u in zip(corr.bumps, corr.u) if u != 0.0]
        if not ends:
            return None
        lo = min(e[0] for e in ends)
        hi = max(e[1] for e in ends)
        return float(logit(lo)), float(logit(hi))


def phase_pushforward(phase):
    """Move a phase on (0, 1) to the line: x -> g(1 / (1 + exp(-x)))."""
    return PushedPhase(phase)


@dataclass(frozen=True, eq=False)
class SeparableFunction:
    """Product f_1(x_1) f_2(x_2) ... f_N(x_N) of real-line factors."""

    factors: tuple

    @property
    def dim(self):
        return len(self.factors)


@dataclass(frozen=True, eq=False)
class GriddedFunction:
    """Samples of a function of N <= 3 variables on a tensor grid."""

    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        values = np.asarray(self.values, dtype=float)
        if values.shape != tuple(a.size for a in axes):
            raise ValueError("values shape must match the axis lengths")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @property
    def dim(self):
        return len(self.axes)


def marginalize(f, axis=0):
    """Integrate out every coordinate except ``axis``; returns a :class:`RealLineFunction`.

    Separable products use the factor rule (any N). Gridded functions use
    Simpson's rule on each removed axis and are limited to N <= 3.
    """
    if not 0 <= axis < f.dim:
        raise ValueError(f"axis {axis} out of range for a function of {f.dim} variables")
    if isinstance(f, SeparableFunction):
        scale = 1.0
        for k, g in enumerate(f.factors):
            if k != axis:
                lo, hi = truncation_range(g)
                scale *= _quad(g, lo, hi, g.breakpoints)
        keep = f.factors[axis]
        if keep.kind == "gaussian":
            p = keep.params
            return RealLineFunction.gaussian([scale * c for c in p["coeffs"]], p["center"], p["width"])
        return RealLineFunction.from_callable(lambda x: scale * keep(x), support=keep.compact_support,
                                              integrability=keep.integrability)
    if isinstance(f, GriddedFunction):
        if f.dim > 3:
            raise NotImplementedError("gridded marginals are supported for at most 3 variables")
        vals = f.values
        for k in reversed(range(f.dim)):
            if k != axis:
                vals = sp_integrate.simpson(vals, x=f.axes[k], axis=k)
        return RealLineFunction.sampled(f.axes[axis], vals)
    raise TypeError("marginalize expects a SeparableFunction or GriddedFunction")


@dataclass
class OrthogonalizeReport:
    levels: list = field(default_factory=list)
    inner_products: np.ndarray = None
    wall_time: float = 0.0

    @property
    def max_inner_product(self):
        if self.inner_products is None or self.inner_products.size <= 1:
            return 0.0
        off = self.inner_products - np.diag(np.diag(self.inner_products))
        return float(np.max(np.abs(off)))

    def to_dict(self):
        return {
            "levels": [{"index": j, **rep.to_dict()} for j, rep in self.levels],
            "max_inner_product": self.max_inner_product,
            "wall_time": self.wall_time,
        }


def _as_complex(f):
    if isinstance(f, ComplexFunction):
        return f
    zero = Generic(lambda x: np.zeros(np.shape(x)), label="zero")
    return ComplexFunction(f, zero)


def _modulated(f, phase):
    """phi = f * exp(i g) as a complex callable with knots."""
    phase = phase or SmoothPhase.zero()

    def value(x):
        return f(x) * np.exp(1j * phase(x))

    knots = np.concatenate((np.asarray(f.knots, dtype=float).ravel(), phase.knots))
    return value, knots


class _LastValue:
    """One-slot memo: the Re and Im entries of a product see the same nodes back to back."""

    def __init__(self, func):
        self.func = func
        self.x = None
        self.value = None

    def __call__(self, x):
        if self.x is None or self.x.shape != x.shape or not np.array_equal(self.x, x):
            self.x = np.array(x, copy=True)
            self.value = self.func(x)
        return self.value


def _inner_integrands(fj, phis):
    """Re and Im parts of conj(f_j) * phi_k for each later phi_k."""
    out = []
    for phi, knots in phis:
        ks = tuple(np.concatenate((np.asarray(fj.knots, dtype=float).ravel(), knots)))
        prod = _LastValue(lambda x, phi=phi: np.conj(fj(x)) * phi(x))
        out.append(ComplexFunction(Generic(lambda x, p=prod: p(x).real, ks, "re"),
                                   Generic(lambda x, p=prod: p(x).imag, ks, "im")))
    return out


def inner_product_matrix(functions, phases, opts=None):
    """Matrix of <phi_j, phi_k> = integral conj(phi_j) phi_k over [0, 1]."""
    quad = opts.quad if opts is not None else DEFAULT_QUADRATURE
    phis = [_modulated(_as_complex(f), g) for f, g in zip(functions, phases)]
    n = len(phis)
    knots = np.unique(np.concatenate([k for _, k in phis])) if phis else np.empty(0)

    def integrand(x):
        vals = np.stack([phi(x) for phi, _ in phis])
        return (np.conj(vals)[:, None, :] * vals[None, :, :]).reshape(n * n, -1)

    return integrate(integrand, 0.0, 1.0, knots, quad).reshape(n, n)


def orthogonalize(functions, opts=None, domain="unit_interval"):
    """Phases g_1..g_n making phi_j = f_j e^{i g_j} pairwise orthogonal.

    ``functions`` are complex (:class:`ComplexFunction`) or real functions on
    [0, 1], or :class:`RealLineFunction` (or pairs of them for complex
    values) when ``domain == "real_line"``. On the line the functions are
    pulled back with the inner-product preserving map, and the returned
    phases live on (0, 1); use :func:`phase_pushforward` to move them.

    Returns ``(phases, report)``. An inner solver failure is re-raised as
    :class:`SolverFailure` naming the failing index.
    """
    opts = opts or SolveOptions()
    start = time.perf_counter()
    if domain == "real_line":
        functions = [pullback_l2(f) for f in functions]
    elif domain != "unit_interval":
        raise ValueError(f"unknown domain {domain!r}")
    fs = [_as_complex(f) for f in functions]
    n = len(fs)
    if n == 0:
        raise ValueError("orthogonalize needs at least one function")
    report = OrthogonalizeReport()
    phases = [None] * n
    phases[-1] = SmoothPhase.zero()
    for j in range(n - 2, -1, -1):
        phis = [_modulated(fs[k], phases[k]) for k in range(j + 1, n)]
        family = realify(_inner_integrands(fs[j], phis))
        try:
            g, rep = solve_annihilating_phase(family, opts)
        except SolverFailure as exc:
            raise SolverFailure(f"orthogonalisation failed at function {j}: {exc}", exc.best,
                                {"index": j, **(exc.diagnostics or {})}) from exc
        phases[j] = g.scaled(-1.0)
        report.levels.append((j, rep))
        logger.info("function %d: max residual %.3g", j, rep.max_residual)
    report.inner_products = inner_product_matrix(fs, phases, opts)
    report.wall_time = time.perf_counter() - start
    return phases, report


def pullback_l2(f):
    """Inner-product preserving pullback of a real-line function or (re, im) pair."""
    if isinstance(f, tuple):
        re, im = f
        return ComplexFunction(to_unit_interval(re, power=0.5), to_unit_interval(im, power=0.5))
    return to_unit_interval(f, power=0.5)


def solve_on_real_line(functions, opts=None):
    """Annihilating phase for integrable functions on the line.

    Returns ``(phase, pushed, report)``: the phase on (0, 1), its push to the
    line, and the solve report.
    """
    pulled = [to_unit_interval(f) for f in functions]
    phase, report = solve_annihilating_phase(FunctionSet(pulled), opts)
    return phase, phase_pushforward(phase), report
