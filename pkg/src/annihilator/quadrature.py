"""Composite adaptive Gauss-Legendre quadrature with knot-aligned panels.

Every integral in the package goes through :func:`integrate_panels`. The
integration range is first cut at all structural knots (sampled-data
breakpoints, ramp ends, bump support ends) so that the integrand is smooth
inside each initial panel. Each panel is then bisected until the
Gauss-Legendre value on the panel and the sum over its two halves agree.

Integrands are vectorised: ``func(x)`` receives a 1-D array of nodes and
returns either an array of the same length or an ``(m, len(x))`` array of
``m`` components that are integrated simultaneously.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AccuracyError

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadratureOptions:
    """Tolerances for the adaptive rule.

    ``abs_tol`` is absolute because the targets of the solver are zeros.
    """

    abs_tol: float = 1e-10
    max_panel_depth: int = 30
    nodes_per_panel: int = 15

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if self.nodes_per_panel < 2:
            raise ValueError("nodes_per_panel must be at least 2")
        if self.max_panel_depth < 1:
            raise ValueError("max_panel_depth must be at least 1")

    def tightened(self, factor=10.0):
        return QuadratureOptions(self.abs_tol / factor, self.max_panel_depth, self.nodes_per_panel)


DEFAULT_QUADRATURE = QuadratureOptions()


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Nodes and weights of the n-point rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def panel_edges(a, b, knots=()):
    """Sorted unique edges of [a, b] split at every knot strictly inside it."""
    k = np.asarray(list(knots), dtype=float).ravel()
    k = k[(k > a) & (k < b)]
    return np.unique(np.concatenate(([a], k, [b])))


def _as_components(values, npts):
    values = np.asarray(values)
    if values.ndim == 1:
        return values.reshape(1, npts)
    return values.reshape(values.shape[0], npts)


def _rule(func, lo, hi, nodes, weights):
    """Apply the rule on every panel at once; returns (values, abs_values) of shape (m, P)."""
    width = hi - lo
    x = lo[:, None] + width[:, None] * nodes[None, :]
    vals = _as_components(func(x.ravel()), x.size)
    vals = vals.reshape(vals.shape[0], lo.size, nodes.size)
    scaled = weights[None, None, :] * width[None, :, None]
    return (vals * scaled).sum(axis=2), (np.abs(vals) * scaled).sum(axis=2)


def integrate_panels(func, edges, opts=DEFAULT_QUADRATURE, *, raise_on_failure=True):
    """Integrate ``func`` over each consecutive pair of ``edges``.

    Returns ``(values, error)`` where ``values`` has shape ``(P, m)`` with
    one row per initial panel and ``error`` is the summed error estimate.
    Raises :class:`AccuracyError` when a panel is still unresolved at
    ``max_panel_depth``.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("edges must be strictly increasing with at least two entries")
    nodes, weights = gauss_legendre(opts.nodes_per_panel)
    total_len = edges[-1] - edges[0]

    lo = edges[:-1].copy()
    hi = edges[1:].copy()
    # half the budget by length, half shared equally: tiny panels (narrow ramps) get a usable share
    budget = 0.5 * opts.abs_tol * ((hi - lo) / total_len + 1.0 / lo.size) / (hi - lo)
    owner = np.arange(lo.size)
    depth = np.zeros(lo.size, dtype=int)
    coarse, _ = _rule(func, lo, hi, nodes, weights)
    m = coarse.shape[0]
    out = np.zeros((edges.size - 1, m), dtype=coarse.dtype)
    error = 0.0
    failed = False

    while lo.size:
        mid = 0.5 * (lo + hi)
        left, left_abs = _rule(func, lo, mid, nodes, weights)
        right, right_abs = _rule(func, mid, hi, nodes, weights)
        fine = left + right
        err = np.abs(fine - coarse).max(axis=0)
        floor = 64 * _EPS * (left_abs + right_abs).max(axis=0)
        allowed = budget[owner] * (hi - lo) + floor
        done = err <= allowed
        stuck = ~done & (depth + 1 >= opts.max_panel_depth)
        if np.any(stuck):
            failed = True
            done = done | stuck
        np.add.at(out, owner[done], fine[:, done].T)
        error += float(err[done].sum())

        keep = ~done
        lo, mid, hi = lo[keep], mid[keep], hi[keep]
        owner, depth = owner[keep], depth[keep] + 1
        lo, hi = np.concatenate((lo, mid)), np.concatenate((mid, hi))
        owner, depth = np.concatenate((owner, owner)), np.concatenate((depth, depth))
        coarse = np.concatenate((left[:, keep], right[:, keep]), axis=1)

    if failed and raise_on_failure:
        raise AccuracyError(
            f"quadrature tolerance {opts.abs_tol:g} not met at depth {opts.max_panel_depth}",
            estimate=out.sum(axis=0),
            error=error,
        )
    return out, error


def integrate(func, a, b, knots=(), opts=DEFAULT_QUADRATURE):
    """Integral of ``func`` over [a, b] with panels split at ``knots``.

    Returns an array of length ``m`` (one entry per integrand component).
    """
    if not a < b:
        raise ValueError("integration interval must satisfy a < b")
    values, _ = integrate_panels(func, panel_edges(a, b, knots), opts)
    return values.sum(axis=0)


def _knots_of(*objs):
    out = []
    for obj in objs:
        if obj is not None:
            out.extend(np.asarray(obj.knots, dtype=float).ravel())
    return out


def integrate_product(f, phase, interval, opts=DEFAULT_QUADRATURE):
    """Complex integral of ``f(x) * exp(i g(x))`` over ``interval``.

    ``phase`` may be ``None`` (g = 0). Any object with ``__call__`` and a
    ``knots`` attribute works as ``f`` or ``phase``.
    """
    a, b = interval
    if phase is None:
        def integrand(x):
            return f(x).astype(complex)
    else:
        def integrand(x):
            return f(x) * np.exp(1j * phase(x))
    return complex(integrate(integrand, a, b, _knots_of(f, phase), opts)[0])


def residual_vector(fset, phase, opts=DEFAULT_QUADRATURE):
    """Vector of integrals of ``f_j exp(i g)`` over the function set's domain."""
    a, b = fset.domain
    if phase is None:
        def integrand(x):
            return fset.evaluate(x).astype(complex)
    else:
        def integrand(x):
            return fset.evaluate(x) * np.exp(1j * phase(x))[None, :]
    return integrate(integrand, a, b, _knots_of(fset, phase), opts).astype(complex)
