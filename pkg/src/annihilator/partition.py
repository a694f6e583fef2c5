"""Classical Hobby-Rice breakpoints by multistart damped Newton.

Given functions f_1..f_n on [a, b] we look for a <  x_1 < ... < x_r < b
such that the alternating-sign integrals

    sum_m (-1)**m * integral(f_j, x_{m-1}, x_m),   x_0 = a, x_{r+1} = b,

vanish for every j. The derivative of that sum with respect to x_m is
``2 (-1)**m f_j(x_m)``, which gives a cheap exact Jacobian.
"""

import itertools
import logging
import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import SolverFailure
from .functions import gram_matrix, numerical_rank
from .quadrature import DEFAULT_QUADRATURE, integrate_panels, panel_edges

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Partition:
    interval: tuple
    breakpoints: tuple

    def __post_init__(self):
        a, b = (float(v) for v in self.interval)
        bp = tuple(float(v) for v in self.breakpoints)
        object.__setattr__(self, "interval", (a, b))
        object.__setattr__(self, "breakpoints", bp)
        pts = (a,) + bp + (b,)
        if any(q <= p for p, q in zip(pts, pts[1:])):
            raise ValueError(f"breakpoints must be strictly increasing inside {self.interval}: {bp}")

    @property
    def r(self):
        return len(self.breakpoints)

    @property
    def edges(self):
        return (self.interval[0],) + self.breakpoints + (self.interval[1],)

    def min_gap(self):
        return float(np.min(np.diff(self.edges)))


@dataclass(frozen=True)
class PartitionOptions:
    tol: float = 1e-9
    seeds: int = 24
    enough: int = 4
    max_iter: int = 60
    rank_tol: float = 1e-8
    seed: int = 0
    quad: object = DEFAULT_QUADRATURE


def _alternating(fset, edges, opts):
    edges = np.asarray(edges, dtype=float)
    panels = panel_edges(edges[0], edges[-1], np.concatenate((edges[1:-1], fset.knots)))
    vals, _ = integrate_panels(fset.evaluate, panels, opts)
    cell = np.searchsorted(edges, 0.5 * (panels[:-1] + panels[1:])) - 1
    signs = np.where(cell % 2 == 0, -1.0, 1.0)  # cell m (0-based) carries (-1)^(m+1)
    return np.real(signs @ vals)


def hr_residual(fset, partition, opts=DEFAULT_QUADRATURE):
    """Alternating-sign integrals of each function over the partition."""
    if tuple(partition.interval) != tuple(fset.domain):
        raise ValueError("partition interval must match the function set's domain")
    return _alternating(fset, partition.edges, opts)


def _jacobian(fset, breakpoints):
    if len(breakpoints) == 0:
        return np.zeros((fset.n, 0))
    vals = fset.evaluate(np.asarray(breakpoints))
    signs = np.array([2.0 * (-1.0) ** m for m in range(1, len(breakpoints) + 1)])
    return vals * signs[None, :]


def _feasible(x, a, b):
    pts = np.concatenate(([a], x, [b]))
    return bool(np.all(np.diff(pts) > 0))


def _newton(fset, x0, opts):
    a, b = fset.domain
    x = np.asarray(x0, dtype=float)
    res = hr_residual(fset, Partition((a, b), x), opts.quad)
    norm = np.linalg.norm(res)
    for _ in range(opts.max_iter):
        if np.max(np.abs(res)) < opts.tol:
            break
        jac = _jacobian(fset, x)
        step = np.linalg.lstsq(jac, -res, rcond=None)[0]
        t = 1.0
        accepted = False
        while t > 1e-10:
            trial = x + t * step
            if _feasible(trial, a, b):
                r_trial = hr_residual(fset, Partition((a, b), trial), opts.quad)
                n_trial = np.linalg.norm(r_trial)
                if n_trial <= (1 - 1e-4 * t) * norm:
                    x, res, norm = trial, r_trial, n_trial
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            break
    return x, res


def _seeds(a, b, r, count, rng):
    yield a + (b - a) * np.arange(1, r + 1) / (r + 1)
    for _ in range(count):
        yield np.sort(rng.uniform(a, b, size=r))


def _candidate_orders(rank, n):
    order = [rank] + list(range(rank - 1, 0, -1)) + list(range(rank + 1, n + 1))
    return [r for r in order if r >= 1]


def brute_force_partition(fset, r, grid_n, opts=DEFAULT_QUADRATURE, budget=10**7):
    """Exhaustive search of increasing r-tuples on a uniform interior grid."""
    if r < 1:
        raise ValueError("r must be at least 1")
    if grid_n < r + 2:
        raise ValueError("grid_n must be at least r + 2")
    if float(grid_n) ** r > budget:
        raise SolverFailure(f"enumeration budget exceeded: {grid_n}^{r} > {budget}")
    a, b = fset.domain
    grid = np.linspace(a, b, grid_n)
    edges = panel_edges(a, b, np.concatenate((grid, fset.knots)))
    cells, _ = integrate_panels(fset.evaluate, edges, opts)
    idx = np.searchsorted(grid, edges[:-1], side="right") - 1
    per_cell = np.zeros((grid_n - 1, fset.n))
    np.add.at(per_cell, idx, np.real(cells))
    cum = np.vstack((np.zeros(fset.n), np.cumsum(per_cell, axis=0)))  # integral from a to grid[i]

    combos = np.array(list(itertools.combinations(range(1, grid_n - 1), r)), dtype=int)
    signs = np.array([2.0 * (-1.0) ** m for m in range(1, r + 1)])
    # residual = sum_m 2(-1)^m C(x_m) + (-1)^(r+1) C(b)
    res = np.einsum("km,kmj->kj", np.broadcast_to(signs, combos.shape), cum[combos])
    res = res + (-1.0) ** (r + 1) * cum[-1][None, :]
    score = np.max(np.abs(res), axis=1)
    best = int(np.argmin(score))  # argmin returns the first minimiser: lexicographic tie-break
    return Partition((a, b), tuple(grid[combos[best]]))


def solve_partition(fset, opts=None):
    """Find a Hobby-Rice partition of ``fset.domain`` for all functions in ``fset``.

    Tries the empty partition, then r equal to the numerical rank, then
    smaller and larger r, each from several seeds. Falls back to a brute
    force grid search polished by Newton. Raises :class:`SolverFailure`
    carrying the best candidate when nothing reaches the tolerance.
    """
    opts = opts or PartitionOptions()
    a, b = fset.domain
    scale = max(float(np.max(fset.l1_norms(opts.quad))), 1e-300)
    tol = opts.tol * scale
    local = dataclasses.replace(opts, tol=tol)

    empty = Partition((a, b), ())
    res0 = hr_residual(fset, empty, opts.quad)
    if np.max(np.abs(res0)) < tol:
        return empty

    rank, _ = numerical_rank(gram_matrix(fset, quad=opts.quad), opts.rank_tol)
    best = (np.inf, empty)
    for r in _candidate_orders(rank, fset.n):
        rng = np.random.default_rng([opts.seed, r])
        found = []
        for x0 in _seeds(a, b, r, opts.seeds, rng):
            x, res = _newton(fset, x0, local)
            err = float(np.max(np.abs(res)))
            if err < best[0]:
                best = (err, Partition((a, b), tuple(x)))
            if err < tol:
                gap = Partition((a, b), tuple(x)).min_gap()
                found.append((-round(gap, 12), err, tuple(x)))
                if len(found) >= opts.enough:
                    break
        if found:
            # widest minimum gap first: it sets the mollification width downstream
            found.sort()
            return Partition((a, b), found[0][2])
        logger.debug("no partition with r=%d on [%g, %g]", r, a, b)

    for r in range(1, fset.n + 1):
        grid_n = min(101, int(10 ** (7 / r)))
        if grid_n < r + 2:
            break
        cand = brute_force_partition(fset, r, grid_n, opts.quad)
        x, res = _newton(fset, np.array(cand.breakpoints), local)
        err = float(np.max(np.abs(res)))
        if err < best[0]:
            best = (err, Partition((a, b), tuple(x)))
        if err < tol:
            return Partition((a, b), tuple(x))

    raise SolverFailure(
        f"no Hobby-Rice partition below {tol:g} on [{a:g}, {b:g}]",
        best=best[1],
        diagnostics={"best_residual": best[0]},
    )
