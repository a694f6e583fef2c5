"""Input function families on [0, 1] and their linear-dependence structure.

Three user-facing kinds are supported (polynomial, trigonometric and
piecewise-linear sampled data) plus a Gaussian-modulated polynomial. The
remaining classes are internal building blocks produced by the solver when
it restricts, rescales or multiplies functions.

Every function object is a vectorised callable on [0, 1] with a ``knots``
attribute listing the points where it may fail to be smooth; quadrature
splits its panels there.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .quadrature import DEFAULT_QUADRATURE, integrate, integrate_panels, panel_edges


def _check_unit(x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0.0) | (x > 1.0)) or np.any(np.isnan(x)):
        raise DomainError("functions are only defined on [0, 1]")
    return x


class FunctionSpec:
    """Base class: real (or complex) function on [0, 1]."""

    knots = ()
    kind = "abstract"

    def __call__(self, x):
        x = _check_unit(x)
        return self._eval(x)

    def _eval(self, x):
        raise NotImplementedError

    def to_dict(self):
        raise TypeError(f"{type(self).__name__} is not serialisable")


@dataclass(frozen=True, eq=False)
class Polynomial(FunctionSpec):
    """``sum(c[k] * x**k)``, coefficients in ascending degree."""

    coeffs: tuple
    kind = "polynomial"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.coeffs:
            raise ValueError("polynomial needs at least one coefficient")

    def _eval(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def to_dict(self):
        return {"kind": "polynomial", "coeffs": list(self.coeffs)}


@dataclass(frozen=True, eq=False)
class Trigonometric(FunctionSpec):
    """``constant + sum(a_k cos(2 pi k x) + b_k sin(2 pi k x))`` for k = 1, 2, ..."""

    constant: float = 0.0
    pairs: tuple = ()
    kind = "trigonometric"

    def __post_init__(self):
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "pairs", tuple((float(a), float(b)) for a, b in self.pairs))

    def _eval(self, x):
        out = np.full(x.shape, self.constant)
        for k, (a, b) in enumerate(self.pairs, start=1):
            out = out + a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
        return out

    def to_dict(self):
        return {"kind": "trigonometric", "constant": self.constant, "pairs": [list(p) for p in self.pairs]}


@dataclass(frozen=True, eq=False)
class Sampled(FunctionSpec):
    """Piecewise-linear interpolant of ``(xs, ys)`` with ``xs`` spanning [0, 1]."""

    xs: np.ndarray
    ys: np.ndarray
    kind = "sampled"

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("sampled function needs xs and ys of equal length >= 2")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("xs must be strictly increasing")
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise ValueError("xs must start at 0 and end at 1")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def knots(self):
        return self.xs[1:-1]

    def _eval(self, x):
        return np.interp(x, self.xs, self.ys)

    def to_dict(self):
        return {"kind": "sampled", "xs": self.xs.tolist(), "ys": self.ys.tolist()}


@dataclass(frozen=True, eq=False)
class Gaussian(FunctionSpec):
    """Polynomial in ``x`` times ``exp(-(x - center)**2 / (2 width**2))``."""

    coeffs: tuple
    center: float = 0.5
    width: float = 0.2
    kind = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.width > 0:
            raise ValueError("width must be positive")

    def _eval(self, x):
        envelope = np.exp(-0.5 * ((x - self.center) / self.width) ** 2)
        return np.polynomial.polynomial.polyval(x, self.coeffs) * envelope

    def to_dict(self):
        return {"kind": "gaussian", "coeffs": list(self.coeffs), "center": self.center, "width": self.width}


@dataclass(frozen=True, eq=False)
class Generic(FunctionSpec):
    """Wraps an arbitrary vectorised callable; used for derived integrands."""

    func: object
    knots: tuple = ()
    label: str = "generic"
    kind = "generic"

    def _eval(self, x):
        return np.asarray(self.func(x))


@dataclass(frozen=True, eq=False)
class Rescaled(FunctionSpec):
    """``t -> f(a + (b - a) t)``: pulls [a, b] back to [0, 1]."""

    base: FunctionSpec
    a: float
    b: float
    kind = "rescaled"

    @property
    def knots(self):
        k = (np.asarray(self.base.knots, dtype=float) - self.a) / (self.b - self.a)
        return k[(k > 0) & (k < 1)]

    def _eval(self, x):
        y = np.clip(self.a + (self.b - self.a) * x, 0.0, 1.0)
        return self.base(y)


@dataclass(frozen=True, eq=False)
class ComplexFunction:
    """A complex-valued function given by real and imaginary parts."""

    re: FunctionSpec
    im: FunctionSpec

    @property
    def knots(self):
        return tuple(self.re.knots) + tuple(self.im.knots)

    def __call__(self, x):
        return self.re(x) + 1j * self.im(x)

    def to_dict(self):
        return {"re": self.re.to_dict(), "im": self.im.to_dict()}


def eval_function(spec, x):
    """Evaluate ``spec`` at a scalar or array ``x`` in [0, 1]."""
    out = spec(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class FunctionSet:
    """n functions together with the interval [a, b] they are considered on."""

    entries: tuple
    domain: tuple = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        a, b = (float(v) for v in self.domain)
        object.__setattr__(self, "domain", (a, b))
        if not self.entries:
            raise ValueError("a function set needs at least one function")
        if not (0.0 <= a < b <= 1.0):
            raise ValueError("domain must be a subinterval of [0, 1] with a < b")

    @property
    def n(self):
        return len(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def knots(self):
        if not self.entries:
            return np.empty(0)
        return np.unique(np.concatenate([np.asarray(f.knots, dtype=float).ravel() for f in self.entries]))

    def evaluate(self, x):
        """Stacked values, shape ``(n, len(x))``."""
        x = np.asarray(x, dtype=float)
        return np.stack([np.broadcast_to(f(x), x.shape) for f in self.entries])

    def restrict(self, a, b):
        return FunctionSet(self.entries, (a, b))

    def subset(self, indices):
        return FunctionSet([self.entries[i] for i in indices], self.domain)

    def rescaled(self, a, b):
        """Functions on [a, b] pulled back to [0, 1]."""
        return FunctionSet([Rescaled(f, a, b) for f in self.entries], (0.0, 1.0))

    def l1_norms(self, opts=DEFAULT_QUADRATURE):
        a, b = self.domain
        return np.real(integrate(lambda x: np.abs(self.evaluate(x)), a, b, self.knots, opts))


def gram_matrix(fset, interval=None, quad=DEFAULT_QUADRATURE):
    """Matrix of L2 inner products of the functions over ``interval``."""
    a, b = fset.domain if interval is None else interval
    if not a < b:
        raise ValueError("interval must satisfy a < b")
    n = fset.n
    iu = np.triu_indices(n)

    def products(x):
        v = fset.evaluate(x)
        return v[iu[0]] * v[iu[1]]

    upper = integrate(products, a, b, fset.knots, quad)
    return _symmetric_from_upper(upper, n)


def _symmetric_from_upper(upper, n):
    g = np.zeros((n, n))
    g[np.triu_indices(n)] = upper
    return g + np.triu(g, 1).T


def numerical_rank(matrix, rel_tol=1e-8):
    """Rank of a symmetric PSD matrix by relative eigenvalue threshold.

    Returns ``(rank, kernel)`` where ``kernel`` is a unit eigenvector of the
    smallest eigenvalue when the matrix is rank deficient, else ``None``.
    """
    m = np.asarray(matrix, dtype=float)
    if m.size == 0:
        return 0, None
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    top = w[-1]
    if top <= 0:
        return 0, v[:, 0]
    rank = int(np.sum(w > rel_tol * top))
    if rank == m.shape[0]:
        return rank, None
    kernel = v[:, 0]
    # fix the sign so results are reproducible
    if kernel[np.argmax(np.abs(kernel))] < 0:
        kernel = -kernel
    return rank, kernel


def independent_subset(fset, rel_tol=1e-8, quad=DEFAULT_QUADRATURE):
    """Indices of a maximal linearly independent subset, chosen greedily in order."""
    g = gram_matrix(fset, quad=quad)
    chosen = []
    for j in range(fset.n):
        trial = chosen + [j]
        rank, _ = numerical_rank(g[np.ix_(trial, trial)], rel_tol)
        if rank == len(trial):
            chosen = trial
    return chosen


@dataclass(frozen=True)
class DependenceBounds:
    """Where the family stops being dependent from the left and from the right.

    ``L < R`` means the functions are independent on [0, p] and [p, 1] for
    every p between them; otherwise they are dependent on both sides of any
    q in [R, L].
    """

    L: float
    R: float
    left_kernel: np.ndarray = field(default_factory=lambda: np.empty(0))
    right_kernel: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def independent_split(self):
        return self.L < self.R


def _cumulative_grams(fset, grid, quad):
    n = fset.n
    iu = np.triu_indices(n)

    def products(x):
        v = fset.evaluate(x)
        return v[iu[0]] * v[iu[1]]

    edges = panel_edges(grid[0], grid[-1], np.concatenate((grid, fset.knots)))
    cells, _ = integrate_panels(products, edges, quad)
    # fold the knot-refined cells back onto the scan grid
    idx = np.searchsorted(grid, edges[:-1], side="right") - 1
    per_cell = np.zeros((grid.size - 1, cells.shape[1]))
    np.add.at(per_cell, idx, cells)
    return per_cell, n


def dependence_bounds(fset, scan_points=256, rel_tol=1e-8, quad=DEFAULT_QUADRATURE, refine_tol=1e-6):
    """Locate the dependence bounds L and R on a scan grid, refined by bisection.

    ``L`` is the largest x0 for which the functions are numerically
    dependent on [0, x0] (0 if none), ``R`` the smallest x0 for which they
    are dependent on [x0, 1] (1 if none).
    """
    if scan_points < 3:
        raise ValueError("scan_points must be at least 3")
    a, b = fset.domain
    grid = np.linspace(a, b, scan_points)
    per_cell, n = _cumulative_grams(fset, grid, quad)
    left_cum = np.cumsum(per_cell, axis=0)            # [a, grid[i+1]]
    right_cum = np.cumsum(per_cell[::-1], axis=0)[::-1]  # [grid[i], b]

    def deficient(upper):
        rank, kernel = numerical_rank(_symmetric_from_upper(upper, n), rel_tol)
        return rank < n, kernel

    def gram_left(x):
        return gram_matrix(fset, (a, x), quad)

    def gram_right(x):
        return gram_matrix(fset, (x, b), quad)

    left_flags = [deficient(left_cum[i])[0] for i in range(grid.size - 1)]
    right_flags = [deficient(right_cum[i])[0] for i in range(grid.size - 1)]

    # L: dependent on [a, grid[i+1]] for the largest such i
    if not any(left_flags):
        L, left_kernel = a, np.empty(0)
    else:
        i = max(k for k, flag in enumerate(left_flags) if flag)
        lo = grid[i + 1]
        if i + 2 < grid.size:
            hi = grid[i + 2]
            while hi - lo > refine_tol:
                mid = 0.5 * (lo + hi)
                if numerical_rank(gram_left(mid), rel_tol)[0] < n:
                    lo = mid
                else:
                    hi = mid
        L = lo
        left_kernel = numerical_rank(gram_left(L), rel_tol)[1]

    # R: dependent on [grid[i], b] for the smallest such i
    if not any(right_flags):
        R, right_kernel = b, np.empty(0)
    else:
        i = min(k for k, flag in enumerate(right_flags) if flag)
        hi = grid[i]
        if i >= 1:
            lo = grid[i - 1]
            while hi - lo > refine_tol:
                mid = 0.5 * (lo + hi)
                if numerical_rank(gram_right(mid), rel_tol)[0] < n:
                    hi = mid
                else:
                    lo = mid
        R = hi
        right_kernel = numerical_rank(gram_right(R), rel_tol)[1]

    return DependenceBounds(float(L), float(R), left_kernel, right_kernel)
