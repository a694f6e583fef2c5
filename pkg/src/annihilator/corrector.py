"""Bump-basis correction of a mollified phase.

For a base phase g and bumps h_1..h_2n we look at

    F_j(u) = integral_0^1 f_j(x) exp(i g(x) + i sum_m u_m h_m(x)) dx
    Q(u)   = (Im F_1, ..., Im F_n, Re F_1, ..., Re F_n)

and solve Q(u) = 0 by damped Newton starting at u = 0. The first n bumps
sit left of the split point p, the rest right of it, always away from the
jumps of the step phase, so the mollification error enters Q only as a
constant offset.
"""

import logging

import numpy as np

from .errors import BasisFailure, CorrectorFailure
from .quadrature import DEFAULT_QUADRATURE, integrate
from .smooth import Bump, CorrectionBasis

logger = logging.getLogger(__name__)

SINGULAR_RTOL = 1e-10
MAX_BASIS_ATTEMPTS = 32


def _knots(fset, phase, basis):
    return np.concatenate((np.asarray(fset.knots, dtype=float).ravel(),
                           np.asarray(phase.knots, dtype=float).ravel(),
                           basis.knots))


def _integrals(fset, phase, basis, u, opts, jacobian):
    u = np.asarray(u, dtype=float)
    n, m = fset.n, len(basis)

    def integrand(x):
        fv = fset.evaluate(x)
        hv = basis.matrix(x)
        g = phase(x) + (u @ hv if m else 0.0)
        fe = fv * np.exp(1j * g)[None, :]
        if not jacobian:
            return fe
        dfe = 1j * fe[:, None, :] * hv[None, :, :]
        return np.concatenate((fe, dfe.reshape(n * m, -1)))

    a, b = fset.domain
    vals = integrate(integrand, a, b, _knots(fset, phase, basis), opts)
    if not jacobian:
        return vals, None
    return vals[:n], vals[n:].reshape(n, m)


def F_vector(fset, phase, basis, u, opts=DEFAULT_QUADRATURE):
    """Integrals of f_j exp(i (g + sum u_m h_m)); ``phase`` may be a step or smooth phase."""
    return _integrals(fset, phase, basis, u, opts, jacobian=False)[0]


def Q_from_F(F):
    F = np.asarray(F, dtype=complex)
    return np.concatenate((F.imag, F.real))


def Q_vector(fset, phase, basis, u, opts=DEFAULT_QUADRATURE):
    return Q_from_F(F_vector(fset, phase, basis, u, opts))


def _jacobian_from_dF(dF):
    return np.vstack((dF.imag, dF.real))


def jacobian(fset, phase, basis, u, opts=DEFAULT_QUADRATURE):
    """Analytic derivative of :func:`Q_vector`, shape (2n, 2n).

    Column k holds the derivatives with respect to u_k; rows follow the
    (imaginary parts, real parts) layout of ``Q_vector``.
    """
    _, dF = _integrals(fset, phase, basis, u, opts, jacobian=True)
    return _jacobian_from_dF(dF)


def _slots(step, lo, hi, eps0):
    """Usable sub-intervals of the constant pieces of ``step`` inside [lo, hi]."""
    out = []
    for a, b, _ in step.segments_on(lo, hi):
        if b - a > 2 * eps0:
            out.append((a + eps0, b - eps0))
    return out


def _place(slots, count):
    """Spread ``count`` bumps over the slots, giving extra bumps to the widest slots first."""
    if not slots:
        raise BasisFailure("no room for correction bumps: every constant piece is narrower than 2*eps0")
    per = [0] * len(slots)
    for _ in range(count):
        shares = [(b - a) / (c + 1) for (a, b), c in zip(slots, per)]
        per[int(np.argmax(shares))] += 1
    cells = []
    for (a, b), c in zip(slots, per):
        w = (b - a) / c if c else 0.0
        cells += [(a + i * w, a + (i + 1) * w) for i in range(c)]
    return cells


def _bumps_in(cells, rng=None):
    bumps = []
    for a, b in cells:
        half = 0.5 * (b - a)
        center = 0.5 * (a + b)
        if rng is not None:
            half *= rng.uniform(0.4, 0.95)
            center = rng.uniform(a + half, b - half)
        bumps.append(Bump(center, half))
    return bumps


def is_singular(matrix, rtol=SINGULAR_RTOL):
    """det below ``rtol`` times the product of row norms (Hadamard scaling)."""
    rows = np.linalg.norm(matrix, axis=1)
    if np.any(rows == 0):
        return True
    return abs(np.linalg.det(matrix)) < rtol * float(np.prod(rows))


def build_bump_basis(step, fset, eps0, seed=0, opts=DEFAULT_QUADRATURE, n=None):
    """n bumps on each side of the split point with a non-singular Jacobian at u = 0.

    Bumps fill the constant pieces of ``step`` shrunk by ``eps0`` at both
    ends. The Jacobian of Q at u = 0 is computed against ``step`` itself;
    if it is numerically singular the centers and widths are jittered
    (deterministically from ``seed``) up to 32 times before giving up
    with :class:`BasisFailure`.
    """
    n = fset.n if n is None else n
    p = step.split
    if p is None:
        raise ValueError("step phase has no split point")
    if not 0 < eps0 < 0.5 * step.min_gap():
        raise ValueError(f"eps0={eps0} must lie in (0, {0.5 * step.min_gap()})")
    left = _place(_slots(step, 0.0, p, eps0), n)
    right = _place(_slots(step, p, 1.0, eps0), n)

    last = None
    for attempt in range(MAX_BASIS_ATTEMPTS):
        rng = None if attempt == 0 else np.random.default_rng([seed, attempt])
        basis = CorrectionBasis(_bumps_in(left, rng) + _bumps_in(right, rng), eps0)
        jac = jacobian(fset, step, basis, np.zeros(2 * n), opts)
        last = jac
        if not is_singular(jac):
            return basis
        logger.debug("bump basis attempt %d singular", attempt)
    raise BasisFailure(
        "every bump basis gave a singular Jacobian; the functions are not independent on both sides",
        diagnostics={"jacobian": last},
    )


def _solve(jac, rhs):
    try:
        return np.linalg.solve(jac, rhs)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(jac, rhs, rcond=None)[0]


def newton_correct(fset, phase, basis, tol=None, max_iter=50, opts=DEFAULT_QUADRATURE,
                   max_first_step=0.5, max_first_contraction=0.5):
    """Coefficients u with ||Q(u)||_2 < tol, by damped Newton from u = 0.

    Returns ``(u, trace)`` where ``trace`` lists ||Q||_2 after every
    accepted iterate (the first entry is at u = 0).

    Steps are damped by halving until the simplified Newton correction
    ``J(u_k)^-1 Q(u_k + t s_k)`` is shorter than ``(1 - t/4) |s_k|``. This
    affine-invariant test replaces a test on ||Q||_2, which is dominated by
    the strong directions of the (typically ill-conditioned) Jacobian.

    The first iteration doubles as a basin check: if the full step would
    move the phase by more than ``max_first_step`` radians, or the
    contraction ratio of the full step exceeds ``max_first_contraction``,
    :class:`CorrectorFailure` is raised at once so the caller can shrink
    the mollification width instead of iterating far from the solution.
    """
    if tol is None:
        tol = 1e-9 * float(np.max(fset.l1_norms(opts)))
    heights = np.array([abs(b.amplitude) * np.exp(-1.0) for b in basis.bumps])
    u = np.zeros(len(basis))
    F, dF = _integrals(fset, phase, basis, u, opts, jacobian=True)
    q = Q_from_F(F)
    trace = [float(np.linalg.norm(q))]

    def fail(message, **extra):
        return CorrectorFailure(message, best=u, diagnostics={"trace": trace, **extra})

    for it in range(max_iter):
        if trace[-1] < tol:
            return u, trace
        jac = _jacobian_from_dF(dF)
        step = _solve(jac, -q)
        size = float(np.linalg.norm(step))
        if it == 0 and max_first_step is not None:
            reach = float(np.max(np.abs(step) * heights))
            if reach > max_first_step:
                raise fail(f"first Newton step moves the phase by {reach:.3g} rad", first_step_reach=reach)
        t = 1.0
        while True:
            trial = u + t * step
            F_t, dF_t = _integrals(fset, phase, basis, trial, opts, jacobian=True)
            q_t = Q_from_F(F_t)
            theta = float(np.linalg.norm(_solve(jac, -q_t))) / size
            if it == 0 and t == 1.0 and max_first_contraction is not None and theta > max_first_contraction:
                raise fail(f"contraction {theta:.3g} of the first Newton step: outside the basin", theta=theta)
            if theta <= 1.0 - 0.25 * t:
                break
            t *= 0.5
            if t < 1e-8:
                raise fail("damping stalled")
        u, q, dF = trial, q_t, dF_t
        trace.append(float(np.linalg.norm(q)))
    if trace[-1] < tol:
        return u, trace
    raise fail(f"no convergence in {max_iter} iterations")
