import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy.special import logit

from annihilator.driver import SolveOptions
from annihilator.extensions import (
    GriddedFunction,
    IntegrabilityError,
    RealLineFunction,
    SeparableFunction,
    inner_product_matrix,
    marginalize,
    orthogonalize,
    phase_pushforward,
    to_unit_interval,
    truncation_range,
)
from annihilator.functions import ComplexFunction, Polynomial, Trigonometric
from annihilator.partition import Partition
from annihilator.phase import SmoothPhase, build_g0, mollify
from annihilator.quadrature import integrate, integrate_product


def line_integral(func, lo=-40.0, hi=40.0, points=None):
    re = sp_integrate.quad(lambda x: func(np.array([x]))[0].real, lo, hi, points=points, limit=500,
                           epsabs=1e-13, epsrel=1e-12)[0]
    im = sp_integrate.quad(lambda x: func(np.array([x]))[0].imag, lo, hi, points=points, limit=500,
                           epsabs=1e-13, epsrel=1e-12)[0]
    return re + 1j * im


def smooth_bump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


def sample_phase():
    step = build_g0(Partition((0.0, 0.5), (0.25,)), Partition((0.5, 1.0), (0.75,)))
    return mollify(step, 0.03)


def test_gaussian_integral_is_preserved():
    f = RealLineFunction.gaussian([1.0 / np.sqrt(2 * np.pi)])
    pulled = to_unit_interval(f)
    val = integrate(pulled, 0.0, 1.0, pulled.knots)[0]
    assert val == pytest.approx(1.0, abs=1e-6)


def test_sampled_pullback_integral():
    f = RealLineFunction.gaussian([1.0 / np.sqrt(2 * np.pi)])
    pulled = to_unit_interval(f, sampled_points=16385)
    assert integrate(pulled, 0.0, 1.0, pulled.knots)[0] == pytest.approx(1.0, abs=1e-6)


def test_zero_pulls_back_to_zero():
    zero = RealLineFunction.from_callable(lambda x: np.zeros_like(x))
    pulled = to_unit_interval(zero)
    assert np.all(pulled(np.linspace(0.0, 1.0, 101)) == 0.0)


def test_bump_support_maps_through_logistic():
    f = RealLineFunction.from_callable(smooth_bump, support=(-1.0, 1.0))
    pulled = to_unit_interval(f)
    lo, hi = 1 / (np.e + 1), 1 / (np.exp(-1.0) + 1)
    assert lo <= pulled.window[0] < pulled.window[1] <= hi
    y = np.linspace(0.0, 1.0, 2001)
    assert np.all(pulled(y)[(y < lo) | (y > hi)] == 0.0)


def test_non_integrable_input_is_rejected():
    with pytest.raises(IntegrabilityError):
        to_unit_interval(RealLineFunction.from_callable(lambda x: 1.0 / (1.0 + np.abs(x))))


def test_truncation_range_of_compact_kinds():
    f = RealLineFunction.sampled([-2.0, 0.0, 3.0], [0.0, 1.0, 0.0])
    assert truncation_range(f) == (-2.0, 3.0)
    spline = RealLineFunction.bspline([0, 1, 2, 3, 4, 5, 6, 7], [1.0, 2.0, 1.0, 0.5])
    assert truncation_range(spline) == (3.0, 4.0)


def test_real_line_kinds_validate():
    with pytest.raises(ValueError):
        RealLineFunction.gaussian(width=0.0)
    with pytest.raises(ValueError):
        RealLineFunction.bspline([0, 1, 2], [1.0])
    with pytest.raises(ValueError):
        RealLineFunction("nope")


def test_pushforward_examples():
    g = sample_phase()
    pushed = phase_pushforward(g)
    assert pushed(np.array([0.0]))[0] == g(np.array([0.5]))[0]
    assert phase_pushforward(SmoothPhase.zero())(np.linspace(-50, 50, 11)).tolist() == [0.0] * 11
    assert phase_pushforward(SmoothPhase.zero()).support is None
    delta = g.segments[0].x1
    bound = np.log((1 - delta) / delta)
    lo, hi = pushed.support
    assert -bound <= lo and hi <= bound
    x = np.linspace(-60, 60, 4001)
    assert np.all(pushed(x)[np.abs(x) > bound] == 0.0)


def test_change_of_variables_consistency():
    g = sample_phase()
    pushed = phase_pushforward(g)
    for f in (RealLineFunction.gaussian([1.0], 0.3, 1.2), RealLineFunction.gaussian([0.0, 1.0], -0.5, 0.8)):
        pulled = to_unit_interval(f)
        unit = integrate_product(pulled, g, (0.0, 1.0))
        line = line_integral(lambda x: f(x) * np.exp(1j * pushed(x)), points=list(logit(g.knots[1:-1])))
        assert abs(unit - line) < 1e-6


def test_marginalize_separable():
    f = RealLineFunction.gaussian([1.0, 2.0])
    h = RealLineFunction.sampled([0.0, 1.0, 2.0], [0.0, 2.0, 0.0])
    m = marginalize(SeparableFunction((f, h)), axis=0)
    x = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(m(x), 2 * f(x), rtol=1e-12)
    zero = RealLineFunction.from_callable(lambda x: np.zeros_like(x), support=(-1.0, 1.0))
    assert np.all(marginalize(SeparableFunction((zero, h)), axis=0)(x) == 0.0)


def test_marginalize_gridded_gaussian():
    x1 = np.linspace(-4, 4, 81)
    x2 = np.linspace(-10, 10, 2001)
    values = np.exp(-0.5 * x1[:, None] ** 2) * np.exp(-0.5 * (x2[None, :] / 1.5) ** 2)
    m = marginalize(GriddedFunction((x1, x2), values), axis=0)
    np.testing.assert_allclose(m(x1), np.sqrt(2 * np.pi) * 1.5 * np.exp(-0.5 * x1**2), atol=1e-6)
    m0 = marginalize(GriddedFunction((x1, x2), np.zeros_like(values)), axis=1)
    assert np.all(m0(x2) == 0.0)


def test_marginalize_guards():
    axes = [np.linspace(0, 1, 3)] * 4
    with pytest.raises(NotImplementedError):
        marginalize(GriddedFunction(axes, np.zeros((3, 3, 3, 3))))
    with pytest.raises(ValueError):
        marginalize(SeparableFunction((RealLineFunction.gaussian(),)), axis=1)


def test_orthogonalize_single_function():
    phases, report = orthogonalize([Polynomial([1.0])])
    assert len(phases) == 1 and phases[0](np.array([0.4]))[0] == 0.0
    assert report.max_inner_product == 0.0


def test_orthogonalize_already_orthogonal():
    wave = ComplexFunction(Trigonometric(0.0, [(1.0, 0.0)]), Trigonometric(0.0, [(0.0, 1.0)]))
    phases, report = orthogonalize([Polynomial([1.0]), wave], SolveOptions(allow_trivial=True))
    assert phases[0].correction is None and len(phases[0].segments) == 1
    assert report.max_inner_product < 1e-12


def test_orthogonalize_equal_functions():
    fs = [Polynomial([1.0]), Polynomial([1.0])]
    phases, report = orthogonalize(fs)
    assert report.max_inner_product < 1e-8
    ip = inner_product_matrix(fs, phases)
    assert abs(ip[0, 1]) < 1e-8
    x = np.linspace(0, 1, 1001)
    for g in phases:
        np.testing.assert_array_max_ulp(np.abs(np.exp(1j * g(x))), np.ones_like(x), maxulp=4)
    assert report.to_dict()["levels"][0]["index"] == 0


def test_orthogonalize_rejects_unknown_domain():
    with pytest.raises(ValueError):
        orthogonalize([Polynomial([1.0])], domain="sphere")


def test_modulus_preserved_to_rounding():
    f = ComplexFunction(Polynomial([0.2, 1.0]), Polynomial([0.0, -0.5, 0.3]))
    g = sample_phase()
    x = np.linspace(0.0, 1.0, 1001)
    fx = f(x)
    phi = fx * np.exp(1j * g(x))
    np.testing.assert_array_max_ulp(np.abs(phi), np.abs(fx), maxulp=4)

