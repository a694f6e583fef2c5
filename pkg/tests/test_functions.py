import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annihilator.errors import DomainError
from annihilator.functions import (
    ComplexFunction,
    FunctionSet,
    Gaussian,
    Polynomial,
    Sampled,
    Trigonometric,
    dependence_bounds,
    eval_function,
    gram_matrix,
    independent_subset,
    numerical_rank,
)
from conftest import disjoint_pair


def test_eval_examples():
    assert eval_function(Polynomial([0.0, 1.0]), 0.5) == 0.5
    assert eval_function(Sampled([0.0, 1.0], [0.0, 2.0]), 0.25) == 0.5
    assert eval_function(Trigonometric(1.0), 0.7) == 1.0


def test_trigonometric_uses_full_periods():
    f = Trigonometric(0.0, [(0.0, 0.0), (1.0, 0.0)])
    assert eval_function(f, 0.5) == pytest.approx(1.0)
    assert eval_function(f, 0.25) == pytest.approx(-1.0)


def test_gaussian_kind():
    f = Gaussian([2.0], center=0.3, width=0.1)
    assert eval_function(f, 0.3) == pytest.approx(2.0)
    assert eval_function(f, 0.4) == pytest.approx(2.0 * np.exp(-0.5))


@pytest.mark.parametrize("x", [-0.1, 1.5, np.nan])
def test_domain_error(x):
    with pytest.raises(DomainError):
        eval_function(Polynomial([1.0]), x)


@pytest.mark.parametrize("xs, ys", [
    ([0.0, 0.5, 0.4, 1.0], [0, 0, 0, 0]),
    ([0.0, 1.0], [0.0]),
    ([0.1, 1.0], [0.0, 1.0]),
    ([0.0, 0.9], [0.0, 1.0]),
    ([0.0], [0.0]),
])
def test_sampled_validation(xs, ys):
    with pytest.raises(ValueError):
        Sampled(xs, ys)


def test_serialisation():
    assert Polynomial([1, 2]).to_dict() == {"kind": "polynomial", "coeffs": [1.0, 2.0]}
    assert Trigonometric(1.0, [(0.5, 0.25)]).to_dict()["pairs"] == [[0.5, 0.25]]
    c = ComplexFunction(Polynomial([1.0]), Polynomial([0.0, 1.0]))
    assert c(np.array([0.5]))[0] == pytest.approx(1 + 0.5j)
    assert c.to_dict()["im"]["coeffs"] == [0.0, 1.0]


def test_function_set_validation():
    with pytest.raises(ValueError):
        FunctionSet([])
    with pytest.raises(ValueError):
        FunctionSet([Polynomial([1.0])], (0.5, 0.5))


def test_rescaled_set_pulls_back():
    fs = FunctionSet([Polynomial([0.0, 1.0])]).rescaled(0.5, 1.0)
    np.testing.assert_allclose(fs.evaluate(np.array([0.0, 1.0])), [[0.5, 1.0]])


def test_l1_norms():
    fs = FunctionSet([Polynomial([-0.5, 1.0]), Polynomial([2.0])])
    np.testing.assert_allclose(fs.l1_norms(), [0.25, 2.0], atol=1e-12)


def test_gram_examples(one_x):
    np.testing.assert_allclose(gram_matrix(one_x), [[1, 0.5], [0.5, 1 / 3]], atol=1e-12)
    np.testing.assert_allclose(gram_matrix(FunctionSet([Polynomial([1.0])])), [[1.0]], atol=1e-12)
    dup = FunctionSet([Polynomial([1.0]), Polynomial([1.0])])
    np.testing.assert_allclose(gram_matrix(dup), np.ones((2, 2)), atol=1e-12)


def test_numerical_rank_examples():
    rank, kernel = numerical_rank([[1.0, 1.0], [1.0, 1.0]])
    assert rank == 1
    np.testing.assert_allclose(np.abs(kernel), [2**-0.5, 2**-0.5])
    assert kernel[0] == pytest.approx(-kernel[1])
    assert numerical_rank(np.eye(3)) == (3, None)
    assert numerical_rank([[1.0, 0.5], [0.5, 1 / 3]])[0] == 2
    assert numerical_rank(np.zeros((0, 0)))[0] == 0


def test_independent_subset_skips_duplicates():
    fs = FunctionSet([Polynomial([1.0]), Polynomial([2.0]), Polynomial([0.0, 1.0])])
    assert independent_subset(fs) == [0, 2]


def test_dependence_bounds_examples(one, one_x):
    b = dependence_bounds(one_x)
    assert (b.L, b.R) == (0.0, 1.0) and b.independent_split
    b = dependence_bounds(one)
    assert (b.L, b.R) == (0.0, 1.0)
    b = dependence_bounds(disjoint_pair())
    # a relative eigenvalue threshold cannot see a linearly vanishing function for ~1e-3 past its support
    assert b.L == pytest.approx(0.5, abs=1e-3)
    assert b.R == pytest.approx(0.5, abs=1e-3)
    assert not b.independent_split
    assert 0.5 * (b.L + b.R) == pytest.approx(0.5, abs=1e-6)


def test_dependence_kernels_certify_case():
    fs = disjoint_pair()
    b = dependence_bounds(fs)
    for kernel, interval in ((b.left_kernel, (0.0, b.L)), (b.right_kernel, (b.R, 1.0))):
        assert np.linalg.norm(kernel) == pytest.approx(1.0)
        g = gram_matrix(fs, interval)
        assert kernel @ g @ kernel < 1e-8 * np.max(np.diag(g))


def test_scan_points_guard(one):
    with pytest.raises(ValueError):
        dependence_bounds(one, scan_points=2)


coeff_lists = st.lists(st.floats(-2, 2), min_size=1, max_size=4)


@settings(max_examples=25, deadline=None)
@given(st.lists(coeff_lists, min_size=1, max_size=4), st.floats(0.05, 1.0), st.floats(0.0, 0.95))
def test_gram_is_symmetric_psd(cs, width, start):
    fs = FunctionSet([Polynomial(c) for c in cs])
    b = min(start + width, 1.0)
    g = gram_matrix(fs, (start, b))
    assert np.array_equal(g, g.T)
    assert np.linalg.eigvalsh(g).min() >= -10 * 1e-10


@settings(max_examples=25, deadline=None)
@given(st.lists(coeff_lists, min_size=1, max_size=4), st.floats(1e-3, 1e3))
def test_rank_scale_invariance(cs, scale):
    g = gram_matrix(FunctionSet([Polynomial(c) for c in cs]))
    assert numerical_rank(g)[0] == numerical_rank(scale * g)[0]


def test_rank_monotone_in_left_interval():
    fs = disjoint_pair()
    ranks = [numerical_rank(gram_matrix(fs, (0.0, x)))[0] for x in np.linspace(0.05, 1.0, 40)]
    assert all(a <= b for a, b in zip(ranks, ranks[1:]))
