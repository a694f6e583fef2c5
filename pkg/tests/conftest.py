import numpy as np
import pytest

from annihilator.corrector import build_bump_basis
from annihilator.functions import FunctionSet, Polynomial, Sampled, Trigonometric, dependence_bounds
from annihilator.partition import solve_partition
from annihilator.phase import build_g0, mollify

N_RANDOM = 20


def random_problem(seed):
    """n in {2, 3, 4} functions: degree <= 4 polynomials or 3-term trigonometric sums."""
    rng = np.random.default_rng(seed)
    n = (2, 3, 4)[seed % 3]
    fs = []
    for _ in range(n):
        if rng.random() < 0.5:
            fs.append(Polynomial(rng.normal(size=rng.integers(1, 6))))
        else:
            k = int(rng.integers(1, 4))
            pairs = [(0.0, 0.0)] * (k - 1) + [tuple(rng.normal(size=2))]
            fs.append(Trigonometric(rng.normal(), pairs))
    return FunctionSet(fs)


def disjoint_pair():
    """Two hat-like functions with disjoint supports [0, 1/2] and [1/2, 1]."""
    return FunctionSet([
        Sampled([0.0, 0.1, 0.4, 0.5, 1.0], [0.0, 1.0, 1.0, 0.0, 0.0]),
        Sampled([0.0, 0.5, 0.6, 0.9, 1.0], [0.0, 0.0, 1.0, 1.0, 0.0]),
    ])


class Pipeline:
    """Intermediate objects of the split-independent construction for one family."""

    def __init__(self, fset, eps_fraction=8):
        self.fset = fset
        bounds = dependence_bounds(fset)
        assert bounds.independent_split
        self.p = 0.5 * (bounds.L + bounds.R)
        self.left = solve_partition(fset.restrict(0.0, self.p))
        self.right = solve_partition(fset.restrict(self.p, 1.0))
        self.step = build_g0(self.left, self.right)
        self.eps = self.step.min_gap() / eps_fraction
        self.smooth = mollify(self.step, self.eps)
        self.basis = build_bump_basis(self.step, fset, 2 * self.eps)


_PIPELINES = {}


def pipeline_for(seed):
    if seed not in _PIPELINES:
        _PIPELINES[seed] = Pipeline(random_problem(seed))
    return _PIPELINES[seed]


@pytest.fixture
def one():
    return FunctionSet([Polynomial([1.0])])


@pytest.fixture
def one_x():
    return FunctionSet([Polynomial([1.0]), Polynomial([0.0, 1.0])])
