"""One pass/fail test per acceptance criterion, at the stated tolerances."""

import json
import time

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy.special import logit

from annihilator.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from annihilator.corrector import Q_vector, build_bump_basis, jacobian
from annihilator.driver import solve_annihilating_phase
from annihilator.extensions import RealLineFunction, inner_product_matrix, orthogonalize, solve_on_real_line
from annihilator.functions import ComplexFunction, Gaussian
from annihilator.oracles import fd_jacobian, riemann_residual
from annihilator.partition import Partition, solve_partition
from annihilator.phase import build_g0, derivative_continuity, eval_phase, mollify
from annihilator.quadrature import DEFAULT_QUADRATURE
from conftest import N_RANDOM, disjoint_pair, pipeline_for, random_problem

TOL = DEFAULT_QUADRATURE.abs_tol
FINE = DEFAULT_QUADRATURE.tightened(100)
SEEDS = range(N_RANDOM)


def test_01_partition_golden_case(one_x):
    start = time.perf_counter()
    p = solve_partition(one_x)
    elapsed = time.perf_counter() - start
    assert p.breakpoints == pytest.approx((0.25, 0.75), abs=1e-8)
    assert elapsed < 1.0


def test_02_constant_end_to_end(one):
    start = time.perf_counter()
    phase, report = solve_annihilating_phase(one)
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    assert abs(report.residuals[0]) < 1e-8
    assert abs(riemann_residual(one, phase, 10**6)[0] - report.residuals[0]) < 1e-5
    assert derivative_continuity(phase, max_order=4) < 1e-5
    lo, hi = phase.segments[0].x1, phase.segments[-1].x0
    assert 0 < lo < hi < 1
    x = np.linspace(0, 1, 20001)
    assert np.all(phase(x)[(x <= lo) | (x >= hi)] == 0.0)


@pytest.mark.parametrize("seed", SEEDS)
def test_03_random_suite(seed):
    fs = random_problem(seed)
    start = time.perf_counter()
    phase, report = solve_annihilating_phase(fs)
    elapsed = time.perf_counter() - start
    assert report.success
    assert report.max_residual < 1e-7
    assert elapsed < 30.0


@pytest.mark.parametrize("seed", SEEDS)
def test_04_jacobian_matches_finite_differences(seed):
    pipe = pipeline_for(seed)
    m = len(pipe.basis)
    rng = np.random.default_rng(seed)
    points = [np.zeros(m)] + [0.5 * rng.normal(size=m) for _ in range(5)]
    for u in points:
        exact = jacobian(pipe.fset, pipe.smooth, pipe.basis, u, FINE)
        fd = fd_jacobian(lambda v: Q_vector(pipe.fset, pipe.smooth, pipe.basis, v, FINE), u)
        assert np.abs(fd - exact).max() < 1e-5 * np.abs(exact).max()


@pytest.mark.parametrize("seed", SEEDS)
def test_05_block_diagonal_at_step(seed):
    pipe = pipeline_for(seed)
    n = pipe.fset.n
    jac = jacobian(pipe.fset, pipe.step, pipe.basis, np.zeros(2 * n))
    assert np.abs(jac[:n, n:]).max() < 10 * TOL
    assert np.abs(jac[n:, :n]).max() < 10 * TOL


@pytest.mark.parametrize("seed", SEEDS)
def test_06_decoupling_identity(seed):
    pipe = pipeline_for(seed)
    assert pipe.eps < pipe.basis.eps0
    m = len(pipe.basis)
    rng = np.random.default_rng(100 + seed)

    def offset(u):
        return Q_vector(pipe.fset, pipe.smooth, pipe.basis, u) - Q_vector(pipe.fset, pipe.step, pipe.basis, u)

    for _ in range(5):
        u, v = rng.normal(size=(2, m))
        assert np.linalg.norm(offset(u) - offset(v)) < 3 * TOL


def test_07_disjoint_supports_split():
    fs = disjoint_pair()
    phase, report = solve_annihilating_phase(fs)
    first = report.recursion_trace[0]
    assert first.case == "split-dependent"
    assert first.point == pytest.approx(0.5, abs=1e-6)
    subs = report.recursion_trace[1:]
    assert len(subs) == 2
    assert [t.n_effective for t in subs] == [1, 1]
    assert [eval_phase(phase, first.point, k) for k in range(5)] == [0.0] * 5
    assert report.max_residual < 1e-8


def gaussian_modulated():
    return [
        ComplexFunction(Gaussian([1.0, 0.5], 0.4, 0.25), Gaussian([0.0, 1.0], 0.4, 0.25)),
        ComplexFunction(Gaussian([1.0, -1.0, 2.0], 0.5, 0.3), Gaussian([0.5], 0.5, 0.3)),
        ComplexFunction(Gaussian([0.3, 1.0], 0.6, 0.2), Gaussian([1.0, 0.0, -1.0], 0.6, 0.2)),
    ]


def test_08_orthogonalization():
    fs = gaussian_modulated()
    start = time.perf_counter()
    phases, report = orthogonalize(fs)
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    gram = inner_product_matrix(fs, phases)
    off = gram - np.diag(np.diag(gram))
    assert np.abs(off).max() < 1e-7
    # the complex product and the modulus each round once, so equality holds to a few ulps
    x = np.linspace(0.0, 1.0, 10001)
    for f, g in zip(fs, phases):
        fx = f(x)
        np.testing.assert_array_max_ulp(np.abs(fx * np.exp(1j * g(x))), np.abs(fx), maxulp=4)


def test_09_real_line_reduction():
    fs = [RealLineFunction.gaussian([1.0]), RealLineFunction.gaussian([0.0, 1.0])]
    phase, pushed, report = solve_on_real_line(fs)
    lo, hi = pushed.support
    cuts = sorted(set(np.clip(logit(np.asarray(phase.knots[1:-1])), -50, 50)))
    for f in fs:
        parts = []
        for part in (np.real, np.imag):
            val = sp_integrate.quad(lambda x: part(f(np.array([x]))[0] * np.exp(1j * pushed(np.array([x]))[0])),
                                    -40.0, 40.0, points=cuts[:100], limit=2000, epsabs=1e-12, epsrel=1e-12)[0]
            parts.append(val)
        assert abs(complex(*parts)) < 1e-6
    assert -40 < lo < hi < 40


def test_10_offset_decreases_with_eps(one):
    step = build_g0(Partition((0.0, 0.5), (0.25,)), Partition((0.5, 1.0), (0.75,)))
    basis = build_bump_basis(step, one, 0.01)
    norms = [np.linalg.norm(Q_vector(one, mollify(step, e), basis, np.zeros(2))) for e in (0.04, 0.02, 0.01, 0.005)]
    assert all(b < a for a, b in zip(norms, norms[1:]))
    assert norms[-1] < 0.5 * norms[0]


def test_11_cli_contract(tmp_path):
    problem = {"version": 1, "mode": "solve", "domain": "unit_interval", "options": {"seed": 11},
               "functions": [{"kind": "polynomial", "coeffs": [1.0, -2.0, 0.5]},
                             {"kind": "trigonometric", "constant": 0.3, "pairs": [[1.0, -0.5]]}]}
    csvs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        (d / "problem.json").write_text(json.dumps(problem))
        assert main(["--quiet", "solve", str(d / "problem.json")]) == EXIT_OK
        csvs.append((d / "samples.csv").read_bytes())
    assert csvs[0] == csvs[1]

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({k: v for k, v in problem.items() if k != "functions"}))
    assert main(["--quiet", "solve", str(bad)]) == EXIT_USAGE

    d = tmp_path / "run0"
    phase = json.loads((d / "phase.json").read_text())
    for seg in phase["segments"]:
        if seg["type"] == "level" and seg["from"] != 0.0:
            seg["from"] += 0.1
            seg["to"] += 0.1
            break
    (d / "tampered.json").write_text(json.dumps(phase))
    assert main(["--quiet", "verify", str(d / "problem.json"), str(d / "tampered.json")]) == EXIT_FAILURE
