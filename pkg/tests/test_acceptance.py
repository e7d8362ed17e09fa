"""One test per acceptance criterion, at the required tolerances."""

import time

import numpy as np
import pytest
from scipy.optimize import brentq

from utm.contour_geometry import in_D
from utm.determinant_zeros import locate_zeros, reduced_determinant, removable_ratio
from utm.evaluator import (
    EvalRequest,
    evaluate_integral,
    evaluate_series_complex,
    residue_convert,
    series_term,
    series_zero,
)
from utm.global_relation import residual
from utm.oracle_suite import (
    analytic_mode,
    fd_reference,
    laplace_demo,
    naive_sine_series,
    orthogonality_check,
)
from utm.problem_spec import make_problem
from utm.symbol_core import Symbol
from utm.transforms import SampledSolution
from utm.wellposedness import admissible, predicted_split

from conftest import EQ1, EQ2, STOKES, eq1_problem, eq2_problem, robin_problem, stokes_problem


def _smooth_stokes():
    return stokes_problem(q0=lambda x: 1024 * x**5 * (1 - x) ** 5, degree=10)


def _random_ks(n=20, radius=10.0, seed=0):
    rng = np.random.default_rng(seed)
    return radius * np.sqrt(rng.uniform(size=n)) * np.exp(2j * np.pi * rng.uniform(size=n))


def test_1_wellposedness_table():
    start = time.time()
    a2 = make_problem(EQ1, 1.0, lambda x: x**2 * (1 - x) ** 2, left={0: 0.0, 1: 0.0}, right={},
                      T_max=0.1, max_degree=4)
    table = {
        "a.1": admissible(eq1_problem()).admissible,
        "a.2": admissible(a2).admissible,
        "c.1": admissible(stokes_problem(split="c1")).admissible,
        "c.2": admissible(stokes_problem(split="c2")).admissible,
        "eq2": admissible(eq2_problem()).admissible,
    }
    assert table == {"a.1": True, "a.2": False, "c.1": True, "c.2": False, "eq2": True}
    assert time.time() - start < 30


def test_2_predicted_split():
    cases = [(EQ1, 1), (EQ2, 1), (STOKES, 1), ([0, 0, 0, 1j], 2), ([0, 0, 0, 0, 1j], 2)]
    assert [predicted_split(Symbol(c)) for c, _ in cases] == [n for _, n in cases]


def test_3_schrodinger_eigenmode_grid():
    start = time.time()
    x = np.linspace(0, 1, 21)
    t = np.linspace(0.04, 0.2, 5)
    sol = evaluate_integral(eq1_problem(), EvalRequest(x, t, tol=1e-7))
    exact = analytic_mode("eq1", 1, x[:, None], t[None, :])
    assert np.max(np.abs(sol.q - exact)) < 1e-6
    assert time.time() - start < 60


def test_4_eq2_triple_agreement_and_residues():
    prob = eq2_problem()
    x = np.linspace(0, 1, 10)
    t = np.linspace(0.04, 0.2, 5)
    req = EvalRequest(x, t, tol=1e-8)
    integral = evaluate_integral(prob, req).q
    series = evaluate_series_complex(prob, req).q
    exact = analytic_mode("eq2", 1, x[:, None], t[None, :])
    assert np.max(np.abs(integral - series)) < 1e-5
    assert np.max(np.abs(integral - exact)) < 1e-5
    assert np.max(np.abs(series - exact)) < 1e-5

    terms = {round(rt.k.real / np.pi): rt for rt in residue_convert(prob, 20)}
    assert sorted(terms) == [m for m in range(-20, 21) if m != 0]
    t0, x0 = 0.1, 0.3
    for m in range(1, 21):
        k = series_zero(prob, m)
        lam = 1j - k
        c = series_term(prob, m, np.array([x0]), t0)[0] / (np.exp(1j * k * x0) - np.exp(1j * lam * x0))
        assert abs(terms[m].coefficient(t0) - c) < 1e-10
        assert abs(terms[-m].coefficient(t0) + c) < 1e-10


def test_5_stokes_c1_against_fd():
    start = time.time()
    prob = _smooth_stokes()
    x = np.array([0.25, 0.5, 0.75])
    t = np.array([0.05, 0.1])
    sol = evaluate_integral(prob, EvalRequest(x, t, tol=1e-6))
    fd = fd_reference(prob, 512, 5e-5)
    ref = np.array([fd.at(x, tv) for tv in t]).T
    assert np.max(np.abs(sol.q - ref) / np.abs(ref)) < 1e-3
    assert time.time() - start < 300


def test_6_determinant_zero_geometry():
    stokes = stokes_problem()
    zs = [z for z in locate_zeros(stokes, 40.0) if not z.degenerate]
    assert zs
    assert not any(in_D(stokes.symbol, z.k) for z in zs)
    rays = np.array([np.pi / 6, 5 * np.pi / 6, 3 * np.pi / 2])
    far = [z.k for z in zs if abs(z.k) > 20]
    assert far
    for k in far:
        d = np.abs((np.angle(k) - rays + np.pi) % (2 * np.pi) - np.pi)
        assert d.min() < 0.05

    eq2 = sorted((z.k for z in locate_zeros(eq2_problem(), 40.0)), key=lambda k: k.real)
    m = np.arange(-12, 13)
    assert len(eq2) == m.size
    assert np.max(np.abs(np.array(eq2) - (m * np.pi + 0.5j))) < 1e-10


def _robin_secular(k, a=1.0, b=2.0):
    return (a - b) * k * np.cos(k) - (k * k + a * b) * np.sin(k)


def test_7_robin_heat():
    prob = robin_problem()
    x = np.linspace(0, 1, 10)
    t = np.array([0.1, 0.2, 0.3, 0.4])
    sol = evaluate_integral(prob, EvalRequest(x, t, tol=1e-8))
    fd = fd_reference(prob, 512, 1e-4)
    ref = np.array([fd.at(x, tv) for tv in t]).T
    assert np.max(np.abs(sol.q - ref)) < 1e-4

    # k = 0 is a zero of the determinant but not a pole of the integrand
    assert abs(reduced_determinant(prob, np.array([0j]))[0]) < 1e-12
    zs = locate_zeros(prob, 20.0)
    origin = [z for z in zs if abs(z.k) < 1e-8]
    assert len(origin) == 1 and origin[0].degenerate
    vals = removable_ratio(prob, 0j)
    assert max(vals) < 10 * min(vals)

    real = [z.k.real for z in zs if abs(z.k.imag) < 1e-9 and z.k.real > 0.1]
    assert real
    for k in real:
        assert abs(_robin_secular(k)) / (abs(k) + k * k + 2.0) < 1e-10
    grid = np.linspace(0.1, 20.0, 4000)
    f = _robin_secular(grid)
    assert len(real) == int(np.sum(f[:-1] * f[1:] < 0))
    assert sorted(real)[0] == pytest.approx(brentq(_robin_secular, grid[0], 3.0, xtol=1e-14), abs=1e-9)


def _exact_samples(prob, q, dq, T):
    x = np.linspace(0, prob.L, 1001)
    t = np.linspace(0, T, 401)
    return SampledSolution.from_function(q, x, t, derivs=dq)


def _mode(mu, decay):
    """q = e^{mu x - decay t} together with its boundary derivatives."""
    def q(X, T):
        return np.exp(mu * X - decay * T)

    def d(side, order, T):
        xb = 0.0 if side == "left" else 1.0
        return mu**order * np.exp(mu * xb - decay * T)

    return q, d


def _sine_mode(mu, decay):
    # sin-type eigenmode e^{-x/2} sin(pi x) written as (e^{mu x} - e^{conj(mu) x}) / 2i
    def q(X, T):
        return (np.exp(mu * X) - np.exp(np.conj(mu) * X)) / 2j * np.exp(-decay * T)

    def d(side, order, T):
        xb = 0.0 if side == "left" else 1.0
        return (mu**order * np.exp(mu * xb) - np.conj(mu) ** order * np.exp(np.conj(mu) * xb)) / 2j * np.exp(-decay * T)

    return q, d


def test_8_global_relation_residuals():
    T = 0.1
    ks = _random_ks()
    exact = [
        (eq1_problem(T=T), _sine_mode(1j * np.pi, 1j * np.pi**2)),
        (eq2_problem(T=T), _sine_mode(-0.5 + 1j * np.pi, np.pi**2 + 0.25)),
    ]
    # plane wave: solves the Stokes equation whatever the boundary values
    kap = 2.0
    plane = make_problem(STOKES, 1.0, lambda x: np.exp(1j * kap * x), left={0: 0.0}, right={0: 0.0, 1: 0.0},
                         T_max=T, max_degree=10)
    exact.append((plane, _mode(1j * kap, plane.symbol(kap))))
    for prob, (q, d) in exact:
        s = _exact_samples(prob, q, d, T)
        assert max(abs(residual(prob, s, k, T)) for k in ks) < 1e-8

    fd_cases = [(eq1_problem(T=T), 512, 1e-4), (eq2_problem(T=T), 512, 1e-4), (_smooth_stokes(), 256, 1e-5)]
    for prob, M, dt in fd_cases:
        s = fd_reference(prob, M, dt, T=T).to_sampled()
        assert max(abs(residual(prob, s, k, T)) for k in ks) < 1e-4


def test_9_orthogonality():
    for L in (1.0, 2.0):
        for m in range(1, 11):
            for n in range(1, 11):
                assert abs(orthogonality_check(m, n, L) - (2 * L if m == n else 0.0)) < 1e-10


def test_10_endpoint_uniform_convergence():
    prob = eq1_problem(q0=lambda x: 1 - x, T=0.1, left=1.0, right=0.0, degree=1)
    sol = evaluate_integral(prob, EvalRequest([1e-3], [0.1], tol=1e-6))
    assert abs(sol.q[0, 0] - 1) < 5e-3
    assert abs(naive_sine_series(prob, 200, [1e-3], 0.1)[0] - 1) > 5e-2


def test_11_laplace_failure_demo():
    rep = laplace_demo()
    big = np.abs(rep.k_zeros) > 20
    assert big.any()
    assert np.all(rep.imag_ratio[big] < 0.05)
    assert np.all(np.abs(rep.s_values) >= 1e3)
    assert rep.root_residual < 1e-10 and rep.vieta_residual < 1e-10
    assert rep.ordering_ok and rep.sign_pattern_ok
    # the mapped zeros sit on the negative real s axis, so no zero with
    # Re s > 0 is found and this flag is false
    assert rep.failure
