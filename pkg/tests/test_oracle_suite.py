import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from utm.errors import UnstableDiscretization, WrongProblemClass
from utm.oracle_suite import (
    ALPHA,
    analytic_mode,
    cubic_roots,
    derivative_matrix,
    dispersion_error,
    fd_reference,
    fornberg_weights,
    laplace_beta,
    naive_sine_series,
    orthogonality_check,
)
from utm.problem_spec import make_problem

from conftest import EQ1, HEAT, eq1_problem, eq2_problem, robin_problem, stokes_problem


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 4), st.integers(0, 3), st.floats(-0.5, 0.5))
def test_fornberg_exact_on_polynomials(m, extra, x0):
    pts = np.linspace(-1.0, 1.0, m + 1 + extra) + 0.1
    w = fornberg_weights(x0, pts, m)
    for p in range(m + 1 + extra):
        # d^m/dx^m x^p at x0
        coef = np.prod(np.arange(p, p - m, -1)) if p >= m else 0.0
        exact = coef * x0 ** (p - m) if p >= m else 0.0
        assert abs(w @ pts**p - exact) < 1e-8 * (1 + abs(exact))


def test_fornberg_classical_stencil():
    assert np.allclose(fornberg_weights(0.0, [-1.0, 0.0, 1.0], 2), [1, -2, 1])
    assert np.allclose(fornberg_weights(0.0, [-2, -1, 0, 1, 2], 1), [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12])


@pytest.mark.parametrize("m", [1, 2, 3])
def test_derivative_matrix_fourth_order_interior(m):
    M = 128
    h = 1.0 / M
    x = np.arange(M + 1) * h
    D = derivative_matrix(M, h, m)
    f = np.sin(2 * x)
    exact = 2**m * np.sin(2 * x + m * np.pi / 2)
    err = np.abs(D @ f - exact)[8:-8]
    assert err.max() < 1e-6


def test_dispersion_error_decreases_with_resolution():
    p = stokes_problem()
    assert dispersion_error(p, 512) < dispersion_error(p, 128) < 0.05


@pytest.mark.parametrize("example, maker, tol", [("eq1", eq1_problem, 1e-5), ("eq2", eq2_problem, 1e-5),
                                                 ("heat", None, 1e-5)])
def test_fd_matches_analytic_modes(example, maker, tol):
    if maker is None:
        prob = make_problem(HEAT, 1.0, lambda x: np.sin(np.pi * x), left={0: 0.0}, right={0: 0.0},
                            T_max=0.1, max_degree=5)
    else:
        prob = maker(T=0.1)
    g = fd_reference(prob, 256, 1e-4)
    x = np.array([0.2, 0.5, 0.8])
    assert np.max(np.abs(g.at(x, 0.1) - analytic_mode(example, 1, x, 0.1))) < tol
    assert g.tags["time"] == "crank-nicolson"


def test_fd_robin_growth_rate_matches_inside_zero():
    g = fd_reference(robin_problem(T=0.1), 128, 1e-3)
    assert g.tags["growth_rate"] == pytest.approx(2.023793120634**2, rel=1e-3)


def test_fd_rejects_backward_heat():
    prob = make_problem([0, 0, -1], 1.0, lambda x: np.sin(np.pi * x), left={0: 0.0}, right={0: 0.0},
                        T_max=0.1, max_degree=5)
    with pytest.raises(UnstableDiscretization):
        fd_reference(prob, 128, 1e-3)


def test_fd_small_grid_rejected():
    with pytest.raises(ValueError):
        fd_reference(eq1_problem(), 32, 1e-3)


def test_analytic_mode_values():
    assert analytic_mode("eq1", 1, 0.5, 0.1) == pytest.approx(np.exp(-1j * np.pi**2 / 10))
    assert analytic_mode("eq2", 1, 0.3, 0.05) == pytest.approx(
        np.exp(-(np.pi**2 + 0.25) * 0.05) * np.exp(-0.15) * np.sin(0.3 * np.pi))
    assert analytic_mode("heat", 2, 0.25, 0.0) == pytest.approx(1.0)


@pytest.mark.parametrize("L", [1.0, 2.0])
def test_orthogonality_small_table(L):
    for m in range(1, 4):
        for n in range(1, 4):
            v = orthogonality_check(m, n, L)
            assert abs(v - (2 * L if m == n else 0)) < 1e-10


def test_naive_series_vanishes_at_boundary_but_converges_inside():
    prob = eq1_problem(q0=lambda x: 1 - x, T=0.1, left=1.0, degree=1)
    assert abs(naive_sine_series(prob, 200, [0.0], 0.1)[0]) < 1e-12
    prob0 = eq1_problem()
    v = naive_sine_series(prob0, 50, [0.3], 0.1)[0]
    assert abs(v - np.exp(-1j * np.pi**2 * 0.1) * np.sin(0.3 * np.pi)) < 1e-9
    with pytest.raises(WrongProblemClass):
        naive_sine_series(eq2_problem(), 10, [0.5], 0.1)


@settings(max_examples=50, deadline=None)
@given(st.floats(2.0, 7.0), st.floats(-0.49 * np.pi, 0.49 * np.pi))
def test_cubic_roots_vieta_and_weights(logmag, arg):
    s = 10**logmag * np.exp(1j * arg)
    lam = cubic_roots(s)
    assert np.max(np.abs(lam**3 + lam + s)) < 1e-9 * abs(s)
    assert abs(lam.sum()) < 1e-9 * abs(s) ** (1 / 3)
    assert abs(lam.prod() + s) < 1e-9 * abs(s)
    c = abs(s) ** (1 / 3) * np.exp(1j * arg / 3)
    assert np.all(np.abs(lam - np.array([-c, -ALPHA * c, -ALPHA**2 * c])) < 0.05 * abs(c))
    b = laplace_beta(lam)
    V = np.vstack([np.ones(3), lam, lam**2])
    assert np.allclose(V @ b, [0, 0, 1], atol=1e-10 * np.abs(b).max() * abs(lam).max() ** 2)
    # variation-of-parameters closed form 1 / (3 lam^2 + 1)
    assert np.allclose(b, 1 / (3 * lam**2 + 1), rtol=1e-8)
