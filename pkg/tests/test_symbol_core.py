import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from utm.errors import InvalidSymbol
from utm.symbol_core import (
    Symbol,
    asymptotic_zero_directions,
    other_roots,
    quotient_coefficients,
    symmetry_roots,
    track_roots,
    validate_assumptions,
)

coef = st.complex_numbers(min_magnitude=0.0, max_magnitude=3.0, allow_nan=False, allow_infinity=False)
kval = st.complex_numbers(max_magnitude=20.0, allow_nan=False, allow_infinity=False)


@st.composite
def symbols(draw):
    n = draw(st.integers(min_value=2, max_value=5))
    c = [draw(coef) for _ in range(n)]
    lead = draw(st.complex_numbers(min_magnitude=0.5, max_magnitude=3.0, allow_nan=False, allow_infinity=False))
    return Symbol(c + [lead])


def test_evaluation_examples():
    assert Symbol([0, 0, 1j])(2.0) == 4j
    assert Symbol([0, -1j, 1])(1 + 1j) == pytest.approx((1 + 1j) ** 2 - 1j * (1 + 1j))
    assert Symbol([0, 1j, 0, -1j]).derivative(1 / np.sqrt(3)) == pytest.approx(0, abs=1e-15)


def test_rejects_bad_symbols():
    with pytest.raises(InvalidSymbol):
        Symbol([1.0])
    with pytest.raises(InvalidSymbol):
        Symbol([0, 1, 0])


def test_quotient_coefficients_quadratic():
    # for w = a2 k^2 + a1 k + a0: c0 = i (a2 k + a1), c1 = a2
    a0, a1, a2 = 0.3, -0.7j, 1.5
    qc = quotient_coefficients(Symbol([a0, a1, a2]))
    k = np.array([0.4 - 1.1j])
    c = qc.eval(k)
    assert c[0, 0] == pytest.approx(1j * (a2 * k[0] + a1))
    assert c[1, 0] == pytest.approx(a2)


@settings(max_examples=60, deadline=None)
@given(symbols(), kval, kval)
def test_quotient_identity(sym, k, lam):
    # sum_j c_j(k) (i lam)^j = i (w(k) - w(lam)) / (k - lam)
    if abs(k - lam) < 1e-3:
        return
    qc = quotient_coefficients(sym)
    lhs = qc.X_polynomial(np.array([k]), np.array([lam]))[0]
    rhs = 1j * (sym(k) - sym(lam)) / (k - lam)
    scale = sum(abs(a) * (abs(k) + abs(lam) + 1) ** m for m, a in enumerate(sym.coeffs))
    assert abs(lhs - rhs) <= 1e-10 * scale


@settings(max_examples=60, deadline=None)
@given(symbols(), kval)
def test_other_roots_solve_symmetry_equation(sym, k):
    r = other_roots(sym, np.array([k]))[0]
    assert r.shape == (sym.degree - 1,)
    scale = sum(abs(a) * (abs(k) + 1) ** m for m, a in enumerate(sym.coeffs))
    assert np.all(np.abs(sym(r) - sym(k)) <= 1e-9 * scale)


def test_symmetry_roots_first_is_k_and_sectors():
    fan = symmetry_roots(Symbol([0, 0, 0, 1j]), 5.0)
    assert fan[0] == 5.0
    expected = [5.0 * np.exp(2j * np.pi / 3), 5.0 * np.exp(4j * np.pi / 3)]
    assert np.allclose(fan.lambdas[1:], expected)


def test_track_roots_continuity():
    sym = Symbol([0, 1j, 0, -1j])
    path = 10 * np.exp(1j * np.linspace(0.1, 1.0, 50))
    fans = track_roots(sym, path)
    jumps = [max(abs(a - b) for a, b in zip(f.lambdas, g.lambdas)) for f, g in zip(fans, fans[1:])]
    assert max(jumps) < 1.0


def test_asymptotic_directions_schroedinger():
    th = asymptotic_zero_directions(Symbol([0, 0, 1j]))
    assert np.allclose(th, [0, np.pi / 2, np.pi, 3 * np.pi / 2])


def test_validate_assumptions():
    assert validate_assumptions(Symbol([0, -1j, 1])).nonneg_real_part
    assert not validate_assumptions(Symbol([0, 0, -1])).nonneg_real_part
    rep = validate_assumptions(Symbol([0, 0, 1j]))
    assert not rep.distinct_roots and rep.warnings
