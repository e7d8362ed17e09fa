import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from utm.errors import CountMismatch, SchemaError
from utm.problem_spec import (
    PiecewisePoly,
    build_problem,
    make_problem,
    serialize_problem,
    validate_compatibility,
)

BASE = {
    "symbol": [0, 0, [0, 1]],
    "L": 1.0,
    "T_max": 0.5,
    "q0": {"breakpoints": [0.0, 0.5, 1.0], "coeffs": [[0, 1], [0.5, -1]]},
    "boundary": {"left": {0: 0.0}, "right": {0: 0.0}},
}


def test_piecewise_eval_and_derivative():
    pp = PiecewisePoly([0.0, 1.0, 2.0], [[1, 2, 3], [6, 8, 3]])
    assert pp(0.5) == pytest.approx(1 + 1 + 0.75)
    assert pp(1.5) == pytest.approx(6 + 4 + 0.75)
    assert pp(0.5, 1) == pytest.approx(2 + 3)
    assert pp(2.0) == pytest.approx(17)


def test_from_function_accuracy():
    pp = PiecewisePoly.from_function(np.sin, 0.0, 3.0, degree=5)
    x = np.linspace(0, 3, 501)
    assert np.max(np.abs(pp(x) - np.sin(x))) < 1e-12


def test_build_problem_and_split():
    p = build_problem(BASE)
    assert p.n == 2 and p.split() == (1, 1)
    assert validate_compatibility(p).compatible


def test_unknown_keys_rejected():
    bad = dict(BASE, extra=1)
    with pytest.raises(SchemaError):
        build_problem(bad)
    with pytest.raises(SchemaError):
        build_problem(dict(BASE, boundary={"left": {0: 0.0}, "middle": {}}))


def test_count_mismatch():
    with pytest.raises(CountMismatch):
        build_problem(dict(BASE, boundary={"left": {0: 0.0}, "right": {}}))


def test_expression_names_restricted():
    with pytest.raises(SchemaError):
        build_problem(dict(BASE, q0={"expr": "__import__('os')"}))


def test_incompatible_corner_warns():
    p = make_problem([0, 0, 1j], 1.0, 1.0, left={0: 0.0}, right={0: 0.0})
    assert not validate_compatibility(p).compatible


def test_robin_block():
    cfg = dict(BASE)
    del cfg["boundary"]
    cfg["symbol"] = [0, 0, 1]
    cfg["robin"] = {"alpha": 1.0, "beta": 2.0}
    p = build_problem(cfg)
    assert p.is_robin and p.split() == (1, 1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=4), st.floats(0.5, 3.0), st.floats(0.1, 2.0))
def test_serialize_round_trip(c, L, T):
    cfg = {
        "symbol": [0, [0, -1], 1],
        "L": L,
        "T_max": T,
        "q0": {"breakpoints": [0.0, L], "coeffs": [c]},
        "boundary": {"left": {0: {"breakpoints": [0.0, T], "coeffs": [[c[0], 1.0]]}}, "right": {0: 0.0}},
    }
    p = build_problem(cfg)
    q = build_problem(serialize_problem(p))
    assert serialize_problem(q) == serialize_problem(p)
    x = np.linspace(0, L, 7)
    assert np.array_equal(p.q0(x), q.q0(x))
