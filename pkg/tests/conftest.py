import numpy as np
import pytest

from utm.problem_spec import make_problem

EQ1 = [0, 0, 1j]
EQ2 = [0, -1j, 1]
STOKES = [0, 1j, 0, -1j]
HEAT = [0, 0, 1]


def eq1_problem(q0=lambda x: np.sin(np.pi * x), T=0.2, left=0.0, right=0.0, degree=5):
    return make_problem(EQ1, 1.0, q0, left={0: left}, right={0: right}, T_max=T, max_degree=degree)


def eq2_problem(q0=lambda x: np.exp(-x / 2) * np.sin(np.pi * x), T=0.2, degree=5):
    return make_problem(EQ2, 1.0, q0, left={0: 0.0}, right={0: 0.0}, T_max=T, max_degree=degree)


def stokes_problem(q0=lambda x: x**2 * (1 - x) ** 2, T=0.1, degree=4, split="c1"):
    if split == "c1":
        return make_problem(STOKES, 1.0, q0, left={0: 0.0}, right={0: 0.0, 1: 0.0}, T_max=T, max_degree=degree)
    return make_problem(STOKES, 1.0, q0, left={0: 0.0, 1: 0.0}, right={0: 0.0}, T_max=T, max_degree=degree)


def robin_problem(T=0.4):
    # q0' = q0 at 0 and q0' = 2 q0 at 1
    return make_problem(HEAT, 1.0, lambda x: 1 + x + 3 * x**3, robin=(1.0, 2.0), T_max=T)


@pytest.fixture(scope="session")
def eq1_mode():
    return eq1_problem()


@pytest.fixture(scope="session")
def eq2_mode():
    return eq2_problem()


@pytest.fixture(scope="session")
def stokes_c1():
    return stokes_problem()


@pytest.fixture(scope="session")
def heat_robin():
    return robin_problem()
