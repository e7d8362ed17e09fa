"""Global relation at the symmetry roots: assembly, determinant and solve.

Each side of the interval is described by a boundary map: the vector of
all n boundary transforms equals E @ unknowns + d, where d carries the
prescribed data. Dirichlet-type assignments use selection matrices; Robin
conditions use E = [[1], [alpha]] and d = [0, h~]. With these maps row l of
the system reads

    c(l_l)^T E_L u_L - e^{-i l_l L} c(l_l)^T E_R u_R
        = q0_hat(l_l) - c(l_l)^T d_L + e^{-i l_l L} c(l_l)^T d_R

after dropping the e^{w t} q_hat(t, l_l) carrier.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NearSingular
from .problem_spec import Problem, RobinSpec
from .symbol_core import other_roots, quotient_coefficients, symmetry_roots
from .transforms import (
    SampledSolution,
    fourier_initial,
    scaled_t_transform,
    solution_transform,
    t_transform_omega,
)

SINGULAR_RATIO = 1e-8


@dataclass
class SideMap:
    side: str
    E: np.ndarray
    unknowns: list
    data: list = field(default_factory=list)  # (row j, PiecewisePoly)


def side_maps(prob: Problem):
    n = prob.n
    if isinstance(prob.assignment, RobinSpec):
        r = prob.assignment
        left = SideMap("left", np.array([[1.0], [r.alpha]], dtype=complex), [("left", 0)], [(1, r.h1)])
        right = SideMap("right", np.array([[1.0], [r.beta]], dtype=complex), [("right", 0)], [(1, r.h2)])
        return left, right
    maps = []
    for side, given in (("left", prob.assignment.left_orders), ("right", prob.assignment.right_orders)):
        unknown = [j for j in range(n) if j not in given]
        E = np.zeros((n, len(unknown)), dtype=complex)
        for col, j in enumerate(unknown):
            E[j, col] = 1.0
        data = [(j, prob.data[(side, j)]) for j in sorted(given) if not prob.data[(side, j)].is_zero()]
        maps.append(SideMap(side, E, [(side, j) for j in unknown], data))
    return maps[0], maps[1]


def unknown_ids(prob: Problem) -> list:
    left, right = side_maps(prob)
    return left.unknowns + right.unknowns


def _data_vector(sm: SideMap, n: int, omega: np.ndarray, t: float, kind: str) -> np.ndarray:
    """Boundary-data part d of the transform vector, shape (n, K)."""
    d = np.zeros((n, omega.size), dtype=complex)
    for j, pp in sm.data:
        if kind == "raw":
            d[j] += t_transform_omega(pp, omega, t)
        elif kind == "scaled":
            d[j] += scaled_t_transform(pp, omega, t)
        elif kind == "reduced":
            d[j] += scaled_t_transform(pp, omega, t, drop_endpoint=True)
        else:
            raise ValueError(kind)
    return d


@dataclass
class Batch:
    """Row-scaled system for a vector of k.

    kind ``raw``: rhs uses q0_hat and f~; kind ``scaled``: everything times
    e^{-w t}; kind ``reduced``: as ``scaled`` with data endpoint terms dropped.
    Row l is multiplied by s_l = exp(-max(0, Im l_l) L).
    """

    k: np.ndarray
    lams: np.ndarray  # (K, n)
    omega: np.ndarray
    M: np.ndarray  # (K, n, n) scaled
    rhs: np.ndarray  # (K, n) scaled
    log_s: np.ndarray  # (K, n)
    dL: np.ndarray  # (n, K)
    dR: np.ndarray
    ck: np.ndarray  # (n, K) c_j(k)
    left: SideMap
    right: SideMap

    def ratio(self) -> np.ndarray:
        return conditioning(self.M)

    def solve(self) -> np.ndarray:
        return np.linalg.solve(self.M, self.rhs[..., None])[..., 0]


def conditioning(M: np.ndarray) -> np.ndarray:
    """|det| / prod(row norms) after column equilibration; 1 for orthogonal rows."""
    colmax = np.max(np.abs(M), axis=-2, keepdims=True)
    Mc = M / np.where(colmax > 0, colmax, 1.0)
    rn = np.linalg.norm(Mc, axis=-1)
    det = np.abs(np.linalg.det(Mc))
    prod = np.prod(rn, axis=-1)
    return np.where(prod > 0, det / np.where(prod > 0, prod, 1.0), 0.0)


def _matrix(prob: Problem, lams: np.ndarray, log_s: np.ndarray, left: SideMap, right: SideMap, qc):
    cl = np.transpose(qc.eval(lams), (1, 2, 0))  # (K, l, j)
    ML = np.einsum("klj,ju->klu", cl, left.E) * np.exp(log_s)[..., None]
    MR = -np.einsum("klj,ju->klu", cl, right.E) * np.exp(log_s - 1j * lams * prob.L)[..., None]
    return np.concatenate([ML, MR], axis=2), cl


def coefficient_matrix(prob: Problem, lams, log_s=None) -> np.ndarray:
    """Unknown-coefficient matrices for root rows ``lams`` (K, n); row l times exp(log_s[l])."""
    lams = np.asarray(lams, dtype=complex)
    if lams.ndim == 1:
        lams = lams[None, :]
    if log_s is None:
        log_s = np.zeros(lams.shape, dtype=complex)
    left, right = side_maps(prob)
    return _matrix(prob, lams, np.asarray(log_s, dtype=complex), left, right,
                   quotient_coefficients(prob.symbol))[0]


def batch_system(prob: Problem, ks, t: float, kind: str = "scaled", lams=None) -> Batch:
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    n = prob.n
    L = prob.L
    sym = prob.symbol
    qc = quotient_coefficients(sym)
    if lams is None:
        lams = np.concatenate([ks[:, None], other_roots(sym, ks)], axis=1)
    omega = sym(ks)
    omega = np.atleast_1d(omega)
    left, right = side_maps(prob)
    dL = _data_vector(left, n, omega, t, kind)
    dR = _data_vector(right, n, omega, t, kind)
    shift = np.maximum(0.0, lams.imag) * L  # (K, n)
    log_s = -shift
    ex = np.exp(-1j * lams * L - shift)  # s_l e^{-i l L}
    s = np.exp(log_s)
    K = ks.size
    M, cl = _matrix(prob, lams, -shift, left, right, qc)
    q0h = fourier_initial(prob.q0, lams.ravel(), shift.ravel()).reshape(K, n)
    if kind != "raw":
        q0h = q0h * np.exp(-omega * t)[:, None]
    rhs = q0h - np.einsum("klj,jk->kl", cl, dL) * s + np.einsum("klj,jk->kl", cl, dR) * ex
    ck = qc.eval(ks)
    return Batch(ks, lams, omega, M, rhs, log_s, dL, dR, ck, left, right)


@dataclass
class GRSystem:
    k: complex
    t: float
    lambdas: tuple
    matrix: np.ndarray
    rhs_known: np.ndarray
    unknown_ids: list
    qhat_carrier: list

    def residual(self, unknowns: np.ndarray) -> float:
        r = self.matrix @ unknowns - self.rhs_known
        scale = np.abs(self.matrix) @ np.abs(unknowns) + np.abs(self.rhs_known)
        return float(np.max(np.abs(r) / np.where(scale > 0, scale, 1.0)))


@dataclass
class GRSolution:
    k: complex
    t: float
    unknowns: dict
    delta: complex
    known_part_N: list


def assemble(prob: Problem, k: complex, t: float) -> GRSystem:
    """Unscaled system at k with rows ordered as in symmetry_roots."""
    fan = symmetry_roots(prob.symbol, k)
    lams = np.array([fan.lambdas])
    b = batch_system(prob, np.array([k]), t, "raw", lams=lams)
    s = np.exp(b.log_s[0])
    M = b.M[0] / s[:, None]
    rhs = b.rhs[0] / s
    carriers = [f"-e^(w t) q_hat(t, lambda_{l})" for l in range(prob.n)]
    return GRSystem(complex(k), t, fan.lambdas, M, rhs, unknown_ids(prob), carriers)


def determinant(prob: Problem, k) -> complex:
    """Determinant of the unknown-coefficient matrix (columns: left unknowns, then right)."""
    return complex(np.linalg.det(assemble(prob, k, 0.0).matrix))


def scaled_determinant(prob: Problem, ks, lams=None) -> np.ndarray:
    """Determinant of the row-scaled matrix (bounded in both half-planes)."""
    b = batch_system(prob, ks, 0.0, "raw", lams=lams)
    return np.linalg.det(b.M)


def solve_unknowns(prob: Problem, k: complex, t: float) -> GRSolution:
    """Solution of the carrier-free system; raises NearSingular when Delta(k) ~ 0."""
    fan = symmetry_roots(prob.symbol, k)
    b = batch_system(prob, np.array([k]), t, "raw", lams=np.array([fan.lambdas]))
    ratio = float(b.ratio()[0])
    if ratio < SINGULAR_RATIO:
        raise NearSingular(k, ratio)
    u = b.solve()[0]
    s = np.exp(b.log_s[0])
    ids = unknown_ids(prob)
    delta = complex(np.linalg.det(b.M[0] / s[:, None]))
    return GRSolution(complex(k), t, dict(zip(ids, u)), delta, list(b.rhs[0] / s))


def transform_vectors(prob: Problem, sol: GRSolution, k: complex, t: float):
    """Full left and right boundary-transform vectors (f~_0..f~_{n-1}, g~_0..g~_{n-1})."""
    left, right = side_maps(prob)
    omega = np.atleast_1d(prob.symbol(k))
    dL = _data_vector(left, prob.n, omega, t, "raw")[:, 0]
    dR = _data_vector(right, prob.n, omega, t, "raw")[:, 0]
    uL = np.array([sol.unknowns[i] for i in left.unknowns], dtype=complex)
    uR = np.array([sol.unknowns[i] for i in right.unknowns], dtype=complex)
    return left.E @ uL + dL, right.E @ uR + dR


def residual(prob: Problem, q_sampler: SampledSolution, k: complex, t: float) -> complex:
    """Relative defect of the global relation for a sampled solution.

    All transforms, including e^{w t} q_hat(t, k), come from the samples;
    the defect is divided by the sum of the magnitudes of the terms.
    """
    n = prob.n
    L = prob.L
    qc = quotient_coefficients(prob.symbol)
    c = qc.eval(np.array([k]))[:, 0]
    w = prob.symbol(k)
    f = np.zeros(n, dtype=complex)
    g = np.zeros(n, dtype=complex)
    for j in range(n):
        f[j] = t_transform_omega(q_sampler.boundary_data("left", j), w, t)
        g[j] = t_transform_omega(q_sampler.boundary_data("right", j), w, t)
    q0h = fourier_initial(prob.q0, k)
    qth = solution_transform(q_sampler, k, t)
    e = np.exp(-1j * k * L)
    terms = np.concatenate([c * f, -e * c * g, [-q0h, np.exp(w * t) * qth]])
    total = terms.sum()
    scale = np.sum(np.abs(terms))
    if scale == 0:
        return 0j
    return complex(total / scale)
