"""Independent references: eigenmodes, a finite-difference solver, the sine series,
orthogonality of the eq2 eigenfunctions and the Laplace-transform demonstration."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import UnstableDiscretization, WrongProblemClass
from .problem_spec import Problem, make_problem
from .transforms import SampledSolution, fourier_initial, scaled_t_transform

GROWTH_BUDGET = np.log(1e6)


def fornberg_weights(x0: float, pts, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at x0 on the nodes ``pts``."""
    pts = np.asarray(pts, dtype=float)
    n = pts.size
    if m >= n:
        raise ValueError("need more nodes than the derivative order")
    c = np.zeros((n, m + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = pts[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = pts[i] - x0
        for j in range(i):
            c3 = pts[i] - pts[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


# ---------------------------------------------------------------------------
# finite differences


def _stencil_width(m: int, centred: bool) -> int:
    # centred stencils are fourth order (symmetry gains one); the biased
    # closures are third order, as wider ones leave growing modes for m = 3
    if centred:
        return m + 4 if m % 2 else m + 3
    return m + 3


def derivative_matrix(M: int, h: float, m: int) -> sp.csr_matrix:
    """m-th derivative on M+1 uniform nodes, biased near the ends."""
    N = M + 1
    w = _stencil_width(m, True)
    half = w // 2
    rows, cols, vals = [], [], []
    x = np.arange(N) * h
    for i in range(N):
        if half <= i <= N - 1 - half:
            idx = np.arange(i - half, i + half + 1)
        else:
            wb = _stencil_width(m, False)
            start = min(max(i - wb // 2, 0), N - wb)
            idx = np.arange(start, start + wb)
        wts = fornberg_weights(x[i], x[idx], m)
        rows.extend([i] * idx.size)
        cols.extend(idx)
        vals.extend(wts)
    return sp.csr_matrix((vals, (rows, cols)), shape=(N, N))


def boundary_row(M: int, h: float, side: str, order: int) -> np.ndarray:
    """One-sided fourth-order stencil for the order-th derivative at x = 0 or x = L."""
    w = order + 4
    row = np.zeros(M + 1)
    if side == "left":
        idx = np.arange(w)
        row[idx] = fornberg_weights(0.0, idx * h, order)
    else:
        idx = np.arange(M + 1 - w, M + 1)
        row[idx] = fornberg_weights(M * h, idx * h, order)
    return row


def pde_operator(prob: Problem, M: int) -> sp.csr_matrix:
    """Discrete -w(-i d/dx) on the grid."""
    h = prob.L / M
    A = sp.csr_matrix((M + 1, M + 1), dtype=complex)
    for m, a in enumerate(prob.symbol.coeffs):
        if a == 0:
            continue
        if m == 0:
            A = A - a * sp.identity(M + 1, dtype=complex, format="csr")
        else:
            A = A - a * (-1j) ** m * derivative_matrix(M, h, m)
    return A.tocsr()


def _conditions(prob: Problem, M: int):
    """Algebraic rows: list of (node row, coefficient row, data function)."""
    h = prob.L / M
    out = []
    if prob.is_robin:
        r = prob.assignment
        # one-sided rows for q_x - alpha q and q_x - beta q
        left = boundary_row(M, h, "left", 1)
        left[0] -= r.alpha
        right = boundary_row(M, h, "right", 1)
        right[M] -= r.beta
        out.append((0, left, r.h1))
        out.append((M, right, r.h2))
        return out
    a = prob.assignment
    for i, j in enumerate(sorted(a.left_orders)):
        out.append((i, boundary_row(M, h, "left", j), prob.boundary("left", j)))
    for i, j in enumerate(sorted(a.right_orders)):
        out.append((M - i, boundary_row(M, h, "right", j), prob.boundary("right", j)))
    return out


def max_growth_rate(A: sp.spmatrix, conds) -> float:
    """Largest Re of the spectrum after eliminating the constrained nodes."""
    N = A.shape[0]
    b = np.array([c[0] for c in conds], dtype=int)
    d = np.setdiff1d(np.arange(N), b)
    Ad = A.toarray()
    C = np.array([c[1] for c in conds], dtype=complex)
    if b.size:
        Cb = C[:, b]
        Cd = C[:, d]
        Ar = Ad[np.ix_(d, d)] - Ad[np.ix_(d, b)] @ np.linalg.solve(Cb, Cd)
    else:
        Ar = Ad
    return float(np.max(np.linalg.eigvals(Ar).real))


@dataclass
class FDGrid:
    M: int
    dt: float
    x: np.ndarray
    t: np.ndarray
    q: np.ndarray  # (M+1, len t)
    L: float
    tags: dict = field(default_factory=dict)

    def _tindex(self, t: float) -> int:
        j = int(np.argmin(np.abs(self.t - t)))
        if abs(self.t[j] - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"t={t} is not a stored time step")
        return j

    def at(self, x, t: float) -> np.ndarray:
        """Six-point interpolation in x at a stored time."""
        j = self._tindex(t)
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        h = self.L / self.M
        out = np.empty(xs.size, dtype=complex)
        for i, xv in enumerate(xs):
            start = int(np.clip(np.floor(xv / h) - 2, 0, self.M - 5))
            idx = np.arange(start, start + 6)
            out[i] = fornberg_weights(xv, self.x[idx], 0) @ self.q[idx, j]
        return out

    def to_sampled(self) -> SampledSolution:
        return SampledSolution(self.x, self.t, self.q, L=self.L)


def fd_reference(prob: Problem, M: int, dt: float, T: float | None = None,
                 store_every: int = 1, startup: int = 2) -> FDGrid:
    """Method of lines with Crank-Nicolson in time; boundary conditions as algebraic rows.

    The first ``startup`` steps are each replaced by two backward-Euler half
    steps to damp corner incompatibilities.
    """
    if M < 64:
        raise ValueError("M must be at least 64")
    T = prob.T_max if T is None else float(T)
    L = prob.L
    h = L / M
    x = np.arange(M + 1) * h
    A = pde_operator(prob, M)
    conds = _conditions(prob, M)
    rate = max_growth_rate(A, conds)
    limit = max(1.0, GROWTH_BUDGET / T)
    if rate > limit:
        raise UnstableDiscretization(f"discrete operator grows at rate {rate:.3g} > {limit:.3g}")
    alg = np.array([c[0] for c in conds], dtype=int)
    diff_mask = np.ones(M + 1, dtype=bool)
    diff_mask[alg] = False
    P = sp.diags(diff_mask.astype(complex))
    I = sp.identity(M + 1, dtype=complex, format="csr")
    Crows = sp.lil_matrix((M + 1, M + 1), dtype=complex)
    for node, row, _ in conds:
        Crows[node, :] = row
    Crows = Crows.tocsr()
    # trapezoidal step and backward-Euler half step share the same matrix
    lhs = splu((P @ (I - 0.5 * dt * A) + Crows).tocsc())
    explicit = P @ (I + 0.5 * dt * A)

    nsteps = int(round(T / dt))
    q = prob.q0(x).astype(complex)
    times = [0.0]
    hist = [q.copy()]

    def rhs_alg(tn):
        v = np.zeros(M + 1, dtype=complex)
        for node, _, data in conds:
            v[node] = data(tn)
        return v

    for n in range(nsteps):
        tn1 = (n + 1) * dt
        if n < startup:
            mid = n * dt + 0.5 * dt
            q = lhs.solve(P @ q + rhs_alg(mid))
            q = lhs.solve(P @ q + rhs_alg(tn1))
        else:
            q = lhs.solve(explicit @ q + rhs_alg(tn1))
        if (n + 1) % store_every == 0 or n + 1 == nsteps:
            times.append(tn1)
            hist.append(q.copy())
    tags = {"space": "fd4", "time": "crank-nicolson", "startup": f"backward-euler x{startup}",
            "growth_rate": rate}
    return FDGrid(M, dt, x, np.array(times), np.array(hist).T, L, tags)


def dispersion_error(prob: Problem, M: int, frac: float = 0.25) -> float:
    """Max relative error of the interior stencil symbol on plane waves with |k| h <= frac * pi."""
    h = prob.L / M
    ks = np.linspace(0.05, frac * np.pi / h, 64)
    approx = np.zeros(ks.shape, dtype=complex)
    for m, a in enumerate(prob.symbol.coeffs):
        if a == 0:
            continue
        w = _stencil_width(m, True)
        off = np.arange(w) - w // 2
        wts = fornberg_weights(0.0, off * h, m)
        approx += a * (-1j) ** m * (np.exp(1j * np.outer(ks, off * h)) @ wts)
    exact = prob.symbol(ks)
    return float(np.max(np.abs(approx - exact) / np.maximum(np.abs(exact), 1e-300)))


# ---------------------------------------------------------------------------
# closed forms


def analytic_mode(example: str, m: int, x, t, L: float = 1.0):
    """Exact single-mode solutions of the Dirichlet problems."""
    x = np.asarray(x, dtype=float)
    k = m * np.pi / L
    if example == "eq1":
        return np.exp(-1j * k ** 2 * t) * np.sin(k * x)
    if example == "eq2":
        return np.exp(-(k ** 2 + 0.25) * t) * np.exp(-x / 2) * np.sin(k * x)
    if example == "heat":
        return np.exp(-k ** 2 * t) * np.sin(k * x)
    raise ValueError(f"unknown example {example!r}")


def orthogonality_check(m: int, n: int, L: float, nodes: int = 160) -> complex:
    """Gauss-Legendre value of int_0^L conj-pair products of the eq2 eigenfunctions."""
    u, w = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * L * (u + 1)
    w = 0.5 * L * w
    km = m * np.pi / L + 0.5j
    kn = n * np.pi / L + 0.5j
    left = np.exp(-1j * km * x) - np.exp(-1j * (1j - km) * x)
    right = np.exp(1j * kn * x) - np.exp(1j * (1j - kn) * x)
    return complex(np.sum(w * left * right))


def naive_sine_series(prob: Problem, terms: int, x, t: float):
    """Classical sine expansion with term-wise projected boundary forcing.

    b_m' = -w(k_m) b_m + a2 (2 k_m / L)(f0 - (-1)^m g0); the partial sum
    vanishes at both ends whatever the data.
    """
    if prob.n != 2 or prob.is_robin:
        raise WrongProblemClass("naive sine series needs a second-order Dirichlet problem")
    a = prob.assignment
    if set(a.left_orders) != {0} or set(a.right_orders) != {0}:
        raise WrongProblemClass("naive sine series needs q(0, t) and q(L, t)")
    a0, a1, a2 = prob.symbol.coeffs
    if a1 != 0:
        raise WrongProblemClass("naive sine series needs a symbol even in k")
    L = prob.L
    x = np.atleast_1d(np.asarray(x, dtype=float))
    m = np.arange(1, terms + 1)
    k = m * np.pi / L
    w = prob.symbol(k)
    # sine coefficients of q0: (2/L) Im of the Fourier transform at -k
    b0 = (2.0 / L) * (fourier_initial(prob.q0, -k) - fourier_initial(prob.q0, k)) / 2j
    f0 = scaled_t_transform(prob.boundary("left", 0), w, t)
    g0 = scaled_t_transform(prob.boundary("right", 0), w, t)
    b = np.exp(-w * t) * b0 + a2 * (2.0 * k / L) * (f0 - (-1.0) ** m * g0)
    return np.sin(np.outer(x, k)) @ b


# ---------------------------------------------------------------------------
# Laplace transform demonstration for q_t + q_x + q_xxx = 0

ALPHA = np.exp(2j * np.pi / 3)


def cubic_roots(s: complex) -> np.ndarray:
    """Roots of lam^3 + lam + s = 0 labelled by nearest -alpha^{j-1} s^{1/3}."""
    r = np.roots([1.0, 0.0, 1.0, s])
    c = np.abs(s) ** (1 / 3) * np.exp(1j * np.angle(s) / 3)
    targets = [-c, -ALPHA * c, -ALPHA ** 2 * c]
    out = np.empty(3, dtype=complex)
    left = list(range(3))
    for j, tg in enumerate(targets):
        i = min(left, key=lambda i: abs(r[i] - tg))
        out[j] = r[i]
        left.remove(i)
    return out


def laplace_beta(lams: np.ndarray) -> np.ndarray:
    """Variation-of-parameters weights: sum b = 0, sum lam b = 0, sum lam^2 b = 1."""
    V = np.vstack([np.ones(3), lams, lams ** 2])
    return np.linalg.solve(V, np.array([0.0, 0.0, 1.0]))


def laplace_delta(s: complex, L: float = 1.0) -> complex:
    l1, l2, l3 = cubic_roots(s)
    return ((l3 - l2) * np.exp((l2 + l3 - l1) * L) + (l1 - l3) * np.exp(l3 * L)
            + (l2 - l1) * np.exp(l2 * L))


def _winding(f, corners, n=1000) -> float:
    total = 0.0
    for a, b in zip(corners, corners[1:] + corners[:1]):
        m = n
        while True:
            z = a + (b - a) * np.linspace(0.0, 1.0, m + 1)
            v = np.array([f(s) for s in z])
            d = np.angle(v[1:] / v[:-1])
            if np.max(np.abs(d)) < 0.4 or m >= 64 * n:
                break
            m *= 2
        total += float(np.sum(d))
    return total / (2 * np.pi)


@dataclass
class LaplaceDemoReport:
    s_values: np.ndarray
    roots: np.ndarray  # (len s, 3)
    root_residual: float
    vieta_residual: float
    beta_residual: float
    ordering_ok: bool
    sign_pattern_ok: bool
    delta: np.ndarray
    windings: dict
    k_zeros: np.ndarray
    s_zeros: np.ndarray
    imag_ratio: np.ndarray
    failure: bool
    notes: list = field(default_factory=list)


def laplace_demo(L: float = 1.0, magnitudes=(1e3, 1e6), boxes=(50.0, 500.0, 5000.0),
                 k_radius: float | None = None) -> LaplaceDemoReport:
    """Roots, weights and determinant of the Laplace route, and its zero locus in Re s > 0."""
    from .determinant_zeros import locate_zeros

    args = np.linspace(-0.45 * np.pi, 0.45 * np.pi, 7)
    svals = np.array([r * np.exp(1j * a) for r in magnitudes for a in args])
    roots = np.array([cubic_roots(s) for s in svals])
    res = np.abs(roots ** 3 + roots + svals[:, None]) / np.abs(svals)[:, None]
    vieta = np.maximum(np.abs(roots.sum(axis=1)) / np.abs(svals) ** (1 / 3),
                       np.abs(roots.prod(axis=1) + svals) / np.abs(svals))
    beta_res = 0.0
    ordering = True
    for s, lam in zip(svals, roots):
        b = laplace_beta(lam)
        scale = np.abs(b).max()
        beta_res = max(beta_res, abs(b.sum()) / scale, abs((lam * b).sum()) / (scale * abs(lam).max()))
        c = abs(s) ** (1 / 3) * np.exp(1j * np.angle(s) / 3)
        lead = np.array([-c, -ALPHA * c, -ALPHA ** 2 * c])
        ordering &= bool(np.all(np.abs(lam - lead) < 0.05 * abs(c)))
    signs = bool(np.all(roots[:, 0].real < 0) and np.all(roots[:, 1:].real > 0))
    delta = np.array([laplace_delta(s, L) for s in svals])

    windings = {}
    for S in boxes:
        corners = [complex(0.5, -S), complex(S, -S), complex(S, S), complex(0.5, S)]
        windings[S] = _winding(lambda s: laplace_delta(s, L), corners)
    found = any(round(w) != 0 for w in windings.values())

    stokes = make_problem([0, 1j, 0, -1j], L, 0.0, left={0: 0.0}, right={0: 0.0, 1: 0.0})
    zs = locate_zeros(stokes, k_radius or 40.0 / L)
    ks = np.array([z.k for z in zs if not z.degenerate])
    ss = 1j * (ks ** 3 - ks)
    ratio = np.abs(ss.imag) / np.maximum(np.abs(ss), 1e-300)
    notes = []
    if ss.size and np.all(ss.real < 0):
        notes.append("mapped zeros lie on the negative real s axis")
    return LaplaceDemoReport(svals, roots, float(res.max()), float(vieta.max()), float(beta_res),
                             ordering, signs, delta, windings, ks, ss, ratio, found, notes)
