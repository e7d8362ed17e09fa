"""Dispersion symbol, conservation-form coefficients and symmetry roots."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidSymbol, NonzeroRemainder, RootFindingFailed


@dataclass(frozen=True)
class Symbol:
    """Polynomial symbol w(k) = sum a_m k^m, coefficients lowest degree first."""

    coeffs: tuple

    def __init__(self, coeffs: Sequence[complex]):
        c = tuple(complex(a) for a in coeffs)
        if len(c) < 2:
            raise InvalidSymbol("symbol must have degree >= 1")
        if c[-1] == 0:
            raise InvalidSymbol("leading coefficient a_n must be nonzero")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> complex:
        return self.coeffs[-1]

    def __call__(self, k):
        return eval_omega(self, k)

    def derivative(self, k):
        """w'(k) by Horner."""
        k = np.asarray(k, dtype=complex)
        n = self.degree
        out = np.zeros_like(k) + n * self.coeffs[n]
        for m in range(n - 1, 0, -1):
            out = out * k + m * self.coeffs[m]
        return out if out.ndim else complex(out)


def eval_omega(sym: Symbol, k):
    """Horner evaluation of w(k); accepts scalars or arrays."""
    k = np.asarray(k, dtype=complex)
    out = np.zeros_like(k) + sym.coeffs[-1]
    for a in reversed(sym.coeffs[:-1]):
        out = out * k + a
    return out if out.ndim else complex(out)


def _polyval_asc(c, k):
    k = np.asarray(k, dtype=complex)
    out = np.zeros_like(k) + (c[-1] if len(c) else 0)
    for a in reversed(c[:-1]):
        out = out * k + a
    return out


@dataclass(frozen=True)
class QuotientCoeffs:
    """c_j(k) as ascending coefficient arrays, j = 0..n-1."""

    c: tuple

    @property
    def n(self) -> int:
        return len(self.c)

    def eval(self, k) -> np.ndarray:
        """Array of shape (n,) + shape(k) holding c_j(k)."""
        return np.stack([_polyval_asc(cj, k) for cj in self.c])

    def X_polynomial(self, k, lam):
        """sum_j c_j(k) (i lam)^j, the image of X under d/dx -> i lam."""
        vals = self.eval(k)
        lam = np.asarray(lam, dtype=complex)
        return sum(vals[j] * (1j * lam) ** j for j in range(self.n))


def quotient_coefficients(sym: Symbol) -> QuotientCoeffs:
    """Coefficients c_j(k) with X = sum_j c_j(k) d^j q / dx^j.

    Divides w(k) - w(lam) by (k - lam) as a polynomial in lam whose
    coefficients are polynomials in k, then maps lam^j to (-i d/dx)^j and
    multiplies by i.
    """
    a = sym.coeffs
    n = sym.degree
    # P(lam) = w(k) - w(lam); entry m is the k-polynomial multiplying lam^m.
    p = [np.zeros(n + 1, dtype=complex) for _ in range(n + 1)]
    p[0][1:] = a[1:]
    for m in range(1, n + 1):
        p[m][0] = -a[m]
    # synthetic division by (lam - k)
    q = [None] * n
    q[n - 1] = p[n].copy()
    for m in range(n - 1, 0, -1):
        q[m - 1] = p[m] + _shift(q[m])
    rem = p[0] + _shift(q[0])
    if np.max(np.abs(rem)) > 0.0:
        raise NonzeroRemainder(f"division left remainder {rem}")
    c = []
    for j in range(n):
        # (w(k)-w(lam))/(k-lam) = -q_j ; c_j = i (-i)^j (-q_j)
        cj = -(1j * (-1j) ** j) * q[j]
        c.append(cj[: n - j])
    return QuotientCoeffs(tuple(np.asarray(cj, dtype=complex) for cj in c))


def _shift(poly):
    """Multiply an ascending k-polynomial by k (degree capped by array length)."""
    out = np.zeros_like(poly)
    out[1:] = poly[:-1]
    return out


@dataclass(frozen=True)
class RootFan:
    lambdas: tuple
    tags: tuple = field(default=())

    def __iter__(self):
        return iter(self.lambdas)

    def __len__(self):
        return len(self.lambdas)

    def __getitem__(self, i):
        return self.lambdas[i]


def deflated_coeffs(sym: Symbol, k: complex) -> np.ndarray:
    """Ascending coefficients of (w(lam) - w(k)) / (lam - k)."""
    a = sym.coeffs
    n = sym.degree
    b = np.zeros(n, dtype=complex)
    b[n - 1] = a[n]
    for m in range(n - 1, 0, -1):
        b[m - 1] = a[m] + k * b[m]
    return b


def _polish(sym: Symbol, lam: np.ndarray, k, tol=1e-13, maxit=50):
    """Newton polish of roots of w(lam) = w(k); lam and k broadcast."""
    wk = eval_omega(sym, k)
    absa = np.abs(np.asarray(sym.coeffs))
    lam = np.array(lam, dtype=complex)
    for _ in range(maxit):
        f = eval_omega(sym, lam) - wk
        scale = _polyval_asc(absa, np.abs(lam)).real + np.abs(wk)
        done = np.abs(f) <= tol * scale
        if np.all(done):
            return lam, True
        d = sym.derivative(lam)
        safe = np.abs(d) > 0
        step = np.where(safe & ~done, f / np.where(safe, d, 1.0), 0.0)
        lam = lam - step
        if np.all(np.abs(step) <= 1e-16 * (1 + np.abs(lam))):
            break
    f = eval_omega(sym, lam) - wk
    scale = _polyval_asc(absa, np.abs(lam)).real + np.abs(wk)
    # coincident roots converge only linearly; accept a looser residual there
    ok = np.abs(f) <= max(tol, 1e-10) * scale
    return lam, bool(np.all(ok))


def other_roots(sym: Symbol, ks) -> np.ndarray:
    """Unordered roots lam_1..lam_{n-1} for an array of k; shape ks.shape + (n-1,)."""
    ks = np.asarray(ks, dtype=complex)
    flat = ks.ravel()
    n = sym.degree
    a = sym.coeffs
    if n == 1:
        return np.zeros(ks.shape + (0,), dtype=complex)
    if n == 2:
        r = (-a[1] / a[2] - flat)[:, None]
    elif n == 3:
        # b2 lam^2 + b1 lam + b0 with b2=a3, b1=a2+k a3, b0=a1+k b1
        b2 = a[3]
        b1 = a[2] + flat * a[3]
        b0 = a[1] + flat * b1
        disc = np.sqrt(b1 * b1 - 4 * b2 * b0)
        sgn = np.where((np.conj(b1) * disc).real >= 0, 1.0, -1.0)
        qq = -0.5 * (b1 + sgn * disc)
        r1 = np.where(qq != 0, qq / b2, -b1 / (2 * b2))
        r2 = np.where(qq != 0, b0 / np.where(qq != 0, qq, 1), -b1 / (2 * b2))
        r = np.stack([r1, r2], axis=1)
    else:
        m = flat.size
        comp = np.zeros((m, n - 1, n - 1), dtype=complex)
        for idx, k in enumerate(flat):
            b = deflated_coeffs(sym, k)
            comp[idx, 0, :] = -b[-2::-1] / b[-1]
            comp[idx, 1:, :-1] = np.eye(n - 2)
        r = np.linalg.eigvals(comp)
    r, ok = _polish(sym, r, flat[:, None])
    if not ok:
        raise RootFindingFailed("Newton polish did not reach tolerance")
    return r.reshape(ks.shape + (n - 1,))


def _order_by_sector(sym: Symbol, k: complex, roots: np.ndarray) -> list:
    n = sym.degree
    ref = k if abs(k) > 1e-12 else 1.0
    targets = np.array([np.exp(2j * np.pi * m / n) for m in range(1, n)])
    u = roots / ref
    u = u / np.maximum(np.abs(u), 1e-300)
    cost = np.abs(u[:, None] - targets[None, :])
    rows, cols = linear_sum_assignment(cost)
    order = [0] * (n - 1)
    for r_, c_ in zip(rows, cols):
        order[c_] = r_
    return [roots[i] for i in order]


def symmetry_roots(sym: Symbol, k: complex, previous: RootFan | None = None) -> RootFan:
    """All n roots of w(lam) = w(k) with lam_0 = k exactly.

    Without ``previous`` the remaining roots are ordered by matching lam/k to
    the nearest e^{2 pi i m/n}; with ``previous`` they follow the earlier fan
    by nearest-neighbour assignment (continuity tracking along a path).
    """
    k = complex(k)
    n = sym.degree
    roots = other_roots(sym, np.array([k]))[0]
    if previous is not None and len(previous) == n:
        prev = np.asarray(previous.lambdas[1:])
        cost = np.abs(roots[:, None] - prev[None, :])
        rows, cols = linear_sum_assignment(cost)
        ordered = [0j] * (n - 1)
        for r_, c_ in zip(rows, cols):
            ordered[c_] = roots[r_]
    else:
        ordered = _order_by_sector(sym, k, roots)
    return RootFan(tuple([k] + [complex(z) for z in ordered]), tuple(range(n)))


def track_roots(sym: Symbol, path) -> list:
    """Root fans along a sequence of k values with branch continuity."""
    fans = []
    prev = None
    for k in path:
        prev = symmetry_roots(sym, k, prev)
        fans.append(prev)
    return fans


@dataclass
class AssumptionReport:
    distinct_roots: bool
    nonneg_real_part: bool
    min_root_separation: float
    min_real_part_sampled: float
    warnings: list

    @property
    def ok(self) -> bool:
        return self.distinct_roots and self.nonneg_real_part


def validate_assumptions(sym: Symbol, K: float | None = None, samples: int = 4001,
                         tol: float = 1e-8) -> AssumptionReport:
    """Advisory checks: distinct roots of w and Re w >= 0 on the real line."""
    warnings = []
    roots = np.roots(list(reversed(sym.coeffs)))
    if len(roots) > 1:
        sep = min(abs(roots[i] - roots[j]) for i in range(len(roots)) for j in range(i))
    else:
        sep = float("inf")
    distinct = sep > tol * max(1.0, float(np.max(np.abs(roots))))
    if not distinct:
        warnings.append(f"roots of w are not distinct (min separation {sep:.3e})")
    bound = 1.0 + max(abs(a / sym.leading) for a in sym.coeffs[:-1])
    if K is None:
        K = max(10.0, 4.0 * bound)
    xs = np.linspace(-K, K, samples)
    rew = np.real(eval_omega(sym, xs))
    scale = np.abs(eval_omega(sym, xs)) + 1.0
    min_re = float(np.min(rew / scale))
    sampled_ok = min_re >= -tol
    # sign of the highest-degree term with nonzero real coefficient
    lead_ok = True
    for m in range(sym.degree, -1, -1):
        re = sym.coeffs[m].real
        if abs(re) > tol * abs(sym.coeffs[m]) and abs(re) > 0:
            lead_ok = (m % 2 == 0) and re > 0
            break
    nonneg = sampled_ok and lead_ok
    if not nonneg:
        warnings.append("Re w(k) takes negative values for real k")
    return AssumptionReport(distinct, nonneg, float(sep), min_re, warnings)


def asymptotic_zero_directions(sym: Symbol) -> list:
    """The 2n angles in [0, 2 pi) where Re(a_n e^{i n theta}) = 0, sorted."""
    n = sym.degree
    phi = np.angle(sym.leading)
    out = []
    for j in range(2 * n):
        th = (np.pi / 2 + j * np.pi - phi) / n
        th = th % (2 * np.pi)
        out.append(float(th))
    out = sorted(out)
    return [0.0 if abs(t - 2 * np.pi) < 1e-14 else t for t in out]
