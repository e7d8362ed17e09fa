"""Solution evaluation: contour representation, eigenfunction series, residues.

The contour representation is

    q(x, t) = (1/2 pi) [ int_R e^{ikx - wt} q0_hat dk
                         - int_{dD+} e^{ikx} c(k)^T F_L(k) dk
                         - int_{dD-} e^{ik(x-L)} c(k)^T F_R(k) dk ]

where F_L, F_R are the full boundary-transform vectors multiplied by
e^{-w t} (solved from the global relation without the q_hat carrier). The
rational endpoint parts of the data transforms are
dropped: they are analytic in D+ / D- away from the zeros of w and their
contribution vanishes once the contours pass round those zeros. The same
reduced integrand is used at x = 0 and x = L, where it converges to the
boundary values; keeping the rational parts there leaves 1/k tails whose
truncated integrals converge to a different (symmetric-cutoff) value.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .contour_geometry import (
    ContourPath,
    add_loops,
    boundary_paths,
    deform_around_zeros,
    indentation_radii,
    omega_zeros,
    singular_points,
)
from .determinant_zeros import (
    is_degenerate,
    locate_zeros,
    winding_number,
    zeros_on_path,
)
from .errors import (
    IllPosedProblem,
    NearSingular,
    NonSimpleZero,
    TailNotConverged,
    WrongProblemClass,
)
from .global_relation import batch_system
from .problem_spec import BoundaryAssignment, Problem
from .symbol_core import quotient_coefficients
from .transforms import fourier_initial, scaled_t_transform
from .wellposedness import admissible

# Gauss-Kronrod 15/7 abscissae and weights (QUADPACK qk15)
XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_U = np.concatenate([-XGK[:-1], XGK[::-1]])
_WK = np.concatenate([WGK[:-1], WGK[::-1]])
_WG7 = np.zeros(15)
for _i, _w in zip((1, 3, 5), WG[:3]):
    _WG7[_i] = _w
    _WG7[14 - _i] = _w
_WG7[7] = WG[3]

RATIO_FLOOR = 1e-6
MAX_SEGMENTS = 400_000
LEVEL_PANEL_BUDGET = 40_000
CHUNK = 30_000  # integrand points per call, bounds memory for many x values


@dataclass
class EvalRequest:
    x: np.ndarray
    t: np.ndarray
    tol: float = 1e-8
    representation: str = "integral"
    rmax: float | None = None

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.t = np.atleast_1d(np.asarray(self.t, dtype=float))
        if self.x.size == 0 or self.t.size == 0:
            raise ValueError("x and t grids must be nonempty")
        if not 1e-12 <= self.tol <= 1e-2:
            raise ValueError("tol must lie in [1e-12, 1e-2]")
        if np.any(self.t <= 0):
            raise ValueError("t values must be positive")
        if self.representation not in ("integral", "series", "both"):
            raise ValueError("representation must be integral, series or both")


@dataclass
class SolutionField:
    x: np.ndarray
    t: np.ndarray
    q: np.ndarray  # (len x, len t)
    err: np.ndarray
    meta: dict = field(default_factory=dict)

    def at(self, x: float, t: float) -> complex:
        i = int(np.argmin(np.abs(self.x - x)))
        j = int(np.argmin(np.abs(self.t - t)))
        return complex(self.q[i, j])


# ---------------------------------------------------------------------------
# quadrature


def gk15(f, a, b):
    """Single Gauss-Kronrod panel on [a, b] (complex endpoints allowed); returns (K, G)."""
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    v = f(c + h * _U)
    return h * np.tensordot(_WK, v, axes=(0, 0)), h * np.tensordot(_WG7, v, axes=(0, 0))


def adaptive_gk(f, a, b, tol, max_segments=MAX_SEGMENTS):
    """Vector-valued adaptive Gauss-Kronrod over straight segments a[i] -> b[i].

    ``f`` maps an array of K points to a (K, m) array. Each segment's share
    of ``tol`` is proportional to its length. Returns (integral (m,), error
    estimate, number of panels).
    """
    a = np.atleast_1d(np.asarray(a, dtype=complex))
    b = np.atleast_1d(np.asarray(b, dtype=complex))
    total_len = float(np.sum(np.abs(b - a)))
    if total_len == 0:
        return np.zeros(np.shape(f(a[:1]))[-1], dtype=complex), 0.0, 0
    acc = None
    err = 0.0
    panels = 0
    while a.size:
        c = 0.5 * (a + b)
        h = 0.5 * (b - a)
        pts = (c[:, None] + h[:, None] * _U[None, :]).ravel()
        v = np.concatenate([f(pts[i:i + CHUNK]) for i in range(0, pts.size, CHUNK)])
        v = v.reshape(a.size, 15, -1)
        K = h[:, None] * np.einsum("q,sqm->sm", _WK, v)
        G = h[:, None] * np.einsum("q,sqm->sm", _WG7, v)
        e = np.max(np.abs(K - G), axis=1)
        share = tol * np.abs(b - a) / total_len
        done = (e <= share) | (np.abs(h) < 1e-13 * (1 + np.abs(c)))
        panels += a.size
        if acc is None:
            acc = np.zeros(v.shape[2], dtype=complex)
        acc += K[done].sum(axis=0)
        err += float(e[done].sum())
        a, b = a[~done], b[~done]
        c = c[~done]
        if panels + 2 * a.size > max_segments:
            acc += K[~done].sum(axis=0)
            err += float(e[~done].sum())
            break
        a, b = np.concatenate([a, c]), np.concatenate([c, b])
    return acc, err, panels


def taper(k, R):
    """Smooth cutoff: 1 for |k| <= R/2, 0 for |k| >= R."""
    u = (np.abs(k) - 0.5 * R) / (0.5 * R)
    out = np.ones(np.shape(k))
    mid = (u > 0) & (u < 1)
    um = u[mid]
    out[mid] = 0.5 * erfc(2 * (um - 0.5) / np.sqrt(um * (1 - um)))
    out[u >= 1] = 0.0
    return out


def _split(a, b, h):
    """Split straight segments so that each has length <= h."""
    A, B = [], []
    for p, q in zip(a, b):
        m = max(1, int(np.ceil(abs(q - p) / h)))
        s = np.arange(m + 1) / m
        z = p + (q - p) * s
        A.append(z[:-1])
        B.append(z[1:])
    return np.concatenate(A), np.concatenate(B)


# ---------------------------------------------------------------------------
# geometry for a given truncation radius


@dataclass
class Geometry:
    R: float
    plus: ContourPath
    minus: ContourPath
    deformations: list
    loops: list


def data_scale(prob: Problem) -> float:
    xs = np.linspace(0.0, prob.L, 257)
    ts = np.linspace(0.0, prob.T_max, 257)
    m = float(np.max(np.abs(prob.q0(xs))))
    for pp in prob.data.values():
        m = max(m, float(np.max(np.abs(pp(ts)))))
    return m if m > 0 else 1.0


class _Context:
    """Per-problem caches shared across times and truncation radii."""

    def __init__(self, prob: Problem, t_ref: float = 0.0):
        self.prob = prob
        self.t_ref = t_ref
        self.L = prob.L
        self.sym = prob.symbol
        self.qc = quotient_coefficients(prob.symbol)
        self._inside = None
        self._geo = {}

    def inside_zeros(self):
        """Zeros strictly inside D (need full loops); searched in |k| <= 40/L."""
        if self._inside is None:
            zs = locate_zeros(self.prob, 40.0 / self.L)
            self._inside = [z for z in zs if z.region.startswith("inside") and not z.degenerate]
        return self._inside

    def geometry(self, R: float) -> Geometry:
        if R in self._geo:
            return self._geo[R]
        L = self.L
        plus, minus = boundary_paths(self.sym, R, L)
        junctions = singular_points(self.sym)
        poles = [z for z in omega_zeros(self.sym) if abs(z) < R]
        margin = np.pi / (8 * L)
        special = list(junctions) + [z for z in poles if all(abs(z - j) > 1e-9 for j in junctions)]
        on_path = {}
        for name, path in (("+", plus), ("-", minus)):
            recs = zeros_on_path(path, self.prob, margin, extra_points=special)
            on_path[name] = [r.k for r in recs]
        loops = self.inside_zeros()
        allpts = on_path["+"] + on_path["-"] + [z.k for z in loops]
        defs = []
        paths = {}
        for name, path in (("+", plus), ("-", minus)):
            pts = on_path[name]
            radii = indentation_radii(pts, L, extra=[p for p in allpts if all(abs(p - q) > 1e-12 for q in pts)],
                                      sym=self.sym, t_ref=self.t_ref)
            p2 = deform_around_zeros(path, pts, radius=radii, junctions=junctions)
            lz = [z.k for z in loops if (z.k.imag > 0) == (name == "+")]
            if lz:
                lr = indentation_radii(lz, L, extra=[p for p in allpts if all(abs(p - q) > 1e-12 for q in lz)],
                                       sym=self.sym, t_ref=self.t_ref)
                p2 = add_loops(p2, lz, lr)
            paths[name] = p2
            defs.extend(p2.deformations)
        g = Geometry(R, paths["+"], paths["-"], defs, [z.k for z in loops])
        self._geo[R] = g
        return g


def _path_segments(path: ContourPath):
    a, b = path.segments()
    keep = np.abs(b - a) > 0
    return a[keep], b[keep]


def _side_integrand(ctx: _Context, side: str, x: np.ndarray, t: float, R: float, kind: str):
    prob = ctx.prob
    L = ctx.L

    def f(ks):
        b = batch_system(prob, ks, t, kind)
        r = b.ratio()
        if np.any(r < RATIO_FLOOR):
            i = int(np.argmin(r))
            raise NearSingular(complex(ks[i]), float(r[i]))
        u = b.solve()
        nl = len(b.left.unknowns)
        if side == "+":
            F = b.left.E @ u[:, :nl].T + b.dL  # (n, K)
            phase = np.exp(1j * np.outer(ks, x))
        else:
            F = b.right.E @ u[:, nl:].T + b.dR
            phase = np.exp(1j * np.outer(ks, x - L))
        g = np.einsum("jk,jk->k", b.ck, F) * taper(ks, R)
        return phase * g[:, None]

    return f


def _real_integrand(ctx: _Context, x: np.ndarray, t: float, R: float):
    prob = ctx.prob

    def f(ks):
        w = prob.symbol(ks)
        g = fourier_initial(prob.q0, ks) * np.exp(-w * t) * taper(ks, R)
        return np.exp(1j * np.outer(ks, x)) * g[:, None]

    return f


def _integral_at(ctx: _Context, x: np.ndarray, t: float, R: float, tol: float, kind: str):
    g = ctx.geometry(R)
    h0 = min(1.0 / ctx.L, 0.25 * R)
    total = np.zeros(x.size, dtype=complex)
    err = 0.0
    panels = 0
    parts = [(_real_integrand(ctx, x, t, R), np.array([-R]), np.array([R]), 1.0)]
    for side, path in (("+", g.plus), ("-", g.minus)):
        a, b = _path_segments(path)
        if a.size:
            parts.append((_side_integrand(ctx, side, x, t, R, kind), a, b, -1.0))
    for f, a, b, sign in parts:
        a, b = _split(a, b, h0)
        val, e, p = adaptive_gk(f, a, b, tol * 2 * np.pi / 3)
        total += sign * val
        err += e
        panels += p
    return total / (2 * np.pi), err / (2 * np.pi), panels


def initial_radius(prob: Problem, t: float) -> float:
    n = prob.n
    L = prob.L
    an = abs(prob.symbol.leading)
    kstar = (L / (n * an * t)) ** (1.0 / (n - 1))
    return max(60.0 / L, min(3.0 * kstar, 2000.0 / L))


def evaluate_integral(prob: Problem, req: EvalRequest) -> SolutionField:
    """Contour representation on the grid req.x x req.t with R-doubling for the tails."""
    rep = admissible(prob)
    if not rep.admissible:
        raise IllPosedProblem("boundary-condition split is not admissible")
    ctx = _Context(prob, float(np.max(req.t)))
    L = prob.L
    scale = data_scale(prob)
    tol = req.tol * scale
    x = req.x
    q = np.zeros((x.size, req.t.size), dtype=complex)
    err = np.zeros(q.shape)
    meta = {"R_max": [], "panels": 0, "deformations": None, "levels": [], "tail_limited": []}
    rcap = req.rmax if req.rmax is not None else 16000.0 / L
    t0 = time.time()
    for j, t in enumerate(req.t):
        R = min(initial_radius(prob, t), rcap)
        prev, _, p = _integral_at(ctx, x, t, R, tol, "reduced")
        meta["panels"] += p
        levels = 1
        last = None
        while True:
            if 2 * R > rcap * (1 + 1e-12):
                raise TailNotConverged(f"R would exceed cap {rcap:g} at t={t:g}")
            R *= 2
            cur, e_cur, p = _integral_at(ctx, x, t, R, tol, "reduced")
            meta["panels"] += p
            levels += 1
            diff = np.abs(cur - prev)
            if np.max(diff) <= tol:
                q[:, j] = cur
                err[:, j] = np.maximum(diff, e_cur)
                break
            # algebraic tails (data compatible to low order only): a doubling
            # that does not halve the change, or a level past the panel budget,
            # cannot reach tol at any useful cost
            stalled = last is not None and np.max(diff) > 0.5 * np.max(last)
            if stalled or p > LEVEL_PANEL_BUDGET:
                q[:, j] = cur
                err[:, j] = np.maximum(np.maximum(diff, last if last is not None else diff), e_cur)
                meta["tail_limited"].append((float(t), "stalled" if stalled else "panel budget"))
                break
            last = diff
            prev = cur
        meta["R_max"].append(R)
        meta["levels"].append(levels)
    meta["R_max"] = float(max(meta["R_max"]))
    g = ctx._geo[max(ctx._geo)]
    meta["deformations"] = [(complex(z), r) for z, r in g.deformations]
    meta["loops"] = [complex(z) for z in g.loops]
    meta["seconds"] = time.time() - t0
    return SolutionField(x, req.t, q, err, meta)


# ---------------------------------------------------------------------------
# series for second-order Dirichlet problems


def _quadratic_dirichlet(prob: Problem):
    if prob.n != 2 or prob.is_robin:
        raise WrongProblemClass("series representations need n = 2 with Dirichlet data")
    a = prob.assignment
    if not isinstance(a, BoundaryAssignment) or set(a.left_orders) != {0} or set(a.right_orders) != {0}:
        raise WrongProblemClass("series representations need q(0, t) and q(L, t) prescribed")
    a0, a1, a2 = prob.symbol.coeffs
    return a1 / a2


def series_zero(prob: Problem, m: int) -> complex:
    """k_m = m pi / L - a1 / (2 a2) for quadratic symbols."""
    shift = _quadratic_dirichlet(prob)
    return m * np.pi / prob.L - shift / 2


def _N(prob: Problem, k, t: float):
    """e^{-w t} N(k, t) with N = q0_hat - c0 (f0~ - e^{-ikL} g0~)."""
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    w = prob.symbol(k)
    c0 = quotient_coefficients(prob.symbol).eval(k)[0]
    f0 = scaled_t_transform(prob.boundary("left", 0), w, t)
    g0 = scaled_t_transform(prob.boundary("right", 0), w, t)
    return fourier_initial(prob.q0, k) * np.exp(-w * t) - c0 * (f0 - np.exp(-1j * k * prob.L) * g0)


def series_term(prob: Problem, m: int, x, t: float):
    """(1/2L) (e^{i k_m x} - e^{i l_m x}) e^{-w t} [N(k_m) - N(l_m)], l_m the other root."""
    shift = _quadratic_dirichlet(prob)
    k = series_zero(prob, m)
    lam = -shift - k
    x = np.asarray(x, dtype=float)
    coef = (_N(prob, k, t) - _N(prob, lam, t))[0] / (2 * prob.L)
    return coef * (np.exp(1j * k * x) - np.exp(1j * lam * x))


def _tail_bound(env: list) -> float:
    """Remaining-sum estimate from block maxima env[b] of |term| over m in (10 b, 10 (b + 1)].

    A decay rate p is fitted between the current block and the one at half
    the index; the tail of C m^{-p} beyond m is about m a_m / (p - 1).
    """
    b = len(env) - 1
    a = env[-1]
    if a == 0.0:
        return 0.0 if env[b // 2] == 0.0 else np.inf
    ref = env[b // 2]
    p = np.log(ref / a) / np.log((b + 1) / (b // 2 + 1)) if ref > 0 else np.inf
    m = 10 * (b + 1)
    if p <= 1.2:
        return np.inf
    return a * m / (p - 1) if np.isfinite(p) else a


def _series(prob: Problem, req: EvalRequest, max_terms: int):
    scale = data_scale(prob)
    x = req.x
    q = np.zeros((x.size, req.t.size), dtype=complex)
    err = np.zeros(q.shape)
    nterms = []
    for j, t in enumerate(req.t):
        env = []
        block = 0.0
        for m in range(1, max_terms + 1):
            term = series_term(prob, m, x, t)
            q[:, j] += term
            block = max(block, float(np.max(np.abs(term))))
            if m % 10 == 0:
                env.append(block)
                block = 0.0
                if m >= 20:
                    tail = _tail_bound(env)
                    if tail < req.tol * scale:
                        break
        err[:, j] = tail
        nterms.append(m)
    return SolutionField(x, req.t, q, err, {"terms": nterms})


def evaluate_series_sine(prob: Problem, req: EvalRequest, max_terms: int = 20000) -> SolutionField:
    """Sine series (i/L) sum_{m>=1} sin(k_m x) e^{-w(k_m) t} [N(k_m) - N(-k_m)], k_m = m pi / L."""
    shift = _quadratic_dirichlet(prob)
    if abs(shift) > 1e-14:
        raise WrongProblemClass("sine series needs a symbol even in k (l_1 = -k)")
    return _series(prob, req, max_terms)


def evaluate_series_complex(prob: Problem, req: EvalRequest, max_terms: int = 20000) -> SolutionField:
    """Biorthogonal series over k_m = m pi / L - a1 / (2 a2), m >= 1."""
    _quadratic_dirichlet(prob)
    return _series(prob, req, max_terms)


# ---------------------------------------------------------------------------
# residues


@dataclass
class ResidueTerm:
    k: complex
    side: str
    term: object  # callable (x, t) -> array

    def coefficient(self, t: float) -> complex:
        """Residue term divided by e^{ikx}, i.e. its value at x = 0."""
        return complex(self.term(np.array([0.0]), t)[0])


def _side_value(prob: Problem, side: str, ks, x, t):
    b = batch_system(prob, ks, t, "scaled")
    u = b.solve()
    nl = len(b.left.unknowns)
    if side == "+":
        F = b.left.E @ u[:, :nl].T + b.dL
        ph = np.exp(1j * np.outer(ks, x))
    else:
        F = b.right.E @ u[:, nl:].T + b.dR
        ph = np.exp(1j * np.outer(ks, np.asarray(x) - prob.L))
    return ph * np.einsum("jk,jk->k", b.ck, F)[:, None]


def residue_term(prob: Problem, k0: complex, side: str, rho: float | None = None, npts: int = 128):
    """Contribution of a simple zero k0: -(1/2 pi) times the clockwise loop integral, i.e. i Res.

    Returns a callable (x, t) -> values. The loop is the clockwise circle of
    radius ``rho`` around k0, matching the orientation of a contour that
    excludes the zero; the conversion flips it to a residue.
    """
    L = prob.L
    rho = rho or min(0.25, np.pi / (4 * L))
    if winding_number(prob, k0, rho) != 1:
        raise NonSimpleZero(f"zero at {k0} is not simple")
    th = 2 * np.pi * np.arange(npts) / npts
    ks = k0 + rho * np.exp(1j * th)

    def term(x, t):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        v = _side_value(prob, side, ks, x, t)
        res = np.mean(v * (rho * np.exp(1j * th))[:, None], axis=0)
        return 1j * res

    return term


def residue_convert(prob: Problem, mmax: int = 20, R: float | None = None):
    """Generator of residue terms at the zeros that turn the contour integral into a series.

    Quadratic Dirichlet problems use the zeros k_m, |m| <= mmax (zeros with
    Im k > 0, or on the positive real axis, belong to the dD+ integrand,
    the rest to dD-); for other problems the non-removable zeros found on
    the contours are used, which for admissible higher-order examples is
    the empty set.
    """
    L = prob.L
    if prob.n == 2 and not prob.is_robin:
        try:
            _quadratic_dirichlet(prob)
            zs = [series_zero(prob, m) for m in range(-mmax, mmax + 1)]
        except WrongProblemClass:
            zs = []
    else:
        Rs = R or 40.0 / L
        plus, minus = boundary_paths(prob.symbol, Rs, L)
        zs = []
        for path in (plus, minus):
            zs += [z.k for z in zeros_on_path(path, prob, np.pi / (8 * L)) if not z.degenerate]
    for k in zs:
        if is_degenerate(prob, k):
            continue
        side = "+" if (k.imag > 1e-12 or (abs(k.imag) <= 1e-12 and k.real > 0)) else "-"
        yield ResidueTerm(complex(k), side, residue_term(prob, k, side))
