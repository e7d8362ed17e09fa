"""Zeros of the global-relation determinant: location, classification, path scan.

The determinant depends on how the roots lam_1..lam_{n-1} are ordered; it
changes sign under a swap. Dividing by V = prod_{1<=i<j}(lam_i - lam_j)
gives H(k) = Delta(k) / V(k), symmetric in the roots and therefore a
single-valued entire function of k. Zeros of H are the zeros of Delta away
from branch points of the root map; at branch points two rows coincide and
Delta vanishes only because of the labelling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .contour_geometry import ContourPath, membership
from .errors import BoxBoundaryZero
from .global_relation import coefficient_matrix
from .problem_spec import Problem
from .symbol_core import asymptotic_zero_directions, eval_omega, other_roots
from .wellposedness import d_sectors

MAX_NUDGES = 5
DEDUP = 1e-8


@dataclass
class ZeroRecord:
    k: complex
    multiplicity: int = 1
    in_D: bool = False
    region: str = ""
    nearest_ray: float = float("nan")
    ray_residual: float = float("nan")
    residual: float = float("nan")
    degenerate: bool = False
    heuristic: bool = True

    def to_row(self) -> list:
        return [self.k.real, self.k.imag, self.in_D, self.nearest_ray, self.ray_residual]


def _vandermonde(others: np.ndarray) -> np.ndarray:
    m = others.shape[-1]
    V = np.ones(others.shape[:-1], dtype=complex)
    for i in range(m):
        for j in range(i + 1, m):
            V = V * (others[..., i] - others[..., j])
    return V


def reduced_determinant(prob: Problem, ks, with_scale: bool = False):
    """H(k) = Delta(k) / V(k) on an array of k (raw rows, no rescaling).

    With ``with_scale`` also returns prod(row norms) / |V|, the Hadamard
    bound used to judge smallness of H.
    """
    ks = np.atleast_1d(np.asarray(ks, dtype=complex))
    others = other_roots(prob.symbol, ks)
    lams = np.concatenate([ks[:, None], others], axis=1)
    M = coefficient_matrix(prob, lams)
    V = _vandermonde(others)
    H = np.linalg.det(M) / V
    if not with_scale:
        return H
    scale = np.prod(np.linalg.norm(M, axis=-1), axis=-1) / np.abs(V)
    return H, scale


class LocalDeterminant:
    """Analytic determinant near k0 with bounded rows.

    Rows whose root has Im > 0 at k0 are multiplied by e^{i lam L} and the
    roots are followed by nearest-neighbour matching, so the function stays
    analytic in a neighbourhood of k0 (unlike row scaling by
    e^{-max(0, Im lam) L}, which is not).
    """

    def __init__(self, prob: Problem, k0: complex):
        self.prob = prob
        self.prev = other_roots(prob.symbol, np.array([k0]))[0]
        self.flags = np.concatenate([[complex(k0).imag > 0], self.prev.imag > 0])

    def _roots(self, k):
        r = other_roots(self.prob.symbol, np.array([k]))[0]
        if r.size > 1:
            cost = np.abs(r[:, None] - self.prev[None, :])
            rows, cols = linear_sum_assignment(cost)
            out = np.empty_like(r)
            out[cols] = r[rows]
            r = out
        return r

    def evaluate(self, k, update: bool = False):
        r = self._roots(k)
        lams = np.concatenate([[k], r])
        log_s = np.where(self.flags, 1j * lams * self.prob.L, 0.0)
        M = coefficient_matrix(self.prob, lams[None, :], log_s[None, :])[0]
        V = _vandermonde(r[None, :])[0]
        if update:
            self.prev = r
        scale = float(np.prod(np.linalg.norm(M, axis=-1)) / abs(V))
        return complex(np.linalg.det(M) / V), scale

    def __call__(self, k):
        return self.evaluate(k)[0]


def _newton(f, k0, tol=1e-15, maxit=60, step_cap=None):
    """Newton with central-difference derivative; f returns (value, scale)."""
    k = complex(k0)
    v, sc = f(k, True)
    for _ in range(maxit):
        h = 1e-6 * (1.0 + abs(k))
        d = (f(k + h, False)[0] - f(k - h, False)[0]) / (2 * h)
        if d == 0 or not np.isfinite(d):
            break
        dk = v / d
        if step_cap is not None and abs(dk) > step_cap:
            dk *= step_cap / abs(dk)
        k = k - dk
        v, sc = f(k, True)
        if abs(dk) <= tol * (1.0 + abs(k)) or v == 0:
            break
    return k, v, sc


def polish(prob: Problem, k0: complex, step_cap=None):
    """Newton-polish a zero of the determinant from k0; returns (k, relative residual)."""
    loc = LocalDeterminant(prob, k0)
    k, v, sc = _newton(lambda z, upd: loc.evaluate(z, upd), k0, step_cap=step_cap)
    return k, abs(v) / sc if sc > 0 else abs(v)


# ---------------------------------------------------------------------------
# argument principle on boxes


class _Counter:
    def __init__(self, f):
        self.f = f

    def edge(self, z0, z1):
        """Total phase change of f along [z0, z1], or None if the edge passes near a zero."""
        N = 32
        while N <= 2 ** 15:
            s = np.linspace(0.0, 1.0, N + 1)
            v, sc = self.f(z0 + (z1 - z0) * s)
            if not np.all(np.isfinite(v)) or np.any(np.abs(v) <= 1e-11 * sc):
                return None
            d = np.angle(v[1:] / v[:-1])
            if np.max(np.abs(d)) < 0.4:
                return float(d.sum())
            N *= 2
        return None

    def box(self, x0, x1, y0, y1):
        c = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
        total = 0.0
        for a, b in zip(c, c[1:] + c[:1]):
            e = self.edge(a, b)
            if e is None:
                return None
            total += e
        w = total / (2 * np.pi)
        if abs(w - round(w)) > 0.1:
            return None
        return int(round(w))


def _count_nudged(counter, box, size):
    x0, x1, y0, y1 = box
    for attempt in range(MAX_NUDGES + 1):
        e = 1e-3 * size * attempt * (1 if attempt % 2 else -1)
        n = counter.box(x0 + e, x1 + e * 0.7, y0 - e * 0.3, y1 + e * 1.1)
        if n is not None:
            return n, (x0 + e, x1 + e * 0.7, y0 - e * 0.3, y1 + e * 1.1)
    raise BoxBoundaryZero(f"box {box} still passes through a zero after {MAX_NUDGES} nudges")


def winding_number(prob: Problem, z: complex, r: float) -> int:
    """Number of determinant zeros inside the circle |k - z| = r."""
    m = 256
    while m <= 2 ** 14:
        th = np.linspace(0.0, 2 * np.pi, m + 1)
        v = reduced_determinant(prob, z + r * np.exp(1j * th))
        d = np.angle(v[1:] / v[:-1])
        if np.max(np.abs(d)) < 0.4:
            return int(round(d.sum() / (2 * np.pi)))
        m *= 2
    raise BoxBoundaryZero(f"circle around {z} passes too close to a zero")


def _subdivide(prob, counter, box, n, out, min_size, depth=0):
    x0, x1, y0, y1 = box
    size = max(x1 - x0, y1 - y0)
    c = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
    if n == 0:
        return
    if n == 1:
        k, res = polish(prob, c, step_cap=size)
        if x0 - 1e-9 * size <= k.real <= x1 + 1e-9 * size and y0 - 1e-9 * size <= k.imag <= y1 + 1e-9 * size \
                and res < 1e-8:
            out.append((k, 1, res))
            return
    if size < min_size or depth > 60:
        k, res = polish(prob, c, step_cap=size)
        out.append((k if abs(k - c) < size else c, n, res))
        return
    xm = 0.5 * (x0 + x1)
    ym = 0.5 * (y0 + y1)
    for attempt in range(MAX_NUDGES + 1):
        e = 1e-3 * size * attempt * (1 if attempt % 2 else -1)
        xs, ys = xm + e, ym - 0.6 * e
        kids = [(x0, xs, y0, ys), (xs, x1, y0, ys), (x0, xs, ys, y1), (xs, x1, ys, y1)]
        counts = [counter.box(*b) for b in kids]
        if all(v is not None for v in counts) and sum(counts) == n:
            break
    else:
        raise BoxBoundaryZero(f"cannot split box {box} without cutting a zero")
    for b, m in zip(kids, counts):
        _subdivide(prob, counter, b, m, out, min_size, depth + 1)


def locate_zeros(prob: Problem, R: float, classify_result: bool = True, disk: bool = True) -> list:
    """All zeros of the determinant in the square |Re k|, |Im k| <= R (only |k| <= R if ``disk``)."""
    counter = _Counter(lambda z: reduced_determinant(prob, z, with_scale=True))
    size = 2 * R
    n, box = _count_nudged(counter, (-R, R, -R, R), size)
    raw = []
    _subdivide(prob, counter, box, n, raw, 1e-7 * (1 + R))
    zs = []
    for k, m, res in sorted(raw, key=lambda r: (round(r[0].real, 9), r[0].imag)):
        if disk and abs(k) > R * (1 + 1e-12):
            continue
        if any(abs(k - z.k) < DEDUP * (1 + abs(k)) for z in zs):
            continue
        zs.append(ZeroRecord(complex(k), int(m), residual=float(res)))
    return classify(zs, prob) if classify_result else zs


def count_in_box(prob: Problem, R: float) -> int:
    counter = _Counter(lambda z: reduced_determinant(prob, z, with_scale=True))
    return _count_nudged(counter, (-R, R, -R, R), 2 * R)[0]


# ---------------------------------------------------------------------------
# classification


def _is_bcc_stokes(prob: Problem) -> bool:
    a = np.asarray(prob.symbol.coeffs)
    if prob.n != 3 or prob.is_robin:
        return False
    ok_sym = abs(a[0]) < 1e-14 and abs(a[2]) < 1e-14 and abs(a[1] + a[3]) < 1e-14 * abs(a[3]) \
        and abs(a[3].real) < 1e-14 * abs(a[3])
    asg = prob.assignment
    return ok_sym and set(asg.left_orders) == {0} and set(asg.right_orders) == {0, 1}


def predicted_rays(prob: Problem):
    """(angles, heuristic) for the asymptotic zero lines."""
    if prob.n == 2:
        return [0.0, np.pi], False
    out = []
    inside = d_sectors(prob.symbol)
    th = asymptotic_zero_directions(prob.symbol)
    for i in range(len(th)):
        lo = th[i]
        hi = th[(i + 1) % len(th)] + (2 * np.pi if i == len(th) - 1 else 0.0)
        if not any(abs(lo - a) < 1e-12 and abs(hi - b) < 1e-12 for a, b in inside):
            out.append(float((0.5 * (lo + hi)) % (2 * np.pi)))
    return sorted(out), not _is_bcc_stokes(prob)


def _ang_dist(a, b):
    d = (a - b) % (2 * np.pi)
    return min(d, 2 * np.pi - d)


def is_degenerate(prob: Problem, k: complex) -> bool:
    """Critical points of w: a root lam_j collides with k and two rows coincide."""
    sym = prob.symbol
    absa = np.abs(np.asarray(sym.coeffs))
    scale = sum(m * absa[m] * max(abs(k), 1.0) ** (m - 1) for m in range(1, sym.degree + 1))
    return abs(sym.derivative(k)) <= 1e-7 * scale


def classify(zeros, prob: Problem) -> list:
    rays, heuristic = predicted_rays(prob)
    for z in zeros:
        z.region = membership(prob.symbol, z.k)
        z.in_D = z.region != "outside"
        z.degenerate = is_degenerate(prob, z.k)
        z.heuristic = heuristic
        if abs(z.k) > 0:
            arg = np.angle(z.k) % (2 * np.pi)
            best = min(rays, key=lambda r: _ang_dist(arg, r))
            z.nearest_ray = float(best)
            z.ray_residual = float(_ang_dist(arg, best))
        else:
            z.nearest_ray = float(rays[0])
            z.ray_residual = 0.0
    return zeros


# ---------------------------------------------------------------------------
# zeros near a contour


def _densify(nodes: np.ndarray, h: float) -> np.ndarray:
    out = [nodes[:1]]
    for a, b in zip(nodes[:-1], nodes[1:]):
        m = max(1, int(np.ceil(abs(b - a) / h)))
        out.append(a + (b - a) * np.arange(1, m + 1) / m)
    return np.concatenate(out)


def scan_ratio(prob: Problem, ks: np.ndarray) -> np.ndarray:
    """Normalized |det| of the row-scaled system (cheap smallness indicator)."""
    from .global_relation import conditioning

    others = other_roots(prob.symbol, ks)
    lams = np.concatenate([ks[:, None], others], axis=1)
    log_s = -np.maximum(0.0, lams.imag) * prob.L
    return conditioning(coefficient_matrix(prob, lams, log_s))


def zeros_on_path(path: ContourPath, prob: Problem, margin: float, extra_points=()) -> list:
    """Determinant zeros within ``margin`` of the path, ordered by arc length.

    Candidates are local minima of the normalized determinant along a dense
    sampling of each arc, plus ``extra_points`` (e.g. critical points of w);
    each is Newton-polished and kept when it lies within ``margin``.
    """
    L = prob.L
    h = min(0.02 / L, 0.25 * margin)
    found = []
    pos = 0.0
    for arc in path.arcs:
        pts = _densify(arc.nodes, h)
        if pts.size < 3:
            continue
        s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(pts)))]) + pos
        pos = s[-1]
        r = np.empty(pts.size)
        for i in range(0, pts.size, 4096):
            r[i:i + 4096] = scan_ratio(prob, pts[i:i + 4096])
        cand = [i for i in range(pts.size)
                if r[i] < 0.2 and (i == 0 or r[i] <= r[i - 1]) and (i == pts.size - 1 or r[i] <= r[i + 1])]
        for i in cand:
            k0 = pts[i]
            if is_degenerate(prob, k0):
                found.append((s[i], complex(k0), 0.0))
                continue
            try:
                k, res = polish(prob, k0, step_cap=margin)
            except Exception:
                continue
            if res < 1e-8 and path.distance_to(k) <= margin:
                found.append((s[i], complex(k), res))
    for p in extra_points:
        if path.distance_to(p) <= margin:
            found.append((0.0, complex(p), 0.0))
    out = []
    for s_, k, res in sorted(found, key=lambda t: t[0]):
        if any(abs(k - z.k) < 1e-7 * (1 + abs(k)) for z in out):
            continue
        out.append(ZeroRecord(k, 1, residual=res))
    return classify(out, prob)


def removable_ratio(prob: Problem, k0: complex, radii=(1e-2, 1e-3, 1e-4)) -> list:
    """max |Cramer numerator / Delta| on small circles about k0 (bounded if removable)."""
    from .global_relation import batch_system

    out = []
    for r in radii:
        ks = k0 + r * np.exp(2j * np.pi * (np.arange(16) + 0.5) / 16)
        b = batch_system(prob, ks, 0.0, "raw")
        u = b.solve()
        out.append(float(np.max(np.abs(u))))
    return out


def omega_roots_in(prob: Problem, R: float) -> list:
    r = np.roots(list(reversed(prob.symbol.coeffs)))
    return [complex(z) for z in r if abs(z) <= R and abs(eval_omega(prob.symbol, z)) < 1e-9 * (1 + abs(z))]
