"""The region D = {Re w(k) <= 0}, its oriented boundary, and indentations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import TraceStalled, ZeroTooCloseToCorner
from .symbol_core import Symbol, eval_omega

BAND = 1e-12
INSIDE_PLUS = "inside D+"
INSIDE_MINUS = "inside D-"
OUTSIDE = "outside"
BOUNDARY = "boundary"


def membership(sym: Symbol, k) -> str:
    k = complex(k)
    w = eval_omega(sym, k)
    if abs(w.real) <= BAND * (1.0 + abs(w)):
        return BOUNDARY
    if w.real > 0:
        return OUTSIDE
    return INSIDE_PLUS if k.imag >= 0 else INSIDE_MINUS


def in_D(sym: Symbol, k) -> bool:
    return membership(sym, k) != OUTSIDE


@dataclass
class Arc:
    nodes: np.ndarray
    kind: str = "boundary"  # boundary | indent | loop

    @property
    def tangents(self) -> np.ndarray:
        d = np.gradient(self.nodes) if len(self.nodes) > 2 else np.diff(self.nodes)[[0, 0]]
        return d / np.maximum(np.abs(d), 1e-300)

    @property
    def length(self) -> float:
        return float(np.sum(np.abs(np.diff(self.nodes))))


@dataclass
class ContourPath:
    arcs: list
    side: str  # "+" or "-"
    R_max: float
    orientation: str = "D on the left"
    deformations: list = field(default_factory=list)

    @property
    def length(self) -> float:
        return sum(a.length for a in self.arcs)

    def nodes(self) -> np.ndarray:
        return np.concatenate([a.nodes for a in self.arcs]) if self.arcs else np.zeros(0, complex)

    def segments(self):
        """(start, end) arrays of all straight pieces."""
        a = [arc.nodes[:-1] for arc in self.arcs]
        b = [arc.nodes[1:] for arc in self.arcs]
        if not a:
            return np.zeros(0, complex), np.zeros(0, complex)
        return np.concatenate(a), np.concatenate(b)

    def distance_to(self, z: complex) -> float:
        a, b = self.segments()
        return float(np.min(_seg_dist(a, b, z))) if a.size else np.inf


def _seg_dist(a, b, z):
    d = b - a
    L2 = np.abs(d) ** 2
    s = np.where(L2 > 0, ((z - a) * np.conj(d)).real / np.where(L2 > 0, L2, 1.0), 0.0)
    s = np.clip(s, 0.0, 1.0)
    return np.abs(a + s * d - z)


# ---------------------------------------------------------------------------
# level-set tracing


class _Level:
    def __init__(self, sym: Symbol):
        self.sym = sym
        self.absa = np.abs(np.asarray(sym.coeffs))

    def F(self, k):
        return eval_omega(self.sym, k).real

    def grad(self, k):
        # gradient of Re w as a complex number: conj(w'(k))
        return np.conj(self.sym.derivative(k))

    def scale(self, k):
        return float(np.polyval(self.absa[::-1], abs(k)))

    def correct(self, k, tol=1e-13, maxit=30):
        for it in range(maxit):
            f = self.F(k)
            if abs(f) <= tol * (1.0 + self.scale(k)):
                return k, it
            g = self.grad(k)
            gg = abs(g) ** 2
            if gg == 0:
                return None, it
            k = k - f * g / gg
        f = self.F(k)
        if abs(f) <= 1e-9 * (1.0 + self.scale(k)):
            return k, maxit
        return None, maxit


def singular_points(sym: Symbol) -> list:
    """Critical points of w lying on Re w = 0 (crossings of the level set)."""
    dc = [m * sym.coeffs[m] for m in range(1, sym.degree + 1)]
    if len(dc) < 2:
        return []
    roots = np.roots(dc[::-1])
    lev = _Level(sym)
    out = []
    for r in roots:
        r = complex(r)
        if abs(lev.F(r)) <= 1e-9 * (1.0 + lev.scale(r)):
            if abs(r.imag) < 1e-14 * (1 + abs(r)):
                r = complex(r.real, 0.0)
            if all(abs(r - s) > 1e-9 for s in out):
                out.append(r)
    return out


def branch_directions(sym: Symbol, s: complex) -> list:
    """Angles of the level-set branches leaving a critical point."""
    n = sym.degree
    for p in range(2, n + 1):
        dp = sum(sym.coeffs[m] * _falling(m, p) * s ** (m - p) for m in range(p, n + 1))
        if abs(dp) > 1e-12 * max(1.0, max(abs(a) for a in sym.coeffs)):
            phi = np.angle(dp)
            return sorted(((np.pi / 2 + j * np.pi - phi) / p) % (2 * np.pi) for j in range(2 * p))
    return []


def _falling(m, p):
    out = 1
    for i in range(p):
        out *= m - i
    return out


def circle_crossings(sym: Symbol, R: float, samples: int | None = None) -> list:
    lev = _Level(sym)
    m = samples or max(2048, 256 * sym.degree)
    th = np.linspace(0.0, 2 * np.pi, m + 1)
    f = eval_omega(sym, R * np.exp(1j * th)).real
    out = []
    for i in range(m):
        if f[i] == 0.0:
            out.append(th[i])
        elif f[i] * f[i + 1] < 0:
            out.append(brentq(lambda a: lev.F(R * np.exp(1j * a)), th[i], th[i + 1], xtol=1e-15))
    return [R * np.exp(1j * a) for a in out]


def _trace(lev: _Level, start: complex, direction: complex, R: float, sing: list, L: float,
           hmin=None, hmax=None):
    """Follow Re w = 0 from ``start`` until the circle |k| = R or a critical point."""
    hmin = hmin or 1e-3 / L
    hmax0 = hmax or 0.5 / L
    k = start
    nodes = [k]
    d = direction / abs(direction)
    h = min(0.05 / L, hmax0)
    end = ("circle", None)
    for _ in range(2_000_000):
        g = lev.grad(k)
        T = 1j * g
        if abs(T) == 0:
            raise TraceStalled(f"zero gradient at {k}")
        T = T / abs(T)
        if (T * np.conj(d)).real < 0:
            T = -T
        hmax = max(hmax0, 0.02 * abs(k))
        dist = min((abs(k - s) for s in sing), default=np.inf)
        if dist < 2 * hmin and len(nodes) > 1:
            near = min(sing, key=lambda s: abs(k - s))
            nodes[-1] = near
            end = ("sing", near)
            break
        heff = min(h, max(0.5 * dist, hmin))
        pred = k + heff * T
        kc, its = lev.correct(pred)
        ok = kc is not None and abs(kc - pred) <= 0.25 * heff
        if ok:
            Tn = 1j * lev.grad(kc)
            if abs(Tn) > 0:
                a = abs(np.angle(Tn / abs(Tn) * np.conj(T)))
                ok = min(a, np.pi - a) < 0.35
            else:
                ok = False
        if not ok:
            if h <= hmin * 1.0001:
                raise TraceStalled(f"corrector failed near k={k}")
            h = max(h / 2, hmin)
            continue
        step_dir = (kc - k) / abs(kc - k)
        if abs(kc) >= R:
            # land on the circle
            a, b = k, kc
            for _ in range(60):
                m = 0.5 * (a + b)
                if abs(m) < R:
                    a = m
                else:
                    b = m
            kc2, _ = lev.correct(R * b / abs(b))
            nodes.append(kc2 if kc2 is not None else R * b / abs(b))
            break
        nodes.append(kc)
        d = step_dir
        k = kc
        if its <= 3:
            h = min(1.5 * h, hmax)
    else:
        raise TraceStalled("step budget exhausted")
    return np.array(nodes), end


def _dedupe(edges, tol):
    kept = []
    for e in edges:
        dup = False
        for f in kept:
            a, b = e[0], e[-1]
            c, d = f[0], f[-1]
            same_ends = (abs(a - c) < tol and abs(b - d) < tol) or (abs(a - d) < tol and abs(b - c) < tol)
            if same_ends:
                me = e[len(e) // 2]
                if np.min(_point_chord_all(f, me)) < max(tol, 0.05 * _plen(f)):
                    dup = True
                    break
        if not dup:
            kept.append(e)
    return kept


def _plen(p):
    return float(np.sum(np.abs(np.diff(p))))


def _orient(sym: Symbol, nodes: np.ndarray, L: float) -> np.ndarray:
    """Reverse if needed so that D lies to the left of travel."""
    i = len(nodes) // 2
    if i == 0 or i == len(nodes) - 1:
        i = max(1, min(len(nodes) - 2, i))
    k = nodes[i]
    tau = nodes[min(i + 1, len(nodes) - 1)] - nodes[max(i - 1, 0)]
    tau = tau / abs(tau)
    eps = 1e-4 * max(abs(k), 1.0 / L)
    left = eval_omega(sym, k + eps * 1j * tau).real
    right = eval_omega(sym, k - eps * 1j * tau).real
    return nodes if left < right else nodes[::-1]


def _simplify(sym: Symbol, nodes: np.ndarray, L: float, re_tol=0.02, geo_tol=None) -> np.ndarray:
    """Greedy chord merging keeping |Re w| small along chords and staying near the curve."""
    geo_tol = geo_tol or 0.05 / L
    n = len(nodes)
    if n <= 2:
        return nodes
    keep = [0]
    i = 0
    while i < n - 1:
        j = i + 1
        step = 1
        best = j
        while True:
            cand = min(i + step, n - 1)
            if _chord_ok(sym, nodes, i, cand, re_tol, geo_tol):
                best = cand
                if cand == n - 1:
                    break
                step *= 2
            else:
                break
        lo, hi = best, min(i + step, n - 1)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if _chord_ok(sym, nodes, i, mid, re_tol, geo_tol):
                lo = mid
            else:
                hi = mid
        keep.append(lo)
        i = lo
    return nodes[keep]


def _chord_ok(sym, nodes, i, j, re_tol, geo_tol):
    if j <= i + 1:
        return True
    a, b = nodes[i], nodes[j]
    mids = nodes[i + 1:j]
    if np.max(_seg_dist(np.array([a]), np.array([b]), mids[:, None]) if False else _point_chord(a, b, mids)) > geo_tol:
        return False
    d = b - a
    s = np.clip(((mids - a) * np.conj(d)).real / abs(d) ** 2, 0, 1)
    proj = a + s * d
    return float(np.max(np.abs(eval_omega(sym, proj).real))) <= re_tol


def _point_chord(a, b, pts):
    d = b - a
    s = np.clip(((pts - a) * np.conj(d)).real / abs(d) ** 2, 0, 1)
    return np.abs(a + s * d - pts)


@dataclass
class LevelSetGraph:
    edges: list  # oriented node arrays
    singular: list
    crossings: list


def trace_level_set(sym: Symbol, R: float, L: float = 1.0) -> LevelSetGraph:
    lev = _Level(sym)
    sing = [s for s in singular_points(sym) if abs(s) < R]
    cross = circle_crossings(sym, R)
    raw = []
    for c in cross:
        nodes, _ = _trace(lev, c, -c, R, sing, L)
        raw.append(nodes)
    for s in sing:
        others = [abs(s - o) for o in sing if o != s]
        delta = min([0.02 / L] + [0.25 * o for o in others])
        for th in branch_directions(sym, s):
            d = np.exp(1j * th)
            p0 = s + delta * d
            # correct perpendicular to the branch direction
            pc, _ = lev.correct(p0)
            if pc is None:
                raise TraceStalled(f"cannot leave critical point {s}")
            nodes, _ = _trace(lev, pc, d, R, [o for o in sing if o != s] + [s], L)
            if abs(nodes[-1] - s) < 1e-12:
                # returned to the start: a loop around nothing, ignore
                continue
            raw.append(np.concatenate([[s], nodes]))
    tol = 1e-6 * max(1.0, R)
    edges = _dedupe(raw, tol)
    oriented = [_orient(sym, e, L) for e in edges]
    return LevelSetGraph(oriented, sing, cross)


def _is_real_edge(nodes, R):
    return float(np.max(np.abs(nodes.imag))) <= 1e-9 * (1.0 + R)


def boundary_paths(sym: Symbol, R_max: float, L: float = 1.0, simplify: bool = True):
    """Oriented boundaries of D+ and D- inside |k| <= R_max."""
    g = trace_level_set(sym, R_max, L)
    plus, minus = [], []
    for e in g.edges:
        if _is_real_edge(e, R_max):
            direction = (e[-1] - e[0]).real
            target = plus if direction > 0 else minus
        else:
            mid = e[np.argmax(np.abs(e.imag))]
            target = plus if mid.imag > 0 else minus
        nodes = _simplify(sym, e, L) if simplify else e
        target.append(Arc(np.asarray(nodes, dtype=complex)))
    return ContourPath(plus, "+", R_max), ContourPath(minus, "-", R_max)


# ---------------------------------------------------------------------------
# indentation


def _cut_arc(nodes, z, r):
    """Split a polyline at the circle |k - z| = r.

    Returns (pieces outside the disc, entry points, exit points); entry
    points are where travel enters the disc. Segments that pass through the
    disc without a node inside it are cut as well.
    """
    inside = abs(nodes[0] - z) < r
    pieces, entries, exits = [], [], []
    cur = [] if inside else [nodes[0]]
    for a, b in zip(nodes[:-1], nodes[1:]):
        for s_ in _circle_params(a, b, z, r):
            p = a + s_ * (b - a)
            if inside:
                exits.append(p)
                cur = [p]
            else:
                cur.append(p)
                if len(cur) >= 2:
                    pieces.append(np.array(cur))
                entries.append(p)
                cur = []
            inside = not inside
        if not inside:
            cur.append(b)
    if len(cur) >= 2:
        pieces.append(np.array(cur))
    return pieces, entries, exits


def _circle_params(a, b, z, r):
    """Sorted parameters s in (0, 1] where a + s (b - a) crosses |k - z| = r."""
    d = b - a
    A = abs(d) ** 2
    if A == 0:
        return []
    B = 2 * ((a - z) * np.conj(d)).real
    C = abs(a - z) ** 2 - r * r
    disc = B * B - 4 * A * C
    if disc <= 0:
        return []
    sq = np.sqrt(disc)
    out = []
    for s_ in sorted(((-B - sq) / (2 * A), (-B + sq) / (2 * A))):
        if 0.0 < s_ <= 1.0:
            out.append(float(s_))
    return out


def _cw_arc(z, r, p_from, p_to, nmin=24):
    t1 = np.angle(p_from - z)
    t2 = np.angle(p_to - z)
    sweep = (t1 - t2) % (2 * np.pi)
    if sweep < 1e-12:
        sweep = 2 * np.pi
    m = max(nmin, int(np.ceil(sweep / (np.pi / 16))) + 1)
    th = t1 - np.linspace(0.0, sweep, m)
    pts = z + r * np.exp(1j * th)
    pts[0], pts[-1] = p_from, p_to
    return pts


def deform_around_zeros(path: ContourPath, zeros, side=None, radius=None, junctions=()) -> ContourPath:
    """Replace the parts of ``path`` within ``radius`` of each zero by clockwise arcs.

    Clockwise arcs from the entry to the exit point bulge to the left of
    travel, i.e. into D: above the real axis on the D+ boundary and below it
    on the D- boundary. ``radius`` may be a scalar or one value per zero.
    ``side`` is accepted for symmetry with the geometric description and is
    implied by the orientation.
    """
    zeros = [complex(z) for z in zeros]
    if not zeros:
        return path
    if radius is None:
        radius = np.pi / 4
    radii = np.broadcast_to(np.asarray(radius, dtype=float), (len(zeros),))
    for z, r in zip(zeros, radii):
        for j in junctions:
            dj = abs(z - j)
            if 0 < dj < 1e-3 * r:
                raise ZeroTooCloseToCorner(f"zero {z} lies {dj:.2e} from junction {j}")
    arcs = [a for a in path.arcs]
    deformations = list(path.deformations)
    for z, r in zip(zeros, radii):
        new_arcs, entries, exits = [], [], []
        for arc in arcs:
            if arc.kind == "loop":
                new_arcs.append(arc)
                continue
            if np.min(np.abs(arc.nodes - z)) >= r and np.min(_point_chord_all(arc.nodes, z)) >= r:
                new_arcs.append(arc)
                continue
            pieces, en, ex = _cut_arc(arc.nodes, z, r)
            new_arcs.extend(Arc(p, arc.kind) for p in pieces if len(p) >= 2)
            entries.extend(en)
            exits.extend(ex)
        if not entries and not exits:
            continue
        used = set()
        for p in entries:
            ta = np.angle(p - z)
            best, bsweep = None, np.inf
            for idx, q in enumerate(exits):
                if idx in used:
                    continue
                sweep = (ta - np.angle(q - z)) % (2 * np.pi)
                if sweep < bsweep:
                    best, bsweep = idx, sweep
            if best is None:
                continue
            used.add(best)
            new_arcs.append(Arc(_cw_arc(z, r, p, exits[best]), "indent"))
        deformations.append((z, float(r)))
        arcs = new_arcs
    return ContourPath(arcs, path.side, path.R_max, path.orientation, deformations)


def _point_chord_all(nodes, z):
    if len(nodes) < 2:
        return np.abs(nodes - z)
    return _seg_dist(nodes[:-1], nodes[1:], z)


def add_loops(path: ContourPath, zeros, radii) -> ContourPath:
    """Clockwise circles around poles strictly inside D (excluded from the region)."""
    arcs = list(path.arcs)
    defs = list(path.deformations)
    for z, r in zip(zeros, np.broadcast_to(np.asarray(radii, dtype=float), (len(zeros),))):
        th = -np.linspace(0.0, 2 * np.pi, 65)
        pts = z + r * np.exp(1j * th)
        pts[-1] = pts[0]
        arcs.append(Arc(pts, "loop"))
        defs.append((complex(z), float(r)))
    return ContourPath(arcs, path.side, path.R_max, path.orientation, defs)


def omega_zeros(sym: Symbol) -> list:
    r = np.roots(list(reversed(sym.coeffs)))
    out = []
    for z in r:
        z = complex(z)
        if abs(z.imag) < 1e-13 * (1 + abs(z)):
            z = complex(z.real, 0.0)
        if abs(z.real) < 1e-13 * (1 + abs(z)):
            z = complex(0.0, z.imag)
        if all(abs(z - o) > 1e-9 for o in out):
            out.append(z)
    return out


def indentation_radii(points, L: float, extra=(), sym: Symbol | None = None, t_ref: float = 0.0) -> np.ndarray:
    """Per-point radius min(pi/(4L), half the distance to the nearest other point).

    With ``sym`` and ``t_ref`` the radius is also capped so that
    |Re w| t_ref stays below 1 on the arc (|w'(z)| r t_ref <= 1), keeping
    e^{-w t} bounded by e on indentations far from the origin.
    """
    pts = list(points)
    allp = pts + list(extra)
    out = []
    for i, z in enumerate(pts):
        others = [abs(z - w) for j, w in enumerate(allp) if j != i and abs(z - w) > 1e-12]
        r = np.pi / (4 * L)
        if others:
            r = min(r, 0.5 * min(others))
        if sym is not None and t_ref > 0:
            d = abs(sym.derivative(z))
            if d > 0:
                r = min(r, 1.0 / (d * t_ref))
        out.append(r)
    return np.array(out)


def write_polylines_csv(paths, fh):
    fh.write("component,node,re_k,im_k\n")
    comp = 0
    for p in paths:
        for arc in p.arcs:
            for i, z in enumerate(arc.nodes):
                fh.write(f"{p.side}{comp},{i},{z.real:.17g},{z.imag:.17g}\n")
            comp += 1
