"""Admissibility of a boundary-condition split by growth sampling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NearSingular
from .global_relation import batch_system, side_maps, unknown_ids
from .problem_spec import Problem
from .symbol_core import Symbol, asymptotic_zero_directions

RADII = (50.0, 200.0, 800.0)
SLOPE_THRESHOLD = 0.1
MARGIN = np.deg2rad(5.0)


@dataclass
class GrowthDiagnostic:
    unknown: tuple
    carrier: int
    angle: float
    radii: tuple
    log_magnitudes: tuple
    slope: float

    @property
    def bounded(self) -> bool:
        return self.slope <= SLOPE_THRESHOLD

    @property
    def verdict(self) -> str:
        return "bounded" if self.bounded else "unbounded"


@dataclass
class WellPosedReport:
    admissible: bool
    N_left: int
    N_right: int
    predicted_N: int
    diagnostics: list = field(default_factory=list)

    def unbounded(self) -> list:
        return [d for d in self.diagnostics if not d.bounded]


def d_sectors(sym: Symbol) -> list:
    """Asymptotic sectors (lo, hi) of D = {Re w <= 0}, angles in [0, 2 pi)."""
    th = asymptotic_zero_directions(sym)
    n2 = len(th)
    out = []
    for i in range(n2):
        lo = th[i]
        hi = th[(i + 1) % n2] + (2 * np.pi if i == n2 - 1 else 0.0)
        mid = 0.5 * (lo + hi)
        if (sym.leading * np.exp(1j * sym.degree * mid)).real < 0:
            out.append((lo, hi))
    return out


def _upper(sector) -> bool:
    mid = 0.5 * (sector[0] + sector[1])
    return np.sin(mid) > 0


def predicted_split(sym: Symbol) -> int:
    """Number of D sectors in the upper half-plane (= conditions needed at x = 0)."""
    return sum(1 for s in d_sectors(sym) if _upper(s))


def _log_inverse_entries(M: np.ndarray) -> np.ndarray:
    """log|M^{-1}[i, l]| for a batch of matrices via log-determinants of minors."""
    K, n, _ = M.shape
    _, logdet = np.linalg.slogdet(M)
    out = np.empty((K, n, n))
    # an exactly vanishing cofactor (underflowed entries) is a bounded coefficient
    floor = np.log(np.finfo(float).tiny)
    for i in range(n):
        for l in range(n):
            minor = np.delete(np.delete(M, l, axis=1), i, axis=2)
            if n == 1:
                lm = np.zeros(K)
            else:
                _, lm = np.linalg.slogdet(minor)
            lm = np.maximum(lm, floor)
            out[:, i, l] = np.where(np.isfinite(logdet), lm - logdet, np.inf)
    return out


def qhat_coefficient(prob: Problem, unknown, carrier: int, k, t: float = 0.0):
    """Magnitude bound of the coefficient of q_hat(t, l_carrier) in a solved unknown.

    Includes |e^{w t}| and the surrogate |q_hat(t, l)| <= max(1, e^{Im l L});
    with row scaling this equals |M_s^{-1}[unknown, carrier]| |e^{w t}|.
    Returns log-magnitudes (array over k).
    """
    ks = np.atleast_1d(np.asarray(k, dtype=complex))
    b = batch_system(prob, ks, 0.0, "raw")
    ids = unknown_ids(prob)
    i = ids.index(tuple(unknown))
    logs = _log_inverse_entries(b.M)
    if not np.all(np.isfinite(logs[:, i, carrier])):
        raise NearSingular(complex(ks[0]))
    return logs[:, i, carrier] + (b.omega * t).real


def _rays(sectors, upper: bool) -> list:
    angles = []
    for lo, hi in sectors:
        if _upper((lo, hi)) != upper:
            continue
        a, c = lo + MARGIN, hi - MARGIN
        angles.extend([a, 0.5 * (lo + hi), c])
    return angles


def admissible(prob: Problem, radii=RADII) -> WellPosedReport:
    """Growth test of every carrier coefficient along rays inside D+/D-.

    Sampling is at t = 0: inside D the factor e^{w t} decays and would mask
    growth of the cofactor ratio.
    """
    sym = prob.symbol
    L = prob.L
    R = np.asarray(radii, dtype=float) / L
    sectors = d_sectors(sym)
    left, right = side_maps(prob)
    diags = []
    logR = np.log(R)
    A = np.vstack([logR, np.ones_like(logR)]).T
    for sm, upper in ((left, True), (right, False)):
        if not sm.unknowns:
            continue
        for ang in _rays(sectors, upper):
            ks = R * np.exp(1j * ang)
            b = batch_system(prob, ks, 0.0, "raw")
            logs = _log_inverse_entries(b.M)
            ids = unknown_ids(prob)
            for u in sm.unknowns:
                i = ids.index(u)
                for l in range(prob.n):
                    y = logs[:, i, l]
                    if not np.all(np.isfinite(y)):
                        slope = np.inf
                    else:
                        slope = float(np.linalg.lstsq(A, y, rcond=None)[0][0])
                    diags.append(GrowthDiagnostic(u, l, float(ang), tuple(R), tuple(y), slope))
    nl, nr = prob.split()
    ok = all(d.bounded for d in diags)
    return WellPosedReport(ok, nl, nr, predicted_split(sym), diags)


def format_report(rep: WellPosedReport) -> str:
    lines = [
        f"admissible: {str(rep.admissible).lower()}, N_left={rep.N_left}, N_right={rep.N_right}",
        f"predicted_N: {rep.predicted_N}",
    ]
    bad = rep.unbounded()
    if bad:
        seen = []
        for d in bad:
            key = (d.unknown, d.carrier)
            if key not in seen:
                seen.append(key)
        for (side, order), l in seen:
            name = ("f" if side == "left" else "g") + f"~_{order}"
            worst = max(d.slope for d in bad if d.unknown == (side, order) and d.carrier == l)
            lines.append(f"unbounded: {name} carrier q_hat(t, lambda_{l}) slope={worst:.3g}")
    return "\n".join(lines)
