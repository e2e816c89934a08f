"""Checks that a boundary curve satisfies the finiteness hypotheses.

Three scans, all with tolerances relative to the curve length L:

* curvature bounded away from zero,
* finitely many torsion zeros (no planar stretches),
* finitely many pairs (s, s~) where the tangent line at s meets the curve at s~.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .bitangency import periodic_distance
from .errors import NonGenericIncidence

TORSION_ZERO_CAP = 64
INCIDENCE_CAP = 256


@dataclass
class CurvatureCheck:
    min_curvature: float
    location: float
    passed: bool


@dataclass
class TorsionScan:
    zeros: list
    bands: list
    min_abs_torsion: float


@dataclass
class GenericityReport:
    min_curvature: float
    min_curvature_at: float
    torsion_zeros: list
    torsion_bands: list
    tangent_incidences: list
    corner_params: list
    passed: bool
    reasons: list = field(default_factory=list)
    margins: dict = field(default_factory=dict)

    @property
    def verdict(self):
        return "pass" if self.passed else "fail"

    def to_json(self):
        return {
            "min_curvature": self.min_curvature,
            "min_curvature_at": self.min_curvature_at,
            "torsion_zeros": list(self.torsion_zeros),
            "torsion_bands": [list(b) for b in self.torsion_bands],
            "tangent_incidences": [list(p) for p in self.tangent_incidences],
            "corner_params": list(self.corner_params),
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "margins": dict(self.margins),
        }


def check_curvature(curve, density=4096):
    s = curve.sample(density)
    kappa = np.linalg.norm(curve.evaluate(s, 2), axis=-1)
    k = int(np.argmin(kappa))  # argmin returns the lowest index on ties
    return CurvatureCheck(float(kappa[k]), float(s[k]), bool(kappa[k] > curve.kappa_min))


def _torsion(curve, s):
    _, _, _, _, tau, valid = curve.frenet_arrays(s)
    return tau, valid


def find_torsion_zeros(curve, density=4096, band_tol=1e-7, xtol=1e-8):
    """Sign changes of torsion refined by bisection, plus bands where it stays ~0."""
    L = curve.length
    zeros, bands = [], []
    min_abs = np.inf
    for off, pc in zip(curve.offsets, curve.pieces):
        periodic = len(curve.pieces) == 1
        s = off + (np.arange(density) + 0.5) / density * pc.length
        tau, valid = _torsion(curve, s)
        small = valid & (np.abs(tau) * L < band_tol)
        # bands: maximal runs of small torsion, at least three samples long
        runs = []
        k = 0
        while k < density:
            if small[k]:
                j = k
                while j + 1 < density and small[j + 1]:
                    j += 1
                runs.append((k, j))
                k = j + 1
            else:
                k += 1
        if periodic and len(runs) > 1 and runs[0][0] == 0 and runs[-1][1] == density - 1:
            runs[0] = (runs[-1][0] - density, runs[0][1])
            runs.pop()
        for a, b in runs:
            if b - a >= 2:
                bands.append((float(np.mod(s[a % density], L)), float(np.mod(s[b % density], L))))
                small[np.arange(a, b + 1) % density] = True
            else:
                small[np.arange(a, b + 1) % density] = False
        stop = density if periodic else density - 1
        lo_list, hi_list = [], []
        for k in range(stop):
            j = (k + 1) % density
            if not (valid[k] and valid[j]) or small[k] or small[j]:
                continue
            if np.sign(tau[k]) != np.sign(tau[j]):
                lo_list.append(s[k])
                hi_list.append(s[k] + (s[j] - s[k]) % L)
        if lo_list:
            lo = np.array(lo_list)
            hi = np.array(hi_list)
            flo, _ = _torsion(curve, lo)
            while np.max(hi - lo) > xtol * L:
                mid = 0.5 * (lo + hi)
                fm, _ = _torsion(curve, mid)
                same = np.sign(fm) == np.sign(flo)
                lo = np.where(same, mid, lo)
                flo = np.where(same, fm, flo)
                hi = np.where(same, hi, mid)
            zeros.extend(np.mod(0.5 * (lo + hi), L).tolist())
        ok = valid & ~small
        if ok.any():
            min_abs = min(min_abs, float(np.abs(tau[ok]).min()))
    return TorsionScan(sorted(zeros), sorted(bands), float(min_abs))


def _incidence_residual(curve, s, t):
    g_s = curve.evaluate(s)
    g_t = curve.evaluate(t)
    T = curve.evaluate(s, 1, side="right")
    return np.cross(T, g_t - g_s)


def find_tangent_incidences(curve, grid=256, band_frac=0.02, dedup_frac=1e-4, accept=1e-8):
    """Pairs (s, s~) with g(s~) on the tangent line at s, sorted."""
    L = curve.length
    h = L / grid
    s = (np.arange(grid) + 0.5) * h
    g = curve.evaluate(s)
    T = curve.evaluate(s, 1, side="right")
    r = np.linalg.norm(np.cross(T[:, None, :], g[None, :, :] - g[:, None, :]), axis=-1)
    off = periodic_distance(s[:, None], s[None, :], L) >= band_frac * L
    if np.count_nonzero((r < 1e-9 * L) & off) > grid:
        raise NonGenericIncidence("tangent lines meet the curve along a continuum (straight piece?)")
    kmax = float(np.linalg.norm(curve.evaluate(s, 2), axis=-1).max())
    diam = float(np.linalg.norm(g - g.mean(0), axis=1).max() * 2)
    thresh = h * (1.0 + kmax * diam)
    is_min = off & (r < thresh)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                is_min &= r <= np.roll(np.roll(r, di, 0), dj, 1)
    found = []
    for i, j in zip(*np.nonzero(is_min)):
        sol = least_squares(lambda x: _incidence_residual(curve, x[0], x[1]), [s[i], s[j]],
                            x_scale=L, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
        a, b = np.mod(sol.x, L)
        res = float(np.linalg.norm(_incidence_residual(curve, a, b)))
        if res < accept * L and periodic_distance(a, b, L) >= 0.5 * band_frac * L:
            if all(max(periodic_distance(a, p, L), periodic_distance(b, q, L)) > dedup_frac * L for p, q in found):
                found.append((float(a), float(b)))
    if len(found) > INCIDENCE_CAP:
        raise NonGenericIncidence(f"{len(found)} tangent incidences exceed cap {INCIDENCE_CAP}")
    return sorted(found)


def genericity_report(curve, density=4096, incidence_grid=256, torsion_cap=TORSION_ZERO_CAP):
    reasons = []
    curv = check_curvature(curve, density)
    if not curv.passed:
        reasons.append(f"curvature vanishes (min {curv.min_curvature:.3g} at s={curv.location:.6g})")
    tors = find_torsion_zeros(curve, density)
    if tors.bands:
        total = sum((b - a) % curve.length for a, b in tors.bands)
        if len(tors.bands) == 1 and total > 0.99 * curve.length or not np.isfinite(tors.min_abs_torsion):
            reasons.append("planar")
        else:
            reasons.append(f"torsion vanishes on {len(tors.bands)} interval(s)")
    if len(tors.zeros) > torsion_cap:
        reasons.append(f"{len(tors.zeros)} torsion zeros exceed cap {torsion_cap}")
    try:
        inc = find_tangent_incidences(curve, incidence_grid)
    except NonGenericIncidence as exc:
        inc = []
        reasons.append(f"non-generic tangent incidence: {exc}")
    sep = np.inf
    for k, (a, b) in enumerate(inc):
        for c, d in inc[k + 1:]:
            sep = min(sep, max(periodic_distance(a, c, curve.length), periodic_distance(b, d, curve.length)))
    margins = {
        "min_curvature_over_kappa_min": curv.min_curvature / curve.kappa_min,
        "min_abs_torsion_off_zeros": tors.min_abs_torsion if np.isfinite(tors.min_abs_torsion) else None,
        "min_incidence_separation": sep if np.isfinite(sep) else None,
    }
    return GenericityReport(curv.min_curvature, curv.location, tors.zeros, tors.bands, inc,
                            [float(b) for b in curve.breaks], not reasons, reasons, margins)
