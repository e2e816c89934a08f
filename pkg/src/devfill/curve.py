"""Closed, piecewise smooth space curves parametrized by arc length.

A :class:`BoundaryCurve` is built from an ordered closed polyline.  Each smooth
piece (between consecutive corner samples, or the whole loop when there are no
corners) is interpolated in chord-length parameter ``u`` by a quintic B-spline,
periodic when the loop has no corners.  Arc length is the exact integral of
``|P'(u)|`` and queries at arc length ``s`` invert that integral by Newton
iteration, so the returned tangent has unit norm to rounding and higher
derivatives follow from the chain rule.

Third derivatives come from the interpolant and are only as meaningful as the
interpolant is; callers needing them (torsion, Hessians of the bitangency
determinant) should feed densely sampled input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline, make_interp_spline

from .errors import CornerAmbiguity, CurvatureDegenerate, InsufficientData, SimplicityViolation

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
_NEWTON_ITERS = 2
_CORNER_EPS = 1e-12


@dataclass(frozen=True)
class FrenetData:
    s: float
    T: np.ndarray
    N: np.ndarray
    B: np.ndarray
    kappa: float
    tau: float


class _Piece:
    """One smooth piece: spline in chord parameter plus its arc-length table."""

    def __init__(self, pts, periodic):
        chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(chords <= 0):
            raise SimplicityViolation("repeated consecutive samples")
        u = np.concatenate([[0.0], np.cumsum(chords)])
        n = len(pts)
        if periodic:
            k = 5
            self.spline = make_interp_spline(u, pts, k=k, bc_type="periodic")
        else:
            k = 5 if n >= 6 else 3 if n >= 4 else 1
            self.spline = make_interp_spline(u, pts, k=k)
        self.degree = k
        self.derivs = [self.spline.derivative(m) if m <= k else None for m in range(1, 5)]
        self.u = u
        self.periodic = periodic
        seg = self._integrate(u[:-1], u[1:])
        self.sigma = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(self.sigma[-1])
        # dense Hermite table of u(sigma); slopes are 1/speed, so the seed is
        # accurate to ~1e-13 and two Newton steps finish the inversion
        sub = 4
        uf = (u[:-1, None] + np.diff(u)[:, None] * (np.arange(sub) / sub)[None, :]).ravel()
        uf = np.concatenate([uf, [u[-1]]])
        self._seed = CubicHermiteSpline(self.arclength(uf), uf, 1.0 / self.speed(uf))

    def speed(self, u):
        return np.linalg.norm(self.derivs[0](u), axis=-1)

    def _integrate(self, u0, u1):
        u0 = np.asarray(u0, float)
        u1 = np.asarray(u1, float)
        half = 0.5 * (u1 - u0)
        nodes = u0[..., None] + half[..., None] * (_GL_X + 1.0)
        return half * (self.speed(nodes) * _GL_W).sum(axis=-1)

    def arclength(self, u):
        idx = np.clip(np.searchsorted(self.u, u, side="right") - 1, 0, len(self.u) - 2)
        return self.sigma[idx] + self._integrate(self.u[idx], u)

    def invert(self, sigma):
        sigma = np.clip(sigma, 0.0, self.length)
        u = self._seed(sigma)
        for _ in range(_NEWTON_ITERS):
            u = u - (self.arclength(u) - sigma) / self.speed(u)
            u = np.clip(u, self.u[0], self.u[-1])
        return u

    def derivative(self, u, m):
        d = self.derivs[m - 1]
        if d is None:
            return np.zeros(np.shape(u) + (3,))
        return d(u)


def _unit_speed_derivatives(a, b, c, order):
    """Arc-length derivatives 1..order from chord-parameter derivatives a, b, c."""
    v = np.linalg.norm(a, axis=-1)[..., None]
    T = a / v
    if order == 1:
        return T
    vu = (T * b).sum(axis=-1)[..., None]
    bperp = b - vu * T
    K = bperp / v**2
    if order == 2:
        return K
    Tu = bperp / v
    vuu = (Tu * b).sum(axis=-1)[..., None] + (T * c).sum(axis=-1)[..., None]
    Ku = (c - vuu * T - vu * Tu) / v**2 - 2.0 * vu * bperp / v**3
    return Ku / v


def _segment_distances(p0, p1, q0, q1):
    """Minimum distance between segment batches [p0,p1] and [q0,q1] (broadcasting)."""
    d1 = p1 - p0
    d2 = q1 - q0
    r = p0 - q0
    a = (d1 * d1).sum(-1)
    e = (d2 * d2).sum(-1)
    f = (d2 * r).sum(-1)
    c = (d1 * r).sum(-1)
    b = (d1 * d2).sum(-1)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-300, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = (b * s + f) / e
        s = np.where(t < 0, np.clip(-c / a, 0.0, 1.0), np.where(t > 1, np.clip((b - c) / a, 0.0, 1.0), s))
        t = np.clip(t, 0.0, 1.0)
    diff = p0 + d1 * s[..., None] - q0 - d2 * t[..., None]
    return np.linalg.norm(diff, axis=-1)


def polyline_min_separation(points):
    """Smallest distance between non-adjacent segments of a closed polyline."""
    P = np.asarray(points, float)
    n = len(P)
    A = P
    B = np.roll(P, -1, axis=0)
    best = np.inf
    idx = np.arange(n)
    chunk = 256
    for start in range(0, n, chunk):
        i = idx[start:start + chunk, None]
        gap = (idx[None, :] - i) % n
        mask = (gap >= 2) & (gap <= n - 2)
        if not mask.any():
            continue
        d = _segment_distances(A[i], B[i], A[None, :], B[None, :])
        best = min(best, float(d[mask].min()))
    return best


class BoundaryCurve:
    """Closed piecewise-smooth curve with arc-length queries.

    ``breaks`` holds the arc lengths of corner samples (sorted, in ``[0, L)``);
    ``knot_s`` the arc length of every input sample, with sample 0 at ``s = 0``.
    """

    def __init__(self, points, corners=(), kappa_min_factor=1e-6):
        P = np.asarray(points, dtype=float)
        if P.ndim != 2 or P.shape[1] != 3:
            raise ValueError("points must be an (N, 3) array")
        n = len(P)
        if n < 8:
            raise InsufficientData(f"need at least 8 points, got {n}")
        corners = sorted({int(c) % n for c in corners})
        self.points = P
        self.corners = tuple(corners)
        poly_len = float(np.linalg.norm(P - np.roll(P, -1, axis=0), axis=1).sum())
        sep = polyline_min_separation(P)
        if not sep > 1e-9 * poly_len:
            raise SimplicityViolation(f"polyline is not simple (min separation {sep:.3g})")

        if not corners:
            closed = np.vstack([P, P[:1]])
            self.pieces = [_Piece(closed, periodic=True)]
            offsets = [0.0]
            knot_s = self.pieces[0].sigma[:-1].copy()
        else:
            self.pieces = []
            pieces_idx = []
            m = len(corners)
            for k in range(m):
                a, b = corners[k], corners[(k + 1) % m]
                span = (b - a) % n or n
                idx = (a + np.arange(span + 1)) % n
                if len(idx) < 2:
                    raise InsufficientData("corner piece with fewer than 2 samples")
                self.pieces.append(_Piece(P[idx], periodic=False))
                pieces_idx.append(idx)
            # arc length from sample 0 to the first corner
            lengths = [pc.length for pc in self.pieces]
            total = float(sum(lengths))
            knot_s = np.zeros(n)
            starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
            for pc, idx, st in zip(self.pieces, pieces_idx, starts):
                knot_s[idx[:-1]] = st + pc.sigma[:-1]
            shift = knot_s[0]
            knot_s = (knot_s - shift) % total
            offsets = list((starts - shift) % total)
        self.length = float(sum(pc.length for pc in self.pieces))
        self.knot_s = np.asarray(knot_s) % self.length
        self.knot_s[0] = 0.0
        self.offsets = np.asarray(offsets)
        order = np.argsort(self.offsets, kind="stable")
        self.offsets = self.offsets[order]
        self.pieces = [self.pieces[i] for i in order]
        self.breaks = self.offsets.copy() if corners else np.empty(0)
        self.kappa_min = kappa_min_factor / self.length
        self.max_order = min(3, min(pc.degree for pc in self.pieces))

    # -- parametrization -------------------------------------------------
    @property
    def L(self):
        return self.length

    def _locate(self, s, side):
        s = np.mod(np.asarray(s, float), self.length)
        if len(self.pieces) == 1:
            return np.zeros(s.shape, int), s
        idx = np.searchsorted(self.offsets, s, side="right") - 1
        idx = np.where(idx < 0, len(self.pieces) - 1, idx)
        sigma = np.mod(s - self.offsets[idx], self.length)
        if side == "left":
            at = sigma <= _CORNER_EPS * self.length
            if np.any(at):
                prev = (idx - 1) % len(self.pieces)
                lens = np.array([pc.length for pc in self.pieces])
                sigma = np.where(at, lens[prev], sigma)
                idx = np.where(at, prev, idx)
        return idx, sigma

    def at_corner(self, s):
        """Boolean mask: parameter coincides with a corner."""
        if not len(self.breaks):
            return np.zeros(np.shape(s), bool)
        s = np.mod(np.asarray(s, float), self.length)
        d = np.abs(s[..., None] - self.breaks)
        d = np.minimum(d, self.length - d)
        return (d <= _CORNER_EPS * self.length).any(axis=-1)

    def evaluate(self, s, order=0, side=None):
        """Position (order 0) or arc-length derivative of the given order at ``s``."""
        if order not in (0, 1, 2, 3):
            raise ValueError("order must be 0, 1, 2 or 3")
        if order > self.max_order:
            raise ValueError(f"interpolant only supports order <= {self.max_order}")
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, float))
        if order >= 1 and side is None and np.any(self.at_corner(s)):
            raise CornerAmbiguity("derivative requested exactly at a corner; pass side='left' or 'right'")
        idx, sigma = self._locate(s, side or "right")
        out = np.empty(s.shape + (3,))
        for k, pc in enumerate(self.pieces):
            mask = idx == k
            if not mask.any():
                continue
            u = pc.invert(sigma[mask])
            if order == 0:
                out[mask] = pc.spline(u)
                continue
            a = pc.derivative(u, 1)
            b = pc.derivative(u, 2) if order >= 2 else None
            c = pc.derivative(u, 3) if order >= 3 else None
            out[mask] = _unit_speed_derivatives(a, b, c, order)
        return out[0] if scalar else out

    def jet(self, s, side=None):
        """Position and first three derivatives, each of shape ``s.shape + (3,)``."""
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, float))
        idx, sigma = self._locate(s, side or "right")
        out = np.empty((4,) + s.shape + (3,))
        for k, pc in enumerate(self.pieces):
            mask = idx == k
            if not mask.any():
                continue
            u = pc.invert(sigma[mask])
            a, b, c = (pc.derivative(u, m) for m in (1, 2, 3))
            out[0][mask] = pc.spline(u)
            for order in (1, 2, 3):
                out[order][mask] = _unit_speed_derivatives(a, b, c, order)
        if scalar:
            return tuple(o[0] for o in out)
        return tuple(out)

    def frenet_arrays(self, s, side=None):
        """Vectorized (T, N, B, kappa, tau, valid) without raising on degeneracy."""
        _, d1, d2, d3 = self.jet(s, side)
        kappa = np.linalg.norm(d2, axis=-1)
        valid = kappa > self.kappa_min
        safe = np.where(valid, kappa, 1.0)
        N = d2 / safe[..., None]
        B = np.cross(d1, N)
        tau = np.einsum("...i,...i->...", np.cross(d1, d2), d3) / safe**2
        N = np.where(valid[..., None], N, np.nan)
        B = np.where(valid[..., None], B, np.nan)
        tau = np.where(valid, tau, np.nan)
        return d1, N, B, kappa, tau, valid

    def frenet(self, s, side=None):
        T, N, B, kappa, tau, valid = self.frenet_arrays(float(s), side)
        if not valid:
            raise CurvatureDegenerate(f"curvature {float(kappa):.3g} below threshold at s={float(s):.6g}")
        return FrenetData(float(s), T, N, B, float(kappa), float(tau))

    # -- derived curves ----------------------------------------------------
    def transformed(self, rotation=None, translation=None):
        R = np.eye(3) if rotation is None else np.asarray(rotation, float)
        t = np.zeros(3) if translation is None else np.asarray(translation, float)
        return BoundaryCurve(self.points @ R.T + t, self.corners, self.kappa_min * self.length)

    def sample(self, n_per_piece):
        """Arc-length parameters spread uniformly over every piece, corners excluded."""
        out = []
        for off, pc in zip(self.offsets, self.pieces):
            out.append(off + (np.arange(n_per_piece) + 0.5) / n_per_piece * pc.length)
        return np.mod(np.concatenate(out), self.length)

    def __repr__(self):
        return f"BoundaryCurve(n={len(self.points)}, L={self.length:.6g}, corners={list(self.corners)})"


def build_curve(points, corner_indices=(), kappa_min_factor=1e-6):
    return BoundaryCurve(points, corner_indices, kappa_min_factor)


def evaluate(curve, s, order=0, side=None):
    return curve.evaluate(s, order, side)


def frenet(curve, s, side=None):
    return curve.frenet(s, side)
