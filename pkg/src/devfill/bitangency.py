"""The bitangency determinant and its derivatives on the parameter torus.

For a unit-speed closed curve ``g`` the determinant

    D(s, t) = det(g(s) - g(t), g'(s), g'(t))

vanishes exactly when the tangent lines at ``s`` and ``t`` are coplanar, i.e.
when some plane is tangent to the curve at both points.  Everything here is
vectorized over arrays of parameter pairs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import NotAZero, NotCriticalZero

MORSE_REGULAR = "morse-regular"
CRITICAL_MORSE = "critical-morse"
DEGENERATE = "degenerate"

REASON_INCIDENCE = "tangent-line incidence"
REASON_TORSION = "torsion zero"
REASON_CURVATURE = "curvature zero"
REASON_CORNER = "corner"


def triple(a, b, c):
    """det(a, b, c) with the vectors as columns, batched over leading axes."""
    return np.einsum("...i,...i->...", a, np.cross(b, c))


def _jets(curve, s, t, side_s=None, side_t=None):
    return curve.jet(s, side_s), curve.jet(t, side_t)


def eval_D(curve, s, t, side_s=None, side_t=None):
    s = np.asarray(s, float)
    t = np.asarray(t, float)
    g = curve.evaluate(s, 0)
    h = curve.evaluate(t, 0)
    gs = curve.evaluate(s, 1, side_s)
    ht = curve.evaluate(t, 1, side_t)
    return triple(g - h, gs, ht)


def grad_D(curve, s, t, side_s=None, side_t=None):
    """Analytic differential (dD/ds, dD/dt), stacked on the last axis."""
    (g0, g1, g2, _), (h0, h1, h2, _) = _jets(curve, s, t, side_s, side_t)
    delta = g0 - h0
    return np.stack([triple(delta, g2, h1), triple(delta, g1, h2)], axis=-1)


def value_and_grad(curve, s, t, side_s=None, side_t=None):
    (g0, g1, g2, _), (h0, h1, h2, _) = _jets(curve, s, t, side_s, side_t)
    delta = g0 - h0
    d = triple(delta, g1, h1)
    grad = np.stack([triple(delta, g2, h1), triple(delta, g1, h2)], axis=-1)
    return d, grad


def full_hessian(curve, s, t, side_s=None, side_t=None):
    """Analytic 2x2 Hessian of D, valid at any off-corner pair."""
    (g0, g1, g2, g3), (h0, h1, h2, h3) = _jets(curve, s, t, side_s, side_t)
    delta = g0 - h0
    dss = triple(g1, g2, h1) + triple(delta, g3, h1)
    dst = triple(delta, g2, h2)
    dtt = -triple(h1, g1, h2) + triple(delta, g1, h3)
    return np.stack([np.stack([dss, dst], -1), np.stack([dst, dtt], -1)], -2)


def fd_hessian(curve, s, t, step=None):
    """Central finite-difference Hessian of D built from D values only."""
    h = 1e-4 * curve.length if step is None else step
    f = lambda a, b: float(eval_D(curve, a, b))
    d0 = f(s, t)
    dss = (f(s + h, t) - 2 * d0 + f(s - h, t)) / h**2
    dtt = (f(s, t + h) - 2 * d0 + f(s, t - h)) / h**2
    dst = (f(s + h, t + h) - f(s + h, t - h) - f(s - h, t + h) + f(s - h, t - h)) / (4 * h**2)
    return np.array([[dss, dst], [dst, dtt]])


def frenet_hessian_diagonal(curve, s, t):
    """Diagonal Hessian entries at a critical zero from Frenet data.

    Entry one is kappa(s) tau(s) det(g(s) - g(t), B(s), g'(t)); entry two the
    mirror expression at ``t``.  Only meaningful where both osculating planes
    coincide.
    """
    T1, _, B1, k1, tau1, _ = curve.frenet_arrays(s)
    T2, _, B2, k2, tau2, _ = curve.frenet_arrays(t)
    delta = curve.evaluate(s) - curve.evaluate(t)
    return np.array([k1 * tau1 * triple(delta, B1, T2), k2 * tau2 * triple(delta, T1, B2)])


@dataclass
class HessianResult:
    diagonal: np.ndarray
    analytic: np.ndarray
    finite_difference: np.ndarray
    degenerate: bool


def hess_D(curve, s, t, zero_tol=1e-7, crit_tol=1e-5, fd_step=None):
    """Hessian at a critical zero of D.

    Tolerances are relative: |D| < zero_tol * L**3 and |dD| < crit_tol * L**2.
    """
    L = curve.length
    d, g = value_and_grad(curve, float(s), float(t))
    if abs(d) > zero_tol * L**3 or np.linalg.norm(g) > crit_tol * L**2:
        raise NotCriticalZero(f"|D|={abs(d):.3g}, |dD|={np.linalg.norm(g):.3g} at ({s:.6g}, {t:.6g})")
    diag = frenet_hessian_diagonal(curve, float(s), float(t))
    degenerate = bool(np.any(np.abs(diag) < 1e-9 * L) or np.any(np.isnan(diag)))
    return HessianResult(np.nan_to_num(diag), full_hessian(curve, float(s), float(t)),
                         fd_hessian(curve, float(s), float(t), fd_step), degenerate)


# -- classification ----------------------------------------------------------

@dataclass(frozen=True)
class ZeroClass:
    kind: str
    reason: str | None = None

    @property
    def label(self):
        return self.kind if self.reason is None else f"{self.kind}:{self.reason}"


@dataclass
class ClassifyTolerances:
    zero: float = 1e-7          # |D| / L^3
    grad: float = 1e-6          # |dD| / L^2
    hess: float = 1e-9          # |diag entry| / L
    incidence: float = 1e-5     # sine of angle between tangent and chord
    torsion: float = 1e-5       # |tau| * L
    corner: float = 1e-9        # distance to corner / L


def classify_many(curve, s, t, tol=None):
    """Vectorized zero classification; returns a list of :class:`ZeroClass`.

    Points violating |D| < tol.zero * L^3 get ``None``.
    """
    tol = tol or ClassifyTolerances()
    L = curve.length
    s = np.atleast_1d(np.asarray(s, float))
    t = np.atleast_1d(np.asarray(t, float))
    (g0, g1, g2, g3), (h0, h1, h2, h3) = _jets(curve, s, t)
    delta = g0 - h0
    d = triple(delta, g1, h1)
    grad = np.stack([triple(delta, g2, h1), triple(delta, g1, h2)], -1)
    gnorm = np.linalg.norm(grad, axis=-1)
    dn = np.maximum(np.linalg.norm(delta, axis=-1), 1e-300)
    inc = np.minimum(np.linalg.norm(np.cross(g1, delta), axis=-1), np.linalg.norm(np.cross(h1, delta), axis=-1)) / dn
    _, _, B1, k1, tau1, v1 = curve.frenet_arrays(s)
    _, _, B2, k2, tau2, v2 = curve.frenet_arrays(t)

    def near_corner(x):
        if not len(curve.breaks):
            return np.zeros(x.shape, bool)
        dd = np.abs(np.mod(x, L)[:, None] - curve.breaks)
        dd = np.minimum(dd, L - dd)
        return (dd < tol.corner * L).any(-1)

    corner = near_corner(s) | near_corner(t)
    out = []
    for k in range(len(s)):
        if abs(d[k]) > tol.zero * L**3:
            out.append(None)
        elif corner[k]:
            out.append(ZeroClass(DEGENERATE, REASON_CORNER))
        elif not (v1[k] and v2[k]):
            out.append(ZeroClass(DEGENERATE, REASON_CURVATURE))
        elif inc[k] < tol.incidence:
            out.append(ZeroClass(DEGENERATE, REASON_INCIDENCE))
        elif min(abs(tau1[k]), abs(tau2[k])) * L < tol.torsion:
            out.append(ZeroClass(DEGENERATE, REASON_TORSION))
        elif gnorm[k] > tol.grad * L**2:
            out.append(ZeroClass(MORSE_REGULAR))
        else:
            diag = (k1[k] * tau1[k] * triple(delta[k], B1[k], h1[k]),
                    k2[k] * tau2[k] * triple(delta[k], g1[k], B2[k]))
            if min(abs(diag[0]), abs(diag[1])) > tol.hess * L:
                out.append(ZeroClass(CRITICAL_MORSE))
            else:
                # both frame factors passed, so the osculating-plane determinant is what vanished
                out.append(ZeroClass(DEGENERATE, REASON_INCIDENCE))
    return out


def classify_zero(curve, s, t, tol=None):
    res = classify_many(curve, [s], [t], tol)[0]
    if res is None:
        raise NotAZero(f"D({s:.6g}, {t:.6g}) = {float(eval_D(curve, s, t)):.3g} is not small")
    return res


# -- sampled field -----------------------------------------------------------

def periodic_distance(a, b, L):
    d = np.abs(np.mod(a - b, L))
    return np.minimum(d, L - d)


@dataclass
class ScalarField:
    n: int
    length: float
    delta: float
    values: np.ndarray
    corner_params: tuple = ()
    params: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.params is None:
            self.params = grid_params(self.n, self.length)

    @property
    def spacing(self):
        return self.length / self.n

    def excluded_nodes(self):
        s = self.params
        return periodic_distance(s[:, None], s[None, :], self.length) < self.delta

    def corner_rows(self):
        """Grid indices whose cell [s_i, s_{i+1}] touches a corner line."""
        rows = set()
        h = self.spacing
        for c in self.corner_params:
            i = int(np.floor(c / h)) % self.n
            rows.add(i)
            if abs(c - i * h) < 1e-12 * self.length:
                rows.add((i - 1) % self.n)
        return sorted(rows)

    # binary layout: <u32 n_s, u32 n_t, f32 L, f32 delta> then row-major little-endian f64
    HEADER = struct.Struct("<IIff")

    def to_bytes(self):
        head = self.HEADER.pack(self.n, self.n, self.length, self.delta)
        return head + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    def sidecar(self):
        return {
            "n_s": self.n,
            "n_t": self.n,
            "length": self.length,
            "delta": self.delta,
            "corner_params": [float(c) for c in self.corner_params],
            "dtype": "float64-le",
            "header_bytes": self.HEADER.size,
            "layout": "row-major, row index = first parameter",
        }

    def save(self, path_bin, path_json):
        with open(path_bin, "wb") as fh:
            fh.write(self.to_bytes())
        with open(path_json, "w") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path_bin, path_json=None):
        raw = open(path_bin, "rb").read()
        n1, n2, L, delta = cls.HEADER.unpack_from(raw)
        vals = np.frombuffer(raw, dtype="<f8", offset=cls.HEADER.size).reshape(n1, n2).copy()
        corners = ()
        if path_json is not None:
            meta = json.load(open(path_json))
            L, delta = meta["length"], meta["delta"]
            corners = tuple(meta.get("corner_params", ()))
        return cls(n1, float(L), float(delta), vals, corners)


def grid_params(n, L):
    return np.arange(n) * L / n


def sample_field(curve, n, delta_frac=0.02, threads=1):
    """D on the n x n periodic grid s_i = i L / n.

    Nodes on corner parameters use right-sided tangents.  Rows are evaluated
    in blocks, optionally on ``threads`` worker threads; every entry is
    computed by the same arithmetic either way, so results do not depend on it.
    """
    if n < 64:
        raise ValueError(f"grid size must be >= 64, got {n}")
    L = curve.length
    s = grid_params(n, L)
    g = curve.evaluate(s, 0)
    tg = curve.evaluate(s, 1, side="right")
    vals = np.empty((n, n))
    rows = 128

    def block(i0):
        i1 = min(i0 + rows, n)
        delta = g[i0:i1, None, :] - g[None, :, :]
        vals[i0:i1] = triple(delta, tg[i0:i1, None, :], tg[None, :, :])

    starts = range(0, n, rows)
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(block, starts))
    else:
        for i0 in starts:
            block(i0)
    return ScalarField(n, L, delta_frac * L, vals, tuple(float(b) for b in curve.breaks), s)
