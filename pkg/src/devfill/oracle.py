"""Synthetic boundaries with known developable fillings.

Every positive case is the boundary of an explicitly constructed ruled
developable patch, so its ruling correspondence is known in closed form (up to
a root solve) and can be compared against what the solver recovers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .curve import BoundaryCurve
from .errors import CaseConstructionFailed, NormalFieldDegenerate
from .surface import grid_mesh

KINDS = ("cylinder", "tangent_strip", "two_solution", "negative_planar", "negative_square")


# -- normal-field construction ---------------------------------------------

@dataclass
class RuledPatch:
    u: np.ndarray
    base: np.ndarray
    direction: np.ndarray
    base_d1: np.ndarray
    direction_d1: np.ndarray

    def point(self, i, v):
        return self.base[i] + np.multiply.outer(v, self.direction[i]) if np.ndim(v) else self.base[i] + v * self.direction[i]

    def determinant_residual(self):
        """|det(c', w, w')| normalized by the three norms, per sample."""
        a, w, wp = self.base_d1, self.direction, self.direction_d1
        num = np.abs(np.einsum("ij,ij->i", a, np.cross(w, wp)))
        den = np.linalg.norm(a, axis=1) * np.linalg.norm(w, axis=1) * np.maximum(np.linalg.norm(wp, axis=1), 1e-12)
        return num / den


def torsal_from_normal(gamma, normal, u, step=1e-5, tol=1e-8):
    """Ruled patch g(u) + v * (n x n') from a unit normal field along a curve.

    ``gamma`` and ``normal`` are callables of an array of parameters returning
    (m, 3) arrays.  Derivatives are taken by central differences.
    """
    u = np.asarray(u, float)
    g = gamma(u)
    n = normal(u)
    dg = (gamma(u + step) - gamma(u - step)) / (2 * step)
    dn = (normal(u + step) - normal(u - step)) / (2 * step)
    ddn = (normal(u + step) - 2 * n + normal(u - step)) / step**2
    if np.abs(np.linalg.norm(n, axis=1) - 1).max() > 1e-6:
        raise ValueError("normal field is not unit length")
    if np.abs(np.einsum("ij,ij->i", n, dg)).max() > 1e-6 * np.linalg.norm(dg, axis=1).max():
        raise ValueError("normal field is not orthogonal to the curve")
    if np.linalg.norm(dn, axis=1).min() < tol:
        raise NormalFieldDegenerate("derivative of the normal field vanishes")
    w = np.cross(n, dn)
    wp = np.cross(n, ddn)
    return RuledPatch(u, g, w, dg, wp)


# -- analytic test curves ----------------------------------------------------

def saddle_loop(t):
    """(cos t, sin t, 0.3 sin 2t): a generic, torsion-changing test loop."""
    t = np.asarray(t, float)
    return np.stack([np.cos(t), np.sin(t), 0.3 * np.sin(2 * t)], -1)


def critical_zero_loop(t):
    """Loop with 2-fold symmetry whose parameters 0 and pi share the osculating plane z = 0."""
    t = np.asarray(t, float)
    return np.stack([np.cos(t) + 0.2 * np.cos(3 * t), 0.8 * np.sin(t) + 0.3 * np.cos(t),
                     0.3 * np.sin(2 * t) ** 3], -1)


def sample_loop(fn, n):
    theta = 2 * np.pi * np.arange(n) / n
    return theta, fn(theta)


def _cylinder_profile(theta, phi_max, wobble):
    return phi_max * np.cos(theta) + wobble * np.sin(2 * theta)


def _cylinder_point(theta, r, phi_max, height, skew, wobble):
    phi = _cylinder_profile(theta, phi_max, wobble)
    y = skew * np.cos(theta) ** 2 + 0.5 * height * np.sin(theta)
    return np.stack([r * np.sin(phi), y, r * np.cos(phi)], -1)


def _helix(u, pitch):
    c = np.stack([np.cos(u), np.sin(u), pitch * u], -1)
    e = np.stack([-np.sin(u), np.cos(u), np.full_like(u, pitch)], -1) / np.sqrt(1 + pitch**2)
    return c, e


def _strip_coords(theta, span, v0, width, skew, wobble):
    u = span * np.cos(theta) + wobble * np.sin(2 * theta)
    v = v0 + skew * np.cos(theta) ** 2 + width * np.sin(theta)
    return u, v


def _strip_point(theta, span, v0, width, skew, pitch, wobble):
    u, v = _strip_coords(theta, span, v0, width, skew, wobble)
    c, e = _helix(u, pitch)
    return c + v[..., None] * e


class _LevelPartner:
    """theta -> the other parameter where a two-extremum periodic function takes the same value.

    Points sharing the value of the generator coordinate lie on one ruling.
    """

    def __init__(self, f, n=4096):
        self.f = f
        th = 2 * np.pi * np.arange(n) / n
        v = f(th)
        i_max, i_min = int(np.argmax(v)), int(np.argmin(v))
        h = 2 * np.pi / n
        self.top = self._refine(lambda x: -f(x), th[i_max], h)
        self.bottom = self._refine(f, th[i_min], h)
        # branch 0 runs top -> bottom, branch 1 bottom -> top (parameter increasing)
        self.b0 = (self.top, self.top + np.mod(self.bottom - self.top, 2 * np.pi))
        self.b1 = (self.bottom, self.bottom + np.mod(self.top - self.bottom, 2 * np.pi))
        for lo, hi in (self.b0, self.b1):
            d = np.diff(f(np.linspace(lo, hi, 2048)))
            if not (np.all(d <= 0) or np.all(d >= 0)):
                raise ValueError("generator coordinate must have exactly one maximum and one minimum")

    @staticmethod
    def _refine(g, x0, h):
        from scipy.optimize import minimize_scalar
        return float(minimize_scalar(g, bounds=(x0 - 2 * h, x0 + 2 * h), method="bounded",
                                     options={"xatol": 1e-13}).x)

    def branch0(self, k):
        """``k`` parameters from one extremum to the other, ends included."""
        lo, hi = self.b0
        return np.linspace(lo, hi, k)

    def __call__(self, theta):
        lo, hi = self.b1
        target = self.f(theta)
        g = lambda x: self.f(x) - target
        if g(lo) * g(hi) > 0:   # theta is an extremum up to rounding
            return float(np.mod(lo if abs(g(lo)) < abs(g(hi)) else hi, 2 * np.pi))
        return float(np.mod(brentq(g, lo, hi, xtol=1e-14), 2 * np.pi))


def _pair_sampler(fn, partner):
    """Truth surface samples: points on the chords joining corresponding boundary points."""

    def sampler(nt, nl):
        th = partner.branch0(nt)
        tp = np.array([partner(t) for t in th])
        a, b = fn(th), fn(tp)
        lam = np.linspace(0, 1, nl)
        return (a[:, None, :] + lam[None, :, None] * (b - a)[:, None, :]).reshape(-1, 3)

    return sampler


def _oval_radius(theta, eps, mu):
    a = eps * np.cos(theta) ** 3 - mu * np.sin(theta) ** 3
    r = np.ones_like(theta)
    for _ in range(60):
        r -= (r**2 + a * r**3 - 1) / (2 * r + 3 * a * r**2)
    return r


def _oval_point(theta, eps, mu):
    r = _oval_radius(theta, eps, mu)
    x, y = r * np.cos(theta), r * np.sin(theta)
    return np.stack([x, y, x**2 + eps * x**3], -1)


# -- cases -------------------------------------------------------------------

@dataclass
class SyntheticCase:
    kind: str
    boundary: BoundaryCurve
    theta: np.ndarray
    correspondences: list
    expected_solution_count: int
    negative_control: bool = False
    params: dict = field(default_factory=dict)
    surface_samplers: list = field(default_factory=list)
    closed_form_abs_H: float | None = None
    param_fn: object = None

    def sidecar(self):
        return {
            "kind": self.kind,
            "params": self.params,
            "expected_solution_count": self.expected_solution_count,
            "negative_control": self.negative_control,
            "closed_form_abs_mean_curvature": self.closed_form_abs_H,
            "length": self.boundary.length,
            "correspondences": [[[float(a), float(b)] for a, b in c] for c in self.correspondences],
        }

    def curve_json(self):
        return {"points": self.boundary.points.tolist(), "corners": list(self.boundary.corners)}

    def truth_points(self, n_theta=400, n_lam=41):
        """Dense samples of each known filling, one array per correspondence family."""
        return [fn(n_theta, n_lam) for fn in self.surface_samplers]

    def truth_meshes(self, n_theta=400, n_lam=41):
        """Each known filling triangulated on its ruling grid."""
        return [grid_mesh(fn(n_theta, n_lam), n_theta, n_lam) for fn in self.surface_samplers]


def _theta_to_s(theta, curve):
    """Arc length at arbitrary parameter values by periodic spline through the knots."""
    L = curve.length
    th = np.concatenate([theta, [2 * np.pi]])
    s = np.concatenate([curve.knot_s, [L]])
    # s - L theta / 2pi is periodic
    spl = CubicSpline(th, s - L * th / (2 * np.pi), bc_type="periodic")

    def to_s(t):
        t = np.mod(t, 2 * np.pi)
        return np.mod(spl(t) + L * t / (2 * np.pi), L)

    return to_s


def _pairs_from_partner(theta, curve, partner):
    """Correspondence samples (s, s~) along one branch mapped by ``partner``."""
    to_s = _theta_to_s(theta, curve)
    inner = partner.branch0(len(theta) // 2) if hasattr(partner, "branch0") else \
        theta[(theta > 0) & (theta < np.pi)]
    tp = np.array([partner(t) for t in inner])
    return np.stack([to_s(inner), to_s(tp)], -1)


def independent_scan(fn, pairs_theta, n=2048, cells=2):
    """Check pairs lie near sign changes of D for the analytic curve ``fn``.

    The determinant is formed from the raw parametrization (tangent length does
    not change its sign), sampled on an n x n grid of the curve parameter.
    Returns the fraction of pairs within ``cells`` grid cells of a sign change.
    """
    th = 2 * np.pi * np.arange(n) / n
    p = fn(th)
    dp = (fn(th + 1e-6) - fn(th - 1e-6)) / 2e-6
    hits = 0
    h = 2 * np.pi / n
    for a, b in pairs_theta:
        i0, j0 = int(round(a / h)), int(round(b / h))
        ii = (i0 + np.arange(-cells - 1, cells + 2)) % n
        jj = (j0 + np.arange(-cells - 1, cells + 2)) % n
        delta = p[ii][:, None, :] - p[jj][None, :, :]
        vals = np.einsum("ijk,ijk->ij", delta, np.cross(dp[ii][:, None, :], dp[jj][None, :, :]))
        sign = vals > 0
        if sign.any() and not sign.all():
            hits += 1
    return hits / max(len(pairs_theta), 1)


def _check_params(kind, defaults, given):
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        expected = ", ".join(defaults) or "none"
        raise ValueError(f"unknown parameter(s) {', '.join(unknown)} for {kind}; expected {expected}")


def make_case(kind, n_samples=720, **params):
    """Build a :class:`SyntheticCase`; see ``KINDS``."""
    theta = 2 * np.pi * np.arange(n_samples) / n_samples
    if kind == "cylinder":
        p = dict(radius=1.0, phi_max=1.2, height=1.0, skew=0.15, wobble=0.3)
        _check_params(kind, p, params)
        p.update(params)
        if not 0 < p["phi_max"] + abs(p["wobble"]) < np.pi:
            raise ValueError("profile angle must stay inside (-pi, pi)")
        fn = lambda t: _cylinder_point(t, p["radius"], p["phi_max"], p["height"], p["skew"], p["wobble"])
        partner = _LevelPartner(lambda t: _cylinder_profile(t, p["phi_max"], p["wobble"]))
        curve = BoundaryCurve(fn(theta))
        corr = [_pairs_from_partner(theta, curve, partner)]
        return SyntheticCase(kind, curve, theta, corr, 1, params=p, surface_samplers=[_pair_sampler(fn, partner)],
                             closed_form_abs_H=1.0 / (2 * p["radius"]), param_fn=fn)
    if kind == "tangent_strip":
        p = dict(span=0.8, v0=1.0, width=0.4, skew=0.1, pitch=0.5, wobble=0.2)
        _check_params(kind, p, params)
        p.update(params)
        if p["width"] + abs(p["skew"]) >= p["v0"]:
            raise ValueError("strip must stay away from the edge of regression (v0 > width + |skew|)")
        fn = lambda t: _strip_point(t, p["span"], p["v0"], p["width"], p["skew"], p["pitch"], p["wobble"])
        partner = _LevelPartner(lambda t: _strip_coords(t, p["span"], p["v0"], p["width"], p["skew"], p["wobble"])[0])
        curve = BoundaryCurve(fn(theta))
        corr = [_pairs_from_partner(theta, curve, partner)]
        return SyntheticCase(kind, curve, theta, corr, 1, params=p, surface_samplers=[_pair_sampler(fn, partner)],
                             param_fn=fn)
    if kind == "two_solution":
        return _two_solution(theta, **params)
    if kind.startswith("negative_"):
        _check_params(kind, {}, params)
    if kind == "negative_planar":
        curve = BoundaryCurve(np.stack([np.cos(theta), np.sin(theta), 0 * theta], -1))
        return SyntheticCase(kind, curve, theta, [], 0, negative_control=True, params={"shape": "unit circle"})
    if kind == "negative_square":
        per = max(n_samples // 4, 2)
        corners = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], float)
        pts = []
        for k in range(4):
            a, b = corners[k], corners[(k + 1) % 4]
            for j in range(per):
                pts.append(a + (b - a) * j / per)
        curve = BoundaryCurve(np.array(pts), [0, per, 2 * per, 3 * per])
        return SyntheticCase(kind, curve, theta, [], 0, negative_control=True, params={"shape": "unit square"})
    raise ValueError(f"unknown case kind {kind!r}; expected one of {', '.join(KINDS)}")


def _two_solution(theta, eps=0.2, mu=0.15, scan_n=2048):
    """Closed curve on both z = x^2 + eps x^3 and z = 1 - y^2 + mu y^3.

    The curve is the lift of the planar oval x^2 + eps x^3 + y^2 - mu y^3 = 1,
    so each of the two parabolic cylinders restricted to the oval's interior is
    a developable filling.  Rulings of the first join equal-x points, rulings
    of the second equal-y points.
    """
    fn = lambda t: _oval_point(t, eps, mu)
    curve = BoundaryCurve(fn(theta))

    def coord(t, axis):
        r = _oval_radius(np.atleast_1d(t), eps, mu)[0]
        return r * (np.cos(t) if axis == 0 else np.sin(t))

    # parameters where x is extremal (rulings along y pinch there) and where y is
    x_ext = [_argext(lambda t: coord(t, 0), c) for c in (0.0, np.pi)]
    y_ext = [_argext(lambda t: coord(t, 1), c) for c in (np.pi / 2, 3 * np.pi / 2)]

    def partner_fn(axis, ext):
        a, b = sorted(ext)

        def partner(t):
            target = coord(t, axis)
            if a < t < b:
                lo, hi = b, a + 2 * np.pi
            else:
                lo, hi = a, b
            return brentq(lambda u: coord(u, axis) - target, lo + 1e-12, hi - 1e-12, xtol=1e-14) % (2 * np.pi)

        return partner, (a, b)

    to_s = _theta_to_s(theta, curve)
    corr, theta_pairs = [], []
    for axis, ext in ((0, x_ext), (1, y_ext)):
        partner, (a, b) = partner_fn(axis, ext)
        inner = theta[(theta > a + 1e-3) & (theta < b - 1e-3)]
        tp = np.array([partner(t) for t in inner])
        theta_pairs.append(np.stack([inner, tp], -1))
        # the pinch ends pair each extremum with itself
        full = np.concatenate([[a], inner, [b]])
        fullp = np.concatenate([[a], tp, [b]])
        corr.append(np.stack([to_s(full), to_s(fullp)], -1))
    frac = min(independent_scan(fn, tp_, n=scan_n) for tp_ in theta_pairs)
    if frac < 1.0:
        raise CaseConstructionFailed(f"independent scan placed only {frac:.1%} of a known correspondence on D = 0")

    def sampler_for(axis, ext):
        partner, (a, b) = partner_fn(axis, ext)

        def sampler(nt, nl):
            ts = np.linspace(a, b, nt)
            tp = np.array([partner(t) for t in ts[1:-1]])
            tp = np.concatenate([[a], tp, [b]])
            P, Q = fn(ts), fn(tp)
            lam = np.linspace(0, 1, nl)
            pts = P[:, None, :] + lam[None, :, None] * (Q - P)[:, None, :]
            # rulings are straight in the plane projection; lift onto the cylinder
            x, y = pts[..., 0], pts[..., 1]
            z = x**2 + eps * x**3 if axis == 0 else 1 - y**2 + mu * y**3
            return np.stack([x, y, z], -1).reshape(-1, 3)

        return sampler

    case = SyntheticCase("two_solution", curve, theta, corr, 2, params=dict(eps=eps, mu=mu),
                         surface_samplers=[sampler_for(0, x_ext), sampler_for(1, y_ext)], param_fn=fn)
    return case


def _argext(f, t0, h=1e-4):
    """Local extremum of a smooth scalar function near t0 via Newton on f'."""
    t = t0
    for _ in range(50):
        d1 = (f(t + h) - f(t - h)) / (2 * h)
        d2 = (f(t + h) - 2 * f(t) + f(t - h)) / h**2
        step = d1 / d2
        t -= step
        if abs(step) < 1e-13:
            break
    return t % (2 * np.pi)


def write_case(case, curve_path, sidecar_path):
    with open(curve_path, "w") as fh:
        json.dump(case.curve_json(), fh)
        fh.write("\n")
    with open(sidecar_path, "w") as fh:
        json.dump(case.sidecar(), fh, indent=2, sort_keys=True)
        fh.write("\n")
