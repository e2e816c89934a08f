"""Ruled surfaces spanned by boundary chords, and their validation.

A surface is described by its correspondence path (s(t), s~(t)) in the
parameter square; the ruling at t is the chord from g(s(t)) to g(s~(t)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bitangency import full_hessian, triple, value_and_grad
from .curve import _segment_distances
from .errors import FoldOver, IncidenceDegenerate, MetricDegenerate

RESIDUAL_TOL = 1e-5
PARALLEL_SINE = 1e-6


def bitangent_plane(curve, s, t):
    """Plane tangent to the curve at g(s) and g(t): returns (point, unit normal)."""
    p = curve.evaluate(s)
    q = curve.evaluate(t)
    ts = curve.evaluate(s, 1)
    tt = curve.evaluate(t, 1)
    n = np.cross(ts, tt)
    if np.linalg.norm(n) < PARALLEL_SINE:
        n = np.cross(ts, q - p)
        if np.linalg.norm(n) < PARALLEL_SINE * max(np.linalg.norm(q - p), 1e-300):
            raise IncidenceDegenerate(f"tangents and chord are collinear at ({s:.6g}, {t:.6g})")
    return p, n / np.linalg.norm(n)


def plane_normals(curve, S, T):
    """Vectorized :func:`bitangent_plane` normals, signs made continuous along the path."""
    p = curve.evaluate(S)
    q = curve.evaluate(T)
    ts = curve.evaluate(S, 1)
    tt = curve.evaluate(T, 1)
    n = np.cross(ts, tt)
    alt = np.cross(ts, q - p)
    weak = np.linalg.norm(n, axis=-1) < PARALLEL_SINE
    n = np.where(weak[:, None], alt, n)
    norm = np.linalg.norm(n, axis=-1)
    n = n / np.where(norm > 0, norm, 1.0)[:, None]
    for k in range(1, len(n)):
        if np.dot(n[k], n[k - 1]) < 0:
            n[k] = -n[k]
    pinch = np.flatnonzero(norm == 0)
    regular = np.flatnonzero(norm > 0)
    if len(pinch) and len(regular):
        # coincident endpoints: the limiting tangent plane is the osculating plane,
        # signed to agree with the nearest regular sample
        B = curve.frenet_arrays(S[pinch])[2]
        near = regular[np.abs(regular[None, :] - pinch[:, None]).argmin(1)]
        B[(B * n[near]).sum(-1) < 0] *= -1
        n[pinch] = B
    return n


def project_to_zero(curve, S, T, iters=12):
    """Minimal-norm Newton projection of parameter pairs onto D = 0."""
    S = np.array(S, float)
    T = np.array(T, float)
    for _ in range(iters):
        d, g = value_and_grad(curve, S, T)
        gg = (g**2).sum(-1)
        step = np.where(gg > 0, d / np.where(gg > 0, gg, 1.0), 0.0)
        S = S - step * g[:, 0]
        T = T - step * g[:, 1]
    return S, T


@dataclass
class Residuals:
    developability: float
    normal_variation: float
    tangency: float
    passed: bool

    def as_dict(self):
        return {"developability": self.developability, "normal_variation_rad": self.normal_variation,
                "tangency_over_L": self.tangency, "passed": self.passed}


@dataclass
class DevelopableSurface:
    """Ruled patch over a correspondence path.

    ``path`` is unwrapped: s increasing, s~ decreasing.  Pinch ends (zero-length
    rulings) are allowed at either end.
    """

    curve: object
    path: np.ndarray
    normals: np.ndarray = None
    provenance: list = field(default_factory=list)
    residuals: Residuals = None
    H_samples: np.ndarray = None
    embedded: bool = None
    min_ruling_gap: float = None
    last_step: object = None

    def __post_init__(self):
        self.path = np.asarray(self.path, float)
        if self.normals is None:
            self.normals = plane_normals(self.curve, self.path[:, 0], self.path[:, 1])

    @property
    def rulings(self):
        a = self.curve.evaluate(self.path[:, 0])
        b = self.curve.evaluate(self.path[:, 1])
        return np.stack([a, b], 1)

    def ruling_lengths(self):
        r = self.rulings
        return np.linalg.norm(r[:, 1] - r[:, 0], axis=-1)

    def live(self):
        """Indices of rulings with positive length."""
        return np.flatnonzero(self.ruling_lengths() > 1e-9 * self.curve.length)

    @property
    def H_range(self):
        if self.H_samples is None or not len(self.H_samples):
            return (float("nan"), float("nan"))
        return (float(self.H_samples.min()), float(self.H_samples.max()))

    def transformed(self, curve):
        return DevelopableSurface(curve, self.path.copy(), provenance=list(self.provenance))


# -- validation ----------------------------------------------------------------

def _path_derivatives(path):
    """d(s)/dt and d(s~)/dt by finite differences over cumulative parameter arclength."""
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    t = np.concatenate([[0.0], np.cumsum(seg)])
    # a positive but tiny segment can vanish in the running sum
    keep = np.concatenate([[True], np.diff(t) > 0])
    t, p = t[keep], path[keep]
    ds = np.gradient(p[:, 0], t, edge_order=2 if len(t) > 2 else 1)
    dt = np.gradient(p[:, 1], t, edge_order=2 if len(t) > 2 else 1)
    return keep, ds, dt


def validate_developable(surface, tol=RESIDUAL_TOL):
    curve = surface.curve
    L = curve.length
    keep, ds, dt = _path_derivatives(surface.path)
    P = surface.path[keep]
    gs = curve.evaluate(P[:, 0])
    gt = curve.evaluate(P[:, 1])
    ts = curve.evaluate(P[:, 0], 1, side="right")
    tt = curve.evaluate(P[:, 1], 1, side="left")
    w = gt - gs
    wl = np.linalg.norm(w, axis=-1)
    live = wl > 1e-9 * L
    c1 = ts * ds[:, None]
    w1 = tt * dt[:, None] - c1
    num = np.abs(triple(c1, w, w1))
    c1n = np.linalg.norm(c1, axis=-1)
    # |w'| alone can vanish (locally cylindrical rulings), so scale by the larger rate
    den = np.maximum(c1n, 1e-300) * np.maximum(wl, 1e-300) * np.maximum(np.linalg.norm(w1, axis=-1), c1n)
    ok = live & (c1n > 1e-12)
    dev = float((num / den)[ok].max()) if ok.any() else 0.0
    if not ok.any() and live.any():
        # fan from a fixed corner: the cone over the curve is developable
        dev = 0.0
    n0 = np.cross(ts, w)
    n1 = np.cross(tt, w)
    cosang = np.abs((n0 * n1).sum(-1)) / np.maximum(np.linalg.norm(n0, axis=-1) * np.linalg.norm(n1, axis=-1), 1e-300)
    nv = float(np.arccos(np.clip(cosang[live], -1, 1)).max()) if live.any() else 0.0
    normals = surface.normals[keep]
    tan = np.maximum.reduce([np.abs((normals * w).sum(-1)),
                             L * np.abs((normals * ts).sum(-1)) * (wl > 0),
                             L * np.abs((normals * tt).sum(-1)) * (wl > 0)])
    tangency = float(tan[live].max() / L) if live.any() else 0.0
    res = Residuals(dev, nv, tangency, bool(dev < tol and nv < tol and tangency < 1e-6))
    surface.residuals = res
    return res


def singular_rulings(surface, rel_tol=1e-9):
    """Indices of rulings carrying an interior singular point (edge of regression).

    Along the ruling c + v w the surface normal direction is (c' + v w') x w,
    which on a developable is a scalar multiple of the plane normal, linear in
    v.  A sign change of that scalar over 0 < v < 1 is a cusp inside the patch.
    """
    curve = surface.curve
    L = curve.length
    keep, ds, dt = _path_derivatives(surface.path)
    P = surface.path[keep]
    n = surface.normals[keep]
    ts = curve.evaluate(P[:, 0], 1, side="right")
    tt = curve.evaluate(P[:, 1], 1, side="left")
    w = curve.evaluate(P[:, 1]) - curve.evaluate(P[:, 0])
    c1 = ts * ds[:, None]
    w1 = tt * dt[:, None] - c1
    a = (np.cross(c1, w) * n).sum(-1)
    b = a + (np.cross(w1, w) * n).sum(-1)
    scale = np.linalg.norm(w, axis=-1) * np.maximum(np.linalg.norm(c1, axis=-1), np.linalg.norm(w1, axis=-1))
    live = np.linalg.norm(w, axis=-1) > 1e-9 * L
    thr = rel_tol * scale
    bad = live & (np.abs(a) > thr) & (np.abs(b) > thr) & (np.sign(a) != np.sign(b))
    return np.flatnonzero(keep)[bad]


def _implicit_jets(curve, s, t):
    """Derivatives of c(x) = g(s) and w(x) = g(t) - g(s) along the zero set.

    Batched over ``s`` and ``t``.  The path parameter x is, per point,
    whichever of s, t has the better conditioned implicit derivative.
    """
    s = np.atleast_1d(np.asarray(s, float))
    t = np.atleast_1d(np.asarray(t, float))
    (g0, g1, g2, _), (h0, h1, h2, _) = curve.jet(s), curve.jet(t)
    _, g = value_and_grad(curve, s, t)
    H = full_hessian(curve, s, t)
    by_s = np.abs(g[:, 1]) >= np.abs(g[:, 0])
    # x = s: s~ = r(s);  x = s~: s = r(s~)
    num = np.where(by_s, g[:, 0], g[:, 1])
    den = np.where(by_s, g[:, 1], g[:, 0])
    r1 = -num / den
    hxx = np.where(by_s, H[:, 0, 0], H[:, 1, 1])
    hyy = np.where(by_s, H[:, 1, 1], H[:, 0, 0])
    r2 = -(hxx + 2 * H[:, 0, 1] * r1 + hyy * r1**2) / den
    R1, R2 = r1[:, None], r2[:, None]
    bs = by_s[:, None]
    c1 = np.where(bs, g1, g1 * R1)
    c2 = np.where(bs, g2, g2 * R1**2 + g1 * R2)
    w1 = np.where(bs, h1 * R1 - g1, h1 - c1)
    w2 = np.where(bs, h2 * R1**2 + h1 * R2 - g2, h2 - c2)
    return c1, c2, h0 - g0, w1, w2


def _mean_curvature_batch(curve, S, T, normals, v):
    """H at ruling fraction ``v`` for zero-set points (S, T); NaN where the metric degenerates."""
    c1, c2, w, w1, w2 = _implicit_jets(curve, S, T)
    v = np.asarray(v, float)[..., None]
    pt = c1 + v * w1
    ptt = c2 + v * w2
    E = (pt * pt).sum(-1)
    F = (pt * w).sum(-1)
    G = (w * w).sum(-1)
    det = E * G - F * F
    e = (ptt * normals).sum(-1)
    f_ = (w1 * normals).sum(-1)
    bad = np.abs(det) < 1e-14 * curve.length**4
    return np.where(bad, np.nan, (e * G - 2 * f_ * F) / (2 * np.where(bad, 1.0, det)))


def mean_curvature(surface, t, v):
    """Mean curvature at path parameter ``t`` (fractional path index) and ruling fraction ``v``.

    The sign follows the stored plane normal at the nearest path sample.
    """
    curve = surface.curve
    path = surface.path
    k = int(np.clip(np.floor(t), 0, len(path) - 2))
    f = t - k
    p = (1 - f) * path[k] + f * path[k + 1]
    S, T = project_to_zero(curve, [p[0]], [p[1]])
    n = surface.normals[int(round(np.clip(t, 0, len(path) - 1)))]
    H = _mean_curvature_batch(curve, S, T, n[None], np.array([v]))
    if np.isnan(H[0]):
        raise MetricDegenerate(f"first fundamental form degenerate at t={t:.4g}, v={v:.3g}")
    return float(H[0])


def sample_mean_curvature(surface, count=40, vs=(0.25, 0.5, 0.75)):
    """H on interior samples away from pinch ends; stored on the surface."""
    L = surface.curve.length
    lens = surface.ruling_lengths()
    idx = np.flatnonzero(lens > 0.05 * L)
    if len(idx) < 3:
        idx = np.flatnonzero(lens > 1e-3 * L)
    if len(idx) == 0:
        surface.H_samples = np.array([])
        return surface.H_samples
    picks = np.unique(np.linspace(idx[0], idx[-1], min(count, len(idx))).round().astype(int))
    S, T = project_to_zero(surface.curve, surface.path[picks, 0], surface.path[picks, 1])
    n = surface.normals[picks]
    H = np.stack([_mean_curvature_batch(surface.curve, S, T, n, np.full(len(picks), v)) for v in vs], -1)
    H = H.ravel()
    surface.H_samples = H[~np.isnan(H)]
    return surface.H_samples


def check_embedded(surface, tol=1e-6, max_rulings=400):
    """Pairwise separation of non-adjacent rulings; stores and returns the verdict.

    Separations are measured relative to the shorter of the two rulings, since
    neighbouring rulings close to a pinch approach each other like h^2.
    """
    L = surface.curve.length
    R = surface.rulings
    live = surface.live()
    if len(live) > max_rulings:
        live = live[np.unique(np.linspace(0, len(live) - 1, max_rulings).round().astype(int))]
    A, B = R[live, 0], R[live, 1]
    lens = np.linalg.norm(B - A, axis=-1)
    # shrink to the open segment so touching endpoints on the boundary do not count
    shrink = 1e-3
    A2, B2 = A + shrink * (B - A), B - shrink * (B - A)
    m = len(live)
    best = np.inf
    for i in range(m):
        j = np.arange(i + 2, m)
        if not len(j):
            continue
        d = _segment_distances(A2[i][None], B2[i][None], A2[j], B2[j])
        best = min(best, float((d / np.minimum(lens[i], lens[j])).min()))
    surface.min_ruling_gap = best
    surface.embedded = bool(best > tol)
    return surface.embedded


# -- meshing -----------------------------------------------------------------

@dataclass
class Mesh:
    vertices: np.ndarray
    faces: np.ndarray

    def write_obj(self, path):
        with open(path, "w") as fh:
            for v in self.vertices:
                fh.write("v %.12g %.12g %.12g\n" % tuple(v))
            for f in self.faces:
                fh.write("f %d %d %d\n" % tuple(f + 1))


def resample_path(surface, count):
    """``count`` points along the live part of the path, projected back onto D = 0."""
    live = surface.live()
    P = surface.path[live[0]:live[-1] + 1]
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    t = np.concatenate([[0.0], np.cumsum(seg)])
    target = np.linspace(0, t[-1], count)
    S = np.interp(target, t, P[:, 0])
    T = np.interp(target, t, P[:, 1])
    S2, T2 = project_to_zero(surface.curve, S[1:-1], T[1:-1])
    S[1:-1], T[1:-1] = S2, T2
    return np.stack([S, T], -1)


def mesh(surface, resolution=(64, 8)):
    """Structured triangulation with ``resolution = (rulings, points per ruling)``."""
    nt, nv = resolution
    if nt < 2 or nv < 2:
        raise ValueError("mesh resolution must be at least 2 x 2")
    curve = surface.curve
    L = curve.length
    P = resample_path(surface, nt)
    A = curve.evaluate(P[:, 0])
    B = curve.evaluate(P[:, 1])
    v = np.linspace(0, 1, nv)
    verts = A[:, None, :] + v[None, :, None] * (B - A)[:, None, :]
    normals = plane_normals(curve, P[:, 0], P[:, 1])
    ref = surface.normals[len(surface.normals) // 2]
    if np.dot(normals[len(normals) // 2], ref) < 0:
        normals = -normals
    idx = np.arange(nt * nv).reshape(nt, nv)
    faces = []
    V = verts.reshape(-1, 3)
    for i in range(nt - 1):
        nref = normals[i] + normals[i + 1]
        for j in range(nv - 1):
            for tri in ((idx[i, j], idx[i + 1, j], idx[i + 1, j + 1]), (idx[i, j], idx[i + 1, j + 1], idx[i, j + 1])):
                a, b, c = V[list(tri)]
                nrm = np.cross(b - a, c - a)
                area = 0.5 * np.linalg.norm(nrm)
                if area <= 1e-12 * L**2:
                    raise FoldOver(f"degenerate triangle between rulings {i} and {i + 1}")
                if np.dot(nrm, nref) < 0:
                    tri = (tri[0], tri[2], tri[1])
                faces.append(tri)
    F = np.array(faces, int)
    # consistent orientation: adjacent strip normals must agree
    fn = np.cross(V[F[:, 1]] - V[F[:, 0]], V[F[:, 2]] - V[F[:, 0]])
    fn /= np.linalg.norm(fn, axis=1)[:, None]
    strips = fn.reshape(nt - 1, -1, 3).mean(1)
    if np.any((strips[1:] * strips[:-1]).sum(-1) < 0):
        raise FoldOver("mesh normals flip between adjacent strips")
    return Mesh(V, F)


# -- mesh distances ------------------------------------------------------------

def point_triangle_distance(P, A, B, C):
    """Euclidean distance from points P to triangles ABC (row-wise, broadcasting)."""
    ab, ac, ap = B - A, C - A, P - A
    d1 = (ab * ap).sum(-1)
    d2 = (ac * ap).sum(-1)
    bp = P - B
    d3 = (ab * bp).sum(-1)
    d4 = (ac * bp).sum(-1)
    cp = P - C
    d5 = (ab * cp).sum(-1)
    d6 = (ac * cp).sum(-1)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2
    tiny = 1e-300
    # interior projection by default, then overwrite with the edge and vertex regions
    den = np.where(np.abs(va + vb + vc) > tiny, va + vb + vc, tiny)
    v = vb / den
    w = vc / den
    Q = A + v[..., None] * ab + w[..., None] * ac
    e_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    t_bc = (d4 - d3) / np.where(np.abs((d4 - d3) + (d5 - d6)) > tiny, (d4 - d3) + (d5 - d6), tiny)
    Q = np.where(e_bc[..., None], B + t_bc[..., None] * (C - B), Q)
    e_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    t_ac = d2 / np.where(np.abs(d2 - d6) > tiny, d2 - d6, tiny)
    Q = np.where(e_ac[..., None], A + t_ac[..., None] * ac, Q)
    e_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    t_ab = d1 / np.where(np.abs(d1 - d3) > tiny, d1 - d3, tiny)
    Q = np.where(e_ab[..., None], A + t_ab[..., None] * ab, Q)
    Q = np.where(((d6 >= 0) & (d5 <= d6))[..., None], C, Q)
    Q = np.where(((d3 >= 0) & (d4 <= d3))[..., None], B, Q)
    Q = np.where(((d1 <= 0) & (d2 <= 0))[..., None], A, Q)
    return np.linalg.norm(P - Q, axis=-1)


def _probe_points(m):
    V, F = m.vertices, m.faces
    a, b, c = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
    return np.concatenate([V, (a + b + c) / 3, 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)])


def directed_distance(points, m, candidates=24):
    """max over ``points`` of the distance to mesh ``m``.

    Candidate triangles come from the nearest centroids, so the result can
    only overestimate the exact value.
    """
    from scipy.spatial import cKDTree

    V, F = m.vertices, m.faces
    A, B, C = V[F[:, 0]], V[F[:, 1]], V[F[:, 2]]
    k = min(candidates, len(F))
    _, idx = cKDTree((A + B + C) / 3).query(points, k=k)
    idx = idx.reshape(len(points), k)
    worst = 0.0
    for lo in range(0, len(points), 4096):
        sl = slice(lo, lo + 4096)
        J = idx[sl]
        d = point_triangle_distance(points[sl][:, None, :], A[J], B[J], C[J]).min(1)
        worst = max(worst, float(d.max()))
    return worst


def hausdorff_distance(m1, m2):
    """Symmetric Hausdorff distance between two triangle meshes (probe-point approximation)."""
    return max(directed_distance(_probe_points(m1), m2), directed_distance(_probe_points(m2), m1))


def grid_mesh(points, nt, nv):
    """Triangulate an (nt * nv, 3) array of ruled-grid samples."""
    idx = np.arange(nt * nv).reshape(nt, nv)
    a, b, c, d = idx[:-1, :-1], idx[1:, :-1], idx[1:, 1:], idx[:-1, 1:]
    F = np.concatenate([np.stack([a, b, c], -1).reshape(-1, 3), np.stack([a, c, d], -1).reshape(-1, 3)])
    return Mesh(np.asarray(points, float).reshape(-1, 3), F)
