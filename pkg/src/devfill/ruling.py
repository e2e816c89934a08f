"""Assemble developable fillings from the zero set of the bitangency field.

A filling is a path in the parameter square along which one tangency point
moves forward and the other backward, starting and ending where the ruling
shrinks to a point (a pinch on the diagonal, or a corner), such that the two
tangency points together sweep the whole boundary exactly once.  Paths follow
monotone pieces of the zero set and may switch between pieces at shared
vertices, transverse crossings (straight through only) and corner parameter
lines (a ruling fan from the corner).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .bitangency import periodic_distance, value_and_grad
from .errors import GenericityFailure, SearchBudgetExceeded
from .surface import (DevelopableSurface, check_embedded, plane_normals, sample_mean_curvature,
                      singular_rulings, validate_developable)
from .zeroset import END_BAND, END_CORNER, END_NODE

log = logging.getLogger(__name__)

_TURN_COS = np.cos(np.radians(60.0))


@dataclass
class SolverConfig:
    grid: int = 512
    delta_frac: float = 0.02
    budget: int = 100_000
    tol_scale: float = 1.0
    pinch_h_min: float = 5e-5       # fraction of L
    dedup_tol: float = 1e-4         # fraction of L
    H_min: float = 1e-6             # times 1/L
    threads: int = 1


@dataclass
class BitangentArc:
    """Monotone piece of the zero set, oriented so s increases and s~ decreases.

    ``path`` is unwrapped (continuous, not reduced mod L).  ``start``/``end``
    describe how the piece terminates: ``("pinch", None)``, ``("split", key)``,
    ``("node", id)``, ``("corner", (axis, c))`` or ``("open", None)``.
    """

    path: np.ndarray
    normals: np.ndarray
    provenance: list
    start: tuple
    end: tuple

    @property
    def s_extent(self):
        return float(self.path[-1, 0] - self.path[0, 0])

    @property
    def t_extent(self):
        return float(self.path[0, 1] - self.path[-1, 1])


@dataclass
class FillingResult:
    surfaces: list
    rejected: list = field(default_factory=list)
    arcs: list = field(default_factory=list)
    candidates: int = 0
    expansions: int = 0
    partial: bool = False


def wrap(x, L):
    """Reduce to (-L/2, L/2]."""
    return x - L * np.round(x / L)


# -- arc tracing ---------------------------------------------------------------

def _filled_signs(d):
    s = np.sign(d)
    last = 0.0
    for k in range(len(s)):
        if s[k] == 0:
            s[k] = last
        else:
            last = s[k]
    first = next((x for x in s if x != 0), 0.0)
    s[s == 0] = first
    return s


def _monotone_pieces(V, labels):
    """Split an unwrapped polyline into runs with constant (sign ds, sign dt)."""
    d = np.diff(V, axis=0)
    ss = _filled_signs(d[:, 0].copy())
    st = _filled_signs(d[:, 1].copy())
    cuts = [0]
    for k in range(1, len(d)):
        if ss[k] != ss[k - 1] or st[k] != st[k - 1]:
            cuts.append(k)
        elif "incidence" in labels[k]:
            cuts.append(k)
    cuts.append(len(V) - 1)
    pieces = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b > a:
            pieces.append((a, b, ss[a], st[a]))
    return pieces


def extend_to_pinch(curve, s, t, at_start, h_min_frac=5e-5, ratio=0.75, h_newton_frac=1e-3):
    """Continue an arc end inside the diagonal band down to its pinch point.

    Along the continuation the two parameters are m -/+ h with h shrinking
    geometrically; m solves D(m - h, m + h) = 0 by Newton.  Since D is
    symmetric, m(h) is even in h.  D also vanishes like h^4 there, so below
    ``h_newton_frac * L`` Newton only sees rounding noise and m is taken from
    the fit m* + b h^2 + c h^4 through the last three solved points.  Returns
    the points (ordered along the arc) ending at (m*, m*), or ``None`` when
    the end does not close up on the diagonal.
    """
    L = curve.length
    gap = wrap(s - t, L) if at_start else wrap(t - s, L)
    if gap <= 0:
        return None
    h = 0.5 * gap
    behind = t if at_start else s
    m = behind + h
    h_min = h_min_frac * L
    h_newton = h_newton_frac * L
    hs, ms = [], []
    while True:
        h *= ratio
        if h < h_newton and len(hs) >= 3:
            h = hs[-1]
            break
        ok = False
        for _ in range(40):
            d, g = value_and_grad(curve, np.array([m - h]), np.array([m + h]))
            fp = g[0, 0] + g[0, 1]
            if fp == 0:
                break
            step = float(np.clip(d[0] / fp, -h, h))
            m -= step
            if abs(step) < 1e-11 * L:
                ok = True
                break
        if not ok and len(hs) >= 3:
            h = hs[-1]
            break   # noise floor reached early; extrapolate from the clean points
        if not ok or abs(wrap(m - (behind + 0.5 * gap), L)) > gap:
            return None
        hs.append(h)
        ms.append(m)
    x = np.array(hs[-3:]) ** 2
    A = np.stack([np.ones(3), x, x**2], -1)
    coef = np.linalg.solve(A, np.array(ms[-3:]))
    h *= ratio
    while h > h_min:
        hs.append(h)
        ms.append(float(coef @ [1.0, h * h, h**4]))
        h = max(h * ratio, h_min) if h > h_min * (1 + 1e-12) else 0.0
    hs, ms = np.array(hs), np.array(ms)
    m_star = float(coef[0])
    if at_start:
        P = np.vstack([np.stack([ms + hs, ms - hs], -1), [[m_star, m_star]]])[::-1]
        P[:, 0] += L * np.round((s - P[-1, 0]) / L)
        P[:, 1] += L * np.round((t - P[-1, 1]) / L)
    else:
        P = np.vstack([np.stack([ms - hs, ms + hs], -1), [[m_star, m_star]]])
        P[:, 0] += L * np.round((s - P[0, 0]) / L)
        P[:, 1] += L * np.round((t - P[0, 1]) / L)
    return P


def _snap_to_corner(curve, s, t, corners, from_below_s, from_above_t):
    """Move an arc end lying next to a corner line exactly onto it."""
    L = curve.length
    best = None
    for c in corners:
        for axis in (0, 1):
            x = s if axis == 0 else t
            d = periodic_distance(x, c, L)
            if best is None or d < best[0]:
                best = (d, axis, c)
    _, axis, c = best
    if axis == 0:
        cs = s + wrap(c - s, L)
        side = "left" if from_below_s else "right"
        y = t
        for _ in range(40):
            d, g = value_and_grad(curve, np.array([cs]), np.array([y]), side_s=side)
            if g[0, 1] == 0:
                return None
            step = float(d[0] / g[0, 1])
            y -= step
            if abs(step) < 1e-13 * L:
                return (cs, y), (0, c)
        return None
    ct = t + wrap(c - t, L)
    side = "right" if from_above_t else "left"
    x = s
    for _ in range(40):
        d, g = value_and_grad(curve, np.array([x]), np.array([ct]), side_t=side)
        if g[0, 0] == 0:
            return None
        step = float(d[0] / g[0, 0])
        x -= step
        if abs(step) < 1e-13 * L:
            return (x, ct), (1, c)
    return None


def trace_bitangent_arcs(curve, zero_set, report=None, h_min_frac=5e-5):
    """Monotone, oppositely oriented arcs of the zero set with plane normals.

    Arc ends in the diagonal band are continued to their pinch point; ends at
    corner lines are snapped onto the line.
    """
    if report is not None and not report.passed:
        raise GenericityFailure("curve fails the genericity report", report)
    L = curve.length
    arcs = []
    for ci, zc in enumerate(zero_set.curves):
        V = np.unwrap(zc.vertices, axis=0, period=L)
        labels = zc.labels
        if zc.closed:
            V = np.vstack([V, V[:1] + (V[-1] - V[0]) + wrap(V[0] - V[-1], L)])
            labels = list(labels) + [labels[0]]
        pieces = _monotone_pieces(V, labels)
        nseg = len(V) - 1
        for a, b, ss, st in pieces:
            if ss == st:
                continue
            P = V[a:b + 1].copy()
            idx = (a, b)

            def kind(vi, is_first):
                if zc.closed and len(pieces) == 1:
                    return ("loop", (ci,))
                if zc.closed and vi in (0, nseg):
                    return ("split", (ci, 0))
                if vi == 0 and not zc.closed:
                    e = zc.ends[0]
                    return (e, zc.end_nodes[0] if e == END_NODE else None)
                if vi == nseg and not zc.closed:
                    e = zc.ends[1]
                    return (e, zc.end_nodes[1] if e == END_NODE else None)
                return ("split", (ci, vi))

            ka, kb = kind(a, True), kind(b, False)
            if ss < 0:
                P = P[::-1]
                ka, kb = kb, ka
            arc_ends = [ka, kb]
            for k, at_start in ((0, True), (1, False)):
                kk = arc_ends[k]
                if kk[0] == END_BAND:
                    ext = extend_to_pinch(curve, *(P[0] if at_start else P[-1]), at_start, h_min_frac)
                    if ext is None:
                        arc_ends[k] = ("open", None)
                    else:
                        P = np.vstack([ext, P]) if at_start else np.vstack([P, ext])
                        arc_ends[k] = ("pinch", None)
                elif kk[0] == END_CORNER:
                    p = P[0] if at_start else P[-1]
                    snapped = _snap_to_corner(curve, p[0], p[1], zero_set.corner_params,
                                              from_below_s=not at_start, from_above_t=not at_start)
                    if snapped is None:
                        arc_ends[k] = ("open", None)
                    else:
                        q, line = snapped
                        P = np.vstack([[q], P]) if at_start else np.vstack([P, [q]])
                        arc_ends[k] = ("corner", line)
            normals = plane_normals(curve, P[:, 0], P[:, 1])
            arcs.append(BitangentArc(P, normals, [("zero-curve", ci, int(idx[0]), int(idx[1]))],
                                     tuple(arc_ends[0]), tuple(arc_ends[1])))
    return arcs


# -- covering search -----------------------------------------------------------

def _direction(P, at_end):
    seg = P[-1] - P[-2] if at_end else P[1] - P[0]
    n = np.linalg.norm(seg)
    return seg / n if n > 0 else seg


def _fan(curve, p, q, axis, spacing):
    """Points along a corner-line segment from p to q (excluding p)."""
    span = abs(q[1 - axis] - p[1 - axis])
    k = max(int(np.ceil(span / spacing)), 1)
    f = np.linspace(0, 1, k + 1)[1:]
    return p[None, :] + f[:, None] * (q - p)[None, :]


def _joins(curve, arcs, corners, spacing):
    """Outgoing connections per arc end: list of (next arc index, connector points)."""
    L = curve.length
    out = {i: [] for i in range(len(arcs))}
    for i, A in enumerate(arcs):
        kind, key = A.end
        for j, B in enumerate(arcs):
            if j == i:
                continue
            bk, bkey = B.start
            if kind in ("split", "node") and bk == kind and bkey == key:
                if kind == "node":
                    if np.dot(_direction(A.path, True), _direction(B.path, False)) < _TURN_COS:
                        continue
                out[i].append((j, np.empty((0, 2))))
            elif kind == "corner" and bk == "corner" and bkey == key:
                axis = key[0]
                p = A.path[-1].copy()
                q = B.path[0].copy()
                q += L * np.round((p - q) / L)
                q[axis] = p[axis]
                if axis == 0:
                    q[1] = p[1] - np.mod(p[1] - q[1], L)
                else:
                    q[0] = p[0] + np.mod(q[0] - p[0], L)
                out[i].append((j, _fan(curve, p, q, 1 - axis, spacing)))
    return out


def _corner_starts(arcs, L):
    """Arcs that can begin with a fan from a corner's diagonal point."""
    starts = []
    for j, B in enumerate(arcs):
        if B.start[0] != "corner":
            continue
        axis, c = B.start[1]
        q = B.path[0]
        if axis == 0:
            p = np.array([q[0], q[1] + np.mod(q[0] - q[1], L)])   # (c, c) above q along s~
        else:
            p = np.array([q[1] - np.mod(q[1] - q[0], L), q[1]])   # (c, c) left of q along s
        starts.append((j, p, axis))
    return starts


def coverage_defect(path, L):
    """|s-sweep + s~-sweep + end gaps - L| for an unwrapped oriented path."""
    A = path[-1, 0] - path[0, 0]
    B = path[0, 1] - path[-1, 1]
    g0 = np.mod(path[0, 0] - path[0, 1], L)
    g1 = np.mod(path[-1, 1] - path[-1, 0], L)
    g0 = min(g0, L - g0) if g0 > L / 2 else g0
    g1 = min(g1, L - g1) if g1 > L / 2 else g1
    return abs(A + B + g0 + g1 - L)


def correspondence_distance(P, Q, L):
    """Symmetric Hausdorff distance between two paths on the torus (point to polyline)."""

    def one_side(X, Y):
        a = Y[:-1]
        b = Y[1:]
        best = np.full(len(X), np.inf)
        for k in range(0, len(a), 512):
            aa, bb = a[k:k + 512], b[k:k + 512]
            d = wrap(X[:, None, :] - aa[None, :, :], L)
            seg = bb - aa
            sl = (seg**2).sum(-1)
            u = np.clip((d * seg[None]).sum(-1) / np.where(sl > 0, sl, 1.0), 0, 1)
            r = d - u[..., None] * seg[None]
            best = np.minimum(best, np.sqrt((r**2).sum(-1)).min(1))
        return best.max()

    P = np.unwrap(np.asarray(P, float), axis=0, period=L)
    Q = np.unwrap(np.asarray(Q, float), axis=0, period=L)
    if len(Q) < 2 or len(P) < 2:
        return float(np.max(np.abs(wrap(P[:, None] - Q[None], L))))
    return float(max(one_side(P, Q), one_side(Q, P)))


def mirror(path):
    """The same ruling family with the roles of the two tangency points swapped."""
    return path[::-1, ::-1].copy()


def canonical(path, L):
    """Orientation starting at the smaller parameter (mod L), shifted so the start lies in [0, L)."""
    a, b = np.mod(path[0], L), np.mod(path[-1, ::-1], L)
    tol = 1e-9 * L
    flip = b[0] < a[0] - tol or (abs(b[0] - a[0]) <= tol and b[1] < a[1] - tol)
    P = mirror(path) if flip else path.copy()
    P[:, 0] -= L * np.floor(P[0, 0] / L + 1e-12)
    P[:, 1] -= L * np.floor(P[0, 1] / L + 1e-12)
    return P


def _same_filling(P, Q, L, tol):
    return min(correspondence_distance(P, Q, L), correspondence_distance(P, mirror(Q), L)) < tol


def _search(curve, arcs, config):
    L = curve.length
    spacing = L / config.grid
    corners = tuple(float(b) for b in curve.breaks)
    joins = _joins(curve, arcs, corners, spacing)
    found = []
    expansions = 0
    partial = False

    starts = [(i, np.empty((0, 2))) for i, A in enumerate(arcs) if A.start[0] == "pinch"]
    for j, p, axis in _corner_starts(arcs, L):
        starts.append((j, np.vstack([[p], _fan(curve, p, arcs[j].path[0], 1 - axis, spacing)[:-1]])))

    def end_fans(A):
        if A.end[0] != "corner":
            return []
        axis, c = A.end[1]
        p = A.path[-1]
        if axis == 0:
            q = np.array([p[0], p[1] - np.mod(p[1] - p[0], L)])
        else:
            q = np.array([p[0] + np.mod(p[1] - p[0], L), p[1]])
        return [_fan(curve, p, q, 1 - axis, spacing)]

    stack = []
    for i, pre in starts:
        stack.append(([i], [pre, arcs[i].path]))
    while stack:
        expansions += 1
        if expansions > config.budget:
            partial = True
            break
        seq, pieces = stack.pop()
        last = arcs[seq[-1]]
        sweep = sum(p[-1, 0] - p[0, 0] + p[0, 1] - p[-1, 1] for p in pieces if len(p) > 1)
        if sweep > L * (1 + 1e-6):
            continue
        if last.end[0] == "pinch":
            found.append((seq, np.vstack(pieces)))
        for fan in end_fans(last):
            found.append((seq, np.vstack(pieces + [fan])))
        for j, conn in joins[seq[-1]]:
            if j in seq:
                continue
            nxt = arcs[j].path.copy()
            anchor = conn[-1] if len(conn) else pieces[-1][-1]
            nxt += L * np.round((anchor - nxt[0]) / L)
            stack.append((seq + [j], pieces + [conn, nxt]))
    # whole-boundary cones from a single corner
    for c in corners:
        p = np.array([c, c])
        q = np.array([c, c - L])
        found.append(([], np.vstack([[p], _fan(curve, p, q, 1, spacing)])))
    return found, expansions, partial


def _dedupe_points(P):
    keep = np.concatenate([[True], np.linalg.norm(np.diff(P, axis=0), axis=1) > 0])
    return P[keep]


def build_surface(curve, path, provenance=()):
    surf = DevelopableSurface(curve, _dedupe_points(path), provenance=list(provenance))
    return surf


def validate_candidate(surf, config):
    """Run every check; returns a rejection reason or ``None``."""
    L = surf.curve.length
    res = validate_developable(surf)
    if not res.passed:
        return f"residuals {res.as_dict()}"
    sing = singular_rulings(surf)
    if len(sing):
        return f"edge of regression inside the patch on {len(sing)} ruling(s)"
    H = sample_mean_curvature(surf)
    if not len(H):
        return "no interior mean-curvature samples"
    if np.abs(H).min() <= config.H_min / L or (H.min() < 0 < H.max()):
        return f"mean curvature vanishes or changes sign (range {H.min():.3g}..{H.max():.3g})"
    if not check_embedded(surf):
        return f"rulings intersect (min relative gap {surf.min_ruling_gap:.3g})"
    return None


def enumerate_fillings(curve, config=None, zero_set=None, report=None, force=False):
    """All validated developable fillings of ``curve``, deduplicated."""
    from .bitangency import sample_field
    from .genericity import genericity_report
    from .zeroset import extract_zero_set

    config = config or SolverConfig()
    if not force:
        report = report or genericity_report(curve)
        if not report.passed:
            raise GenericityFailure("curve fails the genericity report: " + "; ".join(report.reasons), report)
    if zero_set is None:
        field_ = sample_field(curve, config.grid, config.delta_frac, config.threads)
        zero_set = extract_zero_set(curve, field_, config.tol_scale)
    arcs = trace_bitangent_arcs(curve, zero_set, h_min_frac=config.pinch_h_min)
    found, expansions, partial = _search(curve, arcs, SolverConfig(**{**config.__dict__}))
    L = curve.length
    surfaces, rejected, seen = [], [], []
    for seq, path in found:
        if coverage_defect(path, L) > 1e-6 * L * config.tol_scale:
            continue
        prov = [p for i in seq for p in arcs[i].provenance]
        if any(_same_filling(path, q, L, config.dedup_tol * L) for q in seen):
            continue
        seen.append(path)
        surf = build_surface(curve, canonical(path, L), prov)
        reason = validate_candidate(surf, config)
        if reason is None:
            surfaces.append(surf)
        else:
            rejected.append((prov, reason))
    log.info("fillings: %d accepted, %d rejected, %d expansions", len(surfaces), len(rejected), expansions)
    result = FillingResult(surfaces, rejected, arcs, len(found), expansions, partial)
    if partial:
        raise SearchBudgetExceeded(f"covering search exceeded {config.budget} expansions", surfaces)
    return result
