"""Zero-set extraction for the bitangency field on the periodic parameter grid.

Marching squares over the torus, with every edge crossing refined onto the true
zero set of D by safeguarded Newton iteration along its grid edge.  Cells inside
the diagonal exclusion band or touching a corner parameter line are skipped, so
zero curves terminate there.  Saddle cells whose centre value is nearly zero
become degree-4 nodes (transverse self-intersections of the zero set).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bitangency import classify_many, periodic_distance, value_and_grad
from .errors import DegenerateField

END_BAND = "band"
END_CORNER = "corner"
END_NODE = "node"
END_OPEN = "open"

_SADDLE_RATIO = 0.05
_MAX_ITERS = 50


@dataclass
class ZeroCurve:
    """Polyline component of {D = 0}; vertices are (s, s~) reduced mod L."""

    vertices: np.ndarray
    labels: list
    closed: bool
    ends: tuple = (None, None)
    end_nodes: tuple = (None, None)
    flagged: list = field(default_factory=list)

    def __len__(self):
        return len(self.vertices)


@dataclass
class ZeroSet:
    curves: list
    nodes: np.ndarray
    length: float
    spacing: float
    delta: float
    corner_params: tuple
    min_gradient: float

    def to_json(self):
        return {
            "length": self.length,
            "spacing": self.spacing,
            "delta": self.delta,
            "corner_params": list(self.corner_params),
            "min_gradient_along_contours": self.min_gradient,
            "nodes": [[float(a), float(b)] for a, b in self.nodes],
            "curves": [
                {
                    "closed": c.closed,
                    "ends": list(c.ends),
                    "vertices": [[float(a), float(b)] for a, b in c.vertices],
                    "labels": list(c.labels),
                    "flagged": list(c.flagged),
                }
                for c in self.curves
            ],
        }


def refine_on_edges(curve, lo, hi, fixed, axis, tol):
    """Safeguarded Newton for D = 0 along grid edges.

    ``axis`` 0 moves the first parameter in [lo, hi] with the second fixed;
    axis 1 the reverse.  Returns (roots, converged mask).
    """
    lo = lo.astype(float).copy()
    hi = hi.astype(float).copy()

    def f(x, fixed):
        a, b = (x, fixed) if axis == 0 else (fixed, x)
        d, g = value_and_grad(curve, a, b)
        return d, g[..., axis]

    flo, _ = f(lo, fixed)
    fhi, _ = f(hi, fixed)
    x = np.where(fhi != flo, lo - flo * (hi - lo) / (fhi - flo), 0.5 * (lo + hi))
    x = np.clip(x, lo, hi)
    neg_lo = flo < 0
    done = np.zeros(len(x), bool)
    for _ in range(_MAX_ITERS):
        act = ~done
        if not act.any():
            break
        fx, gx = f(x[act], fixed[act])
        xa, la, ha = x[act], lo[act], hi[act]
        same = (fx < 0) == neg_lo[act]
        la = np.where(same, xa, la)
        ha = np.where(same, ha, xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xa - fx / gx
        bad = ~np.isfinite(xn) | (xn <= la) | (xn >= ha)
        xn = np.where(bad, 0.5 * (la + ha), xn)
        conv = (np.abs(fx) < tol) | (ha - la < 1e-15 * (1 + np.abs(xa)))
        x[act] = np.where(conv, xa, xn)
        lo[act], hi[act] = la, ha
        done[np.flatnonzero(act)[conv]] = True
    return x, done


def _excluded_cells(field_):
    n = field_.n
    band = field_.excluded_nodes()
    cell = band | np.roll(band, -1, 0) | np.roll(band, -1, 1) | np.roll(np.roll(band, -1, 0), -1, 1)
    rows = field_.corner_rows()
    if rows:
        mark = np.zeros(n, bool)
        mark[rows] = True
        cell = cell | mark[:, None] | mark[None, :]
    return cell


def extract_zero_set(curve, field_, tol_scale=1.0):
    n = field_.n
    L = field_.length
    h = field_.spacing
    V = field_.values
    tol = 1e-15 * L**3 * tol_scale
    excluded = _excluded_cells(field_)
    live = ~excluded
    if not live.any():
        return ZeroSet([], np.empty((0, 2)), L, h, field_.delta, field_.corner_params, float("nan"))
    vmax = np.abs(V)[live].max()
    if vmax < 1e-12 * L**3:
        raise DegenerateField("bitangency field vanishes identically (planar curve?)")

    pos = V > 0
    # edges between (i,j)-(i+1,j): "ih"; between (i,j)-(i,j+1): "iv"
    cross_ih = pos != np.roll(pos, -1, 0)
    cross_iv = pos != np.roll(pos, -1, 1)
    need_ih = live | np.roll(live, 1, 1)      # bottom edge of cell (i,j) or top of (i,j-1)
    need_iv = live | np.roll(live, 1, 0)      # left edge of cell (i,j) or right of (i-1,j)
    cross_ih &= need_ih
    cross_iv &= need_iv

    s = field_.params
    ii, jj = np.nonzero(cross_ih)
    x_ih, ok_ih = refine_on_edges(curve, s[ii], s[ii] + h, s[jj], 0, tol)
    pts_ih = np.stack([x_ih, s[jj]], -1)
    ii2, jj2 = np.nonzero(cross_iv)
    x_iv, ok_iv = refine_on_edges(curve, s[jj2], s[jj2] + h, s[ii2], 1, tol)
    pts_iv = np.stack([s[ii2], x_iv], -1)

    pts = np.mod(np.concatenate([pts_ih, pts_iv]), L)
    ok = np.concatenate([ok_ih, ok_iv])
    id_ih = -np.ones((n, n), int)
    id_ih[ii, jj] = np.arange(len(ii))
    id_iv = -np.ones((n, n), int)
    id_iv[ii2, jj2] = len(ii) + np.arange(len(ii2))

    adj = {}
    node_pts = []

    def link(a, b):
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)

    e0 = id_ih
    e1 = np.roll(id_iv, -1, 0)
    e2 = np.roll(id_ih, -1, 1)
    e3 = id_iv
    count = (e0 >= 0).astype(int) + (e1 >= 0) + (e2 >= 0) + (e3 >= 0)
    ci, cj = np.nonzero(live & (count > 0))
    for i, j in zip(ci, cj):
        es = [e0[i, j], e1[i, j], e2[i, j], e3[i, j]]
        present = [e for e in es if e >= 0]
        if len(present) == 2:
            link(*present)
            continue
        # saddle cell
        sc, tc = (s[i] + 0.5 * h) % L, (s[j] + 0.5 * h) % L
        dc, _ = value_and_grad(curve, np.array([sc]), np.array([tc]))
        corners = np.array([V[i, j], V[(i + 1) % n, j], V[(i + 1) % n, (j + 1) % n], V[i, (j + 1) % n]])
        if abs(dc[0]) < _SADDLE_RATIO * np.abs(corners).max():
            nid = len(pts) + len(node_pts)
            node_pts.append((sc, tc))
            for e in es:
                link(nid, e)
        elif (dc[0] > 0) == (V[i, j] > 0):
            link(es[0], es[1])
            link(es[2], es[3])
        else:
            link(es[0], es[3])
            link(es[1], es[2])

    all_pts = np.concatenate([pts, np.asarray(node_pts, float).reshape(-1, 2)])
    n_cross = len(pts)
    visited = set()
    polylines = []

    def walk(start, nxt):
        path = [start, nxt]
        visited.add(frozenset((start, nxt)))
        prev, cur = start, nxt
        while len(adj.get(cur, ())) == 2 and cur != start:
            a, b = adj[cur]
            step = b if a == prev else a
            key = frozenset((cur, step))
            if key in visited:
                break
            visited.add(key)
            path.append(step)
            prev, cur = cur, step
        return path

    for v in sorted(adj):
        if len(adj[v]) != 2:
            for w in adj[v]:
                if frozenset((v, w)) not in visited:
                    polylines.append(walk(v, w))
    for v in sorted(adj):
        for w in adj[v]:
            if frozenset((v, w)) not in visited:
                polylines.append(walk(v, w))

    curves = []
    band_reach = field_.delta + 2.5 * h
    min_grad = np.inf
    for path in polylines:
        closed = path[0] == path[-1] and len(adj.get(path[0], ())) == 2
        ids = path[:-1] if closed else path
        verts = all_pts[ids]
        ends = [None, None]
        end_nodes = [None, None]
        if not closed:
            for k, vid in enumerate((path[0], path[-1])):
                if vid >= n_cross:
                    ends[k], end_nodes[k] = END_NODE, vid - n_cross
                    continue
                p = all_pts[vid]
                if periodic_distance(p[0], p[1], L) < band_reach:
                    ends[k] = END_BAND
                elif field_.corner_params and min(
                        min(periodic_distance(p[0], c, L), periodic_distance(p[1], c, L))
                        for c in field_.corner_params) < 2.5 * h:
                    ends[k] = END_CORNER
                else:
                    ends[k] = END_OPEN
        cross_ids = [v for v in ids if v < n_cross]
        flagged = [int(k) for k, v in enumerate(ids) if v < n_cross and not ok[v]]
        labels = [c.label if c is not None else "unrefined" for c in classify_many(curve, verts[:, 0], verts[:, 1])]
        _, g = value_and_grad(curve, verts[:, 0], verts[:, 1])
        if cross_ids:
            min_grad = min(min_grad, float(np.linalg.norm(g, axis=-1).min()))
        curves.append(ZeroCurve(verts, labels, bool(closed), tuple(ends), tuple(end_nodes), flagged))
    return ZeroSet(curves, np.asarray(node_pts, float).reshape(-1, 2), L, h, field_.delta,
                   field_.corner_params, float(min_grad))
