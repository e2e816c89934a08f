"""SVG contour plot of the zero set in the normalised parameter square."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed ids and no timestamp so reruns give the same file
_RC = {
    "svg.hashsalt": "devfill",
    "svg.fonttype": "none",
    "path.simplify": False,
    "font.size": 9,
}


def _broken_polyline(v, closed):
    """Unit-square polyline with NaN breaks where the vertices wrap around the torus."""
    if closed and len(v):
        v = np.vstack([v, v[:1]])
    jumps = np.flatnonzero(np.abs(np.diff(v, axis=0)).max(axis=1) > 0.5)
    return np.insert(v, jumps + 1, np.nan, axis=0)


def degenerate_points(zero_set, report=None):
    """Nodes, flagged contour vertices and (when given) torsion zeros and incidences, in (s, s~)."""
    pts = [np.asarray(zero_set.nodes, float).reshape(-1, 2)]
    for c in zero_set.curves:
        if c.flagged:
            pts.append(np.asarray(c.vertices, float)[c.flagged])
    if report is not None:
        z = np.asarray(report.torsion_zeros, float)
        pts.append(np.stack([z, z], -1).reshape(-1, 2))
        pts.append(np.asarray(report.tangent_incidences, float).reshape(-1, 2))
    return np.vstack(pts)


def contour_figure(zero_set, report=None, title=None):
    L = zero_set.length
    with plt.rc_context(_RC):
        fig = plt.figure(figsize=(6, 6))
        ax = fig.add_axes([0.12, 0.1, 0.8, 0.8])
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_aspect("equal")
        ax.set_xlabel("s / L")
        ax.set_ylabel("s~ / L")
        if title:
            ax.set_title(title)
        ax.plot([0, 1], [0, 1], color="0.75", lw=0.6, gid="diagonal")
        for k, c in enumerate(zero_set.corner_params):
            x = c / L
            ax.axvline(x, color="tab:gray", ls="--", lw=0.8, gid=f"corner-s-{k}")
            ax.axhline(x, color="tab:gray", ls="--", lw=0.8, gid=f"corner-t-{k}")
        for k, c in enumerate(zero_set.curves):
            p = _broken_polyline(np.asarray(c.vertices, float) / L, c.closed)
            ax.plot(p[:, 0], p[:, 1], color="tab:blue", lw=1.0, gid=f"zero-curve-{k}")
        deg = degenerate_points(zero_set, report) / L
        if len(deg):
            ax.plot(deg[:, 0], deg[:, 1], ls="none", marker="x", ms=5, color="tab:red", gid="degenerate")
    return fig


def write_contour_svg(zero_set, path, report=None, title=None):
    fig = contour_figure(zero_set, report, title)
    with plt.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
