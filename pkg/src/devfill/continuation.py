"""Track a validated filling while the boundary moves.

The correspondence (s, s~) is carried from the old boundary to the new one by
matching sample indices through the arc-length tables, then pulled back onto
the zero set of the new D by minimal-norm Newton steps, i.e. transversally to
the zero curve.  Pinch ends are rebuilt on the new curve and the result goes
through the same validation as a freshly enumerated filling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .bitangency import periodic_distance, value_and_grad
from .errors import ContinuationObstructed
from .ruling import (SolverConfig, coverage_defect, extend_to_pinch, validate_candidate, wrap)
from .surface import DevelopableSurface

TRUST_RADIUS = 0.05      # fraction of L
ZERO_TOL = 1e-8          # |D| / L^3 accepted after correction
_BAND = 0.02             # samples closer than this to the diagonal are rebuilt, not corrected


@dataclass
class ContinuationStep:
    previous: np.ndarray
    updated: np.ndarray
    iterations: np.ndarray
    success: bool
    max_displacement: float = 0.0
    max_residual: float = 0.0

    def to_json(self):
        return {
            "samples": int(len(self.updated)),
            "success": self.success,
            "max_displacement_over_L": self.max_displacement,
            "max_abs_D_over_L3": self.max_residual,
            "newton_iterations_max": int(self.iterations.max()) if len(self.iterations) else 0,
        }


def parameter_map(old, new):
    """Arc-length parameter on ``old`` -> parameter of the same material point on ``new``.

    With identical sampling (same point count and corners) samples are matched
    by index and the knot arc lengths are interpolated linearly in between;
    otherwise arc length is rescaled proportionally.
    """
    L0, L1 = old.length, new.length
    if len(old.points) == len(new.points) and tuple(old.corners) == tuple(new.corners):
        k0 = np.concatenate([old.knot_s, [L0]])
        k1 = np.concatenate([new.knot_s, [L1]])

        def f(s):
            s = np.asarray(s, float)
            turns = np.floor(s / L0)
            return np.interp(s - turns * L0, k0, k1) + turns * L1

        return f
    return lambda s: np.asarray(s, float) * (L1 / L0)


def boundary_distance(old, new, n=2048):
    """Symmetric Hausdorff distance between dense samples of two boundaries."""
    a = old.evaluate(np.linspace(0, old.length, n, endpoint=False))
    b = new.evaluate(np.linspace(0, new.length, n, endpoint=False))
    return max(cKDTree(b).query(a)[0].max(), cKDTree(a).query(b)[0].max())


def _correct(curve, S, T, iters=30):
    """Minimal-norm Newton onto D = 0; returns corrected pairs and per-sample iteration counts."""
    L = curve.length
    S, T = S.copy(), T.copy()
    count = np.zeros(len(S), int)
    done = np.zeros(len(S), bool)
    for _ in range(iters):
        d, g = value_and_grad(curve, np.mod(S, L), np.mod(T, L))
        done |= np.abs(d) < 1e-15 * L**3
        if done.all():
            break
        gg = (g**2).sum(-1)
        step = np.where(~done & (gg > 0), d / np.where(gg > 0, gg, 1.0), 0.0)
        S -= step * g[:, 0]
        T -= step * g[:, 1]
        count += ~done
    d, g = value_and_grad(curve, np.mod(S, L), np.mod(T, L))
    return S, T, count, np.abs(d), np.linalg.norm(g, axis=-1)


def continue_solution(surface, new_curve, trust_radius=TRUST_RADIUS, config=None, step_index=None):
    """Continue ``surface`` (on its curve) to ``new_curve``; returns the validated new surface.

    The step record is attached as ``result.last_step``.
    """
    config = config or SolverConfig()
    old = surface.curve
    L1 = new_curve.length
    gap = boundary_distance(old, new_curve)
    if gap > trust_radius * L1:
        raise ContinuationObstructed(
            f"boundary moved {gap / L1:.3g} L, beyond the trust radius {trust_radius:g} L", step=step_index)

    path = surface.path
    inner = periodic_distance(path[:, 0], path[:, 1], old.length) > _BAND * old.length
    if inner.sum() < 3:
        raise ContinuationObstructed("correspondence has no samples away from the diagonal", step=step_index)
    first, last = np.flatnonzero(inner)[[0, -1]]
    prev = path[first:last + 1]
    fmap = parameter_map(old, new_curve)
    S0, T0 = fmap(prev[:, 0]), fmap(prev[:, 1])
    S, T, its, res, grad = _correct(new_curve, S0, T0)

    disp = np.sqrt((S - S0) ** 2 + (T - T0) ** 2)
    step = ContinuationStep(prev.copy(), np.stack([S, T], -1), its, False,
                            float(disp.max() / L1), float(res.max() / L1**3))
    k = int(np.argmax(res))
    if res[k] > ZERO_TOL * L1**3:
        raise ContinuationObstructed(f"Newton did not converge (|D| = {res[k] / L1**3:.3g} L^3)",
                                     (float(S[k] % L1), float(T[k] % L1)), step_index)
    if disp.max() > trust_radius * L1:
        k = int(np.argmax(disp))
        raise ContinuationObstructed(f"correspondence moved {disp[k] / L1:.3g} L in one step",
                                     (float(S[k] % L1), float(T[k] % L1)), step_index)
    k = int(np.argmin(grad))
    if grad[k] < 1e-8 * L1**2:
        raise ContinuationObstructed("correspondence reached a critical point of D",
                                     (float(S[k] % L1), float(T[k] % L1)), step_index)
    if np.any(np.diff(S) < 0) or np.any(np.diff(T) > 0):
        k = int(np.argmax((np.diff(S) < 0) | (np.diff(T) > 0)))
        raise ContinuationObstructed("correspondence lost monotonicity (covering break)",
                                     (float(S[k] % L1), float(T[k] % L1)), step_index)

    P = np.stack([S, T], -1)
    ends = []
    for at_start, idx in ((True, 0), (False, -1)):
        was_pinch = abs(wrap(path[idx, 0] - path[idx, 1], old.length)) < 1e-9 * old.length
        if not was_pinch:
            ends.append(None)
            continue
        ext = extend_to_pinch(new_curve, P[idx, 0], P[idx, 1], at_start, config.pinch_h_min)
        if ext is None:
            raise ContinuationObstructed("pinch end did not close up on the new boundary",
                                         (float(P[idx, 0] % L1), float(P[idx, 1] % L1)), step_index)
        ends.append(ext)
    if ends[0] is not None:
        P = np.vstack([ends[0], P])
    if ends[1] is not None:
        P = np.vstack([P, ends[1]])

    if coverage_defect(P, L1) > 1e-6 * L1 * config.tol_scale:
        raise ContinuationObstructed(f"covering defect {coverage_defect(P, L1) / L1:.3g} L", step=step_index)
    result = DevelopableSurface(new_curve, P, provenance=list(surface.provenance) + [("continued", step_index)])
    reason = validate_candidate(result, config)
    if reason is not None:
        raise ContinuationObstructed(f"continued surface fails validation: {reason}", step=step_index)
    step.success = True
    result.last_step = step
    return result


def continue_along(surface, curves, trust_radius=TRUST_RADIUS, config=None):
    """Continue through a sequence of boundaries; returns (surfaces, steps)."""
    out, steps = [], []
    cur = surface
    for i, c in enumerate(curves):
        cur = continue_solution(cur, c, trust_radius, config, step_index=i)
        out.append(cur)
        steps.append(cur.last_step)
    return out, steps
