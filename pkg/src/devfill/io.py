"""File formats: curve JSON/CSV input, deterministic JSON output, solution reports."""

from __future__ import annotations

import csv
import io as _io
import json
import math
import re
from pathlib import Path

import numpy as np

from .curve import BoundaryCurve
from .errors import CurveFormatError


# -- curve input ---------------------------------------------------------------

def _last_key_before(text, pos):
    keys = re.findall(r'"([A-Za-z_][A-Za-z0-9_]*)"\s*:', text[:pos])
    return keys[-1] if keys else None


def parse_curve_json(text, source="<string>"):
    """Return (points, corners) from a ``{points: [...], corners: [...]}`` document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        key = _last_key_before(text, exc.pos)
        if key != "points" and '"points"' not in text[:exc.pos]:
            where = " (field 'points' is missing)"
        else:
            where = f" inside field '{key}'" if key else ""
        raise CurveFormatError(f"{source}: line {exc.lineno} column {exc.colno}{where}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise CurveFormatError(f"{source}: top level must be an object with field 'points'")
    if "points" not in doc:
        raise CurveFormatError(f"{source}: missing field 'points'")
    pts = doc["points"]
    if not isinstance(pts, list):
        raise CurveFormatError(f"{source}: field 'points' must be a list")
    rows = []
    for i, p in enumerate(pts):
        if not isinstance(p, list) or len(p) != 3:
            raise CurveFormatError(f"{source}: points[{i}] must be a list of 3 numbers")
        for j, x in enumerate(p):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise CurveFormatError(f"{source}: points[{i}][{j}] is not a finite number: {x!r}")
        rows.append([float(x) for x in p])
    corners = doc.get("corners", [])
    if not isinstance(corners, list):
        raise CurveFormatError(f"{source}: field 'corners' must be a list of indices")
    for k, c in enumerate(corners):
        if isinstance(c, bool) or not isinstance(c, int) or not 0 <= c < len(rows):
            raise CurveFormatError(f"{source}: corners[{k}] = {c!r} is not a point index")
    return np.array(rows, float).reshape(-1, 3), [int(c) for c in corners]


def parse_curve_csv(text, source="<string>"):
    """Rows ``x,y,z[,corner]``; an optional header row is skipped."""
    rows, corners = [], []
    reader = csv.reader(_io.StringIO(text))
    for lineno, rec in enumerate(reader, start=1):
        rec = [f.strip() for f in rec]
        if not rec or all(f == "" for f in rec) or rec[0].startswith("#"):
            continue
        if lineno == 1 and rec[0].lower() in ("x", "px"):
            continue
        if len(rec) not in (3, 4):
            raise CurveFormatError(f"{source}: line {lineno}: expected 3 or 4 fields, found {len(rec)}")
        vals = []
        for j, f in enumerate(rec[:3]):
            try:
                v = float(f)
            except ValueError:
                raise CurveFormatError(f"{source}: line {lineno} field {j + 1}: cannot parse {f!r} as a number") from None
            if not math.isfinite(v):
                raise CurveFormatError(f"{source}: line {lineno} field {j + 1}: value is not finite")
            vals.append(v)
        if len(rec) == 4:
            flag = rec[3].lower()
            if flag in ("1", "true", "yes", "corner"):
                corners.append(len(rows))
            elif flag not in ("0", "false", "no", ""):
                raise CurveFormatError(f"{source}: line {lineno} field 4: corner flag must be 0/1, got {rec[3]!r}")
        rows.append(vals)
    return np.array(rows, float).reshape(-1, 3), corners


def read_curve(path):
    """Load a BoundaryCurve from ``.json`` or ``.csv``; format sniffed when the suffix is unknown."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CurveFormatError(f"{path}: {exc.strerror}") from None
    suffix = path.suffix.lower()
    if suffix == ".json" or (suffix != ".csv" and text.lstrip().startswith("{")):
        pts, corners = parse_curve_json(text, str(path))
    else:
        pts, corners = parse_curve_csv(text, str(path))
    return BoundaryCurve(pts, corners)


def curve_document(curve):
    return {"points": curve.points.tolist(), "corners": [int(c) for c in curve.corners]}


def write_curve_json(curve, path):
    write_json(curve_document(curve), path)


# -- deterministic JSON ----------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj):
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(obj, path):
    Path(path).write_text(dumps(obj))


# -- solution reports --------------------------------------------------------------

def surface_record(surface, index, mesh_file=None):
    res = surface.residuals
    return {
        "index": index,
        "mesh": mesh_file,
        "residuals": res.as_dict() if res is not None else None,
        "mean_curvature_range": list(surface.H_range),
        "min_ruling_gap_relative": surface.min_ruling_gap,
        "provenance": [list(p) for p in surface.provenance],
        "correspondence": surface.path.tolist(),
    }


def solution_report(curve, surfaces, mesh_files, extra=None):
    doc = {
        "count": len(surfaces),
        "length": curve.length,
        "boundary": curve_document(curve),
        "solutions": [surface_record(s, i, m) for i, (s, m) in enumerate(zip(surfaces, mesh_files))],
    }
    if extra:
        doc.update(extra)
    return doc


def load_solution_report(path):
    """Return (curve, [(index, correspondence array)]) from a solve/continue report."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise CurveFormatError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CurveFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    for key in ("boundary", "solutions"):
        if key not in doc:
            raise CurveFormatError(f"{path}: missing field '{key}'")
    pts, corners = parse_curve_json(json.dumps(doc["boundary"]), f"{path}:boundary")
    sols = []
    for k, s in enumerate(doc["solutions"]):
        if "correspondence" not in s:
            raise CurveFormatError(f"{path}: solutions[{k}] missing field 'correspondence'")
        sols.append((s.get("index", k), np.asarray(s["correspondence"], float)))
    return BoundaryCurve(pts, corners), sols
