"""Input parsing (bodies, functions, grids) and deterministic report/SVG output."""

import csv
import json

import numpy as np

from .core import HPolytope, VPolygon
from .errors import ParseError, RollingBallError, ValidationError
from .funcreg import PCQFunction
from .morphology import BallBody


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}", field="input", path=str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", field="input", line=exc.lineno, column=exc.colno) from exc


def _matrix(value, field, ndim):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{field} must be numeric", field=field) from exc
    if arr.ndim != ndim:
        raise ValidationError(f"{field} must have {ndim} dimension(s)", field=field)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{field} must be finite", field=field)
    return arr


def body_from_dict(data):
    """Build a body from ``{"type": "hpolytope" | "vpolygon" | "box" | "ball", ...}``."""
    if not isinstance(data, dict):
        raise ValidationError("body must be a JSON object", field="type")
    kind = data.get("type")
    if kind == "hpolytope":
        if "halfspaces" not in data:
            raise ValidationError("missing halfspaces", field="halfspaces")
        rows = data["halfspaces"]
        if not isinstance(rows, list) or not rows:
            raise ValidationError("halfspaces must be a non-empty list", field="halfspaces")
        width = None
        for i, row in enumerate(rows):
            arr = _matrix(row, f"halfspaces[{i}]", 1)
            if width is None:
                width = arr.size
            if arr.size != width or width < 2:
                raise ValidationError("rows must be [a_1, ..., a_n, b] of equal length", field=f"halfspaces[{i}]")
        H = np.asarray(rows, dtype=float)
        return HPolytope(H[:, :-1], H[:, -1])
    if kind == "vpolygon":
        if "vertices" not in data:
            raise ValidationError("missing vertices", field="vertices")
        V = _matrix(data["vertices"], "vertices", 2)
        if V.shape[1] != 2:
            raise ValidationError("vertices must be 2D points", field="vertices")
        return VPolygon(V)
    if kind == "box":
        for key in ("lo", "hi"):
            if key not in data:
                raise ValidationError(f"missing {key}", field=key)
        return HPolytope.box(_matrix(data["lo"], "lo", 1), _matrix(data["hi"], "hi", 1))
    if kind == "ball":
        for key in ("center", "radius"):
            if key not in data:
                raise ValidationError(f"missing {key}", field=key)
        radius = data["radius"]
        if not isinstance(radius, (int, float)) or not radius > 0:
            raise ValidationError("radius must be a positive number", field="radius")
        return BallBody.ball(_matrix(data["center"], "center", 1), float(radius))
    raise ValidationError(f"unknown body type {kind!r}", field="type")


def function_from_dict(data):
    if not isinstance(data, dict) or "pieces" not in data:
        raise ValidationError("missing pieces", field="pieces")
    pieces = data["pieces"]
    if not isinstance(pieces, list) or not pieces:
        raise ValidationError("pieces must be a non-empty list", field="pieces")
    out = []
    n = None
    for i, p in enumerate(pieces):
        if not isinstance(p, dict):
            raise ValidationError("piece must be an object", field=f"pieces[{i}]")
        for key in ("Q", "a", "b"):
            if key not in p:
                raise ValidationError(f"missing {key}", field=f"pieces[{i}].{key}")
        a = _matrix(p["a"], f"pieces[{i}].a", 1)
        Q = _matrix(p["Q"], f"pieces[{i}].Q", 2)
        b = _matrix(p["b"], f"pieces[{i}].b", 0)
        n = a.size if n is None else n
        if a.size != n:
            raise ValidationError("slope dimension mismatch", field=f"pieces[{i}].a")
        if Q.shape != (n, n):
            raise ValidationError("Q must be n x n", field=f"pieces[{i}].Q")
        out.append((Q, a, float(b)))
    try:
        return PCQFunction(out)
    except ValidationError as exc:
        piece = exc.context.get("piece")
        if piece is not None:
            exc.context["field"] = f"pieces[{piece}].Q"
        raise


def read_grid_csv(path):
    """Rows ``x_1, ..., x_n, φ``; a non-numeric first row is treated as a header."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise ParseError(f"cannot read {path}", field="input") from exc
    if rows:
        try:
            [float(v) for v in rows[0]]
        except ValueError:
            rows = rows[1:]
    if len(rows) < 2:
        raise ValidationError("grid needs at least two rows", field="rows")
    try:
        data = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise ParseError(f"non-numeric grid entry: {exc}", field="rows") from exc
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValidationError("rows must be x_1..x_n, phi with equal length", field="rows")
    return data[:, :-1], data[:, -1]


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_report(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))


def error_object(exc):
    if isinstance(exc, RollingBallError):
        return to_jsonable(exc.to_dict())
    return {"error": type(exc).__name__, "message": str(exc)}


# SVG ---------------------------------------------------------------------

def _fmt(v):
    return f"{v:.6f}"


def opening_svg(dec, size=480, pad=20):
    """Polygon boundary, contact segments and rounding arcs of a 2D decomposition."""
    V = dec.polygon.vertices
    lo, hi = V.min(axis=0), V.max(axis=0)
    scale = (size - 2 * pad) / float(np.max(hi - lo))

    def pt(p):
        return _fmt(pad + (p[0] - lo[0]) * scale), _fmt(size - pad - (p[1] - lo[1]) * scale)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">']
    poly = " ".join(",".join(pt(v)) for v in V)
    parts.append(f'<polygon points="{poly}" fill="none" stroke="black" stroke-width="1"/>')
    for s in dec.segments:
        (x1, y1), (x2, y2) = pt(s[0]), pt(s[1])
        parts.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="blue" stroke-width="2"/>')
    for a in dec.arcs:
        P = a.points(24)
        path = "M " + " L ".join(" ".join(pt(p)) for p in P)
        parts.append(f'<path d="{path}" fill="none" stroke="red" stroke-width="2"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def curves_svg(x, curves, size=480, pad=20):
    """Polylines of 1D functions; ``curves`` maps a colour to sampled values."""
    x = np.asarray(x, dtype=float)
    ys = np.concatenate([np.asarray(v, dtype=float) for v in curves.values()])
    ylo, yhi = float(ys.min()), float(ys.max())
    sx = (size - 2 * pad) / float(x.max() - x.min())
    sy = (size - 2 * pad) / max(yhi - ylo, 1e-12)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">']
    for colour, y in curves.items():
        pts = " ".join(f"{_fmt(pad + (a - x.min()) * sx)},{_fmt(size - pad - (b - ylo) * sy)}" for a, b in zip(x, y))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def mask_svg(nodes, mask, box, size=480, pad=20):
    """Grid nodes in a 2D box, filled where ``mask`` holds."""
    sx = (size - 2 * pad) / float(box[0, 1] - box[0, 0])
    sy = (size - 2 * pad) / float(box[1, 1] - box[1, 0])
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">']
    for p, m in zip(nodes, mask):
        if m:
            cx = pad + (p[0] - box[0, 0]) * sx
            cy = size - pad - (p[1] - box[1, 0]) * sy
            parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="1" fill="green"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
