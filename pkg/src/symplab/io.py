"""Artifact writers: JSON-lines, CSV, SVG and a hashed manifest.

Every writer is deterministic: keys are sorted, floats use ``repr`` and no
timestamps are emitted unless asked for.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from datetime import datetime, timezone
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

MANIFEST = "manifest.json"


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
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    return obj


def dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))


def write_json(path, obj):
    path = Path(path)
    path.write_text(json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n")
    return path


def write_jsonl(path, records):
    path = Path(path)
    path.write_text("".join(dumps(r) + "\n" for r in records))
    return path


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    path = Path(path)
    path.write_text(buf.getvalue())
    return path


# -- SVG -------------------------------------------------------------------

ARC_COLOR = "#1f5fbf"
GATE_COLOR = "#d04020"
STABLE_COLOR = "#2f9f3f"


def _split_jumps(pts, period):
    """Cut a polyline wherever consecutive points jump by more than half a period."""
    pts = np.asarray(pts, float)
    if period is None or len(pts) < 2:
        return [pts]
    jump = np.any(np.abs(np.diff(pts, axis=0)) > 0.5 * np.asarray(period, float), axis=1)
    cuts = np.flatnonzero(jump) + 1
    return [p for p in np.split(pts, cuts) if len(p) > 1]


def svg_document(layers, bounds=((0.0, 1.0), (0.0, 1.0)), size=800, title=None, timestamp=False):
    """SVG text for ``layers``: dicts with ``points``, ``color``, optional ``width`` and ``period``.

    ``period`` wraps the points into the fundamental domain and breaks the
    line at the seams.
    """
    (x0, x1), (y0, y1) = bounds
    sx = size / (x1 - x0)
    h = size * (y1 - y0) / (x1 - x0)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{h:.0f}" '
        f'viewBox="0 0 {size} {h:.0f}">',
    ]
    if title:
        lines.append(f"<title>{escape(title)}</title>")
    if timestamp:
        lines.append(f"<metadata>{datetime.now(timezone.utc).isoformat()}</metadata>")
    lines.append(f'<rect x="0" y="0" width="{size}" height="{h:.0f}" fill="white" stroke="#888"/>')
    for layer in layers:
        pts = np.asarray(layer["points"], float)
        period = layer.get("period")
        if period is not None:
            period = np.broadcast_to(np.asarray(period, float), (2,))
            fin = np.isfinite(period)
            pts = pts.copy()
            pts[:, fin] = np.mod(pts[:, fin], period[fin])
        for piece in _split_jumps(pts, period):
            px = (piece[:, 0] - x0) * sx
            py = h - (piece[:, 1] - y0) * sx
            coords = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(px, py))
            lines.append(
                f'<polyline fill="none" stroke="{layer.get("color", ARC_COLOR)}" '
                f'stroke-width="{layer.get("width", 1.0)}" points="{coords}"/>'
            )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(path, layers, **kw):
    path = Path(path)
    path.write_text(svg_document(layers, **kw))
    return path


def curve_layers(curve, period=None):
    """One layer per segment of a closed curve, manifold arcs and gate segments colored apart."""
    out = []
    for kind, pts in curve.segments:
        color = GATE_COLOR if kind == "gate" else ARC_COLOR
        out.append({"points": pts, "color": color, "width": 2.0 if kind == "gate" else 1.0, "period": period})
    return out


# -- manifest ----------------------------------------------------------------

def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, files=None):
    """List every artifact under ``out_dir`` with its size and content hash."""
    out_dir = Path(out_dir)
    if files is None:
        files = [p for p in out_dir.rglob("*") if p.is_file() and p.name != MANIFEST]
    entries = sorted(
        ({"path": Path(p).relative_to(out_dir).as_posix(), "bytes": Path(p).stat().st_size, "sha256": sha256(p)}
         for p in files),
        key=lambda e: e["path"],
    )
    return write_json(out_dir / MANIFEST, {"files": entries})
