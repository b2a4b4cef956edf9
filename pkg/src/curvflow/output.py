"""Snapshot CSV and deterministic SVG rendering."""

import base64
import csv
import io

import numpy as np

from .errors import PreconditionError

SNAPSHOT_HEADER = ("t", "i", "x", "y", "k", "nu", "alpha", "r")


def _g(v):
    return f"{v:.17g}"


def snapshots_csv(trajectory):
    """One row per vertex per snapshot, ordered by (t, i); 17 significant digits.

    ``k``, ``nu`` and ``r`` belong to edge i (from x_{i-1} to x_i), ``alpha``
    to vertex i.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SNAPSHOT_HEADER)
    for snap in trajectory.snapshots:
        X = snap.curve.vertices
        for i in range(X.shape[0]):
            w.writerow([
                _g(snap.t), i + 1, _g(X[i, 0]), _g(X[i, 1]), _g(snap.curvatures[i]),
                _g(snap.angles[i]), _g(snap.alpha[i]), _g(snap.edge_lengths[i]),
            ])
    return buf.getvalue()


def points_csv(placements):
    """``placements``: mapping label -> (N, 2) array."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "i", "x", "y"])
    for label, X in placements.items():
        for i, (x, y) in enumerate(np.asarray(X)):
            w.writerow([label, i + 1, _g(x), _g(y)])
    return buf.getvalue()


def _png_data_uri(intensities):
    from PIL import Image

    px = np.clip(np.rint(np.asarray(intensities) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(px, mode="L").save(buf, format="PNG", optimize=False)
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


def render_svg(curves=(), points=(), image=None, size=600, precision=4, stroke="#1f4e99"):
    """SVG document showing closed polylines and point markers.

    ``curves`` and ``points`` are sequences of ``(N, 2)`` vertex arrays (a
    :class:`~curvflow.stepper.Trajectory` is accepted for ``curves``).
    ``image`` is an optional :class:`~curvflow.segmentation.ImageField`
    drawn underneath, spanning its domain. Output depends only on the inputs.
    """
    if hasattr(curves, "snapshots"):
        curves = [s.curve.vertices for s in curves.snapshots]
    curves = [np.asarray(getattr(c, "vertices", c), dtype=float) for c in curves]
    points = [np.asarray(getattr(p, "vertices", p), dtype=float) for p in points]
    if not curves and not points:
        raise PreconditionError("nothing to render")
    if image is not None:
        x0, x1, y0, y1 = image.domain
    else:
        allpts = np.vstack(curves + points)
        (x0, y0), (x1, y1) = allpts.min(axis=0), allpts.max(axis=0)
        pad = 0.05 * max(x1 - x0, y1 - y0, 1e-12)
        x0, x1, y0, y1 = x0 - pad, x1 + pad, y0 - pad, y1 + pad
    span = max(x1 - x0, y1 - y0)
    scale = size / span
    width, height = (x1 - x0) * scale, (y1 - y0) * scale
    f = f"{{:.{precision}f}}"

    def xy(P):
        # flip y so that the picture is upright
        return " ".join(f"{f.format((x - x0) * scale)},{f.format((y1 - y) * scale)}" for x, y in P)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{f.format(width)}" height="{f.format(height)}" '
        f'viewBox="0 0 {f.format(width)} {f.format(height)}">',
        f'<rect width="{f.format(width)}" height="{f.format(height)}" fill="white"/>',
    ]
    if image is not None:
        out.append(f'<image x="0" y="0" width="{f.format(width)}" height="{f.format(height)}" '
                   f'preserveAspectRatio="none" href="{_png_data_uri(image.intensities)}"/>')
    for j, P in enumerate(curves):
        opacity = 1.0 if j == len(curves) - 1 else 0.5
        out.append(f'<polygon points="{xy(P)}" fill="none" stroke="{stroke}" '
                   f'stroke-width="1" stroke-opacity="{opacity:.2f}"/>')
    for P in points:
        for x, y in P:
            out.append(f'<circle cx="{f.format((x - x0) * scale)}" cy="{f.format((y1 - y) * scale)}" '
                       f'r="3" fill="#c0392b"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
