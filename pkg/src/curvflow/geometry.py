"""Discrete geometry of closed polygonal curves.

All quantities follow the flowing finite volume layout: edges (primal
volumes) carry lengths, tangents, angles and curvatures; vertices carry the
dual-volume quantities marked with a star.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import CurveError, DegenerateFoldError, OrientationError, ZeroLengthEdgeError


@dataclass(frozen=True)
class PolygonalCurve:
    """Closed polygon with vertices ``x_1..x_N`` stored as an ``(N, 2)`` array.

    The closing edge from ``x_N`` back to ``x_1`` is implicit.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise CurveError(f"vertices must have shape (N, 2), got {v.shape}")
        if v.shape[0] < 3:
            raise CurveError(f"need at least 3 vertices, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise CurveError("vertices must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return self.vertices.shape[0]

    @property
    def n(self):
        return self.vertices.shape[0]

    def translated(self, shift):
        return PolygonalCurve(self.vertices + np.asarray(shift, dtype=float))

    def scaled(self, factor):
        return PolygonalCurve(self.vertices * factor)

    def rotated(self, angle):
        c, s = np.cos(angle), np.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        return PolygonalCurve(self.vertices @ rot.T)

    def rolled(self, shift):
        return PolygonalCurve(np.roll(self.vertices, shift, axis=0))


@dataclass(frozen=True)
class CurveGeometry:
    """Derived per-step quantities of a polygonal curve.

    Edge arrays (length N, index ``j`` is edge ``j+1``): ``edge_lengths``,
    ``unit_tangents``, ``edge_curvatures``, ``edge_midpoints``.
    Vertex arrays (length N, index ``j`` is vertex ``j+1``): ``dual_lengths``,
    ``vertex_curvatures``, ``vertex_normals``.
    ``lifted_angles`` holds nu_0..nu_{N+2} and ``dual_angles`` holds
    nu*_0..nu*_{N+1}, so their 1-based indices are the array indices.
    """

    edge_lengths: np.ndarray
    unit_tangents: np.ndarray
    lifted_angles: np.ndarray
    dual_angles: np.ndarray
    edge_curvatures: np.ndarray
    vertex_curvatures: np.ndarray
    dual_lengths: np.ndarray
    edge_midpoints: np.ndarray
    vertices: np.ndarray
    total_length: float

    @property
    def n(self):
        return self.edge_lengths.shape[0]

    @property
    def edge_angles(self):
        """nu_1..nu_N."""
        return self.lifted_angles[1 : self.n + 1]

    @property
    def vertex_angles(self):
        """nu*_1..nu*_N."""
        return self.dual_angles[1 : self.n + 1]

    @property
    def vertex_normals(self):
        a = self.vertex_angles
        return np.column_stack((-np.sin(a), np.cos(a)))


def lift_tangent_angles(tangents):
    """Continuous tangent angles nu_0..nu_{N+2} for N unit tangents.

    nu_1 is taken in [0, 2*pi); every later angle is obtained from its
    predecessor by the signed turning between consecutive tangents.
    Raises :class:`DegenerateFoldError` when two consecutive tangents point in
    exactly opposite directions.
    """
    t = np.ascontiguousarray(tangents, dtype=float)
    if t.ndim != 2 or t.shape[1] != 2 or t.shape[0] < 3:
        raise CurveError("tangents must have shape (N, 2) with N >= 3")
    nu, code, idx = _kernels.lift_angles(t)
    if code == _kernels.ANTIPODAL:
        raise DegenerateFoldError(idx)
    return nu


def _geometry_arrays(X):
    out = _kernels.geometry(X)
    code, idx = out[8], out[9]
    if code == _kernels.ZERO_EDGE:
        raise ZeroLengthEdgeError(idx)
    if code == _kernels.ANTIPODAL:
        raise DegenerateFoldError(idx)
    return out


def derive_geometry(curve):
    X = curve.vertices if isinstance(curve, PolygonalCurve) else np.ascontiguousarray(curve, float)
    r, t, nu, nustar, k, kstar, rstar, mid, _, _ = _geometry_arrays(X)
    return CurveGeometry(
        edge_lengths=r,
        unit_tangents=t,
        lifted_angles=nu,
        dual_angles=nustar,
        edge_curvatures=k,
        vertex_curvatures=kstar,
        dual_lengths=rstar,
        edge_midpoints=mid,
        vertices=X,
        total_length=float(r.sum()),
    )


def enclosed_area(curve):
    """Shoelace area; positive for counter-clockwise vertex order."""
    X = curve.vertices if isinstance(curve, PolygonalCurve) else np.asarray(curve, float)
    Y = np.roll(X, -1, axis=0)
    return 0.5 * float(np.sum(X[:, 0] * Y[:, 1] - X[:, 1] * Y[:, 0]))


def polygon_length(curve):
    X = curve.vertices if isinstance(curve, PolygonalCurve) else np.asarray(curve, float)
    return float(np.sum(np.linalg.norm(X - np.roll(X, 1, axis=0), axis=1)))


def check_orientation(curve):
    if enclosed_area(curve) <= 0.0:
        raise OrientationError("curve must be positively (counter-clockwise) oriented")


def regular_polygon(n, radius=1.0, center=(0.0, 0.0), phase=0.0):
    u = 2.0 * np.pi * np.arange(1, n + 1) / n + phase
    pts = radius * np.column_stack((np.cos(u), np.sin(u))) + np.asarray(center, float)
    return PolygonalCurve(pts)


def ellipse_polygon(n, a, b, eta=1.0):
    """Vertices (a cos 2 pi u_i, b sin 2 pi u_i) scaled by ``eta`` at u_i = i/n."""
    u = 2.0 * np.pi * np.arange(1, n + 1) / n
    return PolygonalCurve(eta * np.column_stack((a * np.cos(u), b * np.sin(u))))
