"""Static point placement on smooth closed curves.

Places N points on a parametric curve so that the shape-weighted relative
local length is uniform, and measures how well the inscribed polygon
approximates the curve's length and area.
"""

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .errors import PreconditionError, ShapeDegeneracyError
from .redistribution import POSITIVITY_FLOOR, ShapeSpec, eval_shape, shape_value

#: Panels of the composite Simpson rule used for reference constants.
QUADRATURE_PANELS = 20000


@dataclass(frozen=True, eq=False)
class ParametricCurve:
    """Closed curve x(l), l in [0, 1], with first and second derivatives.

    All three maps are vectorised over ``l`` and return ``(..., 2)`` arrays.
    """

    position: Callable
    derivative: Callable
    second_derivative: Callable
    name: str = "curve"
    area_closed_form: float = None
    # optional fast scalar (speed, curvature) at one parameter value
    scalar_metrics: Callable = None

    @classmethod
    def ellipse(cls, a, b):
        if not (a > 0 and b > 0):
            raise ValueError("semi-axes must be positive")
        w = 2.0 * np.pi

        def pos(l):
            z = w * np.asarray(l, dtype=float)
            return np.stack((a * np.cos(z), b * np.sin(z)), axis=-1)

        def d1(l):
            z = w * np.asarray(l, dtype=float)
            return w * np.stack((-a * np.sin(z), b * np.cos(z)), axis=-1)

        def d2(l):
            z = w * np.asarray(l, dtype=float)
            return -w * w * np.stack((a * np.cos(z), b * np.sin(z)), axis=-1)

        def metrics(l):
            z = w * l
            zeta = a * a * math.sin(z) ** 2 + b * b * math.cos(z) ** 2
            return w * math.sqrt(zeta), a * b / zeta**1.5

        return cls(pos, d1, d2, name=f"ellipse({a:g},{b:g})", area_closed_form=math.pi * a * b,
                   scalar_metrics=metrics)

    @classmethod
    def circle(cls, radius=1.0):
        return cls.ellipse(radius, radius)

    def speed(self, l):
        return np.linalg.norm(self.derivative(l), axis=-1)

    def tangent(self, l):
        d = self.derivative(l)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def curvature(self, l):
        d1, d2 = self.derivative(l), self.second_derivative(l)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / np.linalg.norm(d1, axis=-1) ** 3

    @cached_property
    def grid(self):
        return np.linspace(0.0, 1.0, QUADRATURE_PANELS + 1)

    def integrate(self, values):
        """Composite Simpson over the fixed [0, 1] grid."""
        return float(simpson(values, x=self.grid))

    @cached_property
    def length(self):
        return self.integrate(self.speed(self.grid))

    @cached_property
    def area(self):
        if self.area_closed_form is not None:
            return self.area_closed_form
        x, d = self.position(self.grid), self.derivative(self.grid)
        return 0.5 * self.integrate(x[:, 0] * d[:, 1] - x[:, 1] * d[:, 0])

    def locate(self, points):
        """Parameters of the nearest curve points and the distances to them."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        coarse = self.position(self.grid[:-1])
        d2 = ((P[:, None, :] - coarse[None, :, :]) ** 2).sum(-1)
        l = self.grid[np.argmin(d2, axis=1)]
        # Newton on (x(l) - p) . x'(l) = 0
        for _ in range(30):
            x, d1, dd = self.position(l), self.derivative(l), self.second_derivative(l)
            diff = x - P
            g = (diff * d1).sum(-1)
            h = (d1 * d1).sum(-1) + (diff * dd).sum(-1)
            step = np.where(h > 0, g / np.where(h > 0, h, 1.0), 0.0)
            l = l - step
            if np.max(np.abs(step)) < 1e-15:
                break
        l = np.mod(l, 1.0)
        return l, np.linalg.norm(self.position(l) - P, axis=-1)


def _phi_along(curve, spec, l):
    phi, _ = eval_shape(spec, curve.curvature(l))
    return np.broadcast_to(phi, np.shape(l))


def reparameterization(curve, spec, N, substeps=200):
    """Parameters l(u_i), u_i = i/N for i = 1..N, with r_phi = 1.

    Integrates dl/du = C / (g(l) phi(k(l))), C = integral of phi(k) g, with
    classical RK4. If l(1) misses 1 by more than 1e-6 the constant is
    rescaled by l(1) and the integration repeated once.
    """
    if N < 3:
        raise ValueError("need N >= 3")
    if substeps < 100:
        raise ValueError("use at least 100 RK4 substeps per output point")
    phi_grid = _phi_along(curve, spec, curve.grid)
    k_grid = curve.curvature(curve.grid)
    # an unfloored shape vanishes at every sign change of k, even between grid points
    crosses_zero = eval_shape(spec, 0.0)[0] <= POSITIVITY_FLOOR and np.any(np.diff(np.sign(k_grid)) != 0)
    if crosses_zero or not np.all(phi_grid > POSITIVITY_FLOOR):
        raise ShapeDegeneracyError(f"shape {spec.label} vanishes on {curve.name}")
    C = curve.integrate(phi_grid * curve.speed(curve.grid))

    if curve.scalar_metrics is not None:
        def rhs(l):
            g, k = curve.scalar_metrics(l)
            return C / (g * shape_value(spec, k))
    else:
        def rhs(l):
            return C / float(curve.speed(l) * _phi_along(curve, spec, l))

    def integrate():
        h = 1.0 / (N * substeps)
        l = 0.0
        out = np.empty(N)
        for i in range(N):
            for _ in range(substeps):
                k1 = rhs(l)
                k2 = rhs(l + 0.5 * h * k1)
                k3 = rhs(l + 0.5 * h * k2)
                k4 = rhs(l + h * k3)
                l += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            out[i] = l
        return out

    ls = integrate()
    if abs(ls[-1] - 1.0) > 1e-6:
        C /= ls[-1]
        ls = integrate()
    return ls


def reparameterize(curve, spec, N, substeps=200):
    """Points x(l(u_i)) with uniform shape-weighted relative local length."""
    return curve.position(reparameterization(curve, spec, N, substeps))


def crystalline_parameters(a, b, N):
    """Ellipse parameters whose unit tangent is (-sin 2 pi i/N, cos 2 pi i/N)."""
    if not (a > 0 and b > 0):
        raise ValueError("semi-axes must be positive")
    theta = 2.0 * np.pi * np.arange(1, N + 1) / N
    # (-a sin z, b cos z) parallel to (-sin theta, cos theta) <=> tan z = (b/a) tan theta,
    # with the quadrant of theta preserved
    z = np.arctan2(b * np.sin(theta), a * np.cos(theta))
    return np.mod(z / (2.0 * np.pi), 1.0)


def crystalline_points(a, b, N):
    return ParametricCurve.ellipse(a, b).position(crystalline_parameters(a, b, N))


def _on_curve(curve, X, tol=1e-9):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2 or X.shape[0] < 3:
        raise PreconditionError("points must have shape (N, 2) with N >= 3")
    l, dist = curve.locate(X)
    scale = max(1.0, float(np.max(np.abs(X))))
    worst = int(np.argmax(dist))
    if dist[worst] > tol * scale:
        raise PreconditionError(f"point {worst + 1} is {dist[worst]:.3e} away from {curve.name}")
    return X, l


def defects(curve, X):
    """Length and area defects 1 - L(X)/L and 1 - A(X)/A of the inscribed polygon."""
    X, _ = _on_curve(curve, X)
    Y = np.roll(X, -1, axis=0)
    poly_len = float(np.linalg.norm(Y - X, axis=1).sum())
    poly_area = 0.5 * float(np.sum(X[:, 0] * Y[:, 1] - X[:, 1] * Y[:, 0]))
    return 1.0 - poly_len / curve.length, 1.0 - poly_area / curve.area


def necessary_residuals(curve, X):
    """Per-point residuals of the first-order optimality conditions.

    ``length_res_i`` is the projection on the curve tangent t_i of the
    difference of the unit chords leaving and entering x_i; ``area_res_i`` is
    det(x_{i+1} - x_{i-1}, t_i). Both vanish at stationary placements.
    """
    X, l = _on_curve(curve, X)
    t = curve.tangent(l)
    fwd = np.roll(X, -1, axis=0) - X
    bwd = X - np.roll(X, 1, axis=0)
    n_tilde = fwd / np.linalg.norm(fwd, axis=1)[:, None] - bwd / np.linalg.norm(bwd, axis=1)[:, None]
    length_res = (n_tilde * t).sum(axis=1)
    t_tilde = np.roll(X, -1, axis=0) - np.roll(X, 1, axis=0)
    area_res = t_tilde[:, 0] * t[:, 1] - t_tilde[:, 1] * t[:, 0]
    return length_res, area_res


#: Placements compared in the static defect table, in column order.
TABLE_SHAPES = {
    "uniform": ShapeSpec.smoothed(0.0),
    "eps=0.9": ShapeSpec.smoothed(0.9),
    "crystalline": None,
    "|k|^2/3": ShapeSpec.power(2.0 / 3.0),
    "|k|^1/3": ShapeSpec.power(1.0 / 3.0),
}


def defect_table(a=3.0, b=1.0, N=12, shapes=None):
    """Rows ``(label, N, dL, dA, points)`` for each placement on the a:b ellipse.

    A ``None`` shape selects the crystalline placement.
    """
    curve = ParametricCurve.ellipse(a, b)
    rows = []
    for label, spec in (TABLE_SHAPES if shapes is None else shapes).items():
        X = crystalline_points(a, b, N) if spec is None else reparameterize(curve, spec, N)
        dL, dA = defects(curve, X)
        rows.append((label, N, dL, dA, X))
    return rows


def defect_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "N", "dL", "dA"])
    for label, N, dL, dA, *_ in rows:
        w.writerow([label, N, f"{dL:.17g}", f"{dA:.17g}"])
    return buf.getvalue()
