"""Curvature adjusted tangential redistribution of vertices.

The tangential velocity alpha is chosen so that the shape-weighted relative
local length ``r_phi = (g / L) * phi(k) / <phi>`` relaxes to one, which
concentrates vertices where ``phi(|k|)`` is large.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ShapeDegeneracyError

#: Values of phi(k*) at or below this are treated as degenerate.
POSITIVITY_FLOOR = 1e-12


@dataclass(frozen=True)
class ShapeSpec:
    """Even shape function phi(k) controlling the target vertex density.

    ``smoothed``: phi = 1 - eps + eps*sqrt(1 - eps + eps k^2), eps in [0, 1];
    ``power``: phi = max(|k|^p, floor);
    ``unit``: phi = 1.
    """

    kind: str = "smoothed"
    eps: float = 0.0
    p: float = 1.0
    floor: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("smoothed", "power", "unit"):
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if self.kind == "smoothed" and not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.eps}")
        if self.kind == "power" and not self.p > 0:
            raise ValueError(f"power exponent must be positive, got {self.p}")
        if not self.floor > 0:
            raise ValueError("floor must be positive")

    @classmethod
    def smoothed(cls, eps):
        return cls("smoothed", eps=float(eps))

    @classmethod
    def power(cls, p, floor=1e-6):
        return cls("power", p=float(p), floor=float(floor))

    @classmethod
    def unit(cls):
        return cls("unit")

    @property
    def label(self):
        if self.kind == "smoothed":
            return f"eps={self.eps:g}"
        if self.kind == "power":
            return f"|k|^{self.p:.6g}"
        return "unit"

    def __call__(self, k):
        return eval_shape(self, k)


def eval_shape(spec, k):
    """Return ``(phi, dphi)`` at curvature(s) ``k``."""
    k = np.asarray(k, dtype=float)
    if spec.kind == "unit" or (spec.kind == "smoothed" and spec.eps == 0.0):
        phi, dphi = np.ones_like(k), np.zeros_like(k)
    elif spec.kind == "smoothed":
        e = spec.eps
        root = np.sqrt(1.0 - e + e * k * k)
        phi = 1.0 - e + e * root
        with np.errstate(divide="ignore", invalid="ignore"):
            dphi = np.where(root > 0.0, e * e * k / np.where(root > 0.0, root, 1.0), 0.0)
    else:
        ak = np.abs(k)
        raw = ak**spec.p
        above = raw > spec.floor
        phi = np.where(above, raw, spec.floor)
        with np.errstate(divide="ignore", invalid="ignore"):
            dphi = np.where(above, spec.p * np.sign(k) * ak ** (spec.p - 1.0), 0.0)
    if phi.ndim == 0:
        return float(phi), float(dphi)
    return phi, dphi


def shape_value(spec, k):
    """phi(k) for a single float; a fast path of :func:`eval_shape`."""
    if spec.kind == "unit" or (spec.kind == "smoothed" and spec.eps == 0.0):
        return 1.0
    if spec.kind == "smoothed":
        e = spec.eps
        return 1.0 - e + e * math.sqrt(1.0 - e + e * k * k)
    return max(abs(k) ** spec.p, spec.floor)


@dataclass(frozen=True)
class RedistParams:
    shape: ShapeSpec = ShapeSpec.smoothed(0.1)
    kappa1: float = 100.0
    kappa2: float = 100.0

    def __post_init__(self):
        if self.kappa1 < 0 or self.kappa2 < 0:
            raise ValueError("kappa1 and kappa2 must be non-negative")


def relaxation_omega(params, geom, beta):
    """omega = kappa1 + kappa2 <k beta>."""
    r = geom.edge_lengths
    mean_kb = float(np.dot(geom.edge_curvatures * beta, r)) / geom.total_length
    return params.kappa1 + params.kappa2 * mean_kb


def tangential_velocities(geom, beta, params, omega, return_psi=False):
    """Per-vertex tangential velocities alpha_1..alpha_N.

    ``beta`` holds the normal velocity on each edge. The solution satisfies
    the discrete renormalisation sum_i phi(k*_i) alpha_i r*_i = 0. With
    ``return_psi`` the per-edge jumps psi_i of phi*alpha are returned as well.
    """
    beta = np.ascontiguousarray(beta, dtype=float)
    phi_e, dphi_e = eval_shape(params.shape, geom.edge_curvatures)
    phi_v, _ = eval_shape(params.shape, geom.vertex_curvatures)
    bad = np.flatnonzero(~(phi_v > POSITIVITY_FLOOR))
    if bad.size:
        raise ShapeDegeneracyError(
            f"shape function vanishes at vertex {int(bad[0]) + 1} "
            f"(k*={geom.vertex_curvatures[bad[0]]:.3e}); use a smoothed shape with eps < 1"
        )
    alpha, psi = _kernels.tangential(
        geom.edge_lengths, geom.dual_lengths, geom.edge_curvatures, beta,
        np.ascontiguousarray(phi_e), np.ascontiguousarray(dphi_e),
        np.ascontiguousarray(phi_v), float(omega),
    )
    if return_psi:
        return alpha, psi
    return alpha


@dataclass(frozen=True)
class RelativeLocalLength:
    values: np.ndarray
    theta: np.ndarray


def relative_local_length(geom, spec):
    """Discrete r_phi on each edge, assuming uniform parameter spacing 1/N."""
    r = geom.edge_lengths
    phi, _ = eval_shape(spec, geom.edge_curvatures)
    phi = np.broadcast_to(phi, r.shape)
    mean_phi = float(np.dot(phi, r)) / geom.total_length
    values = geom.n * r * phi / (geom.total_length * mean_phi)
    return RelativeLocalLength(values=values, theta=np.log(values))
