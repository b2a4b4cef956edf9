"""Normal velocity laws of the form beta = w(x, nu, k) k + F(x, nu).

A :class:`FlowLaw` stores vectorised callables. ``weight(x, nu, k)`` and
``force(x, nu)`` receive an ``(n, 2)`` array of positions and length-``n``
arrays of angles/curvatures and return length-``n`` arrays (scalars are
broadcast).
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import FlowLawError

DEFAULT_EPS_REG = 1e-6


def _zero_force(x, nu):
    return np.zeros(np.shape(nu))


def _unit_weight(x, nu, k):
    return np.ones(np.shape(k))


def normal_from_angle(nu):
    nu = np.asarray(nu, dtype=float)
    return np.stack((-np.sin(nu), np.cos(nu)), axis=-1)


@dataclass(frozen=True)
class FlowLaw:
    name: str
    weight: Callable = _unit_weight
    force: Callable = _zero_force
    params: dict = field(default_factory=dict)
    has_force: bool = True
    # (code, params) for the compiled fixed-step loop; None if not expressible
    kernel: tuple = None

    def weights(self, x, nu, k):
        return np.broadcast_to(np.asarray(self.weight(x, nu, k), dtype=float), np.shape(k))

    def forces(self, x, nu):
        if not self.has_force:
            return np.zeros(np.shape(nu))
        return np.broadcast_to(np.asarray(self.force(x, nu), dtype=float), np.shape(nu))

    def beta(self, x, nu, k):
        return self.weights(x, nu, k) * k + self.forces(x, nu)


@dataclass(frozen=True)
class PowerRegularization:
    """Clamp of |k| from below for sublinear power laws."""

    gamma: float
    eps: float = DEFAULT_EPS_REG

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.eps > 0:
            raise ValueError("regularization cutoff must be positive")


def regularized_power_weight(k, reg):
    """|k|^(gamma-1), with |k| replaced by max(|k|, eps) when gamma < 1."""
    ak = np.abs(np.asarray(k, dtype=float))
    if reg.gamma < 1.0:
        ak = np.maximum(ak, reg.eps)
    out = ak ** (reg.gamma - 1.0)
    return float(out) if out.ndim == 0 else out


def eval_law(law, x, nu, k):
    """Pointwise evaluation returning ``(w, F, beta)`` as floats."""
    xa = np.asarray(x, dtype=float).reshape(1, 2)
    nua = np.array([float(nu)])
    ka = np.array([float(k)])
    with np.errstate(all="ignore"):
        w = float(law.weights(xa, nua, ka)[0])
        F = float(law.forces(xa, nua)[0])
    beta = w * float(k) + F
    if not (np.isfinite(w) and np.isfinite(F) and np.isfinite(beta)):
        raise FlowLawError(
            f"law {law.name!r} is not finite at x={tuple(xa[0])}, nu={nu}, k={k}: w={w}, F={F}"
        )
    return w, F, beta


# --- built-in laws -------------------------------------------------------


def _curve_shortening():
    return FlowLaw("curve_shortening", has_force=False, kernel=(0, ()))


def _power(gamma, eps_reg=DEFAULT_EPS_REG, name="power"):
    reg = PowerRegularization(gamma, eps_reg)

    def weight(x, nu, k):
        return regularized_power_weight(k, reg)

    return FlowLaw(name, weight=weight, has_force=False,
                   params={"gamma": gamma, "eps_reg": eps_reg}, kernel=(1, (gamma, eps_reg)))


def _affine(eps_reg=DEFAULT_EPS_REG):
    return _power(1.0 / 3.0, eps_reg, name="affine")


def _cosine_weight(c, m, nu0):
    def weight(x, nu, k):
        return 1.0 - c * np.cos(m * (np.asarray(nu) - nu0))

    return weight


def _weighted(c, m, nu0=0.0):
    return FlowLaw("weighted", weight=_cosine_weight(c, m, nu0), has_force=False,
                   params={"c": c, "m": m, "nu0": nu0}, kernel=(3, (c, m, nu0)))


def _chou_zhu(c=0.7, m=6.0):
    def force(x, nu):
        return np.sin(nu)

    return FlowLaw("chou_zhu", weight=_cosine_weight(c, m, 0.0), force=force,
                   params={"c": c, "m": m})


def _convexity_break_a(p=1.25, q=3.0):
    def force(x, nu):
        x1, x2 = x[:, 0], x[:, 1]
        return -2.0 * p * q * np.sin(q * (4.0 * x1**2 + x2**2)) * (
            -4.0 * x1 * np.sin(nu) + x2 * np.cos(nu)
        )

    return FlowLaw("convexity_break_a", force=force, params={"p": p, "q": q})


def _convexity_break_b(p=1.956, q=1.15):
    def force(x, nu):
        x1, x2 = x[:, 0], x[:, 1]
        xn = -x1 * np.sin(nu) + x2 * np.cos(nu)
        return 2.0 * p * q * np.pi * np.cos(q * np.pi * (x1**2 + x2**2)) * xn

    return FlowLaw("convexity_break_b", force=force, params={"p": p, "q": q})


def _selfsim_weighted(a, b, T):
    def weight(x, nu, k):
        s, c = np.sin(nu), np.cos(nu)
        return a * a * b * b / (2.0 * T * (a * a * s * s + b * b * c * c))

    return FlowLaw("selfsim_weighted", weight=weight, has_force=False,
                   params={"a": a, "b": b, "T": T}, kernel=(2, (a, b, T)))


BUILTINS = {
    "curve_shortening": (_curve_shortening, (), ()),
    "affine": (_affine, (), ("eps_reg",)),
    "power": (_power, ("gamma",), ("eps_reg",)),
    "weighted": (_weighted, ("c", "m"), ("nu0",)),
    "chou_zhu": (_chou_zhu, (), ("c", "m")),
    "convexity_break_a": (_convexity_break_a, (), ("p", "q")),
    "convexity_break_b": (_convexity_break_b, (), ("p", "q")),
    "selfsim_weighted": (_selfsim_weighted, ("a", "b", "T"), ()),
}


def make_builtin(name, params=None):
    """Construct one of the named laws in :data:`BUILTINS`.

    >>> make_builtin("power", {"gamma": 0.5}).name
    'power'
    """
    params = dict(params or {})
    try:
        factory, required, optional = BUILTINS[name]
    except KeyError:
        raise FlowLawError(f"unknown flow law {name!r}; known: {sorted(BUILTINS)}") from None
    missing = [p for p in required if p not in params]
    if missing:
        raise FlowLawError(f"law {name!r} is missing parameter(s) {missing}")
    unknown = sorted(set(params) - set(required) - set(optional))
    if unknown:
        raise FlowLawError(f"law {name!r} does not take parameter(s) {unknown}")
    return factory(**{k: float(v) for k, v in params.items()})
