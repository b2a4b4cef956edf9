"""Semi-implicit flowing finite volume time stepping.

Each step freezes the coefficients (w*, alpha, F*, normals) at the current
polygon and solves one periodic tridiagonal system per coordinate for the new
vertex positions.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    CurveError,
    DegenerateFlowError,
    ShapeDegeneracyError,
    SingularSystemError,
    StepTooLargeError,
)
from .geometry import (
    CurveGeometry,
    PolygonalCurve,
    _geometry_arrays,
    check_orientation,
    enclosed_area,
)
from .redistribution import POSITIVITY_FLOOR, relaxation_omega, tangential_velocities

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepControl:
    mode: str = "fixed"
    tau: float = 1e-5
    lam: float = 1.0
    snapshot_interval: float = 1e-3

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"unknown stepping mode {self.mode!r}")
        if self.mode == "fixed" and not self.tau > 0:
            raise ValueError("fixed stepping needs tau > 0")
        if self.mode == "adaptive" and not self.lam > 0:
            raise ValueError("adaptive stepping needs lambda > 0")
        if not self.snapshot_interval > 0:
            raise ValueError("snapshot_interval must be positive")

    @classmethod
    def fixed(cls, tau, snapshot_interval=1e-3):
        return cls("fixed", tau=tau, snapshot_interval=snapshot_interval)

    @classmethod
    def adaptive(cls, lam=1.0, snapshot_interval=1e-3):
        return cls("adaptive", lam=lam, snapshot_interval=snapshot_interval)


@dataclass(frozen=True)
class StopRule:
    """Termination test applied after every accepted step.

    ``relative_stationary``: both |A/A_prev - 1| and |L/L_prev - 1| < delta.
    ``area_fraction``: A/A_0 < delta.
    ``none``: only the hard caps apply.
    """

    mode: str = "area_fraction"
    delta: float = 0.01
    max_time: float = math.inf
    max_steps: int = 10_000_000

    def __post_init__(self):
        if self.mode not in ("relative_stationary", "area_fraction", "none"):
            raise ValueError(f"unknown stop mode {self.mode!r}")
        if not self.delta > 0:
            raise ValueError("delta must be positive")


@dataclass(frozen=True)
class Snapshot:
    t: float
    curve: PolygonalCurve
    curvatures: np.ndarray
    angles: np.ndarray
    alpha: np.ndarray
    edge_lengths: np.ndarray
    length: float
    area: float


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)
    final_time: float = 0.0
    steps: int = 0
    reason: str = ""

    @property
    def final(self):
        return self.snapshots[-1]

    @property
    def times(self):
        return np.array([s.t for s in self.snapshots])


@dataclass(frozen=True)
class StepInfo:
    index: int
    t: float
    tau: float
    vertices: np.ndarray
    dominance_margin: float


class _Frozen:
    """Coefficients of one step, evaluated at the beginning-of-step polygon."""

    __slots__ = ("X", "geom", "beta", "wstar", "Fstar", "normals", "omega", "alpha")


class Integrator:
    """Reusable per-law step machinery; used by :func:`step` and :func:`evolve`."""

    def __init__(self, law, params):
        self.law = law
        self.params = params

    def freeze(self, X):
        r, t, nu, nustar, k, kstar, rstar, mid, _, _ = _geometry_arrays(X)
        n = r.shape[0]
        geom = CurveGeometry(r, t, nu, nustar, k, kstar, rstar, mid, X, float(r.sum()))
        law = self.law
        edge_nu = nu[1 : n + 1]
        vert_nu = nustar[1 : n + 1]
        beta = np.ascontiguousarray(law.beta(mid, edge_nu, k), dtype=float)
        fr = _Frozen()
        fr.X = X
        fr.geom = geom
        fr.beta = beta
        fr.wstar = np.ascontiguousarray(law.weights(X, vert_nu, kstar), dtype=float)
        fr.Fstar = law.forces(X, vert_nu)
        fr.normals = np.column_stack((-np.sin(vert_nu), np.cos(vert_nu)))
        fr.omega = relaxation_omega(self.params, geom, beta)
        fr.alpha = tangential_velocities(geom, beta, self.params, fr.omega)
        return fr

    def advance(self, fr, tau):
        """Return ``(new_vertices, dominance_margin)``."""
        g = fr.geom
        lo, di, up, bad = _kernels.assemble(g.edge_lengths, g.dual_lengths, fr.alpha, fr.wstar, tau)
        if bad >= 0:
            raise StepTooLargeError(bad + 1, tau)
        rhs = fr.X + tau * fr.Fstar[:, None] * fr.normals
        new, ok = _kernels.cyclic_solve(lo, di, up, np.ascontiguousarray(rhs))
        if not ok or not np.all(np.isfinite(new)):
            raise SingularSystemError(f"periodic tridiagonal solve failed (tau={tau:.3e})")
        margin = float(np.min(di - np.abs(lo) - np.abs(up)))
        return new, margin


def adaptive_tau(geom, wstar, alpha, lam):
    """tau = r_min / (4 (1 + lam)) * (w_max / r_min + |alpha|_max / 2)^-1."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    r_min = float(np.min(geom.edge_lengths))
    w_max = float(np.max(wstar))
    a_max = float(np.max(np.abs(alpha)))
    rate = w_max / r_min + 0.5 * a_max
    if (w_max <= 0.0 and a_max == 0.0) or not rate > 0.0:
        raise DegenerateFlowError(f"cannot choose a time step: w_max={w_max}, |alpha|_max={a_max}")
    return r_min / (4.0 * (1.0 + lam)) / rate


def step(curve, law, params, tau):
    """Advance ``curve`` by one semi-implicit step of size ``tau``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    integ = Integrator(law, params)
    new, _ = integ.advance(integ.freeze(curve.vertices), tau)
    return PolygonalCurve(new)


def _snapshot(integ, X, t):
    fr = integ.freeze(X)
    g = fr.geom
    return Snapshot(
        t=t,
        curve=PolygonalCurve(X),
        curvatures=g.edge_curvatures.copy(),
        angles=g.edge_angles.copy(),
        alpha=fr.alpha.copy(),
        edge_lengths=g.edge_lengths.copy(),
        length=g.total_length,
        area=enclosed_area(X),
    )


def evolve(curve0, law, params, ctrl, stop, callback=None):
    """Run the flow from ``curve0`` until ``stop`` fires.

    Snapshots are taken at t = 0, at every multiple of
    ``ctrl.snapshot_interval`` that a step reaches, and at the final time.
    ``callback`` (optional) receives a :class:`StepInfo` after every accepted
    step.
    """
    check_orientation(curve0)
    integ = Integrator(law, params)
    X = np.array(curve0.vertices, dtype=float)
    traj = Trajectory()
    traj.snapshots.append(_snapshot(integ, X, 0.0))
    area0 = traj.snapshots[0].area
    prev_area, prev_len = area0, traj.snapshots[0].length
    next_snap = ctrl.snapshot_interval
    t = 0.0
    n = 0
    reason = ""
    while True:
        if n >= stop.max_steps:
            reason = "max_steps"
            break
        if t >= stop.max_time:
            reason = "max_time"
            break
        fr = integ.freeze(X)
        if ctrl.mode == "fixed":
            tau = ctrl.tau
            new, margin = integ.advance(fr, tau)
        else:
            tau = adaptive_tau(fr.geom, fr.wstar, fr.alpha, ctrl.lam)
            try:
                new, margin = integ.advance(fr, tau)
            except StepTooLargeError:
                log.debug("step %d: dominance lost at tau=%.3e, halving", n, tau)
                tau *= 0.5
                new, margin = integ.advance(fr, tau)
        n += 1
        t = n * tau if ctrl.mode == "fixed" else t + tau
        X = new
        area = enclosed_area(X)
        length = float(np.sum(np.hypot(*(X - np.roll(X, 1, axis=0)).T)))
        if callback is not None:
            callback(StepInfo(n, t, tau, X, margin))
        if t >= next_snap - 1e-12 * max(1.0, t):
            traj.snapshots.append(_snapshot(integ, X, t))
            while next_snap <= t + 1e-12 * max(1.0, t):
                next_snap += ctrl.snapshot_interval
        if stop.mode == "relative_stationary":
            if abs(area / prev_area - 1.0) < stop.delta and abs(length / prev_len - 1.0) < stop.delta:
                reason = "stationary"
                break
        elif stop.mode == "area_fraction":
            if area / area0 < stop.delta:
                reason = "area_fraction"
                break
        prev_area, prev_len = area, length
    if traj.snapshots[-1].t != t:
        traj.snapshots.append(_snapshot(integ, X, t))
    traj.final_time = t
    traj.steps = n
    traj.reason = reason
    log.info("evolve finished: %s at t=%.6g after %d steps", reason, t, n)
    return traj


def _shape_kernel(shape):
    if shape.kind == "smoothed":
        return _kernels.SHAPE_SMOOTHED, (shape.eps, 0.0)
    if shape.kind == "power":
        return _kernels.SHAPE_POWER, (shape.p, shape.floor)
    return _kernels.SHAPE_UNIT, (0.0, 0.0)


def run_fixed_samples(curve, law, params, tau, sample_steps, compiled=None):
    """Fixed-``tau`` run returning vertices after each count in ``sample_steps``.

    ``sample_steps`` must be non-decreasing step counts. Laws built by
    :func:`~curvflow.flowlaw.make_builtin` without a force term run in a
    compiled loop; ``compiled=False`` forces the generic per-step path.
    Returns an array of shape ``(len(sample_steps), N, 2)``.
    """
    steps = np.asarray(sample_steps, dtype=np.int64)
    if steps.ndim != 1 or np.any(np.diff(steps) < 0) or (steps.size and steps[0] < 0):
        raise ValueError("sample_steps must be non-decreasing, non-negative step counts")
    X0 = np.ascontiguousarray(curve.vertices, dtype=float)
    use_kernel = law.kernel is not None if compiled is None else bool(compiled)
    if use_kernel:
        if law.kernel is None:
            raise ValueError(f"law {law.name!r} has no compiled form")
        code, lp = law.kernel
        scode, sp = _shape_kernel(params.shape)
        samples, fail, at = _kernels.run_fixed(
            X0, code, np.array(lp + (0.0,) * (3 - len(lp)), dtype=float), scode,
            np.array(sp, dtype=float), float(params.kappa1), float(params.kappa2),
            float(tau), steps, POSITIVITY_FLOOR,
        )
        if fail != _kernels.OK:
            _raise_kernel_failure(fail, at, tau)
        return samples
    integ = Integrator(law, params)
    out = np.empty((steps.size, X0.shape[0], 2))
    X = X0.copy()
    count = 0
    for s, target in enumerate(steps):
        while count < target:
            X, _ = integ.advance(integ.freeze(X), tau)
            count += 1
        out[s] = X
    return out


def _raise_kernel_failure(fail, at, tau):
    if fail == _kernels.FAIL_DOMINANCE:
        raise StepTooLargeError(-1, tau)
    if fail == _kernels.FAIL_SOLVE:
        raise SingularSystemError(f"periodic tridiagonal solve failed at step {at + 1}")
    if fail == _kernels.FAIL_SHAPE:
        raise ShapeDegeneracyError(f"shape function vanished at a vertex during step {at + 1}")
    raise CurveError(f"polygon degenerated (zero edge or fold) at step {at + 1}")
