"""Convergence and discrepancy experiments against self-similar ellipses.

Two exact solutions are used:

* affine flow beta = k^(1/3): an a:b ellipse shrinks homothetically with
  eta(t) = (1 - 4/3 (ab)^(-2/3) t)^(3/4);
* the weighted flow with w(nu) = a^2 b^2 / (2T (a^2 sin^2 nu + b^2 cos^2 nu))
  shrinks the same ellipse with eta(t) = sqrt(1 - t/T).
"""

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ExtinctionError, PreconditionError
from .flowlaw import make_builtin
from .geometry import PolygonalCurve, ellipse_polygon
from .redistribution import RedistParams, ShapeSpec
from .staticopt import ParametricCurve
from .stepper import run_fixed_samples

log = logging.getLogger(__name__)

NORMS = (1, 2, math.inf)


@dataclass(frozen=True)
class AffineExact:
    a: float = 3.0
    b: float = 1.0

    @property
    def extinction_time(self):
        return 0.75 * (self.a * self.b) ** (2.0 / 3.0)

    def eta(self, t):
        s = 1.0 - (4.0 / 3.0) * (self.a * self.b) ** (-2.0 / 3.0) * np.asarray(t, dtype=float)
        return np.maximum(s, 0.0) ** 0.75

    def zeta(self, u):
        z = 2.0 * np.pi * np.asarray(u, dtype=float)
        return self.a**2 * np.sin(z) ** 2 + self.b**2 * np.cos(z) ** 2

    def curvature(self, u, t):
        return self.a * self.b / self.eta(t) * self.zeta(u) ** -1.5

    def law(self):
        return make_builtin("affine")


@dataclass(frozen=True)
class WeightedExact:
    a: float = 3.0
    b: float = 1.0
    T: float = 1.0

    @property
    def extinction_time(self):
        return self.T

    def eta(self, t):
        return np.sqrt(np.maximum(1.0 - np.asarray(t, dtype=float) / self.T, 0.0))

    def law(self):
        return make_builtin("selfsim_weighted", {"a": self.a, "b": self.b, "T": self.T})


def _norm(values, p, axis=-1):
    values = np.asarray(values, dtype=float)
    if p == math.inf:
        return values.max(axis=axis)
    return np.mean(values**p, axis=axis) ** (1.0 / p)


def _parse_norm(p):
    if p in (math.inf, "inf", "∞"):
        return math.inf
    if p in (1, 2):
        return int(p)
    raise ValueError(f"norm selector must be 1, 2 or inf, got {p!r}")


def ellipse_residuals(vertices, exact, t):
    """|x1^2/(a eta)^2 + x2^2/(b eta)^2 - 1| per vertex; broadcasts over a
    leading sample axis when ``t`` is an array."""
    X = np.asarray(vertices, dtype=float)
    eta = np.asarray(exact.eta(t), dtype=float)
    if eta.ndim:
        eta = eta[:, None]
    return np.abs(X[..., 0] ** 2 / (exact.a * eta) ** 2 + X[..., 1] ** 2 / (exact.b * eta) ** 2 - 1.0)


def err_p(curve, exact, t, p):
    """Residual of the polygon against the exact ellipse at time ``t`` in the
    discrete L^p norm over vertices (p in {1, 2, inf})."""
    if t >= exact.extinction_time:
        raise ExtinctionError(f"t={t} is not before the extinction time {exact.extinction_time}")
    X = curve.vertices if isinstance(curve, PolygonalCurve) else curve
    return float(_norm(ellipse_residuals(X, exact, t), _parse_norm(p)))


def sample_steps(tau, times, alignment="after"):
    """Map sample times to step counts of a fixed-``tau`` run.

    ``after``: first step whose time, accumulated by repeated addition of
    ``tau``, reaches the sample time. ``before``: last step with n*tau <= t.
    Returns ``(steps, step_times)``; ``step_times`` are what the exact
    solution is evaluated at.
    """
    times = np.asarray(times, dtype=float)
    if alignment == "before":
        steps = np.floor(times / tau * (1 + 1e-12)).astype(np.int64)
        return steps, steps * tau
    if alignment != "after":
        raise ValueError(f"unknown alignment {alignment!r}")
    n_max = int(math.ceil(times.max() / tau)) + 2
    clock = np.cumsum(np.full(n_max, tau))
    clock = np.concatenate(([0.0], clock))
    steps = np.searchsorted(clock, times, side="left").astype(np.int64)
    return steps, steps * tau


def sample_times(t_end, M, window="leading"):
    """t_j = t_end * j / M for j = 0..M-1 (``leading``) or j = 1..M (``trailing``)."""
    j = np.arange(0, M) if window == "leading" else np.arange(1, M + 1)
    if window not in ("leading", "trailing"):
        raise ValueError(f"unknown sample window {window!r}")
    return t_end * j / M


# --- EOC -----------------------------------------------------------------


@dataclass
class ErrorTable:
    """E_{p,q}(N) and EOC_{p,q}(N) per (eps, N); p is the vertex norm and q
    the sample-time norm."""

    errors: dict = field(default_factory=dict)  # (eps, N) -> {(p, q): E}
    failures: dict = field(default_factory=dict)  # (eps, N) -> message

    def E(self, eps, N, p, q):
        return self.errors[(eps, N)][(_parse_norm(p), _parse_norm(q))]

    def eoc(self, eps, N, p, q):
        if (eps, N) not in self.errors or (eps, N // 2) not in self.errors:
            return None
        return math.log2(self.E(eps, N // 2, p, q) / self.E(eps, N, p, q))

    @property
    def eps_values(self):
        return sorted({k[0] for k in self.errors})

    def n_values(self, eps):
        return sorted(k[1] for k in self.errors if k[0] == eps)

    def rows(self):
        """Rows in the published layout: one row per (eps, N, q) with the three
        vertex norms p = 1, 2, inf as columns."""
        for eps in self.eps_values:
            for N in self.n_values(eps):
                for q in NORMS:
                    vals = []
                    for p in NORMS:
                        vals.append(self.E(eps, N, p, q))
                        vals.append(self.eoc(eps, N, p, q))
                    yield (eps, N, q, *vals)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eps", "N", "q", "E_p1", "EOC_p1", "E_p2", "EOC_p2", "E_pinf", "EOC_pinf"])
        for eps, N, q, *vals in self.rows():
            w.writerow([f"{eps:g}", N, _fmt_norm(q)] + ["" if v is None else f"{v:.17g}" for v in vals])
        return buf.getvalue()


def _fmt_norm(p):
    return "inf" if p == math.inf else str(p)


def run_eoc_cell(N, eps, t_end=1.5, M=200, a=3.0, b=1.0, kappa1=100.0, kappa2=100.0,
                 tau=None, alignment="after", window="leading", compiled=None):
    """Affine flow on the a:b ellipse with N uniform-parameter vertices.

    Returns ``{(p, q): E_{p,q}(N)}``.
    """
    exact = AffineExact(a, b)
    if not t_end < exact.extinction_time:
        raise PreconditionError("t_end must precede the extinction time")
    tau = 0.1 / N**2 if tau is None else tau
    steps, step_times = sample_steps(tau, sample_times(t_end, M, window), alignment)
    params = RedistParams(ShapeSpec.smoothed(eps), kappa1, kappa2)
    samples = run_fixed_samples(ellipse_polygon(N, a, b), exact.law(), params, tau, steps, compiled)
    res = ellipse_residuals(samples, exact, step_times)
    out = {}
    for p in NORMS:
        err = _norm(res, p, axis=1)
        for q in NORMS:
            out[(p, q)] = float(_norm(err, q))
    return out


def _eoc_job(args):
    N, eps, kw = args
    try:
        return (eps, N), run_eoc_cell(N, eps, **kw), None
    except Exception as exc:  # a failed cell must not abort the table
        return (eps, N), None, f"{type(exc).__name__}: {exc}"


def eoc_suite(N_list=(16, 32, 64, 128, 256), eps_list=(0.0, 0.1, 0.5, 0.9), t_end=1.5, M=200,
              workers=1, **kw):
    N_list = sorted(int(n) for n in N_list)
    for lo, hi in zip(N_list, N_list[1:]):
        if hi != 2 * lo:
            raise PreconditionError(f"N_list must be successive doublings, got {N_list}")
    jobs = [(N, float(eps), dict(t_end=t_end, M=M, **kw)) for eps in eps_list for N in N_list]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_eoc_job, jobs))
    else:
        results = [_eoc_job(j) for j in jobs]
    table = ErrorTable()
    for key, errs, fail in results:
        if fail is None:
            table.errors[key] = errs
        else:
            log.warning("EOC cell eps=%g N=%d failed: %s", key[0], key[1], fail)
            table.failures[key] = fail
    return table


# --- length/area discrepancy ---------------------------------------------


DISCREPANCY_SHAPES = {
    "eps=0": ShapeSpec.smoothed(0.0),
    "eps=0.1": ShapeSpec.smoothed(0.1),
    "eps=0.5": ShapeSpec.smoothed(0.5),
    "eps=0.9": ShapeSpec.smoothed(0.9),
    "|k|": ShapeSpec.smoothed(1.0),
    "|k|^2/3": ShapeSpec.power(2.0 / 3.0),
    "|k|^1/3": ShapeSpec.power(1.0 / 3.0),
}

DISCREPANCY_COLUMNS = ("dL_1", "dL_2", "dL_inf", "dA_1", "dA_2", "dA_inf")


@dataclass
class DiscrepancyTable:
    rows: dict = field(default_factory=dict)  # label -> 6-tuple in DISCREPANCY_COLUMNS order
    failures: dict = field(default_factory=dict)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["phi", *DISCREPANCY_COLUMNS])
        for label, vals in self.rows.items():
            w.writerow([label] + [f"{v:.17g}" for v in vals])
        return buf.getvalue()


def polygon_lengths_areas(samples):
    nxt = np.roll(samples, -1, axis=-2)
    lengths = np.linalg.norm(nxt - samples, axis=-1).sum(axis=-1)
    areas = 0.5 * (samples[..., 0] * nxt[..., 1] - samples[..., 1] * nxt[..., 0]).sum(axis=-1)
    return lengths, areas


def run_discrepancy_row(shape, N=100, T=1.0, M=200, a=3.0, b=1.0, kappa1=100.0, kappa2=100.0,
                        tau=None, alignment="after", compiled=None):
    exact = WeightedExact(a, b, T)
    tau = 0.1 / N**2 if tau is None else tau
    steps, step_times = sample_steps(tau, sample_times(T, M, "leading"), alignment)
    params = RedistParams(shape, kappa1, kappa2)
    samples = run_fixed_samples(ellipse_polygon(N, a, b), exact.law(), params, tau, steps, compiled)
    ref = ParametricCurve.ellipse(a, b)
    eta = exact.eta(step_times)
    lengths, areas = polygon_lengths_areas(samples)
    dL = np.abs(1.0 - lengths / (eta * ref.length))
    dA = np.abs(1.0 - areas / (eta**2 * math.pi * a * b))
    return tuple(float(_norm(d, q)) for d in (dL, dA) for q in NORMS)


def discrepancy_suite(shapes=None, N=100, T=1.0, M=200, **kw):
    shapes = DISCREPANCY_SHAPES if shapes is None else shapes
    table = DiscrepancyTable()
    for label, shape in shapes.items():
        try:
            table.rows[label] = run_discrepancy_row(shape, N=N, T=T, M=M, **kw)
        except Exception as exc:
            log.warning("discrepancy row %s failed: %s", label, exc)
            table.failures[label] = f"{type(exc).__name__}: {exc}"
    return table
