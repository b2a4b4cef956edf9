"""Curve evolution with curvature adjusted tangential redistribution."""

from .errors import *  # noqa: F401,F403
from .flowlaw import FlowLaw, eval_law, make_builtin
from .geometry import (
    CurveGeometry,
    PolygonalCurve,
    derive_geometry,
    ellipse_polygon,
    enclosed_area,
    lift_tangent_angles,
    polygon_length,
    regular_polygon,
)
from .redistribution import RedistParams, ShapeSpec, relative_local_length, tangential_velocities
from .stepper import StepControl, StopRule, Trajectory, evolve, run_fixed_samples, step

__version__ = "0.1.0"
