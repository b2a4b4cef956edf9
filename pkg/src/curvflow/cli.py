"""Command-line entry point.

    curvflow <command> --config run.cfg [--out DIR] [--set section.key=value ...]

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures. Failures also print one JSON line on stderr.
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import harness, staticopt
from .config import build_curve, load_config, parse_config
from .errors import ConfigError, CurveError, CurvflowError, PreconditionError
from .output import points_csv, render_svg, snapshots_csv
from .segmentation import geodesic_energy, geodesic_law, load_image, sharp_law
from .stepper import evolve

log = logging.getLogger("curvflow")

COMMANDS = ("evolve", "eoc", "discrepancy", "redistribute", "segment")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _write(outdir, name, text):
    path = os.path.join(outdir, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)
    return path


def _input_curve(cfg):
    """The configured initial curve; an invalid input curve is a configuration error."""
    try:
        return build_curve(cfg)
    except CurveError as exc:
        key = "curve.path" if cfg["curve.kind"] == "points_csv" else "curve.kind"
        raise ConfigError(key, str(exc)) from None


def cmd_evolve(cfg, outdir):
    curve = _input_curve(cfg)
    traj = evolve(curve, cfg.law(), cfg.redist_params(), cfg.step_control(curve.n), cfg.stop_rule())
    formats = cfg["output.formats"]
    if "csv" in formats:
        _write(outdir, "snapshots.csv", snapshots_csv(traj))
    if "svg" in formats:
        _write(outdir, "trajectory.svg", render_svg(traj))
    log.info("stopped (%s) at t=%.6g after %d steps", traj.reason, traj.final_time, traj.steps)
    return traj


def cmd_eoc(cfg, outdir):
    t_ext = harness.AffineExact(cfg["curve.a"], cfg["curve.b"]).extinction_time
    if not cfg["eoc.t_end"] < t_ext:
        raise ConfigError("eoc.t_end", f"must precede the extinction time {t_ext:.6g}")
    kw = dict(
        t_end=cfg["eoc.t_end"], M=cfg["eoc.M"], a=cfg["curve.a"], b=cfg["curve.b"],
        kappa1=cfg["redistribution.kappa1"], kappa2=cfg["redistribution.kappa2"],
        alignment=cfg["eoc.alignment"], window=cfg["eoc.window"], workers=cfg["eoc.workers"],
    )
    if not isinstance(cfg["stepping.tau"], tuple):
        kw["tau"] = cfg["stepping.tau"]
    elif cfg["stepping.tau"][1] != 0.1:
        raise ConfigError("stepping.tau", "the convergence study only supports tau = 0.1/N^2 or a fixed value")
    table = harness.eoc_suite(cfg["eoc.N_list"], cfg["eoc.eps_list"], **kw)
    _write(outdir, "eoc.csv", table.to_csv())
    return table


def cmd_discrepancy(cfg, outdir):
    table = harness.discrepancy_suite(
        N=cfg["discrepancy.N"], T=cfg["discrepancy.T"], M=cfg["discrepancy.M"], tau=cfg["discrepancy.tau"],
        a=cfg["curve.a"], b=cfg["curve.b"],
        kappa1=cfg["redistribution.kappa1"], kappa2=cfg["redistribution.kappa2"],
    )
    _write(outdir, "discrepancy.csv", table.to_csv())
    return table


def cmd_redistribute(cfg, outdir):
    kind = cfg["curve.kind"]
    if kind not in ("ellipse", "circle"):
        raise ConfigError("curve.kind", "redistribute needs an ellipse or circle")
    a, b = (cfg["curve.a"], cfg["curve.b"]) if kind == "ellipse" else (cfg["curve.radius"],) * 2
    shapes = dict(staticopt.TABLE_SHAPES)
    shape = cfg.shape()
    if shape not in shapes.values():
        shapes[shape.label] = shape
    rows = staticopt.defect_table(a, b, cfg["curve.N"], shapes)
    _write(outdir, "defects.csv", staticopt.defect_csv(rows))
    placements = {label: X for label, _, _, _, X in rows}
    _write(outdir, "points.csv", points_csv(placements))
    if "svg" in cfg["output.formats"]:
        outline = staticopt.ParametricCurve.ellipse(a, b).position(np.linspace(0, 1, 400, endpoint=False))
        for j, (label, X) in enumerate(placements.items()):
            _write(outdir, f"placement_{j + 1}.svg", render_svg([outline], [X]))
    return rows


def cmd_segment(cfg, outdir):
    if not cfg["image.path"]:
        raise ConfigError("image.path", "required for segment")
    try:
        field = load_image(cfg["image.path"], cfg["image.domain"], cfg["image.sigma"])
    except OSError as exc:
        raise ConfigError("image.path", str(exc)) from None
    name = cfg["law.name"]
    if name == "geodesic":
        law = geodesic_law(field, cfg["image.detector"])
    elif name == "sharp":
        law = sharp_law(field, cfg["image.F_max"], cfg["image.F_min"])
    else:
        raise ConfigError("law.name", "segment needs law.name = geodesic or sharp")
    curve = _input_curve(cfg)
    traj = evolve(curve, law, cfg.redist_params(), cfg.step_control(curve.n), cfg.stop_rule())
    if name == "geodesic":
        log.info("final energy %.6g", geodesic_energy(law.params["gamma"], traj.final.curve.vertices))
    if "csv" in cfg["output.formats"]:
        _write(outdir, "snapshots.csv", snapshots_csv(traj))
    if "svg" in cfg["output.formats"]:
        _write(outdir, "segment.svg", render_svg([traj.final.curve], image=field))
    return traj


HANDLERS = {
    "evolve": cmd_evolve,
    "eoc": cmd_eoc,
    "discrepancy": cmd_discrepancy,
    "redistribute": cmd_redistribute,
    "segment": cmd_segment,
}


def run(command, cfg, out=None):
    """Execute ``command`` with a parsed config; returns the command's result."""
    if command not in HANDLERS:
        raise ConfigError("command", f"unknown command {command!r}")
    outdir = cfg.output_dir(out)
    os.makedirs(outdir, exist_ok=True)
    return HANDLERS[command](cfg, outdir)


def _fail(code, exc):
    record = {"error": type(exc).__name__, "message": str(exc), "exit": code}
    if isinstance(exc, ConfigError):
        record["key"] = exc.key
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def build_parser():
    p = argparse.ArgumentParser(prog="curvflow", description="Curve evolution with tangential redistribution.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="flat section.key = value file (defaults if omitted)")
    p.add_argument("--out", help="output directory (overrides output.directory and $CURVFLOW_OUT)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config:
            cfg = load_config(args.config, args.overrides)
        else:
            cfg = parse_config("", args.overrides)
        result = run(args.command, cfg, args.out)
    except (ConfigError, PreconditionError) as exc:
        return _fail(EXIT_CONFIG, exc)
    except CurvflowError as exc:
        return _fail(EXIT_NUMERICAL, exc)
    failures = getattr(result, "failures", None)
    if failures:
        return _fail(EXIT_NUMERICAL, RuntimeError(f"{len(failures)} cell(s) failed: {failures}"))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
