import csv
import io
import json
import re

import numpy as np
import pytest

from curvflow.cli import main, run
from curvflow.config import build_curve, parse_config, read_points_csv
from curvflow.errors import ConfigError, OrientationError, PreconditionError
from curvflow.geometry import regular_polygon
from curvflow.output import SNAPSHOT_HEADER, points_csv, render_svg, snapshots_csv
from curvflow.redistribution import ShapeSpec
from curvflow.segmentation import ImageField, disk_image, write_pgm
from curvflow.stepper import StepControl, StopRule

SHORT_RUN = ["curve.N=24", "stepping.mode=fixed", "stepping.tau=1e-4", "stopping.mode=none",
             "stopping.max_time=0.01", "stepping.snapshot_interval=0.005"]


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_defaults():
    cfg = parse_config("")
    assert cfg["curve.kind"] == "circle" and cfg["curve.N"] == 100
    assert cfg.tau_for(100) == pytest.approx(1e-5)
    assert cfg.shape() == ShapeSpec.smoothed(0.1)
    assert cfg.stop_rule() == StopRule("area_fraction", 0.01)
    assert cfg.step_control(100).mode == "adaptive"


def test_file_syntax_and_overrides():
    text = """
    # comment
    curve.kind = ellipse   # trailing comment
    curve.a = 2
    law.name = weighted
    law.c = 0.5
    law.m = 3
    redistribution.shape = power
    redistribution.p = 0.6666666666666666
    stepping.mode = fixed
    stepping.tau = 0.25/N^2
    """
    cfg = parse_config(text, ["curve.a=2.5"])
    assert cfg["curve.a"] == 2.5
    assert cfg.law_params == {"c": 0.5, "m": 3.0}
    assert cfg.shape().kind == "power"
    assert cfg.step_control(50).tau == pytest.approx(0.25 / 2500)
    assert build_curve(cfg).n == 100


@pytest.mark.parametrize(
    "text, key",
    [
        ("redistribution.epsilon = 1.5", "redistribution.epsilon"),
        ("curve.N = 2", "curve.N"),
        ("curve.N = many", "curve.N"),
        ("nonsense.key = 1", "nonsense.key"),
        ("stepping.tau = -1", "stepping.tau"),
        ("law.name = power", "law.name"),
        ("law.name = affine\nlaw.gamma = 2", "law.gamma"),
        ("law.name = sharp\nlaw.c = 2", "law.c"),
        ("curve.kind = points_csv", "curve.path"),
        ("output.formats = csv, png", "output.formats"),
        ("just words", "line 1"),
    ],
)
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.key == key


def test_output_directory_resolution(monkeypatch):
    cfg = parse_config("")
    monkeypatch.delenv("CURVFLOW_OUT", raising=False)
    assert cfg.output_dir() == "curvflow-out"
    monkeypatch.setenv("CURVFLOW_OUT", "/tmp/env-out")
    assert cfg.output_dir() == "/tmp/env-out"
    assert parse_config("output.directory = here").output_dir() == "here"
    assert cfg.output_dir("flag") == "flag"


def test_orientation_checked_on_input_points(tmp_path):
    path = tmp_path / "cw.csv"
    X = regular_polygon(8).vertices[::-1]
    path.write_text("x,y\n" + "".join(f"{float(x)!r},{float(y)!r}\n" for x, y in X))
    with pytest.raises(OrientationError):
        build_curve(parse_config(f"curve.kind = points_csv\ncurve.path = {path}"))
    assert main(["evolve", "--out", str(path.parent), "--set", "curve.kind=points_csv",
                 "--set", f"curve.path={path}"]) == 2


def test_builtin_initial_curves():
    for kind in ("paper_curve_a", "paper_curve_b"):
        assert build_curve(parse_config(f"curve.kind = {kind}\ncurve.N = 50")).n == 50


def test_exit_codes(tmp_path, capsys):
    assert main(["evolve", "--out", str(tmp_path), "--set", "redistribution.epsilon=1.5"]) == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err["key"] == "redistribution.epsilon" and err["exit"] == 2
    assert main(["evolve", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert json.loads(capsys.readouterr().err.strip())["key"] == "--config"
    # a huge fixed step breaks diagonal dominance: a numerical failure
    code = main(["evolve", "--out", str(tmp_path), "--set", "curve.kind=ellipse", "--set", "curve.N=40",
                 "--set", "stepping.mode=fixed", "--set", "stepping.tau=10", "--set",
                 "redistribution.kappa2=0"])
    assert code == 3
    assert json.loads(capsys.readouterr().err.strip())["exit"] == 3
    assert main(["segment", "--out", str(tmp_path)]) == 2


def test_evolve_writes_outputs(tmp_path):
    assert main(["evolve", "--out", str(tmp_path)] + sum((["--set", s] for s in SHORT_RUN), [])) == 0
    rows = _read_csv(tmp_path / "snapshots.csv")
    assert tuple(rows[0]) == SNAPSHOT_HEADER
    assert sorted({float(r["t"]) for r in rows}) == pytest.approx([0.0, 0.005, 0.01])
    assert [int(r["i"]) for r in rows[:24]] == list(range(1, 25))
    assert (tmp_path / "trajectory.svg").read_text().startswith("<svg")


def test_identical_configs_give_identical_bytes(tmp_path):
    outs = []
    for j in range(2):
        d = tmp_path / str(j)
        run("evolve", parse_config("", SHORT_RUN + ["law.name=affine", "curve.kind=ellipse"]), str(d))
        outs.append(((d / "snapshots.csv").read_bytes(), (d / "trajectory.svg").read_bytes()))
    assert outs[0] == outs[1]


def test_snapshot_round_trip_is_exact(tmp_path):
    cfg = parse_config("", SHORT_RUN + ["curve.kind=ellipse"])
    traj = run("evolve", cfg, str(tmp_path))
    back = read_points_csv(tmp_path / "snapshots.csv")
    np.testing.assert_array_equal(back.vertices, traj.final.curve.vertices)
    mid = read_points_csv(tmp_path / "snapshots.csv", snapshot=0.005)
    np.testing.assert_array_equal(mid.vertices, traj.snapshots[1].curve.vertices)
    # and the restart reproduces the same curve
    again = build_curve(parse_config(f"curve.kind = points_csv\ncurve.path = {tmp_path / 'snapshots.csv'}"))
    np.testing.assert_array_equal(again.vertices, traj.final.curve.vertices)


def test_redistribute_reproduces_static_defects(tmp_path):
    assert main(["redistribute", "--out", str(tmp_path), "--set", "curve.kind=ellipse", "--set", "curve.N=12",
                 "--set", "redistribution.epsilon=0.9"]) == 0
    rows = {r["label"]: r for r in _read_csv(tmp_path / "defects.csv")}
    assert float(rows["|k|^2/3"]["dL"]) == pytest.approx(0.00733, rel=0.02)
    pts = _read_csv(tmp_path / "points.csv")
    assert len(pts) == 12 * len(rows)
    assert len(list(tmp_path.glob("placement_*.svg"))) == len(rows)
    assert main(["redistribute", "--out", str(tmp_path), "--set", "curve.kind=paper_curve_a"]) == 2


def test_small_eoc_and_discrepancy_commands(tmp_path):
    assert main(["eoc", "--out", str(tmp_path), "--set", "eoc.N_list=8,16", "--set", "eoc.eps_list=0.5",
                 "--set", "eoc.t_end=0.3", "--set", "eoc.M=5"]) == 0
    lines = (tmp_path / "eoc.csv").read_text().splitlines()
    assert len(lines) == 7 and lines[0].startswith("eps,N,q,")
    assert main(["discrepancy", "--out", str(tmp_path), "--set", "discrepancy.N=16", "--set",
                 "discrepancy.M=4", "--set", "discrepancy.tau=1e-3"]) == 0
    assert len((tmp_path / "discrepancy.csv").read_text().splitlines()) == 8
    assert main(["eoc", "--out", str(tmp_path), "--set", "eoc.N_list=8", "--set", "eoc.t_end=5"]) == 2


def test_segment_command(tmp_path):
    img = tmp_path / "disk.pgm"
    write_pgm(img, disk_image(150))
    args = ["segment", "--out", str(tmp_path), "--set", f"image.path={img}", "--set", "law.name=sharp",
            "--set", "curve.radius=1.4", "--set", "curve.N=40", "--set", "stopping.mode=relative_stationary",
            "--set", "stopping.delta=1e-5", "--set", "stopping.max_steps=3000"]
    assert main(args) == 0
    final = read_points_csv(tmp_path / "snapshots.csv")
    assert np.abs(np.hypot(*final.vertices.T) - 1).max() < 0.1
    assert "data:image/png;base64," in (tmp_path / "segment.svg").read_text()


def test_points_csv_layout():
    text = points_csv({"a": np.eye(2), "b": np.ones((1, 2))})
    assert text.splitlines() == ["label,i,x,y", "a,1,1,0", "a,2,0,1", "b,1,1,1"]


def test_svg_square():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    svg = render_svg([sq], precision=3)
    polys = re.findall(r'<polygon[^>]*points="([^"]*)"', svg)
    assert len(polys) == 1 and len(polys[0].split()) == 4
    assert render_svg([sq]) == render_svg([sq])
    assert svg.count("<circle") == 0
    assert render_svg([], [sq]).count("<circle") == 4
    with pytest.raises(PreconditionError):
        render_svg([], [])


def test_svg_image_underlay():
    field = ImageField(np.eye(4), (-1, 1, -1, 1))
    svg = render_svg([regular_polygon(5).vertices], image=field)
    assert svg.count("<image") == 1


def test_snapshot_csv_digits():
    from curvflow.stepper import evolve
    from curvflow.flowlaw import make_builtin
    from curvflow.redistribution import RedistParams

    traj = evolve(regular_polygon(5), make_builtin("curve_shortening"), RedistParams(),
                  StepControl.fixed(1e-3, 1.0), StopRule("none", max_steps=1))
    rows = list(csv.reader(io.StringIO(snapshots_csv(traj))))
    assert len(rows) == 1 + 2 * 5
    assert float(rows[6][2]) == traj.final.curve.vertices[0, 0]
