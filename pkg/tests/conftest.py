import numpy as np
import pytest
from hypothesis import strategies as st

from curvflow.geometry import PolygonalCurve


def star_polygon(radii, phase=0.0):
    """Star-shaped CCW polygon with the given radii at equally spaced angles."""
    radii = np.asarray(radii, dtype=float)
    u = phase + 2.0 * np.pi * np.arange(radii.size) / radii.size
    return PolygonalCurve(np.column_stack((radii * np.cos(u), radii * np.sin(u))))


@st.composite
def star_polygons(draw, min_n=5, max_n=40):
    n = draw(st.integers(min_n, max_n))
    radii = draw(st.lists(st.floats(0.7, 1.3), min_size=n, max_size=n))
    phase = draw(st.floats(0.0, 2.0 * np.pi))
    return star_polygon(radii, phase)


@pytest.fixture
def unit_square():
    return PolygonalCurve([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion; returns ``ok``."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, title, ok, detail=""):
        lines.append(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else ""))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
