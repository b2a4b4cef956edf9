"""Image-driven flow laws for active contours.

Pixel (row r, column c) of an H x W image covers a cell of the physical
domain [x_min, x_max] x [y_min, y_max]; its centre sits at
x = x_min + (c + 1/2) dx, y = y_max - (r + 1/2) dy, so row 0 is the top
of the picture. Values between centres are bilinear; outside the centre
lattice they are clamped to the nearest boundary cell.
"""

import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage

from .errors import ImageFormatError
from .flowlaw import FlowLaw, normal_from_angle

DEFAULT_DOMAIN = (-1.5, 1.5, -1.5, 1.5)


@dataclass(frozen=True, eq=False)
class ImageField:
    """Grey-level image with values in [0, 1] on a physical rectangle.

    ``sigma`` is a Gaussian presmoothing radius in pixels applied before
    sampling (0 disables it).
    """

    intensities: np.ndarray
    domain: tuple = DEFAULT_DOMAIN
    sigma: float = 0.0

    def __post_init__(self):
        img = np.array(self.intensities, dtype=float)
        if img.ndim != 2 or min(img.shape) < 2:
            raise ValueError(f"image must be 2-D with at least 2x2 pixels, got shape {img.shape}")
        if not (np.all(np.isfinite(img)) and img.min() >= 0.0 and img.max() <= 1.0):
            raise ValueError("intensities must lie in [0, 1]")
        x0, x1, y0, y1 = (float(v) for v in self.domain)
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate domain {self.domain}")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        img.setflags(write=False)
        object.__setattr__(self, "intensities", img)
        object.__setattr__(self, "domain", (x0, x1, y0, y1))

    @property
    def height(self):
        return self.intensities.shape[0]

    @property
    def width(self):
        return self.intensities.shape[1]

    @property
    def pixel_size(self):
        x0, x1, y0, y1 = self.domain
        return (x1 - x0) / self.width, (y1 - y0) / self.height

    @cached_property
    def smoothed(self):
        if self.sigma == 0:
            return self.intensities
        return ndimage.gaussian_filter(self.intensities, self.sigma, mode="nearest")

    def grid_gradient(self, grid):
        """Central-difference gradient (d/dx, d/dy) of a pixel grid in physical units."""
        dx, dy = self.pixel_size
        d_row, d_col = np.gradient(grid)
        return d_col / dx, -d_row / dy

    @cached_property
    def gradient(self):
        return self.grid_gradient(self.smoothed)

    def to_pixel(self, x):
        """Fractional (row, col) coordinates of physical points, clamped to the centre lattice."""
        x = np.asarray(x, dtype=float)
        x0, _, _, y1 = self.domain
        dx, dy = self.pixel_size
        col = np.clip((x[..., 0] - x0) / dx - 0.5, 0.0, self.width - 1.0)
        row = np.clip((y1 - x[..., 1]) / dy - 0.5, 0.0, self.height - 1.0)
        return row, col

    def interpolate(self, grid, x):
        row, col = self.to_pixel(x)
        shape = row.shape
        out = ndimage.map_coordinates(grid, [row.ravel(), col.ravel()], order=1, mode="nearest")
        return out.reshape(shape)

    def pixel_centers(self):
        x0, _, _, y1 = self.domain
        dx, dy = self.pixel_size
        xs = x0 + (np.arange(self.width) + 0.5) * dx
        ys = y1 - (np.arange(self.height) + 0.5) * dy
        return xs, ys


def sample(field, x):
    """Intensity and its gradient at point(s) ``x``; returns ``(I, grad)``."""
    x = np.asarray(x, dtype=float)
    gx, gy = field.gradient
    I = field.interpolate(field.smoothed, x)
    grad = np.stack((field.interpolate(gx, x), field.interpolate(gy, x)), axis=-1)
    if x.ndim == 1:
        return float(I), grad
    return I, grad


# --- PGM I/O -------------------------------------------------------------

_TOKEN = re.compile(rb"#[^\n]*\n?|\s+")


def _header_tokens(data, count):
    """First ``count`` whitespace-separated header tokens and the offset after them."""
    tokens, pos = [], 0
    while len(tokens) < count:
        m = _TOKEN.match(data, pos)
        if m:
            pos = m.end()
            continue
        end = pos
        while end < len(data) and not data[end : end + 1].isspace() and data[end : end + 1] != b"#":
            end += 1
        if end == pos:
            raise ImageFormatError("truncated PGM header")
        tokens.append(data[pos:end])
        pos = end
    return tokens, pos


def read_pgm(path):
    """Raw 8-bit pixel array of a P2 or P5 PGM file."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        (magic, w, h, maxval), pos = _header_tokens(data, 4)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise ImageFormatError(f"{path}: malformed PGM header") from None
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"{path}: not a PGM file (magic {magic!r})")
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"{path}: bad dimensions {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(f"{path}: only 8-bit PGM (maxval 255) is supported, got {maxval}")
    n = width * height
    if magic == b"P5":
        payload = data[pos + 1 : pos + 1 + n]
        if len(payload) < n:
            raise ImageFormatError(f"{path}: truncated payload ({len(payload)} of {n} bytes)")
        pixels = np.frombuffer(payload, dtype=np.uint8)
    else:
        body = _TOKEN.sub(b" ", data[pos:]).split()
        if len(body) < n:
            raise ImageFormatError(f"{path}: truncated payload ({len(body)} of {n} values)")
        try:
            pixels = np.array([int(v) for v in body[:n]])
        except ValueError:
            raise ImageFormatError(f"{path}: non-integer pixel value") from None
        if pixels.min() < 0 or pixels.max() > 255:
            raise ImageFormatError(f"{path}: pixel value outside 0..255")
    return pixels.reshape(height, width).astype(np.uint8)


def load_image(path, domain=DEFAULT_DOMAIN, sigma=0.0):
    return ImageField(read_pgm(path) / 255.0, domain, sigma)


def write_pgm(path, intensities, binary=True):
    """Write values in [0, 1] as an 8-bit PGM."""
    px = np.clip(np.rint(np.asarray(intensities, dtype=float) * 255.0), 0, 255).astype(np.uint8)
    h, w = px.shape
    with open(path, "wb") as fh:
        if binary:
            fh.write(b"P5\n%d %d\n255\n" % (w, h))
            fh.write(px.tobytes())
        else:
            fh.write(b"P2\n%d %d\n255\n" % (w, h))
            for row in px:
                fh.write(b" ".join(b"%d" % v for v in row) + b"\n")


def disk_image(size=600, radius=1.0, center=(0.0, 0.0), domain=DEFAULT_DOMAIN):
    """Binary white disk on black, pixels set by their centres."""
    probe = ImageField(np.zeros((size, size)), domain)
    xs, ys = probe.pixel_centers()
    X, Y = np.meshgrid(xs, ys)
    inside = (X - center[0]) ** 2 + (Y - center[1]) ** 2 <= radius**2
    return inside.astype(float)


# --- laws ----------------------------------------------------------------

DETECTORS = {
    "rational": lambda s: 1.0 / (1.0 + s * s),
    "exponential": lambda s: np.exp(-s),
}


@dataclass(frozen=True, eq=False)
class EdgeIndicator:
    """gamma = f(|grad I|) rasterised on the pixel grid, with its own gradient."""

    field: ImageField
    detector: str = "rational"

    @cached_property
    def grid(self):
        gx, gy = self.field.gradient
        return DETECTORS[self.detector](np.hypot(gx, gy))

    @cached_property
    def gradient(self):
        return self.field.grid_gradient(self.grid)

    def __call__(self, x):
        return self.field.interpolate(self.grid, x)

    def grad(self, x):
        gx, gy = self.gradient
        return np.stack((self.field.interpolate(gx, x), self.field.interpolate(gy, x)), axis=-1)


def geodesic_law(field, detector="rational"):
    """beta = gamma(x) k - grad gamma(x) . n(nu)."""
    if detector not in DETECTORS:
        raise ValueError(f"unknown edge detector {detector!r}; choose from {sorted(DETECTORS)}")
    gamma = EdgeIndicator(field, detector)

    def weight(x, nu, k):
        return gamma(x)

    def force(x, nu):
        return -(gamma.grad(x) * normal_from_angle(nu)).sum(axis=-1)

    return FlowLaw("geodesic", weight=weight, force=force, params={"detector": detector, "gamma": gamma})


def sharp_law(field, F_max=30.0, F_min=-30.0):
    """beta = k + F_max - (F_max - F_min) I(x)."""
    if not (F_max > 0 > F_min):
        raise ValueError("need F_max > 0 > F_min")

    def force(x, nu):
        return F_max - (F_max - F_min) * field.interpolate(field.smoothed, x)

    return FlowLaw("sharp", force=force, params={"F_max": F_max, "F_min": F_min})


def geodesic_energy(gamma, vertices):
    """Discrete energy sum_i gamma(x_i*) r_i over edge midpoints x_i*."""
    X = np.asarray(vertices, dtype=float)
    prev = np.roll(X, 1, axis=0)
    mid = 0.5 * (X + prev)
    r = np.linalg.norm(X - prev, axis=1)
    return float(np.dot(gamma(mid), r))
