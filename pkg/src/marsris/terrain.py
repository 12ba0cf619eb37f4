"""Heightfield terrain: synthetic Martian landforms and geometric queries.

The world frame is metric: x east, y north, z up.  A :class:`HeightField` is a
regular grid of elevations; ``elevations[r, c]`` is the height at
``(origin_x + c*cell_size, origin_y + r*cell_size)``.  All queries treat the
surface as the bilinear interpolant of the grid nodes, which keeps
line-of-sight and ray intersection exact per cell (the difference between a
straight segment and the bilinear patch is a quadratic in the segment
parameter).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, TextIO, Union

import numpy as np
from scipy import ndimage

from .errors import (
    GridExtentError,
    GridParseError,
    InvalidPositionError,
    OutOfBoundsError,
)

_ENDPOINT_SHAVE = 1e-7  # parameter margin that keeps endpoints out of the blockage test


@dataclass(frozen=True)
class Position3:
    """A point in world coordinates (m)."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise InvalidPositionError(f"non-finite position ({self.x}, {self.y}, {self.z})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    def distance_to(self, other: "Position3") -> float:
        return math.dist((self.x, self.y, self.z), (other.x, other.y, other.z))


@dataclass(frozen=True)
class Ray:
    """Half-line with unit direction."""

    origin: Position3
    direction: tuple

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise InvalidPositionError("ray direction must be a 3-D unit vector")
        object.__setattr__(self, "direction", (float(d[0]), float(d[1]), float(d[2])))


class HeightField:
    """Immutable regular elevation grid."""

    def __init__(self, origin_x: float, origin_y: float, cell_size: float, elevations):
        elev = np.array(elevations, dtype=float)
        if elev.ndim != 2 or elev.shape[0] < 2 or elev.shape[1] < 2:
            raise GridExtentError("heightfield needs at least 2x2 nodes")
        if not cell_size > 0:
            raise GridExtentError(f"cell_size must be positive, got {cell_size}")
        if not np.all(np.isfinite(elev)):
            raise GridParseError("heightfield contains non-finite elevations")
        self.origin_x = float(origin_x)
        self.origin_y = float(origin_y)
        self.cell_size = float(cell_size)
        self.elevations = elev
        self.elevations.flags.writeable = False

    @property
    def n_rows(self) -> int:
        return self.elevations.shape[0]

    @property
    def n_cols(self) -> int:
        return self.elevations.shape[1]

    @property
    def extent_x(self) -> float:
        return (self.n_cols - 1) * self.cell_size

    @property
    def extent_y(self) -> float:
        return (self.n_rows - 1) * self.cell_size

    @property
    def max_x(self) -> float:
        return self.origin_x + self.extent_x

    @property
    def max_y(self) -> float:
        return self.origin_y + self.extent_y

    def contains(self, x: float, y: float) -> bool:
        return (self.origin_x <= x <= self.max_x) and (self.origin_y <= y <= self.max_y)

    def grid_coords(self, x, y):
        """World (x, y) -> fractional (col, row) grid coordinates."""
        return (
            (np.asarray(x, dtype=float) - self.origin_x) / self.cell_size,
            (np.asarray(y, dtype=float) - self.origin_y) / self.cell_size,
        )

    def sample_elevation(self, x: float, y: float) -> float:
        """Bilinear elevation at a world point; raises outside the extent."""
        if not self.contains(x, y):
            raise OutOfBoundsError(
                f"({x}, {y}) outside terrain extent "
                f"[{self.origin_x}, {self.max_x}] x [{self.origin_y}, {self.max_y}]"
            )
        gx = (x - self.origin_x) / self.cell_size
        gy = (y - self.origin_y) / self.cell_size
        ci = min(int(gx), self.n_cols - 2)
        ri = min(int(gy), self.n_rows - 2)
        u = gx - ci
        v = gy - ri
        e = self.elevations
        a = float(e[ri, ci])
        b = float(e[ri, ci + 1])
        c = float(e[ri + 1, ci])
        d = float(e[ri + 1, ci + 1])
        return a * (1 - u) * (1 - v) + b * u * (1 - v) + c * (1 - u) * v + d * u * v

    def sample_elevation_many(self, xs, ys) -> np.ndarray:
        """Vectorised bilinear sampling. All points must be inside the extent."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        gx, gy = self.grid_coords(xs, ys)
        if np.any(gx < -1e-9) or np.any(gx > self.n_cols - 1 + 1e-9) or \
           np.any(gy < -1e-9) or np.any(gy > self.n_rows - 1 + 1e-9):
            raise OutOfBoundsError("sample point outside terrain extent")
        ci = np.clip(np.floor(gx).astype(int), 0, self.n_cols - 2)
        ri = np.clip(np.floor(gy).astype(int), 0, self.n_rows - 2)
        u = gx - ci
        v = gy - ri
        e = self.elevations
        a = e[ri, ci]
        b = e[ri, ci + 1]
        c = e[ri + 1, ci]
        d = e[ri + 1, ci + 1]
        return a * (1 - u) * (1 - v) + b * u * (1 - v) + c * (1 - u) * v + d * u * v

    def surface_gradient(self, x: float, y: float):
        """(dz/dx, dz/dy) of the bilinear surface at a world point."""
        gx, gy = self.grid_coords(x, y)
        ci = int(np.clip(math.floor(gx), 0, self.n_cols - 2))
        ri = int(np.clip(math.floor(gy), 0, self.n_rows - 2))
        u = float(gx - ci)
        v = float(gy - ri)
        e = self.elevations
        a, b = e[ri, ci], e[ri, ci + 1]
        c, d = e[ri + 1, ci], e[ri + 1, ci + 1]
        dzdx = ((b - a) * (1 - v) + (d - c) * v) / self.cell_size
        dzdy = ((c - a) * (1 - u) + (d - b) * u) / self.cell_size
        return dzdx, dzdy


# ----------------------------------------------------------------------
# Landform synthesis
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Crater:
    diameter_m: float
    depth_m: float
    rim_height_m: float


@dataclass(frozen=True)
class Canyon:
    width_m: float
    depth_m: float
    length_m: float
    bend_angle_deg: float = 0.0


@dataclass(frozen=True)
class Hill:
    base_radius_m: float
    height_m: float


@dataclass(frozen=True)
class Plateau:
    height_m: float
    top_radius_m: float


LandformShape = Union[Crater, Canyon, Hill, Plateau]


@dataclass(frozen=True)
class LandformSpec:
    """One synthetic landform plus the surrounding background surface."""

    shape: LandformShape
    base_elevation_m: float = 0.0
    seed: int = 0
    roughness_m: float = 0.5

    def __post_init__(self):
        s = self.shape
        if isinstance(s, Crater):
            ok = s.diameter_m > 0 and s.depth_m > 0 and s.rim_height_m >= 0
        elif isinstance(s, Canyon):
            ok = (s.width_m > 0 and s.depth_m > 0 and s.length_m > 0
                  and 0.0 <= s.bend_angle_deg <= 120.0)
        elif isinstance(s, Hill):
            ok = s.base_radius_m > 0 and s.height_m > 0
        elif isinstance(s, Plateau):
            ok = s.height_m > 0 and s.top_radius_m > 0
        else:
            raise GridExtentError(f"unknown landform shape {type(s).__name__}")
        if not ok:
            raise GridExtentError(f"invalid landform parameters: {s}")
        if self.roughness_m < 0:
            raise GridExtentError("roughness amplitude must be >= 0")


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _value_noise(n_rows: int, n_cols: int, seed: int, lattice: int = 16) -> np.ndarray:
    """Seeded value noise in [-1, 1], smooth on a coarse lattice."""
    rng = np.random.default_rng(seed)
    lr = n_rows // lattice + 2
    lc = n_cols // lattice + 2
    lat = rng.uniform(-1.0, 1.0, size=(lr, lc))
    gy = np.arange(n_rows) / lattice
    gx = np.arange(n_cols) / lattice
    r0 = np.floor(gy).astype(int)
    c0 = np.floor(gx).astype(int)
    fr = _smoothstep(gy - r0)[:, None]
    fc = _smoothstep(gx - c0)[None, :]
    a = lat[np.ix_(r0, c0)]
    b = lat[np.ix_(r0, c0 + 1)]
    c = lat[np.ix_(r0 + 1, c0)]
    d = lat[np.ix_(r0 + 1, c0 + 1)]
    return a * (1 - fc) * (1 - fr) + b * fc * (1 - fr) + c * (1 - fc) * fr + d * fc * fr


def _crater_field(shape: Crater, rr):
    radius = shape.diameter_m / 2.0
    rim_w = 0.1 * radius
    bowl = np.where(
        rr <= radius,
        -shape.depth_m * 0.5 * (1.0 + np.cos(np.pi * np.minimum(rr, radius) / radius)),
        0.0,
    )
    rim = np.where(
        np.abs(rr - radius) <= rim_w,
        shape.rim_height_m * 0.5 * (1.0 + np.cos(np.pi * (rr - radius) / rim_w)),
        0.0,
    )
    return bowl + rim, rr - (radius + rim_w)


def _hill_field(shape: Hill, rr):
    # Gaussian mound rescaled so it is exactly height at the centre and 0 at the base radius.
    k = 4.5
    floor = math.exp(-k)
    g = np.exp(-k * (rr / shape.base_radius_m) ** 2)
    delta = np.where(rr <= shape.base_radius_m, shape.height_m * (g - floor) / (1.0 - floor), 0.0)
    return delta, rr - shape.base_radius_m


def _plateau_field(shape: Plateau, rr):
    wall = shape.height_m  # ~45 degree mesa walls
    t = (rr - shape.top_radius_m) / wall
    delta = np.where(
        rr <= shape.top_radius_m,
        shape.height_m,
        shape.height_m * (1.0 - _smoothstep(t)),
    )
    return delta, rr - (shape.top_radius_m + wall)


def _dist_to_segment(px, py, ax, ay, bx, by):
    vx, vy = bx - ax, by - ay
    L2 = vx * vx + vy * vy
    if L2 <= 0:
        return np.hypot(px - ax, py - ay)
    t = np.clip(((px - ax) * vx + (py - ay) * vy) / L2, 0.0, 1.0)
    return np.hypot(px - (ax + t * vx), py - (ay + t * vy))


def _canyon_field(shape: Canyon, xx, yy):
    # Centerline: straight along +x to the grid centre, then bent by bend_angle.
    half = shape.length_m / 2.0
    bend = math.radians(shape.bend_angle_deg)
    d1 = _dist_to_segment(xx, yy, -half, 0.0, 0.0, 0.0)
    d2 = _dist_to_segment(xx, yy, 0.0, 0.0, half * math.cos(bend), half * math.sin(bend))
    dist = np.minimum(d1, d2)
    bottom = 0.25 * shape.width_m
    top = 0.5 * shape.width_m
    t = (dist - bottom) / (top - bottom)
    delta = np.where(
        dist <= bottom,
        -shape.depth_m,
        np.where(dist <= top, -shape.depth_m * (1.0 - _smoothstep(t)), 0.0),
    )
    return delta, dist - top


def _canyon_bbox(shape: Canyon):
    half = shape.length_m / 2.0
    bend = math.radians(shape.bend_angle_deg)
    xs = [-half, 0.0, half * math.cos(bend)]
    ys = [0.0, 0.0, half * math.sin(bend)]
    m = 0.5 * shape.width_m
    return (max(xs) - min(xs) + 2 * m, max(ys) - min(ys) + 2 * m)


def generate_landform(spec: LandformSpec, n_rows: int, n_cols: int, cell_size: float) -> HeightField:
    """Synthesise a heightfield containing one landform centred on the grid.

    Outside the landform footprint the surface is ``base_elevation_m`` plus
    seeded value-noise roughness (``roughness_m`` amplitude, 0 allowed); inside
    the footprint the analytic shape is left smooth so geometric tests are
    well conditioned.  Deterministic for a given spec and dimensions.
    """
    if n_rows < 2 or n_cols < 2 or cell_size <= 0:
        raise GridExtentError("grid must be at least 2x2 with positive cell size")
    extent_x = (n_cols - 1) * cell_size
    extent_y = (n_rows - 1) * cell_size

    shape = spec.shape
    if isinstance(shape, Crater):
        span = 1.1 * shape.diameter_m
        need = (span, span)
    elif isinstance(shape, Hill):
        need = (2 * shape.base_radius_m,) * 2
    elif isinstance(shape, Plateau):
        span = 2 * (shape.top_radius_m + shape.height_m)
        need = (span, span)
    else:
        need = _canyon_bbox(shape)
    if need[0] > extent_x or need[1] > extent_y:
        raise GridExtentError(
            f"{type(shape).__name__} footprint {need[0]:.0f}x{need[1]:.0f} m exceeds "
            f"grid extent {extent_x:.0f}x{extent_y:.0f} m"
        )

    cx = extent_x / 2.0
    cy = extent_y / 2.0
    xg = np.arange(n_cols) * cell_size - cx
    yg = np.arange(n_rows) * cell_size - cy
    xx, yy = np.meshgrid(xg, yg)

    if isinstance(shape, Canyon):
        delta, outside = _canyon_field(shape, xx, yy)
    else:
        rr = np.hypot(xx, yy)
        if isinstance(shape, Crater):
            delta, outside = _crater_field(shape, rr)
        elif isinstance(shape, Hill):
            delta, outside = _hill_field(shape, rr)
        else:
            delta, outside = _plateau_field(shape, rr)

    elev = spec.base_elevation_m + delta
    if spec.roughness_m > 0:
        noise = _value_noise(n_rows, n_cols, spec.seed) * spec.roughness_m
        fade = _smoothstep(outside / (4.0 * cell_size))
        elev = elev + noise * fade
    return HeightField(0.0, 0.0, cell_size, elev)


def generate_flat(n_rows: int, n_cols: int, cell_size: float,
                  base_elevation_m: float = 0.0, roughness_m: float = 0.0,
                  seed: int = 0) -> HeightField:
    """Flat (optionally rough) field, origin at (0, 0)."""
    if n_rows < 2 or n_cols < 2 or cell_size <= 0:
        raise GridExtentError("grid must be at least 2x2 with positive cell size")
    elev = np.full((n_rows, n_cols), float(base_elevation_m))
    if roughness_m > 0:
        elev = elev + _value_noise(n_rows, n_cols, seed) * roughness_m
    return HeightField(0.0, 0.0, cell_size, elev)


# ----------------------------------------------------------------------
# ESRI ASCII grid I/O
# ----------------------------------------------------------------------

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


def load_ascii_grid(source: Union[str, TextIO]) -> HeightField:
    """Parse an ESRI-ASCII-style grid (case-insensitive header, row 0 = north).

    NODATA cells are filled with the nearest valid value.
    """
    text = source.read() if hasattr(source, "read") else str(source)
    lines = text.splitlines()
    header = {}
    data_start = 0
    for i, line in enumerate(lines):
        parts = line.split()
        if not parts:
            data_start = i + 1
            continue
        key = parts[0].lower()
        if key in _HEADER_KEYS and len(parts) == 2:
            try:
                header[key] = float(parts[1])
            except ValueError as exc:
                raise GridParseError(f"bad header value in line {i + 1}: {line!r}") from exc
            data_start = i + 1
        else:
            break

    for req in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize"):
        if req not in header:
            raise GridParseError(f"missing header key '{req}'")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    if ncols < 2 or nrows < 2 or ncols != header["ncols"] or nrows != header["nrows"]:
        raise GridParseError("ncols/nrows must be integers >= 2")
    cellsize = header["cellsize"]
    if cellsize <= 0:
        raise GridParseError("cellsize must be positive")

    tokens = " ".join(lines[data_start:]).split()
    try:
        values = np.array([float(t) for t in tokens], dtype=float)
    except ValueError as exc:
        raise GridParseError("could not parse grid values") from exc
    if values.size != nrows * ncols:
        raise GridParseError(f"expected {nrows * ncols} values, found {values.size}")

    grid = values.reshape(nrows, ncols)[::-1, :].copy()  # ASCII rows run north->south
    if "nodata_value" in header:
        mask = grid == header["nodata_value"]
        if mask.all():
            raise GridParseError("grid contains only NODATA values")
        if mask.any():
            _, idx = ndimage.distance_transform_edt(mask, return_indices=True)
            grid = grid[tuple(idx)]
    if not np.all(np.isfinite(grid)):
        raise GridParseError("grid contains non-finite values")
    return HeightField(header["xllcorner"], header["yllcorner"], cellsize, grid)


def dump_ascii_grid(hf: HeightField, stream: TextIO) -> None:
    """Write an ESRI-ASCII grid that round-trips bit-identically."""
    stream.write(f"ncols {hf.n_cols}\n")
    stream.write(f"nrows {hf.n_rows}\n")
    stream.write(f"xllcorner {hf.origin_x:.17g}\n")
    stream.write(f"yllcorner {hf.origin_y:.17g}\n")
    stream.write(f"cellsize {hf.cell_size:.17g}\n")
    stream.write("NODATA_value -9999\n")
    for row in hf.elevations[::-1, :]:
        stream.write(" ".join(f"{v:.17g}" for v in row))
        stream.write("\n")


# ----------------------------------------------------------------------
# Segment and ray queries against the bilinear surface
# ----------------------------------------------------------------------

def _segment_intervals(hf: HeightField, gx0, gy0, gx1, gy1):
    """Parameter breakpoints where the segment crosses grid lines, plus the
    (col, row) cell index governing each interval."""
    dgx = gx1 - gx0
    dgy = gy1 - gy0
    ts = [np.array([0.0, 1.0])]
    if dgx != 0.0:
        k0 = math.floor(min(gx0, gx1)) + 1
        k1 = math.ceil(max(gx0, gx1)) - 1
        if k1 >= k0:
            ts.append((np.arange(k0, k1 + 1) - gx0) / dgx)
    if dgy != 0.0:
        k0 = math.floor(min(gy0, gy1)) + 1
        k1 = math.ceil(max(gy0, gy1)) - 1
        if k1 >= k0:
            ts.append((np.arange(k0, k1 + 1) - gy0) / dgy)
    t = np.unique(np.clip(np.concatenate(ts), 0.0, 1.0))
    t0 = t[:-1]
    t1 = t[1:]
    keep = (t1 - t0) > 1e-15
    t0, t1 = t0[keep], t1[keep]
    mid = 0.5 * (t0 + t1)
    ci = np.clip(np.floor(gx0 + mid * dgx).astype(int), 0, hf.n_cols - 2)
    ri = np.clip(np.floor(gy0 + mid * dgy).astype(int), 0, hf.n_rows - 2)
    return t0, t1, ci, ri, dgx, dgy


def _quadratic_coeffs(hf: HeightField, gx0, gy0, ci, ri, dgx, dgy, z0, dz, clearance):
    """Coefficients of f(t) = segment_z(t) - surface(t) - clearance per interval."""
    e = hf.elevations
    a = e[ri, ci]
    b = e[ri, ci + 1]
    c = e[ri + 1, ci]
    d = e[ri + 1, ci + 1]
    c1 = b - a
    c2 = c - a
    c3 = a - b - c + d
    u0 = gx0 - ci
    v0 = gy0 - ri
    A = -c3 * dgx * dgy
    B = dz - c1 * dgx - c2 * dgy - c3 * (u0 * dgy + v0 * dgx)
    C = z0 - (a + c1 * u0 + c2 * v0 + c3 * u0 * v0) - clearance
    return A, B, C


def _interval_min(A, B, C, t0, t1):
    """Minimum of A t^2 + B t + C over [t0, t1], vectorised."""
    f0 = (A * t0 + B) * t0 + C
    f1 = (A * t1 + B) * t1 + C
    fmin = np.minimum(f0, f1)
    with np.errstate(divide="ignore", invalid="ignore"):
        tv = np.where(A != 0.0, -B / (2.0 * A), np.nan)
    inside = (A > 0.0) & (tv > t0) & (tv < t1)
    if np.any(inside):
        fv = C - B * B / (4.0 * A)
        fmin = np.where(inside, np.minimum(fmin, fv), fmin)
    return fmin


def _check_endpoint(hf: HeightField, p: Position3, label: str):
    if not hf.contains(p.x, p.y):
        raise OutOfBoundsError(f"{label} ({p.x}, {p.y}) outside terrain extent")
    ground = hf.sample_elevation(p.x, p.y)
    if p.z < ground - 1e-9:
        raise InvalidPositionError(f"{label} is {ground - p.z:.3g} m below terrain")


def line_of_sight_many(hf: HeightField, ax, ay, az, bx, by, bz,
                       clearance: float = 0.0) -> np.ndarray:
    """Exact visibility for a batch of segments (endpoint arrays broadcast).

    Per segment, every crossed cell contributes the exact quadratic
    difference between the segment and the bilinear patch; the segment is
    clear iff the minimum stays above the clearance everywhere strictly
    between the endpoints.  This is the single authoritative visibility
    routine; :func:`line_of_sight` wraps it for one segment.
    """
    if clearance < 0:
        raise InvalidPositionError("clearance must be >= 0")
    ax, ay, az, bx, by, bz = np.broadcast_arrays(
        *(np.atleast_1d(np.asarray(v, dtype=float)) for v in (ax, ay, az, bx, by, bz)))
    gax, gay = hf.grid_coords(ax, ay)
    gbx, gby = hf.grid_coords(bx, by)
    for g, n in ((gax, hf.n_cols), (gbx, hf.n_cols), (gay, hf.n_rows), (gby, hf.n_rows)):
        if np.any(g < -1e-9) or np.any(g > n - 1 + 1e-9):
            raise OutOfBoundsError("segment endpoint outside terrain extent")
    ga = hf.sample_elevation_many(ax, ay)
    gb = hf.sample_elevation_many(bx, by)
    if np.any(az < ga - 1e-9) or np.any(bz < gb - 1e-9):
        raise InvalidPositionError("segment endpoint below terrain")

    dgx = gbx - gax
    dgy = gby - gay
    dz = bz - az
    lo, hi = _ENDPOINT_SHAVE, 1.0 - _ENDPOINT_SHAVE

    # Candidate crossings on the union of grid lines touched by the batch;
    # out-of-range candidates clamp to the ends and become empty intervals.
    cols = [np.full((ax.size, 1), lo), np.full((ax.size, 1), hi)]
    for g0, dg, n in ((gax, dgx, hf.n_cols), (gay, dgy, hf.n_rows)):
        kmin = max(0, int(math.floor(min(g0.min(), (g0 + dg).min()))) + 1)
        kmax = min(n - 1, int(math.ceil(max(g0.max(), (g0 + dg).max()))) - 1)
        if kmax >= kmin:
            k = np.arange(kmin, kmax + 1, dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (k[None, :] - g0[:, None]) / dg[:, None]
            t = np.where(np.isfinite(t), t, 2.0)
            cols.append(np.clip(t, lo, hi))
    t_sorted = np.sort(np.concatenate(cols, axis=1), axis=1)
    t0 = t_sorted[:, :-1]
    t1 = t_sorted[:, 1:]
    valid = (t1 - t0) > 1e-15
    mid = 0.5 * (t0 + t1)
    ci = np.clip(np.floor(gax[:, None] + mid * dgx[:, None]).astype(int), 0, hf.n_cols - 2)
    ri = np.clip(np.floor(gay[:, None] + mid * dgy[:, None]).astype(int), 0, hf.n_rows - 2)
    A, B, C = _quadratic_coeffs(hf, gax[:, None], gay[:, None], ci, ri,
                                dgx[:, None], dgy[:, None], az[:, None], dz[:, None],
                                clearance)
    fmin = _interval_min(A, B, C, t0, t1)
    blocked = np.any(valid & (fmin <= 0.0), axis=1)
    return ~blocked


def line_of_sight(hf: HeightField, a: Position3, b: Position3, clearance: float = 0.0) -> bool:
    """True iff the open segment a->b stays above terrain + clearance.

    Walks every grid cell the segment crosses and minimises the exact
    quadratic difference between the segment and the bilinear surface, so the
    result matches arbitrarily dense sampling.  Endpoints are excluded from
    the blockage test.
    """
    _check_endpoint(hf, a, "endpoint a")
    _check_endpoint(hf, b, "endpoint b")
    if a.x == b.x and a.y == b.y and a.z == b.z:
        return True
    return bool(line_of_sight_many(hf, a.x, a.y, a.z, b.x, b.y, b.z, clearance)[0])


def intersect_ray(hf: HeightField, ray: Ray, max_range: float) -> Optional[Position3]:
    """First intersection of the ray with the bilinear surface, or None.

    The ray is clipped to the grid extent; a miss (including leaving the
    extent or exceeding ``max_range``) returns None.
    """
    o = ray.origin
    if not hf.contains(o.x, o.y):
        raise OutOfBoundsError("ray origin outside terrain extent")
    if o.z < hf.sample_elevation(o.x, o.y) - 1e-9:
        raise InvalidPositionError("ray origin below terrain")
    dx, dy, dz = ray.direction

    t_end = float(max_range)
    for comp, lo, hi, pos in ((dx, hf.origin_x, hf.max_x, o.x), (dy, hf.origin_y, hf.max_y, o.y)):
        if comp > 0:
            t_end = min(t_end, (hi - pos) / comp)
        elif comp < 0:
            t_end = min(t_end, (lo - pos) / comp)
    if t_end <= 0:
        return None

    gx0, gy0 = hf.grid_coords(o.x, o.y)
    gx1 = gx0 + dx * t_end / hf.cell_size
    gy1 = gy0 + dy * t_end / hf.cell_size
    # Reuse the unit-parameter interval walker, then rescale to metres.
    t0, t1, ci, ri, dgx, dgy = _segment_intervals(hf, float(gx0), float(gy0), float(gx1), float(gy1))
    A, B, C = _quadratic_coeffs(hf, float(gx0), float(gy0), ci, ri, dgx, dgy,
                                o.z, dz * t_end, 0.0)
    fmin = _interval_min(A, B, C, t0, t1)
    hits = np.nonzero(fmin <= 0.0)[0]
    for idx in hits:
        aq, bq, cq = float(A[idx]), float(B[idx]), float(C[idx])
        lo_t, hi_t = float(t0[idx]), float(t1[idx])
        roots = []
        if abs(aq) > 1e-300:
            disc = bq * bq - 4.0 * aq * cq
            if disc >= 0.0:
                sq = math.sqrt(disc)
                roots = [(-bq - sq) / (2.0 * aq), (-bq + sq) / (2.0 * aq)]
        elif abs(bq) > 0.0:
            roots = [-cq / bq]
        valid = [r for r in roots if lo_t - 1e-12 <= r <= hi_t + 1e-12]
        f_lo = (aq * lo_t + bq) * lo_t + cq
        if f_lo <= 0.0:
            valid.append(lo_t)
        if not valid:
            continue
        t_hit = max(0.0, min(valid)) * t_end
        return Position3(o.x + dx * t_hit, o.y + dy * t_hit, o.z + dz * t_hit)
    return None
