"""Scenario assembly, SNR heatmaps, RIS-kind comparison and the landform
recommender.

A heatmap cell is served by the best single mechanism among: the direct path,
one ground bounce (image method on the local tangent plane of the bounce
cell) and each RIS panel cascade.  Coherent combination across mechanisms is
available behind a flag for sensitivity studies.  Cells whose best SNR falls
below ``NO_COVERAGE_SNR_DB`` are reported as uncovered.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from .errors import (
    ConfigError,
    GeometryError,
    GridExtentError,
    InvalidPositionError,
    NoCoverageError,
)
from .propagation import (
    AtmosphereProfile,
    GroundReflection,
    LinkBudget,
    MaterialProperties,
    Polarization,
    PropagationPath,
    aggregate_power_dbm,
    atmospheric_attenuation_db,
    path_field,
    power_sum_dbm,
    snr_db,
)
from .ris import (
    Amplifying,
    CascadeGeometry,
    RisKind,
    RisPanel,
    SemiPassive,
    generate_codebook,
    kind_name,
)
from .terrain import (
    Crater,
    HeightField,
    LandformSpec,
    Position3,
    generate_landform,
    line_of_sight,
    line_of_sight_many,
)

NO_COVERAGE_SNR_DB = -20.0
NO_PATH = "NONE"


@dataclass(frozen=True)
class Node:
    """A radio terminal standing on the terrain."""

    x_m: float
    y_m: float
    height_m: float = 2.0

    def __post_init__(self):
        if self.height_m <= 0:
            raise ConfigError("antenna height must be > 0")


@dataclass
class Scenario:
    terrain: HeightField
    tx: Node
    name: str = "scenario"
    material: MaterialProperties = field(default_factory=MaterialProperties)
    atmosphere: AtmosphereProfile = field(default_factory=AtmosphereProfile)
    link: LinkBudget = field(default_factory=LinkBudget)
    panels: List[RisPanel] = field(default_factory=list)
    seed: int = 0
    polarization: Polarization = Polarization.PERPENDICULAR
    terrain_config: Optional[dict] = None  # provenance for serialisation, if built from one

    def tx_position(self) -> Position3:
        ground = self.terrain.sample_elevation(self.tx.x_m, self.tx.y_m)
        return Position3(self.tx.x_m, self.tx.y_m, ground + self.tx.height_m)

    def validate(self) -> None:
        self.tx_position()  # raises if outside the terrain
        for panel in self.panels:
            ground = self.terrain.sample_elevation(panel.center.x, panel.center.y)
            if panel.center.z <= ground:
                raise ConfigError(f"panel '{panel.id}' centre is not above the terrain")


@dataclass(frozen=True)
class ReceiverGrid:
    x0_m: float
    y0_m: float
    extent_x_m: float
    extent_y_m: float
    n_x: int
    n_y: int
    height_m: float = 2.0

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise ConfigError("receiver grid needs at least one cell per axis")
        if self.extent_x_m < 0 or self.extent_y_m < 0 or self.height_m <= 0:
            raise ConfigError("receiver grid extent must be >= 0 and height > 0")

    def cell_coords(self) -> Tuple[np.ndarray, np.ndarray]:
        xs = (self.x0_m + np.linspace(0.0, self.extent_x_m, self.n_x)
              if self.n_x > 1 else np.array([self.x0_m]))
        ys = (self.y0_m + np.linspace(0.0, self.extent_y_m, self.n_y)
              if self.n_y > 1 else np.array([self.y0_m]))
        return xs, ys


class OracleCsi:
    """Re-steer each panel per cell: the coverage-envelope configuration."""

    def __repr__(self):
        return "OracleCsi()"


@dataclass
class CodebookStrategy:
    """Pick each panel's beam by a noisy sweep over a finite codebook."""

    azimuth_grid_rad: Sequence[float]
    elevation_grid_rad: Sequence[float]
    beam_range_m: float = 1000.0
    noise_stddev_db: float = 0.0


Strategy = Union[OracleCsi, CodebookStrategy]


@dataclass
class HeatmapResult:
    grid: ReceiverGrid
    snr_db: np.ndarray      # (n_y, n_x); NaN where uncovered
    best_path: np.ndarray   # (n_y, n_x) strings: DIRECT | BOUNCE | RIS:<id> | NONE
    z_m: np.ndarray         # evaluation height per cell

    def covered(self) -> np.ndarray:
        return np.isfinite(self.snr_db)


# ----------------------------------------------------------------------
# Per-cell evaluation
# ----------------------------------------------------------------------

def ground_bounce_path(terrain: HeightField, tx: Position3, rx: Position3,
                       polarization: Polarization = Polarization.PERPENDICULAR
                       ) -> Optional[PropagationPath]:
    """Single specular ground bounce via the image method on the local
    tangent plane (flat-facet approximation at the specular cell), or None
    when no unobstructed bounce exists."""
    geo = _specular_geometry(terrain, tx, rx, polarization)
    if geo is None:
        return None
    bounce, incidence = geo
    try:
        if not (line_of_sight(terrain, tx, bounce) and line_of_sight(terrain, bounce, rx)):
            return None
    except InvalidPositionError:
        return None
    return PropagationPath.from_vertices(
        [tx, bounce, rx], [GroundReflection(incidence, polarization)]
    )


@dataclass
class _CellCandidate:
    label: str
    snr_db: float
    signal_dbm: float
    noise_dbm: float
    phase_rad: float


def _panel_codebooks(scenario: Scenario, strategy: Strategy, tx: Position3):
    if not isinstance(strategy, CodebookStrategy):
        return None
    books = []
    for panel in scenario.panels:
        if not line_of_sight(scenario.terrain, tx, panel.center):
            raise ConfigError(
                f"codebook strategy infeasible: transmitter cannot see panel '{panel.id}'"
            )
        books.append(generate_codebook(panel, tx, strategy.azimuth_grid_rad,
                                       strategy.elevation_grid_rad,
                                       strategy.beam_range_m, scenario.link.frequency_hz))
    return books


def _codebook_cell_cascade(scenario, geom, codebook, rx, strategy, p_idx, cell_index):
    """Select a codeword by (seeded) noisy RSS, then report its true signal."""
    rss = np.full(len(codebook), -math.inf)
    results = []
    for entry in codebook.entries:
        try:
            results.append(geom.evaluate(rx, entry.config))
        except GeometryError:
            results.append(None)
    seq = np.random.SeedSequence(entropy=(scenario.seed, p_idx, cell_index))
    rng = np.random.default_rng(seq)
    for i, res in enumerate(results):
        noise = rng.normal(0.0, strategy.noise_stddev_db) if strategy.noise_stddev_db > 0 else 0.0
        if res is not None and math.isfinite(res.signal_dbm):
            rss[i] = res.signal_dbm + noise
    if not np.any(np.isfinite(rss)):
        return None
    return results[int(np.argmax(rss))]


_BATCH = 64  # receiver cells per cascade batch, keeps intermediates in cache


def _row_candidates(scenario: Scenario, tx: Position3, rx_x, rx_y, rx_z,
                    strategy: Strategy, codebooks, panel_visible, geoms,
                    cell_indices) -> List[List[_CellCandidate]]:
    """Candidate mechanisms for one row of receiver cells (batched)."""
    terrain = scenario.terrain
    link = scenario.link
    m = rx_x.size
    cands: List[List[_CellCandidate]] = [[] for _ in range(m)]

    # Direct path: batched visibility, per-cell field for the visible ones.
    dist = np.sqrt((rx_x - tx.x) ** 2 + (rx_y - tx.y) ** 2 + (rx_z - tx.z) ** 2)
    nonzero = dist > 1e-6
    vis = line_of_sight_many(terrain, tx.x, tx.y, tx.z, rx_x, rx_y, rx_z) & nonzero
    for i in np.nonzero(vis)[0]:
        rx = Position3(float(rx_x[i]), float(rx_y[i]), float(rx_z[i]))
        fc = path_field(PropagationPath.from_vertices([tx, rx]), link, scenario.material)
        p = aggregate_power_dbm([fc])
        cands[i].append(_CellCandidate(
            "DIRECT", snr_db(p, link.noise_power_dbm, link.lna_gain_db),
            p, link.noise_power_dbm, fc.phase_rad))

    # Ground bounce: construct specular geometry per cell, then batch the
    # visibility of both legs before computing any field.
    bounce_geo = []
    for i in range(m):
        rx = Position3(float(rx_x[i]), float(rx_y[i]), float(rx_z[i]))
        geo = _specular_geometry(terrain, tx, rx, scenario.polarization)
        if geo is not None:
            bounce_geo.append((i, rx, geo))
    if bounce_geo:
        bxs = np.array([g[2][0].x for g in bounce_geo])
        bys = np.array([g[2][0].y for g in bounce_geo])
        bzs = np.array([g[2][0].z for g in bounce_geo])
        idx = np.array([g[0] for g in bounce_geo])
        try:
            leg1 = line_of_sight_many(terrain, tx.x, tx.y, tx.z, bxs, bys, bzs)
            leg2 = line_of_sight_many(terrain, bxs, bys, bzs, rx_x[idx], rx_y[idx], rx_z[idx])
        except InvalidPositionError:
            leg1 = leg2 = np.zeros(len(bounce_geo), dtype=bool)
        for (i, rx, (bounce, incidence)), ok1, ok2 in zip(bounce_geo, leg1, leg2):
            if not (ok1 and ok2):
                continue
            path = PropagationPath.from_vertices(
                [tx, bounce, rx], [GroundReflection(incidence, scenario.polarization)])
            fc = path_field(path, link, scenario.material)
            p = aggregate_power_dbm([fc])
            if math.isfinite(p):
                cands[i].append(_CellCandidate(
                    "BOUNCE", snr_db(p, link.noise_power_dbm, link.lna_gain_db),
                    p, link.noise_power_dbm, fc.phase_rad))

    # RIS panels.
    for p_idx, panel in enumerate(scenario.panels):
        if not panel_visible[p_idx]:
            continue
        vis = line_of_sight_many(terrain, panel.center.x, panel.center.y, panel.center.z,
                                 rx_x, rx_y, rx_z)
        if not np.any(vis):
            continue
        if isinstance(strategy, CodebookStrategy):
            for i in np.nonzero(vis)[0]:
                rx = Position3(float(rx_x[i]), float(rx_y[i]), float(rx_z[i]))
                result = _codebook_cell_cascade(scenario, geoms[p_idx], codebooks[p_idx],
                                                rx, strategy, p_idx, int(cell_indices[i]))
                if result is None or not math.isfinite(result.signal_dbm):
                    continue
                cands[i].append(_CellCandidate(
                    f"RIS:{panel.id}",
                    snr_db(result.signal_dbm, result.effective_noise_dbm, link.lna_gain_db),
                    result.signal_dbm, result.effective_noise_dbm, result.phase_rad))
        else:
            sel = np.nonzero(vis)[0]
            rxs = np.column_stack((rx_x[sel], rx_y[sel], rx_z[sel]))
            for start in range(0, sel.size, _BATCH):
                chunk = slice(start, start + _BATCH)
                sig = geoms[p_idx].steered_signal_batch(rxs[chunk])
                noise = geoms[p_idx].effective_noise_batch(rxs[chunk])
                for off, i in enumerate(sel[chunk]):
                    if not math.isfinite(sig[off]):
                        continue
                    cands[i].append(_CellCandidate(
                        f"RIS:{panel.id}",
                        snr_db(float(sig[off]), float(noise[off]), link.lna_gain_db),
                        float(sig[off]), float(noise[off]), 0.0))
    return cands


def _specular_geometry(terrain: HeightField, tx: Position3, rx: Position3,
                       polarization: Polarization):
    """Specular point and incidence angle, or None; visibility checked later."""
    h1 = tx.z - terrain.sample_elevation(tx.x, tx.y)
    h2 = rx.z - terrain.sample_elevation(rx.x, rx.y)
    dx, dy = rx.x - tx.x, rx.y - tx.y
    d_h = math.hypot(dx, dy)
    if d_h < 1e-6 or h1 + h2 <= 0:
        return None
    s = d_h * h1 / (h1 + h2)
    bx0, by0 = tx.x + dx * s / d_h, tx.y + dy * s / d_h
    if not terrain.contains(bx0, by0):
        return None
    z0 = terrain.sample_elevation(bx0, by0)
    gx, gy = terrain.surface_gradient(bx0, by0)
    n = np.array([-gx, -gy, 1.0])
    n /= np.linalg.norm(n)
    p0 = np.array([bx0, by0, z0])

    t_arr = tx.as_array()
    image = t_arr - 2.0 * float((t_arr - p0) @ n) * n
    seg = rx.as_array() - image
    denom = float(seg @ n)
    if abs(denom) < 1e-12:
        return None
    t_par = float((p0 - image) @ n) / denom
    if not 0.0 < t_par < 1.0:
        return None
    b = image + t_par * seg
    if not terrain.contains(b[0], b[1]):
        return None
    bounce = Position3(b[0], b[1], terrain.sample_elevation(b[0], b[1]))

    u = t_arr - bounce.as_array()
    norm_u = np.linalg.norm(u)
    if norm_u < 1e-9:
        return None
    cos_inc = float(np.clip((u / norm_u) @ n, -1.0, 1.0))
    if cos_inc <= 0.0:
        return None
    incidence = math.acos(cos_inc)
    if incidence >= math.pi / 2:
        return None
    return bounce, incidence


def _combine(candidates: List[_CellCandidate], coherent: bool,
             lna_gain_db: float) -> Tuple[float, str]:
    if not candidates:
        return math.nan, NO_PATH
    best = max(candidates, key=lambda c: c.snr_db)
    if not coherent:
        return best.snr_db, best.label
    # Coherent study mode: phasor-sum all mechanisms, power-sum noise excesses.
    amp = sum(10.0 ** (c.signal_dbm / 20.0) * np.exp(1j * c.phase_rad) for c in candidates)
    floor = min(c.noise_dbm for c in candidates)
    noise = power_sum_dbm([floor] + [_noise_excess(c, floor) for c in candidates])
    power = -math.inf if abs(amp) <= 0 else 20.0 * math.log10(abs(amp))
    return snr_db(power, noise, lna_gain_db), best.label


def _noise_excess(c: _CellCandidate, floor_dbm: float) -> float:
    if c.noise_dbm <= floor_dbm:
        return -math.inf
    lin = 10.0 ** (c.noise_dbm / 10.0) - 10.0 ** (floor_dbm / 10.0)
    return 10.0 * math.log10(lin) if lin > 0 else -math.inf


def run_heatmap(scenario: Scenario, grid: ReceiverGrid, strategy: Strategy = None,
                coherent: bool = False, workers: int = 1) -> HeatmapResult:
    """Per-cell SNR over the receiver grid.  Deterministic for a given
    scenario seed; the worker count changes wall time only.
    """
    scenario.validate()
    if strategy is None:
        strategy = OracleCsi()
    # Atmospheric loss is identically zero on the model's sub-6 GHz validity
    # domain; invoking the seam once enforces the frequency guard per run.
    atmospheric_attenuation_db(scenario.atmosphere, scenario.link.frequency_hz, 1.0)
    if isinstance(strategy, OracleCsi):
        for panel in scenario.panels:
            kind = panel.kind
            if isinstance(kind, SemiPassive) and not kind.csi_available:
                raise ConfigError(
                    f"panel '{panel.id}' has no CSI sensors; use the codebook strategy")
    terrain = scenario.terrain
    xs, ys = grid.cell_coords()
    if (xs.min() < terrain.origin_x or xs.max() > terrain.max_x
            or ys.min() < terrain.origin_y or ys.max() > terrain.max_y):
        raise GridExtentError("receiver grid extends beyond the terrain")

    xx, yy = np.meshgrid(xs, ys)
    ground = terrain.sample_elevation_many(xx.ravel(), yy.ravel()).reshape(xx.shape)
    zz = ground + grid.height_m

    tx = scenario.tx_position()
    codebooks = _panel_codebooks(scenario, strategy, tx)
    panel_visible = [line_of_sight(terrain, tx, p.center) for p in scenario.panels]
    geoms = [CascadeGeometry(p, tx, scenario.link) for p in scenario.panels]

    snr = np.full(xx.shape, math.nan)
    labels = np.full(xx.shape, NO_PATH, dtype="<U40")

    def work(row: int):
        cell_indices = row * grid.n_x + np.arange(grid.n_x)
        cands = _row_candidates(scenario, tx, xx[row], yy[row], zz[row],
                                strategy, codebooks, panel_visible, geoms, cell_indices)
        out = []
        for col in range(grid.n_x):
            value, label = _combine(cands[col], coherent, scenario.link.lna_gain_db)
            if math.isfinite(value) and value < NO_COVERAGE_SNR_DB:
                value, label = math.nan, NO_PATH
            out.append((value, label))
        return row, out

    rows = range(grid.n_y)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, rows))
    else:
        results = [work(r) for r in rows]
    for row, out in results:
        for col, (value, label) in enumerate(out):
            snr[row, col] = value
            labels[row, col] = label
    return HeatmapResult(grid, snr, labels, zz)


# ----------------------------------------------------------------------
# RIS-kind comparison
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class KindStats:
    label: str
    min_snr_db: float
    max_snr_db: float
    mean_snr_db: float
    coverage_fraction: float


@dataclass
class ComparisonReport:
    labels: List[str]
    stats: List[KindStats]
    mean_delta_db: np.ndarray  # [i, j] = mean(SNR_i - SNR_j) over common coverage


def compare_ris_kinds(scenario: Scenario, grid: ReceiverGrid, kinds: Sequence[RisKind],
                      strategy: Strategy = None, workers: int = 1) -> ComparisonReport:
    """Rerun the same scenario once per kind, substituting only the panel kind."""
    if len(kinds) < 2:
        raise ConfigError("comparison needs at least two kinds")
    if not scenario.panels:
        raise ConfigError("comparison needs at least one panel in the scenario")
    maps = []
    labels = []
    for i, kind in enumerate(kinds):
        variant = replace(
            scenario,
            panels=[replace(p, kind=kind) for p in scenario.panels],
        )
        maps.append(run_heatmap(variant, grid, strategy, workers=workers))
        label = kind_name(kind)
        labels.append(label if label not in labels else f"{label}#{i}")

    covered = [m.covered() for m in maps]
    stats = []
    for label, m, cov in zip(labels, maps, covered):
        vals = m.snr_db[cov]
        if vals.size:
            stats.append(KindStats(label, float(vals.min()), float(vals.max()),
                                   float(vals.mean()), float(cov.mean())))
        else:
            stats.append(KindStats(label, math.nan, math.nan, math.nan, 0.0))

    common = np.logical_and.reduce(covered)
    if not np.any(common):
        raise NoCoverageError("no receiver cell is covered by every kind")
    k = len(kinds)
    delta = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i != j:
                delta[i, j] = float(np.mean(maps[i].snr_db[common] - maps[j].snr_db[common]))
    return ComparisonReport(labels, stats, delta)


# ----------------------------------------------------------------------
# Landform recommender
# ----------------------------------------------------------------------

_KIND_COLUMNS = ("passive", "star", "amplifying", "active")

_SUITABILITY: Dict[str, Dict[str, bool]] = {
    "canyon":   {"passive": True,  "star": True,  "amplifying": True, "active": True},
    "crater":   {"passive": True,  "star": True,  "amplifying": True, "active": True},
    "mountain": {"passive": False, "star": False, "amplifying": True, "active": True},
    "plateau":  {"passive": False, "star": False, "amplifying": True, "active": True},
}

POWER_CLASS_BY_KIND = {"passive": "Low", "star": "Low", "amplifying": "Medium", "active": "High"}


def recommend_ris(landform: str) -> Dict[str, bool]:
    """Suitability of each RIS kind for a landform class."""
    key = landform.strip().lower()
    if key == "hill":
        key = "mountain"
    if key not in _SUITABILITY:
        raise ConfigError(
            f"unknown landform '{landform}'; expected one of {sorted(_SUITABILITY)}"
        )
    return dict(_SUITABILITY[key])


# ----------------------------------------------------------------------
# Reference crater scenario
# ----------------------------------------------------------------------

REFERENCE_SEED = 7


def build_reference_crater_scenario() -> Tuple[Scenario, ReceiverGrid]:
    """Deterministic desk-scale crater: 2 km bowl, amplifying panel on the rim
    leaning over the interior, transmitter hidden behind the rim outside.

    The bowl floor has no direct or bounced visibility of the transmitter, so
    coverage inside is carried entirely by the panel.  The 128x128 aperture
    puts the panel-served SNR in the low tens of dB across the receiver grid.
    """
    from .ris import orientation_vectors  # local import to keep module load light

    spec = LandformSpec(
        shape=Crater(diameter_m=2000.0, depth_m=100.0, rim_height_m=15.0),
        base_elevation_m=0.0,
        seed=REFERENCE_SEED,
        roughness_m=0.5,
    )
    n = 261
    cell = 10.0
    hf = generate_landform(spec, n, n, cell)
    # Recentre so the crater centre sits at the world origin.
    hf = HeightField(-(n - 1) * cell / 2.0, -(n - 1) * cell / 2.0, cell, hf.elevations)

    link = LinkBudget()
    normal, up = orientation_vectors(azimuth_deg=0.0, tilt_deg=-90.0)
    panel_ground = hf.sample_elevation(-1000.0, 0.0)
    # 15 m mast: a lower panel is shadowed from the near bowl floor by the
    # crater's own upper wall (the rim-to-floor chord grazes the shoulder).
    panel = RisPanel(
        id="rim-panel",
        center=Position3(-1000.0, 0.0, panel_ground + 15.0),
        normal=normal,
        up=up,
        n_rows=128,
        n_cols=128,
        element_spacing_m=link.wavelength_m / 2.0,
        element_gain_exponent=0.0,
        kind=Amplifying(amp_gain_db=10.0, noise_figure_db=5.0),
    )
    scenario = Scenario(
        terrain=hf,
        tx=Node(-1030.0, 0.0, 2.0),
        name="reference-crater",
        link=link,
        panels=[panel],
        seed=REFERENCE_SEED,
        terrain_config={
            "kind": "crater",
            "n_rows": n,
            "n_cols": n,
            "cell_size_m": cell,
            "origin_x_m": hf.origin_x,
            "origin_y_m": hf.origin_y,
            "base_elevation_m": 0.0,
            "roughness_m": 0.5,
            "seed": REFERENCE_SEED,
            "crater.diameter_m": 2000.0,
            "crater.depth_m": 100.0,
            "crater.rim_height_m": 15.0,
        },
    )
    grid = ReceiverGrid(x0_m=-300.0, y0_m=-300.0, extent_x_m=600.0, extent_y_m=600.0,
                        n_x=200, n_y=200, height_m=2.0)

    tx_pos = scenario.tx_position()
    if not line_of_sight(hf, tx_pos, panel.center):
        raise GeometryError("reference scenario broken: transmitter cannot see the panel")
    bowl_centre = Position3(0.0, 0.0, hf.sample_elevation(0.0, 0.0) + 2.0)
    if line_of_sight(hf, tx_pos, bowl_centre):
        raise GeometryError("reference scenario broken: bowl centre should be shadowed")
    return scenario, grid


# ----------------------------------------------------------------------
# Delimited / graymap exports
# ----------------------------------------------------------------------

def write_heatmap_csv(result: HeatmapResult, stream: TextIO) -> None:
    stream.write("x_m,y_m,z_m,snr_db,best_path\n")
    xs, ys = result.grid.cell_coords()
    for row in range(result.grid.n_y):
        for col in range(result.grid.n_x):
            snr = result.snr_db[row, col]
            snr_txt = "nan" if not math.isfinite(snr) else f"{snr:.6g}"
            stream.write(f"{xs[col]:.6g},{ys[row]:.6g},{result.z_m[row, col]:.6g},"
                         f"{snr_txt},{result.best_path[row, col]}\n")


def write_heatmap_pgm(result: HeatmapResult, stream: TextIO,
                      window_db: Tuple[float, float] = (NO_COVERAGE_SNR_DB, 40.0)) -> None:
    """ASCII graymap of SNR clamped to the given window; uncovered cells are 0.
    Rows run north to south, as in an image."""
    lo, hi = window_db
    if hi <= lo:
        raise ConfigError("PGM window must satisfy max > min")
    stream.write(f"P2\n{result.grid.n_x} {result.grid.n_y}\n255\n")
    scaled = (result.snr_db - lo) / (hi - lo) * 254.0 + 1.0
    pix = np.where(np.isfinite(scaled), np.clip(scaled, 1.0, 255.0), 0.0).astype(int)
    for row in pix[::-1, :]:
        stream.write(" ".join(str(v) for v in row))
        stream.write("\n")


def write_comparison_csv(report: ComparisonReport, stream: TextIO) -> None:
    delta_cols = ",".join(f"mean_delta_db_vs_{lbl}" for lbl in report.labels)
    stream.write(f"kind,min_snr_db,max_snr_db,mean_snr_db,coverage_fraction,{delta_cols}\n")
    for i, s in enumerate(report.stats):
        deltas = ",".join(f"{report.mean_delta_db[i, j]:.6g}" for j in range(len(report.labels)))
        stream.write(f"{s.label},{s.min_snr_db:.6g},{s.max_snr_db:.6g},"
                     f"{s.mean_snr_db:.6g},{s.coverage_fraction:.6g},{deltas}\n")
