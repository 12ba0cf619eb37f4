"""Flat key-value scenario configuration.

Lines are ``key = value`` with ``#`` comments; keys are dotted with units in
the name (``link.tx_power_dbm``), panels are indexed ``panels[0].x_m``.
Unspecified keys take the Mars defaults (5 GHz, 10 dBm, 20/20 dBi, 10 dB LNA,
-100 dBm noise, amplifier 10 dB gain / 5 dB noise figure, unit coefficient
magnitudes).  Unknown keys are rejected with the offending line number.
"""

from __future__ import annotations

import dataclasses
import io
import re
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError
from .propagation import AtmosphereProfile, LinkBudget, MaterialProperties
from .ris import (
    Active,
    Amplifying,
    Passive,
    RisKind,
    RisPanel,
    SemiPassive,
    Star,
    StarMode,
    half_wavelength_spacing,
    orientation_angles,
    orientation_vectors,
)
from .scenario import (
    CodebookStrategy,
    Node,
    OracleCsi,
    ReceiverGrid,
    Scenario,
    Strategy,
)
from .terrain import (
    Canyon,
    Crater,
    HeightField,
    Hill,
    LandformSpec,
    Plateau,
    Position3,
    generate_flat,
    generate_landform,
    load_ascii_grid,
)

_PANEL_RE = re.compile(r"^panels\[(\d+)\]\.(.+)$")

# key -> (type, default); None default means "required if the section is used"
_SCALAR_SCHEMA: Dict[str, Tuple[type, object]] = {
    "name": (str, "scenario"),
    "seed": (int, 0),
    "terrain.kind": (str, "flat"),
    "terrain.file": (str, None),
    "terrain.n_rows": (int, 201),
    "terrain.n_cols": (int, 201),
    "terrain.cell_size_m": (float, 10.0),
    "terrain.origin_x_m": (float, 0.0),
    "terrain.origin_y_m": (float, 0.0),
    "terrain.base_elevation_m": (float, 0.0),
    "terrain.roughness_m": (float, None),  # default depends on kind
    "terrain.seed": (int, None),           # default: scenario seed
    "terrain.crater.diameter_m": (float, 1000.0),
    "terrain.crater.depth_m": (float, 80.0),
    "terrain.crater.rim_height_m": (float, 10.0),
    "terrain.canyon.width_m": (float, 300.0),
    "terrain.canyon.depth_m": (float, 80.0),
    "terrain.canyon.length_m": (float, 1500.0),
    "terrain.canyon.bend_angle_deg": (float, 0.0),
    "terrain.hill.base_radius_m": (float, 500.0),
    "terrain.hill.height_m": (float, 60.0),
    "terrain.plateau.height_m": (float, 50.0),
    "terrain.plateau.top_radius_m": (float, 200.0),
    "material.conductivity_s_per_m": (float, 1e-8),
    "material.relative_permittivity": (float, 4.0),
    "atmosphere.temperature_c": (float, -63.0),
    "atmosphere.pressure_mbar": (float, 6.1),
    "atmosphere.humidity_percent": (float, 20.0),
    "link.frequency_hz": (float, 5e9),
    "link.tx_power_dbm": (float, 10.0),
    "link.tx_antenna_gain_dbi": (float, 20.0),
    "link.rx_antenna_gain_dbi": (float, 20.0),
    "link.lna_gain_db": (float, 10.0),
    "link.noise_power_dbm": (float, -100.0),
    "tx.x_m": (float, None),  # default: terrain centre
    "tx.y_m": (float, None),
    "tx.height_m": (float, 2.0),
    "rx.x_m": (float, None),  # sweep receiver; default: terrain centre
    "rx.y_m": (float, None),
    "rx.height_m": (float, 2.0),
    "grid.x0_m": (float, None),
    "grid.y0_m": (float, None),
    "grid.extent_x_m": (float, None),
    "grid.extent_y_m": (float, None),
    "grid.n_x": (int, 50),
    "grid.n_y": (int, 50),
    "grid.height_m": (float, 2.0),
    "strategy.kind": (str, "oracle_csi"),
    "strategy.codebook.azimuth_start_deg": (float, -80.0),
    "strategy.codebook.azimuth_stop_deg": (float, 80.0),
    "strategy.codebook.azimuth_count": (int, 36),
    "strategy.codebook.elevation_start_deg": (float, -20.0),
    "strategy.codebook.elevation_stop_deg": (float, 20.0),
    "strategy.codebook.elevation_count": (int, 5),
    "strategy.codebook.beam_range_m": (float, 1000.0),
    "strategy.codebook.noise_stddev_db": (float, 0.0),
}

_PANEL_SCHEMA: Dict[str, Tuple[type, object]] = {
    "id": (str, None),  # default: panel<i>
    "x_m": (float, None),
    "y_m": (float, None),
    "height_m": (float, 5.0),
    "azimuth_deg": (float, 0.0),
    "tilt_deg": (float, 0.0),
    "n_rows": (int, 32),
    "n_cols": (int, 32),
    "element_spacing_m": (float, None),  # default: lambda/2
    "gain_exponent": (float, 0.285),
    "kind": (str, "passive"),
    "csi_available": (bool, True),
    "per_element_gain_db": (float, 10.0),
    "amp_gain_db": (float, 10.0),
    "noise_figure_db": (float, 5.0),
    "amplifier_noise_enabled": (bool, True),
    "star.mode": (str, "reflect"),
    "star.reflect_magnitude": (float, 1.0),
    "star.transmit_magnitude": (float, 1.0),
}

_VALID_TERRAIN_KINDS = ("flat", "crater", "canyon", "hill", "plateau", "file")
_VALID_PANEL_KINDS = ("passive", "semi_passive", "active", "amplifying", "star")


@dataclass
class RawConfig:
    """Parsed, schema-checked key/value pairs before object construction."""

    scalars: Dict[str, object] = field(default_factory=dict)
    panels: Dict[int, Dict[str, object]] = field(default_factory=dict)

    def get(self, key: str):
        if key in self.scalars:
            return self.scalars[key]
        return _SCALAR_SCHEMA[key][1]

    def has(self, key: str) -> bool:
        return key in self.scalars


def _coerce(key: str, raw: str, typ: type, where: str):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            val = float(raw)
            if val != int(val):
                raise ValueError(raw)
            return int(val)
        if typ is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: key '{key}' expects {typ.__name__}, got '{raw}'") from exc


def parse_raw(text: str) -> RawConfig:
    cfg = RawConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{body}'")
        key, _, raw = body.partition("=")
        key = key.strip()
        where = f"line {lineno}"
        m = _PANEL_RE.match(key)
        if m:
            idx = int(m.group(1))
            sub = m.group(2)
            if sub not in _PANEL_SCHEMA:
                raise ConfigError(f"{where}: unknown panel key '{key}'")
            typ, _ = _PANEL_SCHEMA[sub]
            cfg.panels.setdefault(idx, {})[sub] = _coerce(key, raw, typ, where)
        else:
            if key not in _SCALAR_SCHEMA:
                raise ConfigError(f"{where}: unknown key '{key}'")
            typ, _ = _SCALAR_SCHEMA[key]
            cfg.scalars[key] = _coerce(key, raw, typ, where)
    return cfg


def apply_overrides(cfg: RawConfig, overrides: Dict[str, str]) -> RawConfig:
    for key in sorted(overrides):
        raw = overrides[key]
        where = f"override '{key}'"
        m = _PANEL_RE.match(key)
        if m:
            sub = m.group(2)
            if sub not in _PANEL_SCHEMA:
                raise ConfigError(f"{where}: unknown panel key")
            cfg.panels.setdefault(int(m.group(1)), {})[sub] = _coerce(
                key, raw, _PANEL_SCHEMA[sub][0], where)
        else:
            if key not in _SCALAR_SCHEMA:
                raise ConfigError(f"{where}: unknown key")
            cfg.scalars[key] = _coerce(key, raw, _SCALAR_SCHEMA[key][0], where)
    return cfg


# ----------------------------------------------------------------------
# Object construction
# ----------------------------------------------------------------------

def _build_terrain(cfg: RawConfig, seed: int) -> Tuple[HeightField, dict]:
    kind = str(cfg.get("terrain.kind")).lower()
    if kind not in _VALID_TERRAIN_KINDS:
        raise ConfigError(f"key 'terrain.kind': unknown terrain kind '{kind}'")
    tseed = cfg.get("terrain.seed")
    tseed = seed if tseed is None else int(tseed)
    record = {"kind": kind}

    if kind == "file":
        path = cfg.get("terrain.file")
        if not path:
            raise ConfigError("key 'terrain.file' is required when terrain.kind = file")
        with open(path, "r", encoding="utf-8") as fh:
            hf = load_ascii_grid(fh)
        record["file"] = path
        return hf, record

    n_rows = int(cfg.get("terrain.n_rows"))
    n_cols = int(cfg.get("terrain.n_cols"))
    cell = float(cfg.get("terrain.cell_size_m"))
    base = float(cfg.get("terrain.base_elevation_m"))
    rough = cfg.get("terrain.roughness_m")
    rough = (0.0 if kind == "flat" else 0.5) if rough is None else float(rough)
    ox = float(cfg.get("terrain.origin_x_m"))
    oy = float(cfg.get("terrain.origin_y_m"))
    record.update({
        "n_rows": n_rows, "n_cols": n_cols, "cell_size_m": cell,
        "origin_x_m": ox, "origin_y_m": oy,
        "base_elevation_m": base, "roughness_m": rough, "seed": tseed,
    })

    if kind == "flat":
        hf = generate_flat(n_rows, n_cols, cell, base, rough, tseed)
    else:
        if kind == "crater":
            shape = Crater(float(cfg.get("terrain.crater.diameter_m")),
                           float(cfg.get("terrain.crater.depth_m")),
                           float(cfg.get("terrain.crater.rim_height_m")))
        elif kind == "canyon":
            shape = Canyon(float(cfg.get("terrain.canyon.width_m")),
                           float(cfg.get("terrain.canyon.depth_m")),
                           float(cfg.get("terrain.canyon.length_m")),
                           float(cfg.get("terrain.canyon.bend_angle_deg")))
        elif kind == "hill":
            shape = Hill(float(cfg.get("terrain.hill.base_radius_m")),
                         float(cfg.get("terrain.hill.height_m")))
        else:
            shape = Plateau(float(cfg.get("terrain.plateau.height_m")),
                            float(cfg.get("terrain.plateau.top_radius_m")))
        hf = generate_landform(LandformSpec(shape, base, tseed, rough), n_rows, n_cols, cell)
        for f in dataclasses.fields(shape):
            record[f"{kind}.{f.name}"] = getattr(shape, f.name)
    if ox != 0.0 or oy != 0.0:
        hf = HeightField(ox, oy, cell, hf.elevations)
    return hf, record


def _build_panel(idx: int, entries: Dict[str, object], terrain: HeightField,
                 link: LinkBudget) -> RisPanel:
    def pget(key):
        return entries.get(key, _PANEL_SCHEMA[key][1])

    where = f"panels[{idx}]"
    for req in ("x_m", "y_m"):
        if pget(req) is None:
            raise ConfigError(f"key '{where}.{req}' is required")
    kind_txt = str(pget("kind")).lower()
    if kind_txt not in _VALID_PANEL_KINDS:
        raise ConfigError(f"key '{where}.kind': unknown panel kind '{kind_txt}'")
    try:
        if kind_txt == "passive":
            kind: RisKind = Passive()
        elif kind_txt == "semi_passive":
            kind = SemiPassive(bool(pget("csi_available")))
        elif kind_txt == "active":
            kind = Active(float(pget("per_element_gain_db")), float(pget("noise_figure_db")))
        elif kind_txt == "amplifying":
            kind = Amplifying(float(pget("amp_gain_db")), float(pget("noise_figure_db")),
                              bool(pget("amplifier_noise_enabled")))
        else:
            try:
                mode = StarMode(str(pget("star.mode")).lower())
            except ValueError as exc:
                raise ConfigError(
                    f"key '{where}.star.mode': expected reflect|transmit|dual_sided") from exc
            kind = Star(mode, float(pget("star.reflect_magnitude")),
                        float(pget("star.transmit_magnitude")))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"key '{where}.kind': {exc}") from exc

    x, y = float(pget("x_m")), float(pget("y_m"))
    height = float(pget("height_m"))
    if height <= 0:
        raise ConfigError(f"key '{where}.height_m' must be > 0")
    ground = terrain.sample_elevation(x, y)
    normal, up = orientation_vectors(float(pget("azimuth_deg")), float(pget("tilt_deg")))
    spacing = pget("element_spacing_m")
    spacing = half_wavelength_spacing(link.frequency_hz) if spacing is None else float(spacing)
    pid = pget("id")
    try:
        return RisPanel(
            id=str(pid) if pid is not None else f"panel{idx}",
            center=Position3(x, y, ground + height),
            normal=normal,
            up=up,
            n_rows=int(pget("n_rows")),
            n_cols=int(pget("n_cols")),
            element_spacing_m=spacing,
            element_gain_exponent=float(pget("gain_exponent")),
            kind=kind,
        )
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class RunSpec:
    scenario: Scenario
    grid: ReceiverGrid
    strategy: Strategy
    sweep_rx: Node


def build_run_spec(cfg: RawConfig) -> RunSpec:
    seed = int(cfg.get("seed"))
    terrain, terrain_record = _build_terrain(cfg, seed)

    try:
        link = LinkBudget(
            frequency_hz=float(cfg.get("link.frequency_hz")),
            tx_power_dbm=float(cfg.get("link.tx_power_dbm")),
            tx_antenna_gain_dbi=float(cfg.get("link.tx_antenna_gain_dbi")),
            rx_antenna_gain_dbi=float(cfg.get("link.rx_antenna_gain_dbi")),
            lna_gain_db=float(cfg.get("link.lna_gain_db")),
            noise_power_dbm=float(cfg.get("link.noise_power_dbm")),
        )
        material = MaterialProperties(float(cfg.get("material.conductivity_s_per_m")),
                                      float(cfg.get("material.relative_permittivity")))
        atmosphere = AtmosphereProfile(float(cfg.get("atmosphere.temperature_c")),
                                       float(cfg.get("atmosphere.pressure_mbar")),
                                       float(cfg.get("atmosphere.humidity_percent")))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc)) from exc

    # Guard propagated from the atmospheric model's validity domain.
    from .propagation import MAX_MODEL_FREQUENCY_HZ
    if link.frequency_hz > MAX_MODEL_FREQUENCY_HZ:
        raise ConfigError(
            f"key 'link.frequency_hz': {link.frequency_hz / 1e9:.3g} GHz is outside the "
            f"sub-{MAX_MODEL_FREQUENCY_HZ / 1e9:.0f} GHz validity domain"
        )

    cx = terrain.origin_x + terrain.extent_x / 2.0
    cy = terrain.origin_y + terrain.extent_y / 2.0
    tx = Node(
        float(cfg.get("tx.x_m")) if cfg.get("tx.x_m") is not None else cx,
        float(cfg.get("tx.y_m")) if cfg.get("tx.y_m") is not None else cy,
        float(cfg.get("tx.height_m")),
    )
    rx = Node(
        float(cfg.get("rx.x_m")) if cfg.get("rx.x_m") is not None else cx,
        float(cfg.get("rx.y_m")) if cfg.get("rx.y_m") is not None else cy,
        float(cfg.get("rx.height_m")),
    )

    panels = []
    for idx in sorted(cfg.panels):
        panels.append(_build_panel(idx, cfg.panels[idx], terrain, link))

    scenario = Scenario(
        terrain=terrain,
        tx=tx,
        name=str(cfg.get("name")),
        material=material,
        atmosphere=atmosphere,
        link=link,
        panels=panels,
        seed=seed,
        terrain_config=terrain_record,
    )
    scenario.validate()

    margin = 2.0 * terrain.cell_size
    gx0 = cfg.get("grid.x0_m")
    gy0 = cfg.get("grid.y0_m")
    gex = cfg.get("grid.extent_x_m")
    gey = cfg.get("grid.extent_y_m")
    grid = ReceiverGrid(
        x0_m=float(gx0) if gx0 is not None else terrain.origin_x + margin,
        y0_m=float(gy0) if gy0 is not None else terrain.origin_y + margin,
        extent_x_m=float(gex) if gex is not None else terrain.extent_x - 2 * margin,
        extent_y_m=float(gey) if gey is not None else terrain.extent_y - 2 * margin,
        n_x=int(cfg.get("grid.n_x")),
        n_y=int(cfg.get("grid.n_y")),
        height_m=float(cfg.get("grid.height_m")),
    )

    skind = str(cfg.get("strategy.kind")).lower()
    if skind == "oracle_csi":
        strategy: Strategy = OracleCsi()
    elif skind == "codebook":
        az = np.radians(np.linspace(float(cfg.get("strategy.codebook.azimuth_start_deg")),
                                    float(cfg.get("strategy.codebook.azimuth_stop_deg")),
                                    int(cfg.get("strategy.codebook.azimuth_count"))))
        el = np.radians(np.linspace(float(cfg.get("strategy.codebook.elevation_start_deg")),
                                    float(cfg.get("strategy.codebook.elevation_stop_deg")),
                                    int(cfg.get("strategy.codebook.elevation_count"))))
        strategy = CodebookStrategy(az, el, float(cfg.get("strategy.codebook.beam_range_m")),
                                    float(cfg.get("strategy.codebook.noise_stddev_db")))
    else:
        raise ConfigError(f"key 'strategy.kind': unknown strategy '{skind}'")
    return RunSpec(scenario, grid, strategy, rx)


def parse_config(text: str, overrides: Optional[Dict[str, str]] = None) -> RunSpec:
    cfg = parse_raw(text)
    if overrides:
        apply_overrides(cfg, overrides)
    return build_run_spec(cfg)


# ----------------------------------------------------------------------
# Serialisation (used by the `reference` command)
# ----------------------------------------------------------------------

def format_config(scenario: Scenario, grid: ReceiverGrid,
                  strategy: Strategy = None) -> str:
    """Render a scenario built in code back into the config format."""
    if scenario.terrain_config is None:
        raise ConfigError("scenario carries no terrain provenance; cannot serialise")
    out = io.StringIO()
    w = out.write
    w(f"name = {scenario.name}\n")
    w(f"seed = {scenario.seed}\n\n")
    for key, value in scenario.terrain_config.items():
        w(f"terrain.{key} = {_fmt(value)}\n")
    w("\n")
    mat, atm, link = scenario.material, scenario.atmosphere, scenario.link
    w(f"material.conductivity_s_per_m = {_fmt(mat.conductivity_s_per_m)}\n")
    w(f"material.relative_permittivity = {_fmt(mat.relative_permittivity)}\n")
    w(f"atmosphere.temperature_c = {_fmt(atm.temperature_c)}\n")
    w(f"atmosphere.pressure_mbar = {_fmt(atm.pressure_mbar)}\n")
    w(f"atmosphere.humidity_percent = {_fmt(atm.humidity_percent)}\n\n")
    w(f"link.frequency_hz = {_fmt(link.frequency_hz)}\n")
    w(f"link.tx_power_dbm = {_fmt(link.tx_power_dbm)}\n")
    w(f"link.tx_antenna_gain_dbi = {_fmt(link.tx_antenna_gain_dbi)}\n")
    w(f"link.rx_antenna_gain_dbi = {_fmt(link.rx_antenna_gain_dbi)}\n")
    w(f"link.lna_gain_db = {_fmt(link.lna_gain_db)}\n")
    w(f"link.noise_power_dbm = {_fmt(link.noise_power_dbm)}\n\n")
    w(f"tx.x_m = {_fmt(scenario.tx.x_m)}\n")
    w(f"tx.y_m = {_fmt(scenario.tx.y_m)}\n")
    w(f"tx.height_m = {_fmt(scenario.tx.height_m)}\n\n")
    for i, panel in enumerate(scenario.panels):
        ground = scenario.terrain.sample_elevation(panel.center.x, panel.center.y)
        az, tilt = orientation_angles(panel.normal, panel.up)
        w(f"panels[{i}].id = {panel.id}\n")
        w(f"panels[{i}].x_m = {_fmt(panel.center.x)}\n")
        w(f"panels[{i}].y_m = {_fmt(panel.center.y)}\n")
        w(f"panels[{i}].height_m = {_fmt(panel.center.z - ground)}\n")
        w(f"panels[{i}].azimuth_deg = {_fmt(az)}\n")
        w(f"panels[{i}].tilt_deg = {_fmt(tilt)}\n")
        w(f"panels[{i}].n_rows = {panel.n_rows}\n")
        w(f"panels[{i}].n_cols = {panel.n_cols}\n")
        w(f"panels[{i}].element_spacing_m = {_fmt(panel.element_spacing_m)}\n")
        w(f"panels[{i}].gain_exponent = {_fmt(panel.element_gain_exponent)}\n")
        w(_panel_kind_lines(i, panel.kind))
        w("\n")
    w(f"grid.x0_m = {_fmt(grid.x0_m)}\n")
    w(f"grid.y0_m = {_fmt(grid.y0_m)}\n")
    w(f"grid.extent_x_m = {_fmt(grid.extent_x_m)}\n")
    w(f"grid.extent_y_m = {_fmt(grid.extent_y_m)}\n")
    w(f"grid.n_x = {grid.n_x}\n")
    w(f"grid.n_y = {grid.n_y}\n")
    w(f"grid.height_m = {_fmt(grid.height_m)}\n\n")
    if strategy is None or isinstance(strategy, OracleCsi):
        w("strategy.kind = oracle_csi\n")
    else:
        w("strategy.kind = codebook\n")
        az = np.degrees(np.asarray(strategy.azimuth_grid_rad))
        el = np.degrees(np.asarray(strategy.elevation_grid_rad))
        w(f"strategy.codebook.azimuth_start_deg = {_fmt(az.min())}\n")
        w(f"strategy.codebook.azimuth_stop_deg = {_fmt(az.max())}\n")
        w(f"strategy.codebook.azimuth_count = {az.size}\n")
        w(f"strategy.codebook.elevation_start_deg = {_fmt(el.min())}\n")
        w(f"strategy.codebook.elevation_stop_deg = {_fmt(el.max())}\n")
        w(f"strategy.codebook.elevation_count = {el.size}\n")
        w(f"strategy.codebook.beam_range_m = {_fmt(strategy.beam_range_m)}\n")
        w(f"strategy.codebook.noise_stddev_db = {_fmt(strategy.noise_stddev_db)}\n")
    return out.getvalue()


def _panel_kind_lines(i: int, kind: RisKind) -> str:
    if isinstance(kind, Passive):
        return f"panels[{i}].kind = passive\n"
    if isinstance(kind, SemiPassive):
        return (f"panels[{i}].kind = semi_passive\n"
                f"panels[{i}].csi_available = {str(kind.csi_available).lower()}\n")
    if isinstance(kind, Active):
        return (f"panels[{i}].kind = active\n"
                f"panels[{i}].per_element_gain_db = {_fmt(kind.per_element_gain_db)}\n"
                f"panels[{i}].noise_figure_db = {_fmt(kind.noise_figure_db)}\n")
    if isinstance(kind, Amplifying):
        return (f"panels[{i}].kind = amplifying\n"
                f"panels[{i}].amp_gain_db = {_fmt(kind.amp_gain_db)}\n"
                f"panels[{i}].noise_figure_db = {_fmt(kind.noise_figure_db)}\n"
                f"panels[{i}].amplifier_noise_enabled = "
                f"{str(kind.amplifier_noise_enabled).lower()}\n")
    return (f"panels[{i}].kind = star\n"
            f"panels[{i}].star.mode = {kind.mode.value}\n"
            f"panels[{i}].star.reflect_magnitude = {_fmt(kind.reflect_magnitude)}\n"
            f"panels[{i}].star.transmit_magnitude = {_fmt(kind.transmit_magnitude)}\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)
