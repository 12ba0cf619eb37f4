"""Element-level models of reconfigurable intelligent surfaces.

Four operating variants are modelled on a common cascade: per element, the
transmitter->element and element->receiver legs each contribute a Friis
amplitude, one factor of (lambda/4pi) accounts for the element scattering
aperture, and cos^q directivity weights the departure/arrival angles measured
from the panel normal.  Contributions sum coherently under the configured
phases.

Variant behaviour:

* passive / semi-passive: unit-magnitude reflection, ambient noise only.
  Semi-passive differs solely by advertising on-panel CSI sensors.
* active: every element amplifies its own reflection; the per-element
  amplifier noises add incoherently at the receiver.
* amplifying: receive aperture -> one amplifier -> transmit aperture.  The
  signal gains exactly the amplifier gain over the passive cascade; the
  amplifier's output noise is re-radiated by the transmit aperture (and
  therefore arrives attenuated by the panel->receiver leg).
* STAR: reflects and/or transmits with independent coefficient magnitudes;
  the dual-sided mode serves both half-spaces at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import GeometryError, SimulationError
from .propagation import (
    SPEED_OF_LIGHT,
    LinkBudget,
    amplitude_to_dbm,
    dbm_to_amplitude,
)
from .terrain import Position3

_TWO_PI = 2.0 * math.pi


# ----------------------------------------------------------------------
# Kinds
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Passive:
    pass


@dataclass(frozen=True)
class SemiPassive:
    csi_available: bool = True


@dataclass(frozen=True)
class Active:
    per_element_gain_db: float = 10.0
    noise_figure_db: float = 5.0

    def __post_init__(self):
        if self.per_element_gain_db < 0 or self.noise_figure_db < 0:
            raise SimulationError("active RIS gain and noise figure must be >= 0 dB")


@dataclass(frozen=True)
class Amplifying:
    amp_gain_db: float = 10.0
    noise_figure_db: float = 5.0
    amplifier_noise_enabled: bool = True

    def __post_init__(self):
        if self.amp_gain_db < 0 or self.noise_figure_db < 0:
            raise SimulationError("amplifier gain and noise figure must be >= 0 dB")


class StarMode(str, Enum):
    REFLECT = "reflect"
    TRANSMIT = "transmit"
    DUAL_SIDED = "dual_sided"


@dataclass(frozen=True)
class Star:
    mode: StarMode = StarMode.REFLECT
    reflect_magnitude: float = 1.0
    transmit_magnitude: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.reflect_magnitude <= 1.0 and 0.0 <= self.transmit_magnitude <= 1.0):
            raise SimulationError("STAR coefficient magnitudes must lie in [0, 1]")


RisKind = Union[Passive, SemiPassive, Active, Amplifying, Star]


def kind_name(kind: RisKind) -> str:
    if isinstance(kind, Star):
        return f"star[{kind.mode.value}]"
    return type(kind).__name__.lower().replace("semipassive", "semi_passive")


# ----------------------------------------------------------------------
# Panel geometry
# ----------------------------------------------------------------------

def half_wavelength_spacing(frequency_hz: float) -> float:
    return SPEED_OF_LIGHT / frequency_hz / 2.0


def orientation_vectors(azimuth_deg: float, tilt_deg: float):
    """Panel normal/up from pointing azimuth (deg east of +x) and tilt
    (elevation of normal above horizontal, deg; -90 faces straight down)."""
    az = math.radians(azimuth_deg)
    tl = math.radians(tilt_deg)
    normal = np.array([math.cos(tl) * math.cos(az), math.cos(tl) * math.sin(az), math.sin(tl)])
    if abs(math.cos(tl)) < 1e-9:
        up = np.array([math.cos(az), math.sin(az), 0.0])
    else:
        zhat = np.array([0.0, 0.0, 1.0])
        up = zhat - normal * float(normal @ zhat)
        up /= np.linalg.norm(up)
    return normal, up


def orientation_angles(normal, up) -> Tuple[float, float]:
    """Inverse of :func:`orientation_vectors` (degrees)."""
    tilt = math.degrees(math.asin(float(np.clip(normal[2], -1.0, 1.0))))
    if abs(abs(normal[2]) - 1.0) < 1e-12:
        az = math.degrees(math.atan2(float(up[1]), float(up[0])))
    else:
        az = math.degrees(math.atan2(float(normal[1]), float(normal[0])))
    return az, tilt


@dataclass
class RisPanel:
    """A placed RIS: pose, element grid and operating kind."""

    id: str
    center: Position3
    normal: np.ndarray
    up: np.ndarray
    n_rows: int = 32
    n_cols: int = 32
    element_spacing_m: float = half_wavelength_spacing(5e9)
    element_gain_exponent: float = 0.285
    kind: RisKind = field(default_factory=Passive)

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=float)
        self.up = np.asarray(self.up, dtype=float)
        if abs(np.linalg.norm(self.normal) - 1.0) > 1e-9 or abs(np.linalg.norm(self.up) - 1.0) > 1e-9:
            raise GeometryError("panel normal and up must be unit vectors")
        if abs(float(self.normal @ self.up)) > 1e-9:
            raise GeometryError("panel up must be perpendicular to the normal")
        if self.n_rows < 1 or self.n_cols < 1:
            raise GeometryError("element grid must be at least 1x1")
        if self.element_spacing_m <= 0:
            raise GeometryError("element spacing must be positive")
        if self.element_gain_exponent < 0:
            raise GeometryError("element gain exponent must be >= 0")

    @property
    def n_elements(self) -> int:
        return self.n_rows * self.n_cols

    @property
    def right(self) -> np.ndarray:
        return np.cross(self.normal, self.up)

    @property
    def aperture_m(self) -> float:
        return max(self.n_rows, self.n_cols) * self.element_spacing_m

    def element_positions(self) -> np.ndarray:
        """(N, 3) element centres, row-major, centred on the panel centre.

        Cached: panels are treated as immutable once placed.
        """
        cached = getattr(self, "_positions", None)
        if cached is not None:
            return cached
        r_off = (np.arange(self.n_rows) - (self.n_rows - 1) / 2.0) * self.element_spacing_m
        c_off = (np.arange(self.n_cols) - (self.n_cols - 1) / 2.0) * self.element_spacing_m
        rr, cc = np.meshgrid(r_off, c_off, indexing="ij")
        pos = (self.center.as_array()[None, :]
               + rr.reshape(-1, 1) * self.up[None, :]
               + cc.reshape(-1, 1) * self.right[None, :])
        pos.flags.writeable = False
        object.__setattr__(self, "_positions", pos)
        return pos

    def side_of(self, p: Position3) -> float:
        """Signed distance of a point from the panel plane (>0 = front)."""
        return float((p.as_array() - self.center.as_array()) @ self.normal)


def element_positions(panel: RisPanel) -> List[Position3]:
    """Element centres as Position3 values (row-major)."""
    return [Position3(*row) for row in panel.element_positions()]


# ----------------------------------------------------------------------
# Phase configurations and codebooks
# ----------------------------------------------------------------------

@dataclass
class PhaseConfiguration:
    phases: np.ndarray  # radians, row-major over the element grid

    def __post_init__(self):
        arr = np.mod(np.asarray(self.phases, dtype=float), _TWO_PI)
        if arr.ndim != 1:
            raise SimulationError("phase configuration must be a flat array")
        self.phases = arr

    def __len__(self):
        return self.phases.size


@dataclass(frozen=True)
class CodebookEntry:
    azimuth_rad: float
    elevation_rad: float
    config: PhaseConfiguration


@dataclass
class Codebook:
    entries: List[CodebookEntry]
    source_direction: Tuple[float, float]  # (azimuth, elevation) of the feeding source

    def __post_init__(self):
        if not self.entries:
            raise SimulationError("codebook must have at least one entry")
        seen = {(e.azimuth_rad, e.elevation_rad) for e in self.entries}
        if len(seen) != len(self.entries):
            raise SimulationError("codebook boresights must be pairwise distinct")

    def __len__(self):
        return len(self.entries)


def direction_from_angles(panel: RisPanel, azimuth_rad: float, elevation_rad: float) -> np.ndarray:
    """Unit vector for panel-frame angles (azimuth about up, elevation toward up)."""
    ce = math.cos(elevation_rad)
    return (ce * math.sin(azimuth_rad) * panel.right
            + math.sin(elevation_rad) * panel.up
            + ce * math.cos(azimuth_rad) * panel.normal)


def angles_from_direction(panel: RisPanel, vec) -> Tuple[float, float]:
    v = np.asarray(vec, dtype=float)
    v = v / np.linalg.norm(v)
    el = math.asin(float(np.clip(v @ panel.up, -1.0, 1.0)))
    az = math.atan2(float(v @ panel.right), float(v @ panel.normal))
    return az, el


def _reflect_only(kind: RisKind) -> bool:
    return isinstance(kind, (Passive, SemiPassive, Active)) or (
        isinstance(kind, Star) and kind.mode == StarMode.REFLECT
    )


def _check_sides(panel: RisPanel, tx: Position3, rx: Position3) -> Tuple[float, float]:
    s_tx = panel.side_of(tx)
    s_rx = panel.side_of(rx)
    kind = panel.kind
    if _reflect_only(kind):
        if s_tx <= 0:
            raise GeometryError(f"source is behind reflect-only panel '{panel.id}'")
        if s_rx <= 0:
            raise GeometryError(f"receiver is on the dark side of reflect-only panel '{panel.id}'")
    elif isinstance(kind, Star) and kind.mode == StarMode.TRANSMIT:
        if s_tx <= 0:
            raise GeometryError(f"source is behind transmit-mode panel '{panel.id}'")
        if s_rx >= 0:
            raise GeometryError(
                f"receiver is on the source side of transmit-mode panel '{panel.id}'"
            )
    # Dual-sided STAR and amplifying panels serve both half-spaces.
    return s_tx, s_rx


def steering_phase_profile(panel: RisPanel, source: Position3, target: Position3,
                           frequency_hz: float) -> PhaseConfiguration:
    """Per-element phases that co-phase all source->element->target cascades."""
    _check_sides(panel, source, target)
    pos = panel.element_positions()
    d1 = np.linalg.norm(source.as_array()[None, :] - pos, axis=1)
    d2 = np.linalg.norm(target.as_array()[None, :] - pos, axis=1)
    k = _TWO_PI * frequency_hz / SPEED_OF_LIGHT
    return PhaseConfiguration(-(k * (d1 + d2)))


def generate_codebook(panel: RisPanel, source: Position3,
                      azimuth_grid_rad: Sequence[float],
                      elevation_grid_rad: Sequence[float],
                      beam_range_m: float, frequency_hz: float) -> Codebook:
    """One steering entry per (elevation, azimuth) pair, elevation-major order.

    Each entry steers at a virtual target ``beam_range_m`` away along the
    beam direction in panel coordinates.
    """
    if len(azimuth_grid_rad) == 0 or len(elevation_grid_rad) == 0:
        raise SimulationError("codebook grids must be non-empty")
    if beam_range_m <= 0:
        raise SimulationError("beam range must be positive")
    entries = []
    center = panel.center.as_array()
    for el in elevation_grid_rad:
        for az in azimuth_grid_rad:
            target = Position3(*(center + beam_range_m * direction_from_angles(panel, az, el)))
            config = steering_phase_profile(panel, source, target, frequency_hz)
            entries.append(CodebookEntry(float(az), float(el), config))
    src_angles = angles_from_direction(panel, source.as_array() - center)
    return Codebook(entries, src_angles)


# ----------------------------------------------------------------------
# Cascade evaluation
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CascadeResult:
    signal_dbm: float
    effective_noise_dbm: float
    phase_rad: float = 0.0


def _element_magnitude(panel: RisPanel, s_tx, s_rx):
    """Per-kind element coefficient magnitude; array-valued for dual STAR."""
    kind = panel.kind
    if isinstance(kind, (Passive, SemiPassive, Amplifying)):
        return 1.0
    if isinstance(kind, Active):
        return 10.0 ** (kind.per_element_gain_db / 20.0)
    if kind.mode == StarMode.REFLECT:
        return kind.reflect_magnitude
    if kind.mode == StarMode.TRANSMIT:
        return kind.transmit_magnitude
    return np.where((np.asarray(s_rx) >= 0) == (s_tx >= 0),
                    kind.reflect_magnitude, kind.transmit_magnitude)


def _signal_offset_db(kind: RisKind) -> float:
    return kind.amp_gain_db if isinstance(kind, Amplifying) else 0.0


class CascadeGeometry:
    """Transmitter-side cascade state precomputed for repeated evaluations.

    Folding the fixed leg (transmitter -> elements) once makes per-receiver
    evaluation a single pass over the elements; run_heatmap builds one of
    these per panel per run.
    """

    def __init__(self, panel: RisPanel, tx: Position3, link: LinkBudget):
        self.panel = panel
        self.link = link
        self.tx = tx
        pos = panel.element_positions()
        d1v = tx.as_array()[None, :] - pos
        d1 = np.sqrt(np.einsum("ij,ij->i", d1v, d1v))
        if np.any(d1 < 1e-6):
            raise GeometryError("transmitter coincides with a panel element")
        lam = link.wavelength_m
        unit = lam / (4.0 * math.pi)
        gain = dbm_to_amplitude(
            link.tx_power_dbm + link.tx_antenna_gain_dbi + link.rx_antenna_gain_dbi)
        amp1 = gain * unit ** 3 / d1
        q = panel.element_gain_exponent
        if q > 0:
            cos1 = np.clip(np.abs(d1v @ panel.normal) / d1, 0.0, 1.0)
            amp1 = amp1 * np.power(cos1, q)
        self._amp1 = amp1
        self._d1 = d1
        self._pos = pos
        self._pos_sq = np.einsum("ij,ij->i", pos, pos)
        self._pos_dot_n = pos @ panel.normal
        self._s_tx = panel.side_of(tx)
        self._k = _TWO_PI / lam

    def _leg2(self, rx_arr: np.ndarray):
        """Receiver-leg element amplitudes and distances for one receiver."""
        d2v = rx_arr[None, :] - self._pos
        d2 = np.sqrt(np.einsum("ij,ij->i", d2v, d2v))
        if np.any(d2 < 1e-6):
            raise GeometryError("receiver coincides with a panel element")
        amp = self._amp1 / d2
        q = self.panel.element_gain_exponent
        if q > 0:
            cos2 = np.clip(np.abs(d2v @ self.panel.normal) / d2, 0.0, 1.0)
            amp = amp * np.power(cos2, q)
        return amp, d2

    def evaluate(self, rx: Position3, config: Optional[PhaseConfiguration]) -> CascadeResult:
        """Cascade at one receiver; ``config=None`` means the exact steering
        profile for (tx, rx), whose phases cancel element by element."""
        s_tx, s_rx = _check_sides(self.panel, self.tx, rx)
        magnitude = _element_magnitude(self.panel, s_tx, s_rx)
        amp, d2 = self._leg2(rx.as_array())
        if config is None:
            total = complex(float(np.sum(amp)), 0.0)
        else:
            if len(config) != self.panel.n_elements:
                raise SimulationError(
                    f"configuration length {len(config)} does not match panel "
                    f"{self.panel.n_rows}x{self.panel.n_cols}")
            total = complex(np.sum(amp * np.exp(1j * (self._k * (self._d1 + d2)
                                                      + config.phases))))
        signal = amplitude_to_dbm(abs(total) * float(magnitude)) + _signal_offset_db(self.panel.kind)
        return CascadeResult(signal, self.effective_noise(rx), float(np.angle(total)) % _TWO_PI)

    def steered_signal_batch(self, rxs: np.ndarray) -> np.ndarray:
        """Steered-cascade signal (dBm) for an (M, 3) batch of receivers.

        Dark-side receivers come back as -inf instead of raising, so callers
        can treat them as uncovered cells.
        """
        panel = self.panel
        kind = panel.kind
        s_rx = (rxs - panel.center.as_array()[None, :]) @ panel.normal
        # |rx - p|^2 expanded so no (M, N, 3) intermediate is materialised.
        rx_sq = np.einsum("ij,ij->i", rxs, rxs)
        d2 = np.sqrt(np.maximum(
            rx_sq[:, None] - 2.0 * (rxs @ self._pos.T) + self._pos_sq[None, :], 1e-18))
        amp = self._amp1[None, :] / d2
        q = panel.element_gain_exponent
        if q > 0:
            proj = (rxs @ panel.normal)[:, None] - self._pos_dot_n[None, :]
            cos2 = np.clip(np.abs(proj) / d2, 0.0, 1.0)
            amp = amp * np.power(cos2, q)
        sums = np.sum(amp, axis=1) * np.asarray(_element_magnitude(panel, self._s_tx, s_rx))
        with np.errstate(divide="ignore"):
            signal = 20.0 * np.log10(sums) + _signal_offset_db(kind)
        if _reflect_only(kind):
            bad = (s_rx <= 0) | (self._s_tx <= 0)
        elif isinstance(kind, Star) and kind.mode == StarMode.TRANSMIT:
            bad = (s_rx >= 0) | (self._s_tx <= 0)
        else:
            bad = np.zeros(len(rxs), dtype=bool)
        signal[bad] = -math.inf
        return signal

    def effective_noise(self, rx: Position3) -> float:
        return float(self.effective_noise_batch(rx.as_array()[None, :])[0])

    def effective_noise_batch(self, rxs: np.ndarray) -> np.ndarray:
        """Noise floor per receiver: ambient, plus re-radiated amplifier noise
        for the amplifying/active kinds (attenuated by the receiver leg)."""
        link = self.link
        kind = self.panel.kind
        floor = np.full(len(rxs), link.noise_power_dbm)
        if isinstance(kind, Amplifying) and kind.amplifier_noise_enabled:
            extra = kind.amp_gain_db + kind.noise_figure_db
        elif isinstance(kind, Active):
            extra = kind.per_element_gain_db + kind.noise_figure_db
        else:
            return floor
        d2v = rxs - self.panel.center.as_array()[None, :]
        d2 = np.sqrt(np.einsum("ij,ij->i", d2v, d2v))
        lam = link.wavelength_m
        with np.errstate(divide="ignore", invalid="ignore"):
            transfer = (link.rx_antenna_gain_dbi
                        - 20.0 * np.log10(4.0 * math.pi * d2 / lam)
                        + 20.0 * math.log10(lam / (4.0 * math.pi)))
            q = self.panel.element_gain_exponent
            if q > 0:
                cos2 = np.clip(np.abs(d2v @ self.panel.normal) / d2, 0.0, 1.0)
                transfer = transfer + 20.0 * q * np.log10(cos2)
        injected = (link.noise_power_dbm + extra
                    + 10.0 * math.log10(self.panel.n_elements) + transfer)
        injected = np.where(np.isfinite(injected), injected, -math.inf)
        return 10.0 * np.log10(10.0 ** (floor / 10.0) + 10.0 ** (injected / 10.0))


def cascade_received_power(panel: RisPanel, config: PhaseConfiguration,
                           tx: Position3, rx: Position3, link: LinkBudget) -> CascadeResult:
    """Coherent element-cascade signal at the receiver plus the effective
    noise floor the receiver sees for this panel kind.

    The caller is responsible for terrain visibility of both legs.
    """
    if config is not None and len(config) != panel.n_elements:
        raise SimulationError(
            f"configuration length {len(config)} does not match panel "
            f"{panel.n_rows}x{panel.n_cols}"
        )
    return CascadeGeometry(panel, tx, link).evaluate(rx, config)


def steered_cascade_power(panel: RisPanel, tx: Position3, rx: Position3,
                          link: LinkBudget) -> CascadeResult:
    """Cascade under the exact steering profile for (tx, rx).

    Identical to ``cascade_received_power`` with ``steering_phase_profile``:
    the steering phases cancel the propagation phases element by element, so
    the coherent sum reduces to the sum of element amplitude magnitudes.
    """
    return CascadeGeometry(panel, tx, link).evaluate(rx, None)


# ----------------------------------------------------------------------
# Power consumption
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PowerEstimate:
    power_class: str  # Low | Medium | High
    estimate_w: float


_CONTROL_W_PER_ELEMENT = 1e-3
_SENSOR_W = 0.05
_AMPLIFIER_W = 0.5
_ACTIVE_W_PER_ELEMENT = 0.1


def ris_power_consumption(panel: RisPanel) -> PowerEstimate:
    """Qualitative class plus a coarse wattage estimate per kind."""
    n = panel.n_elements
    base = n * _CONTROL_W_PER_ELEMENT
    kind = panel.kind
    if isinstance(kind, (Passive, Star)):
        return PowerEstimate("Low", base)
    if isinstance(kind, SemiPassive):
        return PowerEstimate("Low", base + _SENSOR_W)
    if isinstance(kind, Amplifying):
        return PowerEstimate("Medium", base + _AMPLIFIER_W)
    return PowerEstimate("High", base + n * _ACTIVE_W_PER_ELEMENT)
