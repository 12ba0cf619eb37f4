"""Channel primitives: material response, Fresnel reflection, free-space loss,
coherent multipath aggregation and SNR.

All public interfaces speak dB/dBm; linear quantities stay internal.  Field
amplitudes are voltage-proportional with a 1 mW reference, i.e.
``power_dbm = 20*log10(amplitude)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .errors import DelegatedInteractionError, SimulationError, UnsupportedFrequencyError
from .terrain import Position3

SPEED_OF_LIGHT = 299_792_458.0
EPSILON_0 = 8.8541878128e-12
MAX_MODEL_FREQUENCY_HZ = 6e9  # atmospheric loss is only claimed negligible below this

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MaterialProperties:
    """Electrical ground properties (Mars regolith defaults)."""

    conductivity_s_per_m: float = 1e-8
    relative_permittivity: float = 4.0

    def __post_init__(self):
        if self.conductivity_s_per_m < 0:
            raise SimulationError("conductivity must be >= 0")
        if self.relative_permittivity < 1:
            raise SimulationError("relative permittivity must be >= 1")


@dataclass(frozen=True)
class AtmosphereProfile:
    """Recorded surface weather; does not attenuate below 6 GHz."""

    temperature_c: float = -63.0
    pressure_mbar: float = 6.1
    humidity_percent: float = 20.0

    def __post_init__(self):
        if self.pressure_mbar <= 0:
            raise SimulationError("pressure must be positive")
        if not 0.0 <= self.humidity_percent <= 100.0:
            raise SimulationError("humidity must be within [0, 100] %")


@dataclass(frozen=True)
class LinkBudget:
    frequency_hz: float = 5e9
    tx_power_dbm: float = 10.0
    tx_antenna_gain_dbi: float = 20.0
    rx_antenna_gain_dbi: float = 20.0
    lna_gain_db: float = 10.0
    noise_power_dbm: float = -100.0

    def __post_init__(self):
        if self.frequency_hz <= 0:
            raise SimulationError("frequency must be positive")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz


class Polarization(str, Enum):
    PERPENDICULAR = "perpendicular"
    PARALLEL = "parallel"


@dataclass(frozen=True)
class GroundReflection:
    incidence_angle_rad: float  # from the surface normal
    polarization: Polarization = Polarization.PERPENDICULAR


@dataclass(frozen=True)
class RisInteraction:
    panel_id: str
    element_id: int = -1


Interaction = Union[GroundReflection, RisInteraction]


@dataclass(frozen=True)
class PropagationPath:
    vertices: tuple
    interactions: tuple
    total_length_m: float

    @classmethod
    def from_vertices(cls, vertices: Sequence[Position3],
                      interactions: Sequence[Interaction] = ()) -> "PropagationPath":
        if len(vertices) < 2:
            raise SimulationError("a path needs at least 2 vertices")
        length = sum(vertices[i].distance_to(vertices[i + 1]) for i in range(len(vertices) - 1))
        return cls(tuple(vertices), tuple(interactions), length)


@dataclass(frozen=True)
class FieldContribution:
    amplitude: float  # linear, voltage-proportional, 1 mW reference
    phase_rad: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise SimulationError("field amplitude must be >= 0")
        object.__setattr__(self, "phase_rad", self.phase_rad % _TWO_PI)


def dbm_to_amplitude(power_dbm: float) -> float:
    return 10.0 ** (power_dbm / 20.0)


def amplitude_to_dbm(amplitude: float) -> float:
    if amplitude <= 0.0:
        return -math.inf
    return 20.0 * math.log10(amplitude)


def power_sum_dbm(levels_dbm) -> float:
    """Linear-power sum of dBm levels."""
    finite = [p for p in levels_dbm if math.isfinite(p)]
    if not finite:
        return -math.inf
    return 10.0 * math.log10(sum(10.0 ** (p / 10.0) for p in finite))


def complex_permittivity(mat: MaterialProperties, frequency_hz: float) -> complex:
    """eps_r - j*sigma/(2*pi*f*eps0)."""
    if frequency_hz <= 0:
        raise SimulationError("frequency must be positive")
    return complex(
        mat.relative_permittivity,
        -mat.conductivity_s_per_m / (_TWO_PI * frequency_hz * EPSILON_0),
    )


def fresnel_reflection(eps: complex, incidence_angle_rad: float,
                       polarization: Polarization = Polarization.PERPENDICULAR) -> complex:
    """Fresnel reflection coefficient, air onto a medium of permittivity eps.

    The incidence angle is measured from the surface normal, in [0, pi/2).
    """
    if not 0.0 <= incidence_angle_rad < math.pi / 2:
        raise SimulationError("incidence angle must be in [0, pi/2)")
    cos_i = math.cos(incidence_angle_rad)
    sin2 = math.sin(incidence_angle_rad) ** 2
    root = cmath.sqrt(eps - sin2)
    if polarization == Polarization.PERPENDICULAR:
        return (cos_i - root) / (cos_i + root)
    return (eps * cos_i - root) / (eps * cos_i + root)


def free_space_path_loss_db(distance_m: float, frequency_hz: float) -> float:
    """20*log10(4*pi*d*f/c)."""
    if distance_m <= 0:
        raise SimulationError(f"distance must be positive, got {distance_m}")
    if frequency_hz <= 0:
        raise SimulationError("frequency must be positive")
    return 20.0 * math.log10(4.0 * math.pi * distance_m * frequency_hz / SPEED_OF_LIGHT)


def atmospheric_attenuation_db(profile: AtmosphereProfile, frequency_hz: float,
                               distance_m: float) -> float:
    """0 dB across the sub-6 GHz validity domain; refuses frequencies above it."""
    if frequency_hz > MAX_MODEL_FREQUENCY_HZ:
        raise UnsupportedFrequencyError(
            f"atmospheric model only valid up to {MAX_MODEL_FREQUENCY_HZ / 1e9:.0f} GHz, "
            f"got {frequency_hz / 1e9:.3g} GHz"
        )
    if distance_m < 0:
        raise SimulationError("distance must be >= 0")
    return 0.0


def path_field(path: PropagationPath, link: LinkBudget,
               terrain_mat: MaterialProperties) -> FieldContribution:
    """Amplitude/phase of one geometric path (direct or ground-bounced).

    RIS interactions are handled by the ris module; a path containing one is
    rejected so the two models cannot silently diverge.
    """
    amp_dbm = (link.tx_power_dbm + link.tx_antenna_gain_dbi + link.rx_antenna_gain_dbi
               - free_space_path_loss_db(path.total_length_m, link.frequency_hz))
    amplitude = dbm_to_amplitude(amp_dbm)
    phase = _TWO_PI * path.total_length_m / link.wavelength_m
    eps = complex_permittivity(terrain_mat, link.frequency_hz)
    for inter in path.interactions:
        if isinstance(inter, RisInteraction):
            raise DelegatedInteractionError(
                f"path touches RIS panel '{inter.panel_id}'; route it through the ris module"
            )
        gamma = fresnel_reflection(eps, inter.incidence_angle_rad, inter.polarization)
        amplitude *= abs(gamma)
        phase += cmath.phase(gamma)
    return FieldContribution(amplitude, phase % _TWO_PI)


def aggregate_power_dbm(contributions: Sequence[FieldContribution]) -> float:
    """Coherent phasor sum in dBm; empty input is the no-signal sentinel."""
    if not contributions:
        return -math.inf
    total = sum(c.amplitude * cmath.exp(1j * c.phase_rad) for c in contributions)
    return amplitude_to_dbm(abs(total))


def snr_db(received_power_dbm: float, noise_power_dbm: float, lna_gain_db: float = 0.0) -> float:
    """received + LNA - noise.  Pass an effective noise power for chains that
    inject amplifier noise of their own."""
    return received_power_dbm + lna_gain_db - noise_power_dbm
