"""Codebook-based beam-sweep localization.

The panel radiates its predefined beams one after another, the receiver
reports the RSS of each, and the codeword with the largest RSS fixes both the
angle estimate and the phase configuration used for the subsequent link.
Measurement reporting is assumed to ride on an ideal feedback channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from .errors import GeometryError, NoCoverageError, SimulationError
from .propagation import LinkBudget
from .ris import (
    Codebook,
    PhaseConfiguration,
    RisPanel,
    cascade_received_power,
    generate_codebook,
)
from .terrain import HeightField, Position3, line_of_sight


@dataclass
class SweepContext:
    """Everything a sweep needs: world, panel and the two terminals."""

    terrain: HeightField
    panel: RisPanel
    tx: Position3
    rx: Position3
    link: LinkBudget


@dataclass
class SweepMeasurement:
    rss_dbm: np.ndarray  # one entry per codeword, -inf where no signal arrives
    noise_seed: int

    def __post_init__(self):
        self.rss_dbm = np.asarray(self.rss_dbm, dtype=float)

    def __len__(self):
        return self.rss_dbm.size


@dataclass(frozen=True)
class AngleEstimate:
    azimuth_rad: float
    elevation_rad: float
    half_width_rad: float
    winning_index: int


@dataclass(frozen=True)
class TwoStageResult:
    estimate: AngleEstimate
    codewords_evaluated: int
    coarse_estimate: AngleEstimate


def beam_sweep(ctx: SweepContext, codebook: Codebook, noise_stddev_db: float = 0.0,
               seed: int = 0) -> SweepMeasurement:
    """Radiate every codeword in order and record the (optionally perturbed) RSS.

    The perturbation is zero-mean Gaussian in dB, seeded and drawn per
    codeword, standing in for fading on the measurement.  A blocked
    panel->receiver leg (or a dark-side receiver) yields the -inf sentinel;
    a blocked transmitter->panel leg makes the whole sweep impossible.
    """
    if noise_stddev_db < 0:
        raise SimulationError("noise stddev must be >= 0 dB")
    if not line_of_sight(ctx.terrain, ctx.tx, ctx.panel.center):
        raise GeometryError("transmitter->panel path is blocked; sweep impossible")
    rx_visible = line_of_sight(ctx.terrain, ctx.panel.center, ctx.rx)
    rng = np.random.default_rng(seed)
    rss = np.full(len(codebook), -math.inf)
    for i, entry in enumerate(codebook.entries):
        noise = rng.normal(0.0, noise_stddev_db)
        if not rx_visible:
            continue
        try:
            result = cascade_received_power(ctx.panel, entry.config, ctx.tx, ctx.rx, ctx.link)
        except GeometryError:
            continue
        if math.isfinite(result.signal_dbm):
            rss[i] = result.signal_dbm + noise
    return SweepMeasurement(rss, seed)


def estimate_angle(meas: SweepMeasurement, codebook: Codebook) -> AngleEstimate:
    """Argmax codeword (ties -> lowest index) mapped to its boresight."""
    if len(meas) != len(codebook):
        raise SimulationError("measurement and codebook lengths differ")
    if not np.any(np.isfinite(meas.rss_dbm)):
        raise NoCoverageError("no finite RSS in sweep; receiver is not covered")
    idx = int(np.argmax(meas.rss_dbm))
    entry = codebook.entries[idx]
    return AngleEstimate(entry.azimuth_rad, entry.elevation_rad,
                         _half_min_spacing(codebook), idx)


def _half_min_spacing(codebook: Codebook) -> float:
    gaps = []
    for vals in (
        sorted({e.azimuth_rad for e in codebook.entries}),
        sorted({e.elevation_rad for e in codebook.entries}),
    ):
        gaps.extend(b - a for a, b in zip(vals, vals[1:]) if b - a > 1e-15)
    if not gaps:
        return math.pi  # single-beam codebook: no angular resolution to speak of
    return min(gaps) / 2.0


def configure_from_estimate(panel: RisPanel, estimate: AngleEstimate,
                            codebook: Codebook) -> PhaseConfiguration:
    """Reuse the winning codeword's configuration for the data link."""
    if not 0 <= estimate.winning_index < len(codebook):
        raise SimulationError("winning index outside codebook")
    return codebook.entries[estimate.winning_index].config


def two_stage_sweep(ctx: SweepContext, coarse_spacing_rad: float, refine_factor: int,
                    noise_stddev_db: float = 0.0, seed: int = 0,
                    full_range_rad: float = math.pi, beam_range_m: float = 1000.0,
                    elevation_rad: float = 0.0) -> TwoStageResult:
    """Coarse azimuth sweep over the full range, then a fine sweep restricted
    to +/- one coarse step around the coarse winner.

    Always evaluates strictly fewer codewords than a single fine sweep of the
    whole range would.
    """
    if refine_factor < 2:
        raise SimulationError("refine_factor must be >= 2")
    if not 0 < coarse_spacing_rad <= full_range_rad:
        raise SimulationError("coarse spacing must be in (0, full_range]")
    half = full_range_rad / 2.0
    n_coarse = int(math.floor(full_range_rad / coarse_spacing_rad + 1e-9)) + 1
    coarse_az = -half + coarse_spacing_rad * np.arange(n_coarse)

    coarse_cb = generate_codebook(ctx.panel, ctx.tx, coarse_az, [elevation_rad],
                                  beam_range_m, ctx.link.frequency_hz)
    coarse_meas = beam_sweep(ctx, coarse_cb, noise_stddev_db, seed)
    coarse_est = estimate_angle(coarse_meas, coarse_cb)

    fine_step = coarse_spacing_rad / refine_factor
    offsets = fine_step * np.arange(-refine_factor, refine_factor + 1)
    fine_az = coarse_est.azimuth_rad + offsets
    fine_az = fine_az[(fine_az >= -half - 1e-12) & (fine_az <= half + 1e-12)]
    fine_cb = generate_codebook(ctx.panel, ctx.tx, fine_az, [elevation_rad],
                                beam_range_m, ctx.link.frequency_hz)
    fine_meas = beam_sweep(ctx, fine_cb, noise_stddev_db, seed + 1)
    fine_est = estimate_angle(fine_meas, fine_cb)
    return TwoStageResult(fine_est, len(coarse_cb) + len(fine_cb), coarse_est)


def export_sweep_csv(meas: SweepMeasurement, codebook: Codebook, stream: TextIO) -> None:
    stream.write("index,azimuth_deg,elevation_deg,rss_dbm\n")
    for i, entry in enumerate(codebook.entries):
        rss = meas.rss_dbm[i]
        rss_txt = "-inf" if rss == -math.inf else f"{rss:.6g}"
        stream.write(f"{i},{math.degrees(entry.azimuth_rad):.6g},"
                     f"{math.degrees(entry.elevation_rad):.6g},{rss_txt}\n")
