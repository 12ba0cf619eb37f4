"""RIS cascade model tests: steering, array gain, kind behaviour, codebooks."""

import math

import numpy as np
import pytest

from marsris.errors import GeometryError, SimulationError
from marsris.propagation import LinkBudget, free_space_path_loss_db
from marsris.ris import (
    Active,
    Amplifying,
    CascadeGeometry,
    Passive,
    PhaseConfiguration,
    RisPanel,
    SemiPassive,
    Star,
    StarMode,
    cascade_received_power,
    element_positions,
    generate_codebook,
    half_wavelength_spacing,
    orientation_angles,
    orientation_vectors,
    ris_power_consumption,
    steered_cascade_power,
    steering_phase_profile,
)
from marsris.terrain import Position3

LINK = LinkBudget()
LAM = LINK.wavelength_m


def make_panel(n=8, kind=None, q=0.0, spacing=None, center=(0.0, 0.0, 0.0)):
    """Panel in the x-y plane facing +z (normal up, rows along +x)."""
    return RisPanel(
        id="test",
        center=Position3(*center),
        normal=np.array([0.0, 0.0, 1.0]),
        up=np.array([1.0, 0.0, 0.0]),
        n_rows=n,
        n_cols=n,
        element_spacing_m=spacing or half_wavelength_spacing(LINK.frequency_hz),
        element_gain_exponent=q,
        kind=kind or Passive(),
    )


def brute_cascade_dbm(panel, phases, tx, rx, link, magnitude=1.0, offset_db=0.0):
    """Independent phasor sum straight from the documented element model."""
    lam = link.wavelength_m
    unit = lam / (4 * math.pi)
    gain = 10 ** ((link.tx_power_dbm + link.tx_antenna_gain_dbi
                   + link.rx_antenna_gain_dbi) / 20)
    total = 0j
    q = panel.element_gain_exponent
    for e, p in enumerate(element_positions(panel)):
        d1 = tx.distance_to(p)
        d2 = rx.distance_to(p)
        amp = gain * unit ** 3 / (d1 * d2) * magnitude
        if q > 0:
            n = panel.normal
            cos1 = abs(np.dot(tx.as_array() - p.as_array(), n)) / d1
            cos2 = abs(np.dot(rx.as_array() - p.as_array(), n)) / d2
            amp *= cos1 ** q * cos2 ** q
        total += amp * np.exp(1j * (2 * math.pi / lam * (d1 + d2) + phases[e]))
    return 20 * math.log10(abs(total)) + offset_db


# ----------------------------------------------------------------------
# Geometry
# ----------------------------------------------------------------------

def test_single_element_panel_sits_at_centre():
    panel = make_panel(n=1, center=(3.0, -2.0, 7.0))
    pts = element_positions(panel)
    assert len(pts) == 1
    assert pts[0] == Position3(3.0, -2.0, 7.0)


def test_two_by_two_square():
    s = 0.06
    panel = make_panel(n=2, spacing=s)
    pts = np.array([p.as_array() for p in element_positions(panel)])
    assert pts.shape == (4, 3)
    dists = np.linalg.norm(pts - pts[0], axis=1)
    assert sorted(np.round(dists, 9).tolist())[1] == pytest.approx(s)


@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_centroid_is_panel_centre(n):
    panel = make_panel(n=n, center=(1.0, 2.0, 3.0))
    pts = np.array([p.as_array() for p in element_positions(panel)])
    np.testing.assert_allclose(pts.mean(axis=0), [1.0, 2.0, 3.0], atol=1e-9)


def test_orientation_round_trip():
    for az, tilt in [(0.0, 0.0), (45.0, -30.0), (180.0, 10.0), (0.0, -90.0), (90.0, 90.0)]:
        n, u = orientation_vectors(az, tilt)
        az2, tilt2 = orientation_angles(n, u)
        n2, u2 = orientation_vectors(az2, tilt2)
        np.testing.assert_allclose(n, n2, atol=1e-9)
        np.testing.assert_allclose(u, u2, atol=1e-9)


def test_panel_validation():
    with pytest.raises(GeometryError):
        RisPanel("bad", Position3(0, 0, 0), np.array([0, 0, 2.0]),
                 np.array([1.0, 0, 0]))
    with pytest.raises(GeometryError):
        RisPanel("bad", Position3(0, 0, 0), np.array([0, 0, 1.0]),
                 np.array([0, 0, 1.0]))


# ----------------------------------------------------------------------
# Steering
# ----------------------------------------------------------------------

def test_steering_cophases_to_array_gain():
    panel = make_panel(n=8)
    tx = Position3(30.0, 5.0, 60.0)
    rx = Position3(-40.0, -10.0, 80.0)
    config = steering_phase_profile(panel, tx, rx, LINK.frequency_hz)
    many = brute_cascade_dbm(panel, config.phases, tx, rx, LINK)
    single = brute_cascade_dbm(make_panel(n=1), [0.0], tx, rx, LINK)
    assert many - single == pytest.approx(20 * math.log10(64), abs=0.1)


def test_zero_phases_never_beat_steering():
    panel = make_panel(n=8)
    tx = Position3(30.0, 5.0, 60.0)
    rx = Position3(-40.0, -10.0, 80.0)
    steered = cascade_received_power(
        panel, steering_phase_profile(panel, tx, rx, LINK.frequency_hz), tx, rx, LINK)
    flat = cascade_received_power(
        panel, PhaseConfiguration(np.zeros(64)), tx, rx, LINK)
    assert flat.signal_dbm <= steered.signal_dbm + 1e-9


def test_steering_is_optimal_over_dense_phase_grid():
    # 2x2 panel, pi/16 grid over all four element phases (vectorised sweep)
    panel = make_panel(n=2)
    tx = Position3(10.0, 3.0, 25.0)
    rx = Position3(-12.0, -4.0, 30.0)
    geom = CascadeGeometry(panel, tx, LINK)
    amp, d2 = geom._leg2(rx.as_array())
    base_phase = 2 * math.pi / LAM * (geom._d1 + d2)
    contribs = amp * np.exp(1j * base_phase)

    steps = np.arange(32) * (math.pi / 16.0)
    grids = np.meshgrid(steps, steps, steps, steps, indexing="ij")
    total = np.zeros(grids[0].shape, dtype=complex)
    for e in range(4):
        total += contribs[e] * np.exp(1j * grids[e])
    best_brute = np.abs(total).max()

    steered = cascade_received_power(
        panel, steering_phase_profile(panel, tx, rx, LINK.frequency_hz), tx, rx, LINK)
    assert steered.signal_dbm >= 20 * math.log10(best_brute) - 1e-9


def test_steering_rejects_terminals_behind_reflecting_panel():
    panel = make_panel(n=4)
    with pytest.raises(GeometryError):
        steering_phase_profile(panel, Position3(0, 0, -50.0), Position3(10, 0, 50.0),
                               LINK.frequency_hz)
    with pytest.raises(GeometryError):
        steering_phase_profile(panel, Position3(0, 0, 50.0), Position3(10, 0, -50.0),
                               LINK.frequency_hz)


# ----------------------------------------------------------------------
# Cascade kinds
# ----------------------------------------------------------------------

def test_single_element_cascade_closed_form():
    panel = make_panel(n=1)
    tx = Position3(0.0, 0.0, 100.0)
    rx = Position3(60.0, 0.0, 80.0)  # also exactly 100 m from the element
    d1 = tx.distance_to(Position3(0, 0, 0))
    d2 = rx.distance_to(Position3(0, 0, 0))
    expected = (LINK.tx_power_dbm + LINK.tx_antenna_gain_dbi + LINK.rx_antenna_gain_dbi
                - free_space_path_loss_db(d1, LINK.frequency_hz)
                - free_space_path_loss_db(d2, LINK.frequency_hz)
                + 20 * math.log10(LAM / (4 * math.pi)))
    got = steered_cascade_power(panel, tx, rx, LINK)
    assert got.signal_dbm == pytest.approx(expected, abs=1e-9)
    assert got.effective_noise_dbm == LINK.noise_power_dbm


def test_amplifying_vs_star_signal_gap_is_exactly_the_gain():
    tx = Position3(20.0, 5.0, 90.0)
    rx = Position3(-30.0, 10.0, 120.0)
    amp = steered_cascade_power(make_panel(kind=Amplifying(10.0, 5.0)), tx, rx, LINK)
    star = steered_cascade_power(make_panel(kind=Star(StarMode.REFLECT, 1.0, 1.0)),
                                 tx, rx, LINK)
    assert amp.signal_dbm - star.signal_dbm == pytest.approx(10.0, abs=1e-12)


def test_amplifier_gain_additivity():
    tx = Position3(20.0, 5.0, 90.0)
    rx = Position3(-30.0, 10.0, 120.0)
    for gain in (3.0, 10.0, 17.5):
        hi = steered_cascade_power(make_panel(kind=Amplifying(gain, 5.0)), tx, rx, LINK)
        lo = steered_cascade_power(make_panel(kind=Amplifying(0.0, 5.0)), tx, rx, LINK)
        assert hi.signal_dbm - lo.signal_dbm == pytest.approx(gain, abs=1e-12)


def test_amplifying_noise_injection():
    tx = Position3(20.0, 5.0, 90.0)
    rx = Position3(-30.0, 10.0, 15.0)
    panel = make_panel(kind=Amplifying(10.0, 5.0))
    noisy = steered_cascade_power(panel, tx, rx, LINK)
    assert noisy.effective_noise_dbm > LINK.noise_power_dbm
    quiet = steered_cascade_power(
        make_panel(kind=Amplifying(10.0, 5.0, amplifier_noise_enabled=False)), tx, rx, LINK)
    assert quiet.effective_noise_dbm == LINK.noise_power_dbm
    # hand check: injected = floor + G + F + 10log10(N) + leg2 transfer
    d2 = rx.distance_to(panel.center)
    injected = (LINK.noise_power_dbm + 15.0 + 10 * math.log10(64)
                + LINK.rx_antenna_gain_dbi
                - free_space_path_loss_db(d2, LINK.frequency_hz)
                + 20 * math.log10(LAM / (4 * math.pi)))
    expected = 10 * math.log10(10 ** (LINK.noise_power_dbm / 10) + 10 ** (injected / 10))
    assert noisy.effective_noise_dbm == pytest.approx(expected, abs=1e-9)


def test_star_dual_sided_zero_reflect_coefficient():
    panel = make_panel(kind=Star(StarMode.DUAL_SIDED, reflect_magnitude=0.0,
                                 transmit_magnitude=1.0))
    tx = Position3(20.0, 5.0, 90.0)
    same_side = Position3(-30.0, 10.0, 120.0)
    res = steered_cascade_power(panel, tx, same_side, LINK)
    assert res.signal_dbm == -math.inf
    other_side = Position3(-30.0, 10.0, -120.0)
    res = steered_cascade_power(panel, tx, other_side, LINK)
    assert math.isfinite(res.signal_dbm)


def test_star_transmit_serves_only_the_far_side():
    panel = make_panel(kind=Star(StarMode.TRANSMIT, 1.0, 1.0))
    tx = Position3(20.0, 5.0, 90.0)
    with pytest.raises(GeometryError):
        steered_cascade_power(panel, tx, Position3(-30.0, 10.0, 120.0), LINK)
    assert math.isfinite(
        steered_cascade_power(panel, tx, Position3(-30.0, 10.0, -120.0), LINK).signal_dbm)


def test_reflect_only_dark_side_error():
    for kind in (Passive(), SemiPassive(), Active(), Star(StarMode.REFLECT)):
        panel = make_panel(kind=kind)
        with pytest.raises(GeometryError):
            steered_cascade_power(panel, Position3(0, 0, 50.0),
                                  Position3(10.0, 0, -50.0), LINK)


def test_passivity_of_sub_unit_magnitudes():
    tx = Position3(20.0, 5.0, 90.0)
    rx = Position3(-30.0, 10.0, 120.0)
    full = steered_cascade_power(make_panel(kind=Star(StarMode.REFLECT, 1.0, 1.0)),
                                 tx, rx, LINK)
    for mag in (0.2, 0.5, 0.9):
        dimmed = steered_cascade_power(
            make_panel(kind=Star(StarMode.REFLECT, mag, 1.0)), tx, rx, LINK)
        assert dimmed.signal_dbm <= full.signal_dbm + 1e-12


def test_passive_cascade_reciprocity():
    panel = make_panel(n=8)
    tx = Position3(35.0, -12.0, 70.0)
    rx = Position3(-25.0, 18.0, 45.0)
    forward = steered_cascade_power(panel, tx, rx, LINK)
    backward = steered_cascade_power(panel, rx, tx, LINK)
    assert forward.signal_dbm == pytest.approx(backward.signal_dbm, abs=1e-9)


def test_cascade_agrees_with_brute_force_for_random_configs():
    panel = make_panel(n=4)
    tx = Position3(10.0, 3.0, 40.0)
    rx = Position3(-15.0, -6.0, 55.0)
    rng = np.random.default_rng(2)
    for _ in range(5):
        phases = rng.uniform(0, 2 * math.pi, panel.n_elements)
        got = cascade_received_power(panel, PhaseConfiguration(phases), tx, rx, LINK)
        want = brute_cascade_dbm(panel, phases, tx, rx, LINK)
        assert got.signal_dbm == pytest.approx(want, abs=1e-9)


def test_batch_matches_scalar_evaluation():
    panel = make_panel(n=8, q=0.285)
    tx = Position3(10.0, 3.0, 40.0)
    geom = CascadeGeometry(panel, tx, LINK)
    rng = np.random.default_rng(8)
    rxs = np.column_stack([rng.uniform(-50, 50, 20), rng.uniform(-50, 50, 20),
                           rng.uniform(10, 80, 20)])
    batch = geom.steered_signal_batch(rxs)
    for i in range(20):
        scalar = geom.evaluate(Position3(*rxs[i]), None)
        assert batch[i] == pytest.approx(scalar.signal_dbm, abs=1e-9)


# ----------------------------------------------------------------------
# Codebooks
# ----------------------------------------------------------------------

def test_codebook_single_entry_points_along_normal():
    panel = make_panel(n=4)
    source = Position3(5.0, 0.0, 60.0)
    book = generate_codebook(panel, source, [0.0], [0.0], 500.0, LINK.frequency_hz)
    assert len(book) == 1
    assert book.entries[0].azimuth_rad == 0.0


def test_codebook_entry_count_and_distinct_boresights():
    panel = make_panel(n=4)
    source = Position3(5.0, 0.0, 60.0)
    az = np.radians(np.linspace(-70, 70, 36))
    book = generate_codebook(panel, source, az, [0.0], 500.0, LINK.frequency_hz)
    assert len(book) == 36
    boresights = {(e.azimuth_rad, e.elevation_rad) for e in book.entries}
    assert len(boresights) == 36


def test_each_codeword_wins_at_its_own_boresight():
    from marsris.ris import direction_from_angles
    panel = make_panel(n=8)
    source = Position3(5.0, 0.0, 60.0)
    az = np.radians(np.linspace(-40, 40, 9))
    el = np.radians([-10.0, 0.0, 10.0])
    beam_range = 400.0
    book = generate_codebook(panel, source, az, el, beam_range, LINK.frequency_hz)
    for target_idx in range(0, len(book), 5):
        entry = book.entries[target_idx]
        spot = Position3(*(panel.center.as_array()
                           + beam_range * direction_from_angles(
                               panel, entry.azimuth_rad, entry.elevation_rad)))
        powers = [cascade_received_power(panel, e.config, source, spot, LINK).signal_dbm
                  for e in book.entries]
        assert int(np.argmax(powers)) == target_idx


# ----------------------------------------------------------------------
# Power consumption
# ----------------------------------------------------------------------

@pytest.mark.parametrize("kind,expected", [
    (Passive(), "Low"),
    (Star(StarMode.REFLECT), "Low"),
    (SemiPassive(), "Low"),
    (Amplifying(), "Medium"),
    (Active(), "High"),
])
def test_power_classes(kind, expected):
    est = ris_power_consumption(make_panel(kind=kind))
    assert est.power_class == expected
    assert est.estimate_w > 0


def test_config_length_must_match_panel():
    panel = make_panel(n=4)
    with pytest.raises(SimulationError):
        cascade_received_power(panel, PhaseConfiguration(np.zeros(9)),
                               Position3(0, 0, 50), Position3(5, 5, 50), LINK)
