"""
Unit tests -- pulse elements, predefined sequences, quasi-static noise.
"""
import numpy as np
import pytest

from src.core.errors import InvalidParameterError
from src.core.units import US
from src.pulses.elements import (
    MagneticPulse,
    MechanicalDrive,
    Polarize,
    PulseSequence,
    Qubit,
    Readout,
    TimedElement,
    Wait,
)
from src.pulses.noise import NoiseModel, bath_shift, draw_detuning, spawn_streams
from src.pulses.sequences import (
    adiabatic_passage,
    reference_sequences,
    sequence_hahn,
    sequence_rabi_highQ,
    sequence_rabi_lowQ,
    sequence_ramsey,
)
from src.resonator.ring import RingModel
from src.spin.operators import DOUBLE_PAIR, MINUS_PAIR, PLUS_PAIR


@pytest.fixture(scope="module")
def ring():
    return RingModel.from_lab_units(529.0, 4000, 3.0)


# ── Elements ────────────────────────────────────────────


def test_qubit_pairs():
    assert Qubit.SQ_MINUS.pair == MINUS_PAIR
    assert Qubit.SQ_PLUS.pair == PLUS_PAIR
    assert Qubit.DOUBLE.pair == DOUBLE_PAIR
    assert Qubit.MECHANICAL.is_double_quantum
    assert not Qubit.SQ_PLUS.is_double_quantum


def test_magnetic_pulse_validation():
    with pytest.raises(InvalidParameterError):
        MagneticPulse(pair=DOUBLE_PAIR)
    with pytest.raises(InvalidParameterError):
        MagneticPulse(pair=MINUS_PAIR, duration=0.0, idealized=False)
    p = MagneticPulse(pair=MINUS_PAIR, duration=30e-9, idealized=False)
    assert p.span == 30e-9
    assert np.isclose(p.rabi, np.pi / 30e-9)


def test_polarize_efficiency_range():
    with pytest.raises(InvalidParameterError):
        Polarize(efficiency=1.2)


def test_ringing_drive_takes_pulse_length(ring):
    d = MechanicalDrive.ringing(ring)
    assert d.duration == ring.pulse_length
    assert not d.is_square
    start, stop = d.active_window
    assert start == ring.trigger_offset
    assert stop > ring.pulse_length


def test_chain_places_elements_back_to_back():
    seq = PulseSequence.chain(Polarize(), Wait(1 * US), MechanicalDrive.square(2 * US), Readout())
    starts = [it.start for it in seq.items]
    assert starts == pytest.approx([0.0, 0.0, 1 * US, 3 * US])
    assert seq.end == pytest.approx(3 * US)


def test_finite_magnetic_pulses_may_not_overlap():
    p = MagneticPulse(pair=MINUS_PAIR, duration=50e-9, idealized=False)
    with pytest.raises(InvalidParameterError):
        PulseSequence([TimedElement(0.0, p), TimedElement(20e-9, p)])


def test_mechanical_drive_may_overlap_magnetic(ring):
    seq = sequence_rabi_highQ(1 * US, 5.41 * US, ring)
    assert len(seq.elements(MechanicalDrive)) == 1
    assert len(seq.elements(MagneticPulse)) == 2


def test_sequence_dict_round_trip(ring):
    seq = sequence_rabi_highQ(0.5 * US, 5.41 * US, ring, idealized=False)
    back = PulseSequence.from_dict(seq.to_dict())
    assert [type(it.element) for it in back.items] == [type(it.element) for it in seq.items]
    assert [it.start for it in back.items] == pytest.approx([it.start for it in seq.items])
    drive = back.elements(MechanicalDrive)[0].element
    assert drive.ring.tau_r == pytest.approx(ring.tau_r)
    assert drive.duration == pytest.approx(ring.pulse_length)


# ── Sequences ───────────────────────────────────────────


def test_lowq_sequence_balances_drive_time():
    seq = sequence_rabi_lowQ(1 * US, 3 * US)
    drives = seq.elements(MechanicalDrive)
    assert sum(d.element.duration for d in drives) == pytest.approx(3 * US)
    unbalanced = sequence_rabi_lowQ(1 * US, 3 * US, balance=False)
    assert len(unbalanced.elements(MechanicalDrive)) == 1


def test_lowq_sequence_rejects_drive_beyond_length():
    with pytest.raises(InvalidParameterError):
        sequence_rabi_lowQ(4 * US, 3 * US)
    with pytest.raises(InvalidParameterError):
        sequence_rabi_lowQ(1 * US, 3 * US, readout_via="sideways")


def test_highq_pulse_pair_spacing(ring):
    seq = sequence_rabi_highQ(-1 * US, 5.41 * US, ring)
    first, second = seq.elements(MagneticPulse)
    assert first.start == -1 * US
    assert second.start == pytest.approx(4.41 * US)
    with pytest.raises(InvalidParameterError):
        sequence_rabi_highQ(0.0, 0.0, ring)


def test_ramsey_second_pulse_sign_sets_phase():
    plus = sequence_ramsey(Qubit.SQ_MINUS, 1 * US, 1)
    minus = sequence_ramsey(Qubit.SQ_MINUS, 1 * US, -1)
    assert plus.elements(MagneticPulse)[-1].element.phase == 0.0
    assert minus.elements(MagneticPulse)[-1].element.phase == pytest.approx(np.pi)
    with pytest.raises(InvalidParameterError):
        sequence_ramsey(Qubit.SQ_MINUS, 1 * US, 0)


def test_ramsey_phase_ramp():
    omega_rot = 2 * np.pi * 3.5e6
    seq = sequence_ramsey(Qubit.SQ_PLUS, 1 * US, 1, omega_rot=omega_rot)
    assert seq.elements(MagneticPulse)[-1].element.phase == pytest.approx(-omega_rot * 1 * US)


def test_mechanical_ramsey_needs_pi_half():
    with pytest.raises(InvalidParameterError):
        sequence_ramsey(Qubit.MECHANICAL, 1 * US)
    seq = sequence_ramsey(Qubit.MECHANICAL, 1 * US, mech_pi_half=0.25 * US)
    assert len(seq.elements(MechanicalDrive)) == 2


def test_hahn_without_refocus_drops_pi():
    echo = sequence_hahn(Qubit.SQ_MINUS, 1 * US)
    free = sequence_hahn(Qubit.SQ_MINUS, 1 * US, refocus=False)
    assert len(echo.elements(MagneticPulse)) == 3
    assert len(free.elements(MagneticPulse)) == 2
    dq = sequence_hahn(Qubit.DOUBLE, 1 * US)
    assert len(dq.elements(MagneticPulse)) == 7


def test_reference_sequences_per_qubit():
    assert set(reference_sequences(Qubit.SQ_MINUS)) == {"no-pulse", "pi"}
    assert set(reference_sequences(Qubit.DOUBLE)) == {"no-pulse", "pi-plus", "pi-minus"}
    mech = reference_sequences(Qubit.MECHANICAL, mech_pi_half=0.25 * US)
    drive = mech["pi"].elements(MechanicalDrive)[0].element
    assert drive.duration == pytest.approx(0.5 * US)


def test_adiabatic_passage_targets_single_quantum_pairs():
    passage = adiabatic_passage(Qubit.SQ_PLUS, fidelity=0.9)
    assert passage.pair == PLUS_PAIR
    assert passage.fidelity == 0.9
    assert adiabatic_passage(list(MINUS_PAIR)).pair == MINUS_PAIR
    with pytest.raises(InvalidParameterError):
        adiabatic_passage(Qubit.DOUBLE)
    with pytest.raises(InvalidParameterError):
        adiabatic_passage(Qubit.SQ_MINUS, fidelity=1.2)


# ── Noise ───────────────────────────────────────────────


def test_noise_model_validation():
    with pytest.raises(InvalidParameterError):
        NoiseModel(t2_star=0.0)
    with pytest.raises(InvalidParameterError):
        NoiseModel(t2_star=1e-6, reference="triple-quantum")
    with pytest.raises(InvalidParameterError):
        NoiseModel(t2_star=1e-6, distribution="uniform")


def test_noise_sigma_and_shift():
    noise = NoiseModel(t2_star=0.5 * US)
    assert noise.sigma == pytest.approx(np.sqrt(2.0) / (0.5 * US))
    assert noise.shift_per_detuning == 0.5
    assert NoiseModel(0.5 * US, reference="single-quantum").shift_per_detuning == 1.0
    assert np.allclose(bath_shift(noise, [2.0, -4.0]), [1.0, -2.0])


def test_draws_are_reproducible():
    noise = NoiseModel(t2_star=0.5 * US)
    a = draw_detuning(noise, 7, 100)
    b = draw_detuning(noise, 7, 100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, draw_detuning(noise, 8, 100))


def test_draws_have_configured_spread():
    noise = NoiseModel(t2_star=0.5 * US)
    x = draw_detuning(noise, 11, 40000)
    assert np.std(x) == pytest.approx(noise.sigma, rel=0.03)
    assert abs(np.mean(x)) < 0.03 * noise.sigma


def test_spawned_streams_are_independent():
    a, b = spawn_streams(3, 2)
    assert not np.array_equal(a.normal(size=5), b.normal(size=5))
