"""
Predefined pulse sequences.

Sign conventions: a pulse with phase phi rotates the pair about the axis
cos(phi) x + sin(phi) y. A "+" second pulse repeats the first pulse's
phase, a "-" second pulse adds pi. Builders return sequences that start
with optical polarization and end with a readout.
"""
from __future__ import annotations

import numpy as np

from src.core.errors import InvalidParameterError
from src.pulses.elements import (
    DEFAULT_PI_DURATION,
    AdiabaticPassage,
    MagneticPulse,
    MechanicalDrive,
    Polarize,
    PulseSequence,
    Qubit,
    Readout,
    TimedElement,
    Wait,
)
from src.resonator.ring import RingModel
from src.spin.operators import MINUS_PAIR, PLUS_PAIR


def _pair(target) -> tuple[int, int]:
    if isinstance(target, Qubit):
        if target.is_double_quantum:
            raise InvalidParameterError(f"{target.value} is not a magnetically allowed transition")
        return target.pair
    pair = tuple(target)
    if pair not in (MINUS_PAIR, PLUS_PAIR):
        raise InvalidParameterError(f"Target must be {{0,-1}} or {{+1,0}}, got {target}")
    return pair


def _sign_phase(sign: int) -> float:
    if sign not in (1, -1):
        raise InvalidParameterError(f"second_pulse_sign must be +1 or -1, got {sign}")
    return 0.0 if sign > 0 else np.pi


# ── Single elements ─────────────────────────────────────


def magnetic_pulse(
    target,
    angle: float,
    phase: float = 0.0,
    idealized: bool = True,
    duration: float | None = None,
) -> MagneticPulse:
    """Resonant magnetic rotation; finite pulses keep the 30 ns pi-pulse Rabi rate by default."""
    if duration is None:
        duration = DEFAULT_PI_DURATION * abs(angle) / np.pi
    return MagneticPulse(pair=_pair(target), angle=angle, phase=phase, duration=duration, idealized=idealized)


def magnetic_pi(
    target, idealized: bool = True, phase: float = 0.0, duration: float = DEFAULT_PI_DURATION
) -> MagneticPulse:
    return magnetic_pulse(target, np.pi, phase=phase, idealized=idealized, duration=duration)


def adiabatic_passage(target, fidelity: float = 1.0) -> AdiabaticPassage:
    return AdiabaticPassage(pair=_pair(target), fidelity=fidelity)


# ── Rabi protocols ──────────────────────────────────────


def sequence_rabi_lowQ(
    tau: float,
    length: float,
    readout_via: str = "minus",
    passage_fidelity: float | None = None,
    balance: bool = True,
    idealized: bool = True,
) -> PulseSequence:
    """Low-Q mechanical Rabi: pi(0,-1), drive tau, gate back, balancing drive L - tau.

    ``readout_via="minus"`` gates with a pi pulse on {0,-1} (or an adiabatic
    passage when *passage_fidelity* is set); ``"plus"`` moves |+1> into |0>
    with an adiabatic passage instead, so P0 then reads the |+1> population.
    """
    if tau < 0 or tau > length:
        raise InvalidParameterError(f"Drive time must lie in [0, L={length}], got {tau}")
    if readout_via == "minus":
        gate = (
            magnetic_pi(Qubit.SQ_MINUS, idealized=idealized)
            if passage_fidelity is None
            else adiabatic_passage(Qubit.SQ_MINUS, passage_fidelity)
        )
    elif readout_via == "plus":
        gate = adiabatic_passage(Qubit.SQ_PLUS, 1.0 if passage_fidelity is None else passage_fidelity)
    else:
        raise InvalidParameterError(f"readout_via must be 'minus' or 'plus', got {readout_via!r}")

    elements = [Polarize(), magnetic_pi(Qubit.SQ_MINUS, idealized=idealized), MechanicalDrive.square(tau), gate]
    if balance:
        elements.append(MechanicalDrive.square(length - tau))
    elements.append(Readout())
    return PulseSequence.chain(*elements, name=f"rabi-lowq-{readout_via}")


def sequence_rabi_highQ(tau0: float, tau_mag: float, ring: RingModel, idealized: bool = True) -> PulseSequence:
    """High-Q gated Rabi: a fixed-spacing pi-pulse pair swept through a ringing drive.

    The drive voltage starts at t = 0; *tau0* is the leading pi-pulse time
    and the trailing one follows after *tau_mag*. Only the {-1,+1} population
    present between the two pulses sees the drive.
    """
    if not tau_mag > 0:
        raise InvalidParameterError(f"Pulse-pair spacing must be positive, got {tau_mag}")
    first = magnetic_pi(Qubit.SQ_MINUS, idealized=idealized)
    second = magnetic_pi(Qubit.SQ_MINUS, idealized=idealized)
    t_second = tau0 + tau_mag - second.span
    if t_second < tau0 + first.span:
        raise InvalidParameterError("Pulse-pair spacing is shorter than the pi pulses")
    items = [
        TimedElement(0.0, MechanicalDrive.ringing(ring)),
        TimedElement(tau0, Polarize()),
        TimedElement(tau0, first),
        TimedElement(t_second, second),
        TimedElement(tau0 + tau_mag, Readout()),
    ]
    return PulseSequence(items=items, name="rabi-highq")


# ── Ramsey / Hahn ───────────────────────────────────────


def _require_mech(mech_pi_half: float | None) -> float:
    if mech_pi_half is None or not mech_pi_half > 0:
        raise InvalidParameterError("Mechanical sequences need a positive mechanical pi/2 duration")
    return mech_pi_half


def _dq_open(idealized: bool) -> list:
    """|0> -> (|+1> + |-1>)/sqrt2 through |0>: pi/2 on {0,-1} then pi on {+1,0}."""
    return [
        magnetic_pulse(Qubit.SQ_MINUS, np.pi / 2, idealized=idealized),
        magnetic_pi(Qubit.SQ_PLUS, idealized=idealized),
    ]


def _dq_close(phase: float, idealized: bool) -> list:
    # the pi phase on the second {+1,0} pulse makes the open/close pair an identity at tau = 0
    return [
        magnetic_pi(Qubit.SQ_PLUS, idealized=idealized, phase=np.pi),
        magnetic_pulse(Qubit.SQ_MINUS, np.pi / 2, phase=phase, idealized=idealized),
    ]


def _dq_swap(idealized: bool) -> list:
    """Exchange |+1> and |-1> with three single-quantum pi pulses."""
    return [
        magnetic_pi(Qubit.SQ_MINUS, idealized=idealized),
        magnetic_pi(Qubit.SQ_PLUS, idealized=idealized),
        magnetic_pi(Qubit.SQ_MINUS, idealized=idealized),
    ]


def sequence_ramsey(
    qubit: Qubit | str,
    tau: float,
    second_pulse_sign: int = 1,
    omega_rot: float = 0.0,
    mech_pi_half: float | None = None,
    idealized: bool = True,
) -> PulseSequence:
    """pi/2 - tau - (+-pi/2) on one of the three qubits.

    The second pulse's phase is advanced by ``omega_rot`` times the time since
    the first pulse started, so a detuning delta shows up at delta + omega_rot.
    Mechanical Ramsey uses square mechanical pi/2 pulses of *mech_pi_half*
    bracketed by pi pulses on {0,-1}.
    """
    qubit = Qubit(qubit)
    if tau < 0:
        raise InvalidParameterError(f"Free-evolution time must be non-negative, got {tau}")
    sign = _sign_phase(second_pulse_sign)

    if qubit is Qubit.MECHANICAL:
        t_half = _require_mech(mech_pi_half)
        advance = -omega_rot * (tau + t_half)
        elements = [
            Polarize(),
            magnetic_pi(Qubit.SQ_MINUS, idealized=idealized),
            MechanicalDrive.square(t_half),
            Wait(tau),
            MechanicalDrive.square(t_half, phase=advance + sign),
            magnetic_pi(Qubit.SQ_MINUS, idealized=idealized),
            Readout(),
        ]
    elif qubit is Qubit.DOUBLE:
        advance = -omega_rot * tau
        elements = [Polarize(), *_dq_open(idealized), Wait(tau), *_dq_close(advance + sign, idealized), Readout()]
    else:
        advance = -omega_rot * tau
        elements = [
            Polarize(),
            magnetic_pulse(qubit, np.pi / 2, idealized=idealized),
            Wait(tau),
            magnetic_pulse(qubit, np.pi / 2, phase=advance + sign, idealized=idealized),
            Readout(),
        ]
    return PulseSequence.chain(*elements, name=f"ramsey-{qubit.value}")


def sequence_hahn(
    qubit: Qubit | str,
    tau: float,
    second_pulse_sign: int = 1,
    refocus: bool = True,
    mech_pi_half: float | None = None,
    idealized: bool = True,
) -> PulseSequence:
    """pi/2 - tau - pi - tau - pi/2; ``refocus=False`` drops the pi (a 2 tau Ramsey)."""
    qubit = Qubit(qubit)
    if tau < 0:
        raise InvalidParameterError(f"Echo half time must be non-negative, got {tau}")
    sign = _sign_phase(second_pulse_sign)

    if qubit is Qubit.MECHANICAL:
        t_half = _require_mech(mech_pi_half)
        middle = [MechanicalDrive.square(2 * t_half)] if refocus else []
        elements = [
            Polarize(),
            magnetic_pi(Qubit.SQ_MINUS, idealized=idealized),
            MechanicalDrive.square(t_half),
            Wait(tau),
            *middle,
            Wait(tau),
            MechanicalDrive.square(t_half, phase=sign),
            magnetic_pi(Qubit.SQ_MINUS, idealized=idealized),
            Readout(),
        ]
    elif qubit is Qubit.DOUBLE:
        middle = _dq_swap(idealized) if refocus else []
        elements = [
            Polarize(),
            *_dq_open(idealized),
            Wait(tau),
            *middle,
            Wait(tau),
            *_dq_close(sign, idealized),
            Readout(),
        ]
    else:
        middle = [magnetic_pi(qubit, idealized=idealized)] if refocus else []
        elements = [
            Polarize(),
            magnetic_pulse(qubit, np.pi / 2, idealized=idealized),
            Wait(tau),
            *middle,
            Wait(tau),
            magnetic_pulse(qubit, np.pi / 2, phase=sign, idealized=idealized),
            Readout(),
        ]
    return PulseSequence.chain(*elements, name=f"hahn-{qubit.value}")


def reference_sequences(
    qubit: Qubit | str, mech_pi_half: float | None = None, idealized: bool = True
) -> dict[str, PulseSequence]:
    """No-pulse and pi-pulse references used to normalize Ramsey signals.

    The magnetic {-1,+1} qubit has two single-pi references (``pi-plus`` and
    ``pi-minus``) whose mean is its pi reference; the mechanical qubit uses
    pi(0,-1) - mechanical pi - pi(0,-1).
    """
    qubit = Qubit(qubit)
    refs = {"no-pulse": PulseSequence.chain(Polarize(), Readout(), name="ref-no-pulse")}
    if qubit is Qubit.DOUBLE:
        refs["pi-plus"] = PulseSequence.chain(
            Polarize(), magnetic_pi(Qubit.SQ_PLUS, idealized=idealized), Readout(), name="ref-pi-plus"
        )
        refs["pi-minus"] = PulseSequence.chain(
            Polarize(), magnetic_pi(Qubit.SQ_MINUS, idealized=idealized), Readout(), name="ref-pi-minus"
        )
    elif qubit is Qubit.MECHANICAL:
        t_half = _require_mech(mech_pi_half)
        refs["pi"] = PulseSequence.chain(
            Polarize(),
            magnetic_pi(Qubit.SQ_MINUS, idealized=idealized),
            MechanicalDrive.square(2 * t_half),
            magnetic_pi(Qubit.SQ_MINUS, idealized=idealized),
            Readout(),
            name="ref-pi-mech",
        )
    else:
        refs["pi"] = PulseSequence.chain(Polarize(), magnetic_pi(qubit, idealized=idealized), Readout(), name="ref-pi")
    return refs
