"""
Pulse-sequence building blocks.

A sequence is a list of elements with absolute start times (seconds).
Idealized magnetic pulses, polarization, adiabatic passages and readouts
are instantaneous; waits, finite magnetic pulses and mechanical drives
occupy time. Mechanical drives may overlap magnetic pulses; magnetic
pulses may not overlap each other.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, ClassVar

import numpy as np

from src.core.errors import InvalidParameterError
from src.core.units import US
from src.resonator.ring import RingModel
from src.spin.operators import DOUBLE_PAIR, MINUS_PAIR, PLUS_PAIR, M_VALUES

DEFAULT_PI_DURATION = 30e-9


class Qubit(str, Enum):
    SQ_MINUS = "sq-minus"
    SQ_PLUS = "sq-plus"
    DOUBLE = "dq"
    MECHANICAL = "mech"

    @property
    def pair(self) -> tuple[int, int]:
        return {
            Qubit.SQ_MINUS: MINUS_PAIR,
            Qubit.SQ_PLUS: PLUS_PAIR,
            Qubit.DOUBLE: DOUBLE_PAIR,
            Qubit.MECHANICAL: DOUBLE_PAIR,
        }[self]

    @property
    def is_double_quantum(self) -> bool:
        return self in (Qubit.DOUBLE, Qubit.MECHANICAL)


def _pair_to_m(pair: tuple[int, int]) -> list[int]:
    return [M_VALUES[i] for i in pair]


def _pair_from_m(values) -> tuple[int, int]:
    return tuple(M_VALUES.index(int(m)) for m in values)


# ── Elements ────────────────────────────────────────────


@dataclass(frozen=True)
class Polarize:
    """Optical pumping into |0>; the unpolarized remainder is split between |+1> and |-1>."""

    efficiency: float = 1.0
    kind: ClassVar[str] = "polarize"

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise InvalidParameterError(f"Polarization efficiency must lie in [0, 1], got {self.efficiency}")

    @property
    def span(self) -> float:
        return 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "efficiency": self.efficiency}


@dataclass(frozen=True)
class MagneticPulse:
    pair: tuple[int, int]
    angle: float = np.pi
    phase: float = 0.0
    duration: float = DEFAULT_PI_DURATION
    idealized: bool = True
    kind: ClassVar[str] = "magnetic-pulse"

    def __post_init__(self):
        if tuple(self.pair) not in (MINUS_PAIR, PLUS_PAIR):
            raise InvalidParameterError(f"Magnetic pulses drive {{0,-1}} or {{+1,0}} only, got {self.pair}")
        object.__setattr__(self, "pair", tuple(self.pair))
        if not np.isfinite(self.angle) or not np.isfinite(self.phase):
            raise InvalidParameterError("Pulse angle and phase must be finite")
        if self.duration < 0 or (not self.idealized and self.duration == 0):
            raise InvalidParameterError(f"Finite magnetic pulse needs a positive duration, got {self.duration}")

    @property
    def rabi(self) -> float:
        """Drive Rabi frequency realising ``angle`` over ``duration`` on resonance."""
        return self.angle / self.duration

    @property
    def span(self) -> float:
        return 0.0 if self.idealized else self.duration

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": self.kind,
            "pair": _pair_to_m(self.pair),
            "angle_deg": float(np.degrees(self.angle)),
            "phase_deg": float(np.degrees(self.phase)),
            "duration_us": self.duration / US,
            "idealized": self.idealized,
        }


@dataclass(frozen=True)
class MechanicalDrive:
    """Stress drive on |+1> <-> |-1>; square when ``ring`` is None, ringing otherwise.

    A ringing drive starts its electrical pulse at the element start time and
    keeps acting through the ring-down.
    """

    duration: float = 0.0
    ring: RingModel | None = None
    phase: float = 0.0
    kind: ClassVar[str] = "mechanical-drive"

    def __post_init__(self):
        if self.ring is not None:
            object.__setattr__(self, "duration", self.ring.pulse_length)
        if self.duration < 0:
            raise InvalidParameterError(f"Mechanical drive duration must be non-negative, got {self.duration}")

    @classmethod
    def square(cls, duration: float, phase: float = 0.0) -> MechanicalDrive:
        return cls(duration=duration, phase=phase)

    @classmethod
    def ringing(cls, ring: RingModel, phase: float = 0.0) -> MechanicalDrive:
        return cls(ring=ring, phase=phase)

    @property
    def is_square(self) -> bool:
        return self.ring is None

    @property
    def span(self) -> float:
        return self.duration

    @property
    def active_window(self) -> tuple[float, float]:
        """Local interval outside which the drive is (treated as) zero."""
        if self.ring is None:
            return 0.0, self.duration
        return self.ring.trigger_offset, self.ring.active_until()

    def breakpoints(self) -> list[float]:
        if self.ring is None:
            return [0.0, self.duration]
        start, stop = self.active_window
        return [start, start + self.ring.pulse_length, stop]

    def envelope(self, local_t: float) -> float:
        if self.ring is None:
            return 1.0 if 0.0 <= local_t <= self.duration else 0.0
        return self.ring.envelope(local_t)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"type": self.kind, "phase_deg": float(np.degrees(self.phase))}
        if self.ring is None:
            out["duration_us"] = self.duration / US
        else:
            out["ring"] = {
                "omega_m_mhz": self.ring.omega_m / (2 * np.pi * 1e6),
                "q": self.ring.q,
                "pulse_length_us": self.ring.pulse_length / US,
                "trigger_offset_us": self.ring.trigger_offset / US,
            }
        return out


@dataclass(frozen=True)
class AdiabaticPassage:
    """Population transfer between the pair levels with the given fidelity.

    Coherences between the pair and the third level are destroyed.
    """

    pair: tuple[int, int]
    fidelity: float = 1.0
    kind: ClassVar[str] = "adiabatic-passage"

    def __post_init__(self):
        if tuple(self.pair) not in (MINUS_PAIR, PLUS_PAIR):
            raise InvalidParameterError(f"Adiabatic passage drives {{0,-1}} or {{+1,0}} only, got {self.pair}")
        object.__setattr__(self, "pair", tuple(self.pair))
        if not 0.0 <= self.fidelity <= 1.0:
            raise InvalidParameterError(f"Passage fidelity must lie in [0, 1], got {self.fidelity}")

    @property
    def span(self) -> float:
        return 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "pair": _pair_to_m(self.pair), "fidelity": self.fidelity}


@dataclass(frozen=True)
class Wait:
    duration: float
    kind: ClassVar[str] = "wait"

    def __post_init__(self):
        if self.duration < 0:
            raise InvalidParameterError(f"Wait duration must be non-negative, got {self.duration}")

    @property
    def span(self) -> float:
        return self.duration

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "duration_us": self.duration / US}


@dataclass(frozen=True)
class Readout:
    label: str = ""
    kind: ClassVar[str] = "readout"

    @property
    def span(self) -> float:
        return 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"type": self.kind, "label": self.label}


PulseElement = Polarize | MagneticPulse | MechanicalDrive | AdiabaticPassage | Wait | Readout


def element_from_dict(data: dict[str, Any]) -> PulseElement:
    kind = data.get("type")
    if kind == Polarize.kind:
        return Polarize(efficiency=float(data.get("efficiency", 1.0)))
    if kind == MagneticPulse.kind:
        return MagneticPulse(
            pair=_pair_from_m(data["pair"]),
            angle=float(np.radians(data.get("angle_deg", 180.0))),
            phase=float(np.radians(data.get("phase_deg", 0.0))),
            duration=float(data.get("duration_us", DEFAULT_PI_DURATION / US)) * US,
            idealized=bool(data.get("idealized", True)),
        )
    if kind == MechanicalDrive.kind:
        phase = float(np.radians(data.get("phase_deg", 0.0)))
        if "ring" in data:
            return MechanicalDrive.ringing(RingModel.from_lab_units(**data["ring"]), phase=phase)
        return MechanicalDrive.square(float(data["duration_us"]) * US, phase=phase)
    if kind == AdiabaticPassage.kind:
        return AdiabaticPassage(pair=_pair_from_m(data["pair"]), fidelity=float(data.get("fidelity", 1.0)))
    if kind == Wait.kind:
        return Wait(float(data["duration_us"]) * US)
    if kind == Readout.kind:
        return Readout(label=str(data.get("label", "")))
    raise InvalidParameterError(f"Unknown pulse element type {kind!r}")


# ── Sequence ────────────────────────────────────────────


@dataclass(frozen=True)
class TimedElement:
    start: float
    element: PulseElement

    @property
    def end(self) -> float:
        return self.start + self.element.span


@dataclass
class PulseSequence:
    items: list[TimedElement] = field(default_factory=list)
    name: str = ""

    def __post_init__(self):
        # stable sort keeps the listed order of simultaneous elements
        self.items = sorted(self.items, key=lambda it: it.start)
        self._check_magnetic_overlap()

    def _check_magnetic_overlap(self) -> None:
        finite = [it for it in self.items if isinstance(it.element, MagneticPulse) and not it.element.idealized]
        for a, b in zip(finite, finite[1:]):
            if b.start < a.end - 1e-15:
                raise InvalidParameterError(
                    f"Magnetic pulses overlap: [{a.start:.4g}, {a.end:.4g}] s and [{b.start:.4g}, {b.end:.4g}] s"
                )

    @classmethod
    def chain(cls, *elements: PulseElement, start: float = 0.0, name: str = "") -> PulseSequence:
        """Place elements back to back, each starting where the previous one ends."""
        items: list[TimedElement] = []
        cursor = start
        for el in elements:
            items.append(TimedElement(cursor, el))
            cursor += el.span
        return cls(items=items, name=name)

    @property
    def start(self) -> float:
        return self.items[0].start if self.items else 0.0

    @property
    def end(self) -> float:
        return max((it.end for it in self.items), default=0.0)

    def elements(self, kind: type) -> list[TimedElement]:
        return [it for it in self.items if isinstance(it.element, kind)]

    def without(self, kind: type) -> PulseSequence:
        return PulseSequence([it for it in self.items if not isinstance(it.element, kind)], name=self.name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "elements": [{"start_us": it.start / US, **it.element.to_dict()} for it in self.items],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PulseSequence:
        items = [
            TimedElement(float(entry.get("start_us", 0.0)) * US, element_from_dict(entry))
            for entry in data.get("elements", [])
        ]
        return cls(items=items, name=str(data.get("name", "")))
