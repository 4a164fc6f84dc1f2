"""
HBAR drive model: ring-up / ring-down envelope, enclosed pulse area, and
the standing-wave Rabi amplitude versus depth.

Time origin is the leading edge of the drive voltage, shifted by the
optional ``trigger_offset``. With s = t - trigger_offset:

    envelope(s) = 0                          s < 0
                = 1 - exp(-s / tau_r)        0 <= s <= L
                = exp(-(s - t0) / tau_r)     s > L

    t0 = L + tau_r ln(1 - exp(-L / tau_r))   (continuity at s = L)
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from src.core.errors import InvalidIntervalError, InvalidParameterError
from src.core.logging import get_logger
from src.core.units import TWO_PI, UM, US

logger = get_logger(__name__)

RINGDOWN_FLOOR = 1e-6


# ── Types ───────────────────────────────────────────────


def tau_ring(omega_m: float, q: float) -> float:
    """Amplitude ring time 2Q/omega_m (s)."""
    if not omega_m > 0:
        raise InvalidParameterError(f"Resonator frequency must be positive, got {omega_m}")
    if not q > 0:
        raise InvalidParameterError(f"Quality factor must be positive, got {q}")
    return 2.0 * q / omega_m


@dataclass(frozen=True)
class RingModel:
    omega_m: float
    q: float
    pulse_length: float
    trigger_offset: float = 0.0

    def __post_init__(self):
        tau_ring(self.omega_m, self.q)
        if not self.pulse_length > 0:
            raise InvalidParameterError(f"Mechanical pulse length must be positive, got {self.pulse_length}")
        if not np.isfinite(self.trigger_offset):
            raise InvalidParameterError("Trigger offset must be finite")

    @classmethod
    def from_lab_units(
        cls, omega_m_mhz: float, q: float, pulse_length_us: float, trigger_offset_us: float = 0.0
    ) -> RingModel:
        return cls(
            omega_m=TWO_PI * 1e6 * omega_m_mhz,
            q=q,
            pulse_length=pulse_length_us * US,
            trigger_offset=trigger_offset_us * US,
        )

    @property
    def tau_r(self) -> float:
        return tau_ring(self.omega_m, self.q)

    @property
    def t0(self) -> float:
        tau = self.tau_r
        return self.pulse_length + tau * np.log(-np.expm1(-self.pulse_length / tau))

    @property
    def peak(self) -> float:
        """Envelope value at the end of the drive, the maximum of the curve."""
        return float(-np.expm1(-self.pulse_length / self.tau_r))

    def active_until(self) -> float:
        """Absolute time after which the envelope stays below the ring-down floor."""
        return self.trigger_offset + self.t0 - self.tau_r * np.log(RINGDOWN_FLOOR)

    def envelope(self, t):
        return envelope(self, t)


@dataclass(frozen=True)
class StandingWave:
    omega_mech: float
    wavelength: float

    def __post_init__(self):
        if not self.omega_mech >= 0:
            raise InvalidParameterError(f"Mechanical Rabi frequency must be non-negative, got {self.omega_mech}")
        if not self.wavelength > 0:
            raise InvalidParameterError(f"Acoustic wavelength must be positive, got {self.wavelength}")

    @classmethod
    def from_lab_units(cls, omega_mech_mhz: float, wavelength_um: float) -> StandingWave:
        return cls(omega_mech=TWO_PI * 1e6 * omega_mech_mhz, wavelength=wavelength_um * UM)


@dataclass(frozen=True)
class SweepLandmarks:
    """Leading-pulse times (s) of the four features of a swept pulse-pair trace."""

    trailing_enters_ringdown: float
    leading_enters_ringup: float
    critical_leading: float
    leading_enters_ringdown: float
    tau_mag: float

    @property
    def critical_delay(self) -> float:
        """Trailing-pulse time of the maximum-area window."""
        return self.critical_leading + self.tau_mag

    def as_list(self) -> list[float]:
        return [
            self.trailing_enters_ringdown,
            self.leading_enters_ringup,
            self.critical_leading,
            self.leading_enters_ringdown,
        ]


# ── Envelope and area ───────────────────────────────────


def envelope(ring: RingModel, t):
    """Drive amplitude relative to steady state; zero before the drive starts."""
    shape = np.shape(t)
    s = np.atleast_1d(np.asarray(t, dtype=float)) - ring.trigger_offset
    tau, length = ring.tau_r, ring.pulse_length
    out = np.zeros_like(s)
    up = (s >= 0) & (s <= length)
    down = s > length
    out[up] = -np.expm1(-s[up] / tau)
    out[down] = np.exp(-(s[down] - ring.t0) / tau)
    return out.reshape(shape) if shape else float(out[0])


def _antiderivative(ring: RingModel, t) -> np.ndarray:
    s = np.atleast_1d(np.asarray(t, dtype=float)) - ring.trigger_offset
    tau, length = ring.tau_r, ring.pulse_length
    out = np.zeros_like(s)
    up = (s > 0) & (s <= length)
    down = s > length
    out[up] = s[up] + tau * np.expm1(-s[up] / tau)
    at_end = length + tau * np.expm1(-length / tau)
    out[down] = at_end + tau * (ring.peak - np.exp(-(s[down] - ring.t0) / tau))
    return out


def pulse_area(ring: RingModel, t1, t2):
    """Closed-form integral of the envelope over [t1, t2] in seconds.

    Times before the drive starts contribute nothing, so t1 < 0 is allowed.

    Raises
    ------
    InvalidIntervalError
        If any t2 < t1.
    """
    a = np.asarray(t1, dtype=float)
    b = np.asarray(t2, dtype=float)
    if np.any(b < a):
        raise InvalidIntervalError(f"Pulse-area interval is reversed: t1={t1}, t2={t2}")
    area = np.maximum(_antiderivative(ring, b) - _antiderivative(ring, a), 0.0)
    if np.broadcast(a, b).shape == ():
        return float(area[0])
    return area


def omega_at_depth(w: StandingWave, z):
    """Local Rabi frequency Omega_mech |sin(2 pi z / lambda)| at depth *z* (m)."""
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise InvalidParameterError("Depth must be non-negative")
    out = w.omega_mech * np.abs(np.sin(TWO_PI * z / w.wavelength))
    return out if out.ndim else float(out)


# ── Window placement ────────────────────────────────────


def _window_bounds(ring: RingModel, width: float) -> tuple[float, float]:
    return ring.trigger_offset - width, ring.active_until()


def max_area_window(ring: RingModel, width: float) -> tuple[float, float]:
    """Leading time and area of the width-*width* window enclosing the most drive."""
    if not width > 0:
        raise InvalidParameterError(f"Window width must be positive, got {width}")
    tau = ring.tau_r
    lo, hi = _window_bounds(ring, width)

    # work in units of tau so the optimizer tolerance is scale free
    def negative_area(x: float) -> float:
        return -pulse_area(ring, x * tau, x * tau + width)

    res = minimize_scalar(negative_area, bounds=(lo / tau, hi / tau), method="bounded", options={"xatol": 1e-12})
    x = float(res.x)

    def slope(x: float) -> float:
        return envelope(ring, x * tau + width) - envelope(ring, x * tau)

    a, b = max(lo / tau, x - 1e-3), min(hi / tau, x + 1e-3)
    if slope(a) > 0 > slope(b):
        x = brentq(slope, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    t1 = x * tau
    return t1, pulse_area(ring, t1, t1 + width)


def critical_delay(ring: RingModel, width: float) -> float:
    """Trailing-edge time of the maximum-area window."""
    t1, _ = max_area_window(ring, width)
    return t1 + width


def window_for_area(ring: RingModel, width: float, area: float, side: str = "leading") -> float:
    """Leading time of a window with enclosed *area*.

    ``side="leading"`` searches windows placed before the optimum (the window
    sits mostly on the ring-up), ``"trailing"`` those after it.
    """
    t_opt, a_max = max_area_window(ring, width)
    if not 0 < area <= a_max:
        raise InvalidParameterError(f"Requested area {area:.6g} s outside (0, {a_max:.6g}] s")
    lo, hi = _window_bounds(ring, width)
    if side == "leading":
        a, b = lo, t_opt
    elif side == "trailing":
        a, b = t_opt, hi
    else:
        raise InvalidParameterError(f"side must be 'leading' or 'trailing', got {side!r}")
    if np.isclose(area, a_max, rtol=1e-12, atol=0.0):
        return t_opt

    def residual(t: float) -> float:
        return pulse_area(ring, t, t + width) - area

    return brentq(residual, a, b, xtol=1e-18, rtol=4 * np.finfo(float).eps)


def sweep_landmarks(ring: RingModel, tau_mag: float) -> SweepLandmarks:
    t_opt, _ = max_area_window(ring, tau_mag)
    origin = ring.trigger_offset
    return SweepLandmarks(
        trailing_enters_ringdown=origin + ring.pulse_length - tau_mag,
        leading_enters_ringup=origin,
        critical_leading=t_opt,
        leading_enters_ringdown=origin + ring.pulse_length,
        tau_mag=tau_mag,
    )
