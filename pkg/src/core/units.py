"""
Unit conversions at the API boundary.

Internally everything is SI: seconds, metres, pascals, and angular
frequencies in rad/s. Config files and reports use cyclic MHz/GHz,
microseconds, micrometres and MPa/GPa.
"""
from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi

US = 1e-6
NS = 1e-9
UM = 1e-6
MPA = 1e6
GPA = 1e9


def _scale(value, factor: float):
    if np.ndim(value):
        return np.asarray(value, dtype=float) * factor
    return float(value) * factor


def khz(value):
    """Cyclic kHz -> rad/s."""
    return _scale(value, TWO_PI * 1e3)


def mhz(value):
    """Cyclic MHz -> rad/s."""
    return _scale(value, TWO_PI * 1e6)


def ghz(value):
    """Cyclic GHz -> rad/s."""
    return _scale(value, TWO_PI * 1e9)


def to_mhz(omega):
    """rad/s -> cyclic MHz."""
    return _scale(omega, 1.0 / (TWO_PI * 1e6))


def to_khz(omega):
    """rad/s -> cyclic kHz."""
    return _scale(omega, 1.0 / (TWO_PI * 1e3))
