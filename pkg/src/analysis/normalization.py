"""
Two-branch Ramsey normalization.

A Ramsey measurement is repeated with the second pi/2 pulse in phase (y+)
and in anti-phase (y-) with the first; together with a no-pulse (y_NP) and
a pi-pulse (y_pi) reference the coherence of the qubit is

    Im[rho_ij] = (y+ - y-) / (2 (y_NP - y_pi))

which is independent of the fluorescence offset and contrast.
"""
from __future__ import annotations

import numpy as np

from src.core.errors import DegenerateNormalizationError

_DEGENERATE_RTOL = 1e-12


def normalize_ramsey(y_plus, y_minus, y_np, y_pi):
    """Normalized coherence from raw two-branch signals.

    Raises
    ------
    DegenerateNormalizationError
        If the references coincide (no readout contrast).
    """
    y_np = float(y_np)
    y_pi = float(y_pi)
    span = y_np - y_pi
    if abs(span) <= _DEGENERATE_RTOL * max(abs(y_np), abs(y_pi), 1e-300):
        raise DegenerateNormalizationError(
            "No-pulse and pi-pulse references coincide", diagnostic=f"y_NP={y_np!r}, y_pi={y_pi!r}"
        )
    out = 0.5 * (np.asarray(y_plus, dtype=float) - np.asarray(y_minus, dtype=float)) / span
    return out if out.ndim else float(out)


def double_quantum_reference(y_pi_plus, y_pi_minus) -> float:
    """pi reference of the {-1,+1} magnetic qubit: mean of the two single-pi signals."""
    return 0.5 * (float(y_pi_plus) + float(y_pi_minus))
