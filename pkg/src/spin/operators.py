"""
Spin-1 operator matrices.

Basis order is (|+1>, |0>, |-1>) for both the electronic and the nuclear
spin, so index 0 is m = +1 and index 2 is m = -1.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from src.core.errors import InvalidParameterError

PLUS_ONE, ZERO, MINUS_ONE = 0, 1, 2
M_VALUES = (1, 0, -1)

# level-index pairs of the three qubits, (upper index, lower index) in basis order
PLUS_PAIR = (PLUS_ONE, ZERO)
MINUS_PAIR = (ZERO, MINUS_ONE)
DOUBLE_PAIR = (PLUS_ONE, MINUS_ONE)


def level_index(m: int) -> int:
    """Basis index of the spin projection *m*."""
    if m not in M_VALUES:
        raise InvalidParameterError(f"Spin-1 projection must be one of {M_VALUES}, got {m}")
    return M_VALUES.index(m)


@dataclass(frozen=True)
class SpinOperators:
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    ix: np.ndarray
    iy: np.ndarray
    iz: np.ndarray

    @property
    def identity(self) -> np.ndarray:
        return np.eye(3, dtype=complex)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@lru_cache(maxsize=1)
def spin1_operators() -> SpinOperators:
    r = 1.0 / np.sqrt(2.0)
    sx = r * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    sy = r * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return SpinOperators(
        sx=_frozen(sx),
        sy=_frozen(sy),
        sz=_frozen(sz),
        ix=_frozen(sx.copy()),
        iy=_frozen(sy.copy()),
        iz=_frozen(sz.copy()),
    )
