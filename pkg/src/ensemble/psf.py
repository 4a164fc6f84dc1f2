"""
Depth weighting of the detected ensemble.

The confocal point-spread function is approximated by a Gaussian in depth
centred on the focal plane z0, with FWHM = fwhm0 + slope * z0, normalised
over z >= 0 (the diamond surface).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erf

from src.core.errors import InvalidParameterError
from src.core.units import UM

_FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))
WINDOW_FWHMS = 3.0


@dataclass(frozen=True)
class PSFModel:
    z0: float
    fwhm0: float
    slope: float

    def __post_init__(self):
        if self.z0 < 0:
            raise InvalidParameterError(f"Focal depth must be non-negative, got {self.z0}")
        if not self.fwhm > 0:
            raise InvalidParameterError(f"PSF width must be positive, got FWHM={self.fwhm}")

    @classmethod
    def from_lab_units(cls, z0_um: float, fwhm0_um: float, slope: float) -> PSFModel:
        return cls(z0=z0_um * UM, fwhm0=fwhm0_um * UM, slope=slope)

    @property
    def fwhm(self) -> float:
        return self.fwhm0 + self.slope * self.z0

    @property
    def sigma(self) -> float:
        return self.fwhm * _FWHM_TO_SIGMA

    @property
    def norm(self) -> float:
        """Integral of the unnormalised Gaussian over [0, inf)."""
        s = self.sigma
        return s * np.sqrt(np.pi / 2.0) * (1.0 + erf(self.z0 / (np.sqrt(2.0) * s)))

    def window(self) -> tuple[float, float]:
        return max(0.0, self.z0 - WINDOW_FWHMS * self.fwhm), self.z0 + WINDOW_FWHMS * self.fwhm

    def window_mass(self) -> float:
        """Fraction of the normalised PSF inside :meth:`window`."""
        lo, hi = self.window()
        scale = np.sqrt(2.0) * self.sigma
        inside = erf((hi - self.z0) / scale) - erf((lo - self.z0) / scale)
        return float(inside / (1.0 + erf(self.z0 / scale)))


def psf_weight(psf: PSFModel, z):
    """Normalised depth density at *z* (1/m); zero above the surface."""
    z = np.asarray(z, dtype=float)
    w = np.exp(-0.5 * ((z - psf.z0) / psf.sigma) ** 2) / psf.norm
    w = np.where(z < 0, 0.0, w)
    return w if w.ndim else float(w)


@lru_cache(maxsize=8)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def depth_nodes(psf: PSFModel, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Fixed Gauss-Legendre depths over the PSF window with weights summing to 1."""
    if n < 1:
        raise InvalidParameterError(f"Need at least one depth node, got {n}")
    x, w = _legendre(n)
    lo, hi = psf.window()
    z = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = w * psf_weight(psf, z)
    return z, weights / weights.sum()
