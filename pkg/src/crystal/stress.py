"""
Spin-strain to spin-stress coupling conversion for diamond.

The spin couples to the lattice through a symmetric rank-2 coupling
tensor D (frequency per unit strain) expressed in the NV frame. The
stress couplings follow from contracting D with the compliance tensor
S = C^-1 in the cubic lattice frame:

    E_kl = sum_ij D_ij S_ijkl

which requires rotating D from the NV frame into the lattice frame and
rotating E back afterwards.

Voigt convention: indices 0..5 = xx, yy, zz, yz, xz, xy. Strain vectors
carry engineering shear components (gamma_yz = 2 eps_yz), stress vectors
do not. The 6x6 compliance therefore picks up a factor 1/2 per shear index
when expanded to the rank-4 tensor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.core.errors import InvalidParameterError, NumericalError
from src.core.logging import get_logger
from src.core.units import GPA, MPA, TWO_PI

logger = get_logger(__name__)

VOIGT_PAIRS: tuple[tuple[int, int], ...] = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))

# inverse map (i, j) -> Voigt index, symmetric
_VOIGT_INDEX = np.empty((3, 3), dtype=int)
for _n, (_i, _j) in enumerate(VOIGT_PAIRS):
    _VOIGT_INDEX[_i, _j] = _n
    _VOIGT_INDEX[_j, _i] = _n

_CONDITION_LIMIT = 1e12


# ── Domain types ────────────────────────────────────────


@dataclass(frozen=True)
class StiffnessMatrix:
    """Cubic stiffness constants (Pa) and the assembled 6x6 Voigt matrix."""

    c11: float
    c12: float
    c44: float

    @property
    def matrix(self) -> np.ndarray:
        c = np.zeros((6, 6))
        c[:3, :3] = self.c12
        c[np.arange(3), np.arange(3)] = self.c11
        c[np.arange(3, 6), np.arange(3, 6)] = self.c44
        return c

    def compliance(self) -> np.ndarray:
        """6x6 Voigt compliance (1/Pa), engineering-shear convention."""
        c = self.matrix
        cond = np.linalg.cond(c)
        if not np.isfinite(cond) or cond > _CONDITION_LIMIT:
            raise NumericalError(
                "Stiffness matrix is singular",
                f"c11={self.c11:.6g} Pa, c12={self.c12:.6g} Pa, c44={self.c44:.6g} Pa, cond={cond:.3g}",
            )
        return np.linalg.inv(c)

    def compliance_tensor(self) -> np.ndarray:
        """Rank-4 compliance S_ijkl (1/Pa) in the cubic lattice frame."""
        s = self.compliance()
        shear = (np.arange(6) >= 3).astype(float)
        factor = 0.5 ** (shear[:, None] + shear[None, :])
        s_fac = s * factor
        return s_fac[_VOIGT_INDEX[:, :, None, None], _VOIGT_INDEX[None, None, :, :]]


@dataclass(frozen=True)
class StrainCouplings:
    """Spin-strain couplings in rad/s per unit strain."""

    d_perp: float
    d_par: float

    @classmethod
    def from_ghz(cls, d_perp_ghz: float, d_par_ghz: float) -> StrainCouplings:
        return cls(d_perp=TWO_PI * 1e9 * d_perp_ghz, d_par=TWO_PI * 1e9 * d_par_ghz)

    def scaled(self, factor: float) -> StrainCouplings:
        return StrainCouplings(self.d_perp * factor, self.d_par * factor)


@dataclass(frozen=True)
class StressCouplings:
    """Spin-stress couplings in rad/s per Pa."""

    eps_perp: float
    eps_par: float

    @property
    def eps_perp_mhz_per_mpa(self) -> float:
        return self.eps_perp * MPA / (TWO_PI * 1e6)

    @property
    def eps_par_mhz_per_mpa(self) -> float:
        return self.eps_par * MPA / (TWO_PI * 1e6)

    @classmethod
    def from_mhz_per_mpa(cls, eps_perp: float, eps_par: float) -> StressCouplings:
        return cls(eps_perp=TWO_PI * 1e6 * eps_perp / MPA, eps_par=TWO_PI * 1e6 * eps_par / MPA)


@dataclass(frozen=True)
class FrameRotation:
    """Orthogonal matrix whose columns are the NV x, y, z axes in lattice coordinates."""

    matrix: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.matrix, dtype=float)
        if r.shape != (3, 3):
            raise InvalidParameterError(f"Frame rotation must be 3x3, got {r.shape}")
        if not np.allclose(r @ r.T, np.eye(3), rtol=0.0, atol=1e-12):
            raise InvalidParameterError("Frame rotation is not orthogonal within 1e-12")
        if abs(np.linalg.det(r) - 1.0) > 1e-12:
            raise InvalidParameterError("Frame rotation must have determinant +1")
        object.__setattr__(self, "matrix", r)

    @property
    def nv_axis(self) -> np.ndarray:
        return self.matrix[:, 2]


# ── Builders ────────────────────────────────────────────


def build_stiffness(c11: float, c12: float, c44: float) -> StiffnessMatrix:
    """Assemble the cubic stiffness matrix from constants given in GPa.

    A zero c12 is allowed (decoupled normal axes); c11 and c44 must be
    strictly positive and c12 non-negative.
    """
    for name, value, strict in (("c11", c11, True), ("c12", c12, False), ("c44", c44, True)):
        if not np.isfinite(value) or value < 0 or (strict and value == 0):
            raise InvalidParameterError(f"Stiffness constant {name}={value} GPa must be positive")
    return StiffnessMatrix(c11=c11 * GPA, c12=c12 * GPA, c44=c44 * GPA)


def nv_frame_rotation(axis=(1.0, 1.0, 1.0), transverse_angle: float = 0.0) -> FrameRotation:
    """Orthonormal NV frame with z along *axis*.

    For the [111] axis the transverse pair starts at x = [11-2]/sqrt6,
    y = [-110]/sqrt2; *transverse_angle* (rad) rotates that pair about z.
    """
    z = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(z)
    if norm == 0:
        raise InvalidParameterError("NV axis must be non-zero")
    z = z / norm
    seed = np.array([0.0, 0.0, 1.0]) if abs(z[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    if np.allclose(np.abs(z), 1.0 / np.sqrt(3.0)):
        seed = np.array([0.0, 0.0, -1.0]) * np.sign(z[2])
    x = seed - (seed @ z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    c, s = np.cos(transverse_angle), np.sin(transverse_angle)
    x, y = c * x + s * y, -s * x + c * y
    return FrameRotation(np.column_stack([x, y, z]))


def rotate_tensor(t: np.ndarray, r: FrameRotation, inverse: bool = False) -> np.ndarray:
    """Rotate a rank-2 tensor NV -> lattice (or lattice -> NV with *inverse*)."""
    m = r.matrix
    if inverse:
        return m.T @ t @ m
    return m @ t @ m.T


# ── Conversion ──────────────────────────────────────────


def _stress_coupling_tensor(d_nv: np.ndarray, s_lattice: np.ndarray, r: FrameRotation) -> np.ndarray:
    d_lattice = rotate_tensor(d_nv, r)
    e_lattice = np.einsum("ij,ijkl->kl", d_lattice, s_lattice)
    return rotate_tensor(e_lattice, r, inverse=True)


def strain_to_stress_couplings(d: StrainCouplings, c: StiffnessMatrix, r: FrameRotation) -> StressCouplings:
    """Convert spin-strain couplings to spin-stress couplings in the NV frame.

    The axial coupling multiplies zz strain; the perpendicular coupling
    multiplies (xx - yy) strain. On the stress side eps_par multiplies
    sigma_zz and eps_perp multiplies the transverse stress difference, so
    eps_perp = (E_xx - E_yy) / 2, which does not depend on the transverse
    axis angle.

    Raises
    ------
    NumericalError
        If the stiffness matrix cannot be inverted.
    """
    s = c.compliance_tensor()
    axial = np.diag([0.0, 0.0, d.d_par])
    transverse = np.diag([d.d_perp, -d.d_perp, 0.0])

    e_par = _stress_coupling_tensor(axial, s, r)
    e_perp = _stress_coupling_tensor(transverse, s, r)

    out = StressCouplings(eps_perp=0.5 * (e_perp[0, 0] - e_perp[1, 1]), eps_par=e_par[2, 2])
    logger.debug(
        "Stress couplings: eps_perp=%.5f MHz/MPa, eps_par=%.5f MHz/MPa",
        out.eps_perp_mhz_per_mpa,
        out.eps_par_mhz_per_mpa,
    )
    return out
