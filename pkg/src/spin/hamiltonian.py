"""
NV ground-state Hamiltonian and its rotating-frame qubit reductions.

The lab Hamiltonian acts on the 9-dimensional electron (x) nuclear space:

    H = (D0 + eps_par sigma_par) Sz^2 + P Iz^2 + A_par Iz Sz + gamma B_par Sz
        + gamma B_perp Sx - eps_perp sigma_x (Sx^2 - Sy^2)
        + eps_perp sigma_y (Sx Sy + Sy Sx)

The nuclear spin is never propagated: every m_I gets its own 3x3
rotating-frame problem built from the diagonal of H.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from src.core.errors import InvalidParameterError
from src.core.logging import get_logger
from src.core.units import MPA, TWO_PI
from src.spin.operators import DOUBLE_PAIR, MINUS_PAIR, PLUS_PAIR, ZERO, level_index, spin1_operators

logger = get_logger(__name__)

_I3 = np.eye(3, dtype=complex)
_RWA_FRACTION = 0.01
_PERTURBATIVE_FRACTION = 0.1


# ── Parameters ──────────────────────────────────────────


@dataclass(frozen=True)
class SpinParameters:
    """NV constants in SI: rad/s, rad/s per gauss, rad/s per Pa."""

    d0: float
    gamma: float
    eps_perp: float
    eps_par: float
    p: float
    a_par: float

    def __post_init__(self):
        if not self.d0 > 0:
            raise InvalidParameterError(f"Zero-field splitting must be positive, got {self.d0}")
        if not self.gamma > 0:
            raise InvalidParameterError(f"Gyromagnetic ratio must be positive, got {self.gamma}")

    @classmethod
    def from_lab_units(
        cls,
        d0_ghz: float,
        gamma_mhz_per_g: float,
        eps_perp_mhz_per_mpa: float,
        eps_par_mhz_per_mpa: float,
        p_mhz: float,
        a_par_mhz: float,
    ) -> SpinParameters:
        mhz = TWO_PI * 1e6
        return cls(
            d0=d0_ghz * 1e3 * mhz,
            gamma=gamma_mhz_per_g * mhz,
            eps_perp=eps_perp_mhz_per_mpa * mhz / MPA,
            eps_par=eps_par_mhz_per_mpa * mhz / MPA,
            p=p_mhz * mhz,
            a_par=a_par_mhz * mhz,
        )

    @classmethod
    def defaults(cls) -> SpinParameters:
        """Published NV- constants with the 14N nuclear spin."""
        return cls.from_lab_units(
            d0_ghz=2.87,
            gamma_mhz_per_g=2.8,
            eps_perp_mhz_per_mpa=0.015,
            eps_par_mhz_per_mpa=0.012,
            p_mhz=-4.945,
            a_par_mhz=-2.166,
        )


@dataclass(frozen=True)
class FieldConfig:
    """Static fields in gauss and NV-frame stresses in Pa."""

    b_par: float = 0.0
    b_perp: float = 0.0
    sigma_par: float = 0.0
    sigma_x: float = 0.0
    sigma_y: float = 0.0

    @classmethod
    def from_mpa(
        cls,
        b_par: float = 0.0,
        b_perp: float = 0.0,
        sigma_par: float = 0.0,
        sigma_x: float = 0.0,
        sigma_y: float = 0.0,
    ) -> FieldConfig:
        return cls(b_par, b_perp, sigma_par * MPA, sigma_x * MPA, sigma_y * MPA)


# ── Hamiltonians ────────────────────────────────────────


@dataclass(frozen=True)
class LabHamiltonian:
    """9x9 Hermitian matrix in rad/s, basis index = 3*index(m_s) + index(m_I)."""

    matrix: np.ndarray

    @staticmethod
    def index(m_s: int, m_i: int) -> int:
        return 3 * level_index(m_s) + level_index(m_i)

    def level_energy(self, m_s: int, m_i: int) -> float:
        k = self.index(m_s, m_i)
        return float(self.matrix[k, k].real)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        return bool(np.allclose(self.matrix, self.matrix.conj().T, rtol=0.0, atol=atol * scale))


@dataclass
class RotatingQubitHamiltonian:
    """3x3 rotating-frame Hamiltonian for one nuclear projection.

    ``pair`` holds the basis indices coupled by the drive; ``coupling`` is
    the full Rabi frequency, so the off-diagonal element is coupling/2.
    """

    matrix: np.ndarray
    pair: tuple[int, int]
    m_i: int
    detuning: float
    coupling: float
    drive_freq: float
    warnings: list[str] = field(default_factory=list)

    @property
    def offsets(self) -> np.ndarray:
        """Diagonal level offsets in rad/s."""
        return np.real(np.diag(self.matrix)).copy()

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.matrix))))
        return bool(np.allclose(self.matrix, self.matrix.conj().T, rtol=0.0, atol=atol * scale))


def build_lab_hamiltonian(p: SpinParameters, f: FieldConfig) -> LabHamiltonian:
    ops = spin1_operators()
    sx, sy, sz, iz = ops.sx, ops.sy, ops.sz, ops.iz

    def electron(op: np.ndarray) -> np.ndarray:
        return np.kron(op, _I3)

    h = (p.d0 + p.eps_par * f.sigma_par) * electron(sz @ sz)
    h = h + p.p * np.kron(_I3, iz @ iz)
    h = h + p.a_par * np.kron(sz, iz)
    h = h + p.gamma * f.b_par * electron(sz)
    h = h + p.gamma * f.b_perp * electron(sx)
    h = h - p.eps_perp * f.sigma_x * electron(sx @ sx - sy @ sy)
    h = h + p.eps_perp * f.sigma_y * electron(sx @ sy + sy @ sx)
    return LabHamiltonian(matrix=h)


def resonant_field(p: SpinParameters, drive_freq: float, m_i: int = 0) -> float:
    """Axial field (G) at which the |-1>-|+1> splitting of *m_i* equals *drive_freq*."""
    return (drive_freq - 2.0 * p.a_par * m_i) / (2.0 * p.gamma)


def _regime_warnings(p: SpinParameters, f: FieldConfig, detuning: float, bound: float) -> list[str]:
    warnings: list[str] = []
    if abs(detuning) > bound:
        warnings.append(
            f"Detuning {detuning / TWO_PI / 1e6:.4g} MHz exceeds the rotating-wave bound "
            f"{bound / TWO_PI / 1e6:.4g} MHz."
        )
    if abs(p.gamma * f.b_perp) > _PERTURBATIVE_FRACTION * p.d0:
        warnings.append("Transverse field is not small compared with D0; the rotating-frame reduction is approximate.")
    for w in warnings:
        logger.warning(w)
    return warnings


def rotating_frame_mechanical(
    p: SpinParameters,
    f: FieldConfig,
    drive_freq: float,
    m_i: int,
    omega: float = 0.0,
    rwa_bound: float | None = None,
) -> RotatingQubitHamiltonian:
    """Double-quantum frame: diag(delta, 0, -delta) plus omega/2 between |+1> and |-1>.

    ``2 delta = (E_+1 - E_-1) - drive_freq`` for the given nuclear projection.
    """
    lab = build_lab_hamiltonian(p, f)
    splitting = lab.level_energy(1, m_i) - lab.level_energy(-1, m_i)
    delta = 0.5 * (splitting - drive_freq)

    upper, lower = DOUBLE_PAIR
    h = np.diag([delta, 0.0, -delta]).astype(complex)
    h[upper, lower] = h[lower, upper] = 0.5 * omega

    bound = _RWA_FRACTION * abs(drive_freq) if rwa_bound is None else rwa_bound
    warnings = _regime_warnings(p, f, delta, bound)
    return RotatingQubitHamiltonian(
        matrix=h, pair=DOUBLE_PAIR, m_i=m_i, detuning=delta, coupling=omega, drive_freq=drive_freq, warnings=warnings
    )


def rotating_frame_magnetic(
    p: SpinParameters,
    f: FieldConfig,
    drive_freq: float,
    target: tuple[int, int],
    m_i: int,
    omega: float = 0.0,
    rwa_bound: float | None = None,
) -> RotatingQubitHamiltonian:
    """Single-quantum frame for the {0,-1} or {+1,0} transition.

    |0> is the frame reference; the driven |+-1> level carries the detuning
    ``(E_m - E_0) - drive_freq`` and the spectator level is left at zero.
    """
    if target not in (MINUS_PAIR, PLUS_PAIR):
        raise InvalidParameterError(f"Magnetic drive must target {{0,-1}} or {{+1,0}}, got index pair {target}")
    lab = build_lab_hamiltonian(p, f)
    driven = target[0] if target[0] != ZERO else target[1]
    m_s = 1 if driven == 0 else -1
    delta = (lab.level_energy(m_s, m_i) - lab.level_energy(0, m_i)) - drive_freq

    h = np.zeros((3, 3), dtype=complex)
    h[driven, driven] = delta
    h[driven, ZERO] = h[ZERO, driven] = 0.5 * omega

    bound = _RWA_FRACTION * abs(drive_freq) if rwa_bound is None else rwa_bound
    warnings = _regime_warnings(p, f, delta, bound)
    return RotatingQubitHamiltonian(
        matrix=h, pair=target, m_i=m_i, detuning=delta, coupling=omega, drive_freq=drive_freq, warnings=warnings
    )
