"""
Unit tests -- spin operators, lab Hamiltonian, rotating-frame reductions.
"""
import numpy as np
import pytest

from src.core.errors import InvalidParameterError
from src.core.units import TWO_PI
from src.spin.hamiltonian import (
    FieldConfig,
    LabHamiltonian,
    SpinParameters,
    build_lab_hamiltonian,
    resonant_field,
    rotating_frame_magnetic,
    rotating_frame_mechanical,
)
from src.spin.operators import DOUBLE_PAIR, MINUS_PAIR, PLUS_PAIR, level_index, spin1_operators

MHZ = TWO_PI * 1e6


@pytest.fixture(scope="module")
def params():
    return SpinParameters.defaults()


# ── Operators ───────────────────────────────────────────


def test_spin1_commutators():
    ops = spin1_operators()
    comm = ops.sx @ ops.sy - ops.sy @ ops.sx
    assert np.allclose(comm, 1j * ops.sz)
    total = ops.sx @ ops.sx + ops.sy @ ops.sy + ops.sz @ ops.sz
    assert np.allclose(total, 2.0 * np.eye(3))


def test_operators_are_read_only():
    with pytest.raises(ValueError):
        spin1_operators().sz[0, 0] = 5.0


def test_level_index():
    assert [level_index(m) for m in (1, 0, -1)] == [0, 1, 2]
    with pytest.raises(InvalidParameterError, match="projection"):
        level_index(2)


# ── Parameters ──────────────────────────────────────────


def test_default_constants(params):
    assert np.isclose(params.d0, 2.87e9 * TWO_PI)
    assert np.isclose(params.a_par, -2.166 * MHZ)
    assert np.isclose(params.p, -4.945 * MHZ)


def test_invalid_parameters():
    with pytest.raises(InvalidParameterError):
        SpinParameters(d0=0.0, gamma=1.0, eps_perp=0.0, eps_par=0.0, p=0.0, a_par=0.0)
    with pytest.raises(InvalidParameterError):
        SpinParameters(d0=1.0, gamma=-1.0, eps_perp=0.0, eps_par=0.0, p=0.0, a_par=0.0)


# ── Lab Hamiltonian ─────────────────────────────────────


def test_lab_hamiltonian_hermitian_under_all_fields(params):
    f = FieldConfig.from_mpa(b_par=12.0, b_perp=3.0, sigma_par=5.0, sigma_x=2.0, sigma_y=-1.0)
    h = build_lab_hamiltonian(params, f)
    assert h.matrix.shape == (9, 9)
    assert h.is_hermitian()


def test_zero_field_levels(params):
    h = build_lab_hamiltonian(params, FieldConfig())
    assert h.level_energy(0, 0) == 0.0
    assert np.isclose(h.level_energy(1, 0), params.d0)
    assert np.isclose(h.level_energy(1, 1), params.d0 + params.p + params.a_par)
    assert np.isclose(h.level_energy(-1, 1), params.d0 + params.p - params.a_par)
    assert np.isclose(h.level_energy(0, -1), params.p)


def test_axial_field_splits_plus_minus(params):
    b = 10.0
    h = build_lab_hamiltonian(params, FieldConfig(b_par=b))
    split = h.level_energy(1, 0) - h.level_energy(-1, 0)
    assert np.isclose(split, 2.0 * params.gamma * b)


def test_transverse_stress_couples_plus_minus(params):
    f = FieldConfig.from_mpa(sigma_x=10.0)
    h = build_lab_hamiltonian(params, f)
    up, down = LabHamiltonian.index(1, 0), LabHamiltonian.index(-1, 0)
    assert np.isclose(abs(h.matrix[up, down]), params.eps_perp * f.sigma_x)
    # no direct |0> coupling from stress
    assert h.matrix[LabHamiltonian.index(0, 0), up] == 0.0


def test_eigenvalues_sorted(params):
    ev = build_lab_hamiltonian(params, FieldConfig(b_par=5.0)).eigenvalues()
    assert np.all(np.diff(ev) >= 0)


# ── Rotating frames ─────────────────────────────────────


def test_mechanical_frame_resonant_at_resonant_field(params):
    drive = TWO_PI * 529e6
    b = resonant_field(params, drive, m_i=0)
    frame = rotating_frame_mechanical(params, FieldConfig(b_par=b), drive, m_i=0, omega=3.8 * MHZ)
    assert abs(frame.detuning) < 1e-3
    assert frame.pair == DOUBLE_PAIR
    up, down = DOUBLE_PAIR
    assert np.isclose(frame.matrix[up, down].real, 0.5 * 3.8 * MHZ)
    assert frame.is_hermitian()
    assert frame.warnings == []


def test_mechanical_frame_hyperfine_detuning(params):
    drive = TWO_PI * 529e6
    b = resonant_field(params, drive, m_i=0)
    frame = rotating_frame_mechanical(params, FieldConfig(b_par=b), drive, m_i=1)
    # {-1,+1} splitting moves by 2 A_par per unit m_I, detuning by half that
    assert np.isclose(frame.detuning, params.a_par, rtol=1e-9)
    assert np.allclose(frame.offsets, [frame.detuning, 0.0, -frame.detuning])


def test_rotating_wave_warning(params):
    drive = TWO_PI * 529e6
    frame = rotating_frame_mechanical(params, FieldConfig(b_par=0.0), drive, m_i=0, rwa_bound=MHZ)
    assert frame.warnings
    assert "rotating-wave" in frame.warnings[0]


def test_transverse_field_warning(params):
    f = FieldConfig(b_par=0.0, b_perp=200.0)
    frame = rotating_frame_magnetic(params, f, params.d0, MINUS_PAIR, m_i=0, rwa_bound=1e12)
    assert any("Transverse field" in w for w in frame.warnings)


def test_magnetic_frame_detuning(params):
    b = 20.0
    f = FieldConfig(b_par=b)
    drive = params.d0 - params.gamma * b
    frame = rotating_frame_magnetic(params, f, drive, MINUS_PAIR, m_i=0, omega=MHZ)
    assert abs(frame.detuning) < 1e-3
    assert np.isclose(frame.matrix[1, 2].real, 0.5 * MHZ)
    plus = rotating_frame_magnetic(params, f, params.d0 + params.gamma * b, PLUS_PAIR, m_i=0)
    assert abs(plus.detuning) < 1e-3


def test_magnetic_frame_rejects_double_quantum(params):
    with pytest.raises(InvalidParameterError):
        rotating_frame_magnetic(params, FieldConfig(), params.d0, DOUBLE_PAIR, m_i=0)
