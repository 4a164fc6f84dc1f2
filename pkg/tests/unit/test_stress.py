"""
Unit tests -- crystal stress: stiffness, frame rotation, strain -> stress couplings.
"""
import numpy as np
import pytest

from src.core.errors import InvalidParameterError, NumericalError
from src.core.units import MPA, TWO_PI
from src.crystal.stress import (
    FrameRotation,
    StrainCouplings,
    StressCouplings,
    build_stiffness,
    nv_frame_rotation,
    rotate_tensor,
    strain_to_stress_couplings,
)

C11, C12, C44 = 1076.4, 125.2, 577.4
D_PERP, D_PAR = 21.5, 13.3


def _oracle(d: StrainCouplings, c6: np.ndarray, r: np.ndarray) -> tuple[float, float]:
    """Apply 1 Pa NV-frame stress, solve Hooke's law in Voigt form, read the spin shift."""
    pairs = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)]

    def shift(stress_nv: np.ndarray, coupling: np.ndarray) -> float:
        lattice = r @ stress_nv @ r.T
        stress_v = np.array([lattice[i, j] for i, j in pairs])
        strain_v = np.linalg.solve(c6, stress_v)
        strain = np.zeros((3, 3))
        for n, (i, j) in enumerate(pairs):
            value = strain_v[n] if n < 3 else 0.5 * strain_v[n]
            strain[i, j] = strain[j, i] = value
        strain_nv = r.T @ strain @ r
        total = 0.0
        for i in range(3):
            for j in range(3):
                total += coupling[i, j] * strain_nv[i, j]
        return total

    eps_par = shift(np.diag([0.0, 0.0, 1.0]), np.diag([0.0, 0.0, d.d_par]))
    eps_perp = shift(np.diag([1.0, 0.0, 0.0]), np.diag([d.d_perp, -d.d_perp, 0.0]))
    return eps_perp, eps_par


@pytest.fixture(scope="module")
def diamond():
    return build_stiffness(C11, C12, C44)


# ── Stiffness ───────────────────────────────────────────


def test_stiffness_matrix_layout(diamond):
    c = diamond.matrix
    assert c.shape == (6, 6)
    assert np.allclose(c, c.T)
    assert c[0, 0] == C11 * 1e9
    assert c[0, 1] == C12 * 1e9
    assert c[3, 3] == C44 * 1e9
    assert c[0, 3] == 0.0


def test_compliance_is_inverse(diamond):
    assert np.allclose(diamond.compliance() @ diamond.matrix, np.eye(6), atol=1e-10)


def test_compliance_tensor_symmetries(diamond):
    s = diamond.compliance_tensor()
    assert s.shape == (3, 3, 3, 3)
    assert np.allclose(s, s.transpose(1, 0, 2, 3))
    assert np.allclose(s, s.transpose(0, 1, 3, 2))
    assert np.allclose(s, s.transpose(2, 3, 0, 1))
    # shear entries carry 1/4 of the Voigt value
    assert np.isclose(s[1, 2, 1, 2], 0.25 * diamond.compliance()[3, 3])


def test_zero_c12_is_allowed():
    c = build_stiffness(1000.0, 0.0, 500.0)
    assert np.allclose(np.diag(c.compliance())[:3], 1.0 / 1000e9)


def test_invalid_stiffness_rejected():
    with pytest.raises(InvalidParameterError):
        build_stiffness(-1.0, 125.2, 577.4)
    with pytest.raises(InvalidParameterError):
        build_stiffness(1076.4, 125.2, 0.0)


def test_singular_stiffness_raises_numerical_error():
    with pytest.raises(NumericalError):
        build_stiffness(500.0, 500.0, 300.0).compliance()


# ── Frame ───────────────────────────────────────────────


def test_nv_frame_is_proper_rotation():
    r = nv_frame_rotation()
    m = r.matrix
    assert np.allclose(m @ m.T, np.eye(3), atol=1e-12)
    assert np.isclose(np.linalg.det(m), 1.0)
    assert np.allclose(r.nv_axis, np.ones(3) / np.sqrt(3.0))


def test_frame_rotation_rejects_non_orthogonal():
    with pytest.raises(InvalidParameterError):
        FrameRotation(np.diag([1.0, 2.0, 1.0]))
    with pytest.raises(InvalidParameterError):
        FrameRotation(np.diag([1.0, 1.0, -1.0]))


def test_rotate_tensor_round_trip():
    r = nv_frame_rotation(transverse_angle=0.3)
    t = np.arange(9.0).reshape(3, 3)
    t = t + t.T
    assert np.allclose(rotate_tensor(rotate_tensor(t, r), r, inverse=True), t)


# ── Conversion ──────────────────────────────────────────


def test_couplings_match_hooke_oracle(diamond):
    d = StrainCouplings.from_ghz(D_PERP, D_PAR)
    r = nv_frame_rotation()
    out = strain_to_stress_couplings(d, diamond, r)
    perp, par = _oracle(d, diamond.matrix, r.matrix)
    assert np.isclose(out.eps_perp, perp, rtol=1e-10)
    assert np.isclose(out.eps_par, par, rtol=1e-10)


def test_axial_coupling_value(diamond):
    out = strain_to_stress_couplings(StrainCouplings.from_ghz(D_PERP, D_PAR), diamond, nv_frame_rotation())
    # d_par times the [111] axial compliance
    assert out.eps_par_mhz_per_mpa == pytest.approx(0.01102, rel=2e-3)
    assert out.eps_perp_mhz_per_mpa > 0


def test_conversion_is_basis_invariant(diamond):
    d = StrainCouplings.from_ghz(D_PERP, D_PAR)
    ref = strain_to_stress_couplings(d, diamond, nv_frame_rotation())
    for angle in (0.4, 1.1, 2.7):
        out = strain_to_stress_couplings(d, diamond, nv_frame_rotation(transverse_angle=angle))
        assert np.isclose(out.eps_perp, ref.eps_perp, rtol=1e-9)
        assert np.isclose(out.eps_par, ref.eps_par, rtol=1e-9)


def test_conversion_is_linear(diamond):
    d = StrainCouplings.from_ghz(D_PERP, D_PAR)
    r = nv_frame_rotation()
    a = strain_to_stress_couplings(d, diamond, r)
    b = strain_to_stress_couplings(d.scaled(3.0), diamond, r)
    assert np.isclose(b.eps_perp, 3.0 * a.eps_perp)
    assert np.isclose(b.eps_par, 3.0 * a.eps_par)


def test_stress_coupling_unit_boundary():
    c = StressCouplings.from_mhz_per_mpa(0.015, 0.012)
    assert np.isclose(c.eps_perp, TWO_PI * 1e6 * 0.015 / MPA)
    assert np.isclose(c.eps_perp_mhz_per_mpa, 0.015)
    assert np.isclose(c.eps_par_mhz_per_mpa, 0.012)
