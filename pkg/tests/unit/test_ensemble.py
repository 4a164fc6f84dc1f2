"""
Unit tests -- depth weighting, SignalTrace I/O and ensemble averages.
"""
import numpy as np
import pytest
from scipy.integrate import quad

from src.core.errors import ConfigError, InvalidParameterError
from src.core.units import UM, US
from src.ensemble.averaging import (
    EnsembleConfig,
    depth_sweep,
    hahn_average,
    pulse_area_curve,
    rabi_average_highQ,
    rabi_average_lowQ,
    ramsey_average,
    readout_control,
)
from src.ensemble.psf import PSFModel, depth_nodes, psf_weight
from src.ensemble.trace import SignalTrace, contrast_map, invert_contrast
from src.pulses.noise import NoiseModel
from src.resonator.ring import RingModel, StandingWave, pulse_area

MHZ = 2 * np.pi * 1e6
WAVE = StandingWave.from_lab_units(1.0, 20.0)
RESONANT = (0.0, 1.0, 0.0)


@pytest.fixture(scope="module")
def fast_ring():
    return RingModel(omega_m=2 * np.pi * 100e6, q=50, pulse_length=0.5 * US)


# ── PSF ─────────────────────────────────────────────────


def test_psf_width_grows_with_depth():
    psf = PSFModel.from_lab_units(10.0, 1.5, 0.6)
    assert psf.fwhm == pytest.approx(7.5 * UM)
    with pytest.raises(InvalidParameterError):
        PSFModel(z0=-1e-6, fwhm0=1e-6, slope=0.0)
    with pytest.raises(InvalidParameterError):
        PSFModel(z0=0.0, fwhm0=0.0, slope=0.0)


def test_psf_is_normalized_below_surface():
    psf = PSFModel.from_lab_units(2.0, 3.0, 0.5)
    total, _ = quad(lambda z: psf_weight(psf, z), 0.0, 60 * UM, points=[psf.z0])
    assert total == pytest.approx(1.0, rel=1e-6)
    assert psf_weight(psf, -1e-7) == 0.0


def test_depth_nodes_inside_window():
    psf = PSFModel.from_lab_units(18.0, 1.5, 0.6)
    z, w = depth_nodes(psf, 16)
    lo, hi = psf.window()
    assert np.all((z > lo) & (z < hi))
    assert w.sum() == pytest.approx(1.0)
    assert np.all(w >= 0)
    assert psf.window_mass() > 0.999
    with pytest.raises(InvalidParameterError):
        depth_nodes(psf, 0)


# ── SignalTrace ─────────────────────────────────────────


def test_trace_validation():
    with pytest.raises(InvalidParameterError):
        SignalTrace([0.0, 1.0], [0.5], [0.0, 0.0])
    with pytest.raises(InvalidParameterError):
        SignalTrace([0.0, 1.0], [0.5, 1.2], [0.0, 0.0])
    with pytest.raises(InvalidParameterError):
        SignalTrace([0.0, 1.0], [0.5, 0.2], [0.0, -0.1])
    SignalTrace([0.0, 1.0], [-3.0, 5.0], None, bounds=None)


def test_trace_spacing():
    tr = SignalTrace(np.linspace(0, 1e-6, 11), np.zeros(11), None)
    assert tr.spacing == pytest.approx(1e-7)
    with pytest.raises(InvalidParameterError):
        _ = SignalTrace([0.0, 1.0, 3.0], [0.0, 0.0, 0.0], None).spacing


def test_csv_rewrite_is_byte_stable(tmp_path):
    tr = SignalTrace(np.linspace(0, 4e-6, 7), np.linspace(0.0, 0.3, 7) ** 2, np.full(7, 1e-3), label="x")
    first = tr.to_csv(tmp_path / "a.csv")
    back = SignalTrace.from_csv(first)
    second = back.to_csv(tmp_path / "b.csv")
    assert first.read_bytes() == second.read_bytes()
    assert back.label == "a"
    assert np.array_equal(back.mean, tr.mean)


def test_from_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,value\n0,1\n", encoding="utf-8")
    with pytest.raises(InvalidParameterError):
        SignalTrace.from_csv(path)


def test_from_csv_reports_malformed_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("abscissa,mean,stderr\n0,0.1,0\n1e-7,abc,0\n", encoding="utf-8")
    with pytest.raises(ConfigError) as err:
        SignalTrace.from_csv(path)
    assert err.value.diagnostics[0].startswith("line 3:")
    path.write_text("abscissa,mean,stderr\n0,0.1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        SignalTrace.from_csv(path)


def test_contrast_inverts():
    counts = contrast_map([0.0, 0.5, 1.0], a=100.0, b=30.0)
    assert np.allclose(invert_contrast(counts, 100.0, 30.0), [0.0, 0.5, 1.0])
    with pytest.raises(InvalidParameterError):
        invert_contrast(1.0, 1.0, 0.0)


# ── EnsembleConfig ──────────────────────────────────────


def test_ensemble_config_validation():
    with pytest.raises(InvalidParameterError):
        EnsembleConfig(WAVE, shots=0)
    with pytest.raises(InvalidParameterError):
        EnsembleConfig(WAVE, nuclear_weights=(0.5, 0.5))
    with pytest.raises(InvalidParameterError):
        EnsembleConfig(WAVE, nuclear_weights=(0.5, 0.5, 0.5))


def test_noise_free_ensembles_use_one_shot():
    cfg = EnsembleConfig(WAVE, shots=50)
    assert cfg.effective_shots == 1
    assert cfg.point_depth == pytest.approx(5.0 * UM)


def test_bath_draws_follow_seed():
    cfg = EnsembleConfig(WAVE, noise=NoiseModel(0.5 * US), shots=20, seed=4)
    assert np.array_equal(cfg.reference_detunings(), cfg.reference_detunings())
    other = EnsembleConfig(WAVE, noise=NoiseModel(0.5 * US), shots=20, seed=5)
    assert not np.array_equal(cfg.reference_detunings(), other.reference_detunings())
    assert np.allclose(cfg.bath_shifts(), 0.5 * cfg.reference_detunings())


# ── Low-Q Rabi ──────────────────────────────────────────


def test_lowq_single_spin_is_sine_squared():
    cfg = EnsembleConfig(WAVE, nuclear_weights=RESONANT)
    t = np.linspace(0.0, 2.0, 21) * US
    trace = rabi_average_lowQ(cfg, t)
    assert np.allclose(trace.mean, np.sin(0.5 * WAVE.omega_mech * t) ** 2, atol=1e-12)
    assert np.all(trace.stderr == 0.0)


def test_lowq_closed_form_matches_propagation():
    cfg = EnsembleConfig(
        WAVE, noise=NoiseModel(0.5 * US), nuclear_weights=(0.2, 0.6, 0.2), shots=6, seed=3, drive_detuning=0.3 * MHZ
    )
    t = np.linspace(0.0, 1.5, 7) * US
    closed = rabi_average_lowQ(cfg, t, method="closed-form")
    prop = rabi_average_lowQ(cfg, t, method="propagate", workers=1)
    assert np.allclose(closed.mean, prop.mean, atol=1e-8)
    assert np.allclose(closed.stderr, prop.stderr, atol=1e-8)


def test_lowq_psf_average_is_damped():
    psf = PSFModel.from_lab_units(18.0, 1.5, 0.6)
    cfg = EnsembleConfig(WAVE, psf=psf, nuclear_weights=RESONANT)
    t = np.linspace(0.0, 4.0, 41) * US
    trace = rabi_average_lowQ(cfg, t)
    assert trace.mean[0] == pytest.approx(0.0, abs=1e-12)
    assert trace.mean.max() < 1.0
    assert np.all((trace.mean >= 0) & (trace.mean <= 1))


def test_lowq_stderr_shrinks_with_square_root_of_shots():
    t = np.linspace(0.5, 3.0, 26) * US

    def stderr(shots):
        cfg = EnsembleConfig(WAVE, noise=NoiseModel(0.5 * US), nuclear_weights=RESONANT, shots=shots, seed=21)
        return rabi_average_lowQ(cfg, t).stderr

    base, quarter, sixteenth = stderr(200), stderr(800), stderr(3200)
    assert np.all(base > 0)
    assert np.median(base / quarter) == pytest.approx(2.0, rel=0.2)
    assert np.median(base / sixteenth) == pytest.approx(4.0, rel=0.2)


def test_lowq_psf_average_repeats_every_half_wavelength():
    t = np.linspace(0.0, 4.0, 17) * US
    noise = NoiseModel(0.8 * US)
    half = 0.5 * WAVE.wavelength / UM

    def mean_at(z0_um):
        psf = PSFModel.from_lab_units(z0_um, 2.0, 0.0)
        cfg = EnsembleConfig(WAVE, psf=psf, noise=noise, nuclear_weights=RESONANT, shots=8, seed=9)
        return rabi_average_lowQ(cfg, t).mean

    near = mean_at(27.0)
    assert np.allclose(near, mean_at(27.0 + half), atol=1e-8)
    assert np.allclose(near, mean_at(27.0 + 2 * half), atol=1e-8)


def test_lowq_rejects_unknown_method():
    with pytest.raises(InvalidParameterError):
        rabi_average_lowQ(EnsembleConfig(WAVE), [0.0, 1e-6], method="magic")
    with pytest.raises(InvalidParameterError):
        rabi_average_lowQ(EnsembleConfig(WAVE), [-1e-6, 1e-6])


def test_readout_paths_agree():
    cfg = EnsembleConfig(WAVE, nuclear_weights=RESONANT)
    t = np.linspace(0.0, 1.0, 6) * US
    traces = readout_control(cfg, t, workers=1)
    assert set(traces) == {"via-minus", "via-plus"}
    assert np.allclose(traces["via-minus"].mean, traces["via-plus"].mean, atol=1e-9)
    assert np.allclose(traces["via-plus"].mean, np.sin(0.5 * WAVE.omega_mech * t) ** 2, atol=1e-9)


def test_imperfect_passage_lowers_contrast():
    cfg = EnsembleConfig(WAVE, nuclear_weights=RESONANT)
    t = np.array([0.5, 1.0]) * US
    ideal = readout_control(cfg, t, (1.0, 1.0), workers=1)["via-plus"]
    lossy = readout_control(cfg, t, (1.0, 0.8), workers=1)["via-plus"]
    assert np.allclose(lossy.mean, 0.8 * ideal.mean, atol=1e-9)


# ── High-Q Rabi ─────────────────────────────────────────


def test_highq_single_spin_follows_enclosed_area(fast_ring):
    wave = StandingWave.from_lab_units(2.0, 20.0)
    cfg = EnsembleConfig(wave, nuclear_weights=RESONANT, tol=1e-10)
    tau0 = np.array([-0.2, 0.0, 0.3]) * US
    tau_mag = 0.4 * US
    trace = rabi_average_highQ(cfg, fast_ring, tau0, tau_mag, workers=1)
    area = pulse_area(fast_ring, tau0, tau0 + tau_mag)
    assert np.allclose(trace.mean, np.sin(0.5 * wave.omega_mech * area) ** 2, atol=1e-6)


def test_highq_scales_with_resonant_weight(fast_ring):
    wave = StandingWave.from_lab_units(2.0, 20.0)
    tau0 = np.array([0.1]) * US
    full = rabi_average_highQ(EnsembleConfig(wave, nuclear_weights=RESONANT), fast_ring, tau0, 0.4 * US, workers=1)
    part = rabi_average_highQ(
        EnsembleConfig(wave, nuclear_weights=(0.0, 0.414, 0.0)), fast_ring, tau0, 0.4 * US, workers=1
    )
    assert part.mean[0] == pytest.approx(0.414 * full.mean[0], rel=1e-9)


def test_depth_sweep_keys_and_area_axis(fast_ring):
    wave = StandingWave.from_lab_units(1.0, 20.0)
    cfg = EnsembleConfig(wave, nuclear_weights=RESONANT)
    depths = np.array([5.0, 2.5]) * UM
    tau0 = np.array([-0.3, -0.2, -0.1]) * US
    traces = depth_sweep(cfg, fast_ring, depths, tau0, 0.4 * US, workers=1)
    assert sorted(traces) == sorted(depths.tolist())
    antinode = traces[5.0 * UM]
    assert np.all(np.diff(antinode.abscissa) > 0)
    assert np.allclose(antinode.mean, np.sin(0.5 * wave.omega_mech * antinode.abscissa) ** 2, atol=1e-6)
    assert np.all(traces[2.5 * UM].mean <= antinode.mean + 1e-9)


def test_pulse_area_curve_is_unbounded(fast_ring):
    tau0 = np.linspace(-0.5, 0.5, 11) * US
    curve = pulse_area_curve(fast_ring, tau0, 0.4 * US)
    assert curve.bounds is None
    assert np.allclose(curve.mean, pulse_area(fast_ring, tau0, tau0 + 0.4 * US))


# ── Ramsey / Hahn ───────────────────────────────────────


def test_single_quantum_ramsey_oscillates_at_mistuning():
    d = 0.4 * MHZ
    cfg = EnsembleConfig(WAVE, nuclear_weights=RESONANT, drive_detuning=d)
    tau = np.linspace(0.0, 3.0, 13) * US
    trace = ramsey_average(cfg, "sq-minus", tau, workers=1)
    assert np.allclose(trace.mean, -0.5 * np.cos(d * tau), atol=1e-9)
    assert trace.meta["y_np"] == pytest.approx(1.0)
    assert trace.meta["y_pi"] == pytest.approx(0.0)


def test_phase_ramp_shifts_frequency():
    w = 1.5 * MHZ
    cfg = EnsembleConfig(WAVE, nuclear_weights=RESONANT)
    tau = np.linspace(0.0, 2.0, 9) * US
    trace = ramsey_average(cfg, "sq-plus", tau, omega_rot=w, workers=1)
    assert np.allclose(trace.mean, -0.5 * np.cos(w * tau), atol=1e-9)


def test_double_quantum_fid_matches_gaussian_decay():
    t2 = 0.4 * US
    cfg = EnsembleConfig(WAVE, noise=NoiseModel(t2), nuclear_weights=RESONANT, shots=3000, seed=12)
    tau = np.array([0.0, 0.2, 0.4, 0.6]) * US
    trace = ramsey_average(cfg, "dq", tau, workers=1)
    expected = -0.5 * np.exp(-((tau / t2) ** 2))
    assert np.all(np.abs(trace.mean - expected) <= 3 * trace.stderr + 1e-3)


def test_mechanical_ramsey_needs_drive():
    cfg = EnsembleConfig(StandingWave(0.0, 1.0), nuclear_weights=RESONANT)
    with pytest.raises(InvalidParameterError):
        ramsey_average(cfg, "mech", [0.0, 1e-6], workers=1)


def test_idealized_echo_survives_bath_noise():
    cfg = EnsembleConfig(
        WAVE, noise=NoiseModel(0.3 * US, reference="single-quantum"), nuclear_weights=RESONANT, shots=400, seed=2
    )
    tau = np.linspace(0.0, 2.0, 5) * US
    echo = hahn_average(cfg, "sq-minus", tau, workers=1)
    assert np.allclose(echo.mean, 1.0, atol=1e-9)
    free = hahn_average(cfg, "sq-minus", tau, refocus=False, workers=1)
    assert abs(free.mean[-1]) < 0.2
