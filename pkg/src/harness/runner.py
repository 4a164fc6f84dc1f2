"""
Experiment runner -- turns a validated ExperimentConfig into artifacts.

Each kind has one handler that calls into the ensemble / analysis layers
and writes its files into the output directory:

  * traces:    ``<stem>.csv`` plus a ``<stem>.json`` sidecar (trace, meta, config echo)
  * stress:    ``<stem>.json``
  * fit:       ``<stem>.fit.json`` plus ``<stem>-residuals.csv``
  * spectrum:  ``<stem>-spectrum.csv`` plus ``<stem>-peaks.json``

and finally ``<stem>.manifest.json``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from src.analysis.ramsey import fit_ramsey, ramsey_model_eval
from src.analysis.spectrum import power_spectrum
from src.core.config import get_settings
from src.core.logging import get_logger
from src.core.parallel import resolve_workers
from src.core.units import TWO_PI, UM
from src.core.utils import timer
from src.crystal.stress import StrainCouplings, build_stiffness, nv_frame_rotation, strain_to_stress_couplings
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
from src.ensemble.trace import SignalTrace
from src.harness.experiment import ExperimentConfig
from src.harness.manifest import RunManifest
from src.resonator.ring import StandingWave, sweep_landmarks

logger = get_logger(__name__)

PUBLISHED_STRESS_COUPLINGS = {"eps_perp_mhz_per_mpa": 0.015, "eps_par_mhz_per_mpa": 0.012}

# magnetic-only experiments carry no mechanical drive
_NO_DRIVE = StandingWave(omega_mech=0.0, wavelength=1.0)


@dataclass(frozen=True)
class RunResult:
    manifest: RunManifest
    manifest_path: Path
    outputs: list[Path]


# ── Builders ────────────────────────────────────────────


def _mhz(value: float) -> float:
    return TWO_PI * 1e6 * value


def build_ensemble(cfg: ExperimentConfig) -> EnsembleConfig:
    """Translate the physical sections into the ensemble description (SI units)."""
    ens = cfg.ensemble
    return EnsembleConfig(
        standing_wave=cfg.standing_wave.to_standing_wave() if cfg.standing_wave is not None else _NO_DRIVE,
        psf=cfg.psf.to_psf() if cfg.psf is not None else None,
        noise=cfg.noise.to_noise() if cfg.noise is not None else None,
        nuclear_weights=ens.nuclear_weights,
        shots=ens.shots,
        seed=cfg.seed,
        depth=ens.depth_um * UM if ens.depth_um is not None else None,
        params=cfg.sample.to_params(),
        drive_detuning=_mhz(ens.drive_detuning_mhz),
        psf_nodes=ens.psf_nodes,
        tol=ens.tol,
    )


def _write_json(path: Path, payload: dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def _write_trace(trace: SignalTrace, out: Path, stem: str, cfg: ExperimentConfig) -> list[Path]:
    csv_path = trace.to_csv(out / f"{stem}.csv")
    json_path = trace.to_json(out / f"{stem}.json", config=cfg.echo())
    logger.info("Wrote %s (%d points)", csv_path.name, len(trace))
    return [csv_path, json_path]


# ── Handlers ────────────────────────────────────────────


def _rabi_lowq(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    trace = rabi_average_lowQ(
        build_ensemble(cfg), cfg.sweep.grid(), cfg.ensemble.method, cfg.ensemble.idealized, workers
    )
    return _write_trace(trace, out, cfg.stem, cfg)


def _readout_control(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    fidelities = (cfg.readout.via_minus_fidelity, cfg.readout.via_plus_fidelity)
    traces = readout_control(build_ensemble(cfg), cfg.sweep.grid(), fidelities, cfg.ensemble.idealized, workers)
    paths: list[Path] = []
    for label, trace in traces.items():
        paths += _write_trace(trace, out, f"{cfg.stem}-{label}", cfg)
    return paths


def _rabi_highq(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    ring = cfg.ring.to_ring()
    tau_mag = cfg.pulse_pair.tau_mag
    trace = rabi_average_highQ(build_ensemble(cfg), ring, cfg.sweep.grid(), tau_mag, cfg.ensemble.idealized, workers)
    marks = sweep_landmarks(ring, tau_mag)
    trace.meta["landmarks"] = {**asdict(marks), "critical_delay": marks.critical_delay}
    return _write_trace(trace, out, cfg.stem, cfg)


def _depth_sweep(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    traces = depth_sweep(
        build_ensemble(cfg),
        cfg.ring.to_ring(),
        cfg.depths.to_depths(),
        cfg.sweep.grid(),
        cfg.pulse_pair.tau_mag,
        cfg.ensemble.idealized,
        workers,
    )
    paths: list[Path] = []
    for z0, trace in traces.items():
        paths += _write_trace(trace, out, f"{cfg.stem}-{z0 / UM:g}um", cfg)
    return paths


def _pulse_area(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    trace = pulse_area_curve(cfg.ring.to_ring(), cfg.sweep.grid(), cfg.pulse_pair.tau_mag)
    return _write_trace(trace, out, cfg.stem, cfg)


def _ramsey(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    r = cfg.ramsey
    trace = ramsey_average(
        build_ensemble(cfg), cfg.qubit, cfg.sweep.grid(), r.omega_rot, r.mech_pi_half, cfg.ensemble.idealized, workers
    )
    return _write_trace(trace, out, cfg.stem, cfg)


def _hahn(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    r = cfg.ramsey
    trace = hahn_average(
        build_ensemble(cfg), cfg.qubit, cfg.sweep.grid(), r.refocus, r.mech_pi_half, cfg.ensemble.idealized, workers
    )
    return _write_trace(trace, out, cfg.stem, cfg)


def _stress_convert(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    s = cfg.stress
    couplings = strain_to_stress_couplings(
        StrainCouplings.from_ghz(s.d_perp_ghz, s.d_par_ghz),
        build_stiffness(s.c11_gpa, s.c12_gpa, s.c44_gpa),
        nv_frame_rotation(transverse_angle=np.deg2rad(s.transverse_angle_deg)),
    )
    computed = {
        "eps_perp_mhz_per_mpa": couplings.eps_perp_mhz_per_mpa,
        "eps_par_mhz_per_mpa": couplings.eps_par_mhz_per_mpa,
    }
    payload = {
        "computed": computed,
        "published": PUBLISHED_STRESS_COUPLINGS,
        "relative_difference": {
            k: (computed[k] - v) / v for k, v in PUBLISHED_STRESS_COUPLINGS.items()
        },
        "units": "MHz/MPa (cyclic)",
        "config": cfg.echo(),
    }
    logger.info(
        "Stress couplings: eps_perp=%.4f, eps_par=%.4f MHz/MPa",
        computed["eps_perp_mhz_per_mpa"],
        computed["eps_par_mhz_per_mpa"],
    )
    return [_write_json(out / f"{cfg.stem}.json", payload)]


def _fit(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    f = cfg.fit
    data = SignalTrace.from_csv(f.input, bounds=None)
    result = fit_ramsey(data, f.model, a_par=_mhz(f.a_par_mhz), omega_rot=_mhz(f.omega_rot_mhz))
    model = ramsey_model_eval(result.model, data.abscissa)
    residuals = SignalTrace(data.abscissa, data.mean - model, data.stderr, label="residuals", bounds=None)
    json_path = result.to_json(out / f"{cfg.stem}.fit.json")
    csv_path = residuals.to_csv(out / f"{cfg.stem}-residuals.csv")
    logger.info("Wrote %s and %s", json_path.name, csv_path.name)
    return [json_path, csv_path]


def _spectrum(cfg: ExperimentConfig, out: Path, workers: int) -> list[Path]:
    s = cfg.spectrum
    data = SignalTrace.from_csv(s.input, bounds=None)
    spec = power_spectrum(data, s.window, s.zero_pad_factor)
    csv_path = spec.to_csv(out / f"{cfg.stem}-spectrum.csv")
    payload = {
        "peaks": [{"frequency_hz": p.frequency, "power": p.power} for p in spec.peaks()],
        "resolution_hz": spec.resolution,
        "bin_width_hz": spec.bin_width,
        "energy": spec.energy(),
        "window": s.window,
        "zero_pad_factor": s.zero_pad_factor,
    }
    json_path = _write_json(out / f"{cfg.stem}-peaks.json", payload)
    logger.info("Wrote %s (%d peaks)", csv_path.name, len(payload["peaks"]))
    return [csv_path, json_path]


_HANDLERS: dict[str, Callable[[ExperimentConfig, Path, int], list[Path]]] = {
    "rabi-lowq": _rabi_lowq,
    "readout-control": _readout_control,
    "rabi-highq": _rabi_highq,
    "depth-sweep": _depth_sweep,
    "pulse-area": _pulse_area,
    "ramsey-mech": _ramsey,
    "ramsey-dq": _ramsey,
    "ramsey-sq-minus": _ramsey,
    "ramsey-sq-plus": _ramsey,
    "hahn": _hahn,
    "stress-convert": _stress_convert,
    "fit": _fit,
    "spectrum": _spectrum,
}


# ── Entry point ─────────────────────────────────────────


def run_experiment(
    cfg: ExperimentConfig, output_dir: str | Path | None = None, workers: int | None = None
) -> RunResult:
    """Run one experiment and write its artifacts plus manifest.

    Outputs depend only on the config (seed included), never on *workers*.

    Raises
    ------
    InvalidParameterError
        A parameter passed schema validation but is physically invalid.
    NumericalError
        Quadrature, integration or fitting failed.
    """
    out = Path(output_dir) if output_dir is not None else get_settings().output_path
    out.mkdir(parents=True, exist_ok=True)
    n_workers = resolve_workers(workers)
    manifest = RunManifest.start(cfg, n_workers)
    logger.info("Running %s (%s) with %d worker(s) into %s", cfg.name, cfg.kind, n_workers, out)

    with timer() as tm:
        outputs = _HANDLERS[cfg.kind](cfg, out, n_workers)
    manifest = manifest.finish(outputs, out, tm["elapsed_ms"])
    path = manifest.write(out, cfg.stem)
    logger.info("Finished %s: %d file(s) in %d ms", cfg.name, len(outputs), tm["elapsed_ms"])
    return RunResult(manifest=manifest, manifest_path=path, outputs=outputs)
