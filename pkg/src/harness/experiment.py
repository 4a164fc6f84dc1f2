"""
ExperimentConfig -- the validated, unit-explicit description of one run.

One YAML file per experiment. Every physical quantity carries its unit in
the key (``omega_mech_mhz``, ``t2_star_us``); frequencies are cyclic and
are converted to rad/s only in the ``to_*`` builders below.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.analysis.ramsey import RamseyKind
from src.core.errors import ConfigError
from src.core.units import TWO_PI, UM, US
from src.ensemble.psf import PSFModel
from src.pulses.noise import DISTRIBUTIONS, REFERENCES, NoiseModel
from src.resonator.ring import RingModel, StandingWave
from src.spin.hamiltonian import SpinParameters

ExperimentKind = Literal[
    "rabi-lowq",
    "readout-control",
    "rabi-highq",
    "depth-sweep",
    "pulse-area",
    "ramsey-mech",
    "ramsey-dq",
    "ramsey-sq-minus",
    "ramsey-sq-plus",
    "hahn",
    "stress-convert",
    "fit",
    "spectrum",
]

RAMSEY_QUBITS = {
    "ramsey-mech": "mech",
    "ramsey-dq": "dq",
    "ramsey-sq-minus": "sq-minus",
    "ramsey-sq-plus": "sq-plus",
}

# sections each kind cannot run without
REQUIRED_SECTIONS: dict[str, tuple[str, ...]] = {
    "rabi-lowq": ("standing_wave", "sweep"),
    "readout-control": ("standing_wave", "sweep"),
    "rabi-highq": ("ring", "standing_wave", "sweep", "pulse_pair"),
    "depth-sweep": ("ring", "standing_wave", "sweep", "pulse_pair", "depths"),
    "pulse-area": ("ring", "sweep", "pulse_pair"),
    "ramsey-mech": ("standing_wave", "sweep"),
    "ramsey-dq": ("sweep",),
    "ramsey-sq-minus": ("sweep",),
    "ramsey-sq-plus": ("sweep",),
    "hahn": ("sweep",),
    "stress-convert": ("stress",),
    "fit": ("fit",),
    "spectrum": ("spectrum",),
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _mhz(value: float) -> float:
    return TWO_PI * 1e6 * value


# ── Physical sections ───────────────────────────────────


class SampleSection(_Section):
    """NV constants; the defaults are the published values."""

    d0_ghz: float = Field(2.87, gt=0)
    gamma_mhz_per_g: float = Field(2.8, gt=0)
    eps_perp_mhz_per_mpa: float = 0.015
    eps_par_mhz_per_mpa: float = 0.012
    p_mhz: float = -4.945
    a_par_mhz: float = -2.166

    def to_params(self) -> SpinParameters:
        return SpinParameters.from_lab_units(**self.model_dump())


class RingSection(_Section):
    omega_m_mhz: float = Field(..., gt=0, description="Mechanical resonance frequency (cyclic)")
    q: float = Field(..., gt=0, description="Loaded quality factor")
    pulse_length_us: float = Field(..., gt=0, description="Drive voltage length L")
    trigger_offset_us: float = 0.0

    def to_ring(self) -> RingModel:
        return RingModel.from_lab_units(self.omega_m_mhz, self.q, self.pulse_length_us, self.trigger_offset_us)


class StandingWaveSection(_Section):
    omega_mech_mhz: float = Field(..., ge=0, description="Rabi frequency at an antinode (cyclic)")
    wavelength_um: float = Field(..., gt=0)

    def to_standing_wave(self) -> StandingWave:
        return StandingWave.from_lab_units(self.omega_mech_mhz, self.wavelength_um)


class PSFSection(_Section):
    z0_um: float = Field(..., ge=0, description="Focal depth below the surface")
    fwhm0_um: float = Field(..., gt=0, description="Axial FWHM at the surface")
    slope: float = Field(..., ge=0, description="FWHM growth per unit depth")

    def to_psf(self) -> PSFModel:
        return PSFModel.from_lab_units(self.z0_um, self.fwhm0_um, self.slope)


class NoiseSection(_Section):
    t2_star_us: float = Field(..., gt=0)
    reference: str = "double-quantum"
    distribution: str = "gaussian-detuning"

    @field_validator("reference")
    @classmethod
    def _known_reference(cls, v: str) -> str:
        if v not in REFERENCES:
            raise ValueError(f"must be one of {list(REFERENCES)}")
        return v

    @field_validator("distribution")
    @classmethod
    def _known_distribution(cls, v: str) -> str:
        if v not in DISTRIBUTIONS:
            raise ValueError(f"must be one of {list(DISTRIBUTIONS)}")
        return v

    def to_noise(self) -> NoiseModel:
        return NoiseModel(self.t2_star_us * US, self.reference, self.distribution)


class EnsembleSection(_Section):
    shots: int = Field(200, gt=0)
    nuclear_weights: tuple[float, float, float] | None = Field(
        None, description="Populations of m_I = +1, 0, -1; uniform when omitted"
    )
    depth_um: float | None = Field(None, ge=0, description="Point depth used when no PSF is given")
    drive_detuning_mhz: float = 0.0
    psf_nodes: int | None = Field(None, gt=0)
    tol: float | None = Field(None, gt=0)
    method: Literal["closed-form", "propagate"] = "closed-form"
    idealized: bool = True

    @field_validator("nuclear_weights")
    @classmethod
    def _weights(cls, v):
        if v is not None and (min(v) < 0 or sum(v) > 1.0 + 1e-12):
            raise ValueError("must be non-negative and sum to at most 1")
        return v


class SweepSection(_Section):
    """Uniform grid of times (or leading-pulse times) in microseconds."""

    start_us: float
    stop_us: float
    points: int = Field(..., gt=1)

    @model_validator(mode="after")
    def _ordered(self) -> SweepSection:
        if self.stop_us <= self.start_us:
            raise ValueError("stop_us must be greater than start_us")
        return self

    def grid(self) -> np.ndarray:
        return np.linspace(self.start_us, self.stop_us, self.points) * US


class PulsePairSection(_Section):
    tau_mag_us: float = Field(..., gt=0, description="Spacing of the two magnetic pi-pulses")

    @property
    def tau_mag(self) -> float:
        return self.tau_mag_us * US


class RamseySection(_Section):
    qubit: Literal["mech", "dq", "sq-minus", "sq-plus"] | None = None
    omega_rot_mhz: float = 0.0
    mech_pi_half_us: float | None = Field(None, gt=0)
    refocus: bool = True

    @property
    def omega_rot(self) -> float:
        return _mhz(self.omega_rot_mhz)

    @property
    def mech_pi_half(self) -> float | None:
        return None if self.mech_pi_half_us is None else self.mech_pi_half_us * US


class DepthsSection(_Section):
    depths_um: list[float] = Field(..., min_length=1)

    @field_validator("depths_um")
    @classmethod
    def _non_negative(cls, v: list[float]) -> list[float]:
        if any(z < 0 for z in v):
            raise ValueError("depths must be non-negative")
        return v

    def to_depths(self) -> np.ndarray:
        return np.asarray(self.depths_um, dtype=float) * UM


class StressSection(_Section):
    """Cubic stiffness of diamond and the measured strain couplings."""

    c11_gpa: float = 1076.4
    c12_gpa: float = 125.2
    c44_gpa: float = 577.4
    d_perp_ghz: float = 21.5
    d_par_ghz: float = 13.3
    transverse_angle_deg: float = 0.0


class ReadoutSection(_Section):
    via_minus_fidelity: float = Field(1.0, ge=0, le=1)
    via_plus_fidelity: float = Field(1.0, ge=0, le=1)


# ── Analysis sections ───────────────────────────────────


class FitSection(_Section):
    input: str = Field(..., description="Trace CSV to fit")
    model: str = Field("sq", description="sq | dq | mech or a Ramsey kind name")
    a_par_mhz: float = 2.166
    omega_rot_mhz: float = 0.0

    @field_validator("model")
    @classmethod
    def _known_model(cls, v: str) -> str:
        RamseyKind.from_label(v)
        return v


class SpectrumSection(_Section):
    input: str = Field(..., description="Trace CSV to transform")
    window: str = "hann"
    zero_pad_factor: int = Field(8, ge=1)


class OutputSection(_Section):
    stem: str | None = Field(None, description="File stem for the artifacts; defaults to the experiment name")


# ── Top level ───────────────────────────────────────────


class ExperimentConfig(BaseModel):
    """A single experiment: what to simulate (or analyse) and with which parameters."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: ExperimentKind
    name: str = Field(..., min_length=1)
    description: str = ""
    figure: str | None = Field(None, description="Published panel this run reproduces")
    seed: int = Field(0, ge=0)

    sample: SampleSection = Field(default_factory=SampleSection)
    ring: RingSection | None = None
    standing_wave: StandingWaveSection | None = None
    psf: PSFSection | None = None
    noise: NoiseSection | None = None
    ensemble: EnsembleSection = Field(default_factory=EnsembleSection)
    sweep: SweepSection | None = None
    pulse_pair: PulsePairSection | None = None
    ramsey: RamseySection = Field(default_factory=RamseySection)
    depths: DepthsSection | None = None
    stress: StressSection | None = None
    readout: ReadoutSection = Field(default_factory=ReadoutSection)
    fit: FitSection | None = None
    spectrum: SpectrumSection | None = None
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _required_sections(self) -> ExperimentConfig:
        missing = [s for s in REQUIRED_SECTIONS[self.kind] if getattr(self, s) is None]
        if missing:
            raise ValueError(f"kind '{self.kind}' requires section(s): {', '.join(missing)}")
        if self.kind == "hahn" and self.ramsey.qubit is None:
            raise ValueError("kind 'hahn' requires ramsey.qubit")
        if self.qubit == "mech" and self.standing_wave is None:
            raise ValueError("the mechanical qubit requires section: standing_wave")
        return self

    @property
    def qubit(self) -> str | None:
        if self.kind in RAMSEY_QUBITS:
            return RAMSEY_QUBITS[self.kind]
        return self.ramsey.qubit if self.kind == "hahn" else None

    @property
    def stem(self) -> str:
        return self.output.stem or self.name

    def echo(self) -> dict[str, Any]:
        """JSON-ready copy of the full configuration, defaults included."""
        return self.model_dump(mode="json")


# ── Loading ─────────────────────────────────────────────


def _diagnostics(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        out.append(f"{loc}: {err['msg']}")
    return out


def _resolve_inputs(raw: dict[str, Any], base: Path) -> dict[str, Any]:
    """Make ``fit.input`` / ``spectrum.input`` absolute relative to the config file."""
    for section in ("fit", "spectrum"):
        block = raw.get(section)
        if isinstance(block, dict) and isinstance(block.get("input"), str):
            p = Path(block["input"])
            if not p.is_absolute():
                block["input"] = str((base / p).resolve())
    return raw


def parse_config(raw: Any, base: Path | None = None, source: str = "<config>") -> ExperimentConfig:
    """Validate an already-parsed mapping.

    Raises
    ------
    ConfigError
        With one ``"loc: message"`` diagnostic per schema violation.
    """
    if raw is None or raw == {}:
        raise ConfigError(f"{source} is empty", ["<root>: configuration is empty"])
    if not isinstance(raw, dict):
        raise ConfigError(f"{source} is not a mapping", [f"<root>: expected a mapping, got {type(raw).__name__}"])
    if base is not None:
        raw = _resolve_inputs(dict(raw), base)
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source} failed validation", _diagnostics(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate one experiment YAML file.

    Raises
    ------
    ConfigError
        Empty file, YAML syntax error, or schema violation.
    OSError
        The file cannot be read.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML", [str(exc)]) from None
    return parse_config(raw, base=path.resolve().parent, source=str(path))
