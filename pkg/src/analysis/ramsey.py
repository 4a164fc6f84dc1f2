"""
Ramsey fit models and damped least-squares fitting.

Magnetic qubits (three hyperfine lines, spacing A_par, doubled for the
{-1,+1} qubit):

    S(t) = exp(-t / T2*) * sum_j C_j cos((delta + k A_par m_j) t + phi_j),   m_j = -1, 0, +1

Mechanical qubit (single line, shifted by the phase-ramp frequency):

    S(t) = C exp(-t / T2*) cos((delta + omega_rot) t + phi)

A_par and omega_rot are fixed; delta, T2*, C_j and phi_j are free.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from scipy.optimize import least_squares

from src.analysis.spectrum import power_spectrum
from src.core.errors import FitConvergenceError, InvalidParameterError, RankDeficiencyError
from src.core.logging import get_logger
from src.core.units import TWO_PI
from src.ensemble.trace import SignalTrace

logger = get_logger(__name__)

A_PAR_DEFAULT = TWO_PI * 2.166e6
POINTS_PER_PARAMETER = 4
MAX_EVALUATIONS = 4000
_FLAT_RTOL = 1e-12
_POOR_GUESS_FRACTION = 0.5
_T2_GRID = (0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 1.0, 1.5, 2.5, 5.0)
_LINE_M = (-1, 0, 1)


class RamseyKind(str, Enum):
    SINGLE_QUANTUM = "single-quantum"
    DOUBLE_QUANTUM = "double-quantum"
    MECHANICAL = "mechanical"

    @property
    def n_lines(self) -> int:
        return 1 if self is RamseyKind.MECHANICAL else 3

    @property
    def hyperfine_factor(self) -> int:
        return {RamseyKind.SINGLE_QUANTUM: 1, RamseyKind.DOUBLE_QUANTUM: 2, RamseyKind.MECHANICAL: 0}[self]

    @property
    def parameter_names(self) -> list[str]:
        if self is RamseyKind.MECHANICAL:
            return ["delta", "t2_star", "c", "phi"]
        return ["delta", "t2_star", "c1", "c2", "c3", "phi1", "phi2", "phi3"]

    @classmethod
    def from_label(cls, label: str) -> RamseyKind:
        """Accept the kind value, a short alias (``sq``, ``dq``, ``mech``) or ``eq3`` / ``eq4``."""
        aliases = {
            "sq": cls.SINGLE_QUANTUM,
            "dq": cls.DOUBLE_QUANTUM,
            "mech": cls.MECHANICAL,
            "eq3": cls.SINGLE_QUANTUM,
            "eq4": cls.MECHANICAL,
        }
        if label in aliases:
            return aliases[label]
        try:
            return cls(label)
        except ValueError:
            raise InvalidParameterError(f"Unknown Ramsey model {label!r}") from None


@dataclass(frozen=True)
class RamseyModel:
    """Fit parameters in SI (seconds, rad/s, radians)."""

    kind: RamseyKind
    t2_star: float
    delta: float
    amplitudes: tuple[float, ...]
    phases: tuple[float, ...]
    a_par: float = A_PAR_DEFAULT
    omega_rot: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", RamseyKind(self.kind))
        object.__setattr__(self, "amplitudes", tuple(float(c) for c in self.amplitudes))
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        if not self.t2_star > 0:
            raise InvalidParameterError(f"T2* must be positive, got {self.t2_star}")
        n = self.kind.n_lines
        if len(self.amplitudes) != n or len(self.phases) != n:
            raise InvalidParameterError(f"{self.kind.value} model needs {n} amplitudes and phases")

    @property
    def hyperfine_spacing(self) -> float:
        """Line spacing: A_par for single-quantum, 2 A_par for double-quantum."""
        return self.kind.hyperfine_factor * self.a_par

    def line_frequencies(self) -> np.ndarray:
        """Angular frequencies of the cosine terms (rad/s)."""
        if self.kind is RamseyKind.MECHANICAL:
            return np.array([self.delta + self.omega_rot])
        return self.delta + self.hyperfine_spacing * np.array(_LINE_M, dtype=float)

    def to_vector(self) -> np.ndarray:
        return np.array([self.delta, self.t2_star, *self.amplitudes, *self.phases])

    @classmethod
    def from_vector(cls, kind: RamseyKind, x, a_par: float = A_PAR_DEFAULT, omega_rot: float = 0.0) -> RamseyModel:
        n = kind.n_lines
        x = np.asarray(x, dtype=float)
        return cls(kind, float(x[1]), float(x[0]), tuple(x[2 : 2 + n]), tuple(x[2 + n : 2 + 2 * n]), a_par, omega_rot)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.kind.parameter_names, (float(v) for v in self.to_vector())))


def ramsey_model_eval(m: RamseyModel, t):
    """Evaluate the Ramsey model at times *t* (s)."""
    t = np.asarray(t, dtype=float)
    theta = np.multiply.outer(t, m.line_frequencies()) + np.array(m.phases)
    out = np.exp(-t / m.t2_star) * (np.cos(theta) @ np.array(m.amplitudes))
    return out if out.ndim else float(out)


# ── Jacobian ────────────────────────────────────────────


def _lines(kind: RamseyKind, spacing: float, omega_rot: float) -> np.ndarray:
    if kind is RamseyKind.MECHANICAL:
        return np.array([omega_rot])
    return spacing * np.array(_LINE_M, dtype=float)


def _model_and_jacobian(x: np.ndarray, t: np.ndarray, kind: RamseyKind, spacing: float, omega_rot: float):
    n = kind.n_lines
    delta, t2 = x[0], x[1]
    amps, phases = x[2 : 2 + n], x[2 + n : 2 + 2 * n]
    env = np.exp(-t / t2)
    theta = np.multiply.outer(t, delta + _lines(kind, spacing, omega_rot)) + phases
    cos, sin = np.cos(theta), np.sin(theta)
    value = env * (cos @ amps)

    jac = np.empty((t.size, 2 + 2 * n))
    jac[:, 0] = -env * t * (sin @ amps)
    jac[:, 1] = env * (t / t2**2) * (cos @ amps)
    jac[:, 2 : 2 + n] = env[:, None] * cos
    jac[:, 2 + n :] = -env[:, None] * sin * amps
    return value, jac


def ramsey_jacobian(m: RamseyModel, t) -> np.ndarray:
    """Analytic derivatives of the model with respect to ``m.to_vector()``; shape (len(t), n_params)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    _, jac = _model_and_jacobian(m.to_vector(), t, m.kind, m.hyperfine_spacing, m.omega_rot)
    return jac


# ── Fit result ──────────────────────────────────────────


@dataclass
class FitResult:
    model: RamseyModel
    uncertainties: dict[str, float]
    residual_norm: float
    converged: bool
    n_points: int
    nfev: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def parameters(self) -> dict[str, float]:
        return self.model.as_dict()

    @property
    def t2_star(self) -> float:
        return self.model.t2_star

    @property
    def delta(self) -> float:
        return self.model.delta

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.model.kind.value,
            "parameters": self.parameters,
            "uncertainties": self.uncertainties,
            "fixed": {"a_par": self.model.a_par, "omega_rot": self.model.omega_rot},
            "units": {"delta": "rad/s", "t2_star": "s", "phases": "rad", "a_par": "rad/s", "omega_rot": "rad/s"},
            "summary": {
                "delta_khz": self.model.delta / TWO_PI / 1e3,
                "delta_err_khz": self.uncertainties["delta"] / TWO_PI / 1e3,
                "t2_star_us": self.model.t2_star * 1e6,
                "t2_star_err_us": self.uncertainties["t2_star"] * 1e6,
            },
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "n_points": self.n_points,
            "nfev": self.nfev,
            "warnings": self.warnings,
        }

    def to_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return path


# ── Fitting ─────────────────────────────────────────────


def _wrap(phi: np.ndarray) -> np.ndarray:
    """Map angles onto (-pi, pi]."""
    out = np.mod(phi + np.pi, 2 * np.pi) - np.pi
    return np.where(out == -np.pi, np.pi, out)


def _canonical(x: np.ndarray, kind: RamseyKind, omega_rot: float) -> np.ndarray:
    """Pick the representative of the mirror-equivalent solutions.

    Negating every frequency and phase leaves the model unchanged; for the
    magnetic models that mirror also exchanges the outer lines. Amplitudes
    are made non-negative by shifting the phase by pi.
    """
    n = kind.n_lines
    x = x.copy()
    amps, phases = x[2 : 2 + n], x[2 + n : 2 + 2 * n]
    if kind is RamseyKind.MECHANICAL:
        if x[0] + omega_rot < 0:
            x[0] = -x[0] - 2.0 * omega_rot
            phases = -phases
    elif x[0] < 0:
        x[0] = -x[0]
        amps, phases = amps[::-1], -phases[::-1]
    phases = np.where(amps < 0, phases + np.pi, phases)
    x[2 : 2 + n] = np.abs(amps)
    x[2 + n : 2 + 2 * n] = _wrap(phases)
    return x


def _project(t: np.ndarray, y: np.ndarray, delta: float, t2: float, freqs: np.ndarray):
    """Best amplitudes and phases for fixed (delta, T2*) by linear least squares."""
    env = np.exp(-t / t2)
    theta = np.multiply.outer(t, delta + freqs)
    basis = np.hstack([env[:, None] * np.cos(theta), env[:, None] * np.sin(theta)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    n = freqs.size
    a, b = coef[:n], coef[n:]
    resid = float(np.sum((basis @ coef - y) ** 2))
    # a cos + b sin = C cos(theta + phi) with C = hypot(a, b), phi = atan2(-b, a)
    return np.hypot(a, b), np.arctan2(-b, a), resid


def _delta_candidates(data: SignalTrace, kind: RamseyKind, spacing: float, omega_rot: float) -> list[float]:
    try:
        spec = power_spectrum(data)
        found = [TWO_PI * p.frequency for p in spec.peaks()] or [TWO_PI * spec.dominant_frequency()]
    except InvalidParameterError:
        # non-uniform sampling: scan a coarse grid up to the mean-spacing Nyquist frequency
        step = float(np.mean(np.diff(data.abscissa)))
        found = list(np.linspace(0.0, np.pi / step, 16)[1:])
    out: list[float] = []
    for f in found[:4]:
        for sign in (1.0, -1.0):
            if kind is RamseyKind.MECHANICAL:
                out.append(sign * f - omega_rot)
            else:
                out.extend(sign * f - spacing * m for m in _LINE_M)
    return out


def _initial_guess(data: SignalTrace, kind: RamseyKind, spacing: float, omega_rot: float) -> np.ndarray:
    t, y = data.abscissa, data.mean
    freqs = _lines(kind, spacing, omega_rot)
    span = float(t.max() - t.min())
    best: tuple[float, np.ndarray] | None = None
    for delta in _delta_candidates(data, kind, spacing, omega_rot):
        for frac in _T2_GRID:
            amps, phases, resid = _project(t, y, delta, frac * span, freqs)
            if best is None or resid < best[0]:
                best = (resid, np.array([delta, frac * span, *amps, *phases]))
    return best[1]


def fit_ramsey(
    data: SignalTrace,
    kind: RamseyKind | str,
    a_par: float = A_PAR_DEFAULT,
    omega_rot: float = 0.0,
    initial: RamseyModel | None = None,
    max_nfev: int = MAX_EVALUATIONS,
) -> FitResult:
    """Fit a Ramsey trace with the damped (Levenberg-Marquardt) least-squares method.

    Parameters
    ----------
    data : SignalTrace
        Coherence versus free-evolution time (s).
    kind : RamseyKind or str
        Model family; also accepts the ``"sq"``, ``"dq"`` and ``"mech"`` aliases.
    a_par : float
        Fixed hyperfine constant (rad/s).
    omega_rot : float
        Fixed phase-ramp frequency of the mechanical model (rad/s).
    initial : RamseyModel, optional
        Starting point; by default seeded from the power-spectrum peaks with
        the amplitudes and phases solved linearly.

    Raises
    ------
    InvalidParameterError
        Fewer than four data points per free parameter.
    RankDeficiencyError
        Flat data, or delta and T2* are not identifiable at the solution.
    FitConvergenceError
        The optimizer stopped before converging; ``last_iterate`` holds the
        final parameters.
    """
    kind = RamseyKind.from_label(kind) if isinstance(kind, str) else RamseyKind(kind)
    names = kind.parameter_names
    t, y = data.abscissa, data.mean
    if t.size < POINTS_PER_PARAMETER * len(names):
        raise InvalidParameterError(
            f"{kind.value} fit needs at least {POINTS_PER_PARAMETER * len(names)} points, got {t.size}"
        )
    if np.ptp(y) <= _FLAT_RTOL * max(float(np.max(np.abs(y))), 1.0):
        raise RankDeficiencyError("Data are flat; no oscillation to fit", diagnostic=f"peak-to-peak {np.ptp(y):.3e}")

    spacing = kind.hyperfine_factor * a_par
    warnings: list[str] = []
    x0 = initial.to_vector() if initial is not None else _initial_guess(data, kind, spacing, omega_rot)

    # work in units of the record length so all parameters are O(1)
    scale = float(np.max(np.abs(t))) or 1.0
    units = np.array([1.0 / scale, scale] + [1.0] * (len(names) - 2))
    ts = t / scale

    def residual(xs: np.ndarray) -> np.ndarray:
        value, _ = _model_and_jacobian(xs, ts, kind, spacing * scale, omega_rot * scale)
        return value - y

    def jacobian(xs: np.ndarray) -> np.ndarray:
        return _model_and_jacobian(xs, ts, kind, spacing * scale, omega_rot * scale)[1]

    xs0 = x0 / units
    start_norm = float(np.linalg.norm(residual(xs0)))
    if start_norm > _POOR_GUESS_FRACTION * float(np.linalg.norm(y)):
        msg = f"Initial guess leaves {start_norm:.3g} of the data norm {np.linalg.norm(y):.3g} unexplained"
        logger.warning(msg)
        warnings.append(msg)

    res = least_squares(residual, xs0, jac=jacobian, method="lm", max_nfev=max_nfev)
    x = res.x * units
    if res.status <= 0 or not np.all(np.isfinite(res.x)) or res.x[1] <= 0:
        raise FitConvergenceError(
            f"{kind.value} fit did not converge",
            last_iterate=dict(zip(names, x.tolist())),
            diagnostic=res.message,
        )

    jac = res.jac
    n, p = jac.shape
    col = np.linalg.norm(jac, axis=0)
    if np.linalg.matrix_rank(jac[:, :2] / np.where(col[:2] > 0, col[:2], 1.0)) < 2:
        raise RankDeficiencyError(
            "delta and T2* are not identifiable from these data", diagnostic=f"column norms {col[:2]}"
        )
    safe = np.where(col > 0, col, 1.0)
    rank = np.linalg.matrix_rank(jac / safe)
    if rank < p:
        msg = f"Jacobian rank {rank} < {p}; some amplitude/phase uncertainties are not identifiable"
        logger.warning(msg)
        warnings.append(msg)

    dof = max(n - p, 1)
    s2 = 2.0 * res.cost / dof
    cov = s2 * np.linalg.pinv(jac.T @ jac) * np.outer(units, units)
    sigma = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    x_canon = _canonical(x, kind, omega_rot)
    model = RamseyModel.from_vector(kind, x_canon, a_par=a_par, omega_rot=omega_rot)
    # mirrored lines keep their uncertainty when the outer amplitudes swap
    if kind is not RamseyKind.MECHANICAL and x[0] < 0:
        order = [0, 1, 4, 3, 2, 7, 6, 5]
        sigma = sigma[order]
    result = FitResult(
        model=model,
        uncertainties=dict(zip(names, sigma.tolist())),
        residual_norm=float(np.sqrt(2.0 * res.cost)),
        converged=True,
        n_points=n,
        nfev=int(res.nfev),
        warnings=warnings,
    )
    logger.info(
        "%s fit: delta/2pi=%.4g kHz, T2*=%.4g us (%d evaluations)",
        kind.value,
        model.delta / TWO_PI / 1e3,
        model.t2_star * 1e6,
        res.nfev,
    )
    return result
