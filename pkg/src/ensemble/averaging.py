"""
Ensemble averages of the single-spin protocols.

Every measured signal is a weighted sum over three populations:

* depth z, weighted by the confocal PSF (Gauss-Legendre nodes, or adaptive
  quadrature for the closed-form low-Q Rabi curve),
* nuclear sublevel m_I, weighted by ``nuclear_weights``,
* quasi-static bath draws, one per shot, averaged with equal weight.

Shots are drawn once from the configured seed before any work is split
across processes, so results never depend on the worker count.

All spins share a common rotating frame in which |m_s, m_I> sits at
A_par * m_s * m_I (the drives are resonant with the m_I = 0 lines), plus
the bath term b * m_s and the static drive mistuning.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad_vec

from src.analysis.normalization import double_quantum_reference, normalize_ramsey
from src.core.config import get_settings
from src.core.errors import InvalidParameterError, NumericalError
from src.core.logging import get_logger
from src.core.parallel import ordered_map
from src.core.units import UM
from src.core.utils import timer
from src.ensemble.psf import PSFModel, depth_nodes, psf_weight
from src.ensemble.trace import SignalTrace
from src.pulses.elements import Qubit
from src.pulses.noise import NoiseModel, bath_shift, draw_detuning
from src.pulses.propagator import ShotBatch, propagate
from src.pulses.sequences import (
    reference_sequences,
    sequence_hahn,
    sequence_rabi_highQ,
    sequence_rabi_lowQ,
    sequence_ramsey,
)
from src.resonator.ring import RingModel, StandingWave, max_area_window, omega_at_depth, pulse_area
from src.spin.hamiltonian import FieldConfig, SpinParameters, build_lab_hamiltonian
from src.spin.operators import M_VALUES, ZERO

logger = get_logger(__name__)

UNIFORM_WEIGHTS = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
_QUAD_EPSREL = 1e-8
_QUAD_EPSABS = 1e-12
_QUAD_LIMIT = 4000


@dataclass(frozen=True)
class EnsembleConfig:
    """Everything that defines the averaged population of spins.

    ``nuclear_weights`` are ordered m_I = +1, 0, -1. The drives address the
    m_I = 0 lines, so protocols built on a single resonant line (Rabi) use
    only the middle weight. ``depth`` is used when no PSF is given; without
    either the spins sit at the first antinode. ``drive_detuning`` is the
    static offset of the addressed transition above the drive (rad/s).
    """

    standing_wave: StandingWave
    psf: PSFModel | None = None
    noise: NoiseModel | None = None
    nuclear_weights: tuple[float, float, float] | None = None
    shots: int = 200
    seed: int = 0
    depth: float | None = None
    params: SpinParameters = field(default_factory=SpinParameters.defaults)
    drive_detuning: float = 0.0
    psf_nodes: int | None = None
    tol: float | None = None

    def __post_init__(self):
        if self.shots < 1:
            raise InvalidParameterError(f"Need at least one shot, got {self.shots}")
        if self.nuclear_weights is not None:
            w = tuple(float(x) for x in self.nuclear_weights)
            if len(w) != 3:
                raise InvalidParameterError(f"Expected three nuclear weights, got {len(w)}")
            if min(w) < 0 or sum(w) > 1.0 + 1e-12:
                raise InvalidParameterError(f"Nuclear weights must be non-negative and sum to at most 1, got {w}")
            object.__setattr__(self, "nuclear_weights", w)
        if self.depth is not None and self.depth < 0:
            raise InvalidParameterError(f"Depth must be non-negative, got {self.depth}")

    @property
    def weights(self) -> tuple[float, float, float]:
        return self.nuclear_weights if self.nuclear_weights is not None else UNIFORM_WEIGHTS

    @property
    def resonant_weight(self) -> float:
        return self.weights[ZERO]

    @property
    def point_depth(self) -> float:
        if self.psf is not None:
            return self.psf.z0
        return self.depth if self.depth is not None else 0.25 * self.standing_wave.wavelength

    @property
    def effective_shots(self) -> int:
        """Without bath noise every shot is identical, so one is enough."""
        return self.shots if self.noise is not None else 1

    def at_depth(self, z0: float) -> EnsembleConfig:
        if self.psf is not None:
            return replace(self, psf=replace(self.psf, z0=z0))
        return replace(self, depth=z0)

    def depth_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Depth nodes and weights (summing to 1) for propagated averages."""
        if self.psf is None:
            return np.array([self.point_depth]), np.ones(1)
        n = self.psf_nodes if self.psf_nodes is not None else get_settings().sim_psf_nodes
        return depth_nodes(self.psf, n)

    def reference_detunings(self) -> np.ndarray:
        """Per-shot bath detunings of the noise reference qubit (rad/s)."""
        if self.noise is None:
            return np.zeros(1)
        return np.atleast_1d(draw_detuning(self.noise, np.random.SeedSequence(self.seed), self.shots))

    def bath_shifts(self) -> np.ndarray:
        if self.noise is None:
            return np.zeros(1)
        return np.atleast_1d(bath_shift(self.noise, self.reference_detunings()))


# ── Shot layout ─────────────────────────────────────────


def _hyperfine_offsets(params: SpinParameters, m_i: int) -> np.ndarray:
    """Level offsets of sublevel m_I in the frame resonant with the m_I = 0 lines."""
    lab = build_lab_hamiltonian(params, FieldConfig())

    def gap(m_s: int, m: int) -> float:
        return lab.level_energy(m_s, m) - lab.level_energy(0, m)

    return np.array([gap(m_s, m_i) - gap(m_s, 0) for m_s in M_VALUES])


def _mistuning(qubit: Qubit, detuning: float) -> np.ndarray:
    if qubit is Qubit.SQ_MINUS:
        return np.array([0.0, 0.0, detuning])
    if qubit is Qubit.SQ_PLUS:
        return np.array([detuning, 0.0, 0.0])
    return np.array([0.5 * detuning, 0.0, -0.5 * detuning])


@dataclass
class _Layout:
    """Rows of a batch ordered (sublevel, depth node, shot)."""

    m_values: tuple[int, ...]
    sub_weights: np.ndarray
    depths: np.ndarray
    node_weights: np.ndarray
    bath: np.ndarray

    @property
    def shots(self) -> int:
        return self.bath.size

    @property
    def shape(self) -> tuple[int, int, int]:
        return len(self.m_values), self.depths.size, self.shots

    def batch(self, cfg: EnsembleConfig, qubit: Qubit) -> ShotBatch:
        n_sub, n_nodes, n_shots = self.shape
        frame = np.stack([_hyperfine_offsets(cfg.params, m) for m in self.m_values])
        offsets = (
            frame[:, None, None, :]
            + self.bath[None, None, :, None] * np.array([1.0, 0.0, -1.0])
            + _mistuning(qubit, cfg.drive_detuning)
        )
        offsets = np.broadcast_to(offsets, (n_sub, n_nodes, n_shots, 3)).reshape(-1, 3)
        coupling = omega_at_depth(cfg.standing_wave, self.depths)
        coupling = np.broadcast_to(np.atleast_1d(coupling)[None, :, None], self.shape).reshape(-1)
        return ShotBatch(offsets=offsets, mech_coupling=coupling)

    def reduce(self, rows: np.ndarray) -> np.ndarray:
        """Per-shot signal: sublevel- and depth-weighted sum of row values."""
        values = np.asarray(rows, dtype=float).reshape(self.shape)
        return np.einsum("i,k,iks->s", self.sub_weights, self.node_weights, values)


def _layout(cfg: EnsembleConfig, resonant_only: bool, use_depth: bool) -> _Layout:
    if resonant_only:
        m_values, sub = (0,), np.array([cfg.resonant_weight])
    else:
        m_values, sub = M_VALUES, np.array(cfg.weights)
    if use_depth:
        depths, node_w = cfg.depth_grid()
    else:
        depths, node_w = np.array([cfg.point_depth]), np.ones(1)
    return _Layout(m_values, sub, np.asarray(depths, dtype=float), np.asarray(node_w, dtype=float), cfg.bath_shifts())


def _zero_population(args) -> np.ndarray:
    seq, batch, tol = args
    return propagate(seq, batch, tol=tol).signal(ZERO)


def _run(seqs, batch: ShotBatch, tol: float | None, workers: int | None) -> list[np.ndarray]:
    return ordered_map(_zero_population, [(s, batch, tol) for s in seqs], workers=workers)


def _mean_stderr(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error over the last (shot) axis."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[-1]
    mean = samples.mean(axis=-1)
    if n < 2:
        return mean, np.zeros_like(mean)
    return mean, samples.std(axis=-1, ddof=1) / np.sqrt(n)


def _grid(values, name: str, non_negative: bool = True) -> np.ndarray:
    grid = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or not np.all(np.isfinite(grid)):
        raise InvalidParameterError(f"{name} must be a non-empty 1-D array of finite values")
    if non_negative and np.any(grid < 0):
        raise InvalidParameterError(f"{name} must be non-negative")
    return grid


def _meta(cfg: EnsembleConfig, **extra) -> dict:
    return {"shots": cfg.effective_shots, "seed": cfg.seed, **extra}


# ── Low-Q Rabi ──────────────────────────────────────────


def _generalized_rabi(omega, detuning: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Two-level transfer (Omega^2 / W^2) sin^2(W t / 2), W^2 = Omega^2 + detuning^2; shape (shots, times)."""
    rabi2 = omega**2 + detuning[:, None] ** 2
    amp = np.divide(omega**2, rabi2, out=np.zeros_like(rabi2), where=rabi2 > 0)
    return amp * np.sin(0.5 * np.sqrt(rabi2) * t[None, :]) ** 2


def _lowq_closed_form(cfg: EnsembleConfig, t: np.ndarray) -> np.ndarray:
    # bath b*Sz detunes the {-1,+1} pair by 2b
    detuning = 2.0 * cfg.bath_shifts() + cfg.drive_detuning
    wave = cfg.standing_wave
    if cfg.psf is None:
        return cfg.resonant_weight * _generalized_rabi(omega_at_depth(wave, cfg.point_depth), detuning, t)

    psf = cfg.psf
    lo, hi = psf.window()
    half = 0.5 * wave.wavelength
    nodes = [k * half for k in range(int(np.ceil(lo / half)), int(np.floor(hi / half)) + 1) if lo < k * half < hi]

    def integrand(z: float) -> np.ndarray:
        return psf_weight(psf, z) * _generalized_rabi(omega_at_depth(wave, z), detuning, t).ravel()

    res, err, info = quad_vec(
        integrand,
        lo,
        hi,
        epsabs=_QUAD_EPSABS,
        epsrel=_QUAD_EPSREL,
        norm="max",
        limit=_QUAD_LIMIT,
        points=nodes or None,
        full_output=True,
    )
    if not info.success:
        raise NumericalError("PSF quadrature did not converge", diagnostic=f"{info.message}; error estimate {err:.3e}")
    return cfg.resonant_weight * res.reshape(detuning.size, t.size) / psf.window_mass()


def rabi_average_lowQ(
    cfg: EnsembleConfig,
    t_grid,
    method: str = "closed-form",
    idealized: bool = True,
    workers: int | None = None,
) -> SignalTrace:
    """Depth- and noise-averaged |+1> population after a square mechanical drive of length t.

    ``method="closed-form"`` evaluates the generalized Rabi formula under
    adaptive depth quadrature; ``"propagate"`` runs the full gated sequence
    through the pulse engine on the PSF nodes.

    Raises
    ------
    NumericalError
        When the depth quadrature does not converge.
    """
    t = _grid(t_grid, "Drive-time grid")
    with timer() as tm:
        if method == "closed-form":
            samples = _lowq_closed_form(cfg, t).T
        elif method == "propagate":
            samples = _readout_samples(cfg, t, "minus", None, idealized, workers)
        else:
            raise InvalidParameterError(f"Unknown low-Q method {method!r}; expected 'closed-form' or 'propagate'")
    mean, stderr = _mean_stderr(samples)
    logger.info(
        "Low-Q Rabi average (%s): %d points, %d shots in %d ms", method, t.size, cfg.effective_shots, tm["elapsed_ms"]
    )
    return SignalTrace(t, mean, stderr, label="rabi-lowq", meta=_meta(cfg, method=method))


def _readout_samples(
    cfg: EnsembleConfig, t: np.ndarray, via: str, fidelity: float | None, idealized: bool, workers: int | None
) -> np.ndarray:
    layout = _layout(cfg, resonant_only=True, use_depth=True)
    batch = layout.batch(cfg, Qubit.MECHANICAL)
    length = float(t.max())
    seqs = [
        sequence_rabi_lowQ(tau, length, readout_via=via, passage_fidelity=fidelity, balance=False, idealized=idealized)
        for tau in t
    ]
    p0 = _run(seqs, batch, cfg.tol, workers)
    # via |-1>: P0 holds the untransferred population; via |+1>: the transferred one
    if via == "minus":
        return np.stack([layout.reduce(1.0 - p) for p in p0])
    return np.stack([layout.reduce(p) for p in p0])


def readout_control(
    cfg: EnsembleConfig,
    t_grid,
    fidelities: tuple[float, float] = (1.0, 1.0),
    idealized: bool = True,
    workers: int | None = None,
) -> dict[str, SignalTrace]:
    """Low-Q Rabi read out through |-1> and through |+1> with adiabatic passages.

    *fidelities* are the passage fidelities of the ``via-minus`` and
    ``via-plus`` paths. Both traces should show the same oscillation.
    """
    t = _grid(t_grid, "Drive-time grid")
    out: dict[str, SignalTrace] = {}
    for via, fidelity in zip(("minus", "plus"), fidelities):
        mean, stderr = _mean_stderr(_readout_samples(cfg, t, via, fidelity, idealized, workers))
        label = f"via-{via}"
        out[label] = SignalTrace(t, mean, stderr, label=label, meta=_meta(cfg, passage_fidelity=fidelity))
    return out


# ── High-Q Rabi ─────────────────────────────────────────


def _highq_samples(
    cfg: EnsembleConfig, ring: RingModel, tau0: np.ndarray, tau_mag: float, idealized: bool, workers: int | None
) -> np.ndarray:
    layout = _layout(cfg, resonant_only=True, use_depth=True)
    batch = layout.batch(cfg, Qubit.MECHANICAL)
    seqs = [sequence_rabi_highQ(float(t0), tau_mag, ring, idealized=idealized) for t0 in tau0]
    p0 = _run(seqs, batch, cfg.tol, workers)
    return np.stack([layout.reduce(1.0 - p) for p in p0])


def rabi_average_highQ(
    cfg: EnsembleConfig,
    ring: RingModel,
    tau0_grid,
    tau_mag: float,
    idealized: bool = True,
    workers: int | None = None,
) -> SignalTrace:
    """|+1> population after a pi-pulse pair of spacing *tau_mag* placed at each leading time tau0.

    The signal is C times the depth- and noise-averaged transfer, with C the
    weight of the resonant nuclear sublevel.
    """
    tau0 = _grid(tau0_grid, "Leading-pulse grid", non_negative=False)
    with timer() as tm:
        samples = _highq_samples(cfg, ring, tau0, tau_mag, idealized, workers)
    mean, stderr = _mean_stderr(samples)
    logger.info("High-Q Rabi average: %d points, %d shots in %d ms", tau0.size, cfg.effective_shots, tm["elapsed_ms"])
    return SignalTrace(tau0, mean, stderr, label="rabi-highq", meta=_meta(cfg, tau_mag=tau_mag))


def depth_sweep(
    cfg: EnsembleConfig,
    ring: RingModel,
    depths,
    tau0_grid,
    tau_mag: float,
    idealized: bool = True,
    workers: int | None = None,
) -> dict[float, SignalTrace]:
    """High-Q Rabi traces at several focal depths, plotted against enclosed pulse area.

    Only leading times up to the maximum-area window are kept, so the area
    abscissa increases monotonically. Traces are keyed by depth (m).
    """
    z0s = _grid(depths, "Depth list")
    tau0 = _grid(tau0_grid, "Leading-pulse grid", non_negative=False)
    t_opt, _ = max_area_window(ring, tau_mag)
    tau0 = tau0[tau0 <= t_opt]
    if tau0.size == 0:
        raise InvalidParameterError("No leading-pulse time lies before the maximum-area window")
    area = pulse_area(ring, tau0, tau0 + tau_mag)

    out: dict[float, SignalTrace] = {}
    for z0 in z0s:
        trace = rabi_average_highQ(cfg.at_depth(float(z0)), ring, tau0, tau_mag, idealized, workers)
        label = f"depth-{z0 / UM:g}um"
        out[float(z0)] = SignalTrace(
            area, trace.mean, trace.stderr, label=label, meta={**trace.meta, "depth": float(z0), "abscissa": "area"}
        )
    return out


def pulse_area_curve(ring: RingModel, tau0_grid, tau_mag: float) -> SignalTrace:
    """Drive area enclosed by a *tau_mag* window versus its leading time."""
    tau0 = _grid(tau0_grid, "Leading-pulse grid", non_negative=False)
    area = pulse_area(ring, tau0, tau0 + tau_mag)
    return SignalTrace(
        tau0, area, np.zeros_like(area), label="pulse-area", bounds=None, meta={"tau_mag": tau_mag, "unit": "s"}
    )


# ── Ramsey / Hahn ───────────────────────────────────────


def _mech_pi_half(cfg: EnsembleConfig, qubit: Qubit, mech_pi_half: float | None) -> float | None:
    if qubit is not Qubit.MECHANICAL or mech_pi_half is not None:
        return mech_pi_half
    if not cfg.standing_wave.omega_mech > 0:
        raise InvalidParameterError("Mechanical Ramsey needs a non-zero mechanical Rabi frequency")
    return np.pi / (2.0 * cfg.standing_wave.omega_mech)


def _normalized(
    cfg: EnsembleConfig,
    qubit: Qubit,
    pairs: list[tuple],
    refs: dict,
    workers: int | None,
) -> tuple[np.ndarray, np.ndarray, dict[str, float]]:
    layout = _layout(cfg, resonant_only=False, use_depth=qubit is Qubit.MECHANICAL)
    batch = layout.batch(cfg, qubit)
    names = list(refs)
    seqs = [refs[n] for n in names] + [s for pair in pairs for s in pair]
    p0 = _run(seqs, batch, cfg.tol, workers)

    y_ref = {n: float(layout.reduce(p).mean()) for n, p in zip(names, p0)}
    y_np = y_ref["no-pulse"]
    y_pi = y_ref["pi"] if "pi" in y_ref else double_quantum_reference(y_ref["pi-plus"], y_ref["pi-minus"])

    branches = np.stack([layout.reduce(p) for p in p0[len(names):]]).reshape(len(pairs), 2, layout.shots)
    half_diff = 0.5 * (branches[:, 0] - branches[:, 1])
    mean = normalize_ramsey(branches[:, 0].mean(axis=-1), branches[:, 1].mean(axis=-1), y_np, y_pi)
    _, stderr = _mean_stderr(half_diff)
    return np.atleast_1d(mean), stderr / abs(y_np - y_pi), {"y_np": y_np, "y_pi": y_pi}


def ramsey_average(
    cfg: EnsembleConfig,
    qubit: Qubit | str,
    tau_grid,
    omega_rot: float = 0.0,
    mech_pi_half: float | None = None,
    idealized: bool = True,
    workers: int | None = None,
) -> SignalTrace:
    """Normalized Ramsey coherence of one qubit versus free-evolution time.

    Both second-pulse signs are simulated for every tau and normalized
    against the no-pulse and pi references of the same qubit.
    """
    qubit = Qubit(qubit)
    tau = _grid(tau_grid, "Free-evolution grid")
    t_half = _mech_pi_half(cfg, qubit, mech_pi_half)
    pairs = [
        tuple(sequence_ramsey(qubit, float(x), sign, omega_rot, t_half, idealized) for sign in (1, -1)) for x in tau
    ]
    with timer() as tm:
        mean, stderr, refs = _normalized(cfg, qubit, pairs, reference_sequences(qubit, t_half, idealized), workers)
    logger.info("Ramsey average (%s): %d points in %d ms", qubit.value, tau.size, tm["elapsed_ms"])
    meta = _meta(cfg, qubit=qubit.value, omega_rot=omega_rot, **refs)
    return SignalTrace(tau, mean, stderr, label=f"ramsey-{qubit.value}", bounds=None, meta=meta)


def hahn_average(
    cfg: EnsembleConfig,
    qubit: Qubit | str,
    tau_grid,
    refocus: bool = True,
    mech_pi_half: float | None = None,
    idealized: bool = True,
    workers: int | None = None,
) -> SignalTrace:
    """Hahn-echo amplitude (y+ - y-) / (y_NP - y_pi) versus the half echo time tau.

    Only quasi-static noise is modelled, so an idealized echo stays at 1;
    ``refocus=False`` gives the matching 2 tau free decay.
    """
    qubit = Qubit(qubit)
    tau = _grid(tau_grid, "Echo half-time grid")
    t_half = _mech_pi_half(cfg, qubit, mech_pi_half)
    pairs = [tuple(sequence_hahn(qubit, float(x), sign, refocus, t_half, idealized) for sign in (1, -1)) for x in tau]
    mean, stderr, refs = _normalized(cfg, qubit, pairs, reference_sequences(qubit, t_half, idealized), workers)
    meta = _meta(cfg, qubit=qubit.value, refocus=refocus, **refs)
    return SignalTrace(tau, 2.0 * mean, 2.0 * stderr, label=f"hahn-{qubit.value}", bounds=None, meta=meta)
