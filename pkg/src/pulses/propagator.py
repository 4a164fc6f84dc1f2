"""
Batched Schrodinger propagation of NV spins through a pulse sequence.

All spins of a batch share the sequence; each row carries its own static
level offsets (nuclear sublevel, bath draw, drive mistuning) and its own
mechanical Rabi frequency (depth in the standing wave). Rows are
propagated together as an (M, 3) array in the common rotating frame.

Time stepping
-------------
* No drive active: exact diagonal phases.
* Constant drives only (square mechanical pulses, finite magnetic pulses):
  exact exponentiation via batched ``eigh``.
* Ringing drive: fixed-step RK4 with h <= min(pi / (100 w_max), tau_r / 200),
  checked by Richardson comparison against h/2 and halved until the
  estimated error is below the tolerance.

Non-unitary elements (partial polarization, adiabatic passage) split a
row into weighted branches; populations at readout are weight sums per
shot, so the reported numbers are those of the corresponding mixed state.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from src.core.config import get_settings
from src.core.errors import IntegrationError, InvalidParameterError
from src.core.logging import get_logger
from src.pulses.elements import (
    AdiabaticPassage,
    MagneticPulse,
    MechanicalDrive,
    Polarize,
    PulseSequence,
    Readout,
    TimedElement,
)
from src.spin.hamiltonian import RotatingQubitHamiltonian
from src.spin.operators import DOUBLE_PAIR, MINUS_ONE, PLUS_ONE, ZERO

logger = get_logger(__name__)

MIN_STEP = 1e-15
_TIME_EPS = 1e-18


# ── Batch description ───────────────────────────────────


@dataclass
class ShotBatch:
    """Static frame data for N independent spins.

    offsets : (N, 3) diagonal level energies in rad/s (basis +1, 0, -1)
    mech_coupling : (N,) full mechanical Rabi frequency at each spin
    """

    offsets: np.ndarray
    mech_coupling: np.ndarray

    def __post_init__(self):
        self.offsets = np.atleast_2d(np.asarray(self.offsets, dtype=float))
        self.mech_coupling = np.broadcast_to(
            np.asarray(self.mech_coupling, dtype=float), (self.offsets.shape[0],)
        ).copy()
        if self.offsets.shape[1] != 3:
            raise InvalidParameterError(f"Level offsets must have shape (N, 3), got {self.offsets.shape}")

    @property
    def n(self) -> int:
        return self.offsets.shape[0]

    @classmethod
    def from_hamiltonians(
        cls, hams: Sequence[RotatingQubitHamiltonian], bath_shifts=None
    ) -> ShotBatch:
        """Stack rotating-frame Hamiltonians, adding b*Sz bath shifts per row."""
        offsets = np.stack([h.offsets for h in hams])
        mech = np.array([h.coupling if h.pair == DOUBLE_PAIR else 0.0 for h in hams])
        if bath_shifts is not None:
            offsets = offsets + np.outer(np.asarray(bath_shifts, dtype=float), [1.0, 0.0, -1.0])
        return cls(offsets=offsets, mech_coupling=mech)


@dataclass
class SpinState:
    """Weighted pure-state rows; ``owner`` maps each row to its shot."""

    amplitudes: np.ndarray
    weights: np.ndarray
    owner: np.ndarray
    n_shots: int

    @classmethod
    def ground(cls, n: int) -> SpinState:
        amps = np.zeros((n, 3), dtype=complex)
        amps[:, ZERO] = 1.0
        return cls(amps, np.ones(n), np.arange(n), n)

    @classmethod
    def from_vectors(cls, vectors) -> SpinState:
        amps = np.atleast_2d(np.asarray(vectors, dtype=complex))
        n = amps.shape[0]
        return cls(amps.copy(), np.ones(n), np.arange(n), n)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.amplitudes, axis=1)

    def populations(self) -> np.ndarray:
        """(n_shots, 3) level populations of each shot's mixture."""
        out = np.zeros((self.n_shots, 3))
        np.add.at(out, self.owner, self.weights[:, None] * np.abs(self.amplitudes) ** 2)
        return out


@dataclass
class PropagationResult:
    final: SpinState
    readouts: list[np.ndarray] = field(default_factory=list)
    samples: list[tuple[float, np.ndarray]] = field(default_factory=list)
    steps: int = 0

    def populations(self, index: int = -1) -> np.ndarray:
        if not self.readouts:
            return self.final.populations()
        return self.readouts[index]

    def signal(self, level: int = ZERO, index: int = -1) -> np.ndarray:
        return self.populations(index)[:, level]


# ── Instantaneous operations ────────────────────────────


def _rotate_pair(amps: np.ndarray, pair: tuple[int, int], angle: float, phase: float) -> np.ndarray:
    a, b = pair
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    out = amps.copy()
    out[:, a] = c * amps[:, a] - 1j * s * np.exp(-1j * phase) * amps[:, b]
    out[:, b] = -1j * s * np.exp(1j * phase) * amps[:, a] + c * amps[:, b]
    return out


def _polarize(state: SpinState, efficiency: float) -> SpinState:
    n = state.n_shots
    owners = np.arange(n)
    if efficiency >= 1.0:
        return SpinState.ground(n)
    rows, weights, owner = [], [], []
    for level, w in ((ZERO, efficiency), (PLUS_ONE, 0.5 * (1 - efficiency)), (MINUS_ONE, 0.5 * (1 - efficiency))):
        if w == 0:
            continue
        amps = np.zeros((n, 3), dtype=complex)
        amps[:, level] = 1.0
        rows.append(amps)
        weights.append(np.full(n, w))
        owner.append(owners)
    return SpinState(np.concatenate(rows), np.concatenate(weights), np.concatenate(owner), n)


def _passage(state: SpinState, pair: tuple[int, int], fidelity: float) -> SpinState:
    a, b = pair
    c = ({0, 1, 2} - {a, b}).pop()
    amps = state.amplitudes
    p_pair = np.abs(amps[:, a]) ** 2 + np.abs(amps[:, b]) ** 2
    p_third = np.abs(amps[:, c]) ** 2

    swapped = np.zeros_like(amps)
    swapped[:, a], swapped[:, b] = amps[:, b], amps[:, a]
    kept = np.zeros_like(amps)
    kept[:, a], kept[:, b] = amps[:, a], amps[:, b]
    third = np.zeros_like(amps)
    third[:, c] = amps[:, c]

    branches = [
        (swapped, fidelity * p_pair, p_pair),
        (kept, (1 - fidelity) * p_pair, p_pair),
        (third, p_third, p_third),
    ]
    rows, weights, owner = [], [], []
    for vecs, w, norm2 in branches:
        keep = w * state.weights > 0
        if not np.any(keep):
            continue
        rows.append(vecs[keep] / np.sqrt(norm2[keep])[:, None])
        weights.append((w * state.weights)[keep])
        owner.append(state.owner[keep])
    return SpinState(np.concatenate(rows), np.concatenate(weights), np.concatenate(owner), state.n_shots)


# ── Continuous evolution ────────────────────────────────


@dataclass
class _Drive:
    start: float
    stop: float
    item: TimedElement

    @property
    def element(self):
        return self.item.element

    def active(self, ta: float, tb: float) -> bool:
        return self.start < tb - _TIME_EPS and self.stop > ta + _TIME_EPS

    def envelope(self, t: float) -> float:
        return self.element.envelope(t - self.item.start)


def _coupling(n: int, pair: tuple[int, int], rabi: np.ndarray, phase: float) -> np.ndarray:
    a, b = pair
    g = np.zeros((n, 3, 3), dtype=complex)
    g[:, a, b] = 0.5 * rabi * np.exp(-1j * phase)
    g[:, b, a] = np.conj(g[:, a, b])
    return g


def _apply(h: np.ndarray, psi: np.ndarray) -> np.ndarray:
    return np.einsum("mij,mj->mi", h, psi)


def _expm_apply(h: np.ndarray, psi: np.ndarray, dt: float) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    coeff = np.einsum("mji,mj->mi", v.conj(), psi) * np.exp(-1j * w * dt)
    return np.einsum("mij,mj->mi", v, coeff)


def _rk4(h_static: np.ndarray, terms: list[tuple[_Drive, np.ndarray]], psi: np.ndarray, ta: float, dt: float, n: int):
    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        h = h_static
        for drive, g in terms:
            h = h + drive.envelope(t) * g
        return -1j * _apply(h, y)

    y = psi
    for k in range(n):
        t = ta + k * dt
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(t + dt, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


class _Integrator:
    """Segment-wise evolution for one batch and one sequence."""

    def __init__(self, batch: ShotBatch, tol: float, method: str, min_step: float):
        self.batch = batch
        self.tol = tol
        self.method = method
        self.min_step = min_step
        self.steps = 0

    def evolve(self, state: SpinState, drives: list[_Drive], ta: float, tb: float) -> SpinState:
        dt = tb - ta
        if dt <= 0:
            return state
        owner = state.owner
        m = len(owner)
        offsets = self.batch.offsets[owner]
        psi = state.amplitudes

        active = [d for d in drives if d.active(ta, tb)]
        mech = [d for d in active if isinstance(d.element, MechanicalDrive)]
        magnetic = [d for d in active if isinstance(d.element, MagneticPulse)]

        # the mechanical drive only couples |+1> and |-1>
        if mech and not magnetic and not np.any(psi[:, [PLUS_ONE, MINUS_ONE]]):
            mech = []

        if not mech and not magnetic:
            return self._replace(state, psi * np.exp(-1j * offsets * dt))

        h_static = np.zeros((m, 3, 3), dtype=complex)
        h_static[:, np.arange(3), np.arange(3)] = offsets
        for d in magnetic:
            el = d.element
            h_static += _coupling(m, el.pair, np.full(m, el.rabi), el.phase)

        mech_rabi = self.batch.mech_coupling[owner]
        square = [d for d in mech if d.element.is_square]
        ringing = [d for d in mech if not d.element.is_square]

        if self.method == "rk4":
            terms = [(d, _coupling(m, DOUBLE_PAIR, mech_rabi, d.element.phase)) for d in mech]
            return self._replace(state, self._richardson(h_static, terms, psi, ta, tb))

        for d in square:
            h_static += _coupling(m, DOUBLE_PAIR, mech_rabi, d.element.phase)
        if not ringing:
            return self._replace(state, _expm_apply(h_static, psi, dt))
        terms = [(d, _coupling(m, DOUBLE_PAIR, mech_rabi, d.element.phase)) for d in ringing]
        return self._replace(state, self._richardson(h_static, terms, psi, ta, tb))

    @staticmethod
    def _replace(state: SpinState, amps: np.ndarray) -> SpinState:
        return SpinState(amps, state.weights, state.owner, state.n_shots)

    def _max_step(self, h_static: np.ndarray, terms) -> float:
        omega = np.max(np.sum(np.abs(h_static), axis=2))
        for _, g in terms:
            omega += np.max(np.sum(np.abs(g), axis=2))
        limits = [np.pi / (100.0 * omega)] if omega > 0 else []
        for d, _ in terms:
            ring = d.element.ring
            if ring is not None:
                limits.append(ring.tau_r / 200.0)
        return min(limits) if limits else np.inf

    def _richardson(self, h_static, terms, psi, ta: float, tb: float) -> np.ndarray:
        span = tb - ta
        h_max = self._max_step(h_static, terms)
        n = max(1, int(np.ceil(span / h_max)))
        coarse = _rk4(h_static, terms, psi, ta, span / n, n)
        self.steps += n
        while True:
            fine = _rk4(h_static, terms, psi, ta, span / (2 * n), 2 * n)
            self.steps += 2 * n
            err = float(np.max(np.abs(fine - coarse))) / 15.0
            if err <= self.tol:
                return fine
            n *= 2
            if span / (2 * n) < self.min_step:
                raise IntegrationError(
                    "Step size fell below the minimum",
                    t=ta,
                    diagnostic=f"error estimate {err:.3e} > tol {self.tol:.1e}",
                )
            logger.debug("Halving step on [%.4e, %.4e] s (error %.2e)", ta, tb, err)
            coarse = fine


# ── Driver ──────────────────────────────────────────────


def _instant(el) -> bool:
    if isinstance(el, MagneticPulse):
        return el.idealized
    return isinstance(el, (Polarize, AdiabaticPassage, Readout))


def propagate(
    seq: PulseSequence,
    batch: ShotBatch,
    tol: float | None = None,
    method: str = "auto",
    initial: SpinState | None = None,
    record: bool = False,
    min_step: float = MIN_STEP,
) -> PropagationResult:
    """Propagate every spin of *batch* through *seq*.

    Parameters
    ----------
    seq : PulseSequence
        Timeline; evolution runs from the first element to the last
        instantaneous event or finite-pulse end.
    batch : ShotBatch
        Per-spin static offsets and mechanical couplings.
    tol : float, optional
        Richardson error tolerance on amplitudes (default from settings).
    method : {"auto", "rk4"}
        ``"rk4"`` integrates constant drives with the stepper as well.
    initial : SpinState, optional
        Starting rows (default: every spin in |0>).
    record : bool
        Keep populations after every segment in ``result.samples``.

    Raises
    ------
    IntegrationError
        When the step needed to meet *tol* falls below *min_step*.
    """
    if tol is None:
        tol = get_settings().sim_integrator_tol
    if not tol > 0:
        raise InvalidParameterError(f"Integrator tolerance must be positive, got {tol}")
    if method not in ("auto", "rk4"):
        raise InvalidParameterError(f"Unknown propagation method {method!r}")

    state = initial if initial is not None else SpinState.ground(batch.n)
    if state.n_shots != batch.n:
        raise InvalidParameterError("Initial state and batch disagree on the number of shots")
    result = PropagationResult(final=state)
    if not seq.items:
        return result

    instants = [it for it in seq.items if _instant(it.element)]
    drives: list[_Drive] = []
    marks = {it.start for it in instants}
    for it in seq.items:
        el = it.element
        if isinstance(el, MechanicalDrive):
            lo, hi = el.active_window
            drives.append(_Drive(it.start + lo, it.start + hi, it))
            marks.update(it.start + b for b in el.breakpoints())
        elif isinstance(el, MagneticPulse) and not el.idealized:
            drives.append(_Drive(it.start, it.end, it))
            marks.update((it.start, it.end))

    finite_ends = [d.stop for d in drives if isinstance(d.element, MagneticPulse)]
    t_begin = seq.start
    t_end = max([it.start for it in instants] + finite_ends + [t_begin])
    times = sorted(t for t in marks if t_begin <= t <= t_end)
    if not times or times[0] > t_begin:
        times.insert(0, t_begin)

    integrator = _Integrator(batch, tol, method, min_step)
    pending = list(instants)
    t = times[0]
    for t_next in times[1:] + [None]:
        while pending and pending[0].start <= t + _TIME_EPS:
            el = pending.pop(0).element
            if isinstance(el, Polarize):
                state = _polarize(state, el.efficiency)
            elif isinstance(el, MagneticPulse):
                state = SpinState(
                    _rotate_pair(state.amplitudes, el.pair, el.angle, el.phase),
                    state.weights,
                    state.owner,
                    state.n_shots,
                )
            elif isinstance(el, AdiabaticPassage):
                state = _passage(state, el.pair, el.fidelity)
            elif isinstance(el, Readout):
                result.readouts.append(state.populations())
        if t_next is None:
            break
        state = integrator.evolve(state, drives, t, t_next)
        t = t_next
        if record:
            result.samples.append((t, state.populations()))

    result.final = state
    result.steps = integrator.steps
    return result
