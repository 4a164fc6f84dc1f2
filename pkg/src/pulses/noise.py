"""
Quasi-static bath noise.

Each shot draws one detuning that stays constant for the whole sequence.
The detuning refers to a *reference qubit*: the spread sigma = sqrt(2)/T2*
gives that qubit a free-induction decay exp(-t^2/T2*^2). The bath enters
the spin Hamiltonian as b Sz, so b = delta for a single-quantum reference
and b = delta/2 for the double-quantum reference.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.core.errors import InvalidParameterError

REFERENCES = ("double-quantum", "single-quantum")
DISTRIBUTIONS = ("gaussian-detuning", "exponential-envelope")


@dataclass(frozen=True)
class NoiseModel:
    t2_star: float
    reference: str = "double-quantum"
    distribution: str = "gaussian-detuning"

    def __post_init__(self):
        if not self.t2_star > 0:
            raise InvalidParameterError(f"T2* must be positive, got {self.t2_star}")
        if self.reference not in REFERENCES:
            raise InvalidParameterError(f"Unknown noise reference {self.reference!r}; expected one of {REFERENCES}")
        if self.distribution not in DISTRIBUTIONS:
            raise InvalidParameterError(
                f"Unknown noise distribution {self.distribution!r}; expected one of {DISTRIBUTIONS}"
            )

    @property
    def sigma(self) -> float:
        """Gaussian standard deviation of the reference-qubit detuning (rad/s)."""
        return np.sqrt(2.0) / self.t2_star

    @property
    def shift_per_detuning(self) -> float:
        """Bath coefficient b per unit reference detuning."""
        return 0.5 if self.reference == "double-quantum" else 1.0


def spawn_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent generators derived from one seed."""
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [np.random.default_rng(c) for c in children]


def draw_detuning(noise: NoiseModel, rng_seed, size: int | None = None):
    """Reference-qubit detuning(s) in rad/s.

    *rng_seed* may be an int, a ``SeedSequence`` or a ``Generator``; the same
    seed always yields the same sequence.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    if noise.distribution == "gaussian-detuning":
        return rng.normal(0.0, noise.sigma, size)
    # Lorentzian spread; its ensemble average is exp(-|t|/T2*)
    return rng.standard_cauchy(size) / noise.t2_star


def bath_shift(noise: NoiseModel, detuning):
    """Coefficient b of the b*Sz bath term for a reference-qubit detuning."""
    return noise.shift_per_detuning * np.asarray(detuning, dtype=float)
