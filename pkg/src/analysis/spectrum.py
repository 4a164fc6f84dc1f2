"""
Fourier power spectra of Ramsey traces.

Pipeline: subtract the mean, apply the window, zero-pad, one-sided FFT.
Power is normalised so that the sum over bins equals the energy of the
windowed, detrended samples (Parseval).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks, get_window

from src.core.errors import InvalidParameterError
from src.ensemble.trace import SignalTrace

DEFAULT_WINDOW = "hann"
DEFAULT_ZERO_PAD = 8
PEAK_MEDIAN_FACTOR = 5.0
# Hann sidelobes sit near 1e-3 of the main lobe; stay above them
PEAK_RELATIVE_FLOOR = 1e-2


@dataclass(frozen=True)
class Peak:
    frequency: float
    power: float


@dataclass(frozen=True)
class PowerSpectrum:
    """One-sided power spectrum; frequencies in Hz (cyclic)."""

    frequency: np.ndarray
    power: np.ndarray
    signal_energy: float
    resolution: float

    def __post_init__(self):
        if np.any(self.power < 0):
            raise InvalidParameterError("Power must be non-negative")

    @property
    def bin_width(self) -> float:
        return float(self.frequency[1] - self.frequency[0]) if self.frequency.size > 1 else 0.0

    def energy(self) -> float:
        return float(self.power.sum())

    def band_power(self, lo: float, hi: float) -> float:
        """Summed power of the bins with lo <= f <= hi."""
        if hi < lo:
            raise InvalidParameterError(f"Band is reversed: [{lo}, {hi}]")
        mask = (self.frequency >= lo) & (self.frequency <= hi)
        return float(self.power[mask].sum())

    def peaks(
        self, median_factor: float = PEAK_MEDIAN_FACTOR, relative_floor: float = PEAK_RELATIVE_FLOOR
    ) -> list[Peak]:
        """Local maxima above ``median_factor`` x median power, strongest first."""
        if self.power.size < 3 or not np.any(self.power > 0):
            return []
        height = max(median_factor * float(np.median(self.power)), relative_floor * float(self.power.max()))
        idx, props = find_peaks(self.power, height=height)
        order = np.argsort(props["peak_heights"])[::-1]
        return [Peak(float(self.frequency[idx[k]]), float(self.power[idx[k]])) for k in order]

    def dominant_frequency(self) -> float:
        found = self.peaks()
        if found:
            return found[0].frequency
        return float(self.frequency[int(np.argmax(self.power))])

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("frequency_hz", "power"))
            for f, p in zip(self.frequency, self.power):
                writer.writerow((repr(float(f)), repr(float(p))))
        return path


def power_spectrum(
    data: SignalTrace,
    window: str = DEFAULT_WINDOW,
    zero_pad_factor: int = DEFAULT_ZERO_PAD,
) -> PowerSpectrum:
    """Power spectrum of a uniformly sampled trace.

    Parameters
    ----------
    data : SignalTrace
        Trace with a uniform abscissa in seconds.
    window : str
        Any window name understood by :func:`scipy.signal.get_window`
        (``"boxcar"`` disables windowing).
    zero_pad_factor : int
        FFT length as a multiple of the number of samples.
    """
    if zero_pad_factor < 1:
        raise InvalidParameterError(f"Zero-pad factor must be >= 1, got {zero_pad_factor}")
    n = len(data)
    if n < 4:
        raise InvalidParameterError(f"Need at least 4 samples for a spectrum, got {n}")
    dt = data.spacing

    x = data.mean - data.mean.mean()
    w = get_window(window, n, fftbins=False)
    xw = x * w
    n_fft = zero_pad_factor * n
    spec = np.fft.rfft(xw, n=n_fft)
    power = np.abs(spec) ** 2 / n_fft
    # one-sided: interior bins carry both signs of frequency
    if n_fft % 2 == 0:
        power[1:-1] *= 2.0
    else:
        power[1:] *= 2.0
    freqs = np.fft.rfftfreq(n_fft, d=dt)
    return PowerSpectrum(frequency=freqs, power=power, signal_energy=float(np.sum(xw**2)), resolution=1.0 / (n * dt))
