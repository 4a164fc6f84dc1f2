"""
SignalTrace: a simulated or measured curve with Monte-Carlo error bars.

Abscissae are stored in SI (seconds for times and delays). CSV files
carry the three columns ``abscissa,mean,stderr`` with round-trip float
formatting, so identical traces always produce identical bytes.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from src.core.errors import ConfigError, InvalidParameterError

CSV_HEADER = ("abscissa", "mean", "stderr")
_BOUND_TOL = 1e-9


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class SignalTrace:
    abscissa: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    label: str = ""
    bounds: tuple[float, float] | None = (0.0, 1.0)
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.abscissa = np.asarray(self.abscissa, dtype=float)
        self.mean = np.asarray(self.mean, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float) if self.stderr is not None else np.zeros_like(self.mean)
        if not (self.abscissa.shape == self.mean.shape == self.stderr.shape) or self.mean.ndim != 1:
            raise InvalidParameterError(
                f"Trace columns must be 1-D and equally long, got {self.abscissa.shape}, "
                f"{self.mean.shape}, {self.stderr.shape}"
            )
        if np.any(self.stderr < 0):
            raise InvalidParameterError("Standard errors must be non-negative")
        if self.bounds is not None and self.mean.size:
            lo, hi = self.bounds
            if self.mean.min() < lo - _BOUND_TOL or self.mean.max() > hi + _BOUND_TOL:
                raise InvalidParameterError(
                    f"Trace '{self.label}' leaves [{lo}, {hi}]: range {self.mean.min():.6g}..{self.mean.max():.6g}"
                )

    def __len__(self) -> int:
        return self.mean.size

    @property
    def spacing(self) -> float:
        """Uniform sample spacing; raises if the abscissa is not uniform."""
        d = np.diff(self.abscissa)
        if d.size == 0 or not np.allclose(d, d[0], rtol=1e-6, atol=0.0) or d[0] <= 0:
            raise InvalidParameterError("Trace abscissa is not uniformly increasing")
        return float(d[0])

    def scaled(self, factor: float, offset: float = 0.0, bounds: tuple[float, float] | None = None) -> SignalTrace:
        return SignalTrace(
            self.abscissa, offset + factor * self.mean, abs(factor) * self.stderr, self.label, bounds, dict(self.meta)
        )

    # ── I/O ─────────────────────────────────────────────

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for x, m, s in zip(self.abscissa, self.mean, self.stderr):
                writer.writerow((_fmt(x), _fmt(m), _fmt(s)))
        return path

    @classmethod
    def from_csv(
        cls, path: str | Path, label: str | None = None, bounds: tuple[float, float] | None = None
    ) -> SignalTrace:
        path = Path(path)
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(h.strip() for h in rows[0]) != CSV_HEADER:
            raise InvalidParameterError(f"{path} is not a trace CSV (expected header {','.join(CSV_HEADER)})")
        values = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            try:
                if len(row) != 3:
                    raise ValueError(f"expected 3 columns, got {len(row)}")
                values.append([float(v) for v in row])
            except ValueError as exc:
                raise ConfigError(f"{path} has a malformed row", [f"line {lineno}: {exc}"]) from None
        data = np.array(values, dtype=float).reshape(-1, 3)
        return cls(data[:, 0], data[:, 1], data[:, 2], label=label or path.stem, bounds=bounds)

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "abscissa_unit": "s",
            "points": int(self.mean.size),
            "abscissa": self.abscissa.tolist(),
            "mean": self.mean.tolist(),
            "stderr": self.stderr.tolist(),
            "meta": self.meta,
        }

    def to_json(self, path: str | Path, config: dict[str, Any] | None = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = self.to_dict()
        if config is not None:
            payload["config"] = config
        path.write_text(json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return path


# ── Readout contrast ────────────────────────────────────


def contrast_map(p0, a: float, b: float):
    """Fluorescence counts a + b*P0 for a |0> population P0."""
    out = a + b * np.asarray(p0, dtype=float)
    return out if out.ndim else float(out)


def invert_contrast(counts, a: float, b: float):
    """Inverse of :func:`contrast_map`."""
    if b == 0:
        raise InvalidParameterError("Contrast b must be non-zero to invert the readout map")
    out = (np.asarray(counts, dtype=float) - a) / b
    return out if out.ndim else float(out)
