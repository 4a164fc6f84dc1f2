"""
Run manifest -- provenance record written next to every set of artifacts.

A manifest echoes the complete validated config (defaults included), so
``mechspin run <manifest.json>`` re-runs the experiment; the config hash
and per-file digests make it possible to check that the re-run produced
the same bytes.
"""
from __future__ import annotations

import datetime
import json
from importlib import metadata
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field

from src.core.errors import ConfigError
from src.core.logging import get_logger
from src.core.utils import sha256_file, sha256_of
from src.harness.experiment import ExperimentConfig, parse_config

logger = get_logger(__name__)

MANIFEST_SUFFIX = ".manifest.json"
_DIST_NAME = "nv-mechspin"
_FALLBACK_VERSION = "0.1.0+local"


def code_version() -> str:
    try:
        return metadata.version(_DIST_NAME)
    except metadata.PackageNotFoundError:
        return _FALLBACK_VERSION


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


class FileRecord(BaseModel):
    path: str = Field(..., description="File name relative to the manifest directory, or absolute for inputs")
    sha256: str
    bytes: int

    @classmethod
    def of(cls, path: Path, relative_to: Path | None = None) -> FileRecord:
        name = path.name if relative_to is not None and path.parent == relative_to else str(path)
        return cls(path=name, sha256=sha256_file(path), bytes=path.stat().st_size)


class RunManifest(BaseModel):
    experiment: str
    kind: str
    config_hash: str
    code_version: str
    seed: int
    workers: int
    started_at: str
    finished_at: str | None = None
    elapsed_ms: int | None = None
    inputs: list[FileRecord] = Field(default_factory=list)
    outputs: list[FileRecord] = Field(default_factory=list)
    config: dict[str, Any]

    @classmethod
    def start(cls, cfg: ExperimentConfig, workers: int) -> RunManifest:
        echo = cfg.echo()
        inputs = [FileRecord.of(Path(p)) for p in _input_paths(cfg)]
        return cls(
            experiment=cfg.name,
            kind=cfg.kind,
            config_hash=sha256_of(echo),
            code_version=code_version(),
            seed=cfg.seed,
            workers=workers,
            started_at=_now(),
            inputs=inputs,
            config=echo,
        )

    def finish(self, outputs: list[Path], output_dir: Path, elapsed_ms: int) -> RunManifest:
        records = [FileRecord.of(p, relative_to=output_dir) for p in outputs]
        return self.model_copy(update={"outputs": records, "finished_at": _now(), "elapsed_ms": elapsed_ms})

    def write(self, output_dir: Path, stem: str) -> Path:
        path = Path(output_dir) / f"{stem}{MANIFEST_SUFFIX}"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        logger.info("Manifest written: %s", path)
        return path

    def to_config(self) -> ExperimentConfig:
        """Rebuild the echoed config, refusing one that no longer matches its hash."""
        if sha256_of(self.config) != self.config_hash:
            raise ConfigError("Manifest config does not match its hash", ["config: edited after the run"])
        return parse_config(self.config, source=f"manifest of {self.experiment}")

    def verify_outputs(self, directory: Path) -> list[str]:
        """Digest mismatches of the recorded outputs found in *directory*."""
        problems: list[str] = []
        for rec in self.outputs:
            path = Path(directory) / rec.path
            if not path.exists():
                problems.append(f"{rec.path}: missing")
            elif sha256_file(path) != rec.sha256:
                problems.append(f"{rec.path}: digest differs")
        return problems


def is_manifest(path: Path) -> bool:
    return path.name.endswith(MANIFEST_SUFFIX)


def load_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON", [str(exc)]) from None
    try:
        return RunManifest.model_validate(raw)
    except ValueError as exc:
        raise ConfigError(f"{path} is not a run manifest", [str(exc)]) from None


def _input_paths(cfg: ExperimentConfig) -> list[str]:
    out = []
    if cfg.fit is not None:
        out.append(cfg.fit.input)
    if cfg.spectrum is not None:
        out.append(cfg.spectrum.input)
    return [p for p in out if Path(p).exists()]
