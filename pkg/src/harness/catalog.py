"""
Bundled experiment catalog.

Every ``experiments/*.yml`` file at the project root is one entry. The
catalog is parsed once per process and sorted by name, so listing it is
stable across runs.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from tabulate import tabulate

from src.core.errors import ConfigError
from src.harness.experiment import ExperimentConfig, load_config

_CATALOG_DIR = Path(__file__).resolve().parents[2] / "experiments"


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str
    description: str
    path: Path
    figure: str | None = None

    def load(self) -> ExperimentConfig:
        return load_config(self.path)


@lru_cache(maxsize=4)
def list_experiments(directory: Path = _CATALOG_DIR) -> tuple[CatalogEntry, ...]:
    """Parse and validate every bundled config.

    Raises
    ------
    ConfigError
        If a bundled file fails validation; the catalog is all or nothing.
    """
    entries = []
    for path in sorted(directory.glob("*.yml")):
        cfg = load_config(path)
        entries.append(CatalogEntry(cfg.name, cfg.kind, cfg.description, path, cfg.figure))
    names = [e.name for e in entries]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ConfigError("Duplicate experiment names in catalog", [f"name: {n}" for n in dupes])
    return tuple(sorted(entries, key=lambda e: e.name))


def find_experiment(name: str, directory: Path = _CATALOG_DIR) -> CatalogEntry | None:
    for entry in list_experiments(directory):
        if entry.name == name:
            return entry
    return None


def catalog_table(entries: tuple[CatalogEntry, ...] | None = None) -> str:
    rows = [(e.name, e.kind, e.figure or "", e.description) for e in (entries or list_experiments())]
    return tabulate(rows, headers=["name", "kind", "figure", "description"], tablefmt="github")
