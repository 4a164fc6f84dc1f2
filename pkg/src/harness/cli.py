"""
Command-line front end.

    mechspin run <config.yml | catalog-name | run.manifest.json>
    mechspin list
    mechspin validate <config.yml>
    mechspin fit <trace.csv> --model {sq,dq,mech,eq3,eq4}
    mechspin spectrum <trace.csv>

Exit codes: 0 success, 1 re-run digests differ from the manifest,
2 configuration / parameter / file errors, 3 numerical failures.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from src.core.config import get_settings
from src.core.errors import ConfigError, InvalidParameterError, NumericalError
from src.core.logging import get_logger, set_level
from src.harness.catalog import catalog_table, find_experiment, list_experiments
from src.harness.experiment import ExperimentConfig, load_config, parse_config
from src.harness.manifest import is_manifest, load_manifest
from src.harness.runner import run_experiment

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _resolve(target: str) -> tuple[ExperimentConfig, list | None]:
    """Config from a YAML path, a manifest path or a catalog name; also the recorded outputs of a manifest."""
    path = Path(target)
    if path.exists():
        if is_manifest(path):
            manifest = load_manifest(path)
            return manifest.to_config(), manifest.outputs
        return load_config(path), None
    entry = find_experiment(target)
    if entry is None:
        raise ConfigError(f"No config file or catalog entry named {target!r}", [f"<root>: {target} not found"])
    return entry.load(), None


def _report_config_error(exc: ConfigError) -> int:
    print(f"error: {exc.message}", file=sys.stderr)
    for line in exc.diagnostics:
        print(f"  {line}", file=sys.stderr)
    return EXIT_CONFIG


def _execute(cfg: ExperimentConfig, args: argparse.Namespace, recorded=None) -> int:
    result = run_experiment(cfg, output_dir=args.output_dir, workers=args.workers)
    for p in result.outputs:
        print(p)
    print(result.manifest_path)
    if recorded is not None:
        fresh = {r.path: r.sha256 for r in result.manifest.outputs}
        differing = [r.path for r in recorded if fresh.get(r.path) != r.sha256]
        if differing:
            for name in differing:
                logger.warning("Re-run output differs from the manifest: %s", name)
            return EXIT_MISMATCH
        logger.info("Re-run reproduced all %d recorded output(s)", len(recorded))
    return EXIT_OK


# ── Verbs ───────────────────────────────────────────────


def _cmd_run(args: argparse.Namespace) -> int:
    cfg, recorded = _resolve(args.config)
    return _execute(cfg, args, recorded)


def _cmd_list(args: argparse.Namespace) -> int:
    print(catalog_table(list_experiments()))
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    cfg, _ = _resolve(args.config)
    print(f"OK: {cfg.name} ({cfg.kind})")
    return EXIT_OK


def _cmd_fit(args: argparse.Namespace) -> int:
    path = Path(args.trace).resolve()
    cfg = parse_config(
        {
            "kind": "fit",
            "name": args.name or path.stem,
            "fit": {
                "input": str(path),
                "model": args.model,
                "a_par_mhz": args.a_par_mhz,
                "omega_rot_mhz": args.omega_rot_mhz,
            },
        },
        source="fit arguments",
    )
    return _execute(cfg, args)


def _cmd_spectrum(args: argparse.Namespace) -> int:
    path = Path(args.trace).resolve()
    cfg = parse_config(
        {
            "kind": "spectrum",
            "name": args.name or path.stem,
            "spectrum": {"input": str(path), "window": args.window, "zero_pad_factor": args.zero_pad},
        },
        source="spectrum arguments",
    )
    return _execute(cfg, args)


# ── Parser ──────────────────────────────────────────────


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--output-dir",
        default=None,
        help=f"Artifact directory (default: $SIM_OUTPUT_DIR or '{get_settings().sim_output_dir}')",
    )
    p.add_argument("--workers", type=int, default=None, help="Worker processes (default: $SIM_WORKERS, 0 = all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mechspin", description="Mechanically driven NV-ensemble simulator")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ... (default: $LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="Run an experiment config, catalog entry or manifest")
    p.add_argument("config")
    _add_run_options(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("list", help="List the bundled experiment catalog")
    p.set_defaults(func=_cmd_list)

    p = sub.add_parser("validate", help="Validate a config without running it")
    p.add_argument("config")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("fit", help="Fit a Ramsey model to a trace CSV")
    p.add_argument("trace")
    p.add_argument("--model", default="sq", help="sq, dq, mech (eq3, eq4) or a Ramsey kind name")
    p.add_argument("--a-par-mhz", type=float, default=2.166)
    p.add_argument("--omega-rot-mhz", type=float, default=0.0)
    p.add_argument("--name", default=None, help="Artifact stem (default: the trace file stem)")
    _add_run_options(p)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("spectrum", help="Power spectrum and peaks of a trace CSV")
    p.add_argument("trace")
    p.add_argument("--window", default="hann")
    p.add_argument("--zero-pad", type=int, default=8)
    p.add_argument("--name", default=None, help="Artifact stem (default: the trace file stem)")
    _add_run_options(p)
    p.set_defaults(func=_cmd_spectrum)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        set_level(args.log_level)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _report_config_error(exc)
    except (InvalidParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
