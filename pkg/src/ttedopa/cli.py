"""Command-line entry point: ``ttedopa <command> [options]``.

Exit codes: 0 success, 1 other failure (for example a missing earlier-stage
file), 2 configuration error, 3 numerical error, 4 failed validation.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, pipeline
from .analysis import FitError
from .chainmap import PrecisionError
from .config import ConfigError, load_config, parse_config_text
from .spectral import QuadratureError
from .tensornet.krylov import KrylovError
from .thermofield import ExtrapolationError
from .validation import SUITES, run_suites

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 1, 2, 3, 4
NUMERIC_ERRORS = (PrecisionError, KrylovError, QuadratureError, ExtrapolationError, FitError,
                  np.linalg.LinAlgError, FloatingPointError)

log = logging.getLogger("ttedopa")


def _parse_set(items) -> dict:
    """``key=value`` pairs with the value read as a TOML literal (bare words fall back to strings)."""
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            parsed = parse_config_text(f"v = {value}")["v"]
        except ConfigError:
            parsed = value
        out[key.strip()] = parsed
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--desk", action="store_true", help="reduced-size profile (N=60, t_final=40)")
    common.add_argument("--out", type=Path, help="run directory (default: output.directory)")
    common.add_argument("--snapshot", type=float, action="append", metavar="T",
                        help="snapshot time; repeat to give several (replaces the configured list)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")
    common.add_argument("--zero-coupling", action="store_true", help="debug: set g0 = 0 (free system)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ttedopa", description="Thermalized chain-mapped spin-boson simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("coeffs", parents=[common], help="compute chain coefficients")
    sub.add_parser("evolve", parents=[common], help="time-evolve and write spin/chain data and checkpoints")
    sub.add_parser("measure", parents=[common], help="correlations and extended spectra at the snapshots")
    sub.add_parser("backmap", parents=[common], help="physical-bath occupations from the extended spectra")
    sub.add_parser("analyze", parents=[common], help="peaks, fits and thermal-cycle report")
    sub.add_parser("run", parents=[common], help="all stages in order")
    val = sub.add_parser("validate", help="built-in self checks")
    val.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    val.add_argument("-v", "--verbose", action="store_true")
    return parser


def _config_from_args(args):
    overrides = _parse_set(args.set)
    if args.snapshot:
        overrides["snapshots"] = list(args.snapshot)
    if args.zero_coupling:
        overrides["debug.zero_coupling"] = True
    return load_config(args.config, desk=args.desk, overrides=overrides)


def _progress(every: int):
    start = time.time()

    def report(step, n_steps, state):
        if step % every == 0 or step == n_steps:
            log.info("t = %.2f  step %d/%d  max chi %d  (%.0f s)", state.time, step, n_steps,
                     max(state.bond_dims, default=1), time.time() - start)

    return report


def _run_single(command: str, config, out: Path) -> None:
    started = time.time()
    out.mkdir(parents=True, exist_ok=True)
    failed = out / "FAILED"
    if failed.exists():
        failed.unlink()
    run = pipeline._run_stage
    if command == "coeffs":
        run("coeffs", out, pipeline.stage_coeffs, config, out)
    elif command == "evolve":
        coeffs = run("coeffs", out, pipeline.stage_coeffs, config, out)
        run("evolve", out, pipeline.stage_evolve, config, out, coeffs, _progress(100))
    elif command == "measure":
        run("measure", out, pipeline.stage_measure, config, out)
    elif command == "backmap":
        run("backmap", out, pipeline.stage_backmap, config, out)
    elif command == "analyze":
        run("analyze", out, pipeline.stage_analyze, config, out)
    pipeline.write_manifest(config, out, started)


def _exit_code(exc: BaseException) -> int:
    inner = exc.error if isinstance(exc, pipeline.StageError) else exc
    if isinstance(inner, ConfigError):
        return EXIT_CONFIG
    if isinstance(inner, NUMERIC_ERRORS):
        return EXIT_NUMERIC
    return EXIT_FAILURE


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "validate":
            names = list(SUITES) if args.suite == "all" else [args.suite]
            checks = run_suites(names)
            for c in checks:
                print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
            return EXIT_OK if all(c.passed for c in checks) else EXIT_VALIDATION
        config = _config_from_args(args)
        out = args.out if args.out is not None else Path(config.output.directory)
        if args.command == "run":
            result = pipeline.run_pipeline(config, out, _progress(100))
            print(f"run complete: {result.out} (max chi {result.trajectory.max_bond_dim})")
        else:
            _run_single(args.command, config, out)
            print(f"{args.command} complete: {out}")
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        code = _exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
