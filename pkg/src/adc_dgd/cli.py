"""
Command-line interface for adc-dgd
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .core.config_loader import parse_config, resolved_items
from .core.csv_export import emit_aggregate_csv, emit_csv
from .core.engine import Trace, run_trials
from .core.presets import get_preset, list_presets
from .core.verifiers import CHECKS, CheckReport, check
from .utils.error_handling import CompressionOverflowError, ConfigError, ErrorReporter, SimulationError

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_DIVERGED = 3

console = Console(highlight=False)
err_console = Console(stderr=True, highlight=False)

logger = logging.getLogger("adc_dgd")


def setup_logging(verbose: bool):
    """Route library logging through rich on stderr"""
    handler = RichHandler(console=err_console, show_path=False, markup=False)
    root = logging.getLogger("adc_dgd")
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)
    root.propagate = False


def _error(message: str):
    err_console.print(f"Error: {message}", markup=False)


def _aggregate_path(out: Path) -> Path:
    return out.with_name(f"{out.stem}_aggregate{out.suffix or '.csv'}")


def _unfinished(trace: Trace) -> List[str]:
    return [f"trial {t.trial}: {t.termination}" for t in trace.trials if not t.termination.completed]


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point"""
    parser = argparse.ArgumentParser(
        prog="adc-dgd",
        description="Decentralized gradient descent with compressed communication: simulator and checks",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s run --config ring5.cfg --out ring5.csv
  %(prog)s run --config ring5.cfg --out ring5.csv --aggregate --strict
  %(prog)s preset --name compression4node --out-dir results/
  %(prog)s check --property unbiasedness
  %(prog)s check --property h_decay --beta 0.75 --gamma 1.0
  %(prog)s check --property lyapunov_rate --trials 20
  %(prog)s validate --config ring5.cfg
  %(prog)s list-presets

Exit codes:
  0 success, 1 check failure, 2 configuration error, 3 divergence (with --strict)
        """
    )

    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    run_parser = subparsers.add_parser('run', help='Run a configured simulation and write CSV')
    run_parser.add_argument('--config', required=True, help='Run-config file')
    run_parser.add_argument('--out', required=True, help='Output CSV (one row per trial and round)')
    run_parser.add_argument('--aggregate', action='store_true',
                            help='Also write the across-trial means to <out>_aggregate.csv')
    run_parser.add_argument('--strict', action='store_true', help='Exit 3 if any trial terminates early')
    run_parser.add_argument('--workers', type=int, default=None, help='Worker processes for trials')
    run_parser.add_argument('--verbose', '-v', action='store_true', help='Verbose output')

    preset_parser = subparsers.add_parser('preset', help='Run a published experiment preset')
    preset_parser.add_argument('--name', required=True, help='Preset name (see list-presets)')
    preset_parser.add_argument('--out-dir', required=True, help='Directory for CSV output')
    preset_parser.add_argument('--trials', type=int, default=None, help='Override the number of trials')
    preset_parser.add_argument('--iters', type=int, default=None, help='Override the number of rounds')
    preset_parser.add_argument('--seed', type=int, default=None, help='Override the master seed')
    preset_parser.add_argument('--strict', action='store_true', help='Exit 3 if any trial terminates early')
    preset_parser.add_argument('--workers', type=int, default=None, help='Worker processes for trials')
    preset_parser.add_argument('--verbose', '-v', action='store_true', help='Verbose output')

    check_parser = subparsers.add_parser('check', help='Run a numerical property check')
    check_parser.add_argument('--property', required=True, choices=sorted(CHECKS), help='Property to check')
    check_parser.add_argument('--beta', type=float, action='append', help='beta values for h_decay (lemma4)')
    check_parser.add_argument('--gamma', type=float, action='append', help='gamma values for h_decay, growth and lyapunov_rate')
    check_parser.add_argument('--horizon', type=int, default=None, help='Horizon for h_decay')
    check_parser.add_argument('--draws', type=int, default=None, help='Draws per vector for unbiasedness')
    check_parser.add_argument('--samples', type=int, default=None, help='Sampled pairs for lyapunov_lipschitz')
    check_parser.add_argument('--trials', type=int, default=None, help='Trials for growth and lyapunov_rate')
    check_parser.add_argument('--iters', type=int, default=None, help='Rounds for growth and lyapunov_rate')
    check_parser.add_argument('--seed', type=int, default=None, help='Seed for sampled checks')
    check_parser.add_argument('--verbose', '-v', action='store_true', help='Verbose output')

    validate_parser = subparsers.add_parser('validate', help='Validate a run-config and echo resolved values')
    validate_parser.add_argument('--config', required=True, help='Run-config file')
    validate_parser.add_argument('--verbose', '-v', action='store_true', help='Verbose output')

    list_parser = subparsers.add_parser('list-presets', help='List available presets')
    list_parser.add_argument('--verbose', '-v', action='store_true', help='Show preset notes')

    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_CHECK_FAILED

    setup_logging(getattr(args, 'verbose', False))

    try:
        if args.command == 'run':
            return run_command(args)
        elif args.command == 'preset':
            return preset_command(args)
        elif args.command == 'check':
            return check_command(args)
        elif args.command == 'validate':
            return validate_command(args)
        elif args.command == 'list-presets':
            return list_presets_command(args)
        else:
            _error(f"Unknown command: {args.command}")
            return EXIT_CHECK_FAILED

    except ConfigError as e:
        _error(str(e))
        return EXIT_CONFIG_ERROR
    except CompressionOverflowError as e:
        _error(str(e))
        return EXIT_DIVERGED
    except SimulationError as e:
        _error(str(e))
        return EXIT_CHECK_FAILED
    except OSError as e:
        _error(str(e))
        return EXIT_CHECK_FAILED
    except KeyboardInterrupt:
        err_console.print("\nOperation cancelled by user")
        return EXIT_CHECK_FAILED


def _write_trace(trace: Trace, out: Path, aggregate: bool) -> List[Path]:
    written = [emit_csv(trace, out)]
    if aggregate:
        written.append(emit_aggregate_csv(trace, _aggregate_path(out)))
    return written


def run_command(args) -> int:
    """Handle run command"""
    config = parse_config(args.config)
    trace = run_trials(config, workers=args.workers)
    for path in _write_trace(trace, Path(args.out), args.aggregate):
        console.print(f"[OK] wrote {path}", markup=False)
    unfinished = _unfinished(trace)
    if unfinished:
        reporter = ErrorReporter()
        for line in unfinished:
            reporter.add_warning(line)
        err_console.print(reporter.format_warnings(), markup=False)
        if args.strict:
            return EXIT_DIVERGED
    return EXIT_OK


def preset_command(args) -> int:
    """Handle preset command"""
    built = get_preset(args.name)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    console.print(f"{built.name}: {built.note}", markup=False)
    diverged = False
    for config in built.configs:
        overrides = {}
        if args.trials is not None:
            overrides['trials'] = args.trials
        if args.iters is not None:
            overrides['iters'] = args.iters
        if args.seed is not None:
            overrides['master_seed'] = args.seed
        config = replace(config, **overrides)
        trace = run_trials(config, workers=args.workers)
        out = out_dir / f"{built.name}_{config.name}.csv"
        _write_trace(trace, out, aggregate=True)
        unfinished = _unfinished(trace)
        status = "[OK]" if not unfinished else f"[WARN] {len(unfinished)} trial(s) ended early"
        console.print(f"{status} {config.name} -> {out}", markup=False)
        diverged |= bool(unfinished)
    if diverged and args.strict:
        return EXIT_DIVERGED
    return EXIT_OK


def _print_report(report: CheckReport):
    table = Table(title=f"check {report.name}")
    table.add_column("case")
    table.add_column("result")
    table.add_column("detail")
    for label, ok, detail in report.lines:
        table.add_row(label, "[OK]" if ok else "[FAIL]", detail)
    console.print(table)
    console.print("[OK] all cases passed" if report.passed else "[FAIL] some cases failed", markup=False)


def check_command(args) -> int:
    """Handle check command"""
    options = {}
    if args.property in ('h_decay', 'lemma4'):
        if args.beta:
            options['betas'] = args.beta
        if args.gamma:
            options['gammas'] = args.gamma
        if args.horizon is not None:
            options['horizon'] = args.horizon
    elif args.property == 'unbiasedness':
        if args.draws is not None:
            options['draws'] = args.draws
        if args.seed is not None:
            options['seed'] = args.seed
    elif args.property == 'lyapunov_lipschitz':
        if args.samples is not None:
            options['samples'] = args.samples
        if args.seed is not None:
            options['seed'] = args.seed
    elif args.property in ('growth', 'lyapunov_rate'):
        if args.gamma:
            options['gammas'] = args.gamma
        if args.trials is not None:
            options['trials'] = args.trials
        if args.iters is not None:
            options['iters'] = args.iters
    try:
        report = check(args.property, **options)
    except ValueError as e:
        _error(f"rejected input: {e}")
        return EXIT_CONFIG_ERROR
    _print_report(report)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def validate_command(args) -> int:
    """Handle validate command"""
    config = parse_config(args.config)
    table = Table(title=f"resolved config: {args.config}")
    table.add_column("key")
    table.add_column("value")
    for key, value in resolved_items(config):
        table.add_row(key, value)
    console.print(table)
    console.print("[OK] config is valid", markup=False)
    return EXIT_OK


def list_presets_command(args) -> int:
    """Handle list-presets command"""
    console.print("Available presets:")
    for name in list_presets():
        built = get_preset(name)
        console.print(f"  {name}: {len(built.configs)} run(s)", markup=False)
        if args.verbose:
            console.print(f"    {built.note}", markup=False)
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
