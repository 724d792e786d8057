#!/usr/bin/env python3
"""
Heterogeneous-team CPR game toolkit - command line.

    python cpr.py validate configs/default_team.json
    python cpr.py pne configs/default_team.json --starts 20 --out pne.json
    python cpr.py welfare configs/default_team.json
    python cpr.py bounds configs/default_team.json
    python cpr.py sweep configs/default_sweep.json --out results/
    python cpr.py oracle configs/pair.json --grid 10000

Exit codes: 0 success, 1 solver or domain failure, 2 usage or config error.
JSON results go to --out or stdout; status lines go to stderr.
"""

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from typing import Any, Dict, List, Optional

from src.analyzers.inefficiency import bounds, welfare_floor
from src.config.run_config import RunConfig, load_run_config
from src.config.settings import SCHEDULES, SolverSettings
from src.experiments.sweep import run_sweep, summarize, write_csvs
from src.models.errors import CPRError, ConfigError, ConvergenceError, OracleRefusalError
from src.models.game_core import GameConfig, validate_assumptions
from src.solvers.equilibrium import grid_deviation_gains, multi_start, run_brd
from src.solvers.welfare import brute_force_welfare, optimize_welfare

logger = logging.getLogger('cpr')

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
ORACLE_MAX_PLAYERS = 3


def setup_logging(verbose: bool = False, log_file: Optional[str] = None) -> None:
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def status(message: str) -> None:
    print(message, file=sys.stderr)


def emit(document: Dict[str, Any], out: Optional[str]) -> None:
    if out:
        with open(out, 'w', encoding='utf-8') as f:
            json.dump(document, f, indent=2, sort_keys=True)
            f.write('\n')
        status(f"💾 Saved results to {out}")
    else:
        json.dump(document, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write('\n')


def game_header(config: GameConfig) -> Dict[str, Any]:
    return {'config_digest': config.digest(), 'game': config.to_dict(), 'h_order': list(config.order)}


def cmd_validate(args, run: RunConfig) -> int:
    config = run.require_game()
    report = validate_assumptions(config, run.solver.validation_grid)
    emit({**game_header(config), 'validation': report.to_dict()}, args.out)
    if report.passed:
        status("✅ Assumptions A1-A3 hold")
        return EXIT_OK
    for finding in report.violations:
        status(f"❌ {finding.assumption}: {finding.detail}")
    return EXIT_FAILURE


def cmd_pne(args, run: RunConfig) -> int:
    config = run.require_game()
    settings = run.solver.merged({'schedule': args.schedule})
    kwargs = settings.brd_kwargs()
    schedule = kwargs.pop('schedule')
    outcome = multi_start(config, args.starts, seed=args.seed, schedule=schedule, **kwargs)
    best = outcome.best
    document = {
        **game_header(config),
        'equilibrium': best.to_dict(config),
        'starts': args.starts,
        'seed': args.seed,
        'iterations_per_start': [r.iterations for r in outcome.results],
        'max_pairwise_gap': outcome.max_pairwise_gap,
    }
    emit(document, args.out)
    if best.verification.passed:
        status(f"✅ PNE found in {best.iterations} sweeps, x* = {best.x:.10g}")
    else:
        status(f"⚠️ PNE verification flagged: {'; '.join(best.verification.findings)}")
    return EXIT_OK


def cmd_welfare(args, run: RunConfig) -> int:
    config = run.require_game()
    solution = optimize_welfare(config)
    emit({**game_header(config), 'welfare': solution.to_dict(config)}, args.out)
    status(f"✅ Welfare optimum Psi* = {solution.psi_star:.10g} at c* = {solution.c_star:.10g}")
    return EXIT_OK


def cmd_bounds(args, run: RunConfig) -> int:
    config = run.require_game()
    document = {**game_header(config), 'bounds': bounds(config), 'welfare_floor': welfare_floor(config)}
    emit(document, args.out)
    flag = "holds" if document['bounds']['precondition'] else "fails (bounds not guaranteed)"
    status(f"✅ x-bar = {document['bounds']['xbar']:.10g}; precondition {flag}")
    return EXIT_OK


def cmd_sweep(args, run: RunConfig) -> int:
    spec = run.require_sweep()
    if args.trials is not None:
        spec = replace(spec, trials_per_rho=args.trials)
    start = time.time()
    records = run_sweep(spec, settings=run.solver, threads=args.threads, progress=not args.no_progress)
    records_path, summary_path = write_csvs(records, args.out)
    summary = summarize(records)
    for _, row in summary.iterrows():
        status(f"   rho={row['rho']:.3f}  mean PoA {row['poa_mean']:.6f}  max PoA {row['poa_max']:.6f}  "
               f"errors {int(row['errors'])}")
    status(f"✅ {len(records)} trials in {time.time() - start:.1f}s -> {records_path}, {summary_path}")
    return EXIT_OK


def welfare_oracle_grid(n: int, grid: int) -> int:
    return min(grid, {1: 1000, 2: 400}.get(n, 100))


def cmd_oracle(args, run: RunConfig) -> int:
    config = run.require_game()
    if config.n > ORACLE_MAX_PLAYERS:
        raise OracleRefusalError(f"the oracle handles at most {ORACLE_MAX_PLAYERS} players, got {config.n}")
    equilibrium = run_brd(config, **run.solver.brd_kwargs())
    gains = grid_deviation_gains(config, equilibrium.profile, args.grid)
    solution = optimize_welfare(config)
    profile, value = brute_force_welfare(config, welfare_oracle_grid(config.n, args.grid))
    document = {
        **game_header(config),
        'pne': {
            'profile_h_order': list(equilibrium.profile.lambda_r),
            'grid_deviation_gains': gains,
            'max_grid_deviation_gain': max(gains),
            'grid_points': args.grid,
        },
        'welfare': {
            'solver_psi': solution.psi_star,
            'oracle_psi': value,
            'relative_gap': (value - solution.psi_star) / abs(solution.psi_star),
            'solver_profile_h_order': list(solution.profile.lambda_r),
            'oracle_profile_h_order': list(profile.lambda_r),
        },
    }
    emit(document, args.out)
    status(f"✅ max grid deviation gain {max(gains):.3e}; welfare gap "
           f"{document['welfare']['relative_gap']:.3e}")
    return EXIT_OK


COMMANDS = {
    'validate': cmd_validate,
    'pne': cmd_pne,
    'welfare': cmd_welfare,
    'bounds': cmd_bounds,
    'sweep': cmd_sweep,
    'oracle': cmd_oracle,
}


def bounded_int(minimum: int):
    """argparse type for integers >= minimum."""
    def parse(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid int value: '{text}'")
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be at least {minimum}, got {value}")
        return value
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Equilibrium, welfare and inefficiency of heterogeneous CPR teams')
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    parser.add_argument('--log-file', default=None, help='Also write the log to this file')
    sub = parser.add_subparsers(dest='command', required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument('config', help='Run config (JSON)')
        return p

    command('validate', 'Check assumptions A1-A3').add_argument('--out', default=None, help='JSON output path')

    p = command('pne', 'Solve the pure Nash equilibrium')
    p.add_argument('--schedule', choices=SCHEDULES, default=None)
    p.add_argument('--starts', type=bounded_int(1), default=1, help='Number of BRD starts (first is canonical)')
    p.add_argument('--seed', type=int, default=0, help='Seed for the random starts')
    p.add_argument('--out', default=None, help='JSON output path')

    command('welfare', 'Solve the social welfare optimum').add_argument('--out', default=None)
    command('bounds', 'Analytic inefficiency bounds').add_argument('--out', default=None)

    p = command('sweep', 'Monte Carlo heterogeneity sweep')
    p.add_argument('--out', required=True, help='Output directory for records.csv and summary.csv')
    p.add_argument('--threads', type=bounded_int(1), default=None, help='Worker processes (default CPR_THREADS)')
    p.add_argument('--trials', type=bounded_int(1), default=None, help='Override trials per rho')
    p.add_argument('--no-progress', action='store_true', help='Hide the progress bar')

    p = command('oracle', 'Brute-force cross-check for N <= 3')
    p.add_argument('--grid', type=bounded_int(2), default=10000, help='Deviation grid points per player')
    p.add_argument('--out', default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.log_file)

    try:
        run = load_run_config(args.config, base=SolverSettings.from_env())
        logger.debug(f"Running '{args.command}' on {args.config} with {run.solver}")
        return COMMANDS[args.command](args, run)
    except ConfigError as e:
        status(f"❌ Config error: {e}")
        return EXIT_USAGE
    except OSError as e:
        status(f"❌ I/O error: {e}")
        return EXIT_USAGE
    except ConvergenceError as e:
        status(f"❌ ConvergenceError: {e}")
        status(f"   last sup-norm changes: {e.history[-5:]}")
        status(f"   last profile: {e.last_profile}")
        return EXIT_FAILURE
    except CPRError as e:
        status(f"❌ {type(e).__name__}: {e}")
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())
