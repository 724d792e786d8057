"""
Monte Carlo heterogeneity sweep.

For every (rho, trial) pair: sample a team, solve the equilibrium and the
welfare optimum, and record the inefficiency metrics next to their bounds.
Trials are independent, so they can run in worker processes; the output
is always sorted by (rho, trial).
"""

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import pandas as pd
from tqdm import tqdm

from src.analyzers.inefficiency import InefficiencyReport, analyze, profile_gap
from src.config.settings import SolverSettings
from src.experiments.team_sampler import SweepSpec, sample_team
from src.models.game_core import a3_holds

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ['rho', 'trial', 'poa', 'tri', 'li', 'poa_bound', 'tri_bound', 'li_bound',
                  'x_pne', 'x_sw', 'pne_iters', 'a3_ok', 'precond_ok', 'status']
SUMMARY_METRICS = ['poa', 'tri', 'li', 'poa_bound', 'tri_bound', 'li_bound', 'profile_gap']


@dataclass
class SweepRecord:
    """One (rho, trial) outcome. report is None on error rows."""

    rho: float
    trial: int
    config_digest: str
    report: Optional[InefficiencyReport]
    pne_iterations: int
    a3_ok: bool
    precond_ok: bool
    floor_ok: bool
    profile_gap: float
    status: str = 'ok'

    @property
    def ok(self) -> bool:
        return self.status == 'ok'

    def metric(self, name: str) -> float:
        return getattr(self.report, name) if self.report is not None else math.nan

    def to_row(self) -> Dict:
        row = {'rho': self.rho, 'trial': self.trial}
        for name in ('poa', 'tri', 'li', 'poa_bound', 'tri_bound', 'li_bound', 'x_pne', 'x_sw'):
            row[name] = self.metric(name)
        row.update({
            'pne_iters': self.pne_iterations,
            'a3_ok': self.a3_ok,
            'precond_ok': self.precond_ok,
            'status': self.status,
        })
        return row


def run_trial(spec: SweepSpec, rho: float, trial: int, settings: SolverSettings) -> SweepRecord:
    """Solve one sampled team; any failure becomes an error row."""
    digest = ''
    a3_ok = False
    try:
        config = sample_team(spec, rho, trial)
        digest = config.digest()
        a3_ok = a3_holds(config)
        equilibrium, optimum, report = analyze(config, **settings.brd_kwargs())
        return SweepRecord(
            rho=rho,
            trial=trial,
            config_digest=digest,
            report=report,
            pne_iterations=equilibrium.iterations,
            a3_ok=a3_ok,
            precond_ok=report.precondition,
            floor_ok=report.floor_ok,
            profile_gap=profile_gap(equilibrium.profile, optimum.profile),
        )
    except Exception as e:
        logger.error(f"Trial rho={rho} #{trial} failed: {type(e).__name__}: {e}")
        return SweepRecord(rho=rho, trial=trial, config_digest=digest, report=None, pne_iterations=0,
                           a3_ok=a3_ok, precond_ok=False, floor_ok=False, profile_gap=math.nan,
                           status=f"error:{type(e).__name__}")


def _run_task(task: Tuple[SweepSpec, float, int, SolverSettings]) -> SweepRecord:
    return run_trial(*task)


def run_sweep(spec: SweepSpec, settings: Optional[SolverSettings] = None,
              threads: Optional[int] = None, progress: bool = True) -> List[SweepRecord]:
    """
    Every (rho, trial) of the spec, sorted by rho then trial.

    threads defaults to settings.threads (CPR_THREADS); 1 runs in-process.
    """
    settings = settings or SolverSettings.from_env()
    workers = threads if threads is not None else settings.threads
    workers = max(1, min(workers, os.cpu_count() or 1))
    tasks = [(spec, rho, trial, settings) for rho in spec.rho_grid for trial in range(spec.trials_per_rho)]
    logger.info(f"Sweeping {len(spec.rho_grid)} rho values x {spec.trials_per_rho} trials on {workers} worker(s)")

    bar = tqdm(total=len(tasks), desc="Trials", disable=not progress)
    records = []
    if workers == 1:
        for task in tasks:
            records.append(_run_task(task))
            bar.update(1)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for record in pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (workers * 8))):
                records.append(record)
                bar.update(1)
    bar.close()

    records.sort(key=lambda r: (r.rho, r.trial))
    failures = sum(1 for r in records if not r.ok)
    if failures:
        logger.warning(f"{failures} of {len(records)} trials failed")
    return records


def records_frame(records: List[SweepRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in records], columns=RECORD_COLUMNS)


def summarize(records: List[SweepRecord]) -> pd.DataFrame:
    """Per-rho mean, standard deviation and maximum of each metric over successful trials."""
    rows = []
    for record in records:
        row = {'rho': record.rho, 'ok': record.ok, 'profile_gap': record.profile_gap}
        for name in SUMMARY_METRICS[:-1]:
            row[name] = record.metric(name)
        rows.append(row)
    frame = pd.DataFrame(rows, columns=['rho', 'ok'] + SUMMARY_METRICS)

    summary = []
    for rho, group in frame.groupby('rho', sort=True):
        good = group[group['ok']]
        entry = {'rho': rho, 'trials': len(group), 'errors': int((~group['ok']).sum())}
        for name in SUMMARY_METRICS:
            values = good[name]
            entry[f'{name}_mean'] = values.mean()
            entry[f'{name}_std'] = values.std()
            entry[f'{name}_max'] = values.max()
        summary.append(entry)

    columns = ['rho', 'trials', 'errors'] + [f'{m}_{s}' for m in SUMMARY_METRICS for s in ('mean', 'std', 'max')]
    return pd.DataFrame(summary, columns=columns)


def write_csvs(records: List[SweepRecord], out_dir: str) -> Tuple[str, str]:
    """Write records.csv and summary.csv into out_dir; returns both paths."""
    os.makedirs(out_dir, exist_ok=True)
    records_path = os.path.join(out_dir, 'records.csv')
    summary_path = os.path.join(out_dir, 'summary.csv')
    options = dict(index=False, float_format='%.17g', lineterminator='\n', encoding='utf-8', na_rep='NaN')
    records_frame(records).to_csv(records_path, **options)
    summarize(records).to_csv(summary_path, **options)
    logger.info(f"Saved {len(records)} records to {records_path}")
    return records_path, summary_path
