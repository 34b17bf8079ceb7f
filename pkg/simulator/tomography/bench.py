"""
Ensemble runner behind the management commands.

Every trial derives its random streams from (master_seed, trial index)
alone, so a trial can be replayed in isolation and parallel execution
never changes the output. Results are reduced in index order.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import repeat

import numpy as np
import scipy

from . import __version__
from .baseline import acquire_tomogram, build_mubs, is_prime, mle_reconstruct, project_pure, split_budget
from .exceptions import ConfigurationError, TomographyError, TrialFailure, UnsupportedDimensionError
from .mixed import run_sgqt_mixed
from .oracle import MeasurementOracle
from .qstate import infidelity, random_density_matrix, random_haar_ket
from .spsa import run_sgqt
from .turbulence import TurbulentChannel

logger = logging.getLogger(__name__)

CROSSING_FIDELITY = 0.99
TRACE_COLUMNS = ['k', 'q25', 'median', 'q75', 'copies']
TRIAL_COLUMNS = ['index', 'final_fidelity', 'final_infidelity', 'copies_used', 'crossing_iteration']
COMPARE_COLUMNS = ['index', 'sgqt_infidelity', 'baseline_infidelity', 'copies_used']


def trial_streams(master_seed, index, count=4):
    """Independent generators for (state, oracle, algorithm, baseline) of one trial."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return [np.random.default_rng(child) for child in seq.spawn(count)]


def crossing_iteration(fidelities, threshold=CROSSING_FIDELITY):
    """First k whose fidelity exceeds `threshold`, or None."""
    above = np.flatnonzero(np.asarray(fidelities) > threshold)
    return int(above[0]) if above.size else None


@dataclass(frozen=True)
class TrialResult:
    index: int
    fidelities: tuple
    copies: tuple
    wall_time_s: float

    @property
    def final_fidelity(self):
        return self.fidelities[-1]

    @property
    def copies_used(self):
        return self.copies[-1]

    @property
    def crossing_iteration(self):
        return crossing_iteration(self.fidelities)


@dataclass(frozen=True)
class CompareResult:
    index: int
    sgqt_infidelity: float
    baseline_infidelity: float
    copies_used: int
    wall_time_s: float


@dataclass(frozen=True, eq=False)
class QuantileTrace:
    k: np.ndarray
    q25: np.ndarray
    median: np.ndarray
    q75: np.ndarray
    copies: np.ndarray

    @classmethod
    def from_trials(cls, results):
        fidelities = np.array([r.fidelities for r in results], dtype=float)
        copies = np.array(results[0].copies, dtype=np.int64)
        if any(tuple(r.copies) != tuple(results[0].copies) for r in results):
            raise TomographyError("trials consumed different copy budgets")
        q25, median, q75 = np.percentile(1.0 - fidelities, [25, 50, 75], axis=0)
        return cls(np.arange(fidelities.shape[1]), q25, median, q75, copies)

    def rows(self):
        for row in zip(self.k, self.q25, self.median, self.q75, self.copies):
            yield [int(row[0]), float(row[1]), float(row[2]), float(row[3]), int(row[4])]

    def at(self, k):
        return float(self.median[k])


@dataclass(frozen=True)
class EnsembleResult:
    trace: QuantileTrace
    trials: list


def default_loss(dim, span):
    """Linear transmission 1 at mode 0 down to 1 - span at mode d-1."""
    return tuple(1.0 - span * j / (dim - 1) for j in range(dim))


def _channel(cfg):
    if cfg.turbulence is None:
        return None
    return TurbulentChannel(cfg.turbulence, cfg.dimension)


def _oracle(cfg, truth, rng, noise=None):
    return MeasurementOracle(truth, noise or cfg.noise, rng, channel=_channel(cfg), reference=cfg.reference)


def _baseline_infidelity(cfg, truth, rng, total_copies, noise=None):
    mubs = build_mubs(cfg.dimension)
    oracle = _oracle(cfg, truth, rng, noise)
    allocation = split_budget(total_copies, len(mubs))
    data = acquire_tomogram(oracle, mubs, oracle.copies_per_setting, allocation)
    if data.total_copies != total_copies:
        raise TomographyError(f"baseline used {data.total_copies} copies, budget {total_copies}")
    estimate = project_pure(mle_reconstruct(data).state)
    return infidelity(estimate, oracle.evaluation.reference_state)


def run_trial(cfg, index):
    """One trial of `cfg.mode`; depends on (cfg, index) only."""
    started = time.perf_counter()
    state_rng, oracle_rng, algorithm_rng, _ = trial_streams(cfg.master_seed, index)
    dim = cfg.dimension
    if cfg.mode == 'sgqt-mixed':
        truth = random_density_matrix(dim, cfg.mixed_rank, state_rng, cfg.mixed_measure)
        oracle = _oracle(cfg, truth, oracle_rng)
        _, trace = run_sgqt_mixed(
            oracle, dim, cfg.iterations, cfg.schedule,
            cfg.settings_per_objective or dim * (dim + 1), algorithm_rng,
        )
        fidelities, copies = trace.fidelities(), trace.copies()
    elif cfg.mode == 'baseline-mub':
        truth = random_haar_ket(dim, state_rng)
        budget = 2 * cfg.iterations * cfg.noise.copies
        fidelities, copies = [1.0 - _baseline_infidelity(cfg, truth, oracle_rng, budget)], [budget]
    elif cfg.mode == 'sgqt-pure':
        truth = random_haar_ket(dim, state_rng)
        oracle = _oracle(cfg, truth, oracle_rng)
        _, trace = run_sgqt(oracle, dim, cfg.iterations, cfg.schedule, algorithm_rng, cfg.initial)
        if oracle.channel is not None:
            logger.debug("trial %d drew %d phase screens", index, oracle.channel.screens_drawn)
        fidelities, copies = trace.fidelities(), trace.copies()
    else:
        raise ConfigurationError(f"mode: {cfg.mode!r} does not run single-method trials")
    return TrialResult(
        index,
        tuple(float(f) for f in fidelities),
        tuple(int(c) for c in copies),
        time.perf_counter() - started,
    )


def compare_noise(cfg):
    """The config's noise, with the default loss gradient when loss is uniform."""
    loss = cfg.noise.loss
    if loss is None or len(set(loss)) == 1:
        return cfg.noise.with_loss(default_loss(cfg.dimension, cfg.loss_span))
    return cfg.noise


def run_compare_trial(cfg, index):
    """SGQT and the MUB baseline on the same hidden state, noise and copy budget."""
    started = time.perf_counter()
    state_rng, oracle_rng, algorithm_rng, baseline_rng = trial_streams(cfg.master_seed, index)
    noise = compare_noise(cfg)
    truth = random_haar_ket(cfg.dimension, state_rng)
    oracle = _oracle(cfg, truth, oracle_rng, noise)
    _, trace = run_sgqt(oracle, cfg.dimension, cfg.iterations, cfg.schedule, algorithm_rng, cfg.initial)
    budget = int(trace.copies()[-1])
    baseline = _baseline_infidelity(cfg, truth, baseline_rng, budget, noise)
    return CompareResult(
        index,
        1.0 - trace.final_fidelity,
        baseline,
        budget,
        time.perf_counter() - started,
    )


@dataclass(frozen=True)
class _Failure:
    index: int
    cause: BaseException


def _guarded(func, cfg, index):
    try:
        return func(cfg, index)
    except Exception as exc:
        return _Failure(index, exc)


def execute(func, cfg, indices, workers=1):
    """Map `func(cfg, index)` over `indices`, in index order; a failure raises TrialFailure."""
    indices = list(indices)
    if workers <= 1 or len(indices) <= 1:
        results = [_guarded(func, cfg, i) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(indices))) as pool:
            results = list(pool.map(_guarded, repeat(func), repeat(cfg), indices, chunksize=4))
    for result in results:
        if isinstance(result, _Failure):
            raise TrialFailure(result.index, cfg.master_seed, result.cause)
    return results


def run_ensemble(cfg, workers=1):
    logger.info("ensemble: %d trials of %s, d=%d, %d workers", cfg.trials, cfg.mode, cfg.dimension, workers)
    trials = execute(run_trial, cfg, range(cfg.trials), workers)
    return EnsembleResult(QuantileTrace.from_trials(trials), trials)


def compare_budgets(cfg, workers=1):
    if not is_prime(cfg.dimension):
        raise UnsupportedDimensionError(f"no MUB baseline for dimension {cfg.dimension}")
    logger.info("compare: %d trials, d=%d, loss %s", cfg.trials, cfg.dimension, compare_noise(cfg).loss)
    return execute(run_compare_trial, cfg, range(cfg.trials), workers)


def checkpoint_medians(trace, checkpoints=None):
    """Median infidelity after 10, 100, ... iterations."""
    if checkpoints is None:
        checkpoints = [10 ** e for e in range(1, 8) if 10 ** e <= len(trace.k)]
    return {n: trace.at(n - 1) for n in checkpoints}


def _median_or_none(values):
    values = [v for v in values if v is not None]
    return float(np.median(values)) if values else None


def versions():
    return {'tomography': __version__, 'numpy': np.__version__, 'scipy': scipy.__version__}


def ensemble_summary(cfg, ensemble):
    final = np.array([1.0 - t.final_fidelity for t in ensemble.trials])
    q25, median, q75 = np.percentile(final, [25, 50, 75])
    return {
        'config': cfg.as_dict(),
        'final_infidelity': {'q25': float(q25), 'median': float(median), 'q75': float(q75)},
        'median_final_fidelity': float(np.median(1.0 - final)),
        'median_crossing_iteration': _median_or_none([t.crossing_iteration for t in ensemble.trials]),
        'copies_per_trial': int(ensemble.trace.copies[-1]),
        'seeds': {'master_seed': cfg.master_seed, 'trial_indices': [t.index for t in ensemble.trials]},
        'versions': versions(),
    }


def compare_summary(cfg, results, target_ratio=None):
    sgqt = float(np.median([r.sgqt_infidelity for r in results]))
    baseline = float(np.median([r.baseline_infidelity for r in results]))
    return {
        'config': cfg.as_dict(),
        'loss': list(compare_noise(cfg).loss),
        'median_sgqt_infidelity': sgqt,
        'median_baseline_infidelity': baseline,
        'ratio': baseline / sgqt if sgqt > 0 else None,
        'target_ratio': target_ratio,
        'copies_per_trial': results[0].copies_used,
        'seeds': {'master_seed': cfg.master_seed, 'trial_indices': [r.index for r in results]},
        'versions': versions(),
    }


def _write_rows(path, header, rows):
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)


def trial_row(trial):
    crossing = trial.crossing_iteration
    return [
        trial.index,
        float(trial.final_fidelity),
        float(1.0 - trial.final_fidelity),
        int(trial.copies_used),
        '' if crossing is None else crossing,
    ]


def write_json(path, payload):
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write('\n')


def write_ensemble(out_dir, cfg, ensemble):
    """trace.csv, trials.csv and summary.json are deterministic; timings.csv holds wall times."""
    os.makedirs(out_dir, exist_ok=True)
    _write_rows(os.path.join(out_dir, 'trace.csv'), TRACE_COLUMNS, ensemble.trace.rows())
    _write_rows(os.path.join(out_dir, 'trials.csv'), TRIAL_COLUMNS, map(trial_row, ensemble.trials))
    _write_rows(
        os.path.join(out_dir, 'timings.csv'),
        ['index', 'wall_time_s'],
        ([t.index, f"{t.wall_time_s:.6f}"] for t in ensemble.trials),
    )
    summary = ensemble_summary(cfg, ensemble)
    write_json(os.path.join(out_dir, 'summary.json'), summary)
    return summary


def write_replay(out_dir, cfg, trial):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"trial-{trial.index}.csv")
    _write_rows(path, TRIAL_COLUMNS, [trial_row(trial)])
    return path


def write_comparison(out_dir, cfg, results, target_ratio=None):
    os.makedirs(out_dir, exist_ok=True)
    _write_rows(
        os.path.join(out_dir, 'comparison.csv'),
        COMPARE_COLUMNS,
        ([r.index, float(r.sgqt_infidelity), float(r.baseline_infidelity), r.copies_used] for r in results),
    )
    summary = compare_summary(cfg, results, target_ratio)
    write_json(os.path.join(out_dir, 'summary.json'), summary)
    return summary


def run_sweep(key, points, workers=1):
    """`points` is a list of (value, RunConfig); one ensemble per point."""
    rows = []
    for value, cfg in points:
        ensemble = run_ensemble(cfg, workers)
        summary = ensemble_summary(cfg, ensemble)
        final = summary['final_infidelity']
        rows.append({
            'key': key,
            'value': value,
            'q25': final['q25'],
            'median': final['median'],
            'q75': final['q75'],
            'median_crossing_iteration': summary['median_crossing_iteration'],
            'copies_per_trial': summary['copies_per_trial'],
        })
    return rows


def write_sweep(out_dir, key, rows, master_seed):
    os.makedirs(out_dir, exist_ok=True)
    columns = ['key', 'value', 'q25', 'median', 'q75', 'median_crossing_iteration', 'copies_per_trial']
    _write_rows(
        os.path.join(out_dir, 'sweep.csv'),
        columns,
        ([('' if row[c] is None else row[c]) for c in columns] for row in rows),
    )
    write_json(
        os.path.join(out_dir, 'summary.json'),
        {'key': key, 'points': rows, 'seeds': {'master_seed': master_seed}, 'versions': versions()},
    )
