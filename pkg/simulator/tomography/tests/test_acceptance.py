"""
Long statistical reproductions of the headline numbers.

Run with ``python manage.py test tomography --tag acceptance``; exclude
with ``--exclude-tag acceptance``.
"""

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, tag

from tomography import bench
from tomography.config import load_run_config
from tomography.mixed import run_sgqt_mixed
from tomography.oracle import MeasurementOracle, NoiseProfile
from tomography.qstate import DensityMatrix, random_haar_ket
from tomography.spsa import GainSchedule
from tomography.turbulence import aperture_extrema, generate_screen


def ensemble(**overrides):
    cfg = load_run_config(overrides={'master_seed': 2024, **overrides})
    return cfg, bench.run_ensemble(cfg, settings.TOMOGRAPHY_WORKERS)


def median_final_fidelity(result):
    return float(np.median([t.final_fidelity for t in result.trials]))


def median_crossing(result):
    crossings = [t.crossing_iteration for t in result.trials if t.crossing_iteration is not None]
    return float(np.median(crossings)) + 1


@tag('acceptance')
class LowNoiseConvergenceTests(SimpleTestCase):
    def test_qutrit(self):
        _, result = ensemble(dimension=3, trials=200, iterations=100)
        self.assertGreaterEqual(median_final_fidelity(result), 0.998)
        self.assertTrue(29 / 2 <= median_crossing(result) <= 29 * 2)

    def test_ququint(self):
        _, result = ensemble(dimension=5, trials=200, iterations=200)
        self.assertGreaterEqual(median_final_fidelity(result), 0.998)
        self.assertTrue(62 / 2 <= median_crossing(result) <= 62 * 2)

    def test_quvigint(self):
        _, result = ensemble(dimension=20, trials=100, iterations=600)
        self.assertGreaterEqual(median_final_fidelity(result), 0.98)
        self.assertTrue(566 / 2 <= median_crossing(result) <= 566 * 2)


@tag('acceptance')
class HighNoiseTests(SimpleTestCase):
    def test_small_dimensions(self):
        for dimension, iterations, floor in ((3, 100, 0.975), (5, 200, 0.965)):
            cfg, result = ensemble(regime='high-noise', dimension=dimension, trials=200, iterations=iterations)
            self.assertEqual(cfg.noise.copies, 80)
            self.assertGreaterEqual(median_final_fidelity(result), floor)

    def test_quvigint(self):
        cfg, result = ensemble(regime='high-noise', dimension=20, trials=100, iterations=600)
        self.assertEqual(cfg.noise.copies, 1000)
        self.assertGreaterEqual(median_final_fidelity(result), 0.93)


@tag('acceptance')
class TurbulenceTests(SimpleTestCase):
    def test_screen_extrema_gate(self):
        cfg = load_run_config(overrides={'regime': 'turbulence'})
        rng = np.random.default_rng(99)
        extrema = np.array([aperture_extrema(generate_screen(cfg.turbulence, rng), cfg.turbulence) for _ in range(200)])
        inside = np.mean((extrema >= np.pi / 10) & (extrema <= 2 * np.pi / 5))
        self.assertGreaterEqual(inside, 0.9)

    def test_qutrit_under_turbulence(self):
        _, result = ensemble(regime='turbulence', dimension=3, trials=100, iterations=100)
        self.assertGreaterEqual(median_final_fidelity(result), 0.99)
        medians = bench.checkpoint_medians(result.trace)
        self.assertGreater(medians[10], medians[100])


@tag('acceptance')
class BaselineComparisonTests(SimpleTestCase):
    def test_self_guided_beats_lossy_baseline(self):
        cfg = load_run_config(overrides={'mode': 'compare', 'trials': 40, 'iterations': 100, 'master_seed': 5})
        results = bench.compare_budgets(cfg, settings.TOMOGRAPHY_WORKERS)
        sgqt = np.median([r.sgqt_infidelity for r in results])
        baseline = np.median([r.baseline_infidelity for r in results])
        self.assertGreater(baseline, 0.0)
        self.assertLess(sgqt, baseline)


@tag('acceptance')
class MixedStateTests(SimpleTestCase):
    def test_low_noise_rank_two(self):
        _, result = ensemble(mode='sgqt-mixed', dimension=3, trials=50, iterations=300)
        self.assertGreaterEqual(median_final_fidelity(result), 0.95)

    def test_reduced_counts(self):
        _, result = ensemble(mode='sgqt-mixed', preset='reduced-count', dimension=3, trials=50, iterations=300)
        self.assertGreaterEqual(median_final_fidelity(result), 0.93)

    def test_noiseless_pure_and_maximally_mixed_targets(self):
        schedule = GainSchedule(**settings.TOMOGRAPHY_MIXED_SCHEDULE)
        noise = NoiseProfile(copies_per_setting=10 ** 6, shot_noise=False)
        rng = np.random.default_rng(17)
        for truth in (DensityMatrix.from_ket(random_haar_ket(3, rng)), DensityMatrix.maximally_mixed(3)):
            finals = []
            for trial in range(10):
                oracle = MeasurementOracle(truth, noise, np.random.default_rng(trial))
                _, trace = run_sgqt_mixed(oracle, 3, 300, schedule, 12, np.random.default_rng(100 + trial))
                finals.append(trace.final_fidelity)
            self.assertGreaterEqual(np.median(finals), 0.99)
