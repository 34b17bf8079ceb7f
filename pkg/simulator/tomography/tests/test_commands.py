import csv
import json
import os
import tempfile
from io import StringIO
from unittest.mock import patch

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase


def read_rows(path):
    with open(path, newline='', encoding='utf-8') as handle:
        return list(csv.reader(handle))


class CommandTestCase(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = self.tmp.name

    def call(self, name, *args, **options):
        stdout = StringIO()
        options.setdefault('workers', 1)
        call_command(name, *args, stdout=stdout, **options)
        return stdout.getvalue()


class RunCommandTests(CommandTestCase):
    def test_writes_trace_trials_and_summary(self):
        output = self.call('run', trials=2, iterations=10, seed=3, out=self.out)
        self.assertIn('median final infidelity', output)
        trace = read_rows(os.path.join(self.out, 'trace.csv'))
        self.assertEqual(trace[0], ['k', 'q25', 'median', 'q75', 'copies'])
        self.assertEqual(len(trace), 11)
        with open(os.path.join(self.out, 'summary.json'), encoding='utf-8') as handle:
            summary = json.load(handle)
        self.assertEqual(summary['config']['master_seed'], 3)
        self.assertEqual(summary['seeds']['trial_indices'], [0, 1])

    def test_replay_matches_ensemble_row(self):
        self.call('run', trials=3, iterations=10, seed=11, out=self.out)
        self.call('run', trials=3, iterations=10, seed=11, out=self.out, replay=2)
        ensemble = read_rows(os.path.join(self.out, 'trials.csv'))
        replayed = read_rows(os.path.join(self.out, 'trial-2.csv'))
        self.assertEqual(replayed[1], ensemble[3])

    def test_config_file_and_set_overrides(self):
        path = os.path.join(self.out, 'run.cfg')
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write("dimension = 2\ntrials = 1\niterations = 4\n")
        self.call('run', '--set', 'noise.copies_per_setting=80', config=path, out=self.out)
        rows = read_rows(os.path.join(self.out, 'trace.csv'))
        self.assertEqual(rows[-1][-1], str(2 * 80 * 4))

    def test_invalid_config_exits_with_two(self):
        with self.assertRaises(CommandError) as caught:
            self.call('run', '--set', 'noise.dark_rate_hz=-5', out=self.out)
        self.assertEqual(caught.exception.returncode, 2)
        self.assertIn('noise.dark_rate_hz', str(caught.exception))

    def test_malformed_set_exits_with_two(self):
        with self.assertRaises(CommandError) as caught:
            self.call('run', '--set', 'trials', out=self.out)
        self.assertEqual(caught.exception.returncode, 2)

    def test_trial_failure_exits_with_three(self):
        with patch('tomography.bench.run_trial', side_effect=ArithmeticError('boom')):
            with self.assertRaises(CommandError) as caught:
                self.call('run', trials=2, iterations=5, seed=9, out=self.out)
        self.assertEqual(caught.exception.returncode, 3)
        self.assertIn('--replay 0', str(caught.exception))


class CompareCommandTests(CommandTestCase):
    def test_writes_comparison(self):
        output = self.call('compare', trials=1, iterations=10, out=self.out)
        self.assertIn('target 15.0', output)
        rows = read_rows(os.path.join(self.out, 'comparison.csv'))
        self.assertEqual(rows[0], ['index', 'sgqt_infidelity', 'baseline_infidelity', 'copies_used'])
        self.assertEqual(rows[1][-1], str(2 * 10 * 100000))

    def test_composite_dimension_exits_with_two(self):
        with self.assertRaises(CommandError) as caught:
            self.call('compare', trials=1, iterations=5, dimension=4, out=self.out)
        self.assertEqual(caught.exception.returncode, 2)


class SweepCommandTests(CommandTestCase):
    def test_sweep_over_copies(self):
        self.call(
            'sweep', key='noise.copies_per_setting', values='80,1000', trials=2, iterations=5, out=self.out
        )
        rows = read_rows(os.path.join(self.out, 'sweep.csv'))
        self.assertEqual([row[1] for row in rows[1:]], ['80', '1000'])
        self.assertEqual([row[-1] for row in rows[1:]], ['800', '10000'])


class ScreenDumpCommandTests(CommandTestCase):
    def test_writes_screen_and_preview(self):
        output = self.call(
            'screen_dump', '--set', 'turbulence.grid_size=64', '--set', 'turbulence.beam_waist_m=0.5',
            count=2, seed=1, out=self.out,
        )
        self.assertIn('r0 9.0', output)
        self.assertIn('aperture extremum', output)
        for name in ('screen-0.bin', 'screen-0.png', 'screen-1.bin', 'screen-1.png'):
            self.assertTrue(os.path.exists(os.path.join(self.out, name)))

    def test_preset_without_turbulence(self):
        with self.assertRaises(CommandError) as caught:
            self.call('screen_dump', preset='low-noise', out=self.out)
        self.assertEqual(caught.exception.returncode, 2)
