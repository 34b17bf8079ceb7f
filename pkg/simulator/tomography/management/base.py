import os

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from tomography.config import load_run_config
from tomography.exceptions import ConfigurationError, TrialFailure, UnsupportedDimensionError

CONFIG_ERROR = 2
TRIAL_ERROR = 3


def parse_assignment(text):
    key, sep, value = text.partition('=')
    if not sep or not key.strip():
        raise CommandError(f"--set expects KEY=VALUE, got {text!r}", returncode=CONFIG_ERROR)
    return key.strip(), value.strip()


class SimulationCommand(BaseCommand):
    """Shared flags and error translation for the simulation verbs."""

    verb = None

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Run-config file (key = value lines).')
        parser.add_argument('--preset', help='Named preset from TOMOGRAPHY_PRESETS.')
        parser.add_argument('--seed', type=int, help='Master seed (unsigned 64-bit).')
        parser.add_argument('--trials', type=int)
        parser.add_argument('--iterations', type=int)
        parser.add_argument('--dimension', type=int)
        parser.add_argument('--out', help='Output directory.')
        parser.add_argument('--workers', type=int, help='Worker processes; 1 runs trials in-process.')
        parser.add_argument(
            '--set', action='append', default=[], metavar='KEY=VALUE',
            help='Override any dotted config key, e.g. --set noise.dark_rate_hz=50.',
        )

    def overrides(self, options, **extra):
        values = {
            'master_seed': options.get('seed'),
            'trials': options.get('trials'),
            'iterations': options.get('iterations'),
            'dimension': options.get('dimension'),
        }
        values.update(parse_assignment(item) for item in options.get('set') or [])
        values.update(extra)
        return values

    def load(self, options, **extra):
        try:
            return load_run_config(options.get('config'), options.get('preset'), self.overrides(options, **extra))
        except ConfigurationError as exc:
            raise CommandError(f"invalid configuration: {exc}", returncode=CONFIG_ERROR) from exc

    def output_dir(self, options):
        return options.get('out') or os.path.join(settings.TOMOGRAPHY_OUTPUT_DIR, self.verb)

    def workers(self, options):
        return options.get('workers') or settings.TOMOGRAPHY_WORKERS

    def guarded(self, func, *args):
        try:
            return func(*args)
        except TrialFailure as exc:
            raise CommandError(str(exc), returncode=TRIAL_ERROR) from exc
        except (ConfigurationError, UnsupportedDimensionError) as exc:
            raise CommandError(str(exc), returncode=CONFIG_ERROR) from exc
