from django.core.management.base import CommandError

from tomography import bench
from tomography.management.base import CONFIG_ERROR, SimulationCommand


class Command(SimulationCommand):
    help = 'Run one ensemble per value of a config key (dimension, noise.copies_per_setting, schedule.a, ...).'
    verb = 'sweep'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--key', required=True, help='Dotted config key to vary.')
        parser.add_argument('--values', required=True, help='Comma-separated values of the key.')
        parser.add_argument('--mode', choices=['sgqt-pure', 'sgqt-mixed', 'baseline-mub'])

    def handle(self, *args, **options):
        key = options['key']
        values = [v.strip() for v in options['values'].split(',') if v.strip()]
        if not values:
            raise CommandError('--values is empty', returncode=CONFIG_ERROR)

        points = [(value, self.load(options, mode=options.get('mode'), **{key: value})) for value in values]
        rows = self.guarded(bench.run_sweep, key, points, self.workers(options))
        out = self.output_dir(options)
        bench.write_sweep(out, key, rows, points[0][1].master_seed)

        for row in rows:
            self.stdout.write(f"{key}={row['value']}: median final infidelity {row['median']:.3e}")
        self.stdout.write(self.style.SUCCESS(f"{len(rows)} sweep points -> {out}"))
