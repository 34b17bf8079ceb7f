from django.conf import settings

from tomography import bench
from tomography.management.base import SimulationCommand


class Command(SimulationCommand):
    help = 'Compare self-guided tomography with MUB + maximum likelihood at equal copy budgets.'
    verb = 'compare'

    def handle(self, *args, **options):
        cfg = self.load(options, mode='compare')
        results = self.guarded(bench.compare_budgets, cfg, self.workers(options))
        target = settings.TOMOGRAPHY_COMPARE_TARGETS.get(cfg.regime)
        out = self.output_dir(options)
        summary = bench.write_comparison(out, cfg, results, target)

        ratio = summary['ratio']
        ratio_text = 'n/a' if ratio is None else f"{ratio:.2f}"
        self.stdout.write(
            f"median infidelity: sgqt {summary['median_sgqt_infidelity']:.3e}, "
            f"baseline {summary['median_baseline_infidelity']:.3e}, "
            f"ratio {ratio_text} (target {target if target is not None else 'n/a'})"
        )
        if ratio is not None and ratio <= 1:
            self.stdout.write(self.style.WARNING('baseline matched or beat self-guided tomography'))
        self.stdout.write(self.style.SUCCESS(f"{len(results)} comparison trials -> {out}"))
