from tomography import bench
from tomography.management.base import SimulationCommand


class Command(SimulationCommand):
    help = 'Run an ensemble of self-guided (or baseline) tomography trials and write its quantile trace.'
    verb = 'run'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--mode', choices=['sgqt-pure', 'sgqt-mixed', 'baseline-mub'])
        parser.add_argument('--replay', type=int, metavar='INDEX', help='Re-run a single trial of the ensemble.')

    def handle(self, *args, **options):
        cfg = self.load(options, mode=options.get('mode'))
        out = self.output_dir(options)

        if options.get('replay') is not None:
            trial = self.guarded(bench.execute, bench.run_trial, cfg, [options['replay']])[0]
            path = bench.write_replay(out, cfg, trial)
            self.stdout.write(self.style.SUCCESS(
                f"trial {trial.index}: final fidelity {trial.final_fidelity:.6f}, "
                f"{trial.copies_used} copies -> {path}"
            ))
            return

        ensemble = self.guarded(bench.run_ensemble, cfg, self.workers(options))
        summary = bench.write_ensemble(out, cfg, ensemble)
        final = summary['final_infidelity']
        self.stdout.write(self.style.SUCCESS(
            f"{cfg.trials} trials, d={cfg.dimension}, {cfg.mode}: median final infidelity "
            f"{final['median']:.3e} (q25 {final['q25']:.3e}, q75 {final['q75']:.3e}) -> {out}"
        ))
