import os

import numpy as np
from django.core.management.base import CommandError

from tomography.management.base import CONFIG_ERROR, SimulationCommand
from tomography.turbulence import aperture_extrema, dump_screen, generate_screen, save_preview


class Command(SimulationCommand):
    help = 'Write one Kolmogorov phase screen (binary array + PNG preview) and print r0 and its aperture extremum.'
    verb = 'screen_dump'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--count', type=int, default=1, help='Number of screens to write.')

    def handle(self, *args, **options):
        options['preset'] = options.get('preset') or 'turbulence'
        cfg = self.load(options)
        if cfg.turbulence is None:
            raise CommandError(f"preset {cfg.preset!r} has no turbulence section", returncode=CONFIG_ERROR)

        turbulence = cfg.turbulence
        rng = np.random.default_rng(np.random.SeedSequence(cfg.master_seed))
        out = self.output_dir(options)
        os.makedirs(out, exist_ok=True)
        self.stdout.write(
            f"r0 {turbulence.r0_m:.4g} m, beam waist {turbulence.waist_m:.4g} m, "
            f"grid {turbulence.grid_size} x {turbulence.cell_m:.4g} m"
        )
        for i in range(options['count']):
            screen = generate_screen(turbulence, rng)
            stem = os.path.join(out, f"screen-{i}")
            dump_screen(screen, f"{stem}.bin")
            save_preview(screen, f"{stem}.png")
            extremum = aperture_extrema(screen, turbulence, order=cfg.dimension)
            self.stdout.write(f"screen {i}: aperture extremum {extremum:.4f} rad ({extremum / np.pi:.3f} pi)")
        self.stdout.write(self.style.SUCCESS(f"{options['count']} screens -> {out}"))
