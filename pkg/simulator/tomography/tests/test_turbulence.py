import json
import math
import os
import tempfile
from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase
from PIL import Image

from tomography.exceptions import ConfigurationError, DimensionMismatchError, ResolutionError
from tomography.qstate import LGModeLabel, fixed_order_basis, fidelity, random_haar_ket
from tomography.turbulence import (
    PhaseScreen,
    TurbulenceConfig,
    TurbulentChannel,
    aperture_extrema,
    basis_fields,
    calibrate_beam_waist,
    dump_screen,
    fried_parameter,
    generate_screen,
    kolmogorov_structure,
    lg_field,
    load_screen,
    save_preview,
    structure_function,
    turbulent_overlap,
)

PRESET = TurbulenceConfig(cn2=1e-18, distance_m=1000.0, wavelength_m=810e-9)


class FriedParameterTests(SimpleTestCase):
    def test_weak_turbulence_path(self):
        self.assertAlmostEqual(fried_parameter(PRESET), 9.05, delta=0.05)

    def test_no_turbulence(self):
        self.assertTrue(math.isinf(fried_parameter(TurbulenceConfig(cn2=0.0))))

    def test_stronger_turbulence_shrinks_r0(self):
        stronger = TurbulenceConfig(cn2=1e-16)
        self.assertLess(fried_parameter(stronger), fried_parameter(PRESET))


class ScreenTests(SimpleTestCase):
    def test_grid_too_small(self):
        cfg = TurbulenceConfig(beam_waist_m=0.01, grid_size=32)
        with self.assertRaises(ConfigurationError):
            generate_screen(cfg, np.random.default_rng(0))

    def test_zero_turbulence_gives_flat_screen(self):
        cfg = TurbulenceConfig(cn2=0.0, beam_waist_m=0.01, grid_size=64)
        screen = generate_screen(cfg, np.random.default_rng(0))
        self.assertFalse(np.any(screen.grid))

    def test_screens_are_piston_free_and_seeded(self):
        cfg = TurbulenceConfig(beam_waist_m=0.5, grid_size=64, subharmonics=True)
        a = generate_screen(cfg, np.random.default_rng(3))
        b = generate_screen(cfg, np.random.default_rng(3))
        np.testing.assert_array_equal(a.grid, b.grid)
        self.assertAlmostEqual(a.grid.mean(), 0.0, places=12)

    def test_extent_must_cover_the_beam(self):
        with self.assertRaises(ConfigurationError):
            TurbulenceConfig(beam_waist_m=1.0, grid_extent_m=2.0)

    def test_structure_function_follows_kolmogorov_law(self):
        r0 = fried_parameter(PRESET)
        cfg = TurbulenceConfig(
            cn2=PRESET.cn2, beam_waist_m=r0 / 2.5, grid_size=128, grid_extent_m=4 * r0, subharmonics=True
        )
        rng = np.random.default_rng(2024)
        screens = [generate_screen(cfg, rng) for _ in range(60)]
        measured = (structure_function(screens, 16, axis=0) + structure_function(screens, 16, axis=1)) / 2
        for separation in (2, 4, 8, 16):
            expected = kolmogorov_structure(separation * cfg.cell_m, r0)
            self.assertAlmostEqual(measured[separation - 1] / expected, 1.0, delta=0.2)


    def test_structure_function_is_isotropic(self):
        cfg = TurbulenceConfig(beam_waist_m=0.5, grid_size=64)
        rng = np.random.default_rng(77)
        screens = [generate_screen(cfg, rng) for _ in range(100)]
        along_x = structure_function(screens, 4, axis=1)
        along_y = structure_function(screens, 4, axis=0)
        np.testing.assert_allclose(along_x, along_y, rtol=0.1)


class ModeTests(SimpleTestCase):
    def test_gram_matrix_is_identity(self):
        for dim, grid in ((3, 128), (5, 128), (20, 256)):
            cfg = TurbulenceConfig(beam_waist_m=0.01, grid_size=grid)
            fields = basis_fields(fixed_order_basis(dim), cfg)
            gram = fields.conj() @ fields.T * cfg.cell_m ** 2
            np.testing.assert_allclose(gram, np.eye(dim), atol=1e-4)

    def test_coarse_grid_cannot_hold_high_order_mode(self):
        cfg = TurbulenceConfig(beam_waist_m=0.01, grid_size=64, grid_extent_m=0.04)
        with self.assertRaises(ResolutionError):
            lg_field(LGModeLabel(19, 0), cfg)

    def test_flat_screen_overlap_is_the_ideal_one(self):
        cfg = TurbulenceConfig(cn2=0.0, beam_waist_m=0.01, grid_size=128)
        rng = np.random.default_rng(5)
        psi, setting = random_haar_ket(3, rng), random_haar_ket(3, rng)
        screen = PhaseScreen(np.zeros((128, 128)), math.inf, cfg.cell_m)
        self.assertAlmostEqual(
            turbulent_overlap(psi, setting, fixed_order_basis(3), screen, cfg), fidelity(setting, psi), places=6
        )

    def test_constant_screen_is_a_global_phase(self):
        cfg = TurbulenceConfig(cn2=0.0, beam_waist_m=0.01, grid_size=128)
        rng = np.random.default_rng(6)
        psi, setting = random_haar_ket(3, rng), random_haar_ket(3, rng)
        basis = fixed_order_basis(3)
        flat = PhaseScreen(np.zeros((128, 128)), math.inf, cfg.cell_m)
        shifted = PhaseScreen(np.full((128, 128), 1.3), math.inf, cfg.cell_m)
        self.assertAlmostEqual(
            turbulent_overlap(psi, setting, basis, shifted, cfg),
            turbulent_overlap(psi, setting, basis, flat, cfg),
            places=12,
        )

    def test_overlap_checks_basis_size(self):
        cfg = TurbulenceConfig(cn2=0.0, beam_waist_m=0.01, grid_size=64)
        psi = random_haar_ket(3, np.random.default_rng(0))
        screen = PhaseScreen(np.zeros((64, 64)), math.inf, cfg.cell_m)
        with self.assertRaises(DimensionMismatchError):
            turbulent_overlap(psi, psi, fixed_order_basis(5)[:2], screen, cfg)

    def test_channel_without_turbulence_is_transparent(self):
        cfg = TurbulenceConfig(cn2=0.0, beam_waist_m=0.01, grid_size=128)
        channel = TurbulentChannel(cfg, 5)
        psi = random_haar_ket(5, np.random.default_rng(8))
        np.testing.assert_allclose(channel.transmit(psi.amps, np.random.default_rng(0)), psi.amps, atol=1e-6)
        self.assertEqual(channel.screens_drawn, 1)

    def test_channel_never_amplifies(self):
        cfg = TurbulenceConfig(cn2=1e-14, beam_waist_m=0.02, grid_size=128)
        channel = TurbulentChannel(cfg, 3)
        psi = random_haar_ket(3, np.random.default_rng(1))
        rng = np.random.default_rng(2)
        for _ in range(10):
            self.assertLessEqual(np.linalg.norm(channel.transmit(psi.amps, rng)), 1.0 + 1e-6)


class DiagnosticsTests(SimpleTestCase):
    def test_aperture_extremum_ignores_piston(self):
        cfg = TurbulenceConfig(beam_waist_m=0.01, grid_size=64)
        screen = PhaseScreen(np.full((64, 64), 2.0), 9.0, cfg.cell_m)
        self.assertEqual(aperture_extrema(screen, cfg, order=3), 0.0)

    def test_calibration_hits_target_median(self):
        cfg = TurbulenceConfig(grid_size=64)
        waist = calibrate_beam_waist(cfg, np.random.default_rng(7), samples=16)
        calibrated = TurbulenceConfig(beam_waist_m=waist, grid_size=64)
        rng = np.random.default_rng(7)
        extrema = [aperture_extrema(generate_screen(calibrated, rng), calibrated) for _ in range(16)]
        self.assertAlmostEqual(float(np.median(extrema)), math.pi / 5, places=6)

    def test_calibration_needs_turbulence(self):
        with self.assertRaises(ConfigurationError):
            calibrate_beam_waist(TurbulenceConfig(cn2=0.0, grid_size=64), np.random.default_rng(0))

    def test_dump_and_preview(self):
        cfg = TurbulenceConfig(beam_waist_m=0.5, grid_size=64)
        screen = generate_screen(cfg, np.random.default_rng(1))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'screen.bin')
            dump_screen(screen, path)
            with open(path, 'rb') as handle:
                header = json.loads(handle.readline())
                payload = handle.read()
            self.assertEqual((header['rows'], header['cols'], header['dtype']), (64, 64, '<f8'))
            self.assertEqual(len(payload), 64 * 64 * 8)
            np.testing.assert_array_equal(load_screen(path).grid, screen.grid)

            preview = os.path.join(tmp, 'screen.png')
            save_preview(screen, preview)
            with Image.open(preview) as image:
                self.assertEqual(image.size, (64, 64))
                self.assertEqual(image.mode, 'L')


class FreshScreenTests(SimpleTestCase):
    def test_consecutive_transmissions_use_independent_screens(self):
        cfg = TurbulenceConfig(beam_waist_m=0.5, grid_size=64)
        channel = TurbulentChannel(cfg, 3)
        psi = random_haar_ket(3, np.random.default_rng(3))
        drawn = []

        def recording(config, rng):
            screen = generate_screen(config, rng)
            drawn.append(screen.grid.ravel())
            return screen

        rng = np.random.default_rng(4)
        with patch('tomography.turbulence.generate_screen', side_effect=recording):
            for _ in range(200):
                channel.transmit(psi.amps, rng)
        self.assertEqual(channel.screens_drawn, 200)
        correlations = [np.corrcoef(a, b)[0, 1] for a, b in zip(drawn, drawn[1:])]
        self.assertLess(abs(np.mean(correlations)), 0.15)
