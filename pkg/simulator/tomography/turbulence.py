"""
Weak atmospheric turbulence as a Kolmogorov thin phase screen.

Screens come from FFT spectral synthesis of the phase spectrum
0.023 r0^(-5/3) f^(-11/3) (optionally with three levels of 3x3
subharmonics for the low frequencies the grid misses). The prepared
Laguerre-Gaussian field is multiplied by exp(i*phi) and projected back onto
the d-mode basis; power scattered out of the basis is lost.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from PIL import Image
from scipy.special import eval_genlaguerre, gammaln

from .exceptions import ConfigurationError, DimensionMismatchError, ResolutionError
from .qstate import fixed_order_basis

logger = logging.getLogger(__name__)

KOLMOGOROV_PSD = 0.023
STRUCTURE_CONSTANT = 6.88
MIN_GRID = 64
EXTENT_WAISTS = 10.0
NORM_DEFICIT = 1e-3
SCREEN_FORMAT = 'phase-screen'


@dataclass(frozen=True)
class TurbulenceConfig:
    """Path and sampling geometry. `beam_waist_m=None` means "calibrate before use"."""

    cn2: float = 1e-18
    distance_m: float = 1000.0
    wavelength_m: float = 810e-9
    beam_waist_m: float | None = None
    grid_size: int = 512
    grid_extent_m: float | None = None
    subharmonics: bool = False

    def __post_init__(self):
        if self.cn2 < 0:
            raise ConfigurationError(f"turbulence.cn2: must be non-negative, got {self.cn2!r}")
        for name in ('distance_m', 'wavelength_m'):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"turbulence.{name}: must be positive")
        if self.beam_waist_m is not None and not self.beam_waist_m > 0:
            raise ConfigurationError("turbulence.beam_waist_m: must be positive")
        if self.grid_size <= 0:
            raise ConfigurationError("turbulence.grid_size: must be positive")
        if self.grid_extent_m is not None and self.beam_waist_m is not None:
            if self.grid_extent_m < 4 * self.beam_waist_m:
                raise ConfigurationError("turbulence.grid_extent_m: must cover at least 4 beam waists")

    @property
    def waist_m(self):
        if self.beam_waist_m is None:
            raise ConfigurationError("turbulence.beam_waist_m: not set and not calibrated")
        return self.beam_waist_m

    @property
    def extent_m(self):
        if self.grid_extent_m is not None:
            return self.grid_extent_m
        return EXTENT_WAISTS * self.waist_m

    @property
    def cell_m(self):
        return self.extent_m / self.grid_size

    @property
    def r0_m(self):
        return fried_parameter(self)


def fried_parameter(cfg):
    """Plane-wave Fried parameter (0.423 k^2 Cn2 L)^(-3/5); infinite without turbulence."""
    if cfg.cn2 == 0:
        return math.inf
    k = 2 * math.pi / cfg.wavelength_m
    return (0.423 * k ** 2 * cfg.cn2 * cfg.distance_m) ** (-3.0 / 5.0)


@dataclass(frozen=True, eq=False)
class PhaseScreen:
    grid: np.ndarray
    r0_m: float
    cell_m: float

    def __post_init__(self):
        grid = np.array(self.grid, dtype=np.float64)
        if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
            raise ConfigurationError(f"phase screen must be a square grid, got {grid.shape}")
        if not np.all(np.isfinite(grid)):
            raise ConfigurationError("phase screen has non-finite entries")
        grid.setflags(write=False)
        object.__setattr__(self, 'grid', grid)

    @property
    def size(self):
        return self.grid.shape[0]

    @property
    def extent_m(self):
        return self.size * self.cell_m


def _psd(f, r0):
    with np.errstate(divide='ignore'):
        psd = KOLMOGOROV_PSD * r0 ** (-5.0 / 3.0) * f ** (-11.0 / 3.0)
    psd[f == 0] = 0.0
    return psd


def _spectral_screen(n, delta, r0, rng):
    df = 1.0 / (n * delta)
    fx = np.fft.fftfreq(n, d=delta)
    f = np.hypot(fx[None, :], fx[:, None])
    noise = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return np.real(np.fft.ifft2(noise * np.sqrt(_psd(f, r0)) * df)) * n * n


def _subharmonic_screen(n, delta, r0, rng, levels=3):
    extent = n * delta
    coords = (np.arange(n) - n / 2) * delta
    xx, yy = np.meshgrid(coords, coords)
    screen = np.zeros((n, n), dtype=np.complex128)
    for level in range(1, levels + 1):
        df = 1.0 / (3 ** level * extent)
        fx, fy = np.meshgrid(np.array([-1.0, 0.0, 1.0]) * df, np.array([-1.0, 0.0, 1.0]) * df)
        weights = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))) * np.sqrt(
            _psd(np.hypot(fx, fy), r0)
        ) * df
        for w, u, v in zip(weights.ravel(), fx.ravel(), fy.ravel()):
            if w != 0:
                screen += w * np.exp(2j * np.pi * (u * xx + v * yy))
    return np.real(screen)


def generate_screen(cfg, rng):
    """Fresh piston-free Kolmogorov screen on the configured grid."""
    if cfg.grid_size < MIN_GRID:
        raise ConfigurationError(f"turbulence.grid_size: must be at least {MIN_GRID}, got {cfg.grid_size}")
    n, delta, r0 = cfg.grid_size, cfg.cell_m, fried_parameter(cfg)
    if math.isinf(r0):
        return PhaseScreen(np.zeros((n, n)), r0, delta)
    phase = _spectral_screen(n, delta, r0, rng)
    if cfg.subharmonics:
        phase = phase + _subharmonic_screen(n, delta, r0, rng)
    return PhaseScreen(phase - phase.mean(), r0, delta)


def _grid_coordinates(cfg):
    coords = (np.arange(cfg.grid_size) - cfg.grid_size / 2) * cfg.cell_m
    return np.meshgrid(coords, coords)


def lg_field(label, cfg):
    """Unit-power LG_p^l field at the waist plane, sampled on the screen grid."""
    xx, yy = _grid_coordinates(cfg)
    w = cfg.waist_m
    l, p = abs(label.l), label.p
    scaled = 2.0 * (xx ** 2 + yy ** 2) / w ** 2
    amplitude = math.exp(0.5 * (math.log(2.0 / math.pi) + gammaln(p + 1) - gammaln(p + l + 1))) / w
    field = (
        amplitude
        * scaled ** (l / 2.0)
        * eval_genlaguerre(p, l, scaled)
        * np.exp(-scaled / 2.0)
        * np.exp(1j * label.l * np.arctan2(yy, xx))
    )
    power = float(np.sum(np.abs(field) ** 2) * cfg.cell_m ** 2)
    if abs(1.0 - power) > NORM_DEFICIT:
        raise ResolutionError(
            f"grid of {cfg.grid_size} samples over {cfg.extent_m:.4g} m holds {power:.6f} "
            f"of the power of mode l={label.l}, p={label.p}"
        )
    return field / math.sqrt(power)


@lru_cache(maxsize=16)
def basis_fields(basis, cfg):
    """Row i is the flattened field of basis[i]; read-only and cached per (basis, cfg)."""
    fields = np.stack([lg_field(label, cfg).ravel() for label in basis])
    fields.setflags(write=False)
    return fields


def _check_basis(dim, basis, screen, cfg):
    if len(basis) != dim:
        raise DimensionMismatchError(f"{len(basis)} basis labels for dimension {dim}")
    if any(label.order != dim for label in basis):
        raise ValueError(f"basis labels must all have mode order {dim}")
    if screen.size != cfg.grid_size:
        raise DimensionMismatchError(f"screen has {screen.size} samples per side, config {cfg.grid_size}")


def turbulent_overlap(psi_coeffs, setting_coeffs, basis, screen, cfg):
    """|<E_setting, E_psi exp(i phi)>|^2 by quadrature on the screen grid."""
    if psi_coeffs.dim != setting_coeffs.dim:
        raise DimensionMismatchError(f"dimensions differ: {psi_coeffs.dim} vs {setting_coeffs.dim}")
    basis = tuple(basis)
    _check_basis(psi_coeffs.dim, basis, screen, cfg)
    fields = basis_fields(basis, cfg)
    prepared = psi_coeffs.amps @ fields
    measured = setting_coeffs.amps @ fields
    overlap = np.vdot(measured, prepared * np.exp(1j * screen.grid.ravel())) * cfg.cell_m ** 2
    return float(min(1.0, abs(overlap) ** 2))


class TurbulentChannel:
    """Applies a fresh screen to every transmission and returns the mode amplitudes that survive."""

    def __init__(self, cfg, dim):
        self.cfg = cfg
        self.dim = dim
        self.basis = fixed_order_basis(dim)
        self._fields = basis_fields(self.basis, cfg)
        self._analysis = self._fields.conj() * cfg.cell_m ** 2
        self.screens_drawn = 0

    def transmit(self, amps, rng):
        screen = generate_screen(self.cfg, rng)
        self.screens_drawn += 1
        distorted = (np.asarray(amps) @ self._fields) * np.exp(1j * screen.grid.ravel())
        return self._analysis @ distorted


def structure_function(screens, max_separation, axis=1):
    """Mean [phi(x + r) - phi(x)]^2 for r = 1..max_separation samples along `axis`."""
    stack = np.asarray([s.grid if isinstance(s, PhaseScreen) else s for s in screens])
    axis = axis + 1
    values = []
    n = stack.shape[axis]
    for r in range(1, max_separation + 1):
        head = np.take(stack, np.arange(r, n), axis=axis)
        tail = np.take(stack, np.arange(0, n - r), axis=axis)
        values.append(np.mean((head - tail) ** 2))
    return np.array(values)


def kolmogorov_structure(separation_m, r0):
    return STRUCTURE_CONSTANT * (np.asarray(separation_m) / r0) ** (5.0 / 3.0)


def aperture_extrema(screen, cfg, order=3):
    """Largest |phase| over the 1/e^2 disk of an order-`order` beam, aperture piston removed."""
    xx, yy = _grid_coordinates(cfg)
    inside = xx ** 2 + yy ** 2 <= order * cfg.waist_m ** 2
    values = screen.grid[inside]
    return float(np.max(np.abs(values - values.mean())))


def calibrate_beam_waist(cfg, rng, target=math.pi / 5, order=3, samples=64):
    """Waist whose screens have median aperture extremum `target`.

    With the grid extent tied to the waist, screen statistics in grid units
    scale as (w/r0)^(5/6), so one Monte Carlo estimate at a reference waist
    fixes the answer.
    """
    if cfg.grid_extent_m is not None:
        raise ConfigurationError("turbulence.grid_extent_m: calibration needs the extent tied to the waist")
    r0 = fried_parameter(cfg)
    if math.isinf(r0):
        raise ConfigurationError("turbulence.cn2: nothing to calibrate without turbulence")
    reference = replace(cfg, beam_waist_m=r0)
    extrema = [aperture_extrema(generate_screen(reference, rng), reference, order) for _ in range(samples)]
    waist = r0 * (target / float(np.median(extrema))) ** (6.0 / 5.0)
    logger.info("calibrated beam waist %.4g m (r0 %.4g m, %d screens)", waist, r0, samples)
    return waist


@lru_cache(maxsize=8)
def calibrated_config(cfg, seed, samples, order=3):
    """`cfg` with its waist filled in by a seeded calibration, cached per process."""
    if cfg.beam_waist_m is not None:
        return cfg
    waist = calibrate_beam_waist(cfg, np.random.default_rng(seed), order=order, samples=samples)
    return replace(cfg, beam_waist_m=waist)


def dump_screen(screen, path):
    """Write a header line of JSON, then the grid as little-endian float64 in row-major order."""
    header = {
        'format': SCREEN_FORMAT,
        'version': 1,
        'rows': screen.size,
        'cols': screen.size,
        'dtype': '<f8',
        'order': 'C',
        'cell_m': screen.cell_m,
        'extent_m': screen.extent_m,
        'r0_m': None if math.isinf(screen.r0_m) else screen.r0_m,
    }
    with open(path, 'wb') as handle:
        handle.write(json.dumps(header, sort_keys=True).encode('utf-8') + b'\n')
        handle.write(np.ascontiguousarray(screen.grid, dtype='<f8').tobytes(order='C'))


def load_screen(path):
    with open(path, 'rb') as handle:
        header = json.loads(handle.readline().decode('utf-8'))
        if header.get('format') != SCREEN_FORMAT:
            raise ConfigurationError(f"{path}: not a phase-screen file")
        payload = np.frombuffer(handle.read(), dtype=header['dtype'])
    grid = payload.reshape(header['rows'], header['cols'])
    r0 = math.inf if header['r0_m'] is None else header['r0_m']
    return PhaseScreen(grid, r0, header['cell_m'])


def save_preview(screen, path):
    """Grayscale PNG of the screen, mid-grey at zero phase."""
    span = float(np.max(np.abs(screen.grid))) or 1.0
    levels = np.clip(np.round(127.5 * (screen.grid / span + 1.0)), 0, 255).astype(np.uint8)
    Image.fromarray(levels).save(path)
