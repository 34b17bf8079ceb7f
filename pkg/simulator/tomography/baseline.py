"""
Standard tomography baseline: measure every projector of a complete set of
mutually unbiased bases, reconstruct the density matrix by maximum
likelihood and, for comparisons with the pure-state search, keep its
dominant eigenvector.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionMismatchError, UnsupportedDimensionError
from .qstate import DensityMatrix, Ket, _check_dim

logger = logging.getLogger(__name__)

MLE_TOLERANCE = 1e-10
MLE_MAX_ITERATIONS = 10_000
EIGEN_TIE = 1e-12
PROBABILITY_FLOOR = 1e-300


def is_prime(n):
    if n < 2:
        return False
    for factor in range(2, int(n ** 0.5) + 1):
        if n % factor == 0:
            return False
    return True


@dataclass(frozen=True, eq=False)
class MubSet:
    """d+1 orthonormal bases of a prime dimension; basis 0 is the computational one."""

    dim: int
    bases: tuple

    @property
    def settings(self):
        return tuple(ket for basis in self.bases for ket in basis)

    @property
    def basis_indices(self):
        return tuple(b for b, basis in enumerate(self.bases) for _ in basis)

    def __len__(self):
        return self.dim * (self.dim + 1)


def _weyl_vector(dim, r, j):
    n = np.arange(dim)
    if dim == 2:
        return (1j ** (r * n ** 2)) * (-1.0) ** (j * n) / np.sqrt(2)
    return np.exp(2j * np.pi * ((r * n ** 2 + j * n) % dim) / dim) / np.sqrt(dim)


def build_mubs(dim):
    """Computational basis plus the d quadratic-phase Fourier bases of a prime dimension."""
    dim = _check_dim(dim)
    if not is_prime(dim):
        raise UnsupportedDimensionError(f"MUB construction covers prime dimensions only, got {dim}")
    computational = tuple(Ket(np.eye(dim)[j]) for j in range(dim))
    fourier = tuple(
        tuple(Ket(_weyl_vector(dim, r, j)) for j in range(dim))
        for r in range(dim)
    )
    return MubSet(dim, (computational,) + fourier)


def split_budget(total, settings):
    """Equal split of `total` copies; the remainder goes one copy each to the first settings."""
    if settings <= 0 or total < settings:
        raise ValueError(f"cannot split {total} copies over {settings} settings")
    share, remainder = divmod(int(total), settings)
    return tuple(share + (1 if i < remainder else 0) for i in range(settings))


@dataclass(frozen=True, eq=False)
class TomogramData:
    settings: tuple
    counts: tuple
    copies_per_setting: int
    allocation: tuple = None
    basis_indices: tuple = None

    def __post_init__(self):
        if len(self.settings) != len(self.counts):
            raise DimensionMismatchError(f"{len(self.settings)} settings but {len(self.counts)} counts")
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")
        if self.allocation is None:
            object.__setattr__(self, 'allocation', (self.copies_per_setting,) * len(self.settings))
        elif len(self.allocation) != len(self.settings):
            raise DimensionMismatchError("allocation length does not match the settings")

    @property
    def dim(self):
        return self.settings[0].dim

    @property
    def total_copies(self):
        return int(sum(self.allocation))


def acquire_tomogram(oracle, mubs, copies_per_setting, allocation=None):
    """One count per MUB projector; `allocation` overrides the equal per-setting budget."""
    if oracle.dim != mubs.dim:
        raise DimensionMismatchError(f"oracle has dimension {oracle.dim}, MUBs {mubs.dim}")
    settings = mubs.settings
    if allocation is None:
        allocation = (int(copies_per_setting),) * len(settings)
    counts = tuple(oracle.query_counts(s, copies=c) for s, c in zip(settings, allocation))
    data = TomogramData(settings, counts, int(copies_per_setting), tuple(allocation), mubs.basis_indices)
    logger.debug("tomogram: d=%d, %d settings, %d copies", mubs.dim, len(settings), data.total_copies)
    return data


@dataclass(frozen=True)
class MleResult:
    state: DensityMatrix
    converged: bool
    iterations: int
    log_likelihood: float


def _log_likelihood(probabilities, counts, allocation):
    expected = np.maximum(probabilities * allocation, PROBABILITY_FLOOR)
    return float(np.sum(counts * np.log(expected) - expected))


def _trace_distance(x, y):
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(x - y))))


def mle_reconstruct(data, tolerance=MLE_TOLERANCE, max_iterations=MLE_MAX_ITERATIONS):
    """Poisson maximum likelihood by the diluted R-rho-R fixed point.

    rho <- A rho A† / Tr with A = H^-1 R, R = sum (n_i/p_i) P_i and
    H = sum c_i P_i. When a step lowers the likelihood the step is diluted
    to A = 1 + eps H^-1 R, halving eps on every further drop.
    """
    dim = data.dim
    projectors = np.stack([s.projector() for s in data.settings])
    counts = np.asarray(data.counts, dtype=float)
    allocation = np.asarray(data.allocation, dtype=float)
    h_inverse = np.linalg.inv(np.tensordot(allocation, projectors, axes=1))
    identity = np.eye(dim, dtype=np.complex128)

    def probabilities(rho):
        return np.maximum(np.real(np.einsum('nij,ji->n', projectors, rho)), PROBABILITY_FLOOR)

    rho = identity / dim
    likelihood = _log_likelihood(probabilities(rho), counts, allocation)
    epsilon = None
    converged = False
    iteration = 0
    while iteration < max_iterations:
        iteration += 1
        p = probabilities(rho)
        step = h_inverse @ np.tensordot(counts / p, projectors, axes=1)
        if epsilon is not None:
            step = identity + epsilon * step
        candidate = step @ rho @ step.conj().T
        candidate = 0.5 * (candidate + candidate.conj().T)
        candidate /= np.trace(candidate).real
        candidate_likelihood = _log_likelihood(probabilities(candidate), counts, allocation)
        if candidate_likelihood < likelihood - 1e-12 * abs(likelihood):
            epsilon = 1.0 if epsilon is None else epsilon / 2
            if epsilon < 1e-12:
                break
            continue
        distance = _trace_distance(candidate, rho)
        rho, likelihood = candidate, candidate_likelihood
        if distance < tolerance:
            converged = True
            break

    if not converged:
        logger.warning("MLE stopped after %d iterations without converging", iteration)
    return MleResult(DensityMatrix.from_unnormalized(rho), converged, iteration, likelihood)


def project_pure(rho):
    """Dominant eigenvector of `rho`, phase fixed so its largest amplitude is real-positive.

    A degenerate top eigenvalue resolves to the projection of the computational
    vector with the largest weight in the top eigenspace (lowest index on ties).
    """
    values, vectors = np.linalg.eigh(rho.elements)
    space = vectors[:, values >= values[-1] - EIGEN_TIE]
    if space.shape[1] == 1:
        vector = space[:, 0]
    else:
        weights = np.sum(np.abs(space) ** 2, axis=1)
        m = int(np.flatnonzero(weights >= weights.max() - EIGEN_TIE)[0])
        vector = space @ space[m].conj()
    magnitudes = np.abs(vector)
    j = int(np.flatnonzero(magnitudes >= magnitudes.max() - EIGEN_TIE)[0])
    vector = vector * (np.conj(vector[j]) / magnitudes[j])
    return Ket(vector / np.linalg.norm(vector))


def write_tomogram_csv(data, path):
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(['setting_index', 'basis_index', 'copies', 'counts'])
        basis_indices = data.basis_indices or (None,) * len(data.settings)
        for i, (basis, copies, count) in enumerate(zip(basis_indices, data.allocation, data.counts)):
            writer.writerow([i, '' if basis is None else basis, copies, count])
