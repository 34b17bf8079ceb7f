"""
Pure and mixed qudit states, Haar sampling and fidelities.

Every other module passes states around as the immutable values defined
here. Amplitudes are complex128; global phase is never canonicalized, so
states are compared through `fidelity` only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .exceptions import (
    DegenerateVectorError,
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidStateError,
)

NORM_TOLERANCE = 1e-12
DEGENERATE_NORM = 1e-14
MATRIX_TOLERANCE = 1e-10
# Eigenvalues below this are treated as exact zeros inside square roots.
SPECTRAL_FLOOR = 1e-14


def _check_dim(dim):
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"dimension must be an integer >= 2, got {dim!r}")
    return int(dim)


def _frozen(array):
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Ket:
    """Unit-norm vector of `dim` complex amplitudes."""

    amps: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amps, dtype=np.complex128).reshape(-1)
        _check_dim(amps.size)
        norm = np.linalg.norm(amps)
        if not np.isfinite(norm) or abs(norm - 1.0) > NORM_TOLERANCE:
            raise InvalidStateError(f"ket norm is {norm!r}, expected 1")
        object.__setattr__(self, 'amps', _frozen(amps))

    @property
    def dim(self):
        return self.amps.size

    def projector(self):
        return np.outer(self.amps, self.amps.conj())

    def __repr__(self):
        return f"Ket(dim={self.dim}, amps={np.array2string(self.amps, precision=4)})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace d×d matrix."""

    elements: np.ndarray

    def __post_init__(self):
        rho = np.array(self.elements, dtype=np.complex128)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise InvalidStateError(f"density matrix must be square, got shape {rho.shape}")
        _check_dim(rho.shape[0])
        if not np.all(np.isfinite(rho)):
            raise InvalidStateError("density matrix has non-finite entries")
        if np.max(np.abs(rho - rho.conj().T)) > MATRIX_TOLERANCE:
            raise InvalidStateError("density matrix is not Hermitian")
        trace = np.trace(rho).real
        if abs(trace - 1.0) > MATRIX_TOLERANCE:
            raise InvalidStateError(f"density matrix trace is {trace!r}, expected 1")
        lowest = np.linalg.eigvalsh(rho)[0]
        if lowest < -MATRIX_TOLERANCE:
            raise InvalidStateError(f"density matrix has negative eigenvalue {lowest!r}")
        object.__setattr__(self, 'elements', _frozen(rho))

    @property
    def dim(self):
        return self.elements.shape[0]

    @classmethod
    def from_ket(cls, ket):
        return cls(ket.projector())

    @classmethod
    def maximally_mixed(cls, dim):
        dim = _check_dim(dim)
        return cls(np.eye(dim, dtype=np.complex128) / dim)

    @classmethod
    def from_unnormalized(cls, matrix):
        """Hermitize and trace-normalize a positive matrix such as T·T† or RρR."""
        matrix = np.asarray(matrix, dtype=np.complex128)
        matrix = 0.5 * (matrix + matrix.conj().T)
        trace = np.trace(matrix).real
        if not np.isfinite(trace) or trace <= DEGENERATE_NORM:
            raise DegenerateVectorError(f"cannot normalize a matrix with trace {trace!r}")
        return cls(matrix / trace)

    def purity(self):
        return float(np.real(np.trace(self.elements @ self.elements)))

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, purity={self.purity():.4f})"


@dataclass(frozen=True, order=True)
class LGModeLabel:
    """Laguerre-Gaussian mode index: azimuthal `l`, radial `p`."""

    l: int
    p: int

    def __post_init__(self):
        if self.p < 0:
            raise InvalidStateError(f"radial index must be >= 0, got {self.p}")

    @property
    def order(self):
        """Mode order 2p + |l| + 1; all modes of one basis share it."""
        return 2 * self.p + abs(self.l) + 1


def fixed_order_basis(dim):
    """The `dim` LG labels with 2p + |l| + 1 = dim, ordered by l.

    d=3 gives (-2,0), (0,1), (2,0); d=5 gives (-4,0), (-2,1), (0,2), (2,1), (4,0).
    """
    dim = _check_dim(dim)
    return tuple(
        LGModeLabel(l=l, p=(dim - 1 - abs(l)) // 2)
        for l in range(-(dim - 1), dim, 2)
    )


def normalize(raw):
    raw = np.asarray(raw, dtype=np.complex128).reshape(-1)
    norm = np.linalg.norm(raw)
    if not np.isfinite(norm) or norm <= DEGENERATE_NORM:
        raise DegenerateVectorError(f"cannot normalize vector with norm {norm!r}")
    return Ket(raw / norm)


def basis_ket(dim, index):
    dim = _check_dim(dim)
    amps = np.zeros(dim, dtype=np.complex128)
    amps[index] = 1.0
    return Ket(amps)


def random_haar_ket(dim, rng):
    """Haar-uniform pure state: a normalized complex Gaussian vector."""
    dim = _check_dim(dim)
    return normalize(rng.standard_normal(dim) + 1j * rng.standard_normal(dim))


def random_density_matrix(dim, rank, rng, measure='bures'):
    """Random rank-`rank` state from the Bures or Hilbert-Schmidt induced measure."""
    dim = _check_dim(dim)
    if not 1 <= rank <= dim:
        raise InvalidDimensionError(f"rank must lie in [1, {dim}], got {rank}")
    ginibre = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    if measure == 'bures':
        unitary = unitary_group.rvs(dim, random_state=rng)
        ginibre = (np.eye(dim) + unitary) @ ginibre
    elif measure != 'hilbert-schmidt':
        raise ValueError(f"unknown measure {measure!r}")
    return DensityMatrix.from_unnormalized(ginibre @ ginibre.conj().T)


def _check_same_dim(x, y):
    if x.dim != y.dim:
        raise DimensionMismatchError(f"dimensions differ: {x.dim} vs {y.dim}")


def fidelity(x, y):
    """|<x|y>|^2, clipped to [0, 1]."""
    _check_same_dim(x, y)
    overlap = np.vdot(x.amps, y.amps)
    return float(min(1.0, max(0.0, abs(overlap) ** 2)))


def infidelity(x, y):
    return 1.0 - fidelity(x, y)


def _psd_sqrt(matrix):
    values, vectors = np.linalg.eigh(matrix)
    values = np.where(values > SPECTRAL_FLOOR, values, 0.0)
    return (vectors * np.sqrt(values)) @ vectors.conj().T


def fidelity_mixed(rho, sigma):
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    if not isinstance(rho, DensityMatrix) or not isinstance(sigma, DensityMatrix):
        raise InvalidStateError("fidelity_mixed expects DensityMatrix arguments")
    _check_same_dim(rho, sigma)
    root = _psd_sqrt(rho.elements)
    inner = root @ sigma.elements @ root
    values = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    values = np.where(values > SPECTRAL_FLOOR, values, 0.0)
    return float(min(1.0, max(0.0, np.sum(np.sqrt(values)) ** 2)))
