"""
Self-guided estimation of mixed states.

The estimate is rho = T T† / Tr(T T†) for a lower-triangular complex T,
searched with real-valued SPSA over the d^2 free real entries of T (the
diagonal is kept real). The score of a parameter point is the
count-weighted log-likelihood sum_i f_i log Tr(P_i rho) over a window of
MUB projectors, with fresh counts drawn for each of the two perturbed
points.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .baseline import build_mubs
from .exceptions import (
    DegenerateParameterError,
    DegenerateVectorError,
    DimensionMismatchError,
    InvalidStateError,
)
from .qstate import DensityMatrix, _check_dim
from .spsa import MAX_DIRECTION_DRAWS, Trace, gains

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-12
SIGNS = np.array([1.0, -1.0])


def _lower_indices(dim):
    return np.tril_indices(dim), np.tril_indices(dim, k=-1)


@dataclass(frozen=True, eq=False)
class MixedParam:
    tri: np.ndarray

    def __post_init__(self):
        tri = np.array(self.tri, dtype=np.complex128)
        if tri.ndim != 2 or tri.shape[0] != tri.shape[1]:
            raise InvalidStateError(f"triangular factor must be square, got {tri.shape}")
        _check_dim(tri.shape[0])
        if not np.all(np.isfinite(tri)):
            raise InvalidStateError("triangular factor has non-finite entries")
        tri = np.tril(tri)
        tri.setflags(write=False)
        object.__setattr__(self, 'tri', tri)

    @property
    def dim(self):
        return self.tri.shape[0]

    @classmethod
    def identity(cls, dim):
        dim = _check_dim(dim)
        return cls(np.eye(dim) / np.sqrt(dim))

    @classmethod
    def from_vector(cls, dim, vector):
        """Inverse of `to_vector`: real parts of the lower triangle, then imaginary parts below the diagonal."""
        lower, strict = _lower_indices(dim)
        vector = np.asarray(vector, dtype=float)
        if vector.size != dim * dim:
            raise DimensionMismatchError(f"expected {dim * dim} parameters, got {vector.size}")
        tri = np.zeros((dim, dim), dtype=np.complex128)
        tri[lower] = vector[:len(lower[0])]
        tri[strict] += 1j * vector[len(lower[0]):]
        return cls(tri)

    def to_vector(self):
        lower, strict = _lower_indices(self.dim)
        return np.concatenate([self.tri[lower].real, self.tri[strict].imag])


def realize(param):
    """rho = T T† / Tr(T T†)."""
    if not np.any(param.tri):
        raise DegenerateParameterError("all-zero triangular factor")
    try:
        return DensityMatrix.from_unnormalized(param.tri @ param.tri.conj().T)
    except DegenerateVectorError as exc:
        raise DegenerateParameterError(str(exc)) from exc


def mixed_objective(rho, projectors, counts):
    """sum_i (n_i / sum n) log Tr(P_i rho); None when no photon was counted."""
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    if total == 0:
        return None
    probabilities = np.real(np.einsum('nij,ji->n', projectors, rho.elements))
    return float(np.sum(counts / total * np.log(np.maximum(probabilities, PROBABILITY_FLOOR))))


def _window(k, size, settings):
    return [(k * size + j) % settings for j in range(size)]


def _perturbed_states(theta, dim, beta, rng):
    for _ in range(MAX_DIRECTION_DRAWS):
        delta = SIGNS[rng.integers(0, 2, size=theta.size)]
        try:
            plus = realize(MixedParam.from_vector(dim, theta + beta * delta))
            minus = realize(MixedParam.from_vector(dim, theta - beta * delta))
        except DegenerateParameterError:
            logger.warning("degenerate parameter perturbation at beta=%g; resampling", beta)
            continue
        return delta, plus, minus
    raise DegenerateParameterError(f"{MAX_DIRECTION_DRAWS} consecutive degenerate perturbations")


def run_sgqt_mixed(oracle, dim, iterations, sched, settings_per_objective, rng, mubs=None):
    """SPSA ascent of the windowed log-likelihood; returns (estimate, Uhlmann-fidelity trace).

    The parameter vector is kept at unit norm (rho does not depend on the
    scale of T). Copies per iteration: 2 * settings_per_objective * N.
    """
    if oracle.dim != dim:
        raise DimensionMismatchError(f"oracle has dimension {oracle.dim}, run asked for {dim}")
    if not isinstance(oracle.evaluation.true_state, DensityMatrix):
        raise InvalidStateError("mixed-state estimation needs a DensityMatrix true state")
    mubs = mubs or build_mubs(dim)
    settings = mubs.settings
    if not 1 <= settings_per_objective <= len(settings):
        raise ValueError(f"settings_per_objective must lie in [1, {len(settings)}], got {settings_per_objective}")
    projectors = np.stack([s.projector() for s in settings])

    theta = MixedParam.identity(dim).to_vector()
    estimate = realize(MixedParam.from_vector(dim, theta))
    trace = Trace()
    copies = 0
    skipped = 0
    for k in range(iterations):
        alpha, beta = gains(k, sched)
        window = _window(k, settings_per_objective, len(settings))
        delta, plus, minus = _perturbed_states(theta, dim, beta, rng)
        counts_plus = [oracle.query_counts(settings[i]) for i in window]
        counts_minus = [oracle.query_counts(settings[i]) for i in window]
        copies += 2 * len(window) * oracle.copies_per_setting
        score_plus = mixed_objective(plus, projectors[window], counts_plus)
        score_minus = mixed_objective(minus, projectors[window], counts_minus)
        if score_plus is None or score_minus is None:
            skipped += 1
            logger.debug("iteration %d: zero counts, update skipped", k)
        else:
            step = theta + alpha * (score_plus - score_minus) / (2.0 * beta) * delta
            norm = np.linalg.norm(step)
            if norm > 0 and np.isfinite(norm):
                theta = step / norm
                estimate = realize(MixedParam.from_vector(dim, theta))
            else:
                logger.warning("degenerate mixed update at alpha=%g; keeping the previous estimate", alpha)
        trace.record(k, oracle.evaluation.fidelity_mixed(estimate), copies)

    if skipped:
        logger.warning("%d of %d iterations had zero counts and were skipped", skipped, iterations)
    logger.debug("mixed sgqt finished: d=%d, final fidelity %s", dim, trace.final_fidelity)
    return estimate, trace
