"""
Self-guided tomography: complex SPSA ascent of the measured overlap.

Each iteration perturbs the current estimate along one random direction
with entries in {1, -1, i, -i}, measures the two perturbed states, turns
the count ratio (N+ - N-)/(N+ + N-) into a gradient estimate and steps
along it with a decreasing gain.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateVectorError,
    DimensionMismatchError,
    InvalidDimensionError,
    ZeroCountsError,
)
from .qstate import basis_ket, normalize, random_haar_ket

logger = logging.getLogger(__name__)

ALPHABET = np.array([1.0, -1.0, 1j, -1j], dtype=np.complex128)
MAX_DIRECTION_DRAWS = 16


@dataclass(frozen=True)
class GainSchedule:
    """Gains alpha_k = a/(k+1+A)^s and beta_k = b/(k+1)^t."""

    a: float = 3.0
    A: float = 0.0
    s: float = 0.602
    b: float = 0.1
    t: float = 0.101

    def __post_init__(self):
        for name in ('a', 's', 'b', 't'):
            if not getattr(self, name) > 0:
                raise ValueError(f"gain parameter {name} must be positive, got {getattr(self, name)!r}")
        if not self.A >= 0:
            raise ValueError(f"gain parameter A must be non-negative, got {self.A!r}")

    def alpha(self, k):
        return self.a / (k + 1 + self.A) ** self.s

    def beta(self, k):
        return self.b / (k + 1) ** self.t


def gains(k, sched):
    return sched.alpha(k), sched.beta(k)


@dataclass(frozen=True, eq=False)
class PerturbationDirection:
    entries: np.ndarray

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.complex128).reshape(-1)
        if entries.size < 2:
            raise InvalidDimensionError(f"direction dimension must be >= 2, got {entries.size}")
        if not np.all(np.isin(entries, ALPHABET)):
            raise ValueError("direction entries must lie in {1, -1, i, -i}")
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)

    @property
    def dim(self):
        return self.entries.size

    def conjugate_inverse(self):
        # Unit-modulus entries: (1/x)* == x.
        return self.entries


def sample_direction(dim, rng):
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"dimension must be an integer >= 2, got {dim!r}")
    return PerturbationDirection(ALPHABET[rng.integers(0, ALPHABET.size, size=int(dim))])


@dataclass(frozen=True)
class CountPair:
    n_plus: int
    n_minus: int

    def __post_init__(self):
        if self.n_plus < 0 or self.n_minus < 0:
            raise ValueError(f"counts must be non-negative, got {self.n_plus}, {self.n_minus}")

    @property
    def total(self):
        return self.n_plus + self.n_minus

    def ratio(self):
        if self.total == 0:
            raise ZeroCountsError("N+ + N- = 0")
        return (self.n_plus - self.n_minus) / self.total


def perturb(sigma, beta, delta):
    if sigma.dim != delta.dim:
        raise DimensionMismatchError(f"state has dimension {sigma.dim}, direction {delta.dim}")
    step = beta * delta.entries
    return normalize(sigma.amps + step), normalize(sigma.amps - step)


def estimate_gradient(counts, beta, delta):
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta!r}")
    return counts.ratio() / (2.0 * beta) * delta.conjugate_inverse()


def update(sigma, alpha, g):
    """normalize(sigma + alpha*g); a degenerate sum keeps sigma."""
    g = np.asarray(g, dtype=np.complex128)
    if g.shape != sigma.amps.shape:
        raise DimensionMismatchError(f"gradient shape {g.shape} does not match dimension {sigma.dim}")
    try:
        return normalize(sigma.amps + alpha * g)
    except DegenerateVectorError:
        logger.warning("degenerate update at alpha=%g; keeping the previous estimate", alpha)
        return sigma


@dataclass(frozen=True)
class TraceRecord:
    k: int
    fidelity_true: float
    copies_used: int


@dataclass
class Trace:
    """Per-iteration evaluation record; the algorithm never reads it."""

    iterations: list = field(default_factory=list)

    def record(self, k, fidelity_true, copies_used):
        if self.iterations:
            last = self.iterations[-1]
            if k <= last.k or copies_used < last.copies_used:
                raise ValueError("trace records must advance in k and cumulative copies")
        elif k != 0:
            raise ValueError("trace must start at k=0")
        self.iterations.append(TraceRecord(k, fidelity_true, copies_used))

    def __len__(self):
        return len(self.iterations)

    def fidelities(self):
        return np.array([r.fidelity_true for r in self.iterations], dtype=float)

    def copies(self):
        return np.array([r.copies_used for r in self.iterations], dtype=np.int64)

    @property
    def final_fidelity(self):
        return self.iterations[-1].fidelity_true if self.iterations else None


def _draw_perturbation(sigma, beta, rng):
    for _ in range(MAX_DIRECTION_DRAWS):
        delta = sample_direction(sigma.dim, rng)
        try:
            return delta, perturb(sigma, beta, delta)
        except DegenerateVectorError:
            logger.warning("degenerate perturbation at beta=%g; resampling the direction", beta)
    raise DegenerateVectorError(f"{MAX_DIRECTION_DRAWS} consecutive degenerate perturbations")


def initial_state(dim, rng, initial='haar'):
    if initial == 'haar':
        return random_haar_ket(dim, rng)
    if initial == 'basis':
        return basis_ket(dim, 0)
    raise ValueError(f"unknown initial state {initial!r}")


def run_sgqt(oracle, dim, iterations, sched, rng, initial='haar'):
    """Run the self-guided loop against `oracle` and return (estimate, trace).

    The oracle answers `query_counts(setting)` and exposes `copies_per_setting`;
    `oracle.evaluation` is read for the trace only.
    """
    if oracle.dim != dim:
        raise DimensionMismatchError(f"oracle has dimension {oracle.dim}, run asked for {dim}")
    if iterations < 0:
        raise ValueError(f"iterations must be non-negative, got {iterations}")

    sigma = initial if not isinstance(initial, str) else initial_state(dim, rng, initial)
    trace = Trace()
    copies = 0
    skipped = 0
    for k in range(iterations):
        alpha, beta = gains(k, sched)
        delta, (plus, minus) = _draw_perturbation(sigma, beta, rng)
        counts = CountPair(oracle.query_counts(plus), oracle.query_counts(minus))
        copies += 2 * oracle.copies_per_setting
        try:
            g = estimate_gradient(counts, beta, delta)
        except ZeroCountsError:
            skipped += 1
            logger.debug("iteration %d: zero counts, update skipped", k)
        else:
            sigma = update(sigma, alpha, g)
        trace.record(k, oracle.evaluation.fidelity(sigma), copies)

    if skipped:
        logger.warning("%d of %d iterations had zero counts and were skipped", skipped, iterations)
    logger.debug("sgqt finished: d=%d, %d iterations, final fidelity %s", dim, iterations, trace.final_fidelity)
    return sigma, trace
