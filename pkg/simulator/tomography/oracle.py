"""
Simulated prepare-and-measure experiment.

A `MeasurementOracle` hides a true state and answers projection queries
with Poisson photon counts. The measurement model, in order: optional
turbulence on the prepared field, crosstalk between modes, mode-dependent
loss, then shot noise with dark counts. Nothing here renormalizes away
loss: summed counts over a basis drop below the copy budget when the
transmission is not uniform.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import minimize

from .exceptions import ChannelError, ConfigurationError, DimensionMismatchError
from .qstate import DensityMatrix, Ket, fidelity, fidelity_mixed, normalize

logger = logging.getLogger(__name__)

CROSSTALK_MODELS = ('uniform', 'nearest')
LOSS_MODELS = ('detection', 'amplitude')
ROW_TOLERANCE = 1e-9


def build_crosstalk(dim, strength, model='uniform'):
    """Row-stochastic crosstalk with diagonal 1 - strength.

    `uniform` spreads the leaked fraction evenly over all other modes;
    `nearest` splits it between the adjacent modes only.
    """
    if not 0.0 <= strength <= 1.0:
        raise ConfigurationError(f"noise.crosstalk_strength: must lie in [0, 1], got {strength!r}")
    matrix = np.eye(dim) * (1.0 - strength)
    for i in range(dim):
        if model == 'uniform':
            targets = [j for j in range(dim) if j != i]
        elif model == 'nearest':
            targets = [j for j in (i - 1, i + 1) if 0 <= j < dim]
        else:
            raise ConfigurationError(f"noise.crosstalk_model: unknown model {model!r}")
        matrix[i, targets] += strength / len(targets)
    return matrix


@dataclass(frozen=True, eq=False)
class NoiseProfile:
    """Count budget and technical noise of one measurement setting.

    Give either `copies_per_setting` or `rate_hz` (with `integration_time_s`).
    """

    copies_per_setting: int | None = None
    rate_hz: float | None = None
    integration_time_s: float = 1.0
    dark_rate_hz: float = 0.0
    dark_counts_per_setting: float = 0.0
    crosstalk: np.ndarray | None = None
    crosstalk_strength: float = 0.0
    crosstalk_model: str = 'uniform'
    loss: tuple | None = None
    loss_model: str = 'detection'
    shot_noise: bool = True

    def __post_init__(self):
        if (self.copies_per_setting is None) == (self.rate_hz is None):
            raise ConfigurationError("noise: give exactly one of copies_per_setting or rate_hz")
        if self.copies_per_setting is not None and self.copies_per_setting <= 0:
            raise ConfigurationError("noise.copies_per_setting: must be positive")
        if self.rate_hz is not None and (self.rate_hz <= 0 or self.integration_time_s <= 0):
            raise ConfigurationError("noise.rate_hz: rate and integration time must be positive")
        if self.dark_rate_hz < 0 or self.dark_counts_per_setting < 0:
            raise ConfigurationError("noise.dark_rate_hz: dark counts must be non-negative")
        if self.loss_model not in LOSS_MODELS:
            raise ConfigurationError(f"noise.loss_model: expected one of {LOSS_MODELS}, got {self.loss_model!r}")
        if self.crosstalk_model not in CROSSTALK_MODELS:
            raise ConfigurationError(
                f"noise.crosstalk_model: expected one of {CROSSTALK_MODELS}, got {self.crosstalk_model!r}"
            )
        if self.loss is not None:
            object.__setattr__(self, 'loss', tuple(float(x) for x in self.loss))

    @property
    def mean_copies(self):
        if self.copies_per_setting is not None:
            return float(self.copies_per_setting)
        return self.rate_hz * self.integration_time_s

    @property
    def copies(self):
        """Integer copy budget of one setting, used for bookkeeping."""
        return int(round(self.mean_copies))

    @property
    def dark_mean(self):
        if self.rate_hz is not None:
            return self.dark_rate_hz * self.integration_time_s
        return self.dark_counts_per_setting

    def crosstalk_matrix(self, dim):
        if self.crosstalk is None:
            return build_crosstalk(dim, self.crosstalk_strength, self.crosstalk_model)
        matrix = np.asarray(self.crosstalk, dtype=float)
        if matrix.shape != (dim, dim):
            raise ConfigurationError(f"noise.crosstalk: expected a {dim}x{dim} matrix, got {matrix.shape}")
        if np.any(matrix < 0) or np.max(np.abs(matrix.sum(axis=1) - 1.0)) > ROW_TOLERANCE:
            raise ConfigurationError("noise.crosstalk: rows must be non-negative and sum to 1")
        return matrix

    def loss_vector(self, dim):
        if self.loss is None:
            return np.ones(dim)
        eta = np.asarray(self.loss, dtype=float)
        if eta.shape != (dim,):
            raise ConfigurationError(f"noise.loss: expected {dim} transmissions, got {eta.size}")
        if np.any(eta <= 0) or np.any(eta > 1):
            raise ConfigurationError("noise.loss: transmissions must lie in (0, 1]")
        return eta

    def with_loss(self, loss):
        return NoiseProfile(**{**self.__dict__, 'loss': tuple(loss)})


class EvaluationProbe:
    """Evaluation-only access to the hidden state.

    Used to score traces and final estimates; estimators never receive it.
    `reference` selects what estimates are scored against: the prepared
    state, or the apparent state the lossy detector singles out.
    """

    def __init__(self, oracle, reference='prepared'):
        if reference not in ('prepared', 'apparent'):
            raise ConfigurationError(f"reference: expected 'prepared' or 'apparent', got {reference!r}")
        self._oracle = oracle
        self.reference = reference

    @property
    def true_state(self):
        return self._oracle._state

    @cached_property
    def reference_state(self):
        if self.reference == 'apparent' and isinstance(self.true_state, Ket):
            return self.apparent_state()
        return self.true_state

    def apparent_state(self):
        """Maximizer of the noise-free expected detection probability, started at the true state."""
        oracle = self._oracle
        start = self.true_state
        if not isinstance(start, Ket):
            raise ConfigurationError("an apparent reference needs a pure true state")
        dim = oracle.dim

        def objective(x):
            return -oracle.expected_probability(normalize(x[:dim] + 1j * x[dim:]))

        result = minimize(
            objective,
            np.concatenate([start.amps.real, start.amps.imag]),
            method='BFGS',
            options={'gtol': 1e-9, 'maxiter': 2000},
        )
        if not result.success:
            logger.warning("apparent-state search stopped early: %s", result.message)
        return normalize(result.x[:dim] + 1j * result.x[dim:])

    def fidelity(self, ket):
        reference = self.reference_state
        if isinstance(reference, Ket):
            return fidelity(ket, reference)
        return float(np.real(np.vdot(ket.amps, reference.elements @ ket.amps)))

    def fidelity_mixed(self, rho):
        reference = self.reference_state
        if isinstance(reference, Ket):
            reference = DensityMatrix.from_ket(reference)
        return fidelity_mixed(rho, reference)


class MeasurementOracle:
    """Answers projection queries on a hidden state with photon counts.

    Single owner: every query advances the oracle's random stream.
    """

    def __init__(self, true_state, noise, rng, channel=None, reference='prepared'):
        if not isinstance(true_state, (Ket, DensityMatrix)):
            raise TypeError("true state must be a Ket or a DensityMatrix")
        self.dim = true_state.dim
        if channel is not None:
            if isinstance(true_state, DensityMatrix):
                raise ConfigurationError("turbulence: mixed true states are not supported under turbulence")
            if channel.dim != self.dim:
                raise DimensionMismatchError(f"channel has dimension {channel.dim}, state {self.dim}")
        self._state = true_state
        self._noise = noise
        self._rng = rng
        self._channel = channel
        crosstalk = noise.crosstalk_matrix(self.dim)
        self._stay = np.sqrt(np.diag(crosstalk))
        self._leak = crosstalk - np.diag(np.diag(crosstalk))
        self._eta = noise.loss_vector(self.dim)
        self.evaluation = EvaluationProbe(self, reference)

    @property
    def noise(self):
        return self._noise

    @property
    def channel(self):
        return self._channel

    @property
    def copies_per_setting(self):
        return self._noise.copies

    def _check(self, setting):
        if setting.dim != self.dim:
            raise DimensionMismatchError(f"setting has dimension {setting.dim}, oracle {self.dim}")

    def ideal_probability(self, setting):
        """Noise-free |<setting|psi>|^2 or <setting|rho|setting>."""
        self._check(setting)
        if isinstance(self._state, Ket):
            return fidelity(setting, self._state)
        value = np.real(np.vdot(setting.amps, self._state.elements @ setting.amps))
        return float(min(1.0, max(0.0, value)))

    def _model_probability(self, setting, amplitudes=None):
        s = setting.amps
        weights = np.abs(s) ** 2
        amplitude_loss = self._noise.loss_model == 'amplitude'
        if isinstance(self._state, Ket):
            chi = self._state.amps if amplitudes is None else amplitudes
            if amplitude_loss:
                chi = np.sqrt(self._eta) * chi
            coherent = abs(np.vdot(s, self._stay * chi)) ** 2
            populations = np.abs(chi) ** 2
        else:
            rho = self._state.elements
            if amplitude_loss:
                root = np.sqrt(self._eta)
                rho = root[:, None] * rho * root[None, :]
            stayed = self._stay[:, None] * rho * self._stay[None, :]
            coherent = np.real(np.vdot(s, stayed @ s))
            populations = np.real(np.diag(rho))
        probability = coherent + weights @ (self._leak.T @ populations)
        if not amplitude_loss:
            probability *= weights @ self._eta
        return probability

    def expected_probability(self, setting):
        """Detection probability under loss and crosstalk, without turbulence or shot noise."""
        self._check(setting)
        return float(max(0.0, self._model_probability(setting)))

    def query_counts(self, setting, copies=None):
        self._check(setting)
        amplitudes = None
        if self._channel is not None:
            amplitudes = self._channel.transmit(self._state.amps, self._rng)
        probability = self._model_probability(setting, amplitudes)
        if not np.isfinite(probability):
            raise ChannelError(f"non-finite detection probability {probability!r}")
        budget = self._noise.mean_copies if copies is None else float(copies)
        mean = max(0.0, probability) * budget + self._noise.dark_mean
        if self._noise.shot_noise:
            return int(self._rng.poisson(mean))
        return int(round(mean))
