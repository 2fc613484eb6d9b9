"""The principal: held-out scoring and exponentially weighted aggregation.

The pure functions mirror the update rules one-to-one. :class:`PrincipalState`
runs them over time in the log domain, so the weights of a persistently bad
agent can shrink far below the smallest double without the normalisation or
the loss bound breaking down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.special import logsumexp

from pacl.errors import DegenerateWeights, InvalidArgument
from pacl.model import EXP_CLAMP, ModelSpec, quadratic_loss

SIMPLEX_ATOL = 1e-12


@dataclass(frozen=True)
class PrincipalParams:
    beta: float
    mu: float

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise InvalidArgument(f"beta must lie in (0, 1), got {self.beta!r}")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise InvalidArgument(f"mu must be finite and > 0, got {self.mu!r}")


def index_from_loss(test_loss: float, mu: float) -> float:
    return -math.expm1(-max(-EXP_CLAMP, min(EXP_CLAMP, mu * test_loss)))


def performance_index(model: ModelSpec, theta, test_set, mu: float) -> float:
    """``1 - exp(-mu * J(theta))`` with ``J`` the mean test loss; lies in [0, 1)."""
    if mu <= 0:
        raise InvalidArgument("mu must be > 0")
    return index_from_loss(quadratic_loss(model, theta, test_set), mu)


def _check_rho(rho):
    rho = np.asarray(rho, dtype=float)
    if not np.all((rho >= 0) & (rho <= 1)):
        raise InvalidArgument(f"performance indices must lie in [0, 1], got {rho}")
    return rho


def update_weights(alpha, rho, beta: float):
    """``alpha * beta**rho``, i.e. ``alpha * exp(-rho * log(1/beta))``."""
    if not 0 < beta < 1:
        raise InvalidArgument("beta must lie in (0, 1)")
    alpha = np.asarray(alpha, dtype=float)
    rho = _check_rho(rho)
    if alpha.shape != rho.shape:
        raise InvalidArgument("alpha and rho lengths differ")
    return alpha * np.exp(-rho * math.log(1.0 / beta))


def normalize(alpha):
    alpha = np.asarray(alpha, dtype=float)
    if alpha.size == 0 or not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
        raise DegenerateWeights(f"weights must be positive and finite, got {alpha}")
    total = alpha.sum()
    if not total > 0:
        raise DegenerateWeights("weights sum to zero")
    return alpha / total


def mixture_loss(pi, rho) -> float:
    pi = np.asarray(pi, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if pi.shape != rho.shape:
        raise InvalidArgument("pi and rho lengths differ")
    return float(pi @ rho)


def loss_bound(alpha_final, beta: float) -> float:
    """Upper bound ``-log(sum(alpha_final)) / (1 - beta)`` on the cumulative loss."""
    total = float(np.sum(alpha_final))
    if not (total > 0 and math.isfinite(total)):
        raise DegenerateWeights(f"final weights sum to {total}")
    return -math.log(total) / (1.0 - beta)


def loss_bound_from_log(log_alpha_final, beta: float) -> float:
    """:func:`loss_bound` evaluated from log-weights."""
    return -float(logsumexp(log_alpha_final)) / (1.0 - beta)


@dataclass
class PrincipalState:
    """Running weights, aggregation coefficients and loss ledger.

    ``log_alpha`` holds ``log(alpha)`` exactly; ``alpha`` exponentiates it on
    demand and may underflow to zero after long runs, while ``pi`` and the
    bound are always computed from the logs.
    """

    params: PrincipalParams
    log_alpha: np.ndarray
    pi: np.ndarray = field(init=False)
    cumulative_loss: float = 0.0
    step_losses: List[float] = field(default_factory=list)

    def __post_init__(self):
        self.log_alpha = np.asarray(self.log_alpha, dtype=float)
        self.pi = self._softmax(self.log_alpha)

    @classmethod
    def initial(cls, K: int, params: PrincipalParams, alpha0=None) -> "PrincipalState":
        if K < 1:
            raise InvalidArgument("K must be >= 1")
        if alpha0 is None:
            alpha0 = np.full(K, 1.0 / K)
        alpha0 = np.asarray(alpha0, dtype=float)
        if alpha0.shape != (K,):
            raise InvalidArgument(f"alpha0 must have length {K}")
        if np.any(alpha0 <= 0) or abs(alpha0.sum() - 1.0) > SIMPLEX_ATOL:
            raise InvalidArgument("alpha0 must be positive and sum to one")
        return cls(params, np.log(alpha0))

    @staticmethod
    def _softmax(log_alpha):
        if not np.all(np.isfinite(log_alpha)):
            raise DegenerateWeights(f"non-finite log-weights {log_alpha}")
        w = np.exp(log_alpha - log_alpha.max())
        return w / w.sum()

    @property
    def K(self) -> int:
        return self.log_alpha.shape[0]

    @property
    def alpha(self) -> np.ndarray:
        return np.exp(self.log_alpha)

    @property
    def log_alpha_sum(self) -> float:
        return float(logsumexp(self.log_alpha))

    def update(self, rho) -> float:
        """Charge the mixture loss of ``rho`` under the current ``pi``, then reweight.

        Returns the step's mixture loss.
        """
        rho = _check_rho(rho)
        if rho.shape != self.log_alpha.shape:
            raise InvalidArgument(f"expected {self.K} performance indices")
        step_loss = mixture_loss(self.pi, rho)
        self.step_losses.append(step_loss)
        self.cumulative_loss += step_loss
        self.log_alpha = self.log_alpha - rho * math.log(1.0 / self.params.beta)
        self.pi = self._softmax(self.log_alpha)
        return step_loss

    def bound(self) -> float:
        return loss_bound_from_log(self.log_alpha, self.params.beta)

    def bound_holds(self, slack: float = 1e-9) -> bool:
        return self.cumulative_loss <= self.bound() + slack


def verify_loss_bound(cumulative_loss: float, bound: float, slack: float = 1e-9) -> bool:
    return cumulative_loss <= bound + slack


def simulate_weights(rho_stream, beta: float, alpha0=None) -> PrincipalState:
    """Feed a ``(N, K)`` array of performance indices through a fresh principal."""
    rho_stream = np.atleast_2d(np.asarray(rho_stream, dtype=float))
    state = PrincipalState.initial(rho_stream.shape[1], PrincipalParams(beta, 1.0), alpha0)
    for rho in rho_stream:
        state.update(rho)
    return state

