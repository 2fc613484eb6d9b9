"""Euler-Maruyama step of the agents' underdamped Langevin dynamics.

Each agent carries a position ``theta`` and a momentum. One step reads

    theta' = theta + delta * momentum
    momentum' = (1 - delta*gamma) * momentum - delta * grad
                - delta * eta * (theta - theta_bar)
                + noise_scale(c, tau_next) * sqrt(delta) * xi

with ``xi`` a vector of standard normals supplied by the caller, so the update
is a deterministic function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from pacl.errors import InvalidArgument, NumericFailure


@dataclass(frozen=True)
class AgentState:
    theta: np.ndarray
    momentum: np.ndarray

    def __post_init__(self):
        if np.shape(self.theta) != np.shape(self.momentum):
            raise InvalidArgument("theta and momentum must have the same length")


@dataclass(frozen=True)
class DynamicsParams:
    delta: float
    gamma: float
    eta: float
    c: float = 0.0

    def __post_init__(self):
        for name in ("delta", "gamma", "eta", "c"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidArgument(f"{name} must be finite")
        if self.delta <= 0 or self.gamma <= 0:
            raise InvalidArgument("delta and gamma must be > 0")
        if self.eta < 0 or self.c < 0:
            raise InvalidArgument("eta and c must be >= 0")
        if self.delta * self.gamma >= 1:
            raise InvalidArgument(
                f"delta*gamma = {self.delta * self.gamma} must be < 1"
            )


def noise_scale(c: float, tau_next: float) -> float:
    """Annealed diffusion coefficient ``c / sqrt(ln(tau_next + 2))``."""
    if tau_next < 0:
        raise InvalidArgument("tau_next must be >= 0")
    return c / math.sqrt(math.log(tau_next + 2.0))


def agent_step(
    state: AgentState,
    grad,
    theta_bar,
    params: DynamicsParams,
    tau_next: float,
    noise_draw,
    agent: int | None = None,
    step: int | None = None,
) -> AgentState:
    """Advance one agent by one time step of length ``params.delta``.

    ``agent`` and ``step`` only label the :class:`NumericFailure` raised when an
    input or output component is not finite.
    """
    theta, momentum = state.theta, state.momentum
    d = params.delta
    new_theta = theta + d * momentum
    new_momentum = (
        (1.0 - d * params.gamma) * momentum
        - d * grad
        - (d * params.eta) * (theta - theta_bar)
    )
    if params.c > 0:
        new_momentum = new_momentum + (noise_scale(params.c, tau_next) * math.sqrt(d)) * noise_draw
    if not (np.all(np.isfinite(new_theta)) and np.all(np.isfinite(new_momentum))):
        raise NumericFailure(
            f"non-finite agent state (agent={agent}, step={step})", agent=agent, step=step
        )
    return AgentState(new_theta, new_momentum)


def mean_estimate(thetas: Sequence[np.ndarray], pi) -> np.ndarray:
    """The ``pi``-weighted consensus ``sum_k pi_k theta_k``."""
    pi = np.asarray(pi, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 2 or thetas.shape[0] != pi.shape[0] or pi.ndim != 1:
        raise InvalidArgument(
            f"{thetas.shape[0] if thetas.ndim else 0} parameter vectors "
            f"but {pi.size} aggregation coefficients"
        )
    if pi.size == 0:
        raise InvalidArgument("need at least one agent")
    return pi @ thetas
