"""The collaborative-learning loop: agents move, the principal reweights.

Iteration ``n`` of :func:`run`:

1. form the consensus ``theta_bar_n`` from the current aggregation
   coefficients and advance every agent one Langevin step on its own
   training set, each with its own random stream;
2. score every agent's *new* parameters on the held-out set, charge the
   mixture loss and update the weights;
3. stop when the consensus moved by at most ``tol`` or the horizon is reached.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from pacl.data import Dataset
from pacl.dynamics import AgentState, DynamicsParams, agent_step
from pacl.errors import InvalidArgument
from pacl.model import ModelSpec, clip_gradient, loss_gradient, quadratic_loss
from pacl.principal import (
    PrincipalParams,
    PrincipalState,
    index_from_loss,
    loss_bound_from_log,
    verify_loss_bound,
)

CONVERGED = "convergence"
HORIZON = "horizon"
BOUND_SLACK = 1e-9


def rng_streams(seed: int, K: int) -> List[np.random.Generator]:
    """``K`` independent generators; stream ``k`` depends only on ``(seed, k)``."""
    if K < 1:
        raise InvalidArgument("K must be >= 1")
    children = np.random.SeedSequence(seed).spawn(K)
    return [np.random.default_rng(child) for child in children]


@dataclass(frozen=True)
class RunConfig:
    K: int
    T: float
    N: int
    dynamics: DynamicsParams
    principal: PrincipalParams
    tol: float = 1e-8
    seed: int = 0
    record_stride: int = 1
    L_lip: Optional[float] = None
    use_param_box: bool = False
    theta0: Optional[np.ndarray] = None
    p0: Optional[np.ndarray] = None
    alpha0: Optional[np.ndarray] = None
    threads: int = 1

    def __post_init__(self):
        if self.K < 1:
            raise InvalidArgument("K must be >= 1")
        if self.N < 1:
            raise InvalidArgument("N must be >= 1")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise InvalidArgument("T must be finite and > 0")
        if abs(self.T / self.N - self.dynamics.delta) > 1e-15:
            raise InvalidArgument(
                f"delta={self.dynamics.delta!r} is inconsistent with T/N={self.T / self.N!r}"
            )
        if not self.tol > 0:
            raise InvalidArgument("tol must be > 0")
        if self.record_stride < 1:
            raise InvalidArgument("record_stride must be >= 1")
        if self.L_lip is not None and not self.L_lip > 0:
            raise InvalidArgument("L_lip must be > 0")
        if self.threads < 1:
            raise InvalidArgument("threads must be >= 1")

    @classmethod
    def from_horizon(cls, K, T, N, gamma, eta, c, beta, mu, **kwargs) -> "RunConfig":
        dyn = DynamicsParams(delta=T / N, gamma=gamma, eta=eta, c=c)
        return cls(K=K, T=T, N=N, dynamics=dyn, principal=PrincipalParams(beta, mu), **kwargs)

    def initial_states(self, param_dim: int) -> List[AgentState]:
        def per_agent(value, default):
            if value is None:
                value = default
            value = np.asarray(value, dtype=float)
            if value.shape == (param_dim,):
                return [value.copy() for _ in range(self.K)]
            if value.shape == (self.K, param_dim):
                return [row.copy() for row in value]
            raise InvalidArgument(
                f"initial value has shape {value.shape}; expected ({param_dim},) "
                f"or ({self.K}, {param_dim})"
            )

        if self.theta0 is None:
            raise InvalidArgument("theta0 is required")
        thetas = per_agent(self.theta0, None)
        moms = per_agent(self.p0, np.zeros(param_dim))
        return [AgentState(t, p) for t, p in zip(thetas, moms)]


@dataclass
class StepRecord:
    """State after iteration ``n``: parameters ``Theta_{n+1}``, the indices
    ``rho_n`` scored on them, the updated weights and ``pi_{n+1}``.

    ``block_loss`` is the summed mixture loss of every iteration since the
    previously recorded one, so the column totals ``L`` under any thinning.
    """

    n: int
    tau: float
    theta_bar: np.ndarray
    thetas: np.ndarray
    rho: np.ndarray
    log_alpha: np.ndarray
    pi: np.ndarray
    step_loss: float
    block_loss: float

    @property
    def alpha(self) -> np.ndarray:
        return np.exp(self.log_alpha)


@dataclass
class TrajectoryRecord:
    K: int
    param_dim: int
    beta: float
    theta_bar0: np.ndarray
    rows: List[StepRecord] = field(default_factory=list)
    step_losses: List[float] = field(default_factory=list)
    theta_star: Optional[np.ndarray] = None
    steps: int = 0
    terminated_by: str = ""
    cumulative_loss: float = 0.0
    log_alpha_final: Optional[np.ndarray] = None
    bound: float = 0.0

    @property
    def alpha_final(self) -> np.ndarray:
        return np.exp(self.log_alpha_final)


@dataclass(frozen=True)
class BoundReport:
    holds: bool
    cumulative_loss: float
    bound: float

    def __bool__(self):
        return self.holds


def verify_bound(record: TrajectoryRecord, beta: Optional[float] = None) -> BoundReport:
    """Recompute ``L`` and its upper bound from the record and compare them."""
    beta = record.beta if beta is None else beta
    total = math.fsum(record.step_losses)
    bound = loss_bound_from_log(record.log_alpha_final, beta)
    return BoundReport(verify_loss_bound(total, bound, BOUND_SLACK), total, bound)


class _Agent:
    """Per-agent work unit: gradient, Langevin step and held-out score."""

    def __init__(self, index, model, train_set, test_set, config, rng, state):
        self.index = index
        self.model = model
        self.train_set = train_set
        self.test_set = test_set
        self.config = config
        self.rng = rng
        self.state = state
        self.p = model.param_dim

    def advance(self, theta_bar, tau_next, n):
        cfg = self.config
        theta = self.state.theta
        grad = loss_gradient(self.model, theta, self.train_set)
        if cfg.L_lip is not None:
            grad = clip_gradient(grad, theta, cfg.L_lip)
        noise = self.rng.standard_normal(self.p) if cfg.dynamics.c > 0 else None
        new = agent_step(self.state, grad, theta_bar, cfg.dynamics, tau_next, noise, self.index, n)
        if cfg.use_param_box and self.model.param_box is not None:
            new = AgentState(self.model.clamp(new.theta), new.momentum)
        self.state = new
        test_loss = quadratic_loss(self.model, new.theta, self.test_set)
        return index_from_loss(test_loss, cfg.principal.mu)


def run(
    config: RunConfig,
    model: ModelSpec,
    train_sets: Sequence[Dataset],
    test_set: Dataset,
) -> TrajectoryRecord:
    """Run the principal-agent loop and return the full trajectory record."""
    if len(train_sets) != config.K:
        raise InvalidArgument(f"expected {config.K} training sets, got {len(train_sets)}")
    for ds in list(train_sets) + [test_set]:
        if len(ds) == 0:
            raise InvalidArgument(f"dataset {ds.label!r} is empty")

    states = config.initial_states(model.param_dim)
    streams = rng_streams(config.seed, config.K)
    agents = [
        _Agent(k, model, train_sets[k], test_set, config, streams[k], states[k])
        for k in range(config.K)
    ]
    principal = PrincipalState.initial(config.K, config.principal, config.alpha0)
    delta = config.dynamics.delta

    thetas = np.array([a.state.theta for a in agents])
    theta_bar = principal.pi @ thetas
    record = TrajectoryRecord(config.K, model.param_dim, config.principal.beta, theta_bar.copy())

    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 and config.K > 1 else None
    block_loss = 0.0
    terminated_by = HORIZON
    n = 0
    try:
        # overflow surfaces as a NumericFailure from agent_step, not as warnings
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for n in range(config.N):
                tau_next = (n + 1) * delta
                if pool is None:
                    rho = [a.advance(theta_bar, tau_next, n) for a in agents]
                else:
                    rho = list(pool.map(lambda a: a.advance(theta_bar, tau_next, n), agents))
                rho = np.array(rho)
                step_loss = principal.update(rho)
                block_loss += step_loss

                thetas = np.array([a.state.theta for a in agents])
                new_bar = principal.pi @ thetas
                moved = float(np.linalg.norm(new_bar - theta_bar))
                theta_bar = new_bar
                # n = 0 moves nobody when the initial momenta are zero
                done = n >= 1 and moved <= config.tol
                last = done or n == config.N - 1
                if last or (n + 1) % config.record_stride == 0:
                    record.rows.append(
                        StepRecord(
                            n=n,
                            tau=tau_next,
                            theta_bar=theta_bar.copy(),
                            thetas=thetas,
                            rho=rho,
                            log_alpha=principal.log_alpha.copy(),
                            pi=principal.pi.copy(),
                            step_loss=step_loss,
                            block_loss=block_loss,
                        )
                    )
                    block_loss = 0.0
                if done:
                    terminated_by = CONVERGED
                    break
    finally:
        if pool is not None:
            pool.shutdown()

    record.step_losses = principal.step_losses
    record.theta_star = theta_bar.copy()
    record.steps = n + 1
    record.terminated_by = terminated_by
    record.cumulative_loss = principal.cumulative_loss
    record.log_alpha_final = principal.log_alpha.copy()
    record.bound = principal.bound()
    return record
