"""Principal-agent collaborative learning with interacting Langevin agents."""

from pacl.data import Dataset, PartitionSpec, generate_logistic, load_csv, partition
from pacl.dynamics import AgentState, DynamicsParams, agent_step, mean_estimate, noise_scale
from pacl.model import (
    LogisticGrowthParams,
    ModelSpec,
    clip_gradient,
    logistic_predict,
    loss_gradient,
    make_model,
    quadratic_loss,
)
from pacl.orchestrator import RunConfig, TrajectoryRecord, rng_streams, run, verify_bound
from pacl.principal import (
    PrincipalParams,
    PrincipalState,
    loss_bound,
    mixture_loss,
    normalize,
    performance_index,
    update_weights,
)

__version__ = "0.1.0"
