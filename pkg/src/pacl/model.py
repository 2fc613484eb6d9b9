"""Hypothesis functions, quadratic loss and analytic gradients.

Every model maps a parameter vector ``theta`` and an array of scalar inputs to
an array of predictions, and supplies the Jacobian of those predictions with
respect to ``theta``. The loss gradient is assembled from the Jacobian, so a
new model only has to provide ``predict`` and ``jacobian``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from pacl.errors import DomainError, InvalidArgument

EXP_CLAMP = 700.0


def _safe_exp(z):
    return np.exp(np.clip(z, -EXP_CLAMP, EXP_CLAMP))


@dataclass(frozen=True)
class ModelSpec:
    """A parametric hypothesis ``h_theta(x)`` with its parameter space.

    ``param_box`` is an optional ``(lower, upper)`` pair of length-``param_dim``
    arrays describing the admissible parameter region.
    """

    name: str
    param_dim: int
    predict: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray, np.ndarray], np.ndarray]
    param_box: Optional[tuple] = None

    def __post_init__(self):
        if self.param_dim < 1:
            raise InvalidArgument("param_dim must be a positive integer")
        if self.param_box is not None:
            lo, hi = (np.asarray(b, dtype=float) for b in self.param_box)
            if lo.shape != (self.param_dim,) or hi.shape != (self.param_dim,):
                raise InvalidArgument("param_box bounds must have length param_dim")
            if not np.all(lo < hi):
                raise InvalidArgument("param_box requires lower < upper per coordinate")
            object.__setattr__(self, "param_box", (lo, hi))

    def clamp(self, theta: np.ndarray) -> np.ndarray:
        if self.param_box is None:
            return theta
        return np.clip(theta, self.param_box[0], self.param_box[1])


@dataclass(frozen=True)
class LogisticGrowthParams:
    N0: float
    Ne: float
    r: float

    def __post_init__(self):
        for name in ("N0", "Ne", "r"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise InvalidArgument(f"{name} must be finite and > 0, got {v!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.N0, self.Ne, self.r], dtype=float)

    @classmethod
    def from_array(cls, theta) -> "LogisticGrowthParams":
        n0, ne, r = (float(v) for v in theta)
        return cls(n0, ne, r)


REFERENCE_OPTIMUM = LogisticGrowthParams(N0=1.1224, Ne=229.9285, r=0.7259)


def _logistic_curve(theta, t):
    n0, ne, r = theta[0], theta[1], theta[2]
    return n0 * ne / (n0 + (ne - n0) * _safe_exp(-r * t))


def logistic_predict(params: LogisticGrowthParams, t):
    """Population ``N0*Ne / (N0 + (Ne - N0) exp(-r t))`` at time ``t`` (days)."""
    with np.errstate(over="ignore", invalid="ignore"):
        out = _logistic_curve(params.as_array(), np.asarray(t, dtype=float))
    if not np.all(np.isfinite(out)):
        raise DomainError(f"logistic model is not finite at t={t!r} for {params}")
    return float(out) if np.ndim(out) == 0 else out


def _logistic_jacobian(theta, t):
    n0, ne, r = theta[0], theta[1], theta[2]
    e = _safe_exp(-r * t)
    d = n0 + (ne - n0) * e
    d2 = d * d
    jac = np.empty((t.shape[0], 3))
    jac[:, 0] = ne * ne * e / d2
    jac[:, 1] = n0 * n0 * (1.0 - e) / d2
    jac[:, 2] = n0 * ne * (ne - n0) * t * e / d2
    return jac


def logistic_growth_model(param_box=None) -> ModelSpec:
    return ModelSpec("logistic_growth", 3, _logistic_curve, _logistic_jacobian, param_box)


def linear_model(intercept: bool = True, param_box=None) -> ModelSpec:
    """``theta[0] + theta[1] x`` or, without intercept, ``theta[0] x``."""
    if intercept:
        return polynomial_model(1, param_box=param_box, name="linear")

    def predict(theta, x):
        return theta[0] * x

    def jacobian(theta, x):
        return np.asarray(x, dtype=float).reshape(-1, 1).copy()

    return ModelSpec("linear", 1, predict, jacobian, param_box)


def polynomial_model(degree: int, param_box=None, name: str = "polynomial") -> ModelSpec:
    """``sum_j theta[j] x**j`` for ``j = 0..degree``."""
    if degree < 0:
        raise InvalidArgument("polynomial degree must be >= 0")

    def predict(theta, x):
        return np.polyval(theta[::-1], x)

    def jacobian(theta, x):
        return np.vander(np.asarray(x, dtype=float), degree + 1, increasing=True)

    return ModelSpec(name, degree + 1, predict, jacobian, param_box)


MODEL_REGISTRY = {
    "logistic_growth": logistic_growth_model,
    "linear": linear_model,
    "polynomial": polynomial_model,
}


def make_model(name: str, **kwargs) -> ModelSpec:
    try:
        factory = MODEL_REGISTRY[name]
    except KeyError:
        raise InvalidArgument(
            f"unknown model {name!r}; choose from {sorted(MODEL_REGISTRY)}"
        ) from None
    return factory(**kwargs)


def _check(model: ModelSpec, theta, dataset):
    if len(dataset) == 0:
        raise InvalidArgument("dataset is empty")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.param_dim,):
        raise InvalidArgument(
            f"theta has shape {theta.shape}, expected ({model.param_dim},)"
        )
    return theta


def residuals(model: ModelSpec, theta, dataset) -> np.ndarray:
    return model.predict(theta, dataset.x) - dataset.y


def quadratic_loss(model: ModelSpec, theta, dataset) -> float:
    """Mean squared residual of ``model`` at ``theta`` over ``dataset``."""
    theta = _check(model, theta, dataset)
    res = residuals(model, theta, dataset)
    return float(np.dot(res, res) / res.shape[0])


def loss_gradient(model: ModelSpec, theta, dataset) -> np.ndarray:
    """Analytic gradient of :func:`quadratic_loss` with respect to ``theta``."""
    theta = _check(model, theta, dataset)
    res = residuals(model, theta, dataset)
    return (2.0 / res.shape[0]) * (model.jacobian(theta, dataset.x).T @ res)


def clip_gradient(g, theta, L_lip: float) -> np.ndarray:
    """Rescale ``g`` so that ``|g|^2 <= L_lip (1 + |theta|^2)``.

    Gradients already inside the growth bound are returned unchanged.
    """
    if not L_lip > 0:
        raise InvalidArgument("L_lip must be positive")
    g = np.asarray(g, dtype=float)
    theta = np.asarray(theta, dtype=float)
    limit_sq = L_lip * (1.0 + float(np.dot(theta, theta)))
    norm_sq = float(np.dot(g, g))
    if norm_sq <= limit_sq:
        return g
    return g * np.sqrt(limit_sq / norm_sq)

