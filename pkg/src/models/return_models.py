"""
Rate-of-return / constraint-probability families.

A ReturnModel bundles the review rate of return r(x) and the constraint
probability p(x) as functions of the slackness x, with analytic first and
second derivatives. Models are frozen dataclasses; the domain endpoint
mu_t_s (total service capacity) is attached by GameConfig when the team is
known, so the same parameter set can be reused across sampled teams.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, Optional

import numpy as np

from src.models.errors import ConfigError, StructuralError


class ReturnModel(ABC):
    """Abstract (r, p) pair over the slackness parameter x."""

    family: str = "abstract"
    mu_t_s: Optional[float] = None

    @property
    def endpoint(self) -> float:
        if self.mu_t_s is None:
            raise StructuralError(f"{type(self).__name__} has no domain endpoint; attach it with with_endpoint()")
        return self.mu_t_s

    def with_endpoint(self, mu_t_s: float) -> 'ReturnModel':
        return replace(self, mu_t_s=float(mu_t_s))

    @abstractmethod
    def r(self, x: float) -> float:
        ...

    @abstractmethod
    def dr(self, x: float) -> float:
        ...

    @abstractmethod
    def d2r(self, x: float) -> float:
        ...

    @abstractmethod
    def p(self, x: float) -> float:
        ...

    @abstractmethod
    def dp(self, x: float) -> float:
        ...

    @abstractmethod
    def d2p(self, x: float) -> float:
        ...

    @abstractmethod
    def r_array(self, x: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def p_array(self, x: np.ndarray) -> np.ndarray:
        ...

    def parameters(self) -> Dict[str, Any]:
        params = asdict(self)
        params.pop('mu_t_s', None)
        return params

    def to_dict(self) -> Dict[str, Any]:
        return {'family': self.family, **self.parameters()}


@dataclass(frozen=True)
class ExponentialModel(ReturnModel):
    """
    r(x) = A * (1 - exp(B * (x - mu_T^S)))
    p(x) = exp(-B * x) for x > 0, 1 otherwise

    Defaults are the A = 5, B = 0.5 instance used in the heterogeneity
    experiments. The incentive peaks at x = mu_T^S / 2 for any A, B > 0.
    """

    A: float = 5.0
    B: float = 0.5
    mu_t_s: Optional[float] = None

    family = "exponential"

    def r(self, x: float) -> float:
        return self.A * (1.0 - math.exp(self.B * (x - self.endpoint)))

    def dr(self, x: float) -> float:
        return -self.A * self.B * math.exp(self.B * (x - self.endpoint))

    def d2r(self, x: float) -> float:
        return -self.A * self.B * self.B * math.exp(self.B * (x - self.endpoint))

    def p(self, x: float) -> float:
        if x <= 0.0:
            return 1.0
        return math.exp(-self.B * x)

    def dp(self, x: float) -> float:
        if x <= 0.0:
            return 0.0
        return -self.B * math.exp(-self.B * x)

    def d2p(self, x: float) -> float:
        if x <= 0.0:
            return 0.0
        return self.B * self.B * math.exp(-self.B * x)

    def r_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.A * (1.0 - np.exp(self.B * (x - self.endpoint)))

    def p_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        # clip keeps exp() finite on the plateau, where the value is discarded anyway
        return np.where(x > 0.0, np.exp(-self.B * np.clip(x, 0.0, None)), 1.0)


@dataclass(frozen=True)
class RationalModel(ReturnModel):
    """
    With u = x / mu_T^S:

        r(x) = A * (1 - u) * (1 + C + u)
        p(x) = 1 / (1 + B * x) for x > 0, 1 otherwise

    r is a concave quadratic with r(mu_T^S) = 0 and p has a hyperbolic tail,
    so the incentive peak generally sits away from mu_T^S / 2.
    """

    A: float = 5.0
    B: float = 0.5
    C: float = 1.0
    mu_t_s: Optional[float] = None

    family = "rational"

    def r(self, x: float) -> float:
        u = x / self.endpoint
        return self.A * (1.0 - u) * (1.0 + self.C + u)

    def dr(self, x: float) -> float:
        mu = self.endpoint
        return -self.A * (self.C + 2.0 * x / mu) / mu

    def d2r(self, x: float) -> float:
        mu = self.endpoint
        return -2.0 * self.A / (mu * mu)

    def p(self, x: float) -> float:
        if x <= 0.0:
            return 1.0
        return 1.0 / (1.0 + self.B * x)

    def dp(self, x: float) -> float:
        if x <= 0.0:
            return 0.0
        d = 1.0 + self.B * x
        return -self.B / (d * d)

    def d2p(self, x: float) -> float:
        if x <= 0.0:
            return 0.0
        d = 1.0 + self.B * x
        return 2.0 * self.B * self.B / (d * d * d)

    def r_array(self, x: np.ndarray) -> np.ndarray:
        u = np.asarray(x, dtype=float) / self.endpoint
        return self.A * (1.0 - u) * (1.0 + self.C + u)

    def p_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x > 0.0, 1.0 / (1.0 + self.B * np.clip(x, 0.0, None)), 1.0)


MODEL_FAMILIES = {
    ExponentialModel.family: ExponentialModel,
    RationalModel.family: RationalModel,
}


def build_return_model(family: str, **params: float) -> ReturnModel:
    """Instantiate a model family by name, e.g. build_return_model('exponential', A=5, B=0.5)."""
    try:
        model_cls = MODEL_FAMILIES[family]
    except KeyError:
        raise ConfigError(f"Unknown return model family '{family}' (expected one of {sorted(MODEL_FAMILIES)})",
                          field='model.family')
    return model_cls(**{k: float(v) for k, v in params.items()})
