"""Exogenous parameters and the shared value types of the market model."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .errors import NegativePublishers, NegativeStdDev, NonPositiveStdDev


@dataclass(frozen=True)
class ModelParams:
    """All exogenous scalars of the economy.

    sigma_eta : std. dev. of the unlearnable return component
    sigma_x   : std. dev. of each trader's private-signal noise
    sigma_eps : std. dev. of the common error in a published report
    sigma_y   : std. dev. of each trader's idiosyncratic reading of a report
    gamma     : absolute risk aversion
    supply    : per-capita share supply K
    publishers: number of published reports m (0 = no reports)
    """

    sigma_eta: float = 1.0
    sigma_x: float = 1.0
    sigma_eps: float = 1.0
    sigma_y: float = 1.0
    gamma: float = 1.0
    supply: float = 1.0
    publishers: int = 1

    def with_publishers(self, m: int) -> "ModelParams":
        return replace(self, publishers=m)

    @property
    def is_degenerate_report(self) -> bool:
        """True when a report reads as theta exactly (no common, no reading noise)."""
        return self.publishers >= 1 and self.sigma_eps == 0 and self.sigma_y == 0


def validate(params: ModelParams) -> ModelParams:
    for name in ("sigma_eta", "sigma_x", "gamma"):
        v = getattr(params, name)
        if not (v > 0 and math.isfinite(v)):
            raise NonPositiveStdDev(f"{name} must be positive and finite, got {v!r}")
    for name in ("sigma_eps", "sigma_y"):
        v = getattr(params, name)
        if not (v >= 0 and math.isfinite(v)):
            raise NegativeStdDev(f"{name} must be nonnegative and finite, got {v!r}")
    if not math.isfinite(params.supply):
        raise NonPositiveStdDev(f"supply must be finite, got {params.supply!r}")
    if int(params.publishers) != params.publishers or params.publishers < 0:
        raise NegativePublishers(
            f"publishers must be a nonnegative integer, got {params.publishers!r}")
    return params


@dataclass(frozen=True)
class Precision:
    """Precision of a signal: finite and positive, or infinite (fully revealing).

    The infinite state is a tag, never an IEEE inf, so downstream arithmetic
    has to branch on ``is_infinite`` explicitly.
    """

    value: Optional[float] = None

    def __post_init__(self):
        if self.value is not None and not (self.value > 0 and math.isfinite(self.value)):
            raise ValueError(f"finite precision must be positive, got {self.value!r}")

    @classmethod
    def finite(cls, value: float) -> "Precision":
        return cls(float(value))

    @classmethod
    def infinite(cls) -> "Precision":
        return cls(None)

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    def __str__(self) -> str:
        return "inf" if self.value is None else repr(self.value)


def precision_of(sigma: float) -> Precision:
    if sigma < 0:
        raise NegativeStdDev(f"standard deviation must be nonnegative, got {sigma!r}")
    if sigma == 0:
        return Precision.infinite()
    return Precision.finite(1.0 / (sigma * sigma))


@dataclass(frozen=True)
class EquilibriumCoefficients:
    """Price function P = a*theta + b*sum_k eps_k + c and the implied posterior variance.

    ``posterior_variance`` is Var(theta + eta | private signal, reports, price).
    """

    a: float
    b: float
    c: float
    posterior_variance: float


@dataclass(frozen=True)
class PosteriorBelief:
    """Conditional mean of theta, conditional variance of the return theta + eta,
    and the determinant of the covariance of the theta-free signal contrasts.

    ``mean`` may be a numpy array when the belief is evaluated for many agents.
    """

    mean: object
    variance_return: float
    determinant_alpha: float
