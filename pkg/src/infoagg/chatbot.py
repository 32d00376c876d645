"""A chatbot that learns theta from the questions it is asked.

Agents phrase queries q_i = f(x_i) from their private signals. If f is
invertible the chatbot recovers every x_i and averages them, learning
theta. It answers with AI_i = theta + sigma_eps * eps + sigma_tau * tau_i,
so its users stay strictly less informed than it is.

The query maps (affine, logistic) and the way answers enter a trader's
information set are modelling choices made here, not given by the model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np
from scipy import special

from . import rng
from .equilibrium import solve_report
from .errors import InversionConditioningError, NonInvertibleQueryMap
from .inference import JointGaussianObservation, condition_generic
from .params import ModelParams, validate


@dataclass(frozen=True)
class AffineQuery:
    p: float = 2.0
    q: float = 1.0

    def check(self):
        if self.p == 0 or not math.isfinite(self.p):
            raise NonInvertibleQueryMap("affine query map needs p != 0")

    def forward(self, x):
        return self.p * np.asarray(x) + self.q

    def inverse(self, query):
        return (np.asarray(query) - self.q) / self.p


@dataclass(frozen=True)
class LogisticQuery:
    scale: float = 10.0
    limit: float = 30.0     # in units of scale

    def check(self):
        if not self.scale > 0:
            raise NonInvertibleQueryMap("logistic query map needs scale > 0")

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(np.abs(x) > self.limit * self.scale):
            raise InversionConditioningError(
                f"logistic queries beyond +/-{self.limit} * scale cannot be inverted reliably")
        return special.expit(x / self.scale)

    def inverse(self, query):
        return self.scale * special.logit(np.asarray(query, dtype=float))


QueryMap = Union[AffineQuery, LogisticQuery]


@dataclass(frozen=True)
class ChatbotConfig:
    n_agents: int = 1_000_000
    query_map: QueryMap = field(default_factory=AffineQuery)
    sigma_tau_answer: float = 1.0
    params: ModelParams = field(default_factory=ModelParams)
    theta: float = 5.0
    seed: int = 0


@dataclass(frozen=True)
class ChatbotReport:
    max_inversion_error: float
    theta_hat: float
    abs_error: float
    clt_sd: float               # sigma_x / sqrt(n)
    trader_variance: float
    chatbot_variance: float


def _trader_variance(config: ChatbotConfig) -> float:
    """Var(theta + eta | x_i, AI_i, Z) for a trader who uses the chatbot's answer.

    The price signal is taken from the one-report economy in which the
    answer plays the report (reading noise sigma_tau). When the answer is
    an exact copy of Z (sigma_tau = 0), Z is dropped as redundant.
    """
    p = config.params
    s_tau = config.sigma_tau_answer
    econ = replace(p, sigma_y=s_tau, publishers=1)
    coeffs, _ = solve_report(econ)
    rows = [[1.0, 0.0], [1.0, p.sigma_eps]]
    noise = [p.sigma_x ** 2, s_tau ** 2]
    if s_tau > 0:
        rows.append([1.0, coeffs.b])
        noise.append(0.0)
    obs = JointGaussianObservation(np.array(rows), np.diag(noise), np.zeros(len(rows)),
                                   np.eye(2), 0, p.sigma_eta ** 2)
    return condition_generic(obs).variance_return


def chatbot_demo(config: ChatbotConfig, trial: int = 0) -> ChatbotReport:
    validate(config.params)
    config.query_map.check()
    p = config.params
    xi = rng.stream(config.seed, trial, rng.PRIVATE).standard_normal(config.n_agents)
    x = config.theta + p.sigma_x * xi
    queries = config.query_map.forward(x)
    recovered = config.query_map.inverse(queries)
    theta_hat = float(np.mean(recovered))
    return ChatbotReport(
        max_inversion_error=float(np.max(np.abs(recovered - x))),
        theta_hat=theta_hat,
        abs_error=abs(theta_hat - config.theta),
        clt_sd=p.sigma_x / math.sqrt(config.n_agents),
        trader_variance=_trader_variance(config),
        chatbot_variance=p.sigma_eta ** 2,
    )


def chatbot_answers(config: ChatbotConfig, trial: int = 0) -> np.ndarray:
    """AI_i = theta + sigma_eps * eps + sigma_tau * tau_i for every agent."""
    p = config.params
    eps = rng.stream(config.seed, trial, rng.COMMON).standard_normal()
    tau = rng.stream(config.seed, trial, rng.ANSWER).standard_normal(config.n_agents)
    return config.theta + p.sigma_eps * eps + config.sigma_tau_answer * tau
