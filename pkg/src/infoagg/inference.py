"""Linear-Gaussian conditioning under a diffuse prior on theta.

Two routes to the same posterior:

* :func:`condition_generic` -- dense conditioning on an arbitrary stack of
  signals. Used as the reference oracle.
* :func:`posterior_theta_report` / :func:`posterior_theta_multi` -- the
  closed forms for a trader who sees a private signal x, report reading(s) y
  and the price signal Z = theta + b * sum_k eps_k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import (DimensionMismatch, NonPositiveDeterminant,
                     SingularCovariance, WrongScenario, ZeroPriceLoading)
from .params import EquilibriumCoefficients, ModelParams, PosteriorBelief

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class JointGaussianObservation:
    """Signals s = loadings @ latents + noise, with a diffuse prior on ``latents[target]``.

    ``latent_cov`` is the covariance of the latents; its row and column for
    the target are ignored. ``return_noise_var`` (sigma_eta^2) is added to the
    posterior variance of the target to give the variance of the return.
    """

    loadings: np.ndarray
    noise_cov: np.ndarray
    observed: np.ndarray
    latent_cov: np.ndarray
    target: int = 0
    return_noise_var: float = 0.0


@dataclass(frozen=True)
class SignalSet:
    x: float
    y: Sequence[float]
    z: float


def condition_generic(obs: JointGaussianObservation) -> PosteriorBelief:
    """Posterior of the target latent given every observed signal.

    The target is eliminated by differencing against an anchor signal (the
    one with the least noise per unit loading); the anchor's noise is then
    conditioned on the theta-free contrasts with a Cholesky solve. This is
    the exact diffuse-prior limit and equals GLS of s on the target loading
    whenever the stacked noise covariance is invertible.
    """
    L = np.atleast_2d(np.asarray(obs.loadings, dtype=float))
    s = np.atleast_1d(np.asarray(obs.observed, dtype=float))
    R = np.atleast_2d(np.asarray(obs.noise_cov, dtype=float))
    V = np.atleast_2d(np.asarray(obs.latent_cov, dtype=float))
    n, k = L.shape
    if s.shape != (n,) or R.shape != (n, n) or V.shape != (k, k):
        raise DimensionMismatch(
            f"loadings {L.shape}, observed {s.shape}, noise_cov {R.shape}, "
            f"latent_cov {V.shape} are inconsistent")
    if not 0 <= obs.target < k:
        raise DimensionMismatch(f"target {obs.target} out of range for {k} latents")
    if not (np.allclose(R, R.T, rtol=0, atol=1e-14 * max(1.0, np.abs(R).max()))
            and np.allclose(V, V.T, rtol=0, atol=1e-14 * max(1.0, np.abs(V).max()))):
        raise SingularCovariance("covariance matrices must be symmetric")

    h = L[:, obs.target]
    rest = np.delete(L, obs.target, axis=1)
    V_rest = np.delete(np.delete(V, obs.target, axis=0), obs.target, axis=1)
    C = rest @ V_rest @ rest.T + R
    C = 0.5 * (C + C.T)

    loaded = np.flatnonzero(h != 0)
    if loaded.size == 0:
        raise SingularCovariance("no signal loads on the target latent")
    a = loaded[np.argmin(np.diag(C)[loaded] / h[loaded] ** 2)]
    if C[a, a] < 0:
        raise SingularCovariance("noise covariance has a negative diagonal entry")
    if C[a, a] == 0:
        # noise-free anchor: theta is read off exactly
        return PosteriorBelief(s[a] / h[a], float(obs.return_noise_var), 1.0)
    if n == 1:
        return PosteriorBelief(s[a] / h[a], C[a, a] / h[a] ** 2 + obs.return_noise_var, 1.0)

    others = np.delete(np.arange(n), a)
    D = np.zeros((n - 1, n))
    D[np.arange(n - 1), others] = 1.0
    D[:, a] = -h[others] / h[a]
    d = D @ s
    S = D @ C @ D.T
    S = 0.5 * (S + S.T)
    cross = (C @ D.T)[a]

    if not np.all(np.isfinite(S)) or np.linalg.cond(S) > MAX_CONDITION:
        raise SingularCovariance("contrast covariance is singular or ill-conditioned")
    try:
        factor = linalg.cho_factor(S, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularCovariance(str(exc)) from exc
    w = linalg.cho_solve(factor, cross)
    mean = (s[a] - w @ d) / h[a]
    var_theta = (C[a, a] - w @ cross) / h[a] ** 2
    log_det = 2.0 * np.sum(np.log(np.diag(factor[0])))
    alpha = h[a] ** 2 * math.exp(log_det)
    return PosteriorBelief(float(mean), float(max(var_theta, 0.0)) + obs.return_noise_var, alpha)


def report_observation(params: ModelParams, b: float, signals: SignalSet) -> JointGaussianObservation:
    """Unreduced stack (x, y_1..y_m, Z) for the m-report economy, in generic form.

    Latents are (theta, eps_1..eps_m). The price signal loads b on every eps_k.
    """
    y = np.atleast_1d(np.asarray(signals.y, dtype=float))
    m = y.size
    n = m + 2
    L = np.zeros((n, m + 1))
    L[:, 0] = 1.0
    L[1:m + 1, 1:] = params.sigma_eps * np.eye(m)
    L[m + 1, 1:] = b
    R = np.zeros((n, n))
    R[0, 0] = params.sigma_x ** 2
    R[1:m + 1, 1:m + 1] = params.sigma_y ** 2 * np.eye(m)
    V = np.eye(m + 1)
    s = np.concatenate([[signals.x], y, [signals.z]])
    return JointGaussianObservation(L, R, s, V, target=0,
                                    return_noise_var=params.sigma_eta ** 2)


def determinant_alpha(params: ModelParams, ratio):
    """Determinant of the covariance of (y - x, Z - x) for one report, b/a = ``ratio``.

    Evaluated as sx2 (ratio - se)^2 + sy^2 (sx2 + ratio^2), a sum of
    non-negative terms; see :func:`expanded_alpha` for the product form.
    """
    sx2 = params.sigma_x ** 2
    return sx2 * (ratio - params.sigma_eps) ** 2 + params.sigma_y ** 2 * (sx2 + ratio ** 2)


def expanded_alpha(params: ModelParams, ratio):
    """(sx2 + se^2 + sy^2)(sx2 + ratio^2) - (sx2 + se ratio)^2; cancels when sy is small."""
    sx2 = params.sigma_x ** 2
    se = params.sigma_eps
    return ((sx2 + se ** 2 + params.sigma_y ** 2) * (sx2 + ratio ** 2)
            - (sx2 + se * ratio) * (sx2 + se * ratio))


def report_weights(params: ModelParams, ratio: float):
    """Weights on (y - x) and (Z - x), Var(theta | x, y, Z) and alpha for one report."""
    alpha = determinant_alpha(params, ratio)
    if not alpha > 0:
        raise NonPositiveDeterminant(f"alpha = {alpha!r} is not positive")
    sx2 = params.sigma_x ** 2
    se = params.sigma_eps
    w_y = ratio * (ratio - se) * sx2 / alpha
    w_z = (params.sigma_y ** 2 + se * (se - ratio)) * sx2 / alpha
    # sx2 - sx2^2 N / alpha with N = ratio^2 - 2 ratio se + se^2 + sy^2 collapses
    # exactly to sx2 sy^2 ratio^2 / alpha; the expanded form cancels badly for large sx
    var_theta = sx2 * params.sigma_y ** 2 * ratio ** 2 / alpha
    return w_y, w_z, var_theta, alpha


def expanded_variance(params: ModelParams, ratio: float) -> float:
    """Var(theta | x, y, Z) written out term by term, before simplification.

    Kept to check :func:`report_weights` against; loses ~1e-10 absolute
    precision when sigma_x is large or sigma_y small.
    """
    sx2 = params.sigma_x ** 2
    se = params.sigma_eps
    alpha = expanded_alpha(params, ratio)
    return sx2 - sx2 ** 2 / alpha * (ratio ** 2 - 2 * ratio * se + se ** 2 + params.sigma_y ** 2)


def _report_belief(params: ModelParams, ratio: float, x, y, z) -> PosteriorBelief:
    w_y, w_z, var_theta, alpha = report_weights(params, ratio)
    mean = x + w_y * (y - x) + w_z * (z - x)
    return PosteriorBelief(mean, var_theta + params.sigma_eta ** 2, alpha)


def posterior_theta_report(params: ModelParams, coeffs: EquilibriumCoefficients,
                           signals: SignalSet) -> PosteriorBelief:
    """Closed-form posterior for one report; signals may hold arrays over agents."""
    if params.publishers != 1:
        raise WrongScenario(f"single-report posterior needs m = 1, got {params.publishers}")
    if coeffs.a == 0:
        raise ZeroPriceLoading("price does not load on theta")
    y = np.asarray(signals.y, dtype=float)
    if y.ndim >= 1 and y.shape[-1] == 1:
        y = y[..., 0]
    return _report_belief(params, coeffs.b / coeffs.a, signals.x, y, signals.z)


def reduced_params(params: ModelParams) -> ModelParams:
    """One-report economy observationally equivalent to the m-report one after averaging reports."""
    m = params.publishers
    if m < 1:
        raise WrongScenario("reduction needs at least one report")
    root = math.sqrt(m)
    return ModelParams(params.sigma_eta, params.sigma_x, params.sigma_eps / root,
                       params.sigma_y / root, params.gamma, params.supply, 1)


def posterior_theta_multi(params: ModelParams, coeffs: EquilibriumCoefficients,
                          signals: SignalSet) -> PosteriorBelief:
    """Posterior given x, m report readings and Z, through the mean reading.

    ``signals.y`` has the m readings on its last axis.
    """
    m = params.publishers
    if m < 1:
        raise WrongScenario("multi-report posterior needs m >= 1")
    if coeffs.a == 0:
        raise ZeroPriceLoading("price does not load on theta")
    y = np.asarray(signals.y, dtype=float)
    if y.ndim == 0 or y.shape[-1] != m:
        raise DimensionMismatch(f"expected {m} readings on the last axis, got shape {y.shape}")
    ybar = y.mean(axis=-1)
    ratio = math.sqrt(m) * coeffs.b / coeffs.a
    return _report_belief(reduced_params(params), ratio, signals.x, ybar, signals.z)
