"""GARCH(1,1) with Gaussian maximum likelihood.

    sigma2[i] = omega + alpha * r[i-1]^2 + beta * sigma2[i-1],  sigma2[0] = var(r)

The optimizer is a derivative-free Nelder-Mead simplex over an
unconstrained reparameterization: omega = exp(a), alpha + beta =
sigmoid(b), alpha share = sigmoid(c). That enforces omega > 0,
alpha, beta >= 0 and alpha + beta < 1 without clipping. The variance
recursion runs as an exact IIR filter, so likelihood evaluations are
vectorized and deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from ..errors import DegenerateSeries

MIN_OBS = 50


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float
    converged: bool = True
    loglik: float = float("nan")

    def __post_init__(self) -> None:
        if self.omega <= 0.0 or self.alpha < 0.0 or self.beta < 0.0:
            raise ValueError("omega must be > 0; alpha, beta >= 0")
        if self.alpha + self.beta >= 1.0:
            raise ValueError("alpha + beta must be < 1")

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.persistence)


def variance_path(
    omega: float, alpha: float, beta: float, returns: np.ndarray,
    sigma2_0: float | None = None,
) -> np.ndarray:
    """sigma2[i] for every observation, sigma2[0] = var(returns) by default."""
    r = np.asarray(returns, dtype=np.float64)
    if r.size == 0:
        return np.empty(0)
    if sigma2_0 is None:
        sigma2_0 = float(r.var())
    out = np.empty(r.size)
    out[0] = sigma2_0
    if r.size > 1:
        u = omega + alpha * r[:-1] ** 2
        # sigma2[i] - beta*sigma2[i-1] = u[i-1]  ->  IIR filter with state
        out[1:], _ = lfilter([1.0], [1.0, -beta], u, zi=[beta * sigma2_0])
    return out


def _neg_loglik(theta: np.ndarray, r: np.ndarray, sigma2_0: float) -> float:
    omega, alpha, beta = _transform(theta)
    sig2 = variance_path(omega, alpha, beta, r, sigma2_0)
    if not np.isfinite(sig2).all() or (sig2 <= 0.0).any():
        return 1e100
    ll = -0.5 * np.sum(np.log(2.0 * math.pi * sig2) + r * r / sig2)
    if not math.isfinite(ll):
        return 1e100
    return -float(ll)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _transform(theta: np.ndarray) -> tuple[float, float, float]:
    omega = math.exp(float(np.clip(theta[0], -700.0, 700.0)))
    persistence = _sigmoid(float(theta[1]))
    share = _sigmoid(float(theta[2]))
    alpha = persistence * share
    beta = persistence * (1.0 - share)
    return omega, alpha, beta


def _inverse_transform(omega: float, alpha: float, beta: float) -> np.ndarray:
    p = min(max(alpha + beta, 1e-8), 1.0 - 1e-8)
    s = min(max(alpha / p, 1e-8), 1.0 - 1e-8)
    logit = lambda x: math.log(x / (1.0 - x))
    return np.array([math.log(omega), logit(p), logit(s)])


def garch_fit(
    returns: np.ndarray,
    init: GarchParams | None = None,
    max_iter: int = 2000,
) -> GarchParams:
    """Fit by Gaussian MLE; deterministic given init and data.

    Raises DegenerateSeries on zero-variance input. On hitting max_iter the
    best-so-far parameters come back with converged=False.
    """
    r = np.asarray(returns, dtype=np.float64)
    if r.size < MIN_OBS:
        raise ValueError(f"need at least {MIN_OBS} returns, got {r.size}")
    var = float(r.var())
    if var <= 0.0:
        raise DegenerateSeries("zero-variance return series")

    if init is not None:
        theta0 = _inverse_transform(init.omega, init.alpha, init.beta)
    else:
        theta0 = _inverse_transform(omega=0.05 * var, alpha=0.10, beta=0.85)

    res = minimize(
        _neg_loglik,
        theta0,
        args=(r, var),
        method="Nelder-Mead",
        options={
            "maxiter": max_iter,
            "xatol": 1e-6,
            "fatol": 1e-8,
            "adaptive": False,
        },
    )
    omega, alpha, beta = _transform(res.x)
    return GarchParams(
        omega=omega,
        alpha=alpha,
        beta=beta,
        converged=bool(res.success),
        loglik=-float(res.fun),
    )


def forecast_variances(
    params: GarchParams, returns: np.ndarray, horizon_steps: int
) -> np.ndarray:
    """sigma2 for steps +1..+h after the end of `returns`."""
    if horizon_steps < 1:
        raise ValueError("horizon must be at least one step")
    r = np.asarray(returns, dtype=np.float64)
    sig2 = variance_path(params.omega, params.alpha, params.beta, r)
    s1 = params.omega + params.alpha * float(r[-1]) ** 2 + params.beta * float(sig2[-1])
    return variances_from_first_step(params, s1, horizon_steps)


def variances_from_first_step(
    params: GarchParams, sigma2_1: float, horizon_steps: int
) -> np.ndarray:
    """sigma2[+k] = omega * sum_{j<k-1} p^j + p^(k-1) * sigma2[+1]."""
    p = params.persistence
    k = np.arange(horizon_steps, dtype=np.float64)  # k = step-1
    pk = np.power(p, k)
    if p == 1.0:  # unreachable under the params invariant, kept for safety
        geo = k
    else:
        geo = (1.0 - pk) / (1.0 - p)
    return params.omega * geo + pk * sigma2_1


def garch_forecast(
    params: GarchParams, returns: np.ndarray, horizon_steps: int
) -> float:
    """Horizon realized-volatility forecast: sqrt of summed step variances."""
    return float(math.sqrt(forecast_variances(params, returns, horizon_steps).sum()))


def simulate_garch11(
    omega: float, alpha: float, beta: float, n: int, seed: int, burn: int = 500
) -> np.ndarray:
    """Simulate a stationary GARCH(1,1) return path (Gaussian innovations)."""
    GarchParams(omega, alpha, beta)  # validate domain
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n + burn)
    r = np.empty(n + burn)
    sig2 = omega / (1.0 - alpha - beta)
    for i in range(n + burn):
        r[i] = math.sqrt(sig2) * z[i]
        sig2 = omega + alpha * r[i] * r[i] + beta * sig2
    return r[burn:]
