"""Deliberately misspecified Gaussian quasi-likelihood for the diffusion
variance, with the noise variance handled by a frozen plug-in.

The model pretends jumps and drift are absent. With noise, the likelihood is
written in the decorrelated coordinates R with spectrum
lambda_j(theta) = theta*delta + 2*sigma_eps2*(1 - cos(j*pi/(n+1))).
With sigma_eps2 = 0 it collapses to i.i.d. N(0, theta*delta) increments and
the maximizer is the scaled realized quadratic variation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError, DegenerateDataError
from .transform import apply_transform

DEFAULT_THETA_MIN = 1e-6


@dataclass(frozen=True)
class LikelihoodContext:
    """Frozen per-dataset state: increments, their transform, the noise
    plug-in (0 means the no-noise regime) and the parameter bounds."""

    dY: np.ndarray
    R: np.ndarray
    n: int
    delta: float
    sigma_eps2: float
    theta_min: float
    theta_max: float
    one_minus_cos: np.ndarray  # 1 - cos(j*pi/(n+1)), j = 1..n

    @property
    def horizon(self) -> float:
        return self.n * self.delta

    @property
    def sum_sq(self) -> float:
        return float(np.sum(self.dY**2))

    def noise_offsets(self) -> np.ndarray:
        """2 * sigma_eps2 * (1 - cos(j*pi/(n+1))), the theta-free part of lambda_j."""
        return 2.0 * self.sigma_eps2 * self.one_minus_cos


def make_context(
    dY: np.ndarray,
    delta: float,
    sigma_eps2: float | None = None,
    theta_min: float = DEFAULT_THETA_MIN,
    theta_max: float | None = None,
) -> LikelihoodContext:
    """Build a context. ``sigma_eps2=None`` computes the plug-in
    sum(dY^2)/(2n) once and freezes it; pass 0.0 for the no-noise regime."""
    dY = np.asarray(dY, dtype=np.float64)
    n = dY.size
    if n == 0:
        raise ConfigurationError("empty increment vector")
    if delta <= 0:
        raise ConfigurationError("delta must be > 0")
    if sigma_eps2 is None:
        sigma_eps2 = float(np.sum(dY**2) / (2 * n))
    if sigma_eps2 < 0:
        raise ConfigurationError("sigma_eps2 must be >= 0")
    if theta_min <= 0:
        raise ConfigurationError("theta_min must be > 0")
    qv_guess = float(np.sum(dY**2) / (n * delta))
    if theta_max is None:
        theta_max = max(1e3 * qv_guess, 1e4 * theta_min)
    if theta_max <= theta_min:
        raise ConfigurationError("theta_max must exceed theta_min")
    j = np.arange(1, n + 1)
    return LikelihoodContext(
        dY=dY,
        R=apply_transform(dY, delta).R,
        n=n,
        delta=delta,
        sigma_eps2=float(sigma_eps2),
        theta_min=theta_min,
        theta_max=theta_max,
        one_minus_cos=1.0 - np.cos(j * np.pi / (n + 1)),
    )


def _check_theta(theta: float, ctx: LikelihoodContext) -> None:
    if not ctx.theta_min < theta < ctx.theta_max:
        raise ValueError(
            f"theta={theta} outside ({ctx.theta_min}, {ctx.theta_max})"
        )


def loglik(theta: float, ctx: LikelihoodContext) -> float:
    """Quasi-log-likelihood -1/2 sum_j [log lambda_j + R_j^2/lambda_j]."""
    _check_theta(theta, ctx)
    if ctx.sigma_eps2 == 0.0:
        lam = theta * ctx.delta
        return -0.5 * (ctx.n * np.log(lam) + ctx.sum_sq / lam)
    lam = theta * ctx.delta + ctx.noise_offsets()
    return float(-0.5 * np.sum(np.log(lam) + ctx.R**2 / lam))


def score(theta: float, ctx: LikelihoodContext) -> float:
    """Normalized score -(1/2n) sum_j [1/lambda_j - R_j^2/lambda_j^2];
    equals (d loglik/d theta) / horizon, so its scale is n-free."""
    _check_theta(theta, ctx)
    if ctx.sigma_eps2 == 0.0:
        lam = theta * ctx.delta
        return -0.5 / ctx.n * (ctx.n / lam - ctx.sum_sq / lam**2)
    lam = theta * ctx.delta + ctx.noise_offsets()
    return float(-0.5 / ctx.n * np.sum(1.0 / lam - ctx.R**2 / lam**2))


def loglik_hess(theta: float, ctx: LikelihoodContext) -> float:
    """Analytic d^2 loglik / d theta^2 (used for Laplace calibration)."""
    _check_theta(theta, ctx)
    d = ctx.delta
    if ctx.sigma_eps2 == 0.0:
        lam = theta * d
        return 0.5 * ctx.n * (d / lam) ** 2 - ctx.sum_sq * d**2 / lam**3
    lam = theta * d + ctx.noise_offsets()
    return float(np.sum(0.5 * d**2 / lam**2 - ctx.R**2 * d**2 / lam**3))


@dataclass(frozen=True)
class MLEResult:
    theta: float
    score_value: float
    converged: bool
    boundary: bool
    regime: str  # 'no-noise' or 'noise'


def mle(ctx: LikelihoodContext) -> MLEResult:
    """Quasi-MLE of theta.

    No-noise regime: closed form sum(dY^2)/horizon. Noise regime: the score
    is bracketed on a log-spaced grid over (theta_min, theta_max) and the
    root polished by a safeguarded solver; if no sign change exists, the
    better bound is reported with ``boundary=True`` instead of failing.
    """
    if ctx.sigma_eps2 == 0.0:
        ss = ctx.sum_sq
        if ss == 0.0:
            raise DegenerateDataError(
                "all increments are zero; the no-noise MLE (0) lies outside the domain"
            )
        theta = ss / ctx.horizon
        boundary = not (ctx.theta_min < theta < ctx.theta_max)
        sc = 0.0 if boundary else score(theta, ctx)
        return MLEResult(theta, sc, converged=True, boundary=boundary, regime="no-noise")

    lo, hi = ctx.theta_min, ctx.theta_max
    grid = np.geomspace(lo * (1 + 1e-9), hi * (1 - 1e-9), 60)
    vals = np.array([score(t, ctx) for t in grid])
    sign_change = np.nonzero(np.diff(np.sign(vals)) != 0)[0]
    if sign_change.size == 0:
        k = int(np.argmin(np.abs(vals)))
        return MLEResult(
            float(grid[k]), float(vals[k]), converged=False, boundary=True, regime="noise"
        )
    k = int(sign_change[0])
    theta = brentq(lambda t: score(t, ctx), grid[k], grid[k + 1], xtol=1e-14, rtol=8.9e-16)
    return MLEResult(
        float(theta), score(theta, ctx), converged=True, boundary=False, regime="noise"
    )


def fisher_info(theta: float, sigma_eps: float) -> float:
    """Limiting normalized information 1/(8 theta^{3/2} sigma_eps) of the
    noise-regime quasi-likelihood (unit horizon)."""
    if sigma_eps <= 0:
        raise ValueError("fisher_info needs sigma_eps > 0; use the no-noise normal reference instead")
    if theta <= 0:
        raise ValueError("theta must be > 0")
    return 1.0 / (8.0 * theta**1.5 * sigma_eps)
