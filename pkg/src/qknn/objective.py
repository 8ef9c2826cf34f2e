"""Loss functions and evaluation metrics.

pinball: the asymmetric absolute deviation whose population minimizer is the
tau-quantile.  quantile_objective: pinball data fit plus the graph
total-variation penalty.  dn2_loss: a Huber-like discrepancy, the mean of
min(|d_i|, d_i^2).
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, ParameterError
from .graph import KnnGraph, incidence_apply


def check_quantile_level(tau: float) -> float:
    if not (0.0 < tau < 1.0):
        raise ParameterError(f"tau={tau} must lie in (0, 1)")
    return float(tau)


def pinball(t, tau: float):
    """(tau - 1{t <= 0}) * t, elementwise; zero at t = 0, nonnegative."""
    tau = check_quantile_level(tau)
    t = np.asarray(t, dtype=float)
    out = (tau - (t <= 0)) * t
    return out if out.ndim else float(out)


def pinball_sum(residuals: np.ndarray, tau: float) -> float:
    """Sum of pinball losses over a residual vector."""
    return float(np.sum(pinball(residuals, tau)))


def quantile_objective(
    y: np.ndarray, theta: np.ndarray, tau: float, lam: float, G: KnnGraph
) -> float:
    """Penalized objective: sum_i pinball(y_i - theta_i) + lam * ||grad theta||_1."""
    y = np.asarray(y, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if y.shape != theta.shape:
        raise DimensionError(f"y {y.shape} vs theta {theta.shape}")
    if lam < 0:
        raise ParameterError(f"lam={lam} must be >= 0")
    fit = pinball_sum(y - theta, tau)
    penalty = lam * float(np.sum(np.abs(incidence_apply(G, theta))))
    return fit + penalty


def dn2_loss(delta: np.ndarray, normalized: bool = True) -> float:
    """Mean of min(|d_i|, d_i^2); with normalized=False the plain sum."""
    delta = np.abs(np.asarray(delta, dtype=float))
    total = float(np.sum(np.minimum(delta, delta**2)))
    return total / delta.size if normalized else total


def mse(theta_hat: np.ndarray, theta_star: np.ndarray) -> float:
    """Mean squared error between an estimate and the true quantile vector."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    theta_star = np.asarray(theta_star, dtype=float)
    if theta_hat.shape != theta_star.shape:
        raise DimensionError(f"{theta_hat.shape} vs {theta_star.shape}")
    return float(np.mean((theta_hat - theta_star) ** 2))
