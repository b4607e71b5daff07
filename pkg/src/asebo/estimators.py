"""Monte-Carlo estimators of the Gaussian-smoothed gradient.

Directions are given at unit scale (rows of ``directions``); every estimator
here evaluates F at ``theta +/- sigma * g`` and owns the division by sigma.
Reductions run over directions in index order so results are reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functions import evaluate_rows
from .sampling import ACTIVE, PERP


class NonFiniteObjective(FloatingPointError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class SingularRenormalization(ZeroDivisionError):
    pass


@dataclass
class GradientEstimate:
    grad: np.ndarray
    n_samples: int
    queries: int
    sigma: float


def _check(values, points):
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise NonFiniteObjective(f"objective returned {values[bad[0]]} at a perturbed point", points[bad[0]])


def _prepare(theta, directions, sigma):
    theta = np.asarray(theta, dtype=float)
    g = np.atleast_2d(np.asarray(directions, dtype=float))
    if g.shape[0] == 0:
        raise ValueError("need at least one direction")
    if g.shape[1] != theta.size:
        raise ValueError(f"directions have dimension {g.shape[1]}, theta has {theta.size}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return theta, g


def antithetic_differences(f, theta, directions, sigma) -> np.ndarray:
    """(F(theta + sigma g_j) - F(theta - sigma g_j)) / (2 sigma) for each row g_j."""
    theta, g = _prepare(theta, directions, sigma)
    k = g.shape[0]
    points = np.concatenate([theta + sigma * g, theta - sigma * g])
    values = evaluate_rows(f, points)
    _check(values, points)
    return (values[:k] - values[k:]) / (2.0 * sigma)


def _weighted_sum(weights, g):
    out = np.zeros(g.shape[1])
    for w, row in zip(weights, g):
        out += w * row
    return out


def antithetic_gradient(f, theta, directions, sigma) -> GradientEstimate:
    _, g = _prepare(theta, directions, sigma)
    k = g.shape[0]
    diffs = antithetic_differences(f, theta, g, sigma)
    return GradientEstimate(_weighted_sum(diffs, g) / k, k, 2 * k, float(sigma))


def forward_fd_gradient(f, theta, directions, sigma) -> GradientEstimate:
    theta, g = _prepare(theta, directions, sigma)
    k = g.shape[0]
    points = np.concatenate([theta[None, :], theta + sigma * g])
    values = evaluate_rows(f, points)
    _check(values, points)
    diffs = (values[1:] - values[0]) / sigma
    return GradientEstimate(_weighted_sum(diffs, g) / k, k, k + 1, float(sigma))


def asebo_renormalized_gradient(f, theta, direction, branch, sampler, sigma) -> np.ndarray:
    """One-sample antithetic estimate premultiplied by the inverse sampling covariance.

    The inverse of p U_act U_act^T + (1-p) U_perp U_perp^T scales the active
    component by 1/p and the orthogonal one by 1/(1-p).
    """
    p = sampler.p_active
    weight = p if branch == ACTIVE else 1.0 - p
    if branch not in (ACTIVE, PERP):
        raise ValueError("branch must be ACTIVE or PERP")
    if weight == 0.0:
        raise SingularRenormalization("sampled branch has zero probability")
    g = np.asarray(direction, dtype=float)
    v = antithetic_differences(f, theta, g[None, :], sigma)[0]
    return apply_inverse_covariance(v * g, sampler.subspace, p)


def apply_inverse_covariance(x, sub, p):
    ua, up = sub.u_act, sub.u_perp
    out = np.zeros_like(x)
    if p > 0:
        out += ua @ (ua.T @ x) / p
    if p < 1:
        out += up @ (up.T @ x) / (1.0 - p)
    return out
