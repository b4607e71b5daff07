"""Adaptive choice of the probability of sampling from the active subspace.

``bandit_explore`` runs exponentiated-gradient (mirror descent) updates of
q over the 2-simplex, using one antithetic probe per round as a stochastic
gradient of the variance loss. ``cs_ratio_explore`` instead estimates the
ratio ||grad_active|| / ||grad_perp|| from paired probes in both subspaces.

Probes perturb theta by sigma * U z with standard z, and divide by 2 sigma.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, logit

from .functions import evaluate_rows
from .linalg import ActiveSubspace

INFINITE_RATIO = math.inf


@dataclass
class ExplorerState:
    q: float = 0.1
    beta: float = 0.1
    alpha: float = 0.01
    horizon: int = 10
    sigma: float = 0.01
    history: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError("q must lie in [0, 1]")
        if not 0.0 < self.beta < 0.5:
            raise ValueError("beta must lie in (0, 0.5)")
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def p(self) -> float:
        return (1.0 - 2.0 * self.beta) * self.q + self.beta

    @property
    def rounds(self) -> int:
        return self.horizon + 1

    @property
    def p_trace(self) -> np.ndarray:
        return np.array([h[2] for h in self.history])


LOGIT_CAP = 35.0


def exponentiated_update(q: float, e: np.ndarray, alpha: float) -> float:
    """q exp(-a e1) / (q exp(-a e1) + (1-q) exp(-a e2)), computed in logit space.

    The logit is capped at +/-35 so q never rounds to exactly 0 or 1, where
    the multiplicative update could no longer move it.
    """
    step = alpha * (e[0] - e[1])
    if step == 0.0:
        return q
    z = float(np.clip(logit(q) - step, -LOGIT_CAP, LOGIT_CAP))
    return float(expit(z))


def stochastic_gradient(a: int, v: float, p: float, beta: float, d_active: int, d_perp: int) -> np.ndarray:
    """One-probe estimate of the loss gradient with respect to q."""
    scale = (1.0 - 2.0 * beta) * v * v
    return scale * np.array([
        -a * (d_active + 2) / p**3,
        -(1 - a) * (d_perp + 2) / (1.0 - p) ** 3,
    ])


def _probe(f, theta, u, sigma, rng):
    g = u @ rng.standard_normal(u.shape[1])
    vals = evaluate_rows(f, np.stack([theta + sigma * g, theta - sigma * g]))
    v = (vals[0] - vals[1]) / (2.0 * sigma)
    if not math.isfinite(v):
        raise FloatingPointError("non-finite probe value")
    return v


def _require_both(sub):
    if sub.active_dim == 0 or sub.perp_dim == 0:
        raise ValueError("exploration needs both subspaces to be nonempty")


def bandit_explore(f, theta, sub: ActiveSubspace, state: ExplorerState, rng: np.random.Generator):
    """Run horizon + 1 probe rounds; return (final p, updated state).

    Costs 2 * (horizon + 1) evaluations of ``f``.
    """
    _require_both(sub)
    theta = np.asarray(theta, dtype=float)
    q = state.q
    history = list(state.history)
    for _ in range(state.rounds):
        p = (1.0 - 2.0 * state.beta) * q + state.beta
        a = int(rng.random() < p)
        v = _probe(f, theta, sub.u_act if a else sub.u_perp, state.sigma, rng)
        e = stochastic_gradient(a, v, p, state.beta, sub.active_dim, sub.perp_dim)
        q = exponentiated_update(q, e, state.alpha)
        history.append((a, v, p))
    new = replace(state, q=q, history=history)
    return new.p, new


@dataclass
class RatioEstimate:
    s_active_hat: float
    s_perp_hat: float
    probes_used: int

    @property
    def r_hat(self) -> float:
        if self.s_perp_hat <= 0.0:
            return INFINITE_RATIO
        return math.sqrt(self.s_active_hat / self.s_perp_hat)


def cs_ratio_explore(f, theta, sub: ActiveSubspace, horizon: int, sigma: float,
                     rng: np.random.Generator, record=None) -> RatioEstimate:
    """Running means of squared probe values in each subspace over ``horizon`` rounds.

    Costs 4 * horizon evaluations. ``record``, if given, receives every
    (v_active, v_perp) pair.
    """
    _require_both(sub)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    theta = np.asarray(theta, dtype=float)
    s_act = s_perp = 0.0
    for l in range(1, horizon + 1):
        va = _probe(f, theta, sub.u_act, sigma, rng)
        vp = _probe(f, theta, sub.u_perp, sigma, rng)
        s_act = (l - 1) / l * s_act + va * va / l
        s_perp = (l - 1) / l * s_perp + vp * vp / l
        if record is not None:
            record.append((va, vp))
    return RatioEstimate(s_act, s_perp, 4 * horizon)


def ratio_to_probability(r_hat: float) -> float:
    if r_hat < 0 or math.isnan(r_hat):
        raise ValueError("ratio must be nonnegative")
    if math.isinf(r_hat):
        return 1.0
    return r_hat / (r_hat + 1.0)


def theorem_learning_rate(beta: float, horizon: int, d_active: int, d_perp: int,
                          s_active: float, s_perp: float) -> float:
    """2 beta^2 / sqrt(C [(d_a+2)^2 s_a^2 + (d_perp+2) s_perp^2]), as printed."""
    g = (d_active + 2) ** 2 * s_active**2 + (d_perp + 2) * s_perp**2
    if g <= 0.0:
        raise ValueError("learning rate undefined for a zero gradient")
    return 2.0 * beta**2 / math.sqrt(horizon * g)


def plugin_learning_rate(beta: float, horizon: int, sub: ActiveSubspace, grad_estimate,
                         scale: float = 1.0):
    """``scale`` times the theorem rate with s_active, s_perp read off a gradient estimate.

    The probe losses grow like ||grad||^2, so a fixed rate is only meaningful
    at one gradient scale; this plug-in keeps the step size scale-free.
    Returns None when the estimate is zero.
    """
    g = np.asarray(grad_estimate, dtype=float)
    s_act = float(np.sum((sub.u_act.T @ g) ** 2))
    s_perp = float(np.sum((sub.u_perp.T @ g) ** 2))
    if s_act + s_perp == 0.0:
        return None
    return scale * theorem_learning_rate(beta, horizon, sub.active_dim, sub.perp_dim, s_act, s_perp)
