"""Closed-form variance quantities for hybrid sampling, and Monte-Carlo oracles.

"Variance" of a vector estimator z is the scalar E||z||^2 - ||E z||^2, i.e.
the trace of its covariance.

Notation: the true gradient splits as s_active = ||U_act^T grad||^2 and
s_perp = ||U_perp^T grad||^2 over subspaces of dimensions d_active, d_perp.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

UNBOUNDED = math.inf


@dataclass(frozen=True)
class SubspaceSplit:
    s_active: float
    s_perp: float
    d_active: int
    d_perp: int

    def __post_init__(self):
        if self.s_active < 0 or self.s_perp < 0:
            raise ValueError("squared norms must be nonnegative")
        if self.d_active < 1 or self.d_perp < 1:
            raise ValueError("both subspaces need positive dimension")

    @property
    def grad_norm_sq(self) -> float:
        return self.s_active + self.s_perp

    @property
    def dim(self) -> int:
        return self.d_active + self.d_perp

    @classmethod
    def from_gradient(cls, grad, u_act, u_perp) -> "SubspaceSplit":
        return cls(
            float(np.sum((u_act.T @ grad) ** 2)),
            float(np.sum((u_perp.T @ grad) ** 2)),
            u_act.shape[1],
            u_perp.shape[1],
        )


def _weights(split):
    return split.s_active * (split.d_active + 2), split.s_perp * (split.d_perp + 2)


def gamma_variance(split: SubspaceSplit, p) -> float:
    """(d_a+2)/p s_a + (d_perp+2)/(1-p) s_perp - ||grad||^2."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("p must lie strictly inside (0, 1)")
    wa, wp = _weights(split)
    out = wa / p + wp / (1.0 - p) - split.grad_norm_sq
    return float(out) if out.ndim == 0 else out


def gamma_gradient(split: SubspaceSplit, p: float) -> np.ndarray:
    """Gradient of the loss over the probability pair (p, 1-p), per coordinate."""
    wa, wp = _weights(split)
    return np.array([-wa / p**2, -wp / (1.0 - p) ** 2])


def optimal_p(split: SubspaceSplit) -> float:
    wa, wp = _weights(split)
    if wa == 0 and wp == 0:
        raise ValueError("gradient is zero; optimal p undefined")
    a, b = math.sqrt(wa), math.sqrt(wp)
    return a / (a + b)


def clamped_optimal_p(split: SubspaceSplit, beta: float) -> float:
    # Gamma is convex in p, so the constrained minimizer is the clipped one
    return min(max(optimal_p(split), beta), 1.0 - beta)


def optimal_variance(split: SubspaceSplit) -> float:
    wa, wp = _weights(split)
    if wa == 0 and wp == 0:
        raise ValueError("gradient is zero; optimal variance undefined")
    return (math.sqrt(wa) + math.sqrt(wp)) ** 2 - split.grad_norm_sq


def baseline_variance(split: SubspaceSplit) -> float:
    """Variance (d+1)||grad||^2 of the isotropic one-sample estimator."""
    return (split.dim + 1) * split.grad_norm_sq


def variance_slack(split: SubspaceSplit) -> float:
    """The slack term as printed: |sqrt(s_perp(d_a+2)) - sqrt(s_a(d_perp+2))|^2 - 2||grad||^2.

    It equals ``baseline_variance - optimal_variance`` identically, so it is
    negative exactly when the hybrid optimum is worse than isotropic sampling
    (e.g. s_active / (d_active + 2) = s_perp / (d_perp + 2)).
    """
    a = math.sqrt(split.s_perp * (split.d_active + 2))
    b = math.sqrt(split.s_active * (split.d_perp + 2))
    return (a - b) ** 2 - 2.0 * split.grad_norm_sq


def variance_gap(split: SubspaceSplit) -> float:
    return baseline_variance(split) - optimal_variance(split)


def mc_variance(sample: Callable[[np.random.Generator], np.ndarray], trials: int, rng=None,
                batch: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None):
    """Streaming mean vector and scalar variance E||z||^2 - ||E z||^2.

    ``sample(rng)`` returns one estimate. If ``batch(rng, n)`` is supplied it
    returns ``n`` estimates as rows and is used instead, in chunks.
    Also returns the Monte-Carlo standard error of the variance.
    """
    if trials < 10_000:
        raise ValueError("use at least 1e4 trials")
    rng = np.random.default_rng(0) if rng is None else rng
    total = None
    sq_sum = 0.0
    sq_sq_sum = 0.0
    n = 0
    chunk = 10_000
    while n < trials:
        m = min(chunk, trials - n)
        if batch is not None:
            zs = np.asarray(batch(rng, m), dtype=float)
        else:
            zs = np.array([sample(rng) for _ in range(m)], dtype=float)
        sq = np.sum(zs * zs, axis=1)
        part = zs.sum(axis=0)
        total = part if total is None else total + part
        sq_sum += float(sq.sum())
        sq_sq_sum += float((sq * sq).sum())
        n += m
    mean = total / n
    mean_sq = sq_sum / n
    var = mean_sq - float(mean @ mean)
    stderr = math.sqrt(max(sq_sq_sum / n - mean_sq**2, 0.0) / n)
    return MCResult(mean, var, stderr, n)


@dataclass
class MCResult:
    mean: np.ndarray
    variance: float
    stderr: float
    trials: int

    def __iter__(self):
        yield self.mean
        yield self.variance


@dataclass(frozen=True)
class TheoryConstants:
    lipschitz: float
    tau: float
    precision: float

    def sigma_max(self, d: int, p: float) -> float:
        return sigma_bound(self, d, p)


def sigma_bound(consts: TheoryConstants, d: int, p: float) -> float:
    """(1/35) sqrt(eps min(p, 1-p) / (tau d^3 max(L, 1))); ``UNBOUNDED`` when tau = 0."""
    if consts.tau == 0:
        return UNBOUNDED
    num = consts.precision * min(p, 1.0 - p)
    den = consts.tau * d**3 * max(consts.lipschitz, 1.0)
    return math.sqrt(num / den) / 35.0


BRACKET_UNDEFINED = None


def ratio_bracket(s_active, s_perp, u, epsilon, delta):
    """Interval that holds the estimated ratio with probability >= 1 - delta.

    Returns ``BRACKET_UNDEFINED`` (None) when the lower-side radicand or the
    upper-side denominator is not positive.
    """
    if not 0 < u < 1:
        raise ValueError("u must lie in (0, 1)")
    if s_active <= 0 or s_perp <= 0:
        raise ValueError("s values must be positive")
    slack = 2.0 * epsilon / delta if epsilon else 0.0
    lo_num = s_active * (1 - u) - slack
    hi_den = s_perp * (1 - u) - slack
    if lo_num < 0 or hi_den <= 0:
        return BRACKET_UNDEFINED
    lo = math.sqrt(lo_num / (s_perp * (1 + u) + slack))
    hi = math.sqrt((s_active * (1 + u) + slack) / hi_den)
    return lo, hi


def true_ratio(split: SubspaceSplit) -> float:
    if split.s_perp == 0:
        return math.inf
    return math.sqrt(split.s_active / split.s_perp)


# --- estimators in closed sampling form (for the oracles) -------------------


def isotropic_one_sample(grad_fn, theta, sigma, d):
    """Batch sampler of the isotropic one-sample antithetic estimator (for mc_variance).

    ``grad_fn`` is the objective; each row is ((F(th+sg) - F(th-sg)) / 2s) g.
    """

    def batch(rng, n):
        g = rng.standard_normal((n, d))
        pts = np.concatenate([theta + sigma * g, theta - sigma * g])
        vals = np.asarray(grad_fn(pts), dtype=float)
        v = (vals[:n] - vals[n:]) / (2 * sigma)
        return v[:, None] * g

    return batch


def hybrid_one_sample(fn, theta, sigma, u_act, u_perp, p):
    """Batch sampler of the inverse-covariance-renormalized hybrid estimator."""

    def batch(rng, n):
        a = rng.random(n) < p
        za = rng.standard_normal((n, u_act.shape[1]))
        zp = rng.standard_normal((n, u_perp.shape[1]))
        g = np.where(a[:, None], za @ u_act.T, zp @ u_perp.T)
        pts = np.concatenate([theta + sigma * g, theta - sigma * g])
        vals = np.asarray(fn(pts), dtype=float)
        v = (vals[:n] - vals[n:]) / (2 * sigma)
        w = np.where(a, 1.0 / p, 1.0 / (1.0 - p))
        return (v * w)[:, None] * g

    return batch
