"""Sensing directions from the hybrid active/orthogonal distribution.

V1 draws each direction from exactly one of the two subspaces (a Bernoulli
coin with success probability ``p_active`` picks which). V0 draws from the
single Gaussian N(0, ((1-p)/d) I + (p/r) U U^T).

Directions are produced at unit scale; the smoothing radius sigma is applied
by the estimators when they perturb the parameters.

All randomness comes from a ``numpy.random.Generator`` (PCG64). Streams are
reproducible for a given seed and numpy's PCG64 implementation.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from .linalg import ActiveSubspace

log = logging.getLogger(__name__)

ACTIVE, PERP, MIXED = 1, 0, -1


class Variant(str, enum.Enum):
    V0 = "v0"
    V1 = "v1"


class InvalidMixture(ValueError):
    pass


class DegenerateDirection(ValueError):
    pass


def feasible_probability(p: float, sub: ActiveSubspace) -> float:
    """Clamp ``p`` to the only feasible endpoint when one subspace is empty."""
    if not 0.0 <= p <= 1.0:
        raise InvalidMixture(f"p_active={p} outside [0, 1]")
    if sub.perp_dim == 0 and p < 1.0:
        log.warning("orthogonal complement is empty; sampling only the active subspace")
        return 1.0
    if sub.active_dim == 0 and p > 0.0:
        log.warning("active subspace is empty; sampling only the complement")
        return 0.0
    return p


@dataclass
class HybridSampler:
    subspace: ActiveSubspace
    p_active: float
    variant: Variant = Variant.V1
    rng: np.random.Generator = None

    def __post_init__(self):
        self.variant = Variant(self.variant)
        if self.rng is None:
            self.rng = np.random.default_rng()
        self.p_active = feasible_probability(float(self.p_active), self.subspace)

    def covariance(self) -> np.ndarray:
        """Second moment E[g g^T] of one draw."""
        ua, up, p = self.subspace.u_act, self.subspace.u_perp, self.p_active
        if self.variant is Variant.V1:
            return p * ua @ ua.T + (1.0 - p) * up @ up.T
        d, r = self.subspace.dim, self.subspace.active_dim
        return (1.0 - p) / d * np.eye(d) + p / r * ua @ ua.T

    def sample_directions(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``count`` directions as rows, plus the branch label of each.

        Labels are ``ACTIVE``/``PERP`` under V1 and ``MIXED`` under V0.
        """
        if count < 1:
            raise ValueError("count must be positive")
        sub, p, rng = self.subspace, self.p_active, self.rng
        d, r = sub.dim, sub.active_dim
        if self.variant is Variant.V0:
            if r == 0:
                raise InvalidMixture("V0 needs a nonempty active subspace")
            w = rng.standard_normal((count, d))
            z = rng.standard_normal((count, r))
            g = np.sqrt((1.0 - p) / d) * w + np.sqrt(p / r) * z @ sub.u_act.T
            return g, np.full(count, MIXED)

        labels = (rng.random(count) < p).astype(int)
        g = np.empty((count, d))
        for i, a in enumerate(labels):
            u = sub.u_act if a == ACTIVE else sub.u_perp
            if u.shape[1] == 0:
                raise InvalidMixture("drew a branch whose subspace is empty")
            g[i] = u @ rng.standard_normal(u.shape[1])
        return g, labels


def chi_renormalize(g, ambient_dim: int, rng: np.random.Generator) -> np.ndarray:
    """Rescale ``g`` so its norm is a fresh chi(ambient_dim) draw."""
    g = np.asarray(g, dtype=float)
    norm = np.linalg.norm(g)
    if norm == 0.0:
        raise DegenerateDirection("cannot renormalize the zero vector")
    rho = np.linalg.norm(rng.standard_normal(ambient_dim))
    return g * (rho / norm)


def chi_renormalize_rows(gs: np.ndarray, ambient_dim: int, rng: np.random.Generator) -> np.ndarray:
    return np.array([chi_renormalize(g, ambient_dim, rng) for g in gs])
