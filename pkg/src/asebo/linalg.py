"""Decaying gradient covariance kept in eigendecomposition form.

Convention: ``eigvecs`` stores eigenvectors as COLUMNS, so the covariance is
``eigvecs @ diag(eigvals) @ eigvecs.T``.

The update ``decay * Cov + (1 - decay) * x x^T`` is done in the current
eigenbasis, where it becomes a diagonal-plus-rank-one eigenproblem
``diag(decay * eigvals) + (1 - decay) z z^T`` with ``z = eigvecs.T @ x``.
That problem is solved through its secular equation in O(d^2), with the
eigenvectors rebuilt from the computed roots (Gu-Eisenstat style) so they stay
orthogonal, then rotated back with one matrix product.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.lapack import dlasd4

log = logging.getLogger(__name__)

ORTHO_TOL = 1e-8
_EPS = np.finfo(float).eps


class EmptySpectrum(ValueError):
    """All eigenvalues are zero, so no active subspace can be selected."""


@dataclass
class DecayingCovariance:
    dim: int
    eigvecs: np.ndarray
    eigvals: np.ndarray
    decay: float
    updates_seen: int = 0
    reorthogonalizations: int = 0

    @classmethod
    def zeros(cls, dim: int, decay: float) -> "DecayingCovariance":
        if dim < 1:
            raise ValueError("dim must be positive")
        if not 0.0 <= decay < 1.0:
            raise ValueError("decay must lie in [0, 1)")
        return cls(dim, np.eye(dim), np.zeros(dim), float(decay))

    def matrix(self) -> np.ndarray:
        return (self.eigvecs * self.eigvals) @ self.eigvecs.T

    def ortho_residual(self) -> float:
        return orthonormality_residual(self.eigvecs)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.eigvals))


@dataclass
class ActiveSubspace:
    u_act: np.ndarray
    u_perp: np.ndarray
    captured_fraction: float
    eigvals: np.ndarray = field(repr=False, default=None)

    @property
    def active_dim(self) -> int:
        return self.u_act.shape[1]

    @property
    def perp_dim(self) -> int:
        return self.u_perp.shape[1]

    @property
    def dim(self) -> int:
        return self.u_act.shape[0]


def orthonormality_residual(q: np.ndarray) -> float:
    if q.size == 0:
        return 0.0
    return float(np.max(np.abs(q.T @ q - np.eye(q.shape[1]))))


FULL_CHECK_DIM = 256
FULL_CHECK_EVERY = 25


def _probe_residual(q: np.ndarray) -> float:
    """Cheap O(d^2) lower estimate of the orthonormality residual.

    Applies q^T q - I to a few fixed probe vectors; the max entry of the
    result lower-bounds the max-entry residual up to a factor of ~sqrt(d).
    """
    n = q.shape[1]
    probes = np.random.default_rng(12345).standard_normal((n, 3))
    probes /= np.linalg.norm(probes, axis=0)
    err = q.T @ (q @ probes) - probes
    return float(np.max(np.abs(err)))


def _needs_reorthogonalization(q: np.ndarray, updates_seen: int) -> bool:
    if q.shape[1] <= FULL_CHECK_DIM or updates_seen % FULL_CHECK_EVERY == 0:
        return orthonormality_residual(q) > ORTHO_TOL
    return _probe_residual(q) > 0.1 * ORTHO_TOL


def reorthogonalize(q: np.ndarray) -> np.ndarray:
    """One QR (Gram-Schmidt equivalent) pass with signs kept aligned to ``q``."""
    qq, rr = np.linalg.qr(q)
    signs = np.sign(np.diag(rr))
    signs[signs == 0] = 1.0
    return qq * signs


# --- diagonal plus rank one -------------------------------------------------


def _secular_roots(d, z, rho, max_iter=200):
    """Roots of 1 + rho * sum z_j^2 / (d_j - lam) for strictly increasing ``d``.

    Returns (origin index, offset tau) per root so that lam_i = d[origin_i] + tau_i
    and the differences d_j - lam_i can be formed without cancellation.
    """
    k = d.size
    z2 = z * z
    origin = np.arange(k)
    lo = np.zeros(k)
    hi = np.zeros(k)
    if k > 1:
        gaps = d[1:] - d[:-1]
        # f at the interval midpoint decides which pole the root sits near
        mid_delta = (d[None, :] - d[:-1, None]) - 0.5 * gaps[:, None]
        fmid = 1.0 + rho * np.sum(z2[None, :] / mid_delta, axis=1)
        near_upper = fmid <= 0.0
        origin[:-1] = np.where(near_upper, np.arange(1, k), np.arange(k - 1))
        lo[:-1] = np.where(near_upper, -0.5 * gaps, 0.0)
        hi[:-1] = np.where(near_upper, 0.0, 0.5 * gaps)
    hi[-1] = rho * np.sum(z2)

    shift = d[None, :] - d[origin][:, None]
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        delta = shift - mid[:, None]
        with np.errstate(divide="ignore"):
            f = 1.0 + rho * np.sum(z2[None, :] / delta, axis=1)
        below = f < 0.0
        new_lo = np.where(below, mid, lo)
        new_hi = np.where(below, hi, mid)
        if np.array_equal(new_lo, lo) and np.array_equal(new_hi, hi):
            break
        lo, hi = new_lo, new_hi
    tau = 0.5 * (lo + hi)
    # the root never coincides with its pole
    tau = np.where(tau == 0.0, np.where(lo >= 0.0, hi, lo), tau)
    return origin, tau


def _secular_solve(d, z, rho):
    """Roots lam_i and differences delta[i, j] = d_j - lam_i of the secular equation.

    For nonnegative ``d`` this uses LAPACK's dlasd4 on sqrt(d), which returns
    d_j - lam_i as (s_j - sigma_i)(s_j + sigma_i) without cancellation.
    Otherwise it falls back to bisection.
    """
    if d[0] >= 0.0:
        s = np.sqrt(d)
        zn = float(np.linalg.norm(z))
        zu = z / zn
        rho_u = rho * zn * zn
        k = d.size
        lam = np.empty(k)
        delta = np.empty((k, k))
        ok = True
        for i in range(k):
            dl, sigma, work, info = dlasd4(i, s, zu, rho_u)
            if info != 0:
                ok = False
                break
            lam[i] = sigma * sigma
            delta[i] = dl * work
        if ok:
            return lam, delta
    origin, tau = _secular_roots(d, z, rho)
    return d[origin] + tau, (d[None, :] - d[origin][:, None]) - tau[:, None]


def _diag_rank_one_eigh(d, z, rho, basis):
    """Eigenpairs of basis @ (diag(d) + rho z z^T) @ basis.T for rho > 0.

    ``d`` ascending. Returns (eigvals, eigvecs as columns), unsorted.
    """
    n = d.size
    znorm = float(np.linalg.norm(z))
    if znorm == 0.0 or rho == 0.0:
        return d.copy(), basis.copy()
    zt = z / znorm
    rt = rho * znorm * znorm
    d = d.copy()
    w = basis.copy()
    tol = 8.0 * _EPS * max(float(np.max(np.abs(d))), rt)

    deflated = np.abs(rt * zt) <= tol
    zt[deflated] = 0.0
    prev = -1
    for j in range(n):
        if deflated[j]:
            continue
        if prev >= 0:
            r = np.hypot(zt[prev], zt[j])
            c, s = zt[j] / r, zt[prev] / r
            if abs(c * s * (d[j] - d[prev])) <= tol:
                wp, wj = w[:, prev].copy(), w[:, j].copy()
                w[:, prev] = c * wp - s * wj
                w[:, j] = s * wp + c * wj
                dp, dj = d[prev], d[j]
                d[prev] = c * c * dp + s * s * dj
                d[j] = s * s * dp + c * c * dj
                zt[prev], zt[j] = 0.0, r
                deflated[prev] = True
        prev = j

    keep = np.flatnonzero(~deflated)
    if keep.size == 0:
        return d, w
    dk, zk = d[keep], zt[keep]
    lam, delta = _secular_solve(dk, zk, rt)

    # Gu-Eisenstat: rebuild z from the computed roots so vectors are orthogonal
    kk = keep.size
    diff = dk[None, :] - dk[:, None]
    np.fill_diagonal(diff, 1.0)
    log_num = np.sum(np.log(np.abs(delta)), axis=0)
    log_den = np.sum(np.log(np.abs(diff)), axis=0)
    zhat = np.exp(0.5 * (log_num - log_den - np.log(rt))) * np.sign(zk)
    if kk == 1:
        zhat = np.sign(zk)

    u = zhat[None, :] / delta
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    w_new = w[:, keep] @ u.T

    vals = d.copy()
    vecs = w
    vals[keep] = lam
    vecs[:, keep] = w_new
    return vals, vecs


def covariance_update(cov: DecayingCovariance, x, method: str = "rank_one") -> DecayingCovariance:
    """Return the eigendecomposition of ``decay * Cov + (1 - decay) * x x^T``.

    ``method="dense"`` rebuilds the matrix and calls ``numpy.linalg.eigh``;
    it exists as a fallback and as a cross-check for the rank-one path.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (cov.dim,):
        raise ValueError(f"update vector has shape {x.shape}, expected ({cov.dim},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("update vector has non-finite entries")
    lam = cov.decay
    rho = 1.0 - lam

    if method == "dense":
        m = lam * cov.matrix() + rho * np.outer(x, x)
        vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    elif method == "rank_one":
        z = cov.eigvecs.T @ x
        base = lam * cov.eigvals
        order = np.argsort(base, kind="stable")
        vals, vecs = _diag_rank_one_eigh(base[order], z[order], rho, cov.eigvecs[:, order])
    else:
        raise ValueError(f"unknown method {method!r}")

    order = np.argsort(-vals, kind="stable")
    vals = np.maximum(vals[order], 0.0)
    vecs = vecs[:, order]
    reorth = cov.reorthogonalizations
    if _needs_reorthogonalization(vecs, cov.updates_seen + 1):
        vecs = reorthogonalize(vecs)
        reorth += 1
    return DecayingCovariance(cov.dim, vecs, vals, lam, cov.updates_seen + 1, reorth)


def select_active_subspace(cov: DecayingCovariance, threshold: float) -> ActiveSubspace:
    """Smallest r whose top-r eigenvalues hold ``threshold`` of the total mass."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    vals = np.maximum(np.asarray(cov.eigvals, dtype=float), 0.0)
    total = float(np.sum(vals))
    if total <= 0.0:
        raise EmptySpectrum("covariance has no mass")
    cum = np.cumsum(vals)
    # relative slack absorbs round-off in the partial sums
    hits = np.flatnonzero(cum >= threshold * total * (1.0 - 1e-12))
    r = int(hits[0]) + 1 if hits.size else vals.size
    return ActiveSubspace(
        u_act=cov.eigvecs[:, :r],
        u_perp=cov.eigvecs[:, r:],
        captured_fraction=float(min(cum[r - 1] / total, 1.0)),
        eigvals=vals,
    )


def project_norms(v, sub: ActiveSubspace) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    if v.shape != (sub.dim,):
        raise ValueError(f"vector has shape {v.shape}, expected ({sub.dim},)")
    return float(np.linalg.norm(sub.u_act.T @ v)), float(np.linalg.norm(sub.u_perp.T @ v))
