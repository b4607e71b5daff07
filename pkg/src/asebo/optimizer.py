"""The ASEBO outer loop, the vanilla ES baseline and the Adam step rule."""
from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Union

import numpy as np

from . import explore as ex
from .estimators import antithetic_gradient
from .functions import uncounted
from .linalg import DecayingCovariance, EmptySpectrum, covariance_update, select_active_subspace
from .sampling import HybridSampler, Variant, chi_renormalize_rows

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    MINIMIZE = "min"
    MAXIMIZE = "max"


# --- Adam -------------------------------------------------------------------


@dataclass
class AdamConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, dim):
        return cls(np.zeros(dim), np.zeros(dim), 0)


def adam_step(state: AdamState, grad, eta: float, cfg: AdamConfig = AdamConfig()):
    """Standard bias-corrected Adam. Returns (new state, step); apply as theta + step."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.m.shape:
        raise ValueError(f"gradient has shape {grad.shape}, state has {state.m.shape}")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad * grad
    m_hat = m / (1.0 - cfg.beta1**t)
    v_hat = v / (1.0 - cfg.beta2**t)
    return AdamState(m, v, t), eta * m_hat / (np.sqrt(v_hat) + cfg.eps)


# --- configuration ----------------------------------------------------------


@dataclass
class BanditExplorer:
    q0: float = 0.1
    beta: float = 0.1
    alpha: float = 0.01
    horizon: int = 10
    sigma: float = 0.01
    # "theorem": regret-theorem rate with plug-in s values from the current
    # gradient estimate, times alpha_scale. "fixed": use alpha as is.
    alpha_rule: str = "theorem"
    alpha_scale: float = 1.0
    kind: str = field(default="bandit", init=False)

    def __post_init__(self):
        if self.alpha_rule not in ("theorem", "fixed"):
            raise ValueError(f"unknown alpha_rule {self.alpha_rule!r}")
        if not self.alpha_scale > 0:
            raise ValueError("alpha_scale must be positive")

    def queries(self):
        return 2 * (self.horizon + 1)


@dataclass
class CompressedSensingExplorer:
    horizon: int = 10
    sigma: float = 0.01
    beta: float = 0.1
    kind: str = field(default="cs", init=False)

    def queries(self):
        return 4 * self.horizon


Explorer = Union[BanditExplorer, CompressedSensingExplorer]


def explorer_from_dict(d: dict) -> Explorer:
    d = dict(d)
    kind = d.pop("kind", "bandit")
    if kind == "bandit":
        return BanditExplorer(**d)
    if kind == "cs":
        return CompressedSensingExplorer(**d)
    raise ValueError(f"unknown explorer kind {kind!r}")


@dataclass
class AseboConfig:
    warmup_iters: int = 5
    sigma: float = 0.01
    step_size: float = 0.02
    pca_threshold: float = 0.995
    decay: float = 0.99
    total_iters: int = 1000
    explorer: Explorer = field(default_factory=BanditExplorer)
    sampler_variant: Variant = Variant.V1
    min_active_dim: int = 1
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0
    # Configured input; recorded only, the first post-warmup p comes from the explorer
    p0: float = 0.0

    def __post_init__(self):
        self.sampler_variant = Variant(self.sampler_variant)
        if isinstance(self.explorer, dict):
            self.explorer = explorer_from_dict(self.explorer)
        if isinstance(self.adam, dict):
            self.adam = AdamConfig(**self.adam)
        if self.warmup_iters < 1 or self.total_iters < 1:
            raise ValueError("warmup_iters and total_iters must be positive")
        if self.warmup_iters > self.total_iters:
            raise ValueError("warmup_iters cannot exceed total_iters")
        if not (self.sigma > 0 and self.step_size > 0):
            raise ValueError("sigma and step_size must be positive")
        if not 0 < self.pca_threshold <= 1:
            raise ValueError("pca_threshold must lie in (0, 1]")
        if not 0 <= self.decay < 1:
            raise ValueError("decay must lie in [0, 1)")
        if self.min_active_dim < 1:
            raise ValueError("min_active_dim must be positive")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["sampler_variant"] = self.sampler_variant.value
        out["explorer"] = {"kind": self.explorer.kind, **{
            f.name: getattr(self.explorer, f.name) for f in fields(self.explorer) if f.init
        }}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "AseboConfig":
        return cls(**d)


# --- telemetry --------------------------------------------------------------

CSV_COLUMNS = (
    "iteration", "queries", "n_t", "active_dim", "captured_fraction", "p_t",
    "current_value", "best_value", "grad_norm", "explorer_queries", "isotropic",
)


@dataclass
class IterationRow:
    iteration: int
    queries: int
    n_t: int
    active_dim: Optional[int]
    captured_fraction: Optional[float]
    p_t: Optional[float]
    current_value: float
    best_value: float
    grad_norm: float
    explorer_queries: int = 0
    isotropic: bool = True


@dataclass
class RunRecord:
    rows: list = field(default_factory=list)
    budget: Optional[int] = None

    @property
    def queries(self) -> int:
        return self.rows[-1].queries if self.rows else 0

    @property
    def overshoot(self) -> int:
        return 0 if self.budget is None else max(self.queries - self.budget, 0)

    @property
    def best_value(self) -> float:
        return self.rows[-1].best_value

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=object)

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return int(x)
    if isinstance(x, float):
        return repr(x)
    return x


def _sign(mode) -> float:
    return 1.0 if Mode(mode) is Mode.MAXIMIZE else -1.0


def _better(mode, a, b):
    return max(a, b) if Mode(mode) is Mode.MAXIMIZE else min(a, b)


# --- ASEBO ------------------------------------------------------------------


def asebo_optimize(f, theta0, cfg: AseboConfig, mode="min", budget: Optional[int] = None,
                   cov_method: str = "rank_one"):
    """Run ASEBO from ``theta0``. Returns (final theta, RunRecord).

    ``budget`` counts objective queries (explorer probes included); the loop
    stops after the iteration that reaches it.
    """
    theta = np.array(theta0, dtype=float)
    d = theta.size
    if getattr(f, "dim", d) != d:
        raise ValueError(f"function dimension {f.dim} does not match theta0 ({d})")
    if budget is not None and budget <= 0:
        raise ValueError("budget must be positive")
    sign = _sign(mode)
    monitor = uncounted(f)
    sampler_ss, explorer_ss = np.random.SeedSequence(cfg.seed).spawn(2)
    rng = np.random.default_rng(sampler_ss)
    explorer_rng = np.random.default_rng(explorer_ss)

    cov = DecayingCovariance.zeros(d, cfg.decay)
    adam = AdamState.zeros(d)
    exp_cfg = cfg.explorer
    bandit = None
    if isinstance(exp_cfg, BanditExplorer):
        bandit = ex.ExplorerState(q=exp_cfg.q0, beta=exp_cfg.beta, alpha=exp_cfg.alpha,
                                  horizon=exp_cfg.horizon, sigma=exp_cfg.sigma)
        p = bandit.p
    else:
        # no ratio measured yet: r_hat = 1
        p = 0.5
    record = RunRecord(budget=budget)
    queries = 0
    best = float(monitor(theta))

    for t in range(cfg.total_iters):
        sub = None
        if t >= cfg.warmup_iters:
            try:
                sub = select_active_subspace(cov, cfg.pca_threshold)
            except EmptySpectrum:
                log.info("iteration %d: empty spectrum, sampling isotropically", t)
        if sub is None:
            n_t = d
            dirs = rng.standard_normal((d, d))
            p_used = None
        else:
            n_t = max(sub.active_dim, cfg.min_active_dim)
            sampler = HybridSampler(sub, p, cfg.sampler_variant, rng)
            p_used = sampler.p_active
            raw, _ = sampler.sample_directions(n_t)
            dirs = chi_renormalize_rows(raw, d, rng)

        est = antithetic_gradient(f, theta, dirs, cfg.sigma)
        queries += est.queries
        cov = covariance_update(cov, est.grad, method=cov_method)

        explorer_q = 0
        if sub is not None and sub.perp_dim > 0:
            if bandit is not None:
                if exp_cfg.alpha_rule == "theorem":
                    alpha = ex.plugin_learning_rate(exp_cfg.beta, exp_cfg.horizon, sub, est.grad,
                                                    exp_cfg.alpha_scale)
                    bandit = replace(bandit, alpha=exp_cfg.alpha if alpha is None else alpha)
                p, bandit = ex.bandit_explore(f, theta, sub, bandit, explorer_rng)
                bandit.history.clear()
            else:
                ratio = ex.cs_ratio_explore(f, theta, sub, exp_cfg.horizon, exp_cfg.sigma, explorer_rng)
                p = ex.ratio_to_probability(ratio.r_hat)
            p = min(max(p, exp_cfg.beta), 1.0 - exp_cfg.beta)
            explorer_q = exp_cfg.queries()
            queries += explorer_q

        adam, step = adam_step(adam, sign * est.grad, cfg.step_size, cfg.adam)
        theta = theta + step
        value = float(monitor(theta))
        if not math.isfinite(value):
            raise FloatingPointError(f"objective is {value} at iteration {t}")
        best = _better(mode, best, value)
        record.rows.append(IterationRow(
            iteration=t,
            queries=queries,
            n_t=n_t,
            active_dim=None if sub is None else sub.active_dim,
            captured_fraction=None if sub is None else sub.captured_fraction,
            p_t=p_used,
            current_value=value,
            best_value=best,
            grad_norm=float(np.linalg.norm(est.grad)),
            explorer_queries=explorer_q,
            isotropic=sub is None,
        ))
        if budget is not None and queries >= budget:
            break
    return theta, record


# --- vanilla ES -------------------------------------------------------------


def vanilla_es(f, theta0, sigma: float, step_size: float, samples_per_iter: int, total_iters: int,
               seed: int = 0, mode="min", budget: Optional[int] = None, adam_cfg: AdamConfig = AdamConfig()):
    """Antithetic ES with isotropic directions and an Adam step; no ranking or normalization."""
    theta = np.array(theta0, dtype=float)
    d = theta.size
    if budget is not None and budget <= 0:
        raise ValueError("budget must be positive")
    if samples_per_iter < 1:
        raise ValueError("samples_per_iter must be positive")
    sign = _sign(mode)
    monitor = uncounted(f)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    adam = AdamState.zeros(d)
    record = RunRecord(budget=budget)
    queries = 0
    best = float(monitor(theta))
    for t in range(total_iters):
        dirs = rng.standard_normal((samples_per_iter, d))
        est = antithetic_gradient(f, theta, dirs, sigma)
        queries += est.queries
        adam, step = adam_step(adam, sign * est.grad, step_size, adam_cfg)
        theta = theta + step
        value = float(monitor(theta))
        if not math.isfinite(value):
            raise FloatingPointError(f"objective is {value} at iteration {t}")
        best = _better(mode, best, value)
        record.rows.append(IterationRow(
            t, queries, samples_per_iter, None, None, None, value, best,
            float(np.linalg.norm(est.grad)), 0, True,
        ))
        if budget is not None and queries >= budget:
            break
    return theta, record
