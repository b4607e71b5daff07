"""Benchmark objectives.

Every function accepts either a single point of shape ``(d,)`` or a batch of
points of shape ``(n, d)`` and reduces over the last axis, so estimators can
evaluate all perturbations of one iteration in a single call.

Definitions (frozen for the whole repo):

* ``sphere``      sum x_i^2
* ``sphere2``     sum (x_i - 0.5)^2
* ``cigar``       x_1^2 + 1e6 * sum_{i>=2} x_i^2
* ``ellipsoid``   sum 1e6^{(i-1)/(d-1)} x_i^2
* ``rastrigin``   sum (x_i^2 - 10 cos(2 pi x_i) + 10)
* ``rosenbrock``  sum_{i<d} 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2
* ``lunacek``     bi-Rastrigin No.02 with mu1 = 2.5, s = 1 - 1/(2 sqrt(d+20) - 8.2),
                  mu2 = -sqrt((mu1^2 - 1)/s), penalty weight 10
* ``linear``      c^T x
* ``quadratic``   0.5 x^T H x
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

CONDITIONING = 1e6
LUNACEK_MU1 = 2.5

FUNCTION_NAMES = (
    "sphere",
    "sphere2",
    "cigar",
    "ellipsoid",
    "rastrigin",
    "rosenbrock",
    "lunacek",
    "linear",
    "quadratic",
)


@dataclass
class BenchmarkFunction:
    """A pure objective with optional known optimum and analytic gradient."""

    name: str
    dim: int
    fn: Callable[[np.ndarray], np.ndarray]
    optimum_value: Optional[float] = None
    optimum_point: Optional[np.ndarray] = None
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"{self.name}: expected last axis {self.dim}, got {x.shape}")
        out = self.fn(x)
        return float(out) if np.ndim(out) == 0 else out

    def batch(self, xs: np.ndarray) -> np.ndarray:
        """Evaluate each row of ``xs``."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return np.asarray(self(xs), dtype=float).reshape(xs.shape[0])


class CountingFunction:
    """Wraps a function and counts every point it is evaluated at.

    Batched calls count one query per row. The counter is guarded by a lock
    so concurrent evaluation keeps an exact total.
    """

    def __init__(self, base: BenchmarkFunction):
        self.base = base
        self._count = 0
        self._lock = threading.Lock()

    @property
    def count(self) -> int:
        return self._count

    @property
    def name(self):
        return self.base.name

    @property
    def dim(self):
        return self.base.dim

    def reset(self):
        with self._lock:
            self._count = 0

    def _bump(self, n):
        with self._lock:
            self._count += n

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        self._bump(1 if x.ndim == 1 else int(np.prod(x.shape[:-1])))
        return self.base(x)

    def batch(self, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        self._bump(xs.shape[0])
        return self.base.batch(xs)


def counting_wrapper(f: BenchmarkFunction) -> CountingFunction:
    return CountingFunction(f)


def uncounted(f):
    """The underlying function of a counting wrapper (for monitoring)."""
    return f.base if isinstance(f, CountingFunction) else f


def evaluate_rows(f, xs: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` at every row of ``xs``; uses ``f.batch`` when available."""
    if hasattr(f, "batch"):
        return np.asarray(f.batch(xs), dtype=float)
    return np.array([float(f(row)) for row in xs])


# --- definitions ------------------------------------------------------------


def _sphere(x):
    return np.sum(x * x, axis=-1)


def _sphere2(x):
    y = x - 0.5
    return np.sum(y * y, axis=-1)


def _cigar(x):
    return x[..., 0] ** 2 + CONDITIONING * np.sum(x[..., 1:] ** 2, axis=-1)


def _ellipsoid_weights(d):
    if d == 1:
        return np.ones(1)
    return CONDITIONING ** (np.arange(d) / (d - 1))


def _rastrigin(x):
    return np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x) + 10.0, axis=-1)


def _rosenbrock(x):
    a = x[..., 1:] - x[..., :-1] ** 2
    b = 1.0 - x[..., :-1]
    return np.sum(100.0 * a * a + b * b, axis=-1)


def lunacek_params(d):
    s = 1.0 - 1.0 / (2.0 * np.sqrt(d + 20.0) - 8.2)
    mu2 = -np.sqrt((LUNACEK_MU1**2 - 1.0) / s)
    return s, LUNACEK_MU1, mu2


def _make_lunacek(d):
    s, mu1, mu2 = lunacek_params(d)

    def fn(x):
        a = np.sum((x - mu1) ** 2, axis=-1)
        b = d + s * np.sum((x - mu2) ** 2, axis=-1)
        pen = 10.0 * np.sum(1.0 - np.cos(2.0 * np.pi * (x - mu1)), axis=-1)
        return np.minimum(a, b) + pen

    def grad(x):
        a = np.sum((x - mu1) ** 2, axis=-1)
        b = d + s * np.sum((x - mu2) ** 2, axis=-1)
        pen = 20.0 * np.pi * np.sin(2.0 * np.pi * (x - mu1))
        branch = 2.0 * (x - mu1) if a <= b else 2.0 * s * (x - mu2)
        return branch + pen

    return fn, grad


def make_function(name: str, d: int, c=None, H=None) -> BenchmarkFunction:
    """Build a benchmark by name.

    ``linear`` takes the coefficient vector ``c``; ``quadratic`` the symmetric
    matrix ``H``. Both default to simple choices when omitted.
    """
    if name not in FUNCTION_NAMES:
        raise ValueError(f"unknown function {name!r}; choose from {', '.join(FUNCTION_NAMES)}")
    if d < 1:
        raise ValueError("dimension must be positive")
    if name in ("rosenbrock", "lunacek") and d < 2:
        raise ValueError(f"{name} needs d >= 2")

    zeros = np.zeros(d)
    if name == "sphere":
        return BenchmarkFunction(name, d, _sphere, 0.0, zeros, lambda x: 2.0 * x)
    if name == "sphere2":
        return BenchmarkFunction(name, d, _sphere2, 0.0, np.full(d, 0.5), lambda x: 2.0 * (x - 0.5))
    if name == "cigar":
        w = np.full(d, CONDITIONING)
        w[0] = 1.0
        return BenchmarkFunction(name, d, _cigar, 0.0, zeros, lambda x: 2.0 * w * x)
    if name == "ellipsoid":
        w = _ellipsoid_weights(d)
        return BenchmarkFunction(
            name, d, lambda x: np.sum(w * x * x, axis=-1), 0.0, zeros, lambda x: 2.0 * w * x
        )
    if name == "rastrigin":
        return BenchmarkFunction(
            name, d, _rastrigin, 0.0, zeros,
            lambda x: 2.0 * x + 20.0 * np.pi * np.sin(2.0 * np.pi * x),
        )
    if name == "rosenbrock":

        def grad(x):
            g = np.zeros_like(x)
            a = x[1:] - x[:-1] ** 2
            g[:-1] += -400.0 * x[:-1] * a - 2.0 * (1.0 - x[:-1])
            g[1:] += 200.0 * a
            return g

        return BenchmarkFunction(name, d, _rosenbrock, 0.0, np.ones(d), grad)
    if name == "lunacek":
        fn, grad = _make_lunacek(d)
        return BenchmarkFunction(name, d, fn, 0.0, np.full(d, LUNACEK_MU1), grad)
    if name == "linear":
        c = np.ones(d) / np.sqrt(d) if c is None else np.asarray(c, dtype=float)
        if c.shape != (d,):
            raise ValueError("c must have shape (d,)")
        return BenchmarkFunction(name, d, lambda x: x @ c, None, None, lambda x: c.copy())
    # quadratic
    H = np.eye(d) if H is None else np.asarray(H, dtype=float)
    if H.shape != (d, d):
        raise ValueError("H must have shape (d, d)")
    H = 0.5 * (H + H.T)
    # the origin is a minimizer only when H is positive semidefinite
    psd = bool(np.linalg.eigvalsh(H)[0] >= 0.0)
    return BenchmarkFunction(
        name, d,
        lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, H, x),
        0.0 if psd else None, zeros if psd else None, lambda x: H @ x,
    )


def initial_point(d: int, norm: float = 10.0, seed: int = 0) -> np.ndarray:
    """Random starting point of fixed norm; shared across optimizer seeds."""
    u = np.random.default_rng(seed).standard_normal(d)
    return norm * u / np.linalg.norm(u)
