"""Discrete geometry on a uniform grid of [0, 1]: weights, gradient and rate matrix.

Nodes are ``x_i = i h`` for ``i = 0..n`` and edges ``k = 0..n-1`` join nodes ``k``
and ``k+1``. The discrete gradient maps node vectors to edge vectors,
``(G v)_k = (v_k - v_{k+1}) / h``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AssemblyError, ConfigurationError, DomainError

INVARIANT_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError(f"grid needs a positive integer number of intervals, got {self.n!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    @property
    def size(self) -> int:
        return self.n + 1


def build_grid(n: int, *, min_intervals: int = 2) -> Grid:
    """Uniform grid with ``n`` intervals.

    ``n >= 2`` is required by default so that edge operators are genuinely
    tridiagonal; the two-point chain (``n = 1``) needs ``min_intervals=1``.
    """
    if not isinstance(n, (int, np.integer)) or n < min_intervals:
        raise ConfigurationError(f"n must be an integer >= {min_intervals}, got {n!r}")
    return Grid(int(n))


@dataclass(frozen=True)
class Potential:
    """Confinement potential ``V``; ``kind`` is "zero", "quadratic" or "custom"."""

    kind: str = "zero"
    gamma: float = 0.0
    V: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "quadratic", "custom"):
            raise ConfigurationError(f"unknown potential kind {self.kind!r}")
        if self.kind == "quadratic" and not self.gamma >= 0:
            raise ConfigurationError("quadratic potential needs gamma >= 0")
        if self.kind == "custom" and self.V is None:
            raise ConfigurationError("custom potential needs a callable V")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def quadratic(cls, gamma):
        return cls("quadratic", gamma=float(gamma))

    @classmethod
    def custom(cls, V):
        return cls("custom", V=V)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "quadratic":
            return 0.5 * self.gamma * x**2
        return np.asarray(self.V(x), dtype=float) * np.ones_like(x)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind == "quadratic" and self.gamma == 0.0)


@dataclass(frozen=True)
class Weights:
    """Node weights ``w_i = exp(-V(x_i))`` and edge weights ``kappa_k = sqrt(w_k w_{k+1})``."""

    potential: Potential
    V: np.ndarray
    w: np.ndarray
    kappa: np.ndarray


def build_weights(grid: Grid, potential: Potential) -> Weights:
    V = potential(grid.x)
    if not np.all(np.isfinite(V)):
        raise DomainError("potential is not finite on the grid")
    w = np.exp(-V)
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise DomainError("weights exp(-V) underflow or overflow on the grid")
    kappa = np.sqrt(w[:-1] * w[1:])
    return Weights(potential, V, w, kappa)


# ---------------------------------------------------------------------------
# discrete gradient


def grad(v, h):
    """Forward difference ``(v_k - v_{k+1}) / h`` on edges."""
    v = np.asarray(v, dtype=float)
    return (v[..., :-1] - v[..., 1:]) / h


def grad_adjoint(y, h):
    """``G^T y``: ``(y_i - y_{i-1}) / h`` with ``y_{-1} = y_n = 0``."""
    y = np.asarray(y, dtype=float)
    pad = np.zeros(y.shape[:-1] + (1,))
    ext = np.concatenate([pad, y, pad], axis=-1)
    return (ext[..., 1:] - ext[..., :-1]) / h


def gradient_matrix(grid: Grid) -> np.ndarray:
    """Dense ``n x (n+1)`` matrix of the discrete gradient."""
    n, h = grid.n, grid.h
    G = np.zeros((n, n + 1))
    k = np.arange(n)
    G[k, k] = 1.0 / h
    G[k, k + 1] = -1.0 / h
    return G


# ---------------------------------------------------------------------------
# rate matrix


@dataclass(frozen=True)
class RateMatrix:
    """Tridiagonal generator ``Q = -G^T diag(kappa) G diag(1/w)`` stored by bands.

    ``lower[k] = Q[k+1, k]``, ``upper[k] = Q[k, k+1]``.
    """

    diag: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    w: np.ndarray
    kappa: np.ndarray

    @property
    def size(self):
        return self.diag.size

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.lower, -1) + np.diag(self.upper, 1)

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        out = self.diag * v
        out[:-1] += self.upper * v[1:]
        out[1:] += self.lower * v[:-1]
        return out

    def invariant_residuals(self) -> dict:
        Q = self.dense()
        scale = max(np.abs(Q).max(), 1e-300)
        off = Q - np.diag(np.diag(Q))
        flux = Q * self.w[None, :]
        return {
            "negative_off_diagonal": float(max(0.0, -off.min()) / scale),
            "column_sums": float(np.abs(Q.sum(axis=0)).max() / scale),
            "detailed_balance": float(np.abs(flux - flux.T).max() / (scale * self.w.max())),
            "stationary": float(np.abs(Q @ self.w).max() / (scale * self.w.max())),
        }


def build_rate_matrix(grid: Grid, weights: Weights) -> RateMatrix:
    h2 = grid.h**2
    w, kappa = weights.w, weights.kappa
    upper = kappa / (h2 * w[1:])
    lower = kappa / (h2 * w[:-1])
    k_ext = np.concatenate([[0.0], kappa, [0.0]])
    diag = -(k_ext[:-1] + k_ext[1:]) / (h2 * w)
    Q = RateMatrix(diag, lower, upper, w, kappa)
    bad = {k: v for k, v in Q.invariant_residuals().items() if v > INVARIANT_TOL}
    if bad:
        raise AssemblyError(f"rate matrix violates invariants: {bad}")
    return Q
