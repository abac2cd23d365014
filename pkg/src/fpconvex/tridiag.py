"""Symmetric tridiagonal matrices: Sturm counts, bisection and inverse iteration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigurationError


@dataclass(frozen=True)
class TridiagonalMatrix:
    """``scale * T`` where ``T`` has diagonal ``a`` and off-diagonal ``b``.

    Coefficients are kept unscaled (for edge operators ``scale = 1/h**2``) so that
    dominance margins can be read in the same units as the displayed formulas.
    """

    a: np.ndarray
    b: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.ndim != 1 or b.shape != (max(a.size - 1, 0),):
            raise ConfigurationError("off-diagonal must have one entry fewer than the diagonal")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def size(self):
        return self.a.size

    def dense(self) -> np.ndarray:
        return self.scale * (np.diag(self.a) + np.diag(self.b, 1) + np.diag(self.b, -1))

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        out = self.a * v
        out[:-1] += self.b * v[1:]
        out[1:] += self.b * v[:-1]
        return self.scale * out

    def quadratic(self, v) -> float:
        return float(np.dot(v, self.matvec(v)))

    def shifted(self, diag_shift) -> "TridiagonalMatrix":
        """``self - diag(diag_shift)`` with ``diag_shift`` in the same (scaled) units."""
        return TridiagonalMatrix(self.a - np.asarray(diag_shift) / self.scale, self.b, self.scale)

    def gershgorin(self):
        r = np.zeros_like(self.a)
        r[:-1] += np.abs(self.b)
        r[1:] += np.abs(self.b)
        return float((self.a - r).min()), float((self.a + r).max())


def sturm_count(a, b, x) -> int:
    """Number of eigenvalues of tridiag(b, a, b) strictly below ``x``."""
    count = 0
    q = 1.0
    tiny = np.finfo(float).tiny
    for i in range(a.size):
        q = a[i] - x - (b[i - 1] ** 2 / q if i > 0 else 0.0)
        if q == 0.0:
            q = -tiny
        if q < 0:
            count += 1
    return count


def smallest_eigenvalue(T: TridiagonalMatrix, rtol=1e-15) -> float:
    """Smallest eigenvalue of ``T`` by bisection on the Sturm count."""
    lo, hi = T.gershgorin()
    width = max(abs(lo), abs(hi), np.finfo(float).tiny)
    lo -= 1e-12 * width
    hi += 1e-12 * width
    a, b = T.a, T.b
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi) or hi - lo <= rtol * width:
            break
        if sturm_count(a, b, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return T.scale * 0.5 * (lo + hi)


def eigenvector(T: TridiagonalMatrix, eigenvalue, iterations=4, seed=0) -> np.ndarray:
    """Unit eigenvector for ``eigenvalue`` by shifted inverse iteration."""
    n = T.size
    if n == 1:
        return np.ones(1)
    mu = eigenvalue / T.scale
    spread = max(np.abs(T.a).max(), np.abs(T.b).max(initial=0.0), 1e-300)
    shift = mu - 1e-10 * spread
    ab = np.zeros((3, n))
    ab[0, 1:] = T.b
    ab[1] = T.a - shift
    ab[2, :-1] = T.b
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(iterations):
        v = solve_banded((1, 1), ab, v, check_finite=False)
        v /= np.linalg.norm(v)
    return v
