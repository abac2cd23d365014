"""Two-variable mean functions and checkers for their structural properties.

Four families are provided:

* :class:`LogarithmicMean`: ``(s - t) / (log s - log t)``
* :class:`FMean`: ``(s - t) / (f'(s) - f'(t))`` for a convex entropy density ``f``
* :class:`ErbarMaasMean`: ``(phi(s) - phi(t)) / (U'(s) - U'(t))`` with ``s U''(s) = phi'(s)``
* :class:`PowerMean`: the Erbar-Maas mean of ``phi(s) = s**alpha``

Every mean is vectorized over numpy arrays and exposes ``partials(s, t)``.
Arguments are sorted internally so that ``m(s, t) == m(t, s)`` holds bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DegenerateMeanError, DomainError

# Below this |log(s/t)| the logarithmic mean and its partials use Taylor series.
LOG_SERIES_THRESHOLD = 1e-3
# Below this |s - t| / max(s, t) difference-quotient means switch to Gauss-Legendre.
QUADRATURE_THRESHOLD = 0.1

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GL_NODES = 0.5 * (_GL_NODES + 1.0)
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS


def _positive_pair(s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(~(s > 0)) or np.any(~(t > 0)):
        raise DomainError("mean functions require strictly positive arguments")
    return np.broadcast_arrays(s, t)


def _ordered(s, t):
    """Return (hi, lo, swapped) with hi >= lo elementwise."""
    swapped = s < t
    hi = np.where(swapped, t, s)
    lo = np.where(swapped, s, t)
    return hi, lo, swapped


def _scalarize(x, like):
    return float(x) if np.ndim(like) == 0 else x


def _line_average(fun, lo, hi, weight=None):
    """Gauss-Legendre approximation of int_0^1 w(theta) fun(lo + theta (hi - lo)) dtheta.

    ``weight`` is None (w = 1) or "theta" (w = theta).
    """
    lo = np.asarray(lo, dtype=float)
    pts = lo[..., None] + _GL_NODES * (np.asarray(hi) - lo)[..., None]
    vals = np.broadcast_to(fun(pts), pts.shape)
    w = _GL_WEIGHTS * _GL_NODES if weight == "theta" else _GL_WEIGHTS
    return vals @ w


class MeanFunction:
    """Base class. Subclasses implement ``_value`` and ``_partial_hi_lo``.

    ``_partial_hi_lo(hi, lo)`` returns the derivative with respect to the first
    argument and the derivative with respect to the second argument, evaluated
    at ``(hi, lo)`` with ``hi >= lo``.
    """

    kind = "abstract"
    name = "mean"

    def __call__(self, s, t):
        s_arr, t_arr = _positive_pair(s, t)
        hi, lo, _ = _ordered(s_arr, t_arr)
        return _scalarize(self._value(hi, lo), s_arr)

    def partials(self, s, t):
        return self.value_and_partials(s, t)[1:]

    def value_and_partials(self, s, t):
        """``(m(s, t), d1 m(s, t), d2 m(s, t))`` sharing the common work."""
        s_arr, t_arr = _positive_pair(s, t)
        hi, lo, swapped = _ordered(s_arr, t_arr)
        val, d_hi, d_lo = self._all_hi_lo(hi, lo)
        d1 = np.where(swapped, d_lo, d_hi)
        d2 = np.where(swapped, d_hi, d_lo)
        return _scalarize(val, s_arr), _scalarize(d1, s_arr), _scalarize(d2, s_arr)

    def _all_hi_lo(self, hi, lo):
        return (self._value(hi, lo),) + tuple(self._partial_hi_lo(hi, lo))

    def diagonal(self, s):
        """Value on the diagonal, ``m(s, s)``."""
        return self(s, s)

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"


class LogarithmicMean(MeanFunction):
    kind = "logarithmic"
    name = "log"

    def _value(self, hi, lo):
        x = np.log1p((hi - lo) / lo)
        near = x < LOG_SERIES_THRESHOLD
        series = lo * (1.0 + x * (1 / 2 + x * (1 / 6 + x * (1 / 24 + x / 120))))
        with np.errstate(divide="ignore", invalid="ignore"):
            far = (hi - lo) / x
        return np.where(near, series, far)

    def _partial_hi_lo(self, hi, lo):
        return self._all_hi_lo(hi, lo)[1:]

    def _all_hi_lo(self, hi, lo):
        diff = hi - lo
        x = np.log1p(diff / lo)
        near = x < LOG_SERIES_THRESHOLD
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = diff / x
            d_hi = lam * (hi - lam) / (hi * diff)
            d_lo = lam * (lam - lo) / (lo * diff)
        if np.any(near):
            # d/ds Lambda(s, t) = exp(-x) g'(x) with x = log(s/t), g(x) = expm1(x)/x
            def dfirst(y):
                gp = 1 / 2 + y * (1 / 3 + y * (1 / 8 + y * (1 / 30 + y / 144)))
                return np.exp(-y) * gp

            series = lo * (1.0 + x * (1 / 2 + x * (1 / 6 + x * (1 / 24 + x / 120))))
            lam = np.where(near, series, lam)
            d_hi = np.where(near, dfirst(x), d_hi)
            d_lo = np.where(near, dfirst(-x), d_lo)
        return lam, d_hi, d_lo


@dataclass(frozen=True, repr=False)
class FMean(MeanFunction):
    """Mean ``(s - t) / (f'(s) - f'(t))`` with diagonal value ``1 / f''(s)``.

    Requires callables for ``f'``, ``f''`` and ``f'''``.
    """

    df: Callable
    d2f: Callable
    d3f: Callable
    name: str = "f"
    kind = "f-mean"

    def _near(self, hi, lo):
        return (hi - lo) <= QUADRATURE_THRESHOLD * hi

    def _value(self, hi, lo):
        near = self._near(hi, lo)
        inv = _line_average(self.d2f, lo, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = self.df(hi) - self.df(lo)
            far = (hi - lo) / denom
        if np.any(~near & (denom == 0)):
            raise DegenerateMeanError(f"f'(s) == f'(t) with s != t for mean {self.name}")
        return np.where(near, 1.0 / inv, far)

    def _partial_hi_lo(self, hi, lo):
        return self._all_hi_lo(hi, lo)[1:]

    def _all_hi_lo(self, hi, lo):
        near = self._near(hi, lo)
        lam = self._value(hi, lo)
        # near the diagonal: Lambda = 1 / int_0^1 f''(lo + theta (hi - lo)) dtheta
        i_hi = _line_average(self.d3f, lo, hi, weight="theta")
        i_lo = _line_average(self.d3f, lo, hi) - i_hi
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = self.df(hi) - self.df(lo)
            d_hi_far = (denom - (hi - lo) * self.d2f(hi)) / denom**2
            d_lo_far = (-denom + (hi - lo) * self.d2f(lo)) / denom**2
        return (
            lam,
            np.where(near, -(lam**2) * i_hi, d_hi_far),
            np.where(near, -(lam**2) * i_lo, d_lo_far),
        )


@dataclass(frozen=True, repr=False)
class ErbarMaasMean(MeanFunction):
    """Mean ``(phi(s) - phi(t)) / (U'(s) - U'(t))`` where ``s U''(s) = phi'(s)``.

    Needs ``phi`` with two derivatives and ``U'`` with two derivatives.
    """

    phi: Callable
    dphi: Callable
    d2phi: Callable
    dU: Callable
    d2U: Callable
    d3U: Callable
    name: str = "erbar-maas"
    kind = "erbar-maas"

    def _near(self, hi, lo):
        return (hi - lo) <= QUADRATURE_THRESHOLD * hi

    def _value(self, hi, lo):
        near = self._near(hi, lo)
        num = _line_average(self.dphi, lo, hi)
        den = _line_average(self.d2U, lo, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = self.dU(hi) - self.dU(lo)
            far = (self.phi(hi) - self.phi(lo)) / denom
        if np.any(~near & (denom == 0)):
            raise DegenerateMeanError(f"U'(s) == U'(t) with s != t for mean {self.name}")
        return np.where(near, num / den, far)

    def _partial_hi_lo(self, hi, lo):
        near = self._near(hi, lo)
        a = _line_average(self.dphi, lo, hi)
        b = _line_average(self.d2U, lo, hi)
        a_hi = _line_average(self.d2phi, lo, hi, weight="theta")
        a_lo = _line_average(self.d2phi, lo, hi) - a_hi
        b_hi = _line_average(self.d3U, lo, hi, weight="theta")
        b_lo = _line_average(self.d3U, lo, hi) - b_hi
        near_hi = (a_hi * b - a * b_hi) / b**2
        near_lo = (a_lo * b - a * b_lo) / b**2
        with np.errstate(divide="ignore", invalid="ignore"):
            dphi_diff = self.phi(hi) - self.phi(lo)
            du_diff = self.dU(hi) - self.dU(lo)
            far_hi = (self.dphi(hi) * du_diff - dphi_diff * self.d2U(hi)) / du_diff**2
            far_lo = (-self.dphi(lo) * du_diff + dphi_diff * self.d2U(lo)) / du_diff**2
        return np.where(near, near_hi, far_hi), np.where(near, near_lo, far_lo)


class PowerMean(ErbarMaasMean):
    """``(alpha - 1)/alpha * (s**alpha - t**alpha) / (s**(alpha-1) - t**(alpha-1))``.

    ``alpha == 1`` is the logarithmic mean and ``alpha == 2`` the arithmetic mean.
    """

    kind = "power"

    def __init__(self, alpha: float):
        alpha = float(alpha)
        if not alpha > 0:
            raise DomainError("power mean requires alpha > 0")
        a = alpha
        if a == 1.0:
            du = np.log
            d2u = lambda s: 1.0 / s
            d3u = lambda s: -1.0 / s**2
        else:
            c = a / (a - 1.0)
            du = lambda s: c * s ** (a - 1.0)
            d2u = lambda s: a * s ** (a - 2.0)
            d3u = lambda s: a * (a - 2.0) * s ** (a - 3.0)
        super().__init__(
            phi=lambda s: s**a,
            dphi=lambda s: a * s ** (a - 1.0),
            d2phi=lambda s: a * (a - 1.0) * s ** (a - 2.0),
            dU=du,
            d2U=d2u,
            d3U=d3u,
            name=f"power({a:g})",
        )
        object.__setattr__(self, "alpha", a)

    def _value(self, hi, lo):
        a = self.alpha
        if a == 1.0:
            return LogarithmicMean()._value(hi, lo)
        x = np.log(hi / lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.expm1(a * x) / np.expm1((a - 1.0) * x)
        return np.where(x == 0, lo, (a - 1.0) / a * lo * ratio)

    def _partial_hi_lo(self, hi, lo):
        if self.alpha == 1.0:
            return LogarithmicMean()._partial_hi_lo(hi, lo)
        return super()._partial_hi_lo(hi, lo)

    def _all_hi_lo(self, hi, lo):
        if self.alpha == 1.0:
            return LogarithmicMean()._all_hi_lo(hi, lo)
        return (self._value(hi, lo),) + tuple(super()._partial_hi_lo(hi, lo))


# ---------------------------------------------------------------------------
# functional interface


def log_mean(s, t):
    """Logarithmic mean ``(s - t) / (log s - log t)``, with ``log_mean(s, s) = s``."""
    return LogarithmicMean()(s, t)


def f_mean(f, s, t):
    """Mean induced by an entropy density ``f`` (an object with ``df``, ``d2f``, ``d3f``)."""
    return FMean(f.df, f.d2f, f.d3f, name=getattr(f, "name", "f"))(s, t)


def power_mean(alpha, s, t):
    """Erbar-Maas power mean; equals the arithmetic mean for ``alpha = 2``."""
    return PowerMean(alpha)(s, t)


def em_mean(phi, dphi, d2phi, dU, d2U, d3U, s, t):
    """``(phi(s) - phi(t)) / (U'(s) - U'(t))`` for callables ``phi`` and ``U'``."""
    return ErbarMaasMean(phi, dphi, d2phi, dU, d2U, d3U)(s, t)


def arithmetic_mean():
    """Erbar-Maas mean for ``phi(s) = s**2``, ``U'(s) = 2 s``, i.e. ``(s + t) / 2``."""
    return PowerMean(2.0)


def mean_partials(m: MeanFunction, s, t):
    """Return ``(d1, d2)``, the partial derivatives of ``m`` at ``(s, t)``."""
    return m.partials(s, t)


def log_mean_d1_closed_form(s, t):
    """``Lambda (s - Lambda) / (s (s - t))``; ill-conditioned as ``t -> s``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    lam = log_mean(s, t)
    return lam * (s - lam) / (s * (s - t))


# ---------------------------------------------------------------------------
# property checkers


@dataclass
class PropertyResult:
    name: str
    passed: bool
    residual: float
    tolerance: float
    witness: dict | None = None


@dataclass
class PropertyReport:
    subject: str
    results: list[PropertyResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def add(self, name, residuals, tolerance, points):
        residuals = np.atleast_1d(np.asarray(residuals, dtype=float))
        if residuals.size == 0:
            self.results.append(PropertyResult(name, True, 0.0, tolerance))
            return
        worst = int(np.nanargmax(np.where(np.isnan(residuals), np.inf, residuals)))
        value = float(residuals[worst])
        witness = {k: float(np.atleast_1d(v)[worst]) for k, v in points.items()}
        self.results.append(PropertyResult(name, bool(value <= tolerance), value, tolerance, witness))

    def as_dict(self):
        return {
            "subject": self.subject,
            "passed": self.passed,
            "results": [
                {
                    "name": r.name,
                    "passed": r.passed,
                    "residual": r.residual,
                    "tolerance": r.tolerance,
                    "witness": r.witness,
                }
                for r in self.results
            ],
        }


def _golden_maximize(fun, lo, hi, iterations=90):
    """Vectorized golden-section search for the maximum of unimodal ``fun`` on [lo, hi]."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = np.array(lo, dtype=float), np.array(hi, dtype=float)
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iterations):
        left = fc > fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - inv_phi * (b - a)
        new_d = a + inv_phi * (b - a)
        # reuse one of the interior evaluations
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        fc_next = np.where(left, fun(new_c), fd)
        fd_next = np.where(left, fc, fun(new_d))
        c, d, fc, fd = c_next, d_next, fc_next, fd_next
    x = 0.5 * (a + b)
    return x, fun(x)


def max_tangent_gap(t, slope, grid_points=64, span=1e3):
    """``max_{r > 0} (Lambda(r, t) - slope * r)`` for the logarithmic mean.

    Coarse log-spaced grid over ``[t/span, t*span]`` (widened while the maximizer sits
    on the boundary) followed by golden-section refinement in ``log r``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    slope = np.atleast_1d(np.asarray(slope, dtype=float))
    lm = LogarithmicMean()
    lo_exp = np.full(t.shape, -np.log10(span))
    hi_exp = np.full(t.shape, np.log10(span))
    for _ in range(8):
        frac = np.linspace(0.0, 1.0, grid_points)
        exps = lo_exp[:, None] + frac[None, :] * (hi_exp - lo_exp)[:, None]
        r = t[:, None] * 10.0**exps
        vals = lm(r, np.broadcast_to(t[:, None], r.shape)) - slope[:, None] * r
        j = np.argmax(vals, axis=1)
        at_low = j == 0
        at_high = j == grid_points - 1
        if not (at_low.any() or at_high.any()):
            break
        lo_exp = np.where(at_low, lo_exp - 3.0, lo_exp)
        hi_exp = np.where(at_high, hi_exp + 3.0, hi_exp)
    rows = np.arange(t.size)
    left = np.log(r[rows, np.maximum(j - 1, 0)])
    right = np.log(r[rows, np.minimum(j + 1, grid_points - 1)])

    def objective(logr):
        rr = np.exp(logr)
        return lm(rr, t) - slope * rr

    _, best = _golden_maximize(objective, left, right)
    return np.maximum(best, vals[rows, j])


def check_lemma_a1(s, t, a, b, r_grid=64, tol=1e-6, fd_step=1e-5):
    """Check the five logarithmic-mean identities at the given sample points.

    (i) symmetry of value and partials, (ii) closed-form first partial against the
    implementation and against central differences, (iii) ``d1 + d2 = Lambda^2/(st)``,
    (iv) ``max_r (Lambda(r,t) - d1Lambda(t,s) r) = t d1Lambda(s,t)``,
    (v) ``Lambda(s,t)(a/s + b/t) >= 2 sqrt(ab)``.
    Residuals are relative; failures are report entries, never exceptions.
    """
    s, t, a, b = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (s, t, a, b))
    s, t, a, b = np.broadcast_arrays(s, t, a, b)
    lm = LogarithmicMean()
    report = PropertyReport("logarithmic mean identities")
    pts = {"s": s, "t": t}

    lam_st, lam_ts = lm(s, t), lm(t, s)
    d1_st, d2_st = lm.partials(s, t)
    d1_ts, d2_ts = lm.partials(t, s)
    sym = np.maximum(
        np.abs(lam_st - lam_ts) / lam_st,
        np.abs(d1_st - d2_ts) / np.maximum(np.abs(d1_st), 1e-300),
    )
    report.add("(i) symmetry", sym, tol, pts)

    off = np.abs(s - t) > 1e-3 * np.maximum(s, t)
    so, to = s[off], t[off]
    closed = log_mean_d1_closed_form(so, to)
    hs = fd_step * so
    fd = (lm(so + hs, to) - lm(so - hs, to)) / (2 * hs)
    impl = d1_st[off]
    res_ii = np.maximum(np.abs(closed - impl), np.abs(closed - fd)) / np.abs(closed)
    report.add("(ii) closed-form d1", res_ii, tol, {"s": so, "t": to})

    target = lam_st**2 / (s * t)
    report.add("(iii) sum of partials", np.abs(d1_st + d2_st - target) / target, tol, pts)

    rhs_iv = t * d1_st
    lhs_iv = max_tangent_gap(t, d1_ts, grid_points=r_grid)
    report.add("(iv) tangent maximum", np.abs(lhs_iv - rhs_iv) / np.abs(rhs_iv), tol, pts)

    lower = 2.0 * np.sqrt(a * b)
    lhs_v = lam_st * (a / s + b / t)
    report.add(
        "(v) weighted AM-GM",
        np.maximum(0.0, lower - lhs_v) / lower,
        tol,
        {"s": s, "t": t, "a": a, "b": b},
    )
    return report


def second_order_gap(m: MeanFunction, u0, u1, u2, u3):
    """Left minus right side of the second-difference inequality for concave means.

    ``-m(u0,u1) + 2 m(u1,u2) - m(u2,u3)
      - d1m(u1,u2) (2u1 - u0 - u2) - d2m(u1,u2) (2u2 - u1 - u3)``; nonnegative
    whenever ``m`` is jointly concave.
    """
    d1, d2 = m.partials(u1, u2)
    lhs = -m(u0, u1) + 2.0 * m(u1, u2) - m(u2, u3)
    rhs = d1 * (-u0 + 2.0 * u1 - u2) + d2 * (-u1 + 2.0 * u2 - u3)
    return lhs - rhs


def hessian_max_eigenvalue(m: MeanFunction, s, t, rel_step=1e-4):
    """Largest eigenvalue of the central-difference Hessian of ``m`` at ``(s, t)``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    hs, ht = rel_step * s, rel_step * t
    f0 = m(s, t)
    fss = (m(s + hs, t) - 2 * f0 + m(s - hs, t)) / hs**2
    ftt = (m(s, t + ht) - 2 * f0 + m(s, t - ht)) / ht**2
    fst = (m(s + hs, t + ht) - m(s + hs, t - ht) - m(s - hs, t + ht) + m(s - hs, t - ht)) / (
        4 * hs * ht
    )
    mid = 0.5 * (fss + ftt)
    rad = np.sqrt(0.25 * (fss - ftt) ** 2 + fst**2)
    return mid + rad


def check_concavity(m: MeanFunction, sample_count=10_000, rng=None, low=1e-2, high=1e2,
                    ineq_tol=1e-9, hess_tol=1e-6):
    """Randomized check of joint concavity of ``m``.

    Samples log-uniform quadruples for the second-difference inequality and
    log-uniform points for negative semidefiniteness of the numerical Hessian.
    Residuals are scaled to be invariant under ``(s, t) -> (c s, c t)``.
    """
    rng = np.random.default_rng(rng)
    report = PropertyReport(f"concavity of {m.name}")
    u = np.exp(rng.uniform(np.log(low), np.log(high), size=(4, sample_count)))
    gap = second_order_gap(m, *u)
    scale = u.max(axis=0)
    report.add(
        "second-difference inequality",
        -gap / scale,
        ineq_tol,
        {f"u{i}": u[i] for i in range(4)},
    )
    st = np.exp(rng.uniform(np.log(low), np.log(high), size=(2, sample_count)))
    top = hessian_max_eigenvalue(m, st[0], st[1])
    report.add(
        "Hessian negative semidefinite",
        top * 0.5 * (st[0] + st[1]),
        hess_tol,
        {"s": st[0], "t": st[1]},
    )
    return report
