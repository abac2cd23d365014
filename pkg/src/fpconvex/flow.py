"""Entropies, Onsager operators and the semidiscrete gradient flow ``rho' = Q phi(rho)``.

A :class:`FlowSystem` bundles a grid, weights ``w = exp(-V)``, a nonlinearity ``phi``
and an entropy density ``f``. With ``u = phi(rho) / w`` the flow has the gradient
structure ``rho' = -K(rho) f'(u)`` where ``K = G^T L G`` and
``L = diag(kappa_k Lambda^f(u_k, u_{k+1}))``.

Two cases are the usual ones:

* heat path (:func:`heat_system`): ``phi = id`` and ``w = 1`` with any convex ``f``
* Fokker-Planck path (:func:`fokker_planck_system`): ``f(s) = s (log s - 1)`` so
  that ``Lambda^f`` is the logarithmic mean, with nonlinear ``phi`` and a
  quadratic potential
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sp_integrate

from . import markov
from .errors import ConfigurationError, DomainError, ScopeError
from .means import FMean, LogarithmicMean, MeanFunction
from .odeint import integrate_adaptive


# ---------------------------------------------------------------------------
# nonlinearities and densities


@dataclass(frozen=True)
class Nonlinearity:
    """``phi(s) = s`` ("identity") or ``phi(s) = s**alpha`` ("power")."""

    kind: str = "identity"
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ("identity", "power"):
            raise ConfigurationError(f"unknown nonlinearity {self.kind!r}")
        if self.kind == "power" and not self.alpha > 0:
            raise ConfigurationError("power nonlinearity needs alpha > 0")
        if self.kind == "identity":
            object.__setattr__(self, "alpha", 1.0)

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def power(cls, alpha):
        return cls("power", float(alpha))

    @property
    def is_identity(self):
        return self.kind == "identity" or self.alpha == 1.0

    def __call__(self, s):
        return s if self.kind == "identity" else s**self.alpha

    def d1(self, s):
        a = self.alpha
        return np.ones_like(s) if self.is_identity else a * s ** (a - 1)

    def d2(self, s):
        a = self.alpha
        return np.zeros_like(s) if self.is_identity else a * (a - 1) * s ** (a - 2)

    def inverse(self, y):
        return y if self.is_identity else y ** (1.0 / self.alpha)

    def log(self, s):
        return self.alpha * np.log(s)

    def log_antiderivative(self, s):
        """``F`` with ``F' = log phi`` and ``F(1) = 0``."""
        return self.alpha * (s * np.log(s) - s + 1.0)

    def derivative_log_ratio(self, s):
        """``|phi''(s) / phi'(s)|``."""
        return np.abs(self.alpha - 1.0) / s

    def describe(self):
        return "identity" if self.kind == "identity" else f"power({self.alpha:g})"


class EntropyDensity:
    name = "f"

    def mean(self) -> MeanFunction:
        return FMean(self.df, self.d2f, self.d3f, name=self.name)


class LogDensity(EntropyDensity):
    """``f(s) = s (log s - 1)``; induces the logarithmic mean."""

    name = "s(log s - 1)"

    def f(self, s):
        return s * (np.log(s) - 1.0)

    def df(self, s):
        return np.log(s)

    def d2f(self, s):
        return 1.0 / s

    def d3f(self, s):
        return -1.0 / s**2

    def mean(self):
        return LogarithmicMean()

    def __eq__(self, other):
        return isinstance(other, LogDensity)

    def __hash__(self):
        return hash("log-density")


@dataclass(frozen=True)
class PowerDensity(EntropyDensity):
    """``f(s) = s**alpha`` with ``alpha > 1``."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 1:
            raise ConfigurationError("power density needs alpha > 1 for convexity")

    @property
    def name(self):
        return f"s^{self.alpha:g}"

    def f(self, s):
        return s**self.alpha

    def df(self, s):
        a = self.alpha
        return a * s ** (a - 1)

    def d2f(self, s):
        a = self.alpha
        return a * (a - 1) * s ** (a - 2)

    def d3f(self, s):
        a = self.alpha
        return a * (a - 1) * (a - 2) * s ** (a - 3)


def density_from_name(name: str, alpha: float | None = None) -> EntropyDensity:
    if name in ("log", "entropy", "s(log s - 1)"):
        return LogDensity()
    if name == "power":
        return PowerDensity(float(alpha))
    raise ConfigurationError(f"unknown entropy density {name!r}")


# ---------------------------------------------------------------------------
# system


@dataclass(frozen=True)
class FlowSystem:
    grid: markov.Grid
    weights: markov.Weights
    phi: Nonlinearity = field(default_factory=Nonlinearity.identity)
    density: EntropyDensity = field(default_factory=LogDensity)
    Q: markov.RateMatrix = field(init=False, repr=False)
    mean: MeanFunction = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "Q", markov.build_rate_matrix(self.grid, self.weights))
        object.__setattr__(self, "mean", self.density.mean())

    @property
    def n(self):
        return self.grid.n

    @property
    def h(self):
        return self.grid.h

    @property
    def w(self):
        return self.weights.w

    @property
    def kappa(self):
        return self.weights.kappa

    @property
    def potential(self):
        return self.weights.potential

    @property
    def gamma(self):
        p = self.potential
        return p.gamma if p.kind == "quadratic" else 0.0

    @property
    def is_heat(self):
        """Identity nonlinearity with unit weights."""
        return self.phi.is_identity and self.potential.is_zero

    def u(self, rho):
        return self.phi(rho) / self.w

    def du(self, rho):
        """Derivative of ``u_i`` with respect to ``rho_i``."""
        return self.phi.d1(rho) / self.w

    def describe(self):
        return {
            "n": self.n,
            "potential": {"kind": self.potential.kind, "gamma": self.gamma},
            "phi": self.phi.describe(),
            "density": self.density.name,
        }


def heat_system(n, density: EntropyDensity | None = None, *, min_intervals=2) -> FlowSystem:
    grid = markov.build_grid(n, min_intervals=min_intervals)
    weights = markov.build_weights(grid, markov.Potential.zero())
    return FlowSystem(grid, weights, Nonlinearity.identity(), density or LogDensity())


def fokker_planck_system(n, phi: Nonlinearity | None = None, gamma=0.0, *, min_intervals=2) -> FlowSystem:
    grid = markov.build_grid(n, min_intervals=min_intervals)
    pot = markov.Potential.quadratic(gamma) if gamma else markov.Potential.zero()
    weights = markov.build_weights(grid, pot)
    return FlowSystem(grid, weights, phi or Nonlinearity.identity(), LogDensity())


def check_state(sys: FlowSystem, rho, *, simplex_tol=None):
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (sys.n + 1,):
        raise DomainError(f"state must have {sys.n + 1} entries, got shape {rho.shape}")
    if np.any(~(rho > 0)):
        raise DomainError("state has nonpositive entries")
    if simplex_tol is not None and abs(rho.sum() - 1.0) > simplex_tol:
        raise DomainError(f"state is not in the simplex (sum = {rho.sum()!r})")
    return rho


# ---------------------------------------------------------------------------
# entropy and gradient structure


def node_entropy(sys: FlowSystem, rho):
    """Per-node entropy contributions ``f_i(rho_i)`` with ``f_i'(s) = f'(phi(s)/w_i)``."""
    if sys.phi.is_identity:
        return sys.w * sys.density.f(rho / sys.w)
    if isinstance(sys.density, LogDensity):
        return sys.phi.log_antiderivative(rho) + rho * sys.weights.V
    out = np.empty_like(rho)
    for i, (r, wi) in enumerate(zip(rho, sys.w)):
        integrand = lambda s, wi=wi: sys.density.df(sys.phi(s) / wi)
        out[i] = sp_integrate.quad(integrand, 1.0, r, epsabs=1e-13, epsrel=1e-13)[0]
    return out


def entropy(sys: FlowSystem, rho) -> float:
    rho = check_state(sys, rho)
    return float(np.sum(node_entropy(sys, rho)))


def entropy_gradient(sys: FlowSystem, rho) -> np.ndarray:
    """``D E(rho)_i = f'(u_i)``; equals ``log u_i`` on the Fokker-Planck path."""
    rho = check_state(sys, rho)
    return sys.density.df(sys.u(rho))


def edge_weights(sys: FlowSystem, rho) -> np.ndarray:
    """Diagonal of ``L(rho)``: ``kappa_k Lambda(u_k, u_{k+1})``. Stacks of states are allowed."""
    u = sys.u(rho)
    return sys.kappa * sys.mean(u[..., :-1], u[..., 1:])


def edge_weights_and_partials(sys: FlowSystem, rho):
    """``L_k`` together with its derivatives in ``rho_k`` and ``rho_{k+1}``."""
    u = sys.u(rho)
    lam, d1, d2 = sys.mean.value_and_partials(u[..., :-1], u[..., 1:])
    p = sys.du(rho)
    k = sys.kappa
    return k * lam, k * d1 * p[..., :-1], k * d2 * p[..., 1:]


def edge_weight_partials(sys: FlowSystem, rho):
    """Derivatives of ``L_k`` with respect to ``rho_k`` and ``rho_{k+1}``."""
    return edge_weights_and_partials(sys, rho)[1:]


@dataclass(frozen=True)
class OnsagerOperator:
    """``K = G^T diag(edge) G`` on node vectors."""

    edge: np.ndarray
    h: float

    def matvec(self, psi):
        return markov.grad_adjoint(self.edge * markov.grad(psi, self.h), self.h)

    def quadratic(self, psi):
        g = markov.grad(psi, self.h)
        return float(np.sum(self.edge * g**2))

    def dense(self):
        G = markov.gradient_matrix(markov.Grid(self.edge.size))
        return G.T @ (self.edge[:, None] * G)


def onsager(sys: FlowSystem, rho) -> OnsagerOperator:
    rho = check_state(sys, rho)
    return OnsagerOperator(edge_weights(sys, rho), sys.h)


def _rhs(sys: FlowSystem, rho):
    u = sys.u(rho)
    flux = sys.kappa * (u[:-1] - u[1:]) / sys.h
    return -markov.grad_adjoint(flux, sys.h)


def rhs(sys: FlowSystem, rho) -> np.ndarray:
    """Right-hand side ``Q phi(rho)`` of the scheme, in flux form."""
    rho = check_state(sys, rho)
    return _rhs(sys, rho)


def entropy_dissipation(sys: FlowSystem, rho) -> float:
    """``dE/dt = -<K(rho) DE, DE>`` along the flow."""
    K = onsager(sys, rho)
    return -K.quadratic(entropy_gradient(sys, rho))


def discrete_l2_gradient(v, h):
    """``(sum_i h |(v_{i+1} - v_i)/h|^2)^{1/2}``."""
    g = markov.grad(v, h)
    return np.sqrt(h * np.sum(g**2, axis=-1))


# ---------------------------------------------------------------------------
# time integration


@dataclass
class Trajectory:
    system: FlowSystem
    t: np.ndarray
    rho: np.ndarray

    def __len__(self):
        return self.t.size

    @property
    def entropy(self):
        return np.array([np.sum(node_entropy(self.system, r)) for r in self.rho])

    @property
    def min_rho(self):
        return self.rho.min(axis=1)

    @property
    def max_rho(self):
        return self.rho.max(axis=1)

    @property
    def grad_norm(self):
        """Discrete l2 norm of the gradient of ``phi(rho)``; nonincreasing when V = 0."""
        return discrete_l2_gradient(self.system.phi(self.rho), self.system.h)

    @property
    def mass(self):
        return self.rho.sum(axis=1)


def integrate(sys: FlowSystem, rho0, t_end, tol=1e-9, t_eval=None, atol=None) -> Trajectory:
    """Adaptive Dormand-Prince integration of ``rho' = Q phi(rho)``.

    Steps producing a nonpositive entry are rejected and halved. Mass is conserved
    up to round-off because every stage increment has zero sum.
    """
    rho0 = check_state(sys, rho0)
    if not t_end > 0:
        raise ConfigurationError("t_end must be positive")
    ts, ys = integrate_adaptive(
        lambda t, y: _rhs(sys, y),
        0.0,
        rho0,
        t_end,
        rtol=tol,
        atol=tol if atol is None else atol,
        admissible=lambda y: bool(np.all(y > 0)),
        t_eval=t_eval,
    )
    return Trajectory(sys, ts, ys)


# ---------------------------------------------------------------------------
# a priori estimates


@dataclass
class EstimateCheck:
    name: str
    passed: bool
    violation: float
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.violation = float(self.violation)


@dataclass
class EstimateReport:
    checks: list[EstimateCheck]
    slack: float

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {
            "passed": self.passed,
            "slack": self.slack,
            "checks": [
                {"name": c.name, "passed": c.passed, "violation": c.violation, **c.detail}
                for c in self.checks
            ],
        }


def _max_abs_log_ratio(phi: Nonlinearity, lo, hi, samples=2001):
    s = np.geomspace(lo, hi, samples) if hi > lo else np.array([lo])
    return float(np.max(phi.derivative_log_ratio(s)))


def apriori_monitor(traj: Trajectory, slack=1e-8) -> EstimateReport:
    """Check the V = 0 a priori estimates at every sample of ``traj``.

    Violations are relative to the size of the bound. The power-law bounds are
    only evaluated for ``phi(s) = s**alpha`` with ``0 < alpha < 1``.
    """
    sys = traj.system
    if not sys.potential.is_zero:
        raise ScopeError("a priori estimates hold for the scheme without potential only")
    h, phi = sys.h, sys.phi
    rho = traj.rho
    rho0 = rho[0]
    m, M = float(rho0.min()), float(rho0.max())
    checks = []

    over = np.maximum(rho - M, m - rho).max()
    checks.append(EstimateCheck("maximum principle", bool(over <= slack * M), float(over / M),
                                {"min0": m, "max0": M}))

    phi_rho = phi(rho)
    grad_phi = np.abs(markov.grad(phi_rho, h)).max(axis=1)
    bound = h**-0.5 * discrete_l2_gradient(phi_rho[0], h)
    scale = max(bound, 1e-300)
    excess = float((grad_phi - bound).max())
    checks.append(EstimateCheck("gradient sup bound", bool(excess <= slack * scale), excess / scale,
                                {"bound": float(bound)}))

    energy = np.sum(np.diff(phi_rho, axis=1) ** 2, axis=1)
    e_scale = max(energy[0], 1e-300)
    growth = float(np.max(np.diff(energy), initial=0.0))
    checks.append(EstimateCheck("gradient l2 decay", bool(growth <= slack * e_scale), growth / e_scale))

    dphi = phi.d1(rho)
    grad_dphi = np.abs(markov.grad(dphi, h)).max(axis=1)
    rho_grad0 = discrete_l2_gradient(rho0, h)
    ratio_max = _max_abs_log_ratio(phi, float(phi.inverse(m)), float(phi.inverse(M)))
    bound2 = h**-0.5 * ratio_max * rho_grad0
    excess2 = float((grad_dphi - bound2).max())
    scale2 = max(bound2, 1e-300)
    checks.append(EstimateCheck("derivative gradient bound", bool(excess2 <= slack * scale2),
                                excess2 / scale2, {"bound": float(bound2)}))

    a = phi.alpha
    if phi.kind == "power" and 0 < a < 1:
        min_dphi = dphi.min(axis=1)
        upper = M ** (a - 1)
        ex_up = float((min_dphi - upper).max())
        checks.append(EstimateCheck("power: min phi' upper bound", bool(ex_up <= slack * upper),
                                    ex_up / upper, {"bound": upper}))
        lower = a * M ** (a - 1)
        ex_low = float((lower - min_dphi).max())
        checks.append(EstimateCheck("power: min phi' lower bound", bool(ex_low <= slack * lower),
                                    ex_low / lower, {"bound": lower}))
        bound3 = (1 - a) * m ** (-2 / a) * h**-0.5 * rho_grad0
        ex3 = float((grad_dphi - bound3).max())
        scale3 = max(bound3, 1e-300)
        checks.append(EstimateCheck("power: derivative gradient bound", bool(ex3 <= slack * scale3),
                                    ex3 / scale3, {"bound": float(bound3)}))
    return EstimateReport(checks, slack)


def check_nonlinearity_hypotheses(phi: Nonlinearity, lo=1e-6, hi=1.0, samples=512) -> dict:
    """Sample whether ``phi`` is nondecreasing and ``phi' o phi^{-1}`` nonincreasing."""
    s = np.geomspace(lo, hi, samples)
    vals = phi(s)
    comp = phi.d1(phi.inverse(vals))
    return {
        "nondecreasing": bool(np.all(np.diff(vals) >= 0)),
        "derivative_of_inverse_nonincreasing": bool(np.all(np.diff(comp) <= 1e-12 * np.abs(comp[:-1]))),
    }


# ---------------------------------------------------------------------------
# initial states


def uniform_state(n):
    return np.full(n + 1, 1.0 / (n + 1))


def gaussian_bump(n, center=0.5, width=0.15, floor=0.2):
    x = np.arange(n + 1) / n
    r = floor + np.exp(-0.5 * ((x - center) / width) ** 2)
    return r / r.sum()


def smooth_random_state(n, rng, modes=4, amplitude=0.5):
    """Uniform state perturbed by a few random cosine modes, normalized to unit mass."""
    rng = np.random.default_rng(rng)
    x = np.arange(n + 1) / n
    coef = rng.uniform(-1.0, 1.0, size=modes) / np.arange(1, modes + 1)
    pert = sum(c * np.cos(np.pi * (k + 1) * x) for k, c in enumerate(coef))
    pert = amplitude * pert / max(np.abs(pert).max(), 1e-12)
    r = 1.0 + pert
    return r / r.sum()


def dirichlet_state(n, rng, concentration=1.0, floor=1e-12):
    rng = np.random.default_rng(rng)
    r = rng.dirichlet(np.full(n + 1, concentration)) + floor
    return r / r.sum()
