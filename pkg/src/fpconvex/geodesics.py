"""Geodesics of the transport metric induced by the Onsager operator.

Geodesics solve the Hamiltonian system with ``H(rho, psi) = 1/2 <K(rho) psi, psi>``::

    rho' = K(rho) psi,    psi' = -1/2 <DK(rho)[.] psi, psi>.

Boundary value problems are solved by Newton shooting on the initial edge
gradient ``G psi(0)``; if that stalls, a discrete action over sampled paths is
minimized and used to restart the shooting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sp_integrate
from scipy import optimize

from . import markov
from .convexity import second_derivative_formula
from .errors import DomainError, GeodesicError
from .flow import FlowSystem, check_state, edge_weights, edge_weights_and_partials, node_entropy

MAX_NEWTON = 50
COARSE_SAMPLES = 33
FINE_SAMPLES = 65


# ---------------------------------------------------------------------------
# Hamiltonian system


def geodesic_rhs(sys: FlowSystem, rho, psi):
    """Return ``(d rho/dt, d psi/dt)``."""
    h = sys.h
    g = markov.grad(psi, h)
    L, dl, dr = edge_weights_and_partials(sys, rho)
    drho = markov.grad_adjoint(L * g, h)
    dpsi = np.zeros_like(rho)
    dpsi[:-1] -= 0.5 * dl * g**2
    dpsi[1:] -= 0.5 * dr * g**2
    return drho, dpsi


def hamiltonian(sys: FlowSystem, rho, psi) -> float:
    g = markov.grad(psi, sys.h)
    return 0.5 * float(np.sum(edge_weights(sys, rho) * g**2))


def speed(sys: FlowSystem, rho, psi) -> float:
    """``<K(rho) psi, psi>``, the squared metric speed."""
    return 2.0 * hamiltonian(sys, rho, psi)


def psi_from_gradient(g, h):
    """Node potential with ``G psi = g`` and zero sum."""
    psi = np.concatenate([[0.0], -h * np.cumsum(g)])
    return psi - psi.mean()


def _admissible(rho):
    return bool(np.all(np.isfinite(rho)) and np.all(rho > 0))


def _rhs_stacked(sys, y):
    m = sys.n + 1
    drho, dpsi = geodesic_rhs(sys, y[:m], y[m:])
    return np.concatenate([drho, dpsi])


def integrate_geodesic(sys: FlowSystem, rho0, psi0, t_end=1.0, steps=128, record_every=None):
    """Fixed-step RK4 for the geodesic equations.

    Returns ``(ts, rhos, psis)`` at every ``record_every``-th step (only the end
    point if None), or None if a stage leaves the positive orthant.
    """
    m = sys.n + 1
    y = np.concatenate([rho0, psi0]).astype(float)
    dt = t_end / steps
    ts, rs, ps = [0.0], [y[:m].copy()], [y[m:].copy()]
    for s in range(steps):
        stages = []
        yi = y
        for c in (0.0, 0.5, 0.5, 1.0):
            if stages:
                yi = y + c * dt * stages[-1]
            if not _admissible(yi[:m]):
                return None
            stages.append(_rhs_stacked(sys, yi))
        k1, k2, k3, k4 = stages
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not _admissible(y[:m]):
            return None
        if record_every and (s + 1) % record_every == 0:
            ts.append((s + 1) * dt)
            rs.append(y[:m].copy())
            ps.append(y[m:] - y[m:].mean())
    if not record_every:
        return np.array([t_end]), y[None, :m].copy(), (y[m:] - y[m:].mean())[None]
    return np.array(ts), np.array(rs), np.array(ps)


# ---------------------------------------------------------------------------
# paths


@dataclass
class GeodesicPath:
    rho0: np.ndarray
    rho1: np.ndarray
    t: np.ndarray
    rho: np.ndarray
    psi: np.ndarray
    action: float
    residual: float
    method: str
    steps: int = 0
    info: dict = field(default_factory=dict)

    @property
    def distance(self):
        return float(np.sqrt(max(self.action, 0.0)))

    def speeds(self, sys: FlowSystem):
        return np.array([speed(sys, r, p) for r, p in zip(self.rho, self.psi)])

    def as_dict(self):
        return {
            "W": self.distance,
            "action": self.action,
            "residual": self.residual,
            "method": self.method,
            "steps": self.steps,
            **self.info,
        }


def _cumulative_residual(rho, target):
    return np.cumsum(rho - target)[:-1]


def _initial_gradient(sys, rho0, rho1):
    mid = 0.5 * (rho0 + rho1)
    G = markov.gradient_matrix(sys.grid)
    K = G.T @ (edge_weights(sys, mid)[:, None] * G)
    psi = np.linalg.pinv(K) @ (rho1 - rho0)
    return markov.grad(psi, sys.h)


def _endpoint(sys, rho0, g, steps):
    out = integrate_geodesic(sys, rho0, psi_from_gradient(g, sys.h), 1.0, steps)
    return None if out is None else out[1][-1]


def _newton(sys, rho0, rho1, g, tol, steps):
    """Newton on the endpoint map; returns (g, residual_inf, iterations, converged)."""
    end = _endpoint(sys, rho0, g, steps)
    if end is None:
        return g, np.inf, 0, False
    F = _cumulative_residual(end, rho1)
    res = float(np.abs(end - rho1).max())
    for it in range(1, MAX_NEWTON + 1):
        if res <= tol:
            return g, res, it - 1, True
        J = np.empty((F.size, g.size))
        for j in range(g.size):
            eps = 1e-7 * max(1.0, abs(g[j]))
            gp = g.copy()
            gp[j] += eps
            e = _endpoint(sys, rho0, gp, steps)
            if e is None:
                gp[j] -= 2 * eps
                e = _endpoint(sys, rho0, gp, steps)
                if e is None:
                    return g, res, it, False
                eps = -eps
            J[:, j] = (_cumulative_residual(e, rho1) - F) / eps
        try:
            delta = np.linalg.lstsq(J, -F, rcond=None)[0]
        except np.linalg.LinAlgError:
            return g, res, it, False
        fnorm = np.linalg.norm(F)
        step = 1.0
        accepted = False
        while step >= 1.0 / 1024:
            trial = g + step * delta
            e = _endpoint(sys, rho0, trial, steps)
            if e is not None:
                Ft = _cumulative_residual(e, rho1)
                if np.linalg.norm(Ft) < fnorm * (1 - 1e-4 * step) or np.linalg.norm(Ft) == 0:
                    g, F, end = trial, Ft, e
                    res = float(np.abs(end - rho1).max())
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            return g, res, it, res <= tol
    return g, res, MAX_NEWTON, res <= tol


def _path_from_gradient(sys, rho0, rho1, g, steps, samples, res, method, info):
    every = steps // (samples - 1)
    ts, rs, ps = integrate_geodesic(sys, rho0, psi_from_gradient(g, sys.h), 1.0, steps, every)
    sp = np.array([speed(sys, r, p) for r, p in zip(rs, ps)])
    action = float(sp_integrate.simpson(sp, x=ts))
    return GeodesicPath(rho0, rho1, ts, rs, ps, action, res, method, steps, info)


def _shoot_from(sys, rho0, rho1, g, tol, steps, max_steps):
    """Newton shooting with step-count refinement until RK4 error is below ``tol``."""
    total_iters = 0
    while True:
        g, res, iters, ok = _newton(sys, rho0, rho1, g, tol, steps)
        total_iters += iters
        if not ok:
            return g, res, steps, total_iters, False
        fine = _endpoint(sys, rho0, g, 2 * steps)
        drift = np.inf if fine is None else float(np.abs(fine - rho1).max())
        if drift <= max(tol, 0.0) or 2 * steps > max_steps:
            return g, max(res, drift), steps, total_iters, drift <= tol
        steps *= 2


def shoot(sys: FlowSystem, rho0, rho1, tol=1e-8, samples=33, steps=128, max_steps=2048,
          fallback=True) -> GeodesicPath:
    """Geodesic from ``rho0`` to ``rho1`` with endpoint error at most ``tol`` (sup norm).

    ``samples - 1`` must divide ``steps``. Raises :class:`GeodesicError` with the
    residuals of both methods when neither converges.
    """
    rho0 = check_state(sys, rho0)
    rho1 = check_state(sys, rho1)
    if abs(rho0.sum() - rho1.sum()) > 1e-12 * rho0.sum():
        raise DomainError("endpoints carry different mass")
    if steps % (samples - 1):
        raise ValueError("samples - 1 must divide steps")
    if np.array_equal(rho0, rho1):
        ts = np.linspace(0, 1, samples)
        return GeodesicPath(rho0, rho1, ts, np.tile(rho0, (samples, 1)),
                            np.zeros((samples, rho0.size)), 0.0, 0.0, "trivial")
    g0 = _initial_gradient(sys, rho0, rho1)
    g, res, used, iters, ok = _shoot_from(sys, rho0, rho1, g0, tol, steps, max_steps)
    if ok:
        return _path_from_gradient(sys, rho0, rho1, g, used, samples, res, "shooting",
                                   {"newton_iterations": iters})
    residuals = {"shooting": res}
    if not fallback:
        raise GeodesicError("shooting did not converge", residuals)
    try:
        mini = minimize_action(sys, rho0, rho1)
    except (DomainError, FloatingPointError) as exc:
        residuals["minimization"] = float("inf")
        raise GeodesicError(f"shooting stalled and action minimization failed: {exc}", residuals)
    residuals["minimization"] = mini.residual
    g, res2, used, iters, ok = _shoot_from(sys, rho0, rho1, mini.info["initial_gradient"], tol,
                                           steps, max_steps)
    if ok:
        info = {"newton_iterations": iters, "minimization_action": mini.action}
        return _path_from_gradient(sys, rho0, rho1, g, used, samples, res2,
                                   "minimization+shooting", info)
    residuals["shooting_restart"] = res2
    if mini.residual <= tol:
        return mini
    raise GeodesicError("no method reached the requested tolerance", residuals)


def distance(sys: FlowSystem, rho0, rho1, tol=1e-8) -> float:
    return shoot(sys, rho0, rho1, tol).distance


# ---------------------------------------------------------------------------
# discrete action


def _discrete_action(sys, states, dt):
    """Action of a sampled path and its gradient with respect to every state."""
    h = sys.h
    diff = np.diff(states, axis=0)
    C = np.cumsum(diff, axis=1)[:, :-1]
    mids = 0.5 * (states[:-1] + states[1:])
    L, dl, dr = edge_weights_and_partials(sys, mids)
    A = float(h**2 / dt * np.sum(C**2 / L))
    P = 2 * h**2 / dt * C / L
    R = -h**2 / dt * C**2 / L**2
    S = np.concatenate([np.cumsum(P[:, ::-1], axis=1)[:, ::-1], np.zeros((P.shape[0], 1))], axis=1)
    Mg = np.zeros_like(mids)
    Mg[:, :-1] += R * dl
    Mg[:, 1:] += R * dr
    grad = np.zeros_like(states)
    grad[1:] += S + 0.5 * Mg
    grad[:-1] += -S + 0.5 * Mg
    return A, grad, L, C


def _solve_discrete(sys, rho0, rho1, init, samples):
    mass = rho0.sum()
    dt = 1.0 / (samples - 1)
    shape = (samples - 2, rho0.size)

    def unpack(z):
        z = z.reshape(shape)
        e = np.exp(z - z.max(axis=1, keepdims=True))
        inner = mass * e / e.sum(axis=1, keepdims=True)
        return np.vstack([rho0, inner, rho1])

    def fun(z):
        states = unpack(z)
        A, grad, _, _ = _discrete_action(sys, states, dt)
        inner, gi = states[1:-1], grad[1:-1]
        gz = inner * (gi - np.sum(gi * inner, axis=1, keepdims=True) / mass)
        return A, gz.ravel()

    z0 = np.log(init[1:-1]).ravel()
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        sol = optimize.minimize(fun, z0, jac=True, method="L-BFGS-B",
                                options={"maxiter": 20000, "ftol": 1e-15, "gtol": 1e-12})
    return unpack(sol.x), float(sol.fun), dt


def minimize_action(sys: FlowSystem, rho0, rho1) -> GeodesicPath:
    """Minimize the discrete action on 33 and then 65 time samples.

    The two values are Richardson-combined; their gap is reported as the residual.
    """
    lin = np.linspace(0, 1, COARSE_SAMPLES)[:, None]
    init = (1 - lin) * rho0 + lin * rho1
    coarse, a_coarse, _ = _solve_discrete(sys, rho0, rho1, init, COARSE_SAMPLES)
    refined = np.empty((FINE_SAMPLES, rho0.size))
    refined[::2] = coarse
    refined[1::2] = 0.5 * (coarse[:-1] + coarse[1:])
    fine, a_fine, dt = _solve_discrete(sys, rho0, rho1, refined, FINE_SAMPLES)
    action = (4 * a_fine - a_coarse) / 3
    gap = abs(a_fine - a_coarse) / max(abs(action), np.finfo(float).tiny)

    _, _, L, C = _discrete_action(sys, fine, dt)
    grads = sys.h * C / dt / L  # edge gradients at interval midpoints
    g0 = 1.5 * grads[0] - 0.5 * grads[1]
    node_g = np.vstack([g0, 0.5 * (grads[:-1] + grads[1:]), 1.5 * grads[-1] - 0.5 * grads[-2]])
    psis = np.array([psi_from_gradient(g, sys.h) for g in node_g])
    ts = np.linspace(0, 1, FINE_SAMPLES)
    return GeodesicPath(rho0, rho1, ts, fine, psis, float(action), float(gap), "minimization",
                        FINE_SAMPLES - 1, {"initial_gradient": g0, "coarse_action": a_coarse,
                                           "fine_action": a_fine})


# ---------------------------------------------------------------------------
# convexity along geodesics


@dataclass
class VerificationReport:
    lam: float
    W: float
    t: np.ndarray
    entropy: np.ndarray
    chord_violation: float
    fd_second_derivative: np.ndarray
    formula_second_derivative: np.ndarray
    formula_mismatch: float
    differential_violation: float
    speed_deviation: float
    slack: float
    path: GeodesicPath

    @property
    def chord_ok(self):
        return self.chord_violation <= self.slack

    @property
    def formula_ok(self):
        return self.formula_mismatch <= 1.0

    @property
    def differential_ok(self):
        return self.differential_violation <= self.slack

    @property
    def constant_speed_ok(self):
        return self.speed_deviation <= 1e-3

    @property
    def passed(self):
        return self.chord_ok and self.formula_ok and self.differential_ok and self.constant_speed_ok

    def as_dict(self):
        return {
            "passed": self.passed,
            "lambda": self.lam,
            "W": self.W,
            "chord_ok": self.chord_ok,
            "chord_violation": self.chord_violation,
            "differential_ok": self.differential_ok,
            "differential_violation": self.differential_violation,
            "formula_ok": self.formula_ok,
            "formula_mismatch": self.formula_mismatch,
            "constant_speed_ok": self.constant_speed_ok,
            "speed_deviation": self.speed_deviation,
            "slack": self.slack,
        }


def local_entropy_curve(sys, rho, psi, offsets, substeps=8):
    """Entropy at ``t + offset`` along the geodesic through ``(rho, psi)``."""
    out = []
    for off in offsets:
        if off == 0:
            out.append(float(np.sum(node_entropy(sys, rho))))
            continue
        ts = integrate_geodesic(sys, rho, psi, off, substeps)
        if ts is None:
            raise DomainError("local geodesic left the positive orthant")
        out.append(float(np.sum(node_entropy(sys, ts[1][-1]))))
    return np.array(out)


def verify_displacement_convexity(sys: FlowSystem, rho0, rho1, lam=0.0, samples=9, tol=1e-9,
                                  slack=1e-6, fd_step=1e-3, path=None) -> VerificationReport:
    """Check the chord inequality and its differential form along the geodesic.

    The second derivative from a five-point stencil is compared with the
    edge-matrix formula at interior samples; ``formula_mismatch`` is the worst
    ratio of the discrepancy to ``max(1e-4 |value|, 1e-7)``.
    """
    if path is None:
        steps = 128 * (samples - 1) // np.gcd(128, samples - 1)
        path = shoot(sys, rho0, rho1, tol, samples=samples, steps=steps)
    W2 = path.action
    ts = path.t
    ent = np.array([np.sum(node_entropy(sys, r)) for r in path.rho])
    chord = (1 - ts) * ent[0] + ts * ent[-1] - 0.5 * lam * ts * (1 - ts) * W2
    scale = max(1.0, float(np.abs(ent).max()))
    chord_violation = float(np.max(ent - chord) / scale)

    fd, formula = [], []
    offsets = fd_step * np.array([-2, -1, 0, 1, 2])
    for r, p in zip(path.rho[1:-1], path.psi[1:-1]):
        e = local_entropy_curve(sys, r, p, offsets)
        fd.append((-e[0] + 16 * e[1] - 30 * e[2] + 16 * e[3] - e[4]) / (12 * fd_step**2))
        formula.append(second_derivative_formula(sys, r, p))
    fd, formula = np.array(fd), np.array(formula)
    allowed = np.maximum(1e-4 * np.abs(formula), 1e-7)
    mismatch = float(np.max(np.abs(fd - formula) / allowed, initial=0.0))
    diff_violation = float(np.max(lam * W2 - formula, initial=-np.inf) / max(1.0, abs(lam) * W2))

    sp = path.speeds(sys)
    dev = float(np.abs(sp - W2).max() / W2) if W2 > 0 else 0.0
    return VerificationReport(float(lam), path.distance, ts, ent, chord_violation, fd, formula,
                              mismatch, diff_violation, dev, slack, path)
