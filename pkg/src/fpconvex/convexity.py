"""Edge-space convexity matrices, the constant ``lambda_h`` and PSD certificates.

For a state ``rho`` the second derivative of the entropy along a geodesic with
momentum ``psi`` is ``1/2 <Mt G psi, G psi>`` where ``Mt`` is a symmetric
tridiagonal ``n x n`` matrix on edges,

    Mt = DL(rho)[Q phi(rho)] + diag(kappa) G W^-1 Phi' G^T L + L G Phi' W^-1 G^T diag(kappa).

Entropy is displacement ``lambda``-convex at ``rho`` iff ``Mt - lambda L`` is
positive semidefinite on the range of ``G`` (all of edge space).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import markov
from .errors import ConfigurationError, ScopeError
from .flow import FlowSystem, check_state, edge_weights
from .tridiag import TridiagonalMatrix, eigenvector, smallest_eigenvalue

DOMINANCE_TOL = 1e-12
EIGENVALUE_TOL = 1e-10


def _pad_edges(u):
    """Ghost values ``u_{-1} = u_0`` and ``u_{n+1} = u_n``."""
    return np.concatenate([u[:1], u, u[-1:]])


def tilde_m_coefficients(kappa, lam, d1, d2, chain, p, u):
    """Closed-form bands of ``h**2 * Mt``.

    ``lam, d1, d2`` are the mean and its partials on each edge, ``chain`` the
    derivative of the mean's arguments with respect to ``rho`` (per node), ``p``
    the factor ``phi'/w`` of the mobility term and ``u`` the node potential whose
    second differences appear. ``kappa`` are the edge weights.
    """
    n = lam.size
    ue = _pad_edges(u)  # ue[j + 1] = u_j
    k_ext = np.concatenate([[0.0], kappa, [0.0]])  # k_ext[k + 1] = kappa_k
    k = np.arange(n)
    left = k_ext[k] * (ue[k + 1] - ue[k]) + kappa * (u[:-1] - u[1:])
    right = kappa * (u[1:] - u[:-1]) + k_ext[k + 2] * (ue[k + 2] - ue[k + 3])
    a = (2 * kappa**2 * lam * (p[:-1] + p[1:])
         - kappa * chain[:-1] * d1 * left
         - kappa * chain[1:] * d2 * right)
    b = -kappa[:-1] * kappa[1:] * p[1:-1] * (lam[:-1] + lam[1:])
    return a, b


def assemble_tilde_m(sys: FlowSystem, rho) -> TridiagonalMatrix:
    """``Mt`` for any system whose mean is evaluated at ``u = phi(rho) / w``."""
    rho = check_state(sys, rho)
    u = sys.u(rho)
    lam = sys.mean(u[:-1], u[1:])
    d1, d2 = sys.mean.partials(u[:-1], u[1:])
    p = sys.du(rho)
    a, b = tilde_m_coefficients(sys.kappa, lam, d1, d2, p, p, u)
    return TridiagonalMatrix(a, b, 1.0 / sys.h**2)


def assemble_heat_tilde_m(sys: FlowSystem, rho) -> TridiagonalMatrix:
    """Heat path: ``a_k = 4 L_k - d1L_k (2r_k - r_{k-1} - r_{k+1}) - d2L_k (2r_{k+1} - r_k - r_{k+2})``."""
    if not sys.is_heat:
        raise ScopeError("heat assembly needs phi = id and zero potential")
    rho = check_state(sys, rho)
    lam = sys.mean(rho[:-1], rho[1:])
    d1, d2 = sys.mean.partials(rho[:-1], rho[1:])
    r = _pad_edges(rho)
    k = np.arange(sys.n)
    a = (4 * lam
         - d1 * (2 * r[k + 1] - r[k] - r[k + 2])
         - d2 * (2 * r[k + 2] - r[k + 1] - r[k + 3]))
    b = -(lam[:-1] + lam[1:])
    return TridiagonalMatrix(a, b, 1.0 / sys.h**2)


def assemble_fp_tilde_m(sys: FlowSystem, rho) -> TridiagonalMatrix:
    """Fokker-Planck path with weights; coefficients follow the chain rule through ``u``."""
    return assemble_tilde_m(sys, rho)


def printed_fp_diagonal(sys: FlowSystem, rho) -> np.ndarray:
    """Diagonal coefficients with a single ``kappa_k`` and ``w_k`` in the mobility term.

    Kept only to quantify how far that variant sits from the assembled operator;
    it agrees with :func:`assemble_fp_tilde_m` when the weights are constant.
    """
    rho = check_state(sys, rho)
    u = sys.u(rho)
    w, kappa = sys.w, sys.kappa
    lam = sys.mean(u[:-1], u[1:])
    d1, d2 = sys.mean.partials(u[:-1], u[1:])
    dphi = sys.phi.d1(rho)
    ue = _pad_edges(u)
    k_ext = np.concatenate([[0.0], kappa, [0.0]])
    k = np.arange(sys.n)
    left = k_ext[k] * (ue[k + 1] - ue[k]) + kappa * (u[:-1] - u[1:])
    right = kappa * (u[1:] - u[:-1]) + k_ext[k + 2] * (ue[k + 2] - ue[k + 3])
    return (2 * kappa * lam * (dphi[:-1] / w[:-1] + dphi[1:] / w[:-1])
            - kappa * dphi[:-1] / w[:-1] * d1 * left
            - kappa * dphi[1:] / w[1:] * d2 * right)


def lambda_h(sys: FlowSystem, rho) -> float:
    """Convexity constant for the weighted scheme with quadratic potential.

    ``(2/h^2)(1 - exp(-gamma h^2/2)) min phi' - 2 gamma cosh(gamma h) max |grad_h phi'|``.
    """
    gamma = sys.gamma
    if not gamma > 0:
        raise ScopeError("lambda_h needs a quadratic potential with gamma > 0")
    rho = check_state(sys, rho)
    h = sys.h
    dphi = sys.phi.d1(rho)
    lead = -2.0 / h**2 * np.expm1(-gamma * h**2 / 2)
    slope = 0.0 if sys.phi.is_identity else float(np.abs(np.diff(dphi)).max() / h)
    return float(lead * dphi.min() - 2 * gamma * np.cosh(gamma * h) * slope)


def lambda_h_identity(gamma, h) -> float:
    """State-independent value for ``phi = id``."""
    return float(-2.0 / h**2 * np.expm1(-gamma * h**2 / 2))


class Certificate(str, Enum):
    DOMINANCE = "DominanceCertified"
    EIGENVALUE = "EigenvalueCertified"
    NOT_PSD = "NotPSD"


@dataclass
class ConvexityReport:
    lam: float
    dominance_margin: float
    smallest_eigenvalue: float
    certificate: Certificate
    a: np.ndarray
    b: np.ndarray
    scale: float
    witness: np.ndarray | None = None
    witness_value: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def certified(self):
        return self.certificate is not Certificate.NOT_PSD

    def as_dict(self):
        out = {
            "certificate": self.certificate.value,
            "lambda": self.lam,
            "dominance_margin": self.dominance_margin,
            "smallest_eigenvalue": self.smallest_eigenvalue,
            "scale": self.scale,
            "a": [float(x) for x in self.a],
            "b": [float(x) for x in self.b],
        }
        if self.witness is not None:
            out["witness"] = [float(x) for x in self.witness]
            out["witness_value"] = self.witness_value
        out.update(self.extra)
        return out


def dominance_margins(T: TridiagonalMatrix) -> np.ndarray:
    r = np.zeros_like(T.a)
    r[:-1] += np.abs(T.b)
    r[1:] += np.abs(T.b)
    return T.a - r


def certify(tilde_m: TridiagonalMatrix, L, lam) -> ConvexityReport:
    """Decide whether ``tilde_m - lam * diag(L)`` is positive semidefinite.

    Row dominance is tried first; otherwise the smallest eigenvalue decides.
    A failed certificate carries an eigenvector ``v`` with negative quadratic form.
    """
    L = np.asarray(L, dtype=float)
    if L.shape != tilde_m.a.shape:
        raise ConfigurationError(f"size mismatch: matrix {tilde_m.size}, weights {L.size}")
    if np.any(~(L > 0)):
        raise ConfigurationError("edge weights must be positive")
    S = tilde_m.shifted(lam * L)
    ref = max(np.abs(tilde_m.a).max(), np.abs(tilde_m.b).max(initial=0.0),
              abs(lam) * np.abs(L).max() / tilde_m.scale, np.finfo(float).tiny)
    margin = float(dominance_margins(S).min())
    eig = smallest_eigenvalue(S)
    if margin >= -DOMINANCE_TOL * ref:
        cert = Certificate.DOMINANCE
    elif eig >= -EIGENVALUE_TOL * ref * S.scale:
        cert = Certificate.EIGENVALUE
    else:
        cert = Certificate.NOT_PSD
    report = ConvexityReport(float(lam), margin, float(eig), cert, S.a + lam * L / S.scale,
                             S.b, S.scale)
    if cert is Certificate.NOT_PSD:
        v = eigenvector(S, eig)
        report.witness = v
        report.witness_value = S.quadratic(v)
    return report


def certify_state(sys: FlowSystem, rho, lam=None) -> ConvexityReport:
    """Assemble and certify at ``rho``; ``lam`` defaults to 0 without potential and ``lambda_h`` otherwise."""
    if lam is None:
        lam = lambda_h(sys, rho) if sys.gamma > 0 else 0.0
    Mt = assemble_heat_tilde_m(sys, rho) if sys.is_heat else assemble_fp_tilde_m(sys, rho)
    return certify(Mt, edge_weights(sys, rho), lam)


def second_derivative_formula(sys: FlowSystem, rho, psi) -> float:
    """``1/2 <Mt G psi, G psi>``: second time derivative of the entropy along a geodesic."""
    Mt = assemble_tilde_m(sys, rho)
    g = markov.grad(np.asarray(psi, dtype=float), sys.h)
    return 0.5 * Mt.quadratic(g)
