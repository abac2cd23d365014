"""A scheme whose entropy is not displacement convex: ``phi(s) = s**2`` with the arithmetic mean.

The mean ``(phi(s) - phi(t)) / (U'(s) - U'(t))`` with ``U'(s) = 2s`` is ``(s + t)/2``
and the edge matrix uses it at ``(rho_k, rho_{k+1})`` directly. Its second leading
principal minor is a homogeneous quartic in ``rho_0..rho_4`` with a negative
``rho_2**4`` coefficient, so it can be negative.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from .convexity import tilde_m_coefficients
from .errors import ScopeError
from .means import MeanFunction, PowerMean
from .tridiag import TridiagonalMatrix

N_VARS = 5
DEGREE = 4

# reference expansion, keyed by exponent tuples of (rho_0, ..., rho_4)
PRINTED_EXPANSION: dict[tuple[int, ...], Fraction] = {
    (2, 2, 0, 0, 0): Fraction(1, 2),
    (2, 0, 2, 0, 0): Fraction(3, 2),
    (2, 0, 1, 1, 0): Fraction(4),
    (2, 0, 0, 2, 0): Fraction(3, 2),
    (2, 0, 0, 0, 2): Fraction(1, 2),
    (1, 3, 0, 0, 0): Fraction(1),
    (1, 1, 2, 0, 0): Fraction(3),
    (1, 1, 1, 1, 0): Fraction(8),
    (1, 1, 0, 2, 0): Fraction(3),
    (1, 1, 0, 0, 2): Fraction(1),
    (0, 4, 0, 0, 0): Fraction(1, 4),
    (0, 2, 1, 1, 0): Fraction(2),
    (0, 2, 0, 2, 0): Fraction(3, 4),
    (0, 2, 0, 0, 2): Fraction(1, 4),
    (0, 1, 3, 0, 0): Fraction(-4),
    (0, 1, 2, 1, 0): Fraction(-2),
    (0, 0, 4, 0, 0): Fraction(-13, 4),
    (0, 0, 3, 1, 0): Fraction(-2),
    (0, 0, 2, 2, 0): Fraction(-1, 4),
    (0, 0, 2, 0, 2): Fraction(1, 4),
}


def _coefficients(r, i):
    """``(d_i, c_i)`` for ``phi(s) = s**2``, ``Lambda(s, t) = (s + t)/2``; works on exact numbers."""
    phi = [x * x for x in r]
    lam_i = (r[i] + r[i + 1]) / 2
    lam_next = (r[i + 1] + r[i + 2]) / 2
    d = (2 * lam_i * (2 * r[i] + 2 * r[i + 1])
         + (phi[i - 1] - 2 * phi[i] + phi[i + 1]) / 2
         + (phi[i] - 2 * phi[i + 1] + phi[i + 2]) / 2)
    c = -2 * r[i + 1] * (lam_i + lam_next)
    return d, c


def counterexample_minor(rho):
    """``d_1 d_2 - c_1**2`` of the edge matrix (without the ``1/h**2`` factor).

    Accepts floats, numpy arrays (stacked along the first axis) or
    :class:`fractions.Fraction` entries; only ``rho_0..rho_4`` enter.
    """
    if len(rho) < N_VARS:
        raise ScopeError(f"the minor involves rho_0..rho_4; got {len(rho)} components")
    r = [rho[j] for j in range(N_VARS)]
    d1, c1 = _coefficients(r, 1)
    d2, _ = _coefficients(r, 2)
    return d1 * d2 - c1 * c1


def em_tilde_m(rho, mean: MeanFunction | None = None) -> TridiagonalMatrix:
    """Edge matrix for ``phi(s) = s**2`` on ``n = len(rho) - 1`` edges (unit weights)."""
    rho = np.asarray(rho, dtype=float)
    mean = mean or PowerMean(2.0)
    n = rho.size - 1
    lam = mean(rho[:-1], rho[1:])
    d1, d2 = mean.partials(rho[:-1], rho[1:])
    ones = np.ones_like(rho)
    a, b = tilde_m_coefficients(np.ones(n), lam, d1, d2, ones, 2 * rho, rho**2)
    return TridiagonalMatrix(a, b, float(n) ** 2)


def em_edge_weights(rho, mean: MeanFunction | None = None) -> np.ndarray:
    mean = mean or PowerMean(2.0)
    rho = np.asarray(rho, dtype=float)
    return mean(rho[:-1], rho[1:])


# ---------------------------------------------------------------------------
# exact coefficient extraction


def monomials(nvars, degree):
    """Exponent tuples of total degree ``degree`` in lexicographically decreasing order."""
    out = [e for e in itertools.product(range(degree + 1), repeat=nvars) if sum(e) == degree]
    return sorted(out, reverse=True)


def interpolate_homogeneous(fun, nvars=N_VARS, degree=DEGREE) -> dict[tuple[int, ...], Fraction]:
    """Exact coefficients of a homogeneous polynomial from its values.

    ``fun`` is evaluated at the lattice points ``{p in N^nvars : |p| = degree}``
    with :class:`~fractions.Fraction` inputs; the resulting square system is
    unisolvent for homogeneous polynomials of that degree and is solved over Q.
    """
    monos = monomials(nvars, degree)
    points = monos  # the simplex lattice has the same cardinality
    rows = [[QQ(int(np.prod([p**e for p, e in zip(pt, mono)]))) for mono in monos] for pt in points]
    vals = []
    for pt in points:
        v = Fraction(fun([Fraction(p) for p in pt]))
        vals.append([QQ(v.numerator, v.denominator)])
    A = DomainMatrix(rows, (len(points), len(monos)), QQ)
    y = DomainMatrix(vals, (len(points), 1), QQ)
    sol = A.lu_solve(y).to_Matrix()
    coeffs = {}
    for mono, c in zip(monos, sol):
        if c != 0:
            coeffs[mono] = Fraction(int(c.p), int(c.q))
    return coeffs


def monomial_label(exps) -> str:
    parts = []
    for j, e in enumerate(exps):
        if e == 1:
            parts.append(f"r{j}")
        elif e > 1:
            parts.append(f"r{j}^{e}")
    return "*".join(parts) or "1"


@dataclass
class ExpansionComparison:
    computed: dict
    reference: dict

    @property
    def rows(self):
        keys = sorted(set(self.computed) | set(self.reference), reverse=True)
        return [
            {
                "monomial": monomial_label(k),
                "computed": str(self.computed.get(k, Fraction(0))),
                "reference": str(self.reference.get(k, Fraction(0))),
                "match": self.computed.get(k, Fraction(0)) == self.reference.get(k, Fraction(0)),
            }
            for k in keys
        ]

    @property
    def mismatches(self):
        return [r for r in self.rows if not r["match"]]

    @property
    def exact_match(self):
        return not self.mismatches

    def as_dict(self):
        return {
            "computed_terms": len(self.computed),
            "reference_terms": len(self.reference),
            "exact_match": self.exact_match,
            "mismatch_count": len(self.mismatches),
            "table": self.rows,
        }


def compare_with_reference(reference=None) -> ExpansionComparison:
    computed = interpolate_homogeneous(counterexample_minor)
    return ExpansionComparison(computed, dict(PRINTED_EXPANSION if reference is None else reference))


# ---------------------------------------------------------------------------
# witness search


@dataclass
class Witness:
    rho: np.ndarray
    minor: float
    draws: int


def find_witness(seed=0, max_draws=100_000, batch=1000, boost=8.0) -> Witness | None:
    """Random search for a state with negative minor.

    Entries are uniform on (0, 1) with ``rho_2`` scaled up by a random factor in
    ``(1, boost)``, then normalized to unit mass. Returns the first hit.
    """
    rng = np.random.default_rng(seed)
    used = 0
    while used < max_draws:
        m = min(batch, max_draws - used)
        r = rng.uniform(1e-3, 1.0, size=(m, N_VARS))
        r[:, 2] *= rng.uniform(1.0, boost, size=m)
        r /= r.sum(axis=1, keepdims=True)
        vals = counterexample_minor(r.T)
        hit = np.flatnonzero(vals < 0)
        if hit.size:
            j = int(hit[0])
            return Witness(r[j].copy(), float(vals[j]), used + j + 1)
        used += m
    return None
