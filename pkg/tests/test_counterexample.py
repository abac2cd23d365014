from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from fpconvex import counterexample as ce
from fpconvex.convexity import certify
from fpconvex.errors import ScopeError


def sympy_expansion():
    r = sp.symbols("r0:5")
    expr = sp.expand(ce.counterexample_minor(list(r)))
    poly = sp.Poly(expr, *r)
    return {m: Fraction(int(c.p), int(c.q)) for m, c in zip(poly.monoms(), poly.coeffs())}


def test_interpolation_matches_symbolic_expansion():
    computed = ce.interpolate_homogeneous(ce.counterexample_minor)
    assert computed == sympy_expansion()
    assert len(computed) == 22
    assert computed[(0, 0, 4, 0, 0)] == Fraction(-7, 4)
    assert computed[(2, 2, 0, 0, 0)] == Fraction(1, 4)


def test_interpolation_recovers_known_polynomial():
    def poly(r):
        return 3 * r[0] ** 4 - Fraction(1, 7) * r[1] * r[2] * r[3] * r[4] + r[2] ** 2 * r[4] ** 2

    got = ce.interpolate_homogeneous(poly)
    assert got == {(4, 0, 0, 0, 0): 3, (0, 1, 1, 1, 1): Fraction(-1, 7), (0, 0, 2, 0, 2): 1}


def test_minor_exact_and_float_agree(rng):
    r = rng.uniform(0.1, 1, 5)
    exact = ce.counterexample_minor([Fraction(x) for x in r])
    assert float(exact) == pytest.approx(ce.counterexample_minor(r), rel=1e-12)
    stacked = rng.uniform(0.1, 1, (5, 7))
    np.testing.assert_allclose(ce.counterexample_minor(stacked),
                               [ce.counterexample_minor(stacked[:, j]) for j in range(7)], rtol=1e-15)


def test_single_peak_is_negative():
    assert ce.counterexample_minor([0, 0, 1, 0, 0]) == Fraction(-7, 4)


def test_minor_is_edge_matrix_minor(rng):
    r = rng.uniform(0.1, 1, 6)
    T = ce.em_tilde_m(r).dense() / ce.em_tilde_m(r).scale
    assert T[1, 1] * T[2, 2] - T[1, 2] ** 2 == pytest.approx(ce.counterexample_minor(r), rel=1e-12)


def test_comparison_with_reference_is_reported():
    cmp = ce.compare_with_reference()
    d = cmp.as_dict()
    assert d["computed_terms"] == 22 and d["reference_terms"] == 20
    assert not cmp.exact_match
    assert d["mismatch_count"] == len(d["table"])
    assert ce.compare_with_reference(ce.interpolate_homogeneous(ce.counterexample_minor)).exact_match


def test_witness_search():
    w = ce.find_witness(seed=0)
    assert w is not None and w.minor < 0
    assert w.rho.sum() == pytest.approx(1.0, rel=1e-15)
    assert w.draws == ce.find_witness(seed=0).draws
    rep = certify(ce.em_tilde_m(w.rho), ce.em_edge_weights(w.rho), 0.0)
    assert rep.certificate.value == "NotPSD"
    assert rep.witness_value < 0


def test_witness_search_can_give_up():
    assert ce.find_witness(seed=0, max_draws=0) is None


def test_scope():
    with pytest.raises(ScopeError):
        ce.counterexample_minor([0.5, 0.5, 0.0])
