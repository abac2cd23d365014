import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpconvex import flow, markov
from fpconvex.errors import DomainError, IntegrationError, ScopeError

SYSTEMS = [
    lambda n: flow.heat_system(n),
    lambda n: flow.heat_system(n, flow.PowerDensity(1.5)),
    lambda n: flow.heat_system(n, flow.PowerDensity(2.0)),
    lambda n: flow.fokker_planck_system(n, None, 1.0),
    lambda n: flow.fokker_planck_system(n, flow.Nonlinearity.power(0.5), 1.0),
    lambda n: flow.fokker_planck_system(n, flow.Nonlinearity.power(0.75), 0.5),
    lambda n: flow.fokker_planck_system(n, flow.Nonlinearity.power(1.5), 2.0),
    lambda n: flow.fokker_planck_system(n, flow.Nonlinearity.power(0.5), 0.0),
]


def test_entropy_examples():
    n = 10
    sys_ = flow.heat_system(n)
    c = 1 / (n + 1)
    assert flow.entropy(sys_, flow.uniform_state(n)) == pytest.approx((n + 1) * c * (np.log(c) - 1), rel=1e-14)
    fp = flow.fokker_planck_system(n, flow.Nonlinearity.power(0.5), 0.0)
    r = flow.gaussian_bump(n)
    expected = np.sum(0.5 * (r * np.log(r) - r + 1))
    assert flow.entropy(fp, r) == pytest.approx(expected, rel=1e-14)


def test_potential_term_vanishes_at_origin():
    sys_ = flow.fokker_planck_system(8, flow.Nonlinearity.power(0.5), 3.0)
    zero = flow.fokker_planck_system(8, flow.Nonlinearity.power(0.5), 0.0)
    r = np.full(9, 1e-9)
    r[0] = 1 - r[1:].sum()
    assert flow.entropy(sys_, r) - flow.entropy(zero, r) == pytest.approx(0.0, abs=1e-7)


def test_entropy_requires_positive_state():
    sys_ = flow.heat_system(4)
    with pytest.raises(DomainError):
        flow.entropy(sys_, np.array([0.5, 0.5, 0.0, 0.0, 0.0]))
    with pytest.raises(DomainError):
        flow.entropy(sys_, np.ones(3) / 3)


@pytest.mark.parametrize("make", SYSTEMS)
def test_entropy_gradient_matches_finite_differences(make, rng):
    sys_ = make(6)
    r = flow.dirichlet_state(6, rng, 3.0)
    g = flow.entropy_gradient(sys_, r)
    eps = 1e-6
    for i in range(7):
        e = np.zeros(7)
        e[i] = eps
        fd = (np.sum(flow.node_entropy(sys_, r + e)) - np.sum(flow.node_entropy(sys_, r - e))) / (2 * eps)
        assert fd == pytest.approx(g[i], rel=1e-6, abs=1e-7)


def test_entropy_gradient_examples():
    sys_ = flow.heat_system(5)
    r = flow.gaussian_bump(5)
    np.testing.assert_allclose(flow.entropy_gradient(sys_, r), np.log(r), rtol=1e-15)
    fp = flow.fokker_planck_system(5, flow.Nonlinearity.power(0.5), 2.0)
    stat = fp.w**2 / np.sum(fp.w**2)  # u = sqrt(rho)/w constant
    g = flow.entropy_gradient(fp, stat)
    np.testing.assert_allclose(g, g[0], rtol=1e-12)


def test_onsager_examples(rng):
    n = 6
    sys_ = flow.heat_system(n)
    K = flow.onsager(sys_, flow.uniform_state(n))
    np.testing.assert_allclose(K.edge, np.full(n, 1 / (n + 1)), rtol=1e-15)
    G = markov.gradient_matrix(sys_.grid)
    np.testing.assert_allclose(K.dense(), G.T @ G / (n + 1), rtol=1e-14)
    r = flow.dirichlet_state(n, rng)
    Kr = flow.onsager(sys_, r)
    assert np.abs(Kr.matvec(np.full(n + 1, 2.0))).max() == 0.0
    psis = rng.standard_normal((1000, n + 1))
    assert min(Kr.quadratic(p) for p in psis) >= 0
    D = Kr.dense()
    np.testing.assert_allclose(D, D.T, rtol=0, atol=0)


@pytest.mark.parametrize("make", SYSTEMS)
def test_gradient_structure_identity(make, rng):
    sys_ = make(12)
    for _ in range(20):
        r = flow.dirichlet_state(12, rng, 2.0)
        q = sys_.Q.matvec(sys_.phi(r))
        k = flow.onsager(sys_, r).matvec(flow.entropy_gradient(sys_, r))
        assert np.abs(q + k).max() <= 1e-10 * np.abs(q).max()
        np.testing.assert_allclose(flow.rhs(sys_, r), q, atol=1e-12 * np.abs(q).max())


def test_rhs_stationary_states():
    sys_ = flow.heat_system(7)
    assert np.abs(flow.rhs(sys_, flow.uniform_state(7))).max() <= 1e-13
    fp = flow.fokker_planck_system(7, None, 2.0)
    stat = fp.w / fp.w.sum()
    assert np.abs(flow.rhs(fp, stat)).max() <= 1e-12 * np.abs(fp.Q.diag).max()


def test_integrate_uniform_is_constant():
    sys_ = flow.heat_system(8)
    tr = flow.integrate(sys_, flow.uniform_state(8), 0.5)
    np.testing.assert_allclose(tr.rho, np.tile(flow.uniform_state(8), (len(tr), 1)), atol=1e-15)


def test_heat_flow_relaxes_and_dissipates():
    sys_ = flow.heat_system(16)
    r0 = flow.gaussian_bump(16, floor=0.05)
    tr = flow.integrate(sys_, r0, 1.0, t_eval=np.linspace(0, 1, 41))
    assert np.abs(tr.rho[-1] - flow.uniform_state(16)).max() < 1e-3
    assert np.all(np.diff(tr.entropy) <= 1e-12)
    assert np.all(np.diff(tr.t) > 0)


def test_mass_conservation_n32(rng):
    sys_ = flow.fokker_planck_system(32, flow.Nonlinearity.power(0.5), 1.0)
    tr = flow.integrate(sys_, flow.smooth_random_state(32, rng), 1.0)
    assert np.abs(tr.mass - 1).max() <= 1e-9
    assert tr.min_rho.min() > 0


def test_dissipation_rate_matches_entropy_series():
    sys_ = flow.fokker_planck_system(10, flow.Nonlinearity.power(0.75), 1.0)
    r0 = flow.gaussian_bump(10)
    ts = np.linspace(0, 0.002, 9)
    tr = flow.integrate(sys_, r0, 0.002, tol=1e-12, t_eval=ts)
    E = tr.entropy
    dt = ts[1] - ts[0]
    for k in range(2, len(ts) - 2):
        fd = (E[k - 2] - 8 * E[k - 1] + 8 * E[k + 1] - E[k + 2]) / (12 * dt)
        rate = flow.entropy_dissipation(sys_, tr.rho[k])
        assert rate <= 0
        assert fd == pytest.approx(rate, rel=1e-5)


def test_integration_error_carries_state():
    sys_ = flow.heat_system(64)
    with pytest.raises(IntegrationError) as exc:
        from fpconvex.odeint import integrate_adaptive

        integrate_adaptive(lambda t, y: flow._rhs(sys_, y), 0.0, flow.gaussian_bump(64), 1.0,
                           admissible=lambda y: bool(np.all(y > 0)), max_steps=5)
    assert exc.value.y is not None and exc.value.y.shape == (65,)


def test_apriori_uniform_is_trivial():
    sys_ = flow.fokker_planck_system(8, flow.Nonlinearity.power(0.5), 0.0)
    tr = flow.integrate(sys_, flow.uniform_state(8), 0.2)
    rep = flow.apriori_monitor(tr)
    assert rep.passed
    assert rep["gradient sup bound"].detail["bound"] == 0.0


def test_apriori_scope():
    sys_ = flow.fokker_planck_system(8, None, 1.0)
    tr = flow.integrate(sys_, flow.gaussian_bump(8), 0.05)
    with pytest.raises(ScopeError):
        flow.apriori_monitor(tr)


def test_apriori_sqrt_random(rng):
    sys_ = flow.fokker_planck_system(32, flow.Nonlinearity.power(0.5), 0.0)
    tr = flow.integrate(sys_, flow.smooth_random_state(32, rng), 0.5)
    rep = flow.apriori_monitor(tr, slack=1e-8)
    assert rep.passed, rep.as_dict()
    names = [c.name for c in rep.checks]
    assert "power: min phi' upper bound" in names


def test_power_minimum_bound_can_fail_for_peaked_data():
    # a tall narrow peak flattens far below its initial maximum, so min phi'
    # climbs above M**(alpha - 1) while staying above alpha * M**(alpha - 1)
    n = 32
    sys_ = flow.fokker_planck_system(n, flow.Nonlinearity.power(0.5), 0.0)
    r0 = flow.gaussian_bump(n, width=0.03, floor=0.01)
    tr = flow.integrate(sys_, r0, 0.5)
    rep = flow.apriori_monitor(tr)
    assert not rep["power: min phi' upper bound"].passed
    assert rep["power: min phi' lower bound"].passed
    assert rep["maximum principle"].passed and rep["gradient sup bound"].passed


def test_nonlinearity_hypotheses_sampled():
    for a in (0.25, 0.5, 1.0):
        h = flow.check_nonlinearity_hypotheses(flow.Nonlinearity.power(a))
        assert h["nondecreasing"] and h["derivative_of_inverse_nonincreasing"]
    h = flow.check_nonlinearity_hypotheses(flow.Nonlinearity.power(2.0))
    assert not h["derivative_of_inverse_nonincreasing"]


@given(st.integers(2, 12), st.floats(0.2, 1.0), st.floats(0, 3), st.integers(0, 2**32 - 1))
def test_flow_rhs_properties(n, alpha, gamma, seed):
    sys_ = flow.fokker_planck_system(n, flow.Nonlinearity.power(alpha), gamma)
    r = flow.dirichlet_state(n, seed, 2.0)
    f = flow.rhs(sys_, r)
    assert abs(f.sum()) <= 1e-10 * max(np.abs(f).max(), 1e-300)
    # entropy decreases along the flow direction
    assert np.dot(flow.entropy_gradient(sys_, r), f) <= 1e-12 * np.abs(f).max()
