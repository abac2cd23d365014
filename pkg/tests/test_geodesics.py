import numpy as np
import pytest

from fpconvex import convexity as cv
from fpconvex import flow, geodesics as geo
from fpconvex.errors import DomainError, GeodesicError

from oracles import two_point_distance

# h * int_{0.2}^{0.7} dr / sqrt(Lambda_log(r, 1 - r)) with n = 1, from a 30-digit quadrature
W_TWO_POINT_HEAT = 0.71939371024129839


def test_hamiltonian_and_speed(rng):
    sys_ = flow.heat_system(6)
    r = flow.dirichlet_state(6, rng)
    psi = rng.standard_normal(7)
    K = flow.onsager(sys_, r)
    assert geo.hamiltonian(sys_, r, psi) == pytest.approx(0.5 * K.quadratic(psi), rel=1e-13)
    assert geo.speed(sys_, r, psi) == pytest.approx(K.quadratic(psi), rel=1e-13)
    drho, _ = geo.geodesic_rhs(sys_, r, psi)
    np.testing.assert_allclose(drho, K.matvec(psi), atol=1e-12 * np.abs(drho).max())


def test_psi_from_gradient_roundtrip(rng):
    from fpconvex.markov import grad

    g = rng.standard_normal(5)
    psi = geo.psi_from_gradient(g, 0.2)
    assert abs(psi.sum()) < 1e-13
    np.testing.assert_allclose(grad(psi, 0.2), g, rtol=1e-12)


def test_geodesic_flow_conserves_mass_and_energy(rng):
    sys_ = flow.fokker_planck_system(8, flow.Nonlinearity.power(0.5), 1.0)
    r = flow.gaussian_bump(8, floor=0.05)
    psi = 0.001 * rng.standard_normal(9)
    ts, rs, ps = geo.integrate_geodesic(sys_, r, psi, 0.25, 256, record_every=32)
    assert len(ts) == 9
    np.testing.assert_allclose(rs.sum(axis=1), r.sum(), rtol=1e-13)
    H = [geo.hamiltonian(sys_, a, b) for a, b in zip(rs, ps)]
    assert np.ptp(H) <= 1e-8 * H[0]


def test_geodesic_leaving_domain_returns_none():
    sys_ = flow.heat_system(4)
    psi = np.array([50.0, -50.0, 0.0, 0.0, 0.0])
    assert geo.integrate_geodesic(sys_, flow.uniform_state(4), psi, 1.0, 64) is None


@pytest.mark.parametrize("make", [lambda: flow.heat_system(1, min_intervals=1),
                                  lambda: flow.fokker_planck_system(1, flow.Nonlinearity.power(0.5), 1.0,
                                                                    min_intervals=1)])
def test_two_point_distance_oracle(make):
    sys_ = make()
    r0, r1 = np.array([0.2, 0.8]), np.array([0.7, 0.3])
    assert geo.distance(sys_, r0, r1) == pytest.approx(two_point_distance(sys_, r0, r1), rel=1e-7)


def test_two_point_frozen_value():
    sys_ = flow.heat_system(1, min_intervals=1)
    W = geo.distance(sys_, np.array([0.2, 0.8]), np.array([0.7, 0.3]))
    assert W == pytest.approx(W_TWO_POINT_HEAT, rel=1e-7)


def test_shooting_endpoint_and_symmetry():
    sys_ = flow.heat_system(8)
    r0 = flow.gaussian_bump(8, center=0.3)
    r1 = flow.gaussian_bump(8, center=0.7)
    p = geo.shoot(sys_, r0, r1, tol=1e-9)
    assert p.method in ("shooting", "minimization+shooting")
    assert np.abs(p.rho[-1] - r1).max() <= 1e-9
    assert p.residual <= 1e-9
    back = geo.shoot(sys_, r1, r0, tol=1e-9)
    assert back.distance == pytest.approx(p.distance, rel=1e-6)
    mini = geo.minimize_action(sys_, r0, r1)
    assert mini.distance == pytest.approx(p.distance, rel=1e-4)
    assert mini.distance >= p.distance * (1 - 1e-6)


def test_trivial_path_and_validation():
    sys_ = flow.heat_system(4)
    r = flow.uniform_state(4)
    p = geo.shoot(sys_, r, r)
    assert p.method == "trivial" and p.distance == 0.0
    with pytest.raises(DomainError):
        geo.shoot(sys_, r, 2 * r)
    with pytest.raises(ValueError):
        geo.shoot(sys_, r, r, samples=7, steps=128)


def test_zero_tolerance_raises_with_residuals():
    sys_ = flow.heat_system(4)
    r0 = flow.gaussian_bump(4, center=0.25)
    r1 = flow.gaussian_bump(4, center=0.75)
    with pytest.raises(GeodesicError) as exc:
        geo.shoot(sys_, r0, r1, tol=0.0, max_steps=256)
    assert "shooting" in exc.value.residuals


def test_heat_displacement_convexity_along_geodesic():
    sys_ = flow.heat_system(8)
    r0 = flow.gaussian_bump(8, center=0.3, width=0.15)
    r1 = flow.uniform_state(8)
    rep = geo.verify_displacement_convexity(sys_, r0, r1, lam=0.0)
    assert rep.passed, rep.as_dict()
    assert np.all(rep.formula_second_derivative >= 0)


def test_fp_convexity_at_lambda_h():
    sys_ = flow.fokker_planck_system(6, flow.Nonlinearity.power(0.5), 1.0)
    r0 = flow.gaussian_bump(6, center=0.3, width=0.2)
    r1 = flow.gaussian_bump(6, center=0.6, width=0.3)
    path = geo.shoot(sys_, r0, r1, tol=1e-9, samples=9, steps=128)
    lam = min(cv.lambda_h(sys_, r) for r in path.rho)
    rep = geo.verify_displacement_convexity(sys_, r0, r1, lam=lam, path=path)
    assert rep.passed, rep.as_dict()
