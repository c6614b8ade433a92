import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bilinlab.errors import CausticError, DegeneracyError, DomainError
from bilinlab.phasekit import (EikonalPhase, Lattice, Metric, PhaseBox, chebyshev_lobatto, cone,
                               hyperplane, mixed_hessian, normal_vector, paraboloid, solve_eikonal,
                               swap_lattice, time_rescaled, transversality_margin)

xi_vals = st.floats(0.5, 2.5)
t_vals = st.floats(-0.5, 0.5)
x_vals = st.floats(-3, 3)


def test_paraboloid_normal_closed_form():
    nu = normal_vector(paraboloid(1), 0.0, 0.3, 1.0)
    assert np.allclose(nu, np.array([2.0, -1.0]) / np.sqrt(5.0), atol=1e-14)


@given(t_vals, x_vals, xi_vals, xi_vals)
def test_normal_orthogonal_to_hessian_columns_d2(t, x, a, b):
    ph = paraboloid(2)
    xi = np.array([a, -b])
    H = mixed_hessian(ph, t, np.array([x, 0.1]), xi)
    nu = normal_vector(ph, t, np.array([x, 0.1]), xi)
    assert np.max(np.abs(nu @ H)) <= 1e-10
    assert abs(np.linalg.norm(nu) - 1) <= 1e-12 and nu[-1] <= 0


@given(t_vals, x_vals, st.floats(-2, 2))
def test_graph_phase_derivatives_match_finite_differences(t, x, xi):
    ph = paraboloid(1)
    h = 1e-5
    g = ph.grad_tx(t, x, xi)
    gx = (ph.phi(t, x + h, xi) - ph.phi(t, x - h, xi)) / (2 * h)
    gt = (ph.phi(t + h, x, xi) - ph.phi(t - h, x, xi)) / (2 * h)
    assert np.allclose(g, [gx, gt], atol=1e-7)
    H = ph.mixed_hess(t, x, xi)
    Hfd = (ph.grad_tx(t, x, xi + h) - ph.grad_tx(t, x, xi - h)) / (2 * h)
    assert np.allclose(H[:, 0], Hfd, atol=1e-7)


def test_transversality_against_time_rescaled_flat_phase():
    lat = Lattice.from_boxes((-0.5, 0.5), ((-1.0,), (1.0,)), ((1.0,), (2.0,)), ((-1.0,), (1.0,)))
    rep = transversality_margin(paraboloid(1), time_rescaled(paraboloid(1), 0.0), lat)
    assert rep.sup == pytest.approx(1 / np.sqrt(5), abs=1e-12)
    assert rep.argmax["xi1"] == [1.0]


def test_transversality_is_symmetric_under_swap():
    lat = Lattice.from_boxes((-0.5, 0.5), ((-1.0,), (1.0,)), ((1.0,), (2.0,)), ((-2.0,), (0.0,)))
    a, b = paraboloid(1), hyperplane(3.0)
    r1 = transversality_margin(a, b, lat)
    r2 = transversality_margin(b, a, swap_lattice(lat))
    assert r1.sup == r2.sup


def test_identical_phases_have_zero_margin():
    lat = Lattice.from_boxes((0, 1), ((0.0,), (1.0,)), ((1.0,), (2.0,)), ((1.0,), (2.0,)))
    rep = transversality_margin(paraboloid(1), paraboloid(1), lat)
    assert rep.margin == pytest.approx(0.0, abs=1e-15)
    assert not rep.holds(0.1)


def test_cone_is_degenerate_at_origin():
    with pytest.raises(DegeneracyError):
        mixed_hessian(cone(1), 0.0, 0.0, 0.0)


def test_rank_floor_violation_raises():
    with pytest.raises(DegeneracyError):
        normal_vector(time_rescaled(paraboloid(1), 0.0), 0.0, 0.0, 1.0, rank_floor=1.5)


def test_domain_box_is_enforced():
    ph = paraboloid(1, box=PhaseBox(t=(-1, 1)))
    with pytest.raises(DomainError):
        mixed_hessian(ph, 2.0, 0.0, 1.0)


def test_metric_validation_and_derivatives():
    with pytest.raises(DomainError):
        Metric.cosine(1, 1.5)
    m = Metric.cosine(2, 0.1)
    x = np.array([[0.3, -1.2]])
    h = 1e-6
    fd = (m.g_inv(x + [h, 0]) - m.g_inv(x - [h, 0])) / (2 * h)
    assert np.allclose(m.d_g_inv(x)[..., 0], fd, atol=1e-9)
    assert np.allclose(m.volume(x), np.prod(1 + 0.1 * np.cos(x), axis=-1) ** -0.5)


def test_chebyshev_differentiates_polynomials_exactly():
    s, D = chebyshev_lobatto(9, -0.25, 0.25)
    assert s[4] == 0.0
    assert np.allclose(D @ s ** 5, 5 * s ** 4, atol=1e-10)


def test_flat_eikonal_is_exact():
    eik = solve_eikonal(Metric.flat(1), alpha=0.25, grid=(9, 16, 8), residual_tol=1e-8)
    S, X, XI = np.meshgrid(eik.s_nodes, eik.x_nodes, eik.xi_nodes, indexing="ij")
    assert np.max(np.abs(eik.phi_table - (X * XI - S * XI ** 2))) <= 1e-12
    assert eik.residual_max <= 1e-8
    assert np.allclose(eik.a0_table, 1.0, atol=1e-12)


def test_perturbed_eikonal_residual_and_derivatives():
    m = Metric.cosine(1, 0.1)
    eik = solve_eikonal(m, alpha=0.125, grid=(17, 32, 8), residual_tol=1e-6, steps_per_unit=256)
    assert eik.residual_max <= 1e-6
    s, x, xi, h = 0.1, 0.7, 1.3, 1e-5
    r = eik.evaluate(s, x, xi, derivatives=True)
    fx = (eik.phi(s, x + h, xi) - eik.phi(s, x - h, xi)) / (2 * h)
    fs = (eik.phi(s + h, x, xi) - eik.phi(s - h, x, xi)) / (2 * h)
    fxi = (eik.phi(s, x, xi + h) - eik.phi(s, x, xi - h)) / (2 * h)
    assert abs(r.grad_x[0] - fx) < 1e-7 and abs(r.dphi_ds - fs) < 1e-7
    assert abs(r.grad_xi[0] - fxi) < 1e-7
    ph = eik.as_phase()
    gxi = lambda z: ph.grad_tx(s, x, z)
    assert np.allclose(r.mixed_hess[:, 0], (gxi(xi + h) - gxi(xi - h)) / (2 * h), atol=1e-6)
    nu = normal_vector(ph, s, x, xi)
    assert abs(nu @ r.mixed_hess[:, 0]) <= 1e-10


def test_caustic_detection():
    eik = EikonalPhase(metric=Metric.cosine(1, 0.4), alpha=20.0, xi_lo=np.array([0.5]),
                       xi_hi=np.array([2.0]), steps_per_unit=32, jac_floor=0.5)
    x = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    assert eik.evaluate(np.full(16, 0.05), x, 2.0).jac_det.min() > 0.5
    with pytest.raises(CausticError):
        eik.evaluate(np.full(16, 0.5), x, 2.0)
