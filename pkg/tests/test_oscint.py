import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bilinlab.errors import (ArgumentOrderError, DomainError, FitDomainError,
                             PreconditionError, ResolutionError)
from bilinlab.oscint import (Amplitude, CumulativePhase, FrequencyProfile, KernelSample,
                             SmoothRandomFunction, SpaceTimeGrid, bilinear_L2_norm,
                             decay_sweep, eval_oscillatory, kernel_K, kernel_decay_check,
                             mu_schedule, resolution_limits, resolved_grid, resolved_profile,
                             sharpness_report, sharpness_witness)
from bilinlab.phasekit import hyperplane, paraboloid, time_rescaled
from bilinlab.seeding import trial_rng

AMP_A = Amplitude.box(1, t=(0.0, 0.5), x=(0.0, 2.0), xi=(1.5, 0.5))
AMP_B = Amplitude.box(1, t=(0.0, 0.5), x=(0.0, 2.0), xi=(-1.0, 1.0))


def _profile(amp, n, seed):
    rng = np.random.default_rng(seed)
    func = SmoothRandomFunction(amp.xi_center, amp.xi_radius, rng)
    axes = (np.linspace(amp.xi_box[0][0], amp.xi_box[1][0], n),)
    w = np.full(n, axes[0][1] - axes[0][0])
    w[[0, -1]] *= 0.5
    return FrequencyProfile(axes, func(axes[0][:, None]), w)


def _tiny_grid(amp, n=6):
    t = np.linspace(*amp.t_box, n)
    x = np.linspace(amp.x_box[0][0], amp.x_box[1][0], n)
    return SpaceTimeGrid(t, (x,))


def _oracle_T(phi, amp, f, lam, grid):
    """Triple loop: sum over xi nodes of w f a(t, x, xi) exp(i lam phi)."""
    out = np.zeros(grid.shape, dtype=complex)
    xi_nodes = f.axes[0]
    for i, t in enumerate(grid.t):
        for j, x in enumerate(grid.x_axes[0]):
            s = 0j
            for k, xi in enumerate(xi_nodes):
                a = amp(t, np.array([x]), np.array([xi]))
                s += f.weights[k] * f.values[k] * a * np.exp(1j * lam * phi(t, x, xi))
            out[i, j] = s
    return out


def _oracle_norm(pa, aa, f, lam, pb, ab, g, mu, grid):
    prod = _oracle_T(pa, aa, f, lam, grid) * _oracle_T(pb, ab, g, mu, grid)
    w = np.outer(grid.wt, grid.wx)
    return np.sqrt(np.sum(w * np.abs(prod) ** 2))


def schrod(t, x, xi):
    return x * xi + t * xi * xi


def transport(t, x, xi):
    return x * xi - 2.0 * t * xi


@pytest.mark.parametrize("method", ["czt", "direct"])
def test_evaluation_matches_brute_force(method):
    f = _profile(AMP_A, 7, 1)
    grid = _tiny_grid(AMP_A)
    got = eval_oscillatory(paraboloid(1), AMP_A, f, 3.0, grid, method=method, check=False)
    want = _oracle_T(schrod, AMP_A, f, 3.0, grid)
    assert np.max(np.abs(got - want)) <= 1e-12 * np.max(np.abs(want))


def test_bilinear_norm_matches_brute_force():
    f, g = _profile(AMP_A, 7, 2), _profile(AMP_B, 9, 3)
    grid = _tiny_grid(AMP_A)
    got = bilinear_L2_norm(paraboloid(1), AMP_A, f, 4.0, hyperplane(-2.0), AMP_B, g, 2.0, grid,
                           check=False)
    want = _oracle_norm(schrod, AMP_A, f, 4.0, transport, AMP_B, g, 2.0, grid)
    assert got == pytest.approx(want, rel=1e-12)


def test_time_rescaled_phase_uses_scaled_symbol():
    f = _profile(AMP_A, 7, 4)
    grid = _tiny_grid(AMP_A)
    got = eval_oscillatory(time_rescaled(paraboloid(1), 0.5), AMP_A, f, 3.0, grid, check=False)
    want = _oracle_T(lambda t, x, xi: schrod(0.5 * t, x, xi), AMP_A, f, 3.0, grid)
    assert np.allclose(got, want, rtol=0, atol=1e-12 * np.max(np.abs(want)))


def test_czt_and_direct_agree_on_resolved_grid():
    func = SmoothRandomFunction(AMP_A.xi_center, AMP_A.xi_radius, np.random.default_rng(5))
    f = resolved_profile(func, paraboloid(1), AMP_A, 32.0)
    grid = resolved_grid((paraboloid(1), AMP_A, 32.0))
    a = eval_oscillatory(paraboloid(1), AMP_A, f, 32.0, grid, method="czt")
    b = eval_oscillatory(paraboloid(1), AMP_A, f, 32.0, grid, method="direct")
    assert np.max(np.abs(a - b)) <= 1e-9 * np.max(np.abs(b))


def test_swapping_equal_scale_factors_is_exact():
    f, g = _profile(AMP_A, 7, 6), _profile(AMP_B, 9, 7)
    grid = _tiny_grid(AMP_A)
    one = bilinear_L2_norm(paraboloid(1), AMP_A, f, 3.0, hyperplane(-2.0), AMP_B, g, 3.0, grid,
                           check=False)
    two = bilinear_L2_norm(hyperplane(-2.0), AMP_B, g, 3.0, paraboloid(1), AMP_A, f, 3.0, grid,
                           check=False)
    assert one == two


@settings(max_examples=20)
@given(c=st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False,
                            allow_infinity=False))
def test_ratio_is_scale_invariant(c):
    f, g = _profile(AMP_A, 7, 8), _profile(AMP_B, 9, 9)
    grid = _tiny_grid(AMP_A)

    def ratio(ff):
        n = bilinear_L2_norm(paraboloid(1), AMP_A, ff, 4.0, hyperplane(-2.0), AMP_B, g, 2.0, grid,
                             check=False)
        return n / (ff.norm() * g.norm())

    assert ratio(f.scaled(c)) == pytest.approx(ratio(f), rel=1e-10)


def test_grid_refinement_changes_ratio_little():
    pa, pb, lam, mu = paraboloid(1), hyperplane(-2.0), 32.0, 8.0
    ff = SmoothRandomFunction(AMP_A.xi_center, AMP_A.xi_radius, trial_rng(0, "refine", 0, 0))
    gg = SmoothRandomFunction(AMP_B.xi_center, AMP_B.xi_radius, trial_rng(0, "refine", 0, 1))
    grid = resolved_grid((pa, AMP_A, lam), (pb, AMP_B, mu))
    f, g = resolved_profile(ff, pa, AMP_A, lam), resolved_profile(gg, pb, AMP_B, mu)
    coarse = bilinear_L2_norm(pa, AMP_A, f, lam, pb, AMP_B, g, mu, grid) / (f.norm() * g.norm())
    fine_grid = SpaceTimeGrid.covering(*((grid.t[0], grid.t[-1]),),
                                       (np.array([grid.x_axes[0][0]]), np.array([grid.x_axes[0][-1]])),
                                       grid.step_t / 2, grid.steps_x[0] / 2)
    f2 = FrequencyProfile.sample(ff, AMP_A, f.steps[0] / 2)
    g2 = FrequencyProfile.sample(gg, AMP_B, g.steps[0] / 2)
    fine = bilinear_L2_norm(pa, AMP_A, f2, lam, pb, AMP_B, g2, mu, fine_grid) / (f2.norm() * g2.norm())
    assert abs(fine - coarse) <= 1e-3 * fine


def test_coarse_grid_names_the_axis():
    f = resolved_profile(lambda xi: np.ones(xi.shape[:-1]), paraboloid(1), AMP_A, 64.0)
    grid = resolved_grid((paraboloid(1), AMP_A, 64.0))
    coarse_t = SpaceTimeGrid(grid.t[::3], grid.x_axes)
    with pytest.raises(ResolutionError) as err:
        eval_oscillatory(paraboloid(1), AMP_A, f, 64.0, coarse_t)
    assert err.value.axis == "t"
    coarse_x = SpaceTimeGrid(grid.t, (grid.x_axes[0][::3],))
    with pytest.raises(ResolutionError) as err:
        eval_oscillatory(paraboloid(1), AMP_A, f, 64.0, coarse_x)
    assert err.value.axis == "x1"
    thin = FrequencyProfile((f.axes[0][::4],), f.values[::4], f.weights[::4])
    with pytest.raises(ResolutionError) as err:
        eval_oscillatory(paraboloid(1), AMP_A, thin, 64.0, grid)
    assert err.value.axis == "xi1"


def test_resolution_limits_shrink_with_scale():
    lo = resolution_limits(paraboloid(1), AMP_A, 16.0)
    hi = resolution_limits(paraboloid(1), AMP_A, 64.0)
    assert hi[0] < lo[0] and np.all(hi[1] < lo[1])


def test_scale_order_is_enforced():
    f, g = _profile(AMP_A, 7, 1), _profile(AMP_B, 9, 2)
    with pytest.raises(ArgumentOrderError):
        bilinear_L2_norm(paraboloid(1), AMP_A, f, 2.0, hyperplane(-2.0), AMP_B, g, 4.0,
                         _tiny_grid(AMP_A), check=False)
    with pytest.raises(ArgumentOrderError):
        CumulativePhase(paraboloid(1), AMP_A, hyperplane(-2.0), AMP_B, 8.0, 16.0)


def test_identical_phases_fail_the_precondition():
    with pytest.raises(PreconditionError):
        decay_sweep(paraboloid(1), paraboloid(1), AMP_A, AMP_A, [16, 32], 8, trials=1)


def test_mu_schedule_rules():
    assert mu_schedule([8, 16], "tied") == [8.0, 16.0]
    assert mu_schedule([8, 16], 4) == [4.0, 4.0]
    assert mu_schedule([8, 16], ("ratio", 4)) == [2.0, 4.0]
    with pytest.raises(ValueError):
        mu_schedule([8, 16], [1.0])


def test_short_decay_sweep_decreases():
    sweep = decay_sweep(paraboloid(1), hyperplane(-2.0), AMP_A, AMP_B, [16, 64], 8, trials=2)
    r = sweep.column("ratio")
    assert r[1] < r[0]
    assert sweep.margin > 0.1


# ---------------------------------------------------------------------------
# TT* kernel
# ---------------------------------------------------------------------------

KA = Amplitude.box(1, t=(0.0, 1.0), x=(0.0, 6.0), xi=(1.5, 0.5))
KB = Amplitude.box(1, t=(0.0, 1.0), x=(0.0, 6.0), xi=(-2.5, 2.5))


def _cum():
    return CumulativePhase(paraboloid(1), KA, hyperplane(-2.0), KB, 8.0, 2.0)


def test_kernel_is_hermitian_exactly():
    cum = _cum()
    grid = SpaceTimeGrid.covering(cum.t_box, cum.x_box, 0.05, 0.05)
    a = kernel_K(cum, [1.4], -0.3, [1.7], 0.4, grid).value
    b = kernel_K(cum, [1.7], 0.4, [1.4], -0.3, grid).value
    assert a == b.conjugate()


def test_kernel_quadratic_form_matches_direct_norm():
    """sum K(z, q, x, p) F(x, p) conj F(z, q) equals the squared norm of S F."""
    cum = _cum()
    grid = SpaceTimeGrid(np.linspace(*cum.t_box, 6),
                         (np.linspace(cum.x_box[0][0], cum.x_box[1][0], 6),))
    rng = np.random.default_rng(11)
    nodes = [(np.array([xi]), p) for xi in (1.3, 1.6) for p in (-1.0, 0.0, 0.5)]
    F = rng.standard_normal(len(nodes)) + 1j * rng.standard_normal(len(nodes))
    T = grid.t[:, None]
    X = grid.x_axes[0][None, :, None]
    SF = sum(c * np.exp(1j * cum.lam * cum.phi(T, X, xi, p)) * cum.amplitude(T, X, xi, p)
             for c, (xi, p) in zip(F, nodes))
    direct = np.sum(np.outer(grid.wt, grid.wx) * np.abs(SF) ** 2)
    form = sum(kernel_K(cum, z, q, x, p, grid).value * F[j] * np.conj(F[i])
               for i, (z, q) in enumerate(nodes) for j, (x, p) in enumerate(nodes))
    assert form.real == pytest.approx(direct, rel=1e-10)
    assert abs(form.imag) <= 1e-10 * direct


def _samples(values, start=1.0, stop=100.0):
    s = np.geomspace(start, stop, len(values))
    return [KernelSample((0.0,), 0.0, (float(v - 1.0),), 0.0, (), complex(y), 1.0, 1.0)
            for v, y in zip(s, values)]


def test_decay_check_fits_envelope():
    s = np.geomspace(1, 100, 12)
    y = s ** -4.0 * (1 + 0.5 * np.cos(3 * s) ** 2)
    out = kernel_decay_check(_samples(y), d=1)
    assert out.passed and out.fit.exponent <= -3.0
    slow = kernel_decay_check(_samples(s ** -1.0), d=1)
    assert not slow.passed


def test_decay_check_needs_span():
    with pytest.raises(FitDomainError):
        kernel_decay_check(_samples(np.geomspace(1, 2, 12) ** -4, 1, 2), d=1)


# ---------------------------------------------------------------------------
# sharpness witness
# ---------------------------------------------------------------------------

def _continuous_value(N1, d):
    # ||chi_[0,a] * chi_[0,b]||^2 = a^2 (b - a/3) for a <= b
    thin = (1 / N1) ** 2 * (2 - 1 / (3 * N1))
    rest = (2 - 1 / 3) ** d
    norms = np.sqrt(2.0 ** (d - 1) / N1) * np.sqrt(2.0 ** d)
    return np.sqrt(thin * rest) / norms * np.sqrt(N1)


@pytest.mark.parametrize("N1,d", [(16, 1), (64, 1), (32, 2)])
def test_sharpness_matches_continuous_norm(N1, d):
    rep = sharpness_report(N1, d, cells=16)
    want = _continuous_value(N1, d)
    assert rep.closed_form == pytest.approx(want, rel=1e-12)
    assert rep.value == pytest.approx(want, rel=1e-2)
    assert rep.lower_bound_holds


def test_sharpness_discretization_converges():
    err = [abs(sharpness_witness(32, 1, cells=c) - _continuous_value(32, 1)) for c in (8, 16, 32)]
    assert err[2] < err[1] < err[0]


def test_sharpness_domain():
    with pytest.raises(DomainError):
        sharpness_report(8)
