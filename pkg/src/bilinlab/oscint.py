"""Oscillatory integral operators, their bilinear products and the TT* kernel.

The operator is

    T_lam f(t, x) = sum_xi w(xi) exp(i lam phi(t, x, xi)) a(t, x, xi) f(xi)

on tensor grids.  Amplitudes are products of one-dimensional plateau bumps,
so for phases of the form x . xi + t h(xi) every time slice is a chirp-z
transform in xi; other phases fall back to a chunked direct sum.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import CZT

from .errors import (ArgumentOrderError, DegeneracyError, DomainError, FitDomainError,
                     PreconditionError, ResolutionError)
from .phasekit import Lattice, transversality_margin
from .scalefit import fit_power_law
from .seeding import trial_rng
from .smooth import plateau, trapezoid_weights, uniform_nodes

#: nodes per wavelength demanded by the resolution rule
POINTS_PER_WAVE = 8
#: amplitude radius / frequency step lower bound (resolves the cutoff ramps)
XI_CELLS = 48
#: elements per chunk in direct evaluation
_CHUNK_ELEMENTS = 1 << 22


def _vec(v, d):
    a = np.atleast_1d(np.asarray(v, dtype=float))
    return np.broadcast_to(a, (d,)).copy() if a.size in (1, d) else a


# ---------------------------------------------------------------------------
# amplitudes, profiles, grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Amplitude:
    """Product cutoff a(t, x, xi) = a_t(t) a_x(x) a_xi(xi).

    Each factor is a plateau bump equal to 1 on the inner half of its box and
    0 outside the box.  An optional annulus (r0, r1) multiplies a_xi by a
    plateau in |xi| supported in [r0, r1].
    """

    t_center: float
    t_radius: float
    x_center: tuple
    x_radius: tuple
    xi_center: tuple
    xi_radius: tuple
    annulus: tuple = None

    def __post_init__(self):
        for name in ("x_center", "x_radius", "xi_center", "xi_radius"):
            object.__setattr__(self, name, tuple(float(v) for v in np.atleast_1d(getattr(self, name))))
        d = len(self.xi_center)
        if not (len(self.x_center) == len(self.x_radius) == len(self.xi_radius) == d):
            raise DomainError("amplitude boxes disagree on the dimension")
        if self.t_radius <= 0 or min(self.x_radius) <= 0 or min(self.xi_radius) <= 0:
            raise DomainError("amplitude radii must be positive")

    @classmethod
    def box(cls, d, t=(0.0, 1.0), x=(0.0, 1.0), xi=(1.0, 0.5), annulus=None):
        """Build from (center, radius) pairs; scalars broadcast over the d axes."""
        return cls(float(t[0]), float(t[1]), tuple(_vec(x[0], d)), tuple(_vec(x[1], d)),
                   tuple(_vec(xi[0], d)), tuple(_vec(xi[1], d)), annulus)

    @property
    def d(self):
        return len(self.xi_center)

    def t_factor(self, t):
        return plateau((np.asarray(t, dtype=float) - self.t_center) / self.t_radius)

    def x_axis_factor(self, axis, x):
        return plateau((np.asarray(x, dtype=float) - self.x_center[axis]) / self.x_radius[axis])

    def x_factor(self, x):
        x = np.asarray(x, dtype=float)
        return np.prod([self.x_axis_factor(i, x[..., i]) for i in range(self.d)], axis=0)

    def xi_factor(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.prod([plateau((xi[..., i] - self.xi_center[i]) / self.xi_radius[i])
                       for i in range(self.d)], axis=0)
        if self.annulus is not None:
            r0, r1 = self.annulus
            r = np.sqrt(np.sum(xi * xi, axis=-1))
            out = out * plateau((r - 0.5 * (r0 + r1)) / (0.5 * (r1 - r0)))
        return out

    def __call__(self, t, x, xi):
        return self.t_factor(t) * self.x_factor(x) * self.xi_factor(xi)

    @property
    def t_box(self):
        return (self.t_center - self.t_radius, self.t_center + self.t_radius)

    @property
    def x_box(self):
        c, r = np.array(self.x_center), np.array(self.x_radius)
        return (c - r, c + r)

    @property
    def xi_box(self):
        c, r = np.array(self.xi_center), np.array(self.xi_radius)
        return (c - r, c + r)

    @property
    def center(self):
        return self.t_center, np.array(self.x_center), np.array(self.xi_center)


@dataclass(frozen=True)
class FrequencyProfile:
    """Samples of f on a uniform tensor grid covering an amplitude's xi-box."""

    axes: tuple
    values: np.ndarray
    weights: np.ndarray

    @property
    def d(self):
        return len(self.axes)

    @property
    def steps(self):
        return tuple(float(a[1] - a[0]) if a.size > 1 else np.inf for a in self.axes)

    @property
    def counts(self):
        return tuple(a.size for a in self.axes)

    def points(self):
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def norm(self):
        return float(np.sqrt(np.sum(self.weights * np.abs(self.values) ** 2)))

    def scaled(self, c):
        return FrequencyProfile(self.axes, c * self.values, self.weights)

    def combine(self, other, alpha=1.0, beta=1.0):
        """alpha * self + beta * other on the same nodes."""
        return FrequencyProfile(self.axes, alpha * self.values + beta * other.values, self.weights)

    @classmethod
    def sample(cls, func, amp, steps):
        """Sample `func` (callable on (..., d) points) on nodes of spacing <= steps."""
        steps = _vec(steps, amp.d)
        axes = tuple(uniform_nodes(c, r, h) for c, r, h in zip(amp.xi_center, amp.xi_radius, steps))
        w = trapezoid_weights(axes[0])
        for a in axes[1:]:
            w = np.multiply.outer(w, trapezoid_weights(a))
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return cls(axes, np.asarray(func(pts), dtype=complex), w)


class SmoothRandomFunction:
    """Smooth random complex function: Gaussian radial basis functions on a
    tensor lattice of control points with complex Gaussian weights.

    The function does not depend on any sampling grid, so the same draw can be
    evaluated at several resolutions (common random numbers across a sweep).
    """

    def __init__(self, center, radius, rng, controls=6):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        radius = np.atleast_1d(np.asarray(radius, dtype=float))
        axes = [np.linspace(c - r, c + r, controls) for c, r in zip(center, radius)]
        self.nodes = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, center.size)
        self.width = 2.0 * radius / (controls - 1)
        n = self.nodes.shape[0]
        self.coef = rng.standard_normal(n) + 1j * rng.standard_normal(n)

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        z = (xi[..., None, :] - self.nodes) / self.width
        return np.exp(-0.5 * np.sum(z * z, axis=-1)) @ self.coef


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Uniform tensor grid in (t, x) with trapezoid weights."""

    t: np.ndarray
    x_axes: tuple

    @property
    def d(self):
        return len(self.x_axes)

    @property
    def step_t(self):
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else np.inf

    @property
    def steps_x(self):
        return tuple(float(a[1] - a[0]) if a.size > 1 else np.inf for a in self.x_axes)

    @property
    def shape(self):
        return (self.t.size,) + tuple(a.size for a in self.x_axes)

    @property
    def node_count(self):
        return int(np.prod(self.shape))

    @property
    def wt(self):
        return trapezoid_weights(self.t)

    @property
    def wx(self):
        w = trapezoid_weights(self.x_axes[0])
        for a in self.x_axes[1:]:
            w = np.multiply.outer(w, trapezoid_weights(a))
        return w

    def x_points(self):
        return np.stack(np.meshgrid(*self.x_axes, indexing="ij"), axis=-1)

    @classmethod
    def covering(cls, t_box, x_box, step_t, steps_x):
        lo, hi = x_box
        lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
        steps_x = _vec(steps_x, lo.size)
        t = uniform_nodes(0.5 * (t_box[0] + t_box[1]), 0.5 * (t_box[1] - t_box[0]), step_t)
        xs = tuple(uniform_nodes(0.5 * (a + b), 0.5 * (b - a), h) for a, b, h in zip(lo, hi, steps_x))
        return cls(t, xs)


def _support_lattice(amp, t_box=None, x_box=None, n=5, n_xi=9):
    t_box = t_box or amp.t_box
    x_box = x_box or amp.x_box
    t = np.linspace(*t_box, n)
    xs = Lattice._box_points(x_box[0], x_box[1], n)
    xis = Lattice._box_points(*amp.xi_box, n_xi)
    return t[:, None, None], xs[None, :, None, :], xis[None, None, :, :]


def gradient_bounds(phase, amp, t_box=None, x_box=None):
    """Sampled sup of |d phi/dx_i| (per axis), |d phi/dt| and |d phi/d xi_i| over a support box."""
    t, x, xi = _support_lattice(amp, t_box, x_box)
    g = np.abs(phase.grad_tx(t, x, xi))
    gx = np.abs(phase.grad_xi(t, x, xi))
    axes = tuple(range(g.ndim - 1))
    return g.max(axis=axes)[:-1], float(g.max(axis=axes)[-1]), gx.max(axis=axes)


def _limit(lam, bound):
    return np.inf if bound * lam == 0 else 2.0 * np.pi / (POINTS_PER_WAVE * lam * bound)


def intersect_boxes(amps):
    t_lo = max(a.t_box[0] for a in amps)
    t_hi = min(a.t_box[1] for a in amps)
    x_lo = np.max([a.x_box[0] for a in amps], axis=0)
    x_hi = np.min([a.x_box[1] for a in amps], axis=0)
    if t_lo >= t_hi or np.any(x_lo >= x_hi):
        raise DomainError("amplitude supports do not overlap in (t, x)")
    return (t_lo, t_hi), (x_lo, x_hi)


def resolution_limits(phase, amp, lam):
    """Largest admissible steps (t, x per axis, xi per axis) for one operator."""
    gx, gt, gxi = gradient_bounds(phase, amp)
    return (_limit(lam, gt), np.array([_limit(lam, b) for b in gx]),
            np.array([min(_limit(lam, b), 2.0 * r / XI_CELLS) for b, r in zip(gxi, amp.xi_radius)]))


def resolved_grid(*operators):
    """Grid over the common (t, x) support that resolves every (phase, amp, lam) triple."""
    amps = [op[1] for op in operators]
    t_box, x_box = intersect_boxes(amps)
    ht = np.inf
    hx = np.full(amps[0].d, np.inf)
    for phase, amp, lam in operators:
        lt, lx, _ = resolution_limits(phase, amp, lam)
        ht = min(ht, lt)
        hx = np.minimum(hx, lx)
    ht = min(ht, (t_box[1] - t_box[0]) / 16)
    hx = np.minimum(hx, (x_box[1] - x_box[0]) / 16)
    return SpaceTimeGrid.covering(t_box, x_box, ht, hx)


def resolved_profile(func, phase, amp, lam):
    """Sample `func` with the frequency step the resolution rule demands."""
    return FrequencyProfile.sample(func, amp, resolution_limits(phase, amp, lam)[2])


def check_resolution(phase, amp, f, lam, grid):
    """Raise ResolutionError naming the first axis whose step is too coarse."""
    lt, lx, lxi = resolution_limits(phase, amp, lam)
    slack = 1.0 + 1e-9
    if grid.step_t > lt * slack:
        raise ResolutionError("t", grid.step_t, lt)
    for i, (h, l) in enumerate(zip(grid.steps_x, lx)):
        if h > l * slack:
            raise ResolutionError(f"x{i + 1}", h, l)
    for i, (h, l) in enumerate(zip(f.steps, lxi)):
        if h > l * slack:
            raise ResolutionError(f"xi{i + 1}", h, l)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def _uniform(a):
    if a.size < 2:
        return False
    dif = np.diff(a)
    return np.allclose(dif, dif[0], rtol=1e-9, atol=0.0)


def _czt_rows(phase, amp, f, lam, grid, t):
    """Graph-phase path: one chirp-z transform per xi axis for each time slice."""
    d = f.d
    pts = f.points()
    base = f.weights * amp.xi_factor(pts) * f.values
    hvals = phase.time_symbol(pts)
    out = base[None] * np.exp(1j * lam * np.multiply.outer(t, hvals))
    for i in range(d):
        xi_ax, x_ax = f.axes[i], grid.x_axes[i]
        hxi, hx = xi_ax[1] - xi_ax[0], x_ax[1] - x_ax[0]
        cz = CZT(xi_ax.size, m=x_ax.size, w=np.exp(1j * lam * hx * hxi),
                 a=np.exp(-1j * lam * x_ax[0] * hxi))
        out = cz(out, axis=i + 1)
        pre = np.exp(1j * lam * x_ax * xi_ax[0]) * amp.x_axis_factor(i, x_ax)
        shape = [1] * out.ndim
        shape[i + 1] = -1
        out = out * pre.reshape(shape)
    return out * amp.t_factor(t).reshape((-1,) + (1,) * d)


def _direct_rows(phase, amp, f, lam, grid, t):
    """Generic path: chunked direct sum over frequency nodes."""
    xpts = grid.x_points()
    nx = xpts.shape[:-1]
    xflat = xpts.reshape(-1, grid.d)
    xi = f.points().reshape(-1, f.d)
    base = (f.weights * f.values).reshape(-1) * amp.xi_factor(xi)
    keep = base != 0
    xi, base = xi[keep], base[keep]
    out = np.zeros((t.size, xflat.shape[0]), dtype=complex)
    chunk = max(1, _CHUNK_ELEMENTS // max(1, xflat.shape[0] * max(1, xi.shape[0])))
    for s in range(0, t.size, chunk):
        tt = t[s:s + chunk]
        ph = phase.phi(tt[:, None, None], xflat[None, :, None, :], xi[None, None, :, :])
        out[s:s + chunk] = np.exp(1j * lam * ph) @ base
    out *= amp.x_factor(xflat)[None, :]
    out *= amp.t_factor(t)[:, None]
    return out.reshape((t.size,) + nx)


def _rows(phase, amp, f, lam, grid, t, method):
    fast = (phase.time_symbol is not None and all(_uniform(a) for a in f.axes)
            and all(_uniform(a) for a in grid.x_axes))
    if method == "czt" or (method == "auto" and fast):
        if not fast:
            raise ValueError("chirp-z path needs a graph phase and uniform grids")
        return _czt_rows(phase, amp, f, lam, grid, t)
    return _direct_rows(phase, amp, f, lam, grid, t)


def eval_oscillatory(phase, amp, f, lam, grid, method="auto", check=True):
    """Evaluate T_lam f on a space-time grid.

    Parameters
    ----------
    phase : PhaseFunction
    amp : Amplitude
    f : FrequencyProfile
    lam : float
        Frequency parameter, >= 1.
    grid : SpaceTimeGrid
    method : {"auto", "czt", "direct"}
    check : bool
        Enforce the resolution rule (raises ResolutionError).

    Returns
    -------
    ndarray, complex, shape ``grid.shape``
    """
    if check:
        check_resolution(phase, amp, f, lam, grid)
    return _rows(phase, amp, f, lam, grid, grid.t, method)


def _row_chunk(grid, *profiles):
    per_row = int(np.prod(grid.shape[1:])) + max(int(np.prod(p.counts)) for p in profiles)
    return max(1, _CHUNK_ELEMENTS // (4 * per_row))


def bilinear_L2_norm(phase_a, amp_a, f, lam, phase_b, amp_b, g, mu, grid, method="auto", check=True):
    """Discrete L^2(t, x) norm of T_lam f * T~_mu g.

    Time slices are processed in fixed chunks whose partial sums are added
    with numpy's pairwise summation, so the value does not depend on how the
    work is scheduled.
    """
    if mu > lam:
        raise ArgumentOrderError(f"mu = {mu} exceeds lam = {lam}; order the scales")
    if check:
        check_resolution(phase_a, amp_a, f, lam, grid)
        check_resolution(phase_b, amp_b, g, mu, grid)
    wx = grid.wx
    wt = grid.wt
    chunk = _row_chunk(grid, f, g)
    partial = []
    for s in range(0, grid.t.size, chunk):
        t = grid.t[s:s + chunk]
        prod = _rows(phase_a, amp_a, f, lam, grid, t, method) * _rows(phase_b, amp_b, g, mu, grid, t, method)
        dens = prod.real ** 2 + prod.imag ** 2
        partial.append(np.sum(wt[s:s + chunk] * np.sum(dens * wx, axis=tuple(range(1, dens.ndim)))))
    return float(np.sqrt(np.sum(np.array(partial))))


# ---------------------------------------------------------------------------
# decay sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecaySample:
    lam: float
    mu: float
    ratio: float
    spread: float
    values: tuple
    grid_shape: tuple


@dataclass
class DecaySweep:
    samples: list
    margin: float
    meta: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([getattr(s, name) for s in self.samples], dtype=float)


def mu_schedule(lams, mu_rule):
    """mu values for a lam list: a number (fixed), "tied" (mu = lam),
    ("ratio", rho) (mu = lam / rho), or an explicit sequence."""
    lams = [float(v) for v in lams]
    if isinstance(mu_rule, str):
        if mu_rule != "tied":
            raise ValueError(f"unknown mu rule {mu_rule!r}")
        return lams
    if isinstance(mu_rule, (int, float)):
        return [float(mu_rule)] * len(lams)
    if len(mu_rule) == 2 and mu_rule[0] == "ratio":
        return [v / float(mu_rule[1]) for v in lams]
    mus = [float(v) for v in mu_rule]
    if len(mus) != len(lams):
        raise ValueError("explicit mu list must match the lam list")
    return mus


def pair_margin(phase_a, amp_a, phase_b, amp_b, n=5):
    """Transversality margin of two operators over their common support."""
    t_box, x_box = intersect_boxes([amp_a, amp_b])
    lat = Lattice.from_boxes(t_box, x_box, amp_a.xi_box, amp_b.xi_box, n=n)
    return transversality_margin(phase_a, phase_b, lat)


def decay_sweep(phase_a, phase_b, amp_a, amp_b, lams, mu_rule, trials=8, seed=0,
                experiment_id="decay-sweep", delta_min=0.1, controls=6, method="auto"):
    """Normalized bilinear norms ||T f T~ g|| / (||f|| ||g||) over a scale list.

    Each trial draws smooth random profiles f, g (seeded by experiment id and
    trial index; the same functions are reused at every scale) and the median
    over trials is reported with the interquartile range as spread.

    Raises PreconditionError when the transversality margin over the
    supports is below `delta_min`.
    """
    lams = [float(v) for v in lams]
    if any(b < a for a, b in zip(lams, lams[1:])) or min(lams) < 1:
        raise ValueError("lam list must be ascending with entries >= 1")
    mus = mu_schedule(lams, mu_rule)
    report = pair_margin(phase_a, amp_a, phase_b, amp_b)
    if report.margin < delta_min:
        raise PreconditionError(f"transversality margin {report.margin:.3f} < {delta_min}")
    funcs = []
    for k in range(trials):
        ff = SmoothRandomFunction(amp_a.xi_center, amp_a.xi_radius,
                                  trial_rng(seed, experiment_id, k, 0), controls)
        gg = SmoothRandomFunction(amp_b.xi_center, amp_b.xi_radius,
                                  trial_rng(seed, experiment_id, k, 1), controls)
        funcs.append((ff, gg))
    samples = []
    for lam, mu in zip(lams, mus):
        grid = resolved_grid((phase_a, amp_a, lam), (phase_b, amp_b, mu))
        vals = []
        for ff, gg in funcs:
            f = resolved_profile(ff, phase_a, amp_a, lam)
            g = resolved_profile(gg, phase_b, amp_b, mu)
            nrm = bilinear_L2_norm(phase_a, amp_a, f, lam, phase_b, amp_b, g, mu, grid, method=method)
            vals.append(nrm / (f.norm() * g.norm()))
        q1, med, q3 = np.percentile(vals, [25, 50, 75])
        samples.append(DecaySample(lam, mu, float(med), float(q3 - q1), tuple(vals), grid.shape))
    return DecaySweep(samples, report.margin, {"trials": trials, "seed": seed})


# ---------------------------------------------------------------------------
# TT* kernel
# ---------------------------------------------------------------------------

class CumulativePhase:
    """Phase and amplitude of the operator S after the momentum change of variables.

    With eps = mu / lam, M = A^{-1} B (x-blocks of the mixed Hessians at the
    support centers) and xi2 = (p, xi2') split along axis `direction`::

        Phi(t, x, xi, p) = phi(t, x, xi - eps M xi2) + eps psi(t, x, xi2)
        c(t, x, xi, p)   = a(t, x, xi - eps M xi2) b(t, x, xi2)
    """

    def __init__(self, phase_a, amp_a, phase_b, amp_b, lam, mu, frozen=(), direction=0):
        if mu > lam:
            raise ArgumentOrderError("mu must not exceed lam")
        self.phase_a, self.amp_a, self.phase_b, self.amp_b = phase_a, amp_a, phase_b, amp_b
        self.lam, self.mu = float(lam), float(mu)
        self.eps = self.mu / self.lam
        self.d = amp_a.d
        self.frozen = np.asarray(frozen, dtype=float).reshape(self.d - 1)
        self.direction = int(direction)
        A = phase_a.mixed_hess(*amp_a.center)[: self.d]
        B = phase_b.mixed_hess(*amp_b.center)[: self.d]
        if abs(np.linalg.det(A)) < 1e-12:
            raise DegeneracyError("x-block of the first mixed Hessian is singular at the support center")
        self.M = np.linalg.solve(A, B)

    def xi2(self, p):
        p = np.asarray(p, dtype=float)
        rest = np.broadcast_to(self.frozen, p.shape + (self.d - 1,))
        return np.concatenate([rest[..., : self.direction], p[..., None], rest[..., self.direction:]], -1)

    def _split(self, xi, p):
        xi2 = self.xi2(p)
        xi1 = np.asarray(xi, dtype=float) - self.eps * xi2 @ self.M.T
        return xi1, xi2

    def phi(self, t, x, xi, p):
        xi1, xi2 = self._split(xi, p)
        return self.phase_a.phi(t, x, xi1) + self.eps * self.phase_b.phi(t, x, xi2)

    def grad_tx(self, t, x, xi, p):
        xi1, xi2 = self._split(xi, p)
        return self.phase_a.grad_tx(t, x, xi1) + self.eps * self.phase_b.grad_tx(t, x, xi2)

    def amplitude(self, t, x, xi, p):
        xi1, xi2 = self._split(xi, p)
        return self.amp_a(t, x, xi1) * self.amp_b(t, x, xi2)

    @property
    def t_box(self):
        return intersect_boxes([self.amp_a, self.amp_b])[0]

    @property
    def x_box(self):
        return intersect_boxes([self.amp_a, self.amp_b])[1]

    def center(self):
        """(xi, p) at the center of the support of c."""
        p0 = np.array(self.amp_b.xi_center)[self.direction]
        xi0 = np.array(self.amp_a.xi_center) + self.eps * self.M @ np.array(self.amp_b.xi_center)
        return xi0, float(p0)


@dataclass(frozen=True)
class KernelSample:
    zeta: tuple
    q: float
    xi: tuple
    p: float
    frozen: tuple
    value: complex
    lam: float
    mu: float

    @property
    def abscissa(self):
        """1 + lam |xi - zeta| + mu |q - p|."""
        dxi = np.linalg.norm(np.subtract(self.xi, self.zeta))
        return float(1.0 + self.lam * dxi + self.mu * abs(self.q - self.p))


def _tx_points(grid):
    T = grid.t.reshape((-1,) + (1,) * grid.d)
    X = grid.x_points()[None]
    return T, X


def kernel_grid(cum, pairs, cap_cells=64):
    """Grid over the support of c resolving exp(i lam [Phi(xi,p) - Phi(zeta,q)]) for all pairs.

    `pairs` is a list of ((zeta, q), (xi, p)).  Steps are also capped at
    1/cap_cells of the support radii so the cutoffs themselves are resolved.
    """
    t_box, x_box = cum.t_box, cum.x_box
    t = np.linspace(*t_box, 9)[:, None]
    xs = Lattice._box_points(x_box[0], x_box[1], 9)
    gmax = np.zeros(cum.d + 1)
    for (zeta, q), (xi, p) in pairs:
        diff = (cum.grad_tx(t[:, :, None], xs[None, :, :], np.asarray(xi, float), p)
                - cum.grad_tx(t[:, :, None], xs[None, :, :], np.asarray(zeta, float), q))
        gmax = np.maximum(gmax, np.abs(diff).reshape(-1, cum.d + 1).max(axis=0))
    ht = min(_limit(cum.lam, gmax[-1]), 0.5 * (t_box[1] - t_box[0]) / cap_cells)
    hx = [min(_limit(cum.lam, gmax[i]), 0.5 * (x_box[1][i] - x_box[0][i]) / cap_cells)
          for i in range(cum.d)]
    return SpaceTimeGrid.covering(t_box, x_box, ht, hx)


def kernel_K(cum, zeta, q, xi, p, grid):
    """K(zeta, q, xi, p) = sum_{t,x} w exp(i lam [Phi(xi,p) - Phi(zeta,q)]) c(xi,p) c(zeta,q).

    The amplitudes are real, so exchanging the two argument pairs negates the
    phase difference exactly and the result is the exact complex conjugate.
    """
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    T, X = _tx_points(grid)
    delta = cum.phi(T, X, xi, p) - cum.phi(T, X, zeta, q)
    arg = cum.lam * np.abs(delta)
    mass = cum.amplitude(T, X, xi, p) * cum.amplitude(T, X, zeta, q)
    w = grid.wt.reshape((-1,) + (1,) * grid.d) * grid.wx[None]
    wm = w * mass
    re = np.sum(wm * np.cos(arg))
    im = np.sum(wm * (np.sign(delta) * np.sin(arg)))
    return KernelSample(tuple(zeta.tolist()), float(q), tuple(xi.tolist()), float(p),
                        tuple(cum.frozen.tolist()), complex(re, im), cum.lam, cum.mu)


def kernel_ray(cum, along, offsets, base=None, grid=None):
    """Kernel samples along a ray.

    along="xi": (zeta, q) = base, (xi, p) = (zeta + s e_1, q).
    along="p":  (zeta, q) = (xi0, p0 - s/2), (xi, p) = (xi0, p0 + s/2).
    """
    xi0, p0 = base if base is not None else cum.center()
    xi0 = np.atleast_1d(np.asarray(xi0, dtype=float))
    e1 = np.zeros(cum.d)
    e1[0] = 1.0
    pairs = []
    for s in offsets:
        if along == "xi":
            pairs.append(((xi0, p0), (xi0 + s * e1, p0)))
        elif along == "p":
            pairs.append(((xi0, p0 - 0.5 * s), (xi0, p0 + 0.5 * s)))
        else:
            raise ValueError("along must be 'xi' or 'p'")
    grid = grid if grid is not None else kernel_grid(cum, pairs)
    return [kernel_K(cum, z, q, x, p, grid) for (z, q), (x, p) in pairs]


@dataclass(frozen=True)
class KernelDecay:
    fit: object
    claimed: float
    passed: bool
    used: int


def kernel_decay_check(samples, d, floor=1e-12, min_samples=6, min_span=1.5):
    """Fit log|K| against log(1 + lam|xi - zeta| + mu|q - p|) along one ray.

    The fit uses the upper envelope (running maximum from the far end), and
    drops samples whose envelope sits below `floor` times the largest value,
    where quadrature round-off dominates.  Passes iff slope <= -(d + 2).
    """
    s = np.array([k.abscissa for k in samples])
    y = np.abs(np.array([k.value for k in samples]))
    order = np.argsort(s, kind="stable")
    s, y = s[order], y[order]
    env = np.maximum.accumulate(y[::-1])[::-1]
    keep = env > floor * env.max() if env.size else env.astype(bool)
    s, env = s[keep], env[keep]
    if s.size < min_samples:
        raise FitDomainError(f"{s.size} usable samples, need {min_samples}")
    span = np.log10(s[-1] / s[0])
    if span + 1e-12 < min_span:
        raise FitDomainError(f"samples span {span:.2f} decades, need {min_span}")
    fit = fit_power_law(s, env)
    claimed = -(d + 2.0)
    return KernelDecay(fit, claimed, bool(fit.exponent <= claimed), int(s.size))


# ---------------------------------------------------------------------------
# sharpness witness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SharpnessWitness:
    N1: float
    d: int
    value: float
    conv_norm: float
    u_norm: float
    v_norm: float
    closed_form: float
    lower_bound_holds: bool


def _axis_convolution(a_lo, a_len, b_lo, b_len, step):
    """Samples (at spacing `step`) of the indicator convolution chi_A * chi_B in 1D, with the node grid."""
    na = int(round(a_len / step))
    nb = int(round(b_len / step))
    conv = step * np.convolve(np.ones(na), np.ones(nb))
    nodes = a_lo + b_lo + step * (np.arange(conv.size) + 1.0)
    return nodes, conv


def sharpness_report(N1, d=1, cells=16):
    """Rectangle witness for the sharpness of the bilinear rate.

    u0^ = indicator of [N1, N1 + 1/N1] x [-1, 1]^(d-1) and v0^ = indicator of
    [-1, 1]^d lift to the space-time rectangles R1 = [N1, N1 + 1/N1] x [0, 1]^d
    and R2 = [-1, 1]^(d+1).  The convolution of their indicators is a tensor
    product, so its L^2 norm is a product of 1D discrete convolutions with
    `cells` cells across the thin side.
    """
    if N1 < 16:
        raise DomainError("the witness needs N1 >= 16")
    thin = 1.0 / N1
    h_thin = thin / cells
    nodes, c1 = _axis_convolution(N1, thin, -1.0, 2.0, h_thin)
    sq = np.sum(c1 * c1) * h_thin
    h = 1.0 / cells
    lower = bool(np.min(c1[(nodes >= N1 + 0.25) & (nodes <= N1 + 0.75)]) >= thin * (1 - 1e-12))
    m_other = 1.0
    for _ in range(d):
        n2, c2 = _axis_convolution(0.0, 1.0, -1.0, 2.0, h)
        sq *= np.sum(c2 * c2) * h
        sel = (n2 >= -0.5) & (n2 <= 0.5)
        m_other *= np.min(c2[sel])
    lower = lower and m_other >= 0.5 ** d * (1 - 1e-12)
    conv = float(np.sqrt(sq))
    u_norm = float(np.sqrt(thin * 2.0 ** (d - 1)))
    v_norm = float(np.sqrt(2.0 ** d))
    value = conv / (u_norm * v_norm) * np.sqrt(N1)
    closed = np.sqrt((2.0 - 1.0 / (3.0 * N1)) * (5.0 / 3.0) ** d) / thin ** -1
    closed = float(closed / (u_norm * v_norm) * np.sqrt(N1))
    return SharpnessWitness(float(N1), int(d), float(value), conv, u_norm, v_norm, closed, lower)


def sharpness_witness(N1, d=1, cells=16):
    """||chi_R1 * chi_R2|| / (||u0|| ||v0||) * N1^(1/2) for the rectangle witness."""
    return sharpness_report(N1, d, cells).value
