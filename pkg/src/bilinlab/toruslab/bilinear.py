"""Bilinear space-time norms of evolved torus fields.

The quantity is ||(e^{tA} u0)(e^{tB} v0)||_{L^2([-T, T] x torus)}.

Space: |uv| is unchanged when u is multiplied by a unimodular plane wave, so
each field is recentred on the mean of its modes.  The product of the
recentred fields is a trigonometric polynomial whose modes fit on a grid of
2 (span_u + span_v) + 2 points per axis, where the discrete L^2 sum is exact.

Time: |uv|^2(t) only contains frequencies in [-W, W] with
W = ptp(omega_u) + ptp(omega_v), so Gauss-Legendre quadrature with about
W T / 2 nodes (plus a margin) integrates it to round-off.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.special import roots_legendre

from ..errors import (ArgumentOrderError, EmptyBandError, ResolutionError, ScaleError)
from ..seeding import trial_rng
from .fields import TWO_PI, DyadicBand, make_band_field, make_beam_field
from .propagate import FourierMultiplier, dispersion

#: pair-count cap of the resonance oracle
ORACLE_PAIR_CAP = 10_000
#: complex elements per batched transform
_BATCH_ELEMENTS = 1 << 21

_roots_cache = {}


def gauss_legendre(n):
    if n not in _roots_cache:
        _roots_cache[n] = roots_legendre(n)
    return _roots_cache[n]


def time_nodes(width, T):
    """Gauss-Legendre nodes and weights on [-T, T] for band width `width`."""
    wt = width * T
    n = int(np.ceil(0.5 * wt + 4.0 * np.cbrt(wt) + 20))
    x, w = gauss_legendre(n)
    return T * x, T * w


def _apply_orders(u, order):
    if order == 0:
        return u
    return u.with_coeffs(u.coeffs * FourierMultiplier("derivative", order=order).symbol(u.xi))


def _recentre(modes):
    k0 = np.round(modes.mean(axis=0)).astype(int) if modes.size else np.zeros(modes.shape[1], int)
    rel = modes - k0
    span = np.max(np.abs(rel), axis=0) if modes.size else np.zeros(modes.shape[1], int)
    return rel, span


def _product_sizes(span_u, span_v):
    sizes = []
    for s in span_u + span_v:
        m = sfft.next_fast_len(int(2 * s + 2))
        sizes.append(m + (m % 2))
    return tuple(sizes)


def _dense_norm_sq(rel_u, cu, wu, rel_v, cv, wv, sizes, L, t, w):
    """sum_t w(t) ||u(t) v(t)||^2_{L^2(torus)} on the recentred product grid."""
    d = len(sizes)
    cells = int(np.prod(sizes))
    idx_u = tuple((rel_u % np.array(sizes)).T)
    idx_v = tuple((rel_v % np.array(sizes)).T)
    cell_volume = np.prod([L / m for m in sizes])
    batch = max(1, _BATCH_ELEMENTS // cells)
    partial = []
    axes = tuple(range(1, d + 1))
    for s in range(0, t.size, batch):
        tb = t[s:s + batch]
        A = np.zeros((tb.size,) + sizes, dtype=complex)
        B = np.zeros((tb.size,) + sizes, dtype=complex)
        A[(slice(None),) + idx_u] = cu[None, :] * np.exp(-1j * np.outer(tb, wu))
        B[(slice(None),) + idx_v] = cv[None, :] * np.exp(-1j * np.outer(tb, wv))
        ua = sfft.ifftn(A, axes=axes, norm="forward", workers=1)
        vb = sfft.ifftn(B, axes=axes, norm="forward", workers=1)
        prod = ua * vb
        dens = np.sum(prod.real ** 2 + prod.imag ** 2, axis=axes) * cell_volume
        partial.append(np.sum(w[s:s + batch] * dens))
    return float(np.sum(np.array(partial)))


def _separable_norm_sq(u, v, L, T):
    """Tensor-product fields under the Schroedinger flow: the spatial norm factorizes per axis."""
    axes = []
    width = 0.0
    for (ku, cu), (kv, cv) in zip(u.factors, v.factors):
        ru, su = _recentre(ku[:, None])
        rv, sv = _recentre(kv[:, None])
        wu = (ku * (TWO_PI / L)) ** 2
        wv = (kv * (TWO_PI / L)) ** 2
        width += np.ptp(wu) + np.ptp(wv)
        axes.append((ru, cu, wu, rv, cv, wv, _product_sizes(su, sv)))
    t, w = time_nodes(width, T)
    batch = max(1, _BATCH_ELEMENTS // max(sizes[0] for *_, sizes in axes))
    total = 0.0
    for s in range(0, t.size, batch):
        tb = t[s:s + batch]
        dens = np.ones(tb.size)
        for ru, cu, wu, rv, cv, wv, (m,) in axes:
            A = np.zeros((tb.size, m), dtype=complex)
            B = np.zeros((tb.size, m), dtype=complex)
            A[:, ru[:, 0] % m] = cu[None, :] * np.exp(-1j * np.outer(tb, wu))
            B[:, rv[:, 0] % m] = cv[None, :] * np.exp(-1j * np.outer(tb, wv))
            prod = (sfft.ifft(A, axis=1, norm="forward", workers=1)
                    * sfft.ifft(B, axis=1, norm="forward", workers=1))
            dens = dens * (np.sum(prod.real ** 2 + prod.imag ** 2, axis=1) * (L / m))
        total += np.sum(w[s:s + batch] * dens)
    return float(total), t.size


def product_norm(u, v, T, generators=("schrodinger", "schrodinger"), orders=(0, 0), direction=1):
    """||(P(D) e^{tA} u)(Q(D) e^{tB} v)||_{L^2([-T, T] x torus)}.

    Parameters
    ----------
    u, v : TorusField
        Fields on the same torus.
    T : float
        Half-length of the time window.
    generators : pair of {"schrodinger", "wave+", "wave-"}
    orders : pair of float
        Derivative orders n, m of the multipliers |xi|^n, |xi|^m.
    direction : +1 or -1
        -1 evolves backward in time (t -> -t).

    Returns
    -------
    norm : float
    nodes : int
        Number of time nodes used.
    """
    if u.L != v.L or u.d != v.d:
        raise ValueError("fields live on different tori")
    L = u.L
    if (u.factors is not None and v.factors is not None and orders == (0, 0)
            and tuple(generators) == ("schrodinger", "schrodinger") and direction == 1):
        sq, n = _separable_norm_sq(u, v, L, T)
        return float(np.sqrt(sq)), n
    u = _apply_orders(u, orders[0])
    v = _apply_orders(v, orders[1])
    wu = direction * dispersion(generators[0], u.xi)
    wv = direction * dispersion(generators[1], v.xi)
    if u.size == 0 or v.size == 0:
        return 0.0, 0
    rel_u, su = _recentre(u.modes)
    rel_v, sv = _recentre(v.modes)
    sizes = _product_sizes(su, sv)
    t, w = time_nodes(np.ptp(wu) + np.ptp(wv), T)
    sq = _dense_norm_sq(rel_u, u.coeffs, wu, rel_v, v.coeffs, wv, sizes, L, t, w)
    return float(np.sqrt(sq)), t.size


def resonance_oracle(u, v, T, generators=("schrodinger", "schrodinger")):
    """Exact ||uv||^2 over [-T, T] x torus by grouping mode pairs with equal total mode.

    sum_K sum_{(p,q),(p',q') -> K} c_p d_q conj(c_p' d_q') 2T sinc((W_pq - W_p'q') T) L^d,
    with W_pq = omega_p + omega_q.  Returns the squared norm.
    """
    n_pairs = u.size * v.size
    if n_pairs > ORACLE_PAIR_CAP:
        raise ScaleError(f"{n_pairs} mode pairs exceed the oracle cap {ORACLE_PAIR_CAP}")
    wu = dispersion(generators[0], u.xi)
    wv = dispersion(generators[1], v.xi)
    K = (u.modes[:, None, :] + v.modes[None, :, :]).reshape(-1, u.d)
    amp = np.outer(u.coeffs, v.coeffs).ravel()
    freq = np.add.outer(wu, wv).ravel()
    _, group = np.unique(K, axis=0, return_inverse=True)
    group = group.ravel()
    order = np.argsort(group, kind="stable")
    bounds = np.flatnonzero(np.diff(group[order])) + 1
    total = 0.0
    for sel in np.split(order, bounds):
        z = amp[sel]
        dw = freq[sel][:, None] - freq[sel][None, :]
        total += np.real(z @ (2.0 * T * np.sinc(dw * T / np.pi)) @ np.conj(z))
    return float(total * u.L ** u.d)


@dataclass(frozen=True)
class RatioSample:
    """Median normalized bilinear norm over seeded trials."""

    N1: float
    N2: float
    T: float
    lambda_scale: float
    generators: tuple
    value: float
    spread: float
    trials: int
    values: tuple
    meta: dict = field(default_factory=dict)


def _summary(values):
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    return float(med), float(q3 - q1)


def _make_field(kind, d, M, L, N, rng):
    if kind == "beam":
        return make_beam_field(d, L, DyadicBand(N), rng)
    return make_band_field(d, M, L, DyadicBand(N), rng, kind)


def nominal_grid(N1, lambda_scale):
    """Power-of-two grid with M >= 8 N1 (L / 2 pi)."""
    return int(2 ** np.ceil(np.log2(8 * N1 * lambda_scale)))


def measure_ratio(N1, N2, T, d=2, trials=8, generators=("schrodinger", "schrodinger"),
                  orders=(0, 0), lambda_scale=1.0, kind="random", seed=0,
                  experiment_id="torus-bilinear", M=None):
    """Shared driver for every torus ratio: fields at bands N1, N2, median over trials."""
    L = TWO_PI * lambda_scale
    M = M if M is not None else nominal_grid(max(N1, N2), lambda_scale)
    if M < 8 * max(N1, N2) * lambda_scale and kind != "beam":
        raise ResolutionError("M", 1.0 / M, 1.0 / (8 * max(N1, N2) * lambda_scale))
    values, nodes = [], 0
    for k in range(trials):
        u = _make_field(kind, d, M, L, N1, trial_rng(seed, experiment_id, k, 0))
        v = _make_field(kind, d, M, L, N2, trial_rng(seed, experiment_id, k, 1))
        nrm, nodes = product_norm(u, v, T, generators, orders)
        values.append(nrm / (u.norm() * v.norm()))
    med, spread = _summary(values)
    return RatioSample(float(N1), float(N2), float(T), float(lambda_scale), tuple(generators), med,
                       spread, trials, tuple(values), {"kind": kind, "time_nodes": nodes, "M": M,
                                                       "orders": tuple(orders)})


def bilinear_ratio(N1, N2, T, d=2, trials=8, generators=("schrodinger", "schrodinger"), **kw):
    """Median of ||e^{itD} u0 e^{itD} v0|| / (||u0|| ||v0||) over [-T, T] x torus.

    Requires N2 <= N1.  Keyword arguments are passed to `measure_ratio`
    (kind, seed, lambda_scale, orders, experiment_id, M).
    """
    if N2 > N1:
        raise ArgumentOrderError(f"N2 = {N2} exceeds N1 = {N1}")
    return measure_ratio(N1, N2, T, d, trials, generators, **kw)


def bilinear_constant(T, N1, N2, d):
    """N2^{(d-1)/2} / N1^{1/2} for T <= 1/N1, T^{1/2} N2^{(d-1)/2} otherwise."""
    if T <= 1.0 / N1:
        return N2 ** ((d - 1) / 2) / np.sqrt(N1)
    return np.sqrt(T) * N2 ** ((d - 1) / 2)


def rescaled_ratio(lambda_scale, N1, N2, d=2, trials=8, kind="beam", **kw):
    """T = 1 ratio on the torus of side 2 pi lambda_scale, tagged with its regime.

    regime "large" (lambda_scale > N1) predicts (N2/N1)^{1/2};
    regime "small" predicts (N2/lambda_scale)^{1/2}.
    """
    kw.setdefault("experiment_id", "torus-rescaled")
    sample = bilinear_ratio(N1, N2, 1.0, d, trials, lambda_scale=lambda_scale, kind=kind, **kw)
    large = lambda_scale > N1
    sample.meta["regime"] = "large" if large else "small"
    sample.meta["predicted"] = float(np.sqrt(N2 / N1) if large else np.sqrt(N2 / lambda_scale))
    return sample


def mixed_ratio(N1, N2, T, d=2, sign=1, trials=8, **kw):
    """Schroedinger evolution of u0 times half-wave evolution (sign +-1) of v0."""
    kw.setdefault("experiment_id", "torus-mixed")
    gen = ("schrodinger", "wave+" if sign >= 0 else "wave-")
    sample = measure_ratio(N1, N2, T, d, trials, gen, **kw)
    sample.meta["predicted"] = float(min(N1, N2) ** ((d - 1) / 2) / np.sqrt(N1))
    return sample


def derivative_twisted_ratio(N1, N2, T, orders=(1, 0), d=2, trials=8, **kw):
    """||P(D) e^{itD} u0 . Q(D) e^{itD} v0|| / (||u0|| ||v0||) with |xi|^n, |xi|^m."""
    kw.setdefault("experiment_id", "torus-derivative")
    sample = bilinear_ratio(N1, N2, T, d, trials, orders=tuple(orders), **kw)
    n, m = orders
    sample.meta["predicted"] = float(N1 ** n * N2 ** m * bilinear_constant(T, N1, N2, d))
    return sample


def strichartz_ratio_of_field(u, T):
    """||e^{itD} u||_{L^4([-T, T] x torus)} / ||u||."""
    nrm = u.norm()
    if nrm == 0.0:
        raise EmptyBandError("field has no energy in the band")
    sq, _ = product_norm(u, u, T)
    return float(np.sqrt(sq) / nrm)


def linear_strichartz_ratio(N, d=2, trials=8, T=None, kind="random", seed=0,
                            experiment_id="linear-baseline", lambda_scale=1.0):
    """Median over trials of ||e^{itD} u||_{L^4([-T, T] x torus)} / ||u||, T = 1/N by default."""
    T = 1.0 / N if T is None else T
    L = TWO_PI * lambda_scale
    M = nominal_grid(N, lambda_scale)
    vals = []
    for k in range(trials):
        u = _make_field(kind, d, M, L, N, trial_rng(seed, experiment_id, k, 0))
        vals.append(strichartz_ratio_of_field(u, T))
    return float(np.median(vals))
