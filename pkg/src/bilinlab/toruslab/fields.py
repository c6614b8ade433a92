"""Band-limited fields on flat tori, stored as sparse Fourier mode lists."""

from dataclasses import dataclass

import numpy as np

from ..errors import AliasingError, DomainError
from ..smooth import dyadic_bump

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class DyadicBand:
    """Littlewood-Paley band at scale N: weight dyadic_bump(|xi| / N)."""

    N: float

    def weight(self, xi_norm):
        return dyadic_bump(np.asarray(xi_norm, dtype=float) / self.N)

    @property
    def support(self):
        return 0.5 * self.N, 2.0 * self.N

    @property
    def plateau(self):
        return 0.75 * self.N, 1.5 * self.N


class TorusField:
    """u(x) = sum_k c_k exp(2 pi i k . x / L) on the torus of side L.

    Parameters
    ----------
    d : int
    L : float
    M : int
        Nominal modes per axis of the physical grid (|k_i| <= M/2).
    modes : ndarray (n, d) of int, optional
    coeffs : ndarray (n,) complex, optional
    band : DyadicBand or None
    factors : tuple or None
        For tensor-product fields, per-axis (modes, coeffs) pairs whose
        outer product gives the coefficients.  When `modes` and `coeffs` are
        omitted they are built from the factors on first access, so huge
        separable fields cost only their per-axis data until then.
    """

    def __init__(self, d, L, M, modes=None, coeffs=None, band=None, factors=None):
        if modes is None and factors is None:
            raise DomainError("a field needs modes or per-axis factors")
        self.d = int(d)
        self.L = float(L)
        self.M = int(M)
        self.band = band
        self.factors = None if factors is None else tuple(
            (np.asarray(k, dtype=int), np.asarray(c, dtype=complex)) for k, c in factors)
        self._modes = None if modes is None else np.asarray(modes, dtype=int).reshape(-1, self.d)
        self._coeffs = None if coeffs is None else np.asarray(coeffs, dtype=complex).ravel()

    def _materialize(self):
        ks = np.stack(np.meshgrid(*[k for k, _ in self.factors], indexing="ij"), -1).reshape(-1, self.d)
        cs = self.factors[0][1]
        for _, c in self.factors[1:]:
            cs = np.multiply.outer(cs, c)
        self._modes, self._coeffs = ks, cs.reshape(-1)

    @property
    def modes(self):
        if self._modes is None:
            self._materialize()
        return self._modes

    @property
    def coeffs(self):
        if self._coeffs is None:
            self._materialize()
        return self._coeffs

    @property
    def size(self):
        if self._coeffs is not None:
            return self._coeffs.size
        return int(np.prod([c.size for _, c in self.factors]))

    @property
    def xi(self):
        return self.modes * (TWO_PI / self.L)

    @property
    def lambda_scale(self):
        return self.L / TWO_PI

    def norm(self):
        """L^2 norm over the torus, sqrt(L^d sum |c|^2)."""
        if self._coeffs is None:
            sq = np.prod([np.sum(np.abs(c) ** 2) for _, c in self.factors])
        else:
            sq = np.sum(np.abs(self._coeffs) ** 2)
        return float(np.sqrt(self.L ** self.d * sq))

    def scaled(self, c):
        factors = None
        if self.factors is not None:
            (k0, c0), *rest = self.factors
            factors = ((k0, c * c0), *rest)
        coeffs = None if self._coeffs is None else c * self._coeffs
        return TorusField(self.d, self.L, self.M, self._modes, coeffs, self.band, factors)

    def with_coeffs(self, coeffs, keep_factors=False):
        return TorusField(self.d, self.L, self.M, self.modes, coeffs, self.band,
                          self.factors if keep_factors else None)

    def conj(self):
        """Complex conjugate field: modes -k, conjugated coefficients."""
        factors = None
        if self.factors is not None:
            factors = tuple((-k, np.conj(c)) for k, c in self.factors)
        modes = None if self._modes is None else -self._modes
        coeffs = None if self._coeffs is None else np.conj(self._coeffs)
        return TorusField(self.d, self.L, self.M, modes, coeffs, self.band, factors)

    def to_dense(self):
        """Coefficients on the M^d FFT grid."""
        if np.any(np.abs(self.modes) > self.M // 2):
            raise AliasingError("field has modes beyond the grid Nyquist index")
        dense = np.zeros((self.M,) * self.d, dtype=complex)
        np.add.at(dense, tuple((self.modes % self.M).T), self.coeffs)
        return dense

    def physical(self):
        """Samples at x_j = L j / M."""
        return np.fft.ifftn(self.to_dense()) * self.M ** self.d

    def physical_norm(self):
        u = self.physical()
        return float(np.sqrt(np.sum(np.abs(u) ** 2) * (self.L / self.M) ** self.d))

    @classmethod
    def from_dense(cls, dense, L=TWO_PI, band=None):
        dense = np.asarray(dense, dtype=complex)
        d, M = dense.ndim, dense.shape[0]
        idx = np.nonzero(dense)
        k = np.stack([np.where(i > M // 2, i - M, i) for i in idx], axis=-1) if idx[0].size else \
            np.zeros((0, d), dtype=int)
        return cls(d, float(L), M, k.astype(int), dense[idx], band)

    @classmethod
    def plane_wave(cls, d, M, k, L=TWO_PI, amplitude=1.0):
        k = np.atleast_2d(np.asarray(k, dtype=int))
        return cls(d, float(L), int(M), k, np.array([amplitude], dtype=complex))

    @classmethod
    def from_modes(cls, d, M, modes, coeffs, L=TWO_PI):
        return cls(d, float(L), int(M), np.asarray(modes, dtype=int).reshape(-1, d),
                   np.asarray(coeffs, dtype=complex).ravel())


def check_nyquist(N, M, L):
    """Band at scale N must fit: 2 N (L / 2 pi) <= M / 2."""
    if 2.0 * N * (L / TWO_PI) > M / 2:
        raise AliasingError(f"band 2N = {2 * N} (L/2pi = {L / TWO_PI:g}) exceeds Nyquist of M = {M}")


def band_modes(d, N, L):
    """Integer modes k with |2 pi k / L| inside the open band support (N/2, 2N)."""
    kmax = int(np.floor(2.0 * N * L / TWO_PI))
    ax = np.arange(-kmax, kmax + 1)
    k = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    r = np.sqrt(np.sum((k * (TWO_PI / L)) ** 2, axis=1))
    w = dyadic_bump(r / N)
    keep = w > 0
    return k[keep], w[keep]


def make_band_field(d, M, L, band, rng, kind="random"):
    """Random field spectrally localized at one dyadic band, unit L^2 norm.

    kind="random": complex Gaussian coefficients times the band weight.
    kind="packet": |Gaussian| times the band weight (all phases aligned, so
    the field is concentrated near the origin at t = 0).
    """
    band = band if isinstance(band, DyadicBand) else DyadicBand(float(band))
    check_nyquist(band.N, M, L)
    k, w = band_modes(d, band.N, L)
    n = w.size
    if kind == "random":
        g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    elif kind == "packet":
        g = np.abs(rng.standard_normal(n)).astype(complex)
    else:
        raise DomainError(f"unknown field kind {kind!r}")
    c = g * w
    field = TorusField(d, float(L), int(M), k, c, band)
    return field.scaled(1.0 / field.norm())


def _axis_gaussian(center, sigma, L, trunc):
    lo = int(np.ceil((center - trunc * sigma) * L / TWO_PI))
    hi = int(np.floor((center + trunc * sigma) * L / TWO_PI))
    k = np.arange(lo, hi + 1)
    xi = k * (TWO_PI / L)
    return k, np.exp(-0.5 * ((xi - center) / sigma) ** 2).astype(complex)


def make_beam_field(d, L, band, rng=None, sigma=0.4, trunc=5.0, M=None):
    """Coherent beam: Gaussian frequency envelope centred at N e_1, unit norm.

    The envelope (width sigma, truncated at trunc * sigma) is a tensor
    product.  When it lies inside the plateau of the band weight the band
    cutoff is identically 1 on it and the field keeps its per-axis factors.
    `rng` shifts the centre by a random fraction of one mode spacing per axis.
    """
    band = band if isinstance(band, DyadicBand) else DyadicBand(float(band))
    center = np.zeros(d)
    center[0] = band.N
    if rng is not None:
        center = center + rng.uniform(0.0, TWO_PI / L, size=d)
    factors = [_axis_gaussian(c, sigma, L, trunc) for c in center]
    kmax = max(int(np.max(np.abs(k))) for k, _ in factors)
    M = M if M is not None else int(2 ** np.ceil(np.log2(2 * kmax + 2)))
    # the band weight is radial, so it is 1 on the whole box iff it is 1 at the box corners
    lo = np.array([k[0] for k, _ in factors]) * (TWO_PI / L)
    hi = np.array([k[-1] for k, _ in factors]) * (TWO_PI / L)
    r_min = np.sqrt(np.sum(np.where(lo * hi <= 0, 0.0, np.minimum(lo ** 2, hi ** 2))))
    r_max = np.sqrt(np.sum(np.maximum(lo ** 2, hi ** 2)))
    p_lo, p_hi = band.plateau
    if p_lo <= r_min and r_max <= p_hi:
        field = TorusField(d, L, M, band=band, factors=factors)
    else:
        dense = TorusField(d, L, M, factors=factors)
        w = band.weight(np.sqrt(np.sum(dense.xi ** 2, axis=1)))
        keep = w > 0
        field = TorusField(d, L, M, dense.modes[keep], dense.coeffs[keep] * w[keep], band)
    return field.scaled(1.0 / field.norm())
