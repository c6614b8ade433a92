"""Exact Schroedinger evolution on a circle with a variable metric, and the
leading-order WKB parametrix error.

The Laplace-Beltrami operator in one dimension is
Delta_g u = (1/sqrt g) d/dx (sqrt g g^{11} du/dx).  With W = sqrt g and
S = sqrt g g^{11}, the discrete operator W^{-1} D S D (D the spectral
derivative, antisymmetric) is self-adjoint for the W-weighted inner product;
the similar matrix W^{-1/2} D S D W^{-1/2} is symmetric and is diagonalized
once, after which any time is a cheap matrix product.
"""

from functools import lru_cache

import numpy as np

from ..errors import DiscretizationError, DomainError, ScaleError
from ..phasekit import EikonalPhase
from ..seeding import trial_rng
from ..smooth import dyadic_bump

TWO_PI = 2.0 * np.pi
MAX_POINTS = 2048


def spectral_derivative_matrix(P, period=TWO_PI):
    """Dense Fourier differentiation matrix (Nyquist mode dropped), antisymmetric."""
    k = np.fft.fftfreq(P, d=1.0 / P) * (TWO_PI / period)
    if P % 2 == 0:
        k[P // 2] = 0.0
    D = np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(np.eye(P), axis=0), axis=0))
    return 0.5 * (D - D.T)


class ExactSolver:
    """Diagonalized generator of i u_t = -Delta_g u on P uniform points."""

    def __init__(self, metric, P, tol=1e-10):
        if metric.d != 1:
            raise DomainError("exact solver is one-dimensional")
        if P > MAX_POINTS:
            raise ScaleError(f"P = {P} exceeds the dense-solver cap {MAX_POINTS}")
        self.metric = metric
        self.P = int(P)
        self.x = metric.period * np.arange(P) / P
        ginv = metric.g_inv(self.x[:, None])[:, 0, 0]
        self.weight = ginv ** -0.5
        D = spectral_derivative_matrix(P, metric.period)
        S = np.sqrt(ginv)
        r = self.weight ** -0.5
        A = r[:, None] * (D @ (S[:, None] * D)) * r[None, :]
        asym = np.max(np.abs(A - A.T))
        if asym > tol * max(1.0, np.max(np.abs(A))):
            raise DiscretizationError(f"generator not symmetric: residual {asym:.2e}")
        self.eigval, self.eigvec = np.linalg.eigh(0.5 * (A + A.T))

    def evolve(self, u0, t):
        z = np.sqrt(self.weight) * np.asarray(u0, dtype=complex)
        z = self.eigvec @ (np.exp(1j * t * self.eigval) * (self.eigvec.T @ z))
        return z / np.sqrt(self.weight)

    def mass(self, u):
        """Discrete integral of |u|^2 sqrt(g) dx."""
        return float(np.sum(self.weight * np.abs(u) ** 2) * (self.metric.period / self.P))


@lru_cache(maxsize=8)
def _solver(metric, P):
    return ExactSolver(metric, P)


def exact_1d_solver(metric, u0, t, P=None):
    """Evolve samples u0 (on P uniform points of the circle) to time t."""
    u0 = np.asarray(u0, dtype=complex)
    P = u0.size if P is None else P
    if u0.size != P:
        raise DomainError("u0 must have P samples")
    return _solver(metric, P).evolve(u0, t)


def band_data(N, rng):
    """Band-limited data: complex Gaussian coefficients at integer modes k, weighted by the band."""
    kmax = int(np.floor(2 * N))
    k = np.arange(-kmax, kmax + 1)
    w = dyadic_bump(np.abs(k) / N)
    keep = w > 0
    k, w = k[keep], w[keep]
    c = (rng.standard_normal(k.size) + 1j * rng.standard_normal(k.size)) * w
    return k, c


def parametrix_error(metric, N, s=0.2, P=1024, seed=0, eikonal=None, experiment_id="parametrix",
                     steps_per_unit=64.0):
    """Relative L^2 error between the leading-order parametrix and the exact solution.

    With h = 1/N, data w0 = (1/2pi) sum_k c_k e^{ikx} and xi = hk,
    the parametrix is (1/2pi) sum_k c_k exp(i phi~(s, x, xi)/h) a0(s, x, xi),
    compared with the exact solution at time t = h s, in the sqrt(g)-weighted
    norm.  RK4 with `steps_per_unit` steps per unit of s |xi| keeps the ray
    error far below the O(h) parametrix error.
    """
    if metric.d != 1:
        raise DomainError("parametrix check is one-dimensional")
    h = 1.0 / N
    eik = eikonal or EikonalPhase(metric=metric, alpha=max(abs(s), 1e-12),
                                  xi_lo=np.array([-2.0]), xi_hi=np.array([2.0]),
                                  steps_per_unit=steps_per_unit)
    rng = trial_rng(seed, experiment_id, 0)
    k, c = band_data(N, rng)
    solver = _solver(metric, P)
    x = solver.x
    w0 = np.exp(1j * np.outer(x, k)) @ c / TWO_PI
    exact = solver.evolve(w0, h * s)
    X, K = np.meshgrid(x, k, indexing="ij")
    rays = eik.evaluate(np.full(X.shape, float(s)), X[..., None], (h * K)[..., None])
    approx = (np.exp(1j * rays.phi / h) * rays.a0) @ c / TWO_PI
    err = np.sqrt(solver.mass(approx - exact) / solver.mass(w0))
    return float(err)
