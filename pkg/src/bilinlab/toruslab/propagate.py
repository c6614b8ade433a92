"""Fourier multipliers: Schroedinger and half-wave flows, derivatives, band projection."""

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from .fields import DyadicBand

GENERATORS = ("schrodinger", "wave+", "wave-")


def dispersion(generator, xi):
    """Temporal frequency omega(xi) so that the flow multiplies c_k by exp(-i t omega).

    e^{it Delta} has symbol exp(-i t |xi|^2); e^{+-it|grad|} has exp(+-i t |xi|).
    """
    r2 = np.sum(np.asarray(xi, dtype=float) ** 2, axis=-1)
    if generator == "schrodinger":
        return r2
    if generator == "wave+":
        return -np.sqrt(r2)
    if generator == "wave-":
        return np.sqrt(r2)
    raise DomainError(f"unknown generator {generator!r}")


@dataclass(frozen=True)
class FourierMultiplier:
    """Diagonal operator on Fourier coefficients.

    kind="schrodinger": exp(-i t |xi|^2); kind="wave": exp(i sign t |xi|);
    kind="derivative": |xi|^order.
    """

    kind: str
    t: float = 0.0
    sign: int = 1
    order: float = 0.0

    def symbol(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.kind == "schrodinger":
            return np.exp(-1j * self.t * dispersion("schrodinger", xi))
        if self.kind == "wave":
            gen = "wave+" if self.sign >= 0 else "wave-"
            return np.exp(-1j * self.t * dispersion(gen, xi))
        if self.kind == "derivative":
            r = np.sqrt(np.sum(xi * xi, axis=-1))
            return r ** self.order if self.order != 0 else np.ones_like(r)
        raise DomainError(f"unknown multiplier kind {self.kind!r}")

    @property
    def unitary(self):
        return self.kind in ("schrodinger", "wave")


def propagate(field, mult):
    """Apply a Fourier multiplier coefficient-wise."""
    return field.with_coeffs(field.coeffs * mult.symbol(field.xi))


def dyadic_project(field, band):
    """Multiply by the band weight; modes outside (N/2, 2N) become exactly 0."""
    band = band if isinstance(band, DyadicBand) else DyadicBand(float(band))
    r = np.sqrt(np.sum(field.xi ** 2, axis=-1))
    return field.with_coeffs(field.coeffs * band.weight(r))
