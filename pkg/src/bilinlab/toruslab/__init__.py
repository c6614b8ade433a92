"""Bilinear estimates for dispersive flows on flat tori, and a 1D variable-metric check."""

from .bilinear import (RatioSample, bilinear_constant, bilinear_ratio, derivative_twisted_ratio,
                       linear_strichartz_ratio, measure_ratio, mixed_ratio, product_norm,
                       rescaled_ratio, resonance_oracle, strichartz_ratio_of_field, time_nodes)
from .fields import (DyadicBand, TorusField, band_modes, check_nyquist, make_band_field,
                     make_beam_field)
from .metric1d import ExactSolver, exact_1d_solver, parametrix_error
from .propagate import GENERATORS, FourierMultiplier, dispersion, dyadic_project, propagate

__all__ = [
    "RatioSample", "bilinear_constant", "bilinear_ratio", "derivative_twisted_ratio",
    "linear_strichartz_ratio", "measure_ratio", "mixed_ratio", "product_norm", "rescaled_ratio",
    "resonance_oracle", "strichartz_ratio_of_field", "time_nodes", "DyadicBand", "TorusField",
    "band_modes", "check_nyquist", "make_band_field", "make_beam_field", "ExactSolver",
    "exact_1d_solver", "parametrix_error", "GENERATORS", "FourierMultiplier",
    "dispersion", "dyadic_project", "propagate",
]
