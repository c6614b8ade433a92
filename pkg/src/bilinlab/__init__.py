"""Numerical laboratory for bilinear oscillatory integrals and bilinear Strichartz estimates.

Subpackages and modules
-----------------------
phasekit   phase functions, metrics, eikonal solver, transversality
oscint     oscillatory integral operators, decay sweeps, TT* kernel, sharpness witness
toruslab   spectral propagators on flat tori, bilinear ratios, 1D parametrix check
scalefit   power-law fits and verdicts
harness    configs, runner, reports, command line
"""

from . import errors, oscint, phasekit, scalefit, toruslab

__version__ = "0.1.0"

__all__ = ["errors", "oscint", "phasekit", "scalefit", "toruslab", "__version__"]
