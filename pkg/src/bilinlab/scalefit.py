"""Power-law fits and verdicts against predicted exponents."""

from dataclasses import dataclass, field

import numpy as np

from .errors import FitError

#: default acceptance settings
DEFAULT_TOLERANCE = 0.1
BOUNDEDNESS_TOLERANCE = 0.15
DEFAULT_R2_FLOOR = 0.95
DEFAULT_MIN_SPAN = 1.2


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares line through (log s, log y).

    Attributes
    ----------
    exponent : float
        Fitted slope.
    intercept : float
        Fitted log y at s = 1.
    r2 : float
        Coefficient of determination, clipped to [0, 1].
    abscissa, ordinate : tuple of float
        The sample table, sorted by abscissa.
    span_decades : float
        log10(max s / min s).
    """

    exponent: float
    intercept: float
    r2: float
    abscissa: tuple
    ordinate: tuple
    span_decades: float

    def predict(self, s):
        return np.exp(self.intercept) * np.asarray(s, dtype=float) ** self.exponent


@dataclass(frozen=True)
class BoundVerdict:
    claimed: float
    fitted: float
    tolerance: float
    r2: float
    r2_floor: float
    span_decades: float
    min_span: float
    uniform_constant: float
    status: str  # "pass", "fail" or "inconclusive"
    notes: tuple = field(default_factory=tuple)

    @property
    def passed(self):
        return self.status == "pass"


def fit_power_law(abscissa, ordinate):
    """Fit y = C s^p by least squares in log-log coordinates.

    Parameters
    ----------
    abscissa, ordinate : array_like
        Positive samples; at least 3 of them with at least 2 distinct abscissae.

    Returns
    -------
    ScalingFit

    Notes
    -----
    Samples are sorted by (s, y) first, so any permutation of the input gives
    bit-identical output.
    """
    s = np.asarray(abscissa, dtype=float).ravel()
    y = np.asarray(ordinate, dtype=float).ravel()
    if s.size != y.size:
        raise FitError("abscissa and ordinate differ in length")
    if s.size < 3:
        raise FitError(f"need at least 3 samples, got {s.size}")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(y))):
        raise FitError("non-finite sample")
    if np.any(s <= 0) or np.any(y <= 0):
        raise FitError("power-law fit needs positive abscissae and ordinates")
    if np.unique(s).size < 2:
        raise FitError("need at least two distinct abscissae")

    order = np.lexsort((y, s))
    s, y = s[order], y[order]
    ls, ly = np.log(s), np.log(y)
    ls_c = ls - ls.mean()
    ly_c = ly - ly.mean()
    sxx = np.dot(ls_c, ls_c)
    slope = np.dot(ls_c, ly_c) / sxx
    intercept = ly.mean() - slope * ls.mean()
    resid = ly_c - slope * ls_c
    ss_tot = np.dot(ly_c, ly_c)
    ss_res = np.dot(resid, resid)
    if ss_tot <= 1e-30 * max(1.0, np.dot(ly, ly)):
        r2 = 1.0
    else:
        r2 = float(np.clip(1.0 - ss_res / ss_tot, 0.0, 1.0))
    return ScalingFit(
        exponent=float(slope),
        intercept=float(intercept),
        r2=r2,
        abscissa=tuple(float(v) for v in s),
        ordinate=tuple(float(v) for v in y),
        span_decades=float(np.log10(s[-1] / s[0])),
    )


def check_bound(fit, claimed, tolerance=DEFAULT_TOLERANCE, r2_floor=DEFAULT_R2_FLOOR,
                min_span=DEFAULT_MIN_SPAN):
    """Compare a fitted exponent with a claimed one.

    Passes when |fitted - claimed| <= tolerance and R^2 >= r2_floor.  A sweep
    spanning fewer than `min_span` decades is "inconclusive".  The uniform
    constant is max over samples of y / s^claimed, the smallest C with
    y <= C s^claimed on the table.

    For boundedness claims (claimed exponent 0) pass ``r2_floor=0``: a flat
    table has no trend for R^2 to measure.
    """
    s = np.asarray(fit.abscissa)
    y = np.asarray(fit.ordinate)
    uniform = float(np.max(y / s ** claimed))
    notes = []
    if fit.span_decades + 1e-12 < min_span:
        status = "inconclusive"
        notes.append(f"span {fit.span_decades:.2f} < {min_span:.2f} decades")
    else:
        ok_exp = abs(fit.exponent - claimed) <= tolerance
        ok_r2 = fit.r2 >= r2_floor
        if not ok_exp:
            notes.append(f"|{fit.exponent:.3f} - {claimed:.3f}| > {tolerance}")
        if not ok_r2:
            notes.append(f"R^2 {fit.r2:.3f} < {r2_floor}")
        if not np.isfinite(uniform):
            notes.append("uniform constant not finite")
        status = "pass" if (ok_exp and ok_r2 and np.isfinite(uniform)) else "fail"
    return BoundVerdict(
        claimed=float(claimed),
        fitted=fit.exponent,
        tolerance=float(tolerance),
        r2=fit.r2,
        r2_floor=float(r2_floor),
        span_decades=fit.span_decades,
        min_span=float(min_span),
        uniform_constant=uniform,
        status=status,
        notes=tuple(notes),
    )


def _one_sided(fit, claimed, tolerance, ok, note, min_span, uniform):
    notes = []
    if fit.span_decades + 1e-12 < min_span:
        status = "inconclusive"
        notes.append(f"span {fit.span_decades:.2f} < {min_span:.2f} decades")
    else:
        ok = ok and np.isfinite(uniform)
        if not ok:
            notes.append(note)
        status = "pass" if ok else "fail"
    return BoundVerdict(
        claimed=float(claimed),
        fitted=fit.exponent,
        tolerance=float(tolerance),
        r2=fit.r2,
        r2_floor=0.0,
        span_decades=fit.span_decades,
        min_span=float(min_span),
        uniform_constant=uniform,
        status=status,
        notes=tuple(notes),
    )


def check_bounded(fit, tolerance=BOUNDEDNESS_TOLERANCE, min_span=DEFAULT_MIN_SPAN):
    """One-sided verdict: the normalized quantity does not grow.

    Passes when the fitted exponent is at most `tolerance` and every sample is
    finite.  Decay counts as bounded, so R^2 plays no role.
    """
    uniform = float(np.max(fit.ordinate))
    return _one_sided(fit, 0.0, tolerance, fit.exponent <= tolerance,
                      f"exponent {fit.exponent:.3f} > {tolerance}", min_span, uniform)


def check_at_least(fit, floor, min_span=DEFAULT_MIN_SPAN):
    """One-sided verdict: the fitted exponent is at least `floor` (a convergence order)."""
    s = np.asarray(fit.abscissa)
    uniform = float(np.max(np.asarray(fit.ordinate) / s ** floor))
    return _one_sided(fit, floor, 0.0, fit.exponent >= floor,
                      f"exponent {fit.exponent:.3f} < {floor}", min_span, uniform)
