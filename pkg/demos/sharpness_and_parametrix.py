"""Two quick checks: the rectangle witness and the 1D parametrix.

The witness ratio times N1^(1/2) stays flat, so the N1^(-1/2) rate cannot be
improved.  The leading-order parametrix on a perturbed circle converges at
least linearly in the semiclassical parameter h = 1/N.  About forty seconds.
"""
from bilinlab.oscint import sharpness_report
from bilinlab.phasekit import Metric
from bilinlab.scalefit import fit_power_law
from bilinlab.toruslab import parametrix_error

for N1 in (16, 32, 64, 128):
    r = sharpness_report(N1, d=1)
    print(f"N1 {N1:4d}  scaled ratio {r.value:.5f}  continuum {r.closed_form:.5f}")

metric = Metric.cosine(1, 0.1)
hs, errs = [], []
for N in (16, 32, 64, 128):
    e = parametrix_error(metric, N)
    hs.append(1 / N)
    errs.append(e)
    print(f"h 1/{N:<4d} relative error {e:.3e}")
print(f"error ~ h^{fit_power_law(hs, errs).exponent:.3f}")
print(f"flat metric error at N=64: {parametrix_error(Metric.flat(1), 64, P=256):.1e}")
