"""Bilinear decay of two transverse oscillatory integral operators.

Sweeps the large frequency parameter with the small one fixed and fits the
power law of the normalized norm ||T_lam f * T_mu g|| / (||f|| ||g||).
Takes about twenty seconds.
"""
import numpy as np

from bilinlab.oscint import Amplitude, decay_sweep
from bilinlab.phasekit import paraboloid
from bilinlab.scalefit import check_bound, fit_power_law

amp_a = Amplitude.box(1, t=(0.0, 0.5), x=(0.0, 2.0), xi=(1.5, 0.5))
amp_b = Amplitude.box(1, t=(0.0, 0.5), x=(0.0, 2.0), xi=(-1.0, 1.0))

sweep = decay_sweep(paraboloid(1), paraboloid(1), amp_a, amp_b,
                    lams=[32, 64, 128, 256], mu_rule=8, trials=4, seed=1)
print(f"transversality margin {sweep.margin:.3f}")
for s in sweep.samples:
    print(f"lam {s.lam:6.0f}  mu {s.mu:4.0f}  ratio {s.ratio:.5f}  spread {s.spread:.1e}  grid {s.grid_shape}")

fit = fit_power_law(sweep.column("lam"), sweep.column("ratio"))
verdict = check_bound(fit, -0.5, min_span=0.9)
print(f"fitted exponent {fit.exponent:+.4f} (r2 {fit.r2:.4f}); expected -1/2: {verdict.status}")
print("lam^(1/2) * ratio:", np.round(np.sqrt(sweep.column("lam")) * sweep.column("ratio"), 4))
