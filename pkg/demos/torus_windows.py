"""Bilinear Strichartz ratios on the 2-torus.

On the short window T = 1/N1 the ratio grows like N2^(1/2) in the low
frequency and decays like N1^(-1/2) in the high one; at T = 1 the N1
dependence flattens out.  Takes about a minute.
"""
from bilinlab.scalefit import fit_power_law
from bilinlab.toruslab import bilinear_constant, bilinear_ratio


def sweep(label, cells, axis):
    values = []
    for N1, N2, T in cells:
        s = bilinear_ratio(N1, N2, T, d=2, trials=4, kind="packet" if T < 1 else "random")
        values.append(s.value)
        print(f"  N1 {N1:3d}  N2 {N2:3d}  T {T:.4f}  ratio {s.value:.5f}  "
              f"ratio/constant {s.value / bilinear_constant(T, N1, N2, 2):.4f}")
    xs = [c[axis] for c in cells]
    print(f"{label}: fitted exponent {fit_power_law(xs, values).exponent:+.3f}\n")


sweep("short window, N2 sweep (expect +1/2)", [(64, n2, 1 / 64) for n2 in (2, 4, 8, 16)], 1)
sweep("short window, N1 sweep (expect -1/2)", [(n1, 4, 1 / n1) for n1 in (8, 16, 32, 64)], 0)
sweep("unit time, N1 sweep (expect 0)", [(n1, 4, 1.0) for n1 in (8, 16, 32)], 0)
