"""Smooth cutoff functions built from exp(-1/s).

All cutoffs here are C-infinity with exact plateaus, which is what makes
trapezoidal quadrature of the compactly supported integrands spectrally
accurate.
"""

import numpy as np


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1.

    Built as e(s) / (e(s) + e(1 - s)) with e(s) = exp(-1/s) for s > 0.
    """
    s = np.asarray(s, dtype=float)
    pos = s > 0
    neg = s < 1
    a = np.where(pos, np.exp(-1.0 / np.where(pos, s, 1.0)), 0.0)
    b = np.where(neg, np.exp(-1.0 / np.where(neg, 1.0 - s, 1.0)), 0.0)
    out = np.where(s >= 1, 1.0, 0.0)
    mid = pos & neg
    return np.where(mid, a / np.where(mid, a + b, 1.0), out)


def plateau(u):
    """Bump equal to 1 for |u| <= 1/2 and 0 for |u| >= 1."""
    au = np.abs(np.asarray(u, dtype=float))
    return smooth_step(2.0 * (1.0 - au))


def box_plateau(y, center, radius):
    """Tensor product of `plateau` over the last axis of `y`.

    `y` has shape (..., d); `center` and `radius` broadcast against it.
    """
    u = (np.asarray(y, dtype=float) - center) / radius
    return np.prod(plateau(u), axis=-1)


def dyadic_bump(r):
    """Littlewood-Paley profile: supported in (1/2, 2), equal to 1 on [3/4, 3/2]."""
    r = np.asarray(r, dtype=float)
    up = smooth_step((r - 0.5) / 0.25)
    down = 1.0 - smooth_step((r - 1.5) / 0.5)
    return up * down


def trapezoid_weights(nodes):
    """Trapezoid weights for a uniform 1D node set."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size == 1:
        return np.ones(1)
    w = np.full(nodes.size, nodes[1] - nodes[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def uniform_nodes(center, radius, step):
    """Uniform nodes covering [center - radius, center + radius] with spacing <= step."""
    n = int(np.ceil(2.0 * radius / step)) + 1
    return np.linspace(center - radius, center + radius, n)
