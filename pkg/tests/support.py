"""Fixtures built independently of the package code under test."""

import numpy as np

from lidkit.filtering import ElaSeries


def trapezoid_train(specs, fps, base=55.0, low=5.0, gap=1.5, lead=0.5):
    """Piecewise-linear blinks with exact corners.

    Returns:
        (series, list of (t1, t2, t3, t4) corner times).
    """
    corners = []
    t0 = lead
    for d1, d2, d3 in specs:
        corners.append((t0, t0 + d1, t0 + d1 + d2, t0 + d1 + d2 + d3))
        t0 += d1 + d2 + d3 + gap
    t = np.arange(int(round((t0 + lead) * fps))) / fps
    v = np.full(len(t), base)
    for a, b, c, d in corners:
        v = np.where((t > a) & (t < b), base - (base - low) * (t - a) / (b - a), v)
        v = np.where((t >= b) & (t <= c), low, v)
        v = np.where((t > c) & (t < d), low + (base - low) * (t - c) / (d - c), v)
    return ElaSeries(v, fps), corners


def v_train(n, fps, base=50.0, low=5.0, half=0.15, gap=1.0):
    """Symmetric V-shaped dips (no closed phase)."""
    return trapezoid_train([(half, 0.0, half)] * n, fps, base, low, gap)


def brute_force_two_means(values):
    """Partition of sorted magnitudes into low/high groups minimising within-group variance.

    Returns the set of indices in the high group.
    """
    mags = np.abs(np.asarray(values, dtype=float))
    order = np.argsort(mags)
    best, best_split = np.inf, None
    for k in range(1, len(mags)):
        lo, hi = mags[order[:k]], mags[order[k:]]
        cost = ((lo - lo.mean()) ** 2).sum() + ((hi - hi.mean()) ** 2).sum()
        if cost < best:
            best, best_split = cost, k
    return set(order[best_split:].tolist())
