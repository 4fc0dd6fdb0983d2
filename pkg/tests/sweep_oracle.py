"""Independent brute-force oracle for the two-point discrimination rule.

Exhaustively sweeps platform-grid separations and applies its own
plain-loop maxima/valley analysis (no scipy, no shared code with the
production twin-peak path) to find the smallest separation that reads as
divided.
"""

import numpy as np


def local_maxima(y):
    """(index, value) of strict local maxima; plateaus collapse to their middle."""
    maxima = []
    n = len(y)
    i = 1
    while i < n - 1:
        if y[i] > y[i - 1]:
            j = i
            while j < n - 1 and y[j + 1] == y[j]:
                j += 1
            if j < n - 1 and y[j + 1] < y[j]:
                maxima.append(((i + j) // 2, y[i]))
            i = j + 1
        else:
            i += 1
    return maxima


def divided_at(profile_values, shift_cells, fraction, floor, force, background):
    values = np.asarray(profile_values, dtype=float)
    shifted = np.zeros_like(values)
    if shift_cells < values.size:
        shifted[shift_cells:] = values[: values.size - shift_cells]
    y = force * (values + shifted) + background
    floor_level = floor * y.max()
    candidates = [(i, v) for i, v in local_maxima(y.tolist()) if v >= floor_level]
    if len(candidates) < 2:
        return False
    candidates.sort(key=lambda t: (-t[1], t[0]))
    (i1, p1), (i2, p2) = candidates[0], candidates[1]
    lo, hi = min(i1, i2), max(i1, i2)
    valley = min(y[lo : hi + 1])
    return valley < fraction * min(p1, p2)


def sweep_first_divided(profile, fraction, floor, force, background, platform_step, max_separation):
    """Smallest platform-grid separation judged divided, or None."""
    cells_per_step = round(platform_step / profile.step)
    assert abs(cells_per_step * profile.step - platform_step) < 1e-12
    k = 0
    while k * platform_step <= max_separation + 1e-12:
        if divided_at(profile.values, k * cells_per_step, fraction, floor, force, background):
            return k * platform_step
        k += 1
    return None
