"""Independent reference implementations shared by unit and acceptance tests."""

import math

import numpy as np

from fireray.cloud import NORM_MAX, NORM_MIN


def straight_projection(z, y, H, W, lo=NORM_MIN, hi=NORM_MAX):
    """Parallel projection: height from z, width from y."""
    h = (z - lo) / (hi - lo) * H
    w = (y - lo) / (hi - lo) * W
    return h, w


def mirage_height(z, x, k, H, lo=NORM_MIN, hi=NORM_MAX):
    """Upward parabolic projection of the height coordinate.

    Squares by multiplication: ``x * x`` is correctly rounded while libm
    ``pow(x, 2)`` (what ``x ** 2`` calls on floats) is not always.
    """
    return (z + k * (x * x) - lo) / (hi - lo) * H


def pixel_of(p, plane, kh, kw, H, W):
    """Scalar projection of one point, or None when it leaves the frame."""
    d = float(p[plane.depth_axis])
    u = float(p[plane.height_axis]) + kh * (d * d)
    v = float(p[plane.width_axis]) + kw * (d * d)
    if not (NORM_MIN <= u <= NORM_MAX and NORM_MIN <= v <= NORM_MAX):
        return None
    h = min(math.floor((u - NORM_MIN) / (NORM_MAX - NORM_MIN) * H), H - 1)
    w = min(math.floor((v - NORM_MIN) / (NORM_MAX - NORM_MIN) * W), W - 1)
    return h, w, abs(d)


def render_oracle(positions, colors, subset, plane, kh, kw, H, W):
    """Per-pixel argmin over (depth, index) of all points landing on it."""
    hits = {}
    for i in subset:
        px = pixel_of(positions[i], plane, kh, kw, H, W)
        if px is None:
            continue
        h, w, depth = px
        hits.setdefault((h, w), []).append((depth, i))
    pixels = np.zeros((H, W, 3))
    depth = np.full((H, W), np.inf)
    for (h, w), cands in hits.items():
        dmin, imin = min(cands)
        pixels[h, w] = colors[imin]
        depth[h, w] = dmin
    return pixels, depth


def fps_oracle(points, subset, s):
    """Plain-Python greedy max-min with lowest-index ties."""
    subset = sorted(subset)
    chosen = [subset[0]]

    def d2(i, j):
        dx = points[i][0] - points[j][0]
        dy = points[i][1] - points[j][1]
        dz = points[i][2] - points[j][2]
        return dx * dx + dy * dy + dz * dz

    while len(chosen) < s:
        best, best_d = None, -1.0
        for i in subset:
            if i in chosen:
                continue
            d = min(d2(i, j) for j in chosen)
            if d > best_d:
                best, best_d = i, d
        chosen.append(best)
    return chosen
