"""Curved-ray projection of normalized points onto a view plane.

A point with depth ``d``, height coordinate ``u`` and width coordinate ``v``
lands at

    h = (u + kappa_h * d**2 - lo) / (hi - lo) * H
    w = (v + kappa_w * d**2 - lo) / (hi - lo) * W

with ``lo, hi = -0.5, 0.5``. ``kappa = (0, 0)`` is the parallel straight
projection; ``kappa_w = 0, kappa_h >= 0`` is the upward-only parabolic
("mirage") projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import FrozenSet, NamedTuple, Tuple

import numpy as np

from .cloud import NORM_MAX, NORM_MIN, ViewPlane

DEFAULT_KAPPA_MIN = -5.0
DEFAULT_KAPPA_MAX = 5.0


@dataclass(frozen=True)
class RayParams:
    kappa_h: float = 0.0
    kappa_w: float = 0.0
    kappa_min: float = DEFAULT_KAPPA_MIN
    kappa_max: float = DEFAULT_KAPPA_MAX

    def __post_init__(self):
        if not self.kappa_min < self.kappa_max:
            raise ValueError(f"kappa bounds must satisfy min < max, got [{self.kappa_min}, {self.kappa_max}]")
        for name in ("kappa_h", "kappa_w"):
            k = getattr(self, name)
            if not np.isfinite(k) or not self.kappa_min <= k <= self.kappa_max:
                raise ValueError(f"{name}={k} outside [{self.kappa_min}, {self.kappa_max}]")

    def with_kappa(self, kappa_h: float, kappa_w: float) -> "RayParams":
        return RayParams(float(kappa_h), float(kappa_w), self.kappa_min, self.kappa_max)

    @property
    def pair(self) -> Tuple[float, float]:
        return (self.kappa_h, self.kappa_w)


class PixelCoord(NamedTuple):
    h: int
    w: int
    depth: float
    in_frame: bool
    h_cont: float
    w_cont: float


class Projection(NamedTuple):
    """Vectorized projection result, one entry per input point."""

    h: np.ndarray
    w: np.ndarray
    depth: np.ndarray
    in_frame: np.ndarray
    h_cont: np.ndarray
    w_cont: np.ndarray


def _shifted(positions: np.ndarray, plane: ViewPlane, ray: RayParams):
    d = positions[:, plane.depth_axis]
    u = positions[:, plane.height_axis]
    v = positions[:, plane.width_axis]
    dd = d * d
    return d, u + ray.kappa_h * dd, v + ray.kappa_w * dd


def _to_pixels(t: np.ndarray, size: int) -> np.ndarray:
    return (t - NORM_MIN) / (NORM_MAX - NORM_MIN) * size


def project_points(positions: np.ndarray, plane: ViewPlane, ray: RayParams, H: int, W: int) -> Projection:
    if H < 1 or W < 1:
        raise ValueError("image size must be at least 1x1")
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    d, hu, wv = _shifted(positions, plane, ray)
    h_cont = _to_pixels(hu, H)
    w_cont = _to_pixels(wv, W)
    # in-frame is decided on the shifted coordinate so it agrees exactly with
    # boundary_check; rounding in the pixel scaling is monotone so the
    # continuous values then lie in [0, size].
    in_frame = (hu >= NORM_MIN) & (hu <= NORM_MAX) & (wv >= NORM_MIN) & (wv <= NORM_MAX)
    with np.errstate(invalid="ignore"):
        h = np.minimum(np.floor(h_cont), H - 1)
        w = np.minimum(np.floor(w_cont), W - 1)
    h = np.where(in_frame, h, -1).astype(np.int64)
    w = np.where(in_frame, w, -1).astype(np.int64)
    return Projection(h, w, np.abs(d), in_frame, h_cont, w_cont)


def _scalar_shift(p, plane: ViewPlane, ray: RayParams):
    d = float(p[plane.depth_axis])
    dd = d * d
    return d, float(p[plane.height_axis]) + ray.kappa_h * dd, float(p[plane.width_axis]) + ray.kappa_w * dd


def project_point(p, plane: ViewPlane, ray: RayParams, H: int, W: int) -> PixelCoord:
    """Project a single 3-vector; out-of-frame points get ``h = w = -1``.

    Scalar twin of :func:`project_points`, same operations in the same
    order, so both agree bit for bit.
    """
    if H < 1 or W < 1:
        raise ValueError("image size must be at least 1x1")
    d, hu, wv = _scalar_shift(p, plane, ray)
    h_cont = (hu - NORM_MIN) / (NORM_MAX - NORM_MIN) * H
    w_cont = (wv - NORM_MIN) / (NORM_MAX - NORM_MIN) * W
    in_frame = NORM_MIN <= hu <= NORM_MAX and NORM_MIN <= wv <= NORM_MAX
    if in_frame:
        h, w = min(math.floor(h_cont), H - 1), min(math.floor(w_cont), W - 1)
    else:
        h = w = -1
    return PixelCoord(h, w, abs(d), in_frame, h_cont, w_cont)


def boundary_check(p, plane: ViewPlane, ray: RayParams) -> bool:
    """Whether both shifted coordinates stay inside the closed normalized range."""
    _, hu, wv = _scalar_shift(p, plane, ray)
    return NORM_MIN <= hu <= NORM_MAX and NORM_MIN <= wv <= NORM_MAX


class RayDirection(NamedTuple):
    flags: FrozenSet[str]
    name: str


def classify_ray(ray) -> RayDirection:
    """Direction flags and display name of a ray.

    H+ is upward, H- downward, W+ leftward, W- rightward. Accepts a
    :class:`RayParams` or a ``(kappa_h, kappa_w)`` pair.
    """
    kh, kw = ray.pair if isinstance(ray, RayParams) else ray
    flags = set()
    words = []
    if kh > 0:
        flags.add("H+")
        words.append("Upward")
    elif kh < 0:
        flags.add("H-")
        words.append("Downward")
    if kw > 0:
        flags.add("W+")
        words.append("Leftward")
    elif kw < 0:
        flags.add("W-")
        words.append("Rightward")
    if not flags:
        return RayDirection(frozenset({"straight"}), "Straight-Line Ray")
    return RayDirection(frozenset(flags), "-".join(words) + "-Curve Ray")
