"""Depth-buffered point rendering and binary PPM output."""

from __future__ import annotations

import colorsys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .cloud import PointCloud, ViewPlane
from .projection import RayParams, project_points

DEFAULT_SIZE = 224

REAL = "real"
SEMANTIC = "semantic"

# 0-255 palette, index = class label. Pure black is reserved for empty pixels.
_BASE_PALETTE = [
    (0, 255, 0), (0, 0, 255), (136, 206, 250), (255, 255, 0),
    (255, 0, 255), (219, 112, 147), (0, 128, 128), (255, 20, 147),
    (218, 165, 32), (152, 251, 152), (139, 69, 19), (255, 0, 0),
    (128, 128, 128), (255, 140, 0), (75, 0, 130), (0, 206, 209),
    (199, 21, 133), (189, 183, 107), (70, 130, 180), (244, 164, 96),
]


class MissingLabelError(ValueError):
    pass


def default_palette(n: int) -> np.ndarray:
    """``(n, 3)`` label colors in [0, 1]; extra classes get evenly spaced hues."""
    cols = [tuple(c) for c in _BASE_PALETTE[:n]]
    for i in range(len(cols), n):
        hue = (i * 0.618033988749895) % 1.0
        r, g, b = colorsys.hsv_to_rgb(hue, 0.85, 0.95)
        cols.append(tuple(int(round(c * 255)) for c in (r, g, b)))
    return np.array(cols, dtype=np.float64).reshape(-1, 3) / 255.0


def check_palette(palette: np.ndarray) -> np.ndarray:
    palette = np.asarray(palette, dtype=np.float64).reshape(-1, 3)
    if np.any(np.all(palette == 0, axis=1)):
        raise ValueError("palette must not contain pure black")
    if np.any((palette < 0) | (palette > 1)):
        raise ValueError("palette channels must lie in [0, 1]")
    return palette


@dataclass
class RasterImage:
    pixels: np.ndarray  # (H, W, 3) in [0, 1]
    depth: np.ndarray  # (H, W), +inf where nothing was drawn
    mode: str = REAL

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @classmethod
    def blank(cls, H: int, W: int, mode: str = REAL) -> "RasterImage":
        return cls(np.zeros((H, W, 3)), np.full((H, W), np.inf), mode)


def _point_colors(cloud: PointCloud, subset: np.ndarray, mode: str, palette) -> np.ndarray:
    if mode == REAL:
        return cloud.colors[subset]
    if mode != SEMANTIC:
        raise ValueError(f"unknown render mode {mode!r}")
    if cloud.labels is None or np.any(cloud.labels[subset] < 0):
        raise MissingLabelError("semantic render needs a label on every point")
    labels = cloud.labels[subset]
    n = int(labels.max()) + 1 if len(labels) else 0
    if palette is None:
        palette = default_palette(max(n, cloud.class_count))
    palette = check_palette(palette)
    if n > len(palette):
        raise ValueError(f"palette has {len(palette)} colors but label {n - 1} is present")
    return palette[labels]


def _visible(flat: np.ndarray, depth: np.ndarray, order_key: np.ndarray) -> np.ndarray:
    """Position of the winning point in each occupied pixel (nearest, then lowest index)."""
    order = np.lexsort((order_key, depth, flat))
    flat_sorted = flat[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = flat_sorted[1:] != flat_sorted[:-1]
    return order[first]


def render_view(
    cloud: PointCloud,
    subset: Sequence[int],
    plane: ViewPlane,
    ray: RayParams,
    H: int = DEFAULT_SIZE,
    W: int = DEFAULT_SIZE,
    mode: str = REAL,
    palette: Optional[np.ndarray] = None,
) -> RasterImage:
    """Draw one pixel per in-frame point, nearest depth wins.

    Equal depths resolve to the lower point index, so the result does not
    depend on the order of ``subset``. Points bent out of the frame are
    dropped.
    """
    subset = np.asarray(subset, dtype=np.int64)
    colors = _point_colors(cloud, subset, mode, palette)
    img = RasterImage.blank(H, W, mode)
    if len(subset) == 0:
        return img
    pr = project_points(cloud.positions[subset], plane, ray, H, W)
    keep = np.flatnonzero(pr.in_frame)
    if len(keep) == 0:
        return img
    flat = pr.h[keep] * W + pr.w[keep]
    win = keep[_visible(flat, pr.depth[keep], subset[keep])]
    hs, ws = pr.h[win], pr.w[win]
    img.pixels[hs, ws] = colors[win]
    img.depth[hs, ws] = pr.depth[win]
    return img


def coverage_count(cloud: PointCloud, subset: Sequence[int], plane: ViewPlane, ray: RayParams,
                   H: int = DEFAULT_SIZE, W: int = DEFAULT_SIZE) -> int:
    """Number of distinct pixels receiving at least one in-frame point.

    Equals the non-black pixel count of the semantic render (palettes are
    black-free) without paying for the depth sort.
    """
    subset = np.asarray(subset, dtype=np.int64)
    if len(subset) == 0:
        return 0
    pr = project_points(cloud.positions[subset], plane, ray, H, W)
    hit = np.zeros(H * W, dtype=bool)
    hit[pr.h[pr.in_frame] * W + pr.w[pr.in_frame]] = True
    return int(hit.sum())


def black_mask(img: RasterImage) -> np.ndarray:
    return np.all(img.pixels == 0, axis=2)


def quantize(pixels: np.ndarray) -> np.ndarray:
    """[0, 1] floats to uint8 with round-half-up."""
    return np.clip(np.floor(np.asarray(pixels) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def encode_ppm(img: RasterImage) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + quantize(img.pixels).tobytes(order="C")


def decode_ppm(data: bytes) -> np.ndarray:
    """Parse a P6 file written by :func:`encode_ppm` into ``(H, W, 3)`` uint8."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1
    if tokens[0] != b"P6" or int(tokens[3]) != 255:
        raise ValueError("only 8-bit P6 is supported")
    w, h = int(tokens[1]), int(tokens[2])
    body = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    return body.reshape(h, w, 3)


def write_ppm(img: RasterImage, path: Union[str, Path]) -> None:
    Path(path).write_bytes(encode_ppm(img))
