"""Point cloud ingestion, normalization, view partitioning and ball aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

AXES = "XYZ"
NORM_MIN = -0.5
NORM_MAX = 0.5


class CloudParseError(ValueError):
    """Malformed line in an xyz-ascii file."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyCloudError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PointCloud:
    """Immutable point set.

    ``positions`` and ``colors`` are ``(N, 3)`` float64 arrays, colors in
    [0, 1]. ``labels`` is an ``(N,)`` int array using -1 for unlabeled
    points, or None when no point carries a label.
    """

    positions: np.ndarray
    colors: np.ndarray
    labels: Optional[np.ndarray] = None
    class_count: int = 0
    source_bounds: Optional[np.ndarray] = None
    normalized: bool = False

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        col = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        if len(pos) != len(col):
            raise ValueError("positions and colors differ in length")
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(self, "colors", _frozen(col))
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if len(lab) != len(pos):
                raise ValueError("labels and positions differ in length")
            object.__setattr__(self, "labels", _frozen(lab))
            if self.class_count == 0 and len(lab):
                object.__setattr__(self, "class_count", int(max(lab.max() + 1, 0)))
        if self.source_bounds is not None:
            b = np.asarray(self.source_bounds, dtype=np.float64).reshape(3, 2)
            object.__setattr__(self, "source_bounds", _frozen(b))

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def has_labels(self) -> bool:
        return self.labels is not None and bool(np.all(self.labels >= 0))


@dataclass(frozen=True)
class ViewPlane:
    """One oriented projection plane.

    ``depth_sign`` is +1 or -1 and selects the half-space along
    ``depth_axis``; rows of the image follow ``height_axis`` and columns
    follow ``width_axis``. Axes are indices into XYZ.
    """

    id: int
    depth_axis: int
    depth_sign: int
    height_axis: int
    width_axis: int

    def __post_init__(self):
        if len({self.depth_axis, self.height_axis, self.width_axis}) != 3:
            raise ValueError("view plane axes must be distinct")
        if not all(a in (0, 1, 2) for a in (self.depth_axis, self.height_axis, self.width_axis)):
            raise ValueError("axis index must be 0, 1 or 2")
        if self.depth_sign not in (1, -1):
            raise ValueError("depth_sign must be +1 or -1")

    @property
    def name(self) -> str:
        sign = "+" if self.depth_sign > 0 else "-"
        return f"{sign}{AXES[self.depth_axis]},{AXES[self.width_axis]}{AXES[self.height_axis]}"


# (depth axis, sign, height axis, width axis); Z is up wherever it is not depth.
_PLANE_LAYOUT = [
    (0, 1, 2, 1),
    (0, -1, 2, 1),
    (1, 1, 2, 0),
    (1, -1, 2, 0),
    (2, 1, 1, 0),
    (2, -1, 1, 0),
]


def default_planes(m: int = 4) -> List[ViewPlane]:
    """The first ``m`` planes of (+X,YZ), (-X,YZ), (+Y,XZ), (-Y,XZ), (+Z,XY), (-Z,XY)."""
    if not 1 <= m <= len(_PLANE_LAYOUT):
        raise ValueError(f"plane count must be in [1, {len(_PLANE_LAYOUT)}], got {m}")
    return [ViewPlane(i + 1, *layout) for i, layout in enumerate(_PLANE_LAYOUT[:m])]


@dataclass(frozen=True)
class BallSummary:
    center_index: int
    theta: np.ndarray
    member_count: int = 1

    @property
    def theta_xy(self) -> np.ndarray:
        return self.theta[[0, 1]]

    @property
    def theta_xz(self) -> np.ndarray:
        return self.theta[[0, 2]]


def load_cloud(path: Union[str, Path]) -> PointCloud:
    """Read an xyz-ascii file: ``x y z r g b [label]`` per line, '#' comments.

    Colors are 0-255 integers and are rescaled to [0, 1]. The returned cloud
    is not normalized.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_cloud(text)


def parse_cloud(text: str) -> PointCloud:
    positions = []
    colors = []
    labels = []
    any_label = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) not in (6, 7):
            raise CloudParseError(line_no, f"expected 6 or 7 fields, got {len(fields)}")
        try:
            xyz = [float(v) for v in fields[:3]]
            rgb = [int(v) for v in fields[3:6]]
            label = int(fields[6]) if len(fields) == 7 else -1
        except ValueError as exc:
            raise CloudParseError(line_no, str(exc)) from None
        if not all(np.isfinite(xyz)):
            raise CloudParseError(line_no, "non-finite coordinate")
        if not all(0 <= c <= 255 for c in rgb):
            raise CloudParseError(line_no, "color outside 0-255")
        if len(fields) == 7:
            if label < 0:
                raise CloudParseError(line_no, "negative label")
            any_label = True
        positions.append(xyz)
        colors.append(rgb)
        labels.append(label)
    if not positions:
        raise EmptyCloudError("input contains no points")
    return PointCloud(
        positions=np.array(positions, dtype=np.float64),
        colors=np.array(colors, dtype=np.float64) / 255.0,
        labels=np.array(labels, dtype=np.int64) if any_label else None,
    )


def format_cloud(cloud: PointCloud) -> str:
    """Inverse of :func:`parse_cloud` up to 8-bit color quantization."""
    rgb = np.clip(np.floor(cloud.colors * 255.0 + 0.5), 0, 255).astype(int)
    lines = []
    for i in range(len(cloud)):
        x, y, z = (repr(float(v)) for v in cloud.positions[i])
        r, g, b = rgb[i]
        row = f"{x} {y} {z} {r} {g} {b}"
        if cloud.labels is not None and cloud.labels[i] >= 0:
            row += f" {int(cloud.labels[i])}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def save_cloud(cloud: PointCloud, path: Union[str, Path]) -> None:
    Path(path).write_text(format_cloud(cloud), encoding="utf-8")


def normalize_cloud(cloud: PointCloud) -> PointCloud:
    """Map each axis independently onto [-0.5, 0.5].

    A degenerate axis (max == min) collapses to 0. Axes already spanning
    exactly [-0.5, 0.5] are passed through untouched, which makes the
    operation idempotent bit-for-bit.
    """
    if len(cloud) == 0:
        raise EmptyCloudError("cannot normalize an empty cloud")
    if cloud.normalized:
        return cloud
    pos = cloud.positions
    lo = pos.min(axis=0)
    hi = pos.max(axis=0)
    out = np.empty_like(pos)
    for a in range(3):
        if hi[a] == lo[a]:
            out[:, a] = 0.0
        elif lo[a] == NORM_MIN and hi[a] == NORM_MAX:
            out[:, a] = pos[:, a]
        else:
            out[:, a] = (pos[:, a] - lo[a]) / (hi[a] - lo[a]) - 0.5
    bounds = cloud.source_bounds if cloud.source_bounds is not None else np.stack([lo, hi], axis=1)
    return PointCloud(
        positions=out,
        colors=cloud.colors,
        labels=cloud.labels,
        class_count=cloud.class_count,
        source_bounds=bounds,
        normalized=True,
    )


def partition_view(cloud: PointCloud, plane: ViewPlane) -> np.ndarray:
    """Indices of points strictly on the plane's side of the depth axis."""
    d = cloud.positions[:, plane.depth_axis]
    mask = d > 0 if plane.depth_sign > 0 else d < 0
    return np.flatnonzero(mask)


def _sq_dist(points: np.ndarray, p: np.ndarray) -> np.ndarray:
    # fixed summation order so results are reproducible against scalar oracles
    diff = points - p
    return diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1] + diff[:, 2] * diff[:, 2]


def farthest_point_sample(cloud: PointCloud, subset: Sequence[int], s: int) -> np.ndarray:
    """Greedy max-min farthest point sampling over ``subset``.

    Starts at the lowest subset index; each following center maximizes its
    distance to the nearest chosen center, ties going to the lowest index.
    """
    idx = np.unique(np.asarray(subset, dtype=np.int64))
    if s < 1 or s > len(idx):
        raise ValueError(f"sample count {s} must be in [1, {len(idx)}]")
    pts = cloud.positions[idx]
    chosen = np.empty(s, dtype=np.int64)
    taken = np.zeros(len(idx), dtype=bool)
    mind = np.full(len(idx), np.inf)
    cur = 0
    for k in range(s):
        chosen[k] = cur
        taken[cur] = True
        mind = np.minimum(mind, _sq_dist(pts, pts[cur]))
        if k + 1 < s:
            cand = np.where(taken, -1.0, mind)
            cur = int(np.argmax(cand))
    return idx[chosen]


def ball_aggregate(
    cloud: PointCloud, subset: Sequence[int], centers: Sequence[int], r: float
) -> List[BallSummary]:
    """Mean position of every subset point within distance ``r`` of each center."""
    if r <= 0:
        raise ValueError("radius must be positive")
    idx = np.asarray(subset, dtype=np.int64)
    pts = cloud.positions[idx]
    balls = []
    for c in centers:
        c = int(c)
        center = cloud.positions[c]
        inside = np.sqrt(_sq_dist(pts, center)) <= r
        members = pts[inside]
        if not np.any(idx[inside] == c):
            members = np.vstack([members, center])
        balls.append(BallSummary(c, members.mean(axis=0), len(members)))
    return balls


def stack_thetas(balls: Sequence[BallSummary]) -> Tuple[np.ndarray, np.ndarray]:
    """``(S, 2)`` arrays of the XY and XZ ball slices."""
    theta = np.array([b.theta for b in balls], dtype=np.float64).reshape(-1, 3)
    return theta[:, [0, 1]], theta[:, [0, 2]]
