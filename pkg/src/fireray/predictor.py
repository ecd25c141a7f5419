"""Forward pass that turns a plane's point distribution into ray curvature.

Pipeline per plane: side partition, farthest point sampling, ball mean
pooling, 2-D self/cross attention over the sequence of balls, a 2-9-1
sigmoid MLP per image axis, average pooling over balls and an affine map of
the sigmoid output onto the curvature bounds. Weights are loaded, never
trained here.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np

from .cloud import BallSummary, PointCloud, ViewPlane, ball_aggregate, farthest_point_sample, partition_view, stack_thetas
from .fireworks import MutationConfig, RandomStream, mutate_ray
from .projection import DEFAULT_KAPPA_MAX, DEFAULT_KAPPA_MIN, RayParams

TOKEN_DIM = 2
HIDDEN = 9

# name -> shape; every branch ("h", "w") carries the same set
_BRANCH_SHAPES = {
    "self.query": (TOKEN_DIM, TOKEN_DIM),
    "self.key": (TOKEN_DIM, TOKEN_DIM),
    "self.value": (TOKEN_DIM, TOKEN_DIM),
    "cross.query": (TOKEN_DIM, TOKEN_DIM),
    "cross.key": (TOKEN_DIM, TOKEN_DIM),
    "cross.value": (TOKEN_DIM, TOKEN_DIM),
    "mlp.w1": (HIDDEN, TOKEN_DIM),
    "mlp.b1": (HIDDEN,),
    "mlp.w2": (1, HIDDEN),
    "mlp.b2": (1,),
}
WEIGHT_SHAPES = {f"{br}.{k}": s for br in ("h", "w") for k, s in _BRANCH_SHAPES.items()}


class WeightError(ValueError):
    """A weight array is missing, malformed or has the wrong shape."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class PredictorWeights:
    arrays: Dict[str, np.ndarray]

    def __post_init__(self):
        for name, shape in WEIGHT_SHAPES.items():
            if name not in self.arrays:
                raise WeightError(name, "missing")
            a = np.asarray(self.arrays[name], dtype=np.float64)
            if a.shape != shape:
                raise WeightError(name, f"expected shape {list(shape)}, got {list(a.shape)}")
            if not np.all(np.isfinite(a)):
                raise WeightError(name, "non-finite entry")
            self.arrays[name] = a
        extra = set(self.arrays) - set(WEIGHT_SHAPES)
        if extra:
            raise WeightError(sorted(extra)[0], "unknown weight name")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    @classmethod
    def zeros(cls) -> "PredictorWeights":
        return cls({k: np.zeros(s) for k, s in WEIGHT_SHAPES.items()})

    @classmethod
    def random(cls, seed: int = 0, scale: float = 1.0) -> "PredictorWeights":
        rng = np.random.default_rng(seed)
        return cls({k: rng.normal(0.0, scale, s) for k, s in WEIGHT_SHAPES.items()})

    def to_json(self) -> dict:
        return {
            k: {"shape": list(WEIGHT_SHAPES[k]), "data": [float(x) for x in self.arrays[k].ravel()]}
            for k in sorted(WEIGHT_SHAPES)
        }

    @classmethod
    def from_json(cls, obj) -> "PredictorWeights":
        if not isinstance(obj, dict):
            raise WeightError("<root>", "weight file must hold a JSON object")
        arrays = {}
        for name, entry in obj.items():
            if not isinstance(entry, dict) or "shape" not in entry or "data" not in entry:
                raise WeightError(name, "expected {shape, data}")
            shape = tuple(entry["shape"])
            data = np.asarray(entry["data"], dtype=np.float64).ravel()
            if math.prod(shape) != data.size:
                raise WeightError(name, f"shape {list(shape)} does not match {data.size} values")
            arrays[name] = data.reshape(shape)
        return cls(arrays)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PredictorWeights":
        with open(path, encoding="utf-8") as f:
            return cls.from_json(json.load(f))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8")


@dataclass
class AttentionOutput:
    mu_h: np.ndarray  # (S, 2)
    mu_w: np.ndarray  # (S, 2)


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def attention(queries: np.ndarray, context: np.ndarray, wq, wk, wv) -> np.ndarray:
    """Single-head scaled dot-product attention; tokens are rows."""
    q = queries @ wq.T
    k = context @ wk.T
    v = context @ wv.T
    a = softmax_rows(q @ k.T / math.sqrt(q.shape[-1]))
    return a @ v


def attention_embed(balls: Sequence[BallSummary], weights: PredictorWeights, omega: float = 0.8) -> AttentionOutput:
    """Blend of same-plane self attention and cross-plane attention.

    The height branch attends XZ slices to themselves and to the XY slices;
    the width branch does the converse. ``omega`` weights the self term.
    """
    if len(balls) < 1:
        raise ValueError("need at least one ball")
    if not 0.0 <= omega <= 1.0:
        raise ValueError("omega must lie in [0, 1]")
    xy, xz = stack_thetas(balls)

    def branch(name, own, other):
        w = lambda k: weights[f"{name}.{k}"]
        sa = attention(own, own, w("self.query"), w("self.key"), w("self.value"))
        ca = attention(own, other, w("cross.query"), w("cross.key"), w("cross.value"))
        return omega * sa + (1.0 - omega) * ca

    return AttentionOutput(branch("h", xz, xy), branch("w", xy, xz))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def mlp_head(mu: np.ndarray, weights: PredictorWeights, branch: str) -> np.ndarray:
    """Per-ball sigmoid activations of the 2-9-1 block, shape ``(S,)``."""
    hidden = sigmoid(mu @ weights[f"{branch}.mlp.w1"].T + weights[f"{branch}.mlp.b1"])
    return sigmoid(hidden @ weights[f"{branch}.mlp.w2"].T + weights[f"{branch}.mlp.b2"])[:, 0]


def rescale(s: float, kappa_min: float, kappa_max: float) -> float:
    return kappa_min + s * (kappa_max - kappa_min)


def kappa_from_balls(
    balls: Sequence[BallSummary],
    weights: PredictorWeights,
    omega: float = 0.8,
    kappa_min: float = DEFAULT_KAPPA_MIN,
    kappa_max: float = DEFAULT_KAPPA_MAX,
) -> RayParams:
    att = attention_embed(balls, weights, omega)
    s_h = float(mlp_head(att.mu_h, weights, "h").mean())
    s_w = float(mlp_head(att.mu_w, weights, "w").mean())
    kh = min(max(rescale(s_h, kappa_min, kappa_max), kappa_min), kappa_max)
    kw = min(max(rescale(s_w, kappa_min, kappa_max), kappa_min), kappa_max)
    return RayParams(kh, kw, kappa_min, kappa_max)


def predict_kappa(
    cloud: PointCloud,
    plane: ViewPlane,
    weights: PredictorWeights,
    S: int = 32,
    r: float = 0.2,
    omega: float = 0.8,
    kappa_min: float = DEFAULT_KAPPA_MIN,
    kappa_max: float = DEFAULT_KAPPA_MAX,
    rng: Optional[RandomStream] = None,
    mutate: bool = False,
) -> RayParams:
    subset = partition_view(cloud, plane)
    if len(subset) < S:
        raise ValueError(f"plane {plane.id} has {len(subset)} points, fewer than S={S}")
    centers = farthest_point_sample(cloud, subset, S)
    balls = ball_aggregate(cloud, subset, centers, r)
    ray = kappa_from_balls(balls, weights, omega, kappa_min, kappa_max)
    if mutate:
        if rng is None:
            raise ValueError("mutation needs a random stream")
        ray = mutate_ray(ray, MutationConfig(kappa_min, kappa_max), rng)
    return ray
