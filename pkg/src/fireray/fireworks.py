"""Bounded Gaussian mutation and an elitist fireworks-style search over ray curvature."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .cloud import PointCloud, ViewPlane
from .objective import utilization
from .projection import DEFAULT_KAPPA_MAX, DEFAULT_KAPPA_MIN, RayParams
from .raster import DEFAULT_SIZE, coverage_count

_TWO_PI = 2.0 * math.pi
_U53 = 2.0 ** -53


class RandomStream:
    """Seeded PCG64 stream with an explicit uniform and normal transform.

    Uniforms take the top 53 bits of each raw 64-bit output. Normals use the
    cosine branch of Box-Muller on two uniforms, so every normal consumes
    exactly two raw outputs. Scalar draws go through ``math`` and array
    draws through numpy; the two may differ in the last ulp.
    """

    def __init__(self, seed: int = 0, *keys: int):
        ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
        self._bits = np.random.PCG64(ss)

    def _uniform(self, n: int) -> np.ndarray:
        raw = self._bits.random_raw(n)
        return (raw >> np.uint64(11)).astype(np.float64) * _U53

    def _uniform1(self) -> float:
        return (self._bits.random_raw() >> 11) * _U53

    def uniform(self, lo: float = 0.0, hi: float = 1.0, size: Optional[int] = None):
        if size is None:
            return lo + (hi - lo) * self._uniform1()
        return lo + (hi - lo) * self._uniform(size)

    def normal(self, size: Optional[int] = None):
        if size is None:
            u1 = 1.0 - self._uniform1()  # (0, 1], keeps log finite
            return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * self._uniform1())
        u = self._uniform(2 * size)
        u1 = 1.0 - u[0::2]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u[1::2])


def gaussian_sample(rng: RandomStream) -> float:
    return rng.normal()


@dataclass(frozen=True)
class MutationConfig:
    kappa_min: float = DEFAULT_KAPPA_MIN
    kappa_max: float = DEFAULT_KAPPA_MAX
    seed: int = 0

    def __post_init__(self):
        if not self.kappa_min < self.kappa_max:
            raise ValueError("kappa_min must be below kappa_max")


def wrap_mutation(kappa: float, g: float, lo: float, hi: float) -> float:
    """``kappa * (1 + g)``, folded back as ``lo + |k| mod (hi - lo)`` when out of bounds."""
    k = kappa * (1.0 + g)
    if k > hi or k < lo:
        # fmod is exact for finite operands and equals floor-mod on |k| >= 0
        k = lo + math.fmod(abs(k), hi - lo)
        # guard the last ulp of the addition
        k = min(max(k, lo), hi)
    return k


def mutate(kappa: float, cfg: MutationConfig, rng: RandomStream) -> float:
    return wrap_mutation(kappa, rng.normal(), cfg.kappa_min, cfg.kappa_max)


def mutate_ray(ray: RayParams, cfg: MutationConfig, rng: RandomStream, escape_zero: bool = False) -> RayParams:
    """Mutate both components independently, H first.

    With ``escape_zero`` a component that is exactly 0 (a fixed point of the
    multiplicative rule) is redrawn uniformly from the bounds instead.
    """
    out = []
    for k in ray.pair:
        if escape_zero and k == 0.0:
            out.append(rng.uniform(cfg.kappa_min, cfg.kappa_max))
        else:
            out.append(mutate(k, cfg, rng))
    return RayParams(out[0], out[1], cfg.kappa_min, cfg.kappa_max)


def _better(score: float, ray: RayParams, best_score: float, best: RayParams) -> bool:
    """Higher score wins; ties go to the smaller squared norm, then smaller kappa_h."""
    if score != best_score:
        return score > best_score
    n, bn = ray.kappa_h ** 2 + ray.kappa_w ** 2, best.kappa_h ** 2 + best.kappa_w ** 2
    if n != bn:
        return n < bn
    return ray.kappa_h < best.kappa_h


def select_best(candidates: Sequence[RayParams], scores: Sequence[float]) -> int:
    best = 0
    for i in range(1, len(candidates)):
        if _better(scores[i], candidates[i], scores[best], candidates[best]):
            best = i
    return best


@dataclass
class SearchStep:
    candidates: List[Tuple[float, float]]
    scores: List[float]
    best_score: float
    best_kappa: Tuple[float, float]


@dataclass
class SearchTrace:
    steps: List[SearchStep] = field(default_factory=list)
    empty_subset: bool = False

    @property
    def best_scores(self) -> List[float]:
        return [s.best_score for s in self.steps]

    def all_scores(self) -> List[float]:
        return [x for s in self.steps for x in s.scores]


def make_scorer(cloud: PointCloud, subset, plane: ViewPlane, H: int, W: int, tau: float) -> Callable[[RayParams], float]:
    """Utilization of the semantic render of ``subset`` as a function of the ray."""
    size = H * W

    def score(ray: RayParams) -> float:
        return utilization(coverage_count(cloud, subset, plane, ray, H, W) / size, tau)

    return score


def optimize_plane(
    cloud: PointCloud,
    subset,
    plane: ViewPlane,
    H: int = DEFAULT_SIZE,
    W: int = DEFAULT_SIZE,
    tau: float = 0.8,
    cfg: MutationConfig = MutationConfig(),
    pop: int = 16,
    iters: int = 30,
    init: Optional[RayParams] = None,
    score: Optional[Callable[[RayParams], float]] = None,
    stream_key: Tuple[int, ...] = (),
) -> Tuple[RayParams, SearchTrace]:
    """Elitist single-parent search maximizing space utilization.

    Iteration 0 scores ``init`` plus ``pop - 1`` mutations of it; every later
    iteration scores ``pop`` mutations of the best ray found so far. The
    candidate ``c`` of iteration ``i`` draws from the stream seeded by
    ``(cfg.seed, *stream_key, i, c)``, so results do not depend on
    evaluation order.
    """
    if pop < 1 or iters < 0:
        raise ValueError("need pop >= 1 and iters >= 0")
    if init is None:
        init = RayParams(0.0, 0.0, cfg.kappa_min, cfg.kappa_max)
    init = RayParams(init.kappa_h, init.kappa_w, cfg.kappa_min, cfg.kappa_max)
    trace = SearchTrace()
    if len(subset) == 0:
        trace.empty_subset = True
        trace.steps.append(SearchStep([init.pair], [0.0], 0.0, init.pair))
        return init, trace
    if score is None:
        score = make_scorer(cloud, subset, plane, H, W, tau)

    best, best_score = None, -math.inf
    for it in range(iters + 1):
        if it == 0:
            cands = [init] + [
                mutate_ray(init, cfg, RandomStream(cfg.seed, *stream_key, 0, c), escape_zero=True) for c in range(1, pop)
            ]
        else:
            cands = [mutate_ray(best, cfg, RandomStream(cfg.seed, *stream_key, it, c), escape_zero=True) for c in range(pop)]
        scores = [score(c) for c in cands]
        i = select_best(cands, scores)
        if best is None or _better(scores[i], cands[i], best_score, best):
            best, best_score = cands[i], scores[i]
        trace.steps.append(SearchStep([c.pair for c in cands], scores, best_score, best.pair))
    return best, trace
