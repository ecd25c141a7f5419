"""Space utilization, Gaussian color regularization and the training losses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np

from .projection import RayParams
from .raster import SEMANTIC, RasterImage, black_mask

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class DomainError(ValueError):
    pass


def semantic_fraction(img: RasterImage) -> float:
    """Share of non-black pixels."""
    mask = black_mask(img)
    return float((~mask).sum()) / mask.size


def utilization(fraction: float, tau: float) -> float:
    """``fraction ** tau`` with an all-black image scoring 0 even at tau = 0."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if fraction <= 0.0:
        return 0.0
    return float(fraction) ** tau


def u_space(img: RasterImage, tau: float) -> float:
    if img.mode != SEMANTIC:
        raise ValueError("utilization is only defined on semantic-color images")
    return utilization(semantic_fraction(img), tau)


def gauss_reg(kappa_h: float, kappa_w: float, u: float) -> float:
    """2-D Gaussian kernel in (kappa_h, kappa_w) with standard deviation ``u``."""
    if not u > 0:
        raise DomainError(f"utilization must be positive, got {u}")
    return math.exp(-(kappa_h * kappa_h + kappa_w * kappa_w) / (2.0 * u * u)) / (_SQRT_2PI * u)


def grad_gauss_reg(kappa_h: float, kappa_w: float, u: float) -> Tuple[float, float]:
    """Partial derivatives of :func:`gauss_reg` in both kappas, ``u`` held fixed."""
    l = gauss_reg(kappa_h, kappa_w, u)
    s = u * u
    return (-kappa_h / s * l, -kappa_w / s * l)


@dataclass(frozen=True)
class UtilizationReport:
    plane_id: int
    semantic_fraction: float
    tau: float
    u_space: float
    reg_peak: Optional[float]
    reg_value: Optional[float]
    kappa: RayParams

    @classmethod
    def build(cls, plane_id: int, fraction: float, tau: float, kappa: RayParams) -> "UtilizationReport":
        """Score a plane; an all-black plane gets ``None`` regularization."""
        u = utilization(fraction, tau)
        if u > 0:
            peak = gauss_reg(0.0, 0.0, u)
            value = gauss_reg(kappa.kappa_h, kappa.kappa_w, u)
        else:
            peak = value = None
        return cls(plane_id, float(fraction), float(tau), u, peak, value, kappa)

    @property
    def degenerate(self) -> bool:
        return self.reg_value is None


def l_sparks(reports: Iterable[UtilizationReport]) -> float:
    """Sum of per-plane regularization values. Degenerate planes contribute nothing."""
    return float(sum(r.reg_value for r in reports if r.reg_value is not None))


def cross_entropy(logits, labels) -> float:
    """Softmax cross-entropy scaled by ``-1 / (n * C)``.

    The class-count factor in the denominator is deliberate; it is not the
    usual per-sample mean.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if logits.ndim != 2 or logits.shape != labels.shape:
        raise ValueError("logits and labels must both be (n, C)")
    n, c = logits.shape
    if n < 1 or c < 2:
        raise ValueError("need n >= 1 and C >= 2")
    if not np.all(np.isfinite(logits)):
        raise DomainError("logits must be finite")
    if not (np.all((labels == 0) | (labels == 1)) and np.all(labels.sum(axis=1) == 1)):
        raise ValueError("labels must be one-hot rows")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_sm = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    total = float(np.sum(labels * log_sm))
    return -total / (n * c)


def total_loss(ce: float, sparks: float, lam: float) -> float:
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return ce + lam * sparks
