"""Expected coarse gradients for the identity, ReLU and clipped-ReLU straight-through estimators."""

from __future__ import annotations

import enum
import math

import numpy as np

from .gaussian import band_joint_vector, pq, unit_bisector
from .model import DomainError, GradientPair, ModelParams, TeacherParams, angle, population_grad
from .model import _grad_v_at

__all__ = [
    "SteKind",
    "h_value",
    "expected_coarse_grad",
    "correlation",
    "correlation_closed_form",
    "descent_ratio",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


class SteKind(enum.Enum):
    """Surrogate derivative used in place of the binary activation's derivative."""

    IDENTITY = "identity"
    RELU = "relu"
    CAPPED_RELU = "crelu"

    @property
    def code(self) -> int:
        """Integer tag used by the compiled kernels."""
        return _CODES[self]

    @classmethod
    def parse(cls, value) -> "SteKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"id": "identity", "clipped_relu": "crelu", "capped_relu": "crelu", "clipped": "crelu"}
        return cls(aliases.get(key, key))

    def derivative(self, x: np.ndarray) -> np.ndarray:
        """mu'(x): 1, 1{x>0} or 1{0<x<1}."""
        x = np.asarray(x, dtype=np.float64)
        if self is SteKind.IDENTITY:
            return np.ones_like(x)
        if self is SteKind.RELU:
            return (x > 0.0).astype(np.float64)
        return ((x > 0.0) & (x < 1.0)).astype(np.float64)


_CODES = {SteKind.IDENTITY: 0, SteKind.RELU: 1, SteKind.CAPPED_RELU: 2}


def h_value(v, v_star) -> float:
    """``||v||^2 + (1'v)^2 - (1'v)(1'v*) + v'v*``."""
    v = np.asarray(v, dtype=np.float64)
    v_star = np.asarray(v_star, dtype=np.float64)
    if v.shape != v_star.shape:
        raise DomainError("v and v_star must have equal length")
    sv = v.sum()
    return float(v @ v + sv * sv - sv * v_star.sum() + v @ v_star)


def _coarse_w(kind: SteKind, v, w, v_star, w_star) -> np.ndarray:
    wn = np.linalg.norm(w)
    if wn == 0.0:
        raise DomainError("expected coarse gradient undefined at w = 0")
    w_hat = w / wn
    vv = float(v @ v_star)
    if kind is SteKind.IDENTITY:
        return _INV_SQRT_2PI * (float(v @ v) * w_hat - vv * w_star)
    theta = angle(w, w_star)
    h = h_value(v, v_star)
    if kind is SteKind.RELU:
        bis = unit_bisector(w_hat, w_star)
        return _INV_SQRT_2PI * (0.5 * h * w_hat - math.cos(0.5 * theta) * vv * bis)
    p_zero = pq(0.0, wn).p
    p_theta = pq(theta, wn) if 0.0 < theta < math.pi else None
    joint = band_joint_vector(w_hat, w_star, theta, wn, p_theta=p_theta, p_zero=p_zero)
    return 0.5 * p_zero * h * w_hat - vv * joint


def expected_coarse_grad(kind, p: ModelParams, t: TeacherParams) -> GradientPair:
    """Expectation over Gaussian inputs of the STE-modified gradient.

    The v-part is the exact population gradient in ``v``; the w-part replaces the
    activation derivative by ``mu'`` of the chosen estimator.
    """
    kind = SteKind.parse(kind)
    t.check_compatible(p)
    gw = _coarse_w(kind, p.v, p.w, t.v_star, t.w_star)
    gv = _grad_v_at(p.v, t.v_star, angle(p.w, t.w_star))
    return GradientPair(gv, gw)


def correlation(kind, p: ModelParams, t: TeacherParams) -> float | None:
    """Inner product of the expected coarse w-gradient with the true w-gradient.

    ``None`` where the true w-gradient is undefined (angle 0 or pi).
    """
    kind = SteKind.parse(kind)
    true = population_grad(p, t)
    if true.grad_w is None:
        return None
    coarse = _coarse_w(kind, p.v, p.w, t.v_star, t.w_star)
    return float(coarse @ true.grad_w)


def correlation_closed_form(kind, p: ModelParams, t: TeacherParams) -> float | None:
    kind = SteKind.parse(kind)
    t.check_compatible(p)
    wn = float(np.linalg.norm(p.w))
    if wn == 0.0:
        raise DomainError("correlation undefined at w = 0")
    theta = angle(p.w, t.w_star)
    if theta == 0.0 or theta == math.pi:
        return None
    vv2 = float(p.v @ t.v_star) ** 2
    if kind is SteKind.CAPPED_RELU:
        return pq(theta, wn).q * vv2 / (2.0 * math.pi * wn)
    base = math.sin(theta) * vv2 / ((2.0 * math.pi) ** 1.5 * wn)
    return 0.5 * base if kind is SteKind.RELU else base


def descent_ratio(kind, p: ModelParams, t: TeacherParams) -> float | None:
    """``||E g_w||^2 / (||df/dv||^2 + <E g_w, df/dw>)``; ``None`` when the denominator is <= 0.

    Bounded for the ReLU-type estimators on bounded sets away from ``w = 0``; blows up
    for the identity estimator near the spurious minimizer.
    """
    kind = SteKind.parse(kind)
    corr = correlation(kind, p, t)
    if corr is None:
        return None
    g = expected_coarse_grad(kind, p, t)
    denom = float(g.grad_v @ g.grad_v) + corr
    if not denom > 0.0:
        return None
    return float(g.grad_w @ g.grad_w) / denom
