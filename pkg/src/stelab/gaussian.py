"""Gaussian expectation identities for half-space and band indicators.

``xi`` is the truncated radial moment ``int_0^x r^2 exp(-r^2/2) dr``.  ``p`` and ``q``
are its cosine/sine weighted angular integrals; together they give the expectation of
``z 1{0 < z.w < 1, z.w~ > 0}`` that drives the clipped-ReLU coarse gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .model import DomainError, angle

__all__ = [
    "XI_INF",
    "GL_ORDER",
    "PqValue",
    "IndicatorMoments",
    "CappedMoments",
    "xi",
    "pq",
    "pq_breakpoints",
    "gauss_indicator_moments",
    "gauss_capped_moments",
    "unit_bisector",
]

XI_INF = math.sqrt(math.pi / 2.0)
GL_ORDER = 64
# xi(50) == xi(inf) in double precision
XI_ARG_CAP = 50.0

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(GL_ORDER)
GL_NODES.setflags(write=False)
GL_WEIGHTS.setflags(write=False)

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def xi(x):
    """``int_0^x r^2 exp(-r^2/2) dr`` for ``x >= 0`` (``inf`` allowed)."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0):
        raise DomainError("xi is defined for x >= 0 only")
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.where(
            np.isinf(arr),
            XI_INF,
            XI_INF * erf(arr / _SQRT2) - arr * np.exp(-0.5 * np.minimum(arr, 1e154) ** 2),
        )
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class PqValue:
    p: float
    q: float
    theta: float
    w_norm: float


def pq_breakpoints(upper: float, w_norm: float) -> np.ndarray:
    """Panel edges on ``[0, upper]`` for integrating ``g(u) xi(1 / (w_norm sin u))``.

    The integrand saturates where ``w_norm sin u`` is small.  Edges sit where
    ``sin u = 2^k / w_norm`` (k >= -4), mirrored about pi/2.
    """
    cuts = []
    c = 1.0 / 16.0
    while c < w_norm:
        u = math.asin(c / w_norm)
        cuts.append(u)
        cuts.append(math.pi - u)
        c *= 2.0
    inner = sorted(u for u in cuts if 0.0 < u < upper)
    return np.array([0.0, *inner, upper])


def _radial_integral(upper: float, w_norm: float, use_cos: bool) -> float:
    if upper <= 0.0:
        return 0.0
    edges = pq_breakpoints(upper, w_norm)
    a = edges[:-1, None]
    b = edges[1:, None]
    half = 0.5 * (b - a)
    u = half * GL_NODES + 0.5 * (a + b)
    su = np.sin(u)
    with np.errstate(divide="ignore", over="ignore"):
        arg = np.minimum(1.0 / (w_norm * su), XI_ARG_CAP)
    g = np.cos(u) if use_cos else su
    return float(np.sum(half * GL_WEIGHTS * g * xi(arg)))


def pq(theta: float, w_norm: float) -> PqValue:
    """Gauss-Legendre evaluation of the clipped-band angular integrals.

    With ``u = pi/2 - phi`` the defining integrals over ``phi in [theta - pi/2, pi/2]``
    become ``p = (1/2pi) int_0^{pi-theta} sin(u) xi(csc(u)/|w|) du`` and, folding the
    odd part of the sine integrand, ``q = (1/2pi) int_0^{min(theta, pi-theta)}
    cos(u) xi(csc(u)/|w|) du``.  Each panel uses 64 nodes.
    """
    theta = float(theta)
    w_norm = float(w_norm)
    if not (w_norm > 0.0) or not math.isfinite(w_norm):
        raise DomainError("w_norm must be a positive finite number")
    if not (0.0 <= theta <= math.pi):
        raise DomainError("theta must lie in [0, pi]")
    p = _radial_integral(math.pi - theta, w_norm, use_cos=False) / (2.0 * math.pi)
    q = _radial_integral(min(theta, math.pi - theta), w_norm, use_cos=True) / (2.0 * math.pi)
    return PqValue(p, q, theta, w_norm)


def unit_bisector(w_hat: np.ndarray, w_tilde_hat: np.ndarray) -> np.ndarray:
    """``unit(w_hat + w_tilde_hat)``, taken as the zero vector for antipodal inputs."""
    s = w_hat + w_tilde_hat
    ns = np.linalg.norm(s)
    if ns < 1e-9:
        return np.zeros_like(s)
    return s / ns


def _unit_pair(w, w_tilde):
    w = np.asarray(w, dtype=np.float64)
    w_tilde = np.asarray(w_tilde, dtype=np.float64)
    if w.shape != w_tilde.shape or w.ndim != 1:
        raise DomainError("w and w_tilde must be vectors of equal length")
    nw = np.linalg.norm(w)
    nt = np.linalg.norm(w_tilde)
    if nw == 0.0 or nt == 0.0:
        raise DomainError("zero vector")
    return w, nw, w / nw, w_tilde / nt


@dataclass(frozen=True)
class IndicatorMoments:
    prob_single: float
    prob_joint: float
    vec_single: np.ndarray
    vec_joint: np.ndarray


def gauss_indicator_moments(w, w_tilde) -> IndicatorMoments:
    """Half-space moments for ``z ~ N(0, I_n)``.

    Returns ``E[1{z.w>0}]``, ``E[1{z.w>0, z.w~>0}]``, ``E[z 1{z.w>0}]`` and
    ``E[z 1{z.w>0, z.w~>0}]``; the last is the zero vector for antipodal inputs.
    """
    _, _, w_hat, wt_hat = _unit_pair(w, w_tilde)
    theta = angle(w, w_tilde)
    vec_single = _INV_SQRT_2PI * w_hat
    vec_joint = math.cos(theta / 2.0) * _INV_SQRT_2PI * unit_bisector(w_hat, wt_hat)
    return IndicatorMoments(0.5, (math.pi - theta) / (2.0 * math.pi), vec_single, vec_joint)


@dataclass(frozen=True)
class CappedMoments:
    vec_band: np.ndarray
    vec_band_joint: np.ndarray


def band_joint_vector(w_hat, wt_hat, theta: float, w_norm: float, p_theta=None, p_zero=None):
    """``E[z 1{0<z.w<1, z.w~>0}]`` from the p/q decomposition.

    Endpoints: at ``theta = 0`` the second indicator is implied by the first, so the
    value is ``p(0, w) w_hat``; at ``theta = pi`` the band and the half-space are
    disjoint and the value is zero.
    """
    if theta == 0.0:
        if p_zero is None:
            p_zero = pq(0.0, w_norm).p
        return p_zero * w_hat
    if theta == math.pi:
        return np.zeros_like(w_hat)
    val = p_theta if p_theta is not None else pq(theta, w_norm)
    half = 0.5 * theta
    csc = 1.0 / math.sin(half)
    cot = math.cos(half) * csc
    bis = unit_bisector(w_hat, wt_hat)
    return (val.p - cot * val.q) * w_hat + csc * val.q * bis


def gauss_capped_moments(w, w_tilde) -> CappedMoments:
    """Band moments ``E[z 1{0<z.w<1}]`` and ``E[z 1{0<z.w<1, z.w~>0}]``."""
    _, nw, w_hat, wt_hat = _unit_pair(w, w_tilde)
    theta = angle(w, w_tilde)
    p_zero = pq(0.0, nw).p
    joint = band_joint_vector(w_hat, wt_hat, theta, nw, p_zero=p_zero)
    return CappedMoments(p_zero * w_hat, joint)
