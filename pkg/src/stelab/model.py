"""Two-linear-layer binary-activation model: parameters, population loss and gradients.

The network predicts ``v^T sigma(Z w)`` with ``sigma(x) = 1{x > 0}`` applied row-wise,
and labels come from a teacher ``(v_star, w_star)`` with ``||w_star|| = 1``.  Under
i.i.d. standard Gaussian inputs the expected squared loss depends on ``w`` only through
its angle with ``w_star``, which is what makes every quantity here closed-form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "ModelParams",
    "TeacherParams",
    "GradientPair",
    "angle",
    "apply_gram",
    "sherman_morrison_inverse_apply",
    "population_loss",
    "population_grad",
]


class DomainError(ValueError):
    """An input lies outside the domain where a quantity is defined."""


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.array(x, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise DomainError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Trainable pair: second-layer weights ``v`` (length m) and filter ``w`` (length n)."""

    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", _as_vector(self.v, "v"))
        object.__setattr__(self, "w", _as_vector(self.w, "w"))
        if self.v.size < 1:
            raise DomainError("m must be >= 1")
        if self.w.size < 2:
            raise DomainError("n must be >= 2")

    @property
    def m(self) -> int:
        return self.v.size

    @property
    def n(self) -> int:
        return self.w.size

    def __repr__(self):
        return f"ModelParams(v={self.v.tolist()}, w={self.w.tolist()})"


@dataclass(frozen=True, eq=False)
class TeacherParams:
    """Ground truth generating the labels. ``w_star`` must have unit norm."""

    v_star: np.ndarray
    w_star: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v_star", _as_vector(self.v_star, "v_star"))
        object.__setattr__(self, "w_star", _as_vector(self.w_star, "w_star"))
        if self.v_star.size < 1 or self.w_star.size < 2:
            raise DomainError("teacher needs m >= 1 and n >= 2")
        if not np.any(self.v_star != 0.0):
            raise DomainError("v_star must be non-zero")
        if abs(np.linalg.norm(self.w_star) - 1.0) > 1e-12:
            raise DomainError("w_star must have unit norm (within 1e-12)")

    @classmethod
    def normalized(cls, v_star, w_direction) -> "TeacherParams":
        """Build a teacher, rescaling ``w_direction`` to unit length."""
        w = np.asarray(w_direction, dtype=np.float64)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise DomainError("w_star direction must be non-zero")
        return cls(v_star, w / norm)

    @classmethod
    def random(cls, m: int, n: int, rng: np.random.Generator) -> "TeacherParams":
        return cls.normalized(rng.standard_normal(m), rng.standard_normal(n))

    @property
    def m(self) -> int:
        return self.v_star.size

    @property
    def n(self) -> int:
        return self.w_star.size

    def check_compatible(self, p: ModelParams) -> None:
        if p.m != self.m or p.n != self.n:
            raise DomainError(
                f"dimension mismatch: model (m={p.m}, n={p.n}) vs teacher (m={self.m}, n={self.n})"
            )

    def __repr__(self):
        return f"TeacherParams(v_star={self.v_star.tolist()}, w_star={self.w_star.tolist()})"


@dataclass(frozen=True, eq=False)
class GradientPair:
    """A (v-part, w-part) pair.

    ``grad_w`` is ``None`` where the w-part is undefined (the population loss is not
    differentiable in ``w`` when the angle to ``w_star`` is exactly 0 or pi).
    """

    grad_v: np.ndarray
    grad_w: np.ndarray | None

    @property
    def w_defined(self) -> bool:
        return self.grad_w is not None

    def norm(self) -> float:
        if self.grad_w is None:
            raise DomainError("w-gradient undefined (non-differentiable point)")
        return math.sqrt(float(self.grad_v @ self.grad_v + self.grad_w @ self.grad_w))


def angle(w, w_ref) -> float:
    """Angle in [0, pi] between two non-zero vectors.

    Mathematically ``arccos`` of the clamped cosine; evaluated as
    ``2 atan2(|a - b|, |a + b|)`` on the unit vectors, which keeps full relative
    accuracy near 0 and pi where ``arccos`` loses half the digits.
    """
    w = np.asarray(w, dtype=np.float64)
    w_ref = np.asarray(w_ref, dtype=np.float64)
    nw = np.linalg.norm(w)
    nr = np.linalg.norm(w_ref)
    if nw == 0.0 or nr == 0.0:
        raise DomainError("angle undefined for a zero vector")
    a = w / nw
    b = w_ref / nr
    return 2.0 * math.atan2(float(np.linalg.norm(a - b)), float(np.linalg.norm(a + b)))


def apply_gram(x) -> np.ndarray:
    """``(I + 1 1^T) x``."""
    x = np.asarray(x, dtype=np.float64)
    return x + x.sum()


def sherman_morrison_inverse_apply(x) -> np.ndarray:
    """``(I + 1 1^T)^{-1} x = x - 1 (1^T x) / (m + 1)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise DomainError("need a non-empty vector")
    return x - x.sum() / (x.size + 1)


def _loss_at(v: np.ndarray, vs: np.ndarray, theta: float) -> float:
    # (1/8)[v'Av - 2 v'((1 - 2 theta/pi) I + 11')v* + v*'Av*]
    sv, ss = v.sum(), vs.sum()
    vav = v @ v + sv * sv
    cross = (1.0 - 2.0 * theta / math.pi) * (v @ vs) + sv * ss
    sas = vs @ vs + ss * ss
    return 0.125 * float(vav - 2.0 * cross + sas)


def population_loss(p: ModelParams, t: TeacherParams) -> float:
    """Expected squared loss over Gaussian inputs."""
    t.check_compatible(p)
    vs = t.v_star
    if not np.any(p.w != 0.0):
        ss = vs.sum()
        return 0.125 * float(vs @ vs + ss * ss)
    return _loss_at(p.v, vs, angle(p.w, t.w_star))


def _grad_v_at(v: np.ndarray, vs: np.ndarray, theta: float) -> np.ndarray:
    return 0.25 * apply_gram(v) - 0.25 * ((1.0 - 2.0 * theta / math.pi) * vs + vs.sum())


def population_grad(p: ModelParams, t: TeacherParams) -> GradientPair:
    """True partial gradients of the population loss.

    The v-part exists for every ``w != 0``.  The w-part is ``None`` at the two
    non-differentiable angles 0 and pi.
    """
    t.check_compatible(p)
    w = p.w
    wn = np.linalg.norm(w)
    if wn == 0.0:
        raise DomainError("population gradient undefined at w = 0")
    theta = angle(w, t.w_star)
    gv = _grad_v_at(p.v, t.v_star, theta)
    if theta == 0.0 or theta == math.pi:
        return GradientPair(gv, None)
    w_hat = w / wn
    # written via the small difference w* - w_hat and re-orthogonalized once, so the
    # direction stays orthogonal to w to working precision even for tiny angles
    d = t.w_star - w_hat
    perp = d - (w_hat @ d) * w_hat
    perp -= (w_hat @ perp) * w_hat
    perp_norm = np.linalg.norm(perp)
    if perp_norm == 0.0:
        return GradientPair(gv, None)
    scale = -float(p.v @ t.v_star) / (2.0 * math.pi * wn)
    return GradientPair(gv, scale * perp / perp_norm)
