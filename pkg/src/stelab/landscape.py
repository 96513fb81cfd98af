"""Critical points of the population loss and their classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, TeacherParams, _grad_v_at, angle, sherman_morrison_inverse_apply
from .ste import SteKind, expected_coarse_grad

__all__ = [
    "PointClass",
    "CriticalPointReport",
    "critical_points",
    "saddle_condition",
    "classify_point",
    "stationarity_residual",
    "reduced_hessian",
]


class PointClass(enum.Enum):
    GLOBAL_MIN = "GlobalMin"
    SPURIOUS_LOCAL_MIN = "SpuriousLocalMin"
    SADDLE = "Saddle"
    NON_CRITICAL = "NonCritical"
    UNDEFINED = "Undefined"


LIMIT_POINTS = frozenset({PointClass.GLOBAL_MIN, PointClass.SPURIOUS_LOCAL_MIN, PointClass.SADDLE})


@dataclass(frozen=True)
class CriticalPointReport:
    has_saddle: bool
    saddle_v: np.ndarray | None
    saddle_theta: float | None
    spurious_v: np.ndarray
    spurious_theta: float
    global_v: np.ndarray
    global_theta: float
    # (1'v*)^2 < (m+1)/2 ||v*||^2; when False the angle-pi point is not a local minimum
    spurious_is_local_min: bool

    def as_dict(self) -> dict:
        def lst(x):
            return None if x is None else [float(a) for a in x]

        return {
            "has_saddle": self.has_saddle,
            "saddle_v": lst(self.saddle_v),
            "saddle_theta": self.saddle_theta,
            "spurious_v": lst(self.spurious_v),
            "spurious_theta": self.spurious_theta,
            "spurious_is_local_min": self.spurious_is_local_min,
            "global_v": lst(self.global_v),
            "global_theta": self.global_theta,
        }


def saddle_condition(v_star) -> bool:
    """Strict inequality ``(1'v*)^2 < (m+1)/2 ||v*||^2``; the boundary counts as no saddle."""
    v_star = np.asarray(v_star, dtype=np.float64)
    s = v_star.sum()
    return bool(s * s < 0.5 * (v_star.size + 1) * float(v_star @ v_star))


def critical_points(t: TeacherParams) -> CriticalPointReport:
    vs = t.v_star
    m = vs.size
    s = vs.sum()
    norm2 = float(vs @ vs)
    # (I + 11')^{-1} (11' - I) v*
    spurious_v = sherman_morrison_inverse_apply(s - vs)
    has_saddle = saddle_condition(vs)
    saddle_v = saddle_theta = None
    if has_saddle:
        denom = (m + 1) * norm2 - s * s
        saddle_v = sherman_morrison_inverse_apply(-(s * s) / denom * vs + s)
        saddle_theta = 0.5 * math.pi * (m + 1) * norm2 / denom
    return CriticalPointReport(
        has_saddle=has_saddle,
        saddle_v=saddle_v,
        saddle_theta=saddle_theta,
        spurious_v=spurious_v,
        spurious_theta=math.pi,
        global_v=vs.copy(),
        global_theta=0.0,
        spurious_is_local_min=has_saddle,
    )


def classify_point(p: ModelParams, t: TeacherParams, tol: float = 1e-5, report=None) -> PointClass:
    if not tol > 0:
        raise ValueError("tol must be positive")
    t.check_compatible(p)
    if not np.any(p.w != 0.0):
        return PointClass.UNDEFINED
    rep = report if report is not None else critical_points(t)
    theta = angle(p.w, t.w_star)
    if np.linalg.norm(p.v - t.v_star) <= tol and theta <= tol:
        return PointClass.GLOBAL_MIN
    if np.linalg.norm(p.v - rep.spurious_v) <= tol and theta >= math.pi - tol:
        return PointClass.SPURIOUS_LOCAL_MIN
    if (
        rep.has_saddle
        and np.linalg.norm(p.v - rep.saddle_v) <= tol
        and abs(theta - rep.saddle_theta) <= tol
    ):
        return PointClass.SADDLE
    return PointClass.NON_CRITICAL


def stationarity_residual(p: ModelParams, t: TeacherParams, kind) -> float:
    """``max(||df/dv||, ||E g_w||)`` for the chosen estimator."""
    g = expected_coarse_grad(kind, p, t)
    return max(float(np.linalg.norm(g.grad_v)), float(np.linalg.norm(g.grad_w)))


def reduced_loss_grad_v(v, theta: float, t: TeacherParams) -> np.ndarray:
    return _grad_v_at(np.asarray(v, dtype=np.float64), t.v_star, theta)


def reduced_hessian(v, theta: float, t: TeacherParams) -> np.ndarray:
    """Hessian of the loss viewed as a function of ``(v, theta)``.

    The loss is quadratic in ``v`` and linear in ``theta``: the ``v`` block is
    ``(I + 11')/4``, the mixed column is ``v*/(2 pi)`` and the ``theta`` entry is 0.
    """
    m = t.m
    hess = np.zeros((m + 1, m + 1))
    hess[:m, :m] = 0.25 * (np.eye(m) + 1.0)
    hess[:m, m] = hess[m, :m] = t.v_star / (2.0 * math.pi)
    return hess
