"""Full-batch coarse gradient descent driven by expected (population) gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .landscape import PointClass, classify_point, critical_points
from .model import DomainError, ModelParams, TeacherParams, angle, population_loss
from .ste import SteKind, expected_coarse_grad

__all__ = [
    "DegenerateStep",
    "DescentConfig",
    "TrajectoryRecord",
    "Trajectory",
    "RunOutcome",
    "step",
    "run",
    "auto_eta",
    "run_auto",
    "check_global_region",
]

MONOTONE_SLACK = 1e-12


class DegenerateStep(DomainError):
    """A step sent ``w`` to the zero vector."""


@dataclass(frozen=True)
class DescentConfig:
    kind: SteKind = SteKind.RELU
    eta: float = 0.1
    max_iters: int = 100_000
    grad_tol: float = 1e-7
    w_norm_floor: float = 1e-3
    record_every: int = 1
    classify_tol: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "kind", SteKind.parse(self.kind))
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.w_norm_floor < 0:
            raise ValueError("w_norm_floor must be >= 0")


@dataclass(frozen=True)
class TrajectoryRecord:
    iter: int
    loss: float
    grad_v_norm: float
    coarse_grad_w_norm: float
    theta: float
    w_norm: float
    v: np.ndarray | None = None


TRAJECTORY_COLUMNS = ("iter", "loss", "grad_v_norm", "coarse_grad_w_norm", "theta", "w_norm")


@dataclass
class Trajectory:
    """Column store of recorded iterates; indexing yields ``TrajectoryRecord``."""

    iter: np.ndarray
    loss: np.ndarray
    grad_v_norm: np.ndarray
    coarse_grad_w_norm: np.ndarray
    theta: np.ndarray
    w_norm: np.ndarray
    v: np.ndarray

    def __len__(self):
        return self.iter.size

    def __getitem__(self, i) -> TrajectoryRecord:
        return TrajectoryRecord(
            int(self.iter[i]), float(self.loss[i]), float(self.grad_v_norm[i]),
            float(self.coarse_grad_w_norm[i]), float(self.theta[i]), float(self.w_norm[i]),
            self.v[i].copy(),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))


@dataclass
class RunOutcome:
    final_params: ModelParams | None
    classification: PointClass
    converged: bool
    monotone: bool
    iterations: int
    trajectory: Trajectory
    eta: float
    max_loss_increase: float = 0.0
    min_w_norm: float = math.inf
    w_floor_violated: bool = False
    degenerate: bool = False
    diverged: bool = False
    final_w: np.ndarray | None = field(default=None, repr=False)


def step(p: ModelParams, t: TeacherParams, cfg: DescentConfig) -> ModelParams:
    """One update ``(v, w) <- (v, w) - eta * E[(dl/dv, g_mu)]``."""
    if not np.any(p.w != 0.0):
        raise DomainError("step undefined at w = 0")
    g = expected_coarse_grad(cfg.kind, p, t)
    w = p.w - cfg.eta * g.grad_w
    if not np.any(w != 0.0):
        raise DegenerateStep("w became the zero vector")
    return ModelParams(p.v - cfg.eta * g.grad_v, w)


def _run_numpy(p0: ModelParams, t: TeacherParams, cfg: DescentConfig):
    cols = {k: [] for k in (*TRAJECTORY_COLUMNS, "v")}
    flags = dict(
        iterations=0, converged=False, monotone=True, max_loss_increase=0.0,
        min_w_norm=float(np.linalg.norm(p0.w)), w_floor_violated=False, degenerate=False, diverged=False,
    )
    p = p0
    loss = population_loss(p, t)
    it = 0
    while True:
        g = expected_coarse_grad(cfg.kind, p, t)
        ngv = float(np.linalg.norm(g.grad_v))
        ngw = float(np.linalg.norm(g.grad_w))
        if max(ngv, ngw) <= cfg.grad_tol:
            flags["converged"] = True
        last = flags["converged"] or it >= cfg.max_iters
        if it % cfg.record_every == 0 or last:
            for key, val in zip(
                (*TRAJECTORY_COLUMNS, "v"),
                (it, loss, ngv, ngw, angle(p.w, t.w_star), float(np.linalg.norm(p.w)), p.v.copy()),
            ):
                cols[key].append(val)
        if last:
            break
        w = p.w - cfg.eta * g.grad_w
        v = p.v - cfg.eta * g.grad_v
        it += 1
        flags["iterations"] = it
        wn = float(np.linalg.norm(w))
        if not (math.isfinite(wn) and np.all(np.isfinite(v))):
            flags["diverged"] = True
            flags["monotone"] = False
            p = None
            final = (v, w)
            break
        if wn == 0.0:
            flags["degenerate"] = True
            p = None
            final = (v, w)
            break
        flags["min_w_norm"] = min(flags["min_w_norm"], wn)
        if wn < cfg.w_norm_floor:
            flags["w_floor_violated"] = True
        p = ModelParams(v, w)
        new_loss = population_loss(p, t)
        if not math.isfinite(new_loss):
            flags["diverged"] = True
            flags["monotone"] = False
            p = None
            final = (v, w)
            break
        inc = new_loss - loss
        flags["max_loss_increase"] = max(flags["max_loss_increase"], inc)
        if inc > MONOTONE_SLACK:
            flags["monotone"] = False
        loss = new_loss
    if p is not None:
        final = (p.v, p.w)
    rec = {k: np.array(cols[k]) for k in TRAJECTORY_COLUMNS}
    rec["iter"] = rec["iter"].astype(np.int64)
    rec["v"] = np.array(cols["v"]).reshape(-1, p0.m)
    return final[0], final[1], flags, rec


def run(p0: ModelParams, t: TeacherParams, cfg: DescentConfig) -> RunOutcome:
    """Iterate ``step`` until the stationarity residual drops below ``grad_tol``.

    Every iteration's loss is compared with the previous one for the monotone flag;
    only every ``record_every``-th iterate (plus the last) is stored.
    """
    t.check_compatible(p0)
    if not np.any(p0.w != 0.0):
        raise DomainError("initial w must be non-zero")
    if kernels.use_numba():
        v, w, flags, rec = kernels.descend_numba(
            p0.v, p0.w, t.v_star, t.w_star, cfg.kind.code, cfg.eta, cfg.max_iters,
            cfg.grad_tol, cfg.w_norm_floor, cfg.record_every,
        )
    else:
        v, w, flags, rec = _run_numpy(p0, t, cfg)
    traj = Trajectory(**rec)
    if flags["degenerate"] or flags["diverged"]:
        final = None
        cls = PointClass.UNDEFINED
    else:
        final = ModelParams(v, w)
        cls = classify_point(final, t, cfg.classify_tol, report=critical_points(t))
    return RunOutcome(
        final_params=final, classification=cls, trajectory=traj, eta=cfg.eta, final_w=np.asarray(w),
        **flags,
    )


def auto_eta(
    p0: ModelParams, t: TeacherParams, cfg: DescentConfig, probe_steps: int = 50, max_halvings: int = 60
) -> float:
    """Halve ``cfg.eta`` until the first ``probe_steps`` steps decrease the loss monotonically."""
    eta = cfg.eta
    for _ in range(max_halvings + 1):
        probe = replace(cfg, eta=eta, max_iters=probe_steps, record_every=probe_steps)
        out = run(p0, t, probe)
        if out.monotone and not (out.degenerate or out.diverged or out.w_floor_violated):
            return eta
        eta *= 0.5
    raise RuntimeError("no monotone step size found")


def run_auto(
    p0: ModelParams, t: TeacherParams, cfg: DescentConfig, probe_steps: int = 50, max_halvings: int = 60
) -> RunOutcome:
    """``run`` with ``eta`` from ``auto_eta``.

    If the full run is still not monotone while ``||w||`` stayed above the floor, the
    step size was the culprit and ``eta`` is halved again.  A run whose ``||w||`` fell
    below the floor is returned as is: shrinking ``eta`` does not keep ``w`` away from
    the origin, and the flag reports that the descent hypothesis failed.
    """
    eta = auto_eta(p0, t, cfg, probe_steps, max_halvings)
    for _ in range(max_halvings + 1):
        out = run(p0, t, replace(cfg, eta=eta))
        if (out.monotone and not (out.degenerate or out.diverged)) or out.w_floor_violated:
            return out
        eta *= 0.5
    return out


def check_global_region(p: ModelParams, t: TeacherParams) -> bool:
    """Initialization region with guaranteed convergence to the global minimizer.

    ``v'v* > 0``, angle below pi/2, and ``(1'v*)(1'v) <= (1'v*)^2``.
    """
    t.check_compatible(p)
    if not np.any(p.w != 0.0):
        raise DomainError("region check needs w != 0")
    s = t.v_star.sum()
    return bool(
        float(p.v @ t.v_star) > 0.0
        and angle(p.w, t.w_star) < math.pi / 2
        and s * p.v.sum() <= s * s
    )
