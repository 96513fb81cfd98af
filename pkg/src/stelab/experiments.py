"""Reproducible experiments built on the library, with CSV/JSON emitters.

Every experiment takes an ``ExperimentSpec`` and returns an ``ExperimentResult``
holding flat records (one per CSV row), a summary, warnings and an overall pass flag.
All randomness derives from ``spec.seed``; sub-experiments use child generators keyed
by fixed offsets, so the same spec always produces byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .gaussian import gauss_capped_moments, gauss_indicator_moments
from .landscape import LIMIT_POINTS, PointClass, critical_points, saddle_condition, stationarity_residual
from .model import DomainError, ModelParams, TeacherParams, angle, population_grad, population_loss
from .montecarlo import SampleBatch, estimate_expectation, model_quantities
from .optimizer import (
    MONOTONE_SLACK, TRAJECTORY_COLUMNS, DescentConfig, RunOutcome, check_global_region, run, run_auto,
)
from .ste import SteKind, expected_coarse_grad

__all__ = [
    "COMMANDS",
    "ExperimentSpec",
    "ExperimentResult",
    "Figure1Curve",
    "child_rng",
    "total_variation",
    "excess_variation",
    "cmd_verify",
    "cmd_landscape",
    "cmd_descend",
    "cmd_figure1",
    "cmd_instability",
    "cmd_sweep",
    "run_experiment",
    "render",
    "write_result",
]

COMMANDS = ("verify", "landscape", "descend", "figure1", "instability", "sweep")

# child-seed offsets; fixed so that adding an experiment never shifts another's streams
OFFSET_TEACHER = 1
OFFSET_INIT = 2
OFFSET_MC = 3
OFFSET_MOMENTS = 4
OFFSET_FIGURE1 = 5
OFFSET_SWEEP = 6

LOW_POWER_SAMPLES = 10_000
SIGMAS = 4.0


def child_rng(seed: int, offset: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(offset), *map(int, keys)))
    return np.random.Generator(np.random.Philox(ss))


def child_seed(seed: int, offset: int) -> int:
    return (int(seed) + int(offset)) % 2**64


def total_variation(values) -> float:
    """Sum of absolute consecutive differences."""
    values = np.asarray(values, dtype=np.float64)
    return float(np.abs(np.diff(values)).sum()) if values.size > 1 else 0.0


def excess_variation(values) -> float:
    """Total variation beyond that of a down-then-up curve with the same ends and minimum.

    Zero for a curve that decreases to its minimum and then increases; positive
    contributions come only from wiggles.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return 0.0
    i = int(np.argmin(values))
    down, up = np.diff(values[: i + 1]), np.diff(values[i:])
    return float(2.0 * (down[down > 0].sum() - up[up < 0].sum()))


@dataclass(frozen=True)
class ExperimentSpec:
    command: str
    m: int = 2
    n: int = 3
    seed: int = 42
    ste: SteKind | None = None
    eta: float | None = None
    samples: int | None = None
    iters: int | None = None
    output_path: str | None = None
    format: str = "json"
    v_star: tuple | None = None
    w_star: tuple | None = None
    tol: float | None = None
    sizes: tuple = (10, 50, 1000)
    count: int = 100
    region: bool = False
    eps: float = 0.0
    jobs: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.ste is not None:
            object.__setattr__(self, "ste", SteKind.parse(self.ste))
        if self.v_star is not None:
            object.__setattr__(self, "v_star", tuple(float(x) for x in self.v_star))
            object.__setattr__(self, "m", len(self.v_star))
        if self.w_star is not None:
            object.__setattr__(self, "w_star", tuple(float(x) for x in self.w_star))
            object.__setattr__(self, "n", len(self.w_star))
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if self.m < 1 or self.n < 2:
            raise DomainError("need m >= 1 and n >= 2")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.samples is not None and self.samples < 2:
            raise DomainError("samples must be >= 2")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.iters is not None and self.iters < 1:
            raise ValueError("iters must be >= 1")
        if self.count < 0:
            raise ValueError("count must be >= 0")
        if any(s < 2 for s in self.sizes):
            raise DomainError("figure1 sample sizes must be >= 2")
        if self.eps < 0:
            raise ValueError("eps must be >= 0")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def echo(self) -> dict:
        d = asdict(self)
        d["ste"] = None if self.ste is None else self.ste.value
        d["v_star"] = None if self.v_star is None else list(self.v_star)
        d["w_star"] = None if self.w_star is None else list(self.w_star)
        d["sizes"] = list(self.sizes)
        return d


@dataclass
class ExperimentResult:
    command: str
    spec: ExperimentSpec
    columns: list
    records: list
    summary: dict
    passed: bool
    warnings: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Figure1Curve:
    sample_size: int
    etas: np.ndarray
    losses: np.ndarray


# ---------------------------------------------------------------------------
# shared setup


def _teacher(spec: ExperimentSpec, default_v_star=None) -> TeacherParams:
    rng = child_rng(spec.seed, OFFSET_TEACHER)
    if spec.v_star is not None:
        v_star = np.array(spec.v_star)
    elif default_v_star is not None:
        v_star = np.asarray(default_v_star, dtype=np.float64)
    else:
        v_star = rng.standard_normal(spec.m)
    w_dir = np.array(spec.w_star) if spec.w_star is not None else rng.standard_normal(spec.n)
    return TeacherParams.normalized(v_star, w_dir)


def _random_start(rng: np.random.Generator, m: int, n: int) -> ModelParams:
    return ModelParams(rng.standard_normal(m), rng.standard_normal(n))


def _point_at_angle(t: TeacherParams, theta: float) -> np.ndarray:
    """A unit vector at angle ``theta`` from ``w_star`` (fixed orthogonal direction)."""
    ws = t.w_star
    e = np.zeros(ws.size)
    e[int(np.argmin(np.abs(ws)))] = 1.0
    u = e - (e @ ws) * ws
    u /= np.linalg.norm(u)
    return math.cos(theta) * ws + math.sin(theta) * u


def _check_record(name: str, mean: float, closed: float, se: float) -> dict:
    diff = mean - closed
    if se > 0:
        z = abs(diff) / se
    else:
        z = 0.0 if diff == 0 else math.inf
    return {"name": name, "mean": mean, "closed_form": closed, "std_error": se, "z": z, "pass": z <= SIGMAS}


def _vector_checks(prefix: str, est_mean, est_se, closed) -> list:
    return [
        _check_record(f"{prefix}[{i}]", float(a), float(c), float(s))
        for i, (a, c, s) in enumerate(zip(np.atleast_1d(est_mean), np.atleast_1d(closed), np.atleast_1d(est_se)))
    ]


# ---------------------------------------------------------------------------
# verify


def cmd_verify(spec: ExperimentSpec) -> ExperimentResult:
    """Closed forms against Monte Carlo means: loss, v-gradient, the three expected
    coarse gradients and the Gaussian indicator / band moments."""
    samples = spec.samples if spec.samples is not None else 10**6
    t = _teacher(spec)
    p = _random_start(child_rng(spec.seed, OFFSET_INIT), t.m, t.n)
    m, n = t.m, t.n

    records = []
    est = estimate_expectation(model_quantities(p, t), SampleBatch(m, n, samples, child_seed(spec.seed, OFFSET_MC)))
    grad = population_grad(p, t)
    closed = [np.array([population_loss(p, t)]), grad.grad_v]
    names = ["loss", "grad_v"]
    for kind in SteKind:
        closed.append(expected_coarse_grad(kind, p, t).grad_w)
        names.append(f"coarse_grad_w[{kind.value}]")
    start = 0
    for name, c in zip(names, closed):
        stop = start + c.size
        records += _vector_checks(name, est.mean[start:stop], est.std_error[start:stop], c)
        start = stop

    w, w_t = p.w, t.w_star
    ind = gauss_indicator_moments(w, w_t)
    cap = gauss_capped_moments(w, w_t)

    def moments(z):
        z = z[:, 0, :]
        a, b = z @ w, z @ w_t
        one = (a > 0).astype(np.float64)
        both = one * (b > 0)
        band = ((a > 0) & (a < 1)).astype(np.float64)
        band_joint = band * (b > 0)
        return np.concatenate(
            [one[:, None], both[:, None], z * one[:, None], z * both[:, None], z * band[:, None], z * band_joint[:, None]],
            axis=1,
        )

    mom = estimate_expectation(moments, SampleBatch(1, n, samples, child_seed(spec.seed, OFFSET_MOMENTS)))
    parts = [
        ("prob_single", np.array([ind.prob_single])),
        ("prob_joint", np.array([ind.prob_joint])),
        ("vec_single", ind.vec_single),
        ("vec_joint", ind.vec_joint),
        ("vec_band", cap.vec_band),
        ("vec_band_joint", cap.vec_band_joint),
    ]
    start = 0
    for name, c in parts:
        stop = start + c.size
        records += _vector_checks(name, mom.mean[start:stop], mom.std_error[start:stop], c)
        start = stop

    warnings = []
    if samples < LOW_POWER_SAMPLES:
        warnings.append(
            f"low power: {samples} samples (< {LOW_POWER_SAMPLES}); standard errors are too wide for a meaningful check"
        )
    n_pass = sum(r["pass"] for r in records)
    summary = {
        "checks": len(records),
        "passed": n_pass,
        "failed": len(records) - n_pass,
        "samples": samples,
        "sigmas": SIGMAS,
        "low_power": samples < LOW_POWER_SAMPLES,
        "max_z": max(r["z"] for r in records),
    }
    return ExperimentResult(
        "verify", spec, ["name", "mean", "closed_form", "std_error", "z", "pass"], records, summary,
        n_pass == len(records), warnings,
        extra={"teacher": _params_dict(t), "point": _params_dict(p)},
    )


def _params_dict(x) -> dict:
    if isinstance(x, TeacherParams):
        return {"v_star": x.v_star.tolist(), "w_star": x.w_star.tolist()}
    return {"v": x.v.tolist(), "w": x.w.tolist()}


# ---------------------------------------------------------------------------
# landscape


def landscape_points(t: TeacherParams) -> list:
    """``(name, ModelParams)`` for every critical point, with ``||w|| = 1``."""
    rep = critical_points(t)
    pts = [("global", ModelParams(rep.global_v, t.w_star)), ("spurious", ModelParams(rep.spurious_v, -t.w_star))]
    if rep.has_saddle:
        pts.append(("saddle", ModelParams(rep.saddle_v, _point_at_angle(t, rep.saddle_theta))))
    return pts


def cmd_landscape(spec: ExperimentSpec) -> ExperimentResult:
    """Critical points plus stationarity residuals of every estimator at each of them.

    Pass iff the Relu and CappedRelu residuals vanish (``<= tol``, default 1e-8) at every
    critical point; the Identity residual is reported but not asserted.
    """
    tol = spec.tol if spec.tol is not None else 1e-8
    t = _teacher(spec, default_v_star=np.ones(spec.m))
    rep = critical_points(t)
    records = []
    ok = True
    for name, pt in landscape_points(t):
        for kind in SteKind:
            res = stationarity_residual(pt, t, kind)
            asserted = kind is not SteKind.IDENTITY
            passed = (res <= tol) if asserted else None
            ok = ok and (passed is not False)
            records.append({
                "point": name, "ste": kind.value, "theta": angle(pt.w, t.w_star),
                "loss": population_loss(pt, t), "residual": res, "asserted": asserted, "pass": passed,
            })
    warnings = []
    if not rep.spurious_is_local_min:
        warnings.append(
            "(1'v*)^2 >= (m+1)/2 ||v*||^2: no saddle exists and the angle-pi critical point is not a local minimum"
        )
    summary = {"tol": tol, "report": rep.as_dict(), "all_stationary": ok}
    return ExperimentResult(
        "landscape", spec, ["point", "ste", "theta", "loss", "residual", "asserted", "pass"], records, summary, ok,
        warnings, extra={"teacher": _params_dict(t)},
    )


# ---------------------------------------------------------------------------
# descend


def _trajectory_rows(out: RunOutcome, m: int, ste: str | None = None) -> list:
    tr = out.trajectory
    rows = []
    for i in range(len(tr)):
        row = {} if ste is None else {"ste": ste}
        for col in TRAJECTORY_COLUMNS:
            val = getattr(tr, col)[i]
            row[col] = int(val) if col == "iter" else float(val)
        for j in range(m):
            row[f"v_{j}"] = float(tr.v[i, j])
        rows.append(row)
    return rows


def _outcome_summary(out: RunOutcome, t: TeacherParams) -> dict:
    fp = out.final_params
    return {
        "classification": out.classification.value,
        "converged": out.converged,
        "monotone": out.monotone,
        "iterations": out.iterations,
        "eta": out.eta,
        "max_loss_increase": out.max_loss_increase,
        "min_w_norm": out.min_w_norm,
        "w_floor_violated": out.w_floor_violated,
        "degenerate": out.degenerate,
        "diverged": out.diverged,
        "final_loss": None if fp is None else population_loss(fp, t),
        "final_theta": None if fp is None else angle(fp.w, t.w_star),
        "final_v": None if fp is None else fp.v.tolist(),
        "final_w": None if out.final_w is None else np.asarray(out.final_w).tolist(),
    }


def cmd_descend(spec: ExperimentSpec) -> ExperimentResult:
    """One coarse-gradient-descent run from a seeded random start.

    With ``--eta`` the step size is fixed; without it the step is auto-halved from 1.
    Pass iff the run converged without hitting ``w = 0``, and, for Relu/CappedRelu,
    the loss never increased.
    """
    kind = spec.ste or SteKind.RELU
    t = _teacher(spec)
    p0 = _random_start(child_rng(spec.seed, OFFSET_INIT), t.m, t.n)
    cfg = DescentConfig(kind=kind, eta=spec.eta or 1.0, max_iters=spec.iters or 100_000,
                        grad_tol=spec.tol or 1e-7)
    out = run(p0, t, cfg) if spec.eta is not None else run_auto(p0, t, cfg)
    passed = out.converged and not (out.degenerate or out.diverged) and (kind is SteKind.IDENTITY or out.monotone)
    warnings = []
    if out.w_floor_violated:
        warnings.append(f"||w|| fell below the floor {cfg.w_norm_floor:g} (min {out.min_w_norm:.3g})")
    cols = ["iter", *TRAJECTORY_COLUMNS[1:], *(f"v_{j}" for j in range(t.m))]
    return ExperimentResult(
        "descend", spec, cols, _trajectory_rows(out, t.m), _outcome_summary(out, t), passed, warnings,
        extra={"teacher": _params_dict(t), "start": _params_dict(p0), "ste": kind.value},
    )


# ---------------------------------------------------------------------------
# figure1


FIGURE1_GRID = 60


def figure1_curve(p: ModelParams, t: TeacherParams, kind: SteKind, z: np.ndarray) -> Figure1Curve:
    """Empirical loss on batch ``z`` after one step along the batch's own negative coarse gradient."""
    from .kernels import mc_block

    loss0, gv, coarse = mc_block(z, p.v, p.w, t.v_star, t.w_star)
    g_v = gv.mean(axis=0)
    g_w = coarse[kind.code].mean(axis=0)
    # the grid reaches a displacement |eta * (g_v, g_w)| of twice |w|
    g_norm = math.sqrt(float(g_v @ g_v + g_w @ g_w))
    eta_max = 2.0 * float(np.linalg.norm(p.w)) / g_norm if g_norm > 0 else 1.0
    etas = np.concatenate([[0.0], np.geomspace(eta_max * 1e-3, eta_max, FIGURE1_GRID - 1)])
    losses = np.empty(etas.size)
    losses[0] = float(loss0.mean())
    for i in range(1, etas.size):
        v = p.v - etas[i] * g_v
        w = p.w - etas[i] * g_w
        losses[i] = float(mc_block(z, v, w, t.v_star, t.w_star)[0].mean())
    return Figure1Curve(int(z.shape[0]), etas, losses)


def cmd_figure1(spec: ExperimentSpec) -> ExperimentResult:
    """Loss-vs-step-size curves for each sample size.

    Defaults: m=2, n=4, v*=[1,1], random unit w*, Relu, sizes 10/50/1000.  Pass iff
    every curve dips below its starting value and, when both the smallest and largest
    sizes are present, the largest size has the smaller total variation.
    """
    kind = spec.ste or SteKind.RELU
    t = _teacher(spec, default_v_star=np.ones(spec.m))
    p = _random_start(child_rng(spec.seed, OFFSET_INIT), t.m, t.n)
    curves = []
    records = []
    checks = []
    for k, size in enumerate(spec.sizes):
        z = SampleBatch(t.m, t.n, size, child_seed(spec.seed, OFFSET_FIGURE1), stream=k).z_matrices
        c = figure1_curve(p, t, kind, z)
        curves.append(c)
        for e, l in zip(c.etas, c.losses):
            records.append({"sample_size": size, "eta": float(e), "loss": float(l)})
        checks.append({
            "name": f"dips_below_start[N={size}]",
            "start_loss": float(c.losses[0]),
            "min_loss": float(c.losses.min()),
            "total_variation": total_variation(c.losses),
            "excess_variation": excess_variation(c.losses),
            "pass": bool(c.losses.min() < c.losses[0]),
        })
    if len(curves) >= 2:
        small = min(curves, key=lambda c: c.sample_size)
        large = max(curves, key=lambda c: c.sample_size)
        if small.sample_size != large.sample_size:
            tv_s, tv_l = total_variation(small.losses), total_variation(large.losses)
            checks.append({
                "name": f"smoother[N={large.sample_size} vs N={small.sample_size}]",
                "total_variation_small": tv_s,
                "total_variation_large": tv_l,
                "pass": bool(tv_l < tv_s),
            })
    ok = all(c["pass"] for c in checks)
    return ExperimentResult(
        "figure1", spec, ["sample_size", "eta", "loss"], records, {"checks": checks, "ste": kind.value}, ok,
        extra={"teacher": _params_dict(t), "start": _params_dict(p), "curves": curves},
    )


# ---------------------------------------------------------------------------
# instability


def instability_warnings(t: TeacherParams) -> list:
    s = float(t.v_star.sum())
    out = []
    if t.m == 1:
        out.append("m = 1: the identity coarse gradient vanishes at the spurious point, nothing to repel")
    if s == 0.0:
        out.append("1'v* = 0: the identity coarse gradient vanishes at the spurious point, nothing to repel")
    if not saddle_condition(t.v_star):
        out.append(
            "(1'v*)^2 >= (m+1)/2 ||v*||^2: the angle-pi critical point is not a local minimum, so there is "
            "no good minimum to be repelled from and the identity loss need not rise"
        )
    return out


def cmd_instability(spec: ExperimentSpec) -> ExperimentResult:
    """Start at (or within ``eps`` of) the spurious critical point and run every estimator.

    Pass iff the Identity loss rises above its starting value (by more than the
    rounding slack ``MONOTONE_SLACK``) within ``iters``
    steps while the Relu and CappedRelu runs stay stationary (residual ``<= tol``,
    default 1e-8, at every iterate).
    """
    eta = spec.eta if spec.eta is not None else 1e-3
    iters = spec.iters if spec.iters is not None else 1000
    tol = spec.tol if spec.tol is not None else 1e-8
    t = _teacher(spec, default_v_star=np.ones(spec.m))
    rep = critical_points(t)
    v0 = rep.spurious_v.copy()
    w0 = -t.w_star.copy()
    if spec.eps > 0:
        rng = child_rng(spec.seed, OFFSET_INIT)
        d = rng.standard_normal(t.m + t.n)
        d *= spec.eps / np.linalg.norm(d)
        v0 = v0 + d[: t.m]
        w0 = w0 + d[t.m :]
    p0 = ModelParams(v0, w0)
    loss0 = population_loss(p0, t)

    records = []
    summary = {"start_loss": loss0, "eta": eta, "iters": iters, "tol": tol, "runs": {}}
    ok = True
    for kind in SteKind:
        cfg = DescentConfig(kind=kind, eta=eta, max_iters=iters, grad_tol=1e-300)
        out = run(p0, t, cfg)
        tr = out.trajectory
        records += _trajectory_rows(out, t.m, ste=kind.value)
        run_sum = _outcome_summary(out, t)
        run_sum["max_loss_above_start"] = float(tr.loss.max() - loss0)
        run_sum["max_residual"] = float(np.maximum(tr.grad_v_norm, tr.coarse_grad_w_norm).max())
        if kind is SteKind.IDENTITY:
            above = np.nonzero(tr.loss > loss0 + MONOTONE_SLACK)[0]
            run_sum["first_iter_above_start"] = int(tr.iter[above[0]]) if above.size else None
            run_sum["pass"] = bool(above.size)
        else:
            run_sum["pass"] = run_sum["max_residual"] <= tol
        ok = ok and run_sum["pass"]
        summary["runs"][kind.value] = run_sum
    cols = ["ste", "iter", *TRAJECTORY_COLUMNS[1:], *(f"v_{j}" for j in range(t.m))]
    return ExperimentResult(
        "instability", spec, cols, records, summary, ok, instability_warnings(t),
        extra={"teacher": _params_dict(t), "start": _params_dict(p0)},
    )


# ---------------------------------------------------------------------------
# sweep


def _sweep_one(spec: ExperimentSpec, kind: SteKind, k: int) -> dict:
    rng = child_rng(spec.seed, OFFSET_SWEEP, kind.code, k)
    if spec.v_star is not None:
        t = _teacher(spec)
    else:
        t = TeacherParams.random(spec.m, spec.n, rng)
    while True:
        p0 = _random_start(rng, t.m, t.n)
        if not spec.region or check_global_region(p0, t):
            break
    cfg = DescentConfig(kind=kind, eta=spec.eta or 1.0, max_iters=spec.iters or 100_000,
                        grad_tol=spec.tol or 1e-7, record_every=spec.iters or 100_000)
    out = run_auto(p0, t, cfg)
    row = {"ste": kind.value, "run": k}
    s = _outcome_summary(out, t)
    for key in ("classification", "converged", "monotone", "iterations", "eta", "max_loss_increase",
                "min_w_norm", "w_floor_violated", "degenerate", "final_loss", "final_theta"):
        row[key] = s[key]
    if kind is SteKind.IDENTITY:
        row["pass"] = None
    elif spec.region:
        row["pass"] = out.classification is PointClass.GLOBAL_MIN
    else:
        row["pass"] = (not out.converged) or out.classification in LIMIT_POINTS
    return row


def cmd_sweep(spec: ExperimentSpec) -> ExperimentResult:
    """``count`` seeded runs per estimator (``--ste`` picks one, default Relu and CappedRelu).

    Without ``--v-star`` every run draws its own random teacher.  With ``region`` the
    starts are rejection-sampled inside the global-convergence region and every
    Relu/CappedRelu run must end at the global minimum; otherwise every converged run
    must end at a critical point.
    """
    kinds = [spec.ste] if spec.ste is not None else [SteKind.RELU, SteKind.CAPPED_RELU]
    jobs = [(kind, k) for kind in kinds for k in range(spec.count)]
    if spec.jobs > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(spec.jobs) as ex:
            records = list(ex.map(lambda a: _sweep_one(spec, *a), jobs))
    else:
        records = [_sweep_one(spec, *a) for a in jobs]
    summary = {}
    for kind in kinds:
        rows = [r for r in records if r["ste"] == kind.value]
        classes = {}
        for r in rows:
            classes[r["classification"]] = classes.get(r["classification"], 0) + 1
        its = [r["iterations"] for r in rows]
        summary[kind.value] = {
            "runs": len(rows),
            "classifications": dict(sorted(classes.items())),
            "converged": sum(r["converged"] for r in rows),
            "monotone": sum(r["monotone"] for r in rows),
            "w_floor_violated": sum(r["w_floor_violated"] for r in rows),
            "iterations_median": float(np.median(its)) if its else None,
            "iterations_max": max(its) if its else None,
            "failed": sum(r["pass"] is False for r in rows),
        }
    ok = all(r["pass"] is not False for r in records)
    cols = ["ste", "run", "classification", "converged", "monotone", "iterations", "eta", "max_loss_increase",
            "min_w_norm", "w_floor_violated", "degenerate", "final_loss", "final_theta", "pass"]
    return ExperimentResult("sweep", spec, cols, records, summary, ok)


# ---------------------------------------------------------------------------
# dispatch and output

_DISPATCH = {
    "verify": cmd_verify,
    "landscape": cmd_landscape,
    "descend": cmd_descend,
    "figure1": cmd_figure1,
    "instability": cmd_instability,
    "sweep": cmd_sweep,
}


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    return _DISPATCH[spec.command](spec)


def _csv_value(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _json_clean(x):
    if isinstance(x, dict):
        return {str(k): _json_clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_json_clean(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, Figure1Curve):
        return {"sample_size": x.sample_size, "etas": _json_clean(x.etas), "losses": _json_clean(x.losses)}
    return x


def render(result: ExperimentResult, fmt: str | None = None) -> str:
    """Serialize a result as CSV (header + one row per record) or a JSON report."""
    fmt = fmt or result.spec.format
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(result.columns)
        for rec in result.records:
            writer.writerow([_csv_value(rec.get(c)) for c in result.columns])
        return buf.getvalue()
    extra = {k: v for k, v in result.extra.items() if k != "curves"}
    doc = {
        "command": result.command,
        "spec": result.spec.echo(),
        "checks": result.records,
        "summary": {"pass": result.passed, **result.summary, **extra},
        "warnings": result.warnings,
    }
    return json.dumps(_json_clean(doc), indent=2, allow_nan=False) + "\n"


def write_result(result: ExperimentResult, path: str, fmt: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render(result, fmt))
