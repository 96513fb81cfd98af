"""Hot loops: per-sample Monte Carlo quantities and the coarse gradient descent loop.

Each kernel has a numba version and a numpy version.  The numba path is used when numba
imports and ``STELAB_DISABLE_NUMBA`` is unset (or ``0``); set it to ``1`` to force the
pure-numpy path.  Both paths are importable regardless, so they can be compared.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .gaussian import GL_NODES, GL_WEIGHTS, XI_ARG_CAP, XI_INF

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

__all__ = [
    "HAVE_NUMBA",
    "use_numba",
    "set_backend",
    "backend",
    "mc_block",
    "mc_block_numpy",
    "mc_block_numba",
    "pq_numba",
    "descend_numba",
]

HAVE_NUMBA = numba is not None
if HAVE_NUMBA and "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    # probe OpenMP before TBB: an old system TBB only produces a warning and is skipped anyway
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
_env = os.environ.get("STELAB_DISABLE_NUMBA", "").strip().lower()
_USE_NUMBA = HAVE_NUMBA and _env in ("", "0", "false", "no", "off")


def use_numba() -> bool:
    return _USE_NUMBA


def backend() -> str:
    return "numba" if _USE_NUMBA else "numpy"


def set_backend(name: str) -> None:
    """Switch between ``"numba"`` and ``"numpy"`` at runtime (tests, benchmarks)."""
    global _USE_NUMBA
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        _USE_NUMBA = True
    elif name == "numpy":
        _USE_NUMBA = False
    else:
        raise ValueError(f"unknown backend {name!r}")


# ---------------------------------------------------------------------------
# Monte Carlo: per-sample loss, v-gradient and coarse w-gradients.
# Output layout: loss (B,), grad_v (B, m), coarse (3, B, n) in kind-code order
# identity=0, relu=1, crelu=2.


def mc_block_numpy(z, v, w, v_star, w_star):
    zw = z @ w
    zws = z @ w_star
    act = (zw > 0.0).astype(np.float64)
    act_star = (zws > 0.0).astype(np.float64)
    resid = act @ v - act_star @ v_star
    loss = 0.5 * resid * resid
    grad_v = act * resid[:, None]
    band = ((zw > 0.0) & (zw < 1.0)).astype(np.float64)
    coarse = np.empty((3, z.shape[0], z.shape[2]))
    for code, mask in enumerate((None, act, band)):
        weights = v[None, :] if mask is None else mask * v[None, :]
        coarse[code] = np.einsum("bij,bi->bj", z, weights) * resid[:, None]
    return loss, grad_v, coarse


if HAVE_NUMBA:

    @numba.njit(cache=True, parallel=True)
    def _mc_block_nb(z, v, w, v_star, w_star, loss, grad_v, coarse):
        nb, m, n = z.shape
        for b in numba.prange(nb):
            pred = 0.0
            label = 0.0
            for i in range(m):
                s = 0.0
                ss = 0.0
                for j in range(n):
                    s += z[b, i, j] * w[j]
                    ss += z[b, i, j] * w_star[j]
                if s > 0.0:
                    pred += v[i]
                if ss > 0.0:
                    label += v_star[i]
            r = pred - label
            loss[b] = 0.5 * r * r
            for j in range(n):
                coarse[0, b, j] = 0.0
                coarse[1, b, j] = 0.0
                coarse[2, b, j] = 0.0
            for i in range(m):
                s = 0.0
                for j in range(n):
                    s += z[b, i, j] * w[j]
                on = s > 0.0
                grad_v[b, i] = r if on else 0.0
                inband = on and s < 1.0
                for j in range(n):
                    t = z[b, i, j] * v[i]
                    coarse[0, b, j] += t
                    if on:
                        coarse[1, b, j] += t
                    if inband:
                        coarse[2, b, j] += t
            for j in range(n):
                coarse[0, b, j] *= r
                coarse[1, b, j] *= r
                coarse[2, b, j] *= r


def mc_block_numba(z, v, w, v_star, w_star):
    nb, m, n = z.shape
    loss = np.empty(nb)
    grad_v = np.empty((nb, m))
    coarse = np.empty((3, nb, n))
    _mc_block_nb(np.ascontiguousarray(z), v, w, v_star, w_star, loss, grad_v, coarse)
    return loss, grad_v, coarse


def mc_block(z, v, w, v_star, w_star):
    """Per-sample loss, true v-gradient and the three coarse w-gradients for a block of inputs."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 2:
        z = z[None]
    if _USE_NUMBA:
        return mc_block_numba(z, v, w, v_star, w_star)
    return mc_block_numpy(z, v, w, v_star, w_star)


# ---------------------------------------------------------------------------
# Scalar analytic kernels used inside the compiled descent loop.  They mirror
# model.py / gaussian.py / ste.py; tests check agreement between the two.

if HAVE_NUMBA:
    _SQRT2 = math.sqrt(2.0)
    _INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

    @numba.njit(cache=True)
    def _xi_nb(x):
        return XI_INF * math.erf(x / _SQRT2) - x * math.exp(-0.5 * x * x)

    @numba.njit(cache=True)
    def _radial_nb(upper, w_norm, use_cos, nodes, weights):
        if upper <= 0.0:
            return 0.0
        # panel edges: 0, asin(2^k / |w|) and mirrors inside (0, upper), upper
        edges = np.empty(2 * 80 + 2)
        k = 0
        edges[k] = 0.0
        k += 1
        c = 1.0 / 16.0
        while c < w_norm:
            u = math.asin(c / w_norm)
            if 0.0 < u < upper:
                edges[k] = u
                k += 1
            u2 = math.pi - u
            if 0.0 < u2 < upper:
                edges[k] = u2
                k += 1
            c *= 2.0
        edges[k] = upper
        k += 1
        e = np.sort(edges[:k])
        total = 0.0
        for s in range(k - 1):
            a = e[s]
            b = e[s + 1]
            if b <= a:
                continue
            half = 0.5 * (b - a)
            mid = 0.5 * (a + b)
            acc = 0.0
            for i in range(nodes.size):
                u = half * nodes[i] + mid
                su = math.sin(u)
                arg = XI_ARG_CAP
                if w_norm * su * XI_ARG_CAP > 1.0:
                    arg = 1.0 / (w_norm * su)
                g = math.cos(u) if use_cos else su
                acc += weights[i] * g * _xi_nb(arg)
            total += half * acc
        return total

    @numba.njit(cache=True)
    def pq_numba(theta, w_norm, nodes, weights):
        p = _radial_nb(math.pi - theta, w_norm, False, nodes, weights) / (2.0 * math.pi)
        q = _radial_nb(min(theta, math.pi - theta), w_norm, True, nodes, weights) / (2.0 * math.pi)
        return p, q

    @numba.njit(cache=True)
    def _angle_nb(w, ws):
        nw = math.sqrt(np.dot(w, w))
        nr = math.sqrt(np.dot(ws, ws))
        d2 = 0.0
        s2 = 0.0
        for j in range(w.size):
            a = w[j] / nw
            b = ws[j] / nr
            d2 += (a - b) * (a - b)
            s2 += (a + b) * (a + b)
        return 2.0 * math.atan2(math.sqrt(d2), math.sqrt(s2))

    @numba.njit(cache=True)
    def _loss_nb(v, vs, theta):
        sv = v.sum()
        ss = vs.sum()
        vav = np.dot(v, v) + sv * sv
        cross = (1.0 - 2.0 * theta / math.pi) * np.dot(v, vs) + sv * ss
        sas = np.dot(vs, vs) + ss * ss
        return 0.125 * (vav - 2.0 * cross + sas)

    @numba.njit(cache=True)
    def _grads_nb(kind, v, w, vs, ws, theta, nodes, weights, gv, gw):
        sv = v.sum()
        ss = vs.sum()
        lam = 1.0 - 2.0 * theta / math.pi
        for i in range(v.size):
            gv[i] = 0.25 * (v[i] + sv) - 0.25 * (lam * vs[i] + ss)
        wn = math.sqrt(np.dot(w, w))
        vv = np.dot(v, vs)
        if kind == 0:
            a = np.dot(v, v) / wn
            for j in range(w.size):
                gw[j] = _INV_SQRT_2PI * (a * w[j] - vv * ws[j])
            return
        h = np.dot(v, v) + sv * sv - sv * ss + vv
        # bisector unit(w_hat + w*), zero when antipodal
        bn2 = 0.0
        for j in range(w.size):
            t = w[j] / wn + ws[j]
            bn2 += t * t
        bn = math.sqrt(bn2)
        inv_bn = 1.0 / bn if bn >= 1e-9 else 0.0
        if kind == 1:
            c = math.cos(0.5 * theta) * vv
            for j in range(w.size):
                bis = (w[j] / wn + ws[j]) * inv_bn
                gw[j] = _INV_SQRT_2PI * (0.5 * h * w[j] / wn - c * bis)
            return
        p0, _ = pq_numba(0.0, wn, nodes, weights)
        if theta == 0.0:
            a_hat = p0
            a_bis = 0.0
        elif theta == math.pi:
            a_hat = 0.0
            a_bis = 0.0
        else:
            pt, qt = pq_numba(theta, wn, nodes, weights)
            csc = 1.0 / math.sin(0.5 * theta)
            cot = math.cos(0.5 * theta) * csc
            a_hat = pt - cot * qt
            a_bis = csc * qt
        for j in range(w.size):
            bis = (w[j] / wn + ws[j]) * inv_bn
            joint = a_hat * w[j] / wn + a_bis * bis
            gw[j] = 0.5 * p0 * h * w[j] / wn - vv * joint

    @numba.njit(cache=True, nogil=True)
    def _descend_nb(
        v0, w0, vs, ws, kind, eta, max_iters, grad_tol, w_floor, record_every, nodes, weights,
        rec_iter, rec_loss, rec_gv, rec_gw, rec_theta, rec_wn, rec_v,
    ):
        v = v0.copy()
        w = w0.copy()
        gv = np.empty(v.size)
        gw = np.empty(w.size)
        converged = False
        monotone = True
        degenerate = False
        diverged = False
        floor_violated = False
        max_increase = 0.0
        iters = 0
        nrec = 0
        theta = _angle_nb(w, ws)
        loss = _loss_nb(v, vs, theta)
        wn = math.sqrt(np.dot(w, w))
        min_wn = wn
        t = 0
        while True:
            _grads_nb(kind, v, w, vs, ws, theta, nodes, weights, gv, gw)
            ngv = math.sqrt(np.dot(gv, gv))
            ngw = math.sqrt(np.dot(gw, gw))
            if max(ngv, ngw) <= grad_tol:
                converged = True
            last = converged or t >= max_iters
            if t % record_every == 0 or last:
                rec_iter[nrec] = t
                rec_loss[nrec] = loss
                rec_gv[nrec] = ngv
                rec_gw[nrec] = ngw
                rec_theta[nrec] = theta
                rec_wn[nrec] = wn
                rec_v[nrec, :] = v
                nrec += 1
            if last:
                break
            for i in range(v.size):
                v[i] -= eta * gv[i]
            for j in range(w.size):
                w[j] -= eta * gw[j]
            t += 1
            iters = t
            wn = math.sqrt(np.dot(w, w))
            if not math.isfinite(wn):
                diverged = True
                monotone = False
                break
            if wn == 0.0:
                degenerate = True
                break
            if wn < min_wn:
                min_wn = wn
            if wn < w_floor:
                floor_violated = True
            theta = _angle_nb(w, ws)
            new_loss = _loss_nb(v, vs, theta)
            if not math.isfinite(new_loss):
                diverged = True
                monotone = False
                break
            inc = new_loss - loss
            if inc > max_increase:
                max_increase = inc
            if inc > 1e-12:
                monotone = False
            loss = new_loss
        return v, w, iters, converged, monotone, max_increase, min_wn, floor_violated, degenerate, diverged, nrec

    def descend_numba(v0, w0, vs, ws, kind_code, eta, max_iters, grad_tol, w_floor, record_every):
        """Run the compiled descent loop; returns final state, flags and record columns."""
        cap = max_iters // record_every + 2
        m, n = v0.size, w0.size
        rec = {
            "iter": np.empty(cap, dtype=np.int64),
            "loss": np.empty(cap),
            "grad_v_norm": np.empty(cap),
            "coarse_grad_w_norm": np.empty(cap),
            "theta": np.empty(cap),
            "w_norm": np.empty(cap),
            "v": np.empty((cap, m)),
        }
        out = _descend_nb(
            np.ascontiguousarray(v0, dtype=np.float64), np.ascontiguousarray(w0, dtype=np.float64),
            np.ascontiguousarray(vs, dtype=np.float64), np.ascontiguousarray(ws, dtype=np.float64),
            int(kind_code), float(eta), int(max_iters), float(grad_tol), float(w_floor),
            int(record_every), GL_NODES, GL_WEIGHTS,
            rec["iter"], rec["loss"], rec["grad_v_norm"], rec["coarse_grad_w_norm"],
            rec["theta"], rec["w_norm"], rec["v"],
        )
        v, w, iters, converged, monotone, max_inc, min_wn, floor_violated, degenerate, diverged, nrec = out
        rec = {k: a[:nrec].copy() for k, a in rec.items()}
        flags = dict(
            iterations=int(iters), converged=bool(converged), monotone=bool(monotone),
            max_loss_increase=float(max_inc), min_w_norm=float(min_wn),
            w_floor_violated=bool(floor_violated), degenerate=bool(degenerate), diverged=bool(diverged),
        )
        return v, w, flags, rec

else:  # pragma: no cover
    mc_block_numba = None
    pq_numba = None
    descend_numba = None
