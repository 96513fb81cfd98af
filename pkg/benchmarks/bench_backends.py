"""Compare the numba and numpy backends on the two hot loops.

    python3 benchmarks/bench_backends.py [--samples N] [--iters K] [--repeat R]

Reports the best-of-R wall time per backend for one Monte Carlo block and for a
fixed-length coarse gradient descent run, and checks that both backends agree.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from stelab import DescentConfig, ModelParams, SampleBatch, TeacherParams, kernels, run


def best_time(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--iters", type=int, default=20_000)
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--n", type=int, default=6)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    t = TeacherParams.random(args.m, args.n, rng)
    p = ModelParams(rng.standard_normal(args.m), rng.standard_normal(args.n))
    z = SampleBatch(args.m, args.n, args.samples, seed=1).z_matrices
    cfg = DescentConfig(kind="crelu", eta=0.01, max_iters=args.iters, grad_tol=1e-300, record_every=args.iters)

    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    results = {}
    for name in ("numba", "numpy"):
        kernels.set_backend(name)
        if name == "numba":  # compile outside the timed region
            kernels.mc_block(z[:2], p.v, p.w, t.v_star, t.w_star)
            run(p, t, DescentConfig(kind="crelu", max_iters=2))
        mc_t, mc_out = best_time(lambda: kernels.mc_block(z, p.v, p.w, t.v_star, t.w_star), args.repeat)
        gd_t, gd_out = best_time(lambda: run(p, t, cfg), args.repeat)
        results[name] = (mc_t, gd_t, mc_out, gd_out)

    (mc_a, gd_a, mo_a, go_a), (mc_b, gd_b, mo_b, go_b) = results["numba"], results["numpy"]
    mc_diff = max(float(np.max(np.abs(a - b))) for a, b in zip(mo_a, mo_b))
    gd_diff = float(np.max(np.abs(go_a.final_params.v - go_b.final_params.v)))

    print(f"m={args.m} n={args.n} samples={args.samples} iters={args.iters} repeat={args.repeat}")
    print(f"{'kernel':<22}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    print(f"{'monte carlo block':<22}{mc_a:>12.4f}{mc_b:>12.4f}{mc_b / mc_a:>10.1f}{mc_diff:>14.2e}")
    print(f"{'coarse descent':<22}{gd_a:>12.4f}{gd_b:>12.4f}{gd_b / gd_a:>10.1f}{gd_diff:>14.2e}")


if __name__ == "__main__":
    main()
