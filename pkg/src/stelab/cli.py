"""``stelab`` command line: verify | landscape | descend | figure1 | instability | sweep.

Exit status is 0 iff every check of the requested experiment passed, 1 if some check
failed, and 2 for invalid input or an unwritable output path.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import COMMANDS, ExperimentSpec, render, run_experiment, write_result
from .model import DomainError

log = logging.getLogger("stelab")

_DEFAULT_DIMS = {"figure1": (2, 4)}


def _floats(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--m", type=int, default=None, help="hidden width (default 2)")
    common.add_argument("--n", type=int, default=None, help="filter length (default 3; 4 for figure1)")
    common.add_argument("--v-star", type=_floats, default=None, help="teacher second layer, e.g. 1,-1")
    common.add_argument("--w-star", type=_floats, default=None, help="teacher filter direction (normalized)")
    common.add_argument("--ste", choices=["identity", "relu", "crelu"], default=None)
    common.add_argument("--eta", type=float, default=None, help="step size (descend: omit to auto-halve)")
    common.add_argument("--samples", type=int, default=None, help="Monte Carlo sample count (verify)")
    common.add_argument("--iters", type=int, default=None, help="iteration budget")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"], default=None,
                        help="default: csv for descend/figure1/instability, json otherwise")
    common.add_argument("--tol", type=float, default=None, help="tolerance of the command's assertion")
    common.add_argument("--sizes", type=_ints, default=(10, 50, 1000), help="figure1 sample sizes")
    common.add_argument("--count", type=int, default=100, help="sweep: runs per estimator")
    common.add_argument("--region", action="store_true", help="sweep: start inside the global region")
    common.add_argument("--eps", type=float, default=0.0, help="instability: start perturbation radius")
    common.add_argument("--jobs", type=int, default=1, help="sweep: worker threads")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="stelab", description="Straight-through estimator experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def spec_from_args(args) -> ExperimentSpec:
    """Build the experiment spec; ``--v-star`` / ``--w-star`` fix m / n unless they conflict."""
    if args.v_star is not None and args.m is not None and len(args.v_star) != args.m:
        raise DomainError(f"--v-star has {len(args.v_star)} entries but --m is {args.m}")
    if args.w_star is not None and args.n is not None and len(args.w_star) != args.n:
        raise DomainError(f"--w-star has {len(args.w_star)} entries but --n is {args.n}")
    dm, dn = _DEFAULT_DIMS.get(args.command, (2, 3))
    fmt = args.format or ("csv" if args.command in ("descend", "figure1", "instability") else "json")
    return ExperimentSpec(
        command=args.command, m=args.m or dm, n=args.n or dn, seed=args.seed, ste=args.ste, eta=args.eta,
        samples=args.samples, iters=args.iters, output_path=args.out, format=fmt, v_star=args.v_star,
        w_star=args.w_star, tol=args.tol, sizes=args.sizes, count=args.count, region=args.region,
        eps=args.eps, jobs=args.jobs,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="stelab: %(levelname)s: %(message)s")
    try:
        spec = spec_from_args(args)
        result = run_experiment(spec)
    except (DomainError, ValueError) as exc:
        log.error("%s", exc)
        return 2
    for w in result.warnings:
        log.warning("%s", w)
    try:
        if spec.output_path:
            write_result(result, spec.output_path)
        else:
            sys.stdout.write(render(result))
    except OSError as exc:
        log.error("cannot write output: %s", exc)
        return 2
    log.info("%s: %s", spec.command, "pass" if result.passed else "FAIL")
    return 0 if result.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
