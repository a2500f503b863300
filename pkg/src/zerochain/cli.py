"""Command-line front end: build instances, run optimizers, verify claims, emit CSV.

Exit codes are a stable contract for CI: 0 pass, 1 verification failure,
2 usage error.  All randomized commands demand an explicit --seed; there
is no wall-clock seeding anywhere.  Output is CSV only (gnuplot-ready
column order is documented in the README); no plotting.
"""

from __future__ import annotations

import argparse
import math
import sys
from typing import Optional

import numpy as np

from . import experiments as exps
from .errors import UsageError, ZerochainError
from .instances import (
    PlainInstance,
    RotatedInstance,
    load_instance,
    scaling_for,
    smoothness_constant,
    smoothness_constant_rotated,
)
from .optimizers import OptimizerConfig, run_optimizer
from .oracles import Trace, t_eps
from .randmat import SeededRng, sample_orthogonal

SUITES = ("kernels", "instances", "adversary", "randomized", "distance", "all")


def read_config_file(path: str) -> dict[str, str]:
    """Parse a UTF-8 `key = value` config file; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def apply_config(
    subparser: argparse.ArgumentParser, args: argparse.Namespace, argv: list[str]
) -> argparse.Namespace:
    """Let config-file values fill in flags not passed explicitly on the line."""
    if not getattr(args, "config", None):
        return args
    config = read_config_file(args.config)
    known = {a.dest: a for a in subparser._actions}

    def given_explicitly(action) -> bool:
        for opt in action.option_strings:
            if opt in argv or any(tok.startswith(opt + "=") for tok in argv):
                return True
        return False

    for key, raw in config.items():
        if key not in known or key in ("help", "config", "command"):
            raise UsageError(f"unknown config key {key!r}")
        action = known[key]
        if given_explicitly(action):
            continue  # explicit flag beats config
        if isinstance(action, argparse._StoreTrueAction):
            setattr(args, key, raw.lower() in ("1", "true", "yes", "on"))
        elif action.type is not None:
            setattr(args, key, action.type(raw))
        else:
            setattr(args, key, raw)
    return args


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="zerochain",
        description="Hard-instance construction, optimal methods, and bound verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    info = sub.add_parser("instance-info", help="print the derived scaling for a variant")
    info.add_argument("--variant", choices=("det", "rand", "dist"), required=True)
    info.add_argument("--p", type=int, required=True)
    info.add_argument("--delta", type=float, help="value budget (det/rand)")
    info.add_argument("--dist", type=float, help="distance budget D (dist)")
    info.add_argument("--lipschitz", type=float, required=True)
    info.add_argument("--eps", type=float, required=True)
    info.add_argument("--ell", type=float, default=None, help="construction constant override")
    info.add_argument("--config", default=None)

    run = sub.add_parser("run", help="run one optimizer on one instance, write a trace CSV")
    run.add_argument("--instance-file", default=None)
    run.add_argument("--variant", choices=("plain", "rotated"), default="plain")
    run.add_argument("--T", type=int, default=None)
    run.add_argument("--d", type=int, default=None)
    run.add_argument("--sigma", type=float, default=1.0)
    run.add_argument("--multiplier", type=float, default=1.0)
    run.add_argument("--instance-seed", type=int, default=0, help="seed for the rotated U")
    run.add_argument("--optimizer", required=True)
    run.add_argument("--L", type=float, default=1.0)
    run.add_argument("--max-iters", type=int, default=None, help="default 100*T")
    run.add_argument("--eps", type=float, default=1.0)
    run.add_argument("--noise-scale", type=float, default=0.1)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None)
    run.add_argument("--write-points", action="store_true")
    run.add_argument("--config", default=None)

    ver = sub.add_parser("verify", help="run a verification suite; exit 0 iff all pass")
    ver.add_argument("--suite", choices=SUITES, required=True)
    ver.add_argument("--fast", action="store_true")
    ver.add_argument("--T", type=int, default=5)
    ver.add_argument("--d", type=int, default=4000)
    ver.add_argument("--seeds", type=int, default=50)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--jobs", type=int, default=1)
    ver.add_argument("--out", default=None)
    ver.add_argument("--config", default=None)

    adv = sub.add_parser("adversary", help="resisting-oracle run against a deterministic method")
    adv.add_argument(
        "--algorithm",
        choices=("gd_origin", "gd_dense_start", "constant_dense"),
        default="gd_dense_start",
    )
    adv.add_argument("--T", type=int, default=15)
    adv.add_argument("--T0", type=int, default=30)
    adv.add_argument("--L", type=float, default=1.0)
    adv.add_argument("--eps", type=float, default=1.0)
    adv.add_argument("--order", type=int, choices=(1, 2), default=1)
    adv.add_argument("--seed", type=int, default=0)
    adv.add_argument("--out", default=None)
    adv.add_argument("--config", default=None)

    aud = sub.add_parser("audit", help="finite-difference and bound audit of an instance")
    aud.add_argument("--variant", choices=("plain", "rotated"), default="plain")
    aud.add_argument("--T", type=int, default=8)
    aud.add_argument("--d", type=int, default=None)
    aud.add_argument("--points", type=int, default=100)
    aud.add_argument("--orders", default="1,2")
    aud.add_argument("--seed", type=int, default=0)
    aud.add_argument("--out", default=None)
    aud.add_argument("--config", default=None)

    return parser, {
        "instance-info": info,
        "run": run,
        "verify": ver,
        "adversary": adv,
        "audit": aud,
    }


def cmd_instance_info(args) -> int:
    variant = {"det": "deterministic", "rand": "randomized", "dist": "distance"}[args.variant]
    if variant == "distance":
        if args.dist is None:
            raise UsageError("--dist is required for --variant dist")
        budget = args.dist
    else:
        if args.delta is None:
            raise UsageError("--delta is required for --variant det/rand")
        budget = args.delta
    if args.eps <= 0:
        raise UsageError("--eps must be positive")
    scaling = scaling_for(variant, args.p, budget, args.lipschitz, args.eps, ell=args.ell)
    print(f"variant: {variant}")
    print(f"p: {scaling.p}")
    print(f"ell: {scaling.ell:.17g}")
    print(f"sigma: {scaling.sigma:.17g}")
    print(f"T: {scaling.T}")
    print(f"multiplier: {scaling.multiplier:.17g}")
    if variant == "deterministic":
        print(f"dimension: {scaling.T}  (adversarial embedding uses {2 * scaling.T + 1})")
    else:
        theorem_d = scaling.theorem_dim()
        print(f"theorem-scale dimension: {theorem_d}")
        print(f"suggested relaxed dimension: {160 * scaling.T ** 2}")
        print(
            "note: runs below the theorem-scale dimension are RELAXED "
            "(empirical evidence, not a theorem check)"
        )
    return 0


def _default_ell(variant: str, p: int) -> float:
    return smoothness_constant(p) if variant == "det" else smoothness_constant_rotated(p)


def cmd_run(args) -> int:
    if args.optimizer not in ("gd", "cubic_newton", "perturbed_gd"):
        raise UsageError(f"invalid optimizer {args.optimizer!r}")
    if args.optimizer == "perturbed_gd" and args.seed is None:
        raise UsageError("perturbed_gd requires an explicit --seed (reproducibility policy)")
    if args.instance_file:
        inst = load_instance(args.instance_file)
    else:
        if args.T is None:
            raise UsageError("--T is required when no --instance-file is given")
        if args.variant == "plain":
            inst = PlainInstance(T=args.T, sigma=args.sigma, multiplier=args.multiplier)
        else:
            d = args.d if args.d is not None else 2 * args.T
            U = sample_orthogonal(d, args.T, SeededRng(args.instance_seed))
            inst = RotatedInstance(
                T=args.T, U=U, sigma=args.sigma, multiplier=args.multiplier,
                seed=args.instance_seed,
            )
    max_iters = args.max_iters if args.max_iters is not None else 100 * inst.T
    config = OptimizerConfig(
        kind=args.optimizer,
        L=args.L,
        max_iters=max_iters,
        eps=args.eps,
        noise_scale=args.noise_scale if args.optimizer == "perturbed_gd" else 0.0,
        seed=args.seed,
    )
    trace = run_optimizer(config, inst)
    hit = t_eps(trace, args.eps)
    if args.out:
        trace.to_csv(args.out, include_points=args.write_points)
    print(f"queries: {len(trace)}")
    print(f"t_eps: {hit if hit is not None else 'none'}")
    return 0


def _suite_reports(args) -> list:
    reports = []
    suite = args.suite
    fast = args.fast
    if suite in ("kernels", "all"):
        reports.append(exps.verify_kernels(fast=fast))
    if suite in ("instances", "all"):
        reports.append(
            exps.exp_derivative_audit(
                PlainInstance(T=8), n_points=30 if fast else 100, base_seed=args.seed
            )
        )
        reports.append(
            exps.exp_deterministic_lower_bound(
                p=1,
                delta=120.0,
                lip=smoothness_constant(1),
                eps=1.0,
                horizon_factor=10 if fast else 100,
            )
        )
        reports.append(exps.exp_sphere_concentration(
            n_samples=20_000 if fast else 100_000, base_seed=args.seed))
    if suite in ("adversary", "all"):
        reports.append(
            exps.exp_adversary("gd_dense_start", base_T=15, T0=30, base_seed=args.seed)
        )
    if suite in ("randomized", "all"):
        n_seeds = max(8, args.seeds // 5) if fast else args.seeds
        config = OptimizerConfig(
            kind="perturbed_gd", L=1.0, max_iters=args.T, eps=0.0, noise_scale=0.1, seed=args.seed
        )
        reports.append(
            exps.exp_randomized(
                T=args.T, d=args.d, n_seeds=n_seeds, optimizer=config,
                base_seed=args.seed, jobs=args.jobs,
            )
        )
    if suite in ("distance", "all"):
        lip = smoothness_constant_rotated(1)
        reports.append(
            exps.exp_distance(
                p=1, D=2.0, lip=lip, eps=0.05, base_seed=args.seed,
                n_samples=2000 if fast else 10_000, jobs=args.jobs,
            )
        )
    return reports


def cmd_verify(args) -> int:
    reports = _suite_reports(args)
    all_pass = True
    for rep in reports:
        for line in rep.summary_lines():
            print(line)
        all_pass = all_pass and rep.passed
    if args.out:
        with open(args.out, "w", newline="") as fh:
            for rep in reports:
                rep.to_csv(fh)
    print(f"suite {args.suite}: {'PASS' if all_pass else 'FAIL'}")
    return 0 if all_pass else 1


def cmd_adversary(args) -> int:
    rep = exps.exp_adversary(
        args.algorithm, base_T=args.T, T0=args.T0, L=args.L, eps=args.eps,
        order=args.order, base_seed=args.seed,
    )
    for line in rep.summary_lines():
        print(line)
    if args.out:
        rep.to_csv(args.out)
    return 0 if rep.passed else 1


def cmd_audit(args) -> int:
    orders = tuple(int(tok) for tok in args.orders.split(",") if tok)
    if args.variant == "plain":
        inst = PlainInstance(T=args.T)
    else:
        d = args.d if args.d is not None else 2 * args.T
        U = sample_orthogonal(d, args.T, SeededRng(args.seed))
        inst = RotatedInstance(T=args.T, U=U, seed=args.seed)
    rep = exps.exp_derivative_audit(inst, n_points=args.points, orders=orders, base_seed=args.seed)
    for line in rep.summary_lines():
        print(line)
    if args.out:
        rep.to_csv(args.out)
    return 0 if rep.passed else 1


def main(argv: Optional[list[str]] = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser, subparsers = build_parser()
    try:
        args = parser.parse_args(argv)
        args = apply_config(subparsers[args.command], args, list(argv))
        handler = {
            "instance-info": cmd_instance_info,
            "run": cmd_run,
            "verify": cmd_verify,
            "adversary": cmd_adversary,
            "audit": cmd_audit,
        }[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except ZerochainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
