"""Pre-packaged verification experiments and their CSV reports.

Each experiment builds instances, drives optimizers through the logging
oracle, measures T_eps / gradient floors / bound compliance, and returns
a ``BoundsReport`` whose verdicts are recomputable offline from the
stored measurements.  Reports are reproducible bit-for-bit from their
seeds (the RNG is pinned) and never assert theorem-scale randomized
claims: any run whose ambient dimension is below the proven requirement
carries a RELAXED flag in the CSV header.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .adversary import consistency_error, run_resisting
from .errors import DomainError, VacuousBoundError
from .instances import (
    DistanceInstance,
    Instance,
    PlainInstance,
    RotatedInstance,
    ScalingParams,
    bump_value,
    default_radius,
    fbar_grad,
    fbar_value,
    scaling_for,
)
from .optimizers import OptimizerConfig, run_optimizer
from .oracles import Trace, check_zero_respecting, query, t_eps
from .randmat import (
    SeededRng,
    sample_orthogonal,
    sphere_marginal_tail,
    sphere_tail_bound,
    sphere_tail_exact_2d,
)

_FMT = "%.17g"


@dataclass(frozen=True)
class Criterion:
    name: str
    passed: bool
    measured: float
    threshold: float
    direction: str = "<="  # how measured relates to threshold when passing


@dataclass
class BoundsReport:
    """Measurements plus derived verdicts for one experiment."""

    experiment: str
    params: dict
    seeds: list[int] = field(default_factory=list)
    relaxed: bool = False
    runs: list[dict] = field(default_factory=list)
    criteria: list[Criterion] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)
    runtime_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria)

    def add_criterion(
        self, name: str, passed: bool, measured: float, threshold: float, direction: str = "<="
    ) -> None:
        self.criteria.append(Criterion(name, bool(passed), float(measured), float(threshold), direction))

    def summary_lines(self) -> list[str]:
        lines = [f"experiment {self.experiment}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.criteria:
            status = "pass" if c.passed else "FAIL"
            lines.append(
                f"  [{status}] {c.name}: measured {c.measured:.6g} {c.direction} {c.threshold:.6g}"
            )
        for n in self.notices:
            lines.append(f"  [notice] {n}")
        return lines

    def to_csv(self, path_or_file) -> None:
        close = False
        fh = path_or_file
        if isinstance(path_or_file, (str, bytes)):
            fh = open(path_or_file, "w", newline="")
            close = True
        try:
            params = ";".join(f"{k}={_cell(v)}" for k, v in sorted(self.params.items()))
            fh.write(f"# experiment={self.experiment}\n")
            fh.write(f"# params={params}\n")
            fh.write(f"# relaxed={'true' if self.relaxed else 'false'}\n")
            fh.write(f"# seed={','.join(str(s) for s in self.seeds)}\n")
            for n in self.notices:
                fh.write(f"# notice={n}\n")
            for c in self.criteria:
                fh.write(
                    f"# criterion={c.name};passed={'true' if c.passed else 'false'};"
                    f"measured={_cell(c.measured)};threshold={_cell(c.threshold)}\n"
                )
            cols = sorted({k for run in self.runs for k in run})
            fh.write(",".join(["run"] + cols) + "\n")
            for i, run in enumerate(self.runs, start=1):
                fh.write(",".join([str(i)] + [_cell(run.get(k, "")) for k in cols]) + "\n")
        finally:
            if close:
                fh.close()


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return _FMT % v
    if v is None:
        return "none"
    return str(v)


def parse_report_csv(path_or_file) -> dict:
    """Round-trip reader for the report CSV schema."""
    close = False
    fh = path_or_file
    if isinstance(path_or_file, (str, bytes)):
        fh = open(path_or_file, "r", newline="")
        close = True
    try:
        meta: dict = {"criteria": [], "notices": []}
        rows: list[dict] = []
        header: Optional[list[str]] = None
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                key = key.strip()
                if key == "criterion":
                    meta["criteria"].append(val)
                elif key == "notice":
                    meta["notices"].append(val)
                else:
                    meta[key] = val
                continue
            cells = line.split(",")
            if header is None:
                header = cells
                continue
            rows.append(dict(zip(header, cells)))
        meta["rows"] = rows
        return meta
    finally:
        if close:
            fh.close()


def _map_jobs(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Kernel verification sweep
# ---------------------------------------------------------------------------


def verify_kernels(fast: bool = False, k_max: int = kernels.DEFAULT_K_MAX) -> BoundsReport:
    """Dead zone, product gap, range, sup-norm and derivative-consistency sweeps."""
    t0 = time.perf_counter()
    rep = BoundsReport(experiment="kernels", params={"fast": fast, "k_max": k_max})
    n_range = 20_001 if fast else 100_001
    n_pair = 50 if fast else 100

    xs_dead = np.linspace(-5.0, 0.5, 2001)
    worst_dead = 0.0
    for k in range(1, k_max + 1):
        worst_dead = max(worst_dead, float(np.max(np.abs(kernels.psi_deriv(xs_dead, k)))))
    rep.add_criterion("dead-zone-exact", worst_dead == 0.0, worst_dead, 0.0)

    xg = np.linspace(1.0, 10.0, n_pair)
    yg = np.linspace(-0.9999, 0.9999, 10_000 // n_pair if not fast else n_pair)
    prod = np.outer(kernels.psi(xg), kernels.phi_deriv(yg, 1))
    rep.params["product_pairs"] = int(prod.size)
    rep.add_criterion("product-gap>1", bool(np.all(prod > 1.0)), float(prod.min()), 1.0, ">")

    xs = np.linspace(-50.0, 50.0, n_range)
    psi_v = kernels.psi(xs)
    psi_d = kernels.psi_deriv(xs, 1)
    phi_v = kernels.phi(xs)
    phi_d = kernels.phi_deriv(xs, 1)
    range_ok = (
        bool(np.all((psi_v >= 0) & (psi_v < kernels.PSI_SUP)))
        and bool(np.all((psi_d >= 0) & (psi_d <= kernels.PSI_DERIV_SUP)))
        and bool(np.all((phi_v > 0) & (phi_v < kernels.PHI_SUP)))
        and bool(np.all((phi_d > 0) & (phi_d <= kernels.PHI_DERIV_SUP)))
    )
    rep.add_criterion("range-bounds", range_ok, float(psi_v.max()), kernels.PSI_SUP, "<")

    sup_ok = True
    worst_ratio = 0.0
    for k in range(1, k_max + 1):
        for kind, fn in (("psi", kernels.psi_deriv), ("phi", kernels.phi_deriv)):
            bound = kernels.kernel_bound(kind, k)
            ratio = float(np.max(np.abs(fn(xs, k)))) / bound
            worst_ratio = max(worst_ratio, ratio)
            sup_ok = sup_ok and ratio <= 1.0
    rep.add_criterion("sup-norm-bounds", sup_ok, worst_ratio, 1.0)

    fd_err = kernel_fd_error(k_max=k_max, fast=fast)
    rep.add_criterion("fd-consistency", fd_err <= 1e-6, fd_err, 1e-6)

    rep.runs.append(
        {
            "dead_zone_max": worst_dead,
            "product_min": float(prod.min()),
            "sup_ratio_max": worst_ratio,
            "fd_rel_err_max": fd_err,
        }
    )
    rep.runtime_s = time.perf_counter() - t0
    return rep


def kernel_fd_error(k_max: int = kernels.DEFAULT_K_MAX, fast: bool = False) -> float:
    """Worst sup-normalized error of order-k derivatives vs central differences.

    Errors are measured relative to the grid supremum of each order: the
    high orders reach magnitudes ~1e11 and their pointwise relative error
    is ill-conditioned at zero crossings (the difference quotient inherits
    the scale of the much larger neighbouring derivative).  A wrong
    recurrence coefficient shows up at O(1) on this scale.
    """
    h = 1e-5
    n = 400 if fast else 1600
    worst = 0.0
    xs_psi = np.linspace(-2.0, 3.0, n)
    xs_psi = xs_psi[np.abs(xs_psi - 0.5) >= 1e-3]
    xs_phi = np.linspace(-4.0, 4.0, n)
    for k in range(1, k_max + 1):
        lower_psi = kernels.psi if k == 1 else (lambda v, kk=k: kernels.psi_deriv(v, kk - 1))
        lower_phi = kernels.phi if k == 1 else (lambda v, kk=k: kernels.phi_deriv(v, kk - 1))
        for xs, lower, upper in (
            (xs_psi, lower_psi, lambda v, kk=k: kernels.psi_deriv(v, kk)),
            (xs_phi, lower_phi, lambda v, kk=k: kernels.phi_deriv(v, kk)),
        ):
            fd = (lower(xs + h) - lower(xs - h)) / (2.0 * h)
            exact = upper(xs)
            sup = max(float(np.max(np.abs(exact))), 1e-9)
            worst = max(worst, float(np.max(np.abs(fd - exact))) / sup)
    return worst


# ---------------------------------------------------------------------------
# Deterministic lower bound
# ---------------------------------------------------------------------------


def exp_deterministic_lower_bound(
    p: int,
    delta: float,
    lip: float,
    eps: float,
    optimizer_configs: dict[str, OptimizerConfig] | None = None,
    ell: Optional[float] = None,
    horizon_factor: int = 100,
) -> BoundsReport:
    """Scaled chain instance vs every supplied zero-respecting optimizer.

    Asserts t_eps > T and a strict gradient floor over the first T queries;
    also records the iteration at which each optimizer eventually succeeds
    within the 100*T engineering horizon, when it does.
    """
    t0 = time.perf_counter()
    scaling = scaling_for("deterministic", p, delta, lip, eps, ell=ell)
    inst = scaling.plain_instance()
    T = scaling.T
    if optimizer_configs is None:
        optimizer_configs = default_optimizer_suite(lip, horizon_factor * T, eps)
    rep = BoundsReport(
        experiment="deterministic_lower_bound",
        params={
            "p": p,
            "delta": delta,
            "lip": lip,
            "eps": eps,
            "ell": scaling.ell,
            "T": T,
            "sigma": scaling.sigma,
            "multiplier": scaling.multiplier,
            "horizon": horizon_factor * T,
        },
    )
    for name, config in optimizer_configs.items():
        trace = run_optimizer(config, inst)
        hit = t_eps(trace, eps)
        first_T = trace.grad_norms[:T]
        min_grad = float(first_T.min()) if first_T.size else math.inf
        zr = check_zero_respecting(trace, inst, p=min(p, 2))
        rep.runs.append(
            {
                "optimizer": name,
                "t_eps": hit,
                "min_grad_first_T": min_grad,
                "zero_respecting": zr is None,
                "horizon": config.max_iters,
            }
        )
        rep.add_criterion(f"{name}-t_eps>{T}", hit is None or hit > T, -1 if hit is None else hit, T, ">")
        rep.add_criterion(f"{name}-grad-floor", min_grad > eps, min_grad, eps, ">")
        rep.add_criterion(f"{name}-zero-respecting", zr is None, 0 if zr is None else zr[0], 0)
    rep.runtime_s = time.perf_counter() - t0
    return rep


def default_optimizer_suite(L: float, max_iters: int, eps: float) -> dict[str, OptimizerConfig]:
    """The shipped zero-respecting optimizers, started from the origin."""
    return {
        "gd": OptimizerConfig(kind="gd", L=L, max_iters=max_iters, eps=eps),
        "cubic_newton": OptimizerConfig(kind="cubic_newton", L=L, max_iters=max_iters, eps=eps),
    }


# ---------------------------------------------------------------------------
# Randomized experiment
# ---------------------------------------------------------------------------


def exp_randomized(
    T: int,
    d: int,
    n_seeds: int,
    optimizer: OptimizerConfig,
    base_seed: int = 0,
    pass_fraction: float = 0.9,
    grad_floor: float = 0.5,
    jobs: int = 1,
) -> BoundsReport:
    """Monte Carlo gradient floor for the rotated instance under random U.

    Per seed: draw Haar U and a Gaussian start (independent streams), run
    the randomized optimizer for exactly T queries, record the minimum
    gradient norm.  Reports the fraction of seeds keeping the floor.
    """
    if d < 2 * T:
        raise DomainError(f"relaxed precondition requires d >= 2T, got d={d}, T={T}")
    t0 = time.perf_counter()
    theorem_d = math.ceil(52.0 * T * default_radius(T) ** 2 * math.log(4.0 * T**2))
    relaxed = d < theorem_d
    rep = BoundsReport(
        experiment="randomized_lower_bound",
        params={
            "T": T,
            "d": d,
            "n_seeds": n_seeds,
            "grad_floor": grad_floor,
            "pass_fraction": pass_fraction,
            "theorem_dim": theorem_d,
            "optimizer": optimizer.kind,
            "noise_scale": optimizer.noise_scale,
            "L": optimizer.L,
        },
        seeds=[base_seed],
        relaxed=relaxed,
    )
    if relaxed:
        rep.notices.append(
            f"RELAXED: d={d} below the proven requirement d>={theorem_d}; "
            "empirical evidence only, never a theorem-scale check"
        )

    def one_seed(k: int) -> dict:
        inst_rng = SeededRng(base_seed, stream=2 * k)
        algo_rng = SeededRng(base_seed, stream=2 * k + 1)
        U = sample_orthogonal(d, T, inst_rng)
        inst = RotatedInstance(T=T, U=U, seed=base_seed)
        gen = algo_rng.generator()
        x0 = gen.standard_normal(d)
        config = OptimizerConfig(
            kind=optimizer.kind,
            L=optimizer.L,
            max_iters=T,
            eps=0.0,
            noise_scale=optimizer.noise_scale,
            seed=int(gen.integers(2**63)) if optimizer.kind == "perturbed_gd" else None,
        )
        trace = run_optimizer(config, inst, x0=x0)
        min_grad = float(trace.grad_norms.min())
        return {"stream": k, "min_grad": min_grad, "pass": min_grad > grad_floor}

    rep.runs = _map_jobs(one_seed, list(range(n_seeds)), jobs)
    frac = sum(1 for r in rep.runs if r["pass"]) / max(n_seeds, 1)
    rep.params["fraction"] = frac
    rep.add_criterion("pass-fraction", frac >= pass_fraction, frac, pass_fraction, ">=")
    rep.runtime_s = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# Distance experiment
# ---------------------------------------------------------------------------


def exp_distance(
    p: int,
    D: float,
    lip: float,
    eps: float,
    d: Optional[int] = None,
    n_samples: int = 10_000,
    n_seeds: int = 5,
    base_seed: int = 0,
    ell: Optional[float] = None,
    jobs: int = 1,
) -> BoundsReport:
    """Distance-bounded construction: hidden-minimum certificate + gradient floor.

    (a) the bump peak beats every bump-free sample, and every sample beating
    the bump-free floor lies within norm D of the origin; (b) randomized
    runs keep gradient norm above the scaled floor for T queries.
    """
    t0 = time.perf_counter()
    try:
        scaling = scaling_for("distance", p, D, lip, eps, ell=ell)
    except VacuousBoundError as exc:
        rep = BoundsReport(
            experiment="distance_lower_bound",
            params={"p": p, "D": D, "lip": lip, "eps": eps},
            notices=[f"vacuous: {exc}"],
        )
        rep.add_criterion("vacuous-notice", True, 0.0, 0.0)
        rep.runtime_s = time.perf_counter() - t0
        return rep

    T = scaling.T
    if d is None:
        d = max(2 * T, 8 * T)
    theorem_d = scaling.theorem_dim()
    relaxed = d < theorem_d
    rng = SeededRng(base_seed, stream=0)
    U = sample_orthogonal(d, T, rng)
    inst = scaling.distance_instance(U, seed=base_seed)
    rep = BoundsReport(
        experiment="distance_lower_bound",
        params={
            "p": p,
            "D": D,
            "lip": lip,
            "eps": eps,
            "ell": scaling.ell,
            "T": T,
            "sigma": scaling.sigma,
            "multiplier": scaling.multiplier,
            "d": d,
            "theorem_dim": theorem_d,
            "n_samples": n_samples,
        },
        seeds=[base_seed],
        relaxed=relaxed,
    )
    if relaxed:
        rep.notices.append(f"RELAXED: d={d} below proven requirement d>={theorem_d}")

    # (a) hidden-minimum certificate
    peak = 0.8 * D * U[:, -1]
    peak_value = inst.value(peak)
    gen = SeededRng(base_seed, stream=1).generator()
    scales = np.concatenate(
        [
            np.full(n_samples // 3, scaling.sigma * math.sqrt(T)),
            np.full(n_samples // 3, D),
            np.full(n_samples - 2 * (n_samples // 3), 10.0 * D),
        ]
    )
    outside_min = math.inf
    outside_min_norm = 0.0
    near_min_norms: list[float] = []
    # floor every bump-free point obeys: multiplier * (fbar(0) - 12 T)
    floor = scaling.multiplier * (fbar_value(T, np.zeros(T)) - 12.0 * T)
    for s in scales:
        x = s * gen.standard_normal(d) / math.sqrt(d)
        v = inst.value(x)
        b = bump_value(T, U.T @ x / D)
        if b == 0.0:
            if v < outside_min:
                outside_min = v
                outside_min_norm = float(np.linalg.norm(x))
        if v < floor:
            near_min_norms.append(float(np.linalg.norm(x)))
    rep.runs.append(
        {
            "peak_value": peak_value,
            "outside_min": outside_min,
            "outside_min_norm": outside_min_norm,
            "floor": floor,
            "n_below_floor": len(near_min_norms),
        }
    )
    rep.add_criterion("peak-beats-outside", peak_value < outside_min, peak_value, outside_min, "<")
    rep.add_criterion("peak-below-floor", peak_value < floor, peak_value, floor, "<")
    worst_norm = max(near_min_norms + [float(np.linalg.norm(peak))])
    rep.add_criterion("near-minimizers-within-D", worst_norm <= D, worst_norm, D)

    # (b) gradient floor for randomized runs
    floor_grad = scaling.gradient_floor()
    min_grads = []
    for k in range(n_seeds):
        algo_rng = SeededRng(base_seed, stream=100 + k)
        gen_k = algo_rng.generator()
        x0 = scaling.sigma * gen_k.standard_normal(d)
        config = OptimizerConfig(
            kind="perturbed_gd",
            L=max(lip, 1.0),
            max_iters=T,
            eps=0.0,
            noise_scale=0.1 * scaling.sigma,
            seed=int(gen_k.integers(2**63)),
        )
        trace = run_optimizer(config, inst, x0=x0)
        mg = float(trace.grad_norms.min())
        min_grads.append(mg)
        rep.runs.append({"stream": 100 + k, "min_grad": mg, "grad_floor": floor_grad})
    rep.add_criterion(
        "grad-floor-all-seeds", min(min_grads) > floor_grad, min(min_grads), floor_grad, ">"
    )
    rep.params["eps_floor_equiv"] = floor_grad
    rep.runtime_s = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# Derivative audit
# ---------------------------------------------------------------------------


def audit_points(dim: int, spread: float, n: int, gen: np.random.Generator) -> list[np.ndarray]:
    """Mixture exercising dead zones and active chain regions.

    Standard Gaussian, Gaussian scaled to radius ~spread, and coordinate-
    sparse points.
    """
    pts = []
    for i in range(n):
        kind = i % 3
        if kind == 0:
            pts.append(gen.standard_normal(dim))
        elif kind == 1:
            pts.append(spread * gen.standard_normal(dim) / math.sqrt(dim))
        else:
            x = np.zeros(dim)
            k = int(gen.integers(1, max(dim // 2, 2)))
            idx = gen.choice(dim, size=min(k, dim), replace=False)
            x[idx] = 2.0 * gen.standard_normal(idx.size)
            pts.append(x)
    return pts


def fd_gradient(fn: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fn(xp) - fn(xm)) / (2.0 * h)
    return g


def fd_hessian_from_grad(
    grad_fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    d = x.size
    H = np.zeros((d, d))
    for i in range(d):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        H[:, i] = (grad_fn(xp) - grad_fn(xm)) / (2.0 * h)
    return 0.5 * (H + H.T)


def exp_derivative_audit(
    instance: Instance,
    n_points: int = 100,
    orders: tuple[int, ...] = (1, 2),
    base_seed: int = 0,
) -> BoundsReport:
    """Finite-difference agreement plus value/gradient bound compliance."""
    t0 = time.perf_counter()
    gen = SeededRng(base_seed, stream=0).generator()
    T = instance.T
    dim = instance.dim
    spread = math.sqrt(T) * getattr(instance, "sigma", 1.0)
    pts = audit_points(dim, spread, n_points, gen)
    max_rel_grad = 0.0
    max_rel_hess = 0.0
    max_grad_ratio = 0.0
    min_value = math.inf
    for x in pts:
        g = instance.grad(x)
        fd = fd_gradient(instance.value, x)
        scale = np.maximum(np.abs(g), 1.0)
        max_rel_grad = max(max_rel_grad, float(np.max(np.abs(fd - g) / scale)))
        if 2 in orders and hasattr(instance, "hess") and instance.variant == "plain":
            H = instance.hess(x)
            fdH = fd_hessian_from_grad(instance.grad, x)
            hscale = max(1.0, float(np.max(np.abs(H))))
            max_rel_hess = max(max_rel_hess, float(np.max(np.abs(fdH - H)) / hscale))
        min_value = min(min_value, instance.value(x))
        if instance.variant == "plain":
            unscaled_grad = fbar_grad(T, np.asarray(x) / instance.sigma)
            max_grad_ratio = max(
                max_grad_ratio, float(np.linalg.norm(unscaled_grad)) / math.sqrt(T)
            )
    rep = BoundsReport(
        experiment="derivative_audit",
        params={
            "variant": instance.variant,
            "T": T,
            "dim": dim,
            "n_points": n_points,
            "orders": ";".join(str(o) for o in orders),
        },
        seeds=[base_seed],
    )
    rep.runs.append(
        {
            "max_rel_grad_err": max_rel_grad,
            "max_rel_hess_err": max_rel_hess,
            "max_grad_over_sqrtT": max_grad_ratio,
            "min_value": min_value,
        }
    )
    rep.add_criterion("grad-fd-agreement", max_rel_grad <= 1e-5, max_rel_grad, 1e-5)
    if 2 in orders and instance.variant == "plain":
        rep.add_criterion("hess-fd-agreement", max_rel_hess <= 1e-5, max_rel_hess, 1e-5)
    if instance.variant == "plain":
        rep.add_criterion("grad-norm-cap-23", max_grad_ratio <= 23.0, max_grad_ratio, 23.0)
        floor = -12.0 * T * instance.multiplier
        rep.add_criterion("value-floor-minus-12T", min_value > floor, min_value, floor, ">")
    rep.runtime_s = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# Adversary experiment
# ---------------------------------------------------------------------------


def make_algorithm(kind: str, dim: int, L: float = 1.0):
    """Deterministic query callbacks for the resisting-oracle experiments.

    'gd_origin' starts at 0; 'gd_dense_start' starts at the normalized
    all-ones vector; 'constant_dense' repeats that vector forever.
    """
    dense = np.ones(dim) / math.sqrt(dim)

    def gd_origin(history):
        if not history:
            return np.zeros(dim)
        x, reply = history[-1]
        return x - reply.gradient / L

    def gd_dense(history):
        if not history:
            return dense.copy()
        x, reply = history[-1]
        return x - reply.gradient / L

    def constant(history):
        return dense.copy()

    table = {"gd_origin": gd_origin, "gd_dense_start": gd_dense, "constant_dense": constant}
    if kind not in table:
        raise DomainError(f"unknown adversary algorithm {kind!r}; options {sorted(table)}")
    return table[kind]


def exp_adversary(
    algorithm_id: str,
    base_T: int,
    T0: int,
    L: float = 1.0,
    eps: float = 1.0,
    order: int = 1,
    base_seed: int = 0,
) -> BoundsReport:
    """Resisting-oracle run: zero-respecting pullback, consistency, and t_eps."""
    t0 = time.perf_counter()
    base = PlainInstance(T=base_T)
    algo = make_algorithm(algorithm_id, base_T + T0, L=L)
    result = run_resisting(algo, base, T0, order=order, seed=base_seed)
    zr = check_zero_respecting(result.inner_trace, base, p=order)
    cons = consistency_error(result, base)
    outer_hit = t_eps(result.outer_trace, eps)
    rep = BoundsReport(
        experiment="adversary",
        params={
            "algorithm": algorithm_id,
            "base_T": base_T,
            "T0": T0,
            "L": L,
            "eps": eps,
            "order": order,
            "U_shape": f"{base_T + T0}x{base_T}",
        },
        seeds=[base_seed],
    )
    rep.runs.append(
        {
            "t_eps_outer": outer_hit,
            "consistency_err": cons,
            "zero_respecting": zr is None,
            "horizon_exhausted": result.horizon_exhausted,
            "support_size": len(result.state.support),
        }
    )
    bound = min(base_T, T0)
    rep.add_criterion(
        "outer-t_eps>min(T,T0)",
        outer_hit is None or outer_hit > bound,
        -1 if outer_hit is None else outer_hit,
        bound,
        ">",
    )
    rep.add_criterion("inner-zero-respecting", zr is None, 0 if zr is None else zr[0], 0)
    rep.add_criterion("derivative-consistency", cons <= 1e-8, cons, 1e-8)
    rep.runtime_s = time.perf_counter() - t0
    return rep


# ---------------------------------------------------------------------------
# Sphere concentration check
# ---------------------------------------------------------------------------


def exp_sphere_concentration(
    cases: tuple[tuple[int, float], ...] = ((100, 0.3), (1000, 0.15)),
    n_samples: int = 100_000,
    base_seed: int = 0,
) -> BoundsReport:
    """Empirical sphere-marginal tails vs the 2 exp(-d a^2/2) envelope, plus 2-D exact."""
    t0 = time.perf_counter()
    rep = BoundsReport(
        experiment="sphere_concentration",
        params={"n_samples": n_samples, "cases": ";".join(f"{d}:{a}" for d, a in cases)},
        seeds=[base_seed],
    )
    for i, (d, alpha) in enumerate(cases):
        p_hat = sphere_marginal_tail(d, alpha, n_samples, SeededRng(base_seed, stream=i))
        bound = sphere_tail_bound(d, alpha)
        slack = 3.0 * math.sqrt(max(p_hat * (1 - p_hat), bound * (1 - bound)) / n_samples)
        ok = p_hat <= bound + slack
        rep.runs.append({"d": d, "alpha": alpha, "p_hat": p_hat, "bound": bound, "slack": slack})
        rep.add_criterion(f"tail-d{d}-a{alpha}", ok, p_hat, bound + slack)
    # exact 2-D marginal
    alpha2 = 0.5
    p2 = sphere_marginal_tail(2, alpha2, n_samples, SeededRng(base_seed, stream=len(cases)))
    exact = sphere_tail_exact_2d(alpha2)
    slack2 = 3.0 * math.sqrt(exact * (1 - exact) / n_samples)
    rep.runs.append({"d": 2, "alpha": alpha2, "p_hat": p2, "bound": exact, "slack": slack2})
    rep.add_criterion("exact-2d-marginal", abs(p2 - exact) <= slack2, abs(p2 - exact), slack2)
    rep.runtime_s = time.perf_counter() - t0
    return rep
