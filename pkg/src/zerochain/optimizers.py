"""Step rules and drivers: gradient descent, cubic-regularized Newton, perturbed GD.

The regularized family minimizes, at each iterate, the order-p Taylor
model in the displacement s plus L/(p+1)! * ||s||^(p+1).  For p = 1 that
is gradient descent with step 1/L; for p = 2 the model is

    <g, s> + s^T H s / 2 + L ||s||^3 / 6,

whose exact global minimizer satisfies (H + lam I) s = -g with
lam = L ||s|| / 2 and H + lam I psd.  We solve it by eigendecomposition
plus safeguarded Newton on the secular equation, with explicit handling
of the hard case (gradient orthogonal to the bottom eigenspace).

Cubic steps are solved on the exact nonzero pattern of (g, H): rows that
are identically zero cannot appear in the minimizer (any mass there only
inflates the cubic term), and restricting keeps undiscovered chain
coordinates at exact floating-point zero, matching the method's
zero-respecting behaviour instead of leaking eigensolver roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, SolverError
from .instances import Instance
from .oracles import Trace, query
from .randmat import SeededRng

SECULAR_TOL = 1e-10
HARD_CASE_TOL = 1e-10
MAX_SECULAR_ITERS = 200

OPTIMIZER_KINDS = ("gd", "cubic_newton", "perturbed_gd")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str
    L: float
    max_iters: int
    eps: float
    noise_scale: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise DomainError(f"unknown optimizer kind {self.kind!r}")
        if self.L <= 0:
            raise DomainError("L must be positive")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if self.eps < 0:
            raise DomainError("eps must be >= 0")
        if self.kind == "perturbed_gd" and self.seed is None:
            raise DomainError("perturbed_gd requires an explicit seed")


@dataclass(frozen=True)
class CubicSubproblemResult:
    step: np.ndarray
    lam: float
    model_decrease: float
    hard_case: bool


def gd_step(x: np.ndarray, grad: np.ndarray, L: float) -> np.ndarray:
    """One gradient-descent step with step size 1/L."""
    if L <= 0:
        raise DomainError("L must be positive")
    return np.asarray(x, dtype=float) - np.asarray(grad, dtype=float) / L


def _model_value(g, H, L, s) -> float:
    return float(g @ s + 0.5 * s @ (H @ s) + L / 6.0 * np.linalg.norm(s) ** 3)


def cubic_subproblem(g, H, L: float) -> CubicSubproblemResult:
    """Exact global minimizer of <g,s> + s^T H s / 2 + L ||s||^3 / 6."""
    if L <= 0:
        raise DomainError("L must be positive")
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    n = g.shape[0]
    if H.shape != (n, n):
        raise DomainError("H must be square and match g")
    if not np.allclose(H, H.T, atol=1e-12, rtol=0.0):
        raise DomainError("H must be symmetric")

    w, Q = np.linalg.eigh(H)
    ghat = Q.T @ g
    lam_min = float(w[0])
    lam_lo = max(0.0, -lam_min)
    gnorm = float(np.linalg.norm(g))

    # trivial stationary case
    if gnorm == 0.0 and lam_min >= 0.0:
        return CubicSubproblemResult(np.zeros(n), 0.0, 0.0, False)

    spectrum_scale = max(1.0, float(np.max(np.abs(w))))
    min_space = w <= lam_min + 1e-12 * spectrum_scale
    g_min_norm = float(np.linalg.norm(ghat[min_space]))

    def s_norm(lam: float, pinv: bool = False) -> float:
        denom = w + lam
        if pinv:
            return float(np.linalg.norm(ghat[~min_space] / denom[~min_space]))
        return float(np.linalg.norm(ghat / denom))

    hard = False
    if lam_min < 0.0 and g_min_norm <= HARD_CASE_TOL * max(gnorm, 1e-300):
        # gradient (numerically) orthogonal to the bottom eigenspace
        n_perp = s_norm(lam_lo, pinv=True)
        if 0.5 * L * n_perp <= lam_lo:
            hard = True

    if hard:
        lam = lam_lo
        shat = np.zeros(n)
        shat[~min_space] = -ghat[~min_space] / (w[~min_space] + lam)
        n_perp = float(np.linalg.norm(shat))
        target = 2.0 * lam / L
        alpha = math.sqrt(max(target**2 - n_perp**2, 0.0))
        shat[np.argmax(min_space)] += alpha
        s = Q @ shat
        return CubicSubproblemResult(s, lam, -_model_value(g, H, L, s), True)

    # easy case: unique root of lam = L ||s(lam)|| / 2 in (lam_lo, inf)
    lo = lam_lo
    hi = lam_lo + 1.0 + 0.5 * L * gnorm
    for _ in range(MAX_SECULAR_ITERS):
        if hi - 0.5 * L * s_norm(hi) >= 0:
            break
        hi = 2.0 * hi + 1.0
    else:
        raise SolverError(f"no upper bracket for secular equation (L={L}, |g|={gnorm})")

    lam = 0.5 * (lo + hi)
    residual = None
    for _ in range(MAX_SECULAR_ITERS):
        denom = w + lam
        if np.any(denom <= 0.0):
            lam = 0.5 * (lo + hi)
            continue
        shat = ghat / denom
        nrm = float(np.linalg.norm(shat))
        residual = lam - 0.5 * L * nrm
        if abs(residual) <= SECULAR_TOL:
            break
        if residual > 0:
            hi = lam
        else:
            lo = lam
        # Newton step on lam - L/2 * n(lam); n'(lam) = -(sum ghat^2/(w+lam)^3)/n
        if nrm > 0:
            dn = -float(np.sum(shat**2 / denom)) / nrm
            nxt = lam - residual / (1.0 - 0.5 * L * dn)
        else:
            nxt = 0.5 * (lo + hi)
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        lam = nxt
    else:
        raise SolverError(
            f"secular equation did not converge: lam={lam}, residual={residual}, "
            f"bracket=({lo}, {hi})"
        )

    s = Q @ (-ghat / (w + lam))
    return CubicSubproblemResult(s, lam, -_model_value(g, H, L, s), False)


def _active_cubic_step(g: np.ndarray, H: np.ndarray, L: float) -> np.ndarray:
    """Cubic step restricted to the exact nonzero pattern of (g, H)."""
    active = (g != 0.0) | np.any(H != 0.0, axis=1)
    if not np.any(active):
        return np.zeros_like(g)
    if np.all(active):
        return cubic_subproblem(g, H, L).step
    idx = np.flatnonzero(active)
    sub = cubic_subproblem(g[idx], H[np.ix_(idx, idx)], L).step
    s = np.zeros_like(g)
    s[idx] = sub
    return s


def run_optimizer(
    config: OptimizerConfig,
    instance: Instance,
    x0=None,
    trace: Optional[Trace] = None,
) -> Trace:
    """Drive an optimizer through the oracle, logging every query.

    Stops at the first query whose gradient norm reaches config.eps, or
    after max_iters queries.  perturbed_gd draws its Gaussian noise from
    the pinned seeded stream, so traces are reproducible bit-for-bit.
    """
    dim = instance.dim
    x = np.zeros(dim) if x0 is None else np.array(x0, dtype=float, copy=True)
    if x.shape != (dim,):
        raise DomainError(f"x0 must have shape ({dim},)")
    if trace is None:
        trace = Trace(instance=instance, seed=config.seed)
    order = 2 if config.kind == "cubic_newton" else 1
    gen = SeededRng(config.seed).generator() if config.kind == "perturbed_gd" else None

    for _ in range(config.max_iters):
        reply = query(instance, x, order=order, trace=trace)
        if float(np.linalg.norm(reply.gradient)) <= config.eps:
            break
        if config.kind == "gd":
            x = gd_step(x, reply.gradient, config.L)
        elif config.kind == "cubic_newton":
            x = x + _active_cubic_step(reply.gradient, reply.hessian, config.L)
        else:
            x = gd_step(x, reply.gradient, config.L)
            if config.noise_scale > 0:
                x = x + config.noise_scale * gen.standard_normal(dim)
    return trace
