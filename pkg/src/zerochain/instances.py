"""Hard instance constructions and their scaling calculators.

Three families, all built from the chain function ``fbar_value`` and the
kernels module:

* plain   -- x -> multiplier * fbar_T(x / sigma) on R^T.  A robust
  zero-chain: derivatives at points supported on coordinates < i are
  supported on coordinates <= i, so a zero-respecting method discovers at
  most one coordinate per query.
* rotated -- the chain composed with a column-orthogonal U and a soft
  radial projection, plus a ||x||^2/10 term that punishes norm blow-up;
  hard (w.h.p.) even for randomized methods when the ambient dimension is
  large.
* distance -- the rotated instance minus a narrow radial bump hidden at
  0.8*D*u^(T), which plants all global minima inside the ball of radius D.

Chain positions are 1-based in every public return value (witness
indices, support sets); vectors themselves are plain 0-based numpy
arrays.  Boundary conventions for the chain: position 0 is pinned to the
constant 1, and the pair term beyond position T does not exist.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import (
    DegenerateBudgetError,
    DomainError,
    UnsupportedOrderError,
    VacuousBoundError,
)

ORTHOGONALITY_TOL = 1e-10
DEFAULT_RADIUS_FACTOR = 230.0  # projection radius R = 230 sqrt(T)
FD_HESSIAN_STEP = 1e-5


def smoothness_constant(p: int) -> float:
    """Lipschitz constant of the chain's p-th derivatives, exp(2.5p log p + 5p + 10)."""
    if p < 1:
        raise DomainError("p must be >= 1")
    return math.exp(2.5 * p * math.log(p) + 5.0 * p + 10.0) if p > 1 else math.exp(15.0)


def smoothness_constant_rotated(p: int) -> float:
    """Conservative stand-in for the rotated/distance variants: ell_p * e^(5p).

    Only existence of this constant is proven; the default is configurable
    wherever it is consumed and is documented as conservative, not canonical.
    """
    return smoothness_constant(p) * math.exp(5.0 * p)


# ---------------------------------------------------------------------------
# Unscaled chain function fbar_T
# ---------------------------------------------------------------------------


def _check_vector(T: int, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != T:
        raise DomainError(f"expected vector of length {T}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("vector entries must be finite")
    return arr


def fbar_value(T: int, x) -> float:
    """Value of the unscaled chain function on R^T.

    First pair uses the pinned boundary value psi(1) = 1, folded as the
    constant; pairs (x_{i-1}, x_i) for i = 2..T contribute
    psi(-x_{i-1}) phi(-x_i) - psi(x_{i-1}) phi(x_i).
    """
    x = _check_vector(T, x)
    total = -kernels.phi(x[0])
    if T > 1:
        a, b = x[:-1], x[1:]
        total += float(
            np.sum(kernels.psi(-a) * kernels.phi(-b) - kernels.psi(a) * kernels.phi(b))
        )
    return total


def fbar_grad(T: int, x) -> np.ndarray:
    """Analytic gradient of ``fbar_value``; tridiagonal dependency structure.

    Component j sums the derivative of the pair (x_{j-1}, x_j) in its second
    slot and of the pair (x_j, x_{j+1}) in its first slot; the latter is
    absent at j = T.
    """
    x = _check_vector(T, x)
    grad = np.zeros(T)
    grad[0] = -kernels.phi_deriv(x[0], 1)
    if T > 1:
        a, b = x[:-1], x[1:]
        grad[1:] += -kernels.psi(-a) * kernels.phi_deriv(-b, 1) - kernels.psi(
            a
        ) * kernels.phi_deriv(b, 1)
        grad[:-1] += -kernels.psi_deriv(-a, 1) * kernels.phi(-b) - kernels.psi_deriv(
            a, 1
        ) * kernels.phi(b)
    return grad


def fbar_hess(T: int, x) -> np.ndarray:
    """Analytic Hessian of ``fbar_value``: symmetric, exactly tridiagonal."""
    x = _check_vector(T, x)
    H = np.zeros((T, T))
    H[0, 0] = -kernels.phi_deriv(x[0], 2)
    if T > 1:
        a, b = x[:-1], x[1:]
        # second derivative in the second slot of pair (a, b)
        d2b = kernels.psi(-a) * kernels.phi_deriv(-b, 2) - kernels.psi(
            a
        ) * kernels.phi_deriv(b, 2)
        # second derivative in the first slot
        d2a = kernels.psi_deriv(-a, 2) * kernels.phi(-b) - kernels.psi_deriv(
            a, 2
        ) * kernels.phi(b)
        # mixed derivative
        dab = kernels.psi_deriv(-a, 1) * kernels.phi_deriv(-b, 1) - kernels.psi_deriv(
            a, 1
        ) * kernels.phi_deriv(b, 1)
        idx = np.arange(1, T)
        H[idx, idx] += d2b
        H[idx - 1, idx - 1] += d2a
        H[idx - 1, idx] = dab
        H[idx, idx - 1] = dab
    return H


def fbar_support(T: int, x) -> set[int]:
    """Exact union of derivative supports (any order >= 1) at x, 1-based.

    Decided by the kernel dead zone, never by float thresholds: position j
    carries a nonzero partial iff its left neighbour exceeds 1/2 in
    magnitude (position 0 is the constant 1, so j = 1 is always active) or
    j < T and |x_j| > 1/2 activates the pair to its right.
    """
    x = _check_vector(T, x)
    active = {1}
    for j in range(2, T + 1):
        if abs(x[j - 2]) > 0.5:
            active.add(j)
    for j in range(1, T):
        if abs(x[j - 1]) > 0.5:
            active.add(j)
    return active


def large_gradient_witness(T: int, x) -> Optional[int]:
    """Smallest 1-based j with |x_j| < 1, whose partial then exceeds 1 in magnitude.

    Returns None when every coordinate is at least 1 in magnitude.
    """
    x = _check_vector(T, x)
    small = np.flatnonzero(np.abs(x) < 1.0)
    if small.size == 0:
        return None
    return int(small[0]) + 1


# ---------------------------------------------------------------------------
# Soft projection and rotated construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SoftProjectionJacobian:
    """Jacobian of the soft projection, held as scale * (I - rho rho^T / R^2)."""

    scale: float
    rho: np.ndarray
    radius: float

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.scale * (v - self.rho * (self.rho @ v) / self.radius**2)

    def as_matrix(self) -> np.ndarray:
        d = self.rho.shape[0]
        return self.scale * (np.eye(d) - np.outer(self.rho, self.rho) / self.radius**2)


def soft_project(x, R: float) -> tuple[np.ndarray, SoftProjectionJacobian]:
    """Map x to x / sqrt(1 + ||x||^2 / R^2), strictly inside the radius-R ball."""
    if R <= 0:
        raise DomainError("projection radius must be positive")
    x = np.asarray(x, dtype=float)
    scale = 1.0 / math.sqrt(1.0 + float(x @ x) / R**2)
    rho = scale * x
    return rho, SoftProjectionJacobian(scale=scale, rho=rho, radius=R)


def default_radius(T: int) -> float:
    return DEFAULT_RADIUS_FACTOR * math.sqrt(T)


# ---------------------------------------------------------------------------
# Bump used by the distance construction
# ---------------------------------------------------------------------------


def bump_value(T: int, x) -> float:
    """Unit-height bump at 0.8 e^(T): psi(1 - 12.5 ||x - 0.8 e^(T)||^2).

    Identically zero once x_T <= 3/5 or ||x|| >= 1; value 1 exactly at the peak.
    """
    x = _check_vector(T, x)
    diff = x.copy()
    diff[-1] -= 0.8
    return kernels.psi(1.0 - 12.5 * float(diff @ diff))


def bump_grad(T: int, x) -> np.ndarray:
    x = _check_vector(T, x)
    diff = x.copy()
    diff[-1] -= 0.8
    slope = kernels.psi_deriv(1.0 - 12.5 * float(diff @ diff), 1)
    return -25.0 * slope * diff


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------


def _check_orthogonal(U: np.ndarray) -> None:
    d, T = U.shape
    if d < T:
        raise DomainError(f"U must be tall, got {U.shape}")
    gram = U.T @ U
    err = float(np.max(np.abs(gram - np.eye(T))))
    if err > ORTHOGONALITY_TOL:
        raise DomainError(f"U^T U deviates from identity by {err:.2e}")


@dataclass(frozen=True)
class PlainInstance:
    """x -> multiplier * fbar_T(x / sigma) on dimension T."""

    T: int
    sigma: float = 1.0
    multiplier: float = 1.0
    p: Optional[int] = None

    def __post_init__(self):
        if self.T < 1:
            raise DomainError("chain length T must be >= 1")
        if self.sigma <= 0 or self.multiplier <= 0:
            raise DomainError("sigma and multiplier must be positive")

    variant = "plain"
    analytic_order = 2

    @property
    def dim(self) -> int:
        return self.T

    def value(self, x) -> float:
        return self.multiplier * fbar_value(self.T, np.asarray(x, dtype=float) / self.sigma)

    def grad(self, x) -> np.ndarray:
        return (self.multiplier / self.sigma) * fbar_grad(
            self.T, np.asarray(x, dtype=float) / self.sigma
        )

    def hess(self, x) -> np.ndarray:
        return (self.multiplier / self.sigma**2) * fbar_hess(
            self.T, np.asarray(x, dtype=float) / self.sigma
        )

    def support(self, x) -> set[int]:
        return fbar_support(self.T, np.asarray(x, dtype=float) / self.sigma)


def _fhat_value(T: int, U: np.ndarray, R: float, z: np.ndarray) -> float:
    rho, _ = soft_project(z, R)
    return fbar_value(T, U.T @ rho) + 0.1 * float(z @ z)


def _fhat_grad(T: int, U: np.ndarray, R: float, z: np.ndarray) -> np.ndarray:
    rho, jac = soft_project(z, R)
    inner = fbar_grad(T, U.T @ rho)
    return jac.matvec(U @ inner) + 0.2 * z


@dataclass(frozen=True)
class RotatedInstance:
    """x -> multiplier * [fbar_T(U^T rho(x/sigma)) + ||x/sigma||^2 / 10]."""

    T: int
    U: np.ndarray = field(repr=False)
    R: Optional[float] = None
    sigma: float = 1.0
    multiplier: float = 1.0
    p: Optional[int] = None
    seed: Optional[int] = None

    variant = "rotated"
    analytic_order = 1  # order 2 served by finite differences of the gradient

    def __post_init__(self):
        if self.T < 1:
            raise DomainError("chain length T must be >= 1")
        if self.sigma <= 0 or self.multiplier <= 0:
            raise DomainError("sigma and multiplier must be positive")
        U = np.asarray(self.U, dtype=float)
        object.__setattr__(self, "U", U)
        if U.shape[1] != self.T:
            raise DomainError("U must have T columns")
        _check_orthogonal(U)
        if self.R is None:
            object.__setattr__(self, "R", default_radius(self.T))
        if self.R <= 0:
            raise DomainError("R must be positive")

    @property
    def dim(self) -> int:
        return self.U.shape[0]

    def value(self, x) -> float:
        z = _check_vector(self.dim, x) / self.sigma
        return self.multiplier * _fhat_value(self.T, self.U, self.R, z)

    def grad(self, x) -> np.ndarray:
        z = _check_vector(self.dim, x) / self.sigma
        return (self.multiplier / self.sigma) * _fhat_grad(self.T, self.U, self.R, z)

    def hess(self, x) -> np.ndarray:
        """Forward differences of the analytic gradient (demonstration use only)."""
        x = _check_vector(self.dim, x)
        d = self.dim
        g0 = self.grad(x)
        H = np.empty((d, d))
        for i in range(d):
            xp = x.copy()
            xp[i] += FD_HESSIAN_STEP
            H[:, i] = (self.grad(xp) - g0) / FD_HESSIAN_STEP
        return 0.5 * (H + H.T)


@dataclass(frozen=True)
class DistanceInstance:
    """Rotated instance minus a bump of depth multiplier*(D/sigma)^(p+1) at 0.8 D u^(T)."""

    T: int
    U: np.ndarray = field(repr=False)
    D: float
    sigma: float
    p: int
    multiplier: float
    R: Optional[float] = None
    seed: Optional[int] = None

    variant = "distance"
    analytic_order = 1

    def __post_init__(self):
        if self.sigma > self.D:
            raise DomainError("distance construction requires sigma <= D")
        if self.sigma <= 0 or self.multiplier <= 0 or self.D <= 0:
            raise DomainError("sigma, multiplier and D must be positive")
        U = np.asarray(self.U, dtype=float)
        object.__setattr__(self, "U", U)
        if U.shape[1] != self.T:
            raise DomainError("U must have T columns")
        _check_orthogonal(U)
        if self.R is None:
            object.__setattr__(self, "R", default_radius(self.T))

    @property
    def dim(self) -> int:
        return self.U.shape[0]

    @property
    def bump_multiplier(self) -> float:
        return self.multiplier * (self.D / self.sigma) ** (self.p + 1)

    def value(self, x) -> float:
        x = _check_vector(self.dim, x)
        smooth = self.multiplier * _fhat_value(self.T, self.U, self.R, x / self.sigma)
        return smooth - self.bump_multiplier * bump_value(self.T, self.U.T @ x / self.D)

    def grad(self, x) -> np.ndarray:
        x = _check_vector(self.dim, x)
        smooth = (self.multiplier / self.sigma) * _fhat_grad(
            self.T, self.U, self.R, x / self.sigma
        )
        inner = bump_grad(self.T, self.U.T @ x / self.D)
        return smooth - (self.bump_multiplier / self.D) * (self.U @ inner)


Instance = PlainInstance | RotatedInstance | DistanceInstance


# ---------------------------------------------------------------------------
# Scaling calculators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingParams:
    """Derived scaling for a target accuracy: sigma, T, multiplier, ell.

    variant 'deterministic': sigma = (ell * eps / lip)^(1/p),
        T = floor(delta * (lip/ell)^(1/p) / 12 * eps^-((1+p)/p)).
    variant 'randomized': sigma = (2 ell eps / lip)^(1/p),
        T = floor(delta / 48 * (lip/ell)^(1/p) * eps^-((1+p)/p)).
    variant 'distance': sigma as randomized, T = floor((D/sigma)^(p+1) / 13).
    multiplier is always lip * sigma^(p+1) / ell, which makes the built
    instance lip-smooth at order p with gradient floor eps on the relevant
    region, and keeps the value gap within the stated budget.
    """

    variant: str
    p: int
    lip: float
    eps: float
    ell: float
    sigma: float
    T: int
    multiplier: float
    delta: Optional[float] = None
    dist: Optional[float] = None

    def plain_instance(self) -> PlainInstance:
        return PlainInstance(T=self.T, sigma=self.sigma, multiplier=self.multiplier, p=self.p)

    def rotated_instance(self, U: np.ndarray, seed: Optional[int] = None) -> RotatedInstance:
        return RotatedInstance(
            T=self.T, U=U, sigma=self.sigma, multiplier=self.multiplier, p=self.p, seed=seed
        )

    def distance_instance(self, U: np.ndarray, seed: Optional[int] = None) -> DistanceInstance:
        if self.variant != "distance":
            raise DomainError("distance_instance requires distance scaling")
        return DistanceInstance(
            T=self.T,
            U=U,
            D=self.dist,
            sigma=self.sigma,
            p=self.p,
            multiplier=self.multiplier,
            seed=seed,
        )

    def theorem_dim(self, fail_prob: float = 0.5) -> int:
        """Ambient dimension the randomized guarantee needs: 52 R^2 T log(2T^2/delta)."""
        R = default_radius(self.T)
        return math.ceil(52.0 * self.T * R**2 * math.log(2.0 * self.T**2 / fail_prob))

    def gradient_floor(self) -> float:
        """Scaled gradient lower bound on the slow region.

        eps for the deterministic variant (unit floor times lip sigma^p / ell);
        the randomized/distance variants keep a floor of 1/2, which the
        2x-inflated sigma turns back into eps.
        """
        unit = 1.0 if self.variant == "deterministic" else 0.5
        return unit * self.lip * self.sigma**self.p / self.ell


def scaling_for(
    variant: str,
    p: int,
    budget: float,
    lip: float,
    eps: float,
    ell: Optional[float] = None,
) -> ScalingParams:
    """Compute (sigma, T, multiplier) for a variant from its budget and target.

    ``budget`` is the value gap for 'deterministic'/'randomized' and the
    distance bound D for 'distance'.  Raises DegenerateBudgetError when the
    implied T is below 1 (the bound is vacuous there), and the sharper
    VacuousBoundError for the distance variant when sigma > D.
    """
    if p < 1:
        raise DomainError("p must be a positive integer")
    if budget <= 0 or lip <= 0 or eps <= 0:
        raise DomainError("budget, lip and eps must be positive")
    if variant == "deterministic":
        ell = smoothness_constant(p) if ell is None else ell
        sigma = (ell * eps / lip) ** (1.0 / p)
        T = math.floor(budget * (lip / ell) ** (1.0 / p) / 12.0 * eps ** (-(1.0 + p) / p))
        kwargs = {"delta": budget}
    elif variant == "randomized":
        ell = smoothness_constant_rotated(p) if ell is None else ell
        sigma = (2.0 * ell * eps / lip) ** (1.0 / p)
        T = math.floor(budget / 48.0 * (lip / ell) ** (1.0 / p) * eps ** (-(1.0 + p) / p))
        kwargs = {"delta": budget}
    elif variant == "distance":
        ell = smoothness_constant_rotated(p) if ell is None else ell
        sigma = (2.0 * ell * eps / lip) ** (1.0 / p)
        if sigma > budget:
            raise VacuousBoundError(
                f"sigma {sigma:.6g} exceeds distance budget {budget:.6g}; "
                "the bound is vacuous (every method takes at least one step)"
            )
        T = math.floor((budget / sigma) ** (p + 1) / 13.0)
        kwargs = {"dist": budget}
    else:
        raise DomainError(f"unknown scaling variant {variant!r}")
    if T < 1:
        raise DegenerateBudgetError(
            f"{variant} scaling yields T = {T} < 1; budget too small for eps"
        )
    multiplier = lip * sigma ** (p + 1) / ell
    return ScalingParams(
        variant=variant,
        p=p,
        lip=lip,
        eps=eps,
        ell=ell,
        sigma=sigma,
        T=T,
        multiplier=multiplier,
        **kwargs,
    )


# ---------------------------------------------------------------------------
# Serialization: replayable, self-describing text format
# ---------------------------------------------------------------------------

_FMT = "%.17g"


def _fmt(v) -> str:
    return "-" if v is None else _FMT % v


def save_instance(inst: Instance, path_or_file) -> None:
    """Write `variant p T d sigma multiplier R D seed` plus U rows (17 sig digits)."""
    close = False
    fh = path_or_file
    if isinstance(path_or_file, (str, bytes)):
        fh = open(path_or_file, "w")
        close = True
    try:
        R = getattr(inst, "R", None)
        D = getattr(inst, "D", None)
        seed = getattr(inst, "seed", None)
        p = inst.p
        fh.write(
            " ".join(
                [
                    inst.variant,
                    "-" if p is None else str(int(p)),
                    str(inst.T),
                    str(inst.dim),
                    _fmt(inst.sigma),
                    _fmt(inst.multiplier),
                    _fmt(R),
                    _fmt(D),
                    "-" if seed is None else str(int(seed)),
                ]
            )
            + "\n"
        )
        U = getattr(inst, "U", None)
        if U is not None:
            for row in U:
                fh.write(" ".join(_FMT % v for v in row) + "\n")
    finally:
        if close:
            fh.close()


def load_instance(path_or_file) -> Instance:
    close = False
    fh = path_or_file
    if isinstance(path_or_file, (str, bytes)):
        fh = open(path_or_file, "r")
        close = True
    try:
        header = fh.readline().split()
        if len(header) != 9:
            raise DomainError("malformed instance header")
        variant, p_s, T_s, d_s, sigma_s, mult_s, R_s, D_s, seed_s = header
        p = None if p_s == "-" else int(p_s)
        T, d = int(T_s), int(d_s)
        sigma, mult = float(sigma_s), float(mult_s)
        R = None if R_s == "-" else float(R_s)
        seed = None if seed_s == "-" else int(seed_s)
        if variant == "plain":
            return PlainInstance(T=T, sigma=sigma, multiplier=mult, p=p)
        rows = [np.array(fh.readline().split(), dtype=float) for _ in range(d)]
        U = np.vstack(rows)
        if variant == "rotated":
            return RotatedInstance(T=T, U=U, R=R, sigma=sigma, multiplier=mult, p=p, seed=seed)
        if variant == "distance":
            return DistanceInstance(
                T=T, U=U, D=float(D_s), sigma=sigma, p=p, multiplier=mult, R=R, seed=seed
            )
        raise DomainError(f"unknown instance variant {variant!r}")
    finally:
        if close:
            fh.close()


def instance_to_string(inst: Instance) -> str:
    buf = io.StringIO()
    save_instance(inst, buf)
    return buf.getvalue()


def instance_from_string(text: str) -> Instance:
    return load_instance(io.StringIO(text))
