"""Scalar component kernels and their closed-form derivatives.

Two smooth scalar functions drive every hard instance in this package:

* ``psi`` -- a compactly-cut-off bump factor: 0 for x <= 1/2 and
  exp(1 - 1/(2x-1)^2) beyond.  It is infinitely differentiable but
  identically zero (all orders) on the dead zone x <= 1/2, which is what
  locks undiscovered chain coordinates.
* ``phi`` -- a scaled Gaussian antiderivative, sqrt(e) * integral of
  exp(-t^2/2); bounded, strictly increasing, with derivative sqrt(e) at 0.

Derivatives of every order come from exact integer coefficient
recurrences (one table per kernel, built once and cached):

    phi-side:  d^k/dt^k exp(-t^2/2) = (sum_i c_i t^i) exp(-t^2/2),
               c_i^(k+1) = (i+1) c_{i+1}^(k) - c_{i-1}^(k)
    psi-side:  psi^(k)(x) = (sum_i c_i / (2x-1)^(k+2i)) psi(x),
               c_i^(k+1) = 4 c_{i-1}^(k) - 2(k+2i) c_i^(k)

Near the seam x = 1/2+ the psi-side powers overflow while psi itself
underflows; each term is therefore evaluated in log space with its sign
tracked separately, and terms are combined with compensated summation.

All evaluators accept floats or numpy arrays and return the same kind.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special as _special

from .errors import DomainError, UnsupportedOrderError

# Default maximum derivative order; coefficient growth ~ exp(k log k)
# stays comfortably inside float64 range for k <= 12.
DEFAULT_K_MAX = 8
HARD_K_MAX = 12

SQRT_E = math.sqrt(math.e)
PSI_SUP = math.e                      # sup psi (open)
PSI_DERIV_SUP = math.sqrt(54.0 / math.e)   # sup psi'
PHI_SUP = math.sqrt(2.0 * math.pi * math.e)  # sup phi (open)
PHI_DERIV_SUP = SQRT_E                # sup phi'

_TINY = float(np.nextafter(0.0, 1.0))
_PHI_BELOW_SUP = float(np.nextafter(PHI_SUP, 0.0))
_PSI_BELOW_SUP = float(np.nextafter(PSI_SUP, 0.0))


@lru_cache(maxsize=None)
def phi_coeff_rows(k_max: int = HARD_K_MAX) -> tuple[tuple[int, ...], ...]:
    """Integer rows c_0^(k)..c_k^(k) of the Gaussian-derivative recurrence.

    Row k satisfies d^k/dt^k exp(-t^2/2) = (sum_i c_i^(k) t^i) exp(-t^2/2).
    Row 0 is (1,); row 1 is (0, -1).
    """
    rows = [(1,)]
    for k in range(k_max):
        prev = rows[-1]
        nxt = []
        for i in range(k + 2):
            up = (i + 1) * prev[i + 1] if i + 1 <= k else 0
            down = prev[i - 1] if i >= 1 else 0
            nxt.append(up - down)
        rows.append(tuple(nxt))
    return tuple(rows)


@lru_cache(maxsize=None)
def psi_coeff_rows(k_max: int = HARD_K_MAX) -> tuple[tuple[int, ...], ...]:
    """Integer rows c_1^(k)..c_k^(k) of the cutoff-derivative recurrence.

    Row k satisfies psi^(k)(x) = (sum_i c_i^(k) (2x-1)^-(k+2i)) psi(x) for
    x > 1/2.  Row 1 is (4,).  Index 0 of the returned tuple is a filler.
    """
    rows: list[tuple[int, ...]] = [(), (4,)]
    for k in range(1, k_max):
        prev = rows[k]
        nxt = []
        for i in range(1, k + 2):
            c_im1 = prev[i - 2] if i - 1 >= 1 else 0
            c_i = prev[i - 1] if i <= k else 0
            nxt.append(4 * c_im1 - 2 * (k + 2 * i) * c_i)
        rows.append(tuple(nxt))
    return tuple(rows)


def _check_finite(x: np.ndarray | float, name: str = "x") -> None:
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} must be finite")


def _check_order(k: int, k_max: int) -> None:
    if k == 0:
        raise UnsupportedOrderError("k = 0 is the function itself; call psi/phi")
    if not 1 <= k <= k_max:
        raise UnsupportedOrderError(f"derivative order {k} outside 1..{k_max}")
    if k_max > HARD_K_MAX:
        raise UnsupportedOrderError(f"k_max {k_max} exceeds hard cap {HARD_K_MAX}")


def _as_array(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return arr, (arr.ndim == 0)


def psi(x):
    """Cutoff kernel: 0 for x <= 1/2, exp(1 - 1/(2x-1)^2) for x > 1/2."""
    arr, scalar = _as_array(x)
    _check_finite(arr)
    out = np.zeros_like(arr)
    mask = arr > 0.5
    if np.any(mask):
        u = 2.0 * arr[mask] - 1.0
        with np.errstate(divide="ignore", over="ignore"):
            # saturation clamp keeps the half-open range [0, e) representable
            out[mask] = np.minimum(np.exp(1.0 - 1.0 / (u * u)), _PSI_BELOW_SUP)
    return float(out) if scalar else out


def psi_deriv(x, k: int, k_max: int = DEFAULT_K_MAX):
    """k-th derivative of psi via the exact coefficient recurrence.

    Exactly zero for x <= 1/2.  Each term c_i (2x-1)^-(k+2i) psi(x) is
    formed in log space (sign separate) so the seam neither overflows nor
    loses the underflow-to-zero behaviour; terms are Neumaier-summed.
    """
    _check_order(k, k_max)
    arr, scalar = _as_array(x)
    _check_finite(arr)
    out = np.zeros_like(arr)
    mask = arr > 0.5
    if np.any(mask):
        u = 2.0 * arr[mask] - 1.0
        with np.errstate(divide="ignore", over="ignore"):
            logu = np.log(u)
            logpsi = 1.0 - 1.0 / (u * u)  # -inf at the seam is fine
            total = np.zeros_like(u)
            comp = np.zeros_like(u)
            for i, c in enumerate(psi_coeff_rows()[k], start=1):
                if c == 0:
                    continue
                term = math.copysign(1.0, c) * np.exp(
                    math.log(abs(c)) - (k + 2 * i) * logu + logpsi
                )
                # Neumaier compensated accumulation
                t = total + term
                comp += np.where(
                    np.abs(total) >= np.abs(term),
                    (total - t) + term,
                    (term - t) + total,
                )
                total = t
            out[mask] = total + comp
    return float(out) if scalar else out


def phi(x):
    """Scaled Gaussian antiderivative sqrt(e) * int_{-inf}^x exp(-t^2/2) dt.

    Computed through erfc to double precision.  The true value lies in the
    open interval (0, sqrt(2*pi*e)); where the float result would saturate
    either end we clamp to the nearest representable interior value.
    """
    arr, scalar = _as_array(x)
    _check_finite(arr)
    out = PHI_SUP * 0.5 * _special.erfc(-arr / math.sqrt(2.0))
    out = np.clip(out, _TINY, _PHI_BELOW_SUP)
    return float(out) if scalar else out


def phi_deriv(x, k: int, k_max: int = DEFAULT_K_MAX):
    """k-th derivative of phi: sqrt(e) * (polynomial) * exp(-x^2/2)."""
    _check_order(k, k_max)
    arr, scalar = _as_array(x)
    _check_finite(arr)
    gauss = np.exp(-0.5 * arr * arr)
    out = np.zeros_like(arr)
    mask = gauss > 0.0  # beyond |x| ~ 38.6 the product underflows exactly
    if np.any(mask):
        xm = arr[mask]
        row = phi_coeff_rows()[k - 1]
        poly = np.zeros_like(xm)
        for c in reversed(row):
            poly = poly * xm + c
        out[mask] = SQRT_E * poly * gauss[mask]
    if k == 1:
        # the first derivative is strictly positive; keep underflow representable
        out = np.maximum(out, _TINY)
    return float(out) if scalar else out


def kernel_bound(kind: str, k: int, k_max: int = DEFAULT_K_MAX) -> float:
    """Proven sup-norm bound for the k-th derivative of a kernel.

    Orders 0 and 1 use the tight range constants; higher orders use the
    exp(2.5 k log 4k) / exp(1.5 k log 1.5k) envelopes.
    """
    if k < 0 or k > k_max:
        raise UnsupportedOrderError(f"order {k} outside 0..{k_max}")
    if kind == "psi":
        if k == 0:
            return PSI_SUP
        if k == 1:
            return PSI_DERIV_SUP
        return math.exp(2.5 * k * math.log(4.0 * k))
    if kind == "phi":
        if k == 0:
            return PHI_SUP
        if k == 1:
            return PHI_DERIV_SUP
        return math.exp(1.5 * k * math.log(1.5 * k))
    raise DomainError(f"unknown kernel kind {kind!r}")
