"""Resisting oracle: force any deterministic algorithm to behave zero-respectingly.

Given a deterministic query callback operating in dimension d' = d + T0
and a plain chain instance of dimension d, the adversary builds an
orthogonal embedding U column by column, always choosing the column for a
newly activated chain coordinate orthogonal to every iterate seen so far.
The algorithm therefore only ever receives derivative information
consistent with x -> f(U^T x), while the pulled-back sequence U^T a^(t)
is zero-respecting for f.  Coordinates whose columns are not yet chosen
contribute nothing to any reply, by the chain's dead-zone property.

The callback contract: ``algorithm(history) -> next query | None``, where
history is the list of (point, OracleReply) pairs served so far.  The
callback must be deterministic; randomized algorithms are out of scope
(the Monte Carlo experiments cover them).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, NumericalRankError
from .instances import PlainInstance
from .oracles import OracleReply, Trace
from .randmat import SeededRng

ORTHO_TOL = 1e-10

AlgorithmCallback = Callable[[list], Optional[np.ndarray]]


def extend_orthonormal(
    dim: int, constraints: list[np.ndarray], count: int, rng
) -> list[np.ndarray]:
    """Unit vectors orthogonal to each other and to every constraint (tol 1e-10).

    Gram-Schmidt from random Gaussian candidates with one re-orthogonalization
    pass; a rank-deficient draw is retried with a fresh candidate before
    giving up.
    """
    if len(constraints) + count > dim:
        raise DomainError(
            f"cannot fit {count} new directions: {len(constraints)} constraints in dim {dim}"
        )
    gen = rng.generator() if isinstance(rng, SeededRng) else rng
    basis = [c / np.linalg.norm(c) for c in constraints if np.linalg.norm(c) > 0]
    new: list[np.ndarray] = []

    def orthogonalize(v: np.ndarray) -> np.ndarray:
        for b in basis + new:
            v = v - b * (b @ v)
        return v

    for _ in range(count):
        for _attempt in range(8):
            v = orthogonalize(gen.standard_normal(dim))
            v = orthogonalize(v)  # second pass tightens loss of orthogonality
            nrm = float(np.linalg.norm(v))
            if nrm > 1e-6:
                v = v / nrm
                worst = max(
                    (abs(float(b @ v)) for b in basis + new), default=0.0
                )
                if worst <= ORTHO_TOL:
                    new.append(v)
                    break
        else:
            raise NumericalRankError(
                f"orthogonal complement numerically rank-deficient in dim {dim}"
            )
    return new


@dataclass
class AdversaryState:
    """Mutable game state: ordered support, chosen columns, past outer iterates."""

    dim_outer: int
    columns: dict[int, np.ndarray] = field(default_factory=dict)
    support: list[int] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)

    def constraint_vectors(self) -> list[np.ndarray]:
        return self.iterates + [self.columns[i] for i in self.support]

    def add_columns(self, coords: list[int], rng) -> None:
        new = extend_orthonormal(
            self.dim_outer, self.constraint_vectors(), len(coords), rng
        )
        for coord, col in zip(sorted(coords), new):
            self.columns[coord] = col
            self.support.append(coord)


@dataclass(frozen=True)
class ResistingResult:
    U: np.ndarray
    outer_trace: Trace
    inner_trace: Trace
    horizon_exhausted: bool
    state: AdversaryState


def run_resisting(
    algorithm: AlgorithmCallback,
    base: PlainInstance,
    T0: int,
    order: int = 1,
    seed: int = 0,
) -> ResistingResult:
    """Play the resisting-oracle game for up to T0 queries.

    Returns the completed orthogonal embedding U of shape (d + T0) x d, the
    outer trace in dimension d + T0, and the pulled-back inner trace, which
    is zero-respecting for ``base`` by construction.
    """
    if T0 < 1:
        raise DomainError("T0 must be >= 1")
    d = base.dim
    d_outer = d + T0
    rng = SeededRng(seed).generator()
    state = AdversaryState(dim_outer=d_outer)
    outer_trace = Trace(instance=None, seed=seed)
    inner_trace = Trace(instance=base, seed=seed)
    history: list[tuple[np.ndarray, OracleReply]] = []
    horizon_exhausted = True

    for _t in range(1, T0 + 1):
        a = algorithm(list(history))
        if a is None:
            horizon_exhausted = False
            break
        a = np.asarray(a, dtype=float)
        if a.shape != (d_outer,):
            raise DomainError(f"algorithm must query vectors of shape ({d_outer},)")
        state.iterates.append(a.copy())

        z = np.zeros(d)
        for coord in state.support:
            z[coord - 1] = float(state.columns[coord] @ a)

        value = base.value(z)
        grad = base.grad(z)
        hess = base.hess(z) if order >= 2 else None

        new_coords = sorted(base.support(z) - set(state.support))
        if new_coords:
            state.add_columns(new_coords, rng)

        # assemble the outer reply from the columns of the (partial) embedding
        grad_outer = np.zeros(d_outer)
        for coord in state.support:
            gi = grad[coord - 1]
            if gi != 0.0:
                grad_outer += gi * state.columns[coord]
        hess_outer = None
        if order >= 2:
            hess_outer = np.zeros((d_outer, d_outer))
            nz = np.argwhere(hess != 0.0)
            for i, j in nz:
                ui = state.columns[int(i) + 1]
                uj = state.columns[int(j) + 1]
                hess_outer += hess[i, j] * np.outer(ui, uj)

        inner_reply = OracleReply(value=value, gradient=grad, hessian=hess, order=order)
        outer_reply = OracleReply(
            value=value, gradient=grad_outer, hessian=hess_outer, order=order
        )
        inner_trace.append(z, inner_reply)
        outer_trace.append(a, outer_reply)
        history.append((a.copy(), outer_reply))

    # complete U with columns for never-activated coordinates, orthogonal to
    # every iterate so the final embedding reproduces all served replies
    missing = [i for i in range(1, d + 1) if i not in state.columns]
    if missing:
        state.add_columns(missing, rng)
    U = np.column_stack([state.columns[i] for i in range(1, d + 1)])
    gram_err = float(np.max(np.abs(U.T @ U - np.eye(d))))
    if gram_err > ORTHO_TOL:
        raise NumericalRankError(f"completed embedding deviates from orthogonal by {gram_err:.2e}")
    return ResistingResult(
        U=U,
        outer_trace=outer_trace,
        inner_trace=inner_trace,
        horizon_exhausted=horizon_exhausted,
        state=state,
    )


def consistency_error(result: ResistingResult, base: PlainInstance) -> float:
    """Max relative deviation between served replies and post-hoc derivatives of f(U^T x).

    This is the check that the resisting oracle's answers were never
    contradicted by the final embedding.
    """
    U = result.U
    worst = 0.0
    for entry in result.outer_trace.entries:
        z = U.T @ entry.point
        val = base.value(z)
        grad = U @ base.grad(z)
        scale = max(1.0, abs(entry.reply.value), float(np.max(np.abs(entry.reply.gradient))))
        worst = max(worst, abs(val - entry.reply.value) / scale)
        worst = max(worst, float(np.max(np.abs(grad - entry.reply.gradient))) / scale)
        if entry.reply.hessian is not None:
            hess = U @ base.hess(z) @ U.T
            hscale = max(scale, float(np.max(np.abs(entry.reply.hessian))))
            worst = max(
                worst,
                float(np.max(np.abs(hess - entry.reply.hessian))) / hscale,
            )
    return worst
