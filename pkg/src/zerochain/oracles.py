"""Information-oracle layer: replies, query logging, T_eps, zero-respecting checks.

An algorithm interacts with an instance only through ``query``, which
returns the value, gradient and (order 2) Hessian at a point and appends
the exchange to a ``Trace``.  ``t_eps`` reads the first query index whose
gradient norm drops to the target, and ``check_zero_respecting`` verifies
that a trace never places mass on coordinates whose partial derivatives
have not yet been seen to be nonzero.

Support is decided exactly from the chain structure (kernel dead zone),
never by thresholding float values: thresholds would make the check
unsound.  Rotated and distance instances have dense derivatives, so the
checker refuses them.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, TraceCapacityError, UnsupportedOrderError
from .instances import Instance, PlainInstance

DEFAULT_TRACE_CAP = 10**6
_FMT = "%.17g"


@dataclass(frozen=True)
class OracleReply:
    """Derivatives released for one query: value, gradient, optional Hessian."""

    value: float
    gradient: np.ndarray
    hessian: Optional[np.ndarray]
    order: int

    def __post_init__(self):
        if (self.hessian is not None) != (self.order >= 2):
            raise DomainError("hessian must be present exactly when order >= 2")


@dataclass(frozen=True)
class TraceEntry:
    point: np.ndarray
    reply: OracleReply
    grad_norm: float


@dataclass
class Trace:
    """Ordered query log for one algorithm run on one instance."""

    instance: Optional[Instance] = None
    seed: Optional[int] = None
    cap: int = DEFAULT_TRACE_CAP
    entries: list[TraceEntry] = field(default_factory=list)
    stream: Optional[io.TextIOBase] = None
    stream_points: bool = False

    def __len__(self) -> int:
        return len(self.entries)

    def append(self, point: np.ndarray, reply: OracleReply) -> TraceEntry:
        if len(self.entries) >= self.cap:
            raise TraceCapacityError(f"trace cap {self.cap} reached")
        entry = TraceEntry(
            point=np.array(point, dtype=float, copy=True),
            reply=reply,
            grad_norm=float(np.linalg.norm(reply.gradient)),
        )
        self.entries.append(entry)
        if self.stream is not None:
            if len(self.entries) == 1:
                self.stream.write(_csv_header(self.stream_points) + "\n")
            self.stream.write(_csv_row(len(self.entries), entry, self.stream_points) + "\n")
        return entry

    @property
    def grad_norms(self) -> np.ndarray:
        return np.array([e.grad_norm for e in self.entries])

    def to_csv(self, path_or_file, include_points: bool = False) -> None:
        close = False
        fh = path_or_file
        if isinstance(path_or_file, (str, bytes)):
            fh = open(path_or_file, "w", newline="")
            close = True
        try:
            if self.seed is not None:
                fh.write(f"# seed={self.seed}\n")
            fh.write(_csv_header(include_points) + "\n")
            for t, entry in enumerate(self.entries, start=1):
                fh.write(_csv_row(t, entry, include_points) + "\n")
        finally:
            if close:
                fh.close()


def _csv_header(include_points: bool) -> str:
    return "t,grad_norm,f_value,x_serialized" if include_points else "t,grad_norm,f_value"


def _csv_row(t: int, entry: TraceEntry, include_points: bool) -> str:
    cells = [str(t), _FMT % entry.grad_norm, _FMT % entry.reply.value]
    if include_points:
        cells.append(";".join(_FMT % v for v in entry.point))
    return ",".join(cells)


def parse_trace_csv(path_or_file) -> dict:
    """Round-trip reader for the trace CSV schema.

    Returns {'seed': int|None, 'rows': list of dicts with t, grad_norm,
    f_value and (when present) x as an ndarray}.
    """
    close = False
    fh = path_or_file
    if isinstance(path_or_file, (str, bytes)):
        fh = open(path_or_file, "r", newline="")
        close = True
    try:
        seed = None
        lines = []
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                if key.strip() == "seed":
                    seed = int(val)
                continue
            lines.append(line)
        reader = csv.DictReader(lines)
        rows = []
        for rec in reader:
            row = {
                "t": int(rec["t"]),
                "grad_norm": float(rec["grad_norm"]),
                "f_value": float(rec["f_value"]),
            }
            if "x_serialized" in rec and rec["x_serialized"] not in (None, ""):
                row["x"] = np.array(rec["x_serialized"].split(";"), dtype=float)
            rows.append(row)
        return {"seed": seed, "rows": rows}
    finally:
        if close:
            fh.close()


def query(
    instance: Instance, x, order: int = 1, trace: Optional[Trace] = None
) -> OracleReply:
    """Answer an order-1 or order-2 derivative query and log it.

    Plain instances serve both orders analytically; rotated instances serve
    order 2 through finite differences of the analytic gradient; distance
    instances are first-order only.
    """
    if order not in (1, 2):
        raise UnsupportedOrderError(f"oracle order must be 1 or 2, got {order}")
    if order == 2 and not hasattr(instance, "hess"):
        raise UnsupportedOrderError(
            f"order 2 unsupported for {instance.variant} instances"
        )
    x = np.asarray(x, dtype=float)
    reply = OracleReply(
        value=instance.value(x),
        gradient=instance.grad(x),
        hessian=instance.hess(x) if order >= 2 else None,
        order=order,
    )
    if trace is not None:
        trace.append(x, reply)
    return reply


def t_eps(trace: Trace, eps: float) -> Optional[int]:
    """First 1-based query index with gradient norm <= eps, else None."""
    if len(trace.entries) == 0:
        raise DomainError("t_eps needs a nonempty trace")
    for t, entry in enumerate(trace.entries, start=1):
        if entry.grad_norm <= eps:
            return t
    return None


def derivative_support(instance: Instance, x, p: int = 1) -> set[int]:
    """Union of supports of derivative orders 1..p at x (1-based coordinates).

    Exact for plain instances at every order: the chain's banded structure
    means order 1 already activates every coordinate any higher order
    touches.  Dense variants are refused.
    """
    if not isinstance(instance, PlainInstance):
        raise UnsupportedOrderError(
            "support is only meaningful for the plain instance (dense otherwise)"
        )
    if p < 1:
        raise DomainError("p must be >= 1")
    return instance.support(np.asarray(x, dtype=float))


def check_zero_respecting(
    trace: Trace, instance: Instance, p: int = 1
) -> Optional[tuple[int, int]]:
    """Verify a trace is p-th order zero-respecting for the instance.

    Returns None when the containment holds at every step, else the first
    violation as (query index, coordinate), both 1-based.  The first query
    must be exactly the origin.
    """
    discovered: set[int] = set()
    for t, entry in enumerate(trace.entries, start=1):
        supp_x = {int(j) + 1 for j in np.flatnonzero(entry.point != 0.0)}
        bad = supp_x - discovered
        if bad:
            return (t, min(bad))
        discovered |= derivative_support(instance, entry.point, p)
    return None
