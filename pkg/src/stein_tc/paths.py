"""Finite-grid paths on [0, 1] and continuous time changes.

A :class:`GridPath` is either piecewise constant and right-continuous
(``"piecewise-constant"``) or piecewise linear (``"piecewise-linear"``).
Piecewise-linear paths may list a breakpoint twice to encode a jump: the first
entry is the left limit, the second the value at that time.  This is how
compensated Poisson paths (linear drift plus jumps) are stored exactly.

Time changes are nondecreasing continuous maps ``s: [0, 1] -> [0, inf)`` with
``s(0) = 0``.  Closed forms are ``identity``, ``linear`` (``c*t``) and ``power``
(``c*t**alpha``); tabulated ones are piecewise linear so continuity holds by
construction.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, StructuralError

STEP = "piecewise-constant"
LINEAR = "piecewise-linear"
KINDS = (STEP, LINEAR)


@dataclass(frozen=True, eq=False)
class GridPath:
    times: np.ndarray
    values: np.ndarray
    kind: str = STEP

    def __post_init__(self):
        t = np.array(self.times, dtype=np.float64)
        v = np.array(self.values, dtype=np.float64)
        if self.kind not in KINDS:
            raise StructuralError(f"unknown path kind {self.kind!r}")
        if t.ndim != 1 or v.ndim != 1:
            raise StructuralError("times and values must be one-dimensional")
        if t.size != v.size:
            raise StructuralError("times and values differ in length")
        if t.size < 2 or t[0] != 0.0 or t[-1] != 1.0:
            raise StructuralError("times must start at 0 and end at 1")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise StructuralError("non-finite time or value")
        dt = np.diff(t)
        if self.kind == STEP:
            if np.any(dt <= 0):
                raise StructuralError("piecewise-constant times must be strictly increasing")
        else:
            if np.any(dt < 0):
                raise StructuralError("times must be nondecreasing")
            flat = dt == 0
            if flat[0] or np.any(flat[1:] & flat[:-1]):
                raise StructuralError("a breakpoint may repeat at most once and not at t=0")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size

    @classmethod
    def constant(cls, c: float, kind: str = STEP) -> "GridPath":
        return cls(np.array([0.0, 1.0]), np.array([c, c], dtype=float), kind)

    @classmethod
    def zero(cls, kind: str = STEP) -> "GridPath":
        return cls.constant(0.0, kind)

    def scaled(self, a: float) -> "GridPath":
        return GridPath(self.times, a * self.values, self.kind)

    def to_record(self) -> dict:
        return {
            "times": [float(x) for x in self.times],
            "values": [float(x) for x in self.values],
            "kind": self.kind,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "GridPath":
        return cls(np.array(rec["times"], dtype=float), np.array(rec["values"], dtype=float), rec["kind"])


def _check_t(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if np.any(~(t >= 0.0) | ~(t <= 1.0)):
        raise DomainError("evaluation time outside [0, 1]")
    return t


def _right(p: GridPath, t: np.ndarray) -> np.ndarray:
    times, vals = p.times, p.values
    idx = np.searchsorted(times, t, side="right") - 1
    if p.kind == STEP:
        return vals[idx]
    last = idx >= times.size - 1
    i = np.minimum(idx, times.size - 2)
    t0, t1 = times[i], times[i + 1]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = vals[i] + (t - t0) / (t1 - t0) * (vals[i + 1] - vals[i])
    return np.where(last, vals[-1], out)


def _left(p: GridPath, t: np.ndarray) -> np.ndarray:
    times, vals = p.times, p.values
    j = np.searchsorted(times, t, side="left")
    at_zero = j == 0
    if p.kind == STEP:
        return np.where(at_zero, vals[0], vals[np.maximum(j - 1, 0)])
    jj = np.clip(j, 1, times.size - 1)
    hit = times[np.minimum(j, times.size - 1)] == t
    t0, t1 = times[jj - 1], times[jj]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = vals[jj - 1] + (t - t0) / (t1 - t0) * (vals[jj] - vals[jj - 1])
    out = np.where(hit, vals[np.minimum(j, times.size - 1)], out)
    return np.where(at_zero, vals[0], out)


def eval_path(p: GridPath, t):
    """Value of ``p`` at ``t`` (scalar or array); right-continuous at jumps."""
    tt = _check_t(t)
    out = _right(p, tt)
    return float(out) if np.ndim(t) == 0 else out


def left_limit(p: GridPath, t):
    tt = _check_t(t)
    out = _left(p, tt)
    return float(out) if np.ndim(t) == 0 else out


def sup_norm(p: GridPath) -> float:
    # For both kinds the supremum is attained at (or approached toward) a stored breakpoint.
    return float(np.max(np.abs(p.values)))


def integral(p: GridPath) -> float:
    """Exact integral of ``p`` over [0, 1]."""
    dt = np.diff(p.times)
    if p.kind == STEP:
        return float(np.dot(p.values[:-1], dt))
    return float(np.dot(0.5 * (p.values[:-1] + p.values[1:]), dt))


def combine(a: float, p: GridPath, b: float, q: GridPath) -> GridPath:
    """Pointwise ``a*p + b*q`` on the merged breakpoint grid.

    Two piecewise-constant inputs give a piecewise-constant result; otherwise
    the constant input is promoted and jumps are stored as repeated breakpoints.
    """
    if p.kind not in KINDS or q.kind not in KINDS:
        raise StructuralError("incompatible path kinds")
    grid = np.union1d(p.times, q.times)
    right = a * _right(p, grid) + b * _right(q, grid)
    if p.kind == STEP and q.kind == STEP:
        return GridPath(grid, right, STEP)
    left = a * _left(p, grid) + b * _left(q, grid)
    jump = (left != right) & (grid > 0)
    reps = np.where(jump, 2, 1)
    times = np.repeat(grid, reps)
    vals = np.empty(times.size)
    pos = np.cumsum(reps) - 1
    vals[pos] = right
    vals[pos[jump] - 1] = left[jump]
    return GridPath(times, vals, LINEAR)


# ---------------------------------------------------------------------------
# serialization


def path_to_csv(p: GridPath) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", p.kind])
    w.writerow(["t", "value"])
    for t, v in zip(p.times, p.values):
        w.writerow([repr(float(t)), repr(float(v))])
    return buf.getvalue()


def path_from_csv(text: str) -> GridPath:
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2 or rows[0][0] != "kind" or rows[1] != ["t", "value"]:
        raise StructuralError("not a GridPath CSV")
    body = rows[2:]
    return GridPath(
        np.array([float(r[0]) for r in body]),
        np.array([float(r[1]) for r in body]),
        rows[0][1],
    )


def path_to_json(p: GridPath) -> str:
    return json.dumps(p.to_record())


def path_from_json(text: str) -> GridPath:
    return GridPath.from_record(json.loads(text))


# ---------------------------------------------------------------------------
# time changes


@dataclass(frozen=True, eq=False)
class TimeChange:
    form: str
    scale: float = 1.0
    alpha: float = 1.0
    table: GridPath | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.form == "tabulated":
            tab = self.table
            if tab is None or tab.kind != LINEAR:
                raise StructuralError("tabulated time change needs a piecewise-linear table")
            if np.any(np.diff(tab.times) <= 0):
                raise StructuralError("tabulated time change needs strictly increasing times")
            if tab.values[0] != 0.0 or np.any(np.diff(tab.values) < 0):
                raise StructuralError("time change must start at 0 and be nondecreasing")
        elif self.form in ("identity", "linear", "power"):
            if not (self.scale > 0 and self.alpha > 0):
                raise StructuralError("closed-form time changes must be strictly increasing")
        else:
            raise StructuralError(f"unknown time change form {self.form!r}")

    @classmethod
    def identity(cls) -> "TimeChange":
        return cls("identity")

    @classmethod
    def linear(cls, c: float) -> "TimeChange":
        return cls("linear", scale=float(c))

    @classmethod
    def power(cls, alpha: float, c: float = 1.0) -> "TimeChange":
        return cls("power", scale=float(c), alpha=float(alpha))

    @classmethod
    def tabulated(cls, times, values) -> "TimeChange":
        return cls("tabulated", table=GridPath(times, values, LINEAR))

    @classmethod
    def parse(cls, spec: str) -> "TimeChange":
        """Build from ``identity``, ``linear:C``, ``power:ALPHA`` or ``power:ALPHA:C``."""
        parts = spec.strip().split(":")
        try:
            if parts[0] == "identity" and len(parts) == 1:
                return cls.identity()
            if parts[0] == "linear" and len(parts) == 2:
                return cls.linear(float(parts[1]))
            if parts[0] == "power" and len(parts) in (2, 3):
                return cls.power(float(parts[1]), float(parts[2]) if len(parts) == 3 else 1.0)
        except ValueError:
            pass
        raise StructuralError(f"cannot parse time change {spec!r}")

    def __str__(self):
        if self.form == "identity":
            return "identity"
        if self.form == "linear":
            return f"linear:{self.scale!r}"
        if self.form == "power":
            return f"power:{self.alpha!r}:{self.scale!r}"
        return f"tabulated[{len(self.table)}]"

    def __call__(self, t):
        tt = _check_t(t)
        if self.form == "identity":
            out = tt * 1.0
        elif self.form == "linear":
            out = self.scale * tt
        elif self.form == "power":
            out = self.scale * tt**self.alpha
        else:
            out = _right(self.table, tt)
        return float(out) if np.ndim(t) == 0 else out

    @property
    def total(self) -> float:
        if self.form == "tabulated":
            return float(self.table.values[-1])
        return float(self.scale)

    @property
    def piecewise_linear(self) -> bool:
        return self.form != "power" or self.alpha == 1.0

    def breakpoints(self) -> np.ndarray:
        if self.form == "tabulated":
            return self.table.times
        return np.array([0.0, 1.0])

    def scaled(self, a: float) -> "TimeChange":
        if self.form == "tabulated":
            return TimeChange.tabulated(self.table.times, a * self.table.values)
        if self.form == "identity":
            return TimeChange.linear(a)
        return TimeChange(self.form, scale=a * self.scale, alpha=self.alpha)

    def tabulate(self, points: int = 1025) -> "TimeChange":
        if self.form == "tabulated":
            return self
        t = np.linspace(0.0, 1.0, points)
        return TimeChange.tabulated(t, self(t))

    def _inverse(self, y: np.ndarray) -> np.ndarray:
        if self.form == "identity":
            return y * 1.0
        if self.form == "linear":
            return y / self.scale
        if self.form == "power":
            return np.minimum((y / self.scale) ** (1.0 / self.alpha), 1.0)
        tab = self.table
        i = np.searchsorted(tab.values, y, side="left")
        i1 = np.clip(i, 1, tab.times.size - 1)
        v0, v1 = tab.values[i1 - 1], tab.values[i1]
        t0, t1 = tab.times[i1 - 1], tab.times[i1]
        with np.errstate(invalid="ignore", divide="ignore"):
            out = t0 + (y - v0) / (v1 - v0) * (t1 - t0)
        return np.where(i == 0, 0.0, np.minimum(out, t1))


def inverse_tc(s: TimeChange, y):
    """Generalized inverse ``inf{t : s(t) >= y}``; flat stretches resolve leftmost."""
    yy = np.asarray(y, dtype=np.float64)
    if np.any(yy < 0):
        raise DomainError("inverse_tc needs y >= 0")
    if np.any(yy > s.total):
        raise DomainError(f"y exceeds s(1) = {s.total}")
    out = s._inverse(yy)
    return float(out) if np.ndim(y) == 0 else out


def uniform_distance(s: TimeChange, s2: TimeChange) -> float:
    """``sup_t |s(t) - s2(t)|``; exact when both are piecewise linear."""
    grid = np.union1d(s.breakpoints(), s2.breakpoints())
    if s.piecewise_linear and s2.piecewise_linear:
        return float(np.max(np.abs(s(grid) - s2(grid))))
    dense = np.union1d(grid, np.linspace(0.0, 1.0, 2**14 + 1))
    diff = np.abs(s(dense) - s2(dense))
    best = float(diff.max())
    for k in np.argsort(diff)[-4:]:
        lo, hi = dense[max(k - 1, 0)], dense[min(k + 1, dense.size - 1)]
        if hi <= lo:
            continue
        res = minimize_scalar(lambda t: -abs(s(t) - s2(t)), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-13})
        best = max(best, -float(res.fun))
    return best


# ---------------------------------------------------------------------------
# rate integrals

RATE_KINDS = ("R1", "Rm1", "R1_limit", "In", "I_limit")


def rate_coefficients(kind: str, n: int | None = None, nu1: float = 0.0, nu2: float = 0.0):
    """Coefficients ``(c0, c1, c2)`` of the integrand ``c0 + c1*x + c2*x**2``."""
    if kind in ("R1", "Rm1"):
        if n is None or n < 1:
            raise DomainError("population size n >= 1 required")
        if kind == "R1":
            # (x/2 + nu2/n)(1 - x)
            return nu2 / n, 0.5 - nu2 / n, -0.5
        # ((1 - x)/2 + nu1/n) x
        return 0.0, 0.5 + nu1 / n, -0.5
    if kind == "R1_limit":
        return 0.0, 0.5, -0.5
    if kind in ("In", "I_limit"):
        return nu2, -(nu1 + nu2), 0.0
    raise DomainError(f"unknown rate kind {kind!r}")


def integrated_rate(x: GridPath, kind: str, n: int | None = None, nu1: float = 0.0, nu2: float = 0.0):
    """Running integral ``t -> int_0^t f(x(u)) du`` for the genetic rate integrands.

    ``R1``: (x/2 + nu2/n)(1-x); ``Rm1``: ((1-x)/2 + nu1/n) x; ``R1_limit``:
    x(1-x)/2; ``In``/``I_limit``: nu2 - (nu1+nu2) x.  Segment integrals are exact
    for both path kinds.  The R kinds return a tabulated :class:`TimeChange`;
    the signed I kinds return a piecewise-linear :class:`GridPath`.
    """
    if nu1 < 0 or nu2 < 0:
        raise DomainError("mutation rates must be nonnegative")
    if np.any(x.values < 0) or np.any(x.values > 1):
        raise DomainError("allele-fraction path leaves [0, 1]")
    c0, c1, c2 = rate_coefficients(kind, n, nu1, nu2)

    def f(v):
        return c0 + v * (c1 + c2 * v)

    dt = np.diff(x.times)
    va, vb = x.values[:-1], x.values[1:]
    if x.kind == STEP:
        seg = f(va) * dt
    else:
        seg = dt * (f(va) + 4.0 * f(0.5 * (va + vb)) + f(vb)) / 6.0
    keep = np.concatenate(([True], dt > 0))
    times = x.times[keep]
    cum = np.concatenate(([0.0], np.cumsum(seg)))[keep]
    if kind in ("In", "I_limit"):
        return GridPath(times, cum, LINEAR)
    return TimeChange.tabulated(times, np.maximum.accumulate(cum))


def merge_times(arrays: Iterable[np.ndarray]) -> np.ndarray:
    out = np.unique(np.concatenate([np.asarray(a, dtype=float) for a in arrays]))
    return out
