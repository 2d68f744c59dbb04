"""Test functionals ``g(w) = scale * phi(L w) + shift`` with exact derivatives.

``L`` is a bounded linear statistic of a path (point evaluation, time average
or a finite weighted sum of point evaluations) and ``phi`` a smooth scalar map.
For this family the Frechet derivatives are rank one:

    Dg(w)[h]      = scale * phi'(Lw)  * Lh
    D^2g(w)[h, k] = scale * phi''(Lw) * Lh * Lk

so every quantity the Stein machinery needs is available in closed form.

Catalog ids look like ``sin_avg``, ``cos_eval@0.5`` or
``sin_wsum[0.25:1,0.75:-1]``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError, UsageError
from .paths import LINEAR, STEP, GridPath, combine, sup_norm


@dataclass(frozen=True)
class OuterMap:
    name: str
    f: object
    d1: object
    d2: object
    d3: object
    # certified sup|phi|, sup|phi'|, sup|phi''|, Lip(phi'') (inf when unbounded)
    sup0: float
    sup1: float
    sup2: float
    lip2: float

    @property
    def bounded(self) -> bool:
        return np.isfinite(self.sup0) and np.isfinite(self.sup1)


def _cubic(x):
    return x**3 / (1.0 + x * x) ** 1.5


def _cubic1(x):
    return 3.0 * x * x / (1.0 + x * x) ** 2.5


def _cubic2(x):
    return 3.0 * x * (2.0 - 3.0 * x * x) / (1.0 + x * x) ** 3.5


def _cubic3(x):
    x2 = x * x
    return 3.0 * (12.0 * x2 * x2 - 21.0 * x2 + 2.0) / (1.0 + x2) ** 4.5


def _zeros(x):
    return np.zeros_like(np.asarray(x, dtype=float)) + 0.0 * x


def _ones(x):
    return np.ones_like(np.asarray(x, dtype=float)) + 0.0 * x


_INF = float("inf")

OUTER_MAPS = {
    "sin": OuterMap("sin", np.sin, np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), 1.0, 1.0, 1.0, 1.0),
    "cos": OuterMap("cos", np.cos, lambda x: -np.sin(x), lambda x: -np.cos(x), np.sin, 1.0, 1.0, 1.0, 1.0),
    # x^3 / (1 + x^2)^(3/2): cubic at the origin, saturating at +-1.
    # Exact sups: sqrt(6)/3 critical point gives 0.557709..., phi'' peaks at 1.155335..., |phi'''| <= 6.
    "cubic": OuterMap("cubic", _cubic, _cubic1, _cubic2, _cubic3, 1.0, 0.5578, 1.1554, 6.0),
    "quad": OuterMap("quad", np.square, lambda x: 2.0 * x, lambda x: 2.0 * _ones(x), _zeros, _INF, _INF, 2.0, 0.0),
    "linear": OuterMap("linear", lambda x: 1.0 * x, _ones, _zeros, _zeros, _INF, 1.0, 0.0, 0.0),
    "zero": OuterMap("zero", _zeros, _zeros, _zeros, _zeros, 0.0, 0.0, 0.0, 0.0),
}


@dataclass(frozen=True)
class LinearStatistic:
    """Bounded linear functional of a path: ``eval``, ``avg`` or ``wsum``."""

    kind: str
    points: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        if self.kind == "avg":
            return
        if self.kind not in ("eval", "wsum"):
            raise ConfigError(f"unknown statistic {self.kind!r}")
        if len(self.points) != len(self.weights) or not self.points:
            raise ConfigError("statistic needs matching points and weights")
        if any(not 0.0 <= t <= 1.0 for t in self.points):
            raise DomainError("statistic evaluation point outside [0, 1]")

    @classmethod
    def average(cls):
        return cls("avg")

    @classmethod
    def point(cls, t0: float):
        return cls("eval", (float(t0),), (1.0,))

    @classmethod
    def weighted(cls, pairs):
        pts, wts = zip(*pairs)
        return cls("wsum", tuple(float(p) for p in pts), tuple(float(w) for w in wts))

    @property
    def op_norm(self) -> float:
        if self.kind == "avg":
            return 1.0
        return float(sum(abs(a) for a in self.weights))

    def grid_weights(self, times: np.ndarray, kind: str) -> np.ndarray:
        """Vector ``c`` with ``L(p) = c @ p.values`` for any path on ``times``."""
        times = np.asarray(times, dtype=float)
        c = np.zeros(times.size)
        if self.kind == "avg":
            dt = np.diff(times)
            if kind == STEP:
                c[:-1] = dt
            else:
                c[:-1] += 0.5 * dt
                c[1:] += 0.5 * dt
            return c
        for t0, a in zip(self.points, self.weights):
            i = int(np.searchsorted(times, t0, side="right")) - 1
            if kind == STEP or i >= times.size - 1:
                c[i] += a
            else:
                lam = (t0 - times[i]) / (times[i + 1] - times[i])
                c[i] += a * (1.0 - lam)
                c[i + 1] += a * lam
        return c

    def __call__(self, p: GridPath) -> float:
        return float(self.grid_weights(p.times, p.kind) @ p.values)

    def of_indicator(self, tau) -> np.ndarray:
        """``L(1_[tau, 1])`` for an array of jump times ``tau``."""
        tau = np.asarray(tau, dtype=float)
        if self.kind == "avg":
            return 1.0 - tau
        out = np.zeros(tau.shape)
        for t0, a in zip(self.points, self.weights):
            out = out + a * (tau <= t0)
        return out

    def label(self) -> str:
        if self.kind == "avg":
            return "avg"
        if self.kind == "eval":
            return f"eval@{self.points[0]!r}"
        return "wsum[" + ",".join(f"{t!r}:{a!r}" for t, a in zip(self.points, self.weights)) + "]"


@dataclass(frozen=True)
class FunctionalSpec:
    outer: str
    inner: LinearStatistic = field(default_factory=LinearStatistic.average)
    scale: float = 1.0
    shift: float = 0.0

    def __post_init__(self):
        if self.outer not in OUTER_MAPS:
            raise ConfigError(f"unknown outer map {self.outer!r}")

    @property
    def phi(self) -> OuterMap:
        return OUTER_MAPS[self.outer]

    @property
    def id(self) -> str:
        base = f"{self.outer}_{self.inner.label()}"
        if self.scale != 1.0:
            base = f"{self.scale!r}*{base}"
        if self.shift != 0.0:
            base = f"{base}{'+' if self.shift > 0 else '-'}{abs(self.shift)!r}"
        return base

    def times(self, c: float) -> "FunctionalSpec":
        return replace(self, scale=c * self.scale, shift=c * self.shift)

    def plus(self, b: float) -> "FunctionalSpec":
        return replace(self, shift=self.shift + b)

    # scalar-level evaluation, shared by path and batch code
    def at(self, x):
        return self.scale * self.phi.f(x) + self.shift

    def d1_at(self, x):
        return self.scale * self.phi.d1(x)

    def d2_at(self, x):
        return self.scale * self.phi.d2(x)

    def d3_at(self, x):
        return self.scale * self.phi.d3(x)


_ID = re.compile(r"^(?P<outer>[a-z]+)_(?P<inner>avg|eval@(?P<t0>[^\[\]]+)|wsum\[(?P<pairs>[^\]]*)\])$")


def parse_functional(text: str) -> FunctionalSpec:
    m = _ID.match(text.strip())
    if not m:
        raise ConfigError(f"cannot parse functional id {text!r}")
    try:
        if m["inner"] == "avg":
            inner = LinearStatistic.average()
        elif m["t0"] is not None:
            inner = LinearStatistic.point(float(m["t0"]))
        else:
            pairs = [tuple(float(x) for x in item.split(":")) for item in m["pairs"].split(",")]
            inner = LinearStatistic.weighted(pairs)
    except ValueError as exc:
        raise ConfigError(f"cannot parse functional id {text!r}") from exc
    return FunctionalSpec(m["outer"], inner)


def eval_functional(g: FunctionalSpec, p: GridPath) -> float:
    return float(g.at(g.inner(p)))


def differentiate(g: FunctionalSpec, p: GridPath, h: GridPath, k: GridPath | None = None, order: int = 1) -> float:
    """``Dg(p)[h]`` (order 1) or ``D^2g(p)[h, k]`` (order 2)."""
    x = g.inner(p)
    if order == 1:
        return float(g.d1_at(x) * g.inner(h))
    if order == 2:
        if k is None:
            raise UsageError("second derivative needs a second direction k")
        return float(g.d2_at(x) * g.inner(h) * g.inner(k))
    raise UsageError("order must be 1 or 2")


def m_norm_terms(g: FunctionalSpec) -> tuple[float, float, float, float]:
    """Certified upper bounds on the four weighted suprema of ``g``."""
    phi, c, L = g.phi, abs(g.scale), g.inner.op_norm
    if not phi.bounded:
        raise DomainError(
            f"outer map {phi.name!r} is unbounded; use quadratic_m_norm for polynomial functionals"
        )
    return (c * phi.sup0 + abs(g.shift), c * phi.sup1 * L, c * phi.sup2 * L**2, c * phi.lip2 * L**3)


def m_norm_bound(g: FunctionalSpec) -> float:
    return float(sum(m_norm_terms(g)))


def _weighted_growth(a: float, power: int, b: float) -> float:
    """Upper bound on ``max_r (a r^power + b) / (1 + r^3)`` over ``r >= 0``."""
    # smooth with a single interior maximum and decaying tail; a dense grid plus
    # a small relative margin gives a safe upper bound
    r = np.concatenate([np.linspace(0.0, 10.0, 200001), np.geomspace(10.0, 1e6, 2001)])
    return float(np.max((a * r**power + b) / (1.0 + r**3))) * (1.0 + 1e-6)


def quadratic_m_norm(g: FunctionalSpec) -> float:
    """Upper bound on the M-norm of ``scale*(Lw)^2 + shift`` from the weighted definition.

    With r = ||w|| and |Lw| <= ||L|| r the four suprema are at most
    max_r (c||L||^2 r^2 + |shift|)/(1 + r^3), c||L||^2, 2c||L||^2 and 0.
    """
    if g.outer != "quad":
        raise UsageError("quadratic_m_norm applies to the quad outer map only")
    c, L2, b = abs(g.scale), g.inner.op_norm**2, abs(g.shift)
    return _weighted_growth(c * L2, 2, b) + c * L2 + 2.0 * c * L2


def linear_m_norm(g: FunctionalSpec) -> float:
    """Upper bound on the M-norm of ``scale*Lw + shift``: the value term plus ``c||L||``."""
    if g.outer != "linear":
        raise UsageError("linear_m_norm applies to the linear outer map only")
    c, L, b = abs(g.scale), g.inner.op_norm, abs(g.shift)
    return _weighted_growth(c * L, 1, b) + c * L


def certified_m_norm(g: FunctionalSpec) -> float:
    """Certified M-norm bound for any catalog functional."""
    if g.phi.bounded:
        return m_norm_bound(g)
    return quadratic_m_norm(g) if g.outer == "quad" else linear_m_norm(g)


@dataclass
class FrechetReport:
    trials: int
    max_ratio: float
    violations: int
    bound: float


def frechet_check(g: FunctionalSpec, trials: int = 1000, seed: int = 0, bound: float | None = None) -> FrechetReport:
    """Second-order Taylor remainder check ``|R| <= bound * ||h||^3`` on random paths."""
    rng = np.random.default_rng(seed)
    if bound is None:
        bound = certified_m_norm(g)
    worst, bad = 0.0, 0
    for _ in range(trials):
        w, h = random_path(rng, scale=rng.uniform(0.1, 3.0)), random_path(rng, scale=10 ** rng.uniform(-3, 0))
        wh = combine(1.0, w, 1.0, h)
        rem = abs(
            eval_functional(g, wh) - eval_functional(g, w) - differentiate(g, w, h) - 0.5 * differentiate(g, w, h, h, 2)
        )
        hn = sup_norm(h)
        if hn == 0.0:
            if rem != 0.0:
                bad += 1
            continue
        ratio = rem / hn**3
        worst = max(worst, ratio)
        bad += ratio > bound
    return FrechetReport(trials, worst, bad, bound)


def random_path(rng: np.random.Generator, size: int | None = None, scale: float = 1.0, kind: str | None = None) -> GridPath:
    """Random path with a random grid; used by property checks and examples."""
    if size is None:
        size = int(rng.integers(2, 40))
    if kind is None:
        kind = STEP if rng.random() < 0.5 else LINEAR
    inner = np.sort(rng.uniform(0.0, 1.0, size=max(size - 2, 0)))
    times = np.unique(np.concatenate(([0.0], inner, [1.0])))
    vals = scale * rng.standard_normal(times.size)
    return GridPath(times, vals, kind)
