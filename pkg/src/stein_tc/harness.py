"""Monte Carlo gap estimates, rate sweeps and log-log rate fits.

A *sampler* is named by a string id and configured by a :class:`SamplerSpec`;
:func:`estimate_gap` draws ``n_paths`` paths from two samplers, applies a
functional and reports ``E g(a) - E g(b)`` with its standard error.

Path ``i`` of a run is always generated from ``StreamKey(seed, lane, i)``, and
per-path values are reduced in index order, so results are bit-identical for
any worker count.

Sampler ids:

``scaled_rw:<dist>``   time-changed scaled random walk, ``dist`` in rademacher,
                       centered_poisson1, std_normal
``discretized_bm``     ``A_n``
``time_changed_bm``    ``B o s`` on a uniform grid
``compensated_poisson`` ``(P(n Sn) - n Sn)/sqrt(n)``
``moran`` / ``wright_fisher``   allele-fraction paths
``Mn`` / ``M``         martingale parts of the two population models
``moran_marginal``     ``Binomial(n, X(t))/n`` at grid times (step path),
                       ``X`` a Wright-Fisher path
``wf_marginal``        the Wright-Fisher path observed at the same grid times
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds as B
from .errors import ConfigError, DomainError
from .functionals import FunctionalSpec, certified_m_norm, eval_functional
from .paths import LINEAR, STEP, GridPath, TimeChange, eval_path, uniform_distance
from .process_sim import (
    STEP_DISTS,
    ModelParams,
    lookdown_marginals,
    m_given_state,
    sim_bm_pair,
    sim_compensated_poisson,
    sim_discretized_bm,
    sim_M,
    sim_Mn,
    sim_moran,
    sim_poisson_pair,
    sim_scaled_rw,
    sim_time_changed_bm,
    sim_wright_fisher,
    uniform_grid,
    wright_fisher_values,
)
from .streams import StreamKey, derive_seed

COUPLINGS = ("independent", "common_random", "lookdown")
BASE_SAMPLERS = ("discretized_bm", "time_changed_bm", "compensated_poisson", "moran", "wright_fisher",
                 "Mn", "M", "moran_marginal", "wf_marginal")
SAMPLERS = BASE_SAMPLERS + tuple(f"scaled_rw:{d}" for d in STEP_DISTS)
STEP_THIRD_MOMENT = {
    "rademacher": 1.0,
    "centered_poisson1": B.POISSON_ABS3,
    "std_normal": 2.0 * math.sqrt(2.0 / math.pi),
}


@dataclass(frozen=True)
class SamplerSpec:
    """Shared configuration for every sampler in a run."""

    n: int = 64
    s: TimeChange = field(default_factory=TimeChange.identity)
    Sn: TimeChange = field(default_factory=TimeChange.identity)
    nu1: float = 0.0
    nu2: float = 0.0
    x0: float = 0.5
    dt: float = 1e-3
    grid_points: int = 257

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.n, self.nu1, self.nu2, self.x0)

    @property
    def grid(self) -> np.ndarray:
        return uniform_grid(self.grid_points)

    def with_n(self, n: int) -> "SamplerSpec":
        return replace(self, n=int(n))


def check_sampler(sid: str) -> str:
    if sid not in SAMPLERS:
        raise ConfigError(f"unknown sampler {sid!r}; expected one of {SAMPLERS}")
    return sid


def _grid_step_path(grid: np.ndarray, values: np.ndarray) -> GridPath:
    return GridPath(grid, values, STEP)


def draw(sid: str, spec: SamplerSpec, key: StreamKey) -> GridPath:
    """One path of sampler ``sid``."""
    check_sampler(sid)
    if sid.startswith("scaled_rw:"):
        return sim_scaled_rw(spec.n, sid.split(":", 1)[1], spec.s, key)
    if sid == "discretized_bm":
        return sim_discretized_bm(spec.n, spec.s, key)
    if sid == "time_changed_bm":
        return sim_time_changed_bm(spec.s, spec.grid, key)
    if sid == "compensated_poisson":
        return sim_compensated_poisson(spec.n, spec.Sn, key)
    if sid == "moran":
        return sim_moran(spec.params, key)
    if sid == "wright_fisher":
        return sim_wright_fisher(spec.params, spec.dt, key)
    if sid == "Mn":
        return sim_Mn(spec.params, key)
    if sid == "M":
        return sim_M(spec.params, spec.dt, key)
    x = sim_wright_fisher(spec.params, spec.dt, key.child("state"))
    if sid == "wf_marginal":
        return _grid_step_path(spec.grid, eval_path(x, spec.grid))
    return _grid_step_path(spec.grid, lookdown_marginals(x, spec.n, spec.grid, key.child("lookdown")))


def draw_batch(sid: str, spec: SamplerSpec, keys: list[StreamKey]) -> list[GridPath]:
    """Paths for several keys; identical to calling :func:`draw` per key."""
    check_sampler(sid)
    if sid in ("wright_fisher", "M", "wf_marginal", "moran_marginal"):
        state_keys = keys if sid == "wright_fisher" else [k.child("state") for k in keys]
        t, vals = wright_fisher_values(spec.params, spec.dt, state_keys)
        xs = [GridPath(t, v, LINEAR) for v in vals]
        if sid == "wright_fisher":
            return xs
        if sid == "M":
            return [m_given_state(x, spec.params, k.child("noise")) for x, k in zip(xs, keys)]
        g = spec.grid
        if sid == "wf_marginal":
            return [_grid_step_path(g, eval_path(x, g)) for x in xs]
        return [_grid_step_path(g, lookdown_marginals(x, spec.n, g, k.child("lookdown"))) for x, k in zip(xs, keys)]
    return [draw(sid, spec, k) for k in keys]


# ---------------------------------------------------------------------------
# couplings

_COMMON_PAIRS = {
    ("discretized_bm", "time_changed_bm"),
    ("scaled_rw:centered_poisson1", "compensated_poisson"),
}
_LOOKDOWN_PAIRS = {("moran_marginal", "wf_marginal")}


def check_coupling(a: str, b: str, coupling: str) -> None:
    check_sampler(a)
    check_sampler(b)
    if coupling not in COUPLINGS:
        raise ConfigError(f"unknown coupling {coupling!r}; expected one of {COUPLINGS}")
    pair = tuple(sorted((a, b)))
    if coupling == "common_random" and a != b and pair not in {tuple(sorted(p)) for p in _COMMON_PAIRS}:
        raise ConfigError(f"samplers {a!r} and {b!r} share no driving noise; use independent coupling")
    if coupling == "lookdown" and pair not in {tuple(sorted(p)) for p in _LOOKDOWN_PAIRS}:
        raise ConfigError("lookdown coupling applies only to the (moran_marginal, wf_marginal) pair")


def draw_pair(a: str, b: str, spec: SamplerSpec, coupling: str, seed: int, index: int) -> tuple[GridPath, GridPath]:
    key_a = StreamKey(seed, f"a:{a}", index)
    if coupling == "independent":
        return draw(a, spec, key_a), draw(b, spec, StreamKey(seed, f"b:{b}", index))
    if a == b:
        p = draw(a, spec, key_a)
        return p, p
    flip = (a, b) not in _COMMON_PAIRS | _LOOKDOWN_PAIRS
    first, second = (b, a) if flip else (a, b)
    key = StreamKey(seed, f"pair:{first}|{second}", index)
    if first == "discretized_bm":
        p, q = sim_bm_pair(spec.n, spec.s, spec.grid, key)
    elif first == "scaled_rw:centered_poisson1":
        p, q = sim_poisson_pair(spec.n, spec.s, spec.Sn, key)
    else:
        x = sim_wright_fisher(spec.params, spec.dt, key.child("state"))
        g = spec.grid
        p = _grid_step_path(g, lookdown_marginals(x, spec.n, g, key.child("lookdown")))
        q = _grid_step_path(g, eval_path(x, g))
    return (q, p) if flip else (p, q)


# ---------------------------------------------------------------------------
# gap estimation


@dataclass(frozen=True)
class GapEstimate:
    mean_a: float
    mean_b: float
    diff: float
    stderr: float
    ci95: float
    n_paths: int
    coupling: str
    seed: int
    functional: str

    def to_record(self) -> dict:
        return dict(self.__dict__)


def _values_chunk(task) -> tuple[np.ndarray, np.ndarray]:
    g, a, b, spec, coupling, seed, start, stop = task
    idx = range(start, stop)
    if coupling == "independent":
        pa = draw_batch(a, spec, [StreamKey(seed, f"a:{a}", i) for i in idx])
        pb = draw_batch(b, spec, [StreamKey(seed, f"b:{b}", i) for i in idx])
    else:
        pairs = [draw_pair(a, b, spec, coupling, seed, i) for i in idx]
        pa, pb = [p for p, _ in pairs], [q for _, q in pairs]
    va = np.array([eval_functional(g, p) for p in pa])
    vb = np.array([eval_functional(g, p) for p in pb])
    return va, vb


def path_values(g: FunctionalSpec, a: str, b: str, spec: SamplerSpec, n_paths: int, coupling: str,
                seed: int, workers: int = 1, chunk: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-path functional values ``(g(a_i), g(b_i))`` in path-index order.

    Paths are split into contiguous index chunks; with several workers the
    chunks run in separate processes, and results are concatenated in index
    order, so the output does not depend on ``workers`` or ``chunk``.
    """
    check_coupling(a, b, coupling)
    if chunk is None:
        chunk = 256 if workers <= 1 else max(16, -(-n_paths // (4 * workers)))
    tasks = [(g, a, b, spec, coupling, seed, s, min(n_paths, s + chunk)) for s in range(0, n_paths, chunk)]
    if workers <= 1 or len(tasks) == 1:
        parts = [_values_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_values_chunk, tasks))
    if not parts:
        return np.empty(0), np.empty(0)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def summarize_gap(va: np.ndarray, vb: np.ndarray, coupling: str, seed: int, functional: str) -> GapEstimate:
    n = va.size
    ma, mb = float(np.mean(va)), float(np.mean(vb))
    if n < 2:
        se = 0.0
    elif coupling == "independent":
        se = math.sqrt(np.var(va, ddof=1) / n + np.var(vb, ddof=1) / n)
    else:
        se = float(np.std(va - vb, ddof=1) / math.sqrt(n))
    return GapEstimate(ma, mb, ma - mb, se, 1.96 * se, n, coupling, seed, functional)


def estimate_gap(g: FunctionalSpec, sampler_a: str, sampler_b: str, n_paths: int, coupling: str, seed: int,
                 spec: SamplerSpec | None = None, workers: int = 1) -> GapEstimate:
    """Monte Carlo ``E g(a) - E g(b)`` with a paired or pooled standard error."""
    spec = spec or SamplerSpec()
    va, vb = path_values(g, sampler_a, sampler_b, spec, n_paths, coupling, seed, workers)
    return summarize_gap(va, vb, coupling, seed, g.id)


# ---------------------------------------------------------------------------
# bounds for a sampler pair


def functional_norm(g: FunctionalSpec) -> float:
    return certified_m_norm(g)


def pair_bound(g: FunctionalSpec, a: str, b: str, spec: SamplerSpec) -> float | None:
    """The closed-form bound that dominates ``|E g(a) - E g(b)|``, if one applies."""
    pair = {a, b}
    gaussian = {"time_changed_bm"}
    walks = {x for x in pair if x.startswith("scaled_rw:")}
    if len(walks) == 1 and pair - walks <= gaussian and len(pair) == 2:
        dist = next(iter(walks)).split(":", 1)[1]
        return B.bound_thm1(spec.n, spec.s.total, STEP_THIRD_MOMENT[dist], functional_norm(g)).total
    if pair == {"compensated_poisson", "time_changed_bm"}:
        return B.bound_thm2(spec.n, spec.s.total, spec.Sn.total, uniform_distance(spec.s, spec.Sn), functional_norm(g)).total
    if pair == {"Mn", "M"}:
        return B.bound_thm3(spec.n, spec.nu1, spec.nu2, functional_norm(g)).total
    if pair == {"discretized_bm", "time_changed_bm"}:
        # mean-value bound for the shared-B coupling with the k = 1 modulus bound
        return functional_norm(g) * B.bm_modulus_bounds(spec.n, spec.s.total)[0] if g.phi.bounded else None
    if a == b:
        return 0.0
    return None


# ---------------------------------------------------------------------------
# rate sweeps


@dataclass(frozen=True)
class RatePoint:
    n: int
    gap: GapEstimate
    bound: float | None
    seed: int


RATE_COLUMNS = ("n", "seed", "mean_a", "mean_b", "diff", "stderr", "ci95", "n_paths", "coupling",
                "functional", "bound")


def rate_sweep(g: FunctionalSpec, sampler_a: str, sampler_b: str, coupling: str, n_list, n_paths: int,
               seed: int, spec: SamplerSpec | None = None, workers: int = 1) -> list[RatePoint]:
    """One gap estimate and bound per ``n`` with per-``n`` derived seeds."""
    spec = spec or SamplerSpec()
    n_list = [int(n) for n in n_list]
    if len(n_list) < 4 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("n_list must be increasing with at least 4 entries")
    out = []
    for n in n_list:
        sub = derive_seed(seed, "rate", n)
        sp = spec.with_n(n)
        gap = estimate_gap(g, sampler_a, sampler_b, n_paths, coupling, sub, sp, workers)
        out.append(RatePoint(n, gap, pair_bound(g, sampler_a, sampler_b, sp), sub))
    return out


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def rate_csv(points: list[RatePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RATE_COLUMNS)
    for p in points:
        q = p.gap
        w.writerow([_fmt(v) for v in (p.n, p.seed, q.mean_a, q.mean_b, q.diff, q.stderr, q.ci95, q.n_paths,
                                       q.coupling, q.functional, p.bound)])
    return buf.getvalue()


@dataclass(frozen=True)
class RateFit:
    slope: float
    stderr: float
    points: int


def fit_rate(points, use: str = "gap", log_power: float = 0.0) -> RateFit:
    """Least-squares slope of ``log(value)`` against ``log(n)``.

    ``points`` are :class:`RatePoint` objects or ``(n, value)`` pairs;
    ``use`` picks ``|gap|`` or the bound.  With ``log_power = p`` the values
    are first divided by ``(log n)^p`` to remove a known logarithmic factor.
    """
    pairs = []
    for p in points:
        if isinstance(p, RatePoint):
            v = abs(p.gap.diff) if use == "gap" else p.bound
            pairs.append((p.n, v))
        else:
            pairs.append((p[0], p[1]))
    if use not in ("gap", "bound"):
        raise ConfigError("use must be 'gap' or 'bound'")
    kept = [(n, v) for n, v in pairs if v is not None and v > 0]
    if len(kept) < len(pairs):
        warnings.warn(f"dropped {len(pairs) - len(kept)} nonpositive values from the rate fit")
    if len(kept) < 4:
        raise DomainError("need at least 4 positive values to fit a rate")
    n = np.array([k[0] for k in kept], dtype=float)
    v = np.array([k[1] for k in kept], dtype=float)
    x = np.log(n)
    y = np.log(v) - log_power * np.log(np.log(n))
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    resid = y - y.mean() - slope * xc
    dof = x.size - 2
    se = float(math.sqrt((resid @ resid) / dof / (xc @ xc))) if dof > 0 else 0.0
    return RateFit(slope, se, int(x.size))


# ---------------------------------------------------------------------------
# holding-time Monte Carlo


def holding_prob_mc(lam: float, trials: int, seed: int) -> tuple[float, float]:
    """Simulate ``1 + Poisson(lam)`` holding times uniform on the simplex
    ``{x >= 0, sum x <= 1}`` and return ``P(min >= lam^-3)`` with its SE."""
    if not lam > 1:
        raise DomainError("need lambda > 1")
    rng = StreamKey(seed, "holding").rng()
    r = lam**-3.0
    counts = 1 + rng.poisson(lam, size=trials)
    hits = np.zeros(trials, dtype=bool)
    for i in np.unique(counts):
        sel = np.flatnonzero(counts == i)
        # Dirichlet(1, ..., 1) with i + 1 parts; the first i are the holding times
        e = rng.standard_exponential((sel.size, i + 1))
        x = e[:, :i] / e.sum(axis=1, keepdims=True)
        hits[sel] = x.min(axis=1) >= r
    p = float(hits.mean())
    return p, math.sqrt(p * (1.0 - p) / trials)
