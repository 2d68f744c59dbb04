"""Samplers for the random walks, Gaussian processes and population models.

Every sampler is a pure function of its parameters and a
:class:`~stein_tc.streams.StreamKey`; batch variants call the same code per
path so a path never depends on which batch it was generated in.

Processes:

* ``Y_n(t) = n^{-1/2} sum_{i <= floor(n s(t))} X_i`` (scaled random walk),
  with ``A_n`` the Gaussian-step special case;
* ``Z = B o s`` (time-changed Brownian motion);
* ``(P(n S(t)) - n S(t)) / sqrt(n)`` (compensated Poisson under a time change);
* the Moran chain ``X_n`` and the Wright-Fisher diffusion ``X``;
* the martingale parts ``M_n`` and ``M`` built from their rate integrals;
* fixed-time lookdown marginals ``Binomial(n, X(t)) / n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, DomainError, StructuralError
from .paths import LINEAR, STEP, GridPath, TimeChange, eval_path, integrated_rate, inverse_tc
from .streams import StreamKey

STEP_DISTS = ("rademacher", "centered_poisson1", "std_normal")


@dataclass(frozen=True)
class ModelParams:
    """Population-model parameters; the time horizon is always 1."""

    n: int
    nu1: float = 0.0
    nu2: float = 0.0
    x0: float = 0.5

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError("n must be an integer >= 1")
        if self.nu1 < 0 or self.nu2 < 0:
            raise ConfigError("mutation rates must be nonnegative")
        if not 0.0 <= self.x0 <= 1.0:
            raise ConfigError("x0 must lie in [0, 1]")

    @property
    def k0(self) -> int:
        """Initial count ``n*x0`` for the Moran chain."""
        k = round(self.n * self.x0)
        if abs(k - self.n * self.x0) > 1e-9:
            raise DomainError(f"n*x0 = {self.n * self.x0} is not an integer")
        return int(k)


# ---------------------------------------------------------------------------
# random walks and Brownian motion


def draw_steps(rng: np.random.Generator, dist: str, size: int) -> np.ndarray:
    if dist == "rademacher":
        return 2.0 * rng.integers(0, 2, size=size) - 1.0
    if dist == "centered_poisson1":
        return rng.poisson(1.0, size=size) - 1.0
    if dist == "std_normal":
        return rng.standard_normal(size)
    raise ConfigError(f"unknown step distribution {dist!r}; expected one of {STEP_DISTS}")


def jump_count(n: int, s: TimeChange) -> int:
    """``floor(n s(1))``, robust to the last ulp of ``n*s(1)``."""
    return int(math.floor(n * s.total + 1e-9))


def jump_times(n: int, s: TimeChange) -> np.ndarray:
    """Breakpoints ``s^{-1}(i/n)`` for ``i = 1..floor(n s(1))``."""
    k = jump_count(n, s)
    y = np.minimum(np.arange(1, k + 1) / n, s.total)
    return np.atleast_1d(inverse_tc(s, y)).astype(float)


def _walk_path(tau: np.ndarray, partial: np.ndarray) -> GridPath:
    """Right-continuous step path equal to ``partial[i]`` from ``tau[i]`` on."""
    if tau.size:
        keep = np.append(tau[1:] != tau[:-1], True)
        tau, partial = tau[keep], partial[keep]
    times = np.concatenate(([0.0], tau))
    vals = np.concatenate(([0.0], partial))
    if times[-1] < 1.0:
        times = np.append(times, 1.0)
        vals = np.append(vals, vals[-1])
    return GridPath(times, vals, STEP)


def sim_scaled_rw(n: int, step_dist: str, s: TimeChange, key: StreamKey, zero_steps: bool = False) -> GridPath:
    """Time-changed scaled random walk with i.i.d. mean-0 variance-1 steps.

    ``zero_steps`` forces every step to 0 (a degenerate hook for tests)."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    tau = jump_times(n, s)
    steps = draw_steps(key.rng(), step_dist, tau.size)
    if zero_steps:
        steps = np.zeros_like(steps)
    return _walk_path(tau, np.cumsum(steps) / math.sqrt(n))


def sim_discretized_bm(n: int, s: TimeChange, key: StreamKey) -> GridPath:
    """The Gaussian comparison process ``A_n``."""
    return sim_scaled_rw(n, "std_normal", s, key)


def _check_grid(grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 2 or g[0] != 0.0 or g[-1] != 1.0:
        raise StructuralError("grid must start at 0 and end at 1")
    if np.any(np.diff(g) <= 0):
        raise StructuralError("grid must be strictly increasing")
    return g


def uniform_grid(points: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def sim_time_changed_bm(s: TimeChange, grid, key: StreamKey) -> GridPath:
    """``B(s(t))`` on ``grid`` via independent Gaussian increments."""
    g = _check_grid(grid)
    var = np.maximum(np.diff(s(g)), 0.0)
    inc = key.rng().standard_normal(g.size - 1) * np.sqrt(var)
    return GridPath(g, np.concatenate(([0.0], np.cumsum(inc))), LINEAR)


def sim_bm_pair(n: int, s: TimeChange, grid, key: StreamKey) -> tuple[GridPath, GridPath]:
    """``(A_n, Z)`` driven by one Brownian motion ``B``.

    ``A_n(t) = B(floor(n s(t)) / n)`` and ``Z(t) = B(s(t))``; the Gaussian steps of
    ``A_n`` are the rescaled increments of ``B`` over ``[(i-1)/n, i/n]``, so each
    marginal has exactly the law of the standalone samplers.  ``Z`` is returned
    on ``grid`` merged with the jump times of ``A_n``.
    """
    g = _check_grid(grid)
    tau = jump_times(n, s)
    k = tau.size
    op_a = np.arange(1, k + 1) / n
    times = np.concatenate((tau, g))
    ops = np.concatenate((op_a, s(g)))
    is_a = np.concatenate((np.ones(k, bool), np.zeros(g.size, bool)))
    order = np.lexsort((ops, times))
    times, ops, is_a = times[order], np.maximum.accumulate(ops[order]), is_a[order]
    inc = key.rng().standard_normal(ops.size) * np.sqrt(np.diff(ops, prepend=0.0))
    b = np.cumsum(inc)
    a_path = _walk_path(times[is_a], b[is_a])
    zt, first = np.unique(times, return_index=True)
    z_path = GridPath(zt, np.where(zt == 0.0, 0.0, b[first]), LINEAR)
    return a_path, z_path


# ---------------------------------------------------------------------------
# Poisson processes


def unit_poisson_arrivals(rng: np.random.Generator, horizon: float) -> np.ndarray:
    """Arrival times of a rate-1 Poisson process on ``[0, horizon]``."""
    if horizon <= 0:
        return np.empty(0)
    chunk = int(horizon + 6.0 * math.sqrt(horizon) + 16)
    parts, last = [], 0.0
    while True:
        e = last + np.cumsum(rng.standard_exponential(chunk))
        parts.append(e[e <= horizon])
        if e[-1] > horizon:
            return np.concatenate(parts)
        last = e[-1]


def _compensated_path(n: int, Sn: TimeChange, arrivals: np.ndarray) -> GridPath:
    if not Sn.piecewise_linear:
        Sn = Sn.tabulate(4097)
    arrivals = arrivals[arrivals <= n * Sn.total]
    tk = np.atleast_1d(inverse_tc(Sn.scaled(n), arrivals)) if arrivals.size else np.empty(0)
    times = np.union1d(Sn.breakpoints(), tk)
    comp = n * Sn(times)
    right = np.searchsorted(tk, times, side="right")
    left = np.searchsorted(tk, times, side="left")
    jump = right != left
    pos = np.arange(times.size) + np.cumsum(jump)
    out_t = np.empty(times.size + int(jump.sum()))
    out_v = np.empty_like(out_t)
    rn = math.sqrt(n)
    out_t[pos] = times
    out_v[pos] = (right - comp) / rn
    out_t[pos[jump] - 1] = times[jump]
    out_v[pos[jump] - 1] = (left[jump] - comp[jump]) / rn
    return GridPath(out_t, out_v, LINEAR)


def sim_compensated_poisson(n: int, Sn: TimeChange, key: StreamKey) -> GridPath:
    """``(P(n S(t)) - n S(t)) / sqrt(n)`` with exact event times.

    Between events the path is the linear compensator, and each event adds a
    jump of ``1/sqrt(n)`` (stored as a repeated breakpoint).  Curved time
    changes are replaced by a 4097-point piecewise-linear interpolant.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    arrivals = unit_poisson_arrivals(key.rng(), n * Sn.total)
    return _compensated_path(n, Sn, arrivals)


def sim_poisson_pair(n: int, s: TimeChange, Sn: TimeChange, key: StreamKey) -> tuple[GridPath, GridPath]:
    """``(Y_n, compensated Poisson)`` driven by one unit Poisson process ``P``.

    The walk uses steps ``X_i = P(i) - P(i-1) - 1`` (centered Poisson(1)), so
    ``Y_n(t) = (P(floor(n s(t))) - floor(n s(t))) / sqrt(n)``; the second path is
    ``(P(n Sn(t)) - n Sn(t)) / sqrt(n)``.
    """
    k = jump_count(n, s)
    arrivals = unit_poisson_arrivals(key.rng(), max(float(k), n * Sn.total))
    counts = np.searchsorted(arrivals, np.arange(k + 1, dtype=float), side="right")
    steps = np.diff(counts) - 1.0
    walk = _walk_path(jump_times(n, s), np.cumsum(steps) / math.sqrt(n))
    return walk, _compensated_path(n, Sn, arrivals)


# ---------------------------------------------------------------------------
# Moran chain (Gillespie)


@njit(cache=True)
def _moran_kernel(k, t, n, nu1, nu2, exps, us, times_out, counts_out):
    """Advance the chain consuming one exponential and one uniform per event.

    Returns ``(k, t, events_written, finished)``.
    """
    half = 0.5 * n * n
    w = 0
    for i in range(exps.size):
        x = k / n
        mix = half * x * (1.0 - x)
        up = mix + n * nu2 * (1.0 - x)
        down = mix + n * nu1 * x
        total = up + down
        if total <= 0.0:
            return k, t, w, True
        t_new = t + exps[i] / total
        if t_new >= 1.0:
            return k, t, w, True
        if us[i] * total < up:
            k += 1
        else:
            k -= 1
        t = t_new
        times_out[w] = t
        counts_out[w] = k
        w += 1
    return k, t, w, False


def sim_moran(params: ModelParams, key: StreamKey, chunk: int = 4096) -> GridPath:
    """Exact event-time simulation of the Moran chain on ``{0, 1/n, ..., 1}``.

    Up-moves occur at rate ``n^2 x(1-x)/2 + n nu2 (1-x)``, down-moves at
    ``n^2 x(1-x)/2 + n nu1 x``.  Random numbers are drawn in fixed-size chunks
    so the output depends only on the key.
    """
    n, k, t = params.n, params.k0, 0.0
    rng = key.rng()
    times, counts = [np.zeros(1)], [np.array([k], dtype=np.int64)]
    tbuf = np.empty(chunk)
    cbuf = np.empty(chunk, dtype=np.int64)
    done = False
    while not done:
        exps = rng.standard_exponential(chunk)
        us = rng.random(chunk)
        k, t, w, done = _moran_kernel(k, t, n, float(params.nu1), float(params.nu2), exps, us, tbuf, cbuf)
        times.append(tbuf[:w].copy())
        counts.append(cbuf[:w].copy())
    tt = np.concatenate(times)
    cc = np.concatenate(counts)
    tt = np.append(tt, 1.0)
    cc = np.append(cc, cc[-1])
    return GridPath(tt, cc / n, STEP)


# ---------------------------------------------------------------------------
# Wright-Fisher diffusion


def wf_grid(dt: float) -> np.ndarray:
    if not 0.0 < dt <= 1e-2:
        raise ConfigError("Euler step dt must satisfy 0 < dt <= 0.01")
    m = int(math.ceil(1.0 / dt - 1e-9))
    grid = np.minimum(np.arange(m + 1) * dt, 1.0)
    grid[-1] = 1.0
    return grid


def _euler_wf(params: ModelParams, grid: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Full-truncation Euler-Maruyama; ``noise`` has shape (paths, steps)."""
    h = np.diff(grid)
    sh = np.sqrt(h)
    a, b = params.nu2, params.nu1 + params.nu2
    x = np.full(noise.shape[0], float(params.x0))
    out = np.empty((noise.shape[0], grid.size))
    out[:, 0] = x
    for j in range(h.size):
        sig = np.sqrt(np.maximum(x * (1.0 - x), 0.0))
        x = np.clip(x + (a - b * x) * h[j] + sig * sh[j] * noise[:, j], 0.0, 1.0)
        out[:, j + 1] = x
    return out


def wright_fisher_values(params: ModelParams, dt: float, keys) -> tuple[np.ndarray, np.ndarray]:
    """Grid and ``(paths, grid)`` value matrix for a batch of keys."""
    grid = wf_grid(dt)
    noise = np.stack([k.rng().standard_normal(grid.size - 1) for k in keys]) if keys else np.empty((0, grid.size - 1))
    return grid, _euler_wf(params, grid, noise)


def sim_wright_fisher(params: ModelParams, dt: float, key: StreamKey) -> GridPath:
    """Euler-Maruyama path of ``dX = (nu2 - (nu1+nu2) X) dt + sqrt(X(1-X)) dB``.

    The diffusion coefficient uses ``max(0, x(1-x))`` and the state is clamped
    to [0, 1] after every step.
    """
    grid, vals = wright_fisher_values(params, dt, [key])
    return GridPath(grid, vals[0], LINEAR)


def sim_wright_fisher_batch(params: ModelParams, dt: float, keys) -> list[GridPath]:
    grid, vals = wright_fisher_values(params, dt, keys)
    return [GridPath(grid, v, LINEAR) for v in vals]


# ---------------------------------------------------------------------------
# martingale parts M_n and M


def mn_drift(x: GridPath, params: ModelParams) -> GridPath:
    """``t -> int_0^t (nu2 - (nu1+nu2) X(u)) du``, the drift left out of ``M_n``."""
    return integrated_rate(x, "In", params.n, params.nu1, params.nu2)


def mn_given_state(x: GridPath, params: ModelParams, key: StreamKey) -> GridPath:
    """``M_n`` for a given Moran path ``x`` with fresh independent Poisson clocks.

    ``M_n(t) = P_1(n^2 R_1(t))/n - P_{-1}(n^2 R_{-1}(t))/n``.
    """
    n = params.n
    nsq = float(n) * n
    r_up = integrated_rate(x, "R1", n, params.nu1, params.nu2)
    r_dn = integrated_rate(x, "Rm1", n, params.nu1, params.nu2)
    events = []
    for sub, r in ((0, r_up), (1, r_dn)):
        arr = unit_poisson_arrivals(key.rng(sub), nsq * r.total)
        events.append(np.atleast_1d(inverse_tc(r.scaled(nsq), arr)) if arr.size else np.empty(0))
    times = np.union1d(np.union1d(x.times, events[0]), events[1])
    up = np.searchsorted(events[0], times, side="right")
    dn = np.searchsorted(events[1], times, side="right")
    return GridPath(times, (up - dn) / n, STEP)


def sim_Mn(params: ModelParams, key: StreamKey) -> GridPath:
    """Simulate ``X_n`` on one sub-stream, then ``M_n`` on independent ones."""
    x = sim_moran(params, key.child("state"))
    return mn_given_state(x, params, key.child("clocks"))


def m_given_state(x: GridPath, params: ModelParams, key: StreamKey) -> GridPath:
    """``M(t) = W(int_0^t X(1-X)) + int_0^t (nu2 - (nu1+nu2) X)`` for a given ``X``."""
    half_var = integrated_rate(x, "R1_limit")
    drift = integrated_rate(x, "I_limit", nu1=params.nu1, nu2=params.nu2)
    t = drift.times
    var = 2.0 * half_var(t)
    inc = key.rng().standard_normal(t.size - 1) * np.sqrt(np.maximum(np.diff(var), 0.0))
    w = np.concatenate(([0.0], np.cumsum(inc)))
    return GridPath(t, w + drift.values, LINEAR)


def sim_M(params: ModelParams, dt: float, key: StreamKey) -> GridPath:
    x = sim_wright_fisher(params, dt, key.child("state"))
    return m_given_state(x, params, key.child("noise"))


# ---------------------------------------------------------------------------
# lookdown marginals


def lookdown_marginals(x: GridPath, n: int, grid, key: StreamKey) -> np.ndarray:
    """Independent ``Binomial(n, x(t)) / n`` draws at the grid times."""
    p = np.atleast_1d(eval_path(x, np.asarray(grid, dtype=float)))
    if np.any(p < 0) or np.any(p > 1):
        raise DomainError("allele fraction outside [0, 1]")
    return key.rng().binomial(n, p) / n


def binomial_central_fourth(n: int, p) -> np.ndarray:
    """``E[(B/n - p)^4]`` for ``B ~ Binomial(n, p)``."""
    p = np.asarray(p, dtype=float)
    q = p * (1.0 - p)
    return n * q * (1.0 + 3.0 * (n - 2) * q) / float(n) ** 4


def fourth_moment_polynomial(n: int, p) -> np.ndarray:
    """Closed-form polynomial proposed for the conditional fourth moment of ``X_n - X``.

    It is used when bounding the drift error between the Moran and
    Wright-Fisher martingales, but it is *not* a valid upper bound for small
    ``p`` (compare :func:`binomial_central_fourth`).
    """
    p = np.asarray(p, dtype=float)
    poly = (
        1 - 7 * p + 7 * n * p + 12 * p**2 - 18 * n * p**2 + 6 * n**2 * p**2
        - 6 * p**3 + 11 * n * p**3 - 6 * n**2 * p**3 + n**3 * p**3
    )
    return p * poly / float(n) ** 4


def fourth_moment_envelope(n: int) -> float:
    """``13 n^-4 + 18 n^-3 + 6 n^-2 + n^-1``, uniform in ``p``."""
    return 13.0 / n**4 + 18.0 / n**3 + 6.0 / n**2 + 1.0 / n
