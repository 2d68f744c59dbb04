"""Closed-form error bounds and the constants that feed them.

Each bound evaluator returns a :class:`BoundBreakdown` listing every additive
term with a label, so a total can be traced back to the piece that dominates
it.  All evaluators are homogeneous of degree one in the ``gm`` factor (the
certified M-norm bound of the test functional).

* :func:`bound_thm1` - random walk under a time change vs ``B o s``;
* :func:`bound_thm2` - compensated Poisson under ``S^(n)`` vs ``B o S``;
* :func:`bound_thm3` - Moran martingale part ``M_n`` vs Wright-Fisher ``M``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

SQRT_PI = math.sqrt(math.pi)
LOG2 = math.log(2.0)
# shared constants of the random-walk bound
THM1_C1_NUM = 30.0
THM1_C1_SLOPE = 54.0 * 5.0 ** (1.0 / 3.0)
THM1_C3 = 2160.0 / (SQRT_PI * LOG2**1.5)
DOOB_FACTOR = 1.5**3 * math.sqrt(2.0 / math.pi)
POISSON_ABS3 = 1.0 + 2.0 * math.exp(-1.0)


@dataclass
class BoundBreakdown:
    bound: str
    inputs: dict
    terms: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def total(self) -> float:
        return math.fsum(v for _, v in self.terms)

    def term(self, label: str) -> float:
        return dict(self.terms)[label]

    def to_record(self) -> dict:
        return {
            "bound": self.bound,
            "inputs": dict(self.inputs),
            "terms": [{"label": k, "value": v} for k, v in self.terms],
            "total": self.total,
            "notes": list(self.notes),
        }


def _log_guard(s1: float, n: float) -> float:
    arg = 2.0 * s1 * n
    if not arg >= 1.0:
        raise DomainError(f"2*s(1)*n = {arg} < 1 makes the logarithm negative")
    return math.log(arg)


def _c1(s1: float) -> float:
    return (THM1_C1_NUM + THM1_C1_SLOPE * s1) / math.sqrt(math.pi * LOG2)


def bound_thm1(n: int, s1: float, m3: float, gm: float = 1.0) -> BoundBreakdown:
    """Bound on ``|E g(Y_n) - E g(B o s)|`` for a time-changed scaled random walk.

    ``s1 = s(1)``, ``m3 = E|X_1|^3`` and ``gm`` is the M-norm factor of ``g``.
    """
    if n < 1 or not s1 > 0:
        raise DomainError("need n >= 1 and s(1) > 0")
    if m3 < 1:
        raise DomainError("E|X_1|^3 >= (E X_1^2)^{3/2} = 1 for unit-variance steps")
    if gm < 0:
        raise DomainError("M-norm factor must be nonnegative")
    lg = _log_guard(s1, n)
    out = BoundBreakdown("thm1", {"n": n, "s1": s1, "m3": m3, "gm": gm})
    out.terms = [
        ("log_sqrt", gm * _c1(s1) * n**-0.5 * math.sqrt(lg)),
        ("third_moment", gm * s1 * (1.0 + DOOB_FACTOR * s1**1.5) * m3 * n**-0.5),
        ("log_three_half", gm * THM1_C3 * n**-1.5 * lg**1.5),
    ]
    return out


def bound_thm2(n: int, S1: float, Sn1: float, dist: float, gm: float = 1.0) -> BoundBreakdown:
    """Bound on ``|E g(Ytilde_n) - E g(B o S)|`` for the compensated Poisson process.

    ``S1 = S(1)``, ``Sn1 = S^(n)(1)``, ``dist = sup|S - S^(n)|``.  The
    logarithm ``log(2 s(1) n)`` in the ``n^{-1/2}`` group is evaluated with
    ``S(1)``; the substitution is recorded in ``notes``.
    """
    if n < 2:
        raise DomainError("need n >= 2")
    if not (S1 > 0 and Sn1 > 0) or dist < 0:
        raise DomainError("need S(1), S^(n)(1) > 0 and dist >= 0")
    if gm < 0:
        raise DomainError("M-norm factor must be nonnegative")
    lg = _log_guard(S1, n)
    k = 27.0 * math.sqrt(2.0) / (2.0 * SQRT_PI)
    ln = math.log(n)
    ll2 = math.log(math.log(n + 2.0))
    ll3 = math.log(math.log(n + 3.0))
    out = BoundBreakdown("thm2", {"n": n, "S1": S1, "Sn1": Sn1, "dist": dist, "gm": gm})
    out.notes.append("log(2 s(1) n) in the n^-1/2 group evaluated with s(1) = S(1)")
    half = (
        _c1(S1) * math.sqrt(lg)
        + (1.0 + DOOB_FACTOR * Sn1**1.5) * Sn1 * POISSON_ABS3
        + 1.0
        + (math.log(POISSON_ABS3) + 2.0 * ln) / ll2
    )
    one = 4.5 * math.sqrt(Sn1) * math.sqrt(1.0 + 3.0 * n * Sn1) * (4.0 + (16701.0 + 128.0 * ln**3) / ll3**3) ** (1.0 / 3.0)
    three_half = THM1_C3 * lg**1.5 + 8.0 + (33402.0 + 256.0 * ln**3) / ll3**3
    out.terms = [
        ("sqrt_dist", gm * (2.0 + k * S1) * math.sqrt(dist)),
        ("dist_three_half", gm * k * dist**1.5),
        ("n_half", gm * n**-0.5 * half),
        ("n_one", gm * one / n),
        ("n_three_half", gm * n**-1.5 * three_half),
    ]
    return out


def _thm3_blocks(nu1: float, nu2: float):
    a, b = nu1, nu2
    p = 18.0 + a**0.5 + 47.0 * a**0.75 + 31.0 * a**1.5 + b + 3.0 * b**2 + 9.0 * b**3
    q_b = 1.02e6 + 425.0 * b**0.5 + 623.0 * b + 39.0 * b**1.5 + 7.0 * b**2.5
    r = 12.0 + 3.0 * b + 3.0 * b**2 + 9.0 * b**3
    q_a = 1.02e6 + 425.0 * a**0.5 + 623.0 * a + 39.0 * a**1.5 + 7.0 * a**2.5
    drift = 7.0 * (0.5 * (1.0 + 2.0 * b) * (a + b) + 31.0 * (a + b) ** 3)
    return p, q_b, r, q_a, drift


def bound_thm3(n: int, nu1: float, nu2: float, gm: float = 1.0, simplified: bool = False) -> BoundBreakdown:
    """Bound on ``|E g(M_n) - E g(M)|`` for the Moran / Wright-Fisher martingale parts.

    ``simplified=True`` uses the coarser polynomials valid for ``nu1, nu2 >= 1``;
    both of its logarithmic terms use ``log(n^2/4 + nu1 n)`` (the full form uses nu2 in the first).
    """
    if n < 2:
        raise DomainError("need n >= 2")
    if nu1 < 0 or nu2 < 0:
        raise DomainError("mutation rates must be nonnegative")
    if gm < 0:
        raise DomainError("M-norm factor must be nonnegative")
    out = BoundBreakdown("thm3_simplified" if simplified else "thm3",
                         {"n": n, "nu1": nu1, "nu2": nu2, "gm": gm})
    q = n**-0.25
    c = 2112.0 * n**-3.0
    if simplified:
        if nu1 < 1 or nu2 < 1:
            raise DomainError("the simplified form requires nu1 >= 1 and nu2 >= 1")
        a, b = nu1, nu2
        p = 18.0 + 79.0 * a**1.5 + 13.0 * b**3
        qq = 1.02e6 + 1094.0 * b**2.5
        r = 12.0 + 15.0 * b**3
        drift = 7.0 * (31.5 * a**3 + 32.5 * b**3 + a * b * (1.0 + 93.0 * a + 93.0 * b))
        lg = math.log(n * n / 4.0 + a * n) ** 1.5
        out.notes.append("both logarithmic terms use log(n^2/4 + nu1 n)")
        out.terms = [
            ("quarter_up", gm * p * qq * q),
            ("quarter_down", gm * r * qq * q),
            ("quarter_drift", gm * drift * q),
            ("log_up", gm * c * p * lg),
            ("log_down", gm * c * r * lg),
        ]
        return out
    p, q_b, r, q_a, drift = _thm3_blocks(nu1, nu2)
    out.terms = [
        ("quarter_up", gm * p * q_b * q),
        ("quarter_down", gm * r * q_a * q),
        ("quarter_drift", gm * drift * q),
        ("log_up", gm * c * p * math.log(n * n / 4.0 + nu2 * n) ** 1.5),
        ("log_down", gm * c * r * math.log(n * n / 4.0 + nu1 * n) ** 1.5),
    ]
    return out


def thm3_blocks(b: BoundBreakdown) -> tuple[float, float]:
    """``(n^{-1/4} block, n^{-3} log block)`` of a Moran-bound breakdown."""
    d = dict(b.terms)
    return d["quarter_up"] + d["quarter_down"] + d["quarter_drift"], d["log_up"] + d["log_down"]


def bm_modulus_bounds(n: int, s1: float) -> tuple[float, float, float]:
    """Upper bounds on ``E||A_n - Z||^k``, ``k = 1, 2, 3``, for the shared-``B`` coupling."""
    if n < 1 or not s1 > 0:
        raise DomainError("need n >= 1 and s(1) > 0")
    lg = _log_guard(s1, n)
    c = 6.0 / math.sqrt(LOG2)
    return (
        5.0 / SQRT_PI * c * n**-0.5 * math.sqrt(lg),
        2.5 * c**2 / n * lg,
        5.0 / SQRT_PI * c**3 * n**-1.5 * lg**1.5,
    )


def doob_l3_bound(s1: float) -> float:
    """``(3/2)^3 * 2 sqrt(2/pi) * s(1)^{3/2}``, a bound on ``E||A_n||^3``."""
    if not s1 > 0:
        raise DomainError("need s(1) > 0")
    return 2.0 * DOOB_FACTOR * s1**1.5


def poisson_abs_moment(p: float = 3.0, tol: float = 1e-14) -> float:
    """``E|P(1) - 1|^p`` by direct summation of the Poisson(1) series."""
    total, k, logw = 0.0, 0, -1.0  # log of e^{-1}/k!
    while True:
        term = abs(k - 1) ** p * math.exp(logw)
        total += term
        k += 1
        logw -= math.log(k)
        # remaining tail is dominated by a geometric series once k > p + 2
        if k > p + 2 and (k - 1) ** p * math.exp(logw) * 2.0 < tol:
            return total


def poisson_abs3_moment() -> float:
    return poisson_abs_moment(3.0)


def min_holding_prob(lam: float) -> float:
    """Probability that ``1 + Poisson(lam)`` uniform-simplex holding times all exceed ``lam^-3``.

    ``sum_{i=1}^{floor(lam^3)} (1 - i lam^-3)^i e^{-lam} lam^{i-1} / (i-1)!``
    evaluated with log-space weights.
    """
    if not lam > 1:
        raise DomainError("need lambda > 1")
    r = lam**-3.0
    top = int(math.floor(lam**3 * (1.0 + 1e-12)))
    i = np.arange(1, top + 1, dtype=float)
    with np.errstate(divide="ignore"):
        logs = i * np.log1p(-np.minimum(i * r, 1.0)) - lam + (i - 1) * math.log(lam) - gammaln(i)
    return float(math.fsum(np.exp(logs)))
