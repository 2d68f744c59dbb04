"""Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Recognised keys::

    command       simulate | gap | rate | stein-check | bound | holding-prob
    seed          root seed (unsigned 64-bit)
    paths         number of Monte Carlo paths
    workers       process count
    format        csv | json
    sampler       sampler id (simulate)
    sampler_a     sampler id (gap, rate)
    sampler_b     sampler id (gap, rate)
    coupling      independent | common_random | lookdown
    functional    functional id, e.g. sin_avg, cos_eval@0.5
    target        Stein target: discretized_bm | scaled_rw:<dist>
    n             scaling integer / population size
    n_list        comma-separated increasing n values (rate)
    s, Sn         time changes: identity | linear:C | power:ALPHA[:C]
    nu1, nu2, x0  population-model parameters
    dt            Euler step for the Wright-Fisher diffusion
    grid_points   size of the uniform observation grid
    theorem       1 | 2 | 3 (bound)
    s1, m3, S1, Sn1, dist, gm, simplified, lam    bound inputs

Command-line flags override file values.
"""
from __future__ import annotations

from pathlib import Path

from .errors import ConfigError

KEYS = {
    "command", "seed", "paths", "workers", "format", "sampler", "sampler_a", "sampler_b", "coupling",
    "functional", "target", "mode", "n", "n_list", "s", "Sn", "nu1", "nu2", "x0", "dt", "grid_points",
    "theorem", "s1", "m3", "S1", "Sn1", "dist", "gm", "simplified", "lam", "out",
}


def parse_config(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def parse_n_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError as exc:
        raise ConfigError(f"bad n_list {text!r}") from exc
