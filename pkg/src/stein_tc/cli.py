"""Command-line interface: ``stein-tc <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 domain error, 4 failed
``--assert`` check.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib import metadata
from pathlib import Path

from . import bounds as B
from .config import load_config, parse_n_list
from .errors import ConfigError, DomainError, StructuralError, UsageError
from .functionals import parse_functional
from .harness import (
    STEP_THIRD_MOMENT,
    SamplerSpec,
    check_sampler,
    draw,
    estimate_gap,
    fit_rate,
    functional_norm,
    holding_prob_mc,
    pair_bound,
    rate_csv,
    rate_sweep,
)
from .paths import TimeChange, uniform_distance
from .stein_core import stein_identity_residual
from .streams import StreamKey

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_ASSERT = 0, 2, 3, 4

DEFAULTS = {
    "seed": "0", "paths": "10000", "workers": "1", "coupling": "independent", "functional": "sin_avg",
    "n": "64", "s": "identity", "Sn": "identity", "nu1": "0", "nu2": "0", "x0": "0.5", "dt": "0.001",
    "grid_points": "257", "target": "discretized_bm", "mode": "direct", "theorem": "1", "gm": "1",
    "simplified": "false", "lam": "10", "sampler": "discretized_bm",
    "sampler_a": "scaled_rw:centered_poisson1", "sampler_b": "time_changed_bm",
    "n_list": "64,256,1024,4096",
}
JSON_DEFAULT = {"gap", "stein-check", "bound", "holding-prob"}


class Settings:
    """Merged view of defaults, config file and command-line flags."""

    def __init__(self, args: argparse.Namespace):
        self.values = dict(DEFAULTS)
        explicit = load_config(args.config) if args.config else {}
        for key, val in vars(args).items():
            if key in ("config", "command", "assert_") or val is None:
                continue
            explicit[key] = str(val)
        self.values.update(explicit)
        self.explicit = set(explicit)
        self.command = args.command
        self.check = bool(args.assert_)

    def str(self, key: str) -> str | None:
        return self.values.get(key)

    def int(self, key: str) -> int:
        try:
            return int(self.values[key])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{key} must be an integer") from exc

    def float(self, key: str) -> float:
        try:
            return float(self.values[key])
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"{key} must be a number") from exc

    def bool(self, key: str) -> bool:
        return self.values.get(key, "false").strip().lower() in ("1", "true", "yes", "on")

    @property
    def format(self) -> str:
        fmt = self.values.get("format") or ("json" if self.command in JSON_DEFAULT else "csv")
        if fmt not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        return fmt

    @property
    def seed(self) -> int:
        seed = self.int("seed")
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        return seed

    def sampler_spec(self) -> SamplerSpec:
        try:
            return SamplerSpec(
                n=self.int("n"), s=TimeChange.parse(self.values["s"]), Sn=TimeChange.parse(self.values["Sn"]),
                nu1=self.float("nu1"), nu2=self.float("nu2"), x0=self.float("x0"), dt=self.float("dt"),
                grid_points=self.int("grid_points"),
            )
        except StructuralError as exc:
            raise ConfigError(str(exc)) from exc


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0.1.0"


def _emit(cfg: Settings, text: str, manifest: dict) -> None:
    out = cfg.str("out")
    if not out:
        sys.stdout.write(text)
        return
    Path(out).write_text(text)
    manifest = {"command": cfg.command, "version": _version(), "seed": cfg.seed,
                "settings": {k: v for k, v in sorted(cfg.values.items()) if k not in ("out", "workers")},
                **manifest}
    Path(out + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _assert_result(ok: bool, what: str) -> int:
    if ok:
        return EXIT_OK
    print(f"assertion failed: {what}", file=sys.stderr)
    return EXIT_ASSERT


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(cfg: Settings) -> int:
    sid = check_sampler(cfg.str("sampler"))
    spec = cfg.sampler_spec()
    paths = [draw(sid, spec, StreamKey(cfg.seed, sid, i)) for i in range(cfg.int("paths"))]
    if cfg.format == "csv":
        rows = [(i, float(t), float(v)) for i, p in enumerate(paths) for t, v in zip(p.times, p.values)]
        text = _csv(rows, ("path_index", "t", "value"))
    else:
        text = "".join(json.dumps({"path_index": i, **p.to_record()}) + "\n" for i, p in enumerate(paths))
    _emit(cfg, text, {"sampler": sid})
    return EXIT_OK


def cmd_gap(cfg: Settings) -> int:
    g = parse_functional(cfg.str("functional"))
    a, b = cfg.str("sampler_a"), cfg.str("sampler_b")
    spec = cfg.sampler_spec()
    est = estimate_gap(g, a, b, cfg.int("paths"), cfg.str("coupling"), cfg.seed, spec, cfg.int("workers"))
    bound = pair_bound(g, a, b, spec)
    rec = {**est.to_record(), "n": spec.n, "sampler_a": a, "sampler_b": b, "bound": bound}
    if cfg.format == "json":
        text = _json(rec)
    else:
        keys = list(rec)
        text = _csv([[rec[k] if rec[k] is not None else "" for k in keys]], keys)
    _emit(cfg, text, {"sampler_a": a, "sampler_b": b})
    if cfg.check:
        if bound is not None:
            return _assert_result(abs(est.diff) <= bound, f"|gap| {abs(est.diff)} exceeds bound {bound}")
        return _assert_result(abs(est.diff) <= 3 * est.stderr, "gap not within 3 standard errors of 0")
    return EXIT_OK


def cmd_rate(cfg: Settings) -> int:
    g = parse_functional(cfg.str("functional"))
    a, b = cfg.str("sampler_a"), cfg.str("sampler_b")
    pts = rate_sweep(g, a, b, cfg.str("coupling"), parse_n_list(cfg.str("n_list")), cfg.int("paths"), cfg.seed,
                     cfg.sampler_spec(), cfg.int("workers"))
    if cfg.format == "csv":
        text = rate_csv(pts)
    else:
        recs = [{"n": p.n, "seed": p.seed, "bound": p.bound, **p.gap.to_record()} for p in pts]
        fits = {}
        if all(p.bound for p in pts):
            f = fit_rate(pts, "bound")
            fits["bound_slope"], fits["bound_slope_se"] = f.slope, f.stderr
        text = _json({"points": recs, **fits})
    _emit(cfg, text, {"sampler_a": a, "sampler_b": b})
    if cfg.check:
        bad = [p.n for p in pts if p.bound is not None and abs(p.gap.diff) > p.bound]
        return _assert_result(not bad, f"gap exceeds bound at n = {bad}")
    return EXIT_OK


def cmd_stein_check(cfg: Settings) -> int:
    g = parse_functional(cfg.str("functional"))
    spec = cfg.sampler_spec()
    target = cfg.str("target")
    res = stein_identity_residual(g, target, spec.n, spec.s, cfg.int("paths"), StreamKey(cfg.seed, "stein-check"),
                                  cfg.str("mode"))
    if target == "discretized_bm":
        bound = 0.0
    else:
        bound = B.bound_thm1(spec.n, spec.s.total, STEP_THIRD_MOMENT[target.split(":", 1)[1]],
                             functional_norm(g)).total
    ok = abs(res.value) <= bound + 3.0 * res.se
    rec = {"functional": g.id, "n": spec.n, "s": str(spec.s), "target": target, "mode": cfg.str("mode"),
           "residual": res.value, "se": res.se, "bound": bound, "pass": ok}
    text = _json(rec) if cfg.format == "json" else _csv([[rec[k] for k in rec]], list(rec))
    _emit(cfg, text, {"target": target})
    return _assert_result(ok, "Stein residual outside bound + 3 SE") if cfg.check else EXIT_OK


def cmd_bound(cfg: Settings) -> int:
    spec = cfg.sampler_spec()
    if "gm" not in cfg.explicit and "functional" in cfg.explicit:
        gm = functional_norm(parse_functional(cfg.str("functional")))
    else:
        gm = cfg.float("gm")
    theorem = cfg.str("theorem")
    if theorem == "1":
        s1 = cfg.float("s1") if "s1" in cfg.values else spec.s.total
        m3 = cfg.float("m3") if "m3" in cfg.values else STEP_THIRD_MOMENT["centered_poisson1"]
        br = B.bound_thm1(spec.n, s1, m3, gm)
    elif theorem == "2":
        S1 = cfg.float("S1") if "S1" in cfg.values else spec.s.total
        Sn1 = cfg.float("Sn1") if "Sn1" in cfg.values else spec.Sn.total
        dist = cfg.float("dist") if "dist" in cfg.values else uniform_distance(spec.s, spec.Sn)
        br = B.bound_thm2(spec.n, S1, Sn1, dist, gm)
    elif theorem == "3":
        br = B.bound_thm3(spec.n, spec.nu1, spec.nu2, gm, cfg.bool("simplified"))
    else:
        raise ConfigError("theorem must be 1, 2 or 3")
    if cfg.format == "json":
        text = _json(br.to_record())
    else:
        text = _csv([[br.bound, *br.inputs.values(), *(v for _, v in br.terms), br.total]],
                    ["bound", *br.inputs, *(k for k, _ in br.terms), "total"])
    _emit(cfg, text, {"theorem": theorem})
    return EXIT_OK


def cmd_holding_prob(cfg: Settings) -> int:
    lam = cfg.float("lam")
    value = B.min_holding_prob(lam)
    trials = cfg.int("paths")
    mc, se = holding_prob_mc(lam, trials, cfg.seed) if trials > 0 else (math.nan, math.nan)
    rec = {"lambda": lam, "value": value, "mc": mc, "mc_se": se, "trials": trials}
    text = _json(rec) if cfg.format == "json" else _csv([[rec[k] for k in rec]], list(rec))
    _emit(cfg, text, {})
    if cfg.check:
        return _assert_result(trials > 0 and abs(value - mc) <= 3 * se, "series and Monte Carlo disagree")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate, "gap": cmd_gap, "rate": cmd_rate, "stein-check": cmd_stein_check,
    "bound": cmd_bound, "holding-prob": cmd_holding_prob,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="root seed (unsigned 64-bit)")
    common.add_argument("--paths", type=int, help="Monte Carlo paths / samples / trials")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--out", help="write output here (plus a .manifest.json) instead of stdout")
    common.add_argument("--config", help="flat key = value config file; flags override it")
    common.add_argument("--workers", type=int, help="worker processes")
    common.add_argument("--assert", dest="assert_", action="store_true", help="exit 4 if the run's check fails")
    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--n", type=int)
    model.add_argument("--s", help="time change: identity | linear:C | power:ALPHA[:C]")
    model.add_argument("--Sn", help="second time change (compensated Poisson)")
    model.add_argument("--nu1", type=float)
    model.add_argument("--nu2", type=float)
    model.add_argument("--x0", type=float)
    model.add_argument("--dt", type=float)
    model.add_argument("--grid-points", dest="grid_points", type=int)
    model.add_argument("--functional", help="functional id, e.g. sin_avg, cos_eval@0.5")

    p = argparse.ArgumentParser(prog="stein-tc", description="Stein-method bounds and Monte Carlo checks")
    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("simulate", parents=[common, model], help="sample an ensemble of paths")
    sp.add_argument("--sampler")
    for name in ("gap", "rate"):
        sp = sub.add_parser(name, parents=[common, model],
                            help="estimate E g(a) - E g(b)" if name == "gap" else "gap and bound over several n")
        sp.add_argument("--sampler-a", dest="sampler_a")
        sp.add_argument("--sampler-b", dest="sampler_b")
        sp.add_argument("--coupling", choices=("independent", "common_random", "lookdown"))
        if name == "rate":
            sp.add_argument("--n-list", dest="n_list", help="comma-separated increasing n values")
    sp = sub.add_parser("stein-check", parents=[common, model], help="Stein identity residual")
    sp.add_argument("--target", help="discretized_bm | scaled_rw:<dist>")
    sp.add_argument("--mode", choices=("direct", "solution"))
    sp = sub.add_parser("bound", parents=[common, model], help="evaluate a closed-form bound")
    sp.add_argument("--theorem", choices=("1", "2", "3"))
    for name in ("s1", "m3", "S1", "Sn1", "dist", "gm"):
        sp.add_argument(f"--{name}", type=float)
    sp.add_argument("--simplified", action="store_const", const="true")
    sp = sub.add_parser("holding-prob", parents=[common], help="minimal holding-time probability")
    sp.add_argument("--lam", type=float)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = Settings(args)
        if cfg.str("command") not in (None, cfg.command) and args.config:
            raise ConfigError(f"config is for command {cfg.str('command')!r}, not {cfg.command!r}")
        return COMMANDS[args.command](cfg)
    except (ConfigError, StructuralError, UsageError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
