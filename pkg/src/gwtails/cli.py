"""Experiment orchestration: config parsing, subcommand dispatch, CSV output.

Subcommands: simulate, estimate, approximate, diagnose, bound, compare.
Every run writes a plot-ready CSV (one figure per file) plus a JSON
manifest echoing the resolved config, wall time, library versions and
seed.  Identical configs (including seed) produce byte-identical CSV
bodies.  Exit codes: 0 success, 2 parameter errors, 3 numeric failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, asymptotics, bounds, classes, estimators
from .errors import (
    BadParam,
    BadPmf,
    GwTailsError,
    NoConvergence,
    NonIntegrableTail,
    Overflow,
    ParseError,
    PopulationOverflow,
    QuadratureFailure,
    SubcriticalMean,
    TailZero,
    TooLarge,
    UnknownField,
)
from .offspring import parse_law_spec
from .rng import RngStreams
from .simulator import simulate, simulate_with_events

__all__ = ["ExperimentConfig", "parse_config", "run", "main"]

_PARAM_ERRORS = (ParseError, UnknownField, BadParam, BadPmf, SubcriticalMean, TooLarge)
_NUMERIC_ERRORS = (
    Overflow,
    PopulationOverflow,
    QuadratureFailure,
    NoConvergence,
    NonIntegrableTail,
    TailZero,
)

_SUBCOMMANDS = ("simulate", "estimate", "approximate", "diagnose", "bound", "compare")

_CHECKS = {
    "dominated_varying": lambda law, cfg: classes.check_dominated_varying(
        law, x_max=cfg.grid_max
    ),
    "matuszewska": lambda law, cfg: classes.check_matuszewska(law, cfg.delta, cfg.c),
    "insensitive": lambda law, cfg: classes.check_insensitive(law, cfg.gamma),
    "sstar": lambda law, cfg: classes.check_sstar(law),
    "rapid_variation": lambda law, cfg: classes.check_rapid_variation(
        law, cfg.eps if cfg.eps > 0 else 1.0
    ),
    "hazard_increment": lambda law, cfg: classes.check_hazard_increment(
        law, cfg.c1, k_max=int(cfg.grid_max)
    ),
    "hazard_slope": lambda law, cfg: classes.check_hazard_slope(
        law, cfg.eps if cfg.eps > 0 else 0.1, cfg.x0
    ),
}


@dataclass
class ExperimentConfig:
    """Fully resolved description of one experiment run."""

    subcommand: str
    law: str
    n: object = 1                      # int or the string "inf"
    x_grid: list = field(default_factory=list)
    replicas: int = 10000
    seed: int = 0
    workers: int = 0                   # 0 = logical core count at run time
    eps: float = 0.0
    method: str = ""
    estimator: str = "naive"
    check: str = ""
    prop: str = "chebyshev"
    shift: str = "m"
    y: float = 0.0
    lam: float = 1.0
    big_a: float = 10.0
    delta: float = 0.5
    c: float = 10.0
    c1: float = 1.0
    gamma: float = 0.5
    x0: float = 8.0
    grid_max: float = float(1 << 20)
    population_cap: object = None
    track_events: str = ""
    out: str = "out.csv"

    def validate(self):
        if self.subcommand not in _SUBCOMMANDS:
            raise BadParam(f"unknown subcommand {self.subcommand!r}")
        if self.replicas < 1:
            raise BadParam("replicas must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise BadParam("seed must fit in 64 unsigned bits")
        if self.x_grid:
            xs = list(self.x_grid)
            if any(b <= a for a, b in zip(xs, xs[1:])):
                raise BadParam("x grid must be strictly increasing")
        if self.n != "inf":
            if int(self.n) != self.n or int(self.n) < 0:
                raise BadParam(f"n must be a nonnegative integer or 'inf', got {self.n!r}")
            self.n = int(self.n)
        return self

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise UnknownField(f"unknown config field {key!r}")
        if "subcommand" not in data:
            raise ParseError("config must name a subcommand")
        return cls(**data).validate()


def _resolve_n(raw):
    if raw is None:
        return None
    text = str(raw).strip().lower()
    if text == "inf":
        return "inf"
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"bad n value {raw!r}; expected an integer or 'inf'") from None


def _parse_x_list(text: str):
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ParseError(f"bad x grid {text!r}; expected comma-separated reals") from None


def _parse_x_geo(text: str):
    parts = text.split(",")
    if len(parts) != 3:
        raise ParseError(f"--x-geo wants start,factor,count, got {text!r}")
    try:
        start, factor, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ParseError(f"bad --x-geo values {text!r}") from None
    if start <= 0 or factor <= 1 or count < 1:
        raise ParseError("--x-geo needs start > 0, factor > 1, count >= 1")
    return [start * factor**i for i in range(count)]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gwtails",
        description="Tail probabilities of supercritical Galton-Watson processes",
    )
    sub = parser.add_subparsers(dest="subcommand")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its fields")
    common.add_argument("--law", help="offspring law spec, e.g. 'tuned(pareto(alpha=2), m=2)'")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--n", default=None, help="generation horizon; integer or 'inf'")
    common.add_argument("--x", default=None, help="comma-separated thresholds")
    common.add_argument("--x-geo", default=None, help="geometric grid start,factor,count")
    common.add_argument("--replicas", type=int, default=None)
    common.add_argument("--eps", type=float, default=None)
    common.add_argument("--population-cap", type=int, default=None)

    sp = sub.add_parser("simulate", parents=[common])
    sp.add_argument("--track-events", default=None, help="x=X,eps=E")
    sp = sub.add_parser("estimate", parents=[common])
    sp.add_argument("--method", default=None, choices=["naive", "bigjump", "exact"])
    sp = sub.add_parser("approximate", parents=[common])
    sp.add_argument(
        "--method",
        default=None,
        choices=["series", "series_inf", "weibull", "weibull_corrected", "index_one", "lemma32"],
    )
    sp.add_argument("--big-a", type=float, default=None, help="A parameter for lemma32")
    sp = sub.add_parser("diagnose", parents=[common])
    sp.add_argument("--check", default=None, choices=sorted(_CHECKS))
    sp.add_argument("--grid-max", type=float, default=None)
    sp.add_argument("--delta", type=float, default=None)
    sp.add_argument("--c", type=float, default=None)
    sp.add_argument("--c1", type=float, default=None)
    sp.add_argument("--gamma", type=float, default=None)
    sp.add_argument("--x0", type=float, default=None)
    sp = sub.add_parser("bound", parents=[common])
    sp.add_argument("--shift", default=None, help="m, 2m, or a real number")
    sp.add_argument("--prop", default=None, choices=["22", "23", "chebyshev"])
    sp.add_argument("--y", type=float, default=None)
    sp.add_argument("--lam", type=float, default=None)
    sp.add_argument("--c-param", dest="c", type=float, default=None)
    sp = sub.add_parser("compare", parents=[common])
    sp.add_argument(
        "--method", default=None, choices=["series", "series_inf", "weibull", "index_one"]
    )
    sp.add_argument("--estimator", default=None, choices=["naive", "bigjump", "exact"])
    return parser


_FLAG_FIELDS = {
    "law": "law",
    "seed": "seed",
    "workers": "workers",
    "out": "out",
    "replicas": "replicas",
    "eps": "eps",
    "population_cap": "population_cap",
    "method": "method",
    "estimator": "estimator",
    "check": "check",
    "prop": "prop",
    "shift": "shift",
    "y": "y",
    "lam": "lam",
    "big_a": "big_a",
    "delta": "delta",
    "c": "c",
    "c1": "c1",
    "gamma": "gamma",
    "x0": "x0",
    "grid_max": "grid_max",
    "track_events": "track_events",
}


def parse_config(argv) -> ExperimentConfig:
    """Resolve a config from CLI flags and an optional JSON config file.

    Flags override file fields; GWTAILS_SEED overrides the default seed
    when neither source sets one.
    """
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.subcommand is None:
        raise ParseError("a subcommand is required (simulate, estimate, ...)")
    data = {"subcommand": ns.subcommand}
    if getattr(ns, "config", None):
        try:
            with open(ns.config) as fh:
                file_data = json.load(fh)
        except json.JSONDecodeError as err:
            raise ParseError(f"config file is not valid JSON: {err}") from None
        if not isinstance(file_data, dict):
            raise ParseError("config file must hold a JSON object")
        data.update(file_data)
        data["subcommand"] = ns.subcommand
    for flag, fieldname in _FLAG_FIELDS.items():
        val = getattr(ns, flag, None)
        if val is not None:
            data[fieldname] = val
    if getattr(ns, "n", None) is not None:
        data["n"] = _resolve_n(ns.n)
    elif "n" in data:
        data["n"] = _resolve_n(data["n"])
    if getattr(ns, "x", None) is not None:
        data["x_grid"] = _parse_x_list(ns.x)
    elif getattr(ns, "x_geo", None) is not None:
        data["x_grid"] = _parse_x_geo(ns.x_geo)
    if "seed" not in data and "GWTAILS_SEED" in os.environ:
        try:
            data["seed"] = int(os.environ["GWTAILS_SEED"])
        except ValueError:
            raise ParseError("GWTAILS_SEED must be an integer") from None
    if "law" not in data or not data["law"]:
        raise ParseError("an offspring law spec is required (--law)")
    return ExperimentConfig.from_dict(data)


# ----------------------------------------------------------------------
# formatting helpers
# ----------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_manifest(cfg: ExperimentConfig, wall: float):
    manifest = {
        "config": dataclasses.asdict(cfg),
        "wall_time_s": wall,
        "seed": cfg.seed,
        "versions": {
            "gwtails": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
    }
    path = cfg.out + ".manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ----------------------------------------------------------------------
# subcommand bodies
# ----------------------------------------------------------------------


def _parse_track_events(text):
    fields = {}
    for part in text.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise ParseError(f"--track-events wants x=X,eps=E, got {text!r}")
        key, _, val = part.partition("=")
        try:
            fields[key.strip()] = float(val)
        except ValueError:
            raise ParseError(f"bad --track-events value {val!r}") from None
    if "x" not in fields:
        raise ParseError("--track-events needs at least x=<threshold>")
    return fields["x"], fields.get("eps", 0.0)


def _run_simulate(cfg, law, streams):
    n = cfg.n if cfg.n != "inf" else None
    if n is None:
        raise BadParam("simulate needs a finite n")
    track = bool(cfg.track_events)
    if track:
        ev_x, ev_eps = _parse_track_events(cfg.track_events)
    rows = []
    for rep in range(cfg.replicas):
        g = streams.stream(0xE1, rep)
        sid = f"({cfg.seed},{rep})"
        if track:
            rec, flags = simulate_with_events(
                law, n, ev_x, ev_eps, g, population_cap=cfg.population_cap, stream_id=sid
            )
        else:
            rec = simulate(law, n, g, population_cap=cfg.population_cap, stream_id=sid)
            flags = None
        for k, (z, w) in enumerate(zip(rec.sizes, rec.w_values)):
            gmax = rec.gen_max_offspring[k] if k < len(rec.gen_max_offspring) else None
            bk = flags.b_k_holds[k] if flags and k < len(flags.b_k_holds) else None
            ak = flags.a_k_fired[k] if flags and k < len(flags.a_k_fired) else None
            rows.append((rep, k, z, w, gmax, bk, ak))
    _write_csv(cfg.out, ["replica", "k", "Z_k", "W_k", "max_offspring", "b_k", "a_k"], rows)


def _run_estimate(cfg, law, streams):
    if cfg.n == "inf":
        raise BadParam("estimate needs a finite n")
    if not cfg.x_grid:
        raise BadParam("estimate needs an x grid (--x or --x-geo)")
    method = cfg.method or "naive"
    n = int(cfg.n)
    rows = []
    max_breakdown = n if method == "bigjump" else 0
    for x in cfg.x_grid:
        if method == "naive":
            res = estimators.naive_mc(
                law, n, x, cfg.replicas, streams,
                population_cap=cfg.population_cap,
                workers=cfg.workers or os.cpu_count() or 1,
            )
        elif method == "bigjump":
            res = estimators.big_jump_estimator(
                law, n, x, cfg.eps, cfg.replicas, streams,
                population_cap=cfg.population_cap,
            )
        else:
            res = estimators.exact_convolution(law, n, int(math.floor(law.mean_m**n * x)))
        row = [n, x, method, res.estimate, res.std_error, res.ci_low, res.ci_high,
               res.replicas_used]
        if max_breakdown:
            bk = res.per_generation_breakdown or []
            row.extend(bk + [None] * (max_breakdown - len(bk)))
        rows.append(row)
    header = ["n", "x", "method", "estimate", "se", "ci_low", "ci_high", "replicas"]
    header += [f"breakdown_k{k}" for k in range(max_breakdown)]
    _write_csv(cfg.out, header, rows)


def _run_approximate(cfg, law, streams):
    if not cfg.x_grid:
        raise BadParam("approximate needs an x grid")
    method = cfg.method or "series"
    n = cfg.n
    rows = []
    for x in cfg.x_grid:
        if method == "series":
            if n == "inf":
                appr = asymptotics.series_tail_infinite(law, x)
            else:
                appr = asymptotics.series_tail(law, int(n), x)
        elif method == "series_inf":
            appr = asymptotics.series_tail_infinite(law, x)
        elif method == "weibull":
            appr = asymptotics.weibull_tail(law, x)
        elif method == "weibull_corrected":
            beta = law.params.get("beta")
            if beta is None:
                raise BadParam("weibull_corrected needs a weibull law")
            n_var = math.inf if n == "inf" else int(n)
            sig = asymptotics.var_wn(law.variance, law.mean_m, n_var)
            appr = asymptotics.weibull_corrected_lower(beta, law.mean_m, sig, x)
        elif method == "index_one":
            appr = asymptotics.index_one_tail(law, math.inf if n == "inf" else int(n), x)
        elif method == "lemma32":
            if n == "inf":
                raise BadParam("lemma32 needs a finite n")
            appr = asymptotics.lemma32_lower(law, int(n), x, cfg.big_a)
        else:
            raise BadParam(f"unknown approximation method {method!r}")
        rows.append(
            (x, cfg.n, appr.method, appr.value, appr.truncation_terms, appr.truncation_bound)
        )
    _write_csv(
        cfg.out,
        ["x", "n", "method", "value", "truncation_terms", "truncation_bound"],
        rows,
    )


def _run_diagnose(cfg, law, streams):
    if not cfg.check:
        raise BadParam("diagnose needs --check")
    report = _CHECKS[cfg.check](law, cfg)
    payload = {
        "class_name": report.class_name,
        "grid": [float(g) for g in np.asarray(report.grid).ravel()],
        "statistic": [None if not math.isfinite(s) else float(s)
                      for s in np.asarray(report.statistic, dtype=float).ravel()],
        "verdict": report.verdict,
        "witness": report.witness if not isinstance(report.witness, tuple)
        else list(report.witness),
        "detail": report.detail,
        "law": law.spec_string,
    }
    with open(cfg.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_shift(text, law):
    if text == "m":
        return law.mean_m
    if text == "2m":
        return 2.0 * law.mean_m
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"bad --shift {text!r}; expected m, 2m, or a real") from None


def _run_bound(cfg, law, streams):
    if cfg.n == "inf":
        raise BadParam("bound needs a finite n")
    if not cfg.x_grid:
        raise BadParam("bound needs an x grid")
    summand = bounds.CenteredSummandLaw(law, _resolve_shift(cfg.shift, law))
    n = int(cfg.n)
    rows = []
    for x in cfg.x_grid:
        if cfg.prop == "22":
            res = bounds.prop22_bound(summand, n, x, cfg.eps or 0.5)
        elif cfg.prop == "23":
            y = cfg.y or 0.5 * x
            res = bounds.prop23_bound(summand, n, x, y, cfg.eps or 0.25, cfg.c)
        else:
            y = cfg.y or 0.5 * x
            res = bounds.chebyshev_sum_bound(summand, n, x, y, cfg.lam)
        rows.append(
            (n, x, cfg.prop, res.y_used, res.lambda_used, res.bound_value,
             res.jump_term, res.chernoff_term, res.validity)
        )
    _write_csv(
        cfg.out,
        ["n", "x", "prop", "y", "lambda", "bound", "jump_term", "chernoff_term", "validity"],
        rows,
    )


def _run_compare(cfg, law, streams):
    if cfg.n == "inf":
        raise BadParam("compare needs a finite n")
    if not cfg.x_grid:
        raise BadParam("compare needs an x grid")
    rows = estimators.compare_to_asymptotics(
        law,
        [int(cfg.n)],
        cfg.x_grid,
        cfg.method or "series",
        cfg.estimator or "naive",
        cfg.replicas,
        streams,
        eps=cfg.eps,
        population_cap=cfg.population_cap,
    )
    _write_csv(
        cfg.out,
        ["n", "x", "estimate", "se", "ci_low", "ci_high", "approximation", "ratio"],
        [
            (r.n, r.x, r.estimate, r.std_error, r.ci_low, r.ci_high,
             r.approximation, r.ratio)
            for r in rows
        ],
    )


_RUNNERS = {
    "simulate": _run_simulate,
    "estimate": _run_estimate,
    "approximate": _run_approximate,
    "diagnose": _run_diagnose,
    "bound": _run_bound,
    "compare": _run_compare,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute a resolved config; returns the process exit code."""
    t0 = time.perf_counter()
    try:
        cfg.validate()
        law = parse_law_spec(cfg.law)
        streams = RngStreams(cfg.seed)
        _RUNNERS[cfg.subcommand](cfg, law, streams)
    except _PARAM_ERRORS as err:
        print(f"gwtails: parameter error: {err}", file=sys.stderr)
        return 2
    except _NUMERIC_ERRORS as err:
        print(f"gwtails: numeric failure: {err}", file=sys.stderr)
        return 3
    _write_manifest(cfg, time.perf_counter() - t0)
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except _PARAM_ERRORS as err:
        print(f"gwtails: parameter error: {err}", file=sys.stderr)
        return 2
    code = run(cfg)
    if code == 0:
        print(f"wrote {cfg.out} and {cfg.out}.manifest.json")
    return code


if __name__ == "__main__":
    sys.exit(main())
