"""Command-line front end: every subcommand emits one data table.

Configuration precedence (lowest to highest): built-in defaults, the JSON
object given with ``--config FILE``, then command-line flags (``--seed``,
``--workers``, ``--format``, ``--output`` and any number of
``--set key=value`` with JSON-parsed values).

Output goes to ``--output`` if given, otherwise to
``$MESOSCATTER_OUTPUT_DIR/<command>.<format>`` if that variable is set,
otherwise to stdout. Execution-only keys (workers, output, format) are left
out of the metadata header so that tables do not depend on them.

Exit codes: 0 success, 2 configuration error, 3 tolerance failure,
4 resource limit.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from collections import Counter
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .amplitudes import ChannelAssignment
from .ensembles import SeedSpec
from .diagrams import (ScalingSpec, bbp_limit, exp_k0_series, k1_series, k2_series, kappa1_series,
                       pairwise_exact_coefficient, tree_series)
from .moments import (ResourceLimitError, first_moment, p_tilde, second_moment_closed_form,
                      second_moment_exact, variance_leading_order)
from .montecarlo import ConfigError, estimate_first_moment, estimate_second_moment
from .series import SeriesOrderError
from .tables import config_hash, render_csv, render_json
from .wavepackets import WavepacketConfig, pairwise_ratio, q2_kernel, q3_kernel

ENV_OUTPUT_DIR = "MESOSCATTER_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE, EXIT_RESOURCE = 0, 2, 3, 4
EXEC_KEYS = ("workers", "output", "format")

COMMON = {"seed": 20240601, "workers": 1, "format": "csv", "output": ""}

DEFAULTS: dict[str, dict[str, Any]] = {
    "hom-profile": {"n": 2, "N": 10, "beta": 2, "epsilon": 1, "s": 1.0, "k": 50.0, "v": 1.0,
                    "dwell_ratios": [0.1, 2.5, 5.0], "z_min": 0.0, "z_max": 30.0, "z_points": 121},
    "bbp": {"alpha": 1.0, "eta": 2.0, "epsilon": 1, "n_values": [5, 10, 25, 50, 100, 200],
            "mc_max_n": 0, "mc_samples": 20000},
    "rmt-verify": {"betas": [2, 1], "epsilons": [1, -1], "n_values": [1, 2, 3], "N_values": [6, 12],
                   "samples": 200000, "z_tol": 3.0, "extra_cases": True},
    "variance": {"n_values": [1, 2, 3], "N_values": [6, 12, 100], "beta": 2,
                 "mc_samples": 0, "mc_max_N": 12},
    "three-body": {"dwell_ratios": [0.1, 2.0], "tau_min": -4.0, "tau_max": 4.0, "points": 33,
                   "s": 1.0, "k": 50.0, "v": 1.0},
    "series": {"order": 4, "N_values": [2, 3, 10]},
    "mc": {"ensemble": "CUE", "a": [1, 2], "b": [3, 4], "epsilon": 1, "N": 6, "samples": 200000,
           "moment": 1, "convention": "amplitude"},
}


# --- configuration -----------------------------------------------------------

def _coerce(key: str, value: Any, default: Any) -> Any:
    def bad():
        return ConfigError(f"field {key!r}: expected {type(default).__name__}, got {value!r}")

    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise bad()
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad()
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad()
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise bad()
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise ConfigError(f"field {key!r}: expected a non-empty list, got {value!r}")
        if default and all(isinstance(d, int) and not isinstance(d, bool) for d in default):
            if not all(isinstance(x, int) and not isinstance(x, bool) for x in value):
                raise ConfigError(f"field {key!r}: expected a list of integers, got {value!r}")
        elif default and isinstance(default[0], float):
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
                raise ConfigError(f"field {key!r}: expected a list of numbers, got {value!r}")
            value = [float(x) for x in value]
        return list(value)
    return value


def resolve_config(command: str, file_values: dict | None = None, overrides: dict | None = None) -> dict:
    base = {**COMMON, **DEFAULTS[command]}
    cfg = dict(base)
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if key not in base:
                raise ConfigError(f"unknown field {key!r} for command {command!r}")
            cfg[key] = _coerce(key, value, base[key])
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError("field 'format': must be 'csv' or 'json'")
    if cfg["workers"] < 1:
        raise ConfigError("field 'workers': must be >= 1")
    if not 0 <= cfg["seed"] < 2**64:
        raise ConfigError("field 'seed': must be a 64-bit unsigned integer")
    return cfg


def _positive(cfg: dict, *keys: str) -> None:
    for k in keys:
        vals = cfg[k] if isinstance(cfg[k], list) else [cfg[k]]
        if any(v <= 0 for v in vals):
            raise ConfigError(f"field {k!r}: must be positive")


def _epsilon(cfg: dict, key: str = "epsilon") -> None:
    vals = cfg[key] if isinstance(cfg[key], list) else [cfg[key]]
    if any(v not in (1, -1) for v in vals):
        raise ConfigError(f"field {key!r}: must be +1 or -1")


def _beta(cfg: dict, key: str = "beta") -> None:
    vals = cfg[key] if isinstance(cfg[key], list) else [cfg[key]]
    if any(v not in (1, 2) for v in vals):
        raise ConfigError(f"field {key!r}: must be 1 or 2")


def _wavepacket(cfg: dict) -> WavepacketConfig:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return WavepacketConfig(s=cfg["s"], k=cfg["k"], v=cfg["v"])


def distinct_channels(n: int, N: int, epsilon: int = 1) -> ChannelAssignment:
    """Incoming ``1..n``; outgoing ``n+1..2n`` when possible, else the last n channels."""
    if n > N:
        raise ConfigError(f"cannot place {n} particles in distinct channels of N={N}")
    a = tuple(range(1, n + 1))
    b = tuple(range(n + 1, 2 * n + 1)) if 2 * n <= N else tuple(range(N - n + 1, N + 1))
    return ChannelAssignment(a, b, epsilon)


def _fmt_channels(ch) -> str:
    return " ".join(str(c) for c in ch)


# --- commands ----------------------------------------------------------------

def cmd_hom_profile(cfg: dict):
    _positive(cfg, "n", "N", "s", "k", "v", "z_points")
    _epsilon(cfg)
    _beta(cfg)
    if any(r < 0 for r in cfg["dwell_ratios"]):
        raise ConfigError("field 'dwell_ratios': must be non-negative")
    n, N, eps, beta = cfg["n"], cfg["N"], cfg["epsilon"], cfg["beta"]
    base = _wavepacket(cfg)
    zs = np.linspace(cfg["z_min"], cfg["z_max"], cfg["z_points"])
    h = 1e-4 * cfg["s"]
    rows = []
    for ratio in cfg["dwell_ratios"]:
        wp = base.with_dwell_ratio(ratio)
        for z in zs:
            z = float(z)
            q2 = q2_kernel(z, wp)
            delays = [0.0] * ((n + 1) // 2) + [z] * (n // 2)
            row = {"dwell_ratio": ratio, "z": z, "q2": q2,
                   "ratio_pairwise": pairwise_ratio(n, N, beta, eps, delays, wp),
                   "ratio_exact_n2": None}
            if n == 2 and beta == 2:
                row["ratio_exact_n2"] = N * N / (N * N - 1.0) * (1.0 - eps * q2 / N)
            qp, qm = q2_kernel(z + h, wp), q2_kernel(z - h, wp)
            row["log_slope"] = (math.log(qp) - math.log(qm)) / (2 * h) if qp > 0 and qm > 0 else math.nan
            rows.append(row)
    cols = ["dwell_ratio", "z", "q2", "ratio_pairwise", "ratio_exact_n2", "log_slope"]
    return cols, rows, {}


def cmd_bbp(cfg: dict):
    _positive(cfg, "alpha", "eta", "n_values")
    _epsilon(cfg)
    sc = ScalingSpec(cfg["alpha"], cfg["eta"], cfg["epsilon"])
    lim = bbp_limit(sc)
    rows = []
    for n in cfg["n_values"]:
        if float(sc.eta).is_integer():
            N = Fraction(sc.alpha) * n ** int(sc.eta)
        else:
            N = Fraction(sc.channels(n))
        coeff = float(pairwise_exact_coefficient(n, N, sc.epsilon))
        row = {"n": n, "N": float(N), "exact_coeff": coeff, "limit": lim.value,
               "abs_deviation": abs(coeff - lim.value), "mc_mean": None, "mc_se": None}
        if n <= cfg["mc_max_n"]:
            Ni = sc.channels_int(n)
            est = estimate_first_moment("CUE", distinct_channels(n, Ni, sc.epsilon), Ni, cfg["mc_samples"],
                                        _row_seed(cfg["seed"], n), workers=cfg["workers"])
            row["mc_mean"] = est.mean * Ni**n
            row["mc_se"] = est.std_error * Ni**n
        rows.append(row)
    meta = {"regime": lim.regime, "trusted": lim.trusted}
    return ["n", "N", "exact_coeff", "limit", "abs_deviation", "mc_mean", "mc_se"], rows, meta


def _first_moment_reference(ch: ChannelAssignment, N: int, beta: int, convention: str) -> float | None:
    a_mult = tuple(Counter(ch.a).values())
    b_mult = tuple(Counter(ch.b).values())
    if beta == 1 and not ch.disjoint:
        return None
    res = first_moment(ch.n, N, beta, ch.epsilon, a_mult=a_mult, b_mult=b_mult,
                       channels_disjoint=ch.disjoint)
    return float(res.p_hat if convention == "amplitude" else res.value)


def cmd_rmt_verify(cfg: dict):
    _positive(cfg, "n_values", "N_values", "samples", "z_tol")
    _epsilon(cfg, "epsilons")
    _beta(cfg, "betas")
    cases = []
    for beta in cfg["betas"]:
        for eps in cfg["epsilons"]:
            for n in cfg["n_values"]:
                for N in cfg["N_values"]:
                    if beta == 1 and 2 * n > N:
                        continue
                    cases.append((f"b{beta}e{eps:+d}n{n}N{N}", beta, distinct_channels(n, N, eps), N))
    if cfg["extra_cases"]:
        N0 = cfg["N_values"][0]
        cases.append(("pauli", 2, ChannelAssignment((1, 2), (3, 3), -1), N0))
        cases.append(("bunched", 2, ChannelAssignment((1, 2), (3, 3), 1), N0))
    rows = []
    for i, (name, beta, ch, N) in enumerate(cases):
        ens = "CUE" if beta == 2 else "COE"
        ref = _first_moment_reference(ch, N, beta, "amplitude")
        est = estimate_first_moment(ens, ch, N, cfg["samples"], _row_seed(cfg["seed"], i),
                                    workers=cfg["workers"])
        z = est.z_score(ref)
        rows.append({"case": name, "ensemble": ens, "beta": beta, "epsilon": ch.epsilon, "n": ch.n, "N": N,
                     "a": _fmt_channels(ch.a), "b": _fmt_channels(ch.b), "formula": ref,
                     "mc_mean": est.mean, "mc_se": est.std_error, "z_score": z,
                     "pass": abs(z) < cfg["z_tol"]})
    cols = ["case", "ensemble", "beta", "epsilon", "n", "N", "a", "b", "formula", "mc_mean", "mc_se",
            "z_score", "pass"]
    status = EXIT_OK if all(r["pass"] for r in rows) else EXIT_TOLERANCE
    return cols, rows, {}, status


def _row_seed(master: int, index: int) -> int:
    """Distinct master seed per table row, derived deterministically."""
    return SeedSpec(master, 0).child(index).master_seed


def cmd_variance(cfg: dict):
    _positive(cfg, "n_values", "N_values")
    _beta(cfg)
    beta = cfg["beta"]
    rows = []
    for n in cfg["n_values"]:
        for N in cfg["N_values"]:
            if beta == 2:
                L = second_moment_exact(n, N)
            elif n <= 2:
                L = second_moment_closed_form(n, N, beta=1)
            else:
                raise ConfigError("field 'n_values': beta=1 second moments are available for n <= 2")
            pt = p_tilde(n, N, beta)
            var = L - pt**2
            lead_var, _ = variance_leading_order(n, N)
            # leading connected part plus the exact squared mean
            lead_L = lead_var + float(pt) ** 2
            row = {"n": n, "N": N, "beta": beta, "L_exact": L, "L": float(L), "p_tilde": pt,
                   "variance": float(var), "leading_variance": lead_var, "leading_L": lead_L,
                   "ratio_L": float(L) / lead_L, "mc_mean": None, "mc_se": None}
            if cfg["mc_samples"] >= 2 and N <= cfg["mc_max_N"] and 2 * n <= N:
                est = estimate_second_moment("CUE" if beta == 2 else "COE", distinct_channels(n, N), N,
                                             cfg["mc_samples"], _row_seed(cfg["seed"], len(rows)),
                                             workers=cfg["workers"])
                row["mc_mean"], row["mc_se"] = est.mean, est.std_error
            rows.append(row)
    cols = ["n", "N", "beta", "L_exact", "L", "p_tilde", "variance", "leading_variance", "leading_L",
            "ratio_L", "mc_mean", "mc_se"]
    return cols, rows, {}


def cmd_three_body(cfg: dict):
    _positive(cfg, "points", "s", "k", "v")
    if any(r < 0 for r in cfg["dwell_ratios"]):
        raise ConfigError("field 'dwell_ratios': must be non-negative")
    base = _wavepacket(cfg)
    taus = np.linspace(cfg["tau_min"], cfg["tau_max"], cfg["points"])
    rows = []
    for ratio in cfg["dwell_ratios"]:
        wp = base.with_dwell_ratio(ratio)
        for t12 in taus:
            for t32 in taus:
                q = q3_kernel(wp.v * float(t12), wp.v * float(t32), wp)
                rows.append({"dwell_ratio": ratio, "tau12": float(t12), "tau32": float(t32), "q3": q})
    return ["dwell_ratio", "tau12", "tau32", "q3"], rows, {}


def cmd_series(cfg: dict):
    order = cfg["order"]
    if not 1 <= order <= 30:
        raise ConfigError("field 'order': must lie in [1, 30]")
    _positive(cfg, "N_values")
    rows = []
    for N in cfg["N_values"]:
        F = tree_series(N, order)
        G = exp_k0_series(N, order)
        k1 = kappa1_series(N, order)
        K1 = k1_series(N, order)
        K2 = k2_series(N, order)
        for m in range(1, order + 1):
            rows.append({"N": N, "m": m, "F": F[m], "expK0": G[m], "kappa1": k1[m], "K1": K1[m], "K2": K2[m]})
    return ["N", "m", "F", "expK0", "kappa1", "K1", "K2"], rows, {}


def _mc_reference(cfg: dict, ch: ChannelAssignment) -> float | None:
    beta = 2 if cfg["ensemble"].upper() == "CUE" else 1
    N = cfg["N"]
    if cfg["moment"] == 1:
        return _first_moment_reference(ch, N, beta, cfg["convention"])
    if ch.has_coincidence:
        return None
    if beta == 2 and ch.n <= 3:
        return float(second_moment_exact(ch.n, N, ch.epsilon))
    if beta == 1 and ch.n <= 2 and ch.epsilon == 1 and ch.disjoint:
        return float(second_moment_closed_form(ch.n, N, beta=1))
    return None


def cmd_mc(cfg: dict):
    _epsilon(cfg)
    _positive(cfg, "N", "samples")
    if cfg["ensemble"].upper() not in ("CUE", "COE"):
        raise ConfigError("field 'ensemble': must be CUE or COE")
    if cfg["moment"] not in (1, 2):
        raise ConfigError("field 'moment': must be 1 or 2")
    if cfg["convention"] not in ("amplitude", "probability"):
        raise ConfigError("field 'convention': must be 'amplitude' or 'probability'")
    try:
        ch = ChannelAssignment(tuple(cfg["a"]), tuple(cfg["b"]), cfg["epsilon"])
        ch.check(cfg["N"])
    except ValueError as exc:
        raise ConfigError(f"field 'a'/'b': {exc}") from exc
    if cfg["moment"] == 1:
        est = estimate_first_moment(cfg["ensemble"], ch, cfg["N"], cfg["samples"], cfg["seed"],
                                    workers=cfg["workers"], convention=cfg["convention"])
    else:
        est = estimate_second_moment(cfg["ensemble"], ch, cfg["N"], cfg["samples"], cfg["seed"],
                                     workers=cfg["workers"])
    ref = _mc_reference(cfg, ch)
    row = {"ensemble": cfg["ensemble"].upper(), "a": _fmt_channels(ch.a), "b": _fmt_channels(ch.b),
           "epsilon": ch.epsilon, "N": cfg["N"], "moment": cfg["moment"], "mean": est.mean,
           "std_error": est.std_error, "samples": est.samples, "reference": ref,
           "z_score": est.z_score(ref) if ref is not None else None}
    cols = ["ensemble", "a", "b", "epsilon", "N", "moment", "mean", "std_error", "samples", "reference",
            "z_score"]
    return cols, [row], {}


COMMANDS: dict[str, Callable] = {
    "hom-profile": cmd_hom_profile,
    "bbp": cmd_bbp,
    "rmt-verify": cmd_rmt_verify,
    "variance": cmd_variance,
    "three-body": cmd_three_body,
    "series": cmd_series,
    "mc": cmd_mc,
}


# --- driver ------------------------------------------------------------------

def run(command: str, cfg: dict) -> tuple[str, int]:
    """Execute a resolved config; returns the rendered table and the exit status."""
    out = COMMANDS[command](cfg)
    cols, rows, extra = out[:3]
    status = out[3] if len(out) > 3 else EXIT_OK
    physics = {k: v for k, v in cfg.items() if k not in EXEC_KEYS}
    meta = {"command": command, "version": __version__, "seed": cfg["seed"],
            "config_hash": config_hash(physics), "config": physics, **extra}
    render = render_csv if cfg["format"] == "csv" else render_json
    return render(cols, rows, meta), status


def _parse_set(items: list[str]) -> dict:
    out = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mesoscatter", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"emit the {name} table")
        sp.add_argument("--config", type=Path, help="JSON object with field values")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--format", choices=["csv", "json"])
        sp.add_argument("--output", help="output file ('-' for stdout)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one field; VALUE is parsed as JSON when possible")
    return p


def _load_config_file(path: Path) -> dict:
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a flat JSON object")
    return data


def _destination(command: str, cfg: dict) -> Path | None:
    if cfg["output"] and cfg["output"] != "-":
        return Path(cfg["output"])
    if not cfg["output"] and os.environ.get(ENV_OUTPUT_DIR):
        return Path(os.environ[ENV_OUTPUT_DIR]) / f"{command}.{cfg['format']}"
    return None


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        file_values = _load_config_file(args.config) if args.config else {}
        flags = {k: getattr(args, k) for k in ("seed", "workers", "format", "output")
                 if getattr(args, k) is not None}
        flags.update(_parse_set(args.set))
        cfg = resolve_config(args.command, file_values, flags)
        text, status = run(args.command, cfg)
        dest = _destination(args.command, cfg)
        if dest is None:
            sys.stdout.write(text)
        else:
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_text(text)
    except (ResourceLimitError, SeriesOrderError, MemoryError) as exc:
        print(f"mesoscatter: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, ValueError, OSError) as exc:
        print(f"mesoscatter: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if status == EXIT_TOLERANCE:
        print("mesoscatter: one or more rows failed the tolerance check", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
