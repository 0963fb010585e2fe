"""Command-line entry point.

Subcommands bind JSON configs / inline flags to the library modules and emit
CSV or JSON artifacts:

    moments    closed-form or MC moment set as JSON
    diagnose   rho_d, regime and predicted limit as JSON
    tailcurve  survival curves CSV (threshold grid x empirical/limit columns)
    sweep      Kolmogorov-distance sweep CSV over d or gamma
    ratios     third-moment ratio CSV over d
    spectral   truncation-error / quadratic-form convergence CSV over K

Config files are strict JSON: unknown keys are rejected by name, flags
override file values, and --emit-config prints the resolved config (stable
formatting, so emitted configs round-trip byte-identically).  Exit codes:
0 success, 2 config error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import InvalidInput
from .experiments import (AutoGrid, CovTemplate, ExperimentConfig, FixedGrid,
                          build_model, diagnose, run_kdist_sweep, run_moment_ratio_sweep,
                          run_tail_curve, write_ratios_csv, write_sweep_csv,
                          write_tailcurve_csv)
from .kernels import Fixed, MedianHeuristic, PowerOfD
from .model import Identity, RngStream
from .moments import (closed_form_ksd_moments, closed_form_linear_mmd_moments,
                      closed_form_mmd_rbf_moments, empirical_moments, moments_json)
from .spectral import run_spectral_table, write_spectral_csv


class ConfigError(ValueError):
    """Raised for any malformed configuration; the message names the key."""


_BASE_KEYS = ("stat", "d", "n", "gamma", "mu_first", "mu_second", "mu", "cov",
              "seeds", "reps_per_seed", "grid", "limits", "base_seed",
              "freeze_median", "n_mc_moments", "notes")
_EXTRA_KEYS = {
    "moments": ("method", "n_mc"),
    "diagnose": ("method", "n_mc"),
    "tailcurve": (),
    "sweep": ("vary", "values", "n_rule"),
    "ratios": ("d_values",),
    "spectral": ("k_grid", "n_fit", "n_mc", "reps"),
}
_DEFAULTS = {
    "stat": "ksd_rbf", "d": 2, "n": 50, "gamma": None, "mu_first": 0.0,
    "mu_second": 0.0, "mu": None, "cov": "identity", "seeds": 10,
    "reps_per_seed": 200, "grid": "auto", "limits": ["gauss", "gamma"],
    "base_seed": 0, "freeze_median": False, "n_mc_moments": None,
    "method": "auto", "n_mc": 4000, "vary": None, "values": None,
    "n_rule": "fixed", "d_values": None, "k_grid": [1, 3, 6, 10, 12],
    "n_fit": 100000, "reps": 10000, "notes": None,
}
_COMMAND_DEFAULTS = {"spectral": {"n_mc": 20000}}


def _parse_gamma(s: str):
    if s == "median":
        return MedianHeuristic()
    if s.startswith("fixed:"):
        try:
            return Fixed(float(s[6:]))
        except ValueError as e:
            raise ConfigError(f"gamma: bad fixed value in {s!r}") from e
    if s.startswith("dpow:"):
        parts = s[5:].split(",")
        if len(parts) != 2:
            raise ConfigError(f"gamma: dpow needs coef,exponent, got {s!r}")
        try:
            return PowerOfD(coef=float(parts[0]), exponent=float(parts[1]))
        except ValueError as e:
            raise ConfigError(f"gamma: bad dpow values in {s!r}") from e
    raise ConfigError(f"gamma: expected median | fixed:V | dpow:C,E, got {s!r}")


def _parse_cov(s: str) -> CovTemplate:
    if s == "identity":
        return CovTemplate()
    if s.startswith("spiked:"):
        parts = s[7:].split(",")
        if len(parts) != 2:
            raise ConfigError(f"cov: spiked needs sigma2,rho, got {s!r}")
        try:
            return CovTemplate(kind="spiked", sigma2=float(parts[0]), rho=float(parts[1]))
        except ValueError as e:
            raise ConfigError(f"cov: bad spiked values in {s!r}") from e
    if s.startswith("diagonal:"):
        try:
            entries = tuple(float(x) for x in s[9:].split(","))
        except ValueError as e:
            raise ConfigError(f"cov: bad diagonal entries in {s!r}") from e
        return CovTemplate(kind="diagonal", entries=entries)
    raise ConfigError(f"cov: expected identity | spiked:S,R | diagonal:E1,E2,..., got {s!r}")


def _parse_grid(s: str):
    if s == "auto":
        return AutoGrid()
    if s.startswith("auto:"):
        parts = s[5:].split(",")
        if len(parts) != 2:
            raise ConfigError(f"grid: auto needs span,points, got {s!r}")
        return AutoGrid(span=float(parts[0]), points=int(parts[1]))
    if s.startswith("fixed:"):
        parts = s[6:].split(",")
        if len(parts) != 3:
            raise ConfigError(f"grid: fixed needs lo,hi,points, got {s!r}")
        return FixedGrid(lo=float(parts[0]), hi=float(parts[1]), points=int(parts[2]))
    raise ConfigError(f"grid: expected auto | auto:S,P | fixed:LO,HI,P, got {s!r}")


def _normalize_stat(s: str) -> str:
    return s.replace("-", "_")


def _load_json_config(path: str, allowed: Sequence[str]) -> Dict:
    try:
        with open(path) as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config: cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config: {path} must hold a JSON object")
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"config: unknown key {key!r} in {path}")
    return raw


def _merged_config(args, command: str) -> Dict:
    """File values, overridden by explicitly provided flags, over defaults."""
    allowed = _BASE_KEYS + _EXTRA_KEYS[command]
    merged = {k: _DEFAULTS[k] for k in allowed}
    merged.update(_COMMAND_DEFAULTS.get(command, {}))
    if getattr(args, "config", None):
        merged.update(_load_json_config(args.config, allowed))
    for key in allowed:
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    return merged


def _validate_int(cfg: Dict, key: str, minimum: int) -> int:
    v = cfg[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise ConfigError(f"{key}: must be an integer >= {minimum}, got {v!r}")
    return v


def _experiment_config(cfg: Dict) -> ExperimentConfig:
    stat = _normalize_stat(str(cfg["stat"]))
    gamma = cfg["gamma"]
    if isinstance(gamma, str):
        gamma = _parse_gamma(gamma)
    elif isinstance(gamma, (int, float)) and not isinstance(gamma, bool):
        gamma = Fixed(float(gamma))
    elif gamma is not None:
        raise ConfigError(f"gamma: expected a rule string or number, got {gamma!r}")
    cov = cfg["cov"]
    if isinstance(cov, str):
        cov = _parse_cov(cov)
    elif not isinstance(cov, CovTemplate):
        raise ConfigError(f"cov: expected a pattern string, got {cov!r}")
    grid = cfg["grid"]
    if isinstance(grid, str):
        grid = _parse_grid(grid)
    limits = cfg["limits"]
    if isinstance(limits, str):
        limits = [x for x in limits.split(",") if x]
    mu = cfg["mu"]
    if mu is not None:
        mu = tuple(float(x) for x in mu)
    try:
        return ExperimentConfig(
            stat=stat, d=_validate_int(cfg, "d", 1), n=_validate_int(cfg, "n", 2),
            gamma=gamma, mu_first=float(cfg["mu_first"]), mu_second=float(cfg["mu_second"]),
            mu=mu, cov=cov, seeds=_validate_int(cfg, "seeds", 1),
            reps_per_seed=_validate_int(cfg, "reps_per_seed", 2), grid=grid,
            limits=tuple(limits), base_seed=int(cfg["base_seed"]),
            freeze_median=bool(cfg["freeze_median"]),
            n_mc_moments=cfg["n_mc_moments"])
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _emit_config(cfg: Dict, out: Optional[str]) -> None:
    text = json.dumps(cfg, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _write_json(payload: Dict, out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _moment_set(cfg: Dict, ecfg: ExperimentConfig):
    """Resolve the moment set per the requested method (closed | mc | auto)."""
    method = str(cfg["method"])
    model = build_model(ecfg)
    mu_norm2 = float(model.mu @ model.mu)
    identity = isinstance(model.cov, Identity)
    gamma = None
    if ecfg.stat in ("ksd_rbf", "mmd_rbf"):
        if not isinstance(ecfg.gamma, Fixed):
            if isinstance(ecfg.gamma, PowerOfD):
                gamma = ecfg.gamma.coef * float(ecfg.d) ** ecfg.gamma.exponent
            else:
                raise ConfigError("gamma: moments/diagnose need a data-independent "
                                  "bandwidth (fixed:V or dpow:C,E)")
        else:
            gamma = ecfg.gamma.gamma
    closed_ok = ecfg.stat == "mmd_linear" or (identity and gamma is not None)
    if method == "auto":
        method = "closed" if closed_ok else "mc"
    if method == "closed":
        if not closed_ok:
            raise ConfigError("method: no closed form for this stat/covariance "
                              "(closed forms need identity covariance)")
        if ecfg.stat == "mmd_linear":
            return closed_form_linear_mmd_moments(model.mu, model.cov)
        if ecfg.stat == "ksd_rbf":
            return closed_form_ksd_moments(ecfg.d, gamma, mu_norm2)
        return closed_form_mmd_rbf_moments(ecfg.d, gamma, mu_norm2)
    if method != "mc":
        raise ConfigError(f"method: expected auto | closed | mc, got {method!r}")
    n_mc = _validate_int(cfg, "n_mc", 10)
    from .experiments import _fixed_summand
    spec = _fixed_summand(ecfg, model, gamma)
    return empirical_moments(spec, model, n_mc, RngStream(ecfg.base_seed, 0, 0))


def _cmd_moments(args) -> int:
    cfg = _merged_config(args, "moments")
    ecfg = _experiment_config(cfg)
    if args.emit_config:
        _emit_config(cfg, args.out)
        return 0
    ms = _moment_set(cfg, ecfg)
    _write_json(moments_json(ms, ecfg.n), args.out)
    return 0


def _cmd_diagnose(args) -> int:
    cfg = _merged_config(args, "diagnose")
    ecfg = _experiment_config(cfg)
    if args.emit_config:
        _emit_config(cfg, args.out)
        return 0
    ms = _moment_set(cfg, ecfg)
    diag = diagnose(ms, ecfg.n)
    _write_json({
        "rho_d": "inf" if math.isinf(diag.rho_d) else diag.rho_d,
        "sqrt_n_minus_1": diag.sqrt_n_minus_1,
        "regime": diag.regime,
        "predicted_limit": diag.predicted_limit,
    }, args.out)
    return 0


def _require_out(args) -> str:
    if not args.out:
        raise ConfigError("out: CSV subcommands require --out FILE")
    return args.out


def _cmd_tailcurve(args) -> int:
    cfg = _merged_config(args, "tailcurve")
    ecfg = _experiment_config(cfg)
    if args.emit_config:
        _emit_config(cfg, args.out)
        return 0
    out = _require_out(args)
    write_tailcurve_csv(run_tail_curve(ecfg), out)
    return 0


def _cmd_sweep(args) -> int:
    cfg = _merged_config(args, "sweep")
    ecfg = _experiment_config(cfg)
    if cfg["vary"] not in ("d", "gamma"):
        raise ConfigError(f"vary: must be 'd' or 'gamma', got {cfg['vary']!r}")
    if not cfg["values"] or len(cfg["values"]) < 2:
        raise ConfigError("values: need >= 2 sweep values")
    if args.emit_config:
        _emit_config(cfg, args.out)
        return 0
    out = _require_out(args)
    values = [float(v) for v in cfg["values"]]
    res = run_kdist_sweep(ecfg, cfg["vary"], values, n_rule=str(cfg["n_rule"]))
    write_sweep_csv(res, out)
    return 0


def _cmd_ratios(args) -> int:
    cfg = _merged_config(args, "ratios")
    ecfg = _experiment_config(cfg)
    if not cfg["d_values"]:
        raise ConfigError("d_values: need at least one dimension")
    if args.emit_config:
        _emit_config(cfg, args.out)
        return 0
    out = _require_out(args)
    rows = run_moment_ratio_sweep(ecfg, [int(v) for v in cfg["d_values"]])
    write_ratios_csv(rows, out)
    return 0


def _cmd_spectral(args) -> int:
    cfg = _merged_config(args, "spectral")
    cfg["stat"] = "mmd_rbf"
    ecfg = _experiment_config(cfg)
    if not isinstance(ecfg.gamma, (Fixed, PowerOfD)):
        raise ConfigError("gamma: spectral needs a data-independent bandwidth")
    if ecfg.d > 3:
        raise ConfigError(f"d: spectral supports d <= 3, got {ecfg.d}")
    if args.emit_config:
        _emit_config(cfg, args.out)
        return 0
    out = _require_out(args)
    gamma = (ecfg.gamma.gamma if isinstance(ecfg.gamma, Fixed)
             else ecfg.gamma.coef * float(ecfg.d) ** ecfg.gamma.exponent)
    model = build_model(ecfg)
    rows = run_spectral_table(model, gamma, ecfg.n, [int(k) for k in cfg["k_grid"]],
                              base_seed=ecfg.base_seed, n_mc=_validate_int(cfg, "n_mc", 10),
                              n_fit=_validate_int(cfg, "n_fit", 2),
                              reps=_validate_int(cfg, "reps", 10))
    write_spectral_csv(rows, out)
    return 0


_COMMANDS = {
    "moments": _cmd_moments,
    "diagnose": _cmd_diagnose,
    "tailcurve": _cmd_tailcurve,
    "sweep": _cmd_sweep,
    "ratios": _cmd_ratios,
    "spectral": _cmd_spectral,
}


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (strict keys; flags override)")
    p.add_argument("--stat", help="ksd-rbf | mmd-rbf | mmd-linear")
    p.add_argument("--d", type=int, help="dimension")
    p.add_argument("--n", type=int, help="sample size per replicate (default 50)")
    p.add_argument("--gamma", help="bandwidth rule: median | fixed:V | dpow:C,E")
    p.add_argument("--mu-first", dest="mu_first", type=float,
                   help="mean shift in coordinate 1")
    p.add_argument("--mu-second", dest="mu_second", type=float,
                   help="mean shift in coordinate 2")
    p.add_argument("--mu", type=lambda s: [float(x) for x in s.split(",")],
                   help="explicit mean vector, comma-separated")
    p.add_argument("--cov", help="identity | spiked:SIGMA2,RHO | diagonal:E1,E2,...")
    p.add_argument("--seeds", type=int, help="number of seeds (default 10)")
    p.add_argument("--reps-per-seed", dest="reps_per_seed", type=int,
                   help="replicates per seed (default 200)")
    p.add_argument("--grid", help="auto | auto:SPAN,POINTS | fixed:LO,HI,POINTS")
    p.add_argument("--limits", help="comma list from gauss,gamma,chisq1,wchisq_exact")
    p.add_argument("--base-seed", dest="base_seed", type=int, help="root seed (default 0)")
    p.add_argument("--freeze-median", dest="freeze_median", action="store_const", const=True,
                   help="resolve the median bandwidth once from replicate (0,0)")
    p.add_argument("--n-mc-moments", dest="n_mc_moments", type=int,
                   help="MC sample size for theoretical moments")
    p.add_argument("--out", help="output path (JSON defaults to stdout; CSV requires a file)")
    p.add_argument("--emit-config", action="store_true",
                   help="print the resolved config as canonical JSON and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hidim-ustat",
        description="Moments, limiting distributions and Monte-Carlo diagnostics "
                    "for degree-two U-statistics (MMD / KSD) in high dimensions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="moment set as JSON")
    _add_common_flags(p)
    p.add_argument("--method", help="auto | closed | mc (default auto)")
    p.add_argument("--n-mc", dest="n_mc", type=int, help="MC sample size for --method mc")

    p = sub.add_parser("diagnose", help="rho_d / regime / predicted limit as JSON")
    _add_common_flags(p)
    p.add_argument("--method", help="auto | closed | mc (default auto)")
    p.add_argument("--n-mc", dest="n_mc", type=int, help="MC sample size for --method mc")

    p = sub.add_parser("tailcurve", help="survival-curve CSV")
    _add_common_flags(p)

    p = sub.add_parser("sweep", help="Kolmogorov-distance sweep CSV")
    _add_common_flags(p)
    p.add_argument("--vary", help="d | gamma")
    p.add_argument("--values", type=lambda s: [float(x) for x in s.split(",")],
                   help="comma-separated sweep values")
    p.add_argument("--n-rule", dest="n_rule", help="fixed | sqrt_d | d2 (d sweeps only)")

    p = sub.add_parser("ratios", help="third-moment ratio CSV over d")
    _add_common_flags(p)
    p.add_argument("--d-values", dest="d_values",
                   type=lambda s: [int(x) for x in s.split(",")],
                   help="comma-separated dimensions")

    p = sub.add_parser("spectral", help="truncation / quadratic-form convergence CSV")
    _add_common_flags(p)
    p.add_argument("--k-grid", dest="k_grid",
                   type=lambda s: [int(x) for x in s.split(",")],
                   help="comma-separated truncation degrees (default 1,3,6,10,12)")
    p.add_argument("--n-fit", dest="n_fit", type=int,
                   help="feature-fitting sample size (default 100000)")
    p.add_argument("--n-mc", dest="n_mc", type=int,
                   help="truncation-error MC pairs (default 4000; spectral default 20000)")
    p.add_argument("--reps", type=int, help="samples per side of the KS column (default 10000)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # runtime failures map to exit 1 with the message
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
