"""Command-line scenario runner.

Usage::

    squeezed-cvqkd --config scenario.yaml --out results/ [--seed N] [--threads N]

The configuration is a YAML (or JSON) mapping; see the README for an
annotated example. Every run writes ``<name>.csv`` with one row per sweep
point and ``<name>.json`` holding the fully resolved configuration, which
can be fed back through ``--config`` to reproduce the CSV exactly.

Exit status: 0 on success, 2 for invalid configuration, 3 for numerical
failures.
"""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import optimize
from .exceptions import DomainError, NoPositiveKey, QKDError
from .montecarlo import SimConfig, empirical_variance_report, simulate_block
from .protocol import NoisySqueezedState, noisy_state_from_loss
from .security import ALL_IN_AS, ALL_IN_SQUEEZED, allocation_key, worst_case_allocation

SCENARIOS = ("keyrate", "tolerance", "fading", "mc-validate", "allocation")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-10`` (exponent without a dot) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?[eE][-+]?[0-9]+$"),
    list("-+0123456789"),
)


def load_config(path: Path) -> dict:
    with open(path) as fh:
        return yaml.load(fh, Loader=_Loader)


class ConfigError(DomainError):
    """Invalid configuration; the message names the offending field."""


def defaults() -> dict:
    """Default protocol settings used by every scenario."""
    return {
        "beta": 0.95,          # reconciliation efficiency of realistic error correction
        "eps": 0.05,           # channel excess noise, SNU, input-referred
        "loss_db_per_km": 0.2,  # fibre attenuation
        "eps_bar": 1e-10,      # privacy-amplification failure probability
        "var_sqrtT": 0.02,     # weak-to-moderate turbulence
        "multiplier": 6.5,     # confidence width for a 1e-10 estimation failure
    }


BASE_CONFIG = {
    "scenario": None,
    "name": None,
    "objective": "asymptotic",
    "seed": 0,
    "threads": 1,
    "params": {},
    "optimize": {"free": [], "bounds": {}, "grid_points": optimize.GRID_POINTS},
    "sweep": None,
    "tolerance": {"axis": "eps", "upper": None, "tol": optimize.BISECTION_TOL,
                  "scan_points": optimize.SCAN_POINTS},
    "mc": {"samples_x": 10000, "samples_p": 10000, "repetitions": 1000,
           "het_scaling": "sqrt"},
    "allocation": {"var_x": None, "var_p": None, "Vs": None, "eta": None,
                   "side": "DR", "grid": 201},
}

# sweep-only axes that map onto protocol parameters
DERIVED_AXES = {"loss_db": "T"}


def _check(cond: bool, field: str, message: str):
    if not cond:
        raise ConfigError(f"{field}: {message}")


def _number(value, field: str) -> float:
    _check(isinstance(value, (int, float)) and not isinstance(value, bool), field,
           f"expected a number, got {value!r}")
    _check(math.isfinite(value), field, "must be finite")
    return float(value)


def _validate_params(p: dict, prefix: str = "params"):
    def num(name):
        return _number(p[name], f"{prefix}.{name}")

    _check(0.0 < num("V") <= 1.0, f"{prefix}.V", f"must lie in (0, 1], got {p['V']}")
    for name in ("Vx", "Vp", "dV_trusted", "dV_untrusted", "eps", "var_sqrtT", "loss_db_per_km"):
        _check(num(name) >= 0.0, f"{prefix}.{name}", f"must be >= 0, got {p[name]}")
    _check(0.0 < num("T") <= 1.0, f"{prefix}.T", f"must lie in (0, 1], got {p['T']}")
    _check(0.0 < num("t_het") < 1.0, f"{prefix}.t_het", f"must lie in (0, 1), got {p['t_het']}")
    _check(0.0 < num("beta") <= 1.0, f"{prefix}.beta", f"must lie in (0, 1], got {p['beta']}")
    _check(0.0 < num("eps_bar") < 1.0, f"{prefix}.eps_bar", "must lie in (0, 1)")
    _check(num("multiplier") >= 0.0, f"{prefix}.multiplier", "must be >= 0")
    _check(num("N") >= 1 and float(p["N"]).is_integer(), f"{prefix}.N", "must be a positive integer")
    for name in ("r_x", "r_p", "r_k"):
        if p[name] is not None:
            _check(0.0 <= num(name) <= 1.0, f"{prefix}.{name}", f"must lie in [0, 1], got {p[name]}")
    if p["distance_km"] is not None:
        _check(num("distance_km") >= 0.0, f"{prefix}.distance_km", "must be >= 0")
    _check(p["scheme"] in optimize.SCHEMES, f"{prefix}.scheme",
           f"must be one of {optimize.SCHEMES}, got {p['scheme']!r}")
    _check(p["side"] in ("DR", "RR"), f"{prefix}.side", f"must be DR or RR, got {p['side']!r}")
    for name in ("disclose", "disclose_as", "as_for_key"):
        _check(isinstance(p[name], bool), f"{prefix}.{name}", "must be true or false")


def _merge(base: dict, user: dict, field: str) -> dict:
    _check(isinstance(user, dict), field, "expected a mapping")
    unknown = set(user) - set(base)
    _check(not unknown, field, f"unknown keys {sorted(unknown)}")
    out = copy.deepcopy(base)
    out.update(user)
    return out


def _sweep_values(sweep: dict) -> list:
    if "values" in sweep:
        values = sweep["values"]
        _check(isinstance(values, list) and len(values) > 0, "sweep.values", "must be a nonempty list")
        return [_number(v, "sweep.values") for v in values]
    for key in ("start", "stop", "num"):
        _check(key in sweep, f"sweep.{key}", "required when sweep.values is absent")
    num = sweep["num"]
    _check(isinstance(num, int) and num >= 1, "sweep.num", "must be a positive integer")
    start, stop = _number(sweep["start"], "sweep.start"), _number(sweep["stop"], "sweep.stop")
    if sweep.get("spacing", "linear") == "log":
        _check(start > 0 and stop > 0, "sweep.start", "log spacing needs positive limits")
        return [float(v) for v in np.geomspace(start, stop, num)]
    _check(sweep.get("spacing", "linear") == "linear", "sweep.spacing", "must be linear or log")
    return [float(v) for v in np.linspace(start, stop, num)]


def resolve_config(raw: dict, seed=None, threads=None) -> dict:
    """Validate ``raw`` and materialize every default."""
    _check(isinstance(raw, dict), "config", "top level must be a mapping")
    cfg = _merge(BASE_CONFIG, raw, "config")
    _check(cfg["scenario"] in SCENARIOS, "scenario",
           f"must be one of {SCENARIOS}, got {cfg['scenario']!r}")
    if cfg["name"] is None:
        cfg["name"] = cfg["scenario"]
    _check(isinstance(cfg["name"], str) and cfg["name"] and "/" not in cfg["name"], "name",
           "must be a plain file stem")
    if seed is not None:
        cfg["seed"] = seed
    if threads is not None:
        cfg["threads"] = threads
    _check(isinstance(cfg["seed"], int) and 0 <= cfg["seed"] < 2 ** 64, "seed",
           "must be a 64-bit unsigned integer")
    _check(isinstance(cfg["threads"], int) and cfg["threads"] >= 1, "threads", "must be >= 1")

    if cfg["scenario"] == "fading":
        cfg["objective"] = "fading"
    _check(cfg["objective"] in optimize.OBJECTIVES, "objective",
           f"must be one of {optimize.OBJECTIVES}")
    params = dict(optimize.DEFAULT_PARAMS)
    params.update(defaults())
    cfg["params"] = _merge(params, cfg["params"] or {}, "params")
    _validate_params(cfg["params"])

    cfg["optimize"] = _merge(BASE_CONFIG["optimize"], cfg["optimize"] or {}, "optimize")
    free = cfg["optimize"]["free"]
    _check(isinstance(free, list) and all(f in optimize.FREE_PARAMS for f in free),
           "optimize.free", f"entries must be among {optimize.FREE_PARAMS}")
    bounds = cfg["optimize"]["bounds"]
    _check(isinstance(bounds, dict), "optimize.bounds", "expected a mapping")
    for name, pair in bounds.items():
        _check(name in optimize.FREE_PARAMS and isinstance(pair, list) and len(pair) == 2,
               f"optimize.bounds.{name}", "expected [low, high] for a free parameter")
        lo, hi = (_number(v, f"optimize.bounds.{name}") for v in pair)
        _check(lo <= hi, f"optimize.bounds.{name}", "low must not exceed high")
    gp = cfg["optimize"]["grid_points"]
    _check(isinstance(gp, int) and gp >= 2, "optimize.grid_points", "must be an integer >= 2")

    cfg["tolerance"] = _merge(BASE_CONFIG["tolerance"], cfg["tolerance"] or {}, "tolerance")
    cfg["mc"] = _merge(BASE_CONFIG["mc"], cfg["mc"] or {}, "mc")
    for name in ("samples_x", "samples_p", "repetitions"):
        value = cfg["mc"][name]
        _check(isinstance(value, int) and value >= 0, f"mc.{name}", "must be an integer >= 0")
    _check(cfg["mc"]["repetitions"] >= 2, "mc.repetitions", "need at least 2 to estimate a variance")
    _check(cfg["mc"]["het_scaling"] in ("sqrt", "verbatim"), "mc.het_scaling", "must be sqrt or verbatim")
    cfg["allocation"] = _merge(BASE_CONFIG["allocation"], cfg["allocation"] or {}, "allocation")

    sweep = cfg["sweep"]
    if sweep is None:
        sweep = {"axis": None, "values": [None]}
    else:
        _check(isinstance(sweep, dict) and "axis" in sweep, "sweep", "needs an axis")
        axis = sweep["axis"]
        allowed = set(optimize.DEFAULT_PARAMS) | set(DERIVED_AXES)
        if cfg["scenario"] == "allocation":
            allowed = {"var_x", "var_p", "Vs", "eta", "Vx"}
        _check(axis in allowed, "sweep.axis", f"unknown axis {axis!r}")
        _check(axis not in free, "sweep.axis", "cannot sweep an optimized parameter")
        sweep = {"axis": axis, "values": _sweep_values(sweep)}
    cfg["sweep"] = sweep
    if cfg["scenario"] == "tolerance":
        tol = cfg["tolerance"]
        _check(tol["axis"] in optimize.AXES, "tolerance.axis", f"must be one of {optimize.AXES}")
        _check(tol["axis"] != sweep["axis"], "tolerance.axis", "must differ from sweep.axis")
        _check(tol["axis"] not in free, "tolerance.axis", "cannot also be optimized")
    if cfg["scenario"] == "allocation":
        a = cfg["allocation"]
        _check((a["var_x"] is not None and a["var_p"] is not None)
               or (a["Vs"] is not None and a["eta"] is not None)
               or sweep["axis"] in ("var_x", "var_p", "Vs", "eta"),
               "allocation", "give var_x and var_p, or Vs and eta")
        _check(a["side"] in ("DR", "RR"), "allocation.side", "must be DR or RR")
    return cfg


def _point_params(cfg: dict, value) -> dict:
    params = dict(cfg["params"])
    axis = cfg["sweep"]["axis"]
    if axis in DERIVED_AXES:
        params["T"] = float(10.0 ** (-abs(value) / 10.0))
        params["distance_km"] = None
    elif axis is not None:
        params[axis] = value
    _validate_params(params, prefix=f"sweep[{axis}={value}]")
    return params


def _problem(cfg: dict, params: dict) -> optimize.OptimizationProblem:
    opt = cfg["optimize"]
    return optimize.OptimizationProblem(
        objective=cfg["objective"], fixed=params, free=tuple(opt["free"]),
        bounds={k: tuple(v) for k, v in opt["bounds"].items()}, grid_points=opt["grid_points"])


def _keyrate_row(cfg: dict, value) -> dict:
    params = _point_params(cfg, value)
    best = optimize.maximize_key(_problem(cfg, params))
    res = best.result
    row = {"T": optimize.transmittance(best.params), "key_rate_bits": best.key,
           "margin_bits": best.margin, "I_AB": res.mutual_info, "holevo": res.holevo}
    if cfg["objective"] == "finite":
        row.update(T_low=res.T_low, noise_x_up=res.noise_x_up, noise_p_up=res.noise_p_up,
                   delta=res.delta, prefactor=res.prefactor)
    for name in cfg["optimize"]["free"]:
        row[f"opt_{name}"] = best.params[name]
    return row


def _tolerance_row(cfg: dict, value) -> dict:
    params = _point_params(cfg, value)
    tol = cfg["tolerance"]
    query = optimize.ToleranceQuery(axis=tol["axis"], inner=_problem(cfg, params),
                                    objective=cfg["objective"], upper=tol["upper"],
                                    tol=tol["tol"], scan_points=tol["scan_points"])
    try:
        found = optimize.solve_tolerance(query)
    except NoPositiveKey:
        return {"T": optimize.transmittance(params), f"max_{tol['axis']}": 0.0, "status": "no-key"}
    return {"T": optimize.transmittance(params), f"max_{tol['axis']}": found.value,
            "status": "cap" if found.cap_reached else "ok"}


def _mc_rows(cfg: dict, value, index: int) -> list:
    params = _point_params(cfg, value)
    mc = cfg["mc"]
    seed = int(np.random.SeedSequence([cfg["seed"], index]).generate_state(1, np.uint64)[0])
    sim = SimConfig(src=optimize.make_source(params), T=optimize.transmittance(params),
                    eps=params["eps"], scheme=optimize.make_scheme(params),
                    samples_x=int(mc["samples_x"]), samples_p=int(mc["samples_p"]),
                    repetitions=int(mc["repetitions"]), seed=seed,
                    het_scaling=mc["het_scaling"])
    rows = []
    for r in empirical_variance_report(simulate_block(sim, threads=cfg["threads"])):
        rows.append({"quantity": r.quantity, "empirical_var": r.empirical,
                     "formula_var": r.formula, "relative_error": r.relative_error,
                     "rse": r.rse, "agree": r.agree, "mean": r.mean,
                     "expected_mean": r.expected_mean, "mean_bias_flag": r.mean_bias_flag})
    return rows


def _allocation_row(cfg: dict, value) -> dict:
    a = dict(cfg["allocation"])
    Vx = cfg["params"]["Vx"]
    axis = cfg["sweep"]["axis"]
    if axis == "Vx":
        Vx = value
    elif axis is not None:
        a[axis] = value
    if a["var_x"] is not None and a["var_p"] is not None:
        state = NoisySqueezedState(var_x=a["var_x"], var_p=a["var_p"])
    else:
        state = noisy_state_from_loss(a["Vs"], a["eta"])
    eps_x, key = worst_case_allocation(state, Vx, a["side"], grid=int(a["grid"]))
    hi = state.max_eps_x
    return {"Vx": Vx, "var_x": state.var_x, "var_p": state.var_p, "purity": state.purity,
            "worst_eps_x": eps_x, "worst_key_bits": key,
            f"key_{ALL_IN_AS}": allocation_key(state, Vx, 0.0, a["side"]),
            f"key_{ALL_IN_SQUEEZED}": allocation_key(state, Vx, hi, a["side"])}


def run_scenario(cfg: dict, out_dir: Path) -> Path:
    """Evaluate every sweep point and write the CSV and JSON outputs."""
    values = cfg["sweep"]["values"]
    axis = cfg["sweep"]["axis"]
    scenario = cfg["scenario"]
    if scenario == "mc-validate":
        # parallelism lives inside the sampler; points run in order
        rows = []
        for i, v in enumerate(values):
            for row in _mc_rows(cfg, v, i):
                rows.append(({axis: v} if axis else {}) | row)
    else:
        func = {"keyrate": _keyrate_row, "fading": _keyrate_row,
                "tolerance": _tolerance_row, "allocation": _allocation_row}[scenario]
        if cfg["threads"] > 1 and len(values) > 1:
            with ThreadPoolExecutor(cfg["threads"]) as pool:
                results = list(pool.map(lambda v: func(cfg, v), values))
        else:
            results = [func(cfg, v) for v in values]
        rows = [({axis: v} if axis else {}) | r for v, r in zip(values, results)]

    for row in rows:
        for key, val in row.items():
            if isinstance(val, float) and not math.isfinite(val):
                raise ArithmeticError(f"non-finite value in column {key!r}")
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{cfg['name']}.csv"
    columns = []
    for row in rows:
        columns += [k for k in row if k not in columns]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _cell(v) for k, v in row.items()})
    with open(out_dir / f"{cfg['name']}.json", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path


def _cell(value):
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="squeezed-cvqkd",
        description="Key rates, tolerances and estimator checks for squeezed-state CV QKD.")
    parser.add_argument("--config", required=True, type=Path, help="YAML or JSON scenario file")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None, help="parallel sweep workers")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_config(args.config)
        cfg = resolve_config(raw, seed=args.seed, threads=args.threads)
        path = run_scenario(cfg, args.out)
    except (OSError, yaml.YAMLError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QKDError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
