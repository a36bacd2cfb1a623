"""Command-line interface: ``mixorder {fit,select,simulate,thresholds,penalty-table}``.

Options may also come from a TOML or JSON file given by ``--config``; its keys
are the long option names (dashes or underscores). Command-line flags win over
the file, the file wins over built-in defaults, and unknown keys are rejected.

Exit status: 0 on success, 1 when every EM restart degenerates, 2 on usage
or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .criteria import CriterionSpec, penalty, thresholds
from .densities import GaussianFamily, LaplaceFamily, ParamSpace, RegressionFamily
from .fitter import FitConfig, FitFailed, fit
from .dataio import InputError, dumps, read_csv, write_text
from .selector import criterion_path_csv, select
from .simulation import SimulationConfig, get_scenario, run_consistency

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

# built-in defaults, applied after the config file
_FIT_DEFAULTS = {
    "family": "gaussian",
    "seed": 0,
    "restarts": 10,
    "max_iters": 500,
    "rel_tol": 1e-8,
    "weight_floor": 1e-8,
    "init": "auto",
    "b": 1e6,
    "c": 1e6,
    "response": None,
    "no_intercept": False,
    "columns": None,
    "out": None,
}
DEFAULTS = {
    "fit": {**_FIT_DEFAULTS, "k": None, "trace": False},
    "select": {**_FIT_DEFAULTS, "kmax": None, "criterion": "bic", "nu": None, "eps": None,
               "dim_convention": "paper", "conditional": False, "path_csv": None},
    "simulate": {"scenario": None, "sim_config": None, "replicates": None, "seed": None, "out": None,
                 "threads": None, "verbose": False, "details": None},
    "thresholds": {"nu": None, "eps": None, "seed": 0, "out": None},
    "penalty-table": {"k": "1..5", "m": "2", "n": "100,1000,10000", "criterion": "bic", "nu": None,
                      "eps": None, "dim_convention": "paper", "seed": 0, "out": None},
}


class UsageError(Exception):
    pass


def _add_fit_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("data", nargs="?", help="CSV file with a header row")
    p.add_argument("--data", dest="data_opt", help="CSV file (alternative to the positional argument)")
    p.add_argument("--family", choices=["gaussian", "laplace", "regression"])
    p.add_argument("--columns", help="comma-separated columns to use (default: all)")
    p.add_argument("--response", help="response column for the regression family")
    p.add_argument("--no-intercept", action="store_true", default=None, dest="no_intercept",
                   help="do not add an intercept column to regression covariates")
    p.add_argument("--seed", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--rel-tol", type=float, dest="rel_tol")
    p.add_argument("--weight-floor", type=float, dest="weight_floor")
    p.add_argument("--init", choices=["auto", "greedy-seed", "random-responsibility"])
    p.add_argument("--b", type=float, help="bound on location/coefficient norms")
    p.add_argument("--c", type=float, help="scale parameters are kept in [1/c, c]")
    p.add_argument("--out", help="write output here instead of stdout")


def _add_criterion_options(p: argparse.ArgumentParser, multi: bool = False) -> None:
    if multi:
        p.add_argument("--criterion", help="comma-separated: aic, bic, nu-bic[:NU], eps-bic[:EPS]")
    else:
        p.add_argument("--criterion", choices=["aic", "bic", "nu-bic", "eps-bic"])
    p.add_argument("--nu", type=int, help="composition depth for nu-bic")
    p.add_argument("--eps", type=float, help="exponent for eps-bic")
    p.add_argument("--dim-convention", choices=["paper", "free"], dest="dim_convention")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixorder", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a k-component mixture")
    _add_fit_options(p)
    p.add_argument("--k", type=int)
    p.add_argument("--trace", action="store_true", default=None, help="include the per-iteration risk trace")
    p.add_argument("--config", help="TOML/JSON file with option values")

    p = sub.add_parser("select", help="choose the number of components")
    _add_fit_options(p)
    _add_criterion_options(p)
    p.add_argument("--kmax", type=int)
    p.add_argument("--conditional", action="store_true", default=None,
                   help="mixture of regressions; selects by conditional likelihood")
    p.add_argument("--path-csv", dest="path_csv", help="also write the (k, risk, penalty, value) table here")
    p.add_argument("--config", help="TOML/JSON file with option values")

    p = sub.add_parser("simulate", help="Monte Carlo consistency experiment")
    p.add_argument("--scenario", help="canned scenario name")
    p.add_argument("--config", dest="sim_config", help="simulation config file (TOML/JSON)")
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="accuracy table CSV (default: stdout gets only the JSON summary)")
    p.add_argument("--threads", type=int)
    p.add_argument("--verbose", action="store_true", default=None, help="per-replicate JSON lines")
    p.add_argument("--details", help="JSON-lines file for per-replicate records (implies --verbose)")

    p = sub.add_parser("thresholds", help="sample sizes below which nu-/eps-BIC match BIC")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--nu", type=int)
    g.add_argument("--eps", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("penalty-table", help="penalty values over a (criterion, k, m, n) grid")
    p.add_argument("--k", help="list such as 1..5 or 1,2,4")
    p.add_argument("--m", help="parameters per component, list")
    p.add_argument("--n", help="sample sizes, list")
    _add_criterion_options(p, multi=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--config")
    return parser


def _load_config_file(path) -> dict:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        if path.suffix.lower() == ".json":
            return json.loads(raw)
        return tomllib.loads(raw.decode("utf-8"))
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise InputError(f"cannot parse config {path}: {exc}") from None


def resolve_options(command: str, ns: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags for ``command``."""
    defaults = DEFAULTS[command]
    opts = dict(defaults)
    cfg_path = getattr(ns, "config", None) if command != "simulate" else None
    if cfg_path:
        for key, value in _load_config_file(cfg_path).items():
            k = key.replace("-", "_")
            if k == "data" and command in ("fit", "select"):
                opts["data"] = value
                continue
            if k not in defaults:
                raise UsageError(f"unknown config key {key!r} for {command}")
            opts[k] = value
    for k, v in vars(ns).items():
        if k in ("command", "config", "log_level", "data_opt") or v is None:
            continue
        opts[k] = v
    if command in ("fit", "select"):
        if ns.data_opt is not None:
            opts["data"] = ns.data_opt
        if not opts.get("data"):
            raise UsageError("no input CSV given")
    return opts


def _parse_list(text, cast):
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [cast(t) for t in text.split(",") if t.strip()]


def _criterion_from(opts, name=None) -> CriterionSpec:
    name = name or opts["criterion"]
    conv = opts.get("dim_convention", "paper")
    if ":" in name:
        spec = CriterionSpec.parse(name)
        return replace(spec, dim_convention=conv)
    if name == "nu-bic":
        if opts.get("nu") is None:
            raise UsageError("--criterion nu-bic requires --nu")
        return CriterionSpec.nu_bic(int(opts["nu"]), dim_convention=conv)
    if name == "eps-bic":
        if opts.get("eps") is None:
            raise UsageError("--criterion eps-bic requires --eps")
        return CriterionSpec.eps_bic(float(opts["eps"]), dim_convention=conv)
    if name not in ("aic", "bic"):
        raise UsageError(f"unknown criterion {name!r}")
    return CriterionSpec(name, dim_convention=conv)


def _fit_config(opts) -> FitConfig:
    return FitConfig(max_iters=int(opts["max_iters"]), rel_tol=float(opts["rel_tol"]),
                     restarts=int(opts["restarts"]), weight_floor=float(opts["weight_floor"]),
                     init_strategy=opts["init"], base_seed=int(opts["seed"]))


def load_observations(opts):
    """Returns ``(family, data, columns)`` with regression data stacked as ``[u..., y]``."""
    header, table = read_csv(opts["data"])
    family_name = "regression" if opts.get("conditional") else opts["family"]
    if opts.get("conditional") and opts["family"] not in ("gaussian", "regression"):
        # gaussian is the default family and is overridden silently by --conditional
        raise UsageError("--conditional applies to the regression family only")
    cols = header
    if opts.get("columns"):
        cols = [c.strip() for c in str(opts["columns"]).split(",")]
        missing = [c for c in cols if c not in header]
        if missing:
            raise InputError(f"columns not in header: {missing}")
        table = table[:, [header.index(c) for c in cols]]
    if family_name == "regression":
        resp = opts.get("response")
        if not resp:
            raise UsageError("the regression family needs --response")
        if resp not in cols:
            raise InputError(f"response column {resp!r} not in header")
        j = cols.index(resp)
        y = table[:, j]
        u = np.delete(table, j, axis=1)
        names = [c for c in cols if c != resp]
        if not opts.get("no_intercept"):
            u = np.column_stack([np.ones(len(y)), u])
            names = ["(intercept)"] + names
        if u.shape[1] == 0:
            raise UsageError("no covariates left after removing the response")
        fam = RegressionFamily(u.shape[1])
        return fam, fam.stack(u, y), names + [resp]
    if family_name == "laplace":
        if table.shape[1] != 1:
            raise UsageError(f"the laplace family needs exactly one column, got {table.shape[1]} (use --columns)")
        return LaplaceFamily(), table[:, 0], cols
    return GaussianFamily(table.shape[1]), table, cols


def cmd_fit(opts, stdout) -> int:
    if opts.get("k") is None:
        raise UsageError("fit needs --k")
    fam, data, cols = load_observations(opts)
    space = ParamSpace(float(opts["b"]), float(opts["c"]))
    cfg = _fit_config(opts)
    res = fit(data, fam, int(opts["k"]), space, cfg)
    out = {
        "schema_version": 1,
        "kind": "fit",
        "family": fam.describe(),
        "columns": cols,
        "n": int(data.shape[0]),
        "seed": cfg.base_seed,
        "config": {"fit": cfg.to_dict(), "space": space.to_dict()},
        "result": res.to_dict(include_trace=bool(opts.get("trace"))),
    }
    write_text(dumps(out), opts.get("out"), stdout)
    return EXIT_OK


def cmd_select(opts, stdout) -> int:
    if opts.get("kmax") is None:
        raise UsageError("select needs --kmax")
    spec = _criterion_from(opts)
    fam, data, cols = load_observations(opts)
    space = ParamSpace(float(opts["b"]), float(opts["c"]))
    report = select(data, fam, int(opts["kmax"]), spec, _fit_config(opts), space)
    d = report.to_dict()
    d["columns"] = cols
    write_text(dumps(d), opts.get("out"), stdout)
    if opts.get("path_csv"):
        write_text(criterion_path_csv(report), opts["path_csv"])
    return EXIT_OK


def cmd_simulate(opts, stdout, stderr) -> int:
    if bool(opts.get("scenario")) == bool(opts.get("sim_config")):
        raise UsageError("simulate needs exactly one of --scenario or --config")
    if opts.get("scenario"):
        try:
            cfg = get_scenario(opts["scenario"])
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    else:
        try:
            cfg = SimulationConfig.from_dict(_load_config_file(opts["sim_config"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"invalid simulation config: {exc}") from None
    if opts.get("replicates") is not None:
        cfg = replace(cfg, replicates=int(opts["replicates"]))
    if opts.get("seed") is not None:
        cfg = replace(cfg, base_seed=int(opts["seed"]))
    threads = int(opts.get("threads") or os.cpu_count() or 1)
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    sink = None
    if opts.get("details"):
        sink = open(opts["details"], "w", encoding="utf-8")
    elif opts.get("verbose"):
        sink = stderr
    try:
        table = run_consistency(cfg, n_jobs=threads,
                                on_replicate=(lambda d: sink.write(json.dumps(d, sort_keys=True) + "\n")) if sink else None)
    finally:
        if sink is not None and sink is not stderr:
            sink.close()
    if opts.get("out"):
        write_text(table.to_csv(), opts["out"])
    summary = table.to_dict()
    summary["config"] = cfg.to_dict()
    write_text(dumps(summary), None, stdout)
    return EXIT_OK


def cmd_thresholds(opts, stdout) -> int:
    if (opts.get("nu") is None) == (opts.get("eps") is None):
        raise UsageError("thresholds needs exactly one of --nu or --eps")
    out = thresholds(nu=opts.get("nu"), eps=opts.get("eps"))
    out["schema_version"] = 1
    out["seed"] = int(opts.get("seed") or 0)
    write_text(dumps(out), opts.get("out"), stdout)
    return EXIT_OK


def cmd_penalty_table(opts, stdout) -> int:
    ks = _parse_list(opts["k"], int)
    ms = _parse_list(opts["m"], int)
    ns = _parse_list(opts["n"], int)
    if not ks or not ms or not ns or min(ks) < 1 or min(ns) < 1 or min(ms) < 1:
        raise UsageError("k, m and n lists must be nonempty and positive")
    specs = [_criterion_from(opts, c.strip()) for c in str(opts["criterion"]).split(",") if c.strip()]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["criterion", "k", "m", "n", "penalty"])
    for spec in specs:
        for m in ms:
            for n in ns:
                for k in ks:
                    w.writerow([spec.label, k, m, n, repr(penalty(spec, k, m, n))])
    write_text(buf.getvalue(), opts.get("out"), stdout)
    return EXIT_OK


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(ns.log_level).upper(), logging.WARNING), stream=stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        opts = resolve_options(ns.command, ns)
        if ns.command == "fit":
            return cmd_fit(opts, stdout)
        if ns.command == "select":
            return cmd_select(opts, stdout)
        if ns.command == "simulate":
            return cmd_simulate(opts, stdout, stderr)
        if ns.command == "thresholds":
            return cmd_thresholds(opts, stdout)
        return cmd_penalty_table(opts, stdout)
    except (UsageError, InputError) as exc:
        print(f"mixorder {ns.command}: error: {exc}", file=stderr)
        return EXIT_USAGE
    except FitFailed as exc:
        print(f"mixorder {ns.command}: numerical failure: {exc}", file=stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"mixorder {ns.command}: error: {exc}", file=stderr)
        return EXIT_USAGE


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
