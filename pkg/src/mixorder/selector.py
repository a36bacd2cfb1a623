"""Penalized-likelihood choice of the number of mixture components."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .criteria import CriterionSpec, penalty
from .densities import DEFAULT_SPACE, Family, ParamSpace, RegressionFamily
from .fitter import FitConfig, FitFailed, FitResult, duplicate_heaviest, fit

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TIE_TOL = 1e-12


@dataclass
class OrderFit:
    k: int
    fit: FitResult | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.fit is not None


@dataclass
class OrderRow:
    k: int
    risk: float
    penalty: float
    value: float


@dataclass
class SelectionReport:
    family: Family
    kmax: int
    criterion: CriterionSpec
    mode: str
    n: int
    fits: list[OrderFit]
    rows: list[OrderRow]
    selected: int
    seed: int
    config: dict
    wall_time: float = 0.0
    warnings: list[str] = field(default_factory=list)

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.config, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_dict(self) -> dict:
        per_k = []
        rows = {r.k: r for r in self.rows}
        for f in self.fits:
            entry = {"k": f.k, "ok": f.ok}
            if f.ok:
                r = rows[f.k]
                entry.update(risk=r.risk, penalty=r.penalty, value=r.value, fit=f.fit.to_dict())
            else:
                entry["error"] = f.error
            per_k.append(entry)
        return {
            "schema_version": SCHEMA_VERSION,
            "family": self.family.describe(),
            "mode": self.mode,
            "kmax": self.kmax,
            "n": self.n,
            "criterion": self.criterion.to_dict(),
            "selected": self.selected,
            "per_k": per_k,
            "seed": self.seed,
            "config": self.config,
            "config_hash": self.config_hash,
            "warnings": list(self.warnings),
            "wall_time": self.wall_time,
        }


def fit_path(data, family: Family, kmax: int, fit_cfg: FitConfig | None = None,
             space: ParamSpace = DEFAULT_SPACE) -> list[OrderFit]:
    """Fit every order 1..kmax; order k+1 also starts from the order-k solution."""
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    fit_cfg = fit_cfg or FitConfig()
    data = family.as_data(data)
    out = []
    prev = None
    for k in range(1, kmax + 1):
        warm = duplicate_heaviest(prev.params) if prev is not None else None
        try:
            res = fit(data, family, k, space, fit_cfg, warm_start=warm)
        except (FitFailed, ValueError) as exc:
            log.warning("fit at k=%d failed: %s", k, exc)
            out.append(OrderFit(k, None, str(exc)))
            prev = None
            continue
        out.append(OrderFit(k, res))
        prev = res
    return out


def choose(path: list[OrderFit], spec: CriterionSpec, m: int, n: int, tie_tol: float = TIE_TOL):
    """Smallest k whose criterion value is within ``tie_tol`` of the minimum."""
    rows = []
    for f in path:
        if f.ok:
            pen = penalty(spec, f.k, m, n)
            rows.append(OrderRow(f.k, f.fit.risk, pen, f.fit.risk + pen))
    if not rows:
        raise FitFailed("no order could be fitted")
    return select_from_values(rows, tie_tol), rows


def select_from_values(rows: list[OrderRow], tie_tol: float = TIE_TOL) -> int:
    best = min(r.value for r in rows)
    return min(r.k for r in rows if r.value <= best + tie_tol)


def _report(path, family, kmax, spec, fit_cfg, space, mode, n, started) -> SelectionReport:
    selected, rows = choose(path, spec, family.param_dim, n)
    config = {
        "family": family.describe(),
        "kmax": kmax,
        "criterion": spec.to_dict(),
        "fit": fit_cfg.to_dict(),
        "space": space.to_dict(),
        "mode": mode,
    }
    warnings = [f"k={f.k} excluded: {f.error}" for f in path if not f.ok]
    return SelectionReport(family, kmax, spec, mode, n, path, rows, selected, fit_cfg.base_seed, config,
                           time.perf_counter() - started, warnings)


def select(data, family: Family, kmax: int, spec: CriterionSpec, fit_cfg: FitConfig | None = None,
           space: ParamSpace = DEFAULT_SPACE, path: list[OrderFit] | None = None) -> SelectionReport:
    """Estimate the number of components.

    ``path`` may carry fits from :func:`fit_path` on the same data and
    configuration, so several criteria can share one set of fits.
    """
    started = time.perf_counter()
    fit_cfg = fit_cfg or FitConfig()
    data = family.as_data(data)
    if path is None:
        path = fit_path(data, family, kmax, fit_cfg, space)
    mode = "conditional" if isinstance(family, RegressionFamily) else "joint"
    return _report(path, family, kmax, spec, fit_cfg, space, mode, data.shape[0], started)


def select_conditional(u, y, kmax: int, spec: CriterionSpec, fit_cfg: FitConfig | None = None,
                       space: ParamSpace = DEFAULT_SPACE, add_intercept: bool = False,
                       path: list[OrderFit] | None = None) -> SelectionReport:
    """Order selection for mixtures of linear regressions by conditional likelihood.

    Only ``log rho(y | u)`` enters the risk; the covariate density is never
    modelled.
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if add_intercept:
        u = np.column_stack([np.ones(u.shape[0]), u])
    family = RegressionFamily(u.shape[1])
    return select(family.stack(u, y), family, kmax, spec, fit_cfg, space, path)


def criterion_path(report: SelectionReport) -> list[dict]:
    return [{"k": r.k, "risk": r.risk, "penalty": r.penalty, "value": r.value} for r in report.rows]


def criterion_path_csv(report: SelectionReport) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["k", "risk", "penalty", "value"], lineterminator="\n")
    w.writeheader()
    for row in criterion_path(report):
        w.writerow({key: repr(v) if isinstance(v, float) else v for key, v in row.items()})
    return buf.getvalue()
