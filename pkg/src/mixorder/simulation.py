"""Monte Carlo consistency experiments and a Hellinger diagnostic.

Replicate ``r`` at sample size ``n`` draws its data from
``split(base_seed, n, r)`` and seeds its fits from ``split(base_seed, n, r, 1)``,
so every criterion is evaluated on the same sample and the same fits (a paired
design), and results do not depend on execution order or worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .criteria import CriterionSpec
from .densities import (
    DEFAULT_SPACE,
    GaussianFamily,
    GaussianParams,
    LaplaceFamily,
    LaplaceParams,
    ParamSpace,
    RegressionFamily,
    RegressionParams,
)
from .fitter import FitConfig, FitFailed
from .mixture import MixtureParams, log_mixture_density_matrix, sample_mixture
from .seeding import make_rng, split
from .selector import choose, fit_path


@dataclass(frozen=True)
class CovariateSpec:
    """Covariates drawn iid Uniform(low, high) per non-intercept column."""

    low: float = -1.0
    high: float = 1.0
    intercept: bool = True

    def draw(self, rng: np.random.Generator, n: int, p: int) -> np.ndarray:
        free = p - 1 if self.intercept else p
        cols = rng.uniform(self.low, self.high, size=(n, free))
        if self.intercept:
            cols = np.column_stack([np.ones(n), cols])
        return cols

    def to_dict(self) -> dict:
        return {"kind": "uniform", "low": self.low, "high": self.high, "intercept": self.intercept}


@dataclass(frozen=True)
class SimulationConfig:
    truth: MixtureParams
    n_grid: tuple
    criteria: tuple
    replicates: int
    kmax: int
    fit_cfg: FitConfig = FitConfig()
    base_seed: int = 0
    space: ParamSpace = DEFAULT_SPACE
    covariates: CovariateSpec | None = None
    name: str = "custom"
    hellinger: bool = True

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(self, "criteria", tuple(self.criteria))
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.n_grid or any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be nonempty and strictly increasing")
        if self.truth.k > self.kmax:
            raise ValueError(f"true order {self.truth.k} exceeds kmax={self.kmax}")
        if not self.criteria:
            raise ValueError("at least one criterion is required")
        if isinstance(self.truth.family, RegressionFamily) and self.covariates is None:
            raise ValueError("regression truth needs a covariate spec")

    @property
    def k0(self) -> int:
        return self.truth.k

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "truth": self.truth.to_dict(),
            "n_grid": list(self.n_grid),
            "criteria": [c.label for c in self.criteria],
            "replicates": self.replicates,
            "kmax": self.kmax,
            "fit": self.fit_cfg.to_dict(),
            "base_seed": self.base_seed,
            "space": self.space.to_dict(),
            "covariates": self.covariates.to_dict() if self.covariates else None,
            "hellinger": self.hellinger,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        known = {"name", "truth", "n_grid", "criteria", "replicates", "kmax", "fit", "base_seed", "space",
                 "covariates", "hellinger"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown simulation config keys: {sorted(unknown)}")
        cov = d.get("covariates")
        if cov:
            cov = dict(cov)
            if cov.pop("kind", "uniform") != "uniform":
                raise ValueError("only uniform covariates are supported")
            cov = CovariateSpec(**cov)
        return cls(
            truth=MixtureParams.from_dict(d["truth"]),
            n_grid=d["n_grid"],
            criteria=[CriterionSpec.parse(c) for c in d["criteria"]],
            replicates=int(d["replicates"]),
            kmax=int(d["kmax"]),
            fit_cfg=FitConfig(**d.get("fit", {})),
            base_seed=int(d.get("base_seed", 0)),
            space=ParamSpace(**d.get("space", {})),
            covariates=cov,
            name=d.get("name", "custom"),
            hellinger=bool(d.get("hellinger", True)),
        )


@dataclass
class AccuracyRow:
    criterion: str
    n: int
    replicates: int
    correct: int
    accuracy: float | None
    mean_k: float | None
    under: int
    over: int
    failed: int = 0
    median_hellinger: float | None = None


@dataclass
class AccuracyTable:
    scenario: str
    k0: int
    rows: list[AccuracyRow]
    details: list[dict] = field(default_factory=list)
    seed: int = 0

    def row(self, criterion: str, n: int) -> AccuracyRow:
        for r in self.rows:
            if r.criterion == criterion and r.n == n:
                return r
        raise KeyError((criterion, n))

    def to_csv(self) -> str:
        cols = ["criterion", "n", "replicates", "correct", "accuracy", "mean_k", "under", "over", "failed",
                "median_hellinger"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.rows:
            vals = [getattr(r, c) for c in cols]
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in vals])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "scenario": self.scenario,
            "k0": self.k0,
            "seed": self.seed,
            "rows": [vars(r).copy() for r in self.rows],
        }


# ---------------------------------------------------------------------------
# Hellinger divergence
# ---------------------------------------------------------------------------


def _check_1d(psi: MixtureParams):
    fam = psi.family
    if not (isinstance(fam, LaplaceFamily) or (isinstance(fam, GaussianFamily) and fam.dim == 1)):
        raise ValueError("Hellinger quadrature needs univariate mixtures")


def hellinger_1d(f: MixtureParams, g: MixtureParams, tol: float = 1e-10, width: float = 12.0,
                 max_levels: int = 50) -> float:
    """Hellinger divergence ``sqrt(0.5 * int (sqrt f - sqrt g)^2)`` of univariate mixtures.

    Adaptive trapezoid rule on ``[min loc - width * s, max loc + width * s]``
    (``s`` the largest component scale, ``width`` raised to 40 for Laplace
    components so their exponential tails are negligible); each panel is bisected until its two
    trapezoid estimates agree to ``tol`` times its share of the interval, and
    accepted panels are Richardson-corrected. Component locations are
    breakpoints so the Laplace kinks fall on panel edges.
    """
    _check_1d(f)
    _check_1d(g)
    locs, scales = [], []
    for psi in (f, g):
        for t in psi.components:
            loc, sc = psi.family.location_scale(t)
            locs.append(loc)
            scales.append(sc)
    s = max(scales)
    if isinstance(f.family, LaplaceFamily) or isinstance(g.family, LaplaceFamily):
        # exponential tails: 12 scales leaves about 1e-6 of mass outside
        width = max(width, 40.0)
    lo, hi = min(locs) - width * s, max(locs) + width * s
    total_len = hi - lo

    def integrand(x):
        lf = log_mixture_density_matrix(f, f.family.as_data(x))
        lg = log_mixture_density_matrix(g, g.family.as_data(x))
        return (np.exp(0.5 * lf) - np.exp(0.5 * lg)) ** 2

    edges = np.unique(np.concatenate([np.linspace(lo, hi, 129), np.clip(locs, lo, hi)]))
    a, b = edges[:-1], edges[1:]
    fa, fb = integrand(a), integrand(b)
    acc = 0.0
    for _ in range(max_levels):
        m = 0.5 * (a + b)
        fm = integrand(m)
        h = b - a
        t1 = 0.5 * h * (fa + fb)
        t2 = 0.25 * h * (fa + 2.0 * fm + fb)
        err = np.abs(t2 - t1)
        done = err <= tol * h / total_len
        acc += float(np.sum(t2[done] + (t2[done] - t1[done]) / 3.0))
        keep = ~done
        if not keep.any():
            break
        a, m, b, fa, fm, fb = a[keep], m[keep], b[keep], fa[keep], fm[keep], fb[keep]
        a, b = np.concatenate([a, m]), np.concatenate([m, b])
        fa, fb = np.concatenate([fa, fm]), np.concatenate([fm, fb])
    else:
        acc += float(np.sum(0.25 * (b - a) * (fa + 2.0 * integrand(0.5 * (a + b)) + fb)))
    return math.sqrt(min(max(0.5 * acc, 0.0), 1.0))


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

ACCEPTANCE_FIT = FitConfig(max_iters=200, rel_tol=1e-8, restarts=3)
_DEFAULT_CRITERIA = ("bic", "nu-bic:3", "eps-bic:0.02", "aic")


def _gauss(mu, var=1.0):
    return GaussianParams.from_cov([mu], [[var]])


def scenario_library() -> dict[str, SimulationConfig]:
    crit = [CriterionSpec.parse(c) for c in _DEFAULT_CRITERIA]
    g1 = GaussianFamily(1)
    lap = LaplaceFamily()
    reg = RegressionFamily(2)
    return {
        "gaussian-2comp": SimulationConfig(
            truth=MixtureParams([0.5, 0.5], [_gauss(0.0), _gauss(6.0)], g1),
            n_grid=(200, 500, 2000), criteria=crit, replicates=200, kmax=5,
            fit_cfg=ACCEPTANCE_FIT, base_seed=20240101, name="gaussian-2comp"),
        "laplace-2comp": SimulationConfig(
            truth=MixtureParams([0.5, 0.5], [LaplaceParams(0.0, 1.0), LaplaceParams(6.0, 1.0)], lap),
            n_grid=(200, 500, 2000), criteria=crit, replicates=200, kmax=5,
            fit_cfg=ACCEPTANCE_FIT, base_seed=20240102, name="laplace-2comp"),
        "regression-2line": SimulationConfig(
            truth=MixtureParams([0.5, 0.5], [RegressionParams([0.0, 2.0], 0.5), RegressionParams([0.0, -2.0], 0.5)], reg),
            n_grid=(1000,), criteria=crit, replicates=200, kmax=4,
            fit_cfg=ACCEPTANCE_FIT, base_seed=20240103, covariates=CovariateSpec(-1.0, 1.0, True),
            name="regression-2line", hellinger=False),
        "gaussian-1comp-null": SimulationConfig(
            truth=MixtureParams([1.0], [_gauss(0.0)], g1),
            n_grid=(5000,), criteria=crit, replicates=200, kmax=3,
            fit_cfg=ACCEPTANCE_FIT, base_seed=20240104, name="gaussian-1comp-null", hellinger=False),
    }


def get_scenario(name: str) -> SimulationConfig:
    lib = scenario_library()
    if name not in lib:
        raise KeyError(f"unknown scenario {name!r}; available: {', '.join(sorted(lib))}")
    return lib[name]


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def replicate_data(cfg: SimulationConfig, n: int, r: int) -> np.ndarray:
    rng = make_rng(split(cfg.base_seed, n, r))
    cov = None
    fam = cfg.truth.family
    if isinstance(fam, RegressionFamily):
        cov = cfg.covariates.draw(rng, n, fam.p)
    data, _ = sample_mixture(cfg.truth, n, rng, cov)
    return data


def data_hash(data: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(data).tobytes()).hexdigest()[:16]


def run_replicate(cfg: SimulationConfig, n: int, r: int) -> dict:
    data = replicate_data(cfg, n, r)
    fam = cfg.truth.family
    fit_cfg = replace(cfg.fit_cfg, base_seed=split(cfg.base_seed, n, r, 1))
    out = {"n": n, "replicate": r, "data_hash": data_hash(data), "selected": {}, "hellinger": {}}
    path = fit_path(data, fam, cfg.kmax, fit_cfg, cfg.space)
    out["excluded_k"] = [f.k for f in path if not f.ok]
    out["projection_flags"] = sum(f.fit.projection_flags for f in path if f.ok)
    out["monotonicity_violations"] = sum(f.fit.monotonicity_violations for f in path if f.ok)
    try:
        for spec in cfg.criteria:
            k_hat, _ = choose(path, spec, fam.param_dim, n)
            out["selected"][spec.label] = k_hat
    except FitFailed as exc:
        out["failed"] = str(exc)
        out["selected"] = {}
        return out
    if cfg.hellinger and fam.is_1d:
        cache = {}
        by_k = {f.k: f for f in path}
        for label, k_hat in out["selected"].items():
            if k_hat not in cache:
                cache[k_hat] = hellinger_1d(by_k[k_hat].fit.params, cfg.truth)
            out["hellinger"][label] = cache[k_hat]
    return out


def _task(args):
    cfg, n, r = args
    return run_replicate(cfg, n, r)


def aggregate(cfg: SimulationConfig, details: list[dict]) -> AccuracyTable:
    rows = []
    k0 = cfg.k0
    for spec in cfg.criteria:
        for n in cfg.n_grid:
            reps = [d for d in details if d["n"] == n]
            ok = [d for d in reps if "failed" not in d]
            ks = [d["selected"][spec.label] for d in ok]
            hs = [d["hellinger"][spec.label] for d in ok if spec.label in d["hellinger"]]
            correct = sum(1 for k in ks if k == k0)
            rows.append(AccuracyRow(
                criterion=spec.label, n=n, replicates=len(ks), correct=correct,
                accuracy=correct / len(ks) if ks else None,
                mean_k=sum(ks) / len(ks) if ks else None,
                under=sum(1 for k in ks if k < k0), over=sum(1 for k in ks if k > k0),
                failed=len(reps) - len(ok),
                median_hellinger=statistics.median(hs) if hs else None,
            ))
    return AccuracyTable(cfg.name, k0, rows, details, cfg.base_seed)


def run_consistency(cfg: SimulationConfig, n_jobs: int = 1, on_replicate=None) -> AccuracyTable:
    """Replicated order selection over ``cfg.n_grid``; one accuracy row per (criterion, n)."""
    tasks = [(cfg, n, r) for n in cfg.n_grid for r in range(cfg.replicates)]
    details = []
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            for d in ex.map(_task, tasks, chunksize=max(1, len(tasks) // (8 * n_jobs))):
                details.append(d)
                if on_replicate:
                    on_replicate(d)
    else:
        for t in tasks:
            d = _task(t)
            details.append(d)
            if on_replicate:
                on_replicate(d)
    return aggregate(cfg, details)
