"""Constrained maximum likelihood for a fixed number of components, by EM.

Every M-step is followed by projection onto the compact parameter space and
by flooring/renormalizing the weights. EM's monotonicity argument does not
cover those two operations, so iterations where either one is active are
flagged and excluded from the monotonicity bookkeeping. Components whose
weights collapse onto too few points are re-seeded at the worst-fitted
observation; those iterations are flagged too.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .densities import DEFAULT_SPACE, DegenerateComponent, Family, GaussianFamily, ParamSpace, RegressionFamily
from .mixture import MixtureParams, empirical_risk, responsibilities_matrix
from .seeding import make_rng, split

log = logging.getLogger(__name__)

INIT_STRATEGIES = ("auto", "greedy-seed", "random-responsibility")
MONOTONE_TOL = 1e-9
_MAX_RESEEDS = 5
_MAX_SEED_ATTEMPTS = 20


class FitFailed(RuntimeError):
    """Every restart ended degenerate or non-finite."""

    def __init__(self, message, restart_log=None):
        super().__init__(message)
        self.restart_log = restart_log or []


class _RunFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 500
    rel_tol: float = 1e-8
    restarts: int = 10
    weight_floor: float = 1e-8
    init_strategy: str = "auto"
    base_seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not 0 <= self.weight_floor < 1:
            raise ValueError("weight_floor must lie in [0, 1)")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValueError(f"init_strategy must be one of {INIT_STRATEGIES}")

    def to_dict(self) -> dict:
        return {
            "max_iters": self.max_iters,
            "rel_tol": self.rel_tol,
            "restarts": self.restarts,
            "weight_floor": self.weight_floor,
            "init_strategy": self.init_strategy,
            "base_seed": self.base_seed,
        }


@dataclass
class FitResult:
    params: MixtureParams
    risk: float
    iterations: int
    converged: bool
    restart_risks: list[float]
    risk_trace: list[float] = field(default_factory=list)
    projection_flags: int = 0
    reseeds: int = 0
    monotonicity_violations: int = 0
    restart_log: list[dict] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.params.k

    def to_dict(self, include_trace: bool = False) -> dict:
        d = {
            "k": self.k,
            "params": self.params.to_dict(),
            "risk": self.risk,
            "iterations": self.iterations,
            "converged": self.converged,
            "restart_risks": list(self.restart_risks),
            "projection_flags": self.projection_flags,
            "reseeds": self.reseeds,
            "monotonicity_violations": self.monotonicity_violations,
        }
        if include_trace:
            d["risk_trace"] = list(self.risk_trace)
        return d


@dataclass
class StepInfo:
    params: MixtureParams
    risk: float
    projected: bool
    reseeded: int
    resp: np.ndarray
    logdens: np.ndarray


def _pooled(family: Family, data: np.ndarray, space: ParamSpace):
    return family.weighted_mstep(data, np.ones(data.shape[0]), space)


def _floor_weights(w: np.ndarray, floor: float) -> tuple[np.ndarray, bool]:
    active = bool(np.any(w < floor))
    if active:
        w = np.maximum(w, floor)
    return w / w.sum(), active


def _mstep(family, data, resp, space, floor, logdens, pooled):
    """M-step from responsibilities. Returns (params, projected, reseeded)."""
    n = data.shape[0]
    comps, projected = family.mstep_all(data, resp, space)
    degenerate = [z for z, t in enumerate(comps) if t is None]
    w = resp.sum(axis=1) / n
    if degenerate:
        # worst-fitted points first; each degenerate component gets its own point
        worst = np.argsort(logdens, kind="stable")
        for j, z in enumerate(degenerate):
            comps[z] = family.recentre(pooled, data[worst[j % n]], space)
            w[z] = max(1.0 / n, floor)
    w, floor_active = _floor_weights(w, floor)
    return MixtureParams.trusted(w, comps, family, space), projected or floor_active, len(degenerate)


def em_step_info(psi: MixtureParams, data: np.ndarray, cfg: FitConfig, resp=None, logdens=None, pooled=None) -> StepInfo:
    family, space = psi.family, psi.space
    if resp is None:
        resp, logdens = responsibilities_matrix(psi, data, exact_order=False)
    if pooled is None:
        pooled = _pooled(family, data, space)
    new, projected, reseeded = _mstep(family, data, resp, space, cfg.weight_floor, logdens, pooled)
    new_resp, new_logdens = responsibilities_matrix(new, data, exact_order=False)
    return StepInfo(new, _fast_risk(new_logdens), projected, reseeded, new_resp, new_logdens)


def _fast_risk(logdens: np.ndarray) -> float:
    return -float(np.sum(logdens)) / logdens.shape[0]


def em_step(psi: MixtureParams, data, space: ParamSpace | None = None, cfg: FitConfig | None = None):
    """One EM iteration; returns ``(new_params, new_risk)``."""
    cfg = cfg or FitConfig()
    if space is not None and space != psi.space:
        psi = MixtureParams(psi.weights, [psi.family.project(t, space) for t in psi.components], psi.family, space)
    data = psi.family.as_data(data)
    info = em_step_info(psi, data, cfg)
    return info.params, empirical_risk(info.params, data)


def _points(data: np.ndarray) -> np.ndarray:
    return data[:, None] if data.ndim == 1 else data


def _greedy_seeds(pts: np.ndarray, k: int, rng: np.random.Generator) -> list[int]:
    n = pts.shape[0]
    for _ in range(_MAX_SEED_ATTEMPTS):
        seeds = [int(rng.integers(n))]
        mind = np.sum((pts - pts[seeds[0]]) ** 2, axis=1)
        ok = True
        for _j in range(1, k):
            nxt = int(np.argmax(mind))
            if mind[nxt] <= 0:
                ok = False
                break
            seeds.append(nxt)
            mind = np.minimum(mind, np.sum((pts - pts[nxt]) ** 2, axis=1))
        if ok:
            return seeds
    raise DegenerateComponent(f"could not find {k} distinct seed points")


def init(data, family: Family, k: int, strategy: str, rng: np.random.Generator,
         space: ParamSpace = DEFAULT_SPACE, weight_floor: float = 1e-8) -> MixtureParams:
    """Starting mixture for EM.

    ``greedy-seed`` picks k seeds by farthest-point traversal from a random
    start, hard-assigns points to the nearest seed and runs one M-step;
    ``random-responsibility`` runs one M-step from uniform random
    responsibilities.
    """
    data = family.as_data(data)
    n = data.shape[0]
    pooled = _pooled(family, data, space)
    strategy = resolve_strategy(strategy, family)
    if strategy == "greedy-seed":
        pts = _points(data)
        seeds = _greedy_seeds(pts, k, rng) if k > 1 else [int(rng.integers(n))]
        d2 = np.stack([np.sum((pts - pts[s]) ** 2, axis=1) for s in seeds], axis=1)
        labels = np.argmin(d2, axis=1)
        resp = np.zeros((k, n))
        resp[labels, np.arange(n)] = 1.0
        anchors = np.array(seeds)
    elif strategy == "random-responsibility":
        resp = rng.random((k, n))
        resp /= resp.sum(axis=0)
        anchors = rng.permutation(n)[:k]
    else:
        raise ValueError(f"unknown init strategy {strategy!r}")
    comps, _ = family.mstep_all(data, resp, space)
    for z in range(k):
        if comps[z] is None:
            comps[z] = family.recentre(pooled, data[anchors[z % len(anchors)]], space)
    w, _ = _floor_weights(resp.sum(axis=1) / n, weight_floor)
    return MixtureParams(w, comps, family, space)


def resolve_strategy(strategy: str, family: Family) -> str:
    """``auto``: farthest-point seeding for location families, random responsibilities for regressions.

    Nearest-seed partitions in the joint (u, y) space cut crossing regression
    lines the wrong way, and EM rarely recovers from that start.
    """
    if strategy != "auto":
        return strategy
    return "random-responsibility" if isinstance(family, RegressionFamily) else "greedy-seed"


def duplicate_heaviest(psi: MixtureParams) -> MixtureParams:
    """(k+1)-component mixture with the same density: the heaviest component split in two."""
    z = int(np.argmax(psi.weights))
    w = list(psi.weights)
    w[z] /= 2.0
    w.append(w[z])
    return MixtureParams(w, list(psi.components) + [psi.components[z]], psi.family, psi.space)


def _run_em(psi: MixtureParams, data: np.ndarray, cfg: FitConfig, pooled) -> dict:
    resp, logdens = responsibilities_matrix(psi, data, exact_order=False)
    risk = _fast_risk(logdens)
    if not math.isfinite(risk):
        raise _RunFailed("non-finite risk at initialization")
    trace = [risk]
    flags = reseeds = violations = 0
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        info = em_step_info(psi, data, cfg, resp, logdens, pooled)
        if not math.isfinite(info.risk):
            raise _RunFailed(f"non-finite risk at iteration {it}")
        flagged = info.projected or info.reseeded > 0
        reseeds += info.reseeded
        if reseeds > _MAX_RESEEDS:
            raise _RunFailed("too many degenerate components")
        if flagged:
            flags += 1
            if info.risk > risk + MONOTONE_TOL:
                log.debug("risk increased by %.3g on a flagged iteration %d", info.risk - risk, it)
        elif info.risk > risk + MONOTONE_TOL:
            violations += 1
            log.warning("EM risk increased by %.3g at iteration %d", info.risk - risk, it)
        change = abs(risk - info.risk)
        psi, resp, logdens, prev, risk = info.params, info.resp, info.logdens, risk, info.risk
        trace.append(risk)
        if not info.reseeded and change <= cfg.rel_tol * max(abs(prev), 1e-300):
            converged = True
            break
    return {
        "params": psi,
        "risk": empirical_risk(psi, data),
        "iterations": it,
        "converged": converged,
        "trace": trace,
        "flags": flags,
        "reseeds": reseeds,
        "violations": violations,
    }


def min_sample_size(family: Family, k: int) -> int:
    return k * (family.dim + 1 if isinstance(family, GaussianFamily) else 1)


def fit(data, family: Family, k: int, space: ParamSpace = DEFAULT_SPACE, cfg: FitConfig | None = None,
        warm_start: MixtureParams | None = None) -> FitResult:
    """Best-of-restarts EM estimate of a k-component mixture.

    Restart ``r`` is seeded with ``split(cfg.base_seed, k, r)``. A
    ``warm_start`` mixture, if given, is run as one extra restart after the
    seeded ones. Ties in final risk go to the lower restart index.
    """
    cfg = cfg or FitConfig()
    if k < 1:
        raise ValueError("k must be >= 1")
    if not cfg.weight_floor < 1.0 / k:
        raise ValueError(f"weight_floor must be < 1/k = {1.0 / k}")
    data = family.as_data(data)
    n = data.shape[0]
    if n < min_sample_size(family, k):
        raise ValueError(f"{n} observations are too few for k={k} ({family.name})")
    if not np.all(np.isfinite(data)):
        raise ValueError("data contain NaN or infinite values")
    try:
        pooled = _pooled(family, data, space)
    except DegenerateComponent as exc:
        raise FitFailed(f"data cannot identify a single component: {exc}") from exc

    # k = 1 EM lands on the closed-form MLE from any start
    n_seeded = 1 if k == 1 else cfg.restarts
    starts = [("seeded", r) for r in range(n_seeded)]
    if warm_start is not None:
        if warm_start.k != k or warm_start.family != family:
            raise ValueError("warm start has the wrong order or family")
        starts.append(("warm", n_seeded))

    runs = []
    restart_log = []
    for kind, r in starts:
        entry = {"index": r, "kind": kind}
        try:
            if kind == "seeded":
                seed = split(cfg.base_seed, k, r)
                entry["seed"] = seed
                psi0 = init(data, family, k, cfg.init_strategy, make_rng(seed), space, cfg.weight_floor)
            else:
                psi0 = warm_start if warm_start.space == space else MixtureParams(
                    warm_start.weights, [family.project(t, space) for t in warm_start.components], family, space)
            run = _run_em(psi0, data, cfg, pooled)
        except (_RunFailed, DegenerateComponent) as exc:
            entry.update(failed=True, reason=str(exc))
            restart_log.append(entry)
            continue
        entry.update(failed=False, risk=run["risk"], iterations=run["iterations"], converged=run["converged"],
                     projection_flags=run["flags"], reseeds=run["reseeds"])
        restart_log.append(entry)
        runs.append(run)
    if not runs:
        raise FitFailed(f"all {len(starts)} restarts failed for k={k}", restart_log)

    best = min(range(len(runs)), key=lambda i: runs[i]["risk"])
    b = runs[best]
    return FitResult(
        params=b["params"],
        risk=b["risk"],
        iterations=b["iterations"],
        converged=b["converged"],
        restart_risks=[r["risk"] for r in runs],
        risk_trace=b["trace"],
        projection_flags=sum(r["flags"] for r in runs),
        reseeds=sum(r["reseeds"] for r in runs),
        monotonicity_violations=sum(r["violations"] for r in runs),
        restart_log=restart_log,
    )
