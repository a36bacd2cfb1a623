"""Penalties for order selection: AIC, BIC, nu-BIC and eps-BIC.

With ``Ln(x) = log(max(e, x))`` and ``alpha(k)`` strictly increasing,

* AIC:     ``dim(k) / n``
* BIC:     ``dim(k) / 2 * log(n) / n``
* nu-BIC:  ``alpha(k) * Ln^nu(n) * log(n) / n``
* eps-BIC: ``alpha(k) * log(n)**(1 + eps) / n``

where ``dim(k) = (m + 1) k`` is the dimension of the k-component parameter
space (``m`` parameters per component). The default ``alpha`` is
``dim(k) / 2``; because ``Ln^nu(n) == 1`` exactly for ``n <= exp^nu(1)``, the
nu-BIC and BIC penalties then coincide bit for bit at practical sample sizes.
All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

KINDS = ("aic", "bic", "nu-bic", "eps-bic")
_LOG_MAX_FLOAT = math.log(1.7976931348623157e308)


def ln_trunc(x: float) -> float:
    """``log(max(e, x))``; never below 1."""
    if x < 0:
        raise ValueError("ln_trunc is defined for x >= 0")
    return 1.0 if x <= math.e else math.log(x)


def ln_compose(nu: int, n: float) -> float:
    """``nu``-fold composition of :func:`ln_trunc`."""
    if nu < 1:
        raise ValueError("nu must be a positive integer")
    v = float(n)
    for _ in range(nu):
        v = ln_trunc(v)
    return v


def dim_k(k: int, m: int, convention: str = "paper") -> int:
    if convention == "paper":
        return (m + 1) * k
    if convention == "free":
        return (m + 1) * k - 1
    raise ValueError(f"unknown dimension convention {convention!r}")


@dataclass(frozen=True)
class CriterionSpec:
    """Penalty family plus its order weight ``alpha(k, m)``.

    ``alpha=None`` means ``dim(k) / 2`` under ``dim_convention``.
    """

    kind: str
    nu: int | None = None
    eps: float | None = None
    alpha: Callable[[int, int], float] | None = field(default=None, compare=False)
    dim_convention: str = "paper"
    check_kmax: int = 10

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown criterion {self.kind!r}; expected one of {KINDS}")
        if self.kind == "nu-bic":
            if self.nu is None or int(self.nu) != self.nu or self.nu < 1:
                raise ValueError("nu-bic needs a positive integer nu")
            object.__setattr__(self, "nu", int(self.nu))
        if self.kind == "eps-bic" and (self.eps is None or not self.eps > 0):
            raise ValueError("eps-bic needs eps > 0")
        if self.dim_convention not in ("paper", "free"):
            raise ValueError(f"unknown dimension convention {self.dim_convention!r}")
        if self.alpha is not None:
            for m in (1, 2, 5):
                vals = [self.alpha(k, m) for k in range(1, self.check_kmax + 1)]
                if vals[0] <= 0 or any(b <= a for a, b in zip(vals, vals[1:])):
                    raise ValueError("alpha must be positive and strictly increasing in k")

    @classmethod
    def aic(cls, **kw) -> "CriterionSpec":
        return cls("aic", **kw)

    @classmethod
    def bic(cls, **kw) -> "CriterionSpec":
        return cls("bic", **kw)

    @classmethod
    def nu_bic(cls, nu: int, **kw) -> "CriterionSpec":
        return cls("nu-bic", nu=nu, **kw)

    @classmethod
    def eps_bic(cls, eps: float, **kw) -> "CriterionSpec":
        return cls("eps-bic", eps=eps, **kw)

    @classmethod
    def parse(cls, text: str) -> "CriterionSpec":
        """Parse ``aic``, ``bic``, ``nu-bic:3`` or ``eps-bic:0.02``."""
        name, _, arg = text.strip().lower().partition(":")
        if name == "nu-bic":
            if not arg:
                raise ValueError("nu-bic needs a value, e.g. nu-bic:3")
            return cls.nu_bic(int(arg))
        if name == "eps-bic":
            if not arg:
                raise ValueError("eps-bic needs a value, e.g. eps-bic:0.02")
            return cls.eps_bic(float(arg))
        if arg:
            raise ValueError(f"{name} takes no argument")
        return cls(name)

    @property
    def label(self) -> str:
        if self.kind == "nu-bic":
            return f"nu-bic:{self.nu}"
        if self.kind == "eps-bic":
            return f"eps-bic:{self.eps:g}"
        return self.kind

    def alpha_value(self, k: int, m: int) -> float:
        if self.alpha is not None:
            return float(self.alpha(k, m))
        return dim_k(k, m, self.dim_convention) / 2.0

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "dim_convention": self.dim_convention, "label": self.label}
        if self.nu is not None:
            d["nu"] = self.nu
        if self.eps is not None:
            d["eps"] = self.eps
        d["alpha"] = "default" if self.alpha is None else "custom"
        return d


def penalty(spec: CriterionSpec, k: int, m: int, n: int) -> float:
    if k < 1 or n < 1:
        raise ValueError("penalty needs k >= 1 and n >= 1")
    logn = math.log(n)
    if spec.kind == "aic":
        return dim_k(k, m, spec.dim_convention) / n
    if spec.kind == "bic":
        # same association as nu-bic so that the two agree bitwise when Ln^nu(n) == 1
        return (dim_k(k, m, spec.dim_convention) / 2.0) * 1.0 * logn / n
    if spec.kind == "nu-bic":
        return spec.alpha_value(k, m) * ln_compose(spec.nu, n) * logn / n
    return spec.alpha_value(k, m) * logn ** (1.0 + spec.eps) / n


def criterion_value(spec: CriterionSpec, risk: float, k: int, m: int, n: int) -> float:
    if not math.isfinite(risk):
        raise ValueError("risk must be finite")
    return risk + penalty(spec, k, m, n)


# ---------------------------------------------------------------------------
# conditions on penalty sequences
# ---------------------------------------------------------------------------


@dataclass
class ConditionReport:
    """Grid-based check of vanishing penalties (B1) and diverging scaled gaps (B2)."""

    criterion: str
    n_grid: list[int]
    b1_ok: bool
    b2_ok: bool
    violations: list[str]
    scaled_gaps: dict[tuple[int, int], list[float]]

    @property
    def ok(self) -> bool:
        return self.b1_ok and self.b2_ok


def scaled_gap(spec: CriterionSpec, k: int, l: int, m: int, n: int) -> float:
    """``(n / log n) * (pen_l - pen_k)``."""
    return n / math.log(n) * (penalty(spec, l, m, n) - penalty(spec, k, m, n))


def scaled_gap_closed_form(spec: CriterionSpec, k: int, l: int, m: int, n: int) -> float:
    """Closed form of :func:`scaled_gap` for the nu- and eps-BIC families."""
    da = spec.alpha_value(l, m) - spec.alpha_value(k, m)
    if spec.kind == "nu-bic":
        return da * ln_compose(spec.nu, n)
    if spec.kind == "eps-bic":
        return da * math.log(n) ** spec.eps
    if spec.kind == "bic":
        return da
    raise ValueError("no closed form for AIC")


def check_b1_b2(spec, kmax: int, m: int, n_grid, penalty_fn=None) -> ConditionReport:
    """Empirical check along an increasing grid of sample sizes.

    B1 proxy: for every k the penalty decreases along the grid. B2 proxy: for
    every ``k < l`` the scaled gap ``(n / log n)(pen_l - pen_k)`` is positive,
    never decreases along the grid and ends strictly above where it started
    (Ln^nu is flat until exp^nu(1), so strict growth at every step is too
    strong a proxy). ``penalty_fn(k, m, n)`` overrides
    ``spec`` (useful for test doubles).
    """
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be strictly increasing")
    pen = penalty_fn or (lambda k, m_, n: penalty(spec, k, m_, n))
    name = spec.label if isinstance(spec, CriterionSpec) else str(spec)
    violations = []
    b1 = True
    for k in range(1, kmax + 1):
        vals = [pen(k, m, n) for n in n_grid]
        if any(b >= a for a, b in zip(vals, vals[1:])):
            b1 = False
            violations.append(f"B1: penalty for k={k} is not decreasing along the grid")
    b2 = True
    gaps = {}
    for k in range(1, kmax + 1):
        for l in range(k + 1, kmax + 1):
            g = [n / math.log(n) * (pen(l, m, n) - pen(k, m, n)) for n in n_grid]
            gaps[(k, l)] = g
            if g[0] <= 0 or any(b < a * (1 - 1e-12) for a, b in zip(g, g[1:])) or not g[-1] > g[0] * (1 + 1e-12):
                b2 = False
                violations.append(f"B2: scaled gap for k={k}, l={l} is not increasing along the grid")
    return ConditionReport(name, n_grid, b1, b2, violations, gaps)


# ---------------------------------------------------------------------------
# negligibility thresholds
# ---------------------------------------------------------------------------


def _format_magnitude(log_value: float) -> str:
    """Scientific notation for ``exp(log_value)`` without evaluating it."""
    l10 = log_value / math.log(10.0)
    exp10 = math.floor(l10)
    mant = 10.0 ** (l10 - exp10)
    if mant >= 9.95:
        mant, exp10 = mant / 10.0, exp10 + 1
    return f"{mant:.1f}e{exp10:+d}"


def _threshold_entry(level: float, log_n: float) -> dict:
    """``log_n`` is the natural log of the threshold; may exceed float range."""
    entry = {"level": level, "log_threshold": log_n, "magnitude": _format_magnitude(log_n)}
    entry["threshold"] = math.exp(log_n) if log_n < _LOG_MAX_FLOAT else None
    if entry["threshold"] is None:
        entry["note"] = "exceeds representable range"
    return entry


def _log_exp_tower(nu: int, x: float) -> float:
    """Natural log of ``exp^nu(x)``, or ``inf`` when not representable."""
    v = x
    for _ in range(nu - 1):
        if v >= _LOG_MAX_FLOAT:
            return math.inf
        v = math.exp(v)
    return v


def thresholds(nu: int | None = None, eps: float | None = None, levels=(1.0, 1.1)) -> dict:
    """Largest n at which the nu-/eps-BIC inflation factor stays below each level.

    For nu the factor is ``Ln^nu(n)`` and the bound is ``exp^nu(level)``; for
    eps the factor is ``log(n)**eps`` and the bound is
    ``exp(level**(1/eps))`` (reported only for levels above 1, since
    ``log(n)**eps <= 1`` just means ``n <= e``).
    """
    if (nu is None) == (eps is None):
        raise ValueError("give exactly one of nu or eps")
    if nu is not None:
        if nu < 1:
            raise ValueError("nu must be >= 1")
        out = []
        for lv in levels:
            log_n = _log_exp_tower(nu, lv)
            if math.isinf(log_n):
                out.append({"level": lv, "log_threshold": None, "threshold": None,
                            "magnitude": f"exp^{nu}({lv:g})", "note": "exceeds representable range"})
            else:
                out.append(_threshold_entry(lv, log_n))
        return {"kind": "nu-bic", "nu": nu, "factor": "Ln^nu(n)", "thresholds": out}
    if not eps > 0:
        raise ValueError("eps must be > 0")
    out = []
    for lv in levels:
        if lv <= 1.0:
            continue
        log_log = math.log(lv) / eps
        if log_log >= _LOG_MAX_FLOAT:
            out.append({"level": lv, "log_threshold": None, "threshold": None,
                        "magnitude": f"exp({lv:g}^(1/{eps:g}))", "note": "exceeds representable range"})
            continue
        out.append(_threshold_entry(lv, math.exp(log_log)))
    return {"kind": "eps-bic", "eps": eps, "factor": "log(n)^eps", "thresholds": out}
