"""Component density families.

Three families are provided, each as a small frozen "family" object that knows
how to evaluate, fit (under observation weights), project and sample its
component parameters:

* ``GaussianFamily(dim)``: multivariate normal with full covariance.
* ``LaplaceFamily()``: univariate Laplace, ``phi(x) = rate/2 * exp(-rate*|x - loc|)``.
* ``RegressionFamily(p)``: Gaussian linear conditional density of ``y`` given
  covariates ``u`` (length ``p``, intercept included by the caller).

Data layout per family (``family.as_data`` normalizes raw input):

* Gaussian: ``(n, dim)`` float array.
* Laplace: ``(n,)`` float array.
* Regression: ``(n, p + 1)`` float array, covariates first, response last.

Parameters live in a compact set controlled by :class:`ParamSpace`: location
norms are bounded by ``b`` and scale quantities (covariance eigenvalues,
Laplace rate, regression noise variance) lie in ``[1/c, c]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import linalg

LOG_2PI = math.log(2.0 * math.pi)

# relative slack when testing feasibility of reconstructed (rounded) parameters
_FEAS_RTOL = 1e-10


class DegenerateComponent(ArithmeticError):
    """Raised by an M-step when the weights cannot identify a component."""


@dataclass(frozen=True)
class ParamSpace:
    """Bounds of the compact parameter set.

    ``b`` bounds location-type parameters (mean norm, Laplace location,
    coefficient norm); ``c`` bounds scale-type parameters to ``[1/c, c]``.
    """

    b: float = 1e6
    c: float = 1e6

    def __post_init__(self):
        if not (self.b >= 0 and math.isfinite(self.b)):
            raise ValueError(f"b must be finite and >= 0, got {self.b}")
        if not (self.c >= 1 and math.isfinite(self.c)):
            raise ValueError(f"c must be finite and >= 1, got {self.c}")

    @property
    def lower(self) -> float:
        return 1.0 / self.c

    def clamp_scale(self, v: float) -> float:
        return min(max(v, 1.0 / self.c), self.c)

    def to_dict(self) -> dict:
        return {"b": self.b, "c": self.c}


DEFAULT_SPACE = ParamSpace()


# ---------------------------------------------------------------------------
# parameter types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianParams:
    mean: np.ndarray
    cov: np.ndarray
    chol: np.ndarray
    logdet: float

    @classmethod
    def from_cov(cls, mean, cov) -> "GaussianParams":
        mean = np.atleast_1d(np.asarray(mean, dtype=float)).copy()
        cov = np.atleast_2d(np.asarray(cov, dtype=float)).copy()
        d = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (d, d):
            raise ValueError(f"mean/cov shape mismatch: {mean.shape} vs {cov.shape}")
        if not np.all(np.isfinite(cov)) or not np.all(np.isfinite(mean)):
            raise ValueError("non-finite Gaussian parameter")
        if not np.allclose(cov, cov.T, rtol=1e-12, atol=0.0):
            raise ValueError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise ValueError("covariance is not positive definite") from None
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
        mean.flags.writeable = False
        cov.flags.writeable = False
        chol.flags.writeable = False
        return cls(mean, cov, chol, logdet)

    @classmethod
    def scalar(cls, mean: float, var: float) -> "GaussianParams":
        """Univariate constructor without the general validation path."""
        if not (var > 0 and math.isfinite(var) and math.isfinite(mean)):
            raise ValueError(f"invalid univariate Gaussian ({mean}, {var})")
        m = np.array([float(mean)])
        c = np.array([[float(var)]])
        l = np.array([[math.sqrt(var)]])
        for a in (m, c, l):
            a.flags.writeable = False
        return cls(m, c, l, math.log(var))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GaussianParams):
            return NotImplemented
        return np.array_equal(self.mean, other.mean) and np.array_equal(self.cov, other.cov)

    def __repr__(self):
        return f"GaussianParams(mean={self.mean.tolist()}, cov={self.cov.tolist()})"


@dataclass(frozen=True)
class LaplaceParams:
    loc: float
    rate: float

    def __post_init__(self):
        if not math.isfinite(self.loc):
            raise ValueError("non-finite Laplace location")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"Laplace rate must be positive and finite, got {self.rate}")


@dataclass(frozen=True, eq=False)
class RegressionParams:
    coef: np.ndarray
    sd: float

    def __post_init__(self):
        coef = np.atleast_1d(np.asarray(self.coef, dtype=float)).copy()
        if coef.ndim != 1 or not np.all(np.isfinite(coef)):
            raise ValueError("coefficients must be a finite vector")
        if not (self.sd > 0 and math.isfinite(self.sd)):
            raise ValueError(f"noise sd must be positive and finite, got {self.sd}")
        coef.flags.writeable = False
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "sd", float(self.sd))

    @property
    def p(self) -> int:
        return self.coef.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RegressionParams):
            return NotImplemented
        return np.array_equal(self.coef, other.coef) and self.sd == other.sd

    def __repr__(self):
        return f"RegressionParams(coef={self.coef.tolist()}, sd={self.sd!r})"


def _effective_count(w: np.ndarray) -> float:
    s = w.sum()
    s2 = np.dot(w, w)
    return 0.0 if s2 == 0 else float(s * s / s2)


def _check_weights(w: np.ndarray, n: int) -> float:
    if w.shape != (n,):
        raise ValueError(f"weights shape {w.shape} does not match {n} observations")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    total = float(w.sum())
    if total <= 0:
        raise DegenerateComponent("weights sum to zero")
    return total


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianFamily:
    dim: int = 1

    name = "gaussian"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    @property
    def param_dim(self) -> int:
        return self.dim + self.dim * (self.dim + 1) // 2

    @property
    def min_points(self) -> int:
        return self.dim + 1

    @property
    def is_1d(self) -> bool:
        return self.dim == 1

    def as_data(self, raw) -> np.ndarray:
        x = np.asarray(raw, dtype=float)
        if x.ndim == 1 and self.dim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ValueError(f"expected observations of dimension {self.dim}, got shape {x.shape}")
        return x

    def check(self, theta) -> None:
        if not isinstance(theta, GaussianParams):
            raise TypeError(f"expected GaussianParams, got {type(theta).__name__}")
        if theta.dim != self.dim:
            raise ValueError(f"parameter dimension {theta.dim} != family dimension {self.dim}")

    def log_density(self, theta: GaussianParams, data: np.ndarray) -> np.ndarray:
        if self.dim == 1:
            # same arithmetic as log_density_all so single and batched paths agree bitwise
            return self.log_density_all([theta], data)[0]
        z = linalg.solve_triangular(theta.chol, (data - theta.mean).T, lower=True, check_finite=False)
        quad = np.einsum("ij,ij->j", z, z)
        return -0.5 * (self.dim * LOG_2PI + theta.logdet + quad)

    def log_density_all(self, comps, data: np.ndarray) -> np.ndarray:
        """``(k, n)`` log-densities of every component."""
        if self.dim == 1:
            mu = np.array([[t.mean[0]] for t in comps])
            var = np.array([[t.cov[0, 0]] for t in comps])
            d = data[:, 0] - mu
            return -0.5 * (LOG_2PI + np.log(var)) - 0.5 * d * d / var
        return np.stack([self.log_density(t, data) for t in comps])

    def mstep_all(self, data: np.ndarray, resp: np.ndarray, space: ParamSpace):
        """Weighted M-step for every row of the ``(k, n)`` responsibilities; degenerate rows give None."""
        if self.dim > 1:
            return _mstep_loop(self, data, resp, space)
        x = data[:, 0]
        tot = resp.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            # all-zero rows give NaN here and are caught as degenerate below
            neff = tot * tot / np.einsum("ij,ij->i", resp, resp)
            mu = resp @ x / tot
            d = x - mu[:, None]
            var = np.einsum("ij,ij->i", d * d, resp) / tot
        comps = []
        clamped = False
        for z in range(resp.shape[0]):
            if not (tot[z] > 0 and neff[z] >= self.min_points):
                comps.append(None)
                continue
            m, v = float(mu[z]), float(var[z])
            if abs(m) > space.b:
                m = math.copysign(space.b, m)
                clamped = True
            if not space.lower <= v <= space.c:
                v = space.clamp_scale(v)
                clamped = True
            comps.append(GaussianParams.scalar(m, v))
        return comps, clamped

    def is_feasible(self, theta: GaussianParams, space: ParamSpace) -> bool:
        if np.linalg.norm(theta.mean) > space.b * (1 + _FEAS_RTOL):
            return False
        eig = np.linalg.eigvalsh(theta.cov) if self.dim > 1 else theta.cov[0]
        return bool(eig.min() >= space.lower * (1 - _FEAS_RTOL) and eig.max() <= space.c * (1 + _FEAS_RTOL))

    def project_arrays(self, mean: np.ndarray, cov: np.ndarray, space: ParamSpace) -> tuple[GaussianParams, bool]:
        """Project raw (mean, cov); also reports whether any bound was active."""
        mean = np.asarray(mean, dtype=float)
        clamped = False
        norm = np.linalg.norm(mean)
        if norm > space.b:
            mean = mean * (space.b / norm)
            clamped = True
        cov = 0.5 * (cov + cov.T)
        if self.dim == 1:
            v = float(cov[0, 0])
            if not space.lower <= v <= space.c:
                cov = np.array([[space.clamp_scale(v)]])
                clamped = True
        else:
            vals, vecs = np.linalg.eigh(cov)
            clipped = np.clip(vals, space.lower, space.c)
            if not np.array_equal(clipped, vals):
                cov = (vecs * clipped) @ vecs.T
                cov = 0.5 * (cov + cov.T)
                clamped = True
        return GaussianParams.from_cov(mean, cov), clamped

    def project(self, theta: GaussianParams, space: ParamSpace) -> GaussianParams:
        if self.is_feasible(theta, space):
            return theta
        return self.project_arrays(theta.mean, theta.cov, space)[0]

    def weighted_mstep(self, data: np.ndarray, w: np.ndarray, space: ParamSpace) -> GaussianParams:
        return self.weighted_mstep_flagged(data, w, space)[0]

    def weighted_mstep_flagged(self, data: np.ndarray, w: np.ndarray, space: ParamSpace) -> tuple[GaussianParams, bool]:
        total = _check_weights(w, data.shape[0])
        if _effective_count(w) < self.min_points:
            raise DegenerateComponent(f"weights concentrate on fewer than {self.min_points} points")
        mean = w @ data / total
        diff = data - mean
        cov = (diff * w[:, None]).T @ diff / total
        return self.project_arrays(mean, cov, space)

    def sample(self, theta: GaussianParams, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.standard_normal((n, self.dim))
        return theta.mean + z @ theta.chol.T

    def recentre(self, theta: GaussianParams, point: np.ndarray, space: ParamSpace) -> GaussianParams:
        return self.project_arrays(np.asarray(point, dtype=float).reshape(self.dim), theta.cov, space)[0]

    def location_scale(self, theta: GaussianParams) -> tuple[float, float]:
        return float(theta.mean[0]), math.sqrt(float(theta.cov[0, 0]))

    def to_dict(self, theta: GaussianParams) -> dict:
        return {"mean": theta.mean.tolist(), "cov": theta.cov.tolist()}

    def from_dict(self, d: dict) -> GaussianParams:
        theta = GaussianParams.from_cov(d["mean"], d["cov"])
        self.check(theta)
        return theta

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim}


@dataclass(frozen=True)
class LaplaceFamily:
    name = "laplace"
    param_dim = 2
    min_points = 2
    is_1d = True

    def as_data(self, raw) -> np.ndarray:
        x = np.asarray(raw, dtype=float)
        if x.ndim == 2 and x.shape[1] == 1:
            x = x[:, 0]
        if x.ndim != 1:
            raise ValueError(f"Laplace observations must be scalar, got shape {x.shape}")
        return x

    def check(self, theta) -> None:
        if not isinstance(theta, LaplaceParams):
            raise TypeError(f"expected LaplaceParams, got {type(theta).__name__}")

    def log_density(self, theta: LaplaceParams, data: np.ndarray) -> np.ndarray:
        return math.log(theta.rate / 2.0) - theta.rate * np.abs(data - theta.loc)

    def log_density_all(self, comps, data: np.ndarray) -> np.ndarray:
        loc = np.array([[t.loc] for t in comps])
        rate = np.array([[t.rate] for t in comps])
        return np.log(rate / 2.0) - rate * np.abs(data - loc)

    def mstep_all(self, data: np.ndarray, resp: np.ndarray, space: ParamSpace):
        order = np.argsort(data, kind="stable")
        xs = data[order]
        cum = np.cumsum(resp[:, order], axis=1)
        tot = cum[:, -1]
        neff = tot * tot / np.einsum("ij,ij->i", resp, resp)
        comps = []
        clamped = False
        for z in range(resp.shape[0]):
            if not (tot[z] > 0 and neff[z] >= self.min_points):
                comps.append(None)
                continue
            # lower weighted median: first sorted point whose cumulative weight reaches half
            m = float(xs[min(int(np.searchsorted(cum[z], 0.5 * tot[z], side="left")), len(xs) - 1)])
            mad = float(resp[z] @ np.abs(data - m)) / tot[z]
            rate = math.inf if mad <= 0 else 1.0 / mad
            if abs(m) > space.b:
                m = math.copysign(space.b, m)
                clamped = True
            if not space.lower <= rate <= space.c:
                rate = space.clamp_scale(rate)
                clamped = True
            comps.append(LaplaceParams(m, rate))
        return comps, clamped

    def is_feasible(self, theta: LaplaceParams, space: ParamSpace) -> bool:
        return abs(theta.loc) <= space.b and space.lower <= theta.rate <= space.c

    def project(self, theta: LaplaceParams, space: ParamSpace) -> LaplaceParams:
        if self.is_feasible(theta, space):
            return theta
        return LaplaceParams(min(max(theta.loc, -space.b), space.b), space.clamp_scale(theta.rate))

    def weighted_mstep(self, data: np.ndarray, w: np.ndarray, space: ParamSpace) -> LaplaceParams:
        return self.weighted_mstep_flagged(data, w, space)[0]

    def weighted_mstep_flagged(self, data: np.ndarray, w: np.ndarray, space: ParamSpace) -> tuple[LaplaceParams, bool]:
        total = _check_weights(w, data.shape[0])
        if _effective_count(w) < self.min_points:
            raise DegenerateComponent("weights concentrate on fewer than 2 points")
        loc = weighted_median(data, w)
        mad = float(w @ np.abs(data - loc)) / total
        rate = math.inf if mad <= 0 else 1.0 / mad
        theta = LaplaceParams(min(max(loc, -space.b), space.b), space.clamp_scale(rate))
        return theta, (theta.loc != loc or theta.rate != rate)

    def ppf(self, theta: LaplaceParams, u):
        """Inverse CDF."""
        u = np.asarray(u, dtype=float)
        t = u - 0.5
        return theta.loc - np.sign(t) * np.log1p(-2.0 * np.abs(t)) / theta.rate

    def sample(self, theta: LaplaceParams, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.ppf(theta, rng.random(n))

    def recentre(self, theta: LaplaceParams, point, space: ParamSpace) -> LaplaceParams:
        return self.project(LaplaceParams(float(np.asarray(point).reshape(-1)[0]), theta.rate), space)

    def location_scale(self, theta: LaplaceParams) -> tuple[float, float]:
        return theta.loc, 1.0 / theta.rate

    def to_dict(self, theta: LaplaceParams) -> dict:
        return {"loc": theta.loc, "rate": theta.rate}

    def from_dict(self, d: dict) -> LaplaceParams:
        return LaplaceParams(float(d["loc"]), float(d["rate"]))

    def describe(self) -> dict:
        return {"name": self.name}


@dataclass(frozen=True)
class RegressionFamily:
    """Gaussian linear regression ``y | u ~ N(coef . u, sd^2)``.

    The ``[1/c, c]`` box applies to the noise variance ``sd**2``.
    """

    p: int = 2

    name = "regression"
    is_1d = False

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")

    @property
    def param_dim(self) -> int:
        return self.p + 1

    @property
    def min_points(self) -> int:
        return self.p + 1

    def as_data(self, raw) -> np.ndarray:
        z = np.asarray(raw, dtype=float)
        if z.ndim != 2 or z.shape[1] != self.p + 1:
            raise ValueError(f"regression data must have shape (n, {self.p + 1}), got {z.shape}")
        return z

    def stack(self, u, y) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        y = np.asarray(y, dtype=float).reshape(-1)
        if u.shape[0] != y.shape[0] and u.shape[0] == 1 and u.shape[1] == y.shape[0] * self.p:
            u = u.reshape(y.shape[0], self.p)
        if u.shape != (y.shape[0], self.p):
            raise ValueError(f"covariates shape {u.shape} does not match p={self.p}, n={y.shape[0]}")
        return np.column_stack([u, y])

    def check(self, theta) -> None:
        if not isinstance(theta, RegressionParams):
            raise TypeError(f"expected RegressionParams, got {type(theta).__name__}")
        if theta.p != self.p:
            raise ValueError(f"coefficient length {theta.p} != p={self.p}")

    def log_density(self, theta: RegressionParams, data: np.ndarray) -> np.ndarray:
        resid = data[:, -1] - data[:, :-1] @ theta.coef
        var = theta.sd * theta.sd
        return -0.5 * (LOG_2PI + math.log(var)) - 0.5 * resid * resid / var

    def log_density_all(self, comps, data: np.ndarray) -> np.ndarray:
        coef = np.stack([t.coef for t in comps])
        var = np.array([[t.sd * t.sd] for t in comps])
        resid = data[:, -1] - coef @ data[:, :-1].T
        return -0.5 * (LOG_2PI + np.log(var)) - 0.5 * resid * resid / var

    def mstep_all(self, data: np.ndarray, resp: np.ndarray, space: ParamSpace):
        return _mstep_loop(self, data, resp, space)

    def is_feasible(self, theta: RegressionParams, space: ParamSpace) -> bool:
        var = theta.sd * theta.sd
        return bool(
            np.linalg.norm(theta.coef) <= space.b * (1 + _FEAS_RTOL)
            and space.lower * (1 - _FEAS_RTOL) <= var <= space.c * (1 + _FEAS_RTOL)
        )

    def _project_arrays(self, coef: np.ndarray, var: float, space: ParamSpace) -> tuple[RegressionParams, bool]:
        clamped = False
        norm = np.linalg.norm(coef)
        if norm > space.b:
            coef = coef * (space.b / norm)
            clamped = True
        if not space.lower <= var <= space.c:
            var = space.clamp_scale(var)
            clamped = True
        return RegressionParams(coef, math.sqrt(var)), clamped

    def project(self, theta: RegressionParams, space: ParamSpace) -> RegressionParams:
        if self.is_feasible(theta, space):
            return theta
        return self._project_arrays(np.asarray(theta.coef), theta.sd * theta.sd, space)[0]

    def weighted_mstep(self, data: np.ndarray, w: np.ndarray, space: ParamSpace) -> RegressionParams:
        return self.weighted_mstep_flagged(data, w, space)[0]

    def weighted_mstep_flagged(self, data: np.ndarray, w: np.ndarray, space: ParamSpace) -> tuple[RegressionParams, bool]:
        total = _check_weights(w, data.shape[0])
        if _effective_count(w) < self.min_points:
            raise DegenerateComponent(f"weights concentrate on fewer than {self.min_points} points")
        u, y = data[:, :-1], data[:, -1]
        sw = np.sqrt(w)
        coef, _, rank, _ = np.linalg.lstsq(u * sw[:, None], y * sw, rcond=None)
        if rank < self.p:
            raise DegenerateComponent("weighted covariate matrix is rank deficient")
        resid = y - u @ coef
        var = float(w @ (resid * resid)) / total
        return self._project_arrays(coef, var, space)

    def sample(self, theta: RegressionParams, rng: np.random.Generator, n: int, covariates=None) -> np.ndarray:
        if covariates is None:
            raise ValueError("regression sampling needs covariates")
        u = np.asarray(covariates, dtype=float).reshape(n, self.p)
        y = u @ theta.coef + theta.sd * rng.standard_normal(n)
        return np.column_stack([u, y])

    def recentre(self, theta: RegressionParams, point, space: ParamSpace) -> RegressionParams:
        point = np.asarray(point, dtype=float).reshape(-1)
        u, y = point[:-1], point[-1]
        uu = float(u @ u)
        coef = np.asarray(theta.coef)
        if uu > 0:
            coef = coef + (y - float(u @ coef)) * u / uu
        return self._project_arrays(coef, theta.sd * theta.sd, space)[0]

    def to_dict(self, theta: RegressionParams) -> dict:
        return {"coef": theta.coef.tolist(), "sd": theta.sd}

    def from_dict(self, d: dict) -> RegressionParams:
        theta = RegressionParams(np.asarray(d["coef"], dtype=float), float(d["sd"]))
        self.check(theta)
        return theta

    def describe(self) -> dict:
        return {"name": self.name, "p": self.p}


Family = GaussianFamily | LaplaceFamily | RegressionFamily


def _mstep_loop(family, data, resp, space):
    comps = []
    clamped = False
    for z in range(resp.shape[0]):
        try:
            theta, c = family.weighted_mstep_flagged(data, resp[z], space)
        except DegenerateComponent:
            theta, c = None, False
        comps.append(theta)
        clamped |= c
    return comps, clamped


def weighted_median(x: np.ndarray, w: np.ndarray) -> float:
    """Lower weighted median: the smallest x whose cumulative weight reaches half."""
    order = np.argsort(x, kind="stable")
    cum = np.cumsum(w[order])
    idx = int(np.searchsorted(cum, 0.5 * cum[-1], side="left"))
    return float(x[order[min(idx, len(x) - 1)]])


def family_from_dict(d: dict[str, Any]) -> Family:
    name = d["name"]
    if name == "gaussian":
        return GaussianFamily(int(d.get("dim", 1)))
    if name == "laplace":
        return LaplaceFamily()
    if name == "regression":
        return RegressionFamily(int(d["p"]))
    raise ValueError(f"unknown family {name!r}")


def family_of(theta) -> Family:
    if isinstance(theta, GaussianParams):
        return GaussianFamily(theta.dim)
    if isinstance(theta, LaplaceParams):
        return LaplaceFamily()
    if isinstance(theta, RegressionParams):
        return RegressionFamily(theta.p)
    raise TypeError(f"not a component parameter: {type(theta).__name__}")


# ---------------------------------------------------------------------------
# functional surface
# ---------------------------------------------------------------------------


def to_batch(fam: Family, x) -> tuple[np.ndarray, bool]:
    """Normalize one observation or a batch to the family's data layout.

    Returns the batch and whether the input was a single observation. For the
    regression family a pair ``(u, y)`` is accepted as well as stacked rows.
    """
    if isinstance(fam, RegressionFamily) and isinstance(x, tuple):
        return fam.stack(x[0], x[1]), np.ndim(x[1]) == 0
    arr = np.asarray(x, dtype=float)
    width = _obs_width(fam)
    single = arr.ndim == 0 or (arr.ndim == 1 and width > 1 and arr.shape[0] == width)
    return fam.as_data(arr.reshape(1, -1) if single else arr), single


def _obs_width(fam) -> int:
    if isinstance(fam, GaussianFamily):
        return fam.dim
    if isinstance(fam, RegressionFamily):
        return fam.p + 1
    return 1


def log_density(theta, x) -> float | np.ndarray:
    """Log component density at one observation or a batch."""
    fam = family_of(theta)
    data, single = to_batch(fam, x)
    out = fam.log_density(theta, data)
    return float(out[0]) if single else out


def project(theta, space: ParamSpace = DEFAULT_SPACE):
    """Nearest point of the compact parameter set; identity on feasible input."""
    return family_of(theta).project(theta, space)


def weighted_mstep(family: Family, data, weights, space: ParamSpace = DEFAULT_SPACE):
    """Weighted maximum likelihood component update, projected onto ``space``."""
    data = family.as_data(data)
    if data.shape[0] == 0:
        raise ValueError("no observations")
    return family.weighted_mstep(data, np.asarray(weights, dtype=float), space)


def sample(theta, rng: np.random.Generator, n: int | None = None, covariates=None):
    """Draw from the component; a single observation when ``n`` is None."""
    fam = family_of(theta)
    size = 1 if n is None else n
    if isinstance(fam, RegressionFamily):
        if covariates is None:
            raise ValueError("regression sampling needs covariates")
        out = fam.sample(theta, rng, size, np.asarray(covariates, dtype=float).reshape(size, fam.p))
    else:
        out = fam.sample(theta, rng, size)
    return out[0] if n is None else out


def param_dim(family: Family) -> int:
    return family.param_dim
