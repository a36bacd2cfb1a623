"""Finite mixtures of a single component family."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .densities import (
    DEFAULT_SPACE,
    Family,
    ParamSpace,
    RegressionFamily,
    family_from_dict,
    to_batch,
)


@dataclass(frozen=True, eq=False)
class MixtureParams:
    """Weights and component parameters of a k-component mixture.

    Weights are renormalized on construction; every component must already
    be feasible in ``space``.
    """

    weights: np.ndarray
    components: tuple
    family: Family
    space: ParamSpace = DEFAULT_SPACE

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1).copy()
        comps = tuple(self.components)
        if len(comps) < 1:
            raise ValueError("a mixture needs at least one component")
        if w.shape[0] != len(comps):
            raise ValueError(f"{w.shape[0]} weights for {len(comps)} components")
        if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
            raise ValueError("weights must be nonnegative, finite and not all zero")
        w = w / w.sum()
        for theta in comps:
            self.family.check(theta)
            if not self.family.is_feasible(theta, self.space):
                raise ValueError(f"component {theta!r} is outside the parameter space")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @classmethod
    def trusted(cls, weights: np.ndarray, components, family: Family, space: ParamSpace) -> "MixtureParams":
        """Construct without validation; for internal use on already-feasible iterates."""
        obj = object.__new__(cls)
        weights = np.asarray(weights, dtype=float)
        weights.flags.writeable = False
        object.__setattr__(obj, "weights", weights)
        object.__setattr__(obj, "components", tuple(components))
        object.__setattr__(obj, "family", family)
        object.__setattr__(obj, "space", space)
        return obj

    @property
    def k(self) -> int:
        return len(self.components)

    def permuted(self, order) -> "MixtureParams":
        order = list(order)
        return MixtureParams(self.weights[order], [self.components[i] for i in order], self.family, self.space)

    def to_dict(self) -> dict:
        return {
            "family": self.family.describe(),
            "weights": self.weights.tolist(),
            "components": [self.family.to_dict(t) for t in self.components],
            "space": self.space.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureParams":
        fam = d["family"]
        family = family_from_dict(fam if isinstance(fam, dict) else {"name": fam})
        space = ParamSpace(**d.get("space", {}))
        comps = [family.from_dict(c) for c in d["components"]]
        return cls(np.asarray(d["weights"], dtype=float), comps, family, space)


def component_log_densities(psi: MixtureParams, data: np.ndarray) -> np.ndarray:
    """``(k, n)`` matrix of ``log pi_z + log phi(x_i; theta_z)``; ``-inf`` where ``pi_z = 0``."""
    with np.errstate(divide="ignore"):
        logw = np.log(psi.weights)
    return psi.family.log_density_all(psi.components, data) + logw[:, None]


def _col_logsumexp(a: np.ndarray) -> np.ndarray:
    # sorting over components makes the result independent of their order, bit for bit
    if a.shape[0] > 1:
        a = np.sort(a, axis=0)
    top = a[-1]
    return top + np.log(np.sum(np.exp(a - top), axis=0))


def log_mixture_density_matrix(psi: MixtureParams, data: np.ndarray) -> np.ndarray:
    return _col_logsumexp(component_log_densities(psi, data))


def log_mixture_density(psi: MixtureParams, x):
    """``log sum_z pi_z phi(x; theta_z)`` for one observation or a batch."""
    data, single = to_batch(psi.family, x)
    out = log_mixture_density_matrix(psi, data)
    return float(out[0]) if single else out


def responsibilities_matrix(psi: MixtureParams, data: np.ndarray, exact_order: bool = True):
    """Posterior component probabilities ``(k, n)`` and per-point mixture log-density."""
    a = component_log_densities(psi, data)
    top = a.max(axis=0)
    e = np.exp(a - top)
    s = e.sum(axis=0)
    r = e / s
    lse = _col_logsumexp(a) if exact_order else top + np.log(s)
    return r, lse


def responsibilities(psi: MixtureParams, x) -> np.ndarray:
    """Posterior component probabilities; shape ``(k,)`` or ``(n, k)``."""
    data, single = to_batch(psi.family, x)
    r, _ = responsibilities_matrix(psi, data)
    return r[:, 0] if single else r.T


def risk_from_logdens(logdens: np.ndarray) -> float:
    # fsum is exactly rounded, so the mean is invariant to data order
    return -math.fsum(logdens.tolist()) / logdens.shape[0]


def empirical_risk(psi: MixtureParams, data) -> float:
    """Average negative log-likelihood of ``data`` under ``psi``."""
    data = psi.family.as_data(data)
    if data.shape[0] == 0:
        raise ValueError("empirical risk of an empty sample is undefined")
    return risk_from_logdens(log_mixture_density_matrix(psi, data))


def space_dim(family: Family, k: int, convention: str = "paper") -> int:
    """Dimension of the k-component parameter space: ``(m + 1) k`` (``paper``) or one less (``free``)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    d = (family.param_dim + 1) * k
    if convention == "paper":
        return d
    if convention == "free":
        return d - 1
    raise ValueError(f"unknown dimension convention {convention!r}")


def sample_mixture(psi: MixtureParams, n: int, rng: np.random.Generator, covariates=None):
    """Draw ``n`` observations; returns ``(data, labels)`` with 0-based labels."""
    if n < 1:
        raise ValueError("n must be >= 1")
    labels = rng.choice(psi.k, size=n, p=psi.weights)
    fam = psi.family
    if isinstance(fam, RegressionFamily):
        if covariates is None:
            raise ValueError("regression mixtures need covariates to sample from")
        u = np.asarray(covariates, dtype=float).reshape(n, fam.p)
        out = np.empty((n, fam.p + 1))
        for z, theta in enumerate(psi.components):
            idx = np.flatnonzero(labels == z)
            if idx.size:
                out[idx] = fam.sample(theta, rng, idx.size, u[idx])
        return out, labels
    if fam.name == "gaussian":
        out = np.empty((n, fam.dim))
    else:
        out = np.empty(n)
    for z, theta in enumerate(psi.components):
        idx = np.flatnonzero(labels == z)
        if idx.size:
            out[idx] = fam.sample(theta, rng, idx.size)
    return out, labels
