"""Result carriers and small statistical helpers shared by every module."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo value with its standard error."""

    value: float
    stderr: float
    n_samples: int
    method: str = "mc"
    noise_floor: float | None = None

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError(f"stderr must be >= 0, got {self.stderr}")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")

    def within(self, target: float, n_sigma: float = 3.0, atol: float = 0.0) -> bool:
        return abs(self.value - target) <= n_sigma * self.stderr + atol

    def as_dict(self) -> dict:
        d = {"value": self.value, "stderr": self.stderr,
             "n_samples": self.n_samples, "method": self.method}
        if self.noise_floor is not None:
            d["noise_floor"] = self.noise_floor
        return d


def mean_estimate(samples, method: str = "mc") -> Estimate:
    """Sample mean and its standard error (assumes independent draws)."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Estimate(mean, se, n, method)


def jackknife(groups: np.ndarray, statistic) -> tuple[float, float]:
    """Delete-one jackknife over the leading axis of ``groups``.

    ``statistic`` maps an array of groups to a scalar. Returns the full-sample
    value and the jackknife standard error.
    """
    groups = np.asarray(groups)
    g = groups.shape[0]
    full = float(statistic(groups))
    if g < 2:
        return full, 0.0
    idx = np.arange(g)
    reps = np.array([statistic(groups[idx != i]) for i in range(g)], dtype=float)
    se = math.sqrt((g - 1) / g * float(np.sum((reps - reps.mean()) ** 2)))
    return full, se


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_stderr: float
    intercept_stderr: float = float("nan")
    residual_dof: int = 0

    def as_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "slope_stderr": self.slope_stderr,
                "intercept_stderr": self.intercept_stderr}


def linear_fit(x, y, sigma=None) -> LinearFit:
    """Least-squares line ``y = intercept + slope * x``.

    With ``sigma`` the fit is weighted by ``1/sigma**2`` and the parameter
    errors come from the weights (scaled by the reduced chi-square when that
    exceeds one). Without it, errors come from the residual scatter.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError("need at least two points")
    A = np.column_stack([np.ones(n), x])
    if sigma is None:
        w = np.ones(n)
    else:
        s = np.asarray(sigma, dtype=float)
        w = 1.0 / np.maximum(s, 1e-300) ** 2
    Aw = A * np.sqrt(w)[:, None]
    yw = y * np.sqrt(w)
    coef, *_ = np.linalg.lstsq(Aw, yw, rcond=None)
    resid = yw - Aw @ coef
    dof = n - 2
    cov = np.linalg.inv(Aw.T @ Aw)
    if sigma is None:
        scale = float(resid @ resid) / dof if dof > 0 else 0.0
    else:
        chi2 = float(resid @ resid) / dof if dof > 0 else 1.0
        scale = max(1.0, chi2)
    cov = cov * scale
    return LinearFit(float(coef[1]), float(coef[0]),
                     math.sqrt(max(cov[1, 1], 0.0)),
                     math.sqrt(max(cov[0, 0], 0.0)), dof)


def neumaier_add(total: np.ndarray, comp: np.ndarray, term: np.ndarray):
    """One step of Neumaier compensated summation, elementwise and in place."""
    t = total + term
    big = np.abs(total) >= np.abs(term)
    comp += np.where(big, (total - t) + term, (term - t) + total)
    total[...] = t


@dataclass
class Verdict:
    """Pass/fail summary of one randomized check."""

    check: str
    instances: int
    violations: int
    worst_margin: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def as_dict(self) -> dict:
        d = {"check": self.check, "instances": self.instances,
             "violations": self.violations, "worst_margin": self.worst_margin,
             "passed": self.passed}
        d.update(self.details)
        return d
