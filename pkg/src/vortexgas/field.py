"""Spectral sampling of the smooth Gaussian field and its functionals.

The field ``F`` has covariance kernel ``V_m``: every Fourier coefficient
``c_k`` (``0 < |k|_inf <= K``) is a complex Gaussian with
``E|c_k|^2 = m^2 / (4 pi^2 |k|^2 (m^2 + 4 pi^2 |k|^2))`` and ``c_{-k} = conj(c_k)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadRange, InvalidSpec
from .kernels import KernelSpec, half_plane_modes, mode_variances, vm_diag
from .stats import Estimate, LinearFit, linear_fit, mean_estimate


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


@dataclass(frozen=True)
class FieldSample:
    """One realisation of the smooth field.

    ``coeffs[i]`` is the coefficient of the half-plane wavevector
    ``(k1[i], k2[i])`` from :func:`half_plane_modes`; the coefficient of
    ``-k`` is its conjugate. Grid values are synthesised on first access.
    """

    spec: KernelSpec
    seed: int
    coeffs: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def wavevectors(self) -> tuple[np.ndarray, np.ndarray]:
        k1, k2, _ = half_plane_modes(self.spec.cutoff)
        return k1, k2

    @property
    def grid_values(self) -> np.ndarray:
        if "grid" not in self._cache:
            self._cache["grid"] = synthesize(self.spec, self.coeffs)
        return self._cache["grid"]

    def full_coeffs(self) -> dict[tuple[int, int], complex]:
        """Map ``k -> c_k`` over all retained wavevectors, both half-planes."""
        k1, k2 = self.wavevectors
        out = {}
        for a, b, c in zip(k1.tolist(), k2.tolist(), self.coeffs.tolist()):
            out[(a, b)] = c
            out[(-a, -b)] = c.conjugate()
        return out

    def l2_squared(self) -> float:
        """``||F||_2^2`` by Parseval; equals the grid quadrature exactly."""
        c = self.coeffs
        return 2.0 * float(np.sum(c.real**2 + c.imag**2))

    def to_csv(self, path) -> Path:
        path = Path(path)
        k1, k2 = self.wavevectors
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["k1", "k2", "re", "im"])
            for a, b, c in zip(k1.tolist(), k2.tolist(), self.coeffs.tolist()):
                w.writerow([a, b, repr(c.real), repr(c.imag)])
        return path


def synthesize(spec: KernelSpec, coeffs: np.ndarray) -> np.ndarray:
    """Grid values ``F(i/n, j/n) = sum_k c_k exp(2 pi i k.x)`` by inverse real FFT."""
    n = spec.grid_n
    if n < 2 * spec.cutoff + 2:
        raise InvalidSpec(f"grid_n={n} cannot represent cutoff {spec.cutoff}")
    k1, k2, _ = half_plane_modes(spec.cutoff)
    A = np.zeros((n, n // 2 + 1), dtype=complex)
    A[k1 % n, k2] = coeffs
    on_axis = k2 == 0
    A[(-k1[on_axis]) % n, 0] = np.conj(coeffs[on_axis])
    return np.fft.irfft2(A, s=(n, n)) * (n * n)


def sample_field(spec: KernelSpec, seed: int) -> FieldSample:
    """Draw one field realisation; a pure function of ``(spec, seed)``."""
    if spec.grid_n < 2 * spec.cutoff + 2:
        raise InvalidSpec(f"grid_n={spec.grid_n} cannot represent cutoff {spec.cutoff}")
    sd = np.sqrt(0.5 * mode_variances(spec))
    z = _rng(seed).standard_normal((2, sd.size))
    coeffs = sd * z[0] + 1j * (sd * z[1])
    coeffs.flags.writeable = False
    return FieldSample(spec, int(seed), coeffs)


def zero_field(spec: KernelSpec) -> FieldSample:
    k1, _, _ = half_plane_modes(spec.cutoff)
    return FieldSample(spec, 0, np.zeros(k1.size, dtype=complex))


# ---------------------------------------------------------------------------
# functionals


def lp_norm(sample: FieldSample, p: float) -> float:
    """``(int |F|^p dx)^(1/p)`` by the uniform grid rule."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if p == 2:
        return math.sqrt(sample.l2_squared())
    g = np.abs(sample.grid_values)
    if p == 1:
        return float(np.mean(g))
    return float(np.mean(g**p)) ** (1.0 / p)


def e_factor(sample: FieldSample, sign: int, beta: float, n_vortices: int) -> complex:
    """``int exp(i sign sqrt(beta/N) F(x)) dx`` by the uniform grid rule."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if n_vortices < 2 or n_vortices % 2:
        raise ValueError("n_vortices must be even and >= 2")
    a = sign * math.sqrt(beta / n_vortices)
    g = sample.grid_values
    return complex(np.mean(np.cos(a * g)), np.mean(np.sin(a * g)))


def gauss_weight(sample: FieldSample, beta: float, n_vortices: int) -> float:
    """``exp(-(beta / 2N) ||F||_2^2)``."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    return math.exp(-beta / (2.0 * n_vortices) * sample.l2_squared())


@dataclass(frozen=True)
class FieldFunctionals:
    lp_norms: dict
    e_plus: complex
    e_minus: complex
    gauss_weight: float


def functionals(sample: FieldSample, beta: float, n_vortices: int,
                ps=(2, 3, 4)) -> FieldFunctionals:
    ep = e_factor(sample, 1, beta, n_vortices)
    return FieldFunctionals({p: lp_norm(sample, p) for p in ps}, ep, ep.conjugate(),
                            gauss_weight(sample, beta, n_vortices))


def analytic_exp_moment(alpha: float, spec: KernelSpec) -> float:
    """Closed form of ``E exp(-alpha ||F||_2^2)`` for the truncated field:
    ``exp(-1/2 sum_k log(1 + 2 alpha v_k))`` over all nonzero modes."""
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    v = mode_variances(spec)
    return math.exp(-math.fsum(np.log1p(2.0 * alpha * v)))


@dataclass
class ExpMomentDiffReport:
    alpha: float
    alpha2: float
    masses: list
    differences: list
    ratios: list
    fit: LinearFit | None
    bound_constant: float = 10.0

    @property
    def bounded(self) -> bool:
        return bool(self.ratios) and max(self.ratios) <= self.bound_constant

    @property
    def no_increasing_trend(self) -> bool:
        if self.fit is None:
            return True
        return self.fit.slope - 2.0 * self.fit.slope_stderr <= 0.0

    def rows(self):
        for m, d, r in zip(self.masses, self.differences, self.ratios):
            yield {"m": m, "alpha": self.alpha, "alpha2": self.alpha2,
                   "difference": d, "ratio": r}


def exp_moment_diff_check(alpha: float, alpha2: float, specs) -> ExpMomentDiffReport:
    """Difference ``E e^{-a||F||^2} - E e^{-a'||F||^2}`` against
    ``(a' - a) m^{-a/2pi} log m`` on a grid of masses (one spec per mass)."""
    if not alpha > 0:
        raise BadRange(f"alpha must be > 0, got {alpha}")
    if alpha2 < alpha:
        raise BadRange(f"alpha2={alpha2} < alpha={alpha}")
    specs = list(specs)
    masses, diffs, ratios = [], [], []
    for spec in specs:
        m = spec.mass
        d = 0.0 if alpha2 == alpha else (analytic_exp_moment(alpha, spec)
                                         - analytic_exp_moment(alpha2, spec))
        scale = (alpha2 - alpha) * m ** (-alpha / (2 * math.pi)) * math.log(m)
        masses.append(m)
        diffs.append(d)
        ratios.append(d / scale if scale > 0 else 0.0)
    fit = None
    if len(masses) >= 3 and alpha2 > alpha:
        fit = linear_fit(np.log(masses), ratios)
    return ExpMomentDiffReport(alpha, alpha2, masses, diffs, ratios, fit)


# ---------------------------------------------------------------------------
# moment studies


@dataclass
class MomentRow:
    m: float
    alpha: float
    analytic: float
    mc: Estimate

    def as_csv_row(self) -> dict:
        return {"m": self.m, "alpha": self.alpha, "analytic": self.analytic,
                "mc_mean": self.mc.value, "mc_stderr": self.mc.stderr,
                "n_samples": self.mc.n_samples}


MOMENT_COLUMNS = ["m", "alpha", "analytic", "mc_mean", "mc_stderr", "n_samples"]


def l2_squared_samples(spec: KernelSpec, n_samples: int, seed: int) -> np.ndarray:
    """Independent draws of ``||F||_2^2`` for seeds ``seed, seed + 1, ...``.

    Only the coefficient moduli matter here: ``|c_k|^2 / v_k`` is a standard
    exponential variable, so ``||F||_2^2 = 2 sum_k v_k X_k`` is drawn directly
    without synthesising phases or grid values.
    """
    v = mode_variances(spec)
    out = np.empty(n_samples)
    for i in range(n_samples):
        x = _rng(seed + i).standard_exponential(v.size)
        out[i] = 2.0 * float(v @ x)
    return out


def l2_moment_study(masses, n_samples: int, seed: int, cutoff_for=None):
    """``E ||F_m||_2^2`` by Monte Carlo next to its exact value ``V_m(0,0)``.

    Returns rows ``(m, mc Estimate, vm_diag)`` and the fit of the MC means
    against ``log m``.
    """
    rows = []
    for i, m in enumerate(masses):
        spec = KernelSpec.for_mass(m) if cutoff_for is None else cutoff_for(m)
        x = l2_squared_samples(spec, n_samples, seed + i * n_samples)
        rows.append((float(m), mean_estimate(x), vm_diag(spec, check=False)))
    fit = linear_fit(np.log([r[0] for r in rows]), [r[1].value for r in rows])
    return rows, fit


def exp_moment_study(masses, alpha: float, n_samples: int, seed: int,
                     cutoff_for=None) -> tuple[list[MomentRow], LinearFit]:
    """MC and closed-form ``E exp(-alpha ||F_m||_2^2)`` per mass, plus the fit
    of ``log(closed form)`` against ``log m``."""
    rows = []
    for i, m in enumerate(masses):
        spec = KernelSpec.for_mass(m) if cutoff_for is None else cutoff_for(m)
        x = l2_squared_samples(spec, n_samples, seed + i * n_samples)
        rows.append(MomentRow(float(m), alpha, analytic_exp_moment(alpha, spec),
                              mean_estimate(np.exp(-alpha * x))))
    fit = linear_fit(np.log([r.m for r in rows]), np.log([r.analytic for r in rows]))
    return rows, fit
