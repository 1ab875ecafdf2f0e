"""Mean-field free energy, the sinh-Poisson residual and the decorrelation-rate
experiment for correlation functions of the vortex gas."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidDensity, NoiseDominated
from .gibbs import (EnsembleParams, correlation_from_histogram, corrected_l2_distance,
                    lp_distance, run_chains)
from .kernels import FOUR_PI2, PairKernel
from .stats import Estimate, LinearFit, linear_fit


# ---------------------------------------------------------------------------
# free energy


@dataclass(frozen=True)
class DensityPair:
    """Two probability densities sampled on the same uniform square grid."""

    rho_plus: np.ndarray
    rho_minus: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.rho_plus, dtype=float)
        m = np.asarray(self.rho_minus, dtype=float)
        if p.shape != m.shape or p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise InvalidDensity("densities must share one square grid")
        for name, r in (("rho_plus", p), ("rho_minus", m)):
            if not np.all(np.isfinite(r)) or np.any(r < 0):
                raise InvalidDensity(f"{name} must be finite and nonnegative")
            if abs(float(np.mean(r)) - 1.0) > 1e-10:
                raise InvalidDensity(f"{name} averages to {float(np.mean(r))!r}, not 1")
        object.__setattr__(self, "rho_plus", p)
        object.__setattr__(self, "rho_minus", m)

    @classmethod
    def uniform(cls, n: int) -> "DensityPair":
        return cls(np.ones((n, n)), np.ones((n, n)))


def _xlogx(r: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = r[pos] * np.log(r[pos])
    return out


def coulomb_energy(q: np.ndarray) -> float:
    """``int q (G * q)`` for grid values ``q`` via the Fourier multiplier of ``G``."""
    n = q.shape[0]
    c = np.fft.fft2(q) / (n * n)
    k = np.fft.fftfreq(n, d=1.0 / n)
    lam = FOUR_PI2 * (k[:, None] ** 2 + k[None, :] ** 2)
    lam[0, 0] = np.inf
    return float(np.sum(np.abs(c) ** 2 / lam))


def free_energy(d: DensityPair, beta: float, kernel: PairKernel | None = None) -> float:
    """``(1/beta) int (rho+ log rho+ + rho- log rho-) + int q G*q`` with ``q = rho+ - rho-``.

    The entropy is integrated by the grid rule and the interaction in Fourier
    space; only the Green kernel is supported.
    """
    if not beta > 0:
        raise ValueError("beta must be > 0")
    if kernel is not None and kernel.kind != "green":
        raise ValueError("free energy uses the Green kernel")
    ent = float(np.mean(_xlogx(d.rho_plus) + _xlogx(d.rho_minus)))
    return ent / beta + coulomb_energy(d.rho_plus - d.rho_minus)


def random_band_limited(rng: np.random.Generator, n: int, band: int = 4) -> np.ndarray:
    """Real mean-zero trigonometric polynomial with ``|k|_inf <= band``,
    scaled to sup norm 1 on the grid."""
    c = np.zeros((n, n), dtype=complex)
    for k1 in range(-band, band + 1):
        for k2 in range(-band, band + 1):
            if k1 == 0 and k2 == 0:
                continue
            c[k1 % n, k2 % n] = rng.standard_normal() + 1j * rng.standard_normal()
    u = np.fft.ifft2(c).real
    u -= u.mean()
    return u / np.abs(u).max()


def perturbation_suite(beta: float, n_instances: int, seed: int, n: int = 32,
                       max_amplitude: float = 0.5) -> list[dict]:
    """``F`` at ``rho = 1 + eps u`` for random band-limited ``u`` with sup
    norm of ``eps u`` uniform in ``(0, max_amplitude]``."""
    rows = []
    for i in range(n_instances):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, i])))
        up = random_band_limited(rng, n)
        um = random_band_limited(rng, n)
        ep = max_amplitude * (1.0 - rng.random())
        em = max_amplitude * (1.0 - rng.random())
        d = DensityPair(1.0 + ep * up - ep * up.mean(), 1.0 + em * um - em * um.mean())
        rows.append({"instance": i, "eps_plus": ep, "eps_minus": em,
                     "free_energy": free_energy(d, beta)})
    return rows


def sinh_poisson_residual(psi: np.ndarray, beta: float, alpha: float) -> tuple[float, float]:
    """``(||lap psi - sinh(beta psi)/alpha||_2, |4 alpha^2 - int e^{-beta psi} int e^{beta psi}|)``.

    The Laplacian is taken spectrally on the uniform grid.
    """
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    psi = np.asarray(psi, dtype=float)
    n = psi.shape[0]
    k = np.fft.fftfreq(n, d=1.0 / n)
    lam = FOUR_PI2 * (k[:, None] ** 2 + k[None, :] ** 2)
    lap = np.fft.ifft2(-lam * np.fft.fft2(psi)).real
    r = lap - np.sinh(beta * psi) / alpha
    resid = math.sqrt(float(np.mean(r * r)))
    defect = abs(4 * alpha**2 - float(np.mean(np.exp(-beta * psi))) *
                 float(np.mean(np.exp(beta * psi))))
    return resid, defect


# ---------------------------------------------------------------------------
# rate experiment


@dataclass
class RateEntry:
    N: int
    distance: Estimate
    raw: Estimate
    noise_floor: float

    @property
    def signal_to_noise(self) -> float:
        return self.distance.value / self.noise_floor if self.noise_floor > 0 else math.inf


@dataclass
class RateSeries:
    beta: float
    p: float
    h: int
    l: int
    bins: int
    entries: list
    fit: LinearFit | None = None
    fit_log: LinearFit | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ns = [e.N for e in self.entries]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("N must be strictly increasing")

    @property
    def slope(self) -> float:
        return self.fit.slope

    def passed(self, max_slope: float = -0.35) -> bool:
        return (self.fit is not None and self.fit.slope <= max_slope
                and self.fit.slope + 2 * self.fit.slope_stderr < 0)

    def rows(self):
        for e in self.entries:
            yield {"N": e.N, "distance": e.distance.value, "stderr": e.distance.stderr,
                   "noise_floor": e.noise_floor}

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, ["N", "distance", "stderr", "noise_floor"],
                               lineterminator="\r\n")
            w.writeheader()
            for r in self.rows():
                w.writerow({k: (repr(float(v)) if isinstance(v, float) else v)
                            for k, v in r.items()})
        return path


def _debiased(est, p: float) -> tuple[Estimate, Estimate]:
    raw = lp_distance(est, p)
    if p == 2 and est.n_groups >= 3:
        return corrected_l2_distance(est), raw
    floor = raw.noise_floor or 0.0
    value = math.sqrt(max(raw.value**2 - floor**2, 0.0))
    se = raw.stderr * raw.value / value if value > 0 else raw.stderr
    return Estimate(value, se, raw.n_samples, "histogram-debiased", floor), raw


def rate_point(beta: float, N: int, p: float = 2.0, h: int = 1, l: int = 1,
               bins: int = 2, n_chains: int = 256, n_records: int = 400, seed: int = 0,
               burn_in: int | None = None, thin: int | None = None,
               p_uniform: float = 1.0, proposal_sigma: float = 0.1) -> RateEntry:
    """Debiased histogram distance of the ``(h, l)`` correlation function at one N.

    Sampling-noise bias is removed using the spread between independent
    chains (each chain is one group), subtracted in quadrature.
    """
    params = EnsembleParams(beta, N, h, l)
    res = run_chains(params, n_chains=n_chains, n_records=n_records, seed=seed,
                     burn_in=burn_in, thin=thin, p_uniform=p_uniform,
                     proposal_sigma=proposal_sigma, keep_positions=False,
                     histograms=[(h, l, bins)], bins_hint=bins)
    est = correlation_from_histogram(res.histograms[0], params)
    dist, raw = _debiased(est, p)
    return RateEntry(N, dist, raw, dist.noise_floor)


def fit_rate(entries, log_correction: bool = False) -> LinearFit | None:
    """Weighted fit of ``log d = c + s log N`` (optionally of
    ``log d - 1.5 log log N``), using only entries with a positive distance."""
    ok = [e for e in entries if e.distance.value > 0]
    if len(ok) < 2:
        return None
    x = np.log([e.N for e in ok])
    y = np.log([e.distance.value for e in ok])
    if log_correction:
        y = y - 1.5 * np.log(np.log([e.N for e in ok]))
    sig = [max(e.distance.stderr, 1e-300) / e.distance.value for e in ok]
    return linear_fit(x, y, sig)


def rate_experiment(beta: float, p: float = 2.0, hl=(1, 1), n_grid=(8, 16, 32, 64),
                    bins: int = 2, n_chains: int = 256, n_records: int = 400,
                    seed: int = 0, check_noise: bool = True, **chain_kw) -> RateSeries:
    """Distances ``||rho_hat - 1||_p`` over ``n_grid`` and their log-log slope.

    Each N uses its own seed stream ``(seed + N)``. Raises
    :class:`NoiseDominated` (carrying the series as ``.series``) when the
    debiased distance at the largest N is below twice its noise floor.
    """
    h, l = hl
    n_grid = sorted(int(n) for n in n_grid)
    entries = [rate_point(beta, N, p, h, l, bins, n_chains, n_records, seed + N, **chain_kw)
               for N in n_grid]
    series = RateSeries(beta, p, h, l, bins, entries, fit_rate(entries),
                        fit_rate(entries, log_correction=True),
                        {"n_chains": n_chains, "n_records": n_records, "seed": seed})
    if check_noise:
        last = entries[-1]
        if not last.distance.value >= 2.0 * last.noise_floor:
            err = NoiseDominated(f"distance {last.distance.value:.3g} below twice the noise "
                                 f"floor {last.noise_floor:.3g} at N={last.N}")
            err.series = series
            raise err
    return series
