"""Canonical Gibbs ensemble of N/2 positive and N/2 negative vortices.

The density on configurations is proportional to ``exp(-(beta/N) H_N)`` with
``H_N = sum_{i<j} xi_i xi_j G(x_i - x_j)``: like signs repel, opposite signs
attract. ``beta`` is the mean-field scaled inverse temperature.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from .errors import CoincidentVortices, InsufficientSamples, InvalidSpec, NonFiniteEnergy
from .kernels import MIN_SEPARATION, PairKernel, wrap
from .parallel import ordered_map
from .stats import Estimate, mean_estimate


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


@dataclass(frozen=True)
class EnsembleParams:
    beta: float
    n_vortices: int
    h: int = 0
    l: int = 0

    def __post_init__(self):
        N = self.n_vortices
        if int(N) != N or N < 2 or N % 2:
            raise InvalidSpec(f"n_vortices must be even and >= 2, got {N}")
        if not 0 <= self.beta < 4 * math.pi * N:
            raise InvalidSpec(f"beta must lie in [0, 4 pi N), got {self.beta}")
        if self.h < 0 or self.l < 0 or self.h > N // 2 or self.l > N // 2:
            raise InvalidSpec(f"need 0 <= h, l <= N/2, got h={self.h}, l={self.l}")

    @property
    def coupling(self) -> float:
        """``beta / N``, the prefactor of the Hamiltonian in the Gibbs weight."""
        return self.beta / self.n_vortices

    def signs(self) -> np.ndarray:
        half = self.n_vortices // 2
        return np.concatenate([np.ones(half), -np.ones(half)])


@dataclass(frozen=True)
class VortexConfig:
    pos_plus: np.ndarray
    pos_minus: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pos_plus, dtype=float).reshape(-1, 2)
        m = np.asarray(self.pos_minus, dtype=float).reshape(-1, 2)
        if p.shape != m.shape or p.shape[0] < 1:
            raise InvalidSpec("need equal, nonzero numbers of + and - vortices")
        object.__setattr__(self, "pos_plus", np.mod(p, 1.0))
        object.__setattr__(self, "pos_minus", np.mod(m, 1.0))

    @property
    def n_vortices(self) -> int:
        return 2 * self.pos_plus.shape[0]

    @property
    def positions(self) -> np.ndarray:
        return np.concatenate([self.pos_plus, self.pos_minus])

    @property
    def signs(self) -> np.ndarray:
        half = self.pos_plus.shape[0]
        return np.concatenate([np.ones(half), -np.ones(half)])

    @classmethod
    def uniform(cls, n_vortices: int, rng: np.random.Generator) -> "VortexConfig":
        x = rng.random((n_vortices, 2))
        return cls(x[: n_vortices // 2], x[n_vortices // 2:])

    @classmethod
    def from_positions(cls, x: np.ndarray) -> "VortexConfig":
        half = x.shape[0] // 2
        return cls(x[:half], x[half:])

    def translated(self, shift) -> "VortexConfig":
        return VortexConfig(self.pos_plus + shift, self.pos_minus + shift)

    def swapped(self) -> "VortexConfig":
        return VortexConfig(self.pos_minus, self.pos_plus)


# ---------------------------------------------------------------------------
# energies


def _pair_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def batch_hamiltonian(x: np.ndarray, signs: np.ndarray, kernel: PairKernel,
                      check: bool = True) -> np.ndarray:
    """``sum_{i<j} s_i s_j K(x_i - x_j)`` for a batch ``x`` of shape (B, N, 2)."""
    x = np.asarray(x, dtype=float)
    i, j = _pair_index(x.shape[-2])
    d = wrap(x[..., i, :] - x[..., j, :])
    if check and kernel.singular:
        r = np.hypot(d[..., 0], d[..., 1])
        if r.size and float(r.min()) < MIN_SEPARATION:
            raise CoincidentVortices(f"pair distance {float(r.min()):.3g} below "
                                     f"{MIN_SEPARATION:g}")
    return kernel(d) @ (signs[i] * signs[j])


def hamiltonian(cfg: VortexConfig, kernel=None):
    """Interaction energy ``H_N`` of a configuration.

    ``kernel`` is a :class:`PairKernel` (default: the full Green function) or a
    ``(smooth, yukawa)`` pair, in which case ``(H_V, H_W)`` is returned.
    """
    if kernel is None:
        kernel = PairKernel("green")
    x = cfg.positions[None]
    if isinstance(kernel, tuple):
        hv = batch_hamiltonian(x, cfg.signs, kernel[0])[0]
        hw = batch_hamiltonian(x, cfg.signs, kernel[1])[0]
        return float(hv), float(hw)
    return float(batch_hamiltonian(x, cfg.signs, kernel)[0])


def uniform_energies(n_vortices: int, kernel: PairKernel, n_samples: int, seed: int,
                     batch: int = 2048) -> np.ndarray:
    """``H`` under the kernel for i.i.d. uniform configurations.

    Configurations with a pair closer than the coincidence scale (probability
    ~1e-16 per pair) are redrawn by the same stream.
    """
    signs = np.concatenate([np.ones(n_vortices // 2), -np.ones(n_vortices // 2)])
    rng = _rng(seed, n_vortices)
    out = np.empty(n_samples)
    per = max(1, min(batch, 4_000_000 // max(1, n_vortices * n_vortices)))
    done = 0
    while done < n_samples:
        b = min(per, n_samples - done)
        x = rng.random((b, n_vortices, 2))
        try:
            out[done:done + b] = batch_hamiltonian(x, signs, kernel)
        except CoincidentVortices:
            continue
        done += b
    return out


def partition_estimate(params: EnsembleParams, kernel: PairKernel | None = None,
                       n_samples: int = 10_000, seed: int = 0) -> Estimate:
    """Plain Monte Carlo of ``Z = E_uniform exp(-(beta/N) H)``."""
    if params.beta == 0:
        return Estimate(1.0, 0.0, max(1, n_samples), "exact")
    kernel = PairKernel("green") if kernel is None else kernel
    h = uniform_energies(params.n_vortices, kernel, n_samples, seed)
    w = np.exp(-params.coupling * h)
    if not np.all(np.isfinite(w)):
        raise NonFiniteEnergy("Boltzmann weight overflowed")
    return mean_estimate(w, "uniform-mc")


# ---------------------------------------------------------------------------
# Metropolis sampler


def wrapped_gaussian_logpdf(delta, sigma: float, images: int = 4) -> np.ndarray:
    """Log density on the unit torus of a Gaussian step wrapped modulo 1."""
    d = wrap(delta)
    n = np.arange(-images, images + 1)
    dens = np.ones(d.shape[:-1])
    for ax in range(2):
        z = d[..., ax, None] + n
        dens = dens * np.sum(np.exp(-0.5 * (z / sigma) ** 2), axis=-1)
    return np.log(dens) - 2 * math.log(sigma * math.sqrt(2 * math.pi))


def proposal_logpdf(old, new, sigma: float, p_uniform: float) -> np.ndarray:
    """Log density of proposing ``new`` from ``old`` for one vortex."""
    g = wrapped_gaussian_logpdf(np.asarray(new) - np.asarray(old), sigma)
    return np.log(p_uniform + (1.0 - p_uniform) * np.exp(g))


def log_target(cfg: VortexConfig, beta: float, kernel: PairKernel | None = None) -> float:
    """Unnormalised log Gibbs density ``-(beta/N) H``."""
    return -beta / cfg.n_vortices * hamiltonian(cfg, kernel)


def metropolis_log_acceptance(a: VortexConfig, b: VortexConfig, beta: float,
                              kernel: PairKernel | None = None) -> float:
    """``log min(1, pi(b)/pi(a))``; the proposal is symmetric."""
    return min(0.0, log_target(b, beta, kernel) - log_target(a, beta, kernel))


def bin_index(coords: np.ndarray, bins: int) -> np.ndarray:
    """Index of the cell ``[(b - 1/2)/bins, (b + 1/2)/bins)`` (mod 1) holding
    each coordinate.

    Centring cells on the nodes keeps the cell at zero separation intact;
    with cells anchored at 0 the symmetry ``d -> -d`` of pair densities makes
    the cells around the origin carry equal mass and hides the signal.
    """
    idx = np.floor(np.mod(coords * bins + 0.5, bins)).astype(np.int64)
    np.minimum(idx, bins - 1, out=idx)
    return idx


@dataclass
class SeparationHistogram:
    """Per-chain bin counts of the tagged-vortex coordinate used for a
    correlation function.

    ``(h, l) = (1, 0)``: positions of + vortices. ``(1, 1)``: separations
    ``y_i - z_j`` over all + / - pairs. ``(2, 0)``: ``y_i - y_j`` over
    ordered pairs ``i != j``. Bins are centred on the grid nodes ``b / bins``
    (see :func:`bin_index`), so bin 0 is the cell around zero separation.
    """

    h: int
    l: int
    bins: int
    n_chains: int
    counts: np.ndarray = None
    n_records: int = 0

    def __post_init__(self):
        if (self.h, self.l) not in ((1, 0), (1, 1), (2, 0)):
            raise InvalidSpec(f"(h, l) = ({self.h}, {self.l}) not supported")
        if self.bins < 1:
            raise InvalidSpec("bins must be >= 1")
        if self.counts is None:
            self.counts = np.zeros((self.n_chains, self.bins, self.bins), dtype=np.int64)

    def coordinates(self, x: np.ndarray) -> np.ndarray:
        """Tagged coordinates for positions ``x`` of shape (C, N, 2)."""
        half = x.shape[1] // 2
        y, z = x[:, :half], x[:, half:]
        if (self.h, self.l) == (1, 0):
            return y
        if (self.h, self.l) == (1, 1):
            return (y[:, :, None, :] - z[:, None, :, :]).reshape(x.shape[0], -1, 2)
        d = y[:, :, None, :] - y[:, None, :, :]
        off = ~np.eye(half, dtype=bool)
        return d[:, off, :]

    def pairs_per_record(self, n_vortices: int) -> int:
        half = n_vortices // 2
        return {(1, 0): half, (1, 1): half * half, (2, 0): half * (half - 1)}[(self.h, self.l)]

    def update(self, x: np.ndarray):
        idx = bin_index(self.coordinates(x), self.bins)
        flat = idx[..., 0] * self.bins + idx[..., 1]
        flat += (np.arange(x.shape[0]) * self.bins * self.bins)[:, None]
        cnt = np.bincount(flat.ravel(), minlength=x.shape[0] * self.bins**2)
        self.counts += cnt.reshape(self.counts.shape)
        self.n_records += 1

    def merge(self, other: "SeparationHistogram") -> "SeparationHistogram":
        if other.n_records != self.n_records:
            raise ValueError("chain blocks recorded different numbers of samples")
        return SeparationHistogram(self.h, self.l, self.bins,
                                   self.n_chains + other.n_chains,
                                   np.concatenate([self.counts, other.counts]),
                                   self.n_records)


@dataclass
class ChainResult:
    """Output of a block of Metropolis chains.

    ``positions`` (if kept) has shape (chains, records, N, 2), + vortices first.
    """

    params: EnsembleParams
    positions: np.ndarray | None
    acceptance: float
    n_moves: int
    proposal_sigma: float
    p_uniform: float
    seed: int
    histograms: list = field(default_factory=list)

    @property
    def n_chains(self) -> int:
        return self.positions.shape[0] if self.positions is not None else (
            self.histograms[0].n_chains if self.histograms else 1)

    def configs(self, chain: int = 0) -> list[VortexConfig]:
        return [VortexConfig.from_positions(x) for x in self.positions[chain]]

    def to_csv(self, path, chain: int = 0) -> Path:
        """Checkpoint one chain as ``step,sign,index,x,y`` rows."""
        path = Path(path)
        half = self.params.n_vortices // 2
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["step", "sign", "index", "x", "y"])
            for step, x in enumerate(self.positions[chain]):
                for i, (a, b) in enumerate(x.tolist()):
                    sign = 1 if i < half else -1
                    w.writerow([step, sign, i % half, repr(a), repr(b)])
        return path


def _run_block(block: int, params: EnsembleParams, kernel: PairKernel, n_chains: int,
               n_records: int, proposal_sigma: float, p_uniform: float, seed: int,
               burn_in: int, thin: int, keep_positions: bool, hist_specs: tuple):
    N = params.n_vortices
    rng = _rng(seed, block)
    signs = params.signs()
    x = rng.random((n_chains, N, 2))
    coupling = params.coupling
    interacting = coupling > 0
    chains = np.arange(n_chains)
    if interacting:
        i, j = np.triu_indices(N, k=1)
        g = np.zeros((n_chains, N, N))
        d = wrap(x[:, i, :] - x[:, j, :])
        gij = kernel(d)
        g[:, i, j] = gij
        g[:, j, i] = gij
    hists = [SeparationHistogram(h, l, b, n_chains) for h, l, b in hist_specs]
    pos = np.empty((n_chains, n_records, N, 2)) if keep_positions else None
    accepted = 0
    attempted = 0

    def step():
        nonlocal accepted, attempted
        k = rng.integers(N, size=n_chains)
        old = x[chains, k]
        use_uniform = rng.random(n_chains) < p_uniform
        gauss = old + proposal_sigma * rng.standard_normal((n_chains, 2))
        new = np.mod(np.where(use_uniform[:, None], rng.random((n_chains, 2)), gauss), 1.0)
        log_u = np.log(rng.random(n_chains))
        attempted += n_chains
        if not interacting:
            x[chains, k] = new
            accepted += n_chains
            return
        dd = wrap(new[:, None, :] - x)
        r = np.hypot(dd[..., 0], dd[..., 1])
        r[chains, k] = 1.0
        ok = r.min(axis=1) >= MIN_SEPARATION
        dd[chains, k] = 0.25
        gnew = kernel(dd)
        gnew[chains, k] = 0.0
        dh = signs[k] * np.einsum("cj,j->c", gnew - g[chains, k], signs)
        if not np.all(np.isfinite(dh[ok])):
            raise NonFiniteEnergy("energy change is not finite")
        acc = ok & (log_u < -coupling * np.where(ok, dh, 0.0))
        if np.any(acc):
            c = chains[acc]
            kk = k[acc]
            x[c, kk] = new[acc]
            g[c, kk, :] = gnew[acc]
            g[c, :, kk] = gnew[acc]
            accepted += int(acc.sum())

    for _ in range(burn_in):
        step()
    accepted = attempted = 0
    for r_ in range(n_records):
        for _ in range(thin):
            step()
        if keep_positions:
            pos[:, r_] = x
        for h in hists:
            h.update(x)
    return pos, accepted, attempted, hists


def run_chains(params: EnsembleParams, kernel: PairKernel | None = None, *,
               n_chains: int = 1, n_records: int = 100, proposal_sigma: float = 0.1,
               p_uniform: float = 0.5, seed: int = 0, burn_in: int | None = None,
               thin: int | None = None, keep_positions: bool = True,
               histograms=(), bins_hint: int = 8, block_size: int = 64,
               workers: int | None = None) -> ChainResult:
    """Independent single-vortex Metropolis chains.

    Each move picks a vortex uniformly; with probability ``p_uniform`` it
    proposes a uniform new position, otherwise a wrapped Gaussian step of
    width ``proposal_sigma``. Both proposals are symmetric, so the
    Metropolis rule gives detailed balance for ``exp(-(beta/N) H)``. Moves
    that bring two vortices closer than the coincidence scale are rejected.

    ``burn_in`` and ``thin`` count single-vortex moves (defaults
    ``10 N bins_hint`` and ``N``). Chains run in blocks of ``block_size``, each
    block with its own RNG stream keyed by ``(seed, block)``, so results do
    not depend on the number of workers. ``histograms`` lists ``(h, l, bins)``
    accumulators updated at every record.
    """
    if not 0 < proposal_sigma < 0.5:
        raise InvalidSpec(f"proposal_sigma must lie in (0, 0.5), got {proposal_sigma}")
    if not 0 <= p_uniform <= 1:
        raise InvalidSpec("p_uniform must lie in [0, 1]")
    kernel = PairKernel("green") if kernel is None else kernel
    N = params.n_vortices
    burn_in = 10 * N * bins_hint if burn_in is None else int(burn_in)
    thin = N if thin is None else max(1, int(thin))
    sizes = [min(block_size, n_chains - s) for s in range(0, n_chains, block_size)]
    fn = partial(_block_entry, params=params, kernel=kernel, n_records=n_records,
                 proposal_sigma=proposal_sigma, p_uniform=p_uniform, seed=seed,
                 burn_in=burn_in, thin=thin, keep_positions=keep_positions,
                 hist_specs=tuple(tuple(h) for h in histograms))
    out = ordered_map(fn, list(enumerate(sizes)), workers)
    pos = np.concatenate([o[0] for o in out]) if keep_positions else None
    acc = sum(o[1] for o in out)
    att = sum(o[2] for o in out)
    hists = []
    for k in range(len(histograms)):
        h = out[0][3][k]
        for o in out[1:]:
            h = h.merge(o[3][k])
        hists.append(h)
    return ChainResult(params, pos, acc / att if att else float("nan"),
                       att, proposal_sigma, p_uniform, seed, hists)


def _block_entry(item, **kw):
    block, size = item
    return _run_block(block, n_chains=size, **kw)


def mcmc_chain(params: EnsembleParams, kernel: PairKernel | None = None,
               n_steps: int = 1000, proposal_sigma: float = 0.1, seed: int = 0,
               p_uniform: float = 0.5, burn_in: int | None = None,
               thin: int = 1) -> ChainResult:
    """A single chain of ``n_steps`` recorded moves (thinned by ``thin``)."""
    return run_chains(params, kernel, n_chains=1, n_records=n_steps,
                      proposal_sigma=proposal_sigma, p_uniform=p_uniform, seed=seed,
                      burn_in=burn_in, thin=thin, workers=1)


# ---------------------------------------------------------------------------
# correlation functions


@dataclass
class CorrelationEstimate:
    """Histogram estimate of a reduced correlation function.

    ``group_counts`` holds bin counts per independent group (a chain, or a
    batch of one chain); the estimate is normalised so its grid average is 1.
    """

    params: EnsembleParams
    bins: int
    group_counts: np.ndarray
    pairs_per_group: np.ndarray

    @property
    def n_groups(self) -> int:
        return self.group_counts.shape[0]

    @property
    def total_pairs(self) -> int:
        return int(self.pairs_per_group.sum())

    @property
    def values(self) -> np.ndarray:
        return self.group_counts.sum(axis=0) * (self.bins**2 / self.total_pairs)

    def group_densities(self) -> np.ndarray:
        return self.group_counts * (self.bins**2 / self.pairs_per_group)[:, None, None]

    @property
    def stderr(self) -> np.ndarray:
        if self.n_groups < 2:
            return np.zeros((self.bins, self.bins))
        return np.std(self.group_densities(), axis=0, ddof=1) / math.sqrt(self.n_groups)

    def nominal_noise_floor(self) -> float:
        """``sqrt(bins^2 / pairs)``: L2 floor if every pair were independent."""
        return math.sqrt((self.bins**2 - 1) / self.total_pairs)

    def to_csv(self, path) -> Path:
        path = Path(path)
        v, s = self.values, self.stderr
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(["bin_i", "bin_j", "value", "stderr"])
            for i in range(self.bins):
                for j in range(self.bins):
                    w.writerow([i, j, repr(float(v[i, j])), repr(float(s[i, j]))])
        return path


def correlation_from_histogram(hist: SeparationHistogram, params: EnsembleParams,
                               min_per_bin: float = 10.0) -> CorrelationEstimate:
    pairs = hist.pairs_per_record(params.n_vortices) * hist.n_records
    est = CorrelationEstimate(params, hist.bins, hist.counts.copy(),
                              np.full(hist.n_chains, pairs, dtype=np.int64))
    if est.total_pairs / hist.bins**2 < min_per_bin:
        raise InsufficientSamples(f"{est.total_pairs} samples over {hist.bins**2} bins")
    return est


def correlation_estimate(chain: ChainResult, params: EnsembleParams | None = None,
                         bins: int = 16, n_batches: int | None = None,
                         min_per_bin: float = 10.0) -> CorrelationEstimate:
    """Histogram estimate of the ``(h, l)`` correlation function of ``params``.

    Uses every tagged pair in every recorded configuration. Records of each
    chain are split into ``n_batches`` contiguous batches (default: 1 per
    chain when there are several chains, 20 for a single chain) for the error
    estimate.
    """
    params = chain.params if params is None else params
    pos = chain.positions
    C, R = pos.shape[:2]
    if n_batches is None:
        n_batches = 1 if C > 1 else min(20, R)
    edges = np.linspace(0, R, n_batches + 1).astype(int)
    counts, pairs = [], []
    for c in range(C):
        for b in range(n_batches):
            seg = pos[c, edges[b]:edges[b + 1]]
            if seg.shape[0] == 0:
                continue
            h = SeparationHistogram(params.h, params.l, bins, seg.shape[0])
            h.update(seg)
            counts.append(h.counts.sum(axis=0))
            pairs.append(h.pairs_per_record(params.n_vortices) * seg.shape[0])
    est = CorrelationEstimate(params, bins, np.array(counts), np.array(pairs, dtype=np.int64))
    if est.total_pairs / bins**2 < min_per_bin:
        raise InsufficientSamples(f"{est.total_pairs} samples over {bins**2} bins")
    return est


def _lp(dens: np.ndarray, p: float) -> float:
    return float(np.mean(np.abs(dens - 1.0) ** p)) ** (1.0 / p)


def lp_distance(est: CorrelationEstimate, p: float = 2.0) -> Estimate:
    """Grid ``L^p`` distance of the estimate from 1 with a jackknife error.

    ``noise_floor`` is the L2 size of the sampling noise,
    ``sqrt(mean_bins Var(bin))`` from the spread between groups; the raw
    distance is biased upward by about this amount in quadrature.
    """
    if not p >= 1:
        raise ValueError("p must be >= 1")
    w = est.pairs_per_group.astype(float)
    value = _lp(est.values, p)
    if est.n_groups >= 2:
        reps = []
        G = est.n_groups
        tot = est.group_counts.sum(axis=0)
        for g in range(G):
            reps.append(_lp((tot - est.group_counts[g]) * (est.bins**2 / (w.sum() - w[g])), p))
        reps = np.array(reps)
        se = math.sqrt((G - 1) / G * float(np.sum((reps - reps.mean()) ** 2)))
        floor = math.sqrt(float(np.mean(est.stderr**2)))
    else:
        se = 0.0
        floor = est.nominal_noise_floor()
    return Estimate(value, se, est.total_pairs, f"histogram-L{p:g}", noise_floor=floor)


def corrected_l2_distance(est: CorrelationEstimate) -> Estimate:
    """L2 distance with the sampling-noise bias removed in quadrature.

    ``d^2 = ||rho_hat - 1||^2 - mean_bins Var(rho_hat_bin)``, the unbiased
    estimate of ``||rho - 1||^2`` when groups are independent; the result is
    ``sqrt(max(d^2, 0))`` with a delete-one-group jackknife error.
    """
    if est.n_groups < 3:
        raise InsufficientSamples("need at least 3 independent groups")
    B2 = est.bins**2
    counts = est.group_counts.astype(float)
    pairs = est.pairs_per_group.astype(float)

    def stat(sel):
        c = counts[sel]
        w = pairs[sel]
        mean = c.sum(axis=0) * (B2 / w.sum())
        dens = c * (B2 / w)[:, None, None]
        var = np.var(dens, axis=0, ddof=1) / c.shape[0]
        return float(np.mean((mean - 1.0) ** 2) - np.mean(var)), float(np.mean(var))

    G = est.n_groups
    full_sq, floor_sq = stat(np.ones(G, dtype=bool))
    reps = []
    for g in range(G):
        sel = np.ones(G, dtype=bool)
        sel[g] = False
        reps.append(math.sqrt(max(stat(sel)[0], 0.0)))
    reps = np.array(reps)
    se = math.sqrt((G - 1) / G * float(np.sum((reps - reps.mean()) ** 2)))
    return Estimate(math.sqrt(max(full_sq, 0.0)), se, est.total_pairs,
                    "histogram-L2-debiased", noise_floor=math.sqrt(floor_sq))


def pair_partition_quadrature(beta: float, green=None, epsabs: float = 1e-11,
                              epsrel: float = 1e-10) -> float:
    """``Z`` for one + and one - vortex by adaptive quadrature.

    Translation invariance reduces the integral to ``int exp((beta/2) G(d)) dd``
    over the centred unit square; the square's symmetry reduces it further to
    8 copies of the triangle ``0 <= theta <= pi/4``, integrated in polar
    coordinates so the logarithmic singularity at ``d = 0`` becomes the
    integrable factor ``r^{1 - beta/(4 pi)}``.
    """
    from scipy.integrate import dblquad

    from .kernels import green_exact

    g = green_exact if green is None else green

    def integrand(r, theta):
        if r == 0.0:
            return 0.0
        d = np.array([[r * math.cos(theta), r * math.sin(theta)]])
        return r * math.exp(0.5 * beta * float(g(d)[0]))

    val, _ = dblquad(integrand, 0.0, math.pi / 4, 0.0,
                     lambda t: 0.5 / math.cos(t), epsabs=epsabs, epsrel=epsrel)
    return 8.0 * val
