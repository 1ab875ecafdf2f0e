"""Green function of the unit torus and its smooth/screened splitting.

All kernels act on displacements ``d = x - y`` of the unit torus ``[0, 1)^2``
and have Fourier multipliers over the wavevectors ``k != 0``::

    green   1 / (4 pi^2 |k|^2)
    yukawa  1 / (m^2 + 4 pi^2 |k|^2)
    smooth  m^2 / (4 pi^2 |k|^2 (m^2 + 4 pi^2 |k|^2))

so that ``green = smooth + yukawa`` mode by mode. The yukawa kernel drops the
``k = 0`` mode ``1/m^2`` unless ``zero_mode=True`` is requested.

Two families of evaluators live here. The spectral ones (``green_eval``,
``yukawa_eval``, ``vm_eval``, ``vm_diag``, ``tabulate``) are truncated mode sums
at the cutoff of a :class:`KernelSpec`. The closed forms (``green_exact``,
``yukawa_exact``, ``smooth_exact``) have no cutoff: the Green function through
the Jacobi theta product, the screened part through a periodised Bessel-K0
image sum. The Gibbs sampler uses the closed forms.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import special

from .errors import CutoffTooSmall, InvalidSpec, SingularDiagonal
from .stats import neumaier_add

TWO_PI = 2.0 * math.pi
FOUR_PI2 = 4.0 * math.pi**2
KINDS = ("green", "yukawa", "smooth")

# Pair distances below this are treated as coincident.
MIN_SEPARATION = 1e-8


def next_even(n: int) -> int:
    n = int(math.ceil(n))
    return n if n % 2 == 0 else n + 1


def default_cutoff(mass: float) -> int:
    return max(64, 4 * int(math.ceil(mass)))


@dataclass(frozen=True)
class KernelSpec:
    """Mass ``m``, spectral cutoff ``K`` (max ``|k|_inf``) and grid resolution."""

    mass: float
    cutoff: int
    grid_n: int

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise InvalidSpec(f"mass must be positive, got {self.mass}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise InvalidSpec(f"cutoff must be an integer >= 1, got {self.cutoff}")
        if int(self.grid_n) != self.grid_n or self.grid_n < 4 or self.grid_n % 2:
            raise InvalidSpec(f"grid_n must be even and >= 4, got {self.grid_n}")

    @classmethod
    def for_mass(cls, mass: float, cutoff: int | None = None,
                 grid_n: int | None = None) -> "KernelSpec":
        """Spec with the default cutoff ``max(64, 4 ceil(m))`` and an
        alias-free grid ``2 * next_even(2K + 2)`` unless overridden."""
        K = default_cutoff(mass) if cutoff is None else int(cutoff)
        n = 2 * next_even(2 * K + 2) if grid_n is None else int(grid_n)
        return cls(float(mass), K, n)

    @property
    def n_modes(self) -> int:
        return (2 * self.cutoff + 1) ** 2 - 1


# ---------------------------------------------------------------------------
# wavevectors


@lru_cache(maxsize=16)
def half_plane_modes(cutoff: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Representatives of ``{k != 0, |k|_inf <= K}`` modulo ``k -> -k``.

    Returns ``(k1, k2, shell_start)``: the modes are ordered by shell
    ``|k|_inf`` and ``shell_start[s-1]`` is the offset of shell ``s``
    (``shell_start[-1]`` is the total count).
    """
    k1s, k2s, starts = [], [], [0]
    for s in range(1, cutoff + 1):
        r = np.arange(-s, s + 1)
        # ring |k|_inf == s, then keep k2 > 0 or (k2 == 0 and k1 > 0)
        a = np.concatenate([r, r, np.full(2 * s - 1, -s), np.full(2 * s - 1, s)])
        b = np.concatenate([np.full(2 * s + 1, -s), np.full(2 * s + 1, s),
                            r[1:-1], r[1:-1]])
        keep = (b > 0) | ((b == 0) & (a > 0))
        a, b = a[keep], b[keep]
        order = np.lexsort((a, b))
        k1s.append(a[order])
        k2s.append(b[order])
        starts.append(starts[-1] + a.size)
    k1 = np.concatenate(k1s)
    k2 = np.concatenate(k2s)
    for arr in (k1, k2):
        arr.flags.writeable = False
    return k1, k2, np.asarray(starts)


def eigenvalues(k1: np.ndarray, k2: np.ndarray) -> np.ndarray:
    """``4 pi^2 |k|^2`` for the given wavevectors."""
    return FOUR_PI2 * (k1.astype(float) ** 2 + k2.astype(float) ** 2)


def multiplier(kind: str, mass: float, lam: np.ndarray) -> np.ndarray:
    if kind == "green":
        return 1.0 / lam
    if kind == "yukawa":
        return 1.0 / (mass * mass + lam)
    if kind == "smooth":
        m2 = mass * mass
        return m2 / (lam * (m2 + lam))
    raise InvalidSpec(f"unknown kernel kind {kind!r}")


def mode_variances(spec: KernelSpec) -> np.ndarray:
    """Variance of each half-plane Fourier coefficient of the smooth field."""
    k1, k2, _ = half_plane_modes(spec.cutoff)
    return multiplier("smooth", spec.mass, eigenvalues(k1, k2))


# ---------------------------------------------------------------------------
# truncated spectral sums


def _as_points(d) -> tuple[np.ndarray, tuple]:
    d = np.asarray(d, dtype=float)
    if d.shape[-1] != 2:
        raise ValueError(f"displacements must have trailing axis 2, got {d.shape}")
    return d.reshape(-1, 2), d.shape[:-1]


def _is_zero_mod_torus(pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    w = pts - np.round(pts)
    return np.all(np.abs(w) <= tol, axis=-1)


def _cosine_sum(spec: KernelSpec, kind: str, pts: np.ndarray) -> np.ndarray:
    """``sum_k mult(k) cos(2 pi k.d)`` over all nonzero modes, shell by shell
    with compensated accumulation so the result does not depend on chunking."""
    k1, k2, starts = half_plane_modes(spec.cutoff)
    mult = 2.0 * multiplier(kind, spec.mass, eigenvalues(k1, k2))
    out = np.empty(pts.shape[0])
    chunk = max(1, 2_000_000 // max(1, k1.size))
    for lo in range(0, pts.shape[0], chunk):
        p = pts[lo:lo + chunk]
        total = np.zeros(p.shape[0])
        comp = np.zeros(p.shape[0])
        for s in range(spec.cutoff):
            a, b = starts[s], starts[s + 1]
            phase = TWO_PI * (np.outer(p[:, 0], k1[a:b]) + np.outer(p[:, 1], k2[a:b]))
            neumaier_add(total, comp, np.cos(phase) @ mult[a:b])
        out[lo:lo + chunk] = total + comp
    return out


def _spectral_eval(spec: KernelSpec, kind: str, d, allow_zero: bool,
                   extra: float = 0.0):
    pts, shape = _as_points(d)
    if not allow_zero and np.any(_is_zero_mod_torus(pts)):
        raise SingularDiagonal(f"{kind} kernel is singular at d = 0")
    vals = _cosine_sum(spec, kind, pts) + extra
    return float(vals[0]) if shape == () else vals.reshape(shape)


def green_eval(spec: KernelSpec, d):
    """Truncated zero-mean Green function of ``-Laplacian`` at displacement(s) ``d``."""
    return _spectral_eval(spec, "green", d, allow_zero=False)


def yukawa_eval(spec: KernelSpec, d, zero_mode: bool = False):
    """Truncated screened kernel of ``(m^2 - Laplacian)^-1``.

    By default the ``k = 0`` mode is dropped so that
    ``green_eval == vm_eval + yukawa_eval``. ``zero_mode=True`` adds ``1/m^2``
    and gives the full screened (positive) kernel.
    """
    extra = 1.0 / spec.mass**2 if zero_mode else 0.0
    return _spectral_eval(spec, "yukawa", d, allow_zero=False, extra=extra)


def vm_eval(spec: KernelSpec, d):
    """Truncated smooth part ``V_m``; finite everywhere, including ``d = 0``."""
    return _spectral_eval(spec, "smooth", d, allow_zero=True)


@lru_cache(maxsize=256)
def _vm_diag_sum(mass: float, cutoff: int) -> float:
    k1, k2, starts = half_plane_modes(cutoff)
    mult = multiplier("smooth", mass, eigenvalues(k1, k2))
    shells = [float(np.sum(mult[starts[s]:starts[s + 1]])) for s in range(cutoff)]
    return 2.0 * math.fsum(shells)


def vm_diag(spec: KernelSpec, check: bool = True) -> float:
    """``V_m(0, 0)``: the variance of the smooth field at a point.

    Requires ``K >= 4m`` unless ``check=False`` (the value is then simply the
    truncated sum at the given cutoff).
    """
    if check and spec.cutoff < 4 * spec.mass:
        raise CutoffTooSmall(f"cutoff {spec.cutoff} < 4 * mass = {4 * spec.mass}")
    return _vm_diag_sum(float(spec.mass), int(spec.cutoff))


def sum_of_squares(spec: KernelSpec, kind: str) -> float:
    """``sum_k mult(k)^2`` over nonzero modes, the squared L2 norm of the kernel."""
    k1, k2, _ = half_plane_modes(spec.cutoff)
    mult = multiplier(kind, spec.mass, eigenvalues(k1, k2))
    return 2.0 * math.fsum(mult**2)


# ---------------------------------------------------------------------------
# grid tabulation


@dataclass(frozen=True)
class KernelTable:
    """Kernel tabulated at the grid displacements ``(i, j) / grid_n``.

    The singular diagonal of ``green`` and ``yukawa`` is stored as NaN.
    """

    kind: str
    values: np.ndarray
    spec: KernelSpec
    zero_mode: bool = False

    @property
    def singular(self) -> bool:
        return self.kind in ("green", "yukawa")

    def to_csv(self, path) -> Path:
        path = Path(path)
        n = self.spec.grid_n
        with path.open("w", newline="") as fh:
            fh.write(f"# kind,mass,cutoff,grid_n\n")
            fh.write(f"# {self.kind},{self.spec.mass!r},{self.spec.cutoff},{n}\n")
            w = csv.writer(fh, lineterminator="\r\n")
            for i in range(n):
                for j in range(n):
                    v = self.values[i, j]
                    w.writerow([i, j, "singular" if np.isnan(v) else repr(float(v))])
        return path

    @classmethod
    def from_csv(cls, path) -> "KernelTable":
        with Path(path).open() as fh:
            fh.readline()
            kind, mass, cutoff, n = fh.readline().lstrip("# ").strip().split(",")
            n = int(n)
            values = np.empty((n, n))
            for row in csv.reader(fh):
                i, j, v = row
                values[int(i), int(j)] = np.nan if v == "singular" else float(v)
        return cls(kind, values, KernelSpec(float(mass), int(cutoff), n))


def tabulate(spec: KernelSpec, kind: str, zero_mode: bool = False) -> KernelTable:
    """Tabulate a truncated kernel on the ``grid_n x grid_n`` displacement grid.

    Modes beyond the grid Nyquist frequency are folded onto their aliases, so
    the node values equal the truncated mode sums exactly (up to rounding).
    """
    if kind not in KINDS:
        raise InvalidSpec(f"unknown kernel kind {kind!r}")
    n = spec.grid_n
    k1, k2, _ = half_plane_modes(spec.cutoff)
    mult = multiplier(kind, spec.mass, eigenvalues(k1, k2))
    M = np.zeros((n, n))
    np.add.at(M, (k1 % n, k2 % n), mult)
    np.add.at(M, ((-k1) % n, (-k2) % n), mult)
    if kind == "yukawa" and zero_mode:
        M[0, 0] += 1.0 / spec.mass**2
    values = np.real(np.fft.ifft2(M)) * (n * n)
    if kind != "smooth":
        values[0, 0] = np.nan
    values.flags.writeable = False
    return KernelTable(kind, values, spec, zero_mode)


# ---------------------------------------------------------------------------
# closed forms without cutoff

_Q2 = math.exp(-2.0 * math.pi)  # q^2 for the square lattice, q = exp(-pi)
_THETA_TERMS = 6
_GREEN_CONST = 1.0 / 12.0 - math.log(2.0) / TWO_PI
_GREEN_REG0 = (-(math.log(math.pi)
                 + 2.0 * sum(math.log1p(-_Q2**n) for n in range(1, 40))) / TWO_PI
               + _GREEN_CONST)


def wrap(d):
    """Minimum-image representative in ``[-1/2, 1/2)^2``."""
    d = np.asarray(d, dtype=float)
    return d - np.floor(d + 0.5)


def green_exact(d) -> np.ndarray:
    """Zero-mean torus Green function with no spectral cutoff.

    ``G(x) = -(1/2pi) log|theta_1(pi z | i)| + x2^2/2 + const`` with
    ``z = x1 + i x2``, evaluated through the product expansion of theta_1.
    Returns ``+inf`` at ``d = 0``.
    """
    w = wrap(d)
    x1, x2 = w[..., 0], w[..., 1]
    s = np.sin(math.pi * x1) ** 2 + np.sinh(math.pi * x2) ** 2
    with np.errstate(divide="ignore"):
        ell = 0.5 * np.log(s)
    c = np.cos(TWO_PI * x1)
    e = np.exp(-TWO_PI * x2)
    qn = 1.0
    for _ in range(_THETA_TERMS):
        qn *= _Q2
        a = qn * e
        b = qn / e
        ell = ell + 0.5 * (np.log1p(a * (a - 2.0 * c)) + np.log1p(b * (b - 2.0 * c)))
    return -ell / TWO_PI + 0.5 * x2**2 + _GREEN_CONST


@lru_cache(maxsize=64)
def _images(mass: float) -> np.ndarray:
    # K0(z) < 1e-17 for z > 38; any point of the unit cell is within sqrt(2)/2
    # of the origin.
    R = 38.0 / mass + math.sqrt(0.5)
    r = int(math.ceil(R))
    n = np.arange(-r, r + 1)
    n1, n2 = np.meshgrid(n, n, indexing="ij")
    keep = n1**2 + n2**2 <= R * R
    out = np.column_stack([n1[keep], n2[keep]]).astype(float)
    out.flags.writeable = False
    return out


def yukawa_exact(d, mass: float, zero_mode: bool = False) -> np.ndarray:
    """Periodised screened kernel ``(1/2pi) sum_n K0(m |d + n|)``.

    The zero mode ``1/m^2`` is subtracted unless ``zero_mode=True``. Returns
    ``+inf`` at ``d = 0``. Intended for ``m >= 1``; the image count grows like
    ``(38/m)^2``.
    """
    w = wrap(d)
    imgs = _images(float(mass))
    out = np.zeros(w.shape[:-1])
    for n1, n2 in imgs:
        r = np.hypot(w[..., 0] + n1, w[..., 1] + n2)
        with np.errstate(divide="ignore"):
            out = out + special.k0(mass * r)
    out = out / TWO_PI
    if not zero_mode:
        out = out - 1.0 / mass**2
    return out


@lru_cache(maxsize=256)
def smooth_diag_exact(mass: float) -> float:
    """``V_m(0, 0)`` with no cutoff, from the regular parts of G and W at 0."""
    imgs = _images(float(mass))
    r = np.hypot(imgs[:, 0], imgs[:, 1])
    s_m = math.fsum(special.k0(mass * r[r > 0]))
    return (_GREEN_REG0 + (math.log(mass / 2.0) + np.euler_gamma) / TWO_PI
            - s_m / TWO_PI + 1.0 / mass**2)


def smooth_exact(d, mass: float) -> np.ndarray:
    """Smooth part ``V_m = G - W_m`` with no cutoff; finite at ``d = 0``."""
    w = wrap(d)
    r = np.hypot(w[..., 0], w[..., 1])
    at0 = r < 1e-12
    safe = np.where(at0[..., None], 0.25, w)
    out = green_exact(safe) - yukawa_exact(safe, mass)
    return np.where(at0, smooth_diag_exact(float(mass)), out)


class PairKernel:
    """Vectorised pair potential for the Hamiltonian, cutoff-free.

    ``kind`` is ``green`` (the full interaction), ``smooth`` (``V_m``) or
    ``yukawa`` (``W_m`` with zero mode removed). Instances are immutable and
    safe to share.
    """

    __slots__ = ("kind", "mass")

    def __init__(self, kind: str = "green", mass: float | None = None):
        if kind not in KINDS:
            raise InvalidSpec(f"unknown kernel kind {kind!r}")
        if kind != "green" and not (mass and mass > 0):
            raise InvalidSpec(f"{kind} kernel needs a positive mass")
        self.kind = kind
        self.mass = None if mass is None else float(mass)

    @property
    def singular(self) -> bool:
        return self.kind != "smooth"

    def __call__(self, d) -> np.ndarray:
        if self.kind == "green":
            return green_exact(d)
        if self.kind == "yukawa":
            return yukawa_exact(d, self.mass)
        return smooth_exact(d, self.mass)

    def __repr__(self):
        return f"PairKernel({self.kind!r}, mass={self.mass})"

    def split(self, mass: float) -> tuple["PairKernel", "PairKernel"]:
        return PairKernel("smooth", mass), PairKernel("yukawa", mass)
