"""Radial dyadic partition of unity and homogeneous Littlewood-Paley blocks.

The low-pass profile ``chi`` equals 1 on ``|xi| <= 3/4`` and 0 on
``|xi| >= 4/3``; ``phi(xi) = chi(xi/2) - chi(xi)`` is supported in
``3/4 <= |xi| <= 8/3`` with a plateau ``phi = 1`` on ``4/3 <= |xi| <= 3/2``.
The transition between the two constant levels is the normalized primitive
of the standard bump ``exp(-1/(1 - t^2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import PchipInterpolator

from .errors import ConfigurationError, RangeError
from .grid import Grid, SpectralScalar

__all__ = [
    "smooth_step",
    "smooth_cutoff",
    "chi_profile",
    "phi_profile_radial",
    "DyadicPartition",
    "BlockList",
    "build_partition",
    "dyadic_block",
    "low_pass",
    "tilde_block",
    "block_partition_apply",
    "partition_residual",
    "export_partition_csv",
    "CHI_INNER",
    "CHI_OUTER",
]

CHI_INNER = 3.0 / 4.0
CHI_OUTER = 4.0 / 3.0
PHI_SUPPORT = (3.0 / 4.0, 8.0 / 3.0)
PHI_PLATEAU = (4.0 / 3.0, 3.0 / 2.0)

_SIMPSON_PANELS = 4096


@lru_cache(maxsize=1)
def _step_table() -> PchipInterpolator:
    t = np.linspace(-1.0, 1.0, _SIMPSON_PANELS + 1)
    psi = np.zeros_like(t)
    inner = np.abs(t) < 1
    psi[inner] = np.exp(-1.0 / (1.0 - t[inner] ** 2))
    cum = np.concatenate([[0.0], cumulative_simpson(psi, x=t)])
    cum /= cum[-1]
    # monotone interpolant keeps the step inside [0, 1]
    return PchipInterpolator(t, cum, extrapolate=False)


def smooth_step(t: np.ndarray | float) -> np.ndarray:
    """C-infinity step: 0 for ``t <= -1``, 1 for ``t >= 1``, monotone in between."""
    t = np.asarray(t, dtype=np.float64)
    out = np.where(t >= 1.0, 1.0, 0.0)
    mid = (t > -1.0) & (t < 1.0)
    if np.any(mid):
        out = out.astype(np.float64, copy=True)
        out[mid] = np.clip(_step_table()(t[mid]), 0.0, 1.0)
    return out


def smooth_cutoff(r: np.ndarray | float, inner: float, outer: float) -> np.ndarray:
    """Radial profile equal to 1 for ``r <= inner`` and 0 for ``r >= outer``."""
    r = np.abs(np.asarray(r, dtype=np.float64))
    t = (2.0 * r - (inner + outer)) / (outer - inner)
    return 1.0 - smooth_step(t)


def chi_profile(r):
    return smooth_cutoff(r, CHI_INNER, CHI_OUTER)


def phi_profile_radial(r):
    r = np.asarray(r, dtype=np.float64)
    return chi_profile(r / 2.0) - chi_profile(r)


@dataclass(frozen=True, eq=False)
class DyadicPartition:
    """Sampled cutoffs and the dyadic index range they certify on ``grid``.

    ``phi_gain`` scales every block symbol; anything other than 1 breaks the
    partition of unity and exists only as a negative control.
    """

    grid: Grid
    j_min: int
    j_max: int
    phi_gain: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False)

    def chi(self, r):
        return chi_profile(r)

    def phi(self, r):
        return self.phi_gain * phi_profile_radial(r)

    @property
    def indices(self) -> range:
        return range(self.j_min, self.j_max + 1)

    @property
    def certified_annulus(self) -> tuple[float, float]:
        return (PHI_PLATEAU[0] * 2.0**self.j_min, PHI_PLATEAU[1] * 2.0**self.j_max)

    def check_index(self, j: int):
        if not self.j_min <= j <= self.j_max:
            raise RangeError(f"dyadic index {j} outside certified range [{self.j_min}, {self.j_max}]")

    def block_symbol(self, j: int) -> np.ndarray:
        key = ("phi", j)
        sym = self._cache.get(key)
        if sym is None:
            sym = self.phi(self.grid.radius * 2.0**-j)
            sym.setflags(write=False)
            self._cache[key] = sym
        return sym

    def low_symbol(self, j: int) -> np.ndarray:
        key = ("chi", j)
        sym = self._cache.get(key)
        if sym is None:
            sym = self.chi(self.grid.radius * 2.0**-j)
            sym.setflags(write=False)
            self._cache[key] = sym
        return sym

    def coverage_symbol(self) -> np.ndarray:
        """``sum_j phi(2^-j xi)`` over the certified range."""
        key = ("cover",)
        sym = self._cache.get(key)
        if sym is None:
            sym = sum(self.block_symbol(j) for j in self.indices)
            sym.setflags(write=False)
            self._cache[key] = sym
        return sym


def _certified_range(grid: Grid) -> tuple[int, int]:
    L, N = grid.period, grid.res
    r_min = 1.0 / L
    # smallest j with 8/3 * 2^j > r_min (open support)
    j_min = math.floor(math.log2(3.0 * r_min / 8.0)) + 1
    while PHI_SUPPORT[1] * 2.0 ** (j_min - 1) > r_min * (1 + 1e-12):
        j_min -= 1
    # largest j with 8/3 * 2^j <= N / (2L)
    j_max = math.floor(math.log2(3.0 * N / (16.0 * L)) + 1e-12)
    while PHI_SUPPORT[1] * 2.0**j_max > grid.nyquist * (1 + 1e-12):
        j_max -= 1
    return j_min, j_max


def build_partition(grid: Grid, phi_gain: float = 1.0) -> DyadicPartition:
    j_min, j_max = _certified_range(grid)
    if j_max - j_min + 1 < 3:
        raise ConfigurationError(
            f"grid N={grid.res}, L={grid.period} certifies only {max(0, j_max - j_min + 1)} dyadic indices (need 3)"
        )
    return DyadicPartition(grid=grid, j_min=j_min, j_max=j_max, phi_gain=phi_gain)


def dyadic_block(f: SpectralScalar, j: int, part: DyadicPartition) -> SpectralScalar:
    """``Delta_j f``: multiply coefficients by ``phi(2^-j |k| / L)``."""
    part.check_index(j)
    return f.with_coeffs(f.coeffs * part.block_symbol(j))


def low_pass(f: SpectralScalar, j: int, part: DyadicPartition) -> SpectralScalar:
    """``chi(2^-j D) f``; any integer ``j`` is allowed."""
    return f.with_coeffs(f.coeffs * part.low_symbol(j))


def tilde_block(f: SpectralScalar, j: int, part: DyadicPartition) -> SpectralScalar:
    """``sum_{|k-j| <= 1} Delta_k f`` restricted to the certified range."""
    part.check_index(j)
    sym = sum(part.block_symbol(k) for k in (j - 1, j, j + 1) if part.j_min <= k <= part.j_max)
    return f.with_coeffs(f.coeffs * sym)


class BlockList(list):
    """List of ``(j, block)`` pairs carrying the relative energy left outside the range."""

    out_of_range_energy: float = 0.0
    flagged: bool = False


OUT_OF_RANGE_TOL = 1e-10


def out_of_range_energy(f: SpectralScalar, part: DyadicPartition) -> float:
    total = f.energy()
    if total == 0:
        return 0.0
    rest = f.coeffs * (1.0 - part.coverage_symbol())
    return float(np.sum(np.abs(rest) ** 2) / total)


def block_partition_apply(f: SpectralScalar, part: DyadicPartition) -> BlockList:
    out = BlockList((j, dyadic_block(f, j, part)) for j in part.indices)
    out.out_of_range_energy = out_of_range_energy(f, part)
    out.flagged = out.out_of_range_energy > OUT_OF_RANGE_TOL
    return out


def partition_residual(part: DyadicPartition, samples: int = 20001) -> dict:
    """Partition-of-unity diagnostics on every lattice radius and on a dense radial sample.

    Returns the max residual ``|1 - sum phi|`` and the extrema of ``sum phi^2``
    over the certified annulus.
    """
    lo, hi = part.certified_annulus
    radii = np.unique(np.round(part.grid.radius.ravel(), 12))
    lattice = radii[(radii >= lo * (1 - 1e-12)) & (radii <= hi * (1 + 1e-12))]
    dense = np.geomspace(lo, hi, samples)
    r = np.concatenate([lattice, dense])
    s1 = np.zeros_like(r)
    s2 = np.zeros_like(r)
    for j in part.indices:
        v = part.phi(r * 2.0**-j)
        s1 += v
        s2 += v * v
    return {
        "lattice_radii": int(lattice.size),
        "max_residual": float(np.max(np.abs(1.0 - s1))),
        "min_sum_sq": float(np.min(s2)),
        "max_sum_sq": float(np.max(s2)),
    }


def export_partition_csv(path: str | Path, part: DyadicPartition | None = None, samples: int = 2001) -> Path:
    """CSV of ``(radius, chi, phi)`` on ``[0, 3]``."""
    path = Path(path)
    r = np.linspace(0.0, 3.0, samples)
    gain = 1.0 if part is None else part.phi_gain
    chi = chi_profile(r)
    phi = gain * phi_profile_radial(r)
    with open(path, "w") as fh:
        fh.write("radius,chi,phi\n")
        for a, b, c in zip(r, chi, phi):
            fh.write(f"{a:.12g},{b:.17g},{c:.17g}\n")
    return path
