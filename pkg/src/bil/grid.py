"""Periodic grids, spectral fields and Fourier multipliers.

Fields live on the box ``[0, 2*pi*L)^d`` sampled at ``N`` points per axis.
Coefficients are stored in numpy FFT order and normalized so that the zero
mode is the sample mean, i.e. ``f(x) = sum_k c_k exp(i k.x / L)``.  The
integer lattice vector ``k`` corresponds to the physical frequency ``k / L``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import fft as sfft

from .errors import ConfigurationError, FieldFormatError

__all__ = [
    "Grid",
    "SpectralScalar",
    "SpectralVector",
    "TensorField",
    "make_grid",
    "synthesize",
    "evaluate",
    "from_samples",
    "derivative",
    "inverse_laplacian",
    "negative_laplacian",
    "riesz_potential",
    "apply_multiplier",
    "lp_norm",
    "vector_lp_norm",
    "parseval_norm",
    "write_bspc",
    "read_bspc",
    "export_slice_csv",
    "BSPC_MAGIC",
]

BSPC_MAGIC = b"BSPC1"
_HEADER = struct.Struct("<5sIId")

# relative size of the mean mode above which homogeneous multipliers flag input
ZERO_MODE_TOL = 1e-12


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[0, 2*pi*period)^dim`` with ``res`` points per axis."""

    dim: int
    res: int
    period: float = 1.0

    def __post_init__(self):
        if self.dim not in (2, 3, 4):
            raise ConfigurationError(f"grid dimension must be 2, 3 or 4, got {self.dim}")
        if not isinstance(self.res, (int, np.integer)) or not _is_power_of_two(int(self.res)):
            raise ConfigurationError(f"resolution must be a power of two, got {self.res}")
        if self.res < 8:
            raise ConfigurationError(f"resolution must be at least 8, got {self.res}")
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ConfigurationError(f"period must be positive, got {self.period}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.res,) * self.dim

    @property
    def size(self) -> int:
        return self.res**self.dim

    @property
    def spacing(self) -> float:
        return 2 * math.pi * self.period / self.res

    @property
    def volume(self) -> float:
        return (2 * math.pi * self.period) ** self.dim

    @property
    def nyquist(self) -> float:
        """Largest resolved physical frequency per axis."""
        return self.res / (2 * self.period)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers along one axis, FFT order (``-N/2`` is the Nyquist index)."""
        k = np.fft.fftfreq(self.res, d=1.0 / self.res).round().astype(np.int64)
        k.setflags(write=False)
        return k

    def axis_frequency(self, axis: int) -> np.ndarray:
        """Physical frequency ``k_axis / L`` shaped to broadcast against field arrays."""
        shape = [1] * self.dim
        shape[axis] = self.res
        xi = (self.wavenumbers / self.period).reshape(shape)
        return xi

    @cached_property
    def radius(self) -> np.ndarray:
        """Physical frequency modulus ``|k| / L`` on the full lattice."""
        r2 = np.zeros(self.shape)
        for a in range(self.dim):
            r2 = r2 + self.axis_frequency(a) ** 2
        r = np.sqrt(r2)
        r.setflags(write=False)
        return r

    @cached_property
    def radius_squared(self) -> np.ndarray:
        r2 = self.radius**2
        r2.setflags(write=False)
        return r2

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on lattice points with some index equal to the Nyquist index."""
        mask = np.zeros(self.shape, dtype=bool)
        ny = -(self.res // 2)
        for a in range(self.dim):
            shape = [1] * self.dim
            shape[a] = self.res
            mask = mask | (self.wavenumbers == ny).reshape(shape)
        mask.setflags(write=False)
        return mask

    def coordinates(self) -> list[np.ndarray]:
        """Sparse coordinate arrays (broadcastable) of the physical sample points."""
        x = np.arange(self.res) * self.spacing
        out = []
        for a in range(self.dim):
            shape = [1] * self.dim
            shape[a] = self.res
            out.append(x.reshape(shape))
        return out


def make_grid(d: int, N: int, L: float = 1.0) -> Grid:
    return Grid(dim=int(d), res=int(N), period=float(L))


def _hermitian_partner(c: np.ndarray) -> np.ndarray:
    """Return ``conj(c[-k])`` on the periodic lattice."""
    rev = np.flip(c, axis=tuple(range(c.ndim)))
    rev = np.roll(rev, shift=1, axis=tuple(range(c.ndim)))
    return np.conj(rev)


@dataclass(frozen=True, eq=False)
class SpectralScalar:
    """Fourier coefficients of a real scalar field.

    Hermitian symmetry is enforced on construction; ``hermitian_defect`` records
    the relative deviation that was removed.
    """

    grid: Grid
    coeffs: np.ndarray
    flags: frozenset = field(default_factory=frozenset)
    hermitian_defect: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != self.grid.shape:
            raise ConfigurationError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        partner = _hermitian_partner(c)
        scale = np.max(np.abs(c)) if c.size else 0.0
        defect = float(np.max(np.abs(c - partner)) / scale) if scale > 0 else 0.0
        sym = 0.5 * (c + partner)
        sym.setflags(write=False)
        object.__setattr__(self, "coeffs", sym)
        object.__setattr__(self, "flags", frozenset(self.flags))
        object.__setattr__(self, "hermitian_defect", max(defect, float(self.hermitian_defect)))

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralScalar":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    def with_coeffs(self, coeffs: np.ndarray, flags: Iterable[str] = ()) -> "SpectralScalar":
        return SpectralScalar(self.grid, coeffs, frozenset(self.flags) | frozenset(flags))

    @property
    def mean(self) -> float:
        return float(self.coeffs.flat[0].real)

    def energy(self) -> float:
        """Sum of squared coefficient moduli (Parseval energy over the volume)."""
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def _check(self, other: "SpectralScalar"):
        if other.grid != self.grid:
            raise ConfigurationError("fields live on different grids")

    def __add__(self, other: "SpectralScalar") -> "SpectralScalar":
        self._check(other)
        return SpectralScalar(self.grid, self.coeffs + other.coeffs, self.flags | other.flags)

    def __sub__(self, other: "SpectralScalar") -> "SpectralScalar":
        self._check(other)
        return SpectralScalar(self.grid, self.coeffs - other.coeffs, self.flags | other.flags)

    def __mul__(self, c: float) -> "SpectralScalar":
        return SpectralScalar(self.grid, self.coeffs * float(c), self.flags)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralScalar":
        return SpectralScalar(self.grid, -self.coeffs, self.flags)


@dataclass(frozen=True, eq=False)
class SpectralVector:
    """A ``d``-component field; all components share one grid."""

    components: tuple

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ConfigurationError("a vector field needs at least one component")
        g = comps[0].grid
        if any(c.grid != g for c in comps):
            raise ConfigurationError("vector components live on different grids")
        object.__setattr__(self, "components", comps)

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    @property
    def flags(self) -> frozenset:
        out = frozenset()
        for c in self.components:
            out |= c.flags
        return out

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i) -> SpectralScalar:
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    @classmethod
    def zeros(cls, grid: Grid, ncomp: int | None = None) -> "SpectralVector":
        n = grid.dim if ncomp is None else ncomp
        return cls(tuple(SpectralScalar.zeros(grid) for _ in range(n)))

    @classmethod
    def from_coeffs(cls, grid: Grid, arrays: Sequence[np.ndarray], flags: Iterable[str] = ()) -> "SpectralVector":
        return cls(tuple(SpectralScalar(grid, a, frozenset(flags)) for a in arrays))

    def coeff_stack(self) -> list[np.ndarray]:
        return [c.coeffs for c in self.components]

    def energy(self) -> float:
        return sum(c.energy() for c in self.components)

    def __add__(self, other: "SpectralVector") -> "SpectralVector":
        return SpectralVector(tuple(a + b for a, b in zip(self, other, strict=True)))

    def __sub__(self, other: "SpectralVector") -> "SpectralVector":
        return SpectralVector(tuple(a - b for a, b in zip(self, other, strict=True)))

    def __mul__(self, c: float) -> "SpectralVector":
        return SpectralVector(tuple(a * c for a in self))

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralVector":
        return SpectralVector(tuple(-a for a in self))


@dataclass(frozen=True, eq=False)
class TensorField:
    """``d x d`` field of scalars, entry ``(i, j)`` holding ``v_i u_j``."""

    entries: tuple
    flags: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.entries)
        g = rows[0][0].grid
        if any(len(r) != len(rows) for r in rows) or any(e.grid != g for r in rows for e in r):
            raise ConfigurationError("tensor entries must form a square array on one grid")
        object.__setattr__(self, "entries", rows)
        object.__setattr__(self, "flags", frozenset(self.flags))

    @property
    def grid(self) -> Grid:
        return self.entries[0][0].grid

    def __getitem__(self, ij) -> SpectralScalar:
        i, j = ij
        return self.entries[i][j]


# --- transforms -------------------------------------------------------------


def from_samples(grid: Grid, samples: np.ndarray, flags: Iterable[str] = ()) -> SpectralScalar:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape != grid.shape:
        samples = np.broadcast_to(samples, grid.shape)
    if not np.all(np.isfinite(samples)):
        raise ConfigurationError("sampled field contains non-finite values")
    coeffs = sfft.fftn(samples) / grid.size
    return SpectralScalar(grid, coeffs, frozenset(flags))


def synthesize(grid: Grid, sampler: Callable[..., np.ndarray]) -> SpectralScalar:
    """Sample ``sampler(x_0, ..., x_{d-1})`` on the grid and transform."""
    values = sampler(*grid.coordinates())
    return from_samples(grid, np.broadcast_to(np.asarray(values, dtype=np.float64), grid.shape))


def evaluate(f: SpectralScalar) -> np.ndarray:
    return np.real(sfft.ifftn(f.coeffs)) * f.grid.size


def apply_multiplier(f: SpectralScalar, symbol: np.ndarray, flags: Iterable[str] = ()) -> SpectralScalar:
    return f.with_coeffs(f.coeffs * symbol, flags)


def derivative(f: SpectralScalar, axis: int) -> SpectralScalar:
    """Spectral derivative along ``axis``; the Nyquist wavenumber is dropped."""
    g = f.grid
    if not 0 <= axis < g.dim:
        raise ConfigurationError(f"axis {axis} out of range for dimension {g.dim}")
    xi = g.axis_frequency(axis).copy()
    xi[xi == -g.res / (2 * g.period)] = 0.0
    return f.with_coeffs(f.coeffs * (1j * xi))


def _zero_mode_flag(f: SpectralScalar) -> set[str]:
    norm = math.sqrt(f.energy())
    if norm > 0 and abs(f.coeffs.flat[0]) > ZERO_MODE_TOL * norm:
        return {"nonzero_mean"}
    return set()


def negative_laplacian(f: SpectralScalar) -> SpectralScalar:
    return f.with_coeffs(f.coeffs * f.grid.radius_squared)


def inverse_laplacian(f: SpectralScalar) -> SpectralScalar:
    """``(-Delta)^{-1}``: divide by ``|k/L|^2``; the mean is mapped to zero and flagged."""
    r2 = f.grid.radius_squared
    inv = np.zeros_like(r2)
    np.divide(1.0, r2, out=inv, where=r2 > 0)
    return f.with_coeffs(f.coeffs * inv, _zero_mode_flag(f))


def riesz_potential(f: SpectralScalar, alpha: float) -> SpectralScalar:
    """``(-Delta)^{alpha/2}`` with symbol ``|xi|^alpha``."""
    if alpha == 0:
        return f.with_coeffs(f.coeffs.copy())
    r = f.grid.radius
    sym = np.zeros_like(r)
    np.power(r, alpha, out=sym, where=r > 0)
    flags = _zero_mode_flag(f) if alpha < 0 else set()
    return f.with_coeffs(f.coeffs * sym, flags)


# --- quadrature -------------------------------------------------------------


def lp_norm(f: SpectralScalar | np.ndarray, p: float, grid: Grid | None = None) -> float:
    """Riemann-sum ``L^p`` norm over the box, from physical samples."""
    if p < 1 or not math.isfinite(p):
        raise ConfigurationError(f"p must lie in [1, inf), got {p}")
    if isinstance(f, SpectralScalar):
        grid = f.grid
        vals = np.abs(evaluate(f))
    else:
        vals = np.abs(np.asarray(f))
    cell = grid.spacing**grid.dim
    m = vals.max() if vals.size else 0.0
    if m == 0:
        return 0.0
    # scaled to avoid overflow for large p
    return float(m * (cell * np.sum((vals / m) ** p)) ** (1.0 / p))


def vector_lp_norm(u: SpectralVector, p: float) -> float:
    """``L^p`` norm of the pointwise Euclidean length ``|u(x)|``."""
    mag2 = np.zeros(u.grid.shape)
    for c in u:
        mag2 += evaluate(c) ** 2
    return lp_norm(np.sqrt(mag2), p, grid=u.grid)


def parseval_norm(f: SpectralScalar | SpectralVector) -> float:
    """``L^2`` norm computed from coefficients: ``sqrt(vol * sum |c|^2)``."""
    return math.sqrt(f.grid.volume * f.energy())


# --- serialization ----------------------------------------------------------


def write_bspc(path: str | Path, f: SpectralScalar | SpectralVector) -> Path:
    """Write a field as ``BSPC1`` header (magic, d, N, L little-endian) + complex128 payload.

    Vector fields store their components back to back; the reader infers the
    component count from the payload length.
    """
    path = Path(path)
    comps = [f] if isinstance(f, SpectralScalar) else list(f)
    g = comps[0].grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(BSPC_MAGIC, g.dim, g.res, g.period))
        for c in comps:
            fh.write(np.ascontiguousarray(c.coeffs, dtype="<c16").tobytes())
    return path


def read_bspc(path: str | Path) -> SpectralScalar | SpectralVector:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FieldFormatError(f"{path}: truncated header")
    magic, d, n, L = _HEADER.unpack_from(raw)
    if magic != BSPC_MAGIC:
        raise FieldFormatError(f"{path}: bad magic {magic!r}")
    grid = make_grid(d, n, L)
    payload = raw[_HEADER.size :]
    per = grid.size * 16
    if len(payload) == 0 or len(payload) % per:
        raise FieldFormatError(f"{path}: payload of {len(payload)} bytes is not a whole number of fields")
    arr = np.frombuffer(payload, dtype="<c16").reshape((-1,) + grid.shape)
    comps = tuple(SpectralScalar(grid, a.copy()) for a in arr)
    return comps[0] if len(comps) == 1 else SpectralVector(comps)


def export_slice_csv(f: SpectralScalar, path: str | Path, axes: tuple[int, int] = (0, 1)) -> Path:
    """Write the physical values on the 2D slice through the origin spanned by ``axes``."""
    path = Path(path)
    vals = evaluate(f)
    index = [0] * f.grid.dim
    for a in axes:
        index[a] = slice(None)
    sl = vals[tuple(index)]
    if axes[0] > axes[1]:
        sl = sl.T
    x = np.arange(f.grid.res) * f.grid.spacing
    with open(path, "w") as fh:
        fh.write(f"x{axes[0]},x{axes[1]},value\n")
        for i in range(f.grid.res):
            for j in range(f.grid.res):
                fh.write(f"{x[i]:.12g},{x[j]:.12g},{sl[i, j]:.17g}\n")
    return path
