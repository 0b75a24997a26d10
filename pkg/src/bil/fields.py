"""Random band-limited test fields (the fixed corpora used for calibration and checks)."""

from __future__ import annotations

import numpy as np

from .grid import Grid, SpectralScalar, SpectralVector, _hermitian_partner


def band_mask(grid: Grid, r_lo: float, r_hi: float) -> np.ndarray:
    """Lattice points with physical radius in ``[r_lo, r_hi]``, excluding Nyquist planes."""
    r = grid.radius
    return (r >= r_lo) & (r <= r_hi) & ~grid.nyquist_mask


def random_scalar(grid: Grid, rng: np.random.Generator, r_lo: float | None = None,
                  r_hi: float | None = None) -> SpectralScalar:
    """Mean-free real field with i.i.d. Gaussian coefficients on a radial band."""
    lo = 1.0 / grid.period if r_lo is None else r_lo
    hi = grid.nyquist / 3.0 if r_hi is None else r_hi
    shape = grid.shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c = c * band_mask(grid, lo, hi)
    c.flat[0] = 0.0
    c = 0.5 * (c + _hermitian_partner(c))
    return SpectralScalar(grid, c)


def random_vector(grid: Grid, rng: np.random.Generator, r_lo: float | None = None,
                  r_hi: float | None = None, solenoidal: bool = False) -> SpectralVector:
    u = SpectralVector(tuple(random_scalar(grid, rng, r_lo, r_hi) for _ in range(grid.dim)))
    if solenoidal:
        from .leray import leray_project

        u = leray_project(u)
    return u
