"""Block-wise breakdown of the inflation lower bound into the four J terms.

For ``l`` in ``K`` the same-scale part is ``H11 = E_l^2 / 2`` and the
cross-scale part ``H12 = sum_{k != l} E_k^2 / 2`` (the ``sin^2`` carrier
averages to 1/2 inside low blocks).  With ``D = d_1 - d_2`` and
``T = d_1 D^2 (-Delta)^{-1}`` the per-block values are

    J1_l = |Delta_l D H11|,  J2_l = |Delta_l T H11|,
    J3_l = |Delta_l D H12|,  J4_l = |Delta_l T H12|     (L^d norms)

and the aggregates ``(sum_l (2^{-2l} J_l)^q)^{1/q}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .construction import ConstructionSchedule, envelope_products, matrix_A, phi_hat
from .errors import ConfigurationError
from .grid import Grid, SpectralScalar, apply_multiplier, lp_norm
from .leray import spectral_frequencies
from .littlewood_paley import build_partition, phi_profile_radial

__all__ = ["JBreakdown", "torus_j_terms", "frame_j_terms", "FrameJ"]


def _d_op(grid: Grid):
    xi = spectral_frequencies(grid)
    return 1j * (xi[0] - xi[1])


def _t_op(grid: Grid):
    xi = spectral_frequencies(grid)
    r2 = sum(x**2 for x in xi)
    inv = np.zeros(grid.shape)
    np.divide(1.0, r2, out=inv, where=r2 > 0)
    return 1j * xi[0] * (1j * (xi[0] - xi[1])) ** 2 * inv


@dataclass
class JBreakdown:
    eps: float
    q: float
    per_block: dict = field(default_factory=dict)
    totals: dict = field(default_factory=dict)

    def ratio(self, a: str, b: str) -> float:
        den = self.totals[b]
        return self.totals[a] / den if den > 0 else math.nan


def _aggregate(values: dict, q: float) -> float:
    terms = [(2.0 ** (-2 * ell) * v) ** q for ell, v in sorted(values.items())]
    return math.fsum(terms) ** (1.0 / q)


def torus_j_terms(sched: ConstructionSchedule, grid: Grid | None = None,
                  products: dict | None = None) -> JBreakdown:
    """J terms on the construction torus itself."""
    grid = grid or sched.grid()
    prods = products if products is not None else envelope_products(sched, grid)
    part = build_partition(grid)
    D, T = _d_op(grid), _t_op(grid)
    d = grid.dim
    squares = {k: prods[(k, k)] * 0.5 for k in sched.envelope_scales}
    out = JBreakdown(eps=sched.eps, q=sched.q)
    cols = {f"J{i}": {} for i in range(1, 5)}
    for ell in sched.envelope_scales:
        blk = part.block_symbol(ell)
        h11 = squares[ell].coeffs
        h12 = sum((squares[k].coeffs for k in sched.envelope_scales if k != ell), np.zeros(grid.shape, complex))
        vals = []
        for h in (h11, h12):
            for op in (D, T):
                vals.append(lp_norm(SpectralScalar(grid, h * op * blk), d))
        j1, j2, j3, j4 = vals[0], vals[1], vals[2], vals[3]
        out.per_block[ell] = {"J1": j1, "J2": j2, "J3": j3, "J4": j4}
        for name, v in zip(("J1", "J2", "J3", "J4"), (j1, j2, j3, j4)):
            cols[name][ell] = v
    out.totals = {name: _aggregate(v, sched.q) for name, v in cols.items()}
    return out


@dataclass(frozen=True)
class FrameJ:
    """Scale-free values ``2^{-2l} J1_l`` and ``2^{-2l} J2_l`` (independent of ``l``)."""

    eps: float
    d: int
    j1: float
    j2: float
    frame_period: float
    res: int

    @property
    def ratio(self) -> float:
        return self.j2 / self.j1 if self.j1 > 0 else math.nan


def frame_j_terms(d: int, eps: float, mu: float, width: float, res: int = 32,
                  frame_period: float | None = None) -> FrameJ:
    """Same-scale J terms evaluated in the envelope's own coordinates.

    Under ``y = 2^l A (x - T)`` the block ``Delta_l`` becomes the multiplier
    ``phi(|A eta|)``, ``D`` becomes ``eps 2^l (d_{y1} - d_{y2})`` and
    ``dx = dy / (2^{dl} eps^2)``, so

        2^{-2l} J1_l = eps^{1 - 2/d} |phi(|A eta|) (eta_1 - eta_2) F|_{L^d}
        2^{-2l} J2_l = eps^{3 - 2/d} |phi(|A eta|) eta_1 (eta_1 - eta_2)^2 / |A eta|^2 F|_{L^d}

    with ``F = phi^2 / 2``.  The ``y`` torus needs no anisotropic resolution,
    which the construction torus cannot provide at desk scale.
    """
    if not 0 < eps < 1:
        raise ConfigurationError("eps must lie in (0, 1)")
    if frame_period is None:
        # phi^2 reaches |eta_d| < 2 (mu + width); keep it inside the band
        frame_period = (res / 2.0 - 1.0) / (2.0 * (mu + width))
    g = Grid(d, res, frame_period)
    etas = [g.axis_frequency(i) for i in range(d)]
    hat = np.broadcast_to(phi_hat(etas, mu, width), g.shape) / (2.0 * math.pi * frame_period) ** d
    phi = SpectralScalar(g, hat.copy())
    from .leray import pointwise_product

    F = pointwise_product(phi, phi, "none") * 0.5
    a = np.diag(matrix_A(eps, d))
    r_a = np.sqrt(sum((a[i] * etas[i]) ** 2 for i in range(d)))
    blk = phi_profile_radial(r_a)
    inv = np.zeros(g.shape)
    np.divide(1.0, r_a**2, out=inv, where=r_a > 0)
    diff = etas[0] - etas[1]
    m1 = blk * 1j * diff
    m2 = blk * (-1j) * etas[0] * diff**2 * inv
    v1 = lp_norm(apply_multiplier(F, m1), d)
    v2 = lp_norm(apply_multiplier(F, m2), d)
    return FrameJ(eps=eps, d=d, j1=eps ** (1 - 2.0 / d) * v1, j2=eps ** (3 - 2.0 / d) * v2,
                  frame_period=frame_period, res=res)
