"""Leray projection, the bilinear form ``B(u, v) = P (-Delta)^{-1} div(u (x) v)``
and the Picard iteration for ``u = B(u, u) + g``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import fft as sfft

from .besov import BesovParams, restricted_besov_norm_vector
from .errors import (
    ConfigurationError,
    DivergenceDetected,
    NonConvergence,
    SmallnessViolated,
)
from .fields import random_vector
from .grid import (
    Grid,
    SpectralScalar,
    SpectralVector,
    TensorField,
    derivative,
    evaluate,
    inverse_laplacian,
    parseval_norm,
    vector_lp_norm,
    write_bspc,
)
from .littlewood_paley import DyadicPartition, build_partition, out_of_range_energy

__all__ = [
    "spectral_frequencies",
    "leray_project",
    "divergence",
    "gradient",
    "pointwise_product",
    "tensor_product",
    "tensor_divergence",
    "bilinear_B",
    "bilinear_B_commuted",
    "lift_force",
    "SolverConfig",
    "SolverReport",
    "picard_solve",
    "decompose_solution",
    "calibrate_bilinear_constant",
    "default_smallness_guard",
    "max_wavenumber",
    "aliasing_energy",
    "solution_norms",
]


def spectral_frequencies(grid: Grid) -> list[np.ndarray]:
    """Per-axis frequencies with the Nyquist wavenumber zeroed, matching ``derivative``."""
    out = []
    for a in range(grid.dim):
        xi = grid.axis_frequency(a).copy()
        xi[xi == -grid.res / (2 * grid.period)] = 0.0
        out.append(xi)
    return out


def _projector_apply(arrays: list[np.ndarray], grid: Grid) -> tuple[list[np.ndarray], bool]:
    xi = spectral_frequencies(grid)
    r2 = sum(x**2 for x in xi)
    inv = np.zeros(grid.shape)
    np.divide(1.0, r2, out=inv, where=r2 > 0)
    dot = sum(x * a for x, a in zip(xi, arrays))
    dot = dot * inv
    out = [a - x * dot for a, x in zip(arrays, xi)]
    mean_present = any(abs(a.flat[0]) > 0 for a in arrays)
    return out, mean_present


def leray_project(u: SpectralVector) -> SpectralVector:
    """Frequency-wise ``u(k) - k (k . u(k)) / |k|^2``; the mean passes through (flagged)."""
    if len(u) != u.grid.dim:
        raise ConfigurationError("Leray projection needs a d-component field")
    out, mean = _projector_apply(u.coeff_stack(), u.grid)
    flags = {"nonzero_mean"} if mean else set()
    return SpectralVector(tuple(c.with_coeffs(a, flags) for c, a in zip(u, out)))


def divergence(u: SpectralVector) -> SpectralScalar:
    acc = derivative(u[0], 0)
    for i in range(1, len(u)):
        acc = acc + derivative(u[i], i)
    return acc


def gradient(p: SpectralScalar) -> SpectralVector:
    return SpectralVector(tuple(derivative(p, a) for a in range(p.grid.dim)))


# --- products ---------------------------------------------------------------


def max_wavenumber(f: SpectralScalar, rel_tol: float = 1e-14) -> int:
    """Largest ``max_i |k_i|`` carrying a coefficient above ``rel_tol * max|c|``."""
    a = np.abs(f.coeffs)
    m = a.max()
    if m == 0:
        return 0
    g = f.grid
    kmax = np.zeros(g.shape, dtype=np.int64)
    for ax in range(g.dim):
        shape = [1] * g.dim
        shape[ax] = g.res
        kmax = np.maximum(kmax, np.abs(g.wavenumbers).reshape(shape))
    return int(kmax[a > rel_tol * m].max())


def aliasing_energy(f: SpectralScalar | SpectralVector) -> float:
    """Relative energy in the top third of the spectrum (``max_i |k_i| > N/3``)."""
    comps = list(f) if isinstance(f, SpectralVector) else [f]
    g = comps[0].grid
    kmax = np.zeros(g.shape, dtype=np.int64)
    for ax in range(g.dim):
        shape = [1] * g.dim
        shape[ax] = g.res
        kmax = np.maximum(kmax, np.abs(g.wavenumbers).reshape(shape))
    top = kmax > g.res / 3.0
    tot = sum(c.energy() for c in comps)
    if tot == 0:
        return 0.0
    return float(sum(np.sum(np.abs(c.coeffs[top]) ** 2) for c in comps) / tot)


def _embed_index(N: int, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Source indices in an ``N`` FFT-ordered axis and their place in an ``M`` axis (Nyquist dropped)."""
    pos = np.arange(0, N // 2)
    neg = np.arange(-(N // 2) + 1, 0)
    k = np.concatenate([pos, neg])
    return k % N, k % M


def _pad_physical(c: np.ndarray, M: int) -> np.ndarray:
    """Physical samples on an ``M^d`` grid of the trigonometric polynomial with coefficients ``c``."""
    d = c.ndim
    N = c.shape[0]
    src, dst = _embed_index(N, M)
    half = np.zeros((M,) * (d - 1) + (M // 2 + 1,), dtype=np.complex128)
    last = np.arange(0, N // 2)
    half[np.ix_(*([dst] * (d - 1) + [last]))] = c[np.ix_(*([src] * (d - 1) + [last]))]
    return sfft.irfftn(half, s=(M,) * d) * (M**d)


def _truncate_spectrum(x: np.ndarray, N: int) -> np.ndarray:
    """FFT-ordered ``N^d`` coefficients of the samples ``x`` (on an ``M^d`` grid), Nyquist zeroed."""
    d = x.ndim
    M = x.shape[0]
    hat = sfft.rfftn(x) / (M**d)
    src, dst = _embed_index(N, M)
    out = np.zeros((N,) * d, dtype=np.complex128)
    pos = np.arange(0, N // 2)
    out[np.ix_(*([src] * (d - 1) + [pos]))] = hat[np.ix_(*([dst] * (d - 1) + [pos]))]
    # negative last-axis frequencies from Hermitian symmetry: c(k', -m) = conj(c(-k', m))
    negm = np.arange(1, N // 2)
    block = hat[np.ix_(*([dst] * (d - 1) + [negm]))]
    order = [_neg_perm(N)] * (d - 1)
    block = block[np.ix_(*(order + [np.arange(negm.size)]))]
    out[np.ix_(*([src] * (d - 1) + [(-negm) % N]))] = np.conj(block)
    return out


def _neg_perm(N: int) -> np.ndarray:
    """Permutation ``p`` of the Nyquist-free source list with ``k[p[i]] = -k[i]``."""
    pos = np.arange(0, N // 2)
    neg = np.arange(-(N // 2) + 1, 0)
    k = np.concatenate([pos, neg])
    lookup = {int(v): i for i, v in enumerate(k)}
    return np.array([lookup[int(-v)] for v in k])


def pointwise_product(f: SpectralScalar, h: SpectralScalar, dealias: str = "none") -> SpectralScalar:
    """Spectral coefficients of ``f * h``.

    ``dealias="none"`` multiplies on the grid itself (aliasing flagged when the
    supports can fold); ``"pad"`` multiplies on a doubled grid and truncates,
    i.e. the exact product projected onto the representable modes.
    """
    g = f.grid
    if h.grid != g:
        raise ConfigurationError("fields live on different grids")
    if dealias == "none":
        flags = set()
        if max_wavenumber(f) + max_wavenumber(h) >= g.res // 2:
            flags.add("aliasing")
        prod = evaluate(f) * evaluate(h)
        return SpectralScalar(g, sfft.fftn(prod) / g.size, frozenset(flags) | f.flags | h.flags)
    if dealias == "pad":
        M = 2 * g.res
        prod = _pad_physical(f.coeffs, M) * _pad_physical(h.coeffs, M)
        return SpectralScalar(g, _truncate_spectrum(prod, g.res), f.flags | h.flags)
    raise ConfigurationError(f"unknown dealias mode {dealias!r}")


def tensor_product(u: SpectralVector, v: SpectralVector, dealias: str = "none") -> TensorField:
    """Entry ``(i, j)`` is ``u_i v_j``."""
    if u.grid != v.grid:
        raise ConfigurationError("fields live on different grids")
    n = len(u)
    same = u is v
    physical = None
    if dealias == "none":
        pu = [evaluate(c) for c in u]
        pv = pu if same else [evaluate(c) for c in v]
        kmax = max(max_wavenumber(c) for c in u) + max(max_wavenumber(c) for c in v)
        physical = (pu, pv, kmax >= u.grid.res // 2)
    rows: list[list] = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if same and j < i:
                rows[i][j] = rows[j][i]
                continue
            if physical is not None:
                pu, pv, alias = physical
                g = u.grid
                rows[i][j] = SpectralScalar(g, sfft.fftn(pu[i] * pv[j]) / g.size,
                                            frozenset({"aliasing"} if alias else ()))
            else:
                rows[i][j] = pointwise_product(u[i], v[j], dealias)
    flags = frozenset().union(*(e.flags for r in rows for e in r))
    return TensorField(tuple(tuple(r) for r in rows), flags)


def tensor_divergence(T: TensorField) -> SpectralVector:
    """``(div T)_j = sum_i d_i T_ij``."""
    n = len(T.entries)
    comps = []
    for j in range(n):
        acc = derivative(T[0, j], 0)
        for i in range(1, n):
            acc = acc + derivative(T[i, j], i)
        comps.append(acc)
    return SpectralVector(tuple(comps))


def bilinear_B(u: SpectralVector, v: SpectralVector, dealias: str = "none") -> SpectralVector:
    """``P (-Delta)^{-1} div(u (x) v)``."""
    w = tensor_divergence(tensor_product(u, v, dealias))
    w = SpectralVector(tuple(inverse_laplacian(c) for c in w))
    return leray_project(w)


def bilinear_B_commuted(u: SpectralVector, v: SpectralVector, dealias: str = "none") -> SpectralVector:
    """Same operator, composed as ``(-Delta)^{-1} div`` of the row-wise projected tensor.

    Used as an independent evaluation order: ``P`` acts on the second tensor
    index and commutes with ``d_i`` and ``(-Delta)^{-1}``.
    """
    T = tensor_product(u, v, dealias)
    n = len(T.entries)
    g = T.grid
    xi = spectral_frequencies(g)
    projected_rows = []
    for i in range(n):
        row, _ = _projector_apply([T[i, j].coeffs for j in range(n)], g)
        projected_rows.append(row)
    comps = []
    for j in range(n):
        acc = sum(1j * xi[i] * projected_rows[i][j] for i in range(n))
        comps.append(inverse_laplacian(SpectralScalar(g, acc)))
    return SpectralVector(tuple(comps))


def lift_force(f: SpectralVector) -> SpectralVector:
    """``g = (-Delta)^{-1} P f``."""
    pf = leray_project(f)
    return SpectralVector(tuple(inverse_laplacian(c) for c in pf))


# --- Picard solver ----------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 50
    residual_tol: float = 1e-10
    norm: str = "Ld"
    smallness_guard: float | None = None
    damping: float = 1.0
    dealias: str = "none"
    divergence_window: int = 3

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be at least 1")
        if not self.residual_tol > 0:
            raise ConfigurationError("residual_tol must be positive")
        if not 0 < self.damping <= 1:
            raise ConfigurationError("damping must lie in (0, 1]")
        if self.norm not in ("Ld", "besov"):
            raise ConfigurationError(f"unknown residual norm {self.norm!r}")
        if self.dealias not in ("none", "pad"):
            raise ConfigurationError(f"unknown dealias mode {self.dealias!r}")


@dataclass
class SolverReport:
    u: SpectralVector
    iterations: int
    residual_history: list
    converged: bool
    norms: dict = field(default_factory=dict)
    config: SolverConfig | None = None
    g_norm: float = 0.0
    smallness_guard: float | None = None
    fixed_point_residual: float | None = None
    certified: bool = False
    flags: list = field(default_factory=list)

    def to_json(self, field_path: str | None = None) -> dict:
        return {
            "config": asdict(self.config) if self.config else None,
            "iterations": self.iterations,
            "residual_history": [float(r) for r in self.residual_history],
            "converged": self.converged,
            "certified": self.certified,
            "fixed_point_residual": self.fixed_point_residual,
            "g_norm": self.g_norm,
            "smallness_guard": self.smallness_guard,
            "norms": {k: float(v) for k, v in self.norms.items()},
            "flags": sorted(self.flags),
            "u_path": field_path,
        }

    def save(self, directory: str | Path, stem: str = "solve") -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        fpath = write_bspc(directory / f"{stem}_u.bspc", self.u)
        out = directory / f"{stem}_report.json"
        out.write_text(json.dumps(self.to_json(fpath.name), indent=2, sort_keys=True) + "\n")
        return out


def _norm_fn(cfg: SolverConfig, grid: Grid, part: DyadicPartition | None) -> Callable[[SpectralVector], float]:
    d = grid.dim
    if cfg.norm == "Ld":
        return lambda w: vector_lp_norm(w, d)
    part = part or build_partition(grid)
    params = BesovParams(0.0, d, 2)
    return lambda w: restricted_besov_norm_vector(w, params, list(part.indices), part)


_GUARD_CACHE: dict = {}


def calibrate_bilinear_constant(grid: Grid, samples: int = 6, seed: int = 0,
                                dealias: str = "none") -> float:
    """Sup of ``|B(u,u)|_{L^d} / |u|_{L^d}^2`` over a fixed random solenoidal corpus.

    The corpus is band-limited to a quarter of Nyquist, so its products never
    alias and ``dealias`` has no effect on the value; it is accepted for API
    symmetry and the unpadded product is always used.
    """
    key = (grid, samples, seed)
    if key in _GUARD_CACHE:
        return _GUARD_CACHE[key]
    rng = np.random.default_rng(seed)
    d = grid.dim
    best = 0.0
    for _ in range(samples):
        u = random_vector(grid, rng, r_hi=grid.nyquist / 4, solenoidal=True)
        nu = vector_lp_norm(u, d)
        if nu == 0:
            continue
        best = max(best, vector_lp_norm(bilinear_B(u, u, "none"), d) / nu**2)
    _GUARD_CACHE[key] = best
    return best


def default_smallness_guard(grid: Grid, dealias: str = "none") -> float:
    c = calibrate_bilinear_constant(grid, dealias=dealias)
    return 1.0 / (4.0 * c) if c > 0 else math.inf


def picard_solve(g: SpectralVector, cfg: SolverConfig = SolverConfig(),
                 part: DyadicPartition | None = None) -> SolverReport:
    """Successive approximation ``u <- (1 - damping) u + damping (B(u,u) + g)`` from ``u = g``.

    The residual recorded each step is the fixed-point defect
    ``|B(u,u) + g - u|`` of the current iterate; the loop stops when it drops
    below ``residual_tol`` and the returned ``u`` is that certified iterate.
    """
    grid = g.grid
    d = grid.dim
    guard = cfg.smallness_guard if cfg.smallness_guard is not None else default_smallness_guard(grid, cfg.dealias)
    gnorm = vector_lp_norm(g, d)
    report = SolverReport(u=g, iterations=0, residual_history=[], converged=False, config=cfg,
                          g_norm=gnorm, smallness_guard=guard)
    if gnorm >= guard:
        raise SmallnessViolated(f"|g|_L{d} = {gnorm:.4e} is not below the smallness guard {guard:.4e}", report)
    norm = _norm_fn(cfg, grid, part)
    u = g
    grows = 0
    for m in range(cfg.max_iter):
        F = bilinear_B(u, u, cfg.dealias) + g
        r = norm(F - u)
        report.residual_history.append(r)
        report.iterations = m + 1
        if "aliasing" in F.flags and "aliasing" not in report.flags:
            report.flags.append("aliasing")
        if r <= cfg.residual_tol:
            report.converged = True
            break
        if m > 0 and r > report.residual_history[-2]:
            grows += 1
            if grows >= cfg.divergence_window:
                report.u = u
                raise DivergenceDetected(f"residual grew {grows} consecutive iterations", report)
        else:
            grows = 0
        if not math.isfinite(r):
            raise DivergenceDetected("residual is not finite", report)
        u = F if cfg.damping == 1 else u * (1 - cfg.damping) + F * cfg.damping
    report.u = u
    if not report.converged:
        raise NonConvergence(f"no convergence in {cfg.max_iter} iterations "
                             f"(last residual {report.residual_history[-1]:.3e})", report)
    # independent re-verification with the commuted evaluation order
    check = norm(u - bilinear_B_commuted(u, u, cfg.dealias) - g)
    report.fixed_point_residual = check
    report.certified = check <= cfg.residual_tol
    report.norms = solution_norms(u, part)
    report.norms["aliasing_energy"] = aliasing_energy(u)
    return report


def solution_norms(u: SpectralVector, part: DyadicPartition | None = None,
                   extra_q: tuple = ()) -> dict:
    grid = u.grid
    d = grid.dim
    out = {f"L{d}": vector_lp_norm(u, d), "L2": parseval_norm(u)}
    try:
        part = part or build_partition(grid)
    except ConfigurationError:
        return out
    idx = list(part.indices)
    for q in (2.0,) + tuple(extra_q):
        out[f"B0_{d}_{q:g}"] = restricted_besov_norm_vector(u, BesovParams(0.0, d, q), idx, part)
    out["out_of_range_energy"] = max(out_of_range_energy(c, part) for c in u)
    return out


def decompose_solution(u: SpectralVector, g: SpectralVector,
                       dealias: str = "none") -> tuple[SpectralVector, SpectralVector]:
    """``G = B(g, g)`` and ``U = u - g - G``."""
    G = bilinear_B(g, g, dealias)
    return G, u - g - G
