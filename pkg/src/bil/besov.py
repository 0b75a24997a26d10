"""Homogeneous Besov norms over the certified dyadic range of a partition."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigurationError, RangeError
from .grid import Grid, SpectralScalar, SpectralVector, lp_norm
from .littlewood_paley import DyadicPartition, dyadic_block, out_of_range_energy

__all__ = [
    "BesovParams",
    "NormRecord",
    "block_lp_norms",
    "vector_block_lp_norms",
    "combine_blocks",
    "besov_norm",
    "besov_norm_vector",
    "restricted_besov_norm",
    "restricted_besov_norm_vector",
    "scaling_transform",
    "write_norm_csv",
    "OUT_OF_RANGE_LIMIT",
]

INF = math.inf
OUT_OF_RANGE_LIMIT = 1e-8


@dataclass(frozen=True)
class BesovParams:
    """Regularity ``s``, integrability ``p`` and summability ``q`` (``math.inf`` allowed)."""

    s: float
    p: float
    q: float

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise ConfigurationError("s must be finite")
        if not (1 <= self.p < INF):
            raise ConfigurationError(f"p must lie in [1, inf), got {self.p}")
        if not (self.q >= 1):
            raise ConfigurationError(f"q must lie in [1, inf], got {self.q}")


@dataclass(frozen=True)
class NormRecord:
    label: str
    s: float
    p: float
    q: float
    j_min: int
    j_max: int
    value: float
    out_of_range_energy: float

    def row(self) -> list:
        q = "inf" if self.q == INF else repr(float(self.q))
        return [self.label, repr(float(self.s)), repr(float(self.p)), q, self.j_min, self.j_max,
                repr(float(self.value)), repr(float(self.out_of_range_energy))]


def block_lp_norms(f: SpectralScalar, p: float, part: DyadicPartition,
                   indices: Iterable[int] | None = None) -> dict[int, float]:
    idx = part.indices if indices is None else indices
    return {j: lp_norm(dyadic_block(f, j, part), p) for j in idx}


def vector_block_lp_norms(u: SpectralVector, p: float, part: DyadicPartition,
                          indices: Iterable[int] | None = None) -> dict[int, float]:
    """Per block, the Euclidean combination of the component ``L^p`` norms."""
    idx = list(part.indices if indices is None else indices)
    per = [block_lp_norms(c, p, part, idx) for c in u]
    return {j: math.sqrt(math.fsum(n[j] ** 2 for n in per)) for j in idx}


def combine_blocks(norms: dict[int, float], s: float, q: float) -> float:
    """``(sum_j 2^{jsq} n_j^q)^{1/q}`` in increasing ``j`` order; ``sup`` when ``q = inf``."""
    if not norms:
        return 0.0
    weighted = [2.0 ** (j * s) * norms[j] for j in sorted(norms)]
    if q == INF:
        return max(weighted)
    m = max(weighted)
    if m == 0:
        return 0.0
    return m * math.fsum((w / m) ** q for w in weighted) ** (1.0 / q)


def _range_guard(energy: float, label: str = "field"):
    if energy > OUT_OF_RANGE_LIMIT:
        raise RangeError(
            f"{label} has relative energy {energy:.3e} outside the certified dyadic range",
            out_of_range_energy=energy,
        )


def besov_norm(f: SpectralScalar, params: BesovParams, part: DyadicPartition) -> float:
    _range_guard(out_of_range_energy(f, part))
    return combine_blocks(block_lp_norms(f, params.p, part), params.s, params.q)


def besov_norm_vector(u: SpectralVector, params: BesovParams, part: DyadicPartition) -> float:
    for i, c in enumerate(u):
        _range_guard(out_of_range_energy(c, part), f"component {i}")
    return combine_blocks(vector_block_lp_norms(u, params.p, part), params.s, params.q)


def _check_indices(indices: Sequence[int], part: DyadicPartition) -> list[int]:
    idx = sorted(int(j) for j in indices)
    if len(set(idx)) != len(idx):
        raise ConfigurationError("block index set must be strictly increasing")
    for j in idx:
        part.check_index(j)
    return idx


def restricted_besov_norm(f: SpectralScalar, params: BesovParams, indices: Sequence[int],
                          part: DyadicPartition) -> float:
    """Besov sum taken only over the dyadic indices in ``indices``."""
    idx = _check_indices(indices, part)
    return combine_blocks(block_lp_norms(f, params.p, part, idx), params.s, params.q)


def restricted_besov_norm_vector(u: SpectralVector, params: BesovParams, indices: Sequence[int],
                                 part: DyadicPartition) -> float:
    idx = _check_indices(indices, part)
    return combine_blocks(vector_block_lp_norms(u, params.p, part, idx), params.s, params.q)


def scaling_transform(f: SpectralScalar, lam_log2: int, weight: float) -> SpectralScalar:
    """Return ``lam^weight * f(lam x)`` with ``lam = 2^lam_log2``.

    The dilation is realized exactly by shrinking the period: the sample array
    is unchanged, the box becomes ``[0, 2 pi L / lam)^d`` and every physical
    frequency ``xi`` moves to ``lam * xi``, so dyadic blocks shift by
    ``lam_log2``.  Norms then obey the whole-space law
    ``|f_lam|_{B^s_{p,q}} = lam^{weight + s - d/p} |f|_{B^s_{p,q}}``.
    """
    lam = 2.0 ** int(lam_log2)
    g = f.grid
    new_grid = Grid(g.dim, g.res, g.period / lam)
    return SpectralScalar(new_grid, f.coeffs * lam**weight, f.flags)


def write_norm_csv(path: str | Path, records: Iterable[NormRecord]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "s", "p", "q", "j_min", "j_max", "value", "out_of_range_energy"])
        for r in records:
            w.writerow(r.row())
    return path


def norm_record(label: str, f: SpectralScalar | SpectralVector, params: BesovParams,
                part: DyadicPartition) -> NormRecord:
    if isinstance(f, SpectralVector):
        oor = max(out_of_range_energy(c, part) for c in f)
        value = besov_norm_vector(f, params, part)
    else:
        oor = out_of_range_energy(f, part)
        value = besov_norm(f, params, part)
    return NormRecord(label, params.s, params.p, params.q, part.j_min, part.j_max, value, oor)
