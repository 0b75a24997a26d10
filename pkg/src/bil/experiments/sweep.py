"""One row per schedule instance: norms, solver outcome and J terms."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from ..besov import BesovParams, besov_norm, besov_norm_vector, restricted_besov_norm_vector
from ..construction import ConstructionSchedule, build_cn, build_gn, certify_schedule, desk_scale, envelope_products
from ..errors import InfeasibleSchedule
from ..grid import vector_lp_norm
from ..inflation import torus_j_terms
from ..leray import SolverConfig, bilinear_B, decompose_solution, picard_solve
from ..littlewood_paley import build_partition

__all__ = ["SweepRow", "evaluate_instance", "write_rows", "fit_slope", "plan_sweep", "run_parallel"]


@dataclass(frozen=True)
class SweepRow:
    size: int
    n_proxy: float
    eps: float
    g_B0_d1: float
    g_B0_dq: float
    c_B0_d1: float
    BGG_B0_dq_K: float
    u_B0_dq: float
    U_Ld: float
    U_B0_dq: float
    J1: float
    J2: float
    J3: float
    J4: float
    iterations: int
    flags: str
    carrier_log2: int
    u_B0_dq_K: float
    BGG_B0_dq: float

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def cells(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return out

    def finite(self) -> bool:
        return all(math.isfinite(getattr(self, f.name)) for f in fields(self) if isinstance(getattr(self, f.name), float))


def plan_sweep(d: int, res: int, q: float, eps: float, sizes: Sequence[int], stride: int,
               gap: int) -> tuple[list[ConstructionSchedule], list[dict]]:
    """Schedules for each requested ``|K|``; infeasible sizes are returned with diagnostics."""
    scheds, missing = [], []
    for size in sizes:
        try:
            scheds.append(desk_scale(d, q, n_effective=size, res=res, eps=eps, stride=stride, gap=gap,
                                     min_scales=1))
        except InfeasibleSchedule as exc:
            missing.append({"size": size, "reason": str(exc), "max_scales": exc.diagnostics.get("max_scales")})
    return scheds, missing


def evaluate_instance(sched: ConstructionSchedule, solver: SolverConfig | None = None,
                      solve: bool = True) -> SweepRow:
    grid = sched.grid()
    d, q = grid.dim, sched.q
    part = build_partition(grid)
    K = list(sched.envelope_scales)
    flags = []
    cert = certify_schedule(sched)
    if not cert.ok:
        flags.append("uncertified")
    if not cert.transverse_resolved:
        flags.append("transverse_unresolved")
    g = build_gn(sched, grid)
    c = build_cn(g[0])
    p1, pq = BesovParams(0.0, d, 1.0), BesovParams(0.0, d, q)
    g1 = besov_norm_vector(g, p1, part)
    gq = besov_norm_vector(g, pq, part)
    c1 = besov_norm(c, p1, part) if c.energy() > 0 else 0.0
    G = bilinear_B(g, g, "pad")
    bgg_k = restricted_besov_norm_vector(G, pq, K, part)
    bgg = restricted_besov_norm_vector(G, pq, list(part.indices), part)
    if bgg == 0.0:
        flags.append("degenerate_B")
    jt = torus_j_terms(sched, grid, envelope_products(sched, grid))
    iters, u_q, u_k, U_ld, U_q = 0, 0.0, 0.0, 0.0, 0.0
    if solve:
        cfg = solver or SolverConfig()
        rep = picard_solve(g, cfg, part)
        u = rep.u
        iters = rep.iterations
        u_q = restricted_besov_norm_vector(u, pq, list(part.indices), part)
        u_k = restricted_besov_norm_vector(u, pq, K, part)
        _, U = decompose_solution(u, g, "pad")
        U_ld = vector_lp_norm(U, d)
        U_q = restricted_besov_norm_vector(U, pq, list(part.indices), part)
        if not rep.certified:
            flags.append("uncertified_fixed_point")
        if "aliasing" in rep.flags:
            flags.append("aliasing")
    return SweepRow(size=sched.size, n_proxy=float(sched.n_proxy), eps=float(sched.eps), g_B0_d1=g1,
                    g_B0_dq=gq, c_B0_d1=c1, BGG_B0_dq_K=bgg_k, u_B0_dq=u_q, U_Ld=U_ld, U_B0_dq=U_q,
                    J1=jt.totals["J1"], J2=jt.totals["J2"], J3=jt.totals["J3"], J4=jt.totals["J4"],
                    iterations=iters, flags="|".join(flags), carrier_log2=sched.carrier_log2,
                    u_B0_dq_K=u_k, BGG_B0_dq=bgg)


def run_parallel(fn: Callable, items: Iterable, threads: int = 1) -> list:
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def write_rows(path: str | Path, rows: Sequence[SweepRow]) -> Path:
    path = Path(path)
    rows = sorted(rows, key=lambda r: (r.size, r.eps))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SweepRow.header())
        for r in rows:
            w.writerow(r.cells())
    return path


def fit_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(lx, ly, 1)[0])

