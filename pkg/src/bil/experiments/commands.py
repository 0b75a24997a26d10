"""The five harness commands.  Each returns an exit status and writes its files to ``out``.

Exit statuses: 0 all assertions pass, 1 an assertion (or the solver) failed,
2 configuration or feasibility error.  Sweeps that cannot reach the requested
number of feasible instances still write the rows they could compute.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..construction import build_gn, build_H1_H2, certify_schedule, desk_scale, envelope_products
from ..errors import ConfigurationError, InfeasibleSchedule, SolverError
from ..fields import random_vector
from ..grid import Grid, SpectralVector, parseval_norm, read_bspc, vector_lp_norm, write_bspc
from ..inflation import frame_j_terms, torus_j_terms
from ..leray import decompose_solution, default_smallness_guard, leray_project, picard_solve
from ..littlewood_paley import build_partition, chi_profile, dyadic_block, export_partition_csv, phi_profile_radial
from .certify import run_checks
from .config import RunConfig
from .plots import line_chart
from .sweep import evaluate_instance, fit_slope, plan_sweep, run_parallel, write_rows

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

SLOPE_TOL = 0.15
BOUNDED_BELOW = 0.5  # policy stand-in for the existential constant
LEAKAGE_LIMIT = 0.1


@dataclass
class Outcome:
    command: str
    status: int
    assertions: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    def check(self, name: str, ok: bool, **info):
        self.assertions.append({"name": name, "pass": bool(ok), **info})

    @property
    def first_failure(self) -> str | None:
        for a in self.assertions:
            if not a["pass"]:
                return a["name"]
        return None


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def _sanitize(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {k: _sanitize(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_sanitize(v) for v in x]
    return x


def write_report(out: Path, oc: Outcome, cfg: RunConfig) -> Path:
    path = out / f"{oc.command}_report.json"
    doc = {"command": oc.command, "exit_status": oc.status, "first_failure": oc.first_failure,
           "assertions": oc.assertions, "notes": oc.notes, "files": sorted(oc.files), "config": cfg.to_json()}
    path.write_text(json.dumps(_sanitize(doc), indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _grid(cfg: RunConfig) -> Grid:
    return Grid(cfg.grid.dim, cfg.grid.res, cfg.grid.period)


# --- certify ----------------------------------------------------------------


def cmd_certify(cfg: RunConfig, out: Path, threads: int = 1) -> Outcome:
    grid = _grid(cfg)
    oc = Outcome("certify", EXIT_OK)
    results = run_checks(grid, cfg.seed, cfg.sabotage)
    path = out / "certify_checks.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "module", "status", "value", "tol", "detail"])
        for r in results:
            w.writerow(r.row())
    oc.files.append(path.name)
    for r in results:
        if r.status != "skipped":
            oc.check(r.name, r.status == "pass", module=r.module, value=r.value, tol=r.tol)
        else:
            oc.notes.setdefault("skipped", []).append(r.name)
    part = build_partition(grid, phi_gain=1.01 if "partition" in cfg.sabotage else 1.0)
    csv_path = export_partition_csv(out / "certify_partition.csv", part)
    oc.files.append(csv_path.name)
    r = np.linspace(0.0, 3.0, 601)
    total = sum(part.phi_gain * phi_profile_radial(r * 2.0**-j) for j in range(-4, 5))
    svg = line_chart(out / "certify_partition.svg",
                     {"chi": (r, chi_profile(r)), "phi": (r, part.phi_gain * phi_profile_radial(r)),
                      "sum_j phi(2^-j r)": (r, total)},
                     xlabel="|xi|", ylabel="profile", title="dyadic partition", markers=False)
    oc.files.append(svg.name)
    oc.notes["grid"] = {"dim": grid.dim, "res": grid.res, "period": grid.period,
                        "j_min": part.j_min, "j_max": part.j_max}
    oc.status = EXIT_OK if oc.first_failure is None else EXIT_FAIL
    return oc


# --- sweeps -----------------------------------------------------------------


def _sweep(cfg: RunConfig, oc: Outcome, solve: bool, threads: int, eps: float | None = None):
    s = cfg.schedule
    scheds, missing = plan_sweep(cfg.grid.dim, cfg.grid.res, s.q, s.eps if eps is None else eps,
                                 s.sizes, s.stride, s.gap)
    oc.notes["requested_sizes"] = list(s.sizes)
    oc.notes["feasible_sizes"] = [sc.size for sc in scheds]
    if missing:
        oc.notes["infeasible"] = missing
    # distinct sizes only (desk_scale never returns more than requested)
    rows = run_parallel(lambda sc: evaluate_instance(sc, cfg.solver, solve=solve), scheds, threads)
    return scheds, rows


def _feasibility_gate(cfg: RunConfig, oc: Outcome, rows: list) -> bool:
    need = cfg.schedule.min_sweep
    if len(rows) < need:
        oc.status = EXIT_CONFIG
        oc.notes["feasibility"] = (f"only {len(rows)} of the requested |K| values are realizable on "
                                   f"N={cfg.grid.res}, d={cfg.grid.dim} (need {need})")
        return False
    return True


def cmd_decay(cfg: RunConfig, out: Path, threads: int = 1) -> Outcome:
    oc = Outcome("decay", EXIT_OK)
    d, q = cfg.grid.dim, cfg.schedule.q
    _, rows = _sweep(cfg, oc, solve=False, threads=threads)
    oc.files.append(write_rows(out / "decay.csv", rows).name)
    rows = sorted(rows, key=lambda r: r.size)
    target = 1.0 / d - 1.0 / (2.0 * q)
    oc.notes["target_slope"] = target
    if rows:
        svg = line_chart(out / "decay_g.svg",
                         {"|g| B0_{d,1}": ([r.n_proxy for r in rows], [r.g_B0_d1 for r in rows]),
                          "|c| B0_{d,1}": ([r.n_proxy for r in rows], [r.c_B0_d1 for r in rows])},
                         xlabel="n_proxy", ylabel="norm", logx=True, logy=True, title="force norm decay")
        oc.files.append(svg.name)
    if not _feasibility_gate(cfg, oc, rows):
        return oc
    slope = fit_slope([r.n_proxy for r in rows], [r.g_B0_d1 for r in rows])
    oc.check("g_slope", abs(slope - target) <= SLOPE_TOL, slope=slope, target=target, tol=SLOPE_TOL)
    by_carrier = sorted(rows, key=lambda r: r.carrier_log2)
    mono = all(b.c_B0_d1 <= a.c_B0_d1 for a, b in zip(by_carrier, by_carrier[1:]))
    oc.check("c_monotone", mono, values=[r.c_B0_d1 for r in by_carrier])
    oc.status = EXIT_OK if oc.first_failure is None else EXIT_FAIL
    return oc


def _eps_sweep(cfg: RunConfig, base, oc: Outcome, out: Path) -> list[dict]:
    """J1/J2 across eps, on the torus when it resolves the anisotropy, else in the envelope frame."""
    d = cfg.grid.dim
    recs = []
    for e in cfg.schedule.eps_sweep:
        sc = replace(base, eps=e) if base is not None else None
        torus = None
        resolved = False
        if sc is not None:
            resolved = certify_schedule(sc).transverse_resolved
            jt = torus_j_terms(sc)
            torus = (jt.totals["J1"], jt.totals["J2"])
        mu = base.mu if base is not None else 17.0 / 24.0
        width = base.width if base is not None else 0.25
        fr = frame_j_terms(d, e, mu, width, res=cfg.schedule.frame_res)
        recs.append({"eps": e, "frame_J1": fr.j1, "frame_J2": fr.j2,
                     "torus_J1": torus[0] if torus else 0.0, "torus_J2": torus[1] if torus else 0.0,
                     "torus_resolved": resolved})
    path = out / "inflation_eps.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps", "frame_J1", "frame_J2", "frame_ratio", "torus_J1", "torus_J2", "torus_ratio",
                    "torus_resolved"])
        for r in recs:
            fr_ratio = r["frame_J2"] / r["frame_J1"] if r["frame_J1"] > 0 else 0.0
            to_ratio = r["torus_J2"] / r["torus_J1"] if r["torus_J1"] > 0 else 0.0
            w.writerow([repr(r["eps"]), repr(r["frame_J1"]), repr(r["frame_J2"]), repr(fr_ratio),
                        repr(r["torus_J1"]), repr(r["torus_J2"]), repr(to_ratio), str(r["torus_resolved"])])
    oc.files.append(path.name)
    return recs


def _block_rows(sched, out_rows: list):
    grid = sched.grid()
    part = build_partition(grid)
    prods = envelope_products(sched, grid)
    _, H2 = build_H1_H2(sched, grid, prods)
    jt = torus_j_terms(sched, grid, prods)
    n2 = parseval_norm(H2)
    for ell in sched.envelope_scales:
        canc = parseval_norm(dyadic_block(H2, ell, part)) / n2 if n2 > 0 else 0.0
        pb = jt.per_block[ell]
        out_rows.append([sched.size, repr(float(sched.eps)), ell, repr(pb["J1"]), repr(pb["J2"]), repr(pb["J3"]),
                         repr(pb["J4"]), repr(canc)])
    return jt


def cmd_inflation(cfg: RunConfig, out: Path, threads: int = 1) -> Outcome:
    oc = Outcome("inflation", EXIT_OK)
    d = cfg.grid.dim
    scheds, rows = _sweep(cfg, oc, solve=False, threads=threads)
    oc.files.append(write_rows(out / "inflation.csv", rows).name)
    blocks = []
    jts = [_block_rows(sc, blocks) for sc in scheds]
    path = out / "inflation_blocks.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["size", "eps", "ell", "J1", "J2", "J3", "J4", "H2_block_ratio"])
        w.writerows(blocks)
    oc.files.append(path.name)
    base = scheds[-1] if scheds else None
    recs = _eps_sweep(cfg, base, oc, out)
    eps = [r["eps"] for r in recs]
    use_torus = all(r["torus_resolved"] and r["torus_J1"] > 0 for r in recs)
    key = "torus" if use_torus else "frame"
    oc.notes["eps_sweep_frame"] = key
    ratios = [r[f"{key}_J2"] / r[f"{key}_J1"] if r[f"{key}_J1"] > 0 else math.nan for r in recs]
    svg = line_chart(out / "inflation_eps.svg", {f"J2/J1 ({key})": (eps, ratios),
                                                "eps^2 reference": (eps, [ratios[0] * (e / eps[0]) ** 2 for e in eps]
                                                                    if ratios and math.isfinite(ratios[0]) else [])},
                     xlabel="eps", ylabel="J2/J1", logx=True, logy=True, title="anisotropy competition")
    oc.files.append(svg.name)
    if rows:
        rs = sorted(rows, key=lambda r: r.size)
        svg = line_chart(out / "inflation_B.svg", {"restricted |B(g,g)| over K": ([r.size for r in rs],
                                                                                [r.BGG_B0_dq_K for r in rs])},
                         xlabel="|K|", ylabel="norm", title="inflation lower bound")
        oc.files.append(svg.name)
    # eps-scaling assertion can be evaluated regardless of the size sweep
    fac = []
    for (ea, ra), (eb, rb) in zip(zip(eps, ratios), list(zip(eps, ratios))[1:]):
        fac.append((ra / rb) / (ea / eb) ** 2 if rb and math.isfinite(ra) and math.isfinite(rb) else math.nan)
    oc.check("J2_over_J1_eps2", bool(fac) and all(0.5 <= f <= 2.0 for f in fac), factors=fac, frame=key)
    if not _feasibility_gate(cfg, oc, rows):
        return oc
    rs = sorted(rows, key=lambda r: r.size)
    first = rs[0].BGG_B0_dq_K
    vals = [r.BGG_B0_dq_K for r in rs]
    oc.check("restricted_B_nonvanishing", first > 0 and min(vals) >= BOUNDED_BELOW * first, values=vals)
    jt = jts[-1]
    j1 = jt.totals["J1"]
    oc.check("J3_J4_leakage", j1 > 0 and jt.totals["J3"] < LEAKAGE_LIMIT * j1 and jt.totals["J4"] < LEAKAGE_LIMIT * j1,
             J1=j1, J3=jt.totals["J3"], J4=jt.totals["J4"])
    sc = scheds[-1]
    ct = [jt.per_block[ell]["J1"] / (sc.eps ** (1 - 2.0 / d) * 2.0 ** (2 * ell)) for ell in sc.envelope_scales]
    oc.check("J1_block_constant", min(ct) > 0 and max(ct) <= 2.0 * min(ct), c_tilde=ct)
    canc = [float(b[-1]) for b in blocks]
    oc.check("H2_cancellation", all(c <= 1e-10 for c in canc), worst=max(canc) if canc else 0.0)
    oc.status = EXIT_OK if oc.first_failure is None else EXIT_FAIL
    return oc


# --- solve ------------------------------------------------------------------


def _source(cfg: RunConfig, grid: Grid):
    src = cfg.source
    if src.kind == "zero":
        return SpectralVector.zeros(grid), None
    if src.kind == "file":
        g = read_bspc(src.path)
        if not isinstance(g, SpectralVector):
            raise ConfigurationError("source file must hold a vector field")
        return g, None
    if src.kind == "schedule":
        s = cfg.schedule
        sched = desk_scale(grid.dim, s.q, n_effective=max(s.sizes), res=grid.res, eps=s.eps, stride=s.stride,
                           gap=s.gap, min_scales=1)
        return build_gn(sched), sched
    rng = np.random.default_rng(cfg.seed)
    lo, hi = src.band if src.band else (1.0 / grid.period, grid.nyquist / 4.0)
    u = leray_project(random_vector(grid, rng, lo, hi))
    guard = cfg.solver.smallness_guard or default_smallness_guard(grid, cfg.solver.dealias)
    u = u * (src.guard_fraction * guard / vector_lp_norm(u, grid.dim))
    return u, None


def cmd_solve(cfg: RunConfig, out: Path, threads: int = 1) -> Outcome:
    oc = Outcome("solve", EXIT_OK)
    grid = _grid(cfg)
    g, sched = _source(cfg, grid)
    if sched is not None:
        grid = sched.grid()
        oc.notes["schedule"] = sched.to_json()
    try:
        rep = picard_solve(g, cfg.solver)
    except SolverError as exc:
        oc.status = EXIT_FAIL
        oc.check("solver", False, error=type(exc).__name__, message=str(exc))
        if exc.report is not None:
            oc.notes["partial_report"] = exc.report.to_json(None)
        return oc
    fpath = write_bspc(out / "solve_u.bspc", rep.u)
    oc.files.append(fpath.name)
    oc.notes["solver"] = rep.to_json(fpath.name)
    oc.check("converged", rep.converged and rep.certified, iterations=rep.iterations,
             fixed_point_residual=rep.fixed_point_residual)
    hist = rep.residual_history
    svg = line_chart(out / "solve_residual.svg", {"residual": (list(range(1, len(hist) + 1)), hist)},
                     xlabel="iteration", ylabel="|B(u,u) + g - u|", logy=True, title="Picard residual")
    oc.files.append(svg.name)
    if cfg.source.cubic_check:
        recs = []
        for i in range(cfg.source.halvings):
            gi = g * 2.0**-i
            ri = picard_solve(gi, cfg.solver)
            G, U = decompose_solution(ri.u, gi, cfg.solver.dealias)
            recs.append((i, vector_lp_norm(gi, grid.dim), vector_lp_norm(G, grid.dim),
                         vector_lp_norm(U, grid.dim), ri.iterations))
        path = out / "solve_cubic.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["halving", "g_Ld", "G_Ld", "U_Ld", "iterations", "U_halving_factor"])
            for i, r in enumerate(recs):
                fac = recs[i - 1][3] / r[3] if i and r[3] > 0 else 0.0
                w.writerow([r[0], repr(r[1]), repr(r[2]), repr(r[3]), r[4], repr(fac)])
        oc.files.append(path.name)
        gx = [r[1] for r in recs]
        svg = line_chart(out / "solve_cubic.svg", {"|U|": (gx, [r[3] for r in recs]),
                                                   "|G|": (gx, [r[2] for r in recs])},
                         xlabel="|g|_Ld", ylabel="norm", logx=True, logy=True, title="remainder orders")
        oc.files.append(svg.name)
        if all(r[3] > 0 for r in recs):
            slope = fit_slope(gx, [r[3] for r in recs])
        else:
            slope = math.nan
        factors = [a[3] / b[3] for a, b in zip(recs, recs[1:]) if b[3] > 0]
        oc.check("cubic_remainder", 2.9 <= slope <= 3.1, slope=slope, halving_factors=factors)
    oc.status = EXIT_OK if oc.first_failure is None else EXIT_FAIL
    return oc


# --- endtoend ---------------------------------------------------------------


def cmd_endtoend(cfg: RunConfig, out: Path, threads: int = 1) -> Outcome:
    oc = Outcome("endtoend", EXIT_OK)
    d, q = cfg.grid.dim, cfg.schedule.q
    try:
        _, rows = _sweep(cfg, oc, solve=True, threads=threads)
    except SolverError as exc:
        oc.status = EXIT_FAIL
        oc.check("solver", False, error=type(exc).__name__, message=str(exc))
        return oc
    oc.files.append(write_rows(out / "endtoend.csv", rows).name)
    rs = sorted(rows, key=lambda r: r.size)
    if rs:
        svg = line_chart(out / "endtoend_norms.svg",
                         {"|g| B0_{d,q}": ([r.size for r in rs], [r.g_B0_dq for r in rs]),
                          "|u| B0_{d,q}(K)": ([r.size for r in rs], [r.u_B0_dq_K for r in rs])},
                         xlabel="|K|", ylabel="norm", logy=True, title="norm inflation trend")
        oc.files.append(svg.name)
    in_regime = d >= 4 and q < d / 2.0
    oc.notes["regime"] = "ill-posedness regime" if in_regime else "verdict withheld (outside q < d/2, d >= 4)"
    oc.check("rows_finite", all(r.finite() for r in rs))
    oc.check("restricted_le_unrestricted", all(r.u_B0_dq_K <= r.u_B0_dq * (1 + 1e-12) and
                                              r.BGG_B0_dq_K <= r.BGG_B0_dq * (1 + 1e-12) for r in rs))
    if not _feasibility_gate(cfg, oc, rows):
        oc.notes["verdict"] = "INFEASIBLE" if in_regime else "WITHHELD"
        return oc
    if not in_regime:
        oc.notes["verdict"] = "WITHHELD"
        oc.status = EXIT_OK if oc.first_failure is None else EXIT_FAIL
        return oc
    gq = [r.g_B0_dq for r in rs]
    uk = [r.u_B0_dq_K for r in rs]
    dec = all(b < a for a, b in zip(gq, gq[1:]))
    bb = max(uk) > 0 and min(uk) >= BOUNDED_BELOW * max(uk)
    oc.check("g_strictly_decreasing", dec, values=gq)
    oc.check("u_bounded_below", bb, values=uk, factor=BOUNDED_BELOW)
    oc.notes["verdict"] = "PASS" if dec and bb else "FAIL"
    oc.status = EXIT_OK if oc.first_failure is None else EXIT_FAIL
    return oc


COMMAND_TABLE = {
    "certify": cmd_certify,
    "decay": cmd_decay,
    "inflation": cmd_inflation,
    "solve": cmd_solve,
    "endtoend": cmd_endtoend,
}


def run(cfg: RunConfig, out: str | Path, threads: int = 1) -> Outcome:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        oc = COMMAND_TABLE[cfg.command](cfg, out, threads)
    except InfeasibleSchedule as exc:
        oc = Outcome(cfg.command, EXIT_CONFIG, notes={"feasibility": str(exc), "diagnostics": exc.diagnostics})
    write_report(out, oc, cfg)
    return oc
