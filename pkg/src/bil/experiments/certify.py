"""Invariant suite for the grid, partition, Besov and Leray layers.

Every check has a sabotage mode that must make it fail; the mode names match
the check names listed in :data:`CHECKS`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..besov import BesovParams, besov_norm, scaling_transform
from ..fields import random_scalar, random_vector
from ..grid import (
    Grid,
    SpectralVector,
    evaluate,
    from_samples,
    lp_norm,
    parseval_norm,
)
from ..leray import (
    _projector_apply,
    bilinear_B,
    bilinear_B_commuted,
    divergence,
    gradient,
    leray_project,
    tensor_divergence,
    tensor_product,
)
from ..grid import inverse_laplacian
from ..littlewood_paley import build_partition, dyadic_block, partition_residual

# name, module, needs d >= 3, tolerance
CHECKS = (
    ("roundtrip", "grid_spectral", False, 1e-12),
    ("parseval", "grid_spectral", False, 1e-10),
    ("partition", "littlewood_paley", False, 1e-12),
    ("orthogonality", "littlewood_paley", False, 1e-12),
    ("reconstruction", "littlewood_paley", False, 1e-10),
    ("scaling", "besov", False, 1e-10),
    ("projector", "leray_ns", True, 1e-12),
    ("gradient", "leray_ns", True, 1e-12),
    ("bilinear", "leray_ns", True, 1e-12),
    ("commutation", "leray_ns", True, 1e-12),
)


@dataclass
class CheckResult:
    name: str
    module: str
    status: str
    value: float
    tol: float
    detail: str = ""

    def row(self) -> list:
        return [self.name, self.module, self.status, repr(float(self.value)), repr(float(self.tol)), self.detail]


def _rel(a: float, b: float) -> float:
    return a / b if b > 0 else a


def _in_range_field(grid: Grid, part, rng):
    lo, hi = part.certified_annulus
    return random_scalar(grid, rng, lo, hi)


def _broken_project(u: SpectralVector, gain: float) -> SpectralVector:
    out, _ = _projector_apply(u.coeff_stack(), u.grid)
    arr = [c.coeffs + gain * (o - c.coeffs) for c, o in zip(u, out)]
    return SpectralVector(tuple(c.with_coeffs(a) for c, a in zip(u, arr)))


def run_checks(grid: Grid, seed: int = 0, sabotage: tuple = (), samples: int = 5) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    sab = set(sabotage)
    part = build_partition(grid, phi_gain=1.01 if "partition" in sab else 1.0)
    clean = build_partition(grid)
    d = grid.dim
    results = []
    vals: dict[str, float] = {}

    # grid_spectral
    worst = 0.0
    for _ in range(samples):
        f = random_scalar(grid, rng, r_hi=grid.nyquist)
        x = evaluate(f) * (1 + 1e-6 if "roundtrip" in sab else 1.0)
        back = from_samples(grid, x)
        worst = max(worst, _rel(parseval_norm(back - f), parseval_norm(f)))
    vals["roundtrip"] = worst
    worst = 0.0
    for _ in range(samples):
        f = random_scalar(grid, rng)
        l2 = lp_norm(f, 2) * (1.001 if "parseval" in sab else 1.0)
        worst = max(worst, abs(l2**2 - parseval_norm(f) ** 2) / parseval_norm(f) ** 2)
    vals["parseval"] = worst

    # littlewood_paley
    pr = partition_residual(part)
    sq_violation = max(0.0, 0.5 - pr["min_sum_sq"], pr["max_sum_sq"] - 1.0)
    vals["partition"] = max(pr["max_residual"], sq_violation)
    gap = 1 if "orthogonality" in sab else 2
    worst = 0.0
    for _ in range(samples):
        f = random_scalar(grid, rng, r_hi=grid.nyquist)
        for j in clean.indices:
            for k in clean.indices:
                if abs(j - k) >= gap:
                    val = parseval_norm(dyadic_block(dyadic_block(f, k, clean), j, clean))
                    worst = max(worst, _rel(val, parseval_norm(f)))
    vals["orthogonality"] = worst
    worst = 0.0
    idx = list(clean.indices)
    if "reconstruction" in sab:
        idx = idx[:-1]
    for _ in range(samples):
        f = _in_range_field(grid, clean, rng)
        acc = f * 0.0
        for j in idx:
            acc = acc + dyadic_block(f, j, clean)
        worst = max(worst, _rel(parseval_norm(acc - f), parseval_norm(f)))
    vals["reconstruction"] = worst

    # besov: dyadic scaling law at force weight 3
    worst = 0.0
    lo, hi = clean.certified_annulus
    for m in (1, 2):
        for p in (2.0, float(d)):
            f = random_scalar(grid, rng, lo, hi)
            w = 3.0 + (0.01 if "scaling" in sab else 0.0)
            params = BesovParams(-3.0 + d / p, p, 2.0)
            fl = scaling_transform(f, m, w)
            a = besov_norm(fl, params, build_partition(fl.grid))
            b = besov_norm(f, params, clean)
            worst = max(worst, abs(a - b) / b)
    vals["scaling"] = worst

    # leray_ns
    if d >= 3:
        gain = 0.99 if "projector" in sab else 1.0
        worst = 0.0
        for _ in range(samples):
            u = random_vector(grid, rng)
            v = random_vector(grid, rng)
            pu = _broken_project(u, gain)
            ppu = _broken_project(pu, gain)
            pv = _broken_project(v, gain)
            n = parseval_norm(u)
            ip1 = sum(np.vdot(a.coeffs, b.coeffs) for a, b in zip(pu, v))
            ip2 = sum(np.vdot(a.coeffs, b.coeffs) for a, b in zip(u, pv))
            scale = math.sqrt(u.energy() * v.energy())
            worst = max(worst, _rel(parseval_norm(ppu - pu), n), _rel(parseval_norm(divergence(pu)), n),
                        abs(ip1 - ip2) / scale)
        vals["projector"] = worst
        worst = 0.0
        for _ in range(samples):
            p = random_scalar(grid, rng)
            gp = gradient(p)
            proj = gp if "gradient" in sab else leray_project(gp)
            worst = max(worst, _rel(parseval_norm(proj), parseval_norm(gp)))
            u = leray_project(random_vector(grid, rng))
            worst = max(worst, _rel(parseval_norm(leray_project(u) - u), parseval_norm(u)))
        vals["gradient"] = worst
        worst = 0.0
        for _ in range(2):
            u, v, w = (random_vector(grid, rng, r_hi=grid.nyquist / 4) for _ in range(3))
            if "bilinear" in sab:
                B = tensor_divergence(tensor_product(u, v))
                B = SpectralVector(tuple(inverse_laplacian(c) for c in B))
            else:
                B = bilinear_B(u, v)
            worst = max(worst, _rel(parseval_norm(divergence(B)), parseval_norm(B)))
            lin = bilinear_B(u * 2.0 + w * -0.5, v) - (bilinear_B(u, v) * 2.0 + bilinear_B(w, v) * -0.5)
            worst = max(worst, _rel(parseval_norm(lin), parseval_norm(bilinear_B(u, v))))
        vals["bilinear"] = worst
        worst = 0.0
        for _ in range(2):
            u = leray_project(random_vector(grid, rng, r_hi=grid.nyquist / 4))
            B1 = bilinear_B(u, u)
            if "commutation" in sab:
                T = tensor_divergence(tensor_product(u, u))
                B2 = SpectralVector(tuple(inverse_laplacian(c) for c in T))
            else:
                B2 = bilinear_B_commuted(u, u)
            worst = max(worst, _rel(parseval_norm(B1 - B2), parseval_norm(B1)))
        vals["commutation"] = worst

    for name, module, ns_only, tol in CHECKS:
        if ns_only and d < 3:
            results.append(CheckResult(name, module, "skipped", 0.0, tol, "d = 2 plumbing mode"))
            continue
        v = vals[name]
        status = "pass" if v <= tol else "fail"
        detail = "sabotaged" if name in sab else ""
        results.append(CheckResult(name, module, status, v, tol, detail))
    return results
