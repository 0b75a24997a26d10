"""The counterexample force family: profiles, schedules and the built fields.

Fields are assembled directly in Fourier space.  On the torus the envelope
``2^k phi(2^k A (x - T))`` is represented by its periodization, whose
coefficients are samples of the continuous transform (Poisson summation):
``c_m = F(m / L) / (2 pi L)^d``.  Spectral supports are therefore exact, and
every support claim can be certified by integer box arithmetic before a
single array is allocated.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, InfeasibleSchedule, SupportError
from .grid import Grid, SpectralScalar, SpectralVector
from .littlewood_paley import PHI_PLATEAU, PHI_SUPPORT, _certified_range, smooth_cutoff

__all__ = [
    "theta_hat",
    "theta",
    "theta_profile",
    "ThetaProfile",
    "phi_hat",
    "phi_profile",
    "matrix_A",
    "direction_e",
    "ConstructionSchedule",
    "asymptotic_schedule",
    "asymptotic_index_set",
    "commensurate_period",
    "LatticeBox",
    "SupportCertificate",
    "certify_schedule",
    "desk_scale",
    "envelope",
    "build_bn",
    "build_cn",
    "build_gn",
    "build_H1_H2",
    "SupportReport",
    "verify_support",
    "verify_support_union",
    "shift_coeffs",
    "CARRIER_RATIO",
    "CARRIER_ANNULUS",
    "DESK_PROFILES",
]

CARRIER_RATIO = 17.0 / 12.0
CARRIER_ANNULUS = (33.0 / 34.0, 35.0 / 34.0)  # in units of the carrier frequency
DEFAULT_MU = 17.0 / 24.0
SUPPORT_TOL = 1e-10

# (mu, width) pairs tried by desk_scale, in order.  The first keeps the
# cross-scale cancellation for stride >= 4; the second is the reference
# modulation with a width that still places a lattice mode in the band on
# coarse grids (single-scale only).
DESK_PROFILES = ((0.5, 0.125), (DEFAULT_MU, 0.25))


# --- profiles ---------------------------------------------------------------


def theta_hat(eta, width: float):
    """Even cutoff: 1 on ``|eta| <= width/2``, 0 on ``|eta| >= width``."""
    return smooth_cutoff(eta, width / 2.0, width)


@lru_cache(maxsize=16)
def _gauss_nodes(n: int):
    return np.polynomial.legendre.leggauss(n)


def theta(y, width: float, nodes: int = 512) -> np.ndarray:
    """Inverse transform ``(1/pi) int_0^w theta_hat(eta) cos(y eta) d eta`` by Gauss-Legendre."""
    y = np.asarray(y, dtype=np.float64)
    t, wts = _gauss_nodes(nodes)
    eta = 0.5 * width * (t + 1.0)
    w = 0.5 * width * wts * theta_hat(eta, width)
    return (np.cos(np.multiply.outer(y, eta)) @ w) / math.pi


@dataclass(frozen=True)
class ThetaProfile:
    """The 1D cutoff pair: ``hat`` has plateau ``|eta| <= width/2`` and support ``|eta| < width``;
    calling the profile evaluates ``theta`` by inverse transform."""

    width: float

    def hat(self, eta):
        return theta_hat(eta, self.width)

    def __call__(self, y, nodes: int = 512) -> np.ndarray:
        return theta(y, self.width, nodes)


def theta_profile(d: int = 3, width: float | None = None) -> ThetaProfile:
    """Cutoff of width ``1/(100 d)`` unless ``width`` is given."""
    if d < 1:
        raise ConfigurationError("d must be positive")
    return ThetaProfile(1.0 / (100.0 * d) if width is None else float(width))


def phi_hat(etas: Sequence[np.ndarray], mu: float, width: float) -> np.ndarray:
    """Transform of ``prod_i theta(y_i) sin(mu y_d)`` on broadcastable per-axis arrays."""
    out = (theta_hat(etas[-1] - mu, width) - theta_hat(etas[-1] + mu, width)) / 2j
    for e in etas[:-1]:
        out = out * theta_hat(e, width)
    return out


def phi_profile(d: int, mu: float = DEFAULT_MU, width: float | None = None) -> Callable:
    """Physical-space sampler ``phi(x) = theta(x_1) ... theta(x_d) sin(mu x_d)``.

    ``width`` defaults to ``1/(100 d)``.  The sampler takes ``d``
    broadcastable coordinate arrays.
    """
    if d < 2:
        raise ConfigurationError("phi needs d >= 2")
    w = 1.0 / (100.0 * d) if width is None else width

    def sample(*x):
        if len(x) != d:
            raise ConfigurationError(f"expected {d} coordinates")
        out = np.sin(mu * np.asarray(x[-1], dtype=np.float64))
        for xi in x:
            out = out * theta(xi, w)
        return out

    return sample


def matrix_A(eps: float, d: int) -> np.ndarray:
    if not 0 < eps < 1:
        raise ConfigurationError("eps must lie in (0, 1)")
    return np.diag([eps, eps] + [1.0] * (d - 2))


def direction_e(d: int) -> np.ndarray:
    e = np.zeros(d)
    e[:2] = math.sqrt(2.0) / 2.0
    return e


# --- schedules --------------------------------------------------------------


def asymptotic_index_set(n: int, stride: int = 8) -> tuple[int, ...]:
    """``{k in stride * N : n/4 <= k <= n/2}``."""
    return tuple(k for k in range(stride, n // 2 + 1, stride) if 4 * k >= n)


def commensurate_period(carrier_log2: int, carrier_index: int) -> float:
    """Period ``L`` making ``Lambda / sqrt 2 = M / L`` exactly for integer ``M``."""
    return 12.0 * math.sqrt(2.0) * carrier_index / (17.0 * 2.0**carrier_log2)


@dataclass(frozen=True)
class ConstructionSchedule:
    """All parameters of one instance of the force family.

    ``translations`` are physical vectors; ``period``/``res`` fix the torus
    (``None`` for the continuum instance); ``carrier_index`` is the
    integer ``M`` with ``sin(Lambda e.x) = sin(M (x_1 + x_2) / L)``.
    """

    d: int
    q: float
    eps: float
    carrier_log2: int
    envelope_scales: tuple
    stride: int
    translations: tuple
    amplitude: float
    mu: float = DEFAULT_MU
    width: float = 0.0
    n_proxy: float = 0.0
    period: float | None = None
    res: int | None = None
    carrier_index: int | None = None
    snap_distance: float = 0.0

    def __post_init__(self):
        K = tuple(int(k) for k in self.envelope_scales)
        object.__setattr__(self, "envelope_scales", K)
        object.__setattr__(self, "translations", tuple(tuple(float(t) for t in T) for T in self.translations))
        if self.width == 0.0:
            object.__setattr__(self, "width", 1.0 / (100.0 * self.d))
        if self.d < 2:
            raise ConfigurationError("d must be at least 2")
        if not 0 < self.eps < 1:
            raise ConfigurationError("eps must lie in (0, 1)")
        if not K:
            raise ConfigurationError("envelope scale set is empty")
        if any(b - a < self.stride for a, b in zip(K, K[1:])):
            raise ConfigurationError(f"envelope scales {K} violate stride {self.stride}")
        if list(K) != sorted(K):
            raise ConfigurationError("envelope scales must be increasing")
        if max(K) > self.carrier_log2 - 2:
            raise ConfigurationError("envelopes must sit at least two octaves below the carrier")
        if len(self.translations) != len(K) or any(len(T) != self.d for T in self.translations):
            raise ConfigurationError("need one d-vector translation per envelope scale")
        if not self.amplitude > 0:
            raise ConfigurationError("amplitude must be positive")

    @property
    def carrier(self) -> float:
        return CARRIER_RATIO * 2.0**self.carrier_log2

    @property
    def size(self) -> int:
        return len(self.envelope_scales)

    def grid(self) -> Grid:
        if self.period is None or self.res is None:
            raise ConfigurationError("schedule has no torus attached (continuum instance)")
        return Grid(self.d, self.res, self.period)

    def check_grid(self, grid: Grid):
        if self.period is None:
            raise ConfigurationError("asymptotic schedules are not representable on a grid")
        if grid.dim != self.d or grid.res != self.res or not math.isclose(grid.period, self.period, rel_tol=1e-14):
            raise ConfigurationError("grid does not match the schedule's torus")

    def to_json(self) -> dict:
        d = asdict(self)
        d["envelope_scales"] = list(self.envelope_scales)
        d["translations"] = [list(t) for t in self.translations]
        d["carrier"] = self.carrier
        return d

    @classmethod
    def from_json(cls, data: dict) -> "ConstructionSchedule":
        data = dict(data)
        data.pop("carrier", None)
        return cls(**data)

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        return path


def amplitude_for(size: int, q: float) -> tuple[float, float]:
    """``(n_proxy, a)`` with ``n_proxy = 32 |K|`` (the asymptotic index set has about ``n/32`` elements)."""
    n_proxy = 32.0 * size
    return n_proxy, n_proxy ** (-1.0 / (2.0 * q))


def asymptotic_schedule(n: int, q: float, eps: float, d: int) -> ConstructionSchedule:
    """The literal instance: carrier ``(17/12) 2^n``, scales ``{k in 8N: n/4 <= k <= n/2}``."""
    K = asymptotic_index_set(n)
    if not K:
        raise ConfigurationError(f"index set is empty for n = {n}")
    e = direction_e(d)
    T = tuple(tuple(2.0 ** (2 * n + k) * e) for k in K)
    return ConstructionSchedule(d=d, q=q, eps=eps, carrier_log2=n, envelope_scales=K, stride=8,
                                translations=T, amplitude=float(n) ** (-1.0 / (2.0 * q)),
                                mu=DEFAULT_MU, width=1.0 / (100.0 * d), n_proxy=float(n))


# --- lattice support certificate -------------------------------------------


@dataclass(frozen=True)
class LatticeBox:
    """Axis-aligned integer box ``lo <= m <= hi`` (inclusive) of lattice wavenumbers."""

    lo: tuple
    hi: tuple

    @property
    def empty(self) -> bool:
        return any(a > b for a, b in zip(self.lo, self.hi))

    def __add__(self, other: "LatticeBox") -> "LatticeBox":
        return LatticeBox(tuple(a + b for a, b in zip(self.lo, other.lo)),
                          tuple(a + b for a, b in zip(self.hi, other.hi)))

    def shift(self, v: Sequence[int]) -> "LatticeBox":
        return LatticeBox(tuple(a + s for a, s in zip(self.lo, v)), tuple(b + s for b, s in zip(self.hi, v)))

    def clip(self, N: int) -> "LatticeBox":
        top = N // 2 - 1
        return LatticeBox(tuple(max(a, -top) for a in self.lo), tuple(min(b, top) for b in self.hi))

    def radius_range(self, L: float) -> tuple[float, float]:
        near = far = 0.0
        for a, b in zip(self.lo, self.hi):
            if a > 0:
                near += a * a
            elif b < 0:
                near += b * b
            far += max(a * a, b * b)
        return math.sqrt(near) / L, math.sqrt(far) / L


def _open_int_range(lo: float, hi: float) -> tuple[int, int]:
    """Integers strictly inside ``(lo, hi)``."""
    a = math.floor(lo) + 1
    b = math.ceil(hi) - 1
    return a, b


def envelope_boxes(sched: ConstructionSchedule, k: int, L: float) -> list[LatticeBox]:
    """Lattice support of the envelope at scale ``k`` (two boxes, one per modulation sign)."""
    d = sched.d
    scales = [2.0**k * a for a in np.diag(matrix_A(sched.eps, d))]
    w, mu = sched.width, sched.mu
    lo, hi = [], []
    for i in range(d - 1):
        a, b = _open_int_range(-w * scales[i] * L, w * scales[i] * L)
        lo.append(a)
        hi.append(b)
    a, b = _open_int_range((mu - w) * scales[-1] * L, (mu + w) * scales[-1] * L)
    plus = LatticeBox(tuple(lo + [a]), tuple(hi + [b]))
    minus = LatticeBox(tuple(lo + [-b]), tuple(hi + [-a]))
    return [plus, minus]


@dataclass
class SupportCertificate:
    """Outcome of the a-priori support arithmetic for a schedule on its torus."""

    ok: bool
    reasons: list
    b_radius: tuple
    carrier_annulus: tuple
    carrier_plateau: tuple
    h2_regions: list
    transverse_resolved: bool
    envelope_modes: dict

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "reasons": list(self.reasons),
            "b_radius": list(self.b_radius),
            "carrier_annulus": list(self.carrier_annulus),
            "carrier_plateau": list(self.carrier_plateau),
            "h2_regions": [list(r) for r in self.h2_regions],
            "transverse_resolved": self.transverse_resolved,
            "envelope_modes": {str(k): v for k, v in self.envelope_modes.items()},
        }


def _radius_hull(boxes: list[LatticeBox], L: float) -> tuple[float, float]:
    rr = [b.radius_range(L) for b in boxes if not b.empty]
    if not rr:
        return (0.0, 0.0)
    return min(r[0] for r in rr), max(r[1] for r in rr)


def certify_schedule(sched: ConstructionSchedule) -> SupportCertificate:
    """Check every support hypothesis of the construction by exact box arithmetic."""
    L, N, M = sched.period, sched.res, sched.carrier_index
    if L is None or N is None or M is None:
        raise ConfigurationError("certificate needs a torus-attached schedule")
    reasons = []
    d = sched.d
    j_min, j_max = _certified_range(Grid(d, N, L))
    carrier_vec = [M, M] + [0] * (d - 2)
    neg_carrier = [-c for c in carrier_vec]
    top = N // 2 - 1

    env_boxes = {}
    modes = {}
    for k in sched.envelope_scales:
        boxes = envelope_boxes(sched, k, L)
        env_boxes[k] = boxes
        count = 0 if boxes[0].empty else int(np.prod([b - a + 1 for a, b in zip(boxes[0].lo, boxes[0].hi)])) * 2
        modes[k] = count
        if count == 0:
            reasons.append(f"envelope at scale {k} has no lattice modes")
    transverse = all(not env_boxes[k][0].empty and env_boxes[k][0].hi[0] >= 1 for k in sched.envelope_scales)

    if not (j_min <= sched.carrier_log2 <= j_max):
        reasons.append(f"carrier block {sched.carrier_log2} outside certified range [{j_min}, {j_max}]")
    for k in sched.envelope_scales:
        if not (j_min <= k <= j_max):
            reasons.append(f"envelope scale {k} outside certified range [{j_min}, {j_max}]")

    b_boxes = []
    for k in sched.envelope_scales:
        for box in env_boxes[k]:
            if box.empty:
                continue
            for v in (carrier_vec, neg_carrier):
                sb = box.shift(v)
                if any(a < -top or b > top for a, b in zip(sb.lo, sb.hi)):
                    reasons.append(f"carrier-shifted envelope {k} leaves the resolved band")
                b_boxes.append(sb)
    b_rad = _radius_hull(b_boxes, L)
    lam = sched.carrier
    a1 = (CARRIER_ANNULUS[0] * lam, CARRIER_ANNULUS[1] * lam)
    plateau = (PHI_PLATEAU[0] * 2.0**sched.carrier_log2, PHI_PLATEAU[1] * 2.0**sched.carrier_log2)
    if b_boxes:
        if not (b_rad[0] >= a1[0] * (1 - 1e-12) and b_rad[1] <= a1[1] * (1 + 1e-12)):
            reasons.append(f"b radii {b_rad} leave the annulus {a1}")
        if not (b_rad[0] >= plateau[0] and b_rad[1] <= plateau[1]):
            reasons.append(f"b radii {b_rad} leave the carrier-block plateau {plateau}")

    # cross terms E_k E_j (k != j) times sin^2: shifts 0 and +-2M v
    regions = []
    K = sched.envelope_scales
    for k, j in itertools.combinations(K, 2):
        prods = [bk + bj for bk in env_boxes[k] for bj in env_boxes[j] if not (bk.empty or bj.empty)]
        low = []
        for p in prods:
            if any(abs(a) > top or abs(b) > top for a, b in zip(p.lo, p.hi)):
                reasons.append("envelope products exceed the grid band (products would fold)")
            low.append(p)
        high = []
        for p in prods:
            for v in ([2 * c for c in carrier_vec], [-2 * c for c in carrier_vec]):
                c = p.shift(v).clip(N)
                if not c.empty:
                    high.append(c)
        for group in (low, high):
            if group:
                regions.append(_radius_hull(group, L))
        for ell in K:
            lo_l, hi_l = PHI_SUPPORT[0] * 2.0**ell, PHI_SUPPORT[1] * 2.0**ell
            for p in low + high:
                r0, r1 = p.radius_range(L)
                if r1 > lo_l * (1 + 1e-12) and r0 < hi_l * (1 - 1e-12):
                    reasons.append(f"cross term ({k},{j}) reaches block {ell} support")
                    break
    unique_reasons = sorted(set(reasons), key=reasons.index)
    return SupportCertificate(ok=not unique_reasons, reasons=unique_reasons, b_radius=b_rad, carrier_annulus=a1,
                              carrier_plateau=plateau, h2_regions=regions, transverse_resolved=transverse,
                              envelope_modes=modes)


def _translations(d: int, L: float, size: int) -> tuple:
    # equally spaced along x_d, where envelopes are narrowest in space
    out = []
    for i in range(size):
        T = [0.0] * d
        T[-1] = 2.0 * math.pi * L * i / size
        out.append(tuple(T))
    return tuple(out)


def _desk_candidates(d: int, N: int, q: float, eps: float, stride: int, gap: int, mu: float, width: float):
    for M in range(N // 2 - 1, 0, -1):
        n_star = math.floor(math.log2(12.0 * math.sqrt(2.0) * M / 17.0))
        L = commensurate_period(n_star, M)
        j_min, j_max = _certified_range(Grid(d, N, L))
        if not j_min <= n_star <= j_max:
            continue
        top = n_star - gap
        K = list(range(top, j_min - 1, -stride))[::-1]
        yield M, n_star, L, K


def desk_scale(d: int, q: float, n_effective: int | None = None, grid: Grid | None = None, *,
               res: int | None = None, eps: float = 0.1, stride: int = 4, gap: int = 2,
               profiles: Sequence[tuple] = DESK_PROFILES, min_scales: int = 2) -> ConstructionSchedule:
    """Fit the construction into an ``N^d`` torus.

    Searches carrier indices ``M`` (largest first) with carrier block inside
    the certified range, envelope scales ``n_star - gap, n_star - gap - stride, ...``
    and the desk profiles in order; every candidate must pass
    :func:`certify_schedule`.  Returns the schedule with the most scales
    (capped at ``n_effective``), ties broken by larger ``M``.  The period of
    ``grid`` is ignored: the torus size is dictated by commensurability.
    """
    if grid is not None:
        if grid.dim != d:
            raise ConfigurationError("grid dimension does not match d")
        res = grid.res
    if res is None:
        raise ConfigurationError("desk_scale needs a grid or a resolution")
    if stride < 1 or gap < 2:
        raise ConfigurationError("stride must be >= 1 and gap >= 2")
    want = n_effective if n_effective is not None else 10**9
    if want < 1:
        raise ConfigurationError("n_effective must be at least 1")
    best = None
    tried = []
    for mu, width in profiles:
        for M, n_star, L, K in _desk_candidates(d, res, q, eps, stride, gap, mu, width):
            for size in range(min(len(K), want), 0, -1):
                Ks = K[len(K) - size:]
                n_proxy, amp = amplitude_for(size, q)
                sched = ConstructionSchedule(
                    d=d, q=q, eps=eps, carrier_log2=n_star, envelope_scales=tuple(Ks), stride=stride,
                    translations=_translations(d, L, size), amplitude=amp, mu=mu, width=width,
                    n_proxy=n_proxy, period=L, res=res, carrier_index=M,
                    snap_distance=abs(M / L - CARRIER_RATIO * 2.0**n_star / math.sqrt(2.0)) / (M / L))
                cert = certify_schedule(sched)
                if cert.ok:
                    if best is None or size > best.size:
                        best = sched
                    break
                tried.append({"M": M, "K": list(Ks), "mu": mu, "width": width, "reasons": cert.reasons[:2]})
    if best is None or best.size < min_scales or (n_effective is not None and best.size < n_effective):
        got = 0 if best is None else best.size
        need = max(min_scales, n_effective or 0)
        raise InfeasibleSchedule(
            f"N={res}, d={d}: at most {got} certified envelope scale(s) fit (need {need}) "
            f"with stride {stride} and carrier gap {gap}",
            {"max_scales": got, "best": best.to_json() if best else None, "rejected": tried[:20]},
        )
    return best


# --- field builders ---------------------------------------------------------


def shift_coeffs(c: np.ndarray, shift: Sequence[int]) -> tuple[np.ndarray, float]:
    """Multiply by ``exp(i shift . x / L)``: move coefficients, dropping modes that leave the band.

    Returns the shifted array and the energy dropped.
    """
    N = c.shape[0]
    out = c
    dropped = 0.0
    for ax, s in enumerate(shift):
        if s == 0:
            continue
        k = np.fft.fftfreq(N, 1.0 / N).astype(int)
        dest = k + s
        keep = (dest > -N // 2) & (dest < N // 2)
        shape = [1] * c.ndim
        shape[ax] = N
        keep = keep.reshape(shape)
        dropped += float(np.sum(np.abs(np.where(keep, 0, out)) ** 2))
        out = np.roll(np.where(keep, out, 0), s, axis=ax)
    return out, dropped


def envelope(sched: ConstructionSchedule, grid: Grid, k: int, translation=None) -> SpectralScalar:
    """Coefficients of the periodized ``2^k phi(2^k A (x - T_k))`` (no carrier, no amplitude)."""
    sched.check_grid(grid)
    d = sched.d
    idx = sched.envelope_scales.index(k)
    T = sched.translations[idx] if translation is None else translation
    scales = [2.0**k * a for a in np.diag(matrix_A(sched.eps, d))]
    etas = [grid.axis_frequency(i) / scales[i] for i in range(d)]
    phase = 1.0
    for i in range(d):
        if T[i] != 0.0:
            phase = phase * np.exp(-1j * T[i] * grid.axis_frequency(i))
    hat = phi_hat(etas, sched.mu, sched.width) * phase
    norm = 2.0**k / (float(np.prod(scales)) * (2.0 * math.pi * grid.period) ** d)
    coeffs = np.broadcast_to(hat * norm, grid.shape).copy()
    return SpectralScalar(grid, coeffs)


def _carrier_vector(sched: ConstructionSchedule) -> list[int]:
    return [sched.carrier_index, sched.carrier_index] + [0] * (sched.d - 2)


def apply_carrier(f: SpectralScalar, sched: ConstructionSchedule) -> SpectralScalar:
    """``f sin(Lambda e.x)``; raises if any energy would fall off the band."""
    v = _carrier_vector(sched)
    up, d1 = shift_coeffs(f.coeffs, v)
    dn, d2 = shift_coeffs(f.coeffs, [-s for s in v])
    if d1 + d2 > 1e-24 * max(f.energy(), 1e-300):
        raise SupportError("carrier shift pushes envelope energy past the band edge")
    return f.with_coeffs((up - dn) / 2j)


def apply_sin_squared(f: SpectralScalar, sched: ConstructionSchedule) -> SpectralScalar:
    """``f sin^2(Lambda e.x) = f/2 - (f e^{2i..} + f e^{-2i..})/4``, truncated to the band."""
    v = [2 * s for s in _carrier_vector(sched)]
    up, _ = shift_coeffs(f.coeffs, v)
    dn, _ = shift_coeffs(f.coeffs, [-s for s in v])
    out = 0.5 * f.coeffs - 0.25 * (up + dn)
    _zero_nyquist(out)
    return f.with_coeffs(out)


def _zero_nyquist(c: np.ndarray):
    N = c.shape[0]
    for ax in range(c.ndim):
        sl = [slice(None)] * c.ndim
        sl[ax] = N // 2
        c[tuple(sl)] = 0.0


def build_bn(sched: ConstructionSchedule, grid: Grid | None = None) -> SpectralScalar:
    """``a sum_k 2^k phi(2^k A (x - T_k)) sin(Lambda e.x)``.

    Raises :class:`SupportError` when an envelope has no lattice modes at all
    (unresolved).  Weaker resolution loss (transverse directions collapsing to
    the zero mode) is reported by :func:`certify_schedule`, not raised.
    """
    grid = grid or sched.grid()
    sched.check_grid(grid)
    acc = np.zeros(grid.shape, dtype=np.complex128)
    for k in sched.envelope_scales:
        E = envelope(sched, grid, k)
        if E.energy() == 0.0:
            raise SupportError(f"envelope at scale {k} is unresolved on N={grid.res}")
        acc += apply_carrier(E, sched).coeffs
    return SpectralScalar(grid, sched.amplitude * acc)


def build_cn(b: SpectralScalar, plane_tol: float = 1e-12) -> SpectralScalar:
    """``F^{-1}((xi_2 - xi_1) / xi_2 * b_hat)``, zero on ``xi_2 = 0``.

    This is exactly the multiplier for which ``(d_1 - d_2) b = -d_2 c``.
    """
    g = b.grid
    xi1 = g.axis_frequency(0)
    xi2 = g.axis_frequency(1)
    on_plane = np.broadcast_to(xi2 == 0, g.shape)
    total = b.energy()
    near = float(np.sum(np.abs(b.coeffs[on_plane]) ** 2))
    if total > 0 and near > plane_tol * total:
        raise SupportError(f"b carries relative energy {near / total:.2e} on the plane xi_2 = 0")
    mult = np.zeros(np.broadcast_shapes(xi1.shape, xi2.shape))
    np.divide(xi2 - xi1, np.broadcast_to(xi2, mult.shape), out=mult, where=np.broadcast_to(xi2 != 0, mult.shape))
    return b.with_coeffs(b.coeffs * mult)


def build_gn(sched: ConstructionSchedule, grid: Grid | None = None) -> SpectralVector:
    """``g = (b, c - b, 0, ..., 0)``."""
    grid = grid or sched.grid()
    b = build_bn(sched, grid)
    c = build_cn(b)
    zero = SpectralScalar.zeros(grid)
    return SpectralVector((b, c - b) + (zero,) * (sched.d - 2))


def envelope_products(sched: ConstructionSchedule, grid: Grid) -> dict:
    """Exact products ``E_k E_j`` (``k <= j``) of the carrier-free envelopes."""
    from .leray import max_wavenumber, pointwise_product

    envs = {k: envelope(sched, grid, k) for k in sched.envelope_scales}
    band = max(max_wavenumber(E) for E in envs.values())
    if 2 * band >= grid.res // 2:
        raise SupportError("envelope products would fold on this grid")
    out = {}
    for k, j in itertools.combinations_with_replacement(sched.envelope_scales, 2):
        out[(k, j)] = pointwise_product(envs[k], envs[j], "none")
    return out


def build_H1_H2(sched: ConstructionSchedule, grid: Grid | None = None,
                products: dict | None = None) -> tuple[SpectralScalar, SpectralScalar]:
    """Split ``b^2 / a^2`` into same-scale squares ``H1`` and cross terms ``H2``.

    Both carry ``sin^2`` of the carrier; modes pushed beyond the band by the
    doubled carrier are dropped, consistently with a truncated ``b^2``.
    """
    grid = grid or sched.grid()
    sched.check_grid(grid)
    prods = products if products is not None else envelope_products(sched, grid)
    h1 = SpectralScalar.zeros(grid)
    h2 = SpectralScalar.zeros(grid)
    for (k, j), P in prods.items():
        if k == j:
            h1 = h1 + P
        else:
            h2 = h2 + P * 2.0
    return apply_sin_squared(h1, sched), apply_sin_squared(h2, sched)


# --- support reports --------------------------------------------------------


@dataclass(frozen=True)
class SupportReport:
    target_annulus: tuple
    inside_energy: float
    outside_energy: float
    passed: bool

    @property
    def relative_outside(self) -> float:
        tot = self.inside_energy + self.outside_energy
        return self.outside_energy / tot if tot > 0 else 0.0

    def to_json(self) -> dict:
        return {"target_annulus": [list(a) if isinstance(a, tuple) else a for a in self.target_annulus],
                "inside_energy": self.inside_energy, "outside_energy": self.outside_energy,
                "relative_outside": self.relative_outside, "pass": self.passed}


def verify_support_union(f: SpectralScalar, annuli: Sequence[tuple], tol: float = SUPPORT_TOL) -> SupportReport:
    """Split Parseval energy by membership of ``|xi|`` in the union of closed annuli."""
    r = f.grid.radius
    inside = np.zeros(f.grid.shape, dtype=bool)
    for lo, hi in annuli:
        inside |= (r >= lo * (1 - 1e-12)) & (r <= hi * (1 + 1e-12))
    e = np.abs(f.coeffs) ** 2
    vol = f.grid.volume
    ein = float(np.sum(e[inside])) * vol
    eout = float(np.sum(e[~inside])) * vol
    tot = ein + eout
    ok = eout <= tol * tot if tot > 0 else True
    return SupportReport(tuple(tuple(a) for a in annuli), ein, eout, ok)


def verify_support(f: SpectralScalar, r_lo: float, r_hi: float, tol: float = SUPPORT_TOL) -> SupportReport:
    rep = verify_support_union(f, [(r_lo, r_hi)], tol)
    return replace(rep, target_annulus=(r_lo, r_hi))
