import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bil.errors import ConfigurationError, RangeError
from bil.fields import random_scalar
from bil.grid import Grid, parseval_norm
from bil.littlewood_paley import (
    PHI_PLATEAU,
    PHI_SUPPORT,
    block_partition_apply,
    build_partition,
    chi_profile,
    dyadic_block,
    export_partition_csv,
    low_pass,
    partition_residual,
    phi_profile_radial,
    smooth_cutoff,
    smooth_step,
    tilde_block,
)


@pytest.mark.parametrize("N,L,expected", [
    (16, 1.0, (-1, 1)),
    (32, 1.0, (-1, 2)),
    (64, 1.0, (-1, 3)),
    (128, 1.0, (-1, 4)),
    (64, 4.0, (-3, 1)),
])
def test_certified_range_frozen(N, L, expected):
    p = build_partition(Grid(3, N, L))
    assert (p.j_min, p.j_max) == expected
    # rule: phi support of j_min reaches past 1/L, that of j_max stays inside Nyquist
    assert PHI_SUPPORT[1] * 2.0**p.j_min > 1 / L
    assert PHI_SUPPORT[1] * 2.0 ** (p.j_min - 1) <= 1 / L
    assert PHI_SUPPORT[1] * 2.0**p.j_max <= N / (2 * L)
    assert PHI_SUPPORT[1] * 2.0 ** (p.j_max + 1) > N / (2 * L)


def test_too_small_grid():
    with pytest.raises(ConfigurationError):
        build_partition(Grid(2, 8, 1.0))


def test_profiles():
    r = np.linspace(0, 3, 3001)
    chi = chi_profile(r)
    assert np.all(chi[r <= 0.75] == 1.0)
    assert np.all(chi[r >= 4 / 3] == 0.0)
    assert np.all(np.diff(chi) <= 1e-15)
    phi = phi_profile_radial(r)
    assert np.all(phi[(r <= PHI_SUPPORT[0]) | (r >= PHI_SUPPORT[1])] == 0.0)
    plateau = (r >= PHI_PLATEAU[0]) & (r <= PHI_PLATEAU[1])
    assert np.all(phi[plateau] == 1.0)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(-2, 2))
def test_smooth_step_bounds(t):
    v = float(smooth_step(t))
    assert 0.0 <= v <= 1.0
    assert float(smooth_step(-t)) == pytest.approx(1.0 - v, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(r=st.floats(0.05, 50.0))
def test_telescoping_unbounded(r):
    # chi + sum_{j>=0} phi(2^-j r) = 1 for all r
    total = chi_profile(r) + sum(phi_profile_radial(r * 2.0**-j) for j in range(0, 8))
    assert float(total) == pytest.approx(1.0, abs=1e-14)


def test_smooth_cutoff_edges():
    assert float(smooth_cutoff(0.5, 1.0, 2.0)) == 1.0
    assert float(smooth_cutoff(2.5, 1.0, 2.0)) == 0.0
    assert float(smooth_cutoff(1.5, 1.0, 2.0)) == pytest.approx(0.5, abs=1e-12)


def test_partition_residual(grid3_64):
    pr = partition_residual(build_partition(grid3_64))
    assert pr["max_residual"] <= 1e-12
    assert 0.5 <= pr["min_sum_sq"] and pr["max_sum_sq"] <= 1.0
    assert pr["lattice_radii"] > 100


def test_orthogonality_and_reconstruction(grid3, rng):
    p = build_partition(grid3)
    f = random_scalar(grid3, rng, r_hi=grid3.nyquist)
    for j in p.indices:
        for k in p.indices:
            if abs(j - k) >= 2:
                assert parseval_norm(dyadic_block(dyadic_block(f, j, p), k, p)) <= 1e-12 * parseval_norm(f)
    lo, hi = p.certified_annulus
    h = random_scalar(grid3, rng, lo, hi)
    blocks = block_partition_apply(h, p)
    acc = sum((b for _, b in blocks[1:]), blocks[0][1])
    assert parseval_norm(acc - h) <= 1e-12 * parseval_norm(h)
    assert blocks.out_of_range_energy < 1e-20 and not blocks.flagged


def test_out_of_range_flagged(grid3, rng):
    p = build_partition(grid3)
    f = random_scalar(grid3, rng, r_hi=grid3.nyquist)
    blocks = block_partition_apply(f, p)
    assert blocks.flagged


def test_tilde_and_low(grid3, rng):
    p = build_partition(grid3)
    f = random_scalar(grid3, rng)
    j = p.j_min + 1
    t = tilde_block(dyadic_block(f, j, p), j, p)
    # tilde is 1 on the support of phi_j
    assert parseval_norm(t - dyadic_block(f, j, p)) <= 1e-13 * parseval_norm(f)
    lp = low_pass(f, 10, p)
    assert parseval_norm(lp - f) == 0.0


def test_index_outside_range(grid3, rng):
    p = build_partition(grid3)
    with pytest.raises(RangeError):
        dyadic_block(random_scalar(grid3, rng), p.j_max + 1, p)


def test_partition_csv(tmp_path):
    path = export_partition_csv(tmp_path / "p.csv", samples=11)
    lines = path.read_text().splitlines()
    assert len(lines) == 12
    assert lines[0].split(",")[0] == "radius"
    assert path.read_bytes() == export_partition_csv(tmp_path / "q.csv", samples=11).read_bytes()
