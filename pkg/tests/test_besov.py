import math

import numpy as np
import pytest

from bil.besov import (
    BesovParams,
    besov_norm,
    besov_norm_vector,
    block_lp_norms,
    combine_blocks,
    norm_record,
    restricted_besov_norm,
    scaling_transform,
    write_norm_csv,
)
from bil.errors import ConfigurationError, RangeError
from bil.fields import random_scalar, random_vector
from bil.grid import Grid, lp_norm, synthesize
from bil.littlewood_paley import build_partition


def test_params_validation():
    with pytest.raises(ConfigurationError):
        BesovParams(0.0, 0.5, 1.0)
    with pytest.raises(ConfigurationError):
        BesovParams(0.0, 2.0, 0.0)


def test_combine_blocks_oracle():
    norms = {0: 1.0, 1: 2.0, 2: 0.0}
    assert combine_blocks(norms, 0.0, 1.0) == pytest.approx(3.0)
    assert combine_blocks(norms, 1.0, 2.0) == pytest.approx(math.sqrt(1 + 16))
    assert combine_blocks(norms, 0.0, math.inf) == pytest.approx(2.0)


def test_single_plateau_mode():
    # cos(x1 * |xi|) with |xi| on the plateau of block 0 only: phi_0 = 1, others 0
    g = Grid(3, 32, 4.0)
    p = build_partition(g)
    k = 6  # |xi| = 6 / 4 = 1.5, the plateau edge of block 0
    f = synthesize(g, lambda x, y, z: np.cos(k * x / 4.0))
    norms = block_lp_norms(f, 3.0, p)
    assert norms[0] == pytest.approx(lp_norm(f, 3.0), rel=1e-12)
    assert all(v < 1e-12 * norms[0] for j, v in norms.items() if j != 0)
    s = -0.7
    assert besov_norm(f, BesovParams(s, 3.0, 2.0), p) == pytest.approx(norms[0], rel=1e-12)
    assert restricted_besov_norm(f, BesovParams(s, 3.0, 1.0), [-3, -2], p) < 1e-12


@pytest.mark.parametrize("m", [1, 2])
@pytest.mark.parametrize("p", [2.0, 3.0])
@pytest.mark.parametrize("weight", [3.0, 1.0])
def test_scaling_identity(m, p, weight, rng):
    g = Grid(3, 32, 1.0)
    part = build_partition(g)
    lo, hi = part.certified_annulus
    f = random_scalar(g, rng, lo, hi)
    params = BesovParams(-weight + 3 / p, p, 2.0)
    fl = scaling_transform(f, m, weight)
    assert besov_norm(fl, params, build_partition(fl.grid)) == pytest.approx(besov_norm(f, params, part), rel=1e-10)


def test_range_guard(rng):
    g = Grid(3, 32, 1.0)
    part = build_partition(g)
    f = random_scalar(g, rng, r_hi=g.nyquist)
    with pytest.raises(RangeError) as info:
        besov_norm(f, BesovParams(0.0, 3.0, 2.0), part)
    assert info.value.out_of_range_energy > 1e-8


def test_vector_norm_dominates_components(rng):
    g = Grid(3, 32, 1.0)
    part = build_partition(g)
    lo, hi = part.certified_annulus
    u = random_vector(g, rng, lo, hi)
    params = BesovParams(0.0, 3.0, 1.0)
    full = besov_norm_vector(u, params, part)
    assert all(besov_norm(c, params, part) <= full * (1 + 1e-12) for c in u)


def test_norm_csv(tmp_path, rng):
    g = Grid(3, 32, 1.0)
    part = build_partition(g)
    lo, hi = part.certified_annulus
    rec = norm_record("f", random_scalar(g, rng, lo, hi), BesovParams(0.0, 3.0, 2.0), part)
    path = write_norm_csv(tmp_path / "n.csv", [rec])
    assert len(path.read_text().splitlines()) == 2
