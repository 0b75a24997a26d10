import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bil.errors import ConfigurationError, FieldFormatError
from bil.fields import random_scalar, random_vector
from bil.grid import (
    Grid,
    SpectralVector,
    derivative,
    evaluate,
    export_slice_csv,
    from_samples,
    inverse_laplacian,
    lp_norm,
    negative_laplacian,
    parseval_norm,
    read_bspc,
    riesz_potential,
    synthesize,
    vector_lp_norm,
    write_bspc,
)


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        Grid(3, 24, 1.0)
    with pytest.raises(ConfigurationError):
        Grid(1, 16, 1.0)
    with pytest.raises(ConfigurationError):
        Grid(3, 16, -1.0)


def test_geometry():
    g = Grid(2, 16, 2.0)
    assert g.shape == (16, 16)
    assert math.isclose(g.volume, (4 * math.pi) ** 2)
    assert math.isclose(g.nyquist, 8 / 2.0)
    # lattice k -> xi = k / L
    assert g.axis_frequency(0)[1] == pytest.approx(0.5)


@pytest.mark.parametrize("L", [1.0, 0.5, 3.0])
def test_single_mode_oracle(L):
    # sin(3 x / L) has coefficients -+ i/2 at k = +-3
    g = Grid(2, 16, L)
    f = synthesize(g, lambda x, y: np.sin(3 * x / L))
    c = f.coeffs
    assert c[3, 0] == pytest.approx(-0.5j, abs=1e-14)
    assert c[-3, 0] == pytest.approx(0.5j, abs=1e-14)
    c2 = c.copy()
    c2[3, 0] = c2[-3, 0] = 0
    assert np.abs(c2).max() < 1e-14
    # d/dx sin(3x/L) = (3/L) cos(3x/L)
    df = evaluate(derivative(f, 0))
    x = g.coordinates()[0]
    assert np.abs(df - 3 / L * np.cos(3 * x / L)).max() < 1e-12


def test_mean_is_zero_coefficient():
    g = Grid(3, 8, 1.0)
    f = synthesize(g, lambda x, y, z: 2.5 + np.cos(x))
    assert f.mean == pytest.approx(2.5)


def test_roundtrip_and_parseval(grid3, rng):
    for _ in range(3):
        f = random_scalar(grid3, rng, r_hi=grid3.nyquist)
        back = from_samples(grid3, evaluate(f))
        assert parseval_norm(back - f) <= 1e-12 * parseval_norm(f)
        assert lp_norm(f, 2) == pytest.approx(parseval_norm(f), rel=1e-12)


def test_lp_norm_constant():
    g = Grid(3, 8, 1.0)
    f = synthesize(g, lambda x, y, z: 2.0 + 0 * x)
    for p in (1.0, 2.0, 3.0, 4.0):
        assert lp_norm(f, p) == pytest.approx(2.0 * g.volume ** (1 / p), rel=1e-13)


def test_derivative_drops_nyquist():
    g = Grid(2, 8, 1.0)
    f = synthesize(g, lambda x, y: np.cos(4 * x))
    assert parseval_norm(derivative(f, 0)) == 0.0


def test_laplacian_inverse(grid3, rng):
    f = random_scalar(grid3, rng)
    back = negative_laplacian(inverse_laplacian(f))
    assert parseval_norm(back - f) <= 1e-13 * parseval_norm(f)
    h = riesz_potential(riesz_potential(f, -1.0), -1.0)
    assert parseval_norm(h - inverse_laplacian(f)) <= 1e-13 * parseval_norm(h)


def test_inverse_laplacian_flags_mean():
    g = Grid(2, 8, 1.0)
    f = synthesize(g, lambda x, y: 1.0 + np.cos(x))
    assert "nonzero_mean" in inverse_laplacian(f).flags


def test_bspc_roundtrip(tmp_path, grid3, rng):
    u = random_vector(grid3, rng)
    p = write_bspc(tmp_path / "u.bspc", u)
    v = read_bspc(p)
    assert isinstance(v, SpectralVector)
    assert v.grid == grid3
    assert all(np.array_equal(a.coeffs, b.coeffs) for a, b in zip(u, v))
    s = read_bspc(write_bspc(tmp_path / "s.bspc", u[0]))
    assert np.array_equal(s.coeffs, u[0].coeffs)


def test_bspc_rejects_garbage(tmp_path, grid3, rng):
    bad = tmp_path / "bad.bspc"
    bad.write_bytes(b"nope")
    with pytest.raises(FieldFormatError):
        read_bspc(bad)
    p = write_bspc(tmp_path / "t.bspc", random_scalar(grid3, rng))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(FieldFormatError):
        read_bspc(p)


def test_slice_csv(tmp_path):
    g = Grid(2, 8, 1.0)
    f = synthesize(g, lambda x, y: np.sin(x))
    text = export_slice_csv(f, tmp_path / "s.csv").read_text().splitlines()
    assert len(text) == 1 + 64


def test_random_fields_are_real_and_meanfree(grid3, rng):
    u = random_vector(grid3, rng, solenoidal=True)
    assert random_scalar(grid3, rng).hermitian_defect < 1e-14
    for c in u:
        assert abs(c.mean) < 1e-15
        assert c.hermitian_defect < 1e-14
    assert vector_lp_norm(u, 3) > 0


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**16))
def test_derivative_linear(a, b, seed):
    g = Grid(2, 16, 1.0)
    r = np.random.default_rng(seed)
    f, h = random_scalar(g, r), random_scalar(g, r)
    lhs = derivative(f * a + h * b, 1)
    rhs = derivative(f, 1) * a + derivative(h, 1) * b
    assert parseval_norm(lhs - rhs) <= 1e-12 * (1 + parseval_norm(lhs))
