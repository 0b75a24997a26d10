import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bil.errors import ConfigurationError, DivergenceDetected, NonConvergence, SmallnessViolated
from bil.fields import random_scalar, random_vector
from bil.grid import Grid, SpectralVector, evaluate, parseval_norm, read_bspc, synthesize, vector_lp_norm
from bil.leray import (
    SolverConfig,
    aliasing_energy,
    bilinear_B,
    bilinear_B_commuted,
    calibrate_bilinear_constant,
    decompose_solution,
    default_smallness_guard,
    divergence,
    gradient,
    leray_project,
    lift_force,
    max_wavenumber,
    picard_solve,
    pointwise_product,
)


def rel(a, b):
    return parseval_norm(a) / parseval_norm(b)


def test_projector_oracle():
    g = Grid(3, 16, 1.0)
    # (sin x, 0, 0) is a gradient; (sin y, sin z, sin x) is solenoidal
    grad = SpectralVector((synthesize(g, lambda x, y, z: np.sin(x)), *(synthesize(g, lambda x, y, z: 0 * x),) * 2))
    assert parseval_norm(leray_project(grad)) < 1e-15
    sol = SpectralVector(tuple(synthesize(g, f) for f in (lambda x, y, z: np.sin(y), lambda x, y, z: np.sin(z),
                                                            lambda x, y, z: np.sin(x))))
    assert parseval_norm(leray_project(sol) - sol) < 1e-15


def test_projector_algebra(grid3, rng):
    for _ in range(3):
        u, v = random_vector(grid3, rng), random_vector(grid3, rng)
        pu = leray_project(u)
        assert rel(leray_project(pu) - pu, u) <= 1e-12
        assert rel(divergence(pu), u) <= 1e-12
        ip1 = sum(np.vdot(a.coeffs, b.coeffs) for a, b in zip(pu, v))
        ip2 = sum(np.vdot(a.coeffs, b.coeffs) for a, b in zip(u, leray_project(v)))
        assert abs(ip1 - ip2) <= 1e-12 * math.sqrt(u.energy() * v.energy())
        p = random_scalar(grid3, rng)
        assert rel(leray_project(gradient(p)), gradient(p)) <= 1e-12


def test_mean_flag():
    g = Grid(3, 8, 1.0)
    c = synthesize(g, lambda x, y, z: 1.0 + 0 * x)
    u = SpectralVector((c, c, c))
    assert "nonzero_mean" in leray_project(u).flags


def test_pointwise_product_oracle():
    g = Grid(2, 16, 1.0)
    s = synthesize(g, lambda x, y: np.sin(3 * x))
    ss = pointwise_product(s, s)
    x = g.coordinates()[0]
    assert np.abs(evaluate(ss) - 0.5 * (1 - np.cos(6 * x))).max() < 1e-14
    assert "aliasing" not in ss.flags


def test_aliasing_flag_and_pad():
    g = Grid(2, 16, 1.0)
    s = synthesize(g, lambda x, y: np.sin(5 * x))
    raw = pointwise_product(s, s, "none")
    assert "aliasing" in raw.flags
    padded = pointwise_product(s, s, "pad")
    # sin^2(5x) = (1 - cos 10x) / 2; cos 10x lies beyond Nyquist 8 and is truncated
    assert padded.coeffs[0, 0] == pytest.approx(0.5)
    assert abs(padded.coeffs[10 - 16, 0]) < 1e-15
    assert math.isclose(parseval_norm(padded) ** 2, 0.25 * g.volume, rel_tol=1e-12)
    assert max_wavenumber(s) == 5


def test_pad_matches_none_when_resolved(grid3, rng):
    u = random_vector(grid3, rng, r_hi=grid3.nyquist / 4)
    a, b = bilinear_B(u, u, "none"), bilinear_B(u, u, "pad")
    assert rel(a - b, a) <= 1e-13


def test_bilinear_properties(grid3, rng):
    u, v, w = (random_vector(grid3, rng, r_hi=grid3.nyquist / 4) for _ in range(3))
    B = bilinear_B(u, v)
    assert rel(divergence(B), B) <= 1e-12
    lin = bilinear_B(u * 2.0 + w * -0.5, v) - (B * 2.0 + bilinear_B(w, v) * -0.5)
    assert rel(lin, B) <= 1e-12
    pu = leray_project(u)
    B1, B2 = bilinear_B(pu, pu), bilinear_B_commuted(pu, pu)
    assert rel(B1 - B2, B1) <= 1e-12


def test_shear_flow_is_stationary():
    # u = (cos y, 0, 0): (u . grad) u = 0, so B(u, u) = 0
    g = Grid(3, 16, 1.0)
    z = synthesize(g, lambda x, y, z: 0 * x)
    u = SpectralVector((synthesize(g, lambda x, y, z: np.cos(y)), z, z))
    assert parseval_norm(bilinear_B(u, u)) < 1e-15


def test_lift_force(grid3, rng):
    f = random_vector(grid3, rng)
    g = lift_force(f)
    assert rel(divergence(g), g) <= 1e-12


def test_aliasing_energy(grid3, rng):
    low = random_vector(grid3, rng, r_hi=grid3.nyquist / 4)
    assert aliasing_energy(low) == 0.0
    assert aliasing_energy(random_vector(grid3, rng, r_hi=grid3.nyquist)) > 0


def test_calibrated_constant_frozen():
    assert calibrate_bilinear_constant(Grid(3, 16, 1.0)) == pytest.approx(0.03738140391371676, rel=1e-10)
    assert calibrate_bilinear_constant(Grid(3, 32, 1.0)) == pytest.approx(0.022623809581149523, rel=1e-10)
    assert default_smallness_guard(Grid(3, 32, 1.0)) == pytest.approx(1 / (4 * 0.022623809581149523), rel=1e-10)


def _small_force(grid, rng, fraction):
    g = leray_project(random_vector(grid, rng, r_hi=grid.nyquist / 4))
    return g * (fraction * default_smallness_guard(grid) / vector_lp_norm(g, grid.dim))


def test_picard_converges(grid3, rng):
    g = _small_force(grid3, rng, 0.25)
    rep = picard_solve(g, SolverConfig(max_iter=30))
    assert rep.converged and rep.certified
    assert rep.iterations <= 30
    assert rep.residual_history[-1] <= 1e-10
    assert rep.fixed_point_residual <= 1e-10
    assert set(rep.norms) >= {"L3", "L2", "B0_3_2", "aliasing_energy"}
    G, U = decompose_solution(rep.u, g)
    assert vector_lp_norm(U, 3) < vector_lp_norm(G, 3) < vector_lp_norm(g, 3)


def test_picard_zero_force(grid3):
    rep = picard_solve(SpectralVector.zeros(grid3), SolverConfig())
    assert rep.converged and rep.iterations == 1
    assert all(np.all(c.coeffs == 0) for c in rep.u)


def test_picard_besov_residual(grid3, rng):
    g = _small_force(grid3, rng, 0.1)
    rep = picard_solve(g, SolverConfig(norm="besov"))
    assert rep.converged


def test_picard_failures(grid3, rng):
    g = _small_force(grid3, rng, 0.25)
    with pytest.raises(SmallnessViolated):
        picard_solve(g * 10.0, SolverConfig())
    with pytest.raises(NonConvergence) as info:
        picard_solve(g, SolverConfig(max_iter=2))
    assert info.value.report.iterations == 2
    with pytest.raises(DivergenceDetected):
        picard_solve(g * 400.0, SolverConfig(smallness_guard=math.inf, max_iter=60))


def test_solver_config_validation():
    with pytest.raises(ConfigurationError):
        SolverConfig(damping=0.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(norm="H1")
    with pytest.raises(ConfigurationError):
        SolverConfig(dealias="2/3")


def test_report_save(tmp_path, grid3, rng):
    g = _small_force(grid3, rng, 0.1)
    rep = picard_solve(g, SolverConfig())
    path = rep.save(tmp_path, "run")
    doc = json.loads(path.read_text())
    assert doc["converged"] and doc["u_path"] == "run_u.bspc"
    u = read_bspc(tmp_path / "run_u.bspc")
    assert parseval_norm(u - rep.u) == 0.0


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**16), a=st.floats(-2, 2))
def test_B_symmetric_quadratic(seed, a):
    g = Grid(3, 16, 1.0)
    r = np.random.default_rng(seed)
    u = random_vector(g, r, r_hi=g.nyquist / 4)
    B = bilinear_B(u * a, u * a)
    assert parseval_norm(B - bilinear_B(u, u) * a**2) <= 1e-12 * (parseval_norm(B) + 1e-300)
