import logging
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relchaos.core import (InputError, linear_reduction_check, scaling_invariance_check,
                           verify_cocycle)
from relchaos.pde import (EffectiveParams, GridSpec, PDEModel, RobinParams, band_limited_noise,
                          cfl_timestep, eigenmode, energy_identity_report,
                          energy_identity_residual, energy_trace, gaussian, initial_data,
                          l2_norm, robin_eigenvalue, solve_conjugated, solve_direct,
                          step_direct, write_snapshot_csv)

DT_HEAT = 0.005
DT_DRIFT = 1 / 300


def test_cfl_examples():
    assert cfl_timestep(RobinParams(1, 0, 0, 0), 0.1, 1.0) == pytest.approx(DT_HEAT, rel=1e-15)
    assert cfl_timestep(RobinParams(1, 10, 0, 0), 0.1, 1.0) == pytest.approx(DT_DRIFT, rel=1e-15)
    p = RobinParams(1.3, -2, 0.7, 0.1)
    assert cfl_timestep(p, 0.05, 0.5) == cfl_timestep(p, 0.05, 1.0) / 2
    with pytest.raises(InputError):
        cfl_timestep(p, 0.0)
    with pytest.raises(InputError):
        cfl_timestep(p, 0.1, 1.5)


def test_params_validation():
    with pytest.raises(InputError):
        RobinParams(0.0)
    with pytest.raises(InputError):
        RobinParams(1.0, math.nan)


@given(st.floats(0.1, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-2, 2))
def test_effective_params_exact(a, b, g, k):
    e = EffectiveParams.from_params(RobinParams(a, b, g, k))
    assert e.eta == -b / (2 * a) + 0.0
    assert e.rho == g - b * b / (4 * a)
    assert e.shifted_kappa == k + e.eta


def test_grid_validation():
    p = RobinParams(1, 0, 0, 0)
    with pytest.raises(InputError):
        GridSpec(1.0, 8, 1e-4, 0.1)
    with pytest.raises(InputError):
        GridSpec(1.0, 20, 0.003, 0.01)
    g = GridSpec.build(p, 1.0, 20, 0.1)
    assert g.n_steps * g.dt == pytest.approx(0.1, rel=1e-14)
    assert g.dt <= cfl_timestep(p, g.h, 0.9)
    assert g.N * g.h == g.L
    with pytest.raises(InputError):
        GridSpec(1.0, 20, 0.01, 0.1).check_cfl(p)


def test_step_zero_and_boundary_relations():
    p = RobinParams(1.0, 0.5, -0.2, 0.7)
    g = GridSpec.build(p, 5.0, 50, 0.1)
    np.testing.assert_array_equal(step_direct(p, g, np.zeros(51)), 0)
    u = step_direct(p, g, gaussian(1.0, 0.5)(g.x))
    assert u[-1] == 0.0
    assert u[0] == u[1] / (1 - p.kappa * g.h)


def test_heat_stencil_spike():
    p = RobinParams(1.0, 0.0, 0.0, 0.0)
    g = GridSpec.build(p, 3.2, 32, 0.01)
    u = np.zeros(33)
    u[16] = 1.0
    out = step_direct(p, g, u)
    r = g.dt / g.h ** 2
    assert out[16] == pytest.approx(1 - 2 * r, rel=1e-14)
    assert out[15] == pytest.approx(r, rel=1e-14) and out[17] == pytest.approx(r, rel=1e-14)


def test_eigenmode_one_step_growth():
    p = RobinParams(1.0, 0.0, 0.0, 1.0)
    g = GridSpec.build(p, 12.0, 400, 0.01)
    u = eigenmode(1.0)(g.x)
    out = step_direct(p, g, u)
    ratio = out[1:200] / u[1:200]
    expected = 1 + g.dt * p.alpha * p.kappa ** 2
    # interior rows are exact up to O(h^2) of the stencil
    assert np.max(np.abs(ratio - expected)) <= 10 * g.dt * g.h


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_step_linear(a, b, seed):
    p = RobinParams(0.8, 1.1, -0.4, 0.3)
    g = GridSpec.build(p, 4.0, 40, 0.05)
    rng = np.random.default_rng(seed)
    f, h = rng.standard_normal(41), rng.standard_normal(41)
    lhs = step_direct(p, g, a * f + b * h)
    rhs = a * step_direct(p, g, f) + b * step_direct(p, g, h)
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * max(1.0, np.max(np.abs(rhs)))


@pytest.mark.parametrize("beta, kappa", [(0.0, 0.0), (1.0, -0.5), (-2.0, 0.0), (0.5, -3.0)])
def test_sup_norm_non_increasing(beta, kappa):
    # maximum principle: gamma <= 0, kappa <= 0, cell Peclet |beta| h / alpha <= 2
    p = RobinParams(1.0, beta, -0.1, kappa)
    grid = GridSpec.build(p, 10.0, 100, 1.0)
    grid = GridSpec(grid.L, grid.N, grid.dt, grid.dt * 10_000)
    m = PDEModel(p, grid)
    u = m.sample(band_limited_noise(10.0, seed=4))
    prev = np.max(np.abs(u))
    for v in m.orbit(u, grid.dt * np.arange(1, 10_001)):
        cur = np.max(np.abs(v))
        assert cur <= prev * (1 + 1e-15)
        prev = cur


def test_positive_kappa_amplifies():
    p = RobinParams(1.0, 0.0, 0.0, 1.0)
    g = GridSpec.build(p, 12.0, 240, 0.5)
    run = solve_direct(p, g, eigenmode(1.0))
    assert np.max(np.abs(run.fields[-1])) > np.max(np.abs(run.fields[0]))


def test_solve_zero_and_decay():
    p = RobinParams(1.0, 0.0, -1.0, 1.0)
    g = GridSpec.build(p, 12.0, 200, 1.0)
    zero = solve_direct(p, g, lambda x: np.zeros_like(x))
    assert np.all(zero.fields == 0)
    E = energy_trace(solve_direct(p, g, gaussian(3.0, 0.7)))
    assert E.values[-1] < E.values[0]


def test_eigenmode_energy_tracks_growth():
    p = RobinParams(1.0, 0.0, 0.0, 1.0)
    lam, mode = robin_eigenvalue(p)
    g = GridSpec.build(p, 12.0, 400, 1.0)
    E = energy_trace(solve_direct(p, g, mode))
    ratio = E.values / E.values[0] / np.exp(lam * E.times)
    assert np.max(np.abs(ratio - 1)) <= 0.05


def test_conjugated_degenerates_to_scalar_factor():
    p = RobinParams(1.0, 0.0, 0.8, 0.4)
    g = GridSpec.build(p, 10.0, 100, 0.5)
    conj = solve_conjugated(p, g, gaussian(2.0, 0.5))
    heat = solve_direct(RobinParams(1.0, 0.0, 0.0, 0.4), g, gaussian(2.0, 0.5))
    ref = heat.fields * np.exp(p.gamma * heat.times)[:, None]
    assert np.max(np.abs(conj.fields - ref)) <= 1e-10 * np.max(np.abs(ref))
    zero = solve_conjugated(p, g, lambda x: 0 * x)
    assert np.all(zero.fields == 0)


def test_conjugated_rejects_huge_weight():
    p = RobinParams(0.01, 20.0, 0.0, 0.0)
    with pytest.raises(InputError):
        solve_conjugated(p, GridSpec(1000.0, 100, 1e-3, 1e-3), gaussian())


def test_overflow_flagged_not_raised():
    p = RobinParams(1.0, 0.0, 300.0, 0.0)
    g = GridSpec.build(p, 1.0, 16, 4.0)
    run = solve_direct(p, g, gaussian(0.5, 0.1))
    assert run.overflow
    assert np.all(np.isfinite(run.fields))
    assert energy_trace(run).overflow


def test_truncation_warning(caplog):
    p = RobinParams(1.0, 0.0, 0.0, 0.0)
    g = GridSpec.build(p, 2.0, 40, 0.1)
    with caplog.at_level(logging.WARNING, logger="relchaos.pde"):
        run = solve_direct(p, g, gaussian(1.5, 0.3))
    assert run.truncation_contaminated
    assert "truncation" in caplog.text


def test_energy_trace_examples():
    p = RobinParams(1.0)
    g = GridSpec.build(p, 4.0, 40, 0.01)
    run = solve_direct(p, g, lambda x: 0 * x)
    assert np.all(energy_trace(run).values == 0)
    c = 2.0
    u = np.full(41, c)
    # trapezoid end correction: weights h/2 at both ends
    assert l2_norm(u, g.h) == pytest.approx(c * math.sqrt(g.L), rel=1e-14)


def test_energy_residual_needs_two_fields():
    p = RobinParams(1.0)
    g = GridSpec(1.0, 16, 1e-3, 0.0)
    run = solve_direct(p, g, gaussian(0.3, 0.1))
    with pytest.raises(InputError):
        energy_identity_residual(run, p, g.h, g.dt)


def test_energy_residual_zero_run():
    p = RobinParams(1.0, 0.5, 0.2, 0.3)
    g = GridSpec.build(p, 4.0, 40, 0.05)
    run = solve_direct(p, g, lambda x: 0 * x)
    assert np.all(energy_identity_residual(run, p, g.h, g.dt).values == 0)


def test_energy_residual_sign_arbitration():
    p = RobinParams(1.0, 0.0, 0.0, 1.0)
    res = []
    for N in (240, 480):
        g = GridSpec.build(p, 12.0, N, 0.5)
        g = GridSpec(g.L, g.N, g.dt, g.T, 20)
        rep = energy_identity_report(solve_direct(p, g, eigenmode(1.0)))
        res.append(rep)
    assert res[1]["max_residual_plus"] < 0.6 * res[0]["max_residual_plus"]
    # the minus-sign variant stays O(1): it is refuted by the mode's growth
    assert res[1]["max_residual_minus"] > 1.0
    assert res[1]["max_residual_minus"] > 50 * res[1]["max_residual_plus"]


def test_energy_residual_dirichlet_like_limit():
    # with u_x + kappa u = 0 the Dirichlet limit is kappa -> -inf
    p = RobinParams(1.0, 0.0, 0.0, -1e3)
    res = []
    for N in (240, 480):
        g = GridSpec.build(p, 12.0, N, 0.2)
        g = GridSpec(g.L, g.N, g.dt, g.T, 50)
        run = solve_direct(p, g, gaussian(3.0, 0.7))
        rep = energy_identity_report(run)
        assert abs(run.fields[-1][0]) < 1e-4
        assert rep["max_residual_plus"] == pytest.approx(rep["max_residual_minus"], rel=1e-3)
        res.append(rep["max_residual_plus"])
    # boundary terms vanish; the interior identity converges at second order
    assert res[1] / res[0] <= 0.65


def test_ghost_scheme_second_order_eigenmode():
    p = RobinParams(1.0, 0.0, 0.0, 1.0)
    slopes = []
    for N in (240, 480):
        g = GridSpec.build(p, 12.0, N, 1.0, boundary="ghost")
        E = energy_trace(solve_direct(p, g, eigenmode(1.0), boundary="ghost"))
        slopes.append(np.polyfit(E.times, np.log(E.values), 1)[0])
    assert abs(slopes[1] - 1) < abs(slopes[0] - 1) / 3


def test_robin_eigenvalue_examples():
    assert robin_eigenvalue(RobinParams(1, 0, 0, 1)).lambda_kappa == 1.0
    assert robin_eigenvalue(RobinParams(1, 2, 0, 1)).lambda_kappa == -1.0
    base = robin_eigenvalue(RobinParams(1.5, 0.3, 0.2, 0.8)).lambda_kappa
    assert robin_eigenvalue(RobinParams(1.5, 0.3, 1.2, 0.8)).lambda_kappa == pytest.approx(
        base + 1.0, abs=1e-15)
    assert robin_eigenvalue(RobinParams(1, 0, 0, 0)) is None
    assert robin_eigenvalue(RobinParams(1, 0, 0, -1)) is None
    mode = robin_eigenvalue(RobinParams(1, 0, 0, 2)).mode
    assert mode(np.array([0.0, 1.0]))[1] == pytest.approx(math.exp(-2))


def test_pde_model_lemmas():
    p = RobinParams(1.0, 1.0, 0.5, 0.3)
    g = GridSpec.build(p, 10.0, 400, 0.1)
    m = PDEModel(p, g)
    u0 = m.sample(gaussian(1.0, 0.5))
    assert verify_cocycle(m, u0, 7 * g.dt, 5 * g.dt) == 0.0
    times = g.dt * np.arange(0, 50, 10)
    scale = m.norm(u0)
    assert linear_reduction_check(m, u0, m.zero(), times) <= 1e-10 * scale
    for lam in (0.1, -1.0, 10.0):
        assert scaling_invariance_check(m, u0, m.zero(), lam, times) <= 1e-10
    with pytest.raises(InputError):
        verify_cocycle(m, u0, 0.5 * g.dt, g.dt)


def test_initial_data_library():
    x = np.linspace(0, 10, 101)
    a = band_limited_noise(10.0, seed=3)(x)
    np.testing.assert_array_equal(a, band_limited_noise(10.0, seed=3)(x))
    assert not np.array_equal(a, band_limited_noise(10.0, seed=4)(x))
    assert a[-1] == 0.0
    assert initial_data("boundary_layer", length=2.0)(np.array([2.0]))[0] == pytest.approx(
        math.exp(-1))
    assert initial_data("eigenmode", params=RobinParams(1, 0, 0, 0.5))(np.array([2.0]))[0] == \
        pytest.approx(math.exp(-1))
    with pytest.raises(InputError):
        initial_data("square")
    with pytest.raises(InputError):
        initial_data("noise")


def test_snapshot_csv(tmp_path):
    import io
    buf = io.StringIO()
    write_snapshot_csv(np.array([0.0, 0.5]), np.array([1 / 3, 0.0]), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "x,u" and lines[1] == "0,0.33333333333333331"
