import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relchaos.core import InputError, deviation_trace, uniform_times
from relchaos.synthetic import (BumpSpikeConfig, BumpSpikeModel, DiagonalModel,
                                DiagonalModelConfig, MatrixModel, MatrixModelConfig,
                                SparseLine, SplitState, SplittingModel, SplittingModelConfig,
                                bumpspike_certificate, bumpspike_envelope, bumpspike_norm,
                                diagonal_evolve, matrix_evolve, perturb_to_chaotic,
                                splitting_evolve, write_certificate_csv)
from relchaos.core import check_growth_bound

SQRT_E4_E2 = 2.7216  # sqrt(e^-4 + e^2), 4 decimals
NORM2_T0 = 7 / 3


def test_diagonal_examples():
    cfg = DiagonalModelConfig([0.0, 0.0])
    np.testing.assert_array_equal(diagonal_evolve(cfg, np.array([1.0, 2.0]), 3.0), [1, 2])
    out = diagonal_evolve(DiagonalModelConfig([1j * math.pi]), np.array([1.0]), 1.0)
    assert out[0] == pytest.approx(-1.0, abs=1e-15)
    d = DiagonalModel([-1.0, 0.5])
    assert d.norm(d.evolve(np.array([1.0, 1.0]), 2.0)) == pytest.approx(SQRT_E4_E2, abs=5e-5)
    with pytest.raises(InputError):
        diagonal_evolve(cfg, np.ones(2), -1.0)
    with pytest.raises(InputError):
        DiagonalModelConfig([])
    with pytest.raises(InputError):
        DiagonalModelConfig([np.nan])


def test_diagonal_eigenorbit():
    lam = [-0.3 + 1j, 0.7, 2j]
    d = DiagonalModel(lam)
    for k, l in enumerate(lam):
        for t in (0.5, 3.0):
            assert d.norm(d.evolve(d.basis(k), t)) == pytest.approx(math.exp(l.real * t) if
                                                                    isinstance(l, complex)
                                                                    else math.exp(l * t),
                                                                    rel=1e-14)


def test_matrix_examples():
    z = MatrixModelConfig(np.zeros((2, 2)))
    np.testing.assert_array_equal(matrix_evolve(z, np.array([1.0, 2.0]), 5.0), [1, 2])
    nil = MatrixModelConfig(np.array([[0.0, 1.0], [0.0, 0.0]]))
    np.testing.assert_allclose(matrix_evolve(nil, np.array([0.0, 1.0]), 3.0), [3, 1],
                               rtol=1e-14)
    rot = MatrixModelConfig(np.array([[0.0, -1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(matrix_evolve(rot, np.array([1.0, 0.0]), math.pi / 2), [0, 1],
                               atol=1e-10)
    with pytest.raises(InputError):
        MatrixModelConfig(np.array([[np.inf]]))
    with pytest.raises(InputError):
        MatrixModelConfig(np.zeros((65, 65)))


def test_matrix_orbit_matches_evolve():
    rng = np.random.default_rng(5)
    m = MatrixModel(MatrixModelConfig(rng.uniform(-2, 2, (5, 5))))
    u = rng.standard_normal(5)
    times = uniform_times(3.0, n=13)
    for t, x in zip(times, m.orbit(u, times)):
        np.testing.assert_allclose(x, m.evolve(u, t), rtol=1e-10, atol=1e-12)


def test_sparse_line_ops():
    a = SparseLine.from_dict({3: 1.0, 0: 2.0})
    b = SparseLine.from_dict({3: 1.0})
    assert (a - b).as_dict() == {0: 2.0}
    assert not (a - a)
    assert a.shifted(1).as_dict() == {2: 1.0}
    assert (2 * a).as_dict() == {0: 4.0, 3: 2.0}


def test_bumpspike_norm_examples():
    cfg = BumpSpikeConfig.default()
    assert bumpspike_norm(cfg, 0) ** 2 == pytest.approx(NORM2_T0, rel=1e-14)
    assert bumpspike_norm(cfg, max(cfg.bump_positions) + 1) == 0.0
    for k in range(21):
        n2 = bumpspike_norm(cfg, k) ** 2
        assert n2 >= 4.0 ** -k * (1 + 8.0 ** k) * (1 - 1e-14)
        assert n2 >= 2 ** k
    with pytest.raises(InputError):
        bumpspike_norm(cfg, -1)


def test_bumpspike_simulation_matches_oracle_long_horizon():
    cfg = BumpSpikeConfig.default()
    m = BumpSpikeModel(cfg)
    times = np.arange(0.0, 10 * max(cfg.bump_positions) + 1)
    sim = np.array([m.norm(s) for s in m.orbit(m.initial_state(), times)])
    exact = np.array([bumpspike_norm(cfg, int(t)) for t in times])
    nz = exact > 0
    assert np.max(np.abs(sim[nz] - exact[nz]) / exact[nz]) <= 1e-12
    assert np.all(sim[~nz] == 0)


def test_bumpspike_grid_alignment():
    m = BumpSpikeModel(BumpSpikeConfig.default(4))
    with pytest.raises(InputError):
        m.evolve(m.initial_state(), 0.5)


def test_certificate_and_csv():
    cfg = BumpSpikeConfig.default(6)
    cert = bumpspike_certificate(cfg)
    assert [c[0] for c in cert] == list(range(6))
    for k, t, lower in cert:
        assert t == k
        assert bumpspike_norm(cfg, k) >= lower
    buf = io.StringIO()
    write_certificate_csv(cfg, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "k,t_k,peak_lower_bound" and len(lines) == 7


def test_envelope_bounds_orbit():
    cfg = BumpSpikeConfig.default()
    m = BumpSpikeModel(cfg)
    tr = deviation_trace(m, m.initial_state(), m.zero(), uniform_times(500.0, dt=1.0))
    assert check_growth_bound(tr, bumpspike_envelope(cfg, tr.values[0]), tr.values[0])


def test_splitting_config_validation():
    with pytest.raises(InputError):
        SplittingModelConfig(stable_rates=(-0.2,), omega_s=0.5)
    with pytest.raises(InputError):
        SplittingModelConfig(omega_s=0.0)


def test_splitting_examples():
    cfg = SplittingModelConfig()
    model = SplittingModel(cfg)
    stable_only = SplitState(np.array([1.0, 2.0]), SparseLine())
    for t in (1.0, 4.0):
        _, n = splitting_evolve(cfg, stable_only, t)
        assert n <= math.exp(-cfg.omega_s * t) * model.norm(stable_only) * (1 + 1e-14)
    unstable_only = SplitState(np.zeros(2), model.default_state().unstable)
    for t in range(0, 25):
        _, n = splitting_evolve(cfg, unstable_only, float(t))
        assert n == pytest.approx(bumpspike_norm(cfg.unstable_block, t), rel=1e-14)
    mixed = model.default_state()
    for k in range(1, 21):
        out, n = splitting_evolve(cfg, mixed, float(k))
        assert n >= 2 ** (k / 2) - model.stable_norm(out)
    with pytest.raises(InputError):
        splitting_evolve(cfg, mixed, 0.5)


def test_splitting_norm_is_pythagorean():
    model = SplittingModel()
    s, _ = splitting_evolve(model.config, model.default_state(), 7.0)
    assert model.norm(s) ** 2 == pytest.approx(model.stable_norm(s) ** 2 +
                                               model.unstable_norm(s) ** 2, rel=1e-14)


def test_perturb_to_chaotic():
    cfg = SplittingModelConfig()
    model = SplittingModel(cfg)
    mixed = model.default_state()
    assert perturb_to_chaotic(cfg, mixed, 0.1) is mixed
    pure = SplitState(np.array([1.0, -1.0]), SparseLine())
    p = perturb_to_chaotic(cfg, pure, 0.01)
    assert model.norm(p - pure) == pytest.approx(0.005, rel=1e-12)
    assert p.unstable
    zero = model.zero()
    assert model.norm(perturb_to_chaotic(cfg, zero, 1.0)) < 1.0
    with pytest.raises(InputError):
        perturb_to_chaotic(cfg, pure, 0.0)


@given(st.integers(1, 12), st.integers(0, 60))
def test_bumpspike_oracle_property(K, m):
    cfg = BumpSpikeConfig.default(K)
    model = BumpSpikeModel(cfg)
    state = model.evolve(model.initial_state(), float(m))
    assert model.norm(state) == pytest.approx(bumpspike_norm(cfg, m), rel=1e-12, abs=0)


@given(st.floats(0.01, 3.0), st.floats(0.01, 3.0), st.integers(0, 2 ** 32 - 1))
def test_isometry_constant_norm(t, s, seed):
    rng = np.random.default_rng(seed)
    d = DiagonalModel(1j * rng.uniform(-5, 5, 4))
    u = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    assert d.norm(d.evolve(u, t + s)) == pytest.approx(d.norm(u), rel=1e-12)
