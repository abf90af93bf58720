import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relchaos.core import (GrowthBound, InputError, ReferenceState, TrajectoryTrace,
                           UnsupportedOperationError, check_growth_bound, deviation_trace,
                           linear_reduction_check, scaling_invariance_check, stable_norm,
                           time_shift_invariance, uniform_times, verify_cocycle,
                           write_trace_csv)
from relchaos.synthetic import DiagonalModel, MatrixModel, MatrixModelConfig

E_MINUS_1 = 0.3678794  # exp(-1), 7 digits


class Nonlinear:
    linear = False


def test_trace_validation():
    with pytest.raises(InputError):
        TrajectoryTrace([0.5, 1.0], [1.0, 1.0])
    with pytest.raises(InputError):
        TrajectoryTrace([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(InputError):
        TrajectoryTrace([0.0, 1.0], [1.0])
    with pytest.raises(InputError):
        TrajectoryTrace([0.0, 1.0], [1.0, -1.0])
    with pytest.raises(InputError):
        TrajectoryTrace([0.0, 1.0], [1.0, np.inf])


def test_trace_csv_roundtrip(tmp_path):
    tr = TrajectoryTrace([0.0, 0.1, 0.3], [1.0, 1 / 3, math.pi], "x")
    path = tmp_path / "t.csv"
    tr.to_csv(path)
    assert path.read_text().splitlines()[0] == "t,value"
    back = TrajectoryTrace.from_csv(path)
    np.testing.assert_array_equal(back.times, tr.times)
    np.testing.assert_array_equal(back.values, tr.values)
    buf = io.StringIO()
    write_trace_csv(tr, buf)
    assert "0.33333333333333331" in buf.getvalue()


def test_stable_norm_no_overflow():
    x = np.array([1e200, 1e200])
    assert stable_norm(x) == pytest.approx(math.sqrt(2) * 1e200)
    assert stable_norm(np.zeros(3)) == 0.0


def test_deviation_scalar_exponential():
    d = DiagonalModel([-1.0])
    tr = deviation_trace(d, d.basis(0), ReferenceState.zero(d), [0.0, 1.0])
    assert tr.values[1] == pytest.approx(E_MINUS_1, abs=5e-8)


def test_deviation_identical_states_is_zero():
    d = DiagonalModel([0.3, -1.0 + 2j])
    u = np.array([1.0, 2.0 - 1j])
    tr = deviation_trace(d, u, ReferenceState(u, False), uniform_times(3.0, n=7))
    assert np.all(tr.values == 0)


def test_deviation_rotation_constant():
    m = MatrixModel(MatrixModelConfig(np.array([[0.0, -1.0], [1.0, 0.0]])))
    u0 = np.array([3.0, 4.0])
    tr = deviation_trace(m, u0, m.zero(), uniform_times(10.0, n=41))
    np.testing.assert_allclose(tr.values, 5.0, rtol=1e-12)


def test_deviation_dimension_mismatch():
    d = DiagonalModel([-1.0, -2.0])
    with pytest.raises(InputError):
        deviation_trace(d, np.ones(2), np.ones(3), [0.0, 1.0])


def test_deviation_overflow_truncates():
    d = DiagonalModel([800.0])
    tr = deviation_trace(d, d.basis(0), d.zero(), [0.0, 0.5, 1.0, 2.0])
    assert tr.overflow
    assert len(tr) == 2


def test_linear_reduction_zero_reference_exact():
    rng = np.random.default_rng(0)
    m = MatrixModel(MatrixModelConfig(rng.standard_normal((3, 3))))
    assert linear_reduction_check(m, rng.standard_normal(3), m.zero(), uniform_times(2, n=5)) == 0


def test_linear_reduction_needs_linear_model():
    with pytest.raises(UnsupportedOperationError):
        linear_reduction_check(Nonlinear(), 0, 0, [0.0])


def test_reference_fixed_point_check():
    d = DiagonalModel([0.0, -1.0])
    ReferenceState.checked(d, np.array([2.0, 0.0]))
    with pytest.raises(InputError):
        ReferenceState.checked(d, np.array([0.0, 1.0]))


def test_growth_bound_examples():
    t = uniform_times(5.0, n=51)
    assert check_growth_bound(TrajectoryTrace(t, np.exp(-t)), GrowthBound(1.0, 0.0), 1.0)
    res = check_growth_bound(TrajectoryTrace(t, np.exp(t)), GrowthBound(1.0, 0.5), 1.0)
    assert not res and res.first_violation == pytest.approx(0.1)
    with pytest.raises(InputError):
        check_growth_bound(TrajectoryTrace(t, np.exp(t)), GrowthBound(1.0, 0.5), 0.0)
    with pytest.raises(InputError):
        GrowthBound(0.5, 1.0)


def test_cocycle_examples():
    d = DiagonalModel([-0.4 + 1j, 0.2])
    u = np.array([1.0, 1.0 + 1j])
    assert verify_cocycle(d, u, 0.0, 1.3) == 0.0
    assert verify_cocycle(d, u, 0.7, 1.3) <= 1e-12 * 2


def test_time_shift():
    d = DiagonalModel([-1.0])
    tr = deviation_trace(d, d.basis(0), d.zero(), uniform_times(5.0, dt=0.5))
    assert time_shift_invariance(tr, 0.0) == tr
    last = time_shift_invariance(tr, 5.0)
    assert len(last) == 1 and last.values[0] == tr.values[-1]
    sh = time_shift_invariance(tr, 1.0)
    np.testing.assert_allclose(sh.values, tr.values[: len(sh)] * math.exp(-1), rtol=1e-14)
    with pytest.raises(InputError):
        time_shift_invariance(tr, 6.0)


@given(st.integers(0, 20), st.integers(0, 20))
def test_time_shift_composes(i, j):
    t = uniform_times(10.0, dt=0.25)
    tr = TrajectoryTrace(t, np.exp(np.sin(t)))
    if t[i] + t[j] > tr.horizon:
        return
    twice = time_shift_invariance(time_shift_invariance(tr, t[i]), t[j])
    once = time_shift_invariance(tr, t[i + j])
    np.testing.assert_array_equal(twice.values, once.values)


@pytest.mark.parametrize("lam, tol", [(1.0, 0.0), (-1.0, 1e-15), (3.5, 1e-12)])
def test_scaling_examples(lam, tol):
    d = DiagonalModel([-0.5, 0.3 + 2j])
    err = scaling_invariance_check(d, np.array([1.0, -2.0j]), d.zero(), lam,
                                   uniform_times(4.0, n=9))
    assert err <= tol


def test_scaling_rejects_zero():
    d = DiagonalModel([-0.5])
    with pytest.raises(InputError):
        scaling_invariance_check(d, d.basis(0), d.zero(), 0.0, [0.0])


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=5), st.integers(0, 2 ** 32 - 1))
def test_reduction_random_pairs(rates, seed):
    rng = np.random.default_rng(seed)
    d = DiagonalModel(rates)
    n = len(rates)
    # fixed points of a diagonal model live on the zero-rate coordinates
    ref = np.where(np.array(rates) == 0, rng.standard_normal(n), 0.0)
    u0 = rng.standard_normal(n)
    times = uniform_times(3.0, n=7)
    scale = max(1.0, max(deviation_trace(d, u0, ref, times).values))
    assert linear_reduction_check(d, u0, ReferenceState.checked(d, ref), times) <= 1e-12 * scale
