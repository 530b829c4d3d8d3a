import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from gpp.calibrate import (CalibStats, average_params, calib_stats, calibration_loss,
                           solve_batch, solve_calibration)
from gpp.errors import DimensionMismatch, EmptyInput
from gpp.sensing import CalibrationParams, forward_calibrated, forward_linear, make_operator
from gpp.verify import naive_calibration_loss, naive_stats, stationarity_residual

seeds = st.integers(0, 2 ** 32 - 1)


def instance(seed, m=16, n=64):
    r = np.random.default_rng(seed)
    return make_operator(m, n, seed), r.normal(size=m), r.random(n)


def test_zero_signal_gives_zero_stats():
    op, y, _ = instance(0)
    s = calib_stats(op, y, np.zeros(64))
    assert (s.c_phi, s.c_one, s.theta_phi, s.theta_one, s.lam) == (0, 0, 0, 0, 0)


def test_ideal_measurements_tie_stats(rng):
    op = make_operator(16, 64, 3)
    x = rng.random(64)
    s = calib_stats(op, forward_linear(op, x), x)
    assert s.c_one == pytest.approx(s.lam, rel=1e-12)
    assert s.c_phi == pytest.approx(s.theta_phi, rel=1e-12)


@given(seeds)
def test_stats_match_naive(seed):
    op, y, x = instance(seed)
    s = calib_stats(op, y, x)
    ref = naive_stats(op, y, x)
    got = [s.c_phi, s.c_one, s.theta_phi, s.theta_one, s.lam]
    assert np.allclose(got, ref, rtol=1e-12, atol=1e-12)


@given(seeds)
def test_cauchy_schwarz_and_signs(seed):
    op, y, x = instance(seed)
    s = calib_stats(op, y, x)
    assert s.theta_phi >= 0 and s.theta_one >= 0
    assert abs(s.lam) <= np.sqrt(s.theta_phi * s.theta_one) * (1 + 1e-12)


def test_stats_dimension_check():
    op, y, x = instance(1)
    with pytest.raises(DimensionMismatch):
        calib_stats(op, y[:-1], x)


def test_ideal_case_is_one_zero(rng):
    op = make_operator(16, 64, 7)
    x = rng.random(64)
    cal = solve_calibration(calib_stats(op, forward_linear(op, x), x))
    assert abs(cal.a - 1) < 1e-9 and abs(cal.b) < 1e-9 and not cal.degenerate


@pytest.mark.parametrize("a,b", [(0.85, 0.5), (1.0, 0.0), (0.3, -0.25), (-1.2, 3.0)])
def test_exact_model_identity(rng, a, b):
    op = make_operator(16, 64, 11)
    x = rng.random(64)
    y = forward_calibrated(op, CalibrationParams(a, b), x)
    cal = solve_calibration(calib_stats(op, y, x))
    assert abs(cal.a - a) < 1e-9 and abs(cal.b - b) < 1e-9


@given(seeds)
def test_closed_form_is_stationary_and_optimal(seed):
    op, y, x = instance(seed)
    cal = solve_calibration(calib_stats(op, y, x))
    assume(not cal.degenerate)
    da, db = stationarity_residual(op, y, x, cal)
    assert max(da, db) <= 1e-8 * max(1.0, y @ y)
    best = calibration_loss(op, y, x, cal)
    for da_, db_ in ((1e-3, 0), (-1e-3, 0), (0, 1e-3), (0, -1e-3)):
        assert calibration_loss(op, y, x, CalibrationParams(cal.a + da_, cal.b + db_)) >= best


def test_degenerate_fallbacks():
    op, y, _ = instance(2)
    cal = solve_calibration(calib_stats(op, y, np.zeros(64)))
    assert (cal.a, cal.b, cal.degenerate) == (1.0, 0.0, True)
    # zero-sum signal: theta_one = 0, the shift is unidentifiable
    x = np.zeros(64)
    x[0], x[1] = 1.0, -1.0
    assert solve_calibration(calib_stats(op, y, x)).degenerate
    # Phi x parallel to the ones vector: lambda^2 = theta_phi * theta_one
    s = CalibStats(c_phi=1.0, c_one=2.0, theta_phi=4.0, theta_one=1.0, lam=2.0)
    assert solve_calibration(s).degenerate


def test_batch_matches_scalar():
    stats = [calib_stats(*instance(s)) for s in range(5)]
    batch = CalibStats(*(np.array([getattr(s, f) for s in stats]) for f in
                         ("c_phi", "c_one", "theta_phi", "theta_one", "lam")))
    a, b, deg = solve_batch(batch)
    for i, s in enumerate(stats):
        cal = solve_calibration(s)
        assert (a[i], b[i]) == (cal.a, cal.b)
    assert not deg.any()


def test_loss_examples(rng):
    op, y, x = instance(4)
    cal = CalibrationParams(0.7, -0.1)
    assert calibration_loss(op, forward_calibrated(op, cal, x), x, cal) == pytest.approx(0, abs=1e-20)
    assert calibration_loss(op, y, np.zeros(64), cal) == pytest.approx(y @ y, rel=1e-15)
    assert calibration_loss(op, y, x, cal) == pytest.approx(
        naive_calibration_loss(op, y, x, 0.7, -0.1), rel=1e-10)


def test_average_params():
    one = CalibrationParams(0.3, 0.2)
    assert average_params([one]) == one
    assert average_params([CalibrationParams(1, 0)] * 2) == CalibrationParams(1, 0)
    avg = average_params([CalibrationParams(0.8, 0.4), CalibrationParams(0.9, 0.6)])
    assert avg.a == pytest.approx(0.85, abs=1e-15) and avg.b == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(EmptyInput):
        average_params([])
