import numpy as np
import pytest
from hypothesis import given, strategies as st

from gpp.errors import DimensionMismatch, FormatError, IndexOutOfRange
from gpp.sensing import (IDEAL, CalibrationParams, MeasurementBundle, Model, explicit_operator,
                         forward_calibrated, forward_linear, forward_mask, forward_phase,
                         make_mask, make_operator, measure_image, measurement_count,
                         read_bundle, storage_rounded, write_bundle)

GOLDEN_3x5_SEED42 = [0.41471975043153037, 0.6526812221519428, -0.8918862136277568,
                     1.326833562814106]


def test_measurement_counts():
    assert measurement_count(0.10, 1024) == 102
    assert measurement_count(0.01, 1024) == 10
    assert measurement_count(0.29, 100) == 29
    with pytest.raises(ValueError):
        measurement_count(0.0, 10)


def test_operator_golden_and_deterministic():
    op = make_operator(3, 5, 42)
    assert op.entries.ravel()[:4].tolist() == GOLDEN_3x5_SEED42
    assert np.array_equal(op.entries, make_operator(3, 5, 42).entries)
    assert not np.array_equal(op.entries, make_operator(3, 5, 43).entries)


def test_operator_is_immutable():
    op = make_operator(2, 2, 0)
    with pytest.raises(ValueError):
        op.entries[0, 0] = 1.0


def test_operator_moments():
    phi = make_operator(250, 400, 11).entries
    N = phi.size
    assert abs(phi.mean()) < 3 / np.sqrt(N)
    assert abs(phi.var() - 1) < 3 * np.sqrt(2 / N)


def test_forward_linear_examples(rng):
    op = make_operator(3, 5, 8)
    assert not forward_linear(op, np.zeros(5)).any()
    eye = explicit_operator(np.eye(4))
    x = rng.random(4)
    assert np.array_equal(forward_linear(eye, x), x)
    x = rng.random(5)
    naive = [sum(op.entries[i, j] * x[j] for j in range(5)) for i in range(3)]
    assert np.allclose(forward_linear(op, x), naive, atol=1e-12, rtol=0)
    with pytest.raises(DimensionMismatch):
        forward_linear(op, np.zeros(4))


def test_forward_calibrated_examples(rng):
    op = make_operator(6, 10, 1)
    x = rng.random(10)
    assert np.array_equal(forward_calibrated(op, IDEAL, x), forward_linear(op, x))
    assert np.allclose(forward_calibrated(op, CalibrationParams(0, 1), x), x.sum(), rtol=1e-15)
    naive = (0.85 * op.entries + 0.5 * np.ones((6, 10))) @ x
    got = forward_calibrated(op, CalibrationParams(0.85, 0.5), x)
    assert np.allclose(got, naive, atol=1e-12, rtol=0)


def test_ideal_calibration_keeps_signed_zero():
    op = explicit_operator([[-1.0, 0.0]])
    x = np.array([0.0, 0.0])
    assert np.signbit(forward_linear(op, x)[0]) == np.signbit(forward_calibrated(op, IDEAL, x)[0])


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
       st.integers(0, 1000))
def test_forward_calibrated_linear_in_ab(a1, b1, a2, b2, seed):
    op = make_operator(4, 9, seed)
    x = np.random.default_rng(seed).random(9)
    f = lambda a, b: forward_calibrated(op, CalibrationParams(a, b), x)
    assert np.allclose(f(a1 + a2, b1 + b2), f(a1, b1) + f(a2, b2) - f(0, 0), atol=1e-12)


def test_forward_phase(rng):
    op = make_operator(7, 12, 3)
    x = rng.random(12)
    assert np.array_equal(forward_phase(op, x), forward_phase(op, -x))
    assert np.array_equal(forward_phase(op, x), np.abs(forward_linear(op, x)))
    assert not forward_phase(op, np.zeros(12)).any()


def test_forward_mask(rng):
    x = rng.random(1024)
    assert np.array_equal(forward_mask(np.arange(1024), x), x)
    assert len(forward_mask(make_mask(1024, 0.005, 2), x)) == 5
    assert forward_mask([], x).size == 0
    assert forward_mask([9, 2], x).tolist() == [x[2], x[9]]
    with pytest.raises(IndexOutOfRange):
        forward_mask([1024], x)
    with pytest.raises(ValueError):
        forward_mask([3, 3], x)


def test_measure_image_protocol(rng):
    img = rng.random((256, 256))
    b = measure_image(img, 32, "linear", rate=0.10, seed=4)
    assert b.per_patch_y.shape == (64, 102)
    c = measure_image(img, 32, "calibrated", rate=0.10, seed=4, calibration=IDEAL)
    assert np.array_equal(b.per_patch_y, c.per_patch_y)
    p = measure_image(img, 32, "phase", rate=0.10, seed=4)
    assert (p.per_patch_y >= 0).all()


def test_measure_uses_one_operator_for_all_patches(rng):
    img = rng.random((16, 16))
    b = measure_image(img, 8, "linear", m=5, seed=2)
    from gpp.imagecore import patch_transform
    ps = patch_transform(img, 8)
    assert np.allclose(b.per_patch_y, ps.patches @ make_operator(5, 64, 2).entries.T)


def test_bundle_rejects_negative_magnitudes():
    op = make_operator(2, 4, 0)
    with pytest.raises(ValueError):
        MeasurementBundle(Model.PHASE, [[-1.0, 0.0]], 2, 1, 1, 0, 4, operator=op)


@pytest.mark.parametrize("model,kw", [
    ("linear", {"rate": 0.3}),
    ("calibrated", {"rate": 0.3, "calibration": CalibrationParams(0.85, 0.5)}),
    ("phase", {"rate": 0.3}),
    ("mask", {"keep_fraction": 0.2}),
])
def test_gppm_roundtrip(tmp_path, rng, model, kw):
    img = rng.random((16, 24))
    b = measure_image(img, 8, model, seed=123456789012, **kw)
    write_bundle(tmp_path / "b.gppm", b)
    r = read_bundle(tmp_path / "b.gppm")
    assert r.model == b.model and r.seed == b.seed and r.m == b.m
    assert (r.grid_rows, r.grid_cols, r.tau) == (2, 3, 8)
    assert np.array_equal(r.per_patch_y, storage_rounded(b).per_patch_y)
    assert r.true_calibration == b.true_calibration
    if model == "mask":
        assert np.array_equal(r.mask, b.mask)
    else:
        assert np.array_equal(r.operator.entries, b.operator.entries)


def test_gppm_header_layout(tmp_path, rng):
    b = measure_image(rng.random((32, 32)), 32, "linear", rate=0.10, seed=1)
    write_bundle(tmp_path / "h.gppm", b)
    raw = (tmp_path / "h.gppm").read_bytes()
    assert raw[:4] == b"GPPM"
    assert int.from_bytes(raw[9:13], "little") == 102
    assert len(raw) == 38 + 1 + 4 * 102


def test_gppm_explicit_operator(tmp_path, rng):
    op = explicit_operator(rng.normal(size=(3, 16)), seed=5)
    b = measure_image(rng.random((4, 4)), 4, "linear", operator=op)
    write_bundle(tmp_path / "e.gppm", b)
    r = read_bundle(tmp_path / "e.gppm")
    assert r.explicit
    assert np.array_equal(r.operator.entries, op.entries.astype(np.float32).astype(np.float64))


def test_gppm_truncated(tmp_path, rng):
    b = measure_image(rng.random((8, 8)), 8, "linear", m=4, seed=0)
    write_bundle(tmp_path / "t.gppm", b)
    raw = (tmp_path / "t.gppm").read_bytes()
    (tmp_path / "t.gppm").write_bytes(raw[:-2])
    with pytest.raises(FormatError):
        read_bundle(tmp_path / "t.gppm")
    (tmp_path / "x.gppm").write_bytes(b"GPPX" + raw[4:])
    with pytest.raises(FormatError):
        read_bundle(tmp_path / "x.gppm")
