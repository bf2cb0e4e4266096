import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import windowed_pearson
from pandenoise.tensor import PanImage, gradient
from pandenoise.weighting import (Stage, correlation_maps, local_correlation, stage1_weights,
                                  stage2_weights)


def test_constant_pan_gives_unit_weights():
    w = stage1_weights(PanImage(np.full((6, 7), 0.4)), 5, 3)
    assert w.W_h.shape == (6, 7, 3)
    assert np.all(w.W_h == 1) and np.all(w.W_v == 1)
    assert w.stage is Stage.STAGE1


def test_full_step_gives_zero_weight():
    w = stage1_weights(PanImage(np.array([[0.0, 1.0], [0.0, 1.0]])), 5, 1)
    assert np.all(w.W_h == 0)
    assert np.all(w.W_v == 1)


def test_half_step_q5():
    pan = np.zeros((4, 4))
    pan[:, 2:] = 0.5
    w = stage1_weights(PanImage(pan), 5, 1)
    assert w.W_h[0, 1, 0] == 0.5**5 == 0.03125


def test_stage1_slices_identical(rng):
    w = stage1_weights(PanImage(rng.random((9, 9))), 3, 4)
    for i in range(1, 4):
        np.testing.assert_array_equal(w.W_h[:, :, i], w.W_h[:, :, 0])


def test_q_must_be_positive():
    with pytest.raises(ValueError):
        stage1_weights(PanImage(np.zeros((3, 3))), 0, 1)


def test_q_monotone_on_grid(rng):
    pan = PanImage(rng.random((16, 16)))
    qs = np.linspace(0.1, 20, 100)
    prev = None
    for q in qs:
        w = stage1_weights(pan, q, 1)
        if prev is not None:
            assert np.all(w.W_h <= prev.W_h) and np.all(w.W_v <= prev.W_v)
        prev = w


def test_weights_invariant_to_pan_offset(rng):
    # dyadic values keep the offset exact in floating point
    base = rng.integers(0, 128, size=(10, 10)) / 256
    a = stage1_weights(PanImage(base), 5, 2)
    b = stage1_weights(PanImage(base + 0.25), 5, 2)
    np.testing.assert_array_equal(a.W_h, b.W_h)
    np.testing.assert_array_equal(a.W_v, b.W_v)


def test_correlation_self_and_anti(rng):
    a = rng.standard_normal((12, 12))
    np.testing.assert_allclose(local_correlation(a, a, 5), 1.0, atol=1e-12)
    np.testing.assert_allclose(local_correlation(a, -a, 5), -1.0, atol=1e-12)


def test_correlation_centre_pixel_matches_formula(rng):
    a, b = rng.standard_normal((12, 12)), rng.standard_normal((12, 12))
    got = local_correlation(a, b, 5)[6, 6]
    w = slice(4, 9)
    assert got == pytest.approx(np.corrcoef(a[w, w].ravel(), b[w, w].ravel())[0, 1], abs=1e-12)


def test_correlation_random_pixels_with_borders(rng):
    a, b = rng.standard_normal((20, 17)), rng.standard_normal((20, 17))
    b = 0.6 * a + 0.4 * b
    m = local_correlation(a, b, 9)
    for _ in range(50):
        i, j = rng.integers(0, 20), rng.integers(0, 17)
        assert abs(m[i, j] - windowed_pearson(a, b, i, j, 9)) <= 1e-10


def test_correlation_zero_variance_is_zero():
    a = np.zeros((8, 8))
    b = np.random.default_rng(1).standard_normal((8, 8))
    assert not local_correlation(a, b, 3).any()


@pytest.mark.parametrize("window", [0, 4, -3])
def test_correlation_bad_window(window):
    with pytest.raises(ValueError):
        local_correlation(np.ones((5, 5)), np.ones((5, 5)), window)


def test_stage2_affine_slice_matches_stage1(rng):
    P = rng.random((24, 24))
    U = np.stack([3.0 * P - 1.0, rng.standard_normal((24, 24))], axis=2)
    w1 = stage1_weights(PanImage(P), 5, 2)
    w2 = stage2_weights(PanImage(P), U, 5, 9)
    np.testing.assert_allclose(w2.W_h[:, :, 0], w1.W_h[:, :, 0], atol=1e-10)
    np.testing.assert_allclose(w2.W_v[:, :, 0], w1.W_v[:, :, 0], atol=1e-10)
    assert w2.stage is Stage.STAGE2


def test_stage2_noise_slice_weaker(rng):
    yy, xx = np.mgrid[0:32, 0:32]
    P = ((xx // 8 + yy // 8) % 2) * 0.7 + 0.1 + 0.1 * np.sin(xx / 3.0)
    U = rng.standard_normal((32, 32, 1))
    w1 = stage1_weights(PanImage(P), 5, 1)
    w2 = stage2_weights(PanImage(P), U, 5, 9)
    rh, _ = correlation_maps(P, U, 9)
    assert np.all(w2.W_h <= w1.W_h)
    strict = (np.abs(rh) < 1) & (w1.W_h > 0)
    assert np.all(w2.W_h[strict] < w1.W_h[strict])


def test_stage2_slice_ordering_like_shared_structure(rng):
    # two slices built from the PAN structure, one independent texture
    yy, xx = np.mgrid[0:64, 0:64]
    P = np.clip(0.5 + 0.3 * np.sign(np.sin(xx / 7.0)) * np.cos(yy / 11.0)
                + 0.05 * rng.standard_normal((64, 64)), 0, 1)
    U = np.stack([
        2.0 * P + 0.05 * rng.standard_normal((64, 64)),
        -1.5 * P + 0.08 * rng.standard_normal((64, 64)),
        rng.standard_normal((64, 64)),
    ], axis=2)
    rh, rv = correlation_maps(P, U, 9)
    mean_abs = [(np.abs(rh[:, :, i]).mean() + np.abs(rv[:, :, i]).mean()) / 2 for i in range(3)]
    assert min(mean_abs[0], mean_abs[1]) > mean_abs[2]


def test_stage2_shape_mismatch():
    with pytest.raises(ValueError):
        stage2_weights(PanImage(np.zeros((5, 5))), np.zeros((4, 5, 2)), 5, 3)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 15), st.sampled_from([3, 5, 9]))
def test_stage2_never_exceeds_stage1(seed, q, window):
    r = np.random.default_rng(seed)
    P = PanImage(r.random((14, 15)))
    U = r.standard_normal((14, 15, 3))
    w1 = stage1_weights(P, q, 3)
    w2 = stage2_weights(P, U, q, window)
    assert np.all(w2.W_h <= w1.W_h) and np.all(w2.W_v <= w1.W_v)
    assert np.all(w2.W_h >= 0) and np.all(w2.W_v >= 0)


def test_pan_gradient_based_weights_bounded(rng):
    P = PanImage(rng.random((10, 10)))
    w = stage1_weights(P, 2.5, 1)
    assert np.all((w.W_h >= 0) & (w.W_h <= 1))
    gh, _ = gradient(P.data)
    np.testing.assert_allclose(w.W_h[:, :, 0], (1 - np.abs(gh)) ** 2.5)
