import numpy as np
import pytest

from tomoflow.grid import Grid2, VectorField2, image_inner
from tomoflow.kernel import GaussianKernel, apply_K, apply_K_scalar, v_inner


def direct_kernel_sum(grid, sigma, values):
    """O(n^4) reference: quadrature of the kernel integral, no FFT."""
    x, y = grid.meshgrid()
    xs = x.ravel()
    ys = y.ravel()
    v = values.ravel()
    out = np.empty_like(v)
    for p in range(xs.size):
        d2 = (xs - xs[p]) ** 2 + (ys - ys[p]) ** 2
        out[p] = np.sum(np.exp(-d2 / (2.0 * sigma * sigma)) * v)
    return grid.cell_area * out.reshape(grid.shape)


def test_kernel_width_must_be_positive():
    with pytest.raises(ValueError):
        GaussianKernel(0.0)
    with pytest.raises(ValueError):
        GaussianKernel(-1.0)


def test_zero_field_maps_to_zero():
    g = Grid2(16, 16, -4, 4, -4, 4)
    out = apply_K_scalar(g, 1.0, np.zeros(g.shape))
    assert not out.any()


def test_impulse_response_is_sampled_gaussian():
    g = Grid2(33, 33, -8, 8, -8, 8)
    sigma = 1.3
    f = np.zeros(g.shape)
    f[16, 16] = 1.0  # impulse at the center pixel
    out = apply_K_scalar(g, sigma, f)
    x, y = g.meshgrid()
    cx, cy = x[16, 16], y[16, 16]
    expected = g.cell_area * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * sigma**2))
    np.testing.assert_allclose(out, expected, atol=1e-12)
    assert out[16, 16] == pytest.approx(g.cell_area)


def test_fft_equals_direct_double_sum():
    g = Grid2(32, 32, -6, 6, -6, 6)
    sigma = 1.1
    rng = np.random.default_rng(5)
    f = rng.standard_normal(g.shape)
    fft_out = apply_K_scalar(g, sigma, f)
    ref = direct_kernel_sum(g, sigma, f)
    rel = np.max(np.abs(fft_out - ref)) / np.max(np.abs(ref))
    assert rel <= 1e-8


def test_fft_equals_direct_small_sigma():
    # padding must stay wrap-free even when 4*sigma is under a pixel
    g = Grid2(16, 16, -4, 4, -4, 4)
    sigma = 0.05
    rng = np.random.default_rng(6)
    f = rng.standard_normal(g.shape)
    ref = direct_kernel_sum(g, sigma, f)
    out = apply_K_scalar(g, sigma, f)
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_self_adjoint_and_psd():
    g = Grid2(20, 20, -5, 5, -5, 5)
    sigma = 1.7
    rng = np.random.default_rng(7)
    for _ in range(5):
        a = rng.standard_normal(g.shape)
        b = rng.standard_normal(g.shape)
        ka = apply_K_scalar(g, sigma, a)
        kb = apply_K_scalar(g, sigma, b)
        lhs = image_inner(g, ka, b)
        rhs = image_inner(g, a, kb)
        scale = max(abs(lhs), abs(rhs), 1e-30)
        assert abs(lhs - rhs) / scale <= 1e-10
        quad = image_inner(g, ka, a)
        assert quad >= -1e-10 * image_inner(g, a, a)


def test_translation_invariance_of_impulse_response():
    g = Grid2(24, 24, -6, 6, -6, 6)
    sigma = 0.9
    a = np.zeros(g.shape)
    b = np.zeros(g.shape)
    a[8, 10] = 1.0
    b[11, 13] = 1.0  # shifted by (3, 3) pixels
    ka = apply_K_scalar(g, sigma, a)
    kb = apply_K_scalar(g, sigma, b)
    np.testing.assert_allclose(ka[2:-4, 2:-4], kb[5:-1, 5:-1], atol=1e-12)


def test_apply_K_is_componentwise():
    g = Grid2(16, 16, -4, 4, -4, 4)
    kern = GaussianKernel(1.0)
    rng = np.random.default_rng(8)
    field = VectorField2(g, rng.standard_normal(g.shape), rng.standard_normal(g.shape))
    out = apply_K(g, kern, field)
    np.testing.assert_array_equal(out.u, apply_K_scalar(g, kern.sigma, field.u))
    np.testing.assert_array_equal(out.v, apply_K_scalar(g, kern.sigma, field.v))


def test_v_inner_symmetry_and_cauchy_schwarz():
    g = Grid2(12, 12, -3, 3, -3, 3)
    rng = np.random.default_rng(9)
    a = VectorField2(g, rng.standard_normal(g.shape), rng.standard_normal(g.shape))
    b = VectorField2(g, rng.standard_normal(g.shape), rng.standard_normal(g.shape))
    zero = VectorField2.zeros(g)
    assert v_inner(g, zero, a) == 0.0
    assert v_inner(g, a, b) == pytest.approx(v_inner(g, b, a), rel=1e-14)
    assert abs(v_inner(g, a, b)) <= np.sqrt(v_inner(g, a, a) * v_inner(g, b, b)) * (1 + 1e-12)
