import numpy as np
import pytest

from texreward.imageops import (
    Texture,
    bilinear_backward,
    bilinear_sample,
    central_diff_x,
    central_diff_x_T,
    central_diff_y,
    central_diff_y_T,
    colorfulness,
    colorfulness_backward,
    gmag_backward,
    load_texture,
    lum_vec_backward,
    save_texture,
    texture_from_array,
    texture_gradient,
)


def random_texture(rng, h=8, w=8):
    return texture_from_array(rng.uniform(0, 1, size=(h, w, 3)))


def finite_difference(fn, tex, eps=1e-4):
    base = tex.rgb
    grad = np.zeros_like(base)
    it = np.nditer(base, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        plus = base.copy()
        plus[idx] += eps
        minus = base.copy()
        minus[idx] -= eps
        grad[idx] = (fn(texture_from_array_unclipped(plus))
                     - fn(texture_from_array_unclipped(minus))) / (2 * eps)
        it.iternext()
    return grad


def texture_from_array_unclipped(arr):
    """FD probes may leave [0,1] by eps; bypass the range check."""
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    return Texture(width=arr.shape[1], height=arr.shape[0], rgb=arr)


def assert_grad_close(analytic, numeric, rel=1e-4, abs_tol=1e-8):
    denom = np.abs(analytic)
    big = denom > 1e-8
    if big.any():
        rel_err = np.abs(analytic - numeric)[big] / denom[big]
        assert rel_err.max() < rel, f"max rel err {rel_err.max():.3e}"
    small = ~big
    if small.any():
        assert np.abs(analytic - numeric)[small].max() < abs_tol


def test_sample_exact_texel_center(rng):
    tex = random_texture(rng)
    # texel (row=2, col=5) center: u = 5/7, v = 1 - 2/7
    uv = np.array([5 / 7, 1 - 2 / 7])
    np.testing.assert_allclose(bilinear_sample(tex, uv), tex.rgb[2, 5],
                               atol=1e-12)


def test_sample_midway_between_texels(rng):
    tex = random_texture(rng)
    uv = np.array([2.5 / 7, 1.0])  # halfway between cols 2 and 3, top row
    np.testing.assert_allclose(bilinear_sample(tex, uv),
                               0.5 * (tex.rgb[0, 2] + tex.rgb[0, 3]),
                               atol=1e-12)


def test_sample_clamps_outside(rng):
    tex = random_texture(rng)
    np.testing.assert_allclose(bilinear_sample(tex, np.array([-0.5, 2.0])),
                               tex.rgb[0, 0], atol=1e-12)


def test_sample_continuity(rng):
    tex = random_texture(rng, 16, 16)
    uv = rng.uniform(0.05, 0.95, size=(50, 2))
    delta = 1e-6
    s0 = bilinear_sample(tex, uv)
    s1 = bilinear_sample(tex, uv + [delta, 0])
    lipschitz = 15 * np.abs(np.diff(tex.rgb, axis=1)).max() + 1e-9
    assert (np.abs(s1 - s0).max() / delta) <= lipschitz * 1.01


def test_bilinear_backward_matches_fd(rng):
    tex = random_texture(rng)
    uvs = rng.uniform(0, 1, size=(5, 2))
    upstream = rng.normal(size=(5, 3))

    def fn(t):
        return float((bilinear_sample(t, uvs) * upstream).sum())

    analytic = bilinear_backward(tex.rgb.shape, uvs, upstream)
    numeric = finite_difference(fn, tex)
    assert_grad_close(analytic, numeric, rel=1e-6, abs_tol=1e-6)


def test_gradient_constant_texture():
    tex = texture_from_array(np.full((6, 6, 3), 0.4))
    g = texture_gradient(tex)
    assert np.abs(g.gmag).max() < 1e-7
    assert np.abs(g.lum_gx).max() == 0
    assert np.abs(g.lum_gy).max() == 0


def test_gradient_ramp():
    w = h = 9
    ramp = np.zeros((h, w, 3))
    ramp[:, :, 0] = np.arange(w) / (w - 1)
    tex = texture_from_array(ramp)
    g = texture_gradient(tex)
    interior = g.gmag[:, 1:-1]
    np.testing.assert_allclose(interior, 1.0 / (w - 1), atol=1e-9)


def test_gradient_translation_equivariant(rng):
    img = rng.uniform(0, 1, size=(10, 10, 3))
    tex1 = texture_from_array(img)
    tex2 = texture_from_array(np.roll(img, 1, axis=1))
    g1 = texture_gradient(tex1)
    g2 = texture_gradient(tex2)
    np.testing.assert_allclose(g1.gmag[1:-1, 1:-2],
                               g2.gmag[1:-1, 2:-1], atol=1e-12)


def test_gmag_backward_matches_fd(rng):
    tex = random_texture(rng)
    weights = rng.normal(size=(8, 8))

    def fn(t):
        return float((texture_gradient(t).gmag * weights).sum())

    analytic = gmag_backward(texture_gradient(tex), weights)
    numeric = finite_difference(fn, tex)
    assert_grad_close(analytic, numeric)


def test_lum_vec_backward_matches_fd(rng):
    tex = random_texture(rng)
    ux = rng.normal(size=(8, 8))
    uy = rng.normal(size=(8, 8))

    def fn(t):
        g = texture_gradient(t)
        return float((g.lum_gx * ux).sum() + (g.lum_gy * uy).sum())

    analytic = lum_vec_backward(tex.rgb.shape, ux, uy)
    numeric = finite_difference(fn, tex)
    assert_grad_close(analytic, numeric, rel=1e-6, abs_tol=1e-6)


def test_central_diff_transposes_are_adjoint(rng):
    a = rng.normal(size=(7, 9))
    b = rng.normal(size=(7, 9))
    assert abs((central_diff_x(a) * b).sum() - (a * central_diff_x_T(b)).sum()) < 1e-12
    assert abs((central_diff_y(a) * b).sum() - (a * central_diff_y_T(b)).sum()) < 1e-12


def test_colorfulness_gray_zero():
    tex = texture_from_array(np.full((5, 5, 3), 0.5))
    assert colorfulness(tex) == 0.0


def test_colorfulness_uniform_red():
    arr = np.zeros((4, 4, 3))
    arr[:, :, 0] = 1.0
    assert abs(colorfulness(texture_from_array(arr)) - 0.45) < 1e-12


def test_colorfulness_checkerboard_zero():
    arr = np.zeros((4, 4, 3))
    arr[::2, ::2] = 1.0
    arr[1::2, 1::2] = 1.0
    assert colorfulness(texture_from_array(arr)) == 0.0


def test_colorfulness_permutation_invariant(rng):
    arr = rng.uniform(0, 1, size=(6, 6, 3))
    v1 = colorfulness(texture_from_array(arr))
    flat = arr.reshape(-1, 3)[rng.permutation(36)].reshape(6, 6, 3)
    v2 = colorfulness(texture_from_array(flat))
    assert abs(v1 - v2) < 1e-12


def test_colorfulness_backward_matches_fd(rng):
    tex = random_texture(rng)
    analytic = colorfulness_backward(tex)
    numeric = finite_difference(lambda t: colorfulness(t), tex)
    assert_grad_close(analytic, numeric)


def test_png_roundtrip(tmp_path, rng):
    arr = rng.integers(0, 256, size=(10, 12, 3)).astype(np.float64) / 255.0
    tex = texture_from_array(arr)
    path = tmp_path / "t.png"
    save_texture(tex, path)
    again = load_texture(path)
    np.testing.assert_array_equal(again.rgb, tex.rgb)
    save_texture(again, tmp_path / "t2.png")
    assert (tmp_path / "t.png").read_bytes() == (tmp_path / "t2.png").read_bytes()


def test_texture_validation():
    with pytest.raises(ValueError):
        texture_from_array(np.full((4, 4, 3), 1.5))
    with pytest.raises(ValueError):
        texture_from_array(np.zeros((4, 4)))
