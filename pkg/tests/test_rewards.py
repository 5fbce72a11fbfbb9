import math

import numpy as np
import pytest

from oracles import (
    assert_grad_close,
    finite_difference_grad,
    random_texture,
    synthetic_context,
    synthetic_field,
    synthetic_pairs,
    synthetic_scalar_map,
)
from texreward.baking import ScalarMap
from texreward.errors import EmptyFieldError, RewardInputError
from texreward.imageops import texture_from_array
from texreward.rewards import (
    RewardContext,
    RewardSpec,
    TermSpec,
    alignment_count,
    evaluate,
    reward_alignment,
    reward_colorization,
    reward_emphasis,
    reward_symmetry,
)
from texreward.symmetry import MirrorPairSet
from texreward.uvfield import UVVectorField


def ramp_texture(w=12, h=12):
    """Luminance increases with u; UV-frame gradient is exactly (1, 0)."""
    arr = np.zeros((h, w, 3))
    arr[:, :, :] = (np.arange(w) / (w - 1))[None, :, None]
    return texture_from_array(arr)


def field_with_direction(direction, n=8):
    uv = np.stack([np.linspace(0.3, 0.7, n), np.full(n, 0.5)], axis=1)
    dirs = np.tile(np.asarray(direction, dtype=np.float64), (n, 1))
    return UVVectorField(uv=uv, dir=dirs, source_vertex=np.arange(n),
                         valid=np.ones(n, dtype=bool))


def test_alignment_parallel_is_one():
    value, _ = reward_alignment(ramp_texture(), field_with_direction([1, 0]))
    assert abs(value - 1.0) < 1e-9


def test_alignment_orthogonal_is_zero():
    value, _ = reward_alignment(ramp_texture(), field_with_direction([0, 1]))
    assert abs(value) < 1e-12


def test_alignment_45_degrees_is_half():
    d = [1 / math.sqrt(2), 1 / math.sqrt(2)]
    value, _ = reward_alignment(ramp_texture(), field_with_direction(d))
    assert abs(value - 0.5) < 1e-9


def test_alignment_v_ramp_points_up():
    # luminance increasing with v must align with dir (0, 1)
    h = w = 12
    arr = np.zeros((h, w, 3))
    arr[:, :, :] = (1.0 - np.arange(h) / (h - 1))[:, None, None]
    tex = texture_from_array(arr)
    value, _ = reward_alignment(tex, field_with_direction([0, 1]))
    assert abs(value - 1.0) < 1e-9


def test_alignment_sign_invariant(rng):
    tex = random_texture(rng, 10, 10)
    f = synthetic_field(rng)
    v1, _ = reward_alignment(tex, f)
    flipped = UVVectorField(uv=f.uv, dir=-f.dir,
                            source_vertex=f.source_vertex, valid=f.valid)
    v2, _ = reward_alignment(tex, flipped)
    assert abs(v1 - v2) < 1e-12


def test_alignment_requires_valid_anchor(rng):
    tex = random_texture(rng)
    f = synthetic_field(rng)
    dead = UVVectorField(uv=f.uv, dir=f.dir, source_vertex=f.source_vertex,
                         valid=np.zeros(len(f.uv), dtype=bool))
    with pytest.raises(EmptyFieldError):
        reward_alignment(tex, dead)


def test_alignment_gradient_fd(rng):
    tex = random_texture(rng)
    f = synthetic_field(rng)
    _, grad = reward_alignment(tex, f)
    numeric = finite_difference_grad(
        lambda t: reward_alignment(t, f, want_gradient=False)[0], tex)
    assert_grad_close(grad, numeric)


def test_emphasis_constant_texture_zero_map():
    tex = texture_from_array(np.full((8, 8, 3), 0.5))
    cmap = ScalarMap(width=8, height=8, values=np.zeros((8, 8)),
                     coverage=np.ones((8, 8), dtype=np.int64),
                     range_tag="unit")
    value, _ = reward_emphasis(tex, cmap, alpha_m=1.0, alpha_c=0.0)
    assert abs(value) < 1e-12


def test_emphasis_constant_texture_ones_map():
    tex = texture_from_array(np.full((8, 8, 3), 0.5))
    cmap = ScalarMap(width=8, height=8, values=np.ones((8, 8)),
                     coverage=np.ones((8, 8), dtype=np.int64),
                     range_tag="unit")
    value, _ = reward_emphasis(tex, cmap, alpha_m=1.0, alpha_c=0.0)
    assert abs(value + 1.0) < 1e-7


def test_emphasis_matches_direct_oracle(rng):
    tex = random_texture(rng)
    cmap = synthetic_scalar_map(rng, 8, 8, "unit")
    alpha_m, alpha_c = 0.8, 0.07
    value, _ = reward_emphasis(tex, cmap, alpha_m=alpha_m, alpha_c=alpha_c)

    # independent direct evaluation with explicit loops
    rgb = tex.rgb
    h, w, _ = rgb.shape
    total = 0.0
    count = 0
    for r in range(h):
        for c in range(w):
            if cmap.coverage[r, c] == 0:
                continue
            s = 0.0
            for ch in range(3):
                gx = (rgb[r, min(c + 1, w - 1), ch]
                      - rgb[r, max(c - 1, 0), ch]) / 2.0
                gy = (rgb[min(r + 1, h - 1), c, ch]
                      - rgb[max(r - 1, 0), c, ch]) / 2.0
                s += gx * gx + gy * gy
            gmag = math.sqrt(s + 1e-16)
            total += (gmag - cmap.values[r, c]) ** 2
            count += 1
    r_mag = -total / count
    rg = rgb[:, :, 0] - rgb[:, :, 1]
    yb = 0.5 * (rgb[:, :, 0] + rgb[:, :, 1]) - rgb[:, :, 2]
    r_color = rg.std() + yb.std() + 0.3 * (abs(rg.mean()) + abs(yb.mean()))
    assert abs(value - (alpha_m * r_mag + alpha_c * r_color)) < 1e-9


def test_emphasis_dimension_mismatch(rng):
    tex = random_texture(rng, 8, 8)
    cmap = synthetic_scalar_map(rng, 16, 16, "unit")
    with pytest.raises(RewardInputError):
        reward_emphasis(tex, cmap)


def test_emphasis_gradient_fd(rng):
    tex = random_texture(rng)
    cmap = synthetic_scalar_map(rng, 8, 8, "unit")
    _, grad = reward_emphasis(tex, cmap, alpha_m=1.0, alpha_c=0.05)
    numeric = finite_difference_grad(
        lambda t: reward_emphasis(t, cmap, want_gradient=False)[0], tex)
    assert_grad_close(grad, numeric)


def test_symmetry_constant_texture_zero():
    tex = texture_from_array(np.full((8, 8, 3), 0.3))
    pairs = MirrorPairSet(uv=np.array([[0.2, 0.2], [0.7, 0.3]]),
                          uv_mirror=np.array([[0.8, 0.2], [0.3, 0.3]]),
                          residual=np.zeros(2))
    value, _ = reward_symmetry(tex, pairs, alpha_sym=1.0, alpha_color=0.0)
    assert abs(value) < 1e-12


def test_symmetry_black_white_pair():
    arr = np.zeros((9, 9, 3))
    arr[:, 5:, :] = 1.0  # right half white
    tex = texture_from_array(arr)
    # sample exact texel centers: (row 4, col 0) black vs (row 4, col 8) white
    pairs = MirrorPairSet(uv=np.array([[0.0, 0.5]]),
                          uv_mirror=np.array([[1.0, 0.5]]),
                          residual=np.zeros(1))
    value, _ = reward_symmetry(tex, pairs, alpha_sym=1.0, alpha_color=0.0)
    assert abs(value + 3.0) < 1e-12


def test_symmetry_nonpositive(rng):
    for _ in range(5):
        tex = random_texture(rng)
        pairs = synthetic_pairs(rng)
        value, _ = reward_symmetry(tex, pairs, alpha_sym=1.0, alpha_color=0.0)
        assert value <= 0.0


def test_symmetry_paper_default_weights():
    spec = TermSpec(kind="symmetry")
    assert spec.param("alpha_sym") == 1.0
    assert spec.param("alpha_color") == 0.05


def test_symmetry_empty_pairs(rng):
    tex = random_texture(rng)
    empty = MirrorPairSet(uv=np.zeros((0, 2)), uv_mirror=np.zeros((0, 2)),
                          residual=np.zeros(0))
    with pytest.raises(RewardInputError):
        reward_symmetry(tex, empty)


def test_symmetry_gradient_fd(rng):
    tex = random_texture(rng)
    pairs = synthetic_pairs(rng)
    _, grad = reward_symmetry(tex, pairs)
    numeric = finite_difference_grad(
        lambda t: reward_symmetry(t, pairs, want_gradient=False)[0], tex)
    assert_grad_close(grad, numeric)


def red_texture(h=8, w=8):
    arr = np.zeros((h, w, 3))
    arr[:, :, 0] = 1.0
    return texture_from_array(arr)


def blue_texture(h=8, w=8):
    arr = np.zeros((h, w, 3))
    arr[:, :, 2] = 1.0
    return texture_from_array(arr)


def high_curvature_map(w=8, h=8, value=0.5):
    return ScalarMap(width=w, height=h, values=np.full((h, w), value),
                     coverage=np.ones((h, w), dtype=np.int64),
                     range_tag="signed_unit")


def test_colorization_red_above_threshold():
    value, _ = reward_colorization(red_texture(), high_curvature_map(),
                                   threshold=0.0, steepness=1e4)
    assert abs(value - 1.0) < 1e-3


def test_colorization_blue_above_threshold():
    value, _ = reward_colorization(blue_texture(), high_curvature_map(),
                                   threshold=0.0, steepness=1e4)
    assert abs(value + 1.0) < 1e-3


def test_colorization_at_threshold_zero(rng):
    tex = random_texture(rng)
    cmap = high_curvature_map(value=0.25)
    value, _ = reward_colorization(tex, cmap, threshold=0.25, steepness=50.0)
    assert abs(value) < 1e-12


def test_colorization_matches_hard_rule(rng):
    tex = random_texture(rng)
    vals = rng.uniform(-1, 1, size=(8, 8))
    vals[np.abs(vals) <= 0.01] = 0.3  # keep away from the threshold band
    cmap = ScalarMap(width=8, height=8, values=vals,
                     coverage=np.ones((8, 8), dtype=np.int64),
                     range_tag="signed_unit")
    value, _ = reward_colorization(tex, cmap, threshold=0.0, steepness=1e4)
    delta = tex.rgb[:, :, 0] - tex.rgb[:, :, 2]
    hard = np.where(vals > 0.0, delta, -delta).mean()
    assert abs(value - hard) < 1e-3


def test_colorization_gradient_fd(rng):
    tex = random_texture(rng)
    cmap = synthetic_scalar_map(rng, 8, 8, "signed_unit")
    _, grad = reward_colorization(tex, cmap)
    numeric = finite_difference_grad(
        lambda t: reward_colorization(t, cmap, want_gradient=False)[0], tex)
    assert_grad_close(grad, numeric)


def test_colorfulness_term_in_spec(rng):
    tex = red_texture()
    res = evaluate(RewardSpec.single("colorfulness", weight=0.05), tex)
    assert abs(res.value - 0.05 * 0.45) < 1e-12
    assert abs(res.per_term[0] - 0.45) < 1e-12


def test_evaluate_single_term_identity(rng):
    tex = random_texture(rng)
    ctx = synthetic_context(rng, 8, 8)
    term_value, term_grad = reward_symmetry(tex, ctx.pairs)
    res = evaluate(RewardSpec.single("symmetry"), tex, ctx)
    assert res.value == pytest.approx(term_value, abs=1e-15)
    np.testing.assert_array_equal(res.gradient.drgb, term_grad)


def test_evaluate_weight_linearity(rng):
    tex = random_texture(rng)
    ctx = synthetic_context(rng, 8, 8)
    a, b = 0.3, 1.9
    spec2 = RewardSpec(terms=(TermSpec(kind="colorization", weight=a),
                              TermSpec(kind="colorization", weight=b)))
    res2 = evaluate(spec2, tex, ctx)
    res1 = evaluate(RewardSpec.single("colorization"), tex, ctx)
    assert abs(res2.value - (a + b) * res1.value) < 1e-12
    np.testing.assert_allclose(res2.gradient.drgb,
                               (a + b) * res1.gradient.drgb, atol=1e-12)


def test_evaluate_value_is_weighted_sum(rng):
    tex = random_texture(rng)
    ctx = synthetic_context(rng, 8, 8)
    spec = RewardSpec(terms=tuple(
        TermSpec(kind=k, weight=w) for k, w in
        zip(("alignment", "emphasis", "symmetry", "colorization",
             "colorfulness"), (1.0, 0.5, 2.0, 0.25, 0.05))))
    res = evaluate(spec, tex, ctx)
    recomputed = sum(t.weight * v for t, v in zip(spec.terms, res.per_term))
    assert abs(res.value - recomputed) < 1e-9


def test_evaluate_full_spec_gradient_fd(rng):
    tex = random_texture(rng)
    ctx = synthetic_context(rng, 8, 8)
    spec = RewardSpec(terms=tuple(
        TermSpec(kind=k, weight=w) for k, w in
        zip(("alignment", "emphasis", "symmetry", "colorization",
             "colorfulness"), (1.0, 0.5, 2.0, 0.25, 0.05))))
    res = evaluate(spec, tex, ctx)
    numeric = finite_difference_grad(
        lambda t: evaluate(spec, t, ctx, want_gradient=False).value, tex)
    assert_grad_close(res.gradient.drgb, numeric)


def test_evaluate_missing_context_names_term(rng):
    tex = random_texture(rng)
    with pytest.raises(RewardInputError, match="alignment"):
        evaluate(RewardSpec.single("alignment"), tex, RewardContext())


def test_spec_json_roundtrip():
    spec = RewardSpec(terms=(
        TermSpec(kind="symmetry", weight=1.0,
                 params={"alpha_sym": 1.0, "alpha_color": 0.05}),
        TermSpec(kind="colorfulness", weight=0.05),
    ))
    again = RewardSpec.from_json(spec.to_json())
    assert again == spec


def test_spec_rejects_unknown_kind_and_param():
    with pytest.raises(RewardInputError):
        TermSpec(kind="sharpness")
    with pytest.raises(RewardInputError):
        TermSpec(kind="symmetry", params={"alpha": 1.0})


def test_alignment_count_parallel_and_orthogonal():
    tex = ramp_texture()
    aligned, total = alignment_count(tex, field_with_direction([1, 0]))
    assert aligned == total == 8
    aligned, total = alignment_count(tex, field_with_direction([0, 1]))
    assert aligned == 0 and total == 8


def test_alignment_count_matches_direct_scan(rng):
    tex = random_texture(rng, 12, 12)
    f = synthetic_field(rng, n_anchors=100)
    tau = math.cos(math.radians(25))
    aligned, total = alignment_count(tex, f, tau)

    # direct scan with an independent gradient sampler
    from texreward.imageops import bilinear_sample, texture_gradient
    g = texture_gradient(tex)
    count = 0
    for k in range(100):
        sx = bilinear_sample(g.lum_gx, f.uv[k])
        sy = bilinear_sample(g.lum_gy, f.uv[k])
        gx, gy = sx * (tex.width - 1), -sy * (tex.height - 1)
        norm = math.hypot(gx, gy)
        if norm < 1e-6:
            continue
        cos = (gx * f.dir[k, 0] + gy * f.dir[k, 1]) / norm
        if abs(cos) >= tau:
            count += 1
    assert total == 100
    assert aligned == count


def test_alignment_count_sign_invariant(rng):
    tex = random_texture(rng, 12, 12)
    f = synthetic_field(rng, n_anchors=50)
    flipped = UVVectorField(uv=f.uv, dir=-f.dir,
                            source_vertex=f.source_vertex, valid=f.valid)
    assert alignment_count(tex, f) == alignment_count(tex, flipped)
