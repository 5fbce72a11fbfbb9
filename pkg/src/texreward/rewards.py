"""The five differentiable geometry-aware reward terms, their exact texel
gradients, the weighted-combination evaluator, and the aligned-pair count
metric.

Term kinds and the geometry context they need:
  alignment     - UVVectorField (squared cosine between the sampled luminance
                  gradient and the anchor direction, averaged over anchors)
  emphasis      - unit-range curvature ScalarMap (negative MSE between the
                  gradient magnitude and the map, plus a colorfulness term)
  symmetry      - MirrorPairSet (negative MSE between bilinear samples at
                  mirrored UV pairs, plus a colorfulness term)
  colorization  - signed-unit curvature ScalarMap (sigmoid-blended warm/cool
                  red-minus-blue incentive)
  colorfulness  - nothing (opponent-channel spread)

Anchor gradients are compared in UV axes: the sampled image-space luminance
derivatives are rescaled by (W-1, -(H-1)) so direction cosines are taken in
the same frame the field lives in (v points up, rows grow down).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyFieldError,
    NonFiniteGradientError,
    RewardInputError,
)
from .imageops import (
    GradientMap,
    bilinear_backward,
    bilinear_sample,
    colorfulness,
    colorfulness_backward,
    gmag_backward,
    lum_vec_backward,
    texture_gradient,
)

TERM_KINDS = ("alignment", "emphasis", "symmetry", "colorization",
              "colorfulness")
GRAD_NORM_CUTOFF = 1e-6
NORM_EPS = 1e-8
DEFAULT_COS_THRESHOLD = math.cos(math.radians(25.0))

def _sigmoid(x):
    """Logistic function, overflow-safe for large +/- arguments."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_TERM_PARAM_DEFAULTS = {
    "alignment": {},
    "emphasis": {"alpha_m": 1.0, "alpha_c": 0.05},
    "symmetry": {"alpha_sym": 1.0, "alpha_color": 0.05},
    "colorization": {"threshold": 0.0, "steepness": 50.0},
    "colorfulness": {},
}


@dataclass(frozen=True)
class TermSpec:
    kind: str
    weight: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TERM_KINDS:
            raise RewardInputError(f"unknown reward term kind '{self.kind}'")
        if not np.isfinite(self.weight):
            raise RewardInputError("term weight must be finite")
        allowed = _TERM_PARAM_DEFAULTS[self.kind]
        for key in self.params:
            if key not in allowed:
                raise RewardInputError(
                    f"term '{self.kind}' has no parameter '{key}'")

    def param(self, name):
        return self.params.get(name, _TERM_PARAM_DEFAULTS[self.kind][name])


@dataclass(frozen=True)
class RewardSpec:
    terms: tuple

    def __post_init__(self):
        if len(self.terms) == 0:
            raise RewardInputError("reward spec needs at least one term")

    @staticmethod
    def single(kind, weight=1.0, **params):
        return RewardSpec(terms=(TermSpec(kind=kind, weight=weight,
                                          params=params),))

    @staticmethod
    def from_json(text):
        doc = json.loads(text)
        terms = tuple(TermSpec(kind=t["kind"],
                               weight=float(t.get("weight", 1.0)),
                               params=dict(t.get("params", {})))
                      for t in doc["terms"])
        return RewardSpec(terms=terms)

    def to_json(self):
        return json.dumps({"terms": [
            {"kind": t.kind, "weight": t.weight, "params": t.params}
            for t in self.terms]}, indent=2)


@dataclass(frozen=True)
class RewardContext:
    """Prepared geometry inputs; each term picks what it needs."""

    field: object = None
    curv_unit: object = None
    curv_signed: object = None
    pairs: object = None


@dataclass(frozen=True)
class RewardResult:
    value: float
    per_term: tuple
    gradient: GradientMap = None


def _uv_frame_gradients(tex, grads, uvs):
    """Sample the luminance gradient at uv points and express it in UV axes.

    Returns (g, raw_norm) with g of shape (K, 2); g = (sx * (W-1),
    -sy * (H-1)) for image-space samples (sx, sy).
    """
    sx = bilinear_sample(grads.lum_gx, uvs)
    sy = bilinear_sample(grads.lum_gy, uvs)
    g = np.stack([sx * (tex.width - 1), -sy * (tex.height - 1)], axis=1)
    return g, np.linalg.norm(g, axis=1)


def reward_alignment(tex, field, want_gradient=True):
    """Mean squared cosine between normalized sampled texture gradients and
    the anchor directions; anchors with raw gradient norm below 1e-6
    contribute 0 (normalizing near-zero vectors is noise, not signal)."""
    valid = field.valid
    if not valid.any():
        raise EmptyFieldError("alignment reward needs at least one valid anchor")
    uvs = field.uv[valid]
    dirs = field.dir[valid]
    n_anchor = len(uvs)

    grads = texture_gradient(tex)
    g, raw = _uv_frame_gradients(tex, grads, uvs)
    usable = raw >= GRAD_NORM_CUTOFF

    n_soft = np.sqrt((g * g).sum(axis=1) + NORM_EPS * NORM_EPS)
    cosines = np.where(usable, (g * dirs).sum(axis=1) / n_soft, 0.0)
    value = float((cosines ** 2).sum() / n_anchor)
    if not want_gradient:
        return value, None

    # d(value)/dg = (2 c / N) (d - c ghat) / n, zeroed for unusable anchors
    ghat = g / n_soft[:, None]
    dc_dg = (dirs - cosines[:, None] * ghat) / n_soft[:, None]
    dval_dg = (2.0 * cosines / n_anchor)[:, None] * dc_dg
    dval_dg[~usable] = 0.0
    up_sx = dval_dg[:, 0] * (tex.width - 1)
    up_sy = -dval_dg[:, 1] * (tex.height - 1)
    d_gx = bilinear_backward((tex.height, tex.width), uvs, up_sx)
    d_gy = bilinear_backward((tex.height, tex.width), uvs, up_sy)
    grad = lum_vec_backward(tex.rgb.shape, d_gx, d_gy)
    return value, grad


def _check_map(tex, curv_map, expected_range, term):
    if (curv_map.width, curv_map.height) != (tex.width, tex.height):
        raise RewardInputError(
            f"{term}: curvature map {curv_map.width}x{curv_map.height} does "
            f"not match texture {tex.width}x{tex.height}")
    if curv_map.range_tag != expected_range:
        raise RewardInputError(
            f"{term}: curvature map range '{curv_map.range_tag}' "
            f"(expected '{expected_range}')")
    covered = curv_map.covered
    if not covered.any():
        raise RewardInputError(f"{term}: curvature map has no covered texels")
    return covered


def reward_emphasis(tex, curv_map, alpha_m=1.0, alpha_c=0.05,
                    want_gradient=True):
    """alpha_m * (negative MSE between gradient magnitude and the unit-range
    curvature map over covered texels) + alpha_c * colorfulness."""
    covered = _check_map(tex, curv_map, "unit", "emphasis")
    n_cov = int(np.count_nonzero(covered))
    grads = texture_gradient(tex)
    diff = np.where(covered, grads.gmag - curv_map.values, 0.0)
    r_mag = -float((diff * diff).sum() / n_cov)
    value = alpha_m * r_mag + alpha_c * colorfulness(tex)
    if not want_gradient:
        return value, None
    upstream = (-2.0 / n_cov) * diff
    grad = alpha_m * gmag_backward(grads, upstream)
    if alpha_c != 0.0:
        grad = grad + alpha_c * colorfulness_backward(tex)
    return value, grad


def reward_symmetry(tex, pairs, alpha_sym=1.0, alpha_color=0.05,
                    want_gradient=True):
    """alpha_sym * (negative mean squared RGB difference over mirror pairs)
    + alpha_color * colorfulness."""
    m = len(pairs)
    if m == 0:
        raise RewardInputError("symmetry reward needs a non-empty pair set")
    s_a = bilinear_sample(tex, pairs.uv)
    s_b = bilinear_sample(tex, pairs.uv_mirror)
    diff = s_a - s_b
    l_sym = float((diff * diff).sum() / m)
    value = alpha_sym * (-l_sym) + alpha_color * colorfulness(tex)
    if not want_gradient:
        return value, None
    up = (-2.0 / m) * diff
    grad = bilinear_backward(tex.rgb.shape, pairs.uv, up)
    grad += bilinear_backward(tex.rgb.shape, pairs.uv_mirror, -up)
    grad *= alpha_sym
    if alpha_color != 0.0:
        grad = grad + alpha_color * colorfulness_backward(tex)
    return value, grad


def reward_colorization(tex, curv_map, threshold=0.0, steepness=50.0,
                        want_gradient=True):
    """Sigmoid-blended warm/cool incentive: texels whose curvature exceeds
    the threshold are rewarded for red-over-blue, the others penalized, with
    weight 2 sigmoid(k (C - T)) - 1 (the hard threshold as k -> inf)."""
    if steepness <= 0:
        raise RewardInputError("colorization steepness must be positive")
    if not -1.0 <= threshold <= 1.0:
        raise RewardInputError("colorization threshold must be in [-1, 1]")
    covered = _check_map(tex, curv_map, "signed_unit", "colorization")
    n_cov = int(np.count_nonzero(covered))
    w = 2.0 * _sigmoid(steepness * (curv_map.values - threshold)) - 1.0
    w = np.where(covered, w, 0.0)
    delta_rb = tex.rgb[:, :, 0] - tex.rgb[:, :, 2]
    value = float((w * delta_rb).sum() / n_cov)
    if not want_gradient:
        return value, None
    grad = np.zeros_like(tex.rgb)
    grad[:, :, 0] = w / n_cov
    grad[:, :, 2] = -w / n_cov
    return value, grad


def reward_colorfulness(tex, want_gradient=True):
    value = colorfulness(tex)
    if not want_gradient:
        return value, None
    return value, colorfulness_backward(tex)


def _evaluate_term(term, tex, context, want_gradient):
    kind = term.kind
    if kind == "alignment":
        if context.field is None:
            raise RewardInputError("missing context for term 'alignment': "
                                   "UV vector field")
        return reward_alignment(tex, context.field, want_gradient)
    if kind == "emphasis":
        if context.curv_unit is None:
            raise RewardInputError("missing context for term 'emphasis': "
                                   "unit-range curvature map")
        return reward_emphasis(tex, context.curv_unit,
                               alpha_m=term.param("alpha_m"),
                               alpha_c=term.param("alpha_c"),
                               want_gradient=want_gradient)
    if kind == "symmetry":
        if context.pairs is None:
            raise RewardInputError("missing context for term 'symmetry': "
                                   "mirror pair set")
        return reward_symmetry(tex, context.pairs,
                               alpha_sym=term.param("alpha_sym"),
                               alpha_color=term.param("alpha_color"),
                               want_gradient=want_gradient)
    if kind == "colorization":
        if context.curv_signed is None:
            raise RewardInputError("missing context for term 'colorization': "
                                   "signed-unit curvature map")
        return reward_colorization(tex, context.curv_signed,
                                   threshold=term.param("threshold"),
                                   steepness=term.param("steepness"),
                                   want_gradient=want_gradient)
    return reward_colorfulness(tex, want_gradient)


def evaluate(spec, tex, context=None, want_gradient=True):
    """Weighted combination of the spec's terms.

    Returns a RewardResult whose ``per_term`` holds the raw (unweighted) term
    values, so value == sum(weight * per_term). The combined gradient matches
    the texture dimensions; any non-finite term gradient aborts with the
    offending term named.
    """
    context = context or RewardContext()
    total = 0.0
    per_term = []
    grad = np.zeros_like(tex.rgb) if want_gradient else None
    for term in spec.terms:
        value, term_grad = _evaluate_term(term, tex, context, want_gradient)
        per_term.append(value)
        total += term.weight * value
        if want_gradient:
            if not np.isfinite(term_grad).all():
                raise NonFiniteGradientError(term.kind)
            grad = grad + term.weight * term_grad
    gradient = None
    if want_gradient:
        gradient = GradientMap(width=tex.width, height=tex.height, drgb=grad)
    return RewardResult(value=float(total), per_term=tuple(per_term),
                        gradient=gradient)


def alignment_count(tex, field, cos_threshold=DEFAULT_COS_THRESHOLD):
    """Table-style metric: how many valid anchors have |cos(angle)| between
    the sampled luminance gradient and the anchor direction at or above the
    threshold. Anchors with gradient norm below 1e-6 count as unaligned.

    Returns:
        (aligned, total) with total the valid anchor count.
    """
    if not 0.0 < cos_threshold <= 1.0:
        raise RewardInputError("cos threshold must be in (0, 1]")
    valid = field.valid
    total = int(np.count_nonzero(valid))
    if total == 0:
        return 0, 0
    grads = texture_gradient(tex)
    g, raw = _uv_frame_gradients(tex, grads, field.uv[valid])
    dirs = field.dir[valid]
    d_norm = np.linalg.norm(dirs, axis=1)
    usable = (raw >= GRAD_NORM_CUTOFF) & (d_norm > 0)
    cosines = np.zeros(total)
    cosines[usable] = ((g[usable] * dirs[usable]).sum(axis=1)
                       / (raw[usable] * d_norm[usable]))
    aligned = int(np.count_nonzero(np.abs(cosines) >= cos_threshold))
    return aligned, total


def write_result_json(result, spec, path):
    """{"value": v, "per_term": [{"kind", "weight", "value"}, ...]}."""
    def fmt(x):
        return float(f"{x:.9g}")

    doc = {"value": fmt(result.value),
           "per_term": [{"kind": t.kind, "weight": fmt(t.weight),
                         "value": fmt(v)}
                        for t, v in zip(spec.terms, result.per_term)]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
