"""View-direction cosine and the differentiable generate/refine/keep masks,
with the hard binary masks as the limiting oracle.

Sign convention fixed here: a surface squarely facing the camera scores
viewcos = +1 (the per-texel normal dotted with the negated viewing ray).
Background texels carry masks (0, 0, 1): nothing should paint background.
"""

from dataclasses import dataclass

import numpy as np

COVERAGE_THRESHOLD = 0.1
DEFAULT_STEEPNESS = 100.0


@dataclass(frozen=True)
class ViewBuffers:
    """Per-texel render buffers a masking pass consumes.

    cnt is the coverage count map c (any non-negative accumulation the caller
    tracks), viewcos the current view-direction cosines, viewcos_cache the
    cached best cosines from earlier views (v_old).
    """

    width: int
    height: int
    normal_img: np.ndarray
    background: np.ndarray
    cnt: np.ndarray
    viewcos: np.ndarray
    viewcos_cache: np.ndarray


@dataclass(frozen=True)
class MaskTriple:
    """Soft generate/refine/keep masks; they sum to 1 per texel by
    construction (keep = (1-g)(1-r))."""

    m_generate: np.ndarray
    m_refine: np.ndarray
    m_keep: np.ndarray


def _sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def view_cos(normal_img, view_dir, background=None):
    """Cosine between each texel normal and the camera direction.

    Args:
        normal_img: (H, W, 3) unit normals.
        view_dir: unit vector of the viewing ray (camera toward scene).
        background: optional (H, W) bool; those texels get 0.

    Returns:
        (H, W) map in [-1, 1]; +1 where the surface faces the camera.
    """
    view_dir = np.asarray(view_dir, dtype=np.float64)
    out = normal_img @ (-view_dir)
    out = np.clip(out, -1.0, 1.0)
    if background is not None:
        out = np.where(background, 0.0, out)
    return out


def soft_masks(buffers, k=DEFAULT_STEEPNESS):
    """Differentiable masks:
    m_generate = 1 - sigmoid(k (c - 0.1)),
    m_refine   = sigmoid(k (v - v_old)) (1 - m_generate),
    m_keep     = (1 - sigmoid(k (v - v_old))) (1 - m_generate),
    so the three masks form an exact partition of unity per texel (refine and
    keep split the non-generate mass by the view-improvement sigmoid).
    """
    if k <= 0:
        raise ValueError("steepness k must be positive")
    m_g = 1.0 - _sigmoid(k * (buffers.cnt - COVERAGE_THRESHOLD))
    refine_gate = _sigmoid(k * (buffers.viewcos - buffers.viewcos_cache))
    m_r = refine_gate * (1.0 - m_g)
    m_k = (1.0 - refine_gate) * (1.0 - m_g)
    bg = buffers.background
    m_g = np.where(bg, 0.0, m_g)
    m_r = np.where(bg, 0.0, m_r)
    m_k = np.where(bg, 1.0, m_k)
    return MaskTriple(m_generate=m_g, m_refine=m_r, m_keep=m_k)


def hard_masks(buffers):
    """Indicator semantics: generate where c < 0.1, refine where v > v_old
    (and not generate), keep otherwise. The three maps partition every texel;
    background is always keep."""
    bg = buffers.background
    m_g = (buffers.cnt < COVERAGE_THRESHOLD) & ~bg
    m_r = (buffers.viewcos > buffers.viewcos_cache) & ~m_g & ~bg
    m_k = ~m_g & ~m_r
    return MaskTriple(m_generate=m_g, m_refine=m_r, m_keep=m_k)


def save_mask_png(mask, path):
    """8-bit grayscale export (values clipped to [0,1] then scaled)."""
    from PIL import Image

    img = np.floor(np.clip(mask, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(img, mode="L").save(path)


def save_mask_raw(mask, base_path):
    import json

    np.asarray(mask, dtype=np.float64).astype("<f4").tofile(f"{base_path}.raw")
    h, w = mask.shape
    with open(f"{base_path}.json", "w") as fh:
        json.dump({"width": w, "height": h, "channels": 1, "range": "unit"},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
