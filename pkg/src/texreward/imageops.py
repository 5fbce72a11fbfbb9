"""Differentiable image primitives shared by every reward: bilinear sampling,
central-difference texture gradients, luminance, and the opponent-color
colorfulness score. Each forward has a hand-derived backward that scatters an
upstream gradient onto texture texels; all backwards are finite-difference
checkable.

Texel addressing follows the package convention: ``x = u * (W-1)``,
``row = (1-v) * (H-1)`` with clamped-edge behavior outside [0,1]^2.
"""

import json
from dataclasses import dataclass

import numpy as np

LUMA = np.array([0.299, 0.587, 0.114])
SQRT_EPS = 1e-8


@dataclass(frozen=True)
class Texture:
    """RGB texture, (H, W, 3) float64 in [0, 1]."""

    width: int
    height: int
    rgb: np.ndarray


@dataclass(frozen=True)
class GradientMap:
    """d(scalar)/d(texel) companion to a Texture, (H, W, 3) float64."""

    width: int
    height: int
    drgb: np.ndarray


def texture_from_array(arr):
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError("texture array must be (H, W, 3)")
    if arr.min() < -1e-9 or arr.max() > 1 + 1e-9:
        raise ValueError("texture channels must lie in [0, 1]")
    arr = np.clip(arr, 0.0, 1.0)
    arr.flags.writeable = False
    return Texture(width=arr.shape[1], height=arr.shape[0], rgb=arr)


def load_texture(path):
    """8-bit RGB PNG -> float64 texture via value / 255."""
    from PIL import Image

    img = Image.open(path).convert("RGB")
    arr = np.asarray(img, dtype=np.float64) / 255.0
    return texture_from_array(arr)


def save_texture(tex, path):
    """Texture -> 8-bit RGB PNG, rounding half-up so an 8-bit load/save
    round-trip is byte-exact."""
    from PIL import Image

    q = np.floor(np.clip(tex.rgb, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(q, mode="RGB").save(path)


def _sample_coords(uvs, width, height):
    """Clamped texel-space coordinates and the 4-tap bilinear stencil."""
    uvs = np.atleast_2d(np.asarray(uvs, dtype=np.float64))
    x = np.clip(uvs[:, 0], 0.0, 1.0) * (width - 1)
    y = (1.0 - np.clip(uvs[:, 1], 0.0, 1.0)) * (height - 1)
    x0 = np.clip(np.floor(x).astype(np.int64), 0, max(width - 2, 0))
    y0 = np.clip(np.floor(y).astype(np.int64), 0, max(height - 2, 0))
    fx = x - x0
    fy = y - y0
    return x0, y0, fx, fy


def bilinear_sample(image, uvs):
    """Sample an (H, W[, C]) image at uv points with bilinear weights.

    Args:
        uvs: (2,) or (K, 2); values outside [0,1]^2 clamp to the edge.

    Returns:
        (C,) / scalar for a single point, else (K, C) / (K,).
    """
    single = np.asarray(uvs).ndim == 1
    img = image.rgb if isinstance(image, Texture) else np.asarray(image)
    h, w = img.shape[:2]
    x0, y0, fx, fy = _sample_coords(uvs, w, h)
    if img.ndim == 2:
        img = img[:, :, None]
        squeeze_c = True
    else:
        squeeze_c = False
    w00 = ((1 - fx) * (1 - fy))[:, None]
    w10 = (fx * (1 - fy))[:, None]
    w01 = ((1 - fx) * fy)[:, None]
    w11 = (fx * fy)[:, None]
    out = (w00 * img[y0, x0] + w10 * img[y0, x0 + 1]
           + w01 * img[y0 + 1, x0] + w11 * img[y0 + 1, x0 + 1])
    if squeeze_c:
        out = out[:, 0]
    return out[0] if single else out


def bilinear_backward(shape, uvs, upstream):
    """Scatter upstream sample-gradients back onto the image grid.

    Args:
        shape: (H, W) or (H, W, C) of the sampled image.
        uvs: (K, 2) sample locations (same clamping as the forward).
        upstream: (K,) or (K, C) gradient w.r.t. each sample.

    Returns:
        d(image) with the given shape. Accumulation order is deterministic.
    """
    h, w = shape[:2]
    uvs = np.atleast_2d(np.asarray(uvs, dtype=np.float64))
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.ndim == 1:
        upstream = upstream[:, None]
    x0, y0, fx, fy = _sample_coords(uvs, w, h)
    grad = np.zeros((h, w, upstream.shape[1]))
    for wgt, yy, xx in (((1 - fx) * (1 - fy), y0, x0),
                        (fx * (1 - fy), y0, x0 + 1),
                        ((1 - fx) * fy, y0 + 1, x0),
                        (fx * fy, y0 + 1, x0 + 1)):
        np.add.at(grad, (yy, xx), wgt[:, None] * upstream)
    return grad.reshape(shape)


def central_diff_x(img):
    """d/dx (column direction) with replicate borders, per channel."""
    left = np.concatenate([img[:, :1], img[:, :-1]], axis=1)
    right = np.concatenate([img[:, 1:], img[:, -1:]], axis=1)
    return (right - left) / 2.0


def central_diff_y(img):
    """d/dy (row direction, increasing downward) with replicate borders."""
    up = np.concatenate([img[:1], img[:-1]], axis=0)
    down = np.concatenate([img[1:], img[-1:]], axis=0)
    return (down - up) / 2.0


def central_diff_x_T(upstream):
    """Transpose of central_diff_x (exact adjoint incl. border folding)."""
    out = np.zeros_like(upstream)
    out[:, :-1] -= upstream[:, 1:] / 2.0  # -1/2 taps at j-1
    out[:, 0] -= upstream[:, 0] / 2.0     # replicated left border
    out[:, 1:] += upstream[:, :-1] / 2.0  # +1/2 taps at j+1
    out[:, -1] += upstream[:, -1] / 2.0   # replicated right border
    return out


def central_diff_y_T(upstream):
    out = np.zeros_like(upstream)
    out[:-1] -= upstream[1:] / 2.0
    out[0] -= upstream[0] / 2.0
    out[1:] += upstream[:-1] / 2.0
    out[-1] += upstream[-1] / 2.0
    return out


@dataclass(frozen=True)
class TextureGradients:
    """Forward products of texture_gradient, kept for the backward pass.

    gx / gy: per-channel central differences, (H, W, 3).
    gmag: all-channel gradient magnitude sqrt(|dT/dx|^2 + |dT/dy|^2 + eps^2).
    lum_gx / lum_gy: central differences of luminance (the 2D gradient
    *vector* used where a direction is needed).
    """

    gx: np.ndarray
    gy: np.ndarray
    gmag: np.ndarray
    lum_gx: np.ndarray
    lum_gy: np.ndarray


def texture_gradient(tex):
    """Per-texel gradient magnitude (all channels) and luminance gradient
    vector, with replicate-border central differences."""
    if tex.width < 3 or tex.height < 3:
        raise ValueError("texture must be at least 3x3 for central differences")
    gx = central_diff_x(tex.rgb)
    gy = central_diff_y(tex.rgb)
    s = (gx * gx).sum(axis=2) + (gy * gy).sum(axis=2)
    gmag = np.sqrt(s + SQRT_EPS * SQRT_EPS)
    lum = tex.rgb @ LUMA
    return TextureGradients(gx=gx, gy=gy, gmag=gmag,
                            lum_gx=central_diff_x(lum),
                            lum_gy=central_diff_y(lum))


def gmag_backward(grads, upstream):
    """d(sum upstream * gmag)/d(texture): chain through the softened sqrt and
    the per-channel central-difference stencils."""
    coef = (upstream / grads.gmag)[:, :, None]
    return (central_diff_x_T(coef * grads.gx)
            + central_diff_y_T(coef * grads.gy))


def lum_vec_backward(shape, up_gx, up_gy):
    """d(sum up_gx * lum_gx + up_gy * lum_gy)/d(texture)."""
    d_lum = central_diff_x_T(up_gx) + central_diff_y_T(up_gy)
    return d_lum[:, :, None] * LUMA


def opponent_channels(tex):
    rg = tex.rgb[:, :, 0] - tex.rgb[:, :, 1]
    yb = 0.5 * (tex.rgb[:, :, 0] + tex.rgb[:, :, 1]) - tex.rgb[:, :, 2]
    return rg, yb


def colorfulness(tex):
    """sigma_rg + sigma_yb + 0.3 (|mu_rg| + |mu_yb|) over opponent channels
    rg = R - G and yb = (R + G)/2 - B, population standard deviations."""
    rg, yb = opponent_channels(tex)
    return float(rg.std() + yb.std() + 0.3 * (abs(rg.mean()) + abs(yb.mean())))


def colorfulness_backward(tex, upstream=1.0):
    """Analytic gradient of colorfulness w.r.t. texels. Subgradient 0 is used
    at sigma = 0 and mu = 0."""
    rg, yb = opponent_channels(tex)
    n = rg.size
    grad = np.zeros_like(tex.rgb)

    for chan, (dr, dg, db) in ((rg, (1.0, -1.0, 0.0)),
                               (yb, (0.5, 0.5, -1.0))):
        mu = chan.mean()
        sigma = chan.std()
        d_chan = np.zeros_like(chan)
        if sigma > 1e-12:
            d_chan += (chan - mu) / (n * sigma)
        d_chan += 0.3 * np.sign(mu) / n
        grad[:, :, 0] += d_chan * dr
        grad[:, :, 1] += d_chan * dg
        grad[:, :, 2] += d_chan * db
    return grad * upstream


def save_gradient_map(gmap, base_path):
    """Raw float32 interleaved RGB (row-major from the top row) + sidecar."""
    gmap.drgb.astype("<f4").tofile(f"{base_path}.raw")
    with open(f"{base_path}.json", "w") as fh:
        json.dump({"width": gmap.width, "height": gmap.height,
                   "channels": 3, "range": "raw"}, fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
