"""Matplotlib report figures written next to the delimited outputs: vector
field overlays, mirror-pair overlays, curvature-map previews, and reward
trajectory plots.

Everything renders through the Agg backend straight to PNG files; figures are
visualization only, never a data channel (raw float32 exports are the
bit-exact channel).
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150


def _uv_background(ax, texture=None, scalar_map=None):
    """Draw the texture (or coverage) under a UV-space overlay; UV origin is
    bottom-left, so the raster renders with extent [0,1]x[0,1]."""
    if texture is not None:
        ax.imshow(texture.rgb, extent=(0, 1, 0, 1), origin="upper",
                  interpolation="nearest")
    elif scalar_map is not None:
        ax.imshow(scalar_map.values, extent=(0, 1, 0, 1), origin="upper",
                  interpolation="nearest", cmap="gray")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("u")
    ax.set_ylabel("v")


def save_field_overlay(field, path, texture=None, scalar_map=None,
                       segment_length=0.02):
    """Anchor directions as red segments over the texture (or coverage)."""
    fig, ax = plt.subplots(figsize=(6, 6))
    _uv_background(ax, texture, scalar_map)
    valid = field.valid
    starts = field.uv[valid]
    ends = starts + field.dir[valid] * segment_length
    for (x0, y0), (x1, y1) in zip(starts, ends):
        ax.plot([x0, x1], [y0, y1], color="red", linewidth=0.7)
    invalid = field.uv[~valid]
    if len(invalid):
        ax.scatter(invalid[:, 0], invalid[:, 1], s=4, color="blue",
                   marker="x", linewidths=0.5)
    ax.set_title(f"UV direction field ({int(valid.sum())}/{len(field)} valid)")
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)


def save_pairs_overlay(pairs, path, texture=None, scalar_map=None):
    """Mirror pair endpoints (green source, orange mirror) with connectors."""
    fig, ax = plt.subplots(figsize=(6, 6))
    _uv_background(ax, texture, scalar_map)
    for k in range(len(pairs)):
        ax.plot([pairs.uv[k, 0], pairs.uv_mirror[k, 0]],
                [pairs.uv[k, 1], pairs.uv_mirror[k, 1]],
                color="gray", linewidth=0.3, alpha=0.6)
    ax.scatter(pairs.uv[:, 0], pairs.uv[:, 1], s=6, color="green",
               label="source")
    ax.scatter(pairs.uv_mirror[:, 0], pairs.uv_mirror[:, 1], s=6,
               color="orange", label="mirror")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title(f"{len(pairs)} mirror pairs")
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)


def save_scalar_map_figure(smap, path):
    """Curvature-map heatmap with a colorbar; uncovered texels masked out."""
    fig, ax = plt.subplots(figsize=(6.5, 6))
    shown = np.ma.masked_where(~smap.covered, smap.values)
    if smap.range_tag == "unit":
        vmin, vmax = 0.0, 1.0
    elif smap.range_tag == "signed_unit":
        vmin, vmax = -1.0, 1.0
    else:
        vmin = vmax = None
    im = ax.imshow(shown, extent=(0, 1, 0, 1), origin="upper",
                   interpolation="nearest", cmap="viridis",
                   vmin=vmin, vmax=vmax)
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_xlabel("u")
    ax.set_ylabel("v")
    ax.set_title(f"baked map ({smap.range_tag}), "
                 f"{int(smap.covered.sum())} covered texels")
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)


def save_trace_figure(trace, term_kinds, path):
    """Reward value (and per-term values) against optimization step."""
    steps = [e.step for e in trace.entries]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(steps, [e.value for e in trace.entries], color="black",
            linewidth=1.8, label="combined")
    for idx, kind in enumerate(term_kinds):
        ax.plot(steps, [e.per_term[idx] for e in trace.entries],
                linewidth=1.0, alpha=0.8, label=kind)
    ax.set_xlabel("step")
    ax.set_ylabel("reward")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.savefig(path, dpi=DPI, bbox_inches="tight")
    plt.close(fig)
