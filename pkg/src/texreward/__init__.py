"""Geometry-aware texture rewards with exact texel gradients.

The package computes, for a UV-mapped triangle mesh and an RGB texture, five
differentiable geometry-aware reward functions together with the geometric
preprocessing they need (principal curvature, UV baking, tangent-field
projection, symmetry-pair mining, soft view masks, differentiable camera
poses) and a direct gradient-ascent optimizer on texture pixels.
"""

__version__ = "0.1.0"
