"""Direct gradient-ascent optimization: texture texels against a reward spec
(the desk-scale stand-in for fine-tuning a generator), and camera angles
against a differentiable surface-facing proxy.

Texture updates are plain projected ascent, tex <- clamp(tex + lr * grad);
nothing adaptive, so reward properties stay visible in the traces.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .camera import CameraParams, pose_derivatives, spherical_to_position
from .errors import TexRewardWarning
from .imageops import Texture
from .rewards import evaluate

ELEVATION_LIMIT = np.pi / 2.0 - 1e-3


@dataclass(frozen=True)
class OptConfig:
    learning_rate: float
    steps: int
    clamp: bool = True
    seed: int = 0
    log_every: int = 10

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")


@dataclass(frozen=True)
class TraceEntry:
    step: int
    value: float
    per_term: tuple
    grad_max_abs: float


@dataclass(frozen=True)
class OptTrace:
    entries: tuple
    final: Texture
    snapshots: tuple = ()  # (step, Texture) pairs at logged steps


def noise_texture(width, height, seed):
    rng = np.random.default_rng(seed)
    arr = rng.uniform(0.0, 1.0, size=(height, width, 3))
    arr.flags.writeable = False
    return Texture(width=width, height=height, rgb=arr)


def optimize_texture(init, spec, context, cfg, keep_snapshots=False):
    """Gradient ascent directly on texels.

    Logs step 0 and every ``cfg.log_every``-th step (floor(steps/log_every)+1
    entries); deterministic for identical inputs. Non-finite gradients abort
    inside evaluate() with the offending term named.
    """
    tex = init
    entries = []
    snapshots = []

    def log(step, result):
        entries.append(TraceEntry(
            step=step, value=result.value, per_term=result.per_term,
            grad_max_abs=float(np.abs(result.gradient.drgb).max())))
        if keep_snapshots:
            snapshots.append((step, tex))

    result = evaluate(spec, tex, context)
    log(0, result)
    for step in range(1, cfg.steps + 1):
        updated = tex.rgb + cfg.learning_rate * result.gradient.drgb
        if cfg.clamp:
            updated = np.clip(updated, 0.0, 1.0)
        updated.flags.writeable = False
        tex = Texture(width=tex.width, height=tex.height, rgb=updated)
        result = evaluate(spec, tex, context)
        if step % cfg.log_every == 0:
            log(step, result)
    return OptTrace(entries=tuple(entries), final=tex,
                    snapshots=tuple(snapshots))


def facing_proxy(mesh, params, sharpness=4.0, want_gradient=True):
    """Mean soft-hinged view cosine over mesh vertices for a camera at
    ``params``: softplus(s * viewcos) / s per vertex, averaged.

    The softplus keeps a (tiny) gradient on the back side so ascent can pull
    a badly initialized camera around the object; it approaches
    max(0, viewcos) as the sharpness grows.

    Returns (value, (d/d_elevation, d/d_azimuth)).
    """
    campos = spherical_to_position(params)
    offsets = campos - mesh.positions
    dists = np.linalg.norm(offsets, axis=1)
    ok = dists > 1e-12
    unit = np.zeros_like(offsets)
    unit[ok] = offsets[ok] / dists[ok][:, None]
    viewcos = np.einsum("ij,ij->i", mesh.vertex_normals, unit)

    z = sharpness * viewcos
    soft = np.where(z > 30.0, z, np.log1p(np.exp(np.minimum(z, 30.0)))) / sharpness
    value = float(soft.mean())
    if not want_gradient:
        return value, None

    sig = 1.0 / (1.0 + np.exp(-np.clip(z, -500.0, 500.0)))
    # d(unit)/d(campos) = (I - unit unit^T)/dist, row by row
    d = pose_derivatives(params)
    grads = []
    for dpos in (d.dpos_dtheta, d.dpos_dphi):
        d_unit = (dpos[None, :] - unit * (unit @ dpos)[:, None])
        d_unit[ok] /= dists[ok][:, None]
        d_viewcos = np.einsum("ij,ij->i", mesh.vertex_normals, d_unit)
        grads.append(float((sig * d_viewcos).mean()))
    return value, tuple(grads)


def optimize_camera(mesh, init, cfg, sharpness=4.0):
    """Gradient ascent on (elevation, azimuth) maximizing the facing proxy.

    The radius and target stay fixed; elevation is clamped away from the
    gimbal configuration. A gimbal-adjacent init is perturbed by 1e-2 rad
    with a warning.

    Returns a list of (step, CameraParams, proxy value); the last entry holds
    the optimized parameters.
    """
    theta = float(init.elevation)
    phi = float(init.azimuth)
    if abs(abs(theta) - np.pi / 2.0) < 1e-3:
        warnings.warn("camera init near gimbal lock; perturbing elevation "
                      "by 1e-2 rad", TexRewardWarning, stacklevel=2)
        theta = np.sign(theta) * (np.pi / 2.0 - 1e-2)

    def params_at(th, ph):
        return CameraParams(elevation=th, azimuth=ph, radius=init.radius,
                            target=init.target)

    trace = []
    value, grad = facing_proxy(mesh, params_at(theta, phi), sharpness)
    trace.append((0, params_at(theta, phi), value))
    for step in range(1, cfg.steps + 1):
        theta = theta + cfg.learning_rate * grad[0]
        phi = phi + cfg.learning_rate * grad[1]
        theta = float(np.clip(theta, -ELEVATION_LIMIT, ELEVATION_LIMIT))
        value, grad = facing_proxy(mesh, params_at(theta, phi), sharpness)
        if step % cfg.log_every == 0 or step == cfg.steps:
            trace.append((step, params_at(theta, phi), value))
    return trace


def write_trace_csv(trace, term_kinds, path):
    """CSV with one row per logged step: step, value, one column per term,
    gradient max-abs; floats at 9 significant digits."""
    with open(path, "w") as fh:
        cols = ["step", "value"] + [f"term_{k}" for k in term_kinds]
        cols.append("grad_max_abs")
        fh.write(",".join(cols) + "\n")
        for e in trace.entries:
            row = [str(e.step), f"{e.value:.9g}"]
            row += [f"{v:.9g}" for v in e.per_term]
            row.append(f"{e.grad_max_abs:.9g}")
            fh.write(",".join(row) + "\n")
