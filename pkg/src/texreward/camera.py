"""Differentiable spherical-coordinate camera positioning and look-at pose
construction, with analytic pose-parameter derivatives.

Spherical convention (y up):
    x = r cos(theta) sin(phi), y = -r sin(theta), z = r cos(theta) cos(phi),
    position = [x, y, z] + target.
Look-at basis: f = normalize(position - target), r = normalize(up x f),
u = normalize(f x r); the rotation's columns are (r, u, f), so the pose at
theta = phi = 0 is the identity rotation. The 4x4 matrix is camera-to-world
[[R, position], [0, 1]].
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import GimbalLockError, TexRewardWarning

WORLD_UP = np.array([0.0, 1.0, 0.0])
GIMBAL_MARGIN = 1e-3


@dataclass(frozen=True)
class CameraParams:
    """Trainable camera coordinates: elevation/azimuth (radians), radius,
    and the target point looked at."""

    elevation: float
    azimuth: float
    radius: float
    target: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class Pose:
    rotation: np.ndarray
    position: np.ndarray
    matrix: np.ndarray


@dataclass(frozen=True)
class PoseDerivatives:
    dpos_dtheta: np.ndarray
    dpos_dphi: np.ndarray
    drot_dtheta: np.ndarray
    drot_dphi: np.ndarray


def spherical_to_position(params):
    th, ph, r = params.elevation, params.azimuth, params.radius
    offset = np.array([r * np.cos(th) * np.sin(ph),
                       -r * np.sin(th),
                       r * np.cos(th) * np.cos(ph)])
    return offset + np.asarray(params.target, dtype=np.float64)


def look_at(position, target, world_up=WORLD_UP):
    """Pose looking from ``position`` to ``target``.

    Raises GimbalLockError when the up vector is parallel to the viewing
    direction (caller must perturb).
    """
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fwd = position - target
    norm = np.linalg.norm(fwd)
    if norm < 1e-12:
        raise GimbalLockError("camera position coincides with target")
    f = fwd / norm
    r_vec = np.cross(world_up, f)
    r_norm = np.linalg.norm(r_vec)
    if r_norm < 1e-9:
        raise GimbalLockError("up vector parallel to viewing direction")
    r = r_vec / r_norm
    u_vec = np.cross(f, r)
    u = u_vec / np.linalg.norm(u_vec)
    rot = np.stack([r, u, f], axis=1)
    mat = np.eye(4)
    mat[:3, :3] = rot
    mat[:3, 3] = position
    for arr in (rot, position, mat):
        arr.flags.writeable = False
    return Pose(rotation=rot, position=position, matrix=mat)


def pose_from_params(params):
    return look_at(spherical_to_position(params),
                   np.asarray(params.target, dtype=np.float64))


def _d_normalize(w, dw):
    """Derivative of normalize(w): (I - what what^T)/|w| applied to dw."""
    n = np.linalg.norm(w)
    what = w / n
    return (dw - what * np.dot(what, dw)) / n


def pose_derivatives(params):
    """Analytic partials of position and rotation w.r.t. elevation/azimuth.

    Emits a TexRewardWarning near the gimbal configuration (elevation within
    1e-3 rad of +/- pi/2), where the look-at frame turns singular.
    """
    th, ph, r = params.elevation, params.azimuth, params.radius
    if abs(abs(th) - np.pi / 2.0) < GIMBAL_MARGIN:
        warnings.warn("pose derivatives near gimbal lock are ill-conditioned",
                      TexRewardWarning, stacklevel=2)

    sin_t, cos_t = np.sin(th), np.cos(th)
    sin_p, cos_p = np.sin(ph), np.cos(ph)
    dpos_dth = np.array([-r * sin_t * sin_p, -r * cos_t, -r * sin_t * cos_p])
    dpos_dph = np.array([r * cos_t * cos_p, 0.0, -r * cos_t * sin_p])

    # f is the unit offset direction; radius cancels
    f = np.array([cos_t * sin_p, -sin_t, cos_t * cos_p])
    df_dth = np.array([-sin_t * sin_p, -cos_t, -sin_t * cos_p])
    df_dph = np.array([cos_t * cos_p, 0.0, -cos_t * sin_p])

    w_r = np.cross(WORLD_UP, f)
    if np.linalg.norm(w_r) < 1e-9:
        raise GimbalLockError("up vector parallel to viewing direction")
    r_hat = w_r / np.linalg.norm(w_r)

    drot = []
    for df in (df_dth, df_dph):
        dw_r = np.cross(WORLD_UP, df)
        dr = _d_normalize(w_r, dw_r)
        w_u = np.cross(f, r_hat)
        dw_u = np.cross(df, r_hat) + np.cross(f, dr)
        du = _d_normalize(w_u, dw_u)
        drot.append(np.stack([dr, du, df], axis=1))

    return PoseDerivatives(dpos_dtheta=dpos_dth, dpos_dphi=dpos_dph,
                           drot_dtheta=drot[0], drot_dphi=drot[1])


def save_pose_json(pose, path):
    def fmt(x):
        return float(f"{x:.9g}")

    doc = {"position": [fmt(x) for x in pose.position],
           "rotation": [[fmt(x) for x in row] for row in pose.rotation],
           "matrix": [[fmt(x) for x in row] for row in pose.matrix]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
