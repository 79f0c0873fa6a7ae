"""Homogeneous rotation/translation of radar-local clouds into the room frame.

Radar-local axes: +y along boresight, +x to the right of it, +z radar-up.
Angles follow the right-hand rule about each axis. The x rotation is applied
first, then y, then z, and the radar offset last, so for a column point
``p``::

    p' = T(position) @ RM_z(gamma) @ RM_y(beta) @ RM_x(alpha) @ p

This is the sequence that tilts Radar 2 of the default room 55 degrees down
towards the floor; composing in the opposite order leaves its boresight
horizontal.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import FieldOfView, RadarPose, RadarPoint


def rm_x(alpha, rp=(0.0, 0.0, 0.0)):
    c, s = np.cos(alpha), np.sin(alpha)
    _, ry, rz = rp
    return np.array([
        [1, 0, 0, 0],
        [0, c, -s, ry * (1 - c) + rz * s],
        [0, s, c, rz * (1 - c) - ry * s],
        [0, 0, 0, 1],
    ], dtype=float)


def rm_y(beta, rp=(0.0, 0.0, 0.0)):
    c, s = np.cos(beta), np.sin(beta)
    rx, _, rz = rp
    return np.array([
        [c, 0, s, rx * (1 - c) - rz * s],
        [0, 1, 0, 0],
        [-s, 0, c, rz * (1 - c) + rx * s],
        [0, 0, 0, 1],
    ], dtype=float)


def rm_z(gamma, rp=(0.0, 0.0, 0.0)):
    c, s = np.cos(gamma), np.sin(gamma)
    rx, ry, _ = rp
    return np.array([
        [c, -s, 0, rx * (1 - c) + ry * s],
        [s, c, 0, ry * (1 - c) - rx * s],
        [0, 0, 1, 0],
        [0, 0, 0, 1],
    ], dtype=float)


def translation(offset):
    m = np.eye(4)
    m[:3, 3] = offset
    return m


@dataclass(frozen=True, eq=False)
class RigidTransform:
    matrix: np.ndarray
    rp: tuple = (0.0, 0.0, 0.0)

    @property
    def rotation(self):
        return self.matrix[:3, :3]

    @property
    def offset(self):
        return self.matrix[:3, 3]

    def is_valid(self, tol=1e-9):
        m = self.matrix
        r = m[:3, :3]
        return (np.allclose(m[3], (0, 0, 0, 1), atol=tol, rtol=0)
                and np.allclose(r.T @ r, np.eye(3), atol=tol, rtol=0)
                and abs(np.linalg.det(r) - 1.0) <= tol)

    @classmethod
    def identity(cls):
        return cls(np.eye(4))


def rotation_matrix(rotation_deg, rp=(0.0, 0.0, 0.0)):
    a, b, g = np.radians(rotation_deg)
    return rm_z(g, rp) @ rm_y(b, rp) @ rm_x(a, rp)


def build_transform(pose: RadarPose, rp=(0.0, 0.0, 0.0)) -> RigidTransform:
    m = translation(pose.position) @ rotation_matrix(pose.rotation, rp)
    return RigidTransform(m, tuple(rp))


def _apply_xyz(t: RigidTransform, xyz):
    return xyz @ t.matrix[:3, :3].T + t.matrix[:3, 3]


def apply_transform(t: RigidTransform, points):
    """Map points through ``t``; energy and speed columns pass through.

    Accepts an ``(N, 3)`` or ``(N, 5)`` array, or a list of RadarPoint (in
    which case a list of RadarPoint comes back).
    """
    if isinstance(points, list) and (not points or isinstance(points[0], RadarPoint)):
        if not points:
            return []
        arr = np.asarray(points, dtype=float)
        arr[:, :3] = _apply_xyz(t, arr[:, :3])
        return [RadarPoint(*map(float, row)) for row in arr]
    arr = np.array(points, dtype=float, copy=True)
    if arr.size == 0:
        return arr.reshape(0, arr.shape[-1] if arr.ndim == 2 else 5)
    arr[:, :3] = _apply_xyz(t, arr[:, :3])
    return arr


def invert(t: RigidTransform) -> RigidTransform:
    r = t.matrix[:3, :3]
    m = np.eye(4)
    m[:3, :3] = r.T
    m[:3, 3] = -r.T @ t.matrix[:3, 3]
    return RigidTransform(m, t.rp)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """``a`` after ``b``."""
    return RigidTransform(a.matrix @ b.matrix, a.rp)


def boresight(t: RigidTransform):
    """Room-frame unit vector of the radar's local +y axis."""
    return t.matrix[:3, 1].copy()


def in_field_of_view(fov: FieldOfView, local_points):
    """Visibility of radar-local point(s); scalar in, bool out; array in, mask out."""
    p = np.asarray(local_points, dtype=float)
    single = p.ndim == 1
    p = p.reshape(-1, p.shape[-1])[:, :3]
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    rng = np.sqrt(x * x + y * y + z * z)
    az = np.degrees(np.arctan2(x, y))
    el = np.degrees(np.arctan2(z, np.hypot(x, y)))
    mask = (rng <= fov.max_range) & (np.abs(az) <= fov.horizontal) & (np.abs(el) <= fov.vertical)
    return bool(mask[0]) if single else mask
