"""
Pinhole camera geometry and angle conventions shared by the pipeline.

Camera frame: x right, y down, z forward (meters). Pixel frame: u right,
v down. Spherical coordinates (d, beta, psi): d is the radial distance,
beta = atan2(x, z) is the azimuth measured from the optical axis toward +x,
psi = arccos(-y / d) is the polar angle measured from "up" (-y).

A body heading theta points along (cos theta, sin theta) in the (x, z)
plane; the observed viewpoint angle is alpha = theta + beta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from core.exceptions import CameraError

TWO_PI = 2.0 * math.pi


def validate_intrinsics(fx, fy, cx, cy):
    """
    Validate pinhole intrinsics.

    Args:
        fx, fy: Focal lengths in pixels
        cx, cy: Principal point in pixels

    Returns:
        tuple: (is_valid, error_message)
    """
    try:
        values = [float(fx), float(fy), float(cx), float(cy)]
    except (TypeError, ValueError):
        return False, "Intrinsics must be numeric values."

    if not all(math.isfinite(v) for v in values):
        return False, "Intrinsics must be finite."

    if values[0] <= 0 or values[1] <= 0:
        return False, f"Focal lengths must be positive. Got: fx={values[0]}, fy={values[1]}"

    return True, None


@dataclass(frozen=True)
class CameraIntrinsics:
    """Zero-skew pinhole intrinsics, optionally with the image size."""
    fx: float
    fy: float
    cx: float
    cy: float
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        is_valid, error_msg = validate_intrinsics(self.fx, self.fy, self.cx, self.cy)
        if not is_valid:
            raise CameraError(error_msg)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    def scaled(self, factor: float) -> 'CameraIntrinsics':
        """Intrinsics of the same camera with every pixel quantity scaled."""
        return CameraIntrinsics(
            self.fx * factor, self.fy * factor, self.cx * factor, self.cy * factor,
            None if self.width is None else int(round(self.width * factor)),
            None if self.height is None else int(round(self.height * factor)),
        )

    def as_dict(self) -> dict:
        data = {'fx': self.fx, 'fy': self.fy, 'cx': self.cx, 'cy': self.cy}
        if self.width is not None:
            data['width'] = self.width
        if self.height is not None:
            data['height'] = self.height
        return data


@dataclass(frozen=True)
class CartesianLocation:
    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def distance(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class SphericalLocation:
    d: float
    beta: float
    psi: float


def wrap_angle(angle):
    """
    Wrap angles into (-pi, pi].

    Works on floats and numpy arrays alike.
    """
    wrapped = np.mod(np.asarray(angle, dtype=float) + math.pi, TWO_PI) - math.pi
    wrapped = np.where(wrapped <= -math.pi, wrapped + TWO_PI, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def back_project(kp, K: CameraIntrinsics):
    """
    Map pixel coordinates to normalized image coordinates (K^-1 [u, v, 1]^T).

    Args:
        kp: (u, v) pair, or an array whose last axis holds (u, v)
        K: Camera intrinsics

    Returns:
        Normalized (x*, y*) with the same leading shape as kp
    """
    uv = np.asarray(kp, dtype=float)
    x_star = (uv[..., 0] - K.cx) / K.fx
    y_star = (uv[..., 1] - K.cy) / K.fy
    if uv.ndim == 1:
        return float(x_star), float(y_star)
    return np.stack([x_star, y_star], axis=-1)


def project(p: CartesianLocation, K: CameraIntrinsics):
    """
    Pinhole projection of a camera-frame point to pixels.

    Raises:
        CameraError: the point is on or behind the image plane
    """
    if p.z <= 0:
        raise CameraError(f"Point is behind the camera (z={p.z}).")
    return K.fx * p.x / p.z + K.cx, K.fy * p.y / p.z + K.cy


def project_points(xyz: np.ndarray, K: CameraIntrinsics) -> np.ndarray:
    """Vectorized projection of an (N, 3) array; every z must be positive."""
    xyz = np.asarray(xyz, dtype=float)
    z = xyz[..., 2]
    if np.any(z <= 0):
        raise CameraError("Some points are behind the camera (z <= 0).")
    u = K.fx * xyz[..., 0] / z + K.cx
    v = K.fy * xyz[..., 1] / z + K.cy
    return np.stack([u, v], axis=-1)


def spherical_from_xyz(xyz: np.ndarray) -> np.ndarray:
    """Vectorized (x, y, z) -> (d, beta, psi) over the last axis."""
    xyz = np.asarray(xyz, dtype=float)
    d = np.linalg.norm(xyz, axis=-1)
    if np.any(d == 0):
        raise CameraError("Spherical coordinates are undefined at the camera center.")
    beta = np.arctan2(xyz[..., 0], xyz[..., 2])
    psi = np.arccos(np.clip(-xyz[..., 1] / d, -1.0, 1.0))
    return np.stack([d, beta, psi], axis=-1)


def xyz_from_spherical(dbp: np.ndarray) -> np.ndarray:
    """Vectorized (d, beta, psi) -> (x, y, z) over the last axis."""
    dbp = np.asarray(dbp, dtype=float)
    d, beta, psi = dbp[..., 0], dbp[..., 1], dbp[..., 2]
    rho = d * np.sin(psi)
    return np.stack([rho * np.sin(beta), -d * np.cos(psi), rho * np.cos(beta)], axis=-1)


def spherical_from_cartesian(p: CartesianLocation) -> SphericalLocation:
    d, beta, psi = spherical_from_xyz(p.as_array())
    return SphericalLocation(float(d), float(beta), float(psi))


def cartesian_from_spherical(s: SphericalLocation) -> CartesianLocation:
    x, y, z = xyz_from_spherical(np.array([s.d, s.beta, s.psi]))
    return CartesianLocation(float(x), float(y), float(z))


def viewpoint_from_orientation(theta, beta):
    """alpha = wrap(theta + beta)."""
    return wrap_angle(np.asarray(theta) + np.asarray(beta))


def orientation_from_viewpoint(alpha, beta):
    """theta = wrap(alpha - beta)."""
    return wrap_angle(np.asarray(alpha) - np.asarray(beta))
