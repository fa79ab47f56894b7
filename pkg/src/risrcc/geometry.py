"""Coordinate conventions, poses, element layouts and UE trajectories.

Conventions used throughout the package:

* Positions are plain ``numpy`` arrays of shape ``(3,)`` in meters.
* ``theta`` is the zenith angle measured from the local +z axis (RIS boresight),
  ``phi`` the azimuth measured from the local +x axis. Both in radians.
* The RIS lies in its local xy-plane; the illuminated half-space is z > 0.
  The measurement grid "5 to 60 degrees" is the zenith angle at phi = 90 deg,
  i.e. the UE moves in the local yz-plane.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, InvalidArgumentError

SPEED_OF_LIGHT = 299_792_458.0

_TWO_PI = 2.0 * np.pi


def vec3(x, y=None, z=None) -> np.ndarray:
    if y is None and z is None:
        v = np.asarray(x, dtype=float).reshape(3)
    else:
        v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError(f"non-finite vector component in {v}")
    return v


@dataclass(frozen=True)
class Spherical:
    theta: float
    phi: float
    r: float

    def __post_init__(self):
        if not (0.0 <= self.theta <= np.pi):
            raise InvalidArgumentError(f"theta={self.theta} outside [0, pi]")
        if self.r < 0:
            raise InvalidArgumentError(f"negative radius {self.r}")
        object.__setattr__(self, "phi", float(np.mod(self.phi, _TWO_PI)))

    @classmethod
    def from_degrees(cls, theta_deg, phi_deg, r):
        return cls(np.radians(theta_deg), np.radians(phi_deg), float(r))

    def to_cartesian(self) -> np.ndarray:
        return spherical_to_cartesian(self)


def spherical_to_cartesian(s: Spherical) -> np.ndarray:
    st = np.sin(s.theta)
    return np.array([s.r * st * np.cos(s.phi), s.r * st * np.sin(s.phi), s.r * np.cos(s.theta)])


def cartesian_to_spherical(v) -> Spherical:
    v = np.asarray(v, dtype=float)
    r = float(np.linalg.norm(v))
    if r == 0.0:
        raise GeometryError("angles of the zero vector are undefined")
    theta = float(np.arccos(np.clip(v[2] / r, -1.0, 1.0)))
    phi = float(np.mod(np.arctan2(v[1], v[0]), _TWO_PI))
    return Spherical(theta, phi, r)


def unit_direction(origin, target) -> np.ndarray:
    """Unit vector pointing from ``origin`` to ``target``."""
    d = np.asarray(target, dtype=float) - np.asarray(origin, dtype=float)
    n = np.linalg.norm(d)
    if n == 0.0:
        raise GeometryError("coincident points have no direction")
    return d / n


def direction_from_angles(theta, phi) -> np.ndarray:
    """Unit vectors for arrays of (theta, phi); output shape ``(..., 3)``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def rotation_matrix(axis, angle) -> np.ndarray:
    """Right-handed rotation about ``axis`` by ``angle`` radians (Rodrigues)."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    kx = np.array([[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]])
    return np.eye(3) + np.sin(angle) * kx + (1.0 - np.cos(angle)) * (kx @ kx)


@dataclass(frozen=True)
class Pose:
    """Local frame placed in the world: ``world = origin + orientation @ local``."""

    origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        o = np.asarray(self.orientation, dtype=float).reshape(3, 3)
        if not np.allclose(o.T @ o, np.eye(3), atol=1e-9) or not np.isclose(np.linalg.det(o), 1.0, atol=1e-9):
            raise InvalidArgumentError("orientation must be a proper rotation matrix")
        object.__setattr__(self, "orientation", o)
        object.__setattr__(self, "origin", vec3(self.origin))

    def to_world(self, p_local) -> np.ndarray:
        return self.origin + np.asarray(p_local, dtype=float) @ self.orientation.T

    def to_local(self, p_world) -> np.ndarray:
        return (np.asarray(p_world, dtype=float) - self.origin) @ self.orientation


@dataclass(frozen=True)
class ArrayLayout:
    """Element positions in the local frame of the device, shape ``(count, 3)``."""

    element_positions: np.ndarray = field(default_factory=lambda: np.zeros((1, 3)))

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.element_positions, dtype=float))
        if p.shape[1] != 3:
            raise InvalidArgumentError("element positions must have 3 columns")
        if len(p) > 1:
            diff = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
            if np.any(diff[np.triu_indices(len(p), 1)] == 0.0):
                raise InvalidArgumentError("element positions must be pairwise distinct")
        object.__setattr__(self, "element_positions", p)

    @property
    def count(self) -> int:
        return len(self.element_positions)

    @classmethod
    def uniform_linear(cls, count, spacing, axis=(1.0, 0.0, 0.0)):
        axis = np.asarray(axis, dtype=float)
        offsets = (np.arange(count) - (count - 1) / 2.0) * spacing
        return cls(offsets[:, None] * axis[None, :])


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear trajectory through time-stamped waypoints."""

    times: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        p = np.asarray(self.positions, dtype=float).reshape(len(t), 3)
        if len(t) < 1:
            raise InvalidArgumentError("trajectory needs at least one waypoint")
        if np.any(np.diff(t) <= 0):
            raise InvalidArgumentError("waypoint times must be strictly increasing")
        if not np.all(np.isfinite(p)):
            raise InvalidArgumentError("non-finite waypoint")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", p)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def position(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.stack([np.interp(t, self.times, self.positions[:, k]) for k in range(3)], axis=-1)
        return out

    def velocity(self, t) -> np.ndarray:
        """Derivative of the interpolant; segment velocity, zero outside the span."""
        if len(self.times) < 2:
            return np.zeros(np.shape(t) + (3,))
        t = np.asarray(t, dtype=float)
        seg_v = np.diff(self.positions, axis=0) / np.diff(self.times)[:, None]
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(seg_v) - 1)
        v = seg_v[idx]
        outside = (t < self.times[0]) | (t > self.times[-1])
        return np.where(np.asarray(outside)[..., None], 0.0, v)

    @classmethod
    def static(cls, position, duration=1.0):
        p = vec3(position)
        return cls(np.array([0.0, duration]), np.stack([p, p]))


def arc_trajectory(radius, speed, theta_start_deg=5.0, theta_stop_deg=60.0, phi_deg=90.0,
                   center=(0.0, 0.0, 0.0), sweeps=1, step_s=0.02) -> Trajectory:
    """Constant-speed back-and-forth sweep along a circle centred on ``center``.

    The circle lies in the plane of constant azimuth ``phi_deg``; the zenith angle
    runs from ``theta_start_deg`` to ``theta_stop_deg`` and back, ``sweeps`` times.
    """
    if radius <= 0 or speed <= 0:
        raise InvalidArgumentError("radius and speed must be positive")
    span = np.radians(abs(theta_stop_deg - theta_start_deg))
    sweep_time = radius * span / speed
    t = np.arange(0.0, sweeps * sweep_time + step_s / 2, step_s)
    # triangle wave in [0, 1]
    u = np.mod(t / sweep_time, 2.0)
    u = np.where(u > 1.0, 2.0 - u, u)
    theta = np.radians(theta_start_deg) + u * (np.radians(theta_stop_deg) - np.radians(theta_start_deg))
    phi = np.radians(phi_deg)
    pts = radius * direction_from_angles(theta, np.full_like(theta, phi)) + np.asarray(center, dtype=float)
    return Trajectory(t, pts)


def fraunhofer_distance(largest_dimension, wavelength) -> float:
    return 2.0 * largest_dimension**2 / wavelength


def is_near_field(distance, largest_dimension, wavelength) -> bool:
    return distance < fraunhofer_distance(largest_dimension, wavelength)
