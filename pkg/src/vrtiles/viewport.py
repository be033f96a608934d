"""HMD orientation tracking and viewport/tile intersection.

Euler angles are Tait-Bryan, applied yaw (about +Y, up), then pitch (about
+X, right), then roll (about Z, the axis of the -Z forward vector).  The rotation
matrix is ``Ry(yaw) @ Rx(pitch) @ Rz(roll)`` and the quaternion is the
matching Hamilton product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateParameterError
from .geometry import (
    FORWARD,
    HALF_PI,
    TWO_PI,
    UP,
    AngularRect,
    HexafaceSphere,
    direction_to_angles,
    wrap_yaw,
)

_POLE_EPS = 1e-9
_GIMBAL_EPS = 1e-12


@dataclass(frozen=True)
class EulerAngles:
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    @classmethod
    def from_degrees(cls, yaw=0.0, pitch=0.0, roll=0.0):
        return cls(math.radians(yaw), math.radians(pitch), math.radians(roll))


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float
    y: float
    z: float

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_axis_angle(cls, axis, angle):
        ax = np.asarray(axis, dtype=float)
        ax = ax / np.linalg.norm(ax)
        s = math.sin(0.5 * angle)
        return cls(math.cos(0.5 * angle), float(s * ax[0]), float(s * ax[1]), float(s * ax[2]))

    def as_tuple(self):
        return (self.w, self.x, self.y, self.z)

    def norm(self):
        return math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)

    def normalized(self):
        n = self.norm()
        if n == 0.0:
            raise DegenerateParameterError("cannot normalise a zero quaternion")
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def conjugate(self):
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other):
        if not isinstance(other, Quaternion):
            return NotImplemented
        a, b = self, other
        return Quaternion(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )

    def rotate(self, vector):
        v = Quaternion(0.0, *map(float, vector))
        r = self * v * self.conjugate()
        return np.array([r.x, r.y, r.z], dtype=float)

    def to_matrix(self):
        w, x, y, z = self.as_tuple()
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def same_rotation(self, other, tol=1e-9):
        dot = abs(sum(a * b for a, b in zip(self.as_tuple(), other.as_tuple())))
        return abs(dot - 1.0) <= tol


_X_AXIS = (1.0, 0.0, 0.0)
_Y_AXIS = (0.0, 1.0, 0.0)
_Z_AXIS = (0.0, 0.0, 1.0)


def euler_to_quaternion(e: EulerAngles) -> Quaternion:
    q_yaw = Quaternion.from_axis_angle(_Y_AXIS, e.yaw)
    q_pitch = Quaternion.from_axis_angle(_X_AXIS, e.pitch)
    q_roll = Quaternion.from_axis_angle(_Z_AXIS, e.roll)
    return (q_yaw * q_pitch * q_roll).normalized()


def quaternion_to_euler(q: Quaternion) -> EulerAngles:
    r = q.normalized().to_matrix()
    # atan2 stays well conditioned next to the poles, asin does not
    cos_pitch = math.hypot(r[0, 2], r[2, 2])
    pitch = math.atan2(-r[1, 2], cos_pitch)
    if cos_pitch < _GIMBAL_EPS:
        # gimbal lock: only yaw -/+ roll is observable, fold it into yaw
        yaw = math.atan2(-r[2, 0], r[0, 0])
        return EulerAngles(wrap_yaw(yaw), pitch, 0.0)
    yaw = math.atan2(r[0, 2], r[2, 2])
    roll = math.atan2(r[1, 0], r[1, 1])
    return EulerAngles(yaw, pitch, roll)


def view_direction(q: Quaternion):
    d = q.rotate(FORWARD)
    return d / np.linalg.norm(d)


def view_angles(q: Quaternion):
    """(yaw, pitch) of the view direction, stable when looking at a pole.

    Straight up or down the forward vector carries no heading, so yaw is
    read from the head's up vector instead.
    """
    d = view_direction(q)
    if math.hypot(d[0], d[2]) < _POLE_EPS:
        up = q.rotate(UP)
        pitch = HALF_PI if d[1] > 0 else -HALF_PI
        yaw = math.atan2(up[0], up[2]) if d[1] > 0 else math.atan2(-up[0], -up[2])
        return wrap_yaw(yaw), pitch
    return direction_to_angles(d)


@dataclass(frozen=True)
class Viewport:
    orientation: Quaternion
    hfov: float = math.radians(96.0)
    vfov: float = math.radians(90.0)

    def __post_init__(self):
        if not 0.0 < self.hfov <= TWO_PI:
            raise DegenerateParameterError("hfov must lie in (0, 2*pi]")
        if not 0.0 < self.vfov <= math.pi:
            raise DegenerateParameterError("vfov must lie in (0, pi]")

    @classmethod
    def from_euler(cls, e: EulerAngles, hfov=math.radians(96.0), vfov=math.radians(90.0)):
        return cls(euler_to_quaternion(e), hfov, vfov)


def viewport_rect(v: Viewport) -> AngularRect:
    yaw, pitch = view_angles(v.orientation)
    pitch_min = max(-HALF_PI, pitch - 0.5 * v.vfov)
    pitch_max = min(HALF_PI, pitch + 0.5 * v.vfov)
    if v.hfov >= TWO_PI:
        return AngularRect.full_yaw(pitch_min, pitch_max)
    return AngularRect(
        wrap_yaw(yaw - 0.5 * v.hfov), wrap_yaw(yaw + 0.5 * v.hfov), pitch_min, pitch_max
    )


# overlap below this (rad^2) is treated as boundary contact
_OVERLAP_EPS = 1e-12


def tile_overlaps(v: Viewport, h: HexafaceSphere):
    rect = viewport_rect(v)
    return {s.segment_id: rect.overlap_area(s.rect) for s in h.segments}


def visible_tiles(v: Viewport, h: HexafaceSphere) -> list[int]:
    """Segments overlapping the viewport with positive area, largest first."""
    overlaps = tile_overlaps(v, h)
    hits = [(area, sid) for sid, area in overlaps.items() if area > _OVERLAP_EPS]
    hits.sort(key=lambda t: (-t[0], t[1]))
    if not hits:
        # unreachable for valid viewports, kept for the "never empty" contract
        yaw, pitch = view_angles(v.orientation)
        return [h.segment_of_angles(yaw, pitch)]
    return [sid for _, sid in hits]
