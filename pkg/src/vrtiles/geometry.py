"""Sphere mesh generation and the hexaface partition.

Two frames are in play:

* mesh frame: the generator's native frame, pole on +Z, longitude measured
  from +X toward +Y.
* world frame: the head-tracking frame, up is +Y and the canonical forward
  vector is -Z (right-handed, OpenGL style).

Both frames share the same (yaw, pitch) parametrisation: yaw is the mesh
longitude and pitch the latitude, so ``mesh_to_world`` is a fixed proper
rotation.  Yaw is canonicalised to [-pi, pi); positive yaw turns from -Z
toward -X.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateParameterError, MisalignmentError

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi
_ALIGN_TOL = 1e-9

FORWARD = (0.0, 0.0, -1.0)
UP = (0.0, 1.0, 0.0)


def wrap_yaw(angle):
    """Wrap an angle (scalar or array) into [-pi, pi)."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + math.pi, TWO_PI) - math.pi
    # fmod rounding can land exactly on +pi
    wrapped = np.where(wrapped >= math.pi, wrapped - TWO_PI, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def mesh_to_world(points):
    """Map mesh-frame points (pole +Z) to the world frame (up +Y, forward -Z)."""
    p = np.asarray(points, dtype=float)
    return np.stack([-p[..., 1], p[..., 2], -p[..., 0]], axis=-1)


def world_to_mesh(points):
    p = np.asarray(points, dtype=float)
    return np.stack([-p[..., 2], -p[..., 0], p[..., 1]], axis=-1)


def direction_to_angles(direction):
    """Return (yaw, pitch) of world-frame direction(s).

    Accepts one vector or an ``(..., 3)`` array; yaw is in [-pi, pi).
    """
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d, axis=-1)
    yaw = wrap_yaw(np.arctan2(-d[..., 0], -d[..., 2]))
    pitch = np.arcsin(np.clip(d[..., 1] / norm, -1.0, 1.0))
    if d.ndim == 1:
        return float(yaw), float(pitch)
    return yaw, pitch


def angles_to_direction(yaw, pitch):
    yaw = np.asarray(yaw, dtype=float)
    pitch = np.asarray(pitch, dtype=float)
    cp = np.cos(pitch)
    d = np.stack([-np.sin(yaw) * cp, np.sin(pitch), -np.cos(yaw) * cp], axis=-1)
    return d


def _mesh_angles(points):
    p = np.asarray(points, dtype=float)
    norm = np.linalg.norm(p, axis=-1)
    yaw = wrap_yaw(np.arctan2(p[..., 1], p[..., 0]))
    pitch = np.arcsin(np.clip(p[..., 2] / norm, -1.0, 1.0))
    return yaw, pitch


@dataclass(frozen=True)
class AngularRect:
    """Axis-aligned rectangle in (yaw, pitch).

    ``yaw_min > yaw_max`` means the yaw interval crosses the +-pi seam.  A
    full-yaw rectangle is written ``(-pi, pi)``.  Membership is half-open
    (min edges inclusive, max edges exclusive) except that ``pitch_max ==
    pi/2`` includes the pole.
    """

    yaw_min: float
    yaw_max: float
    pitch_min: float
    pitch_max: float

    def __post_init__(self):
        if not (-HALF_PI - 1e-12 <= self.pitch_min < self.pitch_max <= HALF_PI + 1e-12):
            raise DegenerateParameterError(
                f"pitch interval [{self.pitch_min}, {self.pitch_max}] is degenerate "
                "or outside [-pi/2, pi/2]"
            )
        for v in (self.yaw_min, self.yaw_max):
            if not -math.pi - 1e-12 <= v <= math.pi + 1e-12:
                raise DegenerateParameterError(f"yaw bound {v} outside [-pi, pi]")
        if self.yaw_min == self.yaw_max:
            raise DegenerateParameterError("yaw span must be positive")

    @classmethod
    def full_yaw(cls, pitch_min, pitch_max):
        return cls(-math.pi, math.pi, pitch_min, pitch_max)

    @property
    def is_full_yaw(self):
        return self.yaw_span >= TWO_PI - 1e-12

    @property
    def yaw_span(self):
        if self.yaw_min < self.yaw_max:
            return self.yaw_max - self.yaw_min
        return self.yaw_max - self.yaw_min + TWO_PI

    @property
    def pitch_span(self):
        return self.pitch_max - self.pitch_min

    @property
    def wraps(self):
        return self.yaw_min > self.yaw_max

    def yaw_pieces(self):
        """Non-wrapping yaw intervals covering the rect's yaw range."""
        if self.yaw_min < self.yaw_max:
            return [(self.yaw_min, self.yaw_max)]
        return [(self.yaw_min, math.pi), (-math.pi, self.yaw_max)]

    def contains(self, yaw, pitch):
        """Vectorised half-open membership test."""
        yaw = wrap_yaw(yaw)
        pitch = np.asarray(pitch, dtype=float)
        if self.is_full_yaw:
            in_yaw = np.ones(np.shape(yaw), dtype=bool)
        elif self.wraps:
            in_yaw = (yaw >= self.yaw_min) | (yaw < self.yaw_max)
        else:
            in_yaw = (yaw >= self.yaw_min) & (yaw < self.yaw_max)
        if self.pitch_max >= HALF_PI:
            in_pitch = pitch >= self.pitch_min
        else:
            in_pitch = (pitch >= self.pitch_min) & (pitch < self.pitch_max)
        result = in_yaw & in_pitch
        if np.ndim(result) == 0:
            return bool(result)
        return result

    def overlap_area(self, other):
        """Area of intersection in the (yaw, pitch) parameter plane."""
        dp = min(self.pitch_max, other.pitch_max) - max(self.pitch_min, other.pitch_min)
        if dp <= 0.0:
            return 0.0
        dy = 0.0
        for a0, a1 in self.yaw_pieces():
            for b0, b1 in other.yaw_pieces():
                dy += max(0.0, min(a1, b1) - max(a0, b0))
        return dy * dp

    def solid_angle(self):
        return self.yaw_span * (math.sin(self.pitch_max) - math.sin(self.pitch_min))


@dataclass(frozen=True, eq=False)
class SphereMesh:
    """Triangulated unit sphere.

    Vertex ``m * slices + n`` is stack ``m`` (polar angle ``pi*m/M`` from
    the +Z pole) and slice ``n``.  Pole rows hold ``slices`` coincident
    vertices; the zero-area triangles they would produce are not emitted.
    Triangle winding makes every face normal point toward the centre.
    """

    stacks: int
    slices: int
    vertices: np.ndarray
    triangles: np.ndarray
    normal_orientation: str = "inward"

    def __eq__(self, other):
        if not isinstance(other, SphereMesh):
            return NotImplemented
        return (
            self.stacks == other.stacks
            and self.slices == other.slices
            and np.array_equal(self.vertices, other.vertices)
            and np.array_equal(self.triangles, other.triangles)
        )

    def vertex(self, m, n):
        return self.vertices[m * self.slices + n]

    def face_normals(self):
        v = self.vertices[self.triangles]
        return np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])

    def centroids(self):
        return self.vertices[self.triangles].mean(axis=1)

    def stack_pitch(self, m):
        return HALF_PI - math.pi * m / self.stacks

    def to_obj(self):
        lines = [f"# sphere mesh stacks={self.stacks} slices={self.slices}"]
        lines.extend(f"v {x:.12g} {y:.12g} {z:.12g}" for x, y, z in self.vertices)
        lines.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in self.triangles)
        return "\n".join(lines) + "\n"


def generate_sphere_mesh(stacks: int, slices: int) -> SphereMesh:
    if stacks < 2:
        raise DegenerateParameterError("stacks must be ≥ 2")
    if slices < 3:
        raise DegenerateParameterError("slices must be ≥ 3")
    m = np.arange(stacks + 1)[:, None]
    n = np.arange(slices)[None, :]
    polar = math.pi * m / stacks
    azimuth = TWO_PI * n / slices
    vertices = np.empty((stacks + 1, slices, 3))
    vertices[..., 0] = np.sin(polar) * np.cos(azimuth)
    vertices[..., 1] = np.sin(polar) * np.sin(azimuth)
    vertices[..., 2] = np.broadcast_to(np.cos(polar), (stacks + 1, slices))
    vertices = vertices.reshape(-1, 3)

    tris = []
    for row in range(stacks):
        for col in range(slices):
            a = row * slices + col
            b = row * slices + (col + 1) % slices
            c = (row + 1) * slices + col
            d = (row + 1) * slices + (col + 1) % slices
            # row 0 is the top pole, so (a, b) coincide there; likewise (c, d) at the bottom
            if row != 0:
                tris.append((a, b, d))
            if row != stacks - 1:
                tris.append((a, d, c))
    triangles = np.asarray(tris, dtype=np.int64)

    v = vertices[triangles]
    normals = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    outward = np.einsum("ij,ij->i", normals, v.mean(axis=1)) > 0
    triangles[outward] = triangles[outward][:, [0, 2, 1]]

    vertices.setflags(write=False)
    triangles.setflags(write=False)
    return SphereMesh(stacks, slices, vertices, triangles)


@dataclass(frozen=True)
class HexafaceConfig:
    alpha: float = HALF_PI
    beta: float = math.pi / 4

    def __post_init__(self):
        if not self.alpha > 0:
            raise DegenerateParameterError("alpha must be positive")
        count = round(TWO_PI / self.alpha)
        if count < 1 or abs(count * self.alpha - TWO_PI) > _ALIGN_TOL:
            raise DegenerateParameterError(f"alpha={self.alpha} does not divide 2*pi")
        if not 0.0 < self.beta < HALF_PI:
            raise DegenerateParameterError("beta must lie in (0, pi/2)")

    @property
    def middle_count(self) -> int:
        return round(TWO_PI / self.alpha)

    @classmethod
    def from_degrees(cls, alpha_deg=90.0, beta_deg=45.0):
        return cls(math.radians(alpha_deg), math.radians(beta_deg))


_MIDDLE_NAMES_4 = ("front", "left", "back", "right")


@dataclass(frozen=True, eq=False)
class Segment:
    segment_id: int
    name: str
    kind: str  # "middle", "top" or "bottom"
    rect: AngularRect
    triangles: np.ndarray = field(repr=False)

    @property
    def center(self):
        """Viewing direction (yaw, pitch) that best represents the segment.

        Middle segments use their angular centre; caps use their pole.
        """
        if self.kind == "top":
            return 0.0, HALF_PI
        if self.kind == "bottom":
            return 0.0, -HALF_PI
        return wrap_yaw(self.rect.yaw_min + 0.5 * self.rect.yaw_span), 0.0


@dataclass(frozen=True, eq=False)
class HexafaceSphere:
    segments: tuple
    config: HexafaceConfig
    mesh: SphereMesh | None = field(default=None, repr=False)

    def __iter__(self):
        return iter(self.segments)

    def __len__(self):
        return len(self.segments)

    def __getitem__(self, segment_id):
        return self.segments[segment_id]

    @property
    def ids(self):
        return [s.segment_id for s in self.segments]

    @property
    def top_id(self):
        return self.config.middle_count

    @property
    def bottom_id(self):
        return self.config.middle_count + 1

    def by_name(self, name):
        for s in self.segments:
            if s.name == name:
                return s
        raise KeyError(name)

    def neighbors(self, segment_id):
        """Segments sharing a boundary with ``segment_id``.

        Middle segments touch their two yaw neighbours and both caps; a cap
        touches every middle segment.
        """
        count = self.config.middle_count
        if segment_id >= count:
            return frozenset(range(count))
        near = {(segment_id - 1) % count, (segment_id + 1) % count, self.top_id, self.bottom_id}
        near.discard(segment_id)
        return frozenset(near)

    def segment_of_angles(self, yaw, pitch):
        for s in self.segments:
            if s.rect.contains(yaw, pitch):
                return s.segment_id
        raise AssertionError(f"({yaw}, {pitch}) not covered by any segment")

    def segment_of(self, direction):
        yaw, pitch = direction_to_angles(direction)
        return self.segment_of_angles(yaw, pitch)

    def segments_of(self, directions):
        """Vectorised ``segment_of`` for an ``(n, 3)`` array; -1 marks a miss."""
        yaw, pitch = direction_to_angles(np.atleast_2d(directions))
        return self.segments_of_angles(yaw, pitch)

    def segments_of_angles(self, yaw, pitch):
        out = np.full(np.shape(yaw), -1, dtype=np.int64)
        for s in self.segments:
            out[s.rect.contains(yaw, pitch) & (out < 0)] = s.segment_id
        return out

    def segment_table(self):
        return [
            {
                "segment_id": s.segment_id,
                "name": s.name,
                "kind": s.kind,
                "yaw_min": s.rect.yaw_min,
                "yaw_max": s.rect.yaw_max,
                "pitch_min": s.rect.pitch_min,
                "pitch_max": s.rect.pitch_max,
                "triangle_count": int(len(s.triangles)),
            }
            for s in self.segments
        ]


def hexaface_rects(config: HexafaceConfig):
    """(segment_id, name, kind, rect) for every segment of ``config``."""
    count = config.middle_count
    alpha, beta = config.alpha, config.beta
    # shared boundary floats keep neighbouring rects gap- and overlap-free
    bounds = [wrap_yaw(-0.5 * alpha + j * alpha) for j in range(count)]
    out = []
    for k in range(count):
        name = _MIDDLE_NAMES_4[k] if count == 4 else f"middle-{k}"
        if count == 1:
            rect = AngularRect.full_yaw(-beta, beta)
        else:
            rect = AngularRect(bounds[k], bounds[(k + 1) % count], -beta, beta)
        out.append((k, name, "middle", rect))
    out.append((count, "top", "top", AngularRect.full_yaw(beta, HALF_PI)))
    out.append((count + 1, "bottom", "bottom", AngularRect.full_yaw(-HALF_PI, -beta)))
    return out


def _check_alignment(mesh: SphereMesh, config: HexafaceConfig):
    m_beta = mesh.stacks * (HALF_PI - config.beta) / math.pi
    if abs(m_beta - round(m_beta)) > _ALIGN_TOL or round(m_beta) < 1:
        raise MisalignmentError(
            f"beta={config.beta} does not fall on a stack boundary of a {mesh.stacks}-stack mesh"
        )
    if config.middle_count > 1:
        s_half = mesh.slices * config.alpha / (4.0 * math.pi)
        if abs(s_half - round(s_half)) > _ALIGN_TOL or round(s_half) < 1:
            raise MisalignmentError(
                f"alpha={config.alpha} segment edges do not fall on slice boundaries "
                f"of a {mesh.slices}-slice mesh"
            )


def build_hexaface(mesh: SphereMesh, config: HexafaceConfig | None = None) -> HexafaceSphere:
    config = config or HexafaceConfig()
    _check_alignment(mesh, config)
    rects = hexaface_rects(config)
    yaw, pitch = _mesh_angles(mesh.centroids())
    owner = np.full(len(mesh.triangles), -1, dtype=np.int64)
    for sid, _, _, rect in rects:
        owner[rect.contains(yaw, pitch) & (owner < 0)] = sid
    assert (owner >= 0).all()
    segments = []
    for sid, name, kind, rect in rects:
        tris = mesh.triangles[owner == sid]
        tris.setflags(write=False)
        segments.append(Segment(sid, name, kind, rect, tris))
    return HexafaceSphere(tuple(segments), config, mesh)


def default_hexaface(stacks=64, slices=128, config=None) -> HexafaceSphere:
    return build_hexaface(generate_sphere_mesh(stacks, slices), config or HexafaceConfig())
