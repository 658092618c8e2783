"""
Geometric primitives for tabletop scenes.

Poses are (position, unit quaternion) pairs with quaternions stored as
(w, x, y, z). Oriented bounding boxes rotate about the vertical axis only, so
the separating-axis test needs the four edge normals of two rectangles plus a
vertical interval check.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from .exceptions import InvalidInputError

Vec3 = Tuple[float, float, float]
Quat = Tuple[float, float, float, float]

QUAT_TOLERANCE = 1e-9
IDENTITY_QUAT: Quat = (1.0, 0.0, 0.0, 0.0)


def _finite_tuple(values: Iterable[float], size: int, what: str) -> Tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if len(out) != size:
        raise InvalidInputError(f"{what} must have {size} components, got {len(out)}")
    if not all(math.isfinite(v) for v in out):
        raise InvalidInputError(f"{what} has a non-finite component: {out}")
    return out


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle in radians to [-pi, pi)."""
    if not math.isfinite(yaw):
        raise InvalidInputError(f"yaw must be finite, got {yaw}")
    wrapped = (yaw + math.pi) % (2.0 * math.pi) - math.pi
    # fmod rounding can land exactly on +pi
    return -math.pi if wrapped >= math.pi else wrapped


def quat_from_yaw(yaw: float) -> Quat:
    """Unit quaternion (w, x, y, z) for a rotation of ``yaw`` radians about +z."""
    half = 0.5 * yaw
    return (math.cos(half), 0.0, 0.0, math.sin(half))


def yaw_from_quat(q: Sequence[float]) -> float:
    """Heading of the body x-axis projected onto the table plane, in [-pi, pi)."""
    w, x, y, z = q
    return normalize_yaw(math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z)))


def rotate_vector(q: Sequence[float], v: Sequence[float]) -> np.ndarray:
    """Rotate ``v`` by the unit quaternion ``q`` given as (w, x, y, z)."""
    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w]).apply(np.asarray(v, dtype=float))


@dataclass(frozen=True)
class Pose:
    """Position in meters plus unit-quaternion orientation (w, x, y, z)."""

    position: Vec3
    orientation: Quat = IDENTITY_QUAT

    def __post_init__(self):
        position = _finite_tuple(self.position, 3, "position")
        q = np.array(_finite_tuple(self.orientation, 4, "orientation"))
        norm = float(np.linalg.norm(q))
        if norm < QUAT_TOLERANCE:
            raise InvalidInputError("orientation quaternion has zero norm")
        if abs(norm - 1.0) > 1e-12:
            q = q / norm
        object.__setattr__(self, "position", position)
        object.__setattr__(self, "orientation", tuple(float(c) for c in q))

    @classmethod
    def from_xyz_yaw(cls, x: float, y: float, z: float, yaw: float = 0.0) -> "Pose":
        """Build a pose from a table position and a heading in radians."""
        return cls((x, y, z), quat_from_yaw(yaw))

    @property
    def yaw(self) -> float:
        return yaw_from_quat(self.orientation)

    def with_position(self, x: float, y: float, z: float) -> "Pose":
        return Pose((x, y, z), self.orientation)


@dataclass(frozen=True)
class Obb:
    """Box with a vertical-axis rotation: center (m), positive half extents (m), yaw (rad)."""

    center: Vec3
    half_extents: Vec3
    yaw: float = 0.0

    def __post_init__(self):
        center = _finite_tuple(self.center, 3, "center")
        half = _finite_tuple(self.half_extents, 3, "half_extents")
        if any(h <= 0 for h in half):
            raise InvalidInputError(f"half_extents must be strictly positive, got {half}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "half_extents", half)
        object.__setattr__(self, "yaw", normalize_yaw(float(self.yaw)))

    @classmethod
    def from_dims(cls, center: Sequence[float], dims: Sequence[float], yaw: float = 0.0) -> "Obb":
        """Build a box from full dimensions instead of half extents."""
        return cls(tuple(center), tuple(0.5 * float(d) for d in dims), yaw)

    @classmethod
    def from_pose(cls, pose: Pose, dims: Sequence[float]) -> "Obb":
        return cls.from_dims(pose.position, dims, pose.yaw)

    @property
    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        """Unit x and y axes of the box in the table plane."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([c, s]), np.array([-s, c])

    @property
    def bottom(self) -> float:
        return self.center[2] - self.half_extents[2]

    @property
    def top(self) -> float:
        return self.center[2] + self.half_extents[2]

    def corners_xy(self) -> np.ndarray:
        """Footprint corners (4 x 2), counter-clockwise."""
        ux, uy = self.axes
        hx, hy = self.half_extents[0], self.half_extents[1]
        c = np.array(self.center[:2])
        return np.array([
            c + hx * ux + hy * uy,
            c - hx * ux + hy * uy,
            c - hx * ux - hy * uy,
            c + hx * ux - hy * uy,
        ])

    def inflated(self, amount: float) -> "Obb":
        """Same box with every half extent grown by ``amount``."""
        hx, hy, hz = self.half_extents
        return Obb(self.center, (hx + amount, hy + amount, hz + amount), self.yaw)

    def moved_to(self, x: float, y: float, z: Optional[float] = None) -> "Obb":
        return Obb((x, y, self.center[2] if z is None else z), self.half_extents, self.yaw)

    def contains_point(self, point: Sequence[float]) -> bool:
        """Strict interior membership test for a 3D point."""
        local = self.to_local_xy(point[:2])
        return (abs(local[0]) < self.half_extents[0]
                and abs(local[1]) < self.half_extents[1]
                and abs(point[2] - self.center[2]) < self.half_extents[2])

    def to_local_xy(self, point_xy: Sequence[float]) -> np.ndarray:
        """Express a table-plane point in the box's yaw frame, relative to its center."""
        ux, uy = self.axes
        d = np.asarray(point_xy, dtype=float) - np.array(self.center[:2])
        return np.array([d @ ux, d @ uy])


@dataclass(frozen=True)
class Rect2D:
    """Horizontal rectangle at height ``z``: center xy, half extents, yaw."""

    center: Tuple[float, float]
    half_extents: Tuple[float, float]
    yaw: float
    z: float

    def to_local(self, point_xy: Sequence[float]) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        dx = float(point_xy[0]) - self.center[0]
        dy = float(point_xy[1]) - self.center[1]
        return np.array([c * dx + s * dy, -s * dx + c * dy])

    def to_world(self, local_xy: Sequence[float]) -> Tuple[float, float]:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        lx, ly = float(local_xy[0]), float(local_xy[1])
        return (self.center[0] + c * lx - s * ly, self.center[1] + s * lx + c * ly)

    def contains(self, point_xy: Sequence[float], inset: float = 0.0) -> bool:
        """True when the point lies inside the rectangle shrunk by ``inset`` on every side."""
        local = self.to_local(point_xy)
        return (abs(local[0]) <= self.half_extents[0] - inset
                and abs(local[1]) <= self.half_extents[1] - inset)

    @property
    def area(self) -> float:
        return 4.0 * self.half_extents[0] * self.half_extents[1]


@dataclass(frozen=True)
class TableBounds:
    """Rectangular support surface, axis aligned, with its top height."""

    x_min: float = 0.25
    x_max: float = 0.85
    y_min: float = -0.40
    y_max: float = 0.40
    z_top: float = 0.0

    def __post_init__(self):
        _finite_tuple((self.x_min, self.x_max, self.y_min, self.y_max, self.z_top), 5, "bounds")
        if not self.x_min < self.x_max:
            raise InvalidInputError("x_min must be < x_max")
        if not self.y_min < self.y_max:
            raise InvalidInputError("y_min must be < y_max")

    @property
    def center(self) -> Tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def depth(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.depth

    def contains_xy(self, x: float, y: float, tol: float = 1e-9) -> bool:
        return (self.x_min - tol <= x <= self.x_max + tol
                and self.y_min - tol <= y <= self.y_max + tol)

    def clamp_xy(self, x: float, y: float) -> Tuple[float, float]:
        return (min(max(x, self.x_min), self.x_max), min(max(y, self.y_min), self.y_max))

    def as_rect(self) -> Rect2D:
        return Rect2D(self.center, (0.5 * self.width, 0.5 * self.depth), 0.0, self.z_top)


def quat_geodesic(q1: Sequence[float], q2: Sequence[float]) -> float:
    """
    Geodesic distance on SO(3) between two unit quaternions.

    Returns ``2 * arccos(min(1, |q1 . q2|))`` in [0, pi]; negating either
    argument leaves the result unchanged.

    Raises:
        InvalidInputError: If any component is non-finite
    """
    a = np.array(_finite_tuple(q1, 4, "q1"))
    b = np.array(_finite_tuple(q2, 4, "q2"))
    return 2.0 * math.acos(min(1.0, abs(float(a @ b))))


def pose_distance(t: Pose, t_ref: Pose, beta: float = 1.0) -> float:
    """
    Weighted SE(3) distance: translation norm plus ``beta`` times rotation angle.

    Args:
        t: Pose to measure
        t_ref: Reference (nominal) pose
        beta: Weight converting radians to meters-equivalent

    Raises:
        InvalidInputError: If beta is negative
    """
    if not beta >= 0:
        raise InvalidInputError(f"beta must be >= 0, got {beta}")
    translation = float(np.linalg.norm(np.subtract(t.position, t_ref.position)))
    return translation + beta * quat_geodesic(t.orientation, t_ref.orientation)


def _radius_along(box: Obb, hx: float, hy: float, axis: np.ndarray) -> float:
    ux, uy = box.axes
    return hx * abs(float(ux @ axis)) + hy * abs(float(uy @ axis))


def separation(a: Obb, b: Obb, margin: float = 0.0) -> float:
    """
    Signed gap between two boxes inflated by ``margin / 2`` each.

    Positive values are the largest separating gap found among the four
    horizontal candidate axes and the vertical axis; non-positive values are
    the negated minimum penetration depth.
    """
    pad = 0.5 * margin
    ahx, ahy, ahz = (h + pad for h in a.half_extents)
    bhx, bhy, bhz = (h + pad for h in b.half_extents)
    d = np.array(b.center[:2]) - np.array(a.center[:2])
    gaps = []
    for axis in (*a.axes, *b.axes):
        gaps.append(abs(float(d @ axis))
                    - _radius_along(a, ahx, ahy, axis) - _radius_along(b, bhx, bhy, axis))
    gaps.append(abs(b.center[2] - a.center[2]) - ahz - bhz)
    return max(gaps)


def obb_overlap(a: Obb, b: Obb, margin: float = 0.0) -> bool:
    """
    Separating-axis overlap test for yaw-rotated boxes.

    Each box is inflated by ``margin / 2`` on every half extent. Boxes that
    touch exactly at the inflated boundary do not overlap.

    Args:
        a: First box
        b: Second box
        margin: Required clearance in meters

    Returns:
        bool: True iff no separating axis exists and the vertical intervals overlap

    Raises:
        InvalidInputError: If margin is negative
    """
    if not margin >= 0:
        raise InvalidInputError(f"margin must be >= 0, got {margin}")
    return separation(a, b, margin) < 0.0


def top_surface_region(o: Obb) -> Rect2D:
    """The box's top face as a horizontal rectangle."""
    return Rect2D((o.center[0], o.center[1]), (o.half_extents[0], o.half_extents[1]),
                  o.yaw, o.center[2] + o.half_extents[2])


def footprint(o: Obb) -> Rect2D:
    """The box's bottom face as a horizontal rectangle."""
    return Rect2D((o.center[0], o.center[1]), (o.half_extents[0], o.half_extents[1]),
                  o.yaw, o.bottom)
