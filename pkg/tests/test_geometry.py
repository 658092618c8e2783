"""
Tests for poses, boxes and the overlap test.
"""

import math

import numpy as np
import pytest

from benchgen.exceptions import InvalidInputError
from benchgen.geometry import (Obb, Pose, TableBounds, footprint, normalize_yaw, obb_overlap, pose_distance,
                               quat_from_yaw, quat_geodesic, separation, top_surface_region)


class TestPose:
    """Test Pose construction and normalization."""

    def test_identity_default(self):
        pose = Pose((0.5, 0.0, 0.1))
        assert pose.orientation == (1.0, 0.0, 0.0, 0.0)
        assert pose.yaw == 0.0

    def test_quaternion_is_normalized(self):
        pose = Pose((0.0, 0.0, 0.0), (2.0, 0.0, 0.0, 0.0))
        assert pose.orientation == pytest.approx((1.0, 0.0, 0.0, 0.0))

    def test_zero_quaternion_rejected(self):
        with pytest.raises(InvalidInputError, match="zero norm"):
            Pose((0.0, 0.0, 0.0), (0.0, 0.0, 0.0, 0.0))

    def test_non_finite_position_rejected(self):
        with pytest.raises(InvalidInputError, match="non-finite"):
            Pose((float("nan"), 0.0, 0.0))

    def test_yaw_roundtrip(self):
        pose = Pose.from_xyz_yaw(0.3, 0.1, 0.02, math.pi / 3)
        assert pose.yaw == pytest.approx(math.pi / 3)


class TestYaw:
    """Test angle wrapping."""

    def test_wraps_into_half_open_interval(self):
        assert normalize_yaw(math.pi) == pytest.approx(-math.pi)
        assert normalize_yaw(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
        assert normalize_yaw(0.25) == pytest.approx(0.25)

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            normalize_yaw(float("inf"))


class TestQuatGeodesic:
    """Test SO(3) distance."""

    def test_identical_is_zero(self):
        q = quat_from_yaw(0.4)
        assert quat_geodesic(q, q) == pytest.approx(0.0, abs=1e-7)

    def test_sign_invariance(self):
        q1 = quat_from_yaw(0.2)
        q2 = quat_from_yaw(1.1)
        neg = tuple(-c for c in q2)
        assert quat_geodesic(q1, q2) == pytest.approx(quat_geodesic(q1, neg))

    def test_yaw_difference(self):
        assert quat_geodesic(quat_from_yaw(0.0), quat_from_yaw(math.pi / 2)) == pytest.approx(math.pi / 2)

    def test_bounded_by_pi(self):
        assert quat_geodesic(quat_from_yaw(0.0), quat_from_yaw(math.pi)) == pytest.approx(math.pi)


class TestPoseDistance:
    """Test the weighted SE(3) distance."""

    def test_translation_only(self):
        a = Pose((0.0, 0.0, 0.0))
        b = Pose((0.3, 0.4, 0.0))
        assert pose_distance(a, b) == pytest.approx(0.5)

    def test_rotation_weighted(self):
        a = Pose.from_xyz_yaw(0.0, 0.0, 0.0, math.pi / 2)
        b = Pose.from_xyz_yaw(0.0, 0.0, 0.0, 0.0)
        assert pose_distance(a, b, beta=0.5) == pytest.approx(math.pi / 4)

    def test_negative_beta_rejected(self):
        with pytest.raises(InvalidInputError, match="beta"):
            pose_distance(Pose((0, 0, 0)), Pose((0, 0, 0)), beta=-1.0)


class TestObbOverlap:
    """Test the separating-axis overlap test."""

    def test_overlapping_boxes(self):
        a = Obb.from_dims((0.0, 0.0, 0.05), (0.1, 0.1, 0.1))
        b = Obb.from_dims((0.05, 0.0, 0.05), (0.1, 0.1, 0.1))
        assert obb_overlap(a, b)

    def test_separated_boxes(self):
        a = Obb.from_dims((0.0, 0.0, 0.05), (0.1, 0.1, 0.1))
        b = Obb.from_dims((0.2, 0.0, 0.05), (0.1, 0.1, 0.1))
        assert not obb_overlap(a, b)

    def test_touching_is_not_overlap(self):
        a = Obb.from_dims((0.0, 0.0, 0.05), (0.1, 0.1, 0.1))
        b = Obb.from_dims((0.1, 0.0, 0.05), (0.1, 0.1, 0.1))
        assert not obb_overlap(a, b)

    def test_margin_creates_overlap(self):
        a = Obb.from_dims((0.0, 0.0, 0.05), (0.1, 0.1, 0.1))
        b = Obb.from_dims((0.105, 0.0, 0.05), (0.1, 0.1, 0.1))
        assert not obb_overlap(a, b)
        assert obb_overlap(a, b, margin=0.01)

    def test_rotated_box_reaches_further(self):
        a = Obb.from_dims((0.0, 0.0, 0.05), (0.1, 0.1, 0.1))
        b = Obb.from_dims((0.11, 0.0, 0.05), (0.1, 0.1, 0.1), yaw=math.pi / 4)
        assert obb_overlap(a, b)

    def test_vertical_separation(self):
        a = Obb.from_dims((0.0, 0.0, 0.05), (0.1, 0.1, 0.1))
        b = Obb.from_dims((0.0, 0.0, 0.2), (0.1, 0.1, 0.1))
        assert not obb_overlap(a, b)

    def test_symmetric(self):
        a = Obb.from_dims((0.0, 0.0, 0.05), (0.2, 0.05, 0.1), yaw=0.3)
        b = Obb.from_dims((0.08, 0.06, 0.05), (0.1, 0.1, 0.1), yaw=-0.7)
        assert obb_overlap(a, b) == obb_overlap(b, a)

    def test_negative_margin_rejected(self):
        a = Obb.from_dims((0.0, 0.0, 0.05), (0.1, 0.1, 0.1))
        with pytest.raises(InvalidInputError, match="margin"):
            obb_overlap(a, a, margin=-0.01)

    def test_degenerate_box_rejected(self):
        with pytest.raises(InvalidInputError, match="strictly positive"):
            Obb((0.0, 0.0, 0.0), (0.0, 0.1, 0.1))


class TestSurfaces:
    """Test face regions of a box."""

    def test_top_and_bottom_heights(self):
        box = Obb.from_dims((0.5, 0.0, 0.1), (0.2, 0.1, 0.2))
        assert top_surface_region(box).z == pytest.approx(0.2)
        assert footprint(box).z == pytest.approx(0.0)
        assert top_surface_region(box).area == pytest.approx(0.02)

    def test_contains_with_inset(self):
        region = top_surface_region(Obb.from_dims((0.0, 0.0, 0.1), (0.2, 0.2, 0.2)))
        assert region.contains((0.09, 0.0))
        assert not region.contains((0.09, 0.0), inset=0.02)


class TestTableBounds:
    """Test table bounds validation."""

    def test_defaults(self):
        bounds = TableBounds()
        assert bounds.width == pytest.approx(0.6)
        assert bounds.depth == pytest.approx(0.8)
        assert bounds.center == pytest.approx((0.55, 0.0))

    def test_inverted_rejected(self):
        with pytest.raises(InvalidInputError, match="x_min"):
            TableBounds(x_min=1.0, x_max=0.5)

    def test_clamp(self):
        assert TableBounds().clamp_xy(2.0, -2.0) == (0.85, -0.40)


def _random_box(rng):
    center = (rng.uniform(0.0, 0.3), rng.uniform(0.0, 0.3), rng.uniform(0.0, 0.1))
    return Obb(center, tuple(rng.uniform(0.01, 0.1, size=3)), rng.uniform(-math.pi, math.pi))


def _points_in(box, rng, n):
    """Uniform samples strictly inside ``box``."""
    local = rng.uniform(-0.999, 0.999, size=(n, 3)) * np.array(box.half_extents)
    ux, uy = box.axes
    xy = np.array(box.center[:2]) + np.outer(local[:, 0], ux) + np.outer(local[:, 1], uy)
    return np.column_stack([xy, box.center[2] + local[:, 2]])


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _edges_cross(a, b):
    pa, pb = a.corners_xy(), b.corners_xy()
    for i in range(4):
        p1, p2 = pa[i], pa[(i + 1) % 4]
        for j in range(4):
            q1, q2 = pb[j], pb[(j + 1) % 4]
            if (_cross(p1, p2, q1) * _cross(p1, p2, q2) < 0
                    and _cross(q1, q2, p1) * _cross(q1, q2, p2) < 0):
                return True
    return False


def _strictly_inside_xy(box, point):
    local = box.to_local_xy(point)
    return abs(local[0]) < box.half_extents[0] and abs(local[1]) < box.half_extents[1]


def _exact_overlap(a, b):
    """Footprints share area and the vertical intervals overlap."""
    if abs(b.center[2] - a.center[2]) >= a.half_extents[2] + b.half_extents[2]:
        return False
    return (any(_strictly_inside_xy(b, c) for c in a.corners_xy())
            or any(_strictly_inside_xy(a, c) for c in b.corners_xy())
            or _edges_cross(a, b))


class TestOverlapOracle:
    """Compare the separating-axis test with sampling and exact geometric oracles."""

    def test_sampled_shared_point_implies_overlap(self):
        rng = np.random.default_rng(101)
        hits = 0
        for _ in range(1000):
            a, b = _random_box(rng), _random_box(rng)
            if any(b.contains_point(p) for p in _points_in(a, rng, 64)):
                hits += 1
                assert obb_overlap(a, b)
                assert obb_overlap(b, a)
        assert hits > 50

    def test_matches_exact_intersection(self):
        rng = np.random.default_rng(202)
        for _ in range(1000):
            a, b = _random_box(rng), _random_box(rng)
            if abs(separation(a, b)) < 1e-9:
                continue
            assert obb_overlap(a, b) == _exact_overlap(a, b)

    def test_margin_never_removes_overlap(self):
        rng = np.random.default_rng(303)
        for _ in range(1000):
            a, b = _random_box(rng), _random_box(rng)
            if obb_overlap(a, b):
                assert obb_overlap(a, b, margin=rng.uniform(0.0, 0.05))


class TestQuatGeodesicProperties:
    """Seeded checks of the quaternion distance over random rotations."""

    def test_sign_flip_invariance(self):
        rng = np.random.default_rng(404)
        for _ in range(1000):
            q1, q2 = rng.normal(size=4), rng.normal(size=4)
            q1, q2 = q1 / np.linalg.norm(q1), q2 / np.linalg.norm(q2)
            d = quat_geodesic(q1, q2)
            assert 0.0 <= d <= math.pi
            assert quat_geodesic(q1, -q2) == pytest.approx(d)
            assert quat_geodesic(-q1, q2) == pytest.approx(d)
            assert quat_geodesic(q2, q1) == pytest.approx(d)
