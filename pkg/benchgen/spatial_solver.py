"""
Spatial constraint solver for base-level objects.

Turns the table-level predicates of a validated plan (place-on-base,
cluster-around, place-anywhere) into collision-free (x, y, yaw) poses. The
solver walks a ladder of increasing collision margins; at each margin it
initializes positions, pulls cluster members back to their anchors, assigns
headings and then pushes overlapping pairs apart, jittering everything when
the collision count stalls.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .config import SolverConfig
from .exceptions import InvalidInputError, SolveFailure
from .geometry import Obb, TableBounds, normalize_yaw, separation
from .scene_model import (
    Catalog,
    ClusterAround,
    PlaceIn,
    PlaceOn,
    PlaceOnBase,
    ScenePlan,
)

logger = logging.getLogger(__name__)

Dims = Tuple[float, float, float]

# Footprints are vertical prisms; only the table-plane overlap matters.
_PRISM_HEIGHT = 1.0
_RELATIVE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Pose2D:
    """Table-plane pose: x, y in meters and yaw in radians."""

    x: float
    y: float
    yaw: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.yaw)):
            raise InvalidInputError(f"Pose2D must be finite, got ({self.x}, {self.y}, {self.yaw})")


@dataclass
class Layout2D:
    """
    Solver output for every base-level object.

    Attributes:
        poses: Object name to table-plane pose, in plan order
        margin: Collision margin (m) at which the layout was found
        displacement: Distance (m) each object moved during collision resolution
        iterations: Collision-resolution iterations used at the final margin
        collision_history: Collision count at each iteration of the final margin
        perturbations: Iterations at which all positions were jittered
    """

    poses: Dict[str, Pose2D] = field(default_factory=dict)
    margin: float = 0.0
    displacement: Dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    collision_history: List[int] = field(default_factory=list)
    perturbations: List[int] = field(default_factory=list)

    @property
    def names(self) -> List[str]:
        return list(self.poses)

    def footprints(self, dims: Mapping[str, Dims]) -> Dict[str, Obb]:
        return {name: footprint_obb(pose, dims[name]) for name, pose in self.poses.items()}


def footprint_obb(pose: Pose2D, dims: Sequence[float]) -> Obb:
    """Yaw-rotated footprint of an object as a vertical prism."""
    return Obb.from_dims((pose.x, pose.y, 0.0), (dims[0], dims[1], _PRISM_HEIGHT), pose.yaw)


def _aabb_half(dims: Sequence[float], yaw: float) -> Tuple[float, float]:
    c, s = abs(math.cos(yaw)), abs(math.sin(yaw))
    hx, hy = 0.5 * dims[0], 0.5 * dims[1]
    return c * hx + s * hy, s * hx + c * hy


def clamp_to_bounds(pose: Pose2D, dims: Sequence[float], bounds: TableBounds) -> Pose2D:
    """
    Move a pose so its footprint lies on the table.

    On an axis where the footprint is wider than the table the center is
    placed at the table's midline.
    """
    hx, hy = _aabb_half(dims, pose.yaw)
    cx, cy = bounds.center
    lo_x, hi_x = bounds.x_min + hx, bounds.x_max - hx
    lo_y, hi_y = bounds.y_min + hy, bounds.y_max - hy
    x = min(max(pose.x, lo_x), hi_x) if lo_x <= hi_x else cx
    y = min(max(pose.y, lo_y), hi_y) if lo_y <= hi_y else cy
    return Pose2D(x, y, pose.yaw)


def base_level_objects(plan: ScenePlan) -> List[str]:
    """Plan objects resting directly on the table, in plan order."""
    stacked = set()
    for pred in plan.predicates:
        if isinstance(pred, PlaceIn):
            stacked.update(pred.objects)
        elif isinstance(pred, PlaceOn):
            stacked.add(pred.object)
    return [name for name in plan.names if name not in stacked]


def polar_place(targets: Sequence[str],
                anchor_xy: Tuple[float, float],
                radius: float,
                rng: np.random.Generator,
                bounds: Optional[TableBounds] = None) -> Dict[str, Tuple[float, float]]:
    """
    Spread targets on a circle around an anchor.

    Target j of n sits at angle ``2*pi*j/n`` plus a uniform jitter of at most
    ``pi/(4n)`` and at distance ``radius`` from the anchor.

    Args:
        targets: Names to place, in order
        anchor_xy: Anchor center on the table
        radius: Circle radius in meters
        rng: Random generator (consumed once per target)
        bounds: If given, points are clamped onto the table

    Returns:
        Dict mapping each target to its (x, y)

    Raises:
        InvalidInputError: If radius is not positive
    """
    if not radius > 0:
        raise InvalidInputError(f"radius must be > 0, got {radius}")
    n = len(targets)
    out: Dict[str, Tuple[float, float]] = {}
    for j, name in enumerate(targets):
        jitter = rng.uniform(-math.pi / (4 * n), math.pi / (4 * n))
        theta = 2.0 * math.pi * j / n + jitter
        x = anchor_xy[0] + radius * math.cos(theta)
        y = anchor_xy[1] + radius * math.sin(theta)
        out[name] = bounds.clamp_xy(x, y) if bounds is not None else (x, y)
    return out


def find_collisions(layout: Mapping[str, Pose2D],
                    dims: Mapping[str, Dims],
                    margin: float) -> List[Tuple[str, str]]:
    """
    All unordered pairs whose footprints overlap at ``margin``.

    Pairs are reported as (earlier, later) in layout order, sorted by that order.
    """
    names = list(layout)
    boxes = [footprint_obb(layout[n], dims[n]) for n in names]
    pairs = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            if separation(boxes[i], boxes[j], margin) < 0.0:
                pairs.append((names[i], names[j]))
    return pairs


def resolve_overlap(a: Pose2D,
                    b: Pose2D,
                    dims_a: Sequence[float],
                    dims_b: Sequence[float],
                    margin: float,
                    rng: np.random.Generator,
                    bounds: Optional[TableBounds] = None) -> Tuple[Pose2D, Pose2D]:
    """
    Push an overlapping pair apart along the line between their centers.

    Each box moves ``penetration / 2 + margin / 4`` in opposite directions.
    Coincident centers get a uniformly random direction. With ``bounds`` the
    results are clamped onto the table, which may leave some overlap.

    Returns:
        The two updated poses (headings unchanged)
    """
    penetration = max(0.0, -separation(footprint_obb(a, dims_a), footprint_obb(b, dims_b), margin))
    d = np.array([b.x - a.x, b.y - a.y])
    norm = float(np.linalg.norm(d))
    if norm < 1e-12:
        angle = rng.uniform(0.0, 2.0 * math.pi)
        d = np.array([math.cos(angle), math.sin(angle)])
    else:
        d = d / norm
    step = 0.5 * penetration + 0.25 * margin
    new_a = Pose2D(a.x - step * d[0], a.y - step * d[1], a.yaw)
    new_b = Pose2D(b.x + step * d[0], b.y + step * d[1], b.yaw)
    if bounds is not None:
        new_a = clamp_to_bounds(new_a, dims_a, bounds)
        new_b = clamp_to_bounds(new_b, dims_b, bounds)
    return new_a, new_b


def _check_fits(dims: Mapping[str, Dims], bounds: TableBounds) -> None:
    short_side = min(bounds.width, bounds.depth)
    long_side = max(bounds.width, bounds.depth)
    for name, d in dims.items():
        if min(d[0], d[1]) > short_side or max(d[0], d[1]) > long_side:
            raise InvalidInputError(f"Object '{name}' ({d[0]:.3f} x {d[1]:.3f} m) does not fit on the table")


class _MarginAttempt:
    """One pass of initialization, relative constraints and collision resolution."""

    def __init__(self, plan: ScenePlan, names: List[str], dims: Dict[str, Dims],
                 bounds: TableBounds, cfg: SolverConfig, rng: np.random.Generator, margin: float):
        self.plan = plan
        self.names = names
        self.dims = dims
        self.bounds = bounds
        self.cfg = cfg
        self.rng = rng
        self.margin = margin
        self.poses: Dict[str, Pose2D] = {}
        self.requested: Dict[str, Pose2D] = {}
        self.clusters = [p for p in plan.predicates
                         if isinstance(p, ClusterAround) and p.anchor in dims]
        self.fixed_yaw = {p.object: p.yaw_rad for p in plan.predicates
                          if isinstance(p, PlaceOnBase) and p.object in dims}

    def initialize(self) -> None:
        b = self.bounds
        for name in self.names:
            x = self.rng.uniform(b.x_min, b.x_max)
            y = self.rng.uniform(b.y_min, b.y_max)
            self.poses[name] = clamp_to_bounds(Pose2D(x, y), self.dims[name], b)
        for pred in self.plan.predicates:
            if isinstance(pred, PlaceOnBase) and pred.object in self.dims:
                pose = Pose2D(pred.x, pred.y, normalize_yaw(pred.yaw_rad))
                self.requested[pred.object] = pose
                self.poses[pred.object] = clamp_to_bounds(pose, self.dims[pred.object], b)
            elif isinstance(pred, ClusterAround) and pred.anchor in self.dims:
                anchor = self.poses[pred.anchor]
                targets = [t for t in pred.objects if t in self.dims]
                if not targets:
                    continue
                spots = polar_place(targets, (anchor.x, anchor.y), pred.radius, self.rng, b)
                for name, (x, y) in spots.items():
                    self.poses[name] = Pose2D(x, y)

    def _unsatisfied(self) -> List[Tuple[str, str, float]]:
        out = []
        for pred in self.clusters:
            anchor = self.poses[pred.anchor]
            for name in pred.objects:
                if name not in self.poses:
                    continue
                p = self.poses[name]
                if math.hypot(p.x - anchor.x, p.y - anchor.y) > pred.radius + _RELATIVE_TOLERANCE:
                    out.append((name, pred.anchor, pred.radius))
        return out

    def apply_relative_constraints(self) -> None:
        for _ in range(self.cfg.relative_passes):
            pending = self._unsatisfied()
            if not pending:
                return
            for name, anchor_name, radius in pending:
                anchor = self.poses[anchor_name]
                p = self.poses[name]
                dist = math.hypot(p.x - anchor.x, p.y - anchor.y)
                scale = radius / dist
                x = anchor.x + (p.x - anchor.x) * scale
                y = anchor.y + (p.y - anchor.y) * scale
                self.poses[name] = Pose2D(*self.bounds.clamp_xy(x, y), p.yaw)
        logger.debug("Relative constraints still unsatisfied after %d passes", self.cfg.relative_passes)

    def apply_orientations(self) -> None:
        for name in self.names:
            p = self.poses[name]
            if name in self.fixed_yaw:
                yaw = normalize_yaw(self.fixed_yaw[name])
            else:
                yaw = normalize_yaw(self.rng.uniform(0.0, 2.0 * math.pi))
            self.poses[name] = clamp_to_bounds(Pose2D(p.x, p.y, yaw), self.dims[name], self.bounds)
        self.start = dict(self.poses)

    def perturb(self) -> None:
        sigma = self.cfg.perturb_sigma
        for name in self.names:
            p = self.poses[name]
            dx, dy = self.rng.normal(0.0, sigma, size=2)
            self.poses[name] = clamp_to_bounds(Pose2D(p.x + dx, p.y + dy, p.yaw),
                                               self.dims[name], self.bounds)

    def resolve(self) -> Tuple[List[Tuple[str, str]], List[int], List[int]]:
        history: List[int] = []
        perturbed: List[int] = []
        window = self.cfg.stall_window
        last_reset = 0
        for k in range(self.cfg.k_max):
            collisions = find_collisions(self.poses, self.dims, self.margin)
            history.append(len(collisions))
            if not collisions:
                return collisions, history, perturbed
            if k - last_reset >= window and history[k] >= history[k - window]:
                logger.debug("Collision count stalled at %d (margin %.4f, iteration %d); perturbing",
                             len(collisions), self.margin, k)
                self.perturb()
                perturbed.append(k)
                last_reset = k
                collisions = find_collisions(self.poses, self.dims, self.margin)
            for a, b in collisions:
                self.poses[a], self.poses[b] = resolve_overlap(
                    self.poses[a], self.poses[b], self.dims[a], self.dims[b],
                    self.margin, self.rng, self.bounds)
        collisions = find_collisions(self.poses, self.dims, self.margin)
        history.append(len(collisions))
        return collisions, history, perturbed

    def displacement(self) -> Dict[str, float]:
        out = {}
        for name in self.names:
            origin = self.requested.get(name, self.start[name])
            p = self.poses[name]
            out[name] = math.hypot(p.x - origin.x, p.y - origin.y)
        return out


def solve_spatial(plan: ScenePlan,
                  catalog: Catalog,
                  bounds: Optional[TableBounds] = None,
                  cfg: Optional[SolverConfig] = None) -> Layout2D:
    """
    Solve table-plane poses for every base-level object of a validated plan.

    Objects placed in containers or on supports are left to the physical
    placement stage. Output depends only on the inputs and ``cfg.rng_seed``.

    Args:
        plan: Plan that has passed ``validate_plan``
        catalog: Catalog providing object dimensions
        bounds: Table surface (defaults to the standard table)
        cfg: Solver settings

    Returns:
        Layout2D: Collision-free poses at the first margin that succeeded

    Raises:
        InvalidInputError: If an object is missing from the catalog or cannot fit on the table
        SolveFailure: If every margin leaves collisions; carries the residual pairs
    """
    bounds = bounds or TableBounds()
    cfg = cfg or SolverConfig()
    names = base_level_objects(plan)
    dims: Dict[str, Dims] = {}
    for name in names:
        entry = catalog.get(name)
        if entry is None:
            raise InvalidInputError(f"Object '{name}' is not in the catalog")
        dims[name] = tuple(entry.dims)
    _check_fits(dims, bounds)

    rng = np.random.default_rng(cfg.rng_seed)
    residual: List[Tuple[str, str]] = []
    margin = cfg.base_margin
    for margin in cfg.margins:
        attempt = _MarginAttempt(plan, names, dims, bounds, cfg, rng, margin)
        attempt.initialize()
        attempt.apply_relative_constraints()
        attempt.apply_orientations()
        residual, history, perturbed = attempt.resolve()
        if not residual:
            logger.debug("Spatial solve succeeded at margin %.4f after %d iteration(s)",
                         margin, len(history))
            return Layout2D(
                poses={n: attempt.poses[n] for n in names},
                margin=margin,
                displacement=attempt.displacement(),
                iterations=len(history),
                collision_history=history,
                perturbations=perturbed,
            )
        logger.debug("Margin %.4f left %d collision(s); relaxing", margin, len(residual))

    raise SolveFailure(f"Spatial solve failed: {len(residual)} collision(s) remain at margin {margin:.4f}m",
                       residual, margin)


__all__ = [
    "Pose2D",
    "Layout2D",
    "base_level_objects",
    "clamp_to_bounds",
    "find_collisions",
    "footprint_obb",
    "polar_place",
    "resolve_overlap",
    "solve_spatial",
]
