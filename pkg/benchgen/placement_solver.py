"""
Physical placement: stacking, containment, stability checking and baselines.

Stacked objects are rejection-sampled on their support's top face; contained
objects are packed row-major onto a grid over the container floor. Scenes
are validated with a quasi-static settle: every object drops onto the highest
surface under any part of its footprint, and objects whose center of mass
leaves that support face topple. Failures are rendered into the single-line
feedback strings consumed by the refinement loop.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import PlacementConfig
from .exceptions import InvalidInputError, PlacementFailure, SolveFailure
from .geometry import (
    Obb,
    Pose,
    Rect2D,
    TableBounds,
    footprint,
    obb_overlap,
    quat_from_yaw,
    separation,
    top_surface_region,
)
from .scene_model import Catalog, PlaceIn, PlaceOn, Placement, Scene, ScenePlan
from .spatial_solver import Layout2D

logger = logging.getLogger(__name__)

TABLE = "table"
CAUSES = ("fell_off", "toppled", "sank")
POSITION_HINTS = ("center", "edge", "random")

_EPS = 1e-9


@dataclass(frozen=True)
class UnstableObject:
    """An object the settle flagged: how far it moved, why, and the surface involved."""

    name: str
    displacement: float
    cause: str
    support: str = TABLE

    def __post_init__(self):
        if self.cause not in CAUSES:
            raise InvalidInputError(f"cause must be one of {CAUSES}, got '{self.cause}'")
        if not self.displacement >= 0:
            raise InvalidInputError("displacement must be >= 0")


@dataclass
class StabilityReport:
    """
    Outcome of a stability check.

    Attributes:
        displacement: Per-object displacement in meters
        unstable: Flagged objects in scene order
        stable: True iff nothing was flagged
        threshold: Displacement threshold used, in meters
    """

    displacement: Dict[str, float] = field(default_factory=dict)
    unstable: List[UnstableObject] = field(default_factory=list)
    stable: bool = True
    threshold: float = 0.02

    def __post_init__(self):
        if self.stable == bool(self.unstable):
            raise InvalidInputError("stable must be False exactly when unstable objects exist")
        if any(d < 0 for d in self.displacement.values()):
            raise InvalidInputError("displacements must be >= 0")

    @property
    def max_displacement(self) -> float:
        return max(self.displacement.values(), default=0.0)


@dataclass(frozen=True)
class ContainmentGrid:
    """Row-major grid over the usable (scaled) container floor."""

    rows: int
    cols: int
    cell_size: float
    usable_bounds: Rect2D

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise InvalidInputError("grid rows and cols must be positive")
        if not self.cell_size > 0:
            raise InvalidInputError("cell_size must be > 0")

    @property
    def capacity(self) -> int:
        return self.rows * self.cols

    def cell_center(self, index: int) -> Tuple[float, float]:
        """Center of cell ``index`` (row-major) in the container's local frame."""
        r, c = divmod(index, self.cols)
        return ((c - 0.5 * (self.cols - 1)) * self.cell_size,
                (r - 0.5 * (self.rows - 1)) * self.cell_size)


@dataclass
class ContainmentResult:
    """
    Poses for the kept objects plus the names left out.

    ``dropped`` holds objects removed by the floor-area filter;
    ``capacity_dropped`` holds objects that passed it but found no grid cell,
    either because the grid was full or because they are wider than the
    usable floor.
    """

    poses: Dict[str, Pose] = field(default_factory=dict)
    dropped: List[str] = field(default_factory=list)
    capacity_dropped: List[str] = field(default_factory=list)
    grid: Optional[ContainmentGrid] = None

    @property
    def all_dropped(self) -> List[str]:
        return self.dropped + self.capacity_dropped


@dataclass
class PhysicalResult:
    """A fully posed scene and the objects containment had to leave out."""

    scene: Scene
    dropped: Dict[str, List[str]] = field(default_factory=dict)


def compute_grid_dimensions(n: int) -> Tuple[int, int]:
    """
    Smallest near-square grid holding ``n`` cells.

    Returns:
        (rows, cols) with ``cols = ceil(sqrt(n))`` and ``rows = ceil(n / cols)``

    Raises:
        InvalidInputError: If n < 1
    """
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    cols = math.ceil(math.sqrt(n))
    return math.ceil(n / cols), cols


def _sample_on_face(face: Rect2D, hint: str, cfg: PlacementConfig,
                    rng: np.random.Generator) -> Tuple[float, float]:
    hx = max(face.half_extents[0] - cfg.topple_inset, 0.0)
    hy = max(face.half_extents[1] - cfg.topple_inset, 0.0)
    if hint == "center":
        radius = cfg.center_jitter * math.sqrt(rng.uniform())
        angle = rng.uniform(0.0, 2.0 * math.pi)
        local = (min(max(radius * math.cos(angle), -hx), hx),
                 min(max(radius * math.sin(angle), -hy), hy))
    elif hint == "edge":
        # band along one randomly chosen border, 15% of the face extent deep
        side = int(rng.integers(4))
        axis_half = hx if side < 2 else hy
        band = cfg.edge_band * 2.0 * axis_half
        depth = rng.uniform(axis_half - band, axis_half)
        sign = 1.0 if side % 2 == 0 else -1.0
        if side < 2:
            local = (sign * depth, rng.uniform(-hy, hy))
        else:
            local = (rng.uniform(-hx, hx), sign * depth)
    else:
        local = (rng.uniform(-hx, hx), rng.uniform(-hy, hy))
    return face.to_world(local)


def place_on(support: Obb,
             dims: Sequence[float],
             peers: Sequence[Obb],
             position_hint: str = "random",
             cfg: Optional[PlacementConfig] = None,
             rng: Optional[np.random.Generator] = None,
             support_name: str = "support") -> Pose:
    """
    Find a spot for an object on top of a placed support.

    The object's bottom rests on the support's top face. Candidate positions
    follow the hint ("center", "edge" or "random") inside the face shrunk by
    the topple inset, and are rejected while they overlap any peer.

    Args:
        support: The support's box
        dims: Object dimensions (x, y, z) in meters
        peers: Boxes already placed on the same support
        position_hint: Where on the face to sample
        cfg: Attempt budget and sampling widths
        rng: Random generator
        support_name: Name used in the failure

    Returns:
        Pose: Object pose (box center) on the support

    Raises:
        PlacementFailure: If every attempt collides with a peer
    """
    cfg = cfg or PlacementConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    if position_hint not in POSITION_HINTS:
        raise InvalidInputError(f"position_hint must be one of {POSITION_HINTS}, got '{position_hint}'")
    face = top_surface_region(support)
    z = support.top + 0.5 * dims[2]
    for attempt in range(cfg.max_attempts):
        x, y = _sample_on_face(face, position_hint, cfg, rng)
        yaw = rng.uniform(-math.pi, math.pi)
        candidate = Obb.from_dims((x, y, z), dims, yaw)
        if not any(obb_overlap(candidate, peer) for peer in peers):
            logger.debug("Placed on '%s' after %d attempt(s)", support_name, attempt + 1)
            return Pose((x, y, z), quat_from_yaw(yaw))
    raise PlacementFailure(f"No free spot on '{support_name}' after {cfg.max_attempts} attempts",
                           support_name, cfg.max_attempts)


def _sort_and_filter(objects: Sequence[Tuple[str, Sequence[float]]],
                     capacity: float) -> Tuple[List[Tuple[str, Sequence[float]]], List[str]]:
    ordered = sorted(objects, key=lambda o: o[1][0] * o[1][1])
    kept, total = [], 0.0
    for i, (name, dims) in enumerate(ordered):
        area = dims[0] * dims[1]
        if total + area > capacity:
            return kept, [n for n, _ in ordered[i:]]
        kept.append((name, dims))
        total += area
    return kept, []


def place_in(container: Obb,
             objects: Sequence[Tuple[str, Sequence[float]]],
             cfg: Optional[PlacementConfig] = None,
             rng: Optional[np.random.Generator] = None,
             container_name: str = "container") -> ContainmentResult:
    """
    Pack objects onto a grid over a container's floor.

    When the objects' total footprint exceeds ``fill_ratio`` of the floor
    area they are sorted by footprint and the largest are dropped until the
    rest fit. Surviving objects whose side plus the containment margin exceeds
    the usable floor (scaled by ``containment_scale``) are moved to
    ``capacity_dropped``. The grid cell size is the largest remaining object
    side plus the containment margin; objects beyond the grid's capacity are
    also moved to ``capacity_dropped``. Objects are assigned row-major,
    jittered by at most an eighth of a cell (and never out of their own cell),
    aligned with the container, and spawned ``containment_buffer`` above the
    container's mid-height or above their floor-resting height, whichever is
    lower.

    Args:
        container: The container's box
        objects: (name, dims) pairs in request order
        cfg: Containment parameters
        rng: Random generator
        container_name: Name used in failures and drop reports

    Returns:
        ContainmentResult: Poses of the kept objects and the dropped names

    Raises:
        PlacementFailure: If every object that passed the area filter is
            wider than the usable floor
    """
    cfg = cfg or PlacementConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    if not objects:
        return ContainmentResult()

    hx, hy, hz = container.half_extents
    floor_area = 4.0 * hx * hy
    dropped: List[str] = []
    kept = list(objects)
    if sum(d[0] * d[1] for _, d in kept) > cfg.fill_ratio * floor_area:
        kept, dropped = _sort_and_filter(kept, cfg.fill_ratio * floor_area)
        logger.debug("Container '%s' over capacity; dropped %s", container_name, dropped)
    if not kept:
        return ContainmentResult(dropped=dropped)

    usable = Rect2D((container.center[0], container.center[1]),
                    (cfg.containment_scale * hx, cfg.containment_scale * hy),
                    container.yaw, container.bottom)
    floor_side = 2.0 * min(usable.half_extents)
    oversized = [n for n, d in kept if max(d[0], d[1]) + cfg.containment_margin > floor_side + _EPS]
    if oversized:
        kept = [(n, d) for n, d in kept if n not in oversized]
        if not kept:
            raise PlacementFailure(f"Container '{container_name}' floor ({floor_side:.3f}m) is smaller "
                                   f"than {', '.join(repr(n) for n in oversized)}", container_name)
        logger.debug("Container '%s' floor too small for %s; dropped", container_name, oversized)
    capacity_dropped = list(oversized)

    cell = max(max(d[0], d[1]) for _, d in kept) + cfg.containment_margin
    max_cols = max(1, int(math.floor(2.0 * usable.half_extents[0] / cell + _EPS)))
    max_rows = max(1, int(math.floor(2.0 * usable.half_extents[1] / cell + _EPS)))
    rows, cols = compute_grid_dimensions(len(kept))
    if cols > max_cols or rows > max_rows:
        cols = min(max_cols, len(kept))
        rows = min(max_rows, math.ceil(len(kept) / cols))
    grid = ContainmentGrid(rows, cols, cell, usable)
    if len(kept) > grid.capacity:
        capacity_dropped.extend(n for n, _ in kept[grid.capacity:])
        kept = kept[:grid.capacity]

    poses: Dict[str, Pose] = {}
    mid_height = container.center[2] + cfg.containment_buffer
    for i, (name, dims) in enumerate(kept):
        lx, ly = grid.cell_center(i)
        slack = 0.5 * (cell - max(dims[0], dims[1]))
        reach = min(cell / 8.0, 0.5 * slack)
        lx += rng.uniform(-reach, reach)
        ly += rng.uniform(-reach, reach)
        x, y = usable.to_world((lx, ly))
        z = min(mid_height, container.bottom + 0.5 * dims[2] + cfg.containment_buffer)
        poses[name] = Pose((x, y, z), quat_from_yaw(container.yaw))
    return ContainmentResult(poses=poses, dropped=dropped, capacity_dropped=capacity_dropped, grid=grid)


def solve_physical(plan: ScenePlan,
                   catalog: Catalog,
                   layout: Layout2D,
                   bounds: Optional[TableBounds] = None,
                   cfg: Optional[PlacementConfig] = None,
                   rng: Optional[np.random.Generator] = None) -> PhysicalResult:
    """
    Lift a 2D layout into a full scene, solving stacking then containment.

    Base-level objects rest on the table at their solved (x, y, yaw).

    Raises:
        PlacementFailure: If a stacked object finds no free spot or a
            container is too small for one cell
        InvalidInputError: If a support or container has not been placed
    """
    bounds = bounds or TableBounds()
    cfg = cfg or PlacementConfig()
    rng = rng if rng is not None else np.random.default_rng(0)

    poses: Dict[str, Pose] = {}
    for name, p in layout.poses.items():
        h = catalog[name].dims[2]
        poses[name] = Pose.from_xyz_yaw(p.x, p.y, bounds.z_top + 0.5 * h, p.yaw)

    def box(name: str) -> Obb:
        if name not in poses:
            raise InvalidInputError(f"'{name}' is referenced before it is placed")
        return Obb.from_pose(poses[name], catalog[name].dims)

    on_support: Dict[str, List[str]] = {}
    for pred in plan.predicates:
        if isinstance(pred, PlaceOn):
            support = box(pred.support)
            peers = [box(n) for n in on_support.get(pred.support, [])]
            poses[pred.object] = place_on(support, catalog[pred.object].dims, peers,
                                          pred.position, cfg, rng, pred.support)
            on_support.setdefault(pred.support, []).append(pred.object)

    dropped: Dict[str, List[str]] = {}
    for pred in plan.predicates:
        if isinstance(pred, PlaceIn):
            result = place_in(box(pred.container),
                              [(n, catalog[n].dims) for n in pred.objects],
                              cfg, rng, pred.container)
            poses.update(result.poses)
            if result.all_dropped:
                dropped[pred.container] = result.all_dropped

    placements = [Placement(n, poses[n], catalog[n].dims, catalog[n].category)
                  for n in plan.names if n in poses]
    return PhysicalResult(Scene(tuple(placements), bounds), dropped)


# ---------------------------------------------------------------------------
# Quasi-static settle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Surface:
    name: str
    height: float
    face: Rect2D
    kind: str  # "container", "support" or "table"

    @property
    def rank(self) -> int:
        return {"container": 2, "support": 1, "table": 0}[self.kind]


def _footprint_inside(obj: Obb, rect: Rect2D) -> bool:
    return all(rect.contains(corner) for corner in obj.corners_xy())


def _footprints_overlap(obj: Obb, other: Obb) -> bool:
    """True when the two footprints share a positive area (vertical extent ignored)."""
    column = Obb((obj.center[0], obj.center[1], other.center[2]),
                 obj.half_extents[:2] + (other.half_extents[2],), obj.yaw)
    return separation(other, column) < -_EPS


def _surfaces_under(obj: Obb,
                    settled: Sequence[Placement],
                    bounds: TableBounds) -> Tuple[List[_Surface], Optional[str]]:
    x, y = obj.center[0], obj.center[1]
    found = [_Surface(TABLE, bounds.z_top, bounds.as_rect(), "table")]
    sank_into = None
    for p in settled:
        pbox = p.obb
        top = top_surface_region(pbox)
        over_center = top.contains((x, y))
        if not over_center and not _footprints_overlap(obj, pbox):
            continue
        if p.is_container and over_center:
            if pbox.bottom > obj.center[2] + _EPS:
                continue
            if _footprint_inside(obj, footprint(pbox)):
                found.append(_Surface(p.name, pbox.bottom, footprint(pbox), "container"))
            elif top.z <= obj.center[2] + _EPS:
                found.append(_Surface(p.name, top.z, top, "support"))
                sank_into = p.name
        elif top.z <= obj.center[2] + _EPS:
            found.append(_Surface(p.name, top.z, top, "support"))
    return found, sank_into


def _authored_support(obj: Obb, settled: Sequence[Placement], resting: _Surface) -> str:
    """The highest placed object overlapping this one's footprint from below, else the resting surface."""
    best, best_top = resting.name, resting.height
    for p in settled:
        pbox = p.obb
        if pbox.top <= best_top + _EPS or pbox.top > obj.bottom + _EPS:
            continue
        column = Obb((obj.center[0], obj.center[1], pbox.center[2]),
                    obj.half_extents[:2] + (pbox.half_extents[2],), obj.yaw)
        if obb_overlap(pbox, column):
            best, best_top = p.name, pbox.top
    return best


def settle(scene: Scene, cfg: Optional[PlacementConfig] = None) -> Tuple[Scene, StabilityReport]:
    """
    Drop every object onto the surface beneath it and report what moved.

    Objects are processed bottom-up so that supports settle before what they
    carry. An object comes to rest on the highest surface overlapping any
    part of its footprint that is not above its own center: the table, a
    support's top face (including a container rim the footprint only partly
    covers), or the floor of a container under its center. A container too
    narrow for the object leaves it resting on the rim and flags it as sunk.
    On a support, an object whose center of mass lies outside the face shrunk
    by ``topple_inset`` topples, with displacement equal to its height.
    Objects whose center is off the table and not inside a container fall
    off the table.

    Args:
        scene: Scene to settle
        cfg: Stability threshold and topple inset

    Returns:
        Tuple of the settled scene and its StabilityReport
    """
    cfg = cfg or PlacementConfig()
    order = sorted(range(len(scene.placements)),
                   key=lambda i: (scene.placements[i].obb.bottom, i))
    settled: List[Placement] = []
    final: Dict[str, Placement] = {}
    displacement: Dict[str, float] = {}
    flagged: Dict[str, UnstableObject] = {}

    for i in order:
        p = scene.placements[i]
        obj = p.obb
        x, y, z = p.pose.position
        height = p.dims[2]
        if not scene.bounds.contains_xy(x, y) and scene.containing(p) is None:
            displacement[p.name] = height
            flagged[p.name] = UnstableObject(p.name, height, "fell_off", TABLE)
            final[p.name] = p
            continue

        surfaces, sank_into = _surfaces_under(obj, settled, scene.bounds)
        resting = max(surfaces, key=lambda s: (round(s.height, 9), s.rank))
        rest_z = resting.height + 0.5 * height
        moved = abs(z - rest_z)
        settled_p = Placement(p.name, Pose((x, y, rest_z), p.pose.orientation), p.dims, p.category)

        if resting.kind == "support" and sank_into == resting.name:
            displacement[p.name] = moved
            flagged[p.name] = UnstableObject(p.name, moved, "sank", resting.name)
        elif resting.kind == "support" and not resting.face.contains((x, y), cfg.topple_inset):
            displacement[p.name] = height
            flagged[p.name] = UnstableObject(p.name, height, "toppled", resting.name)
        else:
            displacement[p.name] = moved
            if moved > cfg.stability_threshold:
                support = _authored_support(obj, settled, resting)
                flagged[p.name] = UnstableObject(p.name, moved, "fell_off", support)
        settled.append(settled_p)
        final[p.name] = settled_p

    unstable = [flagged[n] for n in scene.names if n in flagged]
    report = StabilityReport(
        displacement={n: displacement[n] for n in scene.names},
        unstable=unstable,
        stable=not unstable,
        threshold=cfg.stability_threshold,
    )
    if unstable:
        logger.debug("Stability check flagged %d object(s)", len(unstable))
    return scene.with_placements(final[n] for n in scene.names), report


def settle_and_check(scene: Scene, threshold: float = 0.02,
                     cfg: Optional[PlacementConfig] = None) -> StabilityReport:
    """
    Quasi-static stability check of a scene.

    Args:
        scene: Scene to check
        threshold: Maximum displacement in meters before an object is flagged
        cfg: Remaining placement parameters (topple inset)

    Returns:
        StabilityReport: ``stable`` is True iff no object moved more than the
        threshold, toppled, sank or fell off the table
    """
    cfg = cfg or PlacementConfig()
    if threshold != cfg.stability_threshold:
        cfg = replace(cfg, stability_threshold=threshold)
    return settle(scene, cfg)[1]


# ---------------------------------------------------------------------------
# Feedback
# ---------------------------------------------------------------------------

_CAUSE_VERBS = {"fell_off": "fell off", "toppled": "toppled off", "sank": "sank into"}


def feedback_message(report: Union[StabilityReport, SolveFailure, PlacementFailure]) -> str:
    """
    Render a failure as newline-separated feedback lines for the planner.

    Formats:
        ``Object '<name>' fell off '<support>' with displacement <d>m``
        ``Objects '<a>' and '<b>' collide at margin <m>m``
        ``No free spot on '<support>' after <k> attempts``

    Raises:
        InvalidInputError: If the report describes no failure
    """
    if isinstance(report, StabilityReport):
        if report.stable:
            raise InvalidInputError("feedback_message requires a failed stability report")
        return "\n".join(
            f"Object '{u.name}' {_CAUSE_VERBS[u.cause]} '{u.support}' with displacement {u.displacement:.2f}m"
            for u in report.unstable)
    if isinstance(report, SolveFailure):
        if not report.collisions:
            raise InvalidInputError("feedback_message requires at least one collision")
        return "\n".join(f"Objects '{a}' and '{b}' collide at margin {report.margin:g}m"
                         for a, b in report.collisions)
    if isinstance(report, PlacementFailure):
        if report.attempts:
            return f"No free spot on '{report.support}' after {report.attempts} attempts"
        return f"Container '{report.support}' is too small for its contents"
    raise InvalidInputError(f"Unsupported report type: {type(report).__name__}")


# ---------------------------------------------------------------------------
# Baseline
# ---------------------------------------------------------------------------

def baseline_grid_layout(objects: Sequence[Union[str, object]],
                         catalog: Catalog,
                         rows: Optional[int] = None,
                         cols: Optional[int] = None,
                         bounds: Optional[TableBounds] = None,
                         rng: Optional[np.random.Generator] = None) -> Scene:
    """
    Scatter objects over a grid of table cells with no stacking or containment.

    Columns split the table along x and rows along y. Object k takes cell k
    (row-major) and is jittered uniformly within the central half of it.

    Args:
        objects: Catalog names, in cell order
        catalog: Source of dimensions and categories
        rows: Grid rows (computed with ``compute_grid_dimensions`` when omitted)
        cols: Grid columns
        bounds: Table surface
        rng: Random generator

    Raises:
        InvalidInputError: If there are more objects than cells or a name is unknown
    """
    bounds = bounds or TableBounds()
    rng = rng if rng is not None else np.random.default_rng(0)
    names = list(objects)
    if rows is None or cols is None:
        if not names:
            return Scene((), bounds)
        rows, cols = compute_grid_dimensions(len(names))
    if rows <= 0 or cols <= 0:
        raise InvalidInputError("rows and cols must be positive")
    if len(names) > rows * cols:
        raise InvalidInputError(f"{len(names)} objects do not fit in a {rows}x{cols} grid")

    cell_w = bounds.width / cols
    cell_h = bounds.depth / rows
    placements = []
    for k, name in enumerate(names):
        entry = catalog.get(name)
        if entry is None:
            raise InvalidInputError(f"Object '{name}' is not in the catalog")
        r, c = divmod(k, cols)
        cx = bounds.x_min + (c + 0.5) * cell_w
        cy = bounds.y_min + (r + 0.5) * cell_h
        x = rng.uniform(cx - cell_w / 4.0, cx + cell_w / 4.0)
        y = rng.uniform(cy - cell_h / 4.0, cy + cell_h / 4.0)
        z = bounds.z_top + 0.5 * entry.dims[2]
        placements.append(Placement(name, Pose((x, y, z)), entry.dims, entry.category))
    return Scene(tuple(placements), bounds)
