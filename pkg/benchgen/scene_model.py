"""
Object catalog, placement predicates, scene plans and solved scenes.

The scene-plan wire format is the planner's JSON schema: a top-level
``objects`` array of ``{"name": ...}`` entries and a ``predicates`` array of
objects tagged by ``type``. Yaw travels in degrees on the wire and is exposed
in radians through ``PlaceOnBase.yaw_rad``. Solved scenes serialize with a
fixed key order and six-decimal positions so that re-serialization is
byte-stable.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Annotated, Any, Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .exceptions import InvalidInputError, PlanParseError
from .geometry import Obb, Pose, TableBounds

logger = logging.getLogger(__name__)

POSITION_DECIMALS = 6


class Category(str, Enum):
    CONTAINER = "container"
    SUPPORT = "support"
    FOOD = "food"
    TOOL = "tool"
    OTHER = "other"


class CatalogEntry(BaseModel):
    """One catalog asset: name, bounding-box dimensions (m), category and description."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(min_length=1)
    dims: Tuple[float, float, float]
    category: Category = Category.OTHER
    description: str = ""

    @field_validator("dims")
    @classmethod
    def _positive_dims(cls, v):
        if not all(math.isfinite(d) and d > 0 for d in v):
            raise ValueError("dims must be finite and strictly positive")
        return v

    @property
    def footprint_area(self) -> float:
        return self.dims[0] * self.dims[1]


class Catalog:
    """Name-indexed, order-preserving collection of catalog entries."""

    def __init__(self, entries: Iterable[CatalogEntry]):
        self._entries: Dict[str, CatalogEntry] = {}
        for entry in entries:
            if entry.name in self._entries:
                raise InvalidInputError(f"Duplicate catalog name '{entry.name}'")
            self._entries[entry.name] = entry

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def __getitem__(self, name: str) -> CatalogEntry:
        return self._entries[name]

    def __iter__(self):
        return iter(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, name: str) -> Optional[CatalogEntry]:
        return self._entries.get(name)

    @property
    def names(self) -> List[str]:
        return list(self._entries)

    def by_category(self, category: Category) -> List[CatalogEntry]:
        return [e for e in self._entries.values() if e.category == category]


def parse_catalog(text: Union[str, bytes]) -> Catalog:
    """
    Parse a catalog JSON document (an array of CatalogEntry objects).

    Raises:
        PlanParseError: If the JSON is malformed or an entry violates the schema
        InvalidInputError: If two entries share a name
    """
    data = load_json_text(text)
    if not isinstance(data, list):
        raise PlanParseError("Catalog must be a JSON array", path="$")
    entries = []
    for i, raw in enumerate(data):
        try:
            entries.append(CatalogEntry.model_validate(raw))
        except ValidationError as e:
            path = schema_error_path(e.errors()[0], prefix=f"[{i}]")
            raise PlanParseError(f"Catalog schema violation at {path}: {e.errors()[0]['msg']}",
                                 path=path) from e
    return Catalog(entries)


def load_catalog(path: str) -> Catalog:
    """Load a catalog JSON file."""
    from .utils import read_text
    return parse_catalog(read_text(path))


def default_catalog() -> Catalog:
    """The shipped fixture catalog (hand-assigned dimensions, not measured assets)."""
    text = resources.files("benchgen.data").joinpath("catalog.json").read_text(encoding="utf-8")
    return parse_catalog(text)


# ---------------------------------------------------------------------------
# Predicates and plans
# ---------------------------------------------------------------------------

class _PredicateBase(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PlaceOnBase(_PredicateBase):
    """Object directly on the table at (x, y) with yaw in degrees."""

    type: Literal["place-on-base"] = "place-on-base"
    object: str
    x: float
    y: float
    yaw: float = 0.0

    @property
    def yaw_rad(self) -> float:
        return math.radians(self.yaw)


class PlaceIn(_PredicateBase):
    """Objects inside a container."""

    type: Literal["place-in"] = "place-in"
    objects: List[str] = Field(min_length=1)
    container: str


class PlaceOn(_PredicateBase):
    """Object on top of a support."""

    type: Literal["place-on"] = "place-on"
    object: str
    support: str
    position: Literal["center", "edge", "random"] = "random"


class ClusterAround(_PredicateBase):
    """Objects scattered at ``radius`` meters around an anchor."""

    type: Literal["cluster-around"] = "cluster-around"
    objects: List[str] = Field(min_length=1)
    anchor: str
    radius: float

    @field_validator("radius")
    @classmethod
    def _radius_range(cls, v):
        if not 0 < v <= 0.5:
            raise ValueError("radius must be in (0, 0.5] m")
        return v


class PlaceAnywhere(_PredicateBase):
    """Object placed freely on the table."""

    type: Literal["place-anywhere"] = "place-anywhere"
    object: str


Predicate = Annotated[
    Union[PlaceOnBase, PlaceIn, PlaceOn, ClusterAround, PlaceAnywhere],
    Field(discriminator="type"),
]

PREDICATE_TAGS = ("place-on-base", "place-in", "place-on", "cluster-around", "place-anywhere")


def dependents(pred: Any) -> List[str]:
    """Names an individual predicate places."""
    if isinstance(pred, (PlaceIn, ClusterAround)):
        return list(pred.objects)
    return [pred.object]


def reference(pred: Any) -> Optional[str]:
    """Container, support or anchor a predicate refers to, if any."""
    if isinstance(pred, PlaceIn):
        return pred.container
    if isinstance(pred, PlaceOn):
        return pred.support
    if isinstance(pred, ClusterAround):
        return pred.anchor
    return None


class ObjectRef(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(min_length=1)


class ScenePlan(BaseModel):
    """Planner output: selected objects plus placement predicates."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    objects: List[ObjectRef] = Field(default_factory=list)
    predicates: List[Predicate] = Field(default_factory=list)

    @property
    def names(self) -> List[str]:
        return [o.name for o in self.objects]

    @classmethod
    def build(cls, names: Sequence[str], predicates: Sequence[Any]) -> "ScenePlan":
        return cls(objects=[ObjectRef(name=n) for n in names], predicates=list(predicates))

    def predicate_for(self, name: str) -> Optional[Any]:
        """The (first) predicate placing ``name``."""
        for pred in self.predicates:
            if name in dependents(pred):
                return pred
        return None


@dataclass(frozen=True)
class Violation:
    """A validation finding: where it occurred and what was wrong or rewritten."""

    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


def load_json_text(text: Union[str, bytes]) -> Any:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise PlanParseError(f"Input is not valid UTF-8 at byte {e.start}", offset=e.start) from e
    if text.startswith("\ufeff"):
        raise PlanParseError("Input must not start with a byte-order mark", offset=0)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[:e.pos].encode("utf-8"))
        raise PlanParseError(f"Malformed JSON at byte {offset}: {e.msg}", offset=offset) from e


def schema_error_path(error: Dict[str, Any], prefix: str = "") -> str:
    parts = prefix
    for item in error.get("loc", ()):
        if isinstance(item, int):
            parts += f"[{item}]"
        elif item in PREDICATE_TAGS:
            # pydantic inserts the discriminator value into member locations
            continue
        else:
            parts += f".{item}" if parts else str(item)
    if error.get("type") in ("union_tag_invalid", "union_tag_not_found"):
        parts += ".type"
    return parts or "$"


def parse_scene_plan(text: Union[str, bytes]) -> ScenePlan:
    """
    Parse a planner JSON document into a ScenePlan.

    Args:
        text: UTF-8 JSON text (str or bytes)

    Returns:
        ScenePlan: The parsed plan

    Raises:
        PlanParseError: With ``offset`` set for malformed JSON, or ``path`` set
            to the offending element for schema violations
    """
    data = load_json_text(text)
    if not isinstance(data, dict):
        raise PlanParseError("Scene plan must be a JSON object", path="$")
    try:
        return ScenePlan.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        path = schema_error_path(first)
        raise PlanParseError(f"Scene plan schema violation at {path}: {first['msg']}",
                             path=path) from e


def serialize_plan(plan: ScenePlan) -> str:
    """Serialize a plan back to the planner wire format."""
    return json.dumps(plan.model_dump(mode="json"), indent=2, ensure_ascii=False) + "\n"


def validate_plan(plan: ScenePlan,
                  catalog: Catalog,
                  bounds: Optional[TableBounds] = None) -> Tuple[ScenePlan, List[Violation]]:
    """
    Repair a plan against the catalog, returning the repaired plan and findings.

    Objects not in the catalog are dropped. Predicates whose container,
    support or anchor is missing are downgraded to one PlaceAnywhere per
    dependent. Each object keeps only its first placement predicate.
    Containers and supports without a PlaceOnBase receive one at the table
    center. Objects present in the catalog are never removed.

    Args:
        plan: Parsed plan
        catalog: Available assets
        bounds: Table used for synthesized base placements

    Returns:
        Tuple of the repaired plan and the list of violations (empty if unchanged)
    """
    bounds = bounds or TableBounds()
    violations: List[Violation] = []

    kept: List[str] = []
    for i, name in enumerate(plan.names):
        if name not in catalog:
            violations.append(Violation(f"objects[{i}]", f"object '{name}' is not in the catalog; dropped"))
        elif name in kept:
            violations.append(Violation(f"objects[{i}]", f"duplicate object '{name}' removed"))
        else:
            kept.append(name)
    known = set(kept)

    # Pass 1: prune unknown dependents, downgrade missing references.
    staged: List[Tuple[str, Any]] = []
    for i, pred in enumerate(plan.predicates):
        path = f"predicates[{i}]"
        deps = [d for d in dependents(pred) if d in known]
        for d in dependents(pred):
            if d not in known:
                violations.append(Violation(path, f"object '{d}' is not in the plan; reference removed"))
        if not deps:
            continue
        ref = reference(pred)
        if ref is not None and (ref not in known or ref in deps):
            for d in deps:
                violations.append(Violation(
                    path, f"'{ref}' referenced by {pred.type} for '{d}' does not exist; "
                          f"downgraded to place-anywhere"))
                staged.append((path, PlaceAnywhere(object=d)))
            continue
        staged.append((path, _with_dependents(pred, deps)))

    # Pass 2: one placement predicate per object.
    assigned: set = set()
    unique: List[Tuple[str, Any]] = []
    for path, pred in staged:
        deps = []
        for d in dependents(pred):
            if d in assigned:
                violations.append(Violation(path, f"object '{d}' already has a placement; "
                                                  f"duplicate {pred.type} removed"))
            else:
                deps.append(d)
                assigned.add(d)
        if deps:
            unique.append((path, _with_dependents(pred, deps)))

    # Pass 3: containers and supports must sit on the table; anchors must be base level.
    result = _enforce_dependency_order(unique, bounds, violations)

    repaired = ScenePlan.build(kept, result)
    if violations:
        logger.debug("validate_plan: %d violation(s)", len(violations))
    return repaired, violations


def _with_dependents(pred: Any, deps: List[str]) -> Any:
    if isinstance(pred, (PlaceIn, ClusterAround)):
        if list(pred.objects) == deps:
            return pred
        return pred.model_copy(update={"objects": deps})
    return pred


def _enforce_dependency_order(entries: List[Tuple[str, Any]],
                              bounds: TableBounds,
                              violations: List[Violation]) -> List[Any]:
    cx, cy = bounds.center
    while True:
        by_object = {}
        for idx, (_, pred) in enumerate(entries):
            for d in dependents(pred):
                by_object[d] = (idx, pred)

        # Cluster anchors placed in/on something else cannot be polar-placed around.
        anchor_fix = None
        for idx, (path, pred) in enumerate(entries):
            if isinstance(pred, ClusterAround):
                owner = by_object.get(pred.anchor)
                if owner is not None and isinstance(owner[1], (PlaceIn, PlaceOn)):
                    anchor_fix = (idx, path, pred)
                    break
        if anchor_fix is not None:
            idx, path, pred = anchor_fix
            for d in pred.objects:
                violations.append(Violation(path, f"anchor '{pred.anchor}' is not on the table; "
                                                  f"'{d}' downgraded to place-anywhere"))
            entries = (entries[:idx] + [(path, PlaceAnywhere(object=d)) for d in pred.objects]
                       + entries[idx + 1:])
            continue

        missing_base = None
        for path, pred in entries:
            if isinstance(pred, (PlaceIn, PlaceOn)):
                owner = by_object.get(reference(pred))
                if owner is None or not isinstance(owner[1], PlaceOnBase):
                    missing_base = (path, pred)
                    break
        if missing_base is None:
            return [pred for _, pred in entries]

        path, pred = missing_base
        target = reference(pred)
        violations.append(Violation(path, f"'{target}' has no place-on-base predicate; "
                                          f"placed at table center ({cx:.2f}, {cy:.2f})"))
        pruned: List[Tuple[str, Any]] = []
        for p_path, p in entries:
            if target in dependents(p):
                rest = [d for d in dependents(p) if d != target]
                if rest:
                    pruned.append((p_path, _with_dependents(p, rest)))
                continue
            pruned.append((p_path, p))
        entries = [("synthesized", PlaceOnBase(object=target, x=round(cx, 6), y=round(cy, 6), yaw=0.0))] + pruned


# ---------------------------------------------------------------------------
# Solved scenes
# ---------------------------------------------------------------------------

def _quantize(values: Iterable[float]) -> Tuple[float, ...]:
    return tuple(round(float(v), POSITION_DECIMALS) + 0.0 for v in values)


@dataclass(frozen=True)
class Placement:
    """A placed object: pose of its box center, box dimensions and category."""

    name: str
    pose: Pose
    dims: Tuple[float, float, float]
    category: Category = Category.OTHER

    def __post_init__(self):
        if not self.name:
            raise InvalidInputError("placement name must be non-empty")
        dims = _quantize(self.dims)
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise InvalidInputError(f"dims must be three positive values, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "pose", Pose(_quantize(self.pose.position), self.pose.orientation))
        object.__setattr__(self, "category", Category(self.category))

    @property
    def obb(self) -> Obb:
        return Obb.from_pose(self.pose, self.dims)

    @property
    def is_container(self) -> bool:
        return self.category == Category.CONTAINER


@dataclass(frozen=True)
class Scene:
    """Solved poses for every object over a bounded support surface."""

    placements: Tuple[Placement, ...] = ()
    bounds: TableBounds = field(default_factory=TableBounds)

    def __post_init__(self):
        object.__setattr__(self, "placements", tuple(self.placements))
        b = self.bounds
        q = _quantize((b.x_min, b.x_max, b.y_min, b.y_max, b.z_top))
        object.__setattr__(self, "bounds", TableBounds(*q))
        names = [p.name for p in self.placements]
        if len(set(names)) != len(names):
            raise InvalidInputError("placement names must be unique")

    @property
    def names(self) -> List[str]:
        return [p.name for p in self.placements]

    def get(self, name: str) -> Placement:
        for p in self.placements:
            if p.name == name:
                return p
        raise KeyError(name)

    def dims(self) -> Dict[str, Tuple[float, float, float]]:
        return {p.name: p.dims for p in self.placements}

    def with_placements(self, placements: Iterable[Placement]) -> "Scene":
        return Scene(tuple(placements), self.bounds)

    def containing(self, placement: Placement) -> Optional[Placement]:
        """The container whose footprint holds this placement's center below its rim, if any."""
        x, y, z = placement.pose.position
        for other in self.placements:
            if other is placement or not other.is_container:
                continue
            box = other.obb
            local = box.to_local_xy((x, y))
            if (abs(local[0]) <= box.half_extents[0] and abs(local[1]) <= box.half_extents[1]
                    and box.bottom <= z <= box.top):
                return other
        return None

    def invariant_violations(self) -> List[Violation]:
        """Placements whose footprint center leaves the table (contained objects exempt)."""
        found = []
        for i, p in enumerate(self.placements):
            x, y, _ = p.pose.position
            if self.bounds.contains_xy(x, y):
                continue
            container = self.containing(p)
            if container is not None and self.bounds.contains_xy(*container.pose.position[:2]):
                continue
            found.append(Violation(f"placements[{i}]", f"'{p.name}' center is off the table"))
        return found


class _Fixed(float):
    """Float rendered with a fixed number of decimals."""


def _emit(value: Any, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(value, _Fixed):
        return f"{float(value):.{POSITION_DECIMALS}f}"
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        if all(isinstance(v, float) for v in value):
            return "[" + ", ".join(_emit(v) for v in value) + "]"
        inner = ",\n".join("  " * (indent + 1) + _emit(v, indent + 1) for v in value)
        return "[\n" + inner + "\n" + pad + "]"
    if isinstance(value, dict):
        if not value:
            return "{}"
        inner = ",\n".join("  " * (indent + 1) + json.dumps(k) + ": " + _emit(v, indent + 1)
                           for k, v in value.items())
        return "{\n" + inner + "\n" + pad + "}"
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def scene_to_dict(scene: Scene) -> Dict[str, Any]:
    b = scene.bounds
    return {
        "placements": [
            {
                "name": p.name,
                "category": p.category.value,
                "position": [_Fixed(v) for v in p.pose.position],
                "orientation": [float(v) for v in p.pose.orientation],
                "dims": [_Fixed(v) for v in p.dims],
            }
            for p in scene.placements
        ],
        "bounds": {
            "x_min": _Fixed(b.x_min), "x_max": _Fixed(b.x_max),
            "y_min": _Fixed(b.y_min), "y_max": _Fixed(b.y_max),
            "z_top": _Fixed(b.z_top),
        },
    }


def serialize_scene(scene: Scene, metadata: Optional[Dict[str, Any]] = None) -> str:
    """
    Serialize a scene to deterministic UTF-8 JSON.

    Args:
        scene: Scene whose invariants hold
        metadata: Optional run metadata (seed, command) appended as a "metadata" block

    Raises:
        InvalidInputError: If a placement is off the table
    """
    problems = scene.invariant_violations()
    if problems:
        raise InvalidInputError("; ".join(str(v) for v in problems))
    doc = scene_to_dict(scene)
    if metadata:
        doc["metadata"] = dict(sorted(metadata.items()))
    return _emit(doc) + "\n"


def parse_scene_document(text: Union[str, bytes]) -> Tuple[Scene, Dict[str, Any]]:
    """
    Parse a scene JSON document, returning the scene and its metadata block.

    Raises:
        PlanParseError: If the document is malformed
    """
    data = load_json_text(text)
    try:
        raw_bounds = data["bounds"]
        bounds = TableBounds(**{k: float(raw_bounds[k]) for k in ("x_min", "x_max", "y_min", "y_max", "z_top")})
        placements = []
        for i, raw in enumerate(data["placements"]):
            placements.append(Placement(
                name=str(raw["name"]),
                pose=Pose(tuple(raw["position"]), tuple(raw["orientation"])),
                dims=tuple(raw["dims"]),
                category=Category(raw.get("category", "other")),
            ))
        unknown = set(data) - {"placements", "bounds", "metadata"}
        if unknown:
            raise PlanParseError(f"Unknown scene keys: {sorted(unknown)}", path="$")
        return Scene(tuple(placements), bounds), dict(data.get("metadata", {}))
    except PlanParseError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise PlanParseError(f"Invalid scene document: {e}", path="$") from e


def parse_scene(text: Union[str, bytes]) -> Scene:
    """Parse a scene JSON document."""
    return parse_scene_document(text)[0]
