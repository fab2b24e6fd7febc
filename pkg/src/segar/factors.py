"""Factor types, entity types, entities and the flattened state vector.

Everything in the simulation is an entity: a mapping from factor types to
values.  Entity types fix which factors an entity carries (its basis); the
flattened view of a state is a single float64 vector with a deterministic
layout derived from entity ids and basis order.
"""

from __future__ import annotations

import enum
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

__all__ = [
    "SegarError",
    "RegistrationError",
    "EntityError",
    "LayoutError",
    "FactorKind",
    "FactorType",
    "FactorRegistry",
    "register_factor_type",
    "EntityType",
    "EntityTypeRegistry",
    "Entity",
    "Arena",
    "SimState",
    "StateLayout",
    "flatten_state",
    "unflatten_state",
    "zero_value",
    "SHAPE_NAMES",
    "SHAPE_CODES",
    "builtin_factors",
    "builtin_entity_types",
    "POSITION",
    "VELOCITY",
    "ACCELERATION",
    "MASS",
    "CHARGE",
    "RADIUS",
    "SHAPE",
    "ELASTICITY",
    "FRICTION",
    "HEAT",
    "MAGNETISM",
    "CONTROLLED",
    "GOAL_FLAG",
    "HOLE_FLAG",
    "GRAVITY",
    "LORENTZ_K",
    "COULOMB_K",
    "HEAT_K",
    "RESTITUTION_DEFAULT",
    "ENTITY",
    "THING",
    "OBJECT",
    "TILE",
    "BALL",
    "CHARGED_BALL",
    "CHARGED_OBJECT",
    "SAND",
    "MAGMA",
    "MAGNET",
    "HOLE",
    "GOAL",
    "WORLD_CONSTANTS",
]


class SegarError(Exception):
    """Base class for all errors raised by this package."""


class RegistrationError(SegarError):
    """Duplicate or inconsistent type registration."""


class EntityError(SegarError):
    """Entity construction or factor access violates the entity's basis."""


class LayoutError(SegarError):
    """A state vector and a layout (or two layouts) do not agree."""


class FactorKind(enum.Enum):
    SCALAR = "scalar"
    VEC2 = "vec2"
    SHAPE = "shape"
    BOOLEAN = "boolean"

    @property
    def width(self) -> int:
        return 2 if self is FactorKind.VEC2 else 1


# Shape tags are stored as small integer codes so they flatten like any
# other factor.
SHAPE_NAMES = {0: "circle"}
SHAPE_CODES = {name: code for code, name in SHAPE_NAMES.items()}


class FactorType:
    """An identity-hashed factor descriptor.

    Two factor types are the same factor iff they are the same object;
    registries guarantee name uniqueness within themselves.
    """

    __slots__ = ("id", "name", "kind", "unit")

    def __init__(self, id: int, name: str, kind: FactorKind, unit: str = ""):
        self.id = id
        self.name = name
        self.kind = kind
        self.unit = unit

    def __repr__(self) -> str:
        return f"FactorType({self.name!r}, {self.kind.value})"


def zero_value(kind: FactorKind) -> Any:
    if kind is FactorKind.VEC2:
        return (0.0, 0.0)
    if kind is FactorKind.BOOLEAN:
        return False
    return 0.0 if kind is FactorKind.SCALAR else 0


def _check_value(ft: FactorType, value: Any) -> Any:
    kind = ft.kind
    if kind is FactorKind.SCALAR:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise EntityError(f"factor {ft.name}: expected scalar, got {value!r}")
        return float(value)
    if kind is FactorKind.VEC2:
        try:
            x, y = value
        except (TypeError, ValueError):
            raise EntityError(f"factor {ft.name}: expected a 2-vector, got {value!r}") from None
        return (float(x), float(y))
    if kind is FactorKind.BOOLEAN:
        if not isinstance(value, (bool, int)):
            raise EntityError(f"factor {ft.name}: expected boolean, got {value!r}")
        return bool(value)
    # shape tag
    if isinstance(value, str):
        if value not in SHAPE_CODES:
            raise EntityError(f"factor {ft.name}: unknown shape {value!r}")
        return SHAPE_CODES[value]
    if isinstance(value, int) and value in SHAPE_NAMES:
        return value
    raise EntityError(f"factor {ft.name}: unknown shape {value!r}")


class FactorRegistry:
    """Name-unique collection of factor types with stable integer ids."""

    def __init__(self):
        self._by_name: dict[str, FactorType] = {}

    def register(self, name: str, kind: FactorKind, unit: str = "") -> FactorType:
        if name in self._by_name:
            raise RegistrationError(f"factor type {name!r} already registered")
        ft = FactorType(len(self._by_name), name, kind, unit)
        self._by_name[name] = ft
        return ft

    def get(self, name: str) -> FactorType:
        try:
            return self._by_name[name]
        except KeyError:
            raise RegistrationError(f"unknown factor type {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __iter__(self) -> Iterator[FactorType]:
        return iter(self._by_name.values())

    def __len__(self) -> int:
        return len(self._by_name)


def register_factor_type(registry: FactorRegistry, name: str, kind: FactorKind,
                         unit: str = "") -> FactorType:
    """Free-function veneer over :meth:`FactorRegistry.register`."""
    return registry.register(name, kind, unit)


class EntityType:
    """A named basis: the ordered set of factor types its entities carry.

    Subtyping is structural-with-ancestry: a child extends its parent's
    basis and never removes factors.
    """

    __slots__ = ("name", "basis", "basis_set", "parent")

    def __init__(self, name: str, factors: Sequence[FactorType],
                 parent: Optional["EntityType"] = None):
        if parent is not None:
            missing = [f for f in parent.basis if f not in factors]
            if missing:
                raise RegistrationError(
                    f"entity type {name!r} drops inherited factors: "
                    + ", ".join(f.name for f in missing))
        seen = set()
        for f in factors:
            if f in seen:
                raise RegistrationError(f"entity type {name!r}: duplicate factor {f.name}")
            seen.add(f)
        self.name = name
        self.basis = tuple(factors)
        self.basis_set = frozenset(factors)
        self.parent = parent

    def is_subtype_of(self, other: "EntityType") -> bool:
        t: Optional[EntityType] = self
        while t is not None:
            if t is other:
                return True
            t = t.parent
        return False

    def has_factors(self, factors: Iterable[FactorType]) -> bool:
        return self.basis_set.issuperset(factors)

    def __repr__(self) -> str:
        return f"EntityType({self.name!r})"


class EntityTypeRegistry:
    """Lookup of entity types by name (templates refer to types by name)."""

    def __init__(self):
        self._by_name: dict[str, EntityType] = {}

    def register(self, etype: EntityType) -> EntityType:
        if etype.name in self._by_name:
            raise RegistrationError(f"entity type {etype.name!r} already registered")
        self._by_name[etype.name] = etype
        return etype

    def define(self, name: str, factors: Sequence[FactorType],
               parent: Optional[EntityType] = None) -> EntityType:
        return self.register(EntityType(name, factors, parent))

    def get(self, name: str) -> EntityType:
        try:
            return self._by_name[name]
        except KeyError:
            raise RegistrationError(f"unknown entity type {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __iter__(self) -> Iterator[EntityType]:
        return iter(self._by_name.values())


class Entity:
    """One simulated thing: an id, a type, and a value per basis factor."""

    __slots__ = ("id", "etype", "values")

    def __init__(self, id: int, etype: EntityType, values: Mapping[FactorType, Any]):
        extra = set(values) - etype.basis_set
        if extra:
            raise EntityError(
                f"entity type {etype.name} has no factor "
                + ", ".join(f.name for f in extra))
        missing = etype.basis_set - set(values)
        if missing:
            raise EntityError(
                f"entity of type {etype.name} missing values for "
                + ", ".join(sorted(f.name for f in missing)))
        self.id = id
        self.etype = etype
        self.values = {ft: _check_value(ft, values[ft]) for ft in etype.basis}

    def get(self, ft: FactorType) -> Any:
        try:
            return self.values[ft]
        except KeyError:
            raise EntityError(
                f"entity {self.id} ({self.etype.name}) has no factor {ft.name}") from None

    def set(self, ft: FactorType, value: Any) -> None:
        if ft not in self.etype.basis_set:
            raise EntityError(
                f"entity {self.id} ({self.etype.name}) has no factor {ft.name}")
        self.values[ft] = _check_value(ft, value)

    def __repr__(self) -> str:
        return f"Entity(id={self.id}, type={self.etype.name})"


_next_entity_id = 0


def make_entity(etype: EntityType, values: Mapping[FactorType, Any],
                entity_id: Optional[int] = None) -> Entity:
    """Create an entity; ids are fresh and monotonic unless given explicitly.

    Builders that need reproducible ids (task sampling, deserialization)
    pass ``entity_id``; ad-hoc construction lets the process counter run.
    """
    global _next_entity_id
    if entity_id is None:
        entity_id = _next_entity_id
    _next_entity_id = max(_next_entity_id, entity_id) + 1
    return Entity(entity_id, etype, values)


class Arena:
    """Axis-aligned world box. Walls are its four sides."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: Sequence[float] = (0.0, 0.0), hi: Sequence[float] = (1.0, 1.0)):
        self.lo = (float(lo[0]), float(lo[1]))
        self.hi = (float(hi[0]), float(hi[1]))
        if not (self.lo[0] < self.hi[0] and self.lo[1] < self.hi[1]):
            raise SegarError(f"degenerate arena: lo={self.lo} hi={self.hi}")

    def contains(self, p: Sequence[float], margin: float = 0.0) -> bool:
        return (self.lo[0] + margin <= p[0] <= self.hi[0] - margin
                and self.lo[1] + margin <= p[1] <= self.hi[1] - margin)

    def __repr__(self) -> str:
        return f"Arena(lo={self.lo}, hi={self.hi})"


class SimState:
    """Entities plus arena, clock and integration step.

    ``world`` is the constants-carrying entity (global factor reads go
    through it); it is excluded from the flattened vector, which covers
    positioned entities only.
    """

    __slots__ = ("entities", "arena", "dt", "time", "world", "transient_factors",
                 "_by_id")

    def __init__(self, entities: Sequence[Entity], arena: Optional[Arena] = None,
                 dt: float = 0.01, time: int = 0, world: Optional[Entity] = None,
                 transient_factors: Sequence[FactorType] = ()):
        ents = sorted(entities, key=lambda e: e.id)
        for a, b in zip(ents, ents[1:]):
            if a.id == b.id:
                raise EntityError(f"duplicate entity id {a.id}")
        self.entities = ents
        self.arena = arena if arena is not None else Arena()
        self.dt = float(dt)
        self.time = int(time)
        self.world = world
        self.transient_factors = tuple(transient_factors)
        self._by_id = {e.id: e for e in ents}
        if world is not None and world.id in self._by_id:
            raise EntityError("world constants entity must not appear in the entity list")

    def entity_by_id(self, entity_id: int) -> Entity:
        try:
            return self._by_id[entity_id]
        except KeyError:
            raise EntityError(f"no entity with id {entity_id}") from None

    def globals_view(self) -> Mapping[FactorType, Any]:
        return self.world.values if self.world is not None else {}

    def copy(self) -> "SimState":
        ents = [Entity(e.id, e.etype, dict(e.values)) for e in self.entities]
        world = None
        if self.world is not None:
            world = Entity(self.world.id, self.world.etype, dict(self.world.values))
        return SimState(ents, Arena(self.arena.lo, self.arena.hi), self.dt,
                        self.time, world, self.transient_factors)


class StateLayout:
    """Deterministic slot map for the flattened vector.

    Entities ascending by id, factors in basis order, vec2 factors as two
    consecutive slots (components 0 then 1).
    """

    __slots__ = ("slots", "width", "_starts")

    def __init__(self, slots: Sequence[tuple[int, str, FactorType, int]]):
        # each slot: (entity_id, etype_name, factor_type, component)
        self.slots = tuple(slots)
        self.width = len(self.slots)
        starts: dict[int, int] = {}
        for i, (eid, _, _, _) in enumerate(self.slots):
            starts.setdefault(eid, i)
        self._starts = starts

    def slot_index(self, entity_id: int, ft: FactorType, component: int = 0) -> int:
        i = self._starts.get(entity_id)
        if i is None:
            raise LayoutError(f"layout has no entity {entity_id}")
        while i < self.width and self.slots[i][0] == entity_id:
            if self.slots[i][2] is ft and self.slots[i][3] == component:
                return i
            i += 1
        raise LayoutError(f"layout has no slot for entity {entity_id} factor {ft.name}")

    def signature(self) -> tuple:
        """Structural identity: what each slot means, ignoring nothing.

        Two task sets are comparable iff their signatures are equal.
        """
        return tuple((eid, tname, ft.name, comp) for eid, tname, ft, comp in self.slots)

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "width": self.width,
            "slots": [
                {"index": i, "entity": eid, "type": tname,
                 "factor": ft.name, "kind": ft.kind.value, "component": comp}
                for i, (eid, tname, ft, comp) in enumerate(self.slots)
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any], factors: FactorRegistry) -> "StateLayout":
        if data.get("schema") != 1:
            raise LayoutError(f"unsupported layout schema: {data.get('schema')!r}")
        slots = []
        for rec in data["slots"]:
            ft = factors.get(rec["factor"])
            if ft.kind.value != rec["kind"]:
                raise LayoutError(
                    f"factor {ft.name}: layout says kind {rec['kind']!r}, "
                    f"registry says {ft.kind.value!r}")
            slots.append((int(rec["entity"]), rec["type"], ft, int(rec["component"])))
        return cls(slots)


def _flattenable(e: Entity) -> bool:
    return POSITION in e.etype.basis_set


def flatten_state(state: SimState, layout: Optional[StateLayout] = None) -> tuple[np.ndarray, StateLayout]:
    """Project a state onto a float64 vector; returns (vector, layout).

    Passing a previously computed layout skips rebuilding it and checks the
    entity set still matches.
    """
    ents = [e for e in state.entities if _flattenable(e)]
    if layout is None:
        slots: list[tuple[int, str, FactorType, int]] = []
        for e in ents:
            for ft in e.etype.basis:
                for comp in range(ft.kind.width):
                    slots.append((e.id, e.etype.name, ft, comp))
        layout = StateLayout(slots)
    lslots = layout.slots
    width = layout.width
    vals: list[float] = []
    append = vals.append
    i = 0
    for e in ents:
        eid = e.id
        ev = e.values
        for ft in e.etype.basis:
            if i >= width or lslots[i][0] != eid or lslots[i][2] is not ft:
                raise LayoutError(
                    f"state does not match layout at slot {i} "
                    f"(entity {eid}, factor {ft.name})")
            v = ev[ft]
            kind = ft.kind
            if kind is FactorKind.VEC2:
                append(v[0])
                append(v[1])
                i += 2
            elif kind is FactorKind.BOOLEAN:
                append(1.0 if v else 0.0)
                i += 1
            else:
                append(float(v))
                i += 1
    if i != width:
        raise LayoutError(f"state fills {i} slots, layout has {width}")
    return np.asarray(vals, dtype=np.float64), layout


def unflatten_state(vector: np.ndarray, layout: StateLayout,
                    entity_types: EntityTypeRegistry,
                    arena: Optional[Arena] = None, dt: float = 0.01,
                    time: int = 0, world: Optional[Entity] = None) -> SimState:
    """Rebuild entities from a flat vector. Inverse of :func:`flatten_state`."""
    vec = np.asarray(vector, dtype=np.float64)
    if vec.shape != (layout.width,):
        raise LayoutError(f"vector shape {vec.shape} does not match layout width {layout.width}")
    # group slots by entity, preserving order
    by_entity: dict[int, tuple[str, list[tuple[FactorType, int, float]]]] = {}
    for i, (eid, tname, ft, comp) in enumerate(layout.slots):
        if eid not in by_entity:
            by_entity[eid] = (tname, [])
        elif by_entity[eid][0] != tname:
            raise LayoutError(f"entity {eid} has conflicting types in layout")
        by_entity[eid][1].append((ft, comp, float(vec[i])))
    entities = []
    for eid, (tname, parts) in by_entity.items():
        etype = entity_types.get(tname)
        values: dict[FactorType, Any] = {}
        pending: dict[FactorType, dict[int, float]] = {}
        for ft, comp, x in parts:
            if ft.kind is FactorKind.VEC2:
                pending.setdefault(ft, {})[comp] = x
            elif ft.kind is FactorKind.BOOLEAN:
                values[ft] = x >= 0.5
            elif ft.kind is FactorKind.SHAPE:
                values[ft] = int(round(x))
            else:
                values[ft] = x
        for ft, comps in pending.items():
            if set(comps) != {0, 1}:
                raise LayoutError(f"entity {eid} factor {ft.name}: incomplete vec2 slots")
            values[ft] = (comps[0], comps[1])
        entities.append(Entity(eid, etype, values))
    return SimState(entities, arena=arena, dt=dt, time=time, world=world)


# ---------------------------------------------------------------------------
# Built-in domain model
# ---------------------------------------------------------------------------

builtin_factors = FactorRegistry()

POSITION = builtin_factors.register("Position", FactorKind.VEC2, "m")
VELOCITY = builtin_factors.register("Velocity", FactorKind.VEC2, "m/s")
ACCELERATION = builtin_factors.register("Acceleration", FactorKind.VEC2, "m/s^2")
MASS = builtin_factors.register("Mass", FactorKind.SCALAR, "kg")
CHARGE = builtin_factors.register("Charge", FactorKind.SCALAR, "C")
RADIUS = builtin_factors.register("Radius", FactorKind.SCALAR, "m")
SHAPE = builtin_factors.register("Shape", FactorKind.SHAPE)
ELASTICITY = builtin_factors.register("Elasticity", FactorKind.SCALAR)
FRICTION = builtin_factors.register("Friction", FactorKind.SCALAR)
HEAT = builtin_factors.register("Heat", FactorKind.SCALAR)
MAGNETISM = builtin_factors.register("Magnetism", FactorKind.SCALAR, "T")
CONTROLLED = builtin_factors.register("Controlled", FactorKind.BOOLEAN)
GOAL_FLAG = builtin_factors.register("IsGoal", FactorKind.BOOLEAN)
HOLE_FLAG = builtin_factors.register("IsHole", FactorKind.BOOLEAN)
# world constants
GRAVITY = builtin_factors.register("Gravity", FactorKind.SCALAR, "m/s^2")
LORENTZ_K = builtin_factors.register("LorentzK", FactorKind.SCALAR)
COULOMB_K = builtin_factors.register("CoulombK", FactorKind.SCALAR)
HEAT_K = builtin_factors.register("HeatK", FactorKind.SCALAR)
RESTITUTION_DEFAULT = builtin_factors.register("RestitutionDefault", FactorKind.SCALAR)

builtin_entity_types = EntityTypeRegistry()

ENTITY = builtin_entity_types.define("Entity", [])
THING = builtin_entity_types.define(
    "Thing", [POSITION, RADIUS, SHAPE], parent=ENTITY)
OBJECT = builtin_entity_types.define(
    "Object",
    [POSITION, RADIUS, SHAPE, VELOCITY, ACCELERATION, MASS, ELASTICITY],
    parent=THING)
TILE = builtin_entity_types.define("Tile", [POSITION, RADIUS, SHAPE], parent=THING)

BALL = builtin_entity_types.define(
    "Ball", list(OBJECT.basis) + [CONTROLLED], parent=OBJECT)
CHARGED_BALL = builtin_entity_types.define(
    "ChargedBall", list(BALL.basis) + [CHARGE], parent=BALL)
CHARGED_OBJECT = builtin_entity_types.define(
    "ChargedObject", list(OBJECT.basis) + [CHARGE], parent=OBJECT)

SAND = builtin_entity_types.define("Sand", list(TILE.basis) + [FRICTION], parent=TILE)
MAGMA = builtin_entity_types.define("Magma", list(TILE.basis) + [HEAT], parent=TILE)
MAGNET = builtin_entity_types.define(
    "Magnet", list(TILE.basis) + [MAGNETISM], parent=TILE)
HOLE = builtin_entity_types.define("Hole", list(TILE.basis) + [HOLE_FLAG], parent=TILE)
GOAL = builtin_entity_types.define("Goal", list(TILE.basis) + [GOAL_FLAG], parent=TILE)

WORLD_CONSTANTS = builtin_entity_types.define(
    "WorldConstants",
    [GRAVITY, LORENTZ_K, COULOMB_K, HEAT_K, RESTITUTION_DEFAULT],
    parent=ENTITY)
