"""Parametric task distributions: priors, templates, seeded sampling.

A template is a recipe: entity slots with count priors, a prior per
(slot, factor, component), physics constants, a rule list, and the POMDP
wiring (reward, actions, observation).  Sampling a template with a seed
yields a concrete task instance.

Stream discipline: every (slot, factor) pair draws from its own RNG stream
derived from the seed, and constants consume no draws — so editing one
prior's parameters never perturbs any other factor's draws across
templates sharing a seed.
"""

from __future__ import annotations

import json
import math
import statistics
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .factors import (
    ACCELERATION, POSITION, RADIUS, VELOCITY, Arena, Entity, EntityType,
    FactorKind, FactorType, LayoutError, SegarError, SimState, StateLayout,
    builtin_entity_types, builtin_factors, flatten_state,
)
from .physics import STANDARD_RULE_NAMES, make_world, standard_rules

__all__ = [
    "PriorError",
    "PlacementError",
    "TemplateError",
    "Prior",
    "ConstantPrior",
    "UniformPrior",
    "GaussianPrior",
    "DiscretePrior",
    "prior_from_json",
    "sample_prior",
    "distribution_stats",
    "SlotSpec",
    "TaskTemplate",
    "TaskInstance",
    "sample_task",
    "template_entropy",
    "TaskSet",
    "build_task_set",
    "load_template",
    "save_template",
]

_MAX_PLACEMENT_ATTEMPTS = 1000
_TRUNCATION_MIN_MASS = 1e-12


class PriorError(SegarError):
    """Invalid prior parameters or an unsupported prior operation."""


class PlacementError(SegarError):
    """Could not place an entity without same-category overlap."""


class TemplateError(SegarError):
    """A template is structurally invalid."""


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------

class Prior:
    """A one-dimensional distribution over factor-component values.

    Non-constant priors consume exactly one uniform draw per sample; that
    bookkeeping is what keeps streams aligned across template edits.
    """

    kind = "abstract"

    def sample(self, rng: np.random.Generator) -> Any:
        raise NotImplementedError

    def entropy(self) -> float:
        raise NotImplementedError

    def pdf(self, x: float) -> float:
        raise PriorError(f"{self.kind} prior has no density")

    def cdf(self, x: float) -> float:
        raise PriorError(f"{self.kind} prior has no continuous CDF")

    def support(self) -> tuple[float, float]:
        raise PriorError(f"{self.kind} prior has no interval support")

    @property
    def continuous(self) -> bool:
        return False

    def to_json(self) -> dict:
        raise NotImplementedError


class ConstantPrior(Prior):
    """Degenerate: always the same value, no randomness, zero entropy."""

    kind = "constant"

    def __init__(self, value: Any):
        self.value = value

    def sample(self, rng: np.random.Generator) -> Any:
        return self.value

    def entropy(self) -> float:
        return 0.0

    def to_json(self) -> dict:
        v = self.value
        if isinstance(v, tuple):
            v = list(v)
        return {"kind": "constant", "value": v}

    def __repr__(self) -> str:
        return f"ConstantPrior({self.value!r})"


class UniformPrior(Prior):
    kind = "uniform"

    def __init__(self, low: float, high: float):
        self.low = float(low)
        self.high = float(high)
        if not self.low < self.high:
            raise PriorError(f"uniform prior needs low < high, got [{low}, {high}]")

    def sample(self, rng: np.random.Generator) -> float:
        return self.low + (self.high - self.low) * rng.random()

    def entropy(self) -> float:
        return math.log(self.high - self.low)

    def pdf(self, x: float) -> float:
        if self.low <= x <= self.high:
            return 1.0 / (self.high - self.low)
        return 0.0

    def cdf(self, x: float) -> float:
        if x <= self.low:
            return 0.0
        if x >= self.high:
            return 1.0
        return (x - self.low) / (self.high - self.low)

    def support(self) -> tuple[float, float]:
        return (self.low, self.high)

    @property
    def continuous(self) -> bool:
        return True

    def to_json(self) -> dict:
        return {"kind": "uniform", "low": self.low, "high": self.high}

    def __repr__(self) -> str:
        return f"UniformPrior({self.low}, {self.high})"


class GaussianPrior(Prior):
    """Normal, optionally truncated to [low, high] via the inverse CDF.

    Truncation windows carrying less than 1e-12 of the mass are rejected
    outright (sampling such a window is numerically meaningless and a
    rejection sampler would effectively hang).
    """

    kind = "gaussian"

    def __init__(self, mean: float, std: float,
                 low: Optional[float] = None, high: Optional[float] = None):
        self.mean = float(mean)
        self.std = float(std)
        if not self.std > 0:
            raise PriorError(f"gaussian prior needs std > 0, got {std}")
        self.low = None if low is None else float(low)
        self.high = None if high is None else float(high)
        if self.low is not None and self.high is not None and not self.low < self.high:
            raise PriorError(f"gaussian truncation needs low < high, got [{low}, {high}]")
        dist = statistics.NormalDist(self.mean, self.std)
        self._dist = dist
        self._cdf_lo = 0.0 if self.low is None else dist.cdf(self.low)
        self._cdf_hi = 1.0 if self.high is None else dist.cdf(self.high)
        self._mass = self._cdf_hi - self._cdf_lo
        if self._mass < _TRUNCATION_MIN_MASS:
            raise PriorError(
                f"gaussian truncated to [{self.low}, {self.high}] keeps "
                f"{self._mass:.3e} of the mass (< {_TRUNCATION_MIN_MASS:g})")

    def sample(self, rng: np.random.Generator) -> float:
        p = self._cdf_lo + rng.random() * self._mass
        # inv_cdf rejects the exact endpoints; clamping loses ~2^-53 events
        p = min(max(p, 5e-324), 1.0 - 1e-16)
        return self._dist.inv_cdf(p)

    def entropy(self) -> float:
        if self.low is None and self.high is None:
            return 0.5 * math.log(2.0 * math.pi * math.e * self.std * self.std)
        # exact differential entropy of the truncated normal
        z = self._mass

        def phi(t: float) -> float:
            return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)

        a_term = 0.0
        if self.low is not None:
            a = (self.low - self.mean) / self.std
            a_term = a * phi(a)
        b_term = 0.0
        if self.high is not None:
            b = (self.high - self.mean) / self.std
            b_term = b * phi(b)
        return (math.log(math.sqrt(2.0 * math.pi) * self.std * z) + 0.5
                + (a_term - b_term) / (2.0 * z))

    def pdf(self, x: float) -> float:
        if self.low is not None and x < self.low:
            return 0.0
        if self.high is not None and x > self.high:
            return 0.0
        return self._dist.pdf(x) / self._mass

    def cdf(self, x: float) -> float:
        if self.low is not None and x <= self.low:
            return 0.0
        if self.high is not None and x >= self.high:
            return 1.0
        return (self._dist.cdf(x) - self._cdf_lo) / self._mass

    def support(self) -> tuple[float, float]:
        lo = -math.inf if self.low is None else self.low
        hi = math.inf if self.high is None else self.high
        return (lo, hi)

    @property
    def continuous(self) -> bool:
        return True

    def to_json(self) -> dict:
        out: dict[str, Any] = {"kind": "gaussian", "mean": self.mean, "std": self.std}
        if self.low is not None:
            out["low"] = self.low
        if self.high is not None:
            out["high"] = self.high
        return out

    def __repr__(self) -> str:
        return f"GaussianPrior({self.mean}, {self.std}, low={self.low}, high={self.high})"


class DiscretePrior(Prior):
    """Finite support with explicit weights (must sum to 1)."""

    kind = "discrete"

    def __init__(self, values: Sequence[Any], weights: Optional[Sequence[float]] = None):
        if not values:
            raise PriorError("discrete prior needs at least one value")
        self.values = list(values)
        if weights is None:
            weights = [1.0 / len(values)] * len(values)
        self.weights = [float(w) for w in weights]
        if len(self.weights) != len(self.values):
            raise PriorError(
                f"discrete prior has {len(values)} values but {len(weights)} weights")
        if any(w < 0 for w in self.weights):
            raise PriorError("discrete prior weights must be non-negative")
        total = sum(self.weights)
        if abs(total - 1.0) > 1e-12:
            raise PriorError(f"discrete prior weights sum to {total!r}, not 1")

    def sample(self, rng: np.random.Generator) -> Any:
        u = rng.random()
        acc = 0.0
        for v, w in zip(self.values, self.weights):
            acc += w
            if u < acc:
                return v
        return self.values[-1]

    def entropy(self) -> float:
        return -sum(w * math.log(w) for w in self.weights if w > 0.0)

    def to_json(self) -> dict:
        return {"kind": "discrete", "values": list(self.values),
                "weights": list(self.weights)}

    def __repr__(self) -> str:
        return f"DiscretePrior({self.values!r}, {self.weights!r})"


_PRIOR_KINDS = {"constant", "uniform", "gaussian", "discrete"}


def prior_from_json(data: Mapping[str, Any]) -> Prior:
    kind = data.get("kind")
    if kind == "constant":
        v = data["value"]
        if isinstance(v, list):
            v = tuple(v)
        return ConstantPrior(v)
    if kind == "uniform":
        return UniformPrior(data["low"], data["high"])
    if kind == "gaussian":
        return GaussianPrior(data["mean"], data["std"],
                             data.get("low"), data.get("high"))
    if kind == "discrete":
        return DiscretePrior(data["values"], data.get("weights"))
    raise TemplateError(f"unknown prior kind {kind!r} (have: {sorted(_PRIOR_KINDS)})")


def sample_prior(prior: Prior, rng: np.random.Generator) -> Any:
    return prior.sample(rng)


def distribution_stats(prior: Prior) -> Prior:
    """The prior doubles as its own stats handle (pdf/cdf/entropy)."""
    return prior


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------

# fallback values for factors a template leaves unconstrained
_DEFAULT_VALUES: dict[str, Any] = {
    "Position": (0.5, 0.5),
    "Velocity": (0.0, 0.0),
    "Acceleration": (0.0, 0.0),
    "Mass": 1.0,
    "Charge": 0.0,
    "Radius": 0.05,
    "Shape": "circle",
    "Elasticity": 1.0,
    "Friction": 0.2,
    "Heat": 1.0,
    "Magnetism": 1.0,
    "Controlled": False,
    "IsGoal": True,
    "IsHole": True,
}

_PHYSICS_DEFAULTS = {
    "gravity": 10.0,
    "lorentz_k": 1.0,
    "coulomb_k": 1.0,
    "heat_k": 1.0,
    "restitution_default": 1.0,
}

_REWARD_KINDS = ("none", "puttputt", "billiards")
_OBS_MODES = ("full-state", "partial-state", "pixels", "multimodal")


class SlotSpec:
    """A named group of same-typed entities with a count prior."""

    __slots__ = ("name", "etype", "count")

    def __init__(self, name: str, etype: EntityType, count: Optional[Prior] = None):
        self.name = name
        self.etype = etype
        self.count = count if count is not None else ConstantPrior(1)
        self._check_count_prior()

    def _check_count_prior(self) -> None:
        c = self.count
        if isinstance(c, ConstantPrior):
            vals = [c.value]
        elif isinstance(c, DiscretePrior):
            vals = c.values
        else:
            raise TemplateError(
                f"slot {self.name!r}: count prior must be constant or discrete, "
                f"got {c.kind}")
        for v in vals:
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise TemplateError(
                    f"slot {self.name!r}: counts must be non-negative integers, got {v!r}")

    @property
    def fixed_count(self) -> Optional[int]:
        if isinstance(self.count, ConstantPrior):
            return self.count.value
        return None


class TaskTemplate:
    """Everything needed to sample tasks and compile them into episodes."""

    def __init__(self, name: str, slots: Sequence[SlotSpec],
                 priors: Mapping[tuple[str, str, int], Prior],
                 rules: Sequence[str] = STANDARD_RULE_NAMES,
                 reward: str = "none",
                 arena: Optional[Arena] = None,
                 dt: float = 0.01,
                 max_steps: int = 200,
                 physics: Optional[Mapping[str, float]] = None,
                 max_force: float = 1.0,
                 observation: Optional[Mapping[str, Any]] = None):
        self.name = name
        self.slots = list(slots)
        names = [s.name for s in self.slots]
        if len(set(names)) != len(names):
            raise TemplateError(f"duplicate slot names in template {name!r}")
        self.priors = dict(priors)
        self.rules = tuple(rules)
        standard_rules(self.rules)  # validates names
        if reward not in _REWARD_KINDS:
            raise TemplateError(f"unknown reward kind {reward!r} (have: {_REWARD_KINDS})")
        self.reward = reward
        self.arena = arena if arena is not None else Arena()
        self.dt = float(dt)
        self.max_steps = int(max_steps)
        self.physics = dict(_PHYSICS_DEFAULTS)
        if physics:
            unknown = set(physics) - set(_PHYSICS_DEFAULTS)
            if unknown:
                raise TemplateError(f"unknown physics constants: {sorted(unknown)}")
            self.physics.update({k: float(v) for k, v in physics.items()})
        self.max_force = float(max_force)
        obs = {"mode": "full-state", "observable": "all", "resolution": 64,
               "renderer_seed": 0, "hide_controlled_position_after": None}
        if observation:
            unknown = set(observation) - set(obs)
            if unknown:
                raise TemplateError(f"unknown observation fields: {sorted(unknown)}")
            obs.update(observation)
        if obs["mode"] not in _OBS_MODES:
            raise TemplateError(f"unknown observation mode {obs['mode']!r}")
        if int(obs["resolution"]) < 8:
            raise TemplateError(f"resolution must be >= 8, got {obs['resolution']}")
        if obs["mode"] == "full-state" and obs["observable"] != "all":
            raise TemplateError("full-state mode cannot restrict observable factors")
        self.observation = obs
        self._validate_priors()

    def _validate_priors(self) -> None:
        by_slot = {s.name: s for s in self.slots}
        for (slot_name, factor_name, comp), prior in self.priors.items():
            slot = by_slot.get(slot_name)
            if slot is None:
                raise TemplateError(f"prior targets unknown slot {slot_name!r}")
            if factor_name not in builtin_factors:
                raise TemplateError(f"prior targets unknown factor {factor_name!r}")
            ft = builtin_factors.get(factor_name)
            if ft not in slot.etype.basis_set:
                raise TemplateError(
                    f"slot {slot_name!r} ({slot.etype.name}) has no factor {factor_name}")
            if not 0 <= comp < ft.kind.width:
                raise TemplateError(
                    f"factor {factor_name} has no component {comp}")
            if ft.kind in (FactorKind.SHAPE, FactorKind.BOOLEAN):
                if not isinstance(prior, (ConstantPrior, DiscretePrior)):
                    raise TemplateError(
                        f"factor {factor_name} needs a constant or discrete prior")

    def component_prior(self, slot: SlotSpec, ft: FactorType, comp: int) -> Prior:
        p = self.priors.get((slot.name, ft.name, comp))
        if p is not None:
            return p
        default = _DEFAULT_VALUES.get(ft.name)
        if default is None:
            raise TemplateError(
                f"no prior and no default for {slot.name}.{ft.name}")
        if ft.kind is FactorKind.VEC2:
            return ConstantPrior(default[comp])
        return ConstantPrior(default)

    def entropy(self) -> float:
        total = sum(s.count.entropy() for s in self.slots)
        for slot in self.slots:
            for ft in slot.etype.basis:
                for comp in range(ft.kind.width):
                    total += self.component_prior(slot, ft, comp).entropy()
        return total

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        priors = []
        for (slot, factor, comp), p in self.priors.items():
            rec = {"slot": slot, "factor": factor, "component": comp}
            rec.update(p.to_json())
            priors.append(rec)
        return {
            "schema": 1,
            "name": self.name,
            "arena": {"lo": list(self.arena.lo), "hi": list(self.arena.hi)},
            "dt": self.dt,
            "max_steps": self.max_steps,
            "physics": dict(self.physics),
            "rules": list(self.rules),
            "reward": self.reward,
            "actions": {"max_force": self.max_force},
            "observation": dict(self.observation),
            "entities": [
                {"slot": s.name, "type": s.etype.name, "count": s.count.to_json()}
                for s in self.slots
            ],
            "priors": priors,
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "TaskTemplate":
        if data.get("schema") != 1:
            raise TemplateError(f"unsupported template schema: {data.get('schema')!r}")
        try:
            slots = []
            for rec in data["entities"]:
                etype = builtin_entity_types.get(rec["type"])
                try:
                    count = prior_from_json(rec["count"]) if "count" in rec else None
                except PriorError as exc:
                    raise TemplateError(
                        f"count prior for slot {rec['slot']!r}: {exc}") from None
                slots.append(SlotSpec(rec["slot"], etype, count))
            priors: dict[tuple[str, str, int], Prior] = {}
            for rec in data.get("priors", []):
                ft = builtin_factors.get(rec["factor"])
                try:
                    p = prior_from_json(rec)
                except PriorError as exc:
                    raise TemplateError(
                        f"prior for {rec.get('slot')}.{rec.get('factor')}"
                        f".{rec.get('component', '*')}: {exc}") from None
                if "component" in rec:
                    comps = [int(rec["component"])]
                elif ft.kind is FactorKind.VEC2:
                    if isinstance(p, ConstantPrior) and isinstance(p.value, tuple):
                        # one constant pair covers both components
                        priors[(rec["slot"], rec["factor"], 0)] = ConstantPrior(p.value[0])
                        priors[(rec["slot"], rec["factor"], 1)] = ConstantPrior(p.value[1])
                        continue
                    comps = [0, 1]
                else:
                    comps = [0]
                for c in comps:
                    priors[(rec["slot"], rec["factor"], c)] = p
            arena = None
            if "arena" in data:
                arena = Arena(data["arena"]["lo"], data["arena"]["hi"])
            return cls(
                name=data["name"],
                slots=slots,
                priors=priors,
                rules=data.get("rules", STANDARD_RULE_NAMES),
                reward=data.get("reward", "none"),
                arena=arena,
                dt=data.get("dt", 0.01),
                max_steps=data.get("max_steps", 200),
                physics=data.get("physics"),
                max_force=data.get("actions", {}).get("max_force", 1.0),
                observation=data.get("observation"),
            )
        except KeyError as exc:
            raise TemplateError(f"template is missing required field {exc}") from None


def load_template(path: str) -> TaskTemplate:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TemplateError(f"template {path}: invalid JSON ({exc})") from None
    return TaskTemplate.from_json(data)


def save_template(template: TaskTemplate, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(template.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

class TaskInstance:
    """One concrete task: entities drawn from a template at a seed.

    ``slot_of`` remembers which template slot produced each entity id, so
    reports can pool same-slot entities when testing against priors.
    """

    def __init__(self, template: TaskTemplate, seed: int, entities: Sequence[Entity],
                 slot_of: Optional[Mapping[int, str]] = None):
        self.template = template
        self.seed = int(seed)
        self.entities = list(entities)
        self.slot_of = dict(slot_of) if slot_of is not None else {}
        self._layout: Optional[StateLayout] = None
        self._vector: Optional[np.ndarray] = None

    def to_state(self) -> SimState:
        """A fresh mutable state; the instance itself stays pristine."""
        ents = [Entity(e.id, e.etype, dict(e.values)) for e in self.entities]
        world = make_world(**self.template.physics)
        return SimState(ents, arena=Arena(self.template.arena.lo, self.template.arena.hi),
                        dt=self.template.dt, world=world,
                        transient_factors=(ACCELERATION,))

    def flat(self) -> tuple[np.ndarray, StateLayout]:
        if self._vector is None:
            state = SimState(
                [Entity(e.id, e.etype, dict(e.values)) for e in self.entities],
                arena=self.template.arena, dt=self.template.dt)
            self._vector, self._layout = flatten_state(state)
        return self._vector, self._layout

    def to_json(self) -> dict:
        ents = []
        for e in self.entities:
            values = {}
            for ft in e.etype.basis:
                v = e.values[ft]
                values[ft.name] = list(v) if isinstance(v, tuple) else v
            ents.append({"id": e.id, "slot": self.slot_of.get(e.id),
                         "type": e.etype.name, "values": values})
        return {"seed": self.seed, "entities": ents}

    @classmethod
    def from_json(cls, data: Mapping[str, Any], template: TaskTemplate) -> "TaskInstance":
        entities = []
        slot_of = {}
        for rec in data["entities"]:
            etype = builtin_entity_types.get(rec["type"])
            values = {}
            for name, v in rec["values"].items():
                ft = builtin_factors.get(name)
                values[ft] = tuple(v) if isinstance(v, list) else v
            eid = int(rec["id"])
            entities.append(Entity(eid, etype, values))
            if rec.get("slot") is not None:
                slot_of[eid] = rec["slot"]
        return cls(template, int(data["seed"]), entities, slot_of)


def _factor_rng(seed: int, slot_index: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(slot_index, stream))
    return np.random.Generator(np.random.PCG64(ss))


def _category(etype: EntityType) -> str:
    # mobile bodies may start on top of tiles, but not inside each other
    return "object" if VELOCITY in etype.basis_set else "tile"


def sample_task(template: TaskTemplate, seed: int) -> TaskInstance:
    """Draw one task. Same (template, seed) always gives the same task.

    Placement rejects same-category circle overlaps by redrawing that
    entity's position from its own stream (up to 1000 attempts).
    """
    counts = []
    for i, slot in enumerate(template.slots):
        n = slot.count.sample(_factor_rng(seed, i, 0))
        counts.append(int(n))

    placed: list[tuple[str, tuple[float, float], float]] = []
    entities: list[Entity] = []
    slot_of: dict[int, str] = {}
    arena = template.arena
    next_id = 1  # id 0 belongs to the world constants entity
    for i, slot in enumerate(template.slots):
        rngs = {ft: _factor_rng(seed, i, bi + 1)
                for bi, ft in enumerate(slot.etype.basis)}
        category = _category(slot.etype)
        for _ in range(counts[i]):
            values: dict[FactorType, Any] = {}
            for ft in slot.etype.basis:
                if ft is POSITION:
                    continue  # placed last, so overlap checks see the radius
                if ft.kind is FactorKind.VEC2:
                    px = template.component_prior(slot, ft, 0).sample(rngs[ft])
                    py = template.component_prior(slot, ft, 1).sample(rngs[ft])
                    values[ft] = (px, py)
                else:
                    values[ft] = template.component_prior(slot, ft, 0).sample(rngs[ft])
            if POSITION in slot.etype.basis_set:
                radius = float(values.get(RADIUS, 0.0))
                rng = rngs[POSITION]
                for attempt in range(_MAX_PLACEMENT_ATTEMPTS):
                    px = template.component_prior(slot, POSITION, 0).sample(rng)
                    py = template.component_prior(slot, POSITION, 1).sample(rng)
                    ok = arena.contains((px, py))
                    if ok:
                        for cat, (qx, qy), qr in placed:
                            if cat != category:
                                continue
                            rs = radius + qr
                            if (px - qx) ** 2 + (py - qy) ** 2 < rs * rs:
                                ok = False
                                break
                    if ok:
                        break
                else:
                    raise PlacementError(
                        f"slot {slot.name!r}: no overlap-free in-arena position in "
                        f"{_MAX_PLACEMENT_ATTEMPTS} attempts (seed {seed})")
                values[POSITION] = (px, py)
                placed.append((category, (px, py), radius))
            entities.append(Entity(next_id, slot.etype, values))
            slot_of[next_id] = slot.name
            next_id += 1
    return TaskInstance(template, seed, entities, slot_of)


def template_entropy(template: TaskTemplate) -> float:
    """Sum of prior entropies: total parametric spread of the template."""
    return template.entropy()


# ---------------------------------------------------------------------------
# Task sets
# ---------------------------------------------------------------------------

class TaskSet:
    """n tasks from one template, flattened into an (n, d) matrix."""

    def __init__(self, instances: Sequence[TaskInstance], matrix: np.ndarray,
                 layout: StateLayout, template_name: str):
        self.instances = list(instances)
        self.matrix = matrix
        self.layout = layout
        self.template_name = template_name

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def seeds(self) -> list[int]:
        return [inst.seed for inst in self.instances]


def build_task_set(template: TaskTemplate, seeds: Sequence[int]) -> TaskSet:
    """Sample and flatten; every instance must share one layout.

    Count priors with spread would make the matrix ragged, so they are
    rejected here (sample_task alone handles them fine).
    """
    if not seeds:
        raise SegarError("need at least one seed to build a task set")
    instances = [sample_task(template, s) for s in seeds]
    vec0, layout0 = instances[0].flat()
    sig = layout0.signature()
    rows = [vec0]
    for inst in instances[1:]:
        vec, layout = inst.flat()
        if layout.signature() != sig:
            raise LayoutError(
                f"task sampled at seed {inst.seed} has a different layout than "
                f"seed {instances[0].seed}: the template's count priors must be "
                "degenerate to build a task set")
        rows.append(vec)
    return TaskSet(instances, np.vstack(rows), layout0, template.name)
