"""Rules: typed transition pieces matched structurally against entities.

A rule declares slots (sets of factor types an entity must carry to bind)
and global reads; its body proposes outputs that the engine resolves per
(entity, factor) after every body of the phase has run, so evaluation
order inside a phase never matters.
"""

from __future__ import annotations

import enum
import itertools
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

from .factors import Entity, EntityError, FactorKind, FactorType, SegarError, SimState, zero_value

__all__ = [
    "OutputKind",
    "RuleOutput",
    "RuleSignature",
    "Rule",
    "RuleConflictError",
    "match_entities",
    "evaluate_rule",
    "resolve_conflicts",
    "resolve_factor",
    "group_phases",
    "run_phases",
    "apply_transition",
]


class RuleConflictError(SegarError):
    """Two equally specific SetFactor proposals disagree on one factor."""


class OutputKind(enum.Enum):
    # precedence: SET_FACTOR > AGGREGATE > DIFFERENTIAL
    DIFFERENTIAL = "differential"
    AGGREGATE = "aggregate"
    SET_FACTOR = "set_factor"


class RuleOutput:
    """One proposal: write ``value`` (per ``kind``) to slot's bound entity."""

    __slots__ = ("slot", "factor", "kind", "value")

    def __init__(self, slot: int, factor: FactorType, kind: OutputKind, value: Any):
        self.slot = slot
        self.factor = factor
        self.kind = kind
        self.value = value

    def __repr__(self) -> str:
        return f"RuleOutput(slot={self.slot}, {self.factor.name}, {self.kind.value}, {self.value!r})"


class RuleSignature:
    """Slot factor-sets plus global factor reads."""

    __slots__ = ("slots", "globals", "specificity")

    def __init__(self, slots: Sequence[Iterable[FactorType]],
                 globals: Iterable[FactorType] = ()):
        self.slots = tuple(frozenset(s) for s in slots)
        if not self.slots or any(not s for s in self.slots):
            raise SegarError("a rule signature needs at least one non-empty slot")
        self.globals = frozenset(globals)
        # more factors demanded across slots = more specific
        self.specificity = sum(len(s) for s in self.slots)

    def __repr__(self) -> str:
        parts = ["{" + ",".join(sorted(f.name for f in s)) + "}" for s in self.slots]
        return f"RuleSignature([{', '.join(parts)}])"


# Body contract: body(slot_values, globals, dt) -> RuleOutput | iterable | None.
# slot_values are the bound entities' live factor maps; bodies must read
# only, mutation happens in the engine after the whole phase is evaluated.
RuleBody = Callable[[tuple, Mapping[FactorType, Any], float],
                    Any]


class Rule:
    """Named signature + body. ``phase`` 0 runs before phase 1 each step."""

    __slots__ = ("name", "signature", "body", "phase")

    def __init__(self, name: str, signature: RuleSignature, body: RuleBody,
                 phase: int = 0):
        self.name = name
        self.signature = signature
        self.body = body
        self.phase = phase

    @property
    def specificity(self) -> int:
        return self.signature.specificity

    def __repr__(self) -> str:
        return f"Rule({self.name!r}, phase={self.phase})"


def match_entities(rule: Rule | RuleSignature, state: SimState) -> list[tuple[Entity, ...]]:
    """All bindings of distinct entities to the rule's slots.

    An entity binds to a slot iff its basis carries every factor the slot
    demands.  Bindings come out in lexicographic entity-id order, slot 0
    varying slowest, so enumeration is reproducible.
    """
    sig = rule.signature if isinstance(rule, Rule) else rule
    candidates = []
    for slot in sig.slots:
        row = [e for e in state.entities if e.etype.basis_set.issuperset(slot)]
        if not row:
            return []
        candidates.append(row)
    out = []
    for combo in itertools.product(*candidates):
        if len({e.id for e in combo}) != len(combo):
            continue
        out.append(combo)
    return out


def evaluate_rule(rule: Rule, binding: Sequence[Entity], state: SimState) -> list[RuleOutput]:
    """Run one body over one binding and normalize its outputs."""
    g = state.globals_view()
    for ft in rule.signature.globals:
        if ft not in g:
            raise SegarError(
                f"rule {rule.name!r} reads global {ft.name} but the state's "
                "world constants do not provide it")
    slot_values = tuple(e.values for e in binding)
    result = rule.body(slot_values, g, state.dt)
    if result is None:
        return []
    if isinstance(result, RuleOutput):
        outputs = [result]
    else:
        outputs = list(result)
    for out in outputs:
        if not 0 <= out.slot < len(binding):
            raise SegarError(
                f"rule {rule.name!r} targets slot {out.slot}, has {len(binding)} bound")
        ent = binding[out.slot]
        if out.factor not in ent.etype.basis_set:
            raise EntityError(
                f"rule {rule.name!r} writes {out.factor.name} on entity "
                f"{ent.id} ({ent.etype.name}) which lacks it")
    return outputs


def _vadd(a: Any, b: Any) -> Any:
    if isinstance(a, tuple):
        return (a[0] + b[0], a[1] + b[1])
    return a + b


def _vscale(a: Any, s: float) -> Any:
    if isinstance(a, tuple):
        return (a[0] * s, a[1] * s)
    return a * s


def _resolve(items: Sequence[tuple[OutputKind, Any, int, str]], prior: Any,
             dt: float, where: str = "") -> Any:
    """Fold (kind, value, specificity, label) proposals into the next value.

    SetFactor beats Aggregate beats Differential.  Competing SetFactors are
    decided by specificity; a tie at the top with differing values is a
    modelling error and raises.  Equal values at the top pass silently.
    """
    sets = [it for it in items if it[0] is OutputKind.SET_FACTOR]
    if sets:
        top = max(it[2] for it in sets)
        winners = [it for it in sets if it[2] == top]
        value = winners[0][1]
        for _, other, _, label in winners[1:]:
            if other != value:
                raise RuleConflictError(
                    f"unresolvable SetFactor conflict{where}: "
                    f"{winners[0][3]!r} and {label!r} (specificity {top}) "
                    f"propose {value!r} vs {other!r}")
        return value
    aggs = [it[1] for it in items if it[0] is OutputKind.AGGREGATE]
    if aggs:
        total = aggs[0]
        for v in aggs[1:]:
            total = _vadd(total, v)
        return total
    total = None
    for _, v, _, _ in items:
        total = v if total is None else _vadd(total, v)
    return _vadd(prior, _vscale(total, dt))


def resolve_conflicts(proposals: Sequence[tuple[FactorType, OutputKind, Any, int]],
                      prior_value: Any, dt: float) -> Any:
    """Resolve proposals shaped (factor, kind, value, specificity).

    All proposals must target one (entity, factor); the factor element is
    carried for diagnostics only.
    """
    if not proposals:
        return prior_value
    items = [(kind, value, spec, f"{ft.name} proposal {i}")
             for i, (ft, kind, value, spec) in enumerate(proposals)]
    return _resolve(items, prior_value, dt,
                    where=f" on factor {proposals[0][0].name}")


def resolve_factor(proposals: Sequence[tuple[Rule, RuleOutput]], prior: Any,
                   dt: float, entity: Optional[Entity] = None) -> Any:
    """Engine-side resolution keyed by the proposing rules (for messages)."""
    items = [(o.kind, o.value, r.specificity, r.name) for r, o in proposals]
    where = ""
    if proposals:
        ft = proposals[0][1].factor
        ent = f" on entity {entity.id}" if entity is not None else ""
        where = f"{ent} for factor {ft.name}"
    return _resolve(items, prior, dt, where)


_PhasedBindings = list[list[tuple[Rule, tuple[Entity, ...], tuple[dict, ...]]]]


def group_phases(state: SimState, rules: Sequence[Rule]) -> _PhasedBindings:
    """Match every rule and flatten (rule, binding, live values) by phase.

    Bindings depend only on entity types, which never change mid-episode,
    so callers running many steps compute this once and reuse it; the
    cached value-dict tuples stay live because entities mutate their dicts
    in place.  Global reads are checked here, once per rule.
    """
    g = state.globals_view()
    by_phase: dict[int, list[tuple[Rule, tuple[Entity, ...], tuple[dict, ...]]]] = {}
    for rule in rules:
        for ft in rule.signature.globals:
            if ft not in g:
                raise SegarError(
                    f"rule {rule.name!r} reads global {ft.name} but the "
                    "state's world constants do not provide it")
        bucket = by_phase.setdefault(rule.phase, [])
        for binding in match_entities(rule, state):
            bucket.append((rule, binding, tuple(e.values for e in binding)))
    return [by_phase[p] for p in sorted(by_phase)]


def run_phases(state: SimState, phased: _PhasedBindings,
               collisions: Optional[Callable[[SimState], None]] = None) -> SimState:
    """The transition core: reset transients, run phases, collide, tick."""
    for e in state.entities:
        for ft in state.transient_factors:
            if ft in e.etype.basis_set:
                e.values[ft] = zero_value(ft.kind)
    g = state.globals_view()
    dt = state.dt
    for bucket in phased:
        proposals: dict[tuple[Entity, FactorType], list[tuple[Rule, RuleOutput]]] = {}
        for rule, binding, slot_values in bucket:
            result = rule.body(slot_values, g, dt)
            if result is None:
                continue
            outputs = (result,) if type(result) is RuleOutput else tuple(result)
            for out in outputs:
                if not 0 <= out.slot < len(binding):
                    raise SegarError(
                        f"rule {rule.name!r} targets slot {out.slot}, "
                        f"has {len(binding)} bound")
                ent = binding[out.slot]
                if out.factor not in ent.etype.basis_set:
                    raise EntityError(
                        f"rule {rule.name!r} writes {out.factor.name} on entity "
                        f"{ent.id} ({ent.etype.name}) which lacks it")
                proposals.setdefault((ent, out.factor), []).append((rule, out))
        for (entity, ft), props in proposals.items():
            value = resolve_factor(props, entity.values[ft], dt, entity)
            entity.set(ft, value)
    if collisions is not None:
        collisions(state)
    state.time += 1
    return state


def apply_transition(state: SimState, rules: Sequence[Rule],
                     collisions: Optional[Callable[[SimState], None]] = None) -> SimState:
    """Advance the state by one step, in place.

    Transient factors reset to zero, then each phase evaluates every rule
    on a consistent snapshot and commits its resolved writes, then
    collisions run last, then the clock ticks.
    """
    return run_phases(state, group_phases(state, rules), collisions)
