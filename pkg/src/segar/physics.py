"""Built-in physics: force kernels, the standard rule set, collisions.

Kernels are pure functions so they can be pinned down numerically in
isolation; the rule factories wrap them with structural signatures.  Tile
effects (friction, heat, magnetic turning) apply while an object's circle
overlaps the tile's circle.
"""

from __future__ import annotations

import math
from typing import Iterable, Optional, Sequence

from .factors import (
    ACCELERATION, CHARGE, COULOMB_K, ELASTICITY, FRICTION, GRAVITY, HEAT,
    HEAT_K, HOLE_FLAG, LORENTZ_K, MAGNETISM, MASS, POSITION, RADIUS,
    RESTITUTION_DEFAULT, VELOCITY, WORLD_CONSTANTS, Entity, SegarError, SimState,
    make_entity,
)
from .rules import OutputKind, Rule, RuleOutput, RuleSignature

__all__ = [
    "VELOCITY_EPSILON",
    "MASS_FLOOR",
    "friction_deceleration",
    "lorentz_acceleration",
    "coulomb_acceleration",
    "heat_mass_rate",
    "friction_rule",
    "lorentz_rule",
    "charge_rule",
    "heat_rule",
    "hole_capture_rule",
    "motion_rule",
    "standard_rules",
    "STANDARD_RULE_NAMES",
    "make_world",
    "resolve_collisions",
    "kinetic_energy",
    "total_momentum",
]

# below this speed a body counts as at rest and kinetic friction shuts off
VELOCITY_EPSILON = 1e-6
# mass may decay (heat) but never below this
MASS_FLOOR = 1e-3


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

def friction_deceleration(velocity: tuple[float, float], mass: float,
                          friction: float, gravity: float) -> Optional[tuple[float, float]]:
    """Kinetic friction: magnitude mu*g/m against the direction of motion.

    Returns None when the body is at rest (speed below the cutoff), where
    kinetic friction does not act.
    """
    vx, vy = velocity
    speed = math.hypot(vx, vy)
    if speed < VELOCITY_EPSILON:
        return None
    f_mag = friction * gravity
    return (-math.copysign(1.0, vx) * f_mag * (abs(vx) / speed) / mass,
            -math.copysign(1.0, vy) * f_mag * (abs(vy) / speed) / mass)


def lorentz_acceleration(charge: float, mass: float, magnetism: float,
                         velocity: tuple[float, float], k: float) -> tuple[float, float]:
    """Magnetic turning force, field normal to the plane.

    Positive charge in a positive field turns counter-clockwise; the speed
    is untouched (acceleration is perpendicular to velocity).
    """
    s = k * charge * magnetism / mass
    vx, vy = velocity
    return (-s * vy, s * vx)


def coulomb_acceleration(mass: float, charge: float, position: tuple[float, float],
                         other_charge: float, other_position: tuple[float, float],
                         k: float, r_min: float) -> tuple[float, float]:
    """Inverse-square electrostatic push on the first body from the second.

    The distance is clamped below at ``r_min`` (contact distance) so
    overlapping bodies see a bounded force instead of a singularity.
    """
    rx = position[0] - other_position[0]
    ry = position[1] - other_position[1]
    d = math.hypot(rx, ry)
    if d == 0.0:
        return (0.0, 0.0)
    d_eff = max(d, r_min)
    mag = k * charge * other_charge / (mass * d_eff * d_eff)
    return (mag * rx / d, mag * ry / d)


def heat_mass_rate(mass: float, heat: float, k: float) -> float:
    """Mass loss rate while sitting on something hot."""
    return -k * heat * mass


def _overlap(a_pos, a_r, b_pos, b_r) -> bool:
    dx = a_pos[0] - b_pos[0]
    dy = a_pos[1] - b_pos[1]
    r = a_r + b_r
    return dx * dx + dy * dy < r * r


# ---------------------------------------------------------------------------
# Standard rules
# ---------------------------------------------------------------------------

_BODY_SLOT = {POSITION, VELOCITY, ACCELERATION, MASS, RADIUS}


def friction_rule() -> Rule:
    sig = RuleSignature(
        slots=[_BODY_SLOT, {POSITION, RADIUS, FRICTION}],
        globals=[GRAVITY])

    def body(slots, g, dt):
        obj, tile = slots
        if not _overlap(obj[POSITION], obj[RADIUS], tile[POSITION], tile[RADIUS]):
            return None
        da = friction_deceleration(obj[VELOCITY], obj[MASS], tile[FRICTION], g[GRAVITY])
        if da is None:
            return None
        return RuleOutput(0, ACCELERATION, OutputKind.AGGREGATE, da)

    return Rule("apply_friction", sig, body, phase=0)


def lorentz_rule() -> Rule:
    sig = RuleSignature(
        slots=[_BODY_SLOT | {CHARGE}, {POSITION, RADIUS, MAGNETISM}],
        globals=[LORENTZ_K])

    def body(slots, g, dt):
        obj, tile = slots
        if not _overlap(obj[POSITION], obj[RADIUS], tile[POSITION], tile[RADIUS]):
            return None
        da = lorentz_acceleration(obj[CHARGE], obj[MASS], tile[MAGNETISM],
                                  obj[VELOCITY], g[LORENTZ_K])
        return RuleOutput(0, ACCELERATION, OutputKind.AGGREGATE, da)

    return Rule("apply_lorentz", sig, body, phase=0)


def charge_rule() -> Rule:
    sig = RuleSignature(
        slots=[{POSITION, ACCELERATION, MASS, RADIUS, CHARGE},
               {POSITION, RADIUS, CHARGE}],
        globals=[COULOMB_K])

    def body(slots, g, dt):
        a, b = slots
        da = coulomb_acceleration(a[MASS], a[CHARGE], a[POSITION],
                                  b[CHARGE], b[POSITION], g[COULOMB_K],
                                  a[RADIUS] + b[RADIUS])
        return RuleOutput(0, ACCELERATION, OutputKind.AGGREGATE, da)

    return Rule("apply_charge", sig, body, phase=0)


def heat_rule() -> Rule:
    sig = RuleSignature(
        slots=[{POSITION, RADIUS, MASS}, {POSITION, RADIUS, HEAT}],
        globals=[HEAT_K])

    def body(slots, g, dt):
        obj, tile = slots
        if not _overlap(obj[POSITION], obj[RADIUS], tile[POSITION], tile[RADIUS]):
            return None
        m = obj[MASS]
        rate = heat_mass_rate(m, tile[HEAT], g[HEAT_K])
        # this rule owns the floor: never propose crossing it
        if m + dt * rate < MASS_FLOOR:
            rate = (MASS_FLOOR - m) / dt if m > MASS_FLOOR else 0.0
        return RuleOutput(0, MASS, OutputKind.DIFFERENTIAL, rate)

    return Rule("apply_heat", sig, body, phase=0)


def hole_capture_rule() -> Rule:
    """A body whose center crosses into a hole stops dead (it fell in)."""
    sig = RuleSignature(
        slots=[{POSITION, VELOCITY, RADIUS, MASS}, {POSITION, RADIUS, HOLE_FLAG}])

    def body(slots, g, dt):
        obj, hole = slots
        px, py = obj[POSITION]
        hx, hy = hole[POSITION]
        r = hole[RADIUS]
        if (px - hx) ** 2 + (py - hy) ** 2 <= r * r:
            return RuleOutput(0, VELOCITY, OutputKind.SET_FACTOR, (0.0, 0.0))
        return None

    return Rule("hole_capture", sig, body, phase=0)


def motion_rule() -> Rule:
    """Semi-implicit Euler, with an overshoot stop.

    Velocity updates with this step's acceleration; position then moves
    with the updated velocity.  If the step's deceleration would reverse
    the direction of motion (dot(v', v) < 0 while dot(a, v) < 0), the body
    stops instead of ringing around zero.
    """
    sig = RuleSignature(slots=[{POSITION, VELOCITY, ACCELERATION}])

    def body(slots, g, dt):
        vals = slots[0]
        ax, ay = vals[ACCELERATION]
        vx, vy = vals[VELOCITY]
        nvx = vx + ax * dt
        nvy = vy + ay * dt
        if nvx * vx + nvy * vy < 0.0 and ax * vx + ay * vy < 0.0:
            return [RuleOutput(0, VELOCITY, OutputKind.SET_FACTOR, (0.0, 0.0)),
                    RuleOutput(0, POSITION, OutputKind.DIFFERENTIAL, (0.0, 0.0))]
        return [RuleOutput(0, VELOCITY, OutputKind.DIFFERENTIAL, (ax, ay)),
                RuleOutput(0, POSITION, OutputKind.DIFFERENTIAL, (nvx, nvy))]

    return Rule("integrate_motion", sig, body, phase=1)


STANDARD_RULE_NAMES = ("apply_friction", "apply_lorentz", "apply_charge",
                       "apply_heat", "hole_capture", "integrate_motion")

_FACTORIES = {
    "apply_friction": friction_rule,
    "apply_lorentz": lorentz_rule,
    "apply_charge": charge_rule,
    "apply_heat": heat_rule,
    "hole_capture": hole_capture_rule,
    "integrate_motion": motion_rule,
}


def standard_rules(names: Optional[Iterable[str]] = None) -> list[Rule]:
    if names is None:
        names = STANDARD_RULE_NAMES
    out = []
    for name in names:
        try:
            out.append(_FACTORIES[name]())
        except KeyError:
            raise SegarError(f"unknown rule {name!r} (have: {', '.join(_FACTORIES)})") from None
    return out


def make_world(gravity: float = 10.0, lorentz_k: float = 1.0,
               coulomb_k: float = 1.0, heat_k: float = 1.0,
               restitution_default: float = 1.0, entity_id: int = 0) -> Entity:
    """The constants-carrying singleton every standard state owns."""
    return make_entity(WORLD_CONSTANTS, {
        GRAVITY: gravity,
        LORENTZ_K: lorentz_k,
        COULOMB_K: coulomb_k,
        HEAT_K: heat_k,
        RESTITUTION_DEFAULT: restitution_default,
    }, entity_id=entity_id)


# ---------------------------------------------------------------------------
# Collisions
# ---------------------------------------------------------------------------

_COLLIDER = frozenset({POSITION, VELOCITY, MASS, RADIUS, ELASTICITY})


def _in_hole(e: Entity, holes: Sequence[Entity]) -> bool:
    px, py = e.values[POSITION]
    for h in holes:
        hx, hy = h.values[POSITION]
        r = h.values[RADIUS]
        if (px - hx) ** 2 + (py - hy) ** 2 <= r * r:
            return True
    return False


def resolve_collisions(state: SimState,
                       bodies: Optional[Sequence[Entity]] = None,
                       holes: Optional[Sequence[Entity]] = None) -> None:
    """Impulse resolution for circle-circle contacts, then the walls.

    Pairs are processed in ascending id order; positional de-penetration
    splits by inverse mass; restitution is the product of both bodies'
    elasticities.  Bodies resting in a hole have dropped below the table
    and are skipped entirely.
    """
    if bodies is None:
        bodies = [e for e in state.entities if e.etype.basis_set.issuperset(_COLLIDER)]
    if holes is None:
        holes = [e for e in state.entities if HOLE_FLAG in e.etype.basis_set]
    live = [e for e in bodies if not _in_hole(e, holes)] if holes else list(bodies)

    n = len(live)
    for i in range(n):
        e1 = live[i]
        p1 = e1.values[POSITION]
        r1 = e1.values[RADIUS]
        for j in range(i + 1, n):
            e2 = live[j]
            p2 = e2.values[POSITION]
            r2 = e2.values[RADIUS]
            dx = p2[0] - p1[0]
            dy = p2[1] - p1[1]
            rsum = r1 + r2
            d2 = dx * dx + dy * dy
            if d2 >= rsum * rsum:
                continue
            dist = math.sqrt(d2)
            if dist == 0.0:
                nx, ny = 1.0, 0.0  # coincident centers: arbitrary but fixed
            else:
                nx, ny = dx / dist, dy / dist
            m1 = e1.values[MASS]
            m2 = e2.values[MASS]
            im1 = 1.0 / m1
            im2 = 1.0 / m2
            inv_sum = im1 + im2
            # separate first so resting contacts do not sink in
            push = rsum - dist
            p1 = (p1[0] - nx * push * im1 / inv_sum,
                  p1[1] - ny * push * im1 / inv_sum)
            p2 = (p2[0] + nx * push * im2 / inv_sum,
                  p2[1] + ny * push * im2 / inv_sum)
            e1.values[POSITION] = p1
            e2.values[POSITION] = p2
            v1 = e1.values[VELOCITY]
            v2 = e2.values[VELOCITY]
            vn = (v2[0] - v1[0]) * nx + (v2[1] - v1[1]) * ny
            if vn < 0.0:  # approaching
                e = e1.values[ELASTICITY] * e2.values[ELASTICITY]
                jmag = -(1.0 + e) * vn / inv_sum
                v1 = (v1[0] - jmag * im1 * nx, v1[1] - jmag * im1 * ny)
                v2 = (v2[0] + jmag * im2 * nx, v2[1] + jmag * im2 * ny)
                e1.values[VELOCITY] = v1
                e2.values[VELOCITY] = v2
    # walls
    lo = state.arena.lo
    hi = state.arena.hi
    wall_e = 1.0
    if state.world is not None and RESTITUTION_DEFAULT in state.world.values:
        wall_e = state.world.values[RESTITUTION_DEFAULT]
    for e in live:
        px, py = e.values[POSITION]
        vx, vy = e.values[VELOCITY]
        r = e.values[RADIUS]
        k = e.values[ELASTICITY] * wall_e
        if px - r < lo[0]:
            px = lo[0] + r
            if vx < 0.0:
                vx = -vx * k
        elif px + r > hi[0]:
            px = hi[0] - r
            if vx > 0.0:
                vx = -vx * k
        if py - r < lo[1]:
            py = lo[1] + r
            if vy < 0.0:
                vy = -vy * k
        elif py + r > hi[1]:
            py = hi[1] - r
            if vy > 0.0:
                vy = -vy * k
        e.values[POSITION] = (px, py)
        e.values[VELOCITY] = (vx, vy)


def kinetic_energy(state: SimState) -> float:
    total = 0.0
    for e in state.entities:
        if MASS in e.etype.basis_set and VELOCITY in e.etype.basis_set:
            vx, vy = e.values[VELOCITY]
            total += 0.5 * e.values[MASS] * (vx * vx + vy * vy)
    return total


def total_momentum(state: SimState) -> tuple[float, float]:
    mx = my = 0.0
    for e in state.entities:
        if MASS in e.etype.basis_set and VELOCITY in e.etype.basis_set:
            vx, vy = e.values[VELOCITY]
            m = e.values[MASS]
            mx += m * vx
            my += m * vy
    return (mx, my)
