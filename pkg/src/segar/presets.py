"""Built-in task templates: puttputt, billiards, invisiball.

Difficulty tiers keep every prior's center and widen its spread: medium
doubles each uniform half-width, hard quadruples it.  Positions always
draw from the full playable box, so the tiers differ in how much the
physics varies between tasks, not in geometry.
"""

from __future__ import annotations

from typing import Optional

from .factors import (
    BALL, CHARGED_BALL, CHARGED_OBJECT, GOAL, HOLE, MAGMA, MAGNET,
    OBJECT, SAND, SegarError,
)
from .tasks import ConstantPrior, SlotSpec, TaskTemplate, UniformPrior

__all__ = ["builtin_template", "BUILTIN_TASKS", "DIFFICULTIES"]

BUILTIN_TASKS = ("puttputt", "billiards", "invisiball")
DIFFICULTIES = {"easy": 1.0, "medium": 2.0, "hard": 4.0}


def _u(center: float, half: float, w: float,
       lo: Optional[float] = None, hi: Optional[float] = None) -> UniformPrior:
    """Uniform around a center, half-width scaled by the tier, clipped."""
    a = center - half * w
    b = center + half * w
    if lo is not None:
        a = max(a, lo)
    if hi is not None:
        b = min(b, hi)
    return UniformPrior(a, b)


def _box(slot: str, x0: float, x1: float, y0: float, y1: float) -> dict:
    return {
        (slot, "Position", 0): UniformPrior(x0, x1),
        (slot, "Position", 1): UniformPrior(y0, y1),
    }


def _puttputt(w: float, blind: bool = False) -> TaskTemplate:
    """Putt the controlled ball into the goal across sand and magma."""
    name = "invisiball" if blind else "puttputt"
    ball_type = CHARGED_BALL if blind else BALL
    slots = [
        SlotSpec("ball", ball_type),
        SlotSpec("goal", GOAL),
        SlotSpec("sand", SAND, ConstantPrior(2)),
        SlotSpec("magma", MAGMA),
    ]
    priors = {}
    priors.update(_box("ball", 0.1, 0.45, 0.1, 0.9))
    priors.update(_box("goal", 0.6, 0.9, 0.1, 0.9))
    priors.update(_box("sand", 0.15, 0.85, 0.15, 0.85))
    priors.update(_box("magma", 0.15, 0.85, 0.15, 0.85))
    priors.update({
        ("ball", "Mass", 0): _u(1.0, 0.1, w, lo=0.2),
        ("ball", "Elasticity", 0): _u(0.8, 0.04, w, lo=0.2, hi=1.0),
        ("ball", "Radius", 0): ConstantPrior(0.03),
        ("ball", "Controlled", 0): ConstantPrior(True),
        ("goal", "Radius", 0): ConstantPrior(0.08),
        ("sand", "Radius", 0): _u(0.12, 0.02, w, lo=0.02, hi=0.16),
        ("sand", "Friction", 0): _u(0.25, 0.06, w, lo=0.0),
        ("magma", "Radius", 0): _u(0.1, 0.02, w, lo=0.02, hi=0.14),
        ("magma", "Heat", 0): _u(0.8, 0.2, w, lo=0.0),
    })
    observation = None
    if blind:
        priors[("ball", "Charge", 0)] = _u(0.5, 0.2, w)
        slots.append(SlotSpec("magnet", MAGNET))
        priors.update(_box("magnet", 0.15, 0.85, 0.15, 0.85))
        priors[("magnet", "Radius", 0)] = _u(0.12, 0.015, w, lo=0.02, hi=0.18)
        priors[("magnet", "Magnetism", 0)] = _u(1.0, 0.3, w)
        slots.append(SlotSpec("charge", CHARGED_OBJECT))
        priors.update(_box("charge", 0.3, 0.8, 0.1, 0.9))
        priors[("charge", "Radius", 0)] = ConstantPrior(0.04)
        priors[("charge", "Mass", 0)] = _u(1.0, 0.1, w, lo=0.2)
        priors[("charge", "Charge", 0)] = _u(0.0, 0.5, w)
        priors[("charge", "Elasticity", 0)] = _u(0.8, 0.04, w, lo=0.2, hi=1.0)
        observation = {"mode": "partial-state",
                       "hide_controlled_position_after": 1}
    return TaskTemplate(
        name=name,
        slots=slots,
        priors=priors,
        reward="puttputt",
        observation=observation,
    )


def _billiards(w: float) -> TaskTemplate:
    """Sink every loose ball; sinking the cue ball loses."""
    slots = [
        SlotSpec("cue", BALL),
        SlotSpec("balls", OBJECT, ConstantPrior(4)),
        SlotSpec("pocket_sw", HOLE),
        SlotSpec("pocket_se", HOLE),
        SlotSpec("pocket_nw", HOLE),
        SlotSpec("pocket_ne", HOLE),
    ]
    priors = {}
    priors.update(_box("cue", 0.1, 0.35, 0.25, 0.75))
    priors.update(_box("balls", 0.5, 0.92, 0.08, 0.92))
    for slot, (px, py) in {
        "pocket_sw": (0.04, 0.04), "pocket_se": (0.96, 0.04),
        "pocket_nw": (0.04, 0.96), "pocket_ne": (0.96, 0.96),
    }.items():
        priors[(slot, "Position", 0)] = ConstantPrior(px)
        priors[(slot, "Position", 1)] = ConstantPrior(py)
        priors[(slot, "Radius", 0)] = ConstantPrior(0.06)
    priors.update({
        ("cue", "Mass", 0): _u(1.0, 0.08, w, lo=0.2),
        ("cue", "Radius", 0): ConstantPrior(0.035),
        ("cue", "Elasticity", 0): _u(0.95, 0.02, w, lo=0.5, hi=1.0),
        ("cue", "Controlled", 0): ConstantPrior(True),
        ("balls", "Mass", 0): _u(1.0, 0.08, w, lo=0.2),
        ("balls", "Radius", 0): ConstantPrior(0.035),
        ("balls", "Elasticity", 0): _u(0.95, 0.02, w, lo=0.5, hi=1.0),
    })
    return TaskTemplate(
        name="billiards",
        slots=slots,
        priors=priors,
        reward="billiards",
        max_force=2.0,
    )


def builtin_template(task: str, difficulty: str = "easy") -> TaskTemplate:
    if task not in BUILTIN_TASKS:
        raise SegarError(
            f"unknown task {task!r} (have: {', '.join(BUILTIN_TASKS)})")
    if difficulty not in DIFFICULTIES:
        raise SegarError(
            f"unknown difficulty {difficulty!r} (have: {', '.join(DIFFICULTIES)})")
    w = DIFFICULTIES[difficulty]
    if task == "puttputt":
        t = _puttputt(w)
    elif task == "invisiball":
        t = _puttputt(w, blind=True)
    else:
        t = _billiards(w)
    t.name = f"{t.name}-{difficulty}"
    return t
