"""Episodes: a sampled task compiled into a steppable decision process.

Actions are force impulses on the controlled body.  Observations follow
the template's observation spec: "full-state" is the whole flattened
vector, "partial-state" keeps only the observable factors' slots,
"pixels" renders, "multimodal" returns both.  Tasks that play blind drop
the controlled body's position slots from step 1 on.  The info channel
always carries the full ground-truth vector.
"""

from __future__ import annotations

import math
from typing import Any, Optional, Sequence

import numpy as np

from .factors import (
    CONTROLLED, ELASTICITY, GOAL_FLAG, HOLE_FLAG, MASS, POSITION, RADIUS,
    VELOCITY, Entity, SegarError, SimState, StateLayout, builtin_factors,
    flatten_state,
)
from .physics import resolve_collisions, standard_rules
from .rules import Rule, group_phases, run_phases
from .tasks import TaskInstance, sample_task

__all__ = [
    "EpisodeError",
    "Simulator",
    "Episode",
    "make_episode",
    "compute_reward",
]


class EpisodeError(SegarError):
    """Episode misuse (stepping a finished episode) or a malformed task."""


class Simulator:
    """One state plus its rules, with structural matching done once.

    Bindings and collision rosters depend only on entity types, which are
    fixed for an episode's lifetime, so they are cached at construction.
    """

    def __init__(self, state: SimState, rules: Sequence[Rule]):
        self.state = state
        self.rules = list(rules)
        self._phased = group_phases(state, self.rules)
        collider = frozenset({POSITION, VELOCITY, MASS, RADIUS, ELASTICITY})
        self._bodies = [e for e in state.entities
                        if e.etype.basis_set.issuperset(collider)]
        self._holes = [e for e in state.entities if HOLE_FLAG in e.etype.basis_set]

    def _collide(self, state: SimState) -> None:
        resolve_collisions(state, bodies=self._bodies, holes=self._holes)

    def step(self) -> None:
        run_phases(self.state, self._phased, self._collide)


# ---------------------------------------------------------------------------
# Reward
# ---------------------------------------------------------------------------

def _center_in_hole(e: Entity, holes: Sequence[Entity]) -> bool:
    px, py = e.values[POSITION]
    for h in holes:
        hx, hy = h.values[POSITION]
        r = h.values[RADIUS]
        if (px - hx) ** 2 + (py - hy) ** 2 <= r * r:
            return True
    return False


def _controlled_of(state: SimState) -> Optional[Entity]:
    found = [e for e in state.entities
             if CONTROLLED in e.etype.basis_set and e.values[CONTROLLED]]
    if len(found) > 1:
        raise EpisodeError(f"{len(found)} controlled entities; expected at most one")
    return found[0] if found else None


def _sunk_ids(state: SimState, exclude_id: Optional[int]) -> set[int]:
    holes = [e for e in state.entities if HOLE_FLAG in e.etype.basis_set]
    out = set()
    for e in state.entities:
        if VELOCITY not in e.etype.basis_set or e.id == exclude_id:
            continue
        if _center_in_hole(e, holes):
            out.add(e.id)
    return out


def compute_reward(kind: str, prev_state: SimState, action,
                   next_state: SimState) -> tuple[float, bool]:
    """Pure (reward, terminal) from a transition; replayable from logs.

    Goal-seeking tasks pay +1 on reaching the goal circle, -0.01 per other
    step.  Pocketing tasks pay +1 per body newly in a hole minus the step
    cost, lose outright (-1, terminal) when the controlled body sinks, and
    end when every loose body is pocketed.
    """
    if kind == "none":
        return 0.0, False
    if kind == "puttputt":
        ball = _controlled_of(next_state)
        if ball is None:
            raise EpisodeError("goal reward needs a controlled entity")
        goal = next((e for e in next_state.entities
                     if GOAL_FLAG in e.etype.basis_set), None)
        if goal is None:
            raise EpisodeError("goal reward needs a goal tile")
        bx, by = ball.values[POSITION]
        gx, gy = goal.values[POSITION]
        if math.hypot(bx - gx, by - gy) <= goal.values[RADIUS]:
            return 1.0, True
        return -0.01, False
    if kind == "billiards":
        cue = _controlled_of(next_state)
        if cue is None:
            raise EpisodeError("pocketing reward needs a controlled entity")
        holes = [e for e in next_state.entities if HOLE_FLAG in e.etype.basis_set]
        if _center_in_hole(cue, holes):
            return -1.0, True
        before = _sunk_ids(prev_state, cue.id)
        after = _sunk_ids(next_state, cue.id)
        newly = len(after - before)
        loose = [e for e in next_state.entities
                 if VELOCITY in e.etype.basis_set and e.id != cue.id]
        all_sunk = bool(loose) and len(after) == len(loose)
        return float(newly) - 0.01, all_sunk
    raise EpisodeError(f"unknown reward kind {kind!r}")


# ---------------------------------------------------------------------------
# Episode
# ---------------------------------------------------------------------------

def _observable_set(spec_value: Any) -> Optional[frozenset]:
    if spec_value == "all":
        return None
    return frozenset(builtin_factors.get(name) for name in spec_value)


class Episode:
    """Gym-flavoured loop over one template's tasks.

    reset() rebuilds the current instance's initial state; reset(seed=s)
    first draws a fresh task from the template at that seed.  step returns
    (obs, reward, done, info); done covers terminals and the step cap,
    info["truncated"] tells them apart.  Stepping after done raises.
    """

    def __init__(self, instance: TaskInstance, max_steps: Optional[int] = None):
        self.instance = instance
        self.template = instance.template
        self.max_steps = int(max_steps if max_steps is not None
                             else self.template.max_steps)
        obs = self.template.observation
        self.obs_mode = obs["mode"]
        self.observable = _observable_set(obs["observable"])
        self.renderer_seed = int(obs["renderer_seed"])
        self.resolution = int(obs["resolution"])
        self.hide_after = obs["hide_controlled_position_after"]
        self.max_force = self.template.max_force
        self.reward_kind = self.template.reward
        self.state: Optional[SimState] = None
        self.done = True
        self.t = 0
        self.total_return = 0.0
        self.reset()

    # -- lifecycle ------------------------------------------------------------

    def reset(self, seed: Optional[int] = None):
        if seed is not None:
            self.instance = sample_task(self.template, seed)
        self.state = self.instance.to_state()
        self.sim = Simulator(self.state, standard_rules(self.template.rules))
        self.t = 0
        self.done = False
        self.total_return = 0.0
        _, self._full_layout = flatten_state(self.state)
        self._controlled = _controlled_of(self.state)
        self._goal = next((e for e in self.state.entities
                           if GOAL_FLAG in e.etype.basis_set), None)
        self._holes = [e for e in self.state.entities
                       if HOLE_FLAG in e.etype.basis_set]
        self._loose = [e for e in self.state.entities
                       if VELOCITY in e.etype.basis_set
                       and e is not self._controlled]
        if self.reward_kind in ("puttputt", "billiards") and self._controlled is None:
            raise EpisodeError(
                f"reward {self.reward_kind!r} needs exactly one controlled entity")
        if self.reward_kind == "puttputt" and self._goal is None:
            raise EpisodeError("goal-seeking reward needs a goal tile")
        self._obs_idx_full = self._select_indices(hide_controlled=False)
        self._obs_idx_hidden = self._select_indices(hide_controlled=True)
        return self.observe()

    def _select_indices(self, hide_controlled: bool) -> np.ndarray:
        keep = []
        cid = self._controlled.id if self._controlled is not None else None
        for i, (eid, _tname, ft, _comp) in enumerate(self._full_layout.slots):
            if self.observable is not None and ft not in self.observable:
                continue
            if hide_controlled and eid == cid and ft is POSITION:
                continue
            keep.append(i)
        return np.asarray(keep, dtype=np.intp)

    # -- observations -----------------------------------------------------------

    def _hidden_now(self) -> bool:
        return self.hide_after is not None and self.t >= self.hide_after

    def _select(self, full: np.ndarray) -> np.ndarray:
        idx = self._obs_idx_hidden if self._hidden_now() else self._obs_idx_full
        return full[idx]

    def _obs_from_full(self, full: np.ndarray):
        if self.obs_mode == "pixels":
            return self.render()
        if self.obs_mode == "multimodal":
            return {"state": self._select(full), "pixels": self.render()}
        return self._select(full)

    def observe(self):
        full, _ = flatten_state(self.state, self._full_layout)
        return self._obs_from_full(full)

    def observation_layout(self) -> list[dict]:
        """What each element of the current state observation means."""
        idx = self._obs_idx_hidden if self._hidden_now() else self._obs_idx_full
        slots = self._full_layout.slots
        return [
            {"entity": slots[i][0], "type": slots[i][1],
             "factor": slots[i][2].name, "component": slots[i][3]}
            for i in idx
        ]

    def render(self, resolution: Optional[int] = None) -> np.ndarray:
        from .rendering import render
        return render(self.state, self.renderer_seed,
                      resolution if resolution is not None else self.resolution,
                      self.observable)

    # -- dynamics ----------------------------------------------------------------

    def _apply_action(self, action) -> None:
        ax, ay = float(action[0]), float(action[1])
        if not (math.isfinite(ax) and math.isfinite(ay)):
            raise EpisodeError(f"non-finite action ({ax}, {ay})")
        if self._controlled is None:
            return
        norm = math.hypot(ax, ay)
        if norm > self.max_force and norm > 0.0:
            scale = self.max_force / norm
            ax *= scale
            ay *= scale
        m = self._controlled.values[MASS]
        vx, vy = self._controlled.values[VELOCITY]
        self._controlled.values[VELOCITY] = (vx + ax / m, vy + ay / m)

    def _reward_fast(self, sunk_before: Optional[set[int]]) -> tuple[float, bool]:
        """Same arithmetic as compute_reward, without copying states."""
        kind = self.reward_kind
        if kind == "puttputt":
            bx, by = self._controlled.values[POSITION]
            gx, gy = self._goal.values[POSITION]
            if math.hypot(bx - gx, by - gy) <= self._goal.values[RADIUS]:
                return 1.0, True
            return -0.01, False
        if kind == "billiards":
            if _center_in_hole(self._controlled, self._holes):
                return -1.0, True
            after = {e.id for e in self._loose if _center_in_hole(e, self._holes)}
            newly = len(after - sunk_before)
            all_sunk = bool(self._loose) and len(after) == len(self._loose)
            return float(newly) - 0.01, all_sunk
        return 0.0, False

    def step(self, action) -> tuple[Any, float, bool, dict]:
        if self.done:
            raise EpisodeError("step() on a finished episode; call reset()")
        sunk_before = None
        if self.reward_kind == "billiards":
            sunk_before = {e.id for e in self._loose
                           if _center_in_hole(e, self._holes)}
        self._apply_action(action)
        self.sim.step()
        self.t += 1
        reward, terminal = self._reward_fast(sunk_before)
        truncated = not terminal and self.t >= self.max_steps
        self.done = terminal or truncated
        self.total_return += reward
        full, _ = flatten_state(self.state, self._full_layout)
        obs = self._obs_from_full(full)
        info = {"t": self.t, "state": full, "truncated": truncated,
                "terminal": terminal}
        return obs, reward, self.done, info


def make_episode(instance: TaskInstance, max_steps: Optional[int] = None) -> Episode:
    return Episode(instance, max_steps=max_steps)
