"""Gym-style environment class over the handle layer.

`make("Segar-puttputt-v1")` gives an object with the familiar
reset/step/render/close lifecycle plus observation/action space
descriptors.  The class owns exactly one handle; everything semantic
happens in the engine.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .core import (
    BindingError,
    bind_close,
    bind_open,
    bind_render,
    bind_reset,
    bind_step,
    handle_info,
    _session,
)

_ID_RE = re.compile(r"^Segar-(?P<task>[A-Za-z0-9_]+(?:-[A-Za-z0-9_]+)*)-v1$")


@dataclass(frozen=True)
class SpaceSpec:
    """Shape/dtype/bounds descriptor, enough to size buffers and clip."""

    shape: tuple
    dtype: str
    low: Optional[float] = None
    high: Optional[float] = None


def _space_of(obs: Any) -> Any:
    if isinstance(obs, dict):
        return {k: _space_of(v) for k, v in obs.items()}
    arr = np.asarray(obs)
    if arr.dtype == np.uint8:
        return SpaceSpec(tuple(arr.shape), "uint8", 0.0, 255.0)
    return SpaceSpec(tuple(arr.shape), str(arr.dtype))


class SegarEnv:
    """One episode stream with the reset/step/render/close protocol.

    `step` returns the classic 4-tuple (observation, reward, done, info);
    info always carries the full state vector under "state".  Note the
    observation shape may shrink mid-episode for templates that hide the
    controlled body's position — `observation_space` describes the reset-
    time observation and `handle.last_obs_shape` tracks the latest one.
    """

    metadata = {"render_modes": ["rgb_array"]}

    def __init__(self, env_id: str, template_spec, seed: int = 0,
                 observation_mode: Optional[str] = None,
                 resolution: Optional[int] = None):
        self.id = env_id
        self._handle = bind_open(template_spec, seed=seed,
                                 observation_mode=observation_mode,
                                 resolution=resolution)
        episode = _session(self._handle).episode
        self.action_space = SpaceSpec((2,), "float64",
                                      -episode.max_force, episode.max_force)
        self.observation_space = _space_of(episode.observe())

    @property
    def handle(self):
        return handle_info(self._handle)

    def reset(self, seed: Optional[int] = None):
        return bind_reset(self._handle, seed)

    def step(self, action):
        return bind_step(self._handle, action)

    def render(self, resolution: Optional[int] = None) -> np.ndarray:
        return bind_render(self._handle, resolution)

    def close(self) -> None:
        bind_close(self._handle)

    def __enter__(self) -> "SegarEnv":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __repr__(self) -> str:
        info = handle_info(self._handle)
        state = "open" if info.open else "closed"
        return f"SegarEnv({self.id!r}, handle={self._handle}, {state})"


def make(env_id: str, template_path: Optional[str] = None, seed: int = 0,
         observation_mode: Optional[str] = None,
         resolution: Optional[int] = None) -> SegarEnv:
    """Build an environment from an id like "Segar-puttputt-v1".

    The id's middle names a builtin task, optionally with a difficulty
    ("Segar-billiards-medium-v1").  `template_path` overrides the task
    with a template JSON file; the id then only labels the session.
    """
    m = _ID_RE.match(env_id)
    if m is None:
        raise BindingError(
            f"bad environment id {env_id!r}: expected \"Segar-<task>-v1\"")
    spec = template_path if template_path is not None else m.group("task")
    return SegarEnv(env_id, spec, seed=seed,
                    observation_mode=observation_mode, resolution=resolution)
