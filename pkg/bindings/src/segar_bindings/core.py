"""Handle-based calling layer over the segar engine.

Flat functions over integer handles, mirroring a foreign-function
boundary: open a session, drive it with reset/step/render, close it.
Everything crossing the boundary is copied — callers can mutate what
they receive without aliasing engine state — and nothing numeric is
computed on this side; observations, rewards, and images are marshaled
verbatim from the engine.

One handle owns one episode stream and belongs to the thread that
opened it; any use from another thread, or after close, fails cleanly.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from segar import (
    BUILTIN_TASKS,
    DIFFICULTIES,
    Episode,
    TaskTemplate,
    builtin_template,
    load_template,
    sample_task,
)


class BindingError(Exception):
    """A problem on the binding side of the boundary."""


class HandleError(BindingError):
    """Unknown, closed, or foreign-thread handle."""


@dataclass(frozen=True)
class EnvHandle:
    """Read-only view of one session's identity and bookkeeping."""

    handle: int
    template_path: Optional[str]
    seed: int
    last_obs_shape: Any  # tuple, or dict of name -> tuple, or None
    open: bool


class _Session:
    __slots__ = ("episode", "template_path", "seed", "thread_id",
                 "last_obs_shape", "open")

    def __init__(self, episode: Episode, template_path: Optional[str],
                 seed: int):
        self.episode = episode
        self.template_path = template_path
        self.seed = seed
        self.thread_id = threading.get_ident()
        self.last_obs_shape: Any = None
        self.open = True


_lock = threading.Lock()
_sessions: dict[int, _Session] = {}
_ids = itertools.count(1)


def _resolve_template(spec: Union[str, TaskTemplate]) -> tuple[TaskTemplate, Optional[str]]:
    if isinstance(spec, TaskTemplate):
        return spec, None
    if not isinstance(spec, str):
        raise BindingError(f"template spec must be a name, a path, or a "
                           f"template object, got {type(spec).__name__}")
    if spec in BUILTIN_TASKS:
        return builtin_template(spec), None
    task, _, suffix = spec.rpartition("-")
    if task in BUILTIN_TASKS and suffix in DIFFICULTIES:
        return builtin_template(task, suffix), None
    path = Path(spec)
    if path.is_dir():
        path = path / "template.json"
    if path.exists():
        return load_template(str(path)), str(path)
    raise BindingError(
        f"template {spec!r} is neither a builtin task "
        f"({', '.join(BUILTIN_TASKS)}) nor a template file")


def _patched(template: TaskTemplate, observation_mode: Optional[str],
             resolution: Optional[int]) -> TaskTemplate:
    if observation_mode is None and resolution is None:
        return template
    doc = template.to_json()
    obs = doc["observation"]
    if observation_mode is not None:
        obs["mode"] = str(observation_mode)
    if resolution is not None:
        obs["resolution"] = int(resolution)
    return TaskTemplate.from_json(doc)


def _session(handle: int) -> _Session:
    s = _sessions.get(handle)
    if s is None:
        raise HandleError(f"unknown handle {handle}")
    if not s.open:
        raise HandleError(f"handle {handle} is closed")
    if s.thread_id != threading.get_ident():
        raise HandleError(
            f"handle {handle} belongs to another thread; handles are "
            "single-threaded")
    return s


def _shape_of(obs: Any) -> Any:
    if isinstance(obs, dict):
        return {k: tuple(v.shape) for k, v in obs.items()}
    return tuple(obs.shape)


def _copy_obs(obs: Any) -> Any:
    if isinstance(obs, dict):
        return {k: np.array(v, copy=True) for k, v in obs.items()}
    return np.array(obs, copy=True)


def bind_open(template_spec: Union[str, TaskTemplate], seed: int = 0,
              observation_mode: Optional[str] = None,
              resolution: Optional[int] = None) -> int:
    """Open a session: resolve the template, sample the task, return a handle."""
    template, path = _resolve_template(template_spec)
    template = _patched(template, observation_mode, resolution)
    episode = Episode(sample_task(template, int(seed)))
    with _lock:
        handle = next(_ids)
        _sessions[handle] = _Session(episode, path, int(seed))
    return handle


def bind_reset(handle: int, seed: Optional[int] = None) -> Any:
    """Reset the session's episode; a seed resamples the task, none replays it."""
    s = _session(handle)
    obs = s.episode.reset(seed)
    if seed is not None:
        s.seed = int(seed)
    s.last_obs_shape = _shape_of(obs)
    return _copy_obs(obs)


def bind_step(handle: int, action) -> tuple[Any, float, bool, dict]:
    """Advance one step.  The info dict always carries the true state vector."""
    s = _session(handle)
    try:
        n = len(action)
    except TypeError:
        raise BindingError("action must be a 2-vector") from None
    if n != 2:
        raise BindingError(f"action dimension mismatch: expected 2, got {n}")
    obs, reward, done, info = s.episode.step((action[0], action[1]))
    s.last_obs_shape = _shape_of(obs)
    out_info = dict(info)
    out_info["state"] = np.array(info["state"], copy=True)
    return _copy_obs(obs), float(reward), bool(done), out_info


def bind_render(handle: int, resolution: Optional[int] = None) -> np.ndarray:
    """Rasterize the current state to an H x W x 3 byte array."""
    s = _session(handle)
    return s.episode.render(resolution)


def bind_close(handle: int) -> None:
    """Close the handle.  Idempotent; later operations on it fail cleanly."""
    s = _sessions.get(handle)
    if s is None:
        raise HandleError(f"unknown handle {handle}")
    if s.open and s.thread_id != threading.get_ident():
        raise HandleError(
            f"handle {handle} belongs to another thread; handles are "
            "single-threaded")
    s.open = False


def handle_info(handle: int) -> EnvHandle:
    """The session's identity fields; works on closed (but known) handles."""
    s = _sessions.get(handle)
    if s is None:
        raise HandleError(f"unknown handle {handle}")
    return EnvHandle(handle=handle, template_path=s.template_path,
                     seed=s.seed, last_obs_shape=s.last_obs_shape,
                     open=s.open)
