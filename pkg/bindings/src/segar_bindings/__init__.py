"""Environment-protocol bindings for the segar sandbox.

Two layers, both marshaling-only (all computation happens in the
engine):

- a flat handle API — `bind_open` / `bind_reset` / `bind_step` /
  `bind_render` / `bind_close` over integer handles, every array copied
  at the boundary;
- `make("Segar-<task>-v1")` returning a Gym-style `SegarEnv` with
  reset/step/render/close and space descriptors.

`subproc.cli_rollout` drives the engine's CLI in a child process
instead, for callers that need process isolation.
"""

from .core import (
    BindingError,
    EnvHandle,
    HandleError,
    bind_close,
    bind_open,
    bind_render,
    bind_reset,
    bind_step,
    handle_info,
)
from .gym_env import SegarEnv, SpaceSpec, make
from .subproc import CliRollout, cli_rollout

__version__ = "0.1.0"

__all__ = [
    "BindingError", "EnvHandle", "HandleError",
    "bind_close", "bind_open", "bind_render", "bind_reset", "bind_step",
    "handle_info",
    "SegarEnv", "SpaceSpec", "make",
    "CliRollout", "cli_rollout",
    "__version__",
]
