"""Subprocess transport: drive the engine through its CLI in a child
process and read the trajectory back as JSON.

The isolation fallback for hosts that must not load the engine
in-process, and the harness behind the cross-process parity checks.
Only the primary package's public command-line surface is touched.
"""

from __future__ import annotations

import json
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .core import BindingError


@dataclass(frozen=True)
class CliRollout:
    """One scripted episode as the CLI logged it."""

    task_seed: int          # the sampled instance's own seed
    records: list           # per-step dicts: t, action, reward, done, digests
    rewards: list           # convenience: records' reward column
    episode_return: float   # from returns.json


def _run(argv: Sequence[str], cwd: Path) -> None:
    proc = subprocess.run([sys.executable, "-m", "segar.cli", *argv],
                          cwd=cwd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise BindingError(
            f"engine CLI failed ({' '.join(argv[:2])}): {proc.stderr.strip()}")


def cli_rollout(template_spec: str, archive_seed: int,
                actions: Sequence[Sequence[float]],
                workdir: Optional[Path] = None) -> CliRollout:
    """Sample one task and roll it out with a scripted action list.

    The child process runs `sample` then `rollout --policy <file>`; the
    episode pads with (0, 0) after the script runs out, exactly like the
    CLI does for every scripted run.
    """
    ctx = (tempfile.TemporaryDirectory() if workdir is None else None)
    root = Path(ctx.name) if ctx is not None else Path(workdir)
    try:
        arch = root / "archive"
        roll = root / "rollout"
        _run(["sample", template_spec, "-n", "1", "--seed", str(archive_seed),
              "--out", str(arch)], cwd=root)
        script = root / "actions.json"
        script.write_text(json.dumps([[float(a[0]), float(a[1])]
                                      for a in actions]), encoding="utf-8")
        _run(["rollout", str(arch), "--policy", str(script),
              "--episodes", "1", "--seed", "0", "--out", str(roll)], cwd=root)
        instances = json.loads((arch / "instances.json").read_text("utf-8"))
        task_seed = int(instances["instances"][0]["seed"])
        lines = (roll / "trajectories" / "ep_00000.ndjson").read_text("utf-8")
        records = [json.loads(line) for line in lines.splitlines() if line]
        returns = json.loads((roll / "returns.json").read_text("utf-8"))
        return CliRollout(task_seed=task_seed, records=records,
                          rewards=[r["reward"] for r in records],
                          episode_return=float(returns["returns"][0]))
    finally:
        if ctx is not None:
            ctx.cleanup()
