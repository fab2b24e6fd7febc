"""Command-line surface: sample task sets, roll out policies, measure, render.

Archives are directories holding a template copy, the sampled instances,
the flattened matrix (little-endian float64), the layout, and exactly one
manifest.  Every byte of data output is a function of the command line;
wall-clock time appears only inside the manifest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .env import Episode
from .factors import SegarError, StateLayout, builtin_factors
from .metrics import task_set_report
from .presets import BUILTIN_TASKS, DIFFICULTIES, builtin_template
from .rendering import render
from .tasks import (
    TaskInstance, TaskSet, TaskTemplate, load_template, sample_task,
    template_entropy,
)

SCHEMA_VERSION = 1
_POLICIES = ("random", "still")


class CliError(SegarError):
    """A user-facing command failure with a one-line message."""


# ---------------------------------------------------------------------------
# Small helpers
# ---------------------------------------------------------------------------

def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _digest_f64(arr: np.ndarray) -> str:
    a = np.ascontiguousarray(arr, dtype="<f8")
    return hashlib.sha256(a.tobytes()).hexdigest()


def _digest_obs(obs) -> str:
    if isinstance(obs, dict):
        h = hashlib.sha256()
        for key in sorted(obs):
            h.update(key.encode())
            part = obs[key]
            if part.dtype == np.uint8:
                h.update(np.ascontiguousarray(part).tobytes())
            else:
                h.update(np.ascontiguousarray(part, dtype="<f8").tobytes())
        return h.hexdigest()
    if getattr(obs, "dtype", None) == np.uint8:
        return hashlib.sha256(np.ascontiguousarray(obs).tobytes()).hexdigest()
    return _digest_f64(obs)


def _default_out(args, leaf: str) -> Path:
    if args.out:
        return Path(args.out)
    root = os.environ.get("SEGAR_DATA_DIR")
    if root:
        return Path(root) / leaf
    raise CliError("no output directory: pass --out or set SEGAR_DATA_DIR")


def _prepare_out(out: Path) -> Path:
    if out.exists():
        if not out.is_dir():
            raise CliError(f"output path {out} exists and is not a directory")
        if any(out.iterdir()) and not (out / "manifest.json").exists():
            raise CliError(
                f"refusing to write into non-empty directory {out} "
                "that has no manifest")
    else:
        out.mkdir(parents=True)
    return out


def _write_manifest(out: Path, command: str, template_path: str,
                    seeds: Sequence[int]) -> None:
    _write_json(out / "manifest.json", {
        "command": command,
        "template_path": template_path,
        "seeds": list(int(s) for s in seeds),
        "output_dir": str(out),
        "engine_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "wall_clock": datetime.now(timezone.utc).isoformat(),
    })


def _resolve_template(spec: str, difficulty: str) -> TaskTemplate:
    if spec in BUILTIN_TASKS:
        return builtin_template(spec, difficulty)
    task, _, suffix = spec.rpartition("-")
    if task in BUILTIN_TASKS and suffix in DIFFICULTIES:
        # combined "task-difficulty" names pin their own difficulty
        return builtin_template(task, suffix)
    path = Path(spec)
    if path.is_dir():
        path = path / "template.json"
    if not path.exists():
        raise CliError(
            f"template {spec!r} is neither a builtin task "
            f"({', '.join(BUILTIN_TASKS)}) nor a file")
    return load_template(str(path))


def load_archive(path: str | Path) -> TaskSet:
    """Read a task-set archive directory back into a TaskSet."""
    root = Path(path)
    if not root.is_dir():
        raise CliError(f"archive {root} is not a directory")
    for name in ("template.json", "instances.json", "layout.json", "matrix.bin"):
        if not (root / name).exists():
            raise CliError(f"archive {root} is missing {name}")
    template = load_template(str(root / "template.json"))
    layout = StateLayout.from_json(
        json.loads((root / "layout.json").read_text(encoding="utf-8")),
        builtin_factors)
    data = json.loads((root / "instances.json").read_text(encoding="utf-8"))
    instances = [TaskInstance.from_json(rec, template)
                 for rec in data["instances"]]
    raw = np.fromfile(root / "matrix.bin", dtype="<f8")
    n, d = len(instances), layout.width
    if raw.size != n * d:
        raise CliError(
            f"archive {root}: matrix.bin holds {raw.size} values, "
            f"expected {n}x{d}")
    return TaskSet(instances, raw.reshape(n, d).astype(np.float64), layout,
                   template.name)


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------

def cmd_sample(args) -> int:
    template = _resolve_template(args.template, args.difficulty)
    out = _prepare_out(_default_out(args, f"{template.name}-s{args.seed}"))
    seed_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(args.seed, spawn_key=(0,))))
    seeds = [int(s) for s in seed_rng.integers(0, 2**63, size=args.count)]
    instances = [sample_task(template, s) for s in seeds]
    if instances:
        flats = [inst.flat() for inst in instances]
        layout = flats[0][1]
        sig = layout.signature()
        for inst, (_, lay) in zip(instances[1:], flats[1:]):
            if lay.signature() != sig:
                raise CliError(
                    f"seed {inst.seed} produced a different layout; archives "
                    "need degenerate count priors")
        matrix = np.vstack([v for v, _ in flats])
    else:
        # probe instance fixes the layout for an empty archive
        _, layout = sample_task(template, args.seed).flat()
        matrix = np.zeros((0, layout.width))
    save_path = out / "template.json"
    _write_json(save_path, template.to_json())
    _write_json(out / "instances.json", {
        "schema": SCHEMA_VERSION,
        "template": template.name,
        "seeds": seeds,
        "instances": [inst.to_json() for inst in instances],
    })
    _write_json(out / "layout.json", layout.to_json())
    (out / "matrix.bin").write_bytes(
        np.ascontiguousarray(matrix, dtype="<f8").tobytes())
    _write_manifest(out, "sample", args.template, seeds)
    print(f"wrote {len(instances)} tasks to {out}")
    return 0


# ---------------------------------------------------------------------------
# rollout
# ---------------------------------------------------------------------------

def _episode_seed(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(seed, spawn_key=(2, index))))


def _load_scripted(path: str) -> list[tuple[float, float]]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"scripted policy {path}: {exc}") from None
    if not isinstance(data, list):
        raise CliError(f"scripted policy {path}: expected a JSON list of "
                       "[fx, fy] pairs")
    actions = []
    for i, rec in enumerate(data):
        if not (isinstance(rec, (list, tuple)) and len(rec) == 2):
            raise CliError(f"scripted policy {path}: entry {i} is not a pair")
        actions.append((float(rec[0]), float(rec[1])))
    return actions


def _run_episode(instance: TaskInstance, policy: str,
                 scripted: Optional[list], seed: int, index: int,
                 traj_path: Path) -> float:
    ep = Episode(instance)
    rng = _episode_seed(seed, index) if policy == "random" else None
    fmax = ep.max_force
    lines = []
    total = 0.0
    t = 0
    while not ep.done:
        if policy == "still":
            action = (0.0, 0.0)
        elif policy == "random":
            action = (float(rng.uniform(-fmax, fmax)),
                      float(rng.uniform(-fmax, fmax)))
        else:
            action = scripted[t] if t < len(scripted) else (0.0, 0.0)
        obs, reward, done, info = ep.step(action)
        total += reward
        lines.append(json.dumps({
            "t": info["t"],
            "action": [action[0], action[1]],
            "reward": reward,
            "done": done,
            "obs_digest": _digest_obs(obs),
            "state_digest": _digest_f64(info["state"]),
        }, sort_keys=True))
        t += 1
    traj_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return total


_WORKER_ARCHIVE: dict[str, TaskSet] = {}


def _worker_episode(archive_path: str, task_index: int, policy: str,
                    scripted: Optional[list], seed: int, index: int,
                    traj_path: str) -> float:
    ts = _WORKER_ARCHIVE.get(archive_path)
    if ts is None:
        ts = load_archive(archive_path)
        _WORKER_ARCHIVE[archive_path] = ts
    return _run_episode(ts.instances[task_index], policy, scripted, seed,
                        index, Path(traj_path))


def cmd_rollout(args) -> int:
    archive_path = str(Path(args.archive))
    ts = load_archive(archive_path)
    if not ts.instances:
        raise CliError(f"archive {archive_path} holds no tasks to roll out")
    policy = args.policy
    scripted = None
    if policy not in _POLICIES:
        if policy.endswith(".json") or Path(policy).exists():
            scripted = _load_scripted(policy)
        else:
            raise CliError(
                f"unknown policy {policy!r}: expected one of "
                f"{', '.join(_POLICIES)} or a JSON file of force vectors")
    out = _prepare_out(_default_out(args, f"rollout-{ts.template_name}-s{args.seed}"))
    traj_dir = out / "trajectories"
    traj_dir.mkdir(exist_ok=True)
    task_rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(args.seed, spawn_key=(1,))))
    task_indices = [int(i) for i in
                    task_rng.integers(0, len(ts.instances), size=args.episodes)]
    paths = [traj_dir / f"ep_{i:05d}.ndjson" for i in range(args.episodes)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            returns = list(pool.map(
                _worker_episode,
                [archive_path] * args.episodes, task_indices,
                [policy] * args.episodes, [scripted] * args.episodes,
                [args.seed] * args.episodes, range(args.episodes),
                [str(p) for p in paths]))
    else:
        returns = [
            _run_episode(ts.instances[task_indices[i]], policy, scripted,
                         args.seed, i, paths[i])
            for i in range(args.episodes)
        ]
    _write_json(out / "returns.json", {
        "schema": SCHEMA_VERSION,
        "policy": policy,
        "seed": args.seed,
        "episodes": args.episodes,
        "task_indices": task_indices,
        "returns": returns,
    })
    _write_manifest(out, "rollout", archive_path, [args.seed])
    mean = sum(returns) / len(returns)
    print(f"wrote {args.episodes} episodes to {out} (mean return {mean:.4f})")
    return 0


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def cmd_metrics(args) -> int:
    set_a = load_archive(args.set_a)
    set_b = load_archive(args.set_b)
    if args.template:
        template = _resolve_template(args.template, args.difficulty)
    else:
        template = load_template(str(Path(args.set_a) / "template.json"))
    report = task_set_report(set_a, set_b, template, normalize=args.normalize)
    # the report itself goes to stdout; report.json only lands somewhere
    # when the caller named a destination (directly or via SEGAR_DATA_DIR)
    if args.out is not None or os.environ.get("SEGAR_DATA_DIR"):
        out = _prepare_out(_default_out(args, f"metrics-{set_a.template_name}"))
        _write_json(out / "report.json", report)
        _write_manifest(out, "metrics", args.template or str(args.set_a), [])
    if args.format == "json":
        print(json.dumps(report, sort_keys=True))
    else:
        print(f"w2 = {report['w2']:.6f}   entropy = {report['entropy']:.6f}   "
              f"n_a = {report['n_a']}   n_b = {report['n_b']}")
        for rec in report["per_factor_ks"]:
            print(f"  {rec['factor']}: one-sample D = {rec['d_one_sample']:.4f}"
                  f"   two-sample D = {rec['d_two_sample']:.4f}")
    return 0


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------

def _render_task(archive_path: str, task_index: int, renderer_seed: int,
                 resolution: int, png_path: str) -> None:
    from PIL import Image

    ts = _WORKER_ARCHIVE.get(archive_path)
    if ts is None:
        ts = load_archive(archive_path)
        _WORKER_ARCHIVE[archive_path] = ts
    inst = ts.instances[task_index]
    obs = inst.template.observation
    observable = (None if obs["observable"] == "all"
                  else frozenset(builtin_factors.get(n)
                                 for n in obs["observable"]))
    img = render(inst.to_state(), renderer_seed, resolution, observable)
    Image.fromarray(img, mode="RGB").save(png_path, format="PNG")


def cmd_render(args) -> int:
    archive_path = str(Path(args.archive))
    ts = load_archive(archive_path)
    if not ts.instances:
        raise CliError(f"archive {archive_path} holds no tasks to render")
    obs = ts.instances[0].template.observation
    renderer_seed = (args.renderer_seed if args.renderer_seed is not None
                     else int(obs["renderer_seed"]))
    resolution = (args.resolution if args.resolution is not None
                  else int(obs["resolution"]))
    out = _prepare_out(_default_out(args, f"render-{ts.template_name}-r{renderer_seed}"))
    paths = [str(out / f"task_{i:05d}.png") for i in range(len(ts.instances))]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(_render_task, [archive_path] * len(paths),
                          range(len(paths)), [renderer_seed] * len(paths),
                          [resolution] * len(paths), paths))
    else:
        for i, p in enumerate(paths):
            _render_task(archive_path, i, renderer_seed, resolution, p)
    _write_manifest(out, "render", archive_path, [renderer_seed])
    print(f"wrote {len(paths)} frames to {out}")
    return 0


# ---------------------------------------------------------------------------
# describe
# ---------------------------------------------------------------------------

def cmd_describe(args) -> int:
    template = _resolve_template(args.template, args.difficulty)
    if args.format == "json":
        doc = template.to_json()
        doc["entropy"] = template_entropy(template)
        print(json.dumps(doc, sort_keys=True))
        return 0
    print(f"template {template.name}")
    print(f"  arena [{template.arena.lo[0]}, {template.arena.hi[0]}] x "
          f"[{template.arena.lo[1]}, {template.arena.hi[1]}], dt {template.dt}, "
          f"max_steps {template.max_steps}")
    print(f"  reward {template.reward}, max_force {template.max_force}")
    print(f"  rules: {', '.join(template.rules)}")
    print(f"  physics: " + ", ".join(f"{k}={v}" for k, v in
                                     sorted(template.physics.items())))
    print(f"  observation: mode={template.observation['mode']} "
          f"resolution={template.observation['resolution']}")
    for slot in template.slots:
        print(f"  slot {slot.name} ({slot.etype.name}) count {slot.count}")
    for (slot, factor, comp) in sorted(template.priors):
        print(f"    {slot}.{factor}[{comp}] ~ {template.priors[(slot, factor, comp)]}")
    print(f"  entropy {template_entropy(template):.6f} nats")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=int, default=0,
                        help="root seed; every random draw descends from it")
    shared.add_argument("--out", type=str, default=None,
                        help="output directory (default: under SEGAR_DATA_DIR)")
    shared.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for episodes/renders")
    shared.add_argument("--format", choices=("json", "text"), default="text",
                        help="stdout format")
    shared.add_argument("--difficulty", choices=sorted(DIFFICULTIES),
                        default="easy",
                        help="difficulty for builtin template names")

    parser = argparse.ArgumentParser(
        prog="segar",
        description="sample, roll out, measure, and render task distributions")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("sample", parents=[shared],
                       help="draw tasks from a template into an archive")
    p.add_argument("template", help="builtin task name or template JSON path")
    p.add_argument("-n", "--count", type=int, default=10,
                   help="number of tasks to sample")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("rollout", parents=[shared],
                       help="run a policy over tasks from an archive")
    p.add_argument("archive", help="task-set archive directory")
    p.add_argument("--policy", default="random",
                   help="random, still, or a JSON file of [fx, fy] per step")
    p.add_argument("--episodes", type=int, default=10)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("metrics", parents=[shared],
                       help="compare two archives and write a report")
    p.add_argument("set_a", help="first archive directory")
    p.add_argument("set_b", help="second archive directory")
    p.add_argument("--template", default=None,
                   help="reference template for one-sample KS (default: A's)")
    p.add_argument("--normalize", action="store_true",
                   help="z-score dimensions with pooled statistics before W2")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("render", parents=[shared],
                       help="render every task in an archive to PNG")
    p.add_argument("archive", help="task-set archive directory")
    p.add_argument("--renderer-seed", type=int, default=None,
                   help="colour-scheme seed (default: template's)")
    p.add_argument("--resolution", type=int, default=None,
                   help="square pixel size (default: template's)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("describe", parents=[shared],
                       help="print a template's slots, priors, and entropy")
    p.add_argument("template", help="builtin task name or template JSON path")
    p.set_defaults(func=cmd_describe)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SegarError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
