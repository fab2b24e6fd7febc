"""Pixel observations generated from factor values, nothing else.

Colors are keyed by (renderer seed, factor name) through sha256, entity
paint mixes the hues of its *observable* factors and modulates saturation
by their squashed values.  Unobservable factor values provably cannot
reach any pixel: they are filtered out before painting.  Background stays
dark (max channel <= 0.35) and entities bright (>= 0.55), so silhouettes
can always be thresholded out.
"""

from __future__ import annotations

import hashlib
import math
from typing import Iterable, Optional

import numpy as np

from .factors import (
    FactorKind, POSITION, RADIUS, SimState, VELOCITY,
)

__all__ = ["render", "factor_hue"]

_BG_LOW, _BG_HIGH = 0.1, 0.35
_ENTITY_VALUE_LOW = 0.55


def _hash_unit(*parts) -> float:
    """Deterministic float in [0, 1) from the parts; never builtin hash()."""
    key = "|".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "big") / 2.0 ** 64


def factor_hue(renderer_seed: int, factor_name: str) -> float:
    return _hash_unit("hue", renderer_seed, factor_name)


def _squash(v: float) -> float:
    return abs(v) / (1.0 + abs(v))


def _scalar_summary(ft, value) -> float:
    if ft.kind is FactorKind.VEC2:
        return math.hypot(value[0], value[1])
    if ft.kind is FactorKind.BOOLEAN:
        return 1.0 if value else 0.0
    return float(value)


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized HSV -> RGB, all arrays broadcastable, output (..., 3)."""
    h = np.asarray(h, dtype=np.float64) % 1.0
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    i = np.floor(h * 6.0).astype(np.int64) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def _entity_paint(e, renderer_seed: int, observable) -> tuple[float, float, float]:
    """(h, s, v) for one entity from its observable factors only."""
    visible = [ft for ft in e.etype.basis
               if observable is None or ft in observable]
    names = sorted(ft.name for ft in visible)
    if names:
        vx = vy = 0.0
        for name in names:
            ang = 2.0 * math.pi * factor_hue(renderer_seed, name)
            vx += math.cos(ang)
            vy += math.sin(ang)
        if vx * vx + vy * vy > 1e-12:
            hue = (math.atan2(vy, vx) / (2.0 * math.pi)) % 1.0
        else:
            hue = 0.0
        sats = [_squash(_scalar_summary(ft, e.values[ft])) for ft in visible]
        sat = 0.35 + 0.6 * (sum(sats) / len(sats))
    else:
        hue, sat = 0.0, 0.0
    value = _ENTITY_VALUE_LOW + 0.4 * _hash_unit(
        "paint", renderer_seed, e.etype.name, *names)
    return hue, sat, value


def render(state: SimState, renderer_seed: int, resolution: int,
           observable: Optional[Iterable] = None) -> np.ndarray:
    """Rasterize the state to (resolution, resolution, 3) uint8.

    Tiles paint first, mobile bodies on top; within each layer ascending
    entity id.  A pixel belongs to a circle iff its center does.  Row 0 is
    the top of the arena.
    """
    if resolution <= 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    obs_set = None if observable is None else frozenset(observable)
    res = int(resolution)
    lo, hi = state.arena.lo, state.arena.hi

    # background: blocky value-noise, same for any state at this seed
    ss = np.random.SeedSequence(renderer_seed & 0xFFFFFFFF, spawn_key=(7,))
    rng = np.random.Generator(np.random.PCG64(ss))
    cell = max(1, res // 8)
    cells = res // cell + (1 if res % cell else 0)
    lattice = rng.uniform(_BG_LOW, _BG_HIGH, size=(cells, cells))
    bg_v = np.repeat(np.repeat(lattice, cell, axis=0), cell, axis=1)[:res, :res]
    bg_h = factor_hue(renderer_seed, "__background__")
    img = _hsv_to_rgb(np.full_like(bg_v, bg_h), np.full_like(bg_v, 0.15), bg_v)

    # pixel-center coordinates in arena space
    xs = lo[0] + (hi[0] - lo[0]) * (np.arange(res) + 0.5) / res
    ys = hi[1] - (hi[1] - lo[1]) * (np.arange(res) + 0.5) / res
    X, Y = np.meshgrid(xs, ys)

    drawable = [e for e in state.entities
                if POSITION in e.etype.basis_set and RADIUS in e.etype.basis_set]
    tiles = [e for e in drawable if VELOCITY not in e.etype.basis_set]
    bodies = [e for e in drawable if VELOCITY in e.etype.basis_set]
    for e in tiles + bodies:
        cx, cy = e.values[POSITION]
        r = e.values[RADIUS]
        mask = (X - cx) ** 2 + (Y - cy) ** 2 <= r * r
        if not mask.any():
            continue
        h, s, v = _entity_paint(e, renderer_seed, obs_set)
        rgb = _hsv_to_rgb(np.float64(h), np.float64(s), np.float64(v))
        img[mask] = rgb
    return (np.clip(img, 0.0, 1.0) * 255.0).round().astype(np.uint8)
