"""Distances between task sets: exact optimal transport and KS statistics.

The Wasserstein-2 distance between two equally sized point sets reduces to
a minimum-cost perfect matching on squared Euclidean costs, solved exactly
by a shortest-augmenting-path assignment solver that also yields dual
potentials.  The duals matter: every optimal assignment is a perfect
matching of the zero-reduced-cost ("tight") graph, which is how ties are
broken toward the lexicographically smallest permutation.  Unequal sizes
fall back to the exact transport LP over uniform marginals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .factors import LayoutError, builtin_factors
from .tasks import Prior, TaskSet, TaskTemplate

__all__ = [
    "assignment_solve",
    "wasserstein2",
    "transport_plan",
    "TransportPlan",
    "ks_statistic",
    "ks_two_sample",
    "task_set_report",
    "MAX_W2_POINTS",
]

MAX_W2_POINTS = 512


# ---------------------------------------------------------------------------
# Assignment
# ---------------------------------------------------------------------------

def _jv_square(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shortest-augmenting-path assignment with potentials (1-indexed core).

    Returns (row_to_col, u, v) where u, v are feasible dual potentials:
    u[i] + v[j] <= a[i, j] everywhere, with equality on matched edges.
    """
    n = a.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.intp)      # p[j] = row matched to column j
    way = np.zeros(n + 1, dtype=np.intp)
    cost = np.zeros((n + 1, n + 1))
    cost[1:, 1:] = a
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            cur = cost[i0] - u[i0] - v
            better = (cur < minv) & ~used
            minv[better] = cur[better]
            way[better] = j0
            masked = np.where(used, inf, minv)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = np.empty(n, dtype=np.intp)
    for j in range(1, n + 1):
        row_to_col[p[j] - 1] = j - 1
    return row_to_col, u[1:], v[1:]


def _augment(start: int, adj: Sequence[Sequence[int]], match_row: list,
             match_col: list, banned_rows: list, banned_cols: list) -> bool:
    """BFS augmenting path from unmatched row `start`; flips it in if found."""
    parent: dict[int, int] = {}
    frontier = [start]
    while frontier:
        nxt = []
        for r in frontier:
            for c in adj[r]:
                if banned_cols[c] or c in parent:
                    continue
                parent[c] = r
                owner = match_col[c]
                if owner == -1:
                    while True:
                        r2 = parent[c]
                        prev = match_row[r2]
                        match_col[c] = r2
                        match_row[r2] = c
                        if r2 == start:
                            return True
                        c = prev
                elif not banned_rows[owner]:
                    nxt.append(owner)
        frontier = nxt
    return False


def _lex_smallest_optimal(a: np.ndarray, row_to_col: np.ndarray,
                          u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Lexicographically smallest permutation among all optimal assignments.

    By complementary slackness the optimal assignments are exactly the
    perfect matchings of the tight graph (reduced cost ~ 0), so greedily
    pick the smallest feasible column per row, checking feasibility with
    one augmenting search against the maintained matching.
    """
    n = a.shape[0]
    scale = float(np.abs(a).max()) if a.size else 1.0
    tol = 1e-9 * max(1.0, scale)
    rc = a - u[:, None] - v[None, :]
    adj = [np.nonzero(rc[i] <= tol)[0].tolist() for i in range(n)]
    for i in range(n):
        if int(row_to_col[i]) not in adj[i]:   # fp guard: keep matched edges
            adj[i].append(int(row_to_col[i]))
            adj[i].sort()
    match_row = [int(c) for c in row_to_col]
    match_col = [-1] * n
    for r, c in enumerate(match_row):
        match_col[c] = r
    banned_rows = [False] * n
    banned_cols = [False] * n
    for i in range(n):
        cur = match_row[i]
        for j in adj[i]:
            if banned_cols[j] or j > cur:
                if j > cur:
                    break
                continue
            if j == cur:
                break
            # try to steal column j for row i, rerouting its owner
            saved_row = match_row[:]
            saved_col = match_col[:]
            owner = match_col[j]
            match_row[i] = j
            match_col[j] = i
            match_col[cur] = -1
            match_row[owner] = -1
            banned_rows[i] = True
            banned_cols[j] = True
            if _augment(owner, adj, match_row, match_col,
                        banned_rows, banned_cols):
                break
            match_row[:] = saved_row
            match_col[:] = saved_col
            banned_rows[i] = False
            banned_cols[j] = False
        banned_rows[i] = True
        banned_cols[match_row[i]] = True
    return np.asarray(match_row, dtype=np.intp)


def assignment_solve(cost_matrix) -> tuple[np.ndarray, float]:
    """Exact minimum-cost assignment on a square matrix.

    Returns (perm, total) with perm[i] the column given to row i and total
    the matched cost.  Among equal-cost optima the lexicographically
    smallest permutation wins.
    """
    a = np.asarray(cost_matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(
            f"assignment_solve needs a square cost matrix, got shape {a.shape}")
    n = a.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.intp), 0.0
    if not np.isfinite(a).all():
        raise ValueError("assignment_solve: cost matrix has non-finite entries")
    row_to_col, u, v = _jv_square(a)
    perm = _lex_smallest_optimal(a, row_to_col, u, v)
    total = float(a[np.arange(n), perm].sum())
    return perm, total


# ---------------------------------------------------------------------------
# Wasserstein-2
# ---------------------------------------------------------------------------

@dataclass
class TransportPlan:
    """An optimal coupling between two uniform empirical measures."""
    coupling: np.ndarray     # (n, m), entries sum to 1
    cost: float              # W2 value (square root of transport cost)


def _as_points(x, name: str) -> tuple[np.ndarray, Optional[str]]:
    if isinstance(x, TaskSet):
        return np.asarray(x.matrix, dtype=np.float64), x.layout.signature()
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"{name}: expected an (n, d) point array, got {a.shape}")
    return a, None


def _prepare_pair(A, B, normalize: bool) -> tuple[np.ndarray, np.ndarray]:
    a, sig_a = _as_points(A, "A")
    b, sig_b = _as_points(B, "B")
    if sig_a is not None and sig_b is not None and sig_a != sig_b:
        raise LayoutError("task sets have different layouts; "
                          "W2 over mismatched factor spaces is undefined")
    if a.shape[1] != b.shape[1]:
        raise LayoutError(
            f"dimension mismatch: {a.shape[1]} vs {b.shape[1]} columns")
    if a.shape[0] == 0 or b.shape[0] == 0:
        if a.shape[0] == b.shape[0]:
            return a, b
        raise ValueError("cannot transport between an empty and non-empty set")
    if max(a.shape[0], b.shape[0]) > MAX_W2_POINTS:
        raise ValueError(
            f"point sets above {MAX_W2_POINTS} rows are refused "
            f"(got {a.shape[0]} and {b.shape[0]}); subsample first")
    if normalize:
        pooled = np.vstack([a, b])
        mu = pooled.mean(axis=0)
        sd = pooled.std(axis=0)
        sd[sd < 1e-12] = 1.0
        a = (a - mu) / sd
        b = (b - mu) / sd
    return a, b


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _solve_lp(d2: np.ndarray) -> np.ndarray:
    from scipy import sparse
    from scipy.optimize import linprog

    n, m = d2.shape
    idx = np.arange(n * m)
    rows = np.concatenate([idx // m, n + idx % m])
    cols = np.concatenate([idx, idx])
    a_eq = sparse.csr_matrix((np.ones(2 * n * m), (rows, cols)),
                             shape=(n + m, n * m))
    b_eq = np.concatenate([np.full(n, 1.0 / n), np.full(m, 1.0 / m)])
    res = linprog(d2.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs")
    if not res.success:
        raise ValueError(f"transport LP failed: {res.message}")
    return res.x.reshape(n, m)


def wasserstein2(A, B, normalize: bool = False) -> float:
    """Exact W2 between two point sets under uniform weights.

    Equal sizes go through assignment (min-cost perfect matching); unequal
    sizes through the transport LP.  Accepts TaskSets or (n, d) arrays;
    TaskSets must share a layout.  `normalize` z-scores each dimension
    with pooled A∪B statistics (population variance) before measuring.
    """
    a, b = _prepare_pair(A, B, normalize)
    n, m = a.shape[0], b.shape[0]
    if n == 0 and m == 0:
        return 0.0
    d2 = _sq_dists(a, b)
    if n == m:
        _, total = assignment_solve(d2)
        return math.sqrt(max(total / n, 0.0))
    coupling = _solve_lp(d2)
    return math.sqrt(max(float((coupling * d2).sum()), 0.0))


def transport_plan(A, B, normalize: bool = False) -> TransportPlan:
    """The coupling behind wasserstein2: rows sum to 1/n, columns to 1/m."""
    a, b = _prepare_pair(A, B, normalize)
    n, m = a.shape[0], b.shape[0]
    if n == 0 and m == 0:
        return TransportPlan(np.zeros((0, 0)), 0.0)
    d2 = _sq_dists(a, b)
    if n == m:
        perm, total = assignment_solve(d2)
        coupling = np.zeros((n, n))
        coupling[np.arange(n), perm] = 1.0 / n
        return TransportPlan(coupling, math.sqrt(max(total / n, 0.0)))
    coupling = _solve_lp(d2)
    return TransportPlan(coupling,
                         math.sqrt(max(float((coupling * d2).sum()), 0.0)))


# ---------------------------------------------------------------------------
# Kolmogorov–Smirnov
# ---------------------------------------------------------------------------

def ks_statistic(samples, prior: Prior) -> float:
    """One-sample KS distance between an empirical sample and a prior.

    D = max_i max(|i/n - F(x_(i))|, |(i-1)/n - F(x_(i))|) over the sorted
    sample — the exact sup over the whole line, both step sides included.
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n == 0:
        raise ValueError("ks_statistic needs at least one sample")
    if not prior.continuous:
        raise ValueError(
            f"ks_statistic needs a continuous prior, got {prior.kind}")
    f = np.array([prior.cdf(float(v)) for v in x])
    i = np.arange(1, n + 1, dtype=np.float64)
    d = np.maximum(np.abs(i / n - f), np.abs((i - 1.0) / n - f))
    return float(d.max())


def ks_two_sample(a, b) -> float:
    """Two-sample KS distance: sup |F_a - F_b| over the pooled points."""
    xa = np.sort(np.asarray(a, dtype=np.float64))
    xb = np.sort(np.asarray(b, dtype=np.float64))
    if xa.size == 0 or xb.size == 0:
        raise ValueError("ks_two_sample needs non-empty samples on both sides")
    pooled = np.concatenate([xa, xb])
    fa = np.searchsorted(xa, pooled, side="right") / xa.size
    fb = np.searchsorted(xb, pooled, side="right") / xb.size
    return float(np.abs(fa - fb).max())


# ---------------------------------------------------------------------------
# Task-set report
# ---------------------------------------------------------------------------

_COMP_SUFFIX = {0: "x", 1: "y"}


def _factor_columns(ts: TaskSet, slot_name: str, factor_name: str,
                    comp: int) -> list[int]:
    slot_of = ts.instances[0].slot_of
    return [i for i, (eid, _tname, ft, c) in enumerate(ts.layout.slots)
            if ft.name == factor_name and c == comp
            and slot_of.get(eid) == slot_name]


def task_set_report(A: TaskSet, B: TaskSet,
                    template: Optional[TaskTemplate] = None,
                    normalize: bool = False) -> dict:
    """How far apart two task sets sit, and how faithful A is to a template.

    Per factor-component with a continuous prior: one-sample KS of A's
    pooled values against the template prior, and two-sample KS of A
    against B.  Values pool across entities of the same slot (they share
    the marginal).  Plus the W2 between the full sets and the template's
    total entropy.  `template` defaults to the one A was sampled from;
    pass it explicitly to score A against a different reference prior.
    """
    if template is None:
        if not A.instances:
            raise ValueError("task_set_report needs a template when set A is empty")
        template = A.instances[0].template
    w2 = wasserstein2(A, B, normalize=normalize)
    entries = []
    empty = not A.instances or not B.instances
    for (slot_name, factor_name, comp) in () if empty else sorted(template.priors):
        prior = template.priors[(slot_name, factor_name, comp)]
        if not prior.continuous:
            continue
        cols = _factor_columns(A, slot_name, factor_name, comp)
        if not cols:
            continue
        ft = builtin_factors.get(factor_name)
        label = f"{slot_name}.{factor_name}"
        if ft.kind.width > 1:
            label += f".{_COMP_SUFFIX.get(comp, comp)}"
        vals_a = A.matrix[:, cols].ravel()
        vals_b = B.matrix[:, cols].ravel()
        entries.append({
            "factor": label,
            "d_one_sample": ks_statistic(vals_a, prior),
            "d_two_sample": ks_two_sample(vals_a, vals_b),
        })
    return {
        "w2": w2,
        "per_factor_ks": entries,
        "entropy": template.entropy(),
        "n_a": int(A.matrix.shape[0]),
        "n_b": int(B.matrix.shape[0]),
        "normalized": bool(normalize),
    }
