"""Optimal bipartite assignment and element-level matching.

One solver: `hungarian_max`. Chamfer matching runs it on negated costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom import DEFAULT_POINTS, chamfer, resample
from .raster import DEFAULT_THICKNESS, MATCH_GRID, GridSpec, index_iou, stroke_indices
from .scene import Element, Pose2

DEFAULT_MIN_IOU = 0.05


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...] = ()
    objective: float = 0.0

    def as_dict(self) -> dict[int, int]:
        return dict(self.pairs)


def _total(values) -> float:
    """Correctly rounded sum; totals beyond the float range saturate to +-inf."""
    values = list(values)
    try:
        return math.fsum(values)
    except OverflowError:
        return sum(float(x) for x in values)


def _exact_scores(s: np.ndarray, allowed: np.ndarray) -> list[list[int | None]]:
    """Allowed scores as integers over one common power-of-two denominator (exact)."""
    ratios = [[x.as_integer_ratio() if ok else None for x, ok in zip(row, oks)]
              for row, oks in zip(s.tolist(), allowed.tolist())]
    den = max((r[1] for row in ratios for r in row if r is not None), default=1)
    return [[None if r is None else r[0] * (den // r[1]) for r in row] for row in ratios]


def _solve_min(cost: list[list[int]]):
    """Shortest augmenting path Hungarian on a square integer matrix.

    Returns (row_to_col, u, v) with u[i] + v[j] <= cost[i][j] and equality on the
    matching. Integer costs keep every dual exact.
    """
    n = len(cost)
    big = (max(abs(c) for row in cost for c in row) + 1) * 4 * (n + 1) ** 2
    u = [0] * (n + 1)
    v = [0] * (n + 1)
    p = [0] * (n + 1)  # p[j]: row (1-based) matched to column j
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [big] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = cost[i0 - 1]
            ui = u[i0]
            delta, j1 = big, 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - ui - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta, j1 = minv[j], j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    row_to_col = [0] * n
    for j in range(1, n + 1):
        row_to_col[p[j] - 1] = j - 1
    return row_to_col, u[1:], v[1:]


def _lexicographic(cost, row_to_col, u, v, real: np.ndarray) -> list[int]:
    """Move to the optimum whose list of real pairs is lexicographically smallest.

    Every optimum is a perfect matching of the equality graph of an optimal dual, so
    rows are settled one at a time: each takes the smallest real (allowed, unpadded)
    column that still admits completion. A row left on a forbidden or padding cell is
    unmatched; it stays movable so it never blocks a column a later row could use.
    """
    n = len(cost)
    tight = [[cost[i][j] == u[i] + v[j] for j in range(n)] for i in range(n)]
    r2c = list(row_to_col)
    c2r = [0] * n
    for i, j in enumerate(r2c):
        c2r[j] = i
    fixed = [False] * n

    def reroute(row, target, seen):
        # give `row` some tight column so that `target` (a column) ends up free
        for c in range(n):
            if not tight[row][c]:
                continue
            if c == target:
                return [(row, c)]
            owner = c2r[c]
            if c == r2c[row] or fixed[owner] or owner in seen:
                continue
            seen.add(owner)
            rest = reroute(owner, target, seen)
            if rest is not None:
                return [(row, c)] + rest
        return None

    for i in range(n):
        if not real[i].any():
            continue
        matched = bool(real[i, r2c[i]])
        for j in range(n):
            if not (tight[i][j] and real[i, j]):
                continue
            if matched and j >= r2c[i]:
                break
            owner = c2r[j]
            if fixed[owner]:
                continue
            path = reroute(owner, r2c[i], {i, owner})
            if path is None:
                continue
            for row, col in [(i, j)] + path:
                r2c[row] = col
                c2r[col] = row
            break
        fixed[i] = bool(real[i, r2c[i]])
    return r2c


def hungarian_max(score) -> Assignment:
    """Maximum-score one-to-one matching of size min(rows, cols).

    Entries of -inf are forbidden and never appear in the result; when they make a
    full matching impossible, the largest number of allowed pairs wins first. Among
    optimal matchings the lexicographically smallest (row, col) pair list is returned.
    Scores are compared exactly (as rationals), not up to rounding.
    """
    s = np.asarray(score, dtype=float)
    if s.ndim != 2:
        raise ValueError("score matrix must be 2-D")
    rows, cols = s.shape
    if rows == 0 or cols == 0:
        return Assignment()
    if np.any(np.isnan(s)) or np.any(s == np.inf):
        raise ValueError("scores must be finite or -inf")
    allowed = np.isfinite(s)
    if not allowed.any():
        return Assignment()
    exact = _exact_scores(s, allowed)
    finite = [x for row in exact for x in row if x is not None]
    lo, hi = min(finite), max(finite)
    # a forbidden cell costs more than any feasible difference in total score
    penalty = (hi - lo + 1) * (min(rows, cols) + 1)
    n = max(rows, cols)
    cost = [[0] * n for _ in range(n)]
    for i in range(rows):
        for j in range(cols):
            x = exact[i][j]
            cost[i][j] = -x if x is not None else -lo + penalty
    row_to_col, u, v = _solve_min(cost)
    real = np.zeros((n, n), dtype=bool)
    real[:rows, :cols] = allowed
    r2c = _lexicographic(cost, row_to_col, u, v, real)
    pairs = tuple((i, int(j)) for i, j in enumerate(r2c[:rows]) if j < cols and allowed[i, j])
    return Assignment(pairs, _total(s[i, j] for i, j in pairs))


def hungarian_min(cost) -> Assignment:
    """Minimum-cost counterpart of `hungarian_max`; objective is the total cost."""
    c = np.asarray(cost, dtype=float)
    res = hungarian_max(-c) if c.size else Assignment()
    return Assignment(res.pairs, _total(c[i, j] for i, j in res.pairs))


def iou_matrix(prev: list[Element], curr: list[Element], motion: Pose2, thickness: float = DEFAULT_THICKNESS,
               grid: GridSpec = MATCH_GRID, fill_crossings: bool = False, curr_masks=None) -> np.ndarray:
    """IoU of motion-compensated `prev` masks against `curr` masks; -inf across classes."""
    def mask(el, pose=None):
        pts = el.geometry.array() if pose is None else pose.apply(el.geometry.array())
        fill = fill_crossings and el.geometry.closed
        return stroke_indices(pts, el.geometry.closed, thickness, grid, fill)

    if curr_masks is None:
        curr_masks = [mask(e) for e in curr]
    out = np.full((len(prev), len(curr)), -np.inf)
    for i, p in enumerate(prev):
        if not any(p.cls is c.cls for c in curr):
            continue
        pm = mask(p, motion)
        for j, c in enumerate(curr):
            if p.cls is c.cls:
                out[i, j] = index_iou(pm, curr_masks[j])
    return out


def match_by_iou(prev: list[Element], curr: list[Element], motion: Pose2, thickness: float = DEFAULT_THICKNESS,
                 min_iou: float = DEFAULT_MIN_IOU, grid: GridSpec = MATCH_GRID, fill_crossings: bool = False,
                 curr_masks=None) -> Assignment:
    """Optimal IoU matching of prev (moved into curr's frame by `motion`) to curr.

    Pairs are (prev index, curr index); pairs below `min_iou` are dropped after solving.
    """
    m = iou_matrix(prev, curr, motion, thickness, grid, fill_crossings, curr_masks)
    best = hungarian_max(m)
    pairs = tuple((i, j) for i, j in best.pairs if m[i, j] >= min_iou)
    return Assignment(pairs, _total(m[i, j] for i, j in pairs))


def chamfer_matrix(preds: list[Element], gts: list[Element], n: int = DEFAULT_POINTS) -> np.ndarray:
    rp = [resample(e.geometry, n) for e in preds]
    rg = [resample(e.geometry, n) for e in gts]
    out = np.empty((len(rp), len(rg)))
    for i, a in enumerate(rp):
        for j, b in enumerate(rg):
            out[i, j] = chamfer(a, b)
    return out


def match_by_chamfer(preds: list[Element], gts: list[Element], n: int = DEFAULT_POINTS):
    """Minimum-total-Chamfer matching; returns (cost matrix, Assignment). No threshold here."""
    cost = chamfer_matrix(preds, gts, n)
    return cost, hungarian_min(cost)
