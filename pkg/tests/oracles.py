"""Slow, obviously-correct reference implementations used only by the tests.

Nothing here imports the package's kernels; each oracle is written from the definition.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def brute_assign_max(score):
    """Best total score over all matchings of size min(r, c), and the lexicographically
    smallest sorted pair list achieving it. -inf entries are forbidden. Totals are
    compared exactly; the reported best is their correctly rounded sum."""
    s = np.asarray(score, dtype=float)
    r, c = s.shape
    if r == 0 or c == 0:
        return 0.0, []
    best, best_pairs = -math.inf, None
    if r <= c:
        for cols in itertools.permutations(range(c), r):
            pairs = [(i, j) for i, j in enumerate(cols) if s[i, j] != -math.inf]
            total = sum((Fraction(s[i, j]) for i, j in pairs), Fraction(0))
            # forbidden pairs are simply left unmatched; prefer more allowed pairs first
            key = (len(pairs), total)
            if best_pairs is None or key > best or (key == best and pairs < best_pairs):
                best, best_pairs = key, pairs
    else:
        for rows in itertools.permutations(range(r), c):
            pairs = sorted((i, j) for j, i in enumerate(rows) if s[i, j] != -math.inf)
            total = sum((Fraction(s[i, j]) for i, j in pairs), Fraction(0))
            key = (len(pairs), total)
            if best_pairs is None or key > best or (key == best and pairs < best_pairs):
                best, best_pairs = key, pairs
    vals = [s[i, j] for i, j in best_pairs]
    try:
        return math.fsum(vals), best_pairs
    except OverflowError:
        return sum(float(x) for x in vals), best_pairs


def brute_chamfer(a, b) -> float:
    """(1/2n) * (sum of nearest distances a->b plus b->a), for two n-point curves."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    assert len(a) == len(b)
    ab = [min(math.dist(p, q) for q in b) for p in a]
    ba = [min(math.dist(q, p) for p in a) for q in b]
    return (sum(ab) + sum(ba)) / (2 * len(a))


def _dot_exact(v, p, q) -> Fraction:
    """(v - p) . (q - p) in exact rational arithmetic."""
    return ((Fraction(v[0]) - Fraction(p[0])) * (Fraction(q[0]) - Fraction(p[0]))
            + (Fraction(v[1]) - Fraction(p[1])) * (Fraction(q[1]) - Fraction(p[1])))


def _cross_exact(p, q, v) -> Fraction:
    return ((Fraction(q[0]) - Fraction(p[0])) * (Fraction(v[1]) - Fraction(p[1]))
            - (Fraction(q[1]) - Fraction(p[1])) * (Fraction(v[0]) - Fraction(p[0])))


def brute_hull(points) -> list[tuple[float, float]]:
    """Extreme points by the O(n^3) edge test, ordered CCW from the lexicographic minimum.

    A pair (p, q) is a hull edge when every other point is strictly left of p->q or lies
    on the closed segment pq; its endpoints are hull vertices unless they sit inside a
    longer collinear hull edge.
    """
    pts = sorted({(float(x), float(y)) for x, y in points})
    arr = np.array(pts)
    verts = set()
    for i, p in enumerate(pts):
        for j, q in enumerate(pts):
            if i == j:
                continue
            d = arr - np.array(p)
            e = np.array(q) - np.array(p)
            cross = e[0] * d[:, 1] - e[1] * d[:, 0]
            # signs the float product cannot settle are recomputed exactly
            for k in np.flatnonzero(np.abs(cross) <= 1e-12 * (1.0 + np.abs(e).max() * np.abs(d).max())):
                cross[k] = float(np.sign(_cross_exact(p, q, pts[k])))
            if np.any(cross < 0):
                continue
            # other collinear points must lie within the segment; decide that exactly
            on = [k for k in np.flatnonzero(cross == 0) if k != i and k != j]
            if all(0 <= _dot_exact(pts[k], p, q) <= _dot_exact(q, p, q) for k in on):
                verts.update((p, q))
    # drop vertices lying strictly inside a segment between two other vertices
    vs = sorted(verts)
    extreme = []
    for v in vs:
        inner = False
        for a, b in itertools.combinations([w for w in vs if w != v], 2):
            cr = (b[0] - a[0]) * (v[1] - a[1]) - (b[1] - a[1]) * (v[0] - a[0])
            if cr == 0 and min(a[0], b[0]) <= v[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= v[1] <= max(a[1], b[1]):
                inner = True
                break
        if not inner:
            extreme.append(v)
    if len(extreme) < 3:
        return extreme
    cx = sum(x for x, _ in extreme) / len(extreme)
    cy = sum(y for _, y in extreme) / len(extreme)
    ring = sorted(extreme, key=lambda v: math.atan2(v[1] - cy, v[0] - cx))
    k = ring.index(min(ring))
    return ring[k:] + ring[:k]


def pose_matrix(x, y, yaw) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, x], [s, c, y], [0, 0, 1.0]])


def matrix_pose(m) -> tuple[float, float, float]:
    return float(m[0, 2]), float(m[1, 2]), math.atan2(m[1, 0], m[0, 0])


def pixel_distance_mask(segments, thickness, width_px, height_px, half_w, half_l, closed=False):
    """Set pixels whose centres are within thickness/2 of any segment, by direct distance."""
    xs = -half_w + (np.arange(width_px) + 0.5) * (2 * half_w / width_px)
    ys = half_l - (np.arange(height_px) + 0.5) * (2 * half_l / height_px)
    X, Y = np.meshgrid(xs, ys)
    pts = np.asarray(segments, float)
    pairs = list(zip(pts[:-1], pts[1:]))
    if closed:
        pairs.append((pts[-1], pts[0]))
    best = np.full(X.shape, np.inf)
    for a, b in pairs:
        d = b - a
        L2 = d @ d
        t = np.clip(((X - a[0]) * d[0] + (Y - a[1]) * d[1]) / L2, 0, 1) if L2 > 0 else 0.0
        best = np.minimum(best, np.hypot(X - (a[0] + t * d[0]), Y - (a[1] + t * d[1])))
    return best <= thickness / 2


def envelope_ap(flags, num_gt) -> float:
    """AP from a ranked TP/FP list: each TP adds (1/num_gt) * best precision at or below its rank."""
    prec = []
    tp = 0
    for k, f in enumerate(flags, start=1):
        tp += f
        prec.append(tp / k)
    total = 0.0
    for k, f in enumerate(flags):
        if f:
            total += max(prec[k:]) / num_gt
    return total


def relabel_bijective(a: dict, b: dict) -> bool:
    """True when there is a bijection f with b[key] = f(a[key]) for every key (same keys)."""
    if a.keys() != b.keys():
        return False
    fwd, bwd = {}, {}
    for k in a:
        x, y = a[k], b[k]
        if fwd.setdefault(x, y) != y or bwd.setdefault(y, x) != x:
            return False
    return True
