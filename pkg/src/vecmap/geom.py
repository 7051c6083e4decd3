"""Polyline kernels: arc-length resampling, rigid transforms, Chamfer distance, hulls."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .scene import Polyline, Pose2

DEFAULT_POINTS = 20


class DegenerateGeometry(ValueError):
    pass


def _closed_loop(poly: Polyline) -> np.ndarray:
    pts = poly.array()
    if poly.closed:
        pts = np.vstack([pts, pts[:1]])
    return pts


def arc_lengths(pts: np.ndarray) -> np.ndarray:
    seg = np.hypot(*np.diff(pts, axis=0).T)
    return np.concatenate([[0.0], np.cumsum(seg)])


def interpolate_at(pts: np.ndarray, cum: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Points at arc-length positions `s` along vertices `pts` with cumulative lengths `cum`."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, cum[-1])
    # zero-length segments make interp ambiguous; keep only strictly increasing knots
    keep = np.concatenate([[True], np.diff(cum) > 0])
    return np.column_stack([np.interp(s, cum[keep], pts[keep, 0]), np.interp(s, cum[keep], pts[keep, 1])])


def resample(poly: Polyline, n: int = DEFAULT_POINTS) -> np.ndarray:
    """`n` points equally spaced in arc length.

    Open curves keep both end vertices; closed curves start at vertex 0 with spacing
    perimeter / n and do not repeat the seam.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    pts = _closed_loop(poly)
    cum = arc_lengths(pts)
    total = cum[-1]
    if not total > 0:
        raise DegenerateGeometry("polyline has zero length")
    if poly.closed:
        s = np.arange(n) * (total / n)
    else:
        s = np.linspace(0.0, total, n)
    out = interpolate_at(pts, cum, s)
    if not poly.closed:
        out[0], out[-1] = pts[0], pts[-1]
    else:
        out[0] = pts[0]
    return out


def resample_polyline(poly: Polyline, n: int = DEFAULT_POINTS) -> Polyline:
    return Polyline.from_array(resample(poly, n), poly.closed)


def transform(points, pose: Pose2) -> np.ndarray:
    return pose.apply(points)


def transform_polyline(poly: Polyline, pose: Pose2) -> Polyline:
    return Polyline.from_array(pose.apply(poly.array()), poly.closed)


def chamfer(a, b) -> float:
    """Symmetric mean nearest-point distance between two point sets."""
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    d = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    return 0.5 * (float(d.min(axis=1).mean()) + float(d.min(axis=0).mean()))


# ---------------------------------------------------------------------------
# convex hull

_ORIENT_EPS = 3.3306690738754716e-16  # (3 + 16 eps) eps, Shewchuk's ccwerrboundA


def orient(a, b, c) -> int:
    """Sign of the turn a -> b -> c (+1 left, -1 right, 0 collinear), exact."""
    detl = (b[0] - a[0]) * (c[1] - a[1])
    detr = (b[1] - a[1]) * (c[0] - a[0])
    det = detl - detr
    if abs(det) > _ORIENT_EPS * (abs(detl) + abs(detr)):
        return 1 if det > 0 else -1
    fa = [Fraction(v) for v in a]
    fb = [Fraction(v) for v in b]
    fc = [Fraction(v) for v in c]
    exact = (fb[0] - fa[0]) * (fc[1] - fa[1]) - (fb[1] - fa[1]) * (fc[0] - fa[0])
    return (exact > 0) - (exact < 0)


def convex_hull(points) -> Polyline:
    """Counter-clockwise hull without collinear vertices (monotone chain).

    The first vertex is the lexicographically smallest (x, then y).
    """
    pts = sorted(set(map(tuple, np.asarray(points, dtype=float).reshape(-1, 2).tolist())))
    if len(pts) < 3:
        raise DegenerateGeometry("need at least 3 distinct points")

    def chain(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and orient(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateGeometry("all points are collinear")
    return Polyline(tuple(hull), closed=True)


def polygon_area(pts) -> float:
    p = np.asarray(pts, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def project_onto(pts: np.ndarray, cum: np.ndarray, q) -> tuple[float, float]:
    """Arc-length parameter of the closest point on an open polyline to `q`, and the distance."""
    a = pts[:-1]
    d = np.diff(pts, axis=0)
    ll = np.einsum("ij,ij->i", d, d)
    t = np.where(ll > 0, np.einsum("ij,ij->i", np.asarray(q) - a, d) / np.where(ll > 0, ll, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    foot = a + t[:, None] * d
    dist = np.hypot(*(foot - np.asarray(q)).T)
    k = int(np.argmin(dist))
    return float(cum[k] + t[k] * np.sqrt(ll[k])), float(dist[k])
