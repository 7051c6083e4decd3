"""Online merging of tracked per-frame reconstructions into a global vector map."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .geom import DegenerateGeometry, arc_lengths, convex_hull, interpolate_at, project_onto, transform_polyline
from .scene import (CLASSES, IDENTITY, Element, ElementClass, Frame, Polyline, Sequence, ValidationError)


DEFAULT_EDGE_TOL = 0.5
DEFAULT_END_GATE = 1.0


@dataclass(frozen=True, eq=False)
class MapEntry:
    """One merged element. `weights` holds per-vertex observation counts (open curves only)."""

    cls: ElementClass
    geometry: Polyline
    count: int = 1
    weights: np.ndarray | None = None
    ends: tuple[float, float] = (0.0, 0.0)  # weights of real (uncensored) end observations

    def vertex_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.full(len(self.geometry), float(self.count))
        return self.weights


@dataclass(frozen=True)
class GlobalMap:
    entries: dict[int, MapEntry] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)


def merge_crossing(old: Polyline, new: Polyline) -> Polyline:
    """Convex hull of both vertex sets; the longer input if the hull degenerates."""
    try:
        return convex_hull(np.vstack([old.array(), new.array()]))
    except DegenerateGeometry:
        return old if old.length() >= new.length() else new


def _orient(old: np.ndarray, new: np.ndarray) -> np.ndarray:
    keep = np.hypot(*(old[0] - new[0])) + np.hypot(*(old[-1] - new[-1]))
    flip = np.hypot(*(old[0] - new[-1])) + np.hypot(*(old[-1] - new[0]))
    return new[::-1] if flip < keep else new


def _pieces(ratio: float) -> int:
    """Number of intervals of at most one step; tolerant of rounding in the ratio."""
    return int(math.ceil(ratio * (1.0 - 1e-9)))


class _Curve:
    """Vertices with a chord-length parameter; evaluates a cubic interpolant through them.

    Linear interpolation would cut every corner on each merge and bend curved roads
    inward as merges accumulate.
    """

    def __init__(self, pts: np.ndarray, weights: np.ndarray):
        keep = np.concatenate([[True], np.hypot(*np.diff(pts, axis=0).T) > 1e-9])
        self.pts = pts[keep]
        self.weights = weights[keep]
        self.cum = arc_lengths(self.pts)
        self.length = float(self.cum[-1])
        if len(self.pts) >= 3:
            self._spline = CubicSpline(self.cum, self.pts, bc_type="natural")
        else:
            self._spline = None

    @property
    def spacing(self) -> float:
        return self.length / max(1, len(self.pts) - 1)

    def at(self, s) -> np.ndarray:
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        if self._spline is None:
            return interpolate_at(self.pts, self.cum, s)
        return self._spline(s)

    def weight_at(self, s) -> np.ndarray:
        return np.interp(np.clip(s, 0.0, self.length), self.cum, self.weights)

    def sub(self, s0: float, s1: float, step: float, drop_first=False, drop_last=False):
        if s1 - s0 <= 1e-12:
            return np.empty((0, 2)), np.empty(0)
        k = max(1, _pieces((s1 - s0) / step))
        s = np.linspace(s0, s1, k + 1)
        s = s[1 if drop_first else 0: len(s) - (1 if drop_last else 0)]
        return self.at(s), self.weight_at(s)


def _overhang(own: _Curve, s_from: float, s_to: float, own_w: float, other_end: np.ndarray,
              other_w: float, step: float, gate: float):
    """Part of `own` beyond the overlap, running from the overlap edge `s_from` to its
    end `s_to` (either direction), plus the resulting end weight.

    When the other curve has a real end there and the two ends lie within `gate`, the
    end is fused: the kept overhang shrinks to the weighted mean of the two end
    positions and is warped so its tip lands on the weighted mean end point. A
    censored end (weight 0) therefore yields to a nearby real one. Otherwise the
    overhang is kept whole.
    """
    over = abs(s_to - s_from)
    sign = 1.0 if s_to >= s_from else -1.0
    if other_w > 0 and over <= gate:
        keep = over * own_w / (own_w + other_w)
        end_w = own_w + other_w
    else:
        keep, end_w = over, own_w
    if keep <= 1e-12:
        return np.empty((0, 2)), np.empty(0), end_w
    k = max(1, _pieces(keep / step))
    frac = np.linspace(0.0, 1.0, k + 1)[1:]
    s = s_from + sign * keep * frac
    pts, w = own.at(s), own.weight_at(s)
    if keep < over:
        tip = (own_w * own.at(s_to) + other_w * other_end) / (own_w + other_w)
        pts = pts + frac[:, None] * (tip - pts[-1])
    if sign < 0:
        pts, w = pts[::-1], w[::-1]
    return pts, w, end_w


def _merge_weighted(a_pts, a_w, b_pts, b_w, a_ends=(0.0, 0.0), b_ends=(0.0, 0.0), gate=DEFAULT_END_GATE):
    """Weighted fusion of two open curves.

    `*_ends` are observation weights of real ends at the start and end of each curve;
    0 marks a censored end, one that only reflects the limit of what was observed.
    Returns (points, per-vertex weights, end weights).
    """
    oriented = _orient(a_pts, b_pts)
    if oriented is not b_pts:
        b_pts, b_w, b_ends = oriented, b_w[::-1], (b_ends[1], b_ends[0])
    a, b = _Curve(a_pts, a_w), _Curve(b_pts, b_w)
    if a.length <= 0 or b.length <= 0:
        return (a.pts, a.weights, a_ends) if a.length >= b.length else (b.pts, b.weights, b_ends)
    sa0, _ = project_onto(a.pts, a.cum, b.pts[0])
    sa1, _ = project_onto(a.pts, a.cum, b.pts[-1])
    sb0, _ = project_onto(b.pts, b.cum, a.pts[0])
    sb1, _ = project_onto(b.pts, b.cum, a.pts[-1])
    step = min(a.spacing, b.spacing)
    pieces = []
    if sa1 <= sa0 or sb1 <= sb0:
        # no usable overlap: join end to end in travel order
        if np.hypot(*(a.pts[-1] - b.pts[0])) <= np.hypot(*(b.pts[-1] - a.pts[0])):
            pieces += [(a.pts, a.weights), (b.pts, b.weights)]
            ends = (a_ends[0], b_ends[1])
        else:
            pieces += [(b.pts, b.weights), (a.pts, a.weights)]
            ends = (b_ends[0], a_ends[1])
    else:
        # leading overhang belongs to whichever curve starts first
        if sb0 > 0:
            *lead, lead_w = _overhang(b, sb0, 0.0, b_ends[0], a.pts[0], a_ends[0], step, gate)
        elif sa0 > 0:
            *lead, lead_w = _overhang(a, sa0, 0.0, a_ends[0], b.pts[0], b_ends[0], step, gate)
        else:
            lead, lead_w = None, a_ends[0] + b_ends[0]
        m = max(2, _pieces(max(sa1 - sa0, sb1 - sb0) / step) + 1)
        f = np.linspace(0.0, 1.0, m)
        ta, tb = sa0 + f * (sa1 - sa0), sb0 + f * (sb1 - sb0)
        wa, wb = a.weight_at(ta), b.weight_at(tb)
        avg = (wa[:, None] * a.at(ta) + wb[:, None] * b.at(tb)) / (wa + wb)[:, None]
        if sb1 < b.length:
            *tail, tail_w = _overhang(b, sb1, b.length, b_ends[1], a.pts[-1], a_ends[1], step, gate)
        elif sa1 < a.length:
            *tail, tail_w = _overhang(a, sa1, a.length, a_ends[1], b.pts[-1], b_ends[1], step, gate)
        else:
            tail, tail_w = None, a_ends[1] + b_ends[1]
        pieces += [p for p in (lead, (avg, wa + wb), tail) if p is not None]
        ends = (lead_w, tail_w)
    merged = _Curve(np.vstack([p for p, _ in pieces]), np.concatenate([w for _, w in pieces]))
    count = max(len(a_pts), len(b_pts), _pieces(merged.length / step) + 1)
    s = np.linspace(0.0, merged.length, count)
    out = merged.at(s)
    out[0], out[-1] = merged.pts[0], merged.pts[-1]
    return out, merged.weight_at(s), ends


def merge_linear(old: Polyline, new: Polyline, weight: float = 1.0) -> Polyline:
    """Fuse two observations of one open curve.

    `new` is flipped if that pairs the endpoints better. The overlap (found by projecting
    each curve's endpoints onto the other) is averaged pointwise by arc-length fraction,
    `old` weighted by `weight` and `new` by 1; parts of either curve beyond the overlap
    are appended. The result is resampled uniformly to at least max(point counts),
    keeping the finer of the two input spacings.
    """
    a, b = old.array(), new.array()
    pts, _, _ = _merge_weighted(a, np.full(len(a), float(weight)), b, np.ones(len(b)))
    return Polyline.from_array(pts)


def _true_ends(pts: np.ndarray, window, edge_tol: float) -> tuple[float, float]:
    """1.0 for an end strictly inside the window (a real end), 0.0 for one at its border."""
    if window is None:
        return (0.0, 0.0)
    hw, hl = window

    def inside(p):
        return abs(p[0]) < hw - edge_tol and abs(p[1]) < hl - edge_tol

    return (1.0 if inside(pts[0]) else 0.0, 1.0 if inside(pts[-1]) else 0.0)


def merge_step(gmap: GlobalMap, frame: Frame, window=None, edge_tol: float = DEFAULT_EDGE_TOL) -> GlobalMap:
    """Fold one frame of ID-bearing elements into the map (returns a new map).

    With a perception `window` (half-width, half-length), open-curve ends within
    `edge_tol` of its border are treated as censored: they extend the merged curve
    but never pull a real end. Without a window every end is censored.
    """
    entries = dict(gmap.entries)
    for i, el in enumerate(frame.elements):
        if el.global_id is None:
            raise ValidationError(f"frame {frame.index}, element {i}: missing global_id")
        geo = transform_polyline(el.geometry, frame.ego_pose)
        ends = (0.0, 0.0) if el.geometry.closed else _true_ends(el.geometry.array(), window, edge_tol)
        prev = entries.get(el.global_id)
        if prev is None:
            entries[el.global_id] = MapEntry(el.cls, geo, 1, None, ends)
            continue
        if prev.cls is not el.cls:
            raise ValidationError(
                f"frame {frame.index}, element {i}: global_id {el.global_id} was {prev.cls.value}, now {el.cls.value}")
        if el.cls is ElementClass.CROSSING:
            entries[el.global_id] = MapEntry(el.cls, merge_crossing(prev.geometry, geo), prev.count + 1)
        else:
            pts, w, e = _merge_weighted(prev.geometry.array(), prev.vertex_weights(), geo.array(),
                                        np.ones(len(geo)), prev.ends, ends)
            entries[el.global_id] = MapEntry(el.cls, Polyline.from_array(pts), prev.count + 1, w, e)
    return GlobalMap(entries)


def merge_sequence(seq: Sequence, gmap: GlobalMap | None = None, censor_edges: bool = True,
                   edge_tol: float = DEFAULT_EDGE_TOL) -> GlobalMap:
    gmap = gmap or GlobalMap()
    window = seq.window if censor_edges else None
    for fr in seq.frames:
        gmap = merge_step(gmap, fr, window, edge_tol)
    return gmap


def map_to_sequence(gmap: GlobalMap, window=(15.0, 30.0)) -> Sequence:
    """The map as a one-frame sequence in global coordinates (identity ego pose), sorted by ID."""
    els = tuple(Element(e.cls, e.geometry, None, gid) for gid, e in sorted(gmap.entries.items()))
    return Sequence((Frame(0, IDENTITY, els),), window)


def sequence_to_map(seq: Sequence) -> GlobalMap:
    entries = {}
    for fr in seq.frames:
        for i, el in enumerate(fr.elements):
            if el.global_id is None:
                raise ValidationError(f"frame {fr.index}, element {i}: missing global_id")
            entries[el.global_id] = MapEntry(el.cls, transform_polyline(el.geometry, fr.ego_pose), 1)
    return GlobalMap(entries)


COLORS = {ElementClass.CROSSING: "#1f77b4", ElementClass.DIVIDER: "#ff7f0e", ElementClass.BOUNDARY: "#2ca02c"}
PADDING = 5.0


def render_svg(gmap: GlobalMap, stroke_width: float = 0.3) -> bytes:
    """Deterministic SVG; world y points up, so SVG y is negated."""
    items = sorted(gmap.entries.items())
    if items:
        allpts = np.vstack([e.geometry.array() for _, e in items])
        lo, hi = allpts.min(axis=0) - PADDING, allpts.max(axis=0) + PADDING
    else:
        lo, hi = np.array([-PADDING, -PADDING]), np.array([PADDING, PADDING])
    w, h = hi - lo
    f = lambda v: f"{v:.3f}"  # noqa: E731
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{f(lo[0])} {f(-hi[1])} {f(w)} {f(h)}" '
        f'width="{f(w * 10)}" height="{f(h * 10)}">',
    ]
    order = {c: k for k, c in enumerate(CLASSES)}
    for gid, e in sorted(items, key=lambda kv: (order[kv[1].cls], kv[0])):
        pts = e.geometry.array()
        d = "M " + " L ".join(f"{f(x)} {f(-y)}" for x, y in pts)
        if e.geometry.closed:
            d += " Z"
        out.append(f'<path id="e{gid}" class="{e.cls.value}" d="{d}" fill="none" stroke="{COLORS[e.cls]}" '
                   f'stroke-width="{stroke_width:g}"/>')
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")
