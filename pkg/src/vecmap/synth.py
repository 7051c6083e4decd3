"""Deterministic synthetic worlds, ground-truth projection, and prediction noise.

All randomness comes from `CounterRNG` streams keyed by the explicit seed plus a
name path, so a draw never depends on how many other draws happened before it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom import DEFAULT_POINTS, chamfer, polygon_area, resample
from .rng import CounterRNG
from .scene import DEFAULT_WINDOW, Element, ElementClass, Frame, Polyline, Pose2, Sequence

TRAJECTORIES = ("straight", "arc", "s-curve")
SCORE_MODELS = ("calibrated", "uniform")
ID_MODES = ("oracle", "fresh-per-frame", "swap-pairs")


@dataclass(frozen=True)
class WorldSpec:
    seed: int = 0
    trajectory: str = "straight"
    length: float = 100.0
    spacing: float = 5.0
    radius: float = 80.0
    lane_width: float = 3.5
    num_dividers: int = 2
    crossing_spacing: float = 40.0
    crossing_width: float = 4.0
    extend: float = 15.0  # boundaries run this far past both trajectory ends
    truth_step: float = 1.0

    def validate(self):
        if self.trajectory not in TRAJECTORIES:
            raise ValueError(f"unknown trajectory {self.trajectory!r}; choose from {TRAJECTORIES}")
        if not self.length > 0:
            raise ValueError("length must be positive")
        if not self.spacing > 0:
            raise ValueError("frame spacing must be positive")
        if self.trajectory != "straight" and not self.radius > 0:
            raise ValueError("radius must be positive")
        if not 0 <= self.num_dividers <= 3:
            raise ValueError("num_dividers must be 0..3")
        if not self.lane_width > 0 or not self.truth_step > 0:
            raise ValueError("lane_width and truth_step must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    drop: float = 0.0
    score_model: str = "calibrated"
    id_mode: str = "oracle"
    clutter: float = 0.0
    swap_prob: float = 0.5

    def validate(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        for name in ("drop", "swap_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.clutter < 0:
            raise ValueError("clutter rate must be nonnegative")
        if self.score_model not in SCORE_MODELS:
            raise ValueError(f"unknown score model {self.score_model!r}")
        if self.id_mode not in ID_MODES:
            raise ValueError(f"unknown id mode {self.id_mode!r}")


@dataclass(frozen=True)
class WorldElement:
    id: int
    cls: ElementClass
    geometry: Polyline  # global frame


@dataclass(frozen=True)
class World:
    spec: WorldSpec
    elements: tuple[WorldElement, ...]
    poses: tuple[Pose2, ...]


# ---------------------------------------------------------------------------
# trajectory


def _yaw(spec: WorldSpec, s: np.ndarray) -> np.ndarray:
    if spec.trajectory == "straight":
        return np.zeros_like(s)
    if spec.trajectory == "arc":
        return s / spec.radius
    # s-curve: curvature sin(2 pi s / L) / R on [0, L], straight outside
    u = np.clip(s, 0.0, spec.length)
    return spec.length / (2 * math.pi * spec.radius) * (1.0 - np.cos(2 * math.pi * u / spec.length))


def _position(spec: WorldSpec, s: np.ndarray) -> np.ndarray:
    """Centerline position; travel direction at yaw is (-sin yaw, cos yaw)."""
    s = np.asarray(s, dtype=float)
    if spec.trajectory == "straight":
        return np.column_stack([np.zeros_like(s), s])
    if spec.trajectory == "arc":
        r = spec.radius
        return np.column_stack([r * (np.cos(s / r) - 1.0), r * np.sin(s / r)])
    # numeric integration on a fixed 1 cm grid anchored at s = 0 (deterministic)
    lo = min(0.0, float(s.min()))
    hi = max(0.0, float(s.max()))
    h = 0.01
    grid = np.arange(math.floor(lo / h), math.ceil(hi / h) + 1) * h
    mid = 0.5 * (grid[1:] + grid[:-1])
    yaw = _yaw(spec, mid)
    step = np.column_stack([-np.sin(yaw), np.cos(yaw)]) * np.diff(grid)[:, None]
    pos = np.vstack([[0.0, 0.0], np.cumsum(step, axis=0)])
    pos -= pos[np.argmin(np.abs(grid))]
    return np.column_stack([np.interp(s, grid, pos[:, 0]), np.interp(s, grid, pos[:, 1])])


def _offset_curve(spec: WorldSpec, s: np.ndarray, lateral: float) -> np.ndarray:
    yaw = _yaw(spec, s)
    normal = np.column_stack([np.cos(yaw), np.sin(yaw)])  # ego +x axis
    return _position(spec, s) + lateral * normal


def _span(spec: WorldSpec, s0: float, s1: float) -> np.ndarray:
    k = max(1, int(math.ceil((s1 - s0) / spec.truth_step)))
    return np.linspace(s0, s1, k + 1)


def gen_world(spec: WorldSpec) -> World:
    """Boundaries flanking the route, dividers between lanes, perpendicular crossings."""
    spec.validate()
    rng = CounterRNG(spec.seed, "world")
    half_road = spec.lane_width * (spec.num_dividers + 1) / 2.0
    lo, hi = -spec.extend, spec.length + spec.extend
    elements = []

    def add(cls, pts, closed=False):
        elements.append(WorldElement(len(elements), cls, Polyline.from_array(pts, closed)))

    for side in (-1.0, 1.0):
        add(ElementClass.BOUNDARY, _offset_curve(spec, _span(spec, lo, hi), side * half_road))
    for k in range(1, spec.num_dividers + 1):
        r = rng.child("divider", k)
        s0 = r.uniform(lo, lo + 0.3 * (hi - lo))
        s1 = r.uniform(hi - 0.3 * (hi - lo), hi)
        add(ElementClass.DIVIDER, _offset_curve(spec, _span(spec, s0, s1), -half_road + k * spec.lane_width))
    if spec.crossing_spacing > 0:
        k = 1
        while k * spec.crossing_spacing < spec.length:
            sc = k * spec.crossing_spacing
            w = spec.crossing_width / 2.0
            near = _offset_curve(spec, np.array([sc - w, sc - w]), 0.0)[0]
            far = _offset_curve(spec, np.array([sc + w, sc + w]), 0.0)[0]
            yaw = float(_yaw(spec, np.array([sc]))[0])
            nrm = np.array([math.cos(yaw), math.sin(yaw)]) * half_road
            # counter-clockwise: travel direction is +y in the ego frame, +x is the normal
            add(ElementClass.CROSSING, np.array([near - nrm, near + nrm, far + nrm, far - nrm])[::-1], closed=True)
            k += 1
    n_frames = int(math.floor(spec.length / spec.spacing + 1e-9)) + 1
    s = np.arange(n_frames) * spec.spacing
    xy = _position(spec, s)
    yaw = _yaw(spec, s)
    poses = tuple(Pose2(float(x), float(y), float(a)) for (x, y), a in zip(xy, yaw))
    return World(spec, tuple(elements), poses)


# ---------------------------------------------------------------------------
# window clipping


def _clip_segment(p, q, hw, hl):
    """Liang-Barsky; returns (t0, t1) or None."""
    t0, t1 = 0.0, 1.0
    d = q - p
    for num, den in ((p[0] + hw, -d[0]), (hw - p[0], d[0]), (p[1] + hl, -d[1]), (hl - p[1], d[1])):
        if den == 0:
            if num < 0:
                return None
            continue
        t = num / den
        if den < 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 > t1:
            return None
    return t0, t1


def clip_open(pts: np.ndarray, hw: float, hl: float) -> list[np.ndarray]:
    """Visible runs of an open polyline inside the axis-aligned window."""
    runs, cur = [], []
    for p, q in zip(pts[:-1], pts[1:]):
        c = _clip_segment(p, q, hw, hl)
        if c is None:
            if cur:
                runs.append(np.array(cur))
                cur = []
            continue
        a, b = p + c[0] * (q - p), p + c[1] * (q - p)
        if cur and c[0] > 0:
            runs.append(np.array(cur))
            cur = []
        if not cur:
            cur.append(a)
        cur.append(b)
        if c[1] < 1:
            runs.append(np.array(cur))
            cur = []
    if cur:
        runs.append(np.array(cur))
    return runs


def clip_closed(pts: np.ndarray, hw: float, hl: float) -> np.ndarray:
    """Sutherland-Hodgman against the window; the result is re-closed along the clip edge."""
    poly = [tuple(p) for p in pts]
    for axis, bound, sign in ((0, hw, 1), (0, -hw, -1), (1, hl, 1), (1, -hl, -1)):
        if not poly:
            break
        inside = lambda v: sign * v[axis] <= sign * bound  # noqa: E731
        out = []
        for k in range(len(poly)):
            cur, prev = poly[k], poly[k - 1]
            if inside(cur):
                if not inside(prev):
                    out.append(_cross(prev, cur, axis, bound))
                out.append(cur)
            elif inside(prev):
                out.append(_cross(prev, cur, axis, bound))
        poly = out
    if not poly:
        return np.empty((0, 2))
    arr = np.array(poly)
    keep = np.hypot(*(arr - np.roll(arr, 1, axis=0)).T) > 1e-9
    return arr[keep]


def _cross(a, b, axis, bound):
    t = (bound - a[axis]) / (b[axis] - a[axis])
    return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))


def project_gt(world: World, window=DEFAULT_WINDOW, n: int | None = DEFAULT_POINTS,
               min_length: float = 1.0, min_area: float = 0.5) -> Sequence:
    """Per-frame ego-frame ground truth with oracle global IDs.

    Open elements keep their longest visible run (resampled to `n` points unless
    `n` is None); crossings are clipped polygons with their vertices kept. Fragments
    shorter than `min_length` or smaller than `min_area` are treated as not visible.
    """
    hw, hl = float(window[0]), float(window[1])
    if hw <= 0 or hl <= 0:
        raise ValueError("window must be positive")
    frames = []
    for t, pose in enumerate(world.poses):
        inv = pose.inverse()
        els = []
        for we in world.elements:
            local = inv.apply(we.geometry.array())
            if we.geometry.closed:
                clipped = clip_closed(local, hw, hl)
                if len(clipped) < 3 or abs(polygon_area(clipped)) < min_area:
                    continue
                if polygon_area(clipped) < 0:
                    clipped = clipped[::-1]
                geo = Polyline.from_array(clipped, closed=True)
            else:
                runs = clip_open(local, hw, hl)
                if not runs:
                    continue
                lengths = [float(np.sum(np.hypot(*np.diff(r, axis=0).T))) for r in runs]
                best = int(np.argmax(lengths))
                if lengths[best] < min_length:
                    continue
                geo = Polyline.from_array(runs[best])
                if n is not None:
                    geo = Polyline.from_array(resample(geo, n))
            els.append(Element(we.cls, geo, None, we.id))
        frames.append(Frame(t, pose, tuple(els)))
    return Sequence(tuple(frames), (hw, hl))


# ---------------------------------------------------------------------------
# prediction noise


def _clutter(rng: CounterRNG, window, n: int) -> Element:
    hw, hl = window
    cls = (ElementClass.CROSSING, ElementClass.DIVIDER, ElementClass.BOUNDARY)[rng.integers(0, 2)]
    cx, cy = rng.uniform(-hw, hw), rng.uniform(-hl, hl)
    ang = rng.uniform(-math.pi, math.pi)
    d = np.array([math.cos(ang), math.sin(ang)])
    e = np.array([-d[1], d[0]])
    c = np.array([cx, cy])
    if cls is ElementClass.CROSSING:
        a, b = rng.uniform(2.0, 5.0) / 2, rng.uniform(5.0, 12.0) / 2
        pts = np.array([c - a * d - b * e, c + a * d - b * e, c + a * d + b * e, c - a * d + b * e])
        geo = Polyline.from_array(pts, closed=True)
    else:
        half = rng.uniform(3.0, 15.0) / 2
        geo = Polyline.from_array(np.linspace(c - half * d, c + half * d, n))
    return Element(cls, geo, rng.uniform(0.05, 0.5))


def perturb(gt: Sequence, noise: NoiseSpec = NoiseSpec(), seed: int = 0, n: int = DEFAULT_POINTS) -> Sequence:
    """Noisy predictions derived from ground truth.

    Each kept element has every point jittered by isotropic Gaussian `sigma`, a score
    from the score model, and an ID per the corruption mode. Clutter elements get
    scores in [0.05, 0.5) and fresh IDs.
    """
    noise.validate()
    root = CounterRNG(seed, "perturb")
    gt_ids = [e.global_id for fr in gt.frames for e in fr.elements if e.global_id is not None]
    fresh = 0 if noise.id_mode == "fresh-per-frame" else (max(gt_ids) + 1 if gt_ids else 0)
    frames = []
    for fr in gt.frames:
        out = []
        for i, el in enumerate(fr.elements):
            r = root.child("frame", fr.index, "element", i)
            if r.random() < noise.drop:
                continue
            pts = el.geometry.array()
            if noise.sigma > 0:
                pts = pts + np.array([[r.normal(0, noise.sigma), r.normal(0, noise.sigma)] for _ in pts])
            geo = Polyline.from_array(pts, el.geometry.closed)
            if noise.score_model == "calibrated":
                d = chamfer(resample(geo, n), resample(el.geometry, n))
                score = min(0.99, max(0.05, 1.0 - d / 1.5))
            else:
                score = r.uniform(0.5, 1.0)
            if noise.id_mode == "fresh-per-frame":
                gid, fresh = fresh, fresh + 1
            else:
                gid = el.global_id
            out.append(Element(el.cls, geo, score, gid))
        if noise.id_mode == "swap-pairs":
            r = root.child("swap", fr.index)
            ids = [e.global_id for e in out]
            for cls in ElementClass:
                members = r.shuffle([k for k, e in enumerate(out) if e.cls is cls])
                for a, b in zip(members[0::2], members[1::2]):
                    if r.random() < noise.swap_prob:
                        ids[a], ids[b] = ids[b], ids[a]
            out = [Element(e.cls, e.geometry, e.score, g) for e, g in zip(out, ids)]
        r = root.child("clutter", fr.index)
        count = int(math.floor(noise.clutter)) + (1 if r.random() < noise.clutter % 1.0 else 0)
        for _ in range(count):
            c = _clutter(r, gt.window, n)
            out.append(Element(c.cls, c.geometry, c.score, fresh))
            fresh += 1
        frames.append(Frame(fr.index, fr.ego_pose, tuple(out)))
    return Sequence(tuple(frames), gt.window)


def make_scene(spec: WorldSpec, noise: NoiseSpec = NoiseSpec(), window=DEFAULT_WINDOW, noise_seed: int | None = None):
    """(world, ground truth, predictions) in one call."""
    world = gen_world(spec)
    gt = project_gt(world, window)
    pred = perturb(gt, noise, spec.seed if noise_seed is None else noise_seed)
    return world, gt, pred
