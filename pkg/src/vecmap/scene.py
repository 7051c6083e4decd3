"""Domain types for vector-map sequences and their line-delimited file format."""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
DEFAULT_WINDOW = (15.0, 30.0)


class SequenceFormatError(ValueError):
    """Malformed record in a sequence file."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(ValueError):
    """A record parsed fine but violates a domain invariant."""


class ElementClass(str, enum.Enum):
    CROSSING = "crossing"
    DIVIDER = "divider"
    BOUNDARY = "boundary"

    @property
    def closed(self) -> bool:
        return self is ElementClass.CROSSING


CLASSES = (ElementClass.CROSSING, ElementClass.DIVIDER, ElementClass.BOUNDARY)


def normalize_angle(yaw: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    y = math.remainder(yaw, 2.0 * math.pi)
    if y <= -math.pi:
        y += 2.0 * math.pi
    return y


@dataclass(frozen=True)
class Pose2:
    """Planar rigid motion: p -> R(yaw) p + (x, y).

    An ego pose maps ego-frame coordinates into the global frame.
    """

    x: float = 0.0
    y: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x, self.y, self.yaw)):
            raise ValueError(f"non-finite pose {self!r}")
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    def __matmul__(self, other: Pose2) -> Pose2:
        # matrix product: (self @ other)(p) = self(other(p))
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose2(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.yaw + other.yaw,
        )

    def inverse(self) -> Pose2:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return Pose2(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.yaw)

    def matrix(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s, self.x], [s, c, self.y], [0.0, 0.0, 1.0]])

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        return pts @ rot.T + np.array([self.x, self.y])


IDENTITY = Pose2()


def compose(first: Pose2, then: Pose2) -> Pose2:
    """The motion that applies `first` and then `then`."""
    return then @ first


def relative_pose(src: Pose2, dst: Pose2) -> Pose2:
    """Transform taking coordinates in `src`'s ego frame to `dst`'s ego frame."""
    return dst.inverse() @ src


@dataclass(frozen=True)
class Polyline:
    """Open curve or implicitly closed loop (the seam vertex is never repeated)."""

    points: tuple[tuple[float, float], ...]
    closed: bool = False

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if len(pts) < 2:
            raise ValueError("polyline needs at least 2 points")
        if not all(math.isfinite(v) for p in pts for v in p):
            raise ValueError("polyline has non-finite coordinates")
        if self.closed and len(pts) > 2 and pts[0] == pts[-1]:
            pts = pts[:-1]
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_array(cls, arr, closed: bool = False) -> Polyline:
        return cls(tuple(map(tuple, np.asarray(arr, dtype=float).reshape(-1, 2))), closed)

    def array(self) -> np.ndarray:
        return np.array(self.points, dtype=float)

    def __len__(self) -> int:
        return len(self.points)

    def length(self) -> float:
        pts = self.array()
        if self.closed:
            pts = np.vstack([pts, pts[:1]])
        return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))


@dataclass(frozen=True)
class Element:
    cls: ElementClass
    geometry: Polyline
    score: float | None = None
    global_id: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "cls", ElementClass(self.cls))
        if self.geometry.closed != self.cls.closed:
            kind = "closed" if self.cls.closed else "open"
            raise ValidationError(f"{self.cls.value} geometry must be {kind}")
        if self.score is not None:
            if not math.isfinite(self.score):
                raise ValidationError("score must be finite")
            if not 0.0 <= self.score <= 1.0:
                logger.warning("clamping score %r to [0, 1]", self.score)
                object.__setattr__(self, "score", min(1.0, max(0.0, float(self.score))))
        if self.global_id is not None and (int(self.global_id) != self.global_id or self.global_id < 0):
            raise ValidationError(f"global_id must be a nonnegative integer, got {self.global_id!r}")

    def with_geometry(self, geometry: Polyline) -> Element:
        return replace(self, geometry=geometry)


@dataclass(frozen=True)
class Frame:
    index: int
    ego_pose: Pose2
    elements: tuple[Element, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))


@dataclass(frozen=True)
class Sequence:
    frames: tuple[Frame, ...] = ()
    window: tuple[float, float] = DEFAULT_WINDOW

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "window", (float(self.window[0]), float(self.window[1])))
        for i, fr in enumerate(self.frames):
            if fr.index != i:
                raise ValidationError(f"frame indices must be consecutive from 0; got {fr.index} at position {i}")
        if min(self.window) <= 0:
            raise ValidationError("window half-extents must be positive")

    def __len__(self) -> int:
        return len(self.frames)

    def map_elements(self, fn) -> Sequence:
        """Rebuild every frame with `fn(frame, elements) -> elements`."""
        frames = [replace(fr, elements=tuple(fn(fr, fr.elements))) for fr in self.frames]
        return replace(self, frames=tuple(frames))


@dataclass(frozen=True)
class TrackBook:
    """Per-frame {local element index -> global ID} plus the next unused ID."""

    frames: tuple[Mapping[int, int], ...] = ()
    next_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(dict(m) for m in self.frames))
        for t, m in enumerate(self.frames):
            if len(set(m.values())) != len(m):
                raise ValidationError(f"frame {t}: duplicate global IDs")

    def __len__(self) -> int:
        return sum(len(m) for m in self.frames)

    def track_ids(self) -> set[int]:
        return {gid for m in self.frames for gid in m.values()}

    @property
    def num_tracks(self) -> int:
        return len(self.track_ids())


def book_from_sequence(seq: Sequence) -> TrackBook:
    """Read the global IDs already written into a sequence."""
    frames = []
    for fr in seq.frames:
        frames.append({i: el.global_id for i, el in enumerate(fr.elements) if el.global_id is not None})
    ids = [g for m in frames for g in m.values()]
    return TrackBook(tuple(frames), (max(ids) + 1) if ids else 0)


# ---------------------------------------------------------------------------
# line-delimited format


def _num(v: float) -> str:
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def _round6(v: float) -> float:
    return float(_num(v))


def _element_line(el: Element) -> str:
    parts = [f'"class":"{el.cls.value}"', f'"closed":{"true" if el.geometry.closed else "false"}']
    if el.score is not None:
        parts.append(f'"score":{_num(el.score)}')
    if el.global_id is not None:
        parts.append(f'"global_id":{int(el.global_id)}')
    pts = ",".join(f"[{_num(x)},{_num(y)}]" for x, y in el.geometry.points)
    parts.append(f'"pts":[{pts}]')
    return "{" + ",".join(parts) + "}"


def save_sequence(seq: Sequence) -> bytes:
    """Serialize to the canonical line-delimited form (6 decimal places)."""
    lines = [f'{{"version":{FORMAT_VERSION},"window":[{_num(seq.window[0])},{_num(seq.window[1])}]}}']
    for fr in seq.frames:
        p = fr.ego_pose
        els = ",".join(_element_line(el) for el in fr.elements)
        lines.append(f'{{"index":{fr.index},"ego":[{_num(p.x)},{_num(p.y)},{_num(p.yaw)}],"elements":[{els}]}}')
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_element(rec, lineno: int, eidx: int) -> Element:
    if not isinstance(rec, dict):
        raise SequenceFormatError(lineno, f"element {eidx} is not an object")
    try:
        cls = ElementClass(rec["class"])
        closed = rec["closed"]
        pts = rec["pts"]
    except KeyError as exc:
        raise SequenceFormatError(lineno, f"element {eidx} missing field {exc.args[0]!r}") from None
    except ValueError:
        raise SequenceFormatError(lineno, f"element {eidx} has unknown class {rec.get('class')!r}") from None
    if not isinstance(closed, bool) or not isinstance(pts, list):
        raise SequenceFormatError(lineno, f"element {eidx} has malformed closed/pts")
    try:
        coords = [(float(p[0]), float(p[1])) for p in pts if len(p) == 2]
    except (TypeError, ValueError):
        raise SequenceFormatError(lineno, f"element {eidx} has malformed points") from None
    if len(coords) != len(pts):
        raise SequenceFormatError(lineno, f"element {eidx} has malformed points")
    score = rec.get("score")
    gid = rec.get("global_id")
    if score is not None and not isinstance(score, (int, float)):
        raise SequenceFormatError(lineno, f"element {eidx} score is not a number")
    if gid is not None and (not isinstance(gid, int) or isinstance(gid, bool)):
        raise SequenceFormatError(lineno, f"element {eidx} global_id is not an integer")
    return Element(cls, Polyline(tuple(coords), closed), None if score is None else float(score), gid)


def load_sequence(data: bytes | str) -> Sequence:
    """Parse a sequence file. Yaw is normalized and scores clamped on load."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines()) if ln.strip()]
    if not lines:
        raise SequenceFormatError(1, "missing header")
    records = []
    for lineno, ln in lines:
        try:
            records.append((lineno, json.loads(ln)))
        except json.JSONDecodeError as exc:
            raise SequenceFormatError(lineno, f"invalid JSON ({exc.msg})") from None
    lineno, header = records[0]
    if not isinstance(header, dict) or header.get("version") != FORMAT_VERSION:
        raise SequenceFormatError(lineno, f"header must be an object with version {FORMAT_VERSION}")
    window = header.get("window", list(DEFAULT_WINDOW))
    if not (isinstance(window, list) and len(window) == 2):
        raise SequenceFormatError(lineno, "window must be [half_width, half_length]")
    frames = []
    for lineno, rec in records[1:]:
        if not isinstance(rec, dict):
            raise SequenceFormatError(lineno, "frame record is not an object")
        try:
            index, ego, elements = rec["index"], rec["ego"], rec["elements"]
        except KeyError as exc:
            raise SequenceFormatError(lineno, f"frame missing field {exc.args[0]!r}") from None
        if not isinstance(index, int) or not (isinstance(ego, list) and len(ego) == 3):
            raise SequenceFormatError(lineno, "frame index/ego malformed")
        if not isinstance(elements, list):
            raise SequenceFormatError(lineno, "elements must be a list")
        parsed = []
        for eidx, er in enumerate(elements):
            try:
                parsed.append(_parse_element(er, lineno, eidx))
            except SequenceFormatError:
                raise
            except ValueError as exc:
                raise ValidationError(f"frame {index}, element {eidx}: {exc}") from None
        try:
            pose = Pose2(float(ego[0]), float(ego[1]), float(ego[2]))
        except (TypeError, ValueError) as exc:
            raise SequenceFormatError(lineno, f"bad ego pose: {exc}") from None
        frames.append(Frame(index, pose, tuple(parsed)))
    return Sequence(tuple(frames), (float(window[0]), float(window[1])))


def canonicalize(seq: Sequence) -> Sequence:
    """Round every number the way the file format does."""

    def el(e: Element) -> Element:
        pts = tuple((_round6(x), _round6(y)) for x, y in e.geometry.points)
        score = None if e.score is None else _round6(e.score)
        return Element(e.cls, Polyline(pts, e.geometry.closed), score, e.global_id)

    frames = []
    for fr in seq.frames:
        p = fr.ego_pose
        pose = Pose2(_round6(p.x), _round6(p.y), _round6(p.yaw))
        frames.append(Frame(fr.index, pose, tuple(el(e) for e in fr.elements)))
    return Sequence(tuple(frames), (_round6(seq.window[0]), _round6(seq.window[1])))


def strip_ids(seq: Sequence) -> Sequence:
    return seq.map_elements(lambda fr, els: [replace(e, global_id=None) for e in els])


def elements_of(seq: Sequence, cls: ElementClass) -> Iterable[tuple[int, int, Element]]:
    for fr in seq.frames:
        for i, e in enumerate(fr.elements):
            if e.cls is cls:
                yield fr.index, i, e
