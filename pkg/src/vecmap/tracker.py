"""Track generation with look-back, ground-truth track formation, and ID annotation."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .assign import DEFAULT_MIN_IOU, match_by_iou
from .raster import DEFAULT_THICKNESS, MATCH_GRID, GridSpec, stroke_indices
from .scene import Sequence, TrackBook, ValidationError, relative_pose


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrackerConfig:
    tau: float = 0.4
    lookback: int = 1
    thickness: float = DEFAULT_THICKNESS
    min_iou: float = DEFAULT_MIN_IOU
    grid: GridSpec = MATCH_GRID
    fill_crossings: bool = False

    def validate(self):
        if self.lookback < 1:
            raise ConfigError(f"lookback must be >= 1, got {self.lookback}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must lie in [0, 1], got {self.tau}")
        if self.thickness <= 0:
            raise ConfigError("thickness must be positive")


def _run(seq: Sequence, positives: list[list[int]], cfg: TrackerConfig) -> TrackBook:
    cfg.validate()
    books: list[dict[int, int]] = []
    next_id = 0
    for t, fr in enumerate(seq.frames):
        ids: dict[int, int] = {}
        pos = positives[t]
        curr = [fr.elements[i] for i in pos]
        if t > 0 and curr:
            curr_masks = [
                stroke_indices(e.geometry.points, e.geometry.closed, cfg.thickness, cfg.grid,
                               cfg.fill_crossings and e.geometry.closed)
                for e in curr
            ]
            matches = []
            for k in range(1, cfg.lookback + 1):
                if t - k < 0:
                    break
                old = seq.frames[t - k]
                prev_pos = positives[t - k]
                prev = [old.elements[i] for i in prev_pos]
                motion = relative_pose(old.ego_pose, fr.ego_pose)
                asg = match_by_iou(prev, curr, motion, cfg.thickness, cfg.min_iou, cfg.grid,
                                   cfg.fill_crossings, curr_masks)
                matches.append({c: prev_pos[p] for p, c in asg.pairs})
            taken: set[int] = set()
            for k, m in enumerate(matches, start=1):
                for c_local, i in enumerate(pos):
                    if i in ids or c_local not in m:
                        continue
                    gid = books[t - k][m[c_local]]
                    # an ID inherited at a smaller look-back wins; never duplicate within a frame
                    if gid in taken:
                        continue
                    ids[i] = gid
                    taken.add(gid)
        for i in pos:
            if i not in ids:
                ids[i] = next_id
                next_id += 1
        books.append(ids)
    return TrackBook(tuple(books), next_id)


def extract_tracks(seq: Sequence, cfg: TrackerConfig = TrackerConfig()) -> TrackBook:
    """Assign global IDs to predictions scoring strictly above `cfg.tau`."""
    cfg.validate()
    positives = []
    for fr in seq.frames:
        idx = []
        for i, el in enumerate(fr.elements):
            if el.score is None:
                raise ValidationError(f"frame {fr.index}, element {i}: missing score")
            if el.score > cfg.tau:
                idx.append(i)
        positives.append(idx)
    return _run(seq, positives, cfg)


def form_gt_tracks(seq: Sequence, cfg: TrackerConfig = TrackerConfig()) -> TrackBook:
    """Chain adjacent-frame correspondences of every ground-truth element (look-back 1)."""
    positives = [list(range(len(fr.elements))) for fr in seq.frames]
    return _run(seq, positives, replace(cfg, lookback=1))


def annotate(seq: Sequence, book: TrackBook) -> Sequence:
    """Write the book's IDs into the sequence; elements not in the book carry no ID."""
    if len(book.frames) > len(seq.frames):
        raise ValidationError(f"track book has {len(book.frames)} frames, sequence has {len(seq.frames)}")
    for t, m in enumerate(book.frames):
        n = len(seq.frames[t].elements)
        bad = [i for i in m if not 0 <= i < n]
        if bad:
            raise ValidationError(f"frame {t}: element indices {bad} out of range (frame has {n})")

    def write(fr, els):
        m = book.frames[fr.index] if fr.index < len(book.frames) else {}
        return [replace(e, global_id=m.get(i)) for i, e in enumerate(els)]

    return seq.map_elements(write)
