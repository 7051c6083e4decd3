"""Chamfer-distance mAP and the consistency-aware variant (C-mAP).

All three variants share one per-frame matching routine so that, on the same
prediction subset, the upper bound and the plain mAP are computed identically.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .assign import match_by_chamfer
from .geom import DEFAULT_POINTS
from .scene import CLASSES, ElementClass, Sequence, ValidationError

DEFAULT_THRESHOLDS = (0.5, 1.0, 1.5)


class MissingTracksError(ValidationError):
    pass


@dataclass(frozen=True)
class DetectionRecord:
    score: float
    is_tp: bool
    cls: ElementClass
    sequence: int = 0
    frame: int = 0


def average_precision(records: Iterable[DetectionRecord], num_gt: int) -> float:
    """Area under the precision envelope; records ranked by score, ties kept in input order."""
    recs = sorted(records, key=lambda r: -r.score)  # sorted() is stable
    if num_gt == 0:
        return 0.0 if recs else 1.0
    if not recs:
        return 0.0
    tp = np.cumsum([r.is_tp for r in recs], dtype=float)
    fp = np.cumsum([not r.is_tp for r in recs], dtype=float)
    recall = tp / num_gt
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    steps = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(steps * envelope))


@dataclass
class MetricReport:
    thresholds: tuple[float, ...]
    ap_by_threshold: dict[str, dict[float, float]] = field(default_factory=dict)
    ap: dict[str, float] = field(default_factory=dict)
    map: float | None = None
    cap_by_threshold: dict[str, dict[float, float]] | None = None
    cap: dict[str, float] | None = None
    cmap: float | None = None
    cap_upper: dict[str, float] | None = None
    cmap_upper: float | None = None

    def to_json(self) -> dict:
        def keyed(d):
            return None if d is None else {c: {f"{t:g}": v for t, v in per.items()} for c, per in d.items()}

        return {
            "thresholds": list(self.thresholds),
            "ap": self.ap,
            "ap_by_threshold": keyed(self.ap_by_threshold),
            "map": self.map,
            "cap": self.cap,
            "cap_by_threshold": keyed(self.cap_by_threshold),
            "cmap": self.cmap,
            "cap_upper": self.cap_upper,
            "cmap_upper": self.cmap_upper,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)

    def table(self) -> str:
        names = [c.value for c in CLASSES]
        head = f"{'metric':<12}" + "".join(f"{n:>10}" for n in names) + f"{'mean':>10}"
        rows = [head]

        def row(label, per, mean):
            if per is None:
                return
            rows.append(f"{label:<12}" + "".join(f"{per[n]:>10.4f}" for n in names) + f"{mean:>10.4f}")

        for t in self.thresholds:
            per = {n: self.ap_by_threshold[n][t] for n in names}
            row(f"AP@{t:g}", per, float(np.mean(list(per.values()))))
        row("AP", self.ap, self.map)
        row("C-AP", self.cap, self.cmap)
        row("C-AP upper", self.cap_upper, self.cmap_upper)
        return "\n".join(rows)


def _as_pairs(preds, gts) -> list[tuple[Sequence, Sequence]]:
    if isinstance(preds, Sequence):
        preds, gts = [preds], [gts]
    preds, gts = list(preds), list(gts)
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} prediction sequences vs {len(gts)} ground-truth sequences")
    for k, (p, g) in enumerate(zip(preds, gts)):
        if len(p.frames) != len(g.frames):
            raise ValueError(f"sequence {k}: {len(p.frames)} prediction frames vs {len(g.frames)} ground-truth frames")
    return list(zip(preds, gts))


def _sequence_records(sid: int, pred: Sequence, gt: Sequence, thresholds, mode: str, n: int):
    """Records for one sequence, keyed by (class, threshold).

    mode: "standard" (every prediction), "upper" (ID-bearing predictions, no check),
    "consistent" (ID-bearing predictions with the track consistency check).
    """
    out = {(c, t): [] for c in CLASSES for t in thresholds}
    seen = {t: {} for t in thresholds}  # gt global id -> pred global id, per threshold
    for pf, gf in zip(pred.frames, gt.frames):
        for c in CLASSES:
            ps = [e for e in pf.elements if e.cls is c and (mode == "standard" or e.global_id is not None)]
            ps.sort(key=lambda e: -(e.score if e.score is not None else 1.0))
            if not ps:
                continue
            gs = [e for e in gf.elements if e.cls is c]
            cost, asg = match_by_chamfer(ps, gs, n)
            matched = asg.as_dict()
            for j, p in enumerate(ps):
                score = p.score if p.score is not None else 1.0
                g = matched.get(j)
                for t in thresholds:
                    tp = g is not None and cost[j, g] <= t
                    if tp and mode == "consistent":
                        gid = gs[g].global_id
                        prior = seen[t].get(gid)
                        if prior is None:
                            seen[t][gid] = p.global_id
                        elif prior != p.global_id:
                            tp = False
                    out[(c, t)].append(DetectionRecord(score, tp, c, sid, pf.index))
    return out


def _evaluate(pairs, thresholds, mode: str, n: int, workers: int = 1):
    thresholds = tuple(float(t) for t in thresholds)
    if not thresholds:
        raise ValueError("at least one threshold is required")
    jobs = [(sid, p, g) for sid, (p, g) in enumerate(pairs)]
    run = lambda job: _sequence_records(job[0], job[1], job[2], thresholds, mode, n)  # noqa: E731
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    num_gt = {c: sum(1 for _, g in pairs for fr in g.frames for e in fr.elements if e.cls is c) for c in CLASSES}
    by_t = {}
    for c in CLASSES:
        by_t[c.value] = {}
        for t in thresholds:
            recs = [r for part in parts for r in part[(c, t)]]  # pooled in sequence order
            by_t[c.value][t] = average_precision(recs, num_gt[c])
    per_class = {c: float(np.mean(list(v.values()))) for c, v in by_t.items()}
    return by_t, per_class, float(np.mean(list(per_class.values())))


def _require_ids(pairs):
    for k, (p, g) in enumerate(pairs):
        for fr in g.frames:
            for i, e in enumerate(fr.elements):
                if e.global_id is None:
                    raise MissingTracksError(
                        f"sequence {k}, frame {fr.index}, ground-truth element {i} has no global_id; "
                        "form ground-truth tracks first (vecmap tracks --gt)")
        preds = [e for fr in p.frames for e in fr.elements]
        if preds and all(e.global_id is None for e in preds):
            raise MissingTracksError(
                f"sequence {k}: predictions carry no global_id; run the tracker first (vecmap tracks)")


def standard_map(preds, gts, thresholds=DEFAULT_THRESHOLDS, n: int = DEFAULT_POINTS, workers: int = 1) -> MetricReport:
    pairs = _as_pairs(preds, gts)
    by_t, ap, m = _evaluate(pairs, thresholds, "standard", n, workers)
    return MetricReport(tuple(float(t) for t in thresholds), by_t, ap, m)


def consistency_map(preds, gts, thresholds=DEFAULT_THRESHOLDS, n: int = DEFAULT_POINTS, workers: int = 1):
    """(per-threshold C-AP, per-class C-AP, C-mAP). Only ID-bearing predictions take part."""
    pairs = _as_pairs(preds, gts)
    _require_ids(pairs)
    return _evaluate(pairs, thresholds, "consistent", n, workers)


def cmap_upper_bound(preds, gts, thresholds=DEFAULT_THRESHOLDS, n: int = DEFAULT_POINTS, workers: int = 1):
    """C-mAP with the consistency check switched off; (per-threshold, per-class, mean)."""
    pairs = _as_pairs(preds, gts)
    _require_ids(pairs)
    return _evaluate(pairs, thresholds, "upper", n, workers)


def evaluate(preds, gts, thresholds=DEFAULT_THRESHOLDS, with_cmap: bool = True, n: int = DEFAULT_POINTS,
             workers: int = 1) -> MetricReport:
    report = standard_map(preds, gts, thresholds, n, workers)
    if with_cmap:
        report.cap_by_threshold, report.cap, report.cmap = consistency_map(preds, gts, thresholds, n, workers)
        _, report.cap_upper, report.cmap_upper = cmap_upper_bound(preds, gts, thresholds, n, workers)
    return report


def positives_only(seq: Sequence) -> Sequence:
    """Keep ID-bearing predictions (the subset C-mAP scores)."""
    return seq.map_elements(lambda fr, els: [e for e in els if e.global_id is not None])

