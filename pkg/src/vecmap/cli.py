"""Command-line frontend: synth, tracks, eval, merge, raster.

Exit codes: 0 success, 1 input or semantic error, 2 usage error. Every command that
writes files also writes a run manifest next to its primary output; the manifest is
the only output that varies between runs (it records wall-clock duration).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .merger import map_to_sequence, merge_sequence, render_svg
from .metrics import DEFAULT_THRESHOLDS, evaluate
from .raster import DEFAULT_THICKNESS, GridSpec, rasterize_frame, to_pgm
from .scene import ElementClass, SequenceFormatError, ValidationError, load_sequence, save_sequence
from .synth import ID_MODES, SCORE_MODELS, TRAJECTORIES, NoiseSpec, WorldSpec, make_scene
from .tracker import TrackerConfig, annotate, extract_tracks, form_gt_tracks

MANIFEST_SUFFIX = ".manifest.json"


class InputError(Exception):
    """Bad or inconsistent input data (exit 1)."""


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict[str, str] = field(default_factory=dict)
    version: str = __version__
    duration_s: float = 0.0

    def dumps(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def workers() -> int:
    """Worker count: CPU count, capped by VECMAP_THREADS when set."""
    n = os.cpu_count() or 1
    cap = os.environ.get("VECMAP_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise InputError(f"VECMAP_THREADS must be an integer, got {cap!r}") from None
    return n


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _read(path: str, manifest: RunManifest) -> bytes:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    manifest.inputs[path] = _digest(data)
    return data


def _load(path: str, manifest: RunManifest):
    data = _read(path, manifest)
    try:
        return load_sequence(data)
    except (SequenceFormatError, ValidationError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _write(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)


def _write_manifest(path: Path, manifest: RunManifest, start: float):
    manifest.duration_s = round(time.perf_counter() - start, 6)
    _write(path, manifest.dumps().encode("utf-8"))


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")}


def cmd_synth(args) -> int:
    start = time.perf_counter()
    world = WorldSpec(seed=args.seed, trajectory=args.trajectory, length=args.length, spacing=args.spacing,
                      radius=args.radius)
    noise = NoiseSpec(sigma=args.noise_sigma, drop=args.noise_drop, score_model=args.score_model,
                      id_mode=args.id_mode, clutter=args.noise_clutter)
    _, gt, pred = make_scene(world, noise, noise_seed=args.noise_seed)
    out = Path(args.out_dir)
    _write(out / "gt.seq", save_sequence(gt))
    _write(out / "pred.seq", save_sequence(pred))
    _write_manifest(out / "synth.manifest.json", RunManifest("synth", _config(args)), start)
    print(f"wrote {out / 'gt.seq'} ({len(gt.frames)} frames) and {out / 'pred.seq'}")
    return 0


def cmd_tracks(args) -> int:
    start = time.perf_counter()
    manifest = RunManifest("tracks", _config(args))
    seq = _load(args.input, manifest)
    cfg = TrackerConfig(tau=args.tau, lookback=args.lookback, thickness=args.thickness, min_iou=args.min_iou)
    if args.gt:
        book = form_gt_tracks(seq, cfg)
    else:
        missing = [(fr.index, i) for fr in seq.frames for i, e in enumerate(fr.elements) if e.score is None]
        if missing:
            f, i = missing[0]
            raise InputError(f"{args.input}: frame {f}, element {i} has no score; "
                             "pass --gt to form ground-truth tracks from an unscored file")
        book = extract_tracks(seq, cfg)
    out = Path(args.out)
    _write(out, save_sequence(annotate(seq, book)))
    _write_manifest(out.with_name(out.name + MANIFEST_SUFFIX), manifest, start)
    print(f"tracks: {book.num_tracks}")
    return 0


def cmd_eval(args) -> int:
    start = time.perf_counter()
    if len(args.pred) != len(args.gt):
        raise UsageError(f"got {len(args.pred)} --pred files but {len(args.gt)} --gt files")
    manifest = RunManifest("eval", _config(args))
    preds = [_load(p, manifest) for p in args.pred]
    gts = [_load(g, manifest) for g in args.gt]
    try:
        report = evaluate(preds, gts, args.thresholds, with_cmap=not args.no_cmap, workers=workers())
    except ValidationError as exc:
        raise InputError(f"{exc}; or pass --no-cmap for plain mAP") from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    text = report.dumps() + "\n"
    if args.out:
        out = Path(args.out)
        _write(out, text.encode("utf-8"))
        _write_manifest(out.with_name(out.name + MANIFEST_SUFFIX), manifest, start)
    else:
        sys.stdout.write(text)
        if args.manifest:
            _write_manifest(Path(args.manifest), manifest, start)
    return 0


def cmd_merge(args) -> int:
    start = time.perf_counter()
    manifest = RunManifest("merge", _config(args))
    seq = _load(args.input, manifest)
    if not any(e.global_id is not None for fr in seq.frames for e in fr.elements):
        raise InputError(f"{args.input}: no element carries a global_id; run `vecmap tracks` first")
    # elements the tracker left unassigned (score at or below tau) are not part of any track
    seq = seq.map_elements(lambda fr, els: [e for e in els if e.global_id is not None])
    try:
        gmap = merge_sequence(seq, censor_edges=not args.no_censor)
    except ValidationError as exc:
        raise InputError(f"{args.input}: {exc}") from None
    out = Path(args.out)
    _write(out, save_sequence(map_to_sequence(gmap, seq.window)))
    if args.svg:
        _write(Path(args.svg), render_svg(gmap))
    _write_manifest(out.with_name(out.name + MANIFEST_SUFFIX), manifest, start)
    print(f"merged {len(gmap)} elements")
    return 0


def cmd_raster(args) -> int:
    start = time.perf_counter()
    manifest = RunManifest("raster", _config(args))
    seq = _load(args.input, manifest)
    if not 0 <= args.frame < len(seq.frames):
        raise InputError(f"{args.input}: frame {args.frame} out of range (0..{len(seq.frames) - 1})")
    grid = GridSpec(half_width_m=seq.window[0], half_length_m=seq.window[1])
    masks = rasterize_frame(seq.frames[args.frame], args.thickness, grid, args.fill_crossings)
    out = Path(args.out)
    _write(out, to_pgm(masks[ElementClass(args.cls)]))
    _write_manifest(out.with_name(out.name + MANIFEST_SUFFIX), manifest, start)
    return 0


class UsageError(Exception):
    """Flag combinations argparse cannot check on its own (exit 2)."""


def _positive(kind):
    def parse(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
        return v
    return parse


def _unit(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return v


def _nonneg(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _thresholds(text):
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("thresholds must be positive")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vecmap", description="Consistent vector-map benchmark tools.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic world, its ground truth and noisy predictions")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise-seed", type=int, default=None, help="defaults to --seed")
    s.add_argument("--trajectory", choices=TRAJECTORIES, default="straight")
    s.add_argument("--length", type=_positive(float), default=100.0, help="trajectory length in metres")
    s.add_argument("--spacing", type=_positive(float), default=5.0, help="metres between frames")
    s.add_argument("--radius", type=_positive(float), default=80.0, help="turn radius for arc/s-curve")
    s.add_argument("--noise-sigma", type=_nonneg, default=0.0)
    s.add_argument("--noise-drop", type=_unit, default=0.0)
    s.add_argument("--noise-clutter", type=_nonneg, default=0.0, help="mean false positives per frame")
    s.add_argument("--score-model", choices=SCORE_MODELS, default="calibrated")
    s.add_argument("--id-mode", choices=ID_MODES, default="oracle")
    s.add_argument("--out-dir", default=".")
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("tracks", help="assign global IDs (look-back tracker or ground-truth chaining)")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--gt", action="store_true", help="treat the input as ground truth (no scores needed)")
    t.add_argument("--tau", type=_unit, default=TrackerConfig.tau)
    t.add_argument("--lookback", type=_positive(int), default=TrackerConfig.lookback)
    t.add_argument("--thickness", type=_positive(float), default=DEFAULT_THICKNESS)
    t.add_argument("--min-iou", type=_unit, default=TrackerConfig.min_iou)
    t.set_defaults(func=cmd_tracks)

    e = sub.add_parser("eval", help="Chamfer mAP and C-mAP report (JSON)")
    e.add_argument("--pred", action="append", required=True, help="repeatable; pairs with --gt in order")
    e.add_argument("--gt", action="append", required=True)
    e.add_argument("--thresholds", type=_thresholds, default=DEFAULT_THRESHOLDS, help="e.g. 0.5,1.0,1.5")
    e.add_argument("--no-cmap", action="store_true")
    e.add_argument("--out", default=None, help="write the report here instead of stdout")
    e.add_argument("--manifest", default=None, help="manifest path when printing to stdout")
    e.set_defaults(func=cmd_eval)

    m = sub.add_parser("merge", help="merge a tracked sequence into a global map")
    m.add_argument("--in", dest="input", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--svg", default=None)
    m.add_argument("--no-censor", action="store_true", help="treat every curve end as a window cut")
    m.set_defaults(func=cmd_merge)

    r = sub.add_parser("raster", help="dump one frame's class mask as PGM")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--frame", type=int, default=0)
    r.add_argument("--class", dest="cls", choices=[c.value for c in ElementClass], default="divider")
    r.add_argument("--thickness", type=_positive(float), default=DEFAULT_THICKNESS)
    r.add_argument("--fill-crossings", action="store_true")
    r.set_defaults(func=cmd_raster)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except InputError as exc:
        print(f"vecmap {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
