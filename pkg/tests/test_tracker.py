from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import relabel_bijective
from vecmap.scene import Element, ElementClass, Frame, Polyline, Pose2, Sequence, TrackBook, ValidationError
from vecmap.synth import NoiseSpec, WorldSpec, make_scene
from vecmap.tracker import ConfigError, TrackerConfig, annotate, extract_tracks, form_gt_tracks

LINE = Polyline(((5.0, -20.0), (5.0, 20.0)))


def _static(scores, geom=LINE):
    frames = []
    for t, s in enumerate(scores):
        els = () if s is None else (Element(ElementClass.BOUNDARY, geom, s),)
        frames.append(Frame(t, Pose2(), els))
    return Sequence(tuple(frames))


def test_static_boundary_one_track():
    book = extract_tracks(_static([0.9, 0.9, 0.9]), TrackerConfig(lookback=1))
    assert book.frames == ({0: 0}, {0: 0}, {0: 0}) and book.num_tracks == 1


def test_dropout_splits_at_n1_and_reidentifies_at_n2():
    seq = _static([0.9, 0.1, 0.9])
    n1 = extract_tracks(seq, TrackerConfig(lookback=1))
    assert n1.frames == ({0: 0}, {}, {0: 1})
    n2 = extract_tracks(seq, TrackerConfig(lookback=2))
    assert n2.frames == ({0: 0}, {}, {0: 0})


def test_tau_is_strict():
    assert extract_tracks(_static([0.4, 0.4]), TrackerConfig(tau=0.4)).frames == ({}, {})


def test_all_below_tau_is_empty():
    book = extract_tracks(_static([0.2, 0.3, 0.1]))
    assert len(book) == 0 and book.num_tracks == 0


def test_config_validation():
    with pytest.raises(ConfigError):
        extract_tracks(_static([0.9]), TrackerConfig(lookback=0))
    with pytest.raises(ConfigError):
        TrackerConfig(tau=1.5).validate()


def test_missing_scores_rejected():
    seq = Sequence((Frame(0, Pose2(), (Element(ElementClass.BOUNDARY, LINE),)),))
    with pytest.raises(ValidationError):
        extract_tracks(seq)


def test_moving_ego_keeps_identity():
    # world line x=5 seen while driving forward along +y
    frames = []
    for t in range(5):
        ego = Pose2(0, 2.0 * t, 0)
        local = ego.inverse().apply([(5.0, -20.0), (5.0, 20.0)])
        frames.append(Frame(t, ego, (Element(ElementClass.BOUNDARY, Polyline.from_array(local), 0.9),)))
    assert extract_tracks(Sequence(tuple(frames))).num_tracks == 1


def test_smaller_lookback_wins():
    # frame 2 sees two dividers; frame 1 only sees the left one, frame 0 sees both.
    left, right = Polyline(((-2, -20), (-2, 20))), Polyline(((2, -20), (2, 20)))
    div = ElementClass.DIVIDER
    seq = Sequence((
        Frame(0, Pose2(), (Element(div, left, 0.9), Element(div, right, 0.9))),
        Frame(1, Pose2(), (Element(div, left, 0.9),)),
        Frame(2, Pose2(), (Element(div, left, 0.9), Element(div, right, 0.9))),
    ))
    book = extract_tracks(seq, TrackerConfig(lookback=2))
    assert book.frames == ({0: 0, 1: 1}, {0: 0}, {0: 0, 1: 1})


def test_gt_tracks_persist():
    seq = Sequence(tuple(Frame(t, Pose2(), (Element(ElementClass.BOUNDARY, LINE),)) for t in range(3)))
    assert form_gt_tracks(seq).frames == ({0: 0}, {0: 0}, {0: 0})


def test_gt_tracks_no_reidentification():
    els = [(Element(ElementClass.DIVIDER, LINE),), (), (Element(ElementClass.DIVIDER, LINE),)]
    seq = Sequence(tuple(Frame(t, Pose2(), e) for t, e in enumerate(els)))
    book = form_gt_tracks(seq, TrackerConfig(lookback=5))
    assert book.frames == ({0: 0}, {}, {0: 1})


def test_gt_tracks_empty():
    book = form_gt_tracks(Sequence())
    assert book.frames == () and book.next_id == 0


def test_annotate():
    seq = _static([0.9, 0.9])
    assert annotate(seq, TrackBook()) == seq
    book = extract_tracks(seq)
    out = annotate(seq, book)
    assert [[e.global_id for e in fr.elements] for fr in out.frames] == [[0], [0]]
    with pytest.raises(ValidationError):
        annotate(seq, TrackBook(({3: 0},), 1))


def _ids(seq):
    return {(fr.index, i): e.global_id for fr in seq.frames for i, e in enumerate(fr.elements)}


@pytest.mark.parametrize("seed", range(6))
def test_noiseless_recovers_oracle_ids(seed):
    spec = WorldSpec(seed=seed, trajectory=("straight", "arc", "s-curve")[seed % 3], length=60, spacing=4)
    _, gt, pred = make_scene(spec)
    book = extract_tracks(pred, TrackerConfig(tau=0.0, lookback=1))
    assert relabel_bijective(_ids(gt), _ids(annotate(pred, book)))


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.integers(1, 3))
def test_longer_lookback_never_adds_tracks(seed, n):
    spec = WorldSpec(seed=seed, length=40, spacing=3)
    _, _, pred = make_scene(spec, NoiseSpec(sigma=0.1, drop=0.3, clutter=0.3), noise_seed=seed)
    shorter = extract_tracks(pred, TrackerConfig(lookback=n)).num_tracks
    longer = extract_tracks(pred, TrackerConfig(lookback=n + 2)).num_tracks
    assert longer <= shorter


def _partition(seq, book, perms):
    # tracks as sets of (frame, original element index)
    tracks = {}
    for t, m in enumerate(book.frames):
        for local, gid in m.items():
            tracks.setdefault(gid, set()).add((t, perms[t][local]))
    return sorted(map(sorted, tracks.values()))


@pytest.mark.parametrize("seed", range(4))
def test_element_order_invariance(seed):
    spec = WorldSpec(seed=seed, length=40, spacing=3)
    _, _, pred = make_scene(spec, NoiseSpec(sigma=0.1, drop=0.2), noise_seed=seed)
    rng = np.random.default_rng(seed)
    perms = [rng.permutation(len(fr.elements)) for fr in pred.frames]
    shuffled = Sequence(tuple(Frame(fr.index, fr.ego_pose, tuple(fr.elements[k] for k in p))
                              for fr, p in zip(pred.frames, perms)), pred.window)
    ident = [np.arange(len(fr.elements)) for fr in pred.frames]
    cfg = TrackerConfig(lookback=3)
    assert _partition(pred, extract_tracks(pred, cfg), ident) == _partition(shuffled, extract_tracks(shuffled, cfg), perms)
