from __future__ import annotations

import json

import pytest

from vecmap.cli import main
from vecmap.scene import load_sequence, save_sequence, strip_ids


def run(*argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:  # argparse usage errors
        return exc.code


@pytest.fixture
def scene(tmp_path):
    assert run("synth", "--seed", 3, "--length", 40, "--spacing", 4, "--noise-sigma", 0.1, "--noise-drop", 0.2,
               "--out-dir", tmp_path) == 0
    return tmp_path


def test_synth_writes_files(scene):
    assert {p.name for p in scene.iterdir()} == {"gt.seq", "pred.seq", "synth.manifest.json"}
    man = json.loads((scene / "synth.manifest.json").read_text())
    assert man["command"] == "synth" and man["config"]["seed"] == 3
    gt = load_sequence((scene / "gt.seq").read_bytes())
    assert len(gt.frames) == 11


def test_drop_all_gives_empty_predictions(tmp_path):
    assert run("synth", "--noise-drop", 1.0, "--length", 20, "--out-dir", tmp_path) == 0
    pred = load_sequence((tmp_path / "pred.seq").read_bytes())
    assert all(not fr.elements for fr in pred.frames)


def test_full_pipeline(scene, capsys):
    d = scene
    assert run("tracks", "--in", d / "pred.seq", "--out", d / "pred.trk") == 0
    assert run("tracks", "--gt", "--in", d / "gt.seq", "--out", d / "gt.trk") == 0
    assert (d / "pred.trk.manifest.json").exists()
    capsys.readouterr()
    assert run("eval", "--pred", d / "pred.trk", "--gt", d / "gt.trk") == 0
    report = json.loads(capsys.readouterr().out)
    assert report["cmap"] <= report["cmap_upper"] <= 1.0
    assert run("eval", "--pred", d / "pred.trk", "--gt", d / "gt.trk", "--thresholds", "0.5", "--no-cmap",
               "--out", d / "report.json") == 0
    data = json.loads((d / "report.json").read_text())
    assert data["cmap"] is None and list(data["ap_by_threshold"]["divider"]) == ["0.5"]
    assert run("merge", "--in", d / "gt.trk", "--out", d / "map.seq", "--svg", d / "map.svg") == 0
    assert (d / "map.svg").read_bytes().startswith(b"<?xml")
    assert run("raster", "--in", d / "gt.seq", "--out", d / "f0.pgm", "--class", "boundary") == 0
    assert (d / "f0.pgm").read_bytes().startswith(b"P5\n200 400\n255\n")


def test_longer_lookback_fewer_ids(tmp_path, capsys):
    assert run("synth", "--seed", 1, "--length", 60, "--spacing", 3, "--noise-drop", 0.3, "--noise-sigma", 0.1,
               "--out-dir", tmp_path) == 0
    counts = []
    for n in (1, 5):
        capsys.readouterr()
        assert run("tracks", "--in", tmp_path / "pred.seq", "--out", tmp_path / f"n{n}.trk", "--lookback", n) == 0
        counts.append(int(capsys.readouterr().out.split()[-1]))
    assert counts[1] < counts[0]


def test_input_errors_exit_1(scene, tmp_path, capsys):
    assert run("tracks", "--in", tmp_path / "missing.seq", "--out", tmp_path / "x") == 1
    # ground truth has no scores: the tracker refuses without --gt
    assert run("tracks", "--in", scene / "gt.seq", "--out", tmp_path / "x") == 1
    assert "--gt" in capsys.readouterr().err
    # eval without IDs: C-mAP needs tracks
    bare = tmp_path / "bare.seq"
    bare.write_bytes(save_sequence(strip_ids(load_sequence((scene / "pred.seq").read_bytes()))))
    assert run("eval", "--pred", bare, "--gt", scene / "gt.seq") == 1
    assert "--no-cmap" in capsys.readouterr().err
    assert run("eval", "--pred", bare, "--gt", scene / "gt.seq", "--no-cmap") == 0
    bad = tmp_path / "bad.seq"
    bad.write_text("{not json\n")
    assert run("merge", "--in", bad, "--out", tmp_path / "m.seq") == 1
    assert run("raster", "--in", scene / "gt.seq", "--out", tmp_path / "r.pgm", "--frame", 99) == 1


def test_usage_errors_exit_2(scene, tmp_path):
    assert run("synth", "--length", 0, "--out-dir", tmp_path) == 2
    assert run("tracks", "--in", scene / "pred.seq", "--out", tmp_path / "x", "--lookback", 0) == 2
    assert run("eval", "--pred", scene / "pred.seq", "--pred", scene / "pred.seq", "--gt", scene / "gt.seq") == 2
    assert run("eval", "--pred", "a", "--gt", "b", "--thresholds", "x,y") == 2
    assert run("bogus") == 2
    assert run() == 2


def test_bad_thread_cap_is_an_input_error(scene, monkeypatch):
    monkeypatch.setenv("VECMAP_THREADS", "many")
    assert run("eval", "--pred", scene / "pred.seq", "--gt", scene / "gt.seq", "--no-cmap") == 1


def test_merge_skips_unassigned_and_rejects_untracked(tmp_path):
    assert run("synth", "--seed", 2, "--length", 30, "--spacing", 3, "--noise-sigma", 0.3, "--noise-clutter", 1.0,
               "--out-dir", tmp_path) == 0
    assert run("tracks", "--in", tmp_path / "pred.seq", "--out", tmp_path / "pred.trk") == 0
    tracked = load_sequence((tmp_path / "pred.trk").read_bytes())
    assert any(e.global_id is None for fr in tracked.frames for e in fr.elements)
    assert run("merge", "--in", tmp_path / "pred.trk", "--out", tmp_path / "map.seq") == 0
    bare = tmp_path / "bare.seq"
    bare.write_bytes(save_sequence(strip_ids(tracked)))
    assert run("merge", "--in", bare, "--out", tmp_path / "m2.seq") == 1
