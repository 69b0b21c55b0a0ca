"""End-to-end CLI runs against temp files."""

import numpy as np

from centerseg import GridDims, OffsetMap, SemanticMap
from centerseg.cli import main
from centerseg.formats import (
    read_manifest,
    tracks_csv_loads,
    write_offsets,
    write_semantic,
)

SCENE = """
width=128
height=96
n_piglets=4
seed=5
sow=on
sow_half_length=16
sow_radius=9
sow_min_visible_area=100
n_random_occluders=1
"""


def write_scene(tmp_path, extra=""):
    path = tmp_path / "scene.cfg"
    path.write_text(SCENE + extra)
    return path


def test_synth_then_segment_then_eval(tmp_path, capsys):
    scene = write_scene(tmp_path)
    out = tmp_path / "frames"
    assert main(["synth", str(scene), "--out-dir", str(out), "--frames", "3"]) == 0
    assert sorted(p.name for p in out.glob("*.ccsm")) == [
        "frame_0000.ccsm", "frame_0001.ccsm", "frame_0002.ccsm",
    ]

    assert main([
        "segment", "--batch-dir", str(out), "--min-pts", "25", "--jobs", "2",
    ]) == 0
    manifests = sorted(out.glob("frame_*.json"))
    assert len(manifests) == 3
    frame_id, dims, instances = read_manifest(manifests[0])
    assert dims == GridDims(128, 96)
    assert sum(1 for i in instances if i.cls == "piglet") == 4

    gts = sorted(str(p) for p in out.glob("gt_*.json"))
    preds = sorted(str(p) for p in manifests)
    assert main(["eval", "--pred", *preds, "--gt", *gts]) == 0
    shown = capsys.readouterr().out
    assert "mAP = 1.000" in shown


def test_segment_single_pair_and_blank(tmp_path):
    dims = GridDims(32, 24)
    sem = SemanticMap(dims, np.zeros(dims.shape, dtype=np.uint8))
    off = OffsetMap(dims, np.zeros((*dims.shape, 2), dtype=np.float32))
    write_semantic(tmp_path / "a.ccsm", sem)
    write_offsets(tmp_path / "a.ccof", off)
    out = tmp_path / "a.json"
    code = main([
        "segment", str(tmp_path / "a.ccsm"), str(tmp_path / "a.ccof"), "--out", str(out),
    ])
    assert code == 0
    _, _, instances = read_manifest(out)
    assert instances == []


def test_segment_dimension_mismatch_exit_2(tmp_path):
    sem = SemanticMap(GridDims(32, 24), np.zeros((24, 32), dtype=np.uint8))
    off = OffsetMap(GridDims(33, 24), np.zeros((24, 33, 2), dtype=np.float32))
    write_semantic(tmp_path / "a.ccsm", sem)
    write_offsets(tmp_path / "a.ccof", off)
    code = main([
        "segment", str(tmp_path / "a.ccsm"), str(tmp_path / "a.ccof"),
        "--out", str(tmp_path / "a.json"),
    ])
    assert code == 2


def test_segment_malformed_input_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ccsm"
    bad.write_bytes(b"JUNKJUNKJUNKJUNK")
    (tmp_path / "bad.ccof").write_bytes(b"")
    code = main([
        "segment", str(bad), str(tmp_path / "bad.ccof"), "--out", str(tmp_path / "o.json"),
    ])
    assert code == 2
    err = capsys.readouterr().err
    assert "bad.ccsm" in err and "byte 0" in err


def test_track_pipeline(tmp_path):
    scene = write_scene(tmp_path, "max_speed=2\n")
    frames_dir = tmp_path / "frames"
    assert main(["synth", str(scene), "--out-dir", str(frames_dir), "--frames", "5"]) == 0
    assert main(["segment", "--batch-dir", str(frames_dir), "--min-pts", "25"]) == 0
    manifests = sorted(str(p) for p in frames_dir.glob("frame_*.json"))
    out = tmp_path / "tracks"
    assert main(["track", *manifests, "--out-dir", str(out)]) == 0
    rows = tracks_csv_loads((out / "tracks.csv").read_text())
    assert {r[0] for r in rows} == {0, 1, 2, 3, 4}
    assert (out / "metrics.csv").exists()
    assert list(out.glob("track_*_heatmap.pgm"))
    assert list(out.glob("track_*_counts.csv"))


def test_track_missing_manifest_names_index(tmp_path, capsys):
    code = main(["track", str(tmp_path / "nope.json"), "--out-dir", str(tmp_path / "t")])
    assert code == 2
    assert "frame 0" in capsys.readouterr().err


def test_eval_misaligned_exit_2(tmp_path, capsys):
    a = tmp_path / "a.json"
    a.write_text('{"frame":0,"height":4,"instances":[],"width":4}\n')
    code = main(["eval", "--pred", str(a), "--gt", str(a), str(a)])
    assert code == 2


def test_gradcheck_cli(capsys):
    assert main(["gradcheck", "--n", "4"]) == 0
    out = capsys.readouterr().out
    assert "focal" in out and "offset" in out and "pass" in out
    assert main(["gradcheck", "--n", "4", "--corrupt"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out
    assert "component" in out


def test_bench_small(capsys):
    assert main(["bench", "--sizes", "0,400", "--min-pts", "5"]) == 0
    out = capsys.readouterr().out
    assert "0,0.0,0.0,n/a" in out
    assert "stage,seconds" in out
    for stage in ("generate", "filter", "cluster", "assemble", "reassign", "sow", "total"):
        assert stage in out


def test_config_file_plus_flag_overrides(tmp_path):
    cfg_path = tmp_path / "pipe.cfg"
    cfg_path.write_text("eps=2.0\nmin_pts=9\n")
    dims = GridDims(16, 16)
    sem = SemanticMap(dims, np.zeros(dims.shape, dtype=np.uint8))
    off = OffsetMap(dims, np.zeros((*dims.shape, 2), dtype=np.float32))
    write_semantic(tmp_path / "a.ccsm", sem)
    write_offsets(tmp_path / "a.ccof", off)
    code = main([
        "segment", str(tmp_path / "a.ccsm"), str(tmp_path / "a.ccof"),
        "--out", str(tmp_path / "o.json"), "--config", str(cfg_path), "--eps", "3.5",
    ])
    assert code == 0


def test_unknown_config_key_exit_2(tmp_path):
    cfg_path = tmp_path / "pipe.cfg"
    cfg_path.write_text("epz=2.0\n")
    dims = GridDims(16, 16)
    write_semantic(tmp_path / "a.ccsm", SemanticMap(dims, np.zeros(dims.shape, dtype=np.uint8)))
    write_offsets(tmp_path / "a.ccof", OffsetMap(dims, np.zeros((*dims.shape, 2), dtype=np.float32)))
    code = main([
        "segment", str(tmp_path / "a.ccsm"), str(tmp_path / "a.ccof"),
        "--out", str(tmp_path / "o.json"), "--config", str(cfg_path),
    ])
    assert code == 2
