"""Command line behavior: outputs, exit codes, and manifest-driven reruns."""

import json

import pytest

from livereid.cli import main

GEN_FLAGS = {
    "n_identities": "--identities",
    "frames_per_video": "--frames",
    "n_videos_per_camera": "--videos-per-camera",
    "n_cameras": "--cameras",
    "entry_rate": "--entry-rate",
    "exit_rate": "--exit-rate",
    "passer_fraction": "--passer-fraction",
    "passer_entry_rate": "--passer-entry-rate",
    "passer_exit_rate": "--passer-exit-rate",
    "miss_probability": "--miss-prob",
    "box_jitter_sigma": "--jitter",
    "bad_crop_probability": "--p-bad",
    "bad_crop_weight": "--bad-weight",
    "crossing_rate": "--crossing-rate",
    "embedding_dim": "--dim",
    "scorer_fidelity": "--fidelity",
    "n_queries": "--queries",
    "seed": "--seed",
    "frame_width": "--frame-width",
    "frame_height": "--frame-height",
}

RUN_FLAGS = {
    "mode": "--mode",
    "n": "--n",
    "tau": "--tau",
    "eta": "--eta",
    "beta_step": "--beta-step",
    "scorer": "--scorer",
    "tracker": "--tracker",
    "seed": "--seed",
    "iou_match_threshold": "--iou-threshold",
    "min_confidence": "--min-confidence",
    "frame_width": "--frame-width",
    "frame_height": "--frame-height",
}


def flags_from(manifest_section, mapping):
    argv = []
    for key, flag in mapping.items():
        if key in manifest_section:
            argv += [flag, str(manifest_section[key])]
    return argv


def snapshot(directory):
    return {p.name: p.read_bytes() for p in directory.iterdir() if p.is_file()}


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("world") / "data"
    code = main(["gen", "--out-dir", str(out), "--frames", "400",
                 "--cameras", "1", "--queries", "3", "--seed", "12"])
    assert code == 0
    return out


def test_gen_writes_the_five_tables_and_a_manifest(data_dir):
    names = {p.name for p in data_dir.iterdir()}
    assert names == {
        "detections.csv", "ground_truth.csv", "embeddings.csv",
        "queries.csv", "scores.csv", "manifest.json",
    }
    manifest = json.loads((data_dir / "manifest.json").read_text())
    assert manifest["command"] == "gen"
    assert manifest["world"]["seed"] == 12


def test_run_and_eval_agree(tmp_path, data_dir):
    run_dir = tmp_path / "run"
    code = main(["run", "--data-dir", str(data_dir), "--out-dir", str(run_dir),
                 "--mode", "trade", "--scorer", "table"])
    assert code == 0
    produced = {p.name for p in run_dir.iterdir()}
    assert {"summary.json", "curve.csv", "curve.png", "manifest.json",
            "rankings.csv", "galleries.csv", "query_chunks.csv",
            "run_config.json"} <= produced

    eval_dir = tmp_path / "eval"
    code = main(["eval", "--run-dir", str(run_dir), "--data-dir", str(data_dir),
                 "--out-dir", str(eval_dir)])
    assert code == 0
    for name in ("summary.json", "curve.csv", "curve.png"):
        assert (eval_dir / name).read_bytes() == (run_dir / name).read_bytes()


def test_summary_contains_the_headline_fields(tmp_path, data_dir):
    run_dir = tmp_path / "run"
    main(["run", "--data-dir", str(data_dir), "--out-dir", str(run_dir),
          "--mode", "skip", "--scorer", "table"])
    summary = json.loads((run_dir / "summary.json").read_text())
    for field in ("f1_star", "beta_star", "map", "fr", "tvr",
                  "gallery_sizes", "similarity_ops", "per_query", "config"):
        assert field in summary
    assert summary["config"]["mode"] == "skip"


def test_sweep_produces_a_table_and_figure(tmp_path, data_dir):
    out = tmp_path / "sweep"
    code = main(["sweep-n", "--data-dir", str(data_dir), "--out-dir", str(out),
                 "--scorer", "table", "--n-values", "1,5,20"])
    assert code == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "n,fr,tvr,f1_star,beta_star,map,gallery_total,similarity_ops"
    assert len(lines) == 4
    assert (out / "sweep.png").read_bytes()[:4] == b"\x89PNG"


def test_compare_covers_all_three_modes(tmp_path, data_dir):
    out = tmp_path / "compare"
    code = main(["compare", "--data-dir", str(data_dir), "--out-dir", str(out),
                 "--scorer", "table"])
    assert code == 0
    lines = (out / "compare.csv").read_text().splitlines()
    assert [line.split(",")[0] for line in lines] == [
        "mode", "baseline", "skip", "trade"
    ]
    assert (out / "compare.png").read_bytes()[:4] == b"\x89PNG"


def test_invalid_configuration_exits_one(tmp_path, data_dir):
    out = tmp_path / "bad"
    assert main(["sweep-n", "--data-dir", str(data_dir), "--out-dir", str(out),
                 "--n-values", "20,5"]) == 1
    assert main(["gen", "--out-dir", str(out), "--p-bad", "1.5"]) == 1
    assert main(["run", "--data-dir", str(data_dir), "--out-dir", str(out),
                 "--mode", "trade", "--n", "0"]) == 1


def test_missing_inputs_exit_two(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--data-dir", str(tmp_path / "nowhere"),
                 "--out-dir", str(out), "--mode", "trade"]) == 2


def test_bad_usage_exits_one(tmp_path):
    assert main(["run", "--out-dir", str(tmp_path)]) == 1  # data-dir missing
    assert main(["no-such-command"]) == 1


def test_gen_rerun_from_manifest_is_byte_identical(tmp_path, data_dir):
    manifest = json.loads((data_dir / "manifest.json").read_text())
    again = tmp_path / "again"
    code = main(["gen", "--out-dir", str(again)]
                + flags_from(manifest["world"], GEN_FLAGS))
    assert code == 0
    assert snapshot(again) == snapshot(data_dir)


def test_run_rerun_from_manifest_is_byte_identical(tmp_path, data_dir):
    first = tmp_path / "first"
    main(["run", "--data-dir", str(data_dir), "--out-dir", str(first),
          "--mode", "trade", "--scorer", "table", "--n", "10"])
    manifest = json.loads((first / "manifest.json").read_text())
    again = tmp_path / "again"
    code = main(["run", "--data-dir", manifest["inputs"]["data_dir"],
                 "--out-dir", str(again)]
                + flags_from(manifest["config"], RUN_FLAGS))
    assert code == 0
    assert snapshot(again) == snapshot(first)
