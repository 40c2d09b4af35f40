"""CLI subcommands end to end: exit codes, report invariants, overrides."""

import copy
import json

import pytest

from clicksift import detector, pipeline
from clicksift.cli import main
from conftest import MOTIVATING


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """gen + train + calibrate once; the scan/eval tests reuse it."""
    root = tmp_path_factory.mktemp("cliws")
    benign_dir = root / "benign"
    labeled_dir = root / "labeled"
    model_path = root / "model.json"
    calibrated_path = root / "model.cal.json"
    assert main(["gen", "--seed", "11", "--benign", "500", "--fraud", "0",
                 "--out", str(benign_dir)]) == 0
    assert main(["gen", "--seed", "111", "--benign", "50", "--fraud", "50",
                 "--out", str(labeled_dir)]) == 0
    assert main(["train", "--benign", str(benign_dir), "--out", str(model_path)]) == 0
    assert main(["eval", "--labeled", str(labeled_dir), "--model", str(model_path),
                 "--calibrate", str(calibrated_path)]) == 0
    return root, benign_dir, labeled_dir, model_path, calibrated_path


def test_gen_exact_counts(tmp_path):
    out = tmp_path / "corpus"
    assert main(["gen", "--seed", "7", "--benign", "550", "--fraud", "50",
                 "--out", str(out)]) == 0
    assert len(list(out.glob("*.ir"))) == 600


def test_train_deterministic(tmp_path, workspace):
    _, benign_dir, _, model_path, _ = workspace
    other = tmp_path / "model2.json"
    assert main(["train", "--benign", str(benign_dir), "--out", str(other)]) == 0
    assert other.read_bytes() == model_path.read_bytes()


def test_trained_model_uncalibrated(workspace):
    _, _, _, model_path, _ = workspace
    assert detector.load_model(model_path).threshold is None


def test_scan_flags_motivating_example(workspace, capsys):
    root, _, _, _, calibrated = workspace
    code = main(["scan", str(MOTIVATING), "--model", str(calibrated)])
    out = capsys.readouterr().out
    assert code == 2
    assert "FRAUD at Main::onClick" in out


def test_shipped_reference_model_flags_motivating_example(capsys):
    reference = MOTIVATING.parent.parent / "models" / "reference.json"
    code = main(["scan", str(MOTIVATING), "--model", str(reference)])
    out = capsys.readouterr().out
    assert code == 2
    assert "FRAUD at Main::onClick" in out


def test_scan_benign_only_exit_zero(workspace, tmp_path):
    root, benign_dir, _, _, calibrated = workspace
    some_benign = sorted(benign_dir.glob("benign_000*.ir"))[:5]
    code = main(["scan", *map(str, some_benign), "--model", str(calibrated)])
    assert code == 0


def test_scan_directory_expansion_and_json(workspace, capsys):
    root, _, labeled_dir, _, calibrated = workspace
    code = main(["scan", str(labeled_dir), "--model", str(calibrated), "--json"])
    assert code == 2
    report = json.loads(capsys.readouterr().out)
    names = [e["package_id"] for e in report["entries"]]
    assert names == sorted(names)
    assert report["summary"]["n_packages"] == 100
    # JSON report round-trips exactly
    assert json.loads(json.dumps(report)) == report


def test_scan_missing_model_is_operational_error(tmp_path, capsys):
    code = main(["scan", str(MOTIVATING), "--model", str(tmp_path / "nope.json")])
    assert code == 1


def test_scan_uncalibrated_model_requires_threshold(workspace, capsys):
    _, _, _, model_path, _ = workspace
    assert main(["scan", str(MOTIVATING), "--model", str(model_path)]) == 1
    assert main(["scan", str(MOTIVATING), "--model", str(model_path),
                 "--threshold", "0.01"]) == 2


def test_malformed_file_reported_run_continues(workspace, tmp_path, capsys):
    _, _, _, _, calibrated = workspace
    bad = tmp_path / "bad.ir"
    bad.write_text("package broken\nclass C\nwhat is this\n")
    code = main(["scan", str(bad), str(MOTIVATING), "--model", str(calibrated)])
    out = capsys.readouterr().out
    assert code == 1  # operational error dominates
    assert "error" in out and "FRAUD" in out  # but the good file was still scanned


def test_threshold_override_changes_verdicts_not_scores(workspace):
    _, _, labeled_dir, _, calibrated = workspace
    model = detector.load_model(calibrated)
    paths = sorted(labeled_dir.glob("*.ir"))[:10]
    base = pipeline.scan_paths(paths, model, pipeline.ScanOptions())
    high = pipeline.scan_paths(paths, model, pipeline.ScanOptions(threshold=1e9))
    for a, b in zip(base["entries"], high["entries"]):
        for sa, sb in zip(a["sites"], b["sites"]):
            assert sa["score"] == sb["score"]
            assert sb["label"] == "Benign"
    assert high["summary"]["n_fraud_apps"] == 0


def test_jobs_parallel_report_identical(workspace):
    _, _, labeled_dir, _, calibrated = workspace
    model = detector.load_model(calibrated)
    paths = sorted(labeled_dir.glob("*.ir"))
    seq = pipeline.scan_paths(paths, model, pipeline.ScanOptions(), jobs=1)
    par = pipeline.scan_paths(paths, model, pipeline.ScanOptions(), jobs=3)

    def strip_timing(report):
        r = copy.deepcopy(report)
        for e in r["entries"]:
            e.pop("elapsed_ms")
        return r

    assert strip_timing(seq) == strip_timing(par)


def test_gate_skipped_package_in_report(workspace, tmp_path):
    _, _, _, _, calibrated = workspace
    skipped = tmp_path / "noperm.ir"
    skipped.write_text(MOTIVATING.read_text().replace("permission INTERNET\n", "")
                       .replace("permission ACCESS_NETWORK_STATE\n", ""))
    model = detector.load_model(calibrated)
    report = pipeline.scan_paths([skipped], model, pipeline.ScanOptions())
    entry = report["entries"][0]
    assert entry["gate"]["verdict"] == "Skip"
    assert entry["gate"]["reason"] == "NoNetworkPermission"
    assert entry["sites"] == []


def test_eval_reports_metrics(workspace, capsys):
    _, _, labeled_dir, _, calibrated = workspace
    assert main(["eval", "--labeled", str(labeled_dir),
                 "--model", str(calibrated), "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert 0.0 <= report["site"]["f_score"] <= 1.0
    assert report["site"]["tp"] + report["site"]["fn"] == 50


def test_eval_ablate_restricted_sizes(workspace, capsys):
    root, benign_dir, labeled_dir, _, calibrated = workspace
    assert main(["eval", "--labeled", str(labeled_dir), "--model", str(calibrated),
                 "--benign", str(benign_dir), "--ablate", "7", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert list(report["ablation"]["best_by_size"]) == ["7"]
    assert len(report["ablation"]["entries"]) == 1
    assert report["ablation"]["entries"][0]["mask"] == [0, 1, 2, 3, 4, 5, 6]


def test_eval_perfectly_separable_toy(tmp_path, workspace, capsys):
    # reuse the calibrated model on its own labeled set: near-separable corpus
    _, _, labeled_dir, _, calibrated = workspace
    assert main(["eval", "--labeled", str(labeled_dir),
                 "--model", str(calibrated), "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["auc"] >= 0.99


def test_scan_csv_export(workspace, tmp_path, capsys):
    _, _, labeled_dir, _, calibrated = workspace
    csv_path = tmp_path / "vectors.csv"
    some = sorted(labeled_dir.glob("*.ir"))[:6]
    main(["scan", *map(str, some), "--model", str(calibrated), "--csv", str(csv_path)])
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0].startswith("site_id,raw_axis_api,")
    assert len(lines) == 1 + 6  # one site per package
    assert all(len(line.split(",")) == 16 for line in lines[1:])


def test_dump_outputs(workspace, capsys):
    assert main(["dump", str(MOTIVATING), "--cfg", "--chains", "--ddg"]) == 0
    out = capsys.readouterr().out
    assert "cfg Main::onClick" in out
    assert "ud Main::onClick" in out
    assert "site Main::onClick#7" in out
    assert main(["dump", str(MOTIVATING), "--dot"]) == 0
    assert "digraph" in capsys.readouterr().out


def test_smoke_pipeline_sequence(tmp_path):
    # gen -> train -> eval -> scan end to end in a fresh directory
    benign = tmp_path / "b"
    labeled = tmp_path / "l"
    model = tmp_path / "m.json"
    cal = tmp_path / "m.cal.json"
    assert main(["gen", "--seed", "41", "--benign", "60", "--fraud", "0",
                 "--out", str(benign)]) == 0
    assert main(["gen", "--seed", "42", "--benign", "10", "--fraud", "10",
                 "--out", str(labeled)]) == 0
    assert main(["train", "--benign", str(benign), "--out", str(model),
                 "--epochs", "80"]) == 0
    assert main(["eval", "--labeled", str(labeled), "--model", str(model),
                 "--calibrate", str(cal)]) == 0
    assert main(["scan", str(labeled), "--model", str(cal)]) == 2
