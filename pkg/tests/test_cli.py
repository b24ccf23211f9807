import csv
import json
import subprocess
import sys

import pytest

from iforest_dpg.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def fixture_csv(tmp_path, capsys):
    out = tmp_path / "gen"
    code, _, _ = run(capsys, "gen", "--fixture", "one", "--out", str(out))
    assert code == 0
    return out / "data.csv"


# ---------------------------------------------------------------------------
# gen


def test_gen_fixture_writes_features_and_log(tmp_path, capsys):
    out = tmp_path / "g"
    code, stdout, _ = run(capsys, "gen", "--fixture", "one", "--out", str(out))
    assert code == 0
    assert "wrote" in stdout
    with open(out / "data.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["F0", "F1", "F2", "F3", "F4", "F5"]  # no label column
    assert len(rows) == 201
    with open(out / "injections.csv", newline="") as fh:
        log = list(csv.DictReader(fh))
    assert len(log) == 4
    assert {r["sample"] for r in log} == {"0"}


def test_gen_custom_injection_json(tmp_path, capsys):
    out = tmp_path / "g"
    code, stdout, _ = run(
        capsys,
        "gen",
        "--samples", "50",
        "--features", "3",
        "--means", "1.0,2.0,3.0",
        "--stds", "0.5,0.5,0.5",
        "--inject", "sample=4:0+4,2-5",
        "--seed", "3",
        "--out", str(out),
        "--json",
    )
    assert code == 0
    doc = json.loads(stdout)
    assert doc["n_samples"] == 50
    assert doc["n_features"] == 3
    assert doc["n_injected"] == 1
    with open(out / "injections.csv", newline="") as fh:
        log = list(csv.DictReader(fh))
    assert [(r["sample"], r["feature"]) for r in log] == [("4", "0"), ("4", "2")]
    assert float(log[1]["alteration"]) < 0


def test_gen_rejects_tiny_sample_count(tmp_path, capsys):
    code, _, err = run(capsys, "gen", "--samples", "1", "--out", str(tmp_path))
    assert code == 1
    assert "error:" in err


def test_gen_rejects_bad_injection_grammar(tmp_path, capsys):
    for spec in ("0*4", "sample=3 0+4", "0+", "x+4"):
        code, _, err = run(capsys, "gen", "--inject", spec, "--out", str(tmp_path))
        assert code == 1, spec
        assert "injection" in err


def test_gen_fixture_conflicts_with_custom_flags(tmp_path, capsys):
    code, _, err = run(
        capsys, "gen", "--fixture", "one", "--inject", "0+4", "--out", str(tmp_path)
    )
    assert code == 1
    assert "--fixture" in err


# ---------------------------------------------------------------------------
# train / score


def test_train_writes_model_and_summary(tmp_path, capsys, fixture_csv):
    model_path = tmp_path / "model.json"
    code, stdout, _ = run(
        capsys,
        "train", str(fixture_csv),
        "--trees", "20",
        "--seed", "7",
        "--contamination", "0.005",
        "--out", str(model_path),
        "--json",
    )
    assert code == 0
    doc = json.loads(stdout)
    assert doc["n_train"] == 200
    assert doc["n_trees"] == 20
    assert doc["subsample_size"] == 200
    assert doc["n_outliers"] == 1
    assert model_path.is_file()


def test_score_json_and_csv_agree(tmp_path, capsys, fixture_csv):
    model_path = tmp_path / "model.json"
    assert run(
        capsys,
        "train", str(fixture_csv),
        "--trees", "20", "--seed", "7", "--out", str(model_path),
    )[0] == 0

    code, stdout, _ = run(
        capsys, "score", str(fixture_csv), "--model", str(model_path), "--json"
    )
    assert code == 0
    records = json.loads(stdout)
    assert len(records) == 200
    assert all(0.0 < r["score"] <= 1.0 for r in records)
    assert all(r["label"] in ("Outlier", "Inlier") for r in records)

    out_csv = tmp_path / "scores.csv"
    code, stdout, _ = run(
        capsys,
        "score", str(fixture_csv), "--model", str(model_path), "--out", str(out_csv),
    )
    assert code == 0
    with open(out_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 200
    for rec, row in zip(records, rows):
        assert float(row["score"]) == rec["score"]
        assert row["label"] == rec["label"]


def test_score_table_output(tmp_path, capsys, fixture_csv):
    model_path = tmp_path / "model.json"
    run(capsys, "train", str(fixture_csv), "--trees", "10", "--out", str(model_path))
    code, stdout, _ = run(capsys, "score", str(fixture_csv), "--model", str(model_path))
    assert code == 0
    assert stdout.splitlines()[0] == "sample | score  | label"
    assert len(stdout.splitlines()) == 201


# ---------------------------------------------------------------------------
# explain


def test_explain_writes_bundle_and_ranking(tmp_path, capsys, fixture_csv):
    out = tmp_path / "bundle"
    code, stdout, _ = run(
        capsys,
        "explain", str(fixture_csv),
        "--trees", "40",
        "--seed", "7",
        "--contamination", "0.005",
        "--out", str(out),
    )
    assert code == 0
    lines = stdout.splitlines()
    assert lines[0].startswith("Predicate")
    assert lines[-1] == f"bundle written to {out}"
    for name in (
        "model.json",
        "graph.json",
        "iop_report.json",
        "graph.dot",
        "iop_table.txt",
        "manifest.json",
    ):
        assert (out / name).is_file(), name
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["input"]["path"] == str(fixture_csv)


def test_explain_json_ranking(tmp_path, capsys, fixture_csv):
    code, stdout, _ = run(
        capsys,
        "explain", str(fixture_csv),
        "--trees", "40", "--seed", "7", "--contamination", "0.005",
        "--out", str(tmp_path / "b"),
        "--json",
    )
    assert code == 0
    doc = json.loads(stdout)
    iops = [e["iop"] for e in doc["entries"]]
    assert iops == sorted(iops, reverse=True)


# ---------------------------------------------------------------------------
# exit codes


def test_single_class_exits_two(tmp_path, capsys, fixture_csv):
    code, _, err = run(
        capsys,
        "explain", str(fixture_csv),
        "--trees", "10", "--threshold", "0.99",
        "--out", str(tmp_path / "b"),
    )
    assert code == 2
    assert "error:" in err


def test_missing_input_exits_one(tmp_path, capsys):
    code, _, err = run(capsys, "train", str(tmp_path / "nope.csv"))
    assert code == 1
    assert "error:" in err


def test_unknown_flag_exits_one(capsys):
    code, _, err = run(capsys, "train", "x.csv", "--bogus")
    assert code == 1
    assert "error:" in err


def test_missing_subcommand_exits_one(capsys):
    assert run(capsys)[0] == 1


def test_help_exits_zero(capsys):
    assert run(capsys, "--help")[0] == 0
    assert run(capsys, "explain", "--help")[0] == 0


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "iforest_dpg.cli", "--help"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "iforest-dpg" in proc.stdout


# ---------------------------------------------------------------------------
# repro


def test_repro_fixture_one_small(capsys):
    code, stdout, _ = run(
        capsys, "repro", "--fixture", "one", "--seeds", "2", "--trees", "30"
    )
    assert code == 0
    assert "seeds: 2 (base 0)" in stdout
    assert "check:" in stdout
    assert stdout.rstrip().splitlines()[-1].startswith("overall:")


def test_repro_fixture_json_shape(capsys):
    code, stdout, _ = run(
        capsys,
        "repro", "--fixture", "two", "--seeds", "2", "--trees", "30", "--json",
    )
    assert code == 0
    doc = json.loads(stdout)
    assert doc["schema_version"] == 1
    assert doc["seeds"] == 2
    assert isinstance(doc["pass"], bool)
    assert doc["checks"] and all("hits" in c for c in doc["checks"])
    for entry in doc["predicates"]:
        assert set(entry) >= {"id", "label", "mean_iop", "sign_agreement"}


def test_repro_requires_exactly_one_target(capsys, tmp_path):
    assert run(capsys, "repro")[0] == 1
    assert run(
        capsys, "repro", "--fixture", "one", "--dataset", str(tmp_path / "d.csv")
    )[0] == 1


def test_repro_dataset_demands_expected_columns(tmp_path, capsys):
    path = tmp_path / "d.csv"
    path.write_text("a,b\n1,2\n3,4\n")
    code, _, err = run(capsys, "repro", "--dataset", str(path), "--seeds", "1")
    assert code == 1
    assert "TSH" in err


def test_repro_dataset_runs_with_expected_columns(tmp_path, capsys, fixture_csv):
    # Rename two columns so the thyroid-layout checks can run on fixture data.
    text = (fixture_csv.read_text().splitlines())
    text[0] = "Age,TSH,T3,TT4,FTI,T4U"
    path = tmp_path / "thyroidish.csv"
    path.write_text("\n".join(text) + "\n")
    code, stdout, _ = run(
        capsys,
        "repro", "--dataset", str(path), "--seeds", "1", "--trees", "30", "--json",
    )
    assert code == 0
    doc = json.loads(stdout)
    assert any("TSH" in p["label"] for p in doc["predicates"])
    assert isinstance(doc["pass"], bool)
