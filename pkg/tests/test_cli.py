import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import fixture_path
from dpsynth.cli import main

MIXED5 = fixture_path("mixed5.csv")
MIXED5_DOMAIN = fixture_path("mixed5_domain.json")


def test_fit_mst_on_bundled_fixture(tmp_path, capsys):
    out = tmp_path / "model.bin"
    code = main([
        "fit", "--model", "mst", "--data", MIXED5, "--domain", MIXED5_DOMAIN,
        "--epsilon", "1", "--seed", "7", "--out", str(out),
    ])
    assert code == 0
    assert out.exists()
    summary = json.loads(capsys.readouterr().out)
    assert summary["rho_spent"] <= summary["rho_total"] + 1e-12


def test_fit_without_domain_needs_proc_epsilon(tmp_path):
    csv = tmp_path / "nums.csv"
    rng = np.random.default_rng(0)
    lines = ["u,v"] + [f"{a:.4f},{b:.4f}" for a, b in rng.normal(5, 2, (50, 2))]
    csv.write_text("\n".join(lines) + "\n")
    code = main([
        "fit", "--model", "mst", "--data", str(csv),
        "--epsilon", "1", "--out", str(tmp_path / "m.bin"),
    ])
    assert code == 3
    code = main([
        "fit", "--model", "mst", "--data", str(csv), "--proc-epsilon", "0.1",
        "--epsilon", "1", "--seed", "1", "--out", str(tmp_path / "m.bin"),
    ])
    assert code == 0


def test_fit_categorical_without_domain_is_validation_error(tmp_path):
    csv = tmp_path / "cats.csv"
    csv.write_text("c\nfoo\nbar\n")
    code = main([
        "fit", "--model", "mst", "--data", str(csv),
        "--epsilon", "1", "--out", str(tmp_path / "m.bin"),
    ])
    assert code == 2


def test_fit_same_seed_is_byte_identical(tmp_path):
    outs = []
    for name in ("a.bin", "b.bin"):
        out = tmp_path / name
        assert main([
            "fit", "--model", "privbayes", "--data", MIXED5,
            "--domain", MIXED5_DOMAIN, "--epsilon", "1", "--seed", "13",
            "--out", str(out),
        ]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_generate_conditions_and_empty(tmp_path):
    model = tmp_path / "model.bin"
    assert main([
        "fit", "--model", "mst", "--data", MIXED5, "--domain", MIXED5_DOMAIN,
        "--epsilon", "1", "--seed", "7", "--out", str(model),
    ]) == 0

    out = tmp_path / "synth.csv"
    assert main([
        "generate", "--model", str(model), "--rows", "40",
        "--condition", "color=red", "--condition", "size=small",
        "--condition", "weight=0..20",
        "--seed", "3", "--out", str(out),
    ]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "color,size,shape,weight,length"
    assert len(lines) == 41
    for line in lines[1:]:
        cells = line.split(",")
        assert cells[0] == "red" and cells[1] == "small"
        assert 0.0 <= float(cells[3]) <= 20.0

    empty = tmp_path / "empty.csv"
    assert main([
        "generate", "--model", str(model), "--rows", "0", "--out", str(empty),
    ]) == 0
    assert empty.read_text() == "color,size,shape,weight,length\n"


def test_generate_structural_zero_condition_exit_code(tmp_path):
    domain_doc = json.loads(open(MIXED5_DOMAIN).read())
    domain_doc["columns"][0]["structural_zeros"] = ["blue"]
    dpath = tmp_path / "domain.json"
    dpath.write_text(json.dumps(domain_doc))
    model = tmp_path / "model.bin"
    assert main([
        "fit", "--model", "mst", "--data", MIXED5, "--domain", str(dpath),
        "--epsilon", "1", "--seed", "7", "--out", str(model),
    ]) == 0
    code = main([
        "generate", "--model", str(model), "--rows", "5",
        "--condition", "color=blue", "--out", str(tmp_path / "x.csv"),
    ])
    assert code == 4


def test_evaluate_identical_files(tmp_path, capsys):
    code = main([
        "evaluate", "--real", MIXED5, "--synth", MIXED5,
        "--domain", MIXED5_DOMAIN, "--seed", "1",
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert set(report) == {
        "similarity_1way", "similarity_2way", "distinguishability", "mean",
    }
    assert report["mean"] >= 0.95


def test_evaluate_schema_mismatch(tmp_path):
    other = tmp_path / "other.csv"
    other.write_text("nope\n1\n")
    code = main([
        "evaluate", "--real", MIXED5, "--synth", str(other),
        "--domain", MIXED5_DOMAIN,
    ])
    assert code == 2


def test_audit_runs_minimum():
    assert main([
        "audit", "--suite", "game", "--model", "mst", "--runs", "10",
    ]) == 2


def test_audit_unknown_fixture():
    assert main([
        "audit", "--suite", "game", "--model", "fixture:nope", "--runs", "100",
    ]) == 2


def test_audit_float_suite_exit_codes(capsys):
    assert main([
        "audit", "--suite", "float", "--model", "mst", "--runs", "1000",
        "--seed", "2",
    ]) == 0
    capsys.readouterr()
    assert main([
        "audit", "--suite", "float", "--model", "fixture:naive-float",
        "--runs", "1000", "--seed", "2",
    ]) == 5
    report = json.loads(capsys.readouterr().out)
    assert report["violation"] is True
    assert report["eps_emp"] > report["eps_claimed"]


def test_audit_game_smoke(capsys):
    assert main([
        "audit", "--suite", "game", "--model", "mst", "--runs", "100",
        "--seed", "3", "--threads", "1",
    ]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["eps_emp"] <= 1.0


def test_console_entry_point(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "dpsynth.cli", "fit", "--model", "mst",
         "--data", MIXED5, "--domain", MIXED5_DOMAIN, "--epsilon", "1",
         "--seed", "5", "--out", str(tmp_path / "m.bin")],
        capture_output=True, text=True,
    )
    assert result.returncode == 0, result.stderr
    assert (tmp_path / "m.bin").exists()
