"""Command-line surface: schemas, determinism, exit codes, seed resolution.

Exit convention: 0 success, 2 usage or input errors, 3 numerical failures
(degenerate Gram, loss of positivity, sampler stalls, failed checks).
"""

import json
import math

import numpy as np
import pytest

from bergdpp.cli import run


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# sample


def test_sample_writes_report(tmp_path):
    out = tmp_path / "s.json"
    code = run(["sample", "--space", "fs", "--k", "3", "--reps", "2", "--seed", "5",
                "--out", str(out)])
    assert code == 0
    doc = read_json(out)
    assert doc["schema"] == "bergdpp.samples/1"
    assert doc["config"]["space"]["kind"] == "fs"
    assert doc["config"]["seed"] == 5
    assert len(doc["configurations"]) == 2
    # each point is one [re, im] row; fs k=3 draws rank = 4 points
    pts = doc["configurations"][0]["points"]
    assert len(pts) == 4
    assert all(len(row) == 2 for row in pts)
    assert "log_density" in doc["configurations"][0]


def test_sample_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["sample", "--space", "ginibre", "--n", "4", "--reps", "3", "--seed", "9"]
    assert run(argv + ["--out", str(a)]) == 0
    assert run(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sample_worker_count_does_not_change_output(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    base = ["sample", "--space", "fs", "--k", "4", "--reps", "4", "--seed", "2"]
    assert run(base + ["--workers", "1", "--out", str(a)]) == 0
    assert run(base + ["--workers", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sample_env_seed_fallback(tmp_path, monkeypatch):
    out1, out2 = tmp_path / "e.json", tmp_path / "f.json"
    monkeypatch.setenv("BERGDPP_SEED", "41")
    assert run(["sample", "--space", "fs", "--k", "3", "--out", str(out1)]) == 0
    monkeypatch.delenv("BERGDPP_SEED")
    assert run(["sample", "--space", "fs", "--k", "3", "--seed", "41", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_sample_requires_seed(capsys):
    assert run(["sample", "--space", "fs", "--k", "3"]) == 2
    assert "seed" in capsys.readouterr().err.lower()


def test_sample_mcmc_branch(tmp_path):
    out = tmp_path / "m.json"
    code = run(["sample", "--space", "fs", "--k", "2", "--seed", "7",
                "--weight-expr", "r2/(1+r2)", "--mcmc-steps", "300",
                "--burn-in", "50", "--thin", "50", "--out", str(out)])
    assert code == 0
    doc = read_json(out)
    assert doc["config"]["mcmc_steps"] == 300
    assert 0.0 < doc["acceptance_rate"] <= 1.0
    assert all(c["origin"] == "mcmc" for c in doc["configurations"])


def test_sample_bad_weight_expression(capsys):
    assert run(["sample", "--space", "fs", "--k", "2", "--seed", "1",
                "--weight-expr", "r2 * * 2", "--mcmc-steps", "50"]) == 2
    err = capsys.readouterr().err
    assert "column" in err


def test_sample_weight_without_mcmc_rejected(capsys):
    assert run(["sample", "--space", "fs", "--k", "2", "--seed", "1",
                "--weight-expr", "r2"]) == 2
    assert "--mcmc-steps" in capsys.readouterr().err


def test_product_space_flags(tmp_path):
    out = tmp_path / "p.json"
    code = run(["sample", "--space", "product", "--mults", "1,2", "--k", "2",
                "--reps", "1", "--seed", "3", "--out", str(out)])
    assert code == 0
    doc = read_json(out)
    assert doc["config"]["space"]["multiplicities"] == [1, 2]
    assert len(doc["configurations"][0]["points"][0]) == 4  # two complex coordinates


def test_space_flag_validation():
    assert run(["sample", "--space", "fs", "--seed", "1"]) == 2          # missing --k
    assert run(["sample", "--space", "ginibre", "--seed", "1"]) == 2     # missing --n
    assert run(["sample", "--space", "product", "--k", "2", "--seed", "1"]) == 2


# ---------------------------------------------------------------------------
# check


def test_check_partition_prints_factorial(tmp_path, capsys):
    assert run(["check", "partition", "--space", "fs", "--k", "3"]) == 0
    out = capsys.readouterr().out
    assert "Z = 24" in out
    assert "relative error" in out


def test_check_gram_csv(tmp_path):
    csv_path = tmp_path / "g.csv"
    assert run(["check", "gram", "--space", "fs", "--k", "3",
                "--gram-csv", str(csv_path)]) == 0
    lines = csv_path.read_text().strip().split("\n")
    assert len(lines) == 4


def test_check_trace(capsys):
    assert run(["check", "trace", "--space", "ginibre", "--n", "4"]) == 0
    assert "4" in capsys.readouterr().out


def test_check_gram_weighted_does_not_require_identity(capsys):
    # a weighted Gram is not the identity; the check reports instead of failing
    code = run(["check", "gram", "--space", "fs", "--k", "3",
                "--weight-expr", "r2/(1+r2)"])
    assert code == 0


# ---------------------------------------------------------------------------
# stats


def test_stats_counts_from_samples_file(tmp_path):
    samples = tmp_path / "s.json"
    out = tmp_path / "c.json"
    assert run(["sample", "--space", "fs", "--k", "4", "--reps", "50", "--seed", "11",
                "--out", str(samples)]) == 0
    code = run(["stats", "counts", "--space", "fs", "--k", "4",
                "--samples", str(samples), "--region", "disk:1.0",
                "--region", "annulus:1.0:2.0", "--out", str(out)])
    assert code == 0
    doc = read_json(out)
    assert doc["schema"] == "bergdpp.counts/1"
    assert len(doc["counts"]) == 2
    assert len(doc["pairs"]) == 3  # unordered pairs with the diagonal
    disk_row = doc["counts"][0]
    assert disk_row["predicted_mean"] == pytest.approx(2.5, abs=1e-9)


def test_stats_intensity_csv(tmp_path):
    out = tmp_path / "i.csv"
    assert run(["stats", "intensity", "--space", "fs", "--k", "3", "--reps", "20",
                "--seed", "13", "--bins", "8", "--out", str(out)]) == 0
    lines = out.read_text().strip().split("\n")
    assert lines[0].startswith("# schema=bergdpp.intensity/1")
    assert lines[1].split(",")[:3] == ["bin_center_re", "bin_center_im", "rate"]
    assert len(lines) == 2 + 64


def test_stats_circular(tmp_path):
    out = tmp_path / "circ.json"
    assert run(["stats", "circular", "--space", "ginibre", "--n", "30",
                "--reps", "5", "--seed", "17", "--out", str(out)]) == 0
    doc = read_json(out)
    assert doc["schema"] == "bergdpp.circular/1"
    assert 0.0 < doc["distance"] < 0.5
    assert doc["pooled_points"] == 150


def test_stats_circular_rejects_fs():
    assert run(["stats", "circular", "--space", "fs", "--k", "3",
                "--reps", "2", "--seed", "1"]) == 2


# ---------------------------------------------------------------------------
# scaling


def test_scaling_report(tmp_path):
    out = tmp_path / "sc.json"
    assert run(["scaling", "--space", "fs", "--ks", "16,64", "--out", str(out)]) == 0
    doc = read_json(out)
    assert doc["schema"] == "bergdpp.scaling/1"
    ks = [row["k"] for row in doc["rows"]]
    assert ks == [16, 64]
    assert doc["rows"][1]["sup_error"] < doc["rows"][0]["sup_error"]


def test_scaling_rejects_ginibre():
    assert run(["scaling", "--space", "ginibre", "--n", "5", "--ks", "4,8"]) == 2


def test_scaling_with_points_file(tmp_path):
    pts = tmp_path / "pts.json"
    pts.write_text(json.dumps({"points": [[0.1, 0.0], [0.0, 0.2], [0.3, -0.1]]}))
    out = tmp_path / "sc.json"
    assert run(["scaling", "--space", "fs", "--ks", "9,36", "--points", str(pts),
                "--out", str(out)]) == 0
    doc = read_json(out)
    assert doc["config"]["points"].endswith("pts.json")


# ---------------------------------------------------------------------------
# converge


def test_converge_report(tmp_path):
    out = tmp_path / "cv.json"
    assert run(["converge", "--space", "fs", "--ks", "4,8", "--region", "disk:1.0",
                "--reps", "30", "--seed", "19", "--out", str(out)]) == 0
    doc = read_json(out)
    assert doc["schema"] == "bergdpp.converge/1"
    assert [row["k"] for row in doc["rows"]] == [4, 8]
    for row in doc["rows"]:
        assert row["quadrature_mass"] == pytest.approx(0.5, abs=1e-9)


def test_converge_deterministic_across_workers(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    base = ["converge", "--space", "fs", "--ks", "3,6", "--reps", "8", "--seed", "23"]
    assert run(base + ["--workers", "1", "--out", str(a)]) == 0
    assert run(base + ["--workers", "2", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


# ---------------------------------------------------------------------------
# energy


def test_energy_cgf_report(tmp_path):
    out = tmp_path / "cgf.json"
    assert run(["energy", "cgf", "--space", "fs", "--k", "6",
                "--weight-expr", "r2/(1+r2)", "--t", "0,0.5", "--out", str(out)]) == 0
    doc = read_json(out)
    assert doc["schema"] == "bergdpp.energy-cgf/1"
    assert len(doc["rows"]) == 2
    for row in doc["rows"]:
        assert row["rel_gap"] < 1e-4
    assert doc["rows"][0]["bergman_integral"] == pytest.approx(-3.5, abs=1e-8)


def test_energy_lambda_report(tmp_path):
    out = tmp_path / "lam.json"
    assert run(["energy", "lambda-k", "--space", "fs", "--ks", "8,16",
                "--f-expr", "0.2/(1+r2)", "--out", str(out)]) == 0
    doc = read_json(out)
    assert doc["schema"] == "bergdpp.energy-lambda/1"
    assert doc["target"] == pytest.approx(0.1 + 1.0 / 300.0, abs=1e-8)
    gaps = [row["gap"] for row in doc["rows"]]
    assert gaps[1] < gaps[0]


def test_energy_positivity_failure_is_exit_3(capsys):
    code = run(["energy", "lambda-k", "--space", "fs", "--ks", "4",
                "--f-expr", "3*log(1+r2)"])
    assert code == 3
    assert "Kahler" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# usage errors


def test_unknown_subcommand():
    assert run(["frobnicate"]) == 2


def test_unknown_flag():
    assert run(["sample", "--space", "fs", "--k", "3", "--seed", "1", "--frob"]) == 2


def test_version_flag(capsys):
    assert run(["--version"]) == 0
    assert "bergdpp" in capsys.readouterr().out
