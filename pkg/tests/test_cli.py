import csv
import json

import numpy as np
import pytest

from fpmfft import SignalMatrix, load_speed_functions
from fpmfft.cli import EXIT_INTERNAL, EXIT_OK, EXIT_USER, main, summarize_speedups
from fpmfft.engine import load_matrix, save_matrix


@pytest.fixture
def models(tmp_path):
    out = tmp_path / "prof"
    rc = main(["profile", "--x", "1:16:1", "--y", "12:16:4", "--p", "2", "--synthetic", "--policy", "light",
               "--out", str(out), "--json"])
    assert rc == EXIT_OK
    return [str(out / "group_1.csv"), str(out / "group_2.csv")]


def model_args(paths):
    return [a for p in paths for a in ("--model", p)]


def last_json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_profile_writes_models(models, tmp_path):
    sfs = [load_speed_functions(p)[0] for p in models]
    assert [sf.processor_id for sf in sfs] == [1, 2]
    assert all(len(sf) == 12 + 16 for sf in sfs)
    log = list(csv.DictReader(open(tmp_path / "prof" / "sweep_log.csv")))
    assert len(log) == 2 * 28


def test_profile_resume_skips_done_points(models, tmp_path, capsys):
    capsys.readouterr()
    rc = main(["profile", "--x", "1:16:1", "--y", "12:16:4", "--p", "2", "--synthetic", "--policy", "light",
               "--out", str(tmp_path / "prof")])
    assert rc == EXIT_OK
    assert len(list(csv.DictReader(open(tmp_path / "prof" / "sweep_log.csv")))) == 2 * 28
    assert len(load_speed_functions(models[0])[0]) == 28


def test_partition_json(models, capsys):
    capsys.readouterr()
    assert main(["partition", "--n", "16", "--json"] + model_args(models)) == EXIT_OK
    rec = last_json(capsys)
    assert sum(rec["counts"]) == 16 and rec["path"] in ("homogeneous", "heterogeneous")


def test_partition_human_output(models, capsys):
    capsys.readouterr()
    assert main(["partition", "--n", "16"] + model_args(models)) == EXIT_OK
    out = capsys.readouterr().out
    assert "distribution d=" in out and "record: {" in out


def test_model_from_environment(models, capsys, monkeypatch):
    import os

    monkeypatch.setenv("FPMFFT_MODEL", os.pathsep.join(models))
    capsys.readouterr()
    assert main(["pad-plan", "--n", "12", "--json"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 and all(json.loads(x)["n"] == 12 for x in lines)


@pytest.mark.parametrize("variant", ["seq", "lb", "fpm", "fpm-pad"])
def test_run_check(models, capsys, variant):
    capsys.readouterr()
    rc = main(["run", "--variant", variant, "--n", "16", "--check", "--json"] + model_args(models))
    rec = last_json(capsys)
    assert rc == EXIT_OK and rec["check"]["passed"]
    assert sum(rec["distribution"]) == 16


def test_run_io(tmp_path, capsys):
    m = SignalMatrix.random(8, 5)
    save_matrix(tmp_path / "in.bin", m)
    rc = main(["run", "--n", "8", "--input", str(tmp_path / "in.bin"), "--output", str(tmp_path / "out.bin")])
    assert rc == EXIT_OK
    np.testing.assert_allclose(load_matrix(tmp_path / "out.bin").view, np.fft.fft2(m.view), atol=1e-10)
    assert main(["run", "--n", "9", "--input", str(tmp_path / "in.bin")]) == EXIT_USER


def test_user_errors(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("processor_id,x,y,time_s,speed\n1,2,16,1e-6,\n1,x,16,1e-6,\n")
    assert main(["partition", "--n", "16", "--model", str(bad)]) == EXIT_USER
    assert "line 3" in capsys.readouterr().err
    assert main(["partition", "--n", "16", "--model", str(tmp_path / "nope.csv")]) == EXIT_USER
    assert main(["run", "--variant", "fpm", "--n", "16"]) == EXIT_USER
    assert main(["partition", "--n", "16"]) == EXIT_USER


def test_uncovered_length_is_user_error(models, capsys):
    assert main(["partition", "--n", "8"] + model_args(models)) == EXIT_USER
    assert "y=8" in capsys.readouterr().err


def test_failed_check_is_internal_error(monkeypatch, capsys):
    import fpmfft.cli as cli

    monkeypatch.setattr(cli, "dft2d_naive", lambda m: SignalMatrix(np.zeros_like(m.data) + 1))
    assert main(["run", "--n", "4", "--check"]) == EXIT_INTERNAL


def test_config_file(models, tmp_path, capsys):
    cfg = tmp_path / "fpm.cfg"
    cfg.write_text(f"# defaults\nn = 12\nmodel = {models[0]},{models[1]}\njson = true\n")
    capsys.readouterr()
    assert main(["--config", str(cfg), "partition"]) == EXIT_OK
    assert last_json(capsys)["n"] == 12
    assert main(["--config", str(cfg), "partition", "--n", "16"]) == EXIT_OK
    assert last_json(capsys)["n"] == 16
    (tmp_path / "broken.cfg").write_text("no equals sign\n")
    assert main(["--config", str(tmp_path / "broken.cfg"), "partition"]) == EXIT_USER


def test_compare_outputs(tmp_path, capsys):
    out = tmp_path / "cmp.csv"
    rc = main(["compare", "--baseline", "seq", "--candidate", "lb", "--p", "2", "--n-range", "8,16",
               "--out", str(out), "--min-sample-s", "1e-4", "--rounds", "3", "--json"])
    assert rc == EXIT_OK
    rows = list(csv.DictReader(open(out)))
    assert [int(r["n"]) for r in rows] == [8, 16]
    assert all(float(r["speedup"]) == float(r["time_base"]) / float(r["time_cand"]) for r in rows)
    assert list(rows[0]) == ["n", "time_base", "time_cand", "speedup", "mflops_base", "mflops_cand"]
    summary = json.loads((tmp_path / "cmp.summary.json").read_text())
    assert summary["points"] == 2 and not summary["sanity_mode"]
    plot = list(csv.DictReader(open(tmp_path / "cmp.plot.csv")))
    assert plot[0]["variation_base_pct"] == "" and float(plot[1]["variation_base_pct"]) >= 0


def test_summarize_speedups():
    assert summarize_speedups([1.0, 2.0, 4.5]) == {"avg_speedup": 2.5, "max_speedup": 4.5}


def test_profile_real_backend(tmp_path, capsys):
    rc = main(["profile", "--x", "1:2:1", "--y", "8", "--p", "2", "--policy", "light", "--out", str(tmp_path),
               "--backend", "numpy", "--json"])
    assert rc == EXIT_OK
    sfs = [load_speed_functions(tmp_path / f"group_{g}.csv")[0] for g in (1, 2)]
    assert all(sorted(sf.points) == [(1, 8), (2, 8)] for sf in sfs)
    assert all(pt.time_s > 0 for sf in sfs for pt in sf)
