import csv
import os

import numpy as np
import pytest

from gitsmc_lfc import cli

FAST = ["--dt", "0.01", "--horizon", "60"]


def _run(argv, capsys=None):
    code = cli.main(argv)
    out = capsys.readouterr().out if capsys else ""
    return code, out


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


def test_full_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    code, text = _run(["run", "--scenario", "bench39", "--controller", "gitsmc", "--dt", "0.005",
                       "--seed", "42", "--output-dir", str(out)], capsys)
    assert code == 0
    assert "ITSE" in text
    svgs = sorted(p.name for p in out.iterdir() if p.suffix == ".svg")
    assert len(svgs) == 8
    assert {"df_area1.svg", "tie_area4.svg"} <= set(svgs)
    with open(out / "trace.csv") as fh:
        rows = list(csv.reader(fh))
    assert [h.strip() for h in rows[0]] == list(cli.CSV_HEADER)
    assert len(rows) - 1 == 4 * 80001
    assert float(rows[-1][0]) == pytest.approx(400.0)
    idx = (out / "indices.csv").read_text()
    assert all(k in idx for k in ("itae", "itse", "ise", "iae"))
    assert "area 1" in (out / "monitor.txt").read_text()


def test_csv_is_byte_identical_across_runs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["run", "--controller", "gitsmc", "--noise", "0", *FAST,
                         "--output-dir", str(d)]) == 0
    assert _read(a / "trace.csv") == _read(b / "trace.csv")
    assert _read(a / "df_area2.svg") == _read(b / "df_area2.svg")


def test_seeded_noise_is_reproducible(tmp_path):
    paths = []
    for name, seed in (("a", 7), ("b", 7), ("c", 8)):
        d = tmp_path / name
        assert cli.main(["run", "--controller", "pi", "--seed", str(seed), *FAST,
                         "--output-dir", str(d)]) == 0
        paths.append(_read(d / "trace.csv"))
    assert paths[0] == paths[1] != paths[2]


def test_zero_disturbance_gives_zero_trace(tmp_path):
    assert cli.main(["run", "--no-disturbance", *FAST, "--output-dir", str(tmp_path)]) == 0
    data = np.loadtxt(tmp_path / "trace.csv", delimiter=",", skiprows=1)
    assert np.all(data[:, 2:] == 0)
    for line in (tmp_path / "indices.csv").read_text().splitlines()[1:]:
        assert float(line.split(",")[1]) == 0.0


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", "--no-disturbance", "--dt", "0.01", "--horizon", "1"]) == 0
    assert (tmp_path / "env" / "trace.csv").exists()


def test_compare_reports_all_indices(tmp_path, capsys):
    code, text = _run(["compare", "--noise", "0", "--dt", "0.01", "--output-dir", str(tmp_path)],
                      capsys)
    assert code == 0
    rows = {r[0]: r for r in csv.reader(open(tmp_path / "comparison.csv"))}
    assert set(rows) == {"index", "itae", "itse", "ise", "iae"}
    assert float(rows["itse"][3]) >= 80.0
    assert (tmp_path / "a_gitsmc" / "trace.csv").exists()
    assert (tmp_path / "b_pi" / "trace.csv").exists()
    assert (tmp_path / "compare_df_area1.svg").exists()


def test_compare_same_controller_is_zero(tmp_path):
    assert cli.main(["compare", "--controller-a", "pi", "--controller-b", "pi", *FAST,
                     "--output-dir", str(tmp_path)]) == 0
    for row in list(csv.reader(open(tmp_path / "comparison.csv")))[1:]:
        assert float(row[3]) == 0.0


def test_audit_lists_annotated_flags(capsys):
    code, text = _run(["audit", "--rel-tol", "0.5%"], capsys)
    assert code == 0
    flagged = [ln for ln in text.splitlines() if "FLAG" in ln]
    assert flagged
    assert any("A0[4,2]" in ln and ln.split()[0] == "1" for ln in flagged)
    assert "(not in ledger)" not in text


def test_audit_area_filter(capsys):
    code, text = _run(["audit", "--areas", "2", "--all"], capsys)
    assert code == 0
    rows = text.splitlines()[2:]
    assert rows and all(r.split()[0] == "2" for r in rows)


def test_audit_bad_tolerance(capsys):
    assert cli.main(["audit", "--rel-tol", "lots"]) == cli.EXIT_CONFIG


def _sweep_rows(path):
    return list(csv.DictReader(open(path)))


def test_sweep_single_point_matches_run(tmp_path):
    assert cli.main(["sweep", "--grid", "eta1=%r" % cli.bench39.ETA1, *FAST, "--noise", "0",
                     "--output-dir", str(tmp_path / "s")]) == 0
    assert cli.main(["run", *FAST, "--noise", "0", "--output-dir", str(tmp_path / "r")]) == 0
    row = _sweep_rows(tmp_path / "s" / "sweep.csv")[0]
    ref = dict(ln.split(",") for ln in (tmp_path / "r" / "indices.csv").read_text().splitlines()[1:])
    for k in ("itae", "itse", "ise", "iae"):
        assert float(row[k]) == pytest.approx(float(ref[k]), rel=1e-12)


def test_sweep_ranks_ascending(tmp_path):
    assert cli.main(["sweep", "--grid", "eta1=1,2,4", *FAST, "--jobs", "2",
                     "--output-dir", str(tmp_path)]) == 0
    rows = _sweep_rows(tmp_path / "sweep.csv")
    assert len(rows) == 3
    itse = [float(r["itse"]) for r in rows]
    assert itse == sorted(itse)
    assert [r["rank"] for r in rows] == ["1", "2", "3"]
    assert sorted(float(r["eta1"]) for r in rows) == [1.0, 2.0, 4.0]


def test_sweep_rejects_alpha_one(tmp_path):
    code = cli.main(["sweep", "--grid", "alpha=1.0,1.5", *FAST, "--output-dir", str(tmp_path)])
    assert code == cli.EXIT_CONFIG
    assert not (tmp_path / "sweep.csv").exists()


def test_sweep_records_divergence(tmp_path):
    assert cli.main(["sweep", "--controller", "pi", "--grid", "kp=3,-50", *FAST,
                     "--output-dir", str(tmp_path)]) == 0
    rows = _sweep_rows(tmp_path / "sweep.csv")
    assert [r["status"].startswith("failed") for r in rows] == [False, True]


def test_export_config_round_trip(tmp_path):
    path = tmp_path / "bench.ini"
    assert cli.main(["export-config", "--output", str(path)]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--config", str(path), *FAST, "--noise", "0",
                     "--output-dir", str(a)]) == 0
    assert cli.main(["run", *FAST, "--noise", "0", "--output-dir", str(b)]) == 0
    assert _read(a / "trace.csv") == _read(b / "trace.csv")


def test_exit_codes(tmp_path):
    assert cli.main(["run", "--scenario", "nope", "--output-dir", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["run", "--dt", "-1", "--output-dir", str(tmp_path)]) == cli.EXIT_CONFIG
    assert cli.main(["run", "--controller", "none", "--noise", "0", "--dt", "0.01",
                     "--output-dir", str(tmp_path)]) == cli.EXIT_DIVERGED
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", "--no-disturbance", "--dt", "0.01", "--horizon", "1",
                     "--output-dir", str(blocker / "sub")]) == cli.EXIT_IO


def test_bad_config_file(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[scenario]\nareas = 1\nbogus = 3\n")
    assert cli.main(["run", "--config", str(path), "--output-dir", str(tmp_path)]) == cli.EXIT_CONFIG
