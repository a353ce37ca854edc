import numpy as np
import pytest

from ermc import cli, io
from ermc.cases import compare
from ermc.geometry import CartesianGrid


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_usage_errors(tmp_path):
    assert run() == 2
    assert run("verify") == 2
    assert run("verify", "--case", "nope", "--output-dir", tmp_path) == 2
    assert run("solve", "--output-dir", tmp_path) == 2
    assert run("verify", "--case", "two-cell", "--config", tmp_path / "missing.ini") == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[solve]\nrays_per_cell = lots\n")
    assert run("verify", "--case", "two-cell", "--config", bad) == 2
    bad.write_text("[solve]\nno_such_key = 1\n")
    assert run("verify", "--case", "two-cell", "--config", bad) == 2
    assert run("--help") == 0


def test_verify_pass_and_outputs(tmp_path, capsys):
    assert run("verify", "--case", "two-cell", "--case", "isothermal", "--rays", 2000,
               "--output-dir", tmp_path) == 0
    out = capsys.readouterr().out
    assert "two-cell: PASS" in out and "isothermal: PASS" in out
    h, rows = io.read_csv(tmp_path / "verify_summary.csv")
    assert [r[1] for r in rows] == ["PASS", "PASS"]
    assert (tmp_path / "verify_two-cell.csv").is_file()


def test_verify_failure_exit_code(tmp_path, monkeypatch):
    def fake(name, config, n=None, lateral=None):
        return [("x", compare([0.0], [1.0], [0.0], [0.0], rel_tol=0.0))], None
    monkeypatch.setattr(cli, "run_case", fake)
    assert run("verify", "--case", "two-cell", "--output-dir", tmp_path) == 1


def test_verify_reports_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d, w in ((a, 1), (b, 4)):
        assert run("verify", "--case", "two-cell", "--case", "grey-parab", "--grid", 8,
                   "--lateral", 1, "--rays", 200, "--seed", 11, "--workers", w,
                   "--output-dir", d) == 0
    for name in ("verify_two-cell.csv", "verify_grey-parab.csv", "verify_summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_solve_manifest_rerun(tmp_path):
    first = tmp_path / "one"
    assert run("--seed", 5, "solve", "--case", "grey-parab", "--grid", 8, "--lateral", 2,
               "--rays", 50, "--output-dir", first) == 0
    q, s = io.read_solution(first / "solution.qrf")
    assert q.shape == (8, 2, 2) and np.all(s > 0)
    second = tmp_path / "two"
    assert run("solve", "--config", first / "manifest.ini", "--output-dir", second) == 0
    assert (first / "solution.qrf").read_bytes() == (second / "solution.qrf").read_bytes()
    h, rows = io.read_csv(first / "census.csv")
    assert h == ["level", "steps"] and int(rows[0][1]) > 0


def test_solve_from_files(tmp_path):
    g = CartesianGrid(4, 2, 2, 0.25, 0.25, 0.25)
    io.write_field(tmp_path / "t.tfld", g, np.full(g.shape, 800.0))
    ini = tmp_path / "c.ini"
    ini.write_text("[input]\nfield = %s\ngrey_kappa = 2.0\n[boundary]\nx = wall 800 1 800 1\n"
                   "y = periodic\nz = periodic\n[solve]\nrays_per_cell = 20\n" % (tmp_path / "t.tfld"))
    assert run("solve", "--config", ini, "--output-dir", tmp_path / "o") == 0
    q, _ = io.read_solution(tmp_path / "o" / "solution.qrf")
    assert np.all(q == 0.0)
    ini.write_text(ini.read_text().replace("periodic\n[solve]", "sideways\n[solve]"))
    assert run("solve", "--config", ini, "--output-dir", tmp_path / "o") == 2


def test_spectra_constant(tmp_path):
    assert run("spectra", "--generator", "constant", "--bands", 2, "--quadrature", 4,
               "--resolution", 0.5, "--output-dir", tmp_path) == 0
    h, rows = io.read_csv(tmp_path / "transmissivity.csv")
    assert max(float(r[-1]) for r in rows) < 1e-12
    m = io.read_ktab(tmp_path / "spectrum.ktab")
    assert m.n_bands == 2


def test_spectra_empty_band(tmp_path):
    lines = tmp_path / "l.txt"
    lines.write_text("2010.0 1.0 0.1\n")
    assert run("spectra", "--generator", "lines", "--lines", lines, "--bands", 4,
               "--output-dir", tmp_path) == 2


def test_bench_truncates(tmp_path):
    assert run("bench", "--rays-sweep", "10,20", "--grid-sweep", "4,6", "--lateral", 1,
               "--budget", 0, "--output-dir", tmp_path) == 0
    text = (tmp_path / "bench.csv").read_text()
    assert "TRUNCATED" in text
