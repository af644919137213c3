import csv

import numpy as np
import pytest

from skewconv import cli
from skewconv import harness as hs
from skewconv.config import build, parse_config

SMALL = """
semigroup.kind = matrix
semigroup.matrix = -1
law.gaussian = 1.0 vec(1)
simulation.x0 = vec(0.5)
simulation.times = 0.5, 1
simulation.n_steps = 32
simulation.n_paths = 300
simulation.seed = 5
simulation.test_functions = vec(1) | vec(2)
simulation.write_paths = 2
verify.random_cases = 5
verify.mc_paths = 4000
verify.sc_pairs = 2
verify.functionals = 2
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def test_kernel_table(capsys):
    assert cli.main(["kernels", "g", "d=1", "s=1", "x=0,1"]) == 0
    rows = capsys.readouterr().out.splitlines()
    assert rows[0] == "d\ts\tx\tg"
    assert float(rows[1].split("\t")[-1]) == pytest.approx(1 / np.sqrt(2 * np.pi))
    assert float(rows[2].split("\t")[-1]) == pytest.approx(np.exp(-0.5) / np.sqrt(2 * np.pi))


@pytest.mark.parametrize("argv", [["kernels", "k", "s=1"], ["kernels", "p", "s=0", "x=1", "y=1"],
                                  ["kernels", "k", "s"]])
def test_kernel_table_errors(argv, capsys):
    assert cli.main(argv) == cli.EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("semigroup.kind = torus\n")
    assert cli.main(["verify", str(p)]) == cli.EXIT_CONFIG
    assert "semigroup.kind" in capsys.readouterr().err
    assert cli.main(["verify", str(tmp_path / "missing.cfg")]) == cli.EXIT_CONFIG


def test_verify_writes_report(small_cfg, tmp_path, capsys):
    code = cli.main(["verify", str(small_cfg), "--out", str(tmp_path / "v")])
    out = capsys.readouterr().out
    lines = out.splitlines()
    assert (tmp_path / "v" / "verify.tsv").read_text() == out
    assert all(len(l.split("\t")) == 4 and l.split("\t")[3] in ("PASS", "FAIL") for l in lines)
    names = [l.split("\t")[0] for l in lines]
    assert "sc.identity" in names and "kernels.k_time_l2" in names
    assert code == (cli.EXIT_OK if all(l.endswith("PASS") for l in lines) else cli.EXIT_FAIL)


def test_simulate_outputs(small_cfg, tmp_path, capsys):
    assert cli.main(["simulate", str(small_cfg), "--out", str(tmp_path / "s")]) == 0
    with open(tmp_path / "s" / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 and {r["status"] for r in rows} <= {"PASS", "FAIL"}
    with open(tmp_path / "s" / "paths.csv") as fh:
        paths = list(csv.DictReader(fh))
    assert {r["path_id"] for r in paths} == {"0", "1"}


def test_seed_changes_output(small_cfg, tmp_path):
    cli.main(["simulate", str(small_cfg), "--out", str(tmp_path / "a")])
    cli.main(["simulate", str(small_cfg), "--out", str(tmp_path / "b"), "--seed", "6"])
    assert (tmp_path / "a" / "pairings.csv").read_bytes() != (tmp_path / "b" / "pairings.csv").read_bytes()


def test_small_ensembles_report_na(tmp_path):
    exp = build(parse_config(SMALL.replace("simulation.n_paths = 300", "simulation.n_paths = 20")))
    hs.run_simulate(exp, tmp_path)
    with open(tmp_path / "summary.csv") as fh:
        assert {r["status"] for r in csv.DictReader(fh)} == {"n/a"}


def test_failing_suite_is_reported_not_raised():
    def boom():
        raise RuntimeError("bad")

    (chk,) = hs._guarded("demo", boom)
    assert not chk.passed and "RuntimeError" in chk.name


def test_check_line_format():
    assert hs.at_most("x", 0.5, 1.0).line() == "x\t0.5\t1\tPASS"
    assert not hs.at_most("x", float("nan"), 1.0).passed


def test_kernel_identities():
    for y in (0.5, 1.0, 2.0):
        assert hs.k_time_l2(y) == pytest.approx(1 / (2 * np.pi * y * y), rel=1e-6)
    for s in (0.25, 1.0, 4.0):
        assert hs.g_space_l2(s) == pytest.approx(1 / (2 * np.sqrt(np.pi * s)), rel=1e-6)
