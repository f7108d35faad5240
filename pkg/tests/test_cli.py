import csv
import json
import math
import subprocess
import sys

import pytest

from bqec.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, parse_grid, run
from bqec.oscillator import RM_15_5


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_surface_sim_writes_results_and_manifest(tmp_path):
    out = tmp_path / "a"
    rc = run(["--out", str(out), "surface-sim", "--d", "3", "--sigma-gkp", "0.25", "--trials", "200", "--seed", "4"])
    assert rc == EXIT_OK
    rows = _rows(out / "rates.csv")
    assert len(rows) == 1 and rows[0]["trials"] == "200"
    man = json.loads((out / "manifest.json").read_text())
    assert man["subcommand"] == "surface-sim" and man["master_seed"] == 4
    assert set(man) >= {"config", "version", "seconds", "host"}


def test_same_seed_gives_identical_csv(tmp_path):
    args = ["surface-sim", "--d", "3", "--sigma", "0.03", "--sigma-gkp", "0.1", "--trials", "300", "--seed", "11"]
    assert run(["--out", str(tmp_path / "a")] + args) == EXIT_OK
    assert run(["--out", str(tmp_path / "b")] + args) == EXIT_OK
    assert (tmp_path / "a" / "rates.csv").read_bytes() == (tmp_path / "b" / "rates.csv").read_bytes()


def test_config_file_is_read(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("distance = 3\nsigma_gkp = 0.2\ntrials = 50\nseed = 2\nuse_analog_info = false\n")
    assert run(["--out", str(tmp_path / "o"), "surface-sim", "--config", str(cfg)]) == EXIT_OK
    row = _rows(tmp_path / "o" / "rates.csv")[0]
    assert row["analog"] == "0" and row["trials"] == "50"


def test_capacity_at_half_transmissivity_is_zero(tmp_path):
    assert run(["--out", str(tmp_path), "capacity", "--eta", "0.5", "--n-th", "0"]) == EXIT_OK
    row = _rows(tmp_path / "capacity.csv")[0]
    for key in ("g_dp", "q_idp", "q_odp", "gkp_rate"):
        assert float(row[key]) == 0.0
    assert float(row["lb_thermal"]) <= 0.0
    assert math.isnan(float(row["lb_correlated"]))


def test_capacity_sweep_columns(tmp_path):
    assert run(["--out", str(tmp_path), "capacity", "--eta", "0.6:0.9:0.1", "--n-th", "1", "--n-bar", "1"]) == 0
    rows = _rows(tmp_path / "capacity.csv")
    assert list(rows[0]) == ["eta", "gamma", "n_th", "n_bar", "g_dp", "q_idp", "q_odp", "lb_thermal",
                             "lb_correlated", "x_star", "gkp_rate"]
    assert [float(r["eta"]) for r in rows] == pytest.approx([0.6, 0.7, 0.8, 0.9])


def test_distill_reports_reed_muller(tmp_path, capsys):
    path = tmp_path / "rm15.txt"
    path.write_text("\n".join(" ".join(str(int(v)) for v in row) for row in RM_15_5) + "\n")
    assert run(["--out", str(tmp_path / "o"), "distill", "--matrix", str(path)]) == EXIT_OK
    assert "triorthogonal (15,5,1); Sigma^2/sigma^2 = 2.2" in capsys.readouterr().out
    assert float(_rows(tmp_path / "o" / "distill.csv")[0]["output_variance_ratio"]) == pytest.approx(2.2, abs=1e-10)


def test_tms_and_gkp_single(tmp_path):
    assert run(["--out", str(tmp_path), "tms", "--sigma", "0.1"]) == EXIT_OK
    row = _rows(tmp_path / "tms.csv")[0]
    assert float(row["g_star"]) == pytest.approx(4.806, abs=0.05)
    assert run(["--out", str(tmp_path), "gkp-single", "--sigma", "0.2,0.3"]) == EXIT_OK
    assert len(_rows(tmp_path / "gkp_single.csv")) == 2


def test_reproduce_analytic_figure(tmp_path):
    assert run(["--out", str(tmp_path), "reproduce", "4.7"]) == EXIT_OK
    rows = _rows(tmp_path / "fig4_7.csv")
    assert list(rows[0]) == ["sigma", "p_err", "p_asy"] and len(rows) == 96


def test_seventeen_significant_digits(tmp_path):
    run(["--out", str(tmp_path), "reproduce", "4.7"])
    val = _rows(tmp_path / "fig4_7.csv")[10]["p_err"]
    assert float(val) == float(repr(float(val)))
    assert len(val.replace(".", "").replace("-", "").split("e")[0].lstrip("0")) <= 17


@pytest.mark.parametrize("argv", [
    ["reproduce", "9.9"],
    ["no-such-command"],
    ["capacity", "--eta", "0.5", "--bogus"],
    ["capacity", "--eta", "1.5"],
    ["surface-sim", "--d", "4"],
    ["surface-sim", "--config", "/nonexistent/run.cfg"],
    ["distill", "--matrix", "/nonexistent/m.txt"],
    ["threshold", "--case", "I", "--grid", "0.2:0.1:0.01"],
])
def test_configuration_errors_exit_2(tmp_path, argv):
    assert run(["--out", str(tmp_path)] + argv) == EXIT_CONFIG


def test_invalid_thread_setting_exits_2(tmp_path, monkeypatch):
    monkeypatch.setenv("BQEC_THREADS", "lots")
    assert run(["--out", str(tmp_path), "capacity", "--eta", "0.7"]) == EXIT_CONFIG


def test_numeric_failure_exits_3(tmp_path, monkeypatch):
    import bqec.cli as cli

    def boom(*a, **k):
        raise FloatingPointError("overflow")

    monkeypatch.setattr(cli, "capacity_row", boom)
    assert run(["--out", str(tmp_path), "capacity", "--eta", "0.7"]) == EXIT_NUMERIC


def test_parse_grid():
    assert parse_grid("0.16:0.22:0.005")[-1] == pytest.approx(0.22)
    assert len(parse_grid("0.16:0.22:0.005")) == 13
    assert parse_grid("1,2.5") == [1.0, 2.5]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bqec", "--out", str(tmp_path), "capacity", "--eta", "0.5"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "eta=0.5" in proc.stdout
