from pathlib import Path

import pytest

from mdiqkd.cli import main, parse_distances, ConfigError


def write_config(tmp_path: Path, extra: str = "", name: str = "run.cfg") -> Path:
    path = tmp_path / name
    path.write_text("# test configuration\n" + extra, encoding="utf-8")
    return path


def test_rate_with_defaults_is_positive(tmp_path, capsys):
    config = write_config(tmp_path, "distance_km = 10\nn_pairs = 1e11\n")
    assert main(["rate", "--config", str(config)]) == 0
    out = capsys.readouterr().out
    fields = dict(line.split(" = ") for line in out.strip().splitlines())
    assert float(fields["rate"]) > 0.0
    assert fields["reason"] == "ok"


def test_rate_writes_record_file(tmp_path):
    config = write_config(tmp_path, "distance_km = 10\n")
    out_file = tmp_path / "report.txt"
    assert main(["rate", "--config", str(config), "--out", str(out_file)]) == 0
    text = out_file.read_text()
    for field in ("rate = ", "h_lower = ", "h_upper = ", "chernoff_invocations = "):
        assert field in text


def test_swapped_decoys_exit_code_2(tmp_path, capsys):
    config = write_config(tmp_path, "mu_x = 0.4\nmu_y = 0.1\n")
    assert main(["rate", "--config", str(config)]) == 2
    assert "decoy" in capsys.readouterr().err


def test_zero_failure_probability_exit_code_2(tmp_path, capsys):
    config = write_config(tmp_path, "xi = 0\n")
    assert main(["rate", "--config", str(config)]) == 2
    assert "xi" in capsys.readouterr().err


def test_unknown_key_rejected_with_line_number(tmp_path, capsys):
    config = write_config(tmp_path, "mu_q = 0.3\n")
    assert main(["rate", "--config", str(config)]) == 2
    err = capsys.readouterr().err
    assert "mu_q" in err and ":2:" in err


def test_bad_value_rejected_with_line_number(tmp_path, capsys):
    config = write_config(tmp_path, "mu_x = fast\n")
    assert main(["rate", "--config", str(config)]) == 2
    assert ":2:" in capsys.readouterr().err


def test_missing_config_file_exit_code_2(tmp_path, capsys):
    assert main(["rate", "--config", str(tmp_path / "absent.cfg")]) == 2
    assert "not found" in capsys.readouterr().err


def test_distance_parsing():
    assert parse_distances("0:50:10") == [0.0, 10.0, 20.0, 30.0, 40.0, 50.0]
    assert parse_distances("5,1,12.5") == [5.0, 1.0, 12.5]
    with pytest.raises(ConfigError):
        parse_distances("10:0:5")
    with pytest.raises(ConfigError):
        parse_distances("")


def test_scan_single_distance_matches_rate(tmp_path, capsys):
    config = write_config(tmp_path, "distance_km = 10\n")
    assert main(["rate", "--config", str(config)]) == 0
    rate_out = capsys.readouterr().out
    rate_value = dict(line.split(" = ") for line in rate_out.strip().splitlines())["rate"]

    assert main(["scan", "--config", str(config), "--distances", "10"]) == 0
    scan_out = capsys.readouterr().out
    data_row = scan_out.strip().splitlines()[-1].split(",")
    assert data_row[0] == "10" and data_row[1] == "fixed"
    assert float(data_row[2]) == pytest.approx(float(rate_value), rel=1e-12)


def test_scan_rates_non_increasing_with_distance(tmp_path, capsys):
    config = write_config(tmp_path, "fluctuation = 0\n")
    assert main(["scan", "--config", str(config), "--distances", "0:20:10"]) == 0
    rows = [line.split(",") for line in capsys.readouterr().out.strip().splitlines() if not line.startswith("#")][1:]
    rates = [float(row[2]) for row in rows]
    assert rates == sorted(rates, reverse=True)


def test_scan_output_is_byte_stable(tmp_path, capsys):
    config = write_config(tmp_path, "distances = 0:10:5\nseed = 9\n")
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    assert main(["scan", "--config", str(config), "--out", str(out_a)]) == 0
    capsys.readouterr()
    assert main(["scan", "--config", str(config), "--out", str(out_b)]) == 0
    capsys.readouterr()
    assert out_a.read_bytes() == out_b.read_bytes()


def test_scan_provenance_headers(tmp_path, capsys):
    config = write_config(tmp_path, "")
    assert main(["scan", "--config", str(config), "--distances", "0,5"]) == 0
    out = capsys.readouterr().out
    assert "# command=scan" in out
    assert "# config_hash=" in out
    assert "# seed=" in out
    assert "# version=" in out


def test_scan_with_optimization_flag(tmp_path, capsys):
    config = write_config(tmp_path, "budget = 40\nrestarts = 2\n")
    assert main(["scan", "--config", str(config), "--distances", "10", "--optimize", "on"]) == 0
    rows = [line for line in capsys.readouterr().out.splitlines() if not line.startswith("#")]
    assert rows[1].split(",")[1] == "optimized"


def test_optimize_command_outputs_best_points(tmp_path, capsys):
    config = write_config(tmp_path, "budget = 60\nrestarts = 2\nn_pairs = 1e11\n")
    log = tmp_path / "log.csv"
    assert main(["optimize", "--config", str(config), "--distances", "10", "--eval-log", str(log)]) == 0
    out = capsys.readouterr().out
    header = [line for line in out.splitlines() if line.startswith("distance_km")][0]
    assert header == "distance_km,rate,mu_x,mu_y,mu_z,p_x,p_y,p_z"
    assert log.exists()
    assert len(log.read_text().splitlines()) > 5


def test_validate_model_zero_trials_exit_code_2(tmp_path, capsys):
    config = write_config(tmp_path, "mc_trials = 0\n")
    assert main(["validate-model", "--config", str(config)]) == 2
    assert "mc_trials" in capsys.readouterr().err


def test_validate_model_small_run_passes(tmp_path, capsys):
    config = write_config(tmp_path, "mc_trials = 200000\nseed = 4\n")
    assert main(["validate-model", "--config", str(config)]) == 0
    assert "PASSED" in capsys.readouterr().out
