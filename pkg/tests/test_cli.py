import csv
import io
import json

import pytest

from sopp.cli import (EXIT_CONFIG, EXIT_OK, EXIT_UNSUPPORTED, SCHEMAS, ConfigError, main,
                      parse_config)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_defaults_from_empty_file(tmp_path):
    f = tmp_path / "empty.cfg"
    f.write_text("")
    cfg = parse_config(str(f))
    assert cfg["alpha"] == 3.0 and cfg["gamma_db"] == 8.0 and cfg["theta_db"] == 3.0
    assert cfg["bs"] == 50 and cfg["br"] == 50


def test_flag_overrides_file(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# comment\ngamma_db = 8\nhops = 3\n")
    cfg = parse_config(str(f), {"gamma_db": "5"})
    assert cfg["gamma_db"] == 5.0 and cfg["hops"] == 3


def test_config_errors_name_key(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("lambda = 1.5\n")
    with pytest.raises(ConfigError, match="`lambda`"):
        parse_config(str(f))
    f.write_text("colour = blue\n")
    with pytest.raises(ConfigError, match=r"bad.cfg:1: unknown key `colour`"):
        parse_config(str(f))
    f.write_text("hops\n")
    with pytest.raises(ConfigError, match="expected"):
        parse_config(str(f))


def test_analyze_two_hop(capsys):
    code, out, _ = run_cli(capsys, "analyze", "--hops", "2", "--lambda", "0.2")
    assert code == EXIT_OK
    r = rows(out)
    assert r[0] == SCHEMAS["analyze"]
    assert float(r[1][2]) == pytest.approx(3.597, abs=1e-3)
    assert float(r[1][3]) == pytest.approx(0.3908, abs=1e-4)


def test_analyze_unsupported(capsys):
    code, _, err = run_cli(capsys, "analyze", "--hops", "4")
    assert code == EXIT_UNSUPPORTED
    assert "N = 4" in err


def test_bad_lambda_exit_code(capsys):
    code, _, err = run_cli(capsys, "simulate", "--lambda", "1.5")
    assert code == EXIT_CONFIG and "lambda" in err


def test_simulate_deterministic_bytes(capsys, tmp_path):
    args = ["simulate", "--hops", "3", "--protocol", "s-opp", "--lambda", "0.25",
            "--slots", "1000000", "--seed", "42"]
    _, a, _ = run_cli(capsys, *args, "--output-dir", str(tmp_path / "a"))
    _, b, _ = run_cli(capsys, *args, "--output-dir", str(tmp_path / "b"))
    assert a == b
    assert (tmp_path / "a" / "simulate.csv").read_bytes() == (tmp_path / "b" / "simulate.csv").read_bytes()
    assert rows(a)[0] == SCHEMAS["simulate"]


def test_manifest_reproduces(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("SOPP_OUTPUT_DIR", str(tmp_path / "first"))
    code, first, _ = run_cli(capsys, "sweep", "--hops", "2", "--protocols", "s-opp,mh:2",
                             "--lambdas", "0.1,0.2", "--slots", "20000", "--warmup", "100", "--seed", "5")
    assert code == EXIT_OK
    man = json.loads((tmp_path / "first" / "sweep.manifest.json").read_text())
    assert man["command"] == "sweep" and man["seed"] == 5
    assert man["config"]["gamma_linear"] == pytest.approx(10 ** 0.8)
    monkeypatch.setenv("SOPP_OUTPUT_DIR", str(tmp_path / "second"))
    code, second, _ = run_cli(capsys, "sweep", "--config", str(tmp_path / "first" / "sweep.manifest.json"))
    assert code == EXIT_OK and first == second
    r = rows(first)
    assert r[0] == SCHEMAS["sweep"] and len(r) == 1 + 2 * 2


def test_optimize_positions_schema(capsys):
    code, out, _ = run_cli(capsys, "optimize-positions", "--gamma-grid", "6,8,10")
    r = rows(out)
    assert code == EXIT_OK and r[0] == SCHEMAS["optimize-positions"] and len(r) == 4
    assert all(row[1] == "analytic" and row[2] == "full" for row in r[1:])


def test_compare_schema(capsys):
    code, out, _ = run_cli(capsys, "compare", "--hops-list", "3", "--gamma-grid", "8",
                           "--slots", "20000", "--warmup", "100", "--replications", "2")
    r = rows(out)
    assert code == EXIT_OK and r[0] == SCHEMAS["compare"] and len(r) == 2
    assert float(r[1][4]) == pytest.approx(float(r[1][2]) / float(r[1][3]))
