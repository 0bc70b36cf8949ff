import json

import pytest

from colourdiv.cli import EXIT_BUDGET, EXIT_CONFIG, EXIT_OK, main
from colourdiv.config import ConfigError, config_hash, default_config, parse_grid, read_config

SMALL = ["--N", "200", "--samples", "2", "--equilibration", "5", "--measurement", "4",
         "--measure_every", "2", "--test_nodes", "300"]


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_defaults_listing(capsys):
    assert main(["defaults"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "mean_c = 3.0" in out and "colour_bias = 100.0" in out


def test_popdyn_outputs_and_header(tmp_path):
    assert run(tmp_path, "popdyn", "--mean_c", "4.0", "--colour_bias", "0", *SMALL) == EXIT_OK
    text = (tmp_path / "run_popdyn.csv").read_text()
    first = text.splitlines()[0]
    assert first.startswith("# colourdiv ") and "config_hash=" in first and "seed=1" in first
    assert "# mean_c = 4.0" in text
    summary = json.loads((tmp_path / "run_summary.json").read_text())
    assert summary["f_av"] == pytest.approx(7.0)
    hist = (tmp_path / "run_histogram.csv").read_text().splitlines()
    assert hist[-201] == "bin_center,density"


def test_rerun_is_byte_identical(tmp_path):
    names = ("run_popdyn.csv", "run_histogram.csv", "run_summary.json")
    assert run(tmp_path, "popdyn", "--mean_c", "3.5", "--init", "random", *SMALL) == EXIT_OK
    first = [(tmp_path / n).read_bytes() for n in names]
    assert run(tmp_path, "popdyn", "--mean_c", "3.5", "--init", "random", *SMALL) == EXIT_OK
    assert first == [(tmp_path / n).read_bytes() for n in names]


def test_seed_changes_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run(a, "popdyn", "--mean_c", "3.5", *SMALL)
    run(b, "popdyn", "--mean_c", "3.5", "--seed", "2", *SMALL)
    assert (a / "run_popdyn.csv").read_text() != (b / "run_popdyn.csv").read_text()


def test_config_errors(tmp_path, capsys):
    assert run(tmp_path, "popdyn", "--mean_c", "5.0") == EXIT_CONFIG
    assert run(tmp_path, "scan", "--grid", "3.4,3.6,3.5") == EXIT_CONFIG
    assert run(tmp_path, "popdyn", "--init", "warm") == EXIT_CONFIG
    bad = tmp_path / "bad.cfg"
    bad.write_text("bogus = 1\n")
    assert run(tmp_path, "popdyn", "-c", str(bad)) == EXIT_CONFIG
    assert "bogus" in capsys.readouterr().err


def test_config_include_and_override(tmp_path):
    (tmp_path / "base.cfg").write_text("mean_c = 3.7  # comment\nN = 500\n")
    (tmp_path / "run.cfg").write_text("include = base.cfg\nN = 300\n")
    cfg = read_config(tmp_path / "run.cfg")
    assert cfg == {"mean_c": 3.7, "N": 300}
    (tmp_path / "loop.cfg").write_text("include = loop.cfg\n")
    with pytest.raises(ConfigError):
        read_config(tmp_path / "loop.cfg")


def test_config_hash_ignores_output_location():
    a = default_config()
    b = dict(a, out="/elsewhere", tag="x")
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(dict(a, seed=2))


def test_grid_parsing():
    assert parse_grid("3.4:3.5:0.05") == [3.4, 3.45, 3.5]
    assert parse_grid("0.15, 0.25") == [0.15, 0.25]
    with pytest.raises(ConfigError):
        parse_grid("3.5:3.4:0.05")


def test_oracle_command(tmp_path, capsys):
    assert run(tmp_path, "oracle", "--graph", "complete:5") == EXIT_OK
    assert "min_energy=35" in capsys.readouterr().out
    lines = (tmp_path / "run_instance_000.txt").read_text().splitlines()
    assert lines[0] == "5 10 4"


def test_oracle_budget_exit(tmp_path):
    code = run(tmp_path, "oracle", "--instance_N", "20", "--instances", "1", "--budget", "1",
               "--mean_c", "3.5")
    assert code in (EXIT_OK, EXIT_BUDGET)


def test_scan_and_damage(tmp_path):
    assert run(tmp_path, "scan", "--grid", "3.9,4.0", "--branch", "zero", *SMALL) == EXIT_OK
    assert (tmp_path / "run_scan_zero.csv").exists()
    assert run(tmp_path, "damage", "--mean_c", "3.9", "--damage_sweeps", "3", "--N", "200",
               "--samples", "2", "--test_nodes", "200") == EXIT_OK
    d = json.loads((tmp_path / "run_damage.json").read_text())
    assert 0.0 <= d["d"] <= 2.0


def test_paramagnet_command(tmp_path):
    assert run(tmp_path, "paramagnet", "--mean_c", "3.0", "--T_grid", "0.5,0.7",
               "--M", "500") == EXIT_OK
