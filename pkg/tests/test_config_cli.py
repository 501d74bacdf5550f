import csv
import io
import json
import subprocess
import sys

import pytest

from urnlab.cli import main
from urnlab.config import ConfigError, ExperimentConfig, parse_config
from urnlab.experiments import format_csv, run_experiment

SMALL = {
    "grow": "n = 2000\nreplicas = 3\n",
    "theorem-check": "n-values = 100, 3000\nreplicas = 3\n",
    "coupling-check": "n-from = 8\nn-to = 9\nreplicas = 2\nh = 0.2\n",
    "record-identity": "n = 300\nreplicas = 300\n",
    "tv-identity": "n = 50\nm = 100\nreplicas = 2\n",
    "schedule-table": "n-to = 40\n",
    "aux-walk-check": "n-values = 50, 500\nsamples = 2000\n",
}


# parsing -------------------------------------------------------------------------


def test_empty_config_is_an_error():
    with pytest.raises(ConfigError):
        parse_config("")
    with pytest.raises(ConfigError):
        parse_config("# only a comment\n\n")


def test_minimal_config_fills_defaults():
    cfg = parse_config("experiment = grow\n")
    assert cfg == ExperimentConfig("grow")
    assert cfg.seed == 0 and cfg.h == 0.05 and cfg.mode == "exact-cdf" and cfg.level == 1e-3


def test_full_config():
    cfg = parse_config(
        "experiment = coupling-check  # trailing comment\n"
        "model = gaussian(sigma=2);d=1\n"
        "seed = 18446744073709551615\n"
        "n-from = 8\nn-to = 12\nreplicas = 5\nh = 0.2\ngamma = 4.5\nmode = monte-carlo\n"
        "mc-samples = 1_000\nworkers = 2\nallow-large = yes\nassert-trend = true\n"
    )
    assert cfg.n_list() == [8, 9, 10, 11, 12]
    assert cfg.seed == 2**64 - 1 and cfg.gamma == 4.5 and cfg.mc_samples == 1000
    assert cfg.allow_large and cfg.assert_trend
    assert parse_config("experiment = grow\nn-values = 3, 1, 2\n").n_list() == [3, 1, 2]


@pytest.mark.parametrize(
    "text, line, key",
    [
        ("experiment = grow\ncolour = red\n", 2, "colour"),
        ("experiment = grow\nseed = 1\nseed = 2\n", 3, "seed"),
        ("experiment = grow\nh =\n", 2, "h"),
        ("experiment = grow\nh = -0.1\n", 2, "h"),
        ("experiment = grow\nreplicas = 0\n", 2, "replicas"),
        ("experiment = grow\nreplicas = two\n", 2, "replicas"),
        ("experiment = grow\nmodel = laplace(b=1);d=1\n", 2, "model"),
        ("experiment = grow\nseed = -1\n", 2, "seed"),
        ("experiment = grow\nmode = exact\n", 2, "mode"),
        ("experiment = grow\nallow-large = maybe\n", 2, "allow-large"),
        ("experiment = grow\nn = 20000000\n", 2, "n"),
        ("experiment = dance\n", 1, "experiment"),
        ("experiment = grow\njust words\n", 2, None),
    ],
)
def test_parse_errors_point_at_the_culprit(text, line, key):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.line == line
    assert err.value.key == key
    assert f"line {line}" in str(err.value)


def test_memory_guard_override():
    assert parse_config("experiment = grow\nn = 20000000\nallow-large = true\n").n == 20_000_000


def test_experiment_from_command_line_must_agree():
    assert parse_config("n = 5\n", experiment="grow").experiment == "grow"
    with pytest.raises(ConfigError):
        parse_config("experiment = grow\n", experiment="tv-identity")


# runs ----------------------------------------------------------------------------


def _run(name, text=None):
    return run_experiment(parse_config(SMALL[name] if text is None else text, experiment=name))


@pytest.mark.parametrize("name", sorted(SMALL))
def test_runs_are_byte_identical(name):
    a = format_csv(_run(name))
    b = format_csv(_run(name))
    assert a == b
    rows = list(csv.DictReader(io.StringIO(a)))
    assert rows
    if name != "schedule-table":
        assert {r["experiment"] for r in rows} == {name}
        assert {r["seed"] for r in rows} == {"0"}
        assert all(r["version"] and r["model"] == "cauchy(scale=1);d=1" for r in rows)


@pytest.mark.parametrize("name", ["grow", "theorem-check", "coupling-check", "record-identity"])
def test_workers_do_not_change_output(name):
    serial = format_csv(_run(name))
    parallel = format_csv(_run(name, SMALL[name] + "workers = 2\n"))
    assert serial == parallel


def test_adding_replicas_keeps_existing_rows():
    few = _run("grow", "n = 500\nreplicas = 2\n").rows
    more = _run("grow", "n = 500\nreplicas = 4\n").rows
    assert more[:2] == few


def test_floats_have_17_significant_digits():
    text = format_csv(_run("schedule-table", "n-to = 3\n"))
    row = list(csv.DictReader(io.StringIO(text)))[0]
    assert row["n"] == "1" and row["T_n"] == "20"
    assert float(row["p_n"]) == 23 / 43 and row["p_n"] == "%.17g" % (23 / 43)


def test_schedule_table_beyond_cutoff():
    rows = _run("schedule-table", "n-to = 3090\n").rows
    assert rows[3083]["T_n"] is not None and rows[3084]["T_n"] is None


def test_experiment_examples():
    assert _run("theorem-check", "model = point-mass(c=0);d=1\nn-values = 10, 1000\n").rows[0]["ks"] == 0.0
    assert all(r["ks"] == 0.0 for r in _run("aux-walk-check", "model = point-mass(c=0);d=1\nn-values = 10, 100\n").rows)
    assert _run("record-identity", "model = point-mass(c=0);d=1\nn = 100\nreplicas = 50\n").rows[0]["ks"] == 0.0
    tv = _run("tv-identity", "n = 500\nm = 1000\n")
    assert tv.passed and abs(tv.rows[0]["tv"] - 0.5) <= 1e-12
    assert _run("tv-identity", "n = 300\nm = 300\n").rows[0]["tv"] == 0.0
    lattice = _run("tv-identity", "model = rademacher();d=1\nn = 500\nm = 1000\n")
    assert lattice.passed and lattice.rows[0]["check"] == "bound"


def test_theorem_check_rejects_models_without_limit_cdf():
    with pytest.raises(ConfigError):
        _run("theorem-check", "model = symmetric-pareto(a=1.5,scale=1);d=1\nn = 100\n")
    with pytest.raises(ConfigError):
        _run("theorem-check", "model = cauchy(scale=1);d=2\nn = 100\n")


# command line --------------------------------------------------------------------


def test_cli_writes_csv_and_sidecar(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("experiment = tv-identity\nn = 50\nm = 100\n")
    out = tmp_path / "tv.csv"
    assert main(["tv-identity", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
    assert "PASS" in capsys.readouterr().err
    first = out.read_bytes()
    meta = json.loads((tmp_path / "tv.csv.meta.json").read_text())
    assert meta["seed"] == 3 and meta["passed"] and meta["wall_clock_seconds"] >= 0
    assert main(["tv-identity", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
    assert out.read_bytes() == first


def test_cli_stdout(capsys):
    assert main(["schedule-table", "--n-to", "9"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n,T_n,log_T_n,p_n,sum_p,log_ratio"
    assert lines[9].startswith("9,512,")


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("experiment = grow\nfrobnicate = 1\n")
    assert main(["grow", "--config", str(bad)]) == 2
    assert "frobnicate" in capsys.readouterr().err
    assert main(["grow", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["grow", "--n", "10", "--model", "cauchy(scale=0)"]) == 2
    # a failing check exits 1: the KS threshold is impossible to meet
    assert main(["aux-walk-check", "--n", "50", "--config", str(_cfg(tmp_path, "ks-threshold = 1e-9\n"))]) == 1
    with pytest.raises(SystemExit) as err:
        main(["no-such-experiment"])
    assert err.value.code == 2


def _cfg(tmp_path, text):
    p = tmp_path / "extra.cfg"
    p.write_text(text)
    return p


def test_console_script_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "urnlab.cli", "schedule-table", "--n-to", "2"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert r.returncode == 0
    assert r.stdout.splitlines()[1].startswith("1,20,3,")
