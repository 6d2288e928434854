import os
import subprocess
import sys
from pathlib import Path

import pytest

from qsdecay import cli
from qsdecay.config import ConfigError, load_config, parse_config
from qsdecay.output import config_from_header, read_csv

ROOT = Path(__file__).resolve().parents[1]
THIN = ROOT / "configs" / "thin_barrier.ini"
FIELDFREE = ROOT / "configs" / "fieldfree_b4.ini"


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(path):
    cols, rows = read_csv(path)
    return [dict(zip(cols, r)) for r in rows]


def kv(path):
    return {r["quantity"]: r["value"] for r in rows_of(path)}


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


MINIMAL = """[barrier]
u0 = 3.0
b = 3.0
[state]
e0 = 1.217
[field]
amplitude = 0.05
omega = 0.1
"""


# ---------------------------------------------------------------- configuration errors

def test_error_messages_carry_line_numbers(tmp_path, capsys):
    bad = write(tmp_path, MINIMAL.replace("omega = 0.1", "omega = fast"))
    code, _, err = run(["itm-spectrum", "--config", bad, "--out", tmp_path / "o"], capsys)
    assert code == cli.EXIT_CONFIG
    assert f"{bad}:8:" in err and "omega" in err


def test_missing_and_unknown_keys(tmp_path):
    with pytest.raises(ConfigError, match="amplitude"):
        parse_config(MINIMAL.replace("amplitude = 0.05\n", ""))
    with pytest.raises(ConfigError, match=r"line 9.*colour"):
        parse_config(MINIMAL + "colour = red\n")
    with pytest.raises(ConfigError, match="line 5"):
        parse_config(MINIMAL.replace("e0 = 1.217", "e0 = 3.5"))  # above the barrier


def test_numerics_validation():
    with pytest.raises(ConfigError, match="dt"):
        parse_config(MINIMAL + "[numerics]\ndt = 0.1\n")
    with pytest.raises(ConfigError, match="sampling"):
        parse_config(MINIMAL + "[numerics]\nsampling = spline\n")


def test_overrides(tmp_path, capsys):
    cfg = load_config(THIN, ["field.amplitude=0.12", "numerics.dx=0.05"])
    assert cfg.field.amplitude == 0.12 and cfg.numerics.dx == 0.05
    code, _, err = run(["itm-spectrum", "--config", THIN, "--override", "field.amplitude"], capsys)
    assert code == cli.EXIT_CONFIG and "override" in err


def test_usage_errors_are_config_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["itm-spectrum"])
    assert exc.value.code == cli.EXIT_CONFIG
    code, _, _ = run(["itm-spectrum", "--config", THIN, "--threads", "0"], capsys)
    assert code == cli.EXIT_CONFIG


def test_engine_compatibility(tmp_path, capsys):
    code, _, err = run(["tdse-run", "--config", THIN, "--out", tmp_path], capsys)
    assert code == cli.EXIT_CONFIG and "engine" in err
    # compare needs a pulse
    code, _, err = run(["compare", "--config", THIN, "--out", tmp_path], capsys)
    assert code == cli.EXIT_CONFIG and "sin2" in err


def test_physics_errors_exit_two(tmp_path, capsys):
    code, _, err = run(["tdse-run", "--config", FIELDFREE, "--out", tmp_path,
                        "--override", "numerics.fit_start=50",
                        "--override", "numerics.t_fieldfree=20"], capsys)
    assert code == cli.EXIT_PHYSICS and "fit window" in err


# ---------------------------------------------------------------- outputs

def test_itm_spectrum_outputs(tmp_path, capsys):
    code, out, _ = run(["itm-spectrum", "--config", THIN, "--out", tmp_path], capsys)
    assert code == cli.EXIT_OK
    for name in ("itm_spectrum.csv", "itm_rates.csv", "validity.csv"):
        assert str(tmp_path / name) in out
    text = (tmp_path / "itm_rates.csv").read_text()
    assert text.startswith("# qsdecay ")
    assert "# units: atomic units" in text and "# config:" in text
    rates = kv(tmp_path / "itm_rates.csv")
    assert float(rates["ratio"]) == pytest.approx(0.6828, abs=1e-3)
    spec = rows_of(tmp_path / "itm_spectrum.csv")
    assert all(float(r["weight"]) >= 0 for r in spec)
    # twelve significant digits
    assert len(rates["p0"].replace(".", "").lstrip("0")) == 12


def test_zero_field_single_line(tmp_path, capsys):
    code, _, _ = run(["itm-spectrum", "--config", THIN, "--out", tmp_path,
                      "--override", "field.amplitude=0"], capsys)
    assert code == cli.EXIT_OK
    spec = rows_of(tmp_path / "itm_spectrum.csv")
    assert len(spec) == 1
    assert float(spec[0]["p"]) == pytest.approx(1.56012819986, rel=1e-11)
    assert float(kv(tmp_path / "itm_rates.csv")["ratio"]) == 1.0


def test_byte_identical_reruns(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    for d in ("a", "b"):
        assert run(["itm-spectrum", "--config", THIN, "--out", tmp_path / d], capsys)[0] == 0
    for name in ("itm_spectrum.csv", "itm_rates.csv", "validity.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_rerun_from_echoed_config(tmp_path, capsys):
    assert run(["itm-spectrum", "--config", THIN, "--out", tmp_path / "a",
                "--override", "field.amplitude=0.12"], capsys)[0] == 0
    echoed = write(tmp_path, config_from_header(tmp_path / "a" / "itm_spectrum.csv"), "echo.ini")
    assert load_config(echoed).to_ini() == load_config(THIN, ["field.amplitude=0.12"]).to_ini()
    assert run(["itm-spectrum", "--config", echoed, "--out", tmp_path / "b"], capsys)[0] == 0
    for name in ("itm_spectrum.csv", "itm_rates.csv"):
        assert read_csv(tmp_path / "a" / name) == read_csv(tmp_path / "b" / name)


def test_config_text_round_trip():
    cfg = load_config(ROOT / "configs" / "pulse_b4.ini")
    assert parse_config(cfg.to_ini()) == cfg


def test_field_free_tdse_run(tmp_path, capsys):
    code, _, _ = run(["tdse-run", "--config", FIELDFREE, "--out", tmp_path,
                      "--override", "numerics.t_fieldfree=60"], capsys)
    assert code == cli.EXIT_OK
    rates = kv(tmp_path / "tdse_rates.csv")
    assert float(rates["E0_ground"]) == pytest.approx(1.24, abs=0.01)
    assert float(rates["peak_energy"]) == pytest.approx(float(rates["E0_ground"]), abs=0.01)
    hist = rows_of(tmp_path / "history_fieldfree.csv")
    N = [float(r["N_well"]) for r in hist]
    assert N[-1] < N[0]


# ---------------------------------------------------------------- sweeps

def test_sweep_table(tmp_path, capsys):
    code, _, _ = run(["sweep", "--config", THIN, "--out", tmp_path, "--param", "amplitude",
                      "--values", "0.02,0.05"], capsys)
    assert code == cli.EXIT_OK
    table = rows_of(tmp_path / "sweep.csv")
    assert [r["status"] for r in table] == ["ok", "ok"]
    assert [float(r["itm_ratio"]) for r in table] == pytest.approx([0.3752, 0.6828], abs=1e-3)
    for r in table:
        assert (tmp_path / r["subdir"] / "itm_spectrum.csv").exists()


def test_sweep_parallel_matches_serial(tmp_path):
    cfg = load_config(THIN)
    serial = cli.cmd_sweep(cfg, "amplitude", [0.02, 0.05], tmp_path / "s", threads=1)
    parallel = cli.cmd_sweep(cfg, "amplitude", [0.02, 0.05], tmp_path / "p", threads=2)
    assert serial.report["rows"] == parallel.report["rows"]


def test_sweep_empty_and_partial_failure(tmp_path, capsys):
    code, _, err = run(["sweep", "--config", THIN, "--out", tmp_path, "--param", "amplitude",
                        "--values", ""], capsys)
    assert code == cli.EXIT_CONFIG
    code, _, err = run(["sweep", "--config", THIN, "--out", tmp_path, "--param", "b",
                        "--values", "3,-1"], capsys)
    assert code == cli.EXIT_PARTIAL
    table = rows_of(tmp_path / "sweep.csv")
    assert [r["status"] for r in table] == ["ok", "failed"]
    assert table[1]["error"]


def test_module_entry_point():
    env = dict(os.environ, PYTHONPATH=str(ROOT / "src"))
    res = subprocess.run([sys.executable, "-m", "qsdecay.cli", "--help"], capture_output=True, text=True, env=env)
    assert res.returncode == 0
    for sub in ("itm-spectrum", "tdse-run", "compare", "sweep"):
        assert sub in res.stdout
