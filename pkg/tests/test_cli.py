import csv

import pytest

from hardylab.cli import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK, main, sweep_rows
from hardylab.config import ConfigError, parse_config

SMALL_POWER = """
[domain]
r_lo = 1.0
r_hi = 5.0
dim_n = 3
[discretization]
n_cells = 20
grading = "uniform"
[weights]
family = "power"
gamma = -2.0
p = 2.0
[problem]
lambda = 0.125
T = 0.01
[time]
dt = 1e-4
"""


def _write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_parse_defaults():
    cfg = parse_config("")
    assert cfg.weights.family == "power" and cfg.make_pair().claimed_K == pytest.approx(0.25)


@pytest.mark.parametrize(
    "text,needle",
    [
        ("[weights]\np = 1.5\ngamma = -2.0", "p"),
        ("[domain]\nbogus = 1", "unknown key 'domain.bogus'"),
        ("[weights]\nfamily = 'power'\ngamma = -0.5", "gamma"),
        ("[weights]\nfamily = 'confining'\ngamma = 0.5", "gamma > 1"),
        ("[weights]\nfamily = 'confining'", "needs key 'gamma'"),
        ("[weights]\nfamily = 'identity'\ngamma = 1.0", "not used"),
        ("[weights]\nfamily = 'superharmonic'\nbeta = 2.0", "beta > 3"),
        ("[weights]\nfamily = 'derived'\nbeta = 1.0\nsigma = -1.0", "sigma"),
        ("[domain]\nr_lo = 2.0\nr_hi = 1.0", "r_lo < r_hi"),
        ("[domain]\nr_lo = 0.0", "r_lo"),
        ("[problem]\nlambda = -1.0", "lambda"),
        ("[problem]\nlambda = []", "empty"),
        ("[problem]\ninitial = 'square'", "initial"),
        ("[time]\nscheme = 'euler'", "scheme"),
        ("[hardy]\nladder = [[1, 0.1, 1.0]]", "ladder"),
        ("[discretization]\nn_cells = 1", "n_cells"),
        ("[weights\n", "malformed"),
    ],
)
def test_rejected_configs(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(text)


def test_p_must_be_below_dimension():
    with pytest.raises(ConfigError, match="dim_n"):
        parse_config("[domain]\ndim_n = 2\n[weights]\nfamily='identity'\np = 2.0")


def test_config_error_exit_code(tmp_path, capsys):
    path = _write(tmp_path, "[weights]\np = 1.5")
    assert main(["--config", str(path), "--out", str(tmp_path), "hardy"]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["--config", str(tmp_path / "missing.toml"), "hardy"]) == EXIT_CONFIG


def test_bad_seed(tmp_path):
    assert main(["--seed", "-1", "--out", str(tmp_path), "hardy"]) == EXIT_CONFIG


def test_check_weights_pass_and_fail(tmp_path):
    ok = _write(tmp_path, "[weights]\nfamily = 'power'\ngamma = -2.0\n")
    assert main(["--config", str(ok), "--out", str(tmp_path / "a"), "check-weights"]) == EXIT_OK
    bad = _write(tmp_path, "[weights]\nfamily = 'exp-singular'\ngamma = 0.0\n", "bad.toml")
    assert main(["--config", str(bad), "--out", str(tmp_path / "b"), "check-weights"]) == EXIT_CHECK_FAILED
    rows = _read(tmp_path / "b" / "admissibility.csv")
    assert rows[0] == ["check_name", "probe", "level", "value", "verdict"]
    assert any(r[0] == "bp_omega2" and r[4] == "fail" for r in rows[1:])


def test_hardy_writes_rayleigh(tmp_path, capsys):
    path = _write(tmp_path, SMALL_POWER)
    assert main(["--config", str(path), "--out", str(tmp_path), "hardy"]) == EXIT_OK
    rows = _read(tmp_path / "rayleigh.csv")
    assert rows[0][:4] == ["n_cells", "r_lo", "r_hi", "best_value"]
    assert rows[-1][0] == "final" and rows[-1][-1] == "consistent"
    assert "verdict=consistent" in capsys.readouterr().out


def test_solve_writes_energy_and_coefficients(tmp_path, capsys):
    path = _write(tmp_path, SMALL_POWER)
    assert main(["--config", str(path), "--out", str(tmp_path), "solve", "--dump-coeffs"]) == EXIT_OK
    energy = _read(tmp_path / "energy.csv")
    coeffs = _read(tmp_path / "coefficients.csv")
    assert energy[0] == ["t", "half_l2", "diss", "gain", "cum_diss", "cum_gain"]
    assert len(energy) == len(coeffs) == 102
    assert coeffs[0][1] == "a_1"
    out = capsys.readouterr().out
    assert "lambda/K=0.5" in out and "(pass)" in out


def test_solve_needs_single_lambda(tmp_path):
    path = _write(tmp_path, SMALL_POWER.replace("lambda = 0.125", "lambda = [0.1, 0.2]"))
    assert main(["--config", str(path), "--out", str(tmp_path), "solve"]) == EXIT_CONFIG


def test_sweep_rows_and_threshold(tmp_path):
    cfg = parse_config(SMALL_POWER.replace("lambda = 0.125", "lambda = [0.05, 0.1, 1000.0]")
                       .replace("T = 0.01", "T = 0.005"))
    rows, threshold = sweep_rows(cfg)
    assert [r[0] for r in rows[:3]] == [0.05, 0.1, 1000.0]
    assert threshold == 0.1
    assert rows[-1][-1] == "threshold"
    assert rows[2][5] is True or rows[2][2] > 1.0


def test_sweep_command(tmp_path):
    path = _write(tmp_path, SMALL_POWER.replace("lambda = 0.125", "lambda = [0.05, 0.1]"))
    assert main(["--config", str(path), "--out", str(tmp_path), "sweep-lambda"]) == EXIT_OK
    rows = _read(tmp_path / "sweep.csv")
    assert rows[0][0] == "lambda" and len(rows) == 4


@pytest.mark.parametrize("cmd", ["check-weights", "hardy", "solve"])
def test_outputs_are_byte_identical(tmp_path, cmd):
    path = _write(tmp_path, SMALL_POWER + "\n[hardy]\nmultistart = 2\n")
    names = {"check-weights": "admissibility.csv", "hardy": "rayleigh.csv", "solve": "energy.csv"}
    blobs = []
    for run in ("x", "y"):
        main(["--config", str(path), "--out", str(tmp_path / run), "--seed", "3", cmd])
        blobs.append((tmp_path / run / names[cmd]).read_bytes())
    assert blobs[0] == blobs[1]
    assert b"\r\n" not in blobs[0]
