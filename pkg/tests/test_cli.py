import csv
import json
import math
import subprocess
import sys
import textwrap

import pytest

from squeezed_cvqkd.cli import SCENARIOS, defaults, load_config, main, resolve_config
from squeezed_cvqkd.exceptions import DomainError


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


KEYRATE = """
    scenario: keyrate
    name: finite_sweep
    objective: finite
    params:
      V: 0.5
      Vp: 1.0
      scheme: biased-homodyne
      N: 10000000
      distance_km: 0.0
    optimize:
      free: [Vx]
    sweep:
      axis: distance_km
      start: 0
      stop: 50
      num: 6
"""


def test_defaults_are_the_documented_values():
    d = defaults()
    assert d["beta"] == 0.95
    assert d["loss_db_per_km"] == 0.2
    assert d["multiplier"] == 6.5
    assert d["eps"] == 0.05
    assert d["eps_bar"] == 1e-10
    assert d["var_sqrtT"] == 0.02


def test_exponent_without_dot_is_a_float(tmp_path):
    cfg = load_config(write(tmp_path, "params:\n  eps_bar: 1e-10\n  N: 1e7\n"))
    assert cfg["params"]["eps_bar"] == 1e-10
    assert isinstance(cfg["params"]["N"], float)


def test_keyrate_distance_sweep(tmp_path):
    out = tmp_path / "out"
    assert main(["--config", str(write(tmp_path, KEYRATE)), "--out", str(out)]) == 0
    rows = read_csv(out / "finite_sweep.csv")
    assert [float(r["distance_km"]) for r in rows] == [0, 10, 20, 30, 40, 50]
    keys = [float(r["key_rate_bits"]) for r in rows]
    assert keys[0] > 0
    assert all(b < a for a, b in zip(keys, keys[1:]) if a > 0)
    for col in ("T", "key_rate_bits", "I_AB", "holevo", "T_low", "delta", "prefactor", "opt_Vx"):
        assert col in rows[0]
    for r in rows:
        assert all(math.isfinite(float(v)) for v in r.values())
    sidecar = json.loads((out / "finite_sweep.json").read_text())
    assert sidecar["params"]["beta"] == 0.95
    assert sidecar["params"]["Vx"] == 4.0  # materialized default


def test_sidecar_round_trip(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", str(write(tmp_path, KEYRATE)), "--out", str(a), "--threads", "3"]) == 0
    assert main(["--config", str(a / "finite_sweep.json"), "--out", str(b)]) == 0
    assert (a / "finite_sweep.csv").read_bytes() == (b / "finite_sweep.csv").read_bytes()


def test_invalid_t_het_exits_2(tmp_path, capsys):
    cfg = write(tmp_path, "scenario: keyrate\nparams:\n  scheme: heterodyne\n  t_het: 1.5\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "params.t_het" in capsys.readouterr().err


@pytest.mark.parametrize("text, field", [
    ("scenario: plot\n", "scenario"),
    ("scenario: keyrate\ncolour: red\n", "unknown keys"),
    ("scenario: keyrate\nparams:\n  V: 2\n", "params.V"),
    ("scenario: keyrate\noptimize:\n  free: [eps]\n", "optimize.free"),
    ("scenario: keyrate\nsweep:\n  axis: T\n  values: []\n", "sweep.values"),
    ("scenario: keyrate\nsweep:\n  axis: T\n  values: [0.5, 1.5]\n", "sweep[T=1.5].T"),
    ("scenario: tolerance\ntolerance:\n  axis: V\n", "tolerance.axis"),
    ("scenario: mc-validate\nmc:\n  repetitions: 1\n", "mc.repetitions"),
    ("scenario: allocation\n", "allocation"),
])
def test_validation_messages(tmp_path, capsys, text, field):
    assert main(["--config", str(write(tmp_path, text)), "--out", str(tmp_path)]) == 2
    assert field in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path):
    assert main(["--config", str(tmp_path / "nope.yaml")]) == 2


def test_numerical_failure_exits_3(tmp_path, capsys):
    # Var(sqrt T) exceeds <T>: no point of the objective can be evaluated
    cfg = write(tmp_path, "scenario: fading\nparams:\n  T: 0.01\n  var_sqrtT: 0.02\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path)]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_resolve_config_overrides():
    cfg = resolve_config({"scenario": "keyrate", "seed": 4}, seed=9, threads=2)
    assert (cfg["seed"], cfg["threads"], cfg["name"]) == (9, 2, "keyrate")
    with pytest.raises(DomainError):
        resolve_config({"scenario": "keyrate"}, threads=0)


def test_tolerance_scenario(tmp_path):
    cfg = write(tmp_path, """
        scenario: tolerance
        params: {V: 0.5, side: RR}
        optimize: {free: [Vx]}
        tolerance: {axis: eps}
        sweep: {axis: loss_db, values: [1, 5, 60]}
    """)
    assert main(["--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "tolerance.csv")
    tol = [float(r["max_eps"]) for r in rows]
    assert tol[0] > tol[1] > 0
    assert [r["status"] for r in rows][:2] == ["ok", "ok"]
    assert float(rows[0]["T"]) == pytest.approx(10 ** -0.1)


def test_fading_scenario(tmp_path):
    cfg = write(tmp_path, """
        scenario: fading
        params: {V: 0.5, Vx: 4.0, T: 0.5, eps: 0.01}
        sweep: {axis: var_sqrtT, values: [0.0, 0.02, 0.04]}
    """)
    assert main(["--config", str(cfg), "--out", str(tmp_path)]) == 0
    keys = [float(r["key_rate_bits"]) for r in read_csv(tmp_path / "fading.csv")]
    assert keys[0] > keys[1] > keys[2]


def test_mc_validate_scenario(tmp_path):
    cfg = write(tmp_path, """
        scenario: mc-validate
        params: {V: 0.5, Vx: 10, Vp: 10, T: 0.5, scheme: biased-homodyne}
        mc: {samples_x: 1000, samples_p: 1000, repetitions: 300}
        sweep: {axis: eps, values: [0.05, 0.1]}
    """)
    assert main(["--config", str(cfg), "--out", str(tmp_path), "--seed", "5"]) == 0
    rows = read_csv(tmp_path / "mc-validate.csv")
    assert len(rows) == 6
    assert set(rows[0]) >= {"eps", "quantity", "empirical_var", "formula_var", "relative_error",
                            "rse", "agree"}
    assert {r["agree"] for r in rows} <= {"true", "false"}


def test_allocation_scenario(tmp_path):
    cfg = write(tmp_path, """
        scenario: allocation
        params: {Vx: 10}
        allocation: {var_p: 10, side: DR}
        sweep: {axis: var_x, values: [0.11, 0.3]}
    """)
    assert main(["--config", str(cfg), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "allocation.csv")
    assert float(rows[0]["worst_eps_x"]) == pytest.approx(0.0, abs=1e-6)
    assert float(rows[1]["worst_eps_x"]) > 0.0
    for r in rows:
        assert float(r["worst_key_bits"]) <= min(float(r["key_anti-squeezed"]), float(r["key_squeezed"])) + 1e-12


def test_every_scenario_is_exercised():
    assert set(SCENARIOS) == {"keyrate", "tolerance", "fading", "mc-validate", "allocation"}


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, "scenario: keyrate\nparams: {T: 0.5}\n")
    proc = subprocess.run([sys.executable, "-m", "squeezed_cvqkd", "--config", str(cfg),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "keyrate.csv").exists()
