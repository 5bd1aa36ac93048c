import csv
import io
import json
import math
import subprocess
import sys

import pytest

from dph import cli
from dph.config import RunConfig, parse_config


def write_config(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data) if not isinstance(data, str) else data)
    return str(path)


def invoke(capsys, *argv):
    code = cli.run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture(autouse=True)
def serial(monkeypatch):
    monkeypatch.setenv(cli.WORKERS_ENV, "1")


def test_pure_phase_ohmic_row(tmp_path, capsys):
    path = write_config(tmp_path, {"bath": {"ohmic": {"epsilon": 0.1, "omega_c": 1}}, "task": {"T": 2 * math.pi}})
    code, out, _ = invoke(capsys, "pure-phase", "--config", path)
    assert code == 0
    (row,) = rows(out)
    assert list(row) == ["T", "total", "berry_part", "env_dynamical_part", "env_arg_part"]
    assert float(row["total"]) == pytest.approx(3.4557519, abs=1e-7)
    assert row["env_arg_part"] == "0"


def test_pure_phase_zero_coupling_range(tmp_path, capsys):
    path = write_config(tmp_path, {
        "system": {"n": 2},
        "bath": {"discrete": [{"omega": 1.0, "coupling": 0.0}, {"omega": 2.0, "coupling": 0.0}]},
        "task": {"T_range": {"start": 0.1, "stop": 10, "num": 100}},
    })
    code, out, _ = invoke(capsys, "pure-phase", "--config", path)
    assert code == 0
    table = rows(out)
    assert len(table) == 100
    Ts = [float(r["T"]) for r in table]
    assert Ts == sorted(Ts) and len(set(Ts)) == 100
    assert all(float(r["total"]) == pytest.approx(5 * math.pi, abs=1e-12) for r in table)
    assert float(table[0]["total"]) == pytest.approx(15.7079633, abs=1e-7)


def test_pure_phase_ohmic_rejects_zero_duration(tmp_path, capsys):
    path = write_config(tmp_path, {"bath": {"ohmic": {"epsilon": 0.1, "omega_c": 1}}, "task": {"T": 0}})
    code, _, err = invoke(capsys, "pure-phase", "--config", path)
    assert code == 3
    assert "T > 0" in err


def test_weak_flag(tmp_path, capsys):
    path = write_config(tmp_path, {"bath": {"discrete": [{"omega": 1, "coupling": 0.1}]},
                                   "task": {"T": math.pi / 2, "weak": True}})
    code, out, _ = invoke(capsys, "pure-phase", "--config", path)
    assert code == 0
    assert float(rows(out)[0]["total"]) == pytest.approx(math.pi + 0.0157080, abs=1e-7)


def test_mixed_phase_stationary_state(tmp_path, capsys):
    path = write_config(tmp_path, {
        "bath": {"discrete": [{"omega": 1, "coupling": 0.3}, {"omega": 1.7, "coupling": 0.2}]},
        "task": {"T_range": {"start": 1, "stop": 12, "num": 12}, "c_plus": 1, "c_minus": 0},
    })
    code, out, err = invoke(capsys, "mixed-phase", "--config", path)
    assert code == 0
    table = rows(out)
    assert list(table[0]) == ["T", "phase", "abs_F", "eigenvalue_plus", "eigenvalue_minus", "bridged_samples"]
    assert all(float(r["phase"]) == 0.0 for r in table)
    assert "0 correction" in err


def test_mixed_phase_convergence_failure(tmp_path, capsys):
    path = write_config(tmp_path, {
        "bath": {"discrete": [{"omega": 1, "coupling": 0.3}, {"omega": 1.7, "coupling": 0.2}]},
        "task": {"T": 25.0, "c_plus": 0.8, "c_minus": [0, 0.6]},
    })
    code, _, err = invoke(capsys, "mixed-phase", "--config", path, "--steps", 512, "--tol", 1e-6)
    assert code == 4
    assert "steps doubled" in err
    code, out, _ = invoke(capsys, "mixed-phase", "--config", path, "--steps", 65536, "--tol", 1e-4)
    assert code == 0


def test_mixed_phase_persistent_degeneracy(tmp_path, capsys):
    path = write_config(tmp_path, {
        "bath": {"discrete": [{"omega": 1, "coupling": math.sqrt(2.9)}]},
        "task": {"T": 2 * math.pi, "steps": 512, "tol": None},
    })
    code, _, err = invoke(capsys, "mixed-phase", "--config", path)
    assert code == 3
    assert "DegeneracyError" in err


def test_mixed_phase_flags_bridged_rows(tmp_path, capsys):
    path = write_config(tmp_path, {
        "bath": {"discrete": [{"omega": 1, "coupling": math.sqrt(2.9)}]},
        "task": {"T": 2 * math.pi, "steps": 64, "tol": None},
    })
    code, out, _ = invoke(capsys, "mixed-phase", "--config", path)
    assert code == 0
    assert int(rows(out)[0]["bridged_samples"]) > 0


def test_decoherence_rows(tmp_path, capsys):
    path = write_config(tmp_path, {
        "bath": {"discrete": [{"omega": 2.0, "coupling": 0.3}]},
        "task": {"times": [0.0, 1.0, math.pi]},
    })
    code, out, _ = invoke(capsys, "decoherence", "--config", path)
    assert code == 0
    table = rows(out)
    assert list(table[0]) == ["t", "abs_F", "arg_F", "eta_sum"]
    assert table[0]["abs_F"] == "1" and table[0]["eta_sum"] == "0" and table[0]["arg_F"] == "0"
    assert float(table[2]["abs_F"]) == pytest.approx(1.0, abs=1e-15)  # revival at 2 pi / omega
    assert float(table[2]["arg_F"]) == pytest.approx(-2 * math.pi, abs=1e-14)


def test_decoherence_non_reviving_bath(tmp_path, capsys):
    from dph.validation import pointer_test_bath

    modes = [{"omega": m.frequency, "coupling": m.coupling} for m in pointer_test_bath()]
    path = write_config(tmp_path, {"bath": {"discrete": modes}, "task": {"t_range": {"start": 5, "stop": 60, "num": 1101}}})
    code, out, _ = invoke(capsys, "decoherence", "--config", path)
    assert code == 0
    assert max(float(r["abs_F"]) for r in rows(out)) < 1e-6


@pytest.mark.parametrize("task", [{}, {"times": [0.0, 2.0, 1.0]}, {"times": [-1.0, 1.0]}, {"times": []}])
def test_decoherence_bad_grid(tmp_path, capsys, task):
    path = write_config(tmp_path, {"task": task})
    code, _, err = invoke(capsys, "decoherence", "--config", path)
    assert code == 2
    assert "task.times" in err


def test_sweep_over_coupling_scale(tmp_path, capsys):
    path = write_config(tmp_path, {
        "bath": {"discrete": [{"omega": 1, "coupling": 0.1}]},
        "task": {"T": 2 * math.pi, "sweep": {"parameter": "coupling_scale", "values": [0, 1, 2]}},
    })
    code, out, _ = invoke(capsys, "sweep", "--config", path)
    assert code == 0
    table = rows(out)
    env = [float(r["env_dynamical_part"]) + float(r["env_arg_part"]) for r in table]
    assert env[0] == 0.0
    assert env[1] == pytest.approx(0.0628319, abs=1e-7)
    assert env[2] == pytest.approx(4 * env[1], rel=1e-12)


def test_sweep_over_n_keeps_additive_phase(tmp_path, capsys):
    path = write_config(tmp_path, {"task": {"T": 1.0, "sweep": {"parameter": "n", "values": [0, 1, 2, 3]}}})
    code, out, _ = invoke(capsys, "sweep", "--config", path)
    assert code == 0
    totals = [float(r["total"]) for r in rows(out)]
    assert totals == pytest.approx([math.pi, 3 * math.pi, 5 * math.pi, 7 * math.pi], abs=1e-12)


def test_sweep_unwraps_mixed_phase(tmp_path, capsys):
    path = write_config(tmp_path, {
        "bath": {"discrete": [{"omega": 1, "coupling": 0.3}, {"omega": 1.7, "coupling": 0.2}]},
        "task": {"c_plus": 0.8, "c_minus": 0.6, "tol": None, "steps": 1024,
                 "sweep": {"parameter": "T", "quantity": "mixed-phase", "range": {"start": 0.5, "stop": 30, "num": 60}}},
    })
    code, out, err = invoke(capsys, "sweep", "--config", path)
    assert code == 0
    phases = [float(r["phase"]) for r in rows(out)]
    assert max(abs(b - a) for a, b in zip(phases, phases[1:])) <= math.pi
    assert "correction" in err


def test_sweep_parallel_matches_serial(tmp_path, capsys, monkeypatch):
    path = write_config(tmp_path, {
        "bath": {"discrete": [{"omega": 1, "coupling": 0.3}]},
        "task": {"c_plus": 0.8, "c_minus": 0.6, "tol": None, "steps": 256,
                 "sweep": {"parameter": "T", "quantity": "mixed-phase", "range": {"start": 0.5, "stop": 10, "num": 16}}},
    })
    _, serial_out, _ = invoke(capsys, "sweep", "--config", path)
    monkeypatch.setenv(cli.WORKERS_ENV, "3")
    _, parallel_out, _ = invoke(capsys, "sweep", "--config", path)
    assert parallel_out == serial_out


def test_ordered_map_preserves_order():
    jobs = [cli.Job("pure-phase", cli.SystemParams(1.0, 1.0, n), (), None, "plus", 1.0) for n in range(6)]
    assert cli.ordered_map(cli.evaluate, jobs, workers=3) == [cli.evaluate(j) for j in jobs]


def test_sweep_config_errors(tmp_path, capsys):
    cases = [
        {"task": {"T": 1.0}},
        {"task": {"T": 1.0, "sweep": {"parameter": "epsilon", "values": [0.1]}}},
        {"task": {"T": 1.0, "sweep": {"parameter": "n", "values": [0.5]}}},
        {"task": {"T": 1.0, "sweep": {"parameter": "T", "values": [1, 2]}}},
        {"task": {"sweep": {"parameter": "g", "values": [2, 1]}}},
    ]
    for i, data in enumerate(cases):
        path = write_config(tmp_path, data, f"c{i}.json")
        code, _, err = invoke(capsys, "sweep", "--config", path)
        assert code == 2, (data, err)


def test_output_is_deterministic(tmp_path, capsys):
    path = write_config(tmp_path, {
        "bath": {"discrete": [{"omega": 1, "coupling": 0.3}, {"omega": 1.3, "coupling": 0.1}]},
        "task": {"T_range": {"start": 1, "stop": 5, "num": 9}, "c_plus": [0.6, 0], "c_minus": [0, 0.8]},
    })
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert invoke(capsys, "mixed-phase", "--config", path, "--out", a)[0] == 0
    assert invoke(capsys, "mixed-phase", "--config", path, "--out", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_effective_config_round_trip(tmp_path, capsys):
    path = write_config(tmp_path, {
        "bath": {"discrete": [{"omega": 1, "coupling": 0.3}]},
        "task": {"T_range": {"start": 1, "stop": 5, "num": 5}, "c_plus": 0.6, "c_minus": [0, 0.8]},
    })
    eff = tmp_path / "effective.json"
    code, first, _ = invoke(capsys, "mixed-phase", "--config", path, "--steps", 1024, "--effective-config", eff)
    assert code == 0
    data = json.loads(eff.read_text())
    assert data["task"]["steps"] == 1024 and data["task"]["command"] == "mixed-phase"
    assert data["task"]["c_minus"] == [0.0, 0.8]
    code, second, _ = invoke(capsys, "mixed-phase", "--config", eff)
    assert code == 0 and second == first
    assert parse_config(eff.read_text()) == RunConfig.model_validate(data)


def test_output_path_from_config(tmp_path, capsys):
    target = tmp_path / "out.csv"
    path = write_config(tmp_path, {"task": {"T": 1.0}, "output": {"path": str(target), "precision": 6}})
    code, out, _ = invoke(capsys, "pure-phase", "--config", path)
    assert code == 0 and out == ""
    assert target.read_text().splitlines()[1] == "1,3.14159,3.14159,0,0"


def test_negative_zero_is_normalised():
    assert cli.format_csv(["a"], [(-0.0,)]) == "a\n0\n"


def test_unwrap_counts_corrections():
    phases, count = cli.unwrap([3.0, -3.0, 3.1, 0.0])
    assert count == 2
    assert all(abs(b - a) <= math.pi for a, b in zip(phases, phases[1:]))


@pytest.mark.parametrize(
    "text,needle",
    [
        ('{"system": {"n": 0},\n "bath": {"ohmic": {"epsilon": 0.1, "omega_c": 1}\n', "line 3"),
        ('{"system": {"n": -1}}', "system.n"),
        ('{"bath": {"discrete": [], "ohmic": {"epsilon": 0.1, "omega_c": 1}}}', "exactly one"),
        ('{"bath": {}}', "exactly one"),
        ('{"task": {"c_plus": 0.5, "c_minus": 0.5}}', "c_minus"),
        ('{"task": {"T": 1, "T_range": {"start": 0, "stop": 1, "num": 2}}}', "at most one"),
        ('{"system": {"omega": 1, "typo": 2}}', "system.typo"),
        ('{"task": {"command": "decoherence", "T": 1}}', "task.command"),
        ("[1, 2]", "JSON object"),
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, text, needle):
    path = write_config(tmp_path, text)
    code, _, err = invoke(capsys, "pure-phase", "--config", path)
    assert code == 2
    assert needle in err


def test_missing_config_file(tmp_path, capsys):
    code, _, err = invoke(capsys, "pure-phase", "--config", tmp_path / "nope.json")
    assert code == 2 and "cannot read" in err


def test_bad_worker_variable(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.WORKERS_ENV, "zero")
    path = write_config(tmp_path, {"task": {"sweep": {"parameter": "T", "quantity": "mixed-phase", "values": [1, 2]}}})
    code, _, err = invoke(capsys, "sweep", "--config", path)
    assert code == 2 and cli.WORKERS_ENV in err


def test_amplitude_forms():
    cfg = parse_config('{"task": {"c_plus": {"re": 0.6}, "c_minus": [0, 0.8]}}')
    assert cfg.task.c_plus == 0.6 and cfg.task.c_minus == 0.8j


def test_validate_tight_tolerance_names_failures(tmp_path, capsys):
    path = write_config(tmp_path, {"task": {"checks": ["A1", "A5"]}})
    code, out, _ = invoke(capsys, "validate", "--config", path, "--tol", 1e-15)
    assert code == 1
    assert "A1 FAIL" in out
    assert out.strip().splitlines()[-1].startswith("validate: FAIL (A1")


def test_validate_subset_passes(tmp_path, capsys):
    path = write_config(tmp_path, {"task": {"checks": ["A2", "A5", "A7", "A8"]}})
    code, out, _ = invoke(capsys, "validate", "--config", path)
    assert code == 0
    assert out.strip().splitlines()[-1] == "validate: PASS"


def test_validate_truncation_budget_is_diagnosed(tmp_path, capsys):
    path = write_config(tmp_path, {"task": {"checks": ["A1", "A4"], "coupling_scale": 10.0, "fock_levels": 6}})
    code, out, _ = invoke(capsys, "validate", "--config", path)
    assert code == 1
    assert "TruncationError" in out
    assert "A1 FAIL" in out and "A4 FAIL" in out


def test_validate_default_config_passes(tmp_path, capsys):
    """Default validate runs A1-A6; A6 is analysed as unattainable, so this stays red."""
    path = write_config(tmp_path, {})
    code, out, _ = invoke(capsys, "validate", "--config", path)
    print(out)
    assert code == 0, out


def test_console_script(tmp_path):
    path = write_config(tmp_path, {"task": {"T": 1.0}})
    proc = subprocess.run([sys.executable, "-m", "dph.cli", "pure-phase", "--config", path],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.startswith("T,total,")
