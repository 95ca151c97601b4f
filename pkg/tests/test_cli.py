import csv
import io
import json
import math

import numpy as np
import pytest

from impulsive_iss.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from impulsive_iss.recordio import parse_trajectory, read_trajectory

FAST = {"n": 50, "dt": 1e-3, "horizon": 4.0}


def base_cfg(**kw):
    doc = {
        "system": {"preset": "worked_example"},
        "scheme": "imex_cn",
        "schedule": {"kind": "uniform", "T": 0.5},
        "initial": {"x": {"sine": 2.0, "mode": 1}, "y": 2.0},
        "sample_dt": 0.01,
        "seed": 0,
        **FAST,
    }
    doc.update(kw)
    return doc


@pytest.fixture
def write_cfg(tmp_path):
    def _write(doc, name="cfg.json"):
        p = tmp_path / name
        p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
        return str(p)
    return _write


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


# ------------------------------------------------------------------ certify

def test_certify_worked_example(write_cfg, capsys):
    code, out, _ = run(capsys, "certify", "--config", write_cfg(base_cfg()))
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["case"] == "b" and doc["feasible"]
    lo, hi = doc["dwell_bounds"]
    assert lo == pytest.approx(0.019458214, abs=1e-8)
    assert doc["window"]["theta1"] < 0.5 < doc["window"]["theta2"]


def test_certify_vartheta_gate_fails(write_cfg, capsys):
    cfg = base_cfg(system={"preset": "worked_example", "a": 0.3})
    code, out, err = run(capsys, "certify", "--config", write_cfg(cfg))
    assert code == EXIT_FAIL
    assert "vartheta" in json.loads(out)["failed_gates"]
    assert "vartheta" in err


def test_certify_case_a_clamps_lower(write_cfg, capsys):
    system = {"a": 1.0, "c": 0.5, "l": math.pi, "alpha": [0.5], "gamma": [0.0], "delta_jump": 0.9}
    code, out, _ = run(capsys, "certify", "--config", write_cfg(base_cfg(system=system)))
    doc = json.loads(out)
    assert code == EXIT_OK and doc["case"] == "a"
    assert doc["dwell_bounds"][0] == 0.0


def test_certify_writes_to_out(write_cfg, tmp_path, capsys):
    dest = tmp_path / "cert.json"
    code, out, _ = run(capsys, "certify", "--config", write_cfg(base_cfg()), "--out", str(dest))
    assert code == EXIT_OK and out == ""
    assert json.loads(dest.read_text())["case"] == "b"


# ------------------------------------------------------------------ simulate

def test_simulate_zero_horizon(write_cfg, capsys):
    code, out, _ = run(capsys, "simulate", "--config", write_cfg(base_cfg()), "--horizon", "0")
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0].startswith("# meta: ")
    assert lines[1] == "t,y,l2_x,h01_x,V,W,U,region,jump_index"
    assert len(lines) == 3


def test_simulate_jump_pairs_and_round_trip(write_cfg, tmp_path, capsys):
    dest = tmp_path / "traj.csv"
    cfg = write_cfg(base_cfg(horizon=20.0))
    assert main(["simulate", "--config", cfg, "--out", str(dest)]) == EXIT_OK
    rec = read_trajectory(str(dest))
    assert len(rec.jump_rows()) == 40
    rows = list(csv.reader(io.StringIO(dest.read_text().split("\n", 1)[1])))
    header, body = rows[0], [r for r in rows[1:] if r]
    assert {r[header.index("region")] for r in body} <= {"G+", "G-"}
    jumps = [r for r in body if r[-1] != ""]
    assert len(jumps) == 80
    # rewritten bytes match
    from impulsive_iss.recordio import format_trajectory
    assert format_trajectory(rec) == dest.read_text()


def test_simulate_byte_identical_reruns(write_cfg, capsys):
    cfg = write_cfg(base_cfg(schedule={"kind": "random"}, seed=3))
    _, a, _ = run(capsys, "simulate", "--config", cfg)
    _, b, _ = run(capsys, "simulate", "--config", cfg)
    assert a == b
    _, c, _ = run(capsys, "simulate", "--config", cfg, "--seed", "4")
    assert c != a


def test_simulate_flags_override(write_cfg, capsys):
    cfg = write_cfg(base_cfg())
    _, out, _ = run(capsys, "simulate", "--config", cfg, "--grid-n", "30", "--schedule", "explicit:0,0.7",
                    "--horizon", "1")
    rec = parse_trajectory(out)
    assert rec.meta["n"] == 30 and rec.meta["taus"] == [0.0, 0.7]


def test_simulate_random_needs_window(write_cfg, capsys):
    cfg = base_cfg(system={"preset": "worked_example", "a": 0.3}, schedule={"kind": "random"})
    code, _, err = run(capsys, "simulate", "--config", write_cfg(cfg))
    assert code == EXIT_FAIL and "infeasible" in err


# ------------------------------------------------------------------ verify

def test_verify_passes(write_cfg, capsys):
    code, out, err = run(capsys, "verify", "--config", write_cfg(base_cfg(horizon=10.0)))
    assert code == EXIT_OK
    doc = json.loads(out)
    names = [c["name"] for c in doc["checks"]]
    assert names == ["certificate", "lemma1", "envelope", "gplus_invariance", "reach_ball"]
    assert "PASS lemma1" in err


@pytest.mark.parametrize("mode,bad", [("flat", "lemma1"), ("upward", "envelope"),
                                      ("gminus", "gplus_invariance")])
def test_verify_injections_fail(write_cfg, capsys, mode, bad):
    code, out, _ = run(capsys, "verify", "--config", write_cfg(base_cfg(horizon=10.0)), "--inject", mode)
    assert code == EXIT_FAIL
    doc = json.loads(out)
    assert doc["injected"] == mode
    failed = {c["name"] for c in doc["checks"] if not c["passed"]}
    assert bad in failed


def test_verify_inadmissible_schedule_fails(write_cfg, capsys):
    code, out, _ = run(capsys, "verify", "--config", write_cfg(base_cfg()), "--schedule", "uniform:2.0")
    assert code == EXIT_FAIL
    cert = json.loads(out)["checks"][0]
    assert cert["name"] == "certificate" and not cert["details"]["schedule_admissible"]


def test_inject_flag_hidden_from_help(capsys):
    assert main(["verify", "--help"]) == EXIT_OK
    assert "--inject" not in capsys.readouterr().out


# ------------------------------------------------------------------ sweep

def sweep_rows(out):
    lines = out.splitlines()
    summary = json.loads(lines[-1].removeprefix("# summary: "))
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[:-1]))))
    return rows, summary


def test_sweep_T_axis(write_cfg, capsys):
    cfg = base_cfg(sweep={"axis": "T", "values": [0.2, 0.5, 0.9], "workers": 1})
    code, out, _ = run(capsys, "sweep", "--config", write_cfg(cfg))
    rows, summary = sweep_rows(out)
    assert code == EXIT_OK and summary["axis"] == "T"
    assert [r["admissible"] for r in rows] == ["True"] * 3
    assert [float(r["value"]) for r in rows] == [0.2, 0.5, 0.9]
    assert all(r["lemma1_passed"] == "True" for r in rows)


def test_sweep_amplitude_monotone(write_cfg, capsys):
    cfg = base_cfg(horizon=10.0, schedule={"kind": "random"}, seed=7,
                   sweep={"axis": "amplitude", "values": [0.0, 0.01, 0.05], "workers": 2})
    code, out, _ = run(capsys, "sweep", "--config", write_cfg(cfg))
    rows, summary = sweep_rows(out)
    assert code == EXIT_OK and summary["long_run_monotone"] is True
    assert [int(r["index"]) for r in rows] == [0, 1, 2]


def test_sweep_grid_order(write_cfg, capsys):
    cfg = base_cfg(horizon=2.0, sweep={"axis": "n", "values": [50, 100, 200]})
    code, out, _ = run(capsys, "sweep", "--config", write_cfg(cfg), "--workers", "3")
    _, summary = sweep_rows(out)
    assert code == EXIT_OK and summary["observed_order"] >= 1.9


def test_sweep_needs_section(write_cfg, capsys):
    code, _, err = run(capsys, "sweep", "--config", write_cfg(base_cfg()))
    assert code == EXIT_USAGE and "sweep" in err


# ------------------------------------------------------------------ spectrum

def test_spectrum_worked_example(write_cfg, capsys):
    cfg = write_cfg(base_cfg())
    radii = []
    for n in ("50", "200"):
        code, out, _ = run(capsys, "spectrum", "--config", cfg, "--grid-n", n)
        assert code == EXIT_OK
        radii.append(json.loads(out)["spectral_radius"])
    assert radii[0] == pytest.approx(1.0, abs=1e-8)
    assert radii[0] == pytest.approx(radii[1], abs=1e-8)


def test_spectrum_contracting_jump(write_cfg, capsys):
    cfg = base_cfg(system={"preset": "worked_example", "alpha": [0.5]})
    code, out, _ = run(capsys, "spectrum", "--config", write_cfg(cfg))
    assert json.loads(out)["spectral_radius"] == pytest.approx(0.5, abs=1e-6)


# ------------------------------------------------------------------ errors

@pytest.mark.parametrize("doc", [
    base_cfg(colour="blue"),
    base_cfg(system={"preset": "another_example"}),
    base_cfg(system={"preset": "worked_example", "B": [1.0]}),
    base_cfg(n=2),
    base_cfg(dt=-1.0),
    base_cfg(scheme="rk4"),
    base_cfg(schedule={"kind": "uniform"}),
    base_cfg(initial={"x": {"sine": 1.0}, "z": 1.0}),
    "{\"system\": ",
])
def test_config_errors_exit_2(write_cfg, capsys, doc):
    code, _, err = run(capsys, "certify", "--config", write_cfg(doc))
    assert code == EXIT_USAGE
    assert err.startswith("error:")


def test_json_error_reports_position(write_cfg, capsys):
    _, _, err = run(capsys, "certify", "--config", write_cfg("{\n  \"n\": ,\n}"))
    assert "line 2" in err


@pytest.mark.parametrize("flags", [["--grid-n", "2"], ["--dt", "0"], ["--horizon", "-1"],
                                   ["--schedule", "weekly:1"], ["--seed", "-3"]])
def test_bad_flags_exit_2(write_cfg, capsys, flags):
    code, _, _ = run(capsys, "simulate", "--config", write_cfg(base_cfg()), *flags)
    assert code == EXIT_USAGE


def test_missing_config_and_subcommand(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert main(["certify", "--config", str(tmp_path / "absent.json")]) == EXIT_USAGE


def test_unwritable_output(write_cfg, tmp_path, capsys):
    code, _, err = run(capsys, "certify", "--config", write_cfg(base_cfg()),
                       "--out", str(tmp_path / "no" / "such" / "dir.json"))
    assert code == EXIT_FAIL


def test_explicit_step_too_large(write_cfg, capsys):
    code, _, err = run(capsys, "simulate", "--config", write_cfg(base_cfg(dt=0.5)))
    assert code == EXIT_USAGE


def test_record_values_consistent(write_cfg, capsys):
    _, out, _ = run(capsys, "simulate", "--config", write_cfg(base_cfg(horizon=1.0)))
    rec = parse_trajectory(out)
    np.testing.assert_allclose(rec.V, rec.h01_x**2 + rec.y**2)
