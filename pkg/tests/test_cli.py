import json
import math

import pytest

from nleigen.cli import SCHEMA, main, validate_config
from nleigen.errors import ConfigError

LAP = {"family": "plap_type", "n": 2}
DISK = {"kind": "disk", "R": 1.0}


def run(tmp_path, cfg, *extra):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "out"
    code = main(["--config", str(path), "--out", str(out), *extra])
    return code, out


def load(out, name="summary.json"):
    return json.loads((out / name).read_text())


def test_eigen_radial(tmp_path):
    code, out = run(tmp_path, {"command": "eigen-radial", "operator": LAP, "domain": DISK})
    assert code == 0
    s = load(out)
    assert s["lambda_star"] == pytest.approx(5.78318596, rel=1e-4)
    assert {"iterations", "residual"} <= set(s)
    assert (out / "profile.csv").exists()


def test_check_operator_asymmetric_is_informational(tmp_path):
    op = {"family": "pseudo_plap", "n": 2, "params": {"p": 2.0}}
    code, out = run(tmp_path, {"command": "check-operator", "operator": op, "trials": 50})
    assert code == 0
    s = load(out)
    assert s["conditions"] == {"A": True, "B": True, "C": True, "D": False}
    assert (out / "profile.csv").read_text().startswith("s,m1,m2,m3,m4,mlow,mhigh")


@pytest.mark.parametrize("cfg", [
    {"command": "solve-grid", "operator": LAP, "domain": DISK, "lambda": 1.0, "bogus": 1},
    {"command": "solve-grid", "operator": {"family": "nope", "n": 2}, "domain": DISK, "lambda": 1.0},
    {"command": "solve-grid", "operator": LAP, "lambda": 1.0},
    {"command": "solve-grid", "operator": LAP, "domain": {"kind": "disk"}, "lambda": 1.0},
    {"command": "launch", "operator": LAP},
])
def test_malformed_config(tmp_path, cfg):
    code, out = run(tmp_path, cfg)
    assert code == 4
    assert not out.exists()


def test_unreadable_config(tmp_path):
    (tmp_path / "cfg.json").write_text("{not json")
    assert main(["--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "o")]) == 4


def test_solve_grid_and_verify(tmp_path):
    cfg = {"command": "solve-grid", "operator": LAP, "domain": DISK, "solver": {"h": 0.0625},
           "lambda": 4.0}
    code, out = run(tmp_path, cfg)
    assert code == 0
    s = load(out)
    assert s["status"] == "converged" and s["sup_u"] > 1.0
    assert all(v is None or v >= 0 for v in s["margins"].values())
    field = out / "field.csv"
    vcfg = {"command": "verify", "operator": LAP, "domain": DISK, "solver": {"h": 0.0625},
            "fields": [{"path": str(field), "lambda": 4.0}]}
    path = tmp_path / "v.json"
    path.write_text(json.dumps(vcfg))
    assert main(["--config", str(path), "--out", str(tmp_path / "v")]) == 0
    assert load(tmp_path / "v")["passed"] is True


def test_solve_grid_blowup_exit(tmp_path):
    cfg = {"command": "solve-grid", "operator": LAP, "domain": DISK, "solver": {"h": 0.0625},
           "lambda": 9.0}
    code, out = run(tmp_path, cfg)
    assert code == 2
    assert load(out)["status"] in ("blowup", "stalled")


def test_solve_radial_infeasible_exit(tmp_path):
    code, out = run(tmp_path, {"command": "solve-radial", "operator": LAP, "domain": DISK, "lambda": 6.0})
    assert code == 2 and load(out)["status"] == "infeasible"


def test_solve_radial(tmp_path):
    code, out = run(tmp_path, {"command": "solve-radial", "operator": LAP, "domain": DISK, "lambda": 4.0})
    assert code == 0 and load(out)["v0"] == pytest.approx(4.4665, rel=1e-3)


def test_barriers(tmp_path):
    cfg = {"command": "barriers", "operator": {"family": "inf_type", "n": 2},
           "barriers": {"nu": 1.0, "R": 2.0, "R_o": 1.0, "sup_f_plus": 1.0, "sup_h": 0.0}}
    code, out = run(tmp_path, cfg)
    assert code == 0
    vals = {b["formula_id"]: b["value"] for b in load(out)["bounds"]}
    assert vals["existence_threshold"] == pytest.approx(0.00390625)
    assert vals["sup_inf_cone"] == pytest.approx(0.75 * 3 ** (1 / 3))


def test_eigen_grid(tmp_path):
    cfg = {"command": "eigen-grid", "operator": LAP, "domain": {"kind": "rectangle", "a": 1.0, "b": 1.0},
           "solver": {"h": 0.0625}, "eigen_tol": 0.02}
    code, out = run(tmp_path, cfg)
    assert code == 0
    s = load(out)
    assert s["lam_lo"] <= 2 * math.pi ** 2 * 1.02 and s["lam_hi"] >= 2 * math.pi ** 2 * 0.98
    assert s["margins"]["blowup_bracket"] >= 0


def test_sweep_is_deterministic_across_jobs(tmp_path):
    cfg = {"command": "sweep-lambda", "operator": LAP, "domain": DISK, "solver": {"h": 0.0625},
           "lambda_range": {"start": 3.0, "stop": 4.0, "num": 3}, "probes": [[0.0, 0.0], [0.3, 0.2]]}
    code1, out1 = run(tmp_path, cfg)
    (tmp_path / "one").mkdir()
    code2, out2 = run(tmp_path / "one", cfg, "--jobs", "2")
    assert code1 == code2 == 0
    assert (out1 / "summary.json").read_text() == (out2 / "summary.json").read_text()
    assert load(out1)["margins"]["lambda_derivative"] >= 0


def test_seed_override_changes_only_seeded_output(tmp_path):
    cfg = {"command": "check-operator", "operator": LAP, "trials": 20, "seed": 1}
    _, a = run(tmp_path, cfg)
    first = (a / "report.json").read_text()
    _, b = run(tmp_path, cfg)
    assert (b / "report.json").read_text() == first
    _, c = run(tmp_path, cfg, "--seed", "7")
    assert json.loads((c / "report.json").read_text())["conditions"]["A"]["passed"]


def test_command_override(tmp_path):
    cfg = {"command": "check-operator", "operator": LAP, "domain": DISK}
    code, out = run(tmp_path, cfg, "eigen-radial")
    assert code == 0 and "lambda_star" in load(out)


def test_schema_rejects_unknown_solver_key():
    with pytest.raises(ConfigError):
        validate_config({"command": "eigen-radial", "operator": LAP, "solver": {"steps": 3}})
    assert SCHEMA["additionalProperties"] is False
