import json
import subprocess
import sys

import pytest

from hornlab.cli import main


def run(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path)])


def load(tmp_path, name):
    return json.loads((tmp_path / name).read_text())


def test_build_preset(tmp_path, capsys):
    assert run(tmp_path, "build", "--preset", "positive-k") == 0
    doc = load(tmp_path, "profile.json")
    assert doc["verdict"] == "PASS"
    assert json.loads(capsys.readouterr().out)["verdict"] == "PASS"


def test_build_domain_error(tmp_path, capsys):
    assert run(tmp_path, "build", "--rho", "2", "--epsilon", "1") == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "DomainError"


def test_build_nonpositive_constants(tmp_path):
    assert run(tmp_path, "build", "--regime", "nonpositive-k", "--rho", "0.1",
               "--epsilon", "1", "--kappa", "0.005", "--zeta", "1e-7",
               "--mollifier-eps", "5e-5") == 0
    c = load(tmp_path, "profile.json")["constants"]
    assert c["a"] == pytest.approx(0.1) and c["xi"] == pytest.approx(0.05)


def test_certify_negative_control(tmp_path, capsys):
    assert run(tmp_path, "certify-curvature", "--epsilon", "0.5", "--eta", "0.1", "--K", "0") == 2
    out = json.loads(capsys.readouterr().out)
    assert out["verdict"] == "FAIL" and out["worst_direction"] == "rr"
    assert (tmp_path / "ricci.csv").exists()


def test_certify_preset_passes(tmp_path):
    assert run(tmp_path, "certify-curvature", "--preset", "positive-k") == 0
    assert load(tmp_path, "ricci.json")["n_points"] == 4000


@pytest.mark.parametrize("density, code", [("horn-weight", 0), ("linear", 0), ("square", 2)])
def test_check_density(tmp_path, density, code):
    assert run(tmp_path, "check-density", "--density", density) == code


def test_check_geodesics(tmp_path):
    assert run(tmp_path, "check-geodesics", "--n-pairs", "500", "--n-exact", "3") == 0
    doc = load(tmp_path, "geodesics.json")
    assert doc["all_avoid"] and doc["exact_below_bound"]


def test_solve_flat(tmp_path):
    assert run(tmp_path, "solve", "--metric", "flat", "--s", "1") == 0
    assert (tmp_path / "field.json").exists() and (tmp_path / "radial_k1.csv").exists()


def test_decay_flat_control(tmp_path, capsys):
    assert run(tmp_path, "decay", "--field", "flat-linear", "--n-radii", "30", "--svg") == 0
    out = json.loads(capsys.readouterr().out)
    assert out["verdict"] == "FiniteOrder(1)"
    assert (tmp_path / "decay.svg").exists() and (tmp_path / "vio.csv").exists()


def test_usage_errors(tmp_path, capsys):
    assert main(["no-such-command"]) == 1
    assert main(["build", "--epsilon", "abc"]) == 1
    errs = [json.loads(l) for l in capsys.readouterr().err.splitlines() if l.startswith("{")]
    assert len(errs) == 2 and all(e["error"] == "UsageError" for e in errs)


def test_bad_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(tmp_path, "build", "--config", str(bad)) == 1
    assert run(tmp_path, "build", "--eta", "1.5") == 1


def test_config_then_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"preset": "positive-k", "epsilon": 0.2, "eta": 0.4}))
    assert run(tmp_path, "build", "--config", str(cfg), "--epsilon", "0.15") == 0
    p = load(tmp_path, "profile.json")["params"]
    assert p["epsilon"] == 0.15 and p["eta"] == 0.4 and p["K"] == 0.01


def test_outputs_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["check-geodesics", "--n-pairs", "300", "--n-exact", "2", "--seed", "5",
                     "--out", str(d)]) == 0
        assert main(["build", "--preset", "nonpositive-k", "--out", str(d)]) == 0
    for name in ("probes.csv", "geodesics.json", "profile.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hornlab.cli", "build", "--rho", "2",
                           "--epsilon", "1", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "DomainError" in proc.stderr
