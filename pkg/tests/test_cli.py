import json
import subprocess
import sys

import pytest

from minreg.cli import RunConfig, main

WIDE_PAIR = {"problem": "p1", "x1_star": [-4, 0], "x2_star": [4, 0],
        "sigma1": 1, "sigma2": 1, "grad_bound": 10}
CIRCLE = {"problem": "p2", "x1_star": [-1, 0], "x2_star": [1, 0], "sigma1": 1, "sigma2": 1,
          "grad_bound": 10, "body": {"type": "ball", "center": [0, 1], "radius": 5}}


@pytest.fixture
def write_config(tmp_path):
    def write(data, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data))
        return str(path)
    return write


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_member_inside(capsys, write_config):
    code, out, _ = run(capsys, "member", "--config", write_config(WIDE_PAIR), "--point", "0,0")
    assert code == 0
    assert json.loads(out)["in_M_hat"] is True


def test_member_outside(capsys, write_config):
    code, out, _ = run(capsys, "member", "--config", write_config(WIDE_PAIR), "--point", "0,30")
    assert code == 1
    assert json.loads(out)["in_H"] is False


@pytest.mark.parametrize("point", ["0,,1", "1", "a,b", "0,nan"])
def test_member_malformed_point(capsys, write_config, point):
    code, out, err = run(capsys, "member", "--config", write_config(WIDE_PAIR), "--point", point)
    assert code == 2 and out == "" and "error" in err


def test_member_constrained(capsys, write_config):
    cfg = write_config(CIRCLE)
    code, out, _ = run(capsys, "member", "--config", cfg, "--point", "0,0.5")
    assert code == 0 and json.loads(out)["in_N_hat"] is True
    code, out, _ = run(capsys, "member", "--config", cfg, "--point", "0,7")
    assert code == 1 and json.loads(out)["in_C"] is False


@pytest.mark.parametrize("change", [
    {"problem": "p3"},
    {"body": {"type": "ball", "center": [0, 0], "radius": 9}},
    {"sigma1": -1},
    {"grad_bound": "ten"},
    {"extra": 1},
    {"resolution": 1},
    {"outputs": ["a.png"]},
])
def test_bad_configs(capsys, write_config, change):
    code, _, err = run(capsys, "member", "--config", write_config({**WIDE_PAIR, **change}),
                       "--point", "0,0")
    assert code == 2 and "error" in err


def test_p2_needs_body(capsys, write_config):
    data = {k: v for k, v in CIRCLE.items() if k != "body"}
    code, _, _ = run(capsys, "member", "--config", write_config(data), "--point", "0,0")
    assert code == 2


def test_missing_or_broken_config(capsys, tmp_path):
    assert run(capsys, "member", "--config", str(tmp_path / "none.json"), "--point", "0,0")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "member", "--config", str(bad), "--point", "0,0")[0] == 2


def test_config_round_trip():
    data = {**CIRCLE, "outputs": ["a.csv", {"path": "b.svg"}], "seed": 3}
    canon = RunConfig.from_dict(data).to_dict()
    assert RunConfig.from_dict(canon).to_dict() == canon
    assert canon["outputs"] == [{"format": "csv", "path": "a.csv"},
                                {"format": "svg", "path": "b.svg"}]
    assert canon["sigma1"] == 1.0 and canon["resolution"] == 512


def test_trace_unconstrained(capsys, write_config, tmp_path):
    cfg = write_config(WIDE_PAIR, "wide.json")
    code, out, _ = run(capsys, "trace", "--config", cfg, "--out-dir", str(tmp_path / "o"))
    assert code == 0
    summary = json.loads(out)
    assert summary["max_residual"] < 1e-8 and summary["verdict"] == "applicable"
    names = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert names == ["wide_m_hat.csv", "wide_m_hat.svg"]


def test_trace_constrained_writes_both(capsys, write_config, tmp_path):
    cfg = write_config(CIRCLE, "circle.json")
    code, out, _ = run(capsys, "trace", "--config", cfg, "--out-dir", str(tmp_path),
                       "--resolution", "256", "--format", "json")
    assert code == 0
    summary = json.loads(out)
    assert summary["all_vertices_in_M_hat"] is True
    inner = json.loads((tmp_path / "circle_n_hat.json").read_text())
    outer = json.loads((tmp_path / "circle_m_hat.json").read_text())
    assert max(abs(v[1]) for v in inner["vertices"]) < max(abs(v[1]) for v in outer["vertices"])


def test_trace_uses_config_outputs(capsys, write_config, tmp_path):
    target = tmp_path / "curve.csv"
    cfg = write_config({**WIDE_PAIR, "outputs": [str(target)], "resolution": 128})
    assert run(capsys, "trace", "--config", cfg)[0] == 0
    assert target.read_text().startswith("z1,u,residual\n")


def test_trace_refused_for_large_separation(capsys, write_config):
    data = {**WIDE_PAIR, "x1_star": [-6, 0], "x2_star": [6, 0]}
    code, out, err = run(capsys, "trace", "--config", write_config(data))
    assert code == 3
    assert json.loads(out)["error"] == "SeparationTooLarge"
    assert "membership-only" in err


def test_trace_constrained_refusal_prints_report(capsys, write_config, tmp_path):
    data = {**CIRCLE, "body": {"type": "ball", "center": [0, 0], "radius": 2}}
    code, out, _ = run(capsys, "trace", "--config", write_config(data), "--resolution", "64",
                       "--out-dir", str(tmp_path))
    assert code == 3
    assert json.loads(out)["report"]["verdict"] == "not_applicable"


def test_verify_clean_run(capsys, write_config):
    code, out, _ = run(capsys, "verify", "--config", write_config(WIDE_PAIR), "--samples", "2000")
    stats = json.loads(out)
    assert code == 0 and stats["violations"] == [] and stats["valid"] == stats["contained"]


def test_verify_fault_injection(capsys, write_config):
    code, out, err = run(capsys, "verify", "--config", write_config(WIDE_PAIR), "--samples", "500",
                         "--slack-tol", "-10")
    assert code == 4 and json.loads(out)["violations"]
    assert "violations" in err


def test_verify_deterministic(capsys, write_config, monkeypatch, tmp_path):
    cfg = write_config(WIDE_PAIR)
    outputs = []
    for threads in ("1", "8", "8"):
        monkeypatch.setenv("MINREG_THREADS", threads)
        target = tmp_path / f"stats{len(outputs)}.json"
        code, out, _ = run(capsys, "verify", "--config", cfg, "--samples", "3000", "--seed", "9",
                           "--threads", "8", "--out", str(target))
        assert code == 0
        outputs.append(target.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]


def test_verify_constrained(capsys, write_config):
    code, out, _ = run(capsys, "verify", "--config", write_config(CIRCLE), "--samples", "500")
    stats = json.loads(out)
    assert code == 0 and stats["contained_p1"] == stats["valid"] == 500


def test_report(capsys, write_config):
    code, out, _ = run(capsys, "report", "--config", write_config(WIDE_PAIR), "--samples", "3000",
                       "--resolution", "128")
    rep = json.loads(out)
    assert code == 0 and 0 < rep["ratio"] <= 1


def test_argparse_errors_exit_2(capsys):
    assert main(["member"]) == 2
    assert main(["frobnicate"]) == 2


def test_module_entry_point(write_config):
    proc = subprocess.run([sys.executable, "-m", "minreg", "member", "--config",
                           write_config(WIDE_PAIR), "--point", "0,0"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["in_M_hat"] is True
