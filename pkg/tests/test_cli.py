import csv
import json
import os
import subprocess
import sys

import pytest

from conflab.cli import main, suite_configs
from conflab.experiments import ConfigError, strip_volatile, validate_config

SCAN = {"version": 1, "seed": 3, "experiment": "cat0-scan", "space": {"kind": "flat-disc", "spacing": 0.08},
        "scan": {"triangles": 50}}


def lab(*args, env=None, cwd=None):
    full = dict(os.environ, **(env or {}))
    return subprocess.run([sys.executable, "-m", "conflab.cli", *args], capture_output=True, text=True,
                          env=full, cwd=cwd, timeout=600)


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def test_run_pass_writes_report_and_csv(tmp_path):
    r = lab("run", write(tmp_path, SCAN), "--out", str(tmp_path / "out"))
    assert r.returncode == 0, r.stderr
    report = json.loads((tmp_path / "out" / "cat0-scan.json").read_text())
    assert report["verdict"] == "PASS" and report["schema_version"] == 1
    rows = list(csv.reader((tmp_path / "out" / "cat0-scan.csv").open()))
    assert rows[0] == ["v0", "v1", "v2", "t1", "t2", "actual", "comparison", "slack"]
    assert len(rows) == 51


def test_cone_pi_scan_exits_one():
    r = lab("cat0-scan", "--seed", "0", "--space", '{"kind": "cone", "total_angle": 3.141592653589793, '
                                              '"spacing": 0.04}', "--triangles", "400")
    assert r.returncode == 1
    assert json.loads(r.stdout)["verdict"] == "FAIL"


@pytest.mark.parametrize("mutate, field", [
    (lambda c: c.pop("seed"), "seed"),
    (lambda c: c.update(version=2), "version"),
    (lambda c: c.update(experiment="dance"), "experiment"),
    (lambda c: c["scan"].update(triangles=-1), "triangles"),
])
def test_schema_errors_exit_two(tmp_path, mutate, field):
    cfg = json.loads(json.dumps(SCAN))
    mutate(cfg)
    r = lab("run", write(tmp_path, cfg))
    assert r.returncode == 2
    assert field in r.stderr
    with pytest.raises(ConfigError, match=field):
        validate_config(cfg)


def test_verb_requires_seed():
    with pytest.raises(SystemExit) as err:
        main(["cat0-scan", "--space", '{"kind": "flat-disc"}'])
    assert err.value.code == 2


def test_unknown_suite_exits_two(capsys):
    assert main(["suite", "everything"]) == 2
    assert "unknown suite" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        suite_configs("nope")


def test_bundled_suites_validate():
    for name in ("oracle", "theorem", "negative-controls"):
        for cfg in suite_configs(name):
            validate_config(cfg)
    assert len(suite_configs("all")) == sum(len(suite_configs(n)) for n in ("oracle", "theorem", "negative-controls"))


def test_execution_error_exits_two(tmp_path):
    cfg = dict(SCAN, space={"kind": "hyperbolic-disc", "radius": 1.5, "spacing": 0.1})
    r = lab("run", write(tmp_path, cfg))
    assert r.returncode == 2 and "radius" in r.stderr


def test_reproducible_across_thread_counts(tmp_path):
    cfg = write(tmp_path, dict(SCAN, experiment="dirichlet", target={"kind": "hyperbolic-plane"},
                               boundary={"kind": "affine", "matrix": [[0.5, 0], [0, 0.5]]}))
    out = str(tmp_path / "o")
    reports = []
    for threads in ("1", "2"):
        r = lab("run", cfg, "--out", out, env={"CONFLAB_THREADS": threads})
        assert r.returncode == 0, r.stderr
        reports.append(json.loads(r.stdout))
    assert strip_volatile(reports[0]) == strip_volatile(reports[1])
    assert "timestamp" in reports[0] and "timestamp" not in strip_volatile(reports[0])


def test_deform_verb_writes_space(tmp_path):
    path = tmp_path / "y.json"
    r = lab("deform", "--seed", "0", "--space", '{"kind": "flat-disc", "spacing": 0.1}',
            "--field", '{"kind": "norm-squared"}', "--space-out", str(path))
    assert r.returncode == 0, r.stderr
    from conflab.metric import load_space
    assert load_space(path).n > 0


def test_pipeline_verb_refuses_concave():
    r = lab("pipeline", "--seed", "0", "--space", '{"kind": "flat-disc", "spacing": 0.08}',
            "--field", '{"kind": "norm-squared", "scale": -1}', "--curve", '{"kind": "circle", "radius": 0.8}',
            "--triangles", "100")
    assert r.returncode == 1
    assert json.loads(r.stdout)["verdict"] == "REFUSED"


def test_json_file_arguments(tmp_path):
    space = tmp_path / "space.json"
    space.write_text('{"kind": "flat-disc", "spacing": 0.1}')
    assert main(["cat0-scan", "--seed", "1", "--space", f"@{space}", "--triangles", "20"]) == 0


def test_console_script_is_installed():
    r = subprocess.run(["lab", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "suite" in r.stdout
