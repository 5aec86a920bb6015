import hashlib
import json

import jsonschema
import pytest

from strictweak.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, config_schema, main, resolve_config

FAST = {
    "simulate-polymer": ["--replicas", "50", "--n", "4"],
    "qtasep-converge": ["--replicas", "200", "--epsilons", "0.2,0.1", "--dump-replicas", "2"],
    "moments-crosscheck": ["--t", "2", "--kmax", "2"],
    "fredholm-laplace": ["--replicas", "500", "--u", "0.5", "--n", "1", "--kappa", "1"],
    "critical-point": [],
    "lln": ["--ns", "2,4", "--replicas", "50"],
    "tw-fluctuations": ["--ns", "4", "--replicas", "50"],
    "stationary-tests": ["--samples", "200", "--size", "50"],
}


def _digests(path):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(path.iterdir()) if p.name != "manifest.json"}


@pytest.mark.parametrize("experiment", sorted(FAST))
def test_every_subcommand_runs_and_manifest_validates(experiment, tmp_path):
    out = tmp_path / experiment
    assert main([experiment, "--out", str(out), "--seed", "3", *FAST[experiment]]) == EXIT_OK
    manifest = json.loads((out / "manifest.json").read_text())
    jsonschema.validate(manifest["inputs"], config_schema(experiment))
    assert manifest["version"].startswith("0.1.0")
    assert manifest["wall_time_s"] >= 0
    assert "philox" in manifest["rng_scheme"].lower()
    for name in manifest["outputs"]:
        assert (out / name).exists()


def test_critical_point_report(tmp_path):
    assert main(["critical-point", "--k", "1", "--kappa", "20", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "critical_point.json").read_text())
    assert rep["found"]
    assert {"t_bar", "f_bar", "g_bar", "residual"} <= set(rep)
    assert abs(rep["variational"] - rep["f_bar"]) < 1e-10


def test_moments_crosscheck_report(tmp_path):
    assert main(["moments-crosscheck", "--t", "4", "--k", "2", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "moments.json").read_text())
    assert rep["max_rel_err"] < 1e-7


def test_seed_determinism_across_threads(tmp_path):
    args = ["simulate-polymer", "--seed", "42", "--replicas", "5000", "--n", "5"]
    assert main([*args, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main([*args, "--out", str(tmp_path / "b")]) == EXIT_OK
    assert main([*args, "--threads", "2", "--out", str(tmp_path / "c")]) == EXIT_OK
    da, db, dc = (_digests(tmp_path / d) for d in "abc")
    assert da == db == dc
    assert main([*args[:2], "43", *args[3:], "--out", str(tmp_path / "d")]) == EXIT_OK
    assert _digests(tmp_path / "d") != da


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"k": 2.0, "kappa": 30, "seed": 7}))
    resolved = resolve_config(["critical-point", "--config", str(cfg), "--kappa", "40"])
    assert resolved["k"] == 2.0
    assert resolved["kappa"] == 40.0
    assert resolved["seed"] == 7
    assert resolved["theta"] == 1.0


@pytest.mark.parametrize(
    "argv",
    [
        ["critical-point", "--k", "-1"],
        ["critical-point", "--kappa", "0.5"],
        ["simulate-polymer", "--replicas", "0"],
        ["lln", "--ns", "a,b"],
        ["no-such-experiment"],
    ],
)
def test_usage_errors(argv, tmp_path):
    assert main([*argv, "--out", str(tmp_path)]) == EXIT_USAGE
    err = json.loads((tmp_path / "error.json").read_text())
    assert err["exit_code"] == EXIT_USAGE


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"k": 1.0, "unknown_key": 3}))
    assert main(["critical-point", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_USAGE
    cfg.write_text(json.dumps({"experiment": "lln"}))
    assert main(["critical-point", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_USAGE
    assert main(["critical-point", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_USAGE


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    from strictweak import cli
    from strictweak.moments import NumericalFailure

    def boom(cfg, out):
        raise NumericalFailure("contour did not converge")

    monkeypatch.setitem(cli.RUNNERS, "moments-crosscheck", boom)
    assert main(["moments-crosscheck", "--out", str(tmp_path)]) == EXIT_NUMERICAL
    assert json.loads((tmp_path / "error.json").read_text())["error"] == "numerical"


def test_help_exits_zero():
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
