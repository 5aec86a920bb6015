"""Command-line entry point: one subcommand per experiment.

Settings are merged as defaults < ``--config`` JSON < explicit flags, checked
against a JSON schema, and every run writes ``manifest.json`` next to its
CSV/JSON outputs.  Exit status is 0 on success, 2 for invalid input and 3 for
numerical failure; failures also leave ``error.json`` in the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import subprocess
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .asymptotics import (
    critical_data,
    lln_experiment,
    tw_experiment,
    variational_free_energy,
    stationary_lln,
)
from .fredholm import laplace_transform, tracy_widom_table
from .moments import NumericalFailure, moment_contour, moment_recursion, weakly_decreasing_indices
from .polymer import FREE_ENERGY_CSV_HEADER, sample_free_energy
from .qtasep import TRAJECTORY_CSV_HEADER, ScalingParams, convergence_experiment, simulate_positions
from .specfun import DomainError, GammaParams
from .stationary import (
    StationaryConfig,
    beta_gamma_fixed_point_test,
    lln_tolerance,
    shift_invariance_test,
    stationary_free_energy,
)
from .streams import SCHEME, block_generator

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3

_POS = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_NONNEG_INT = {"type": "integer", "minimum": 0}

# name -> (schema, default, help)
_COMMON = {
    "seed": ({"type": "integer", "minimum": 0, "maximum": 2**64 - 1}, 0, "master seed"),
    "out": ({"type": "string", "minLength": 1}, "out", "output directory"),
    "threads": (_POS_INT, 1, "worker threads for replica blocks"),
}

EXPERIMENTS = {
    "simulate-polymer": {
        "k": (_POS, 1.0, "gamma shape"),
        "theta": (_POS, 1.0, "gamma scale"),
        "kappa": (_POS_INT, 3, "aspect ratio t/n"),
        "n": (_POS_INT, 10, "level n of log Z(kappa n, n)"),
        "replicas": (_POS_INT, 1000, "number of samples"),
    },
    "qtasep-converge": {
        "k": (_POS, 1.0, "gamma shape m1/theta"),
        "theta": (_POS, 1.0, "gamma scale"),
        "epsilons": ({"type": "array", "items": _POS, "minItems": 1}, [0.1, 0.05, 0.02], "scaling parameters"),
        "replicas": (_POS_INT, 10000, "samples per law"),
        "dump_replicas": (_NONNEG_INT, 5, "trajectories written to CSV"),
    },
    "moments-crosscheck": {
        "t": ({"type": "integer", "minimum": 0, "maximum": 12}, 4, "time"),
        "k": (_POS, 1.0, "gamma shape"),
        "theta": (_POS, 1.0, "gamma scale"),
        "kmax": ({"type": "integer", "minimum": 1, "maximum": 4}, 3, "largest number of levels"),
    },
    "fredholm-laplace": {
        "n": (_POS_INT, 2, "level n"),
        "kappa": (_POS_INT, 2, "aspect ratio"),
        "k": (_POS, 1.0, "gamma shape"),
        "theta": (_POS, 1.0, "gamma scale"),
        "u": ({"type": "array", "items": _POS, "minItems": 1}, [0.2, 0.5, 1.0], "Laplace arguments"),
        "replicas": (_NONNEG_INT, 100000, "Monte Carlo replicas (0 skips)"),
        "nodes": ({"type": "integer", "minimum": 16, "maximum": 512}, 64, "circle nodes"),
        "tw_table": ({"type": "boolean"}, False, "also write the F_GUE table"),
    },
    "critical-point": {
        "k": (_POS, 1.0, "gamma shape"),
        "theta": (_POS, 1.0, "gamma scale"),
        "kappa": ({"type": "number", "minimum": 1}, 20.0, "aspect ratio"),
    },
    "lln": {
        "k": (_POS, 1.0, "gamma shape"),
        "theta": (_POS, 1.0, "gamma scale"),
        "kappa": (_POS_INT, 20, "aspect ratio"),
        "ns": ({"type": "array", "items": _POS_INT, "minItems": 1}, [25, 50, 100], "levels"),
        "replicas": (_POS_INT, 2000, "samples per level"),
    },
    "tw-fluctuations": {
        "k": (_POS, 1.0, "gamma shape"),
        "theta": (_POS, 1.0, "gamma scale"),
        "kappa": (_POS_INT, 20, "aspect ratio"),
        "ns": ({"type": "array", "items": _POS_INT, "minItems": 1}, [50, 100], "levels"),
        "replicas": (_POS_INT, 2000, "samples per level"),
    },
    "stationary-tests": {
        "beta": (_POS, 1.5, "boundary parameter"),
        "k": (_POS, 1.0, "gamma shape"),
        "theta": (_POS, 1.0, "gamma scale"),
        "samples": ({"type": "integer", "minimum": 10}, 100000, "field samples"),
        "size": ({"type": "integer", "minimum": 2}, 2000, "N for the N x N free energy"),
    },
}


class UsageError(ValueError):
    pass


def config_schema(experiment: str) -> dict:
    props = {name: spec[0] for name, spec in {**_COMMON, **EXPERIMENTS[experiment]}.items()}
    props["experiment"] = {"const": experiment}
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "properties": props,
        "required": sorted(props),
        "additionalProperties": False,
    }


def _version() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _parse_list(kind):
    def parse(text):
        try:
            return [kind(x) for x in text.split(",") if x.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc

    return parse


def _flag_type(schema):
    t = schema.get("type")
    if t == "array":
        return _parse_list(int if schema["items"].get("type") == "integer" else float)
    if t == "boolean":
        return lambda s: s.lower() in ("1", "true", "yes")
    return {"integer": int, "number": float, "string": str}[t]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strictweak", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name, fields in EXPERIMENTS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        for key, (schema, default, text) in {**_COMMON, **fields}.items():
            p.add_argument(
                "--" + key.replace("_", "-"),
                dest=key,
                type=_flag_type(schema),
                default=argparse.SUPPRESS,
                help=f"{text} (default {default})",
            )
    return parser


def resolve_config(argv) -> dict:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            raise
        raise UsageError("invalid command line") from exc
    experiment = ns.experiment
    fields = {**_COMMON, **EXPERIMENTS[experiment]}
    cfg = {key: spec[1] for key, spec in fields.items()}
    if ns.config:
        try:
            loaded = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config must be a JSON object")
        if loaded.get("experiment", experiment) != experiment:
            raise UsageError("config experiment does not match subcommand")
        cfg.update({k: v for k, v in loaded.items() if k != "experiment"})
    cfg.update({k: v for k, v in vars(ns).items() if k in fields})
    cfg["experiment"] = experiment
    try:
        jsonschema.validate(cfg, config_schema(experiment))
    except jsonschema.ValidationError as exc:
        raise UsageError(f"config validation failed: {exc.message}") from exc
    return cfg


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"cannot serialise {type(x)}")


def _gamma(cfg) -> GammaParams:
    return GammaParams(cfg["k"], cfg["theta"])


def run_simulate_polymer(cfg, out: Path) -> list[str]:
    params = _gamma(cfg)
    logz = sample_free_energy(params, cfg["kappa"], cfg["n"], cfg["replicas"], cfg["seed"], cfg["threads"])
    rows = ((i, cfg["n"], cfg["kappa"], params.shape, params.scale, v) for i, v in enumerate(logz))
    _write_csv(out / "free_energy.csv", FREE_ENERGY_CSV_HEADER, rows)
    _write_json(out / "summary.json", {
        "mean_log_z": float(logz.mean()),
        "stderr_log_z": float(logz.std(ddof=1) / math.sqrt(logz.size)) if logz.size > 1 else 0.0,
        "mean_over_n": float(logz.mean() / cfg["n"]),
    })
    return ["free_energy.csv", "summary.json"]


def run_qtasep_converge(cfg, out: Path) -> list[str]:
    m1 = cfg["k"] * cfg["theta"]
    table = convergence_experiment(cfg["theta"], m1, tuple(cfg["epsilons"]), replicas=cfg["replicas"],
                                   seed=cfg["seed"], threads=cfg["threads"])
    report = {
        "epsilons": cfg["epsilons"],
        "ks": {f"{t},{n}": v for (t, n), v in table.items()},
        "decreasing": {f"{t},{n}": bool(np.all(np.diff(v) < 0)) for (t, n), v in table.items()},
    }
    _write_json(out / "qtasep_convergence.json", report)
    rows = []
    if cfg["dump_replicas"]:
        sp = ScalingParams(min(cfg["epsilons"]), cfg["theta"], m1)
        hist = simulate_positions(sp.qparams, 3, 2, cfg["dump_replicas"], cfg["seed"], tag=9)
        for r in range(hist.shape[0]):
            for t in range(hist.shape[1]):
                for n in range(hist.shape[2]):
                    rows.append((r, t, n + 1, int(hist[r, t, n])))
    _write_csv(out / "trajectories.csv", TRAJECTORY_CSV_HEADER, rows)
    return ["qtasep_convergence.json", "trajectories.csv"]


def run_moments_crosscheck(cfg, out: Path) -> list[str]:
    params = _gamma(cfg)
    t = cfg["t"]
    table = []
    for k in range(1, cfg["kmax"] + 1):
        for nvec in weakly_decreasing_indices(k, t + 1):
            rec = moment_recursion(params, t, nvec)
            con = moment_contour(params, t, nvec)
            table.append({"t": t, "nvec": list(nvec), "u_recursion": rec, "u_contour": con,
                          "rel_err": abs(con - rec) / abs(rec)})
    _write_json(out / "moments.json", {"table": table, "max_rel_err": max(r["rel_err"] for r in table)})
    return ["moments.json"]


def run_fredholm_laplace(cfg, out: Path) -> list[str]:
    params = _gamma(cfg)
    n, kappa = cfg["n"], cfg["kappa"]
    dets = [laplace_transform(u, n, kappa, params, nodes=cfg["nodes"]) for u in cfg["u"]]
    rows = []
    if cfg["replicas"]:
        z = np.exp(sample_free_energy(params, kappa, n, cfg["replicas"], cfg["seed"], cfg["threads"]))
        for u, d in zip(cfg["u"], dets):
            x = np.exp(-u * z)
            rows.append((u, d, x.mean(), x.std(ddof=1) / math.sqrt(x.size)))
    else:
        rows = [(u, d, float("nan"), float("nan")) for u, d in zip(cfg["u"], dets)]
    _write_csv(out / "laplace.csv", ("u", "det", "mc_estimate", "mc_stderr"), rows)
    files = ["laplace.csv"]
    if cfg["tw_table"]:
        grid, values = tracy_widom_table()
        _write_csv(out / "tw_table.csv", ("r", "F"), zip(grid, values))
        files.append("tw_table.csv")
    return files


def run_critical_point(cfg, out: Path) -> list[str]:
    params = _gamma(cfg)
    crit = critical_data(params, cfg["kappa"])
    var = variational_free_energy(params.shape, params.scale, cfg["kappa"])
    report = {"found": crit is not None, "variational": var.value, "variational_boundary": var.boundary}
    if crit is not None:
        report.update(t_bar=crit.t_bar, f_bar=crit.f_bar, g_bar=crit.g_bar, residual=crit.residual,
                      multiple_roots=crit.multiple_roots)
    _write_json(out / "critical_point.json", report)
    return ["critical_point.json"]


def run_lln(cfg, out: Path) -> list[str]:
    params = _gamma(cfg)
    rows = lln_experiment(params, cfg["kappa"], cfg["ns"], cfg["replicas"], cfg["seed"], cfg["threads"])
    crit = critical_data(params, cfg["kappa"])
    _write_json(out / "lln.json", {
        "f_bar": crit.f_bar,
        "rows": [vars(r) for r in rows],
        "decreasing": bool(np.all(np.diff([r.deviation for r in rows]) < 0)),
    })
    return ["lln.json"]


def run_tw(cfg, out: Path) -> list[str]:
    params = _gamma(cfg)
    crit = critical_data(params, cfg["kappa"])
    if crit is None:
        raise UsageError("no critical point for these parameters; increase kappa")
    results, csv_rows = [], []
    for n in cfg["ns"]:
        res = tw_experiment(params, cfg["kappa"], n, cfg["replicas"], cfg["seed"], cfg["threads"])
        results.append({"n": n, "ks": res.ks, "mean_rescaled": res.mean_rescaled,
                        "stderr_rescaled": res.stderr_rescaled, "tw_mean_scaled": res.tw_mean_scaled,
                        "quantiles": res.quantiles})
        csv_rows.extend((n, i, v) for i, v in enumerate(res.rescaled))
    _write_json(out / "tw.json", {"t_bar": crit.t_bar, "f_bar": crit.f_bar, "g_bar": crit.g_bar,
                                  "results": results})
    _write_csv(out / "tw_samples.csv", ("n", "replica", "chi"), csv_rows)
    return ["tw.json", "tw_samples.csv"]


def run_stationary(cfg, out: Path) -> list[str]:
    config = StationaryConfig(cfg["beta"], _gamma(cfg))
    shift = shift_invariance_test(config, (8, 6), [(0, 0), (3, 2), (5, 1), (6, 3)], cfg["samples"],
                                  block_generator(cfg["seed"], 10, 0))
    fixed = beta_gamma_fixed_point_test(config, cfg["samples"], block_generator(cfg["seed"], 11, 0))
    fe = stationary_free_energy(config, cfg["size"], block_generator(cfg["seed"], 12, 0))
    target = stationary_lln(config.gamma_params, cfg["beta"], 1, 1)
    _write_json(out / "stationary.json", {
        "shift_rows": [vars(r) for r in shift["rows"]],
        "shift_bonferroni_p": shift["bonferroni_p"],
        "shift_all_pass": shift["all_pass"],
        "joint": shift["joint"],
        "beta_gamma": fixed,
        "lln": {"value": fe["recursion"], "via_ratios": fe["ratios"], "target": target,
                "tolerance": lln_tolerance(config, cfg["size"])},
    })
    return ["stationary.json"]


RUNNERS = {
    "simulate-polymer": run_simulate_polymer,
    "qtasep-converge": run_qtasep_converge,
    "moments-crosscheck": run_moments_crosscheck,
    "fredholm-laplace": run_fredholm_laplace,
    "critical-point": run_critical_point,
    "lln": run_lln,
    "tw-fluctuations": run_tw,
    "stationary-tests": run_stationary,
}


def _error_out(argv) -> Path:
    for i, a in enumerate(argv):
        if a == "--out" and i + 1 < len(argv):
            return Path(argv[i + 1])
        if a.startswith("--out="):
            return Path(a.split("=", 1)[1])
    return Path(_COMMON["out"][1])


def _fail(out: Path, code: int, kind: str, exc: Exception) -> int:
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "error.json", {"error": kind, "message": str(exc), "exit_code": code})
    print(f"error ({kind}): {exc}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = resolve_config(argv)
    except UsageError as exc:
        return _fail(_error_out(argv), EXIT_USAGE, "validation", exc)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        files = RUNNERS[cfg["experiment"]](cfg, out)
    except (UsageError, DomainError, ValueError) as exc:
        return _fail(out, EXIT_USAGE, "validation", exc)
    except (NumericalFailure, ArithmeticError, FloatingPointError) as exc:
        return _fail(out, EXIT_NUMERICAL, "numerical", exc)
    _write_json(out / "manifest.json", {
        "experiment": cfg["experiment"],
        "inputs": cfg,
        "version": _version(),
        "wall_time_s": time.perf_counter() - start,
        "rng_scheme": SCHEME,
        "outputs": files,
    })
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
