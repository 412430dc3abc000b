"""Batch front door: run, kernel, sweep, and mms subcommands.

Every invocation reads one YAML configuration, writes its outputs into a
fresh run directory (never overwriting an existing one), and finishes with
a manifest listing each produced file with its SHA-256 digest.  Exit codes:
0 success, 2 configuration error, 3 solver failure, 4 acceptance-threshold
failure.
"""

import argparse
import dataclasses
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, config as config_mod
from .errors import ConfigError, NumericsError, StepFailure
from .kernels import kernel_report
from .limitstudy import run_sweep, sweep_flags
from .mms import ManufacturedProblem, mms_report
from .solver import entropy_residual, run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_ACCEPTANCE = 4


def _fresh_run_dir(out_root, command):
    root = Path(out_root)
    root.mkdir(parents=True, exist_ok=True)
    n = 0
    while True:
        candidate = root / f"{command}-{n:03d}"
        if not candidate.exists():
            candidate.mkdir()
            return candidate
        n += 1


def _write_csv(path, header, array):
    np.savetxt(path, np.asarray(array), fmt="%.16e", delimiter=",", header=header, comments="")


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(run_dir, command, doc, outputs):
    inventory = []
    for name in outputs:
        path = run_dir / name
        inventory.append({"name": name, "sha256": _sha256(path), "bytes": path.stat().st_size})
    manifest = {
        "artifact_version": __version__,
        "command": command,
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "config_echo": doc,
        "outputs": inventory,
    }
    path = run_dir / "manifest.json"
    _write_json(path, manifest)
    for entry in inventory:  # digests must verify after write
        if _sha256(run_dir / entry["name"]) != entry["sha256"]:
            raise RuntimeError(f"manifest digest mismatch for {entry['name']}")
    return path


def _trajectory_table(sol, which):
    values = getattr(sol, which)
    nodes = sol.config.mesh.nodes
    t_col = np.repeat(sol.times, nodes.size)
    x_col = np.tile(nodes, sol.times.size)
    return np.column_stack([t_col, x_col, values.ravel()])


def _cmd_run(doc, run_dir):
    cfg = config_mod.build_problem(doc)
    sol = run(cfg)
    report = entropy_residual(cfg, sol)
    outputs = []
    for which in ("theta", "chi", "xi"):
        name = f"{which}.csv"
        _write_csv(run_dir / name, "t,x,value", _trajectory_table(sol, which))
        outputs.append(name)
    counts = sol.newton_iteration_counts
    _write_json(
        run_dir / "residual.json",
        {
            "entropy_residual": report.entropy_residual,
            "phase_residual": report.phase_residual,
            "energy_identity_gap": report.energy_identity_gap,
            "newton": {
                "total_phase_iterations": int(counts[:, 0].sum()),
                "total_temperature_iterations": int(counts[:, 1].sum()),
                "max_phase_iterations": int(counts[:, 0].max()),
                "max_temperature_iterations": int(counts[:, 1].max()),
            },
        },
    )
    outputs.append("residual.json")
    return outputs, EXIT_OK


def _cmd_kernel(doc, run_dir):
    spec = config_mod.build_kernel_spec(doc)
    report = kernel_report(
        spec["kernel"], spec["kappa0"], spec["kappa0_prime"], spec["T"], spec["n_grid"]
    )
    _write_json(run_dir / "kernel_report.json", dataclasses.asdict(report))
    return ["kernel_report.json"], EXIT_OK


def _cmd_sweep(doc, run_dir, parallelism):
    plan = config_mod.build_sweep_plan(doc, parallelism=parallelism)
    report = run_sweep(plan)
    rows = np.array(
        [
            [
                r.epsilon,
                r.l1_deviation,
                r.functional.sup_V_accum,
                r.functional.sup_H_chi,
                r.functional.l2_V_chi,
                r.functional.log_duality,
                r.functional.xi_duality,
                r.functional.total,
                r.ratio,
            ]
            for r in report.rows
        ]
    )
    _write_csv(
        run_dir / "sweep.csv",
        "epsilon,l1_deviation,sup_V_accum,sup_H_chi,l2_V_chi,log_duality,xi_duality,error_total,ratio",
        rows,
    )
    flags = sweep_flags(report)
    _write_json(
        run_dir / "summary.json",
        {"fitted_slope": report.fitted_slope, "ratio_max": report.ratio_max, "flags": flags},
    )
    return ["sweep.csv", "summary.json"], EXIT_OK if flags["passed"] else EXIT_ACCEPTANCE


def _cmd_mms(doc, run_dir):
    settings = config_mod.mms_settings(doc)
    problem = ManufacturedProblem(kernel=settings.pop("kernel"))
    report = mms_report(problem, **settings)
    _write_json(run_dir / "mms.json", report)
    return ["mms.json"], EXIT_OK if report["passed"] else EXIT_ACCEPTANCE


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="memphase",
        description="Entropy-balance phase-field runs with thermal memory kernels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("run", "integrate one configured problem and dump the trajectory"),
        ("kernel", "emit the kernel diagnostics report"),
        ("sweep", "run the kernel-concentration sweep and rate fit"),
        ("mms", "run the manufactured-solution refinement study"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="path to the YAML configuration")
        p.add_argument("--out", default="runs", help="root directory for run outputs")
        p.add_argument("--parallel", type=int, default=None, help="max concurrent solver runs")
    args = parser.parse_args(argv)

    try:
        doc = config_mod.load_document(args.config)
        run_dir = _fresh_run_dir(args.out, args.command)
        if args.command == "run":
            outputs, code = _cmd_run(doc, run_dir)
        elif args.command == "kernel":
            outputs, code = _cmd_kernel(doc, run_dir)
        elif args.command == "sweep":
            outputs, code = _cmd_sweep(doc, run_dir, args.parallel)
        else:
            outputs, code = _cmd_mms(doc, run_dir)
        _write_manifest(run_dir, args.command, doc, outputs)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepFailure, NumericsError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(f"{args.command}: outputs in {run_dir}")
    return code


if __name__ == "__main__":
    sys.exit(main())
