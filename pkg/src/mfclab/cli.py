"""Command line entry point.

`mfclab run <config> [--outdir DIR] [--dump-paths]` executes the configured
experiment and writes report.csv and summary.txt into the output directory.
Exit code 0 means every checked row passed its tolerance, 2 means at least
one tolerance failed, 1 means the run itself could not be completed
(configuration, validation, or simulation error).

Outputs contain no timestamps or absolute paths and all floats are written
with repr, so reruns of the same configuration are byte-identical (also
across MFCLAB_WORKERS settings; path chunking is fixed).
"""

import argparse
import csv
import os
import sys

from .config import ConfigError, RunConfig, parse_config
from .dynamics import SimulationError, simulate_particles
from .experiments import (ExperimentReport, exp_convergence_sweep, exp_diagnose,
                          exp_feedback_vs_bruteforce, exp_lifting_identity,
                          exp_oracle_compare, exp_regularity_probe, _state_feedback)
from .measures import sample_atoms
from .models import ValidationError, build_model, smooth_law
from .spaces import AssemblyError

CSV_COLUMNS = ("experiment", "case", "metric", "value", "std_error", "reference",
               "tolerance", "status")

# option-key -> keyword-name differences between config schema and harness
_KW_RENAME = {"convex_kappa": "kappa"}


def _fmt(x) -> str:
    return repr(float(x))


def _dispatch(run: RunConfig, model) -> ExperimentReport:
    kwargs = {_KW_RENAME.get(k, k): v for k, v in run.options.items()}
    table = {
        "lift-check": exp_lifting_identity,
        "converge": exp_convergence_sweep,
        "feedback-opt": exp_feedback_vs_bruteforce,
        "regularity": exp_regularity_probe,
        "diagnose": exp_diagnose,
        "oracle-compare": exp_oracle_compare,
    }
    fn = table[run.experiment]
    if run.experiment == "diagnose":
        return fn(model, **kwargs)
    return fn(model, run.sim, **kwargs)


def _write_report(outdir: str, run: RunConfig, report: ExperimentReport) -> None:
    with open(os.path.join(outdir, "report.csv"), "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerow(("meta", "config", "sha256", run.fingerprint, "", "", "", "info"))
        writer.writerow(("meta", "config", "seed", str(run.sim.seed), "", "", "", "info"))
        for r in report.rows:
            writer.writerow((report.kind, r.case, r.metric, _fmt(r.value),
                             _fmt(r.std_error), _fmt(r.reference), _fmt(r.tolerance),
                             r.status))


def _write_summary(outdir: str, run: RunConfig, report: ExperimentReport) -> None:
    counts = {"pass": 0, "fail": 0, "info": 0}
    for r in report.rows:
        counts[r.status] += 1
    lines = [
        f"experiment: {report.kind}",
        f"model: {run.model_kind}",
        f"config sha256: {run.fingerprint}",
        f"seed: {run.sim.seed}",
        f"rows: {len(report.rows)} (pass {counts['pass']}, fail {counts['fail']}, "
        f"info {counts['info']})",
        "",
    ]
    for r in report.rows:
        lines.append(f"[{r.status.upper():<4}] {r.case} :: {r.metric} = {_fmt(r.value)}"
                     f" (se={_fmt(r.std_error)}, ref={_fmt(r.reference)},"
                     f" tol={_fmt(r.tolerance)})")
    lines.append("")
    lines.append(f"RESULT: {'PASS' if report.passed else 'FAIL'}")
    with open(os.path.join(outdir, "summary.txt"), "w", newline="", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def _write_paths(outdir: str, run: RunConfig, model) -> None:
    """Small recorded bundle for inspection; kept deliberately tiny."""
    from dataclasses import replace
    cfg = replace(run.sim, paths=min(run.sim.paths, 4))
    atoms = sample_atoms(model.space, smooth_law(model), 4, cfg.seed)
    bundle = simulate_particles(model.system, _state_feedback(model.kind), atoms, cfg)
    with open(os.path.join(outdir, "paths.csv"), "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("path", "step", "particle", "coordinate", "value"))
        traj = bundle.trajectories
        for p in range(traj.shape[0]):
            for k in range(traj.shape[1]):
                for i in range(traj.shape[2]):
                    for c in range(traj.shape[3]):
                        writer.writerow((p, k, i, c, _fmt(traj[p, k, i, c])))


def _run(args) -> int:
    try:
        run = parse_config(args.config)
        if args.outdir is not None:
            run = RunConfig(model_kind=run.model_kind, model_params=run.model_params,
                            sim=run.sim, experiment=run.experiment, options=run.options,
                            outdir=args.outdir, dump_paths=run.dump_paths,
                            fingerprint=run.fingerprint)
        model = build_model(run.model_kind, run.model_params)
        report = _dispatch(run, model)
        os.makedirs(run.outdir, exist_ok=True)
        _write_report(run.outdir, run, report)
        _write_summary(run.outdir, run, report)
        if run.dump_paths or args.dump_paths:
            _write_paths(run.outdir, run, model)
    except (ConfigError, ValidationError, AssemblyError, SimulationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0 if report.passed else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mfclab",
                                     description="mean-field particle laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    run_parser = sub.add_parser("run", help="run the experiment described by a config file")
    run_parser.add_argument("config", help="path to a sectioned key=value config file")
    run_parser.add_argument("--outdir", default=None,
                            help="override the [output] outdir setting")
    run_parser.add_argument("--dump-paths", action="store_true",
                            help="also write a small recorded trajectory table")
    args = parser.parse_args(argv)
    if args.command == "run":
        return _run(args)
    parser.error(f"unknown command {args.command!r}")  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
