"""Command-line entry point.

Subcommands:

* run -- execute a (filter x likelihood) experiment grid over MC seeds and
  write rmse.csv / card.csv / runtime.csv.
* oracle-calibrate -- run the likelihood-convention calibration battery
  against the enumeration oracle and print the report.

A flat "key = value" config file can seed any `run` option; command-line
flags override file values.  Exit status is 0 on success; failures print
one machine-readable line `drifttrack-error: <kind>: <message>` on stderr
and exit nonzero.
"""
from __future__ import annotations

import argparse
import sys

from .harness import RunConfig, emit_csv, run_experiment
from .scenario import experiment1, experiment2_birth, experiment2_death

_EXPERIMENTS = {
    "e1": experiment1,
    "e2-death": experiment2_death,
    "e2-birth": experiment2_birth,
}

_RUN_KEYS = {
    "experiment": str,
    "filter": str,
    "likelihood": str,
    "runs": int,
    "particles": int,
    "steps": int,
    "seed": int,
    "out": str,
    "n_max": int,
    "resample_fraction": float,
    "share_truth": lambda v: v.lower() in ("1", "true", "yes"),
}


def _read_config_file(path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in _RUN_KEYS:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _RUN_KEYS[key](value)
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drifttrack",
        description="Joint sensor-drift estimation and multi-object filtering benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment grid and emit CSV metrics")
    run.add_argument("--experiment", choices=sorted(_EXPERIMENTS), default=None)
    run.add_argument("--filter", choices=["phd", "sophd", "cphd", "all"], default=None)
    run.add_argument("--likelihood", choices=["l1", "l2", "both"], default=None)
    run.add_argument("--runs", type=int, default=None, help="Monte-Carlo runs")
    run.add_argument("--particles", type=int, default=None)
    run.add_argument("--steps", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None, help="output directory for the CSV files")
    run.add_argument("--n-max", type=int, default=None, dest="n_max",
                     help="cardinality support for the cardinalized filter")
    run.add_argument("--resample-fraction", type=float, default=None, dest="resample_fraction")
    run.add_argument("--config", default=None, help="flat key = value config file")

    cal = sub.add_parser(
        "oracle-calibrate",
        help="calibrate likelihood conventions against the enumeration oracle",
    )
    cal.add_argument("--instances", type=int, default=50)
    cal.add_argument("--seed", type=int, default=7)
    return parser


_RUN_DEFAULTS = {
    "experiment": "e1",
    "filter": "all",
    "likelihood": "both",
    "runs": 10,
    "particles": 100,
    "steps": 100,
    "seed": 1,
    "out": "out",
    "n_max": None,
    "resample_fraction": 0.5,
    "share_truth": True,
}


def _run_command(args) -> int:
    settings = dict(_RUN_DEFAULTS)
    if args.config:
        settings.update(_read_config_file(args.config))
    for key in ("experiment", "filter", "likelihood", "runs", "particles",
                "steps", "seed", "out", "n_max", "resample_fraction"):
        value = getattr(args, key if key != "filter" else "filter")
        if value is not None:
            settings[key] = value
    filters = ("phd", "sophd", "cphd") if settings["filter"] == "all" else (settings["filter"],)
    likelihoods = ("l1", "l2") if settings["likelihood"] == "both" else (settings["likelihood"],)
    scenario = _EXPERIMENTS[settings["experiment"]](steps=settings["steps"])
    cfg = RunConfig(
        scenario=scenario,
        filters=filters,
        likelihoods=likelihoods,
        mc_runs=settings["runs"],
        particles=settings["particles"],
        resample_fraction=settings["resample_fraction"],
        seed=settings["seed"],
        out_dir=settings["out"],
        n_max=settings["n_max"],
        share_truth=settings["share_truth"],
    )

    done = set()

    def progress(run, variant):
        key = (run, variant)
        if key not in done:
            done.add(key)
            print(f"run {run + 1}/{cfg.mc_runs} {variant} done", flush=True)

    table = run_experiment(cfg, progress=progress)
    paths = emit_csv(table, cfg.out_dir)
    for variant in table.variants:
        rt = table.runtimes[variant]
        print(
            f"{variant}: mean rmse {float(table.rmse[variant].mean()):.4f} m; "
            f"stage seconds/step prediction {rt['prediction']:.4g} "
            f"update {rt['update']:.4g} likelihood {rt['likelihood']:.4g}; "
            f"excluded runs {table.excluded[variant]}"
        )
    print("wrote", ", ".join(sorted(paths.values())))
    return 0


def _calibrate_command(args) -> int:
    from .oracle import calibrate_conventions

    report = calibrate_conventions(args.instances, args.seed)
    print(f"calibration battery: {report['instances']} instances, seed {report['seed']}")
    print("second-order likelihood conventions (max relative error vs oracle):")
    for name, err in report["second_order"].items():
        print(f"  {name:>14}: {err:.3e}")
    print("cardinalized likelihood conventions:")
    for name, err in report["cphd"].items():
        print(f"  {name:>14}: {err:.3e}")
    so = "/".join(report["adopted"]["second_order"])
    print(f"adopted: second_order={so} cphd={report['adopted']['cphd']}")
    tol = report["tolerance"]
    ok = (
        report["second_order"][so] < tol
        and report["cphd"][report["adopted"]["cphd"]] < tol
    )
    print(f"adopted conventions within tolerance {tol:g}: {'yes' if ok else 'NO'}")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _run_command(args)
        return _calibrate_command(args)
    except Exception as exc:  # surfaced as a single machine-readable line
        print(f"drifttrack-error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
