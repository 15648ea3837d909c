"""Command-line entry point.

Subcommands cover the stages of an experiment: `sample` writes lifted
runs, `pep` prints worst-case bounds, `dro` sweeps the robust bound over
the radius grid, `crossval` selects a radius by coverage, `fit` reads a
results table and fits decay envelopes, and `run` does the whole thing.
All of them read the same JSON config (keys are the ExperimentConfig
fields; see the README).
"""

import argparse
import dataclasses
import json
import logging
import os
import sys

from .conic import SolverFailure
from .instances import hash64
from .lifting import save_samples
from .pipeline import (
    _SEED_CROSSVAL,
    ExperimentConfig,
    crossvalidate_epsilon,
    epsilon_sweep,
    fit_report_series,
    prepare_workspace,
    read_results_csv,
    run_experiment,
    write_sweep_csv,
)

log = logging.getLogger(__name__)


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment JSON file")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config master seed")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent solves")
    common.add_argument("--form", choices=("expectation", "cvar"),
                        default="expectation", help="risk functional")
    common.add_argument("--alpha", type=float, default=None,
                        help="tail fraction for the cvar form")

    p = argparse.ArgumentParser(
        prog="pepdist",
        description="data-driven convergence bounds for first-order methods")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sample", parents=[common],
                   help="write lifted training runs as JSONL, one file per K")
    sub.add_parser("pep", parents=[common],
                   help="print the worst-case bound for each K")
    sub.add_parser("dro", parents=[common],
                   help="robust bound over the radius grid, written as CSV")
    sub.add_parser("crossval", parents=[common],
                   help="select the robust radius by resampled coverage")
    sub.add_parser("fit", parents=[common],
                   help="fit decay envelopes to an existing results.csv")
    sub.add_parser("run", parents=[common],
                   help="full experiment: bounds, selection, fits, reports")
    return p


def _load(args):
    config = ExperimentConfig.from_json(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.alpha is not None:
        updates["alpha"] = args.alpha
    if updates:
        config = dataclasses.replace(config, **updates)
    os.makedirs(config.out_dir, exist_ok=True)
    return config


def _cmd_sample(config, args):
    ws = prepare_workspace(config, threads=args.threads, with_bounds=False)
    for K in config.k_list:
        path = os.path.join(config.out_dir, f"samples_K{K}.jsonl")
        save_samples(ws.samples[K], path)
        print(f"wrote {len(ws.samples[K])} lifted runs to {path}")
    return 0


def _cmd_pep(config, args):
    ws = prepare_workspace(config, threads=args.threads)
    print("K,wc_bound")
    for K in config.k_list:
        print(f"{K},{ws.wc[K]:.12g}")
    return 0


def _cmd_dro(config, args):
    ws = prepare_workspace(config, threads=args.threads)
    rows = epsilon_sweep(ws, form=args.form, alpha=config.alpha,
                         threads=args.threads)
    path = os.path.join(config.out_dir, "eps_sweep.csv")
    write_sweep_csv(path, rows)
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def _cmd_crossval(config, args):
    ws = prepare_workspace(config, threads=args.threads)
    K = config.k_list[-1]
    res = crossvalidate_epsilon(
        ws.samples[K], ws.holdout_metrics[K], config.epsilon_grid,
        config.beta, args.form, trace=ws.traces[K], fclass=ws.fclass,
        n_train=config.n_train, alpha=config.alpha,
        resample_count=config.resample_count,
        seed=hash64(config.seed, _SEED_CROSSVAL), tol=config.tol,
        threads=args.threads)
    out = {"form": args.form, "alpha": config.alpha, "beta": config.beta,
           "epsilon": res.epsilon, "fallback": res.fallback,
           "target": res.target,
           "coverage": {f"{e:.6g}": c for e, c in res.coverage.items()},
           "solver_failures": res.n_failures}
    path = os.path.join(config.out_dir, f"crossval_{args.form}.json")
    with open(path, "w") as f:
        json.dump(out, f, indent=2)
        f.write("\n")
    flag = " (fallback: no radius reached target coverage)" if res.fallback else ""
    print(f"selected epsilon {res.epsilon:.6g} for {args.form}{flag}")
    print(f"wrote {path}")
    return 0


def _cmd_fit(config, args):
    path = os.path.join(config.out_dir, "results.csv")
    rows = read_results_csv(path)
    fits = fit_report_series(rows, config)
    out = os.path.join(config.out_dir, "rates.json")
    with open(out, "w") as f:
        json.dump(fits, f, indent=2)
        f.write("\n")
    print("series,C,rho,gamma,omega,residual")
    for fit in fits:
        print(",".join([fit["series"]] +
                       [f"{fit[k]:.6g}" for k in
                        ("C", "rho", "gamma", "omega", "residual")]))
    print(f"wrote {out}")
    return 0


def _cmd_run(config, args):
    report = run_experiment(config, threads=args.threads)
    print("K,wc_bound,dro_expect,dro_cvar,emp_mean,emp_cvar,emp_max")
    for r in report.rows:
        print(",".join([str(r["K"])] +
                       [f"{r[k]:.6g}" for k in
                        ("wc_bound", "dro_expect", "dro_cvar", "emp_mean",
                         "emp_cvar", "emp_max")]))
    for name in ("results", "rates", "manifest"):
        print(f"wrote {report.paths[name]}")
    return 0


_COMMANDS = {"sample": _cmd_sample, "pep": _cmd_pep, "dro": _cmd_dro,
             "crossval": _cmd_crossval, "fit": _cmd_fit, "run": _cmd_run}


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _load(args)
        return _COMMANDS[args.command](config, args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, TypeError, SolverFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
