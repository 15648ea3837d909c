"""One small experiment end to end, through the same path as the CLI.

Configures a quadratic-family study, runs every stage (sampling, per-K
runs, lifting, worst-case bounds, radius selection, robust bounds,
empirical statistics, rate fits), and walks through the report files it
writes.  Scale everything up for a real study; this sizing finishes in
well under a minute.
"""

import json
import os
import tempfile

from pepdist.pipeline import ExperimentConfig, run_experiment


def main():
    out = tempfile.mkdtemp(prefix="pepdist_demo_")
    config = ExperimentConfig.from_dict({
        "family": "quadratic", "family_params": {"d": 40}, "seed": 11,
        "method": "GD", "k_list": [1, 2, 3, 4, 6, 8],
        "mu": 0.0, "L": 1.0, "step_size": "1/L",
        "metric": "fgap", "condition_kind": "dist", "condition_r": 1.0,
        "n_train": 15, "n_holdout": 150,
        "epsilon_grid": {"min": 1e-2, "max": 10.0, "count": 8},
        "alpha": 0.1, "beta": 0.2, "resample_count": 5,
        "out_dir": out,
    })
    report = run_experiment(config)

    print(f"report files in {out}:")
    for name, path in report.paths.items():
        print(f"  {name:>8}: {os.path.basename(path)}")

    print()
    print("selected radii:",
          {form: f"{res.epsilon:.3g}" for form, res in report.crossval.items()})
    print(f"{'K':>3} {'worst case':>11} {'robust mean':>11} "
          f"{'robust tail':>11} {'holdout mean':>12}")
    for row in report.rows:
        print(f"{row['K']:>3} {row['wc_bound']:>11.5f} "
              f"{row['dro_expect']:>11.5f} {row['dro_cvar']:>11.5f} "
              f"{row['emp_mean']:>12.5f}")

    print()
    print("fitted envelopes:")
    for fit in report.fits:
        print(f"  {fit['series']:>11}: C={fit['C']:.4f} rho={fit['rho']:.4f} "
              f"gamma={fit['gamma']:.4f}")

    manifest = json.load(open(report.paths["manifest"]))
    print()
    print(f"manifest: status={manifest['status']}, "
          f"stages timed: {sorted(manifest['timings_s'])}")


if __name__ == "__main__":
    main()
