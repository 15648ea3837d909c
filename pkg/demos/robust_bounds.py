"""Distribution-robust bounds from a handful of observed runs.

Draws random quadratics with eigenvalues spread over [0, L], runs
gradient descent from random starts on the unit sphere, lifts each run
to its Gram representation, and sweeps the robustness radius.  At radius
zero the bound is the in-sample average; as the radius grows it climbs
monotonically toward the distribution-free worst case.
"""

import numpy as np

from pepdist.algorithms import AlgorithmSpec, metric_value, run
from pepdist.dro import DroSpec, solve_dro
from pepdist.instances import sample_mp_quadratic
from pepdist.lifting import lift, preconditioner
from pepdist.pep import (
    FunctionClass,
    InitialCondition,
    symbolic_unroll,
    worst_case_pep,
)


def main():
    rng_seed, n_runs, d, K = 7, 25, 60, 5
    fclass = FunctionClass(mu=0.0, L=1.0)
    spec = AlgorithmSpec("GD", 1.0, K)
    trace = symbolic_unroll(spec, metric="fgap",
                            condition=InitialCondition("dist", 1.0))

    samples, metrics = [], []
    for s in range(n_runs):
        inst = sample_mp_quadratic(0.0, 1.0, d, seed=s)
        rng = np.random.default_rng(rng_seed * 1000 + s)
        u = rng.normal(size=inst.dim)
        traj = run(spec, inst, u / np.linalg.norm(u))
        samples.append(lift(traj))
        metrics.append(metric_value(traj, "fgap"))

    scaling = preconditioner(samples)
    wc = worst_case_pep(trace, fclass)
    print(f"{n_runs} runs of K={K} gradient descent; "
          f"in-sample mean {np.mean(metrics):.6f}, worst case {wc:.6f}")
    print(f"{'radius':>10} {'expectation':>12} {'cvar(10%)':>12}")
    for eps in (0.0, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0):
        expect = solve_dro(DroSpec.from_trace(
            samples, trace, fclass, epsilon=eps, scaling=scaling)).objective
        tail = solve_dro(DroSpec.from_trace(
            samples, trace, fclass, epsilon=eps, form="cvar", alpha=0.1,
            scaling=scaling)).objective
        print(f"{eps:>10.2f} {expect:>12.6f} {tail:>12.6f}")
    print("both columns increase with the radius and stay below "
          f"the worst case ({wc:.6f}) until the radius swamps the data")


if __name__ == "__main__":
    main()
