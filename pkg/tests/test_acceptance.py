"""Acceptance gate: headline capabilities at their stated tolerances.

Each criterion is one test that prints a single pass/fail line (visible
under -s, and in the failure report otherwise).  Module-scoped fixtures
share the expensive sample sets and experiment runs between criteria.
"""

import time

import numpy as np
import pytest

from pepdist.algorithms import AlgorithmSpec, metric_value, run
from pepdist.dro import DroSpec, solve_dro
from pepdist.instances import (
    make_lasso_dictionary,
    reference_solution,
    sample_lasso,
    sample_logistic,
    sample_mp_quadratic,
)
from pepdist.lifting import identity_preconditioner, lift, preconditioner
from pepdist.pep import (
    FunctionClass,
    InitialCondition,
    all_interpolation_forms,
    initial_condition_matrices,
    symbolic_unroll,
    worst_case_pep,
)
from pepdist.pipeline import (
    ExperimentConfig,
    empirical_cvar,
    fit_rate,
    run_experiment,
)


def _line(name, ok, detail):
    print(f"acceptance {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


# -- shared sample sets ----------------------------------------------------

@pytest.fixture(scope="module")
def mp20():
    """20 unit-sphere gradient-descent runs on spread-spectrum quadratics."""
    fclass = FunctionClass(0.0, 1.0)
    spec = AlgorithmSpec("GD", 1.0, 5)
    trace = symbolic_unroll(spec, metric="fgap",
                            condition=InitialCondition("dist", 1.0))
    samples, metrics = [], []
    for s in range(20):
        inst = sample_mp_quadratic(0.0, 1.0, 50, seed=s)
        rng = np.random.default_rng(5000 + s)
        u = rng.normal(size=inst.dim)
        traj = run(spec, inst, u / np.linalg.norm(u))
        samples.append(lift(traj))
        metrics.append(metric_value(traj, "fgap"))
    return {
        "fclass": fclass, "trace": trace, "samples": samples,
        "metrics": np.array(metrics), "scaling": preconditioner(samples),
        "wc": worst_case_pep(trace, fclass),
    }


def _experiment(tag, **overrides):
    base = dict(
        family="quadratic", seed=20260822, step_size="1/L", mu=0.0, L=1.0,
        metric="fgap", condition_kind="dist", condition_r=1.0,
        alpha=0.1, beta=0.2, resample_count=6, n_holdout=300,
        out_dir=f"/tmp/pepdist_acceptance_{tag}",
    )
    base.update(overrides)
    config = ExperimentConfig.from_dict(base)
    t0 = time.perf_counter()
    report = run_experiment(config)
    return config, report, time.perf_counter() - t0


@pytest.fixture(scope="module")
def desk_gd():
    return _experiment(
        "gd", family_params={"d": 200}, method="GD", n_train=50,
        k_list=(1, 2, 3, 4, 5, 6, 8, 10, 12, 15),
        fit_options={"fix_rho_one": True})


@pytest.fixture(scope="module")
def desk_fgm():
    return _experiment(
        "fgm", family_params={"d": 200}, method="FGM-k/(k+3)", n_train=50,
        k_list=(1, 2, 3, 4, 5, 6, 8, 10, 12, 15),
        fit_options={"fix_rho_one": True, "with_loglog": True})


@pytest.fixture(scope="module")
def dist_experiment():
    return _experiment(
        "dist", family_params={"d": 50}, method="GD", n_train=20,
        k_list=(1, 2, 3, 5, 7, 10), metric="dist",
        epsilon_grid=(0.004, 0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0))


# -- criteria --------------------------------------------------------------

def test_criterion_01_gd_unit_step_worst_case():
    fclass = FunctionClass(0.0, 1.0)
    condition = InitialCondition("dist", 1.0)
    t0 = time.perf_counter()
    worst = 0.0
    for K in range(1, 6):
        trace = symbolic_unroll(AlgorithmSpec("GD", 1.0, K),
                                metric="fgap", condition=condition)
        bound = worst_case_pep(trace, fclass)
        closed = 1.0 / (2.0 * (2.0 * K + 1.0))
        worst = max(worst, abs(bound - closed) / closed)
    elapsed = time.perf_counter() - t0
    _line("criterion 1", worst <= 1e-5 and elapsed < 5.0,
          f"GD unit-step bounds K=1..5, max rel err {worst:.2e}, "
          f"{elapsed:.2f}s")


def test_criterion_02_gd_long_step_worst_case():
    fclass = FunctionClass(0.0, 1.0)
    condition = InitialCondition("dist", 1.0)
    worst = 0.0
    for K, closed in ((1, 0.125), (5, 0.03125)):
        trace = symbolic_unroll(AlgorithmSpec("GD", 1.5, K),
                                metric="fgap", condition=condition)
        bound = worst_case_pep(trace, fclass)
        worst = max(worst, abs(bound - closed) / closed)
    _line("criterion 2", worst <= 1e-5,
          f"GD step 1.5/L bounds at K=1,5, max rel err {worst:.2e}")


def test_criterion_03_robust_expectation_limits(mp20):
    t0 = time.perf_counter()
    mean = float(mp20["metrics"].mean())
    lo = solve_dro(DroSpec.from_trace(
        mp20["samples"], mp20["trace"], mp20["fclass"], epsilon=1e-9,
        scaling=mp20["scaling"])).objective
    hi = solve_dro(DroSpec.from_trace(
        mp20["samples"], mp20["trace"], mp20["fclass"], epsilon=1e6,
        scaling=identity_preconditioner(mp20["samples"][0].layout))).objective
    values = [solve_dro(DroSpec.from_trace(
        mp20["samples"], mp20["trace"], mp20["fclass"], epsilon=float(e),
        scaling=mp20["scaling"])).objective
        for e in np.geomspace(1e-9, 1e6, 10)]
    elapsed = time.perf_counter() - t0
    err_lo = abs(lo - mean) / mean
    err_hi = abs(hi - mp20["wc"]) / mp20["wc"]
    monotone = all(b >= a - 1e-7 for a, b in zip(values, values[1:]))
    _line("criterion 3",
          err_lo <= 1e-4 and err_hi <= 1e-4 and monotone and elapsed < 120,
          f"robust expectation: zero-radius rel err {err_lo:.2e}, "
          f"huge-radius rel err {err_hi:.2e}, monotone={monotone}, "
          f"{elapsed:.1f}s")


def test_criterion_04_robust_cvar_limits(mp20):
    t0 = time.perf_counter()
    expect = solve_dro(DroSpec.from_trace(
        mp20["samples"], mp20["trace"], mp20["fclass"], epsilon=0.1,
        scaling=mp20["scaling"])).objective
    collapse = solve_dro(DroSpec.from_trace(
        mp20["samples"], mp20["trace"], mp20["fclass"], epsilon=0.1,
        form="cvar", alpha=1.0, scaling=mp20["scaling"])).objective
    tail = solve_dro(DroSpec.from_trace(
        mp20["samples"], mp20["trace"], mp20["fclass"], epsilon=1e-9,
        form="cvar", alpha=0.1, scaling=mp20["scaling"])).objective
    emp = empirical_cvar(mp20["metrics"], 0.1)
    elapsed = time.perf_counter() - t0
    err_one = abs(collapse - expect)
    err_tail = abs(tail - emp) / emp
    _line("criterion 4",
          err_one <= 1e-6 and err_tail <= 1e-4 and elapsed < 180,
          f"robust tail risk: alpha=1 collapse err {err_one:.2e}, "
          f"zero-radius tail rel err {err_tail:.2e}, {elapsed:.1f}s")


def _feasibility(samples, trace, fclass, condition_form):
    worst_form = -np.inf
    worst_init = -np.inf
    worst_eig = np.inf
    forms = all_interpolation_forms(trace, fclass)
    for s in samples:
        for form in forms:
            worst_form = max(worst_form, form.evaluate(s.G, s.F))
        worst_init = max(worst_init, condition_form.evaluate(s.G, s.F))
        worst_eig = min(worst_eig, float(np.linalg.eigvalsh(s.G)[0]))
    return worst_form, worst_init, worst_eig


def test_criterion_05_lifted_samples_feasible():
    budgets = []

    # spread-spectrum quadratics from the unit sphere
    fclass = FunctionClass(0.0, 1.0)
    spec = AlgorithmSpec("GD", 1.0, 5)
    condition = InitialCondition("dist", 1.0)
    trace = symbolic_unroll(spec, metric="fgap", condition=condition)
    samples = []
    for s in range(100):
        inst = sample_mp_quadratic(0.0, 1.0, 50, seed=200 + s)
        rng = np.random.default_rng(9000 + s)
        u = rng.normal(size=inst.dim)
        samples.append(lift(run(spec, inst, u / np.linalg.norm(u))))
    budgets.append(("quadratic",) + _feasibility(
        samples, trace, fclass, initial_condition_matrices(condition, trace)))

    # regularized logistic regression from the origin
    instances = [sample_logistic(n=300, d=30, p=0.3, sigma_A=2.0,
                                 xtilde_max=2.0, lambda_reg=1e-2,
                                 seed=300 + s) for s in range(100)]
    refs = [reference_solution(inst) for inst in instances]
    L_class = max(inst.L for inst in instances)
    r = max(float(np.linalg.norm(ref.x_star)) for ref in refs) * (1 + 1e-9)
    fclass = FunctionClass(1e-2, L_class)
    spec = AlgorithmSpec("GD", 1.0 / L_class, 5)
    condition = InitialCondition("dist", r)
    trace = symbolic_unroll(spec, metric="fgap", condition=condition)
    samples = [lift(run(spec, inst, np.zeros(inst.dim), reference=ref))
               for inst, ref in zip(instances, refs)]
    budgets.append(("logistic",) + _feasibility(
        samples, trace, fclass, initial_condition_matrices(condition, trace)))

    # l1-regularized least squares over a shared dictionary
    dictionary = make_lasso_dictionary(n=60, d=90, density=0.4, seed=77)
    L = float(np.linalg.eigvalsh(dictionary.T @ dictionary)[-1])
    instances = [sample_lasso(dictionary, p=0.3, sigma_eps=0.5,
                              lambda_reg=0.1, seed=400 + s, L=L)
                 for s in range(100)]
    refs = [reference_solution(inst) for inst in instances]
    r = max(float(np.linalg.norm(ref.x_star)) for ref in refs) * (1 + 1e-9)
    fclass = FunctionClass(0.0, L)
    spec = AlgorithmSpec("FISTA", 1.0 / L, 5)
    condition = InitialCondition("dist", r)
    trace = symbolic_unroll(spec, metric="fgap", condition=condition)
    samples = [lift(run(spec, inst, np.zeros(inst.dim), reference=ref))
               for inst, ref in zip(instances, refs)]
    budgets.append(("lasso",) + _feasibility(
        samples, trace, fclass, initial_condition_matrices(condition, trace)))

    ok = all(form <= 1e-7 and init <= 1e-7 and eig >= -1e-9
             for _, form, init, eig in budgets)
    detail = "; ".join(
        f"{fam}: form<={form:.1e} init<={init:.1e} eig>={eig:.1e}"
        for fam, form, init, eig in budgets)
    _line("criterion 5", ok, f"100 lifted runs per family; {detail}")


def test_criterion_06_rate_fit_recovery():
    K = np.arange(1, 21, dtype=float)
    phi = 2.0 * 0.9 ** K / (K + 1.0)
    fit = fit_rate(zip(K, phi), phi0=2.0)
    err1 = max(abs(fit.C - 2.0), abs(fit.rho - 0.9), abs(fit.gamma - 1.0))
    cover1 = bool(np.all(fit.curve(K) >= phi * (1 - 1e-9)))

    phi2 = (K + 1.0) ** -1.5
    fit2 = fit_rate(zip(K, phi2), fix_rho_one=True, phi0=1.0)
    err2 = max(abs(fit2.gamma - 1.5), abs(fit2.C - 1.0))
    cover2 = bool(np.all(fit2.curve(K) >= phi2 * (1 - 1e-9)))

    _line("criterion 6",
          err1 <= 1e-6 and err2 <= 1e-6 and cover1 and cover2,
          f"rate-fit recovery: geometric err {err1:.2e}, "
          f"sublinear err {err2:.2e}, envelopes cover={cover1 and cover2}")


def test_criterion_07_desk_scale_rate_trends(desk_gd, desk_fgm):
    _, report_gd, t_gd = desk_gd
    _, report_fgm, t_fgm = desk_fgm
    gamma_gd = next(f["gamma"] for f in report_gd.fits
                    if f["series"] == "dro_expect")
    gamma_fgm = next(f["gamma"] for f in report_fgm.fits
                     if f["series"] == "dro_expect")
    elapsed = t_gd + t_fgm
    ok = 1.2 <= gamma_gd <= 1.8 and 2.3 <= gamma_fgm <= 3.3 and elapsed < 1200
    _line("criterion 7", ok,
          f"desk-scale trends: GD gamma {gamma_gd:.3f} in [1.2,1.8], "
          f"momentum gamma {gamma_fgm:.3f} in [2.3,3.3], {elapsed:.0f}s")


def test_criterion_08_bound_ordering(desk_gd, desk_fgm, dist_experiment):
    violations = []
    for tag, (_, report, _) in (("gd", desk_gd), ("fgm", desk_fgm),
                                ("dist", dist_experiment)):
        for r in report.rows:
            if not (r["emp_mean"] <= r["emp_cvar"] <= r["emp_max"]
                    <= r["wc_bound"] + 1e-5):
                violations.append(f"{tag} K={r['K']} empirical chain")
            if r["dro_expect"] < r["emp_mean"] - 1e-6:
                violations.append(f"{tag} K={r['K']} expectation coverage")
            if r["dro_cvar"] < r["emp_cvar"] - 1e-6:
                violations.append(f"{tag} K={r['K']} tail coverage")
    _line("criterion 8", not violations,
          "ordering on every experiment row" if not violations
          else "; ".join(violations))


def test_criterion_09_distance_metric_contrast(dist_experiment):
    config, report, _ = dist_experiment
    wc_err = max(abs(r["wc_bound"] - 1.0) for r in report.rows)
    by_k = {r["K"]: r["dro_expect"] for r in report.rows}
    ratio = by_k[1] / by_k[10]
    _line("criterion 9", wc_err <= 1e-4 and ratio >= 2.0,
          f"distance metric: worst case constant to {wc_err:.2e}, "
          f"robust mean shrinks {ratio:.2f}x from K=1 to K=10")
