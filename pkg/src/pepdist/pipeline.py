"""Experiment orchestration: samples, bound grids, radius selection, reports.

The stages mirror the analysis workflow: draw problem instances, run the
method, lift the runs, bound the metric (worst case, and robust over a
radius grid), pick the radius by resampled coverage against a holdout
estimate, fit decay-rate envelopes, and write the CSV/JSON report files
consumed by the plotting scripts.
"""

import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .algorithms import METHODS, AlgorithmSpec, metric_value, run
from .conic import ConicProgram, SolverFailure
from .dro import DroSpec, solve_dro
from .instances import (
    hash64,
    make_lasso_dictionary,
    reference_solution,
    sample_lasso,
    sample_logistic,
    sample_mp_quadratic,
)
from .lifting import lift, preconditioner
from .pep import FunctionClass, InitialCondition, symbolic_unroll, worst_case_pep

log = logging.getLogger(__name__)

FAMILIES = ("quadratic", "logistic", "lasso")
RESULT_COLUMNS = ("K", "wc_bound", "dro_expect", "dro_cvar", "emp_mean",
                  "emp_cvar", "emp_max", "eps_expect", "eps_cvar",
                  "solve_time_s")
SWEEP_COLUMNS = ("epsilon", "K", "dro_value", "wc_bound", "in_sample")

# stage tags for deriving per-stage seeds from the master seed
_SEED_TRAIN, _SEED_HOLDOUT, _SEED_X0_TRAIN, _SEED_X0_HOLDOUT = 0, 1, 2, 3
_SEED_DICTIONARY, _SEED_CROSSVAL = 4, 5


def empirical_cvar(values, alpha):
    """Exact tail average of the empirical distribution.

    Scans the threshold over the sorted values, which contains the exact
    minimizer of t + mean((v - t)+) / alpha.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("need at least one value")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    desc = np.sort(v)[::-1]
    q = alpha * v.size
    lead = np.concatenate(([0.0], np.cumsum(desc[:-1])))
    j = np.arange(v.size)
    return float(np.min(desc + (lead - j * desc) / q))


@dataclass(frozen=True)
class RateFit:
    """Envelope-fit parameters: phi_K <= C rho^K (K+1)^-gamma log(K+1)^omega."""
    C: float
    rho: float
    gamma: float
    omega: float
    residual: float
    active: tuple

    def curve(self, K):
        K = np.asarray(K, dtype=float)
        val = (np.log(self.C) + K * np.log(self.rho)
               - self.gamma * np.log(K + 1.0))
        if self.omega:
            val = val + self.omega * np.log(np.log(K + 1.0))
        return np.exp(val)


def fit_rate(points, fix_rho_one=False, fix_gamma=None, with_loglog=False,
             phi0=None, tol=1e-10):
    """Fit a decay envelope to a positive series in log space.

    Weighted least squares over the log residuals, constrained so the
    fitted curve upper-bounds every point; late small values get the
    larger weights.  phi0 sets the weight scale (the series value at
    K = 0) and is required.
    """
    pts = sorted((int(k), float(p)) for k, p in points)
    if len(pts) < 3:
        raise ValueError("need at least three points")
    K = np.array([k for k, _ in pts], dtype=float)
    phi = np.array([p for _, p in pts], dtype=float)
    if np.any(phi <= 0):
        raise ValueError("series values must be positive")
    if phi0 is None or phi0 <= 0:
        raise ValueError("phi0 (series value at K = 0) is required")
    if with_loglog and np.any(K < 1):
        raise ValueError("the log-log term needs K >= 1")

    h = np.log(phi)
    w = np.maximum(1.0 + np.log(phi0 / phi), 1e-6)

    cols, names = [np.ones_like(K)], ["const"]
    if fix_gamma is None:
        cols.append(-np.log(K + 1.0))
        names.append("gamma")
    else:
        h = h + float(fix_gamma) * np.log(K + 1.0)
    if with_loglog:
        cols.append(np.log(np.log(K + 1.0)))
        names.append("omega")
    if not fix_rho_one:
        cols.append(K)
        names.append("rho")
    H = np.column_stack(cols)
    n, p = H.shape

    prog = ConicProgram()
    x = prog.vector("x", p)
    u = prog.scalar("u")
    prog.add_cost(u.index, 1.0)

    soc = prog.rows(1 + n)
    soc.add(0, u.index, 1.0)
    for i in range(n):
        soc.add(1 + i, x.indices, w[i] * H[i])
        soc.const[1 + i] = -w[i] * h[i]
    prog.soc(soc)

    above = prog.rows(n)
    for i in range(n):
        above.add(i, x.indices, H[i])
    above.const[:] = -h
    prog.nonneg(above)

    signed = [names.index(nm) for nm in ("gamma", "omega") if nm in names]
    if signed:
        sign = prog.rows(len(signed))
        sign.add(np.arange(len(signed)), x.indices[signed], 1.0)
        prog.nonneg(sign)

    sol = prog.solve_required(tol=tol, retry_tol=1e4 * tol)
    coef = dict(zip(names, np.atleast_1d(sol.primal["x"])))

    gamma = float(fix_gamma) if fix_gamma is not None else float(coef["gamma"])
    log_rho = 0.0 if fix_rho_one else float(coef["rho"])
    if log_rho > 0.0:
        # decay rates live in (0, 1]; tiny positive drift means the linear
        # column is not needed, so refit without it
        return fit_rate(pts, fix_rho_one=True, fix_gamma=fix_gamma,
                        with_loglog=with_loglog, phi0=phi0, tol=tol)
    omega = float(coef.get("omega", 0.0))
    log_c = float(coef["const"])

    # lift the constant just enough that the envelope covers every point
    log_curve = log_c + log_rho * K - gamma * np.log(K + 1.0)
    if with_loglog:
        log_curve = log_curve + omega * np.log(np.log(K + 1.0))
    shift = max(0.0, float(np.max(np.log(phi) - log_curve)))
    log_c += shift
    log_curve += shift
    slack = log_curve - np.log(phi)
    residual = float(np.linalg.norm(w * slack))
    active = tuple(int(i) for i in np.nonzero(slack <= 1e-7)[0])
    return RateFit(C=math.exp(log_c), rho=math.exp(log_rho), gamma=gamma,
                   omega=omega, residual=residual, active=active)


@dataclass
class CrossvalResult:
    """Chosen radius plus the coverage curve that selected it."""
    epsilon: float
    coverage: dict
    fallback: bool
    target: float
    n_failures: int


def crossvalidate_epsilon(train_pool, holdout_values, grid, beta, form, *,
                          trace, fclass, n_train, alpha=0.1,
                          resample_count=50, seed=0, tol=1e-8, threads=1):
    """Smallest grid radius whose bound covers the holdout risk estimate.

    Coverage of a radius is the fraction of bootstrap training subsets
    whose robust bound is at least the holdout estimate of the risk
    functional.  Subsets are drawn once and shared across the grid; the
    scan over each subset stops at the first covering radius, which is
    valid because the bound is non-decreasing in the radius.  Returns the
    largest grid radius with a fallback flag when no radius reaches
    coverage 1 - beta.
    """
    grid = [float(e) for e in grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("radius grid must be strictly increasing")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    holdout_values = np.asarray(holdout_values, dtype=float)
    if form == "expectation":
        target = float(holdout_values.mean())
    elif form == "cvar":
        target = empirical_cvar(holdout_values, alpha)
    else:
        raise ValueError(f"unknown risk form {form!r}")

    rng = np.random.default_rng(seed)
    subsets = [rng.integers(0, len(train_pool), size=n_train)
               for _ in range(resample_count)]
    slack = 1e-9 * max(1.0, abs(target))

    def first_covering(r):
        samples = [train_pool[i] for i in subsets[r]]
        scaling = preconditioner(samples)
        failures = 0
        for gi, eps in enumerate(grid):
            spec = DroSpec.from_trace(samples, trace, fclass, epsilon=eps,
                                      form=form, alpha=alpha, scaling=scaling)
            try:
                value = solve_dro(spec, tol=tol).objective
            except SolverFailure as exc:
                failures += 1
                log.warning("resample %d radius %.3g: %s", r, eps, exc)
                continue
            if value >= target - slack:
                return gi, failures
        return len(grid), failures

    outcomes = _ordered_map(first_covering, range(resample_count), threads)
    first = np.array([o[0] for o in outcomes])
    n_failures = sum(o[1] for o in outcomes)

    coverage = {eps: float(np.mean(first <= gi)) for gi, eps in enumerate(grid)}
    needed = 1.0 - beta
    for gi, eps in enumerate(grid):
        if coverage[eps] >= needed:
            return CrossvalResult(epsilon=eps, coverage=coverage,
                                  fallback=False, target=target,
                                  n_failures=n_failures)
    log.warning("no radius reached coverage %.3f; falling back to %.3g",
                needed, grid[-1])
    return CrossvalResult(epsilon=grid[-1], coverage=coverage, fallback=True,
                          target=target, n_failures=n_failures)


def _ordered_map(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs, loadable from a JSON file."""

    family: str
    family_params: dict
    seed: int
    method: str
    k_list: tuple
    mu: float = 0.0
    L: object = "auto"
    q: object = None
    step_size: object = "1/L"
    metric: str = "fgap"
    condition_kind: str = "dist"
    condition_r: object = "auto"
    x0_policy: object = None
    n_train: int = 20
    n_holdout: int = 1000
    epsilon_grid: tuple = ()
    alpha: float = 0.1
    beta: float = 0.05
    resample_count: int = 50
    fit_options: dict = field(default_factory=dict)
    out_dir: str = "results"
    tol: float = 1e-8

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        composite = self.method in ("ISTA", "FISTA")
        if composite != (self.family == "lasso"):
            raise ValueError("prox methods pair with the lasso family only")
        k_list = tuple(int(k) for k in self.k_list)
        if not k_list or any(b <= a for a, b in zip(k_list, k_list[1:])):
            raise ValueError("k_list must be strictly increasing")
        if min(k_list) < 1:
            raise ValueError("k_list entries must be >= 1")
        object.__setattr__(self, "k_list", k_list)
        grid = tuple(float(e) for e in self.epsilon_grid) or tuple(
            np.geomspace(1e-2, 1e1, 10))
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("epsilon grid must be strictly increasing")
        object.__setattr__(self, "epsilon_grid", grid)
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.n_train < 1 or self.n_holdout < 1 or self.resample_count < 1:
            raise ValueError("sample counts must be positive")
        policy = self.x0_policy
        if policy is None:
            policy = "sphere" if self.family == "quadratic" else "zero"
        if policy not in ("sphere", "zero"):
            raise ValueError(f"unknown x0 policy {policy!r}")
        object.__setattr__(self, "x0_policy", policy)
        if policy == "sphere" and not _is_number(self.condition_r):
            raise ValueError("sphere starts need a numeric condition radius")
        if _is_number(self.condition_r) and float(self.condition_r) <= 0:
            raise ValueError("condition radius must be positive")

    @classmethod
    def from_dict(cls, data):
        if "epsilon_grid" in data and isinstance(data["epsilon_grid"], dict):
            g = data["epsilon_grid"]
            data = dict(data)
            data["epsilon_grid"] = tuple(
                np.geomspace(g["min"], g["max"], g["count"]))
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self):
        d = {
            "family": self.family, "family_params": dict(self.family_params),
            "seed": self.seed, "method": self.method,
            "k_list": list(self.k_list), "mu": self.mu, "L": self.L,
            "q": self.q, "step_size": self.step_size, "metric": self.metric,
            "condition_kind": self.condition_kind,
            "condition_r": self.condition_r, "x0_policy": self.x0_policy,
            "n_train": self.n_train, "n_holdout": self.n_holdout,
            "epsilon_grid": list(self.epsilon_grid), "alpha": self.alpha,
            "beta": self.beta, "resample_count": self.resample_count,
            "fit_options": dict(self.fit_options), "out_dir": self.out_dir,
            "tol": self.tol,
        }
        return d


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


class Workspace:
    """Prepared experiment state shared by the bound-producing commands."""

    def __init__(self, config):
        self.config = config
        self.timings = {}
        self.warnings = []
        self.fclass = None
        self.algo = None
        self.traces = {}
        self.samples = {}
        self.train_metrics = {}
        self.holdout_metrics = {}
        self.wc = {}
        self.phi0 = None
        self.radius = None
        self.condition = None


def prepare_workspace(config, threads=1, with_bounds=True):
    """Sample instances, run the method per K, lift, and bound worst cases.

    with_bounds=False skips the symbolic traces and worst-case solves for
    callers that only need the lifted samples.
    """
    ws = Workspace(config)
    t0 = time.perf_counter()
    train, holdout, L_class = _sample_families(config)
    ws.timings["instances_s"] = time.perf_counter() - t0
    mu = config.mu if config.family != "logistic" else train[0][0].mu
    fclass = FunctionClass(mu, L_class)
    ws.fclass = fclass

    eta = _resolve_step(config.step_size, L_class)
    q = config.q
    if config.method == "FGM-strcvx" and q is None:
        q = mu / L_class
    ws.algo = AlgorithmSpec(config.method, eta, max(config.k_list), q=q)

    t0 = time.perf_counter()
    train_runs = {K: [] for K in config.k_list}
    holdout_runs = {}
    for K in config.k_list:
        spec_k = AlgorithmSpec(config.method, eta, K, q=q)
        train_runs[K] = [run(spec_k, inst, x0, reference=ref)
                         for inst, ref, x0 in train]
        holdout_runs[K] = [run(spec_k, inst, x0, reference=ref)
                           for inst, ref, x0 in holdout]
        ws.train_metrics[K] = np.array(
            [metric_value(t, config.metric) for t in train_runs[K]])
        ws.holdout_metrics[K] = np.array(
            [metric_value(t, config.metric) for t in holdout_runs[K]])
    ws.timings["runs_s"] = time.perf_counter() - t0

    K0 = config.k_list[0]
    stats = [_init_stat(t, config.condition_kind)
             for t in train_runs[K0] + holdout_runs[K0]]
    if _is_number(config.condition_r):
        ws.radius = float(config.condition_r)
        worst = max(stats)
        if worst > ws.radius * (1.0 + 1e-9):
            raise ValueError(
                f"initial condition violated: observed {worst:.6g} exceeds "
                f"radius {ws.radius:.6g}; raise condition_r or use 'auto'")
    else:
        ws.radius = float(max(stats))
        if ws.radius <= 0:
            raise ValueError("every run starts at its reference point; "
                             "the initial condition is degenerate")
    ws.condition = InitialCondition(config.condition_kind, ws.radius)

    t0 = time.perf_counter()
    for K in config.k_list:
        ws.samples[K] = [lift(t) for t in train_runs[K]]
        if not with_bounds:
            continue
        ws.traces[K] = symbolic_unroll(ws.algo, K=K, metric=config.metric,
                                       condition=ws.condition)
        ws.wc[K] = worst_case_pep(ws.traces[K], fclass)
    if with_bounds and config.family != "lasso":
        trace0 = symbolic_unroll(ws.algo, K=0, metric=config.metric,
                                 condition=ws.condition)
        ws.phi0 = worst_case_pep(trace0, fclass)
    ws.timings["bounds_s"] = time.perf_counter() - t0
    return ws


def _resolve_step(step, L):
    if _is_number(step):
        return float(step)
    text = str(step).strip()
    if text.endswith("/L"):
        return float(text[:-2]) / L
    raise ValueError(f"cannot parse step size {step!r}")


def _init_stat(traj, kind):
    if kind == "dist":
        return float(np.linalg.norm(traj.x0 - traj.reference.x_star))
    if kind == "fgap":
        return float(traj.values[0] - traj.reference.f_star)
    return float(np.linalg.norm(traj.grads[0]))


def _sample_families(config):
    """Instance/reference/start triples for the train and holdout pools."""
    p = dict(config.family_params)
    seed = config.seed

    def starts(rng_seed, dim, r):
        rng = np.random.default_rng(rng_seed)
        if config.x0_policy == "zero":
            return np.zeros(dim)
        u = rng.normal(size=dim)
        return r * u / np.linalg.norm(u)

    def build(tag_inst, tag_x0, count, sampler):
        out = []
        for i in range(count):
            inst = sampler(hash64(seed, tag_inst, i))
            ref = reference_solution(inst)
            x0 = starts(hash64(seed, tag_x0, i), inst.dim,
                        config.condition_r if _is_number(config.condition_r)
                        else 1.0)
            out.append((inst, ref, x0))
        return out

    if config.family == "quadratic":
        if not _is_number(config.L):
            raise ValueError("quadratic experiments need a numeric L")
        mu, L, d = float(config.mu), float(config.L), int(p["d"])
        sampler = lambda s: sample_mp_quadratic(mu, L, d, seed=s)
        train = build(_SEED_TRAIN, _SEED_X0_TRAIN, config.n_train, sampler)
        hold = build(_SEED_HOLDOUT, _SEED_X0_HOLDOUT, config.n_holdout, sampler)
        return train, hold, L

    if config.family == "logistic":
        sampler = lambda s: sample_logistic(
            n=int(p["n"]), d=int(p["d"]), p=float(p["p"]),
            sigma_A=float(p["sigma_A"]), xtilde_max=float(p["xtilde_max"]),
            lambda_reg=float(p["lambda_reg"]), seed=s)
        train = build(_SEED_TRAIN, _SEED_X0_TRAIN, config.n_train, sampler)
        hold = build(_SEED_HOLDOUT, _SEED_X0_HOLDOUT, config.n_holdout, sampler)
        # the class constant comes from the training pool only, so the
        # certified bound never peeks at holdout data
        top = max(inst.L for inst, _, _ in train)
        if _is_number(config.L):
            if top > float(config.L) * (1.0 + 1e-9):
                raise ValueError(
                    f"sampled smoothness {top:.6g} exceeds configured "
                    f"L={config.L}; raise L or use 'auto'")
            return train, hold, float(config.L)
        return train, hold, float(top)

    dictionary = make_lasso_dictionary(
        n=int(p["n"]), d=int(p["d"]), density=float(p.get("density", 0.4)),
        seed=hash64(seed, _SEED_DICTIONARY))
    L = float(np.linalg.eigvalsh(dictionary.T @ dictionary)[-1])
    sampler = lambda s: sample_lasso(
        dictionary, p=float(p["p"]), sigma_eps=float(p["sigma_eps"]),
        lambda_reg=float(p["lambda_reg"]), seed=s, L=L)
    train = build(_SEED_TRAIN, _SEED_X0_TRAIN, config.n_train, sampler)
    hold = build(_SEED_HOLDOUT, _SEED_X0_HOLDOUT, config.n_holdout, sampler)
    return train, hold, L


def epsilon_sweep(ws, form="expectation", alpha=None, threads=1):
    """Robust bound at every (radius, K) grid point, with references.

    Returns rows matching SWEEP_COLUMNS, grouped by K then radius.
    """
    config = ws.config
    alpha = config.alpha if alpha is None else alpha
    rows = []
    for K in config.k_list:
        scaling = preconditioner(ws.samples[K])
        if form == "expectation":
            in_sample = float(ws.train_metrics[K].mean())
        else:
            in_sample = empirical_cvar(ws.train_metrics[K], alpha)

        def bound(eps, K=K, scaling=scaling):
            spec = DroSpec.from_trace(ws.samples[K], ws.traces[K], ws.fclass,
                                      epsilon=eps, form=form, alpha=alpha,
                                      scaling=scaling)
            return solve_dro(spec, tol=config.tol).objective

        values = _ordered_map(bound, config.epsilon_grid, threads)
        for eps, val in zip(config.epsilon_grid, values):
            rows.append({"epsilon": eps, "K": K, "dro_value": val,
                         "wc_bound": ws.wc[K], "in_sample": in_sample})
    return rows


@dataclass
class ExperimentReport:
    rows: list
    fits: list
    crossval: dict
    manifest: dict
    paths: dict


def run_experiment(config, threads=1):
    """Full pipeline; writes results.csv, rates.json, and manifest.json.

    Any stage failure still writes a manifest describing the partial
    state before the error propagates.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    manifest = {
        "config": config.to_dict(),
        "master_seed": str(config.seed),
        "stage_seeds": {
            "train_instances": [str(hash64(config.seed, _SEED_TRAIN, i))
                                for i in range(min(config.n_train, 3))],
            "crossval": str(hash64(config.seed, _SEED_CROSSVAL)),
        },
        "versions": _versions(),
        "timings_s": {},
        "warnings": [],
        "status": "running",
    }
    paths = {name: os.path.join(config.out_dir, fname)
             for name, fname in (("results", "results.csv"),
                                 ("rates", "rates.json"),
                                 ("manifest", "manifest.json"))}
    stage = "prepare"
    try:
        ws = prepare_workspace(config, threads=threads)
        manifest["timings_s"].update(ws.timings)
        manifest["class"] = {"mu": ws.fclass.mu, "L": ws.fclass.L}
        manifest["radius"] = ws.radius
        manifest["step_size"] = ws.algo.step_size

        stage = "crossval"
        t0 = time.perf_counter()
        K_top = config.k_list[-1]
        crossval = {}
        for form in ("expectation", "cvar"):
            crossval[form] = crossvalidate_epsilon(
                ws.samples[K_top], ws.holdout_metrics[K_top],
                config.epsilon_grid, config.beta, form,
                trace=ws.traces[K_top], fclass=ws.fclass,
                n_train=config.n_train, alpha=config.alpha,
                resample_count=config.resample_count,
                seed=hash64(config.seed, _SEED_CROSSVAL), tol=config.tol,
                threads=threads)
            if crossval[form].fallback:
                manifest["warnings"].append(
                    f"crossval fallback to largest radius for {form}")
        manifest["timings_s"]["crossval_s"] = time.perf_counter() - t0
        manifest["crossval"] = {
            form: {"epsilon": res.epsilon, "fallback": res.fallback,
                   "target": res.target,
                   "coverage": {f"{e:.6g}": c for e, c in res.coverage.items()},
                   "solver_failures": res.n_failures}
            for form, res in crossval.items()}

        stage = "dro"
        t0 = time.perf_counter()
        rows = []
        coverage_by_k = {}

        def bounds_at(K):
            scaling = preconditioner(ws.samples[K])
            out = {}
            for form in ("expectation", "cvar"):
                spec = DroSpec.from_trace(
                    ws.samples[K], ws.traces[K], ws.fclass,
                    epsilon=crossval[form].epsilon, form=form,
                    alpha=config.alpha, scaling=scaling)
                out[form] = solve_dro(spec, tol=config.tol)
            return out

        solved = _ordered_map(bounds_at, config.k_list, threads)
        for K, sols in zip(config.k_list, solved):
            hold = ws.holdout_metrics[K]
            emp_cvar = empirical_cvar(hold, config.alpha)
            rows.append({
                "K": K,
                "wc_bound": ws.wc[K],
                "dro_expect": sols["expectation"].objective,
                "dro_cvar": sols["cvar"].objective,
                "emp_mean": float(hold.mean()),
                "emp_cvar": emp_cvar,
                "emp_max": float(hold.max()),
                "eps_expect": crossval["expectation"].epsilon,
                "eps_cvar": crossval["cvar"].epsilon,
                "solve_time_s": (sols["expectation"].solve_time
                                 + sols["cvar"].solve_time),
            })
            coverage_by_k[str(K)] = {
                "expectation": bool(rows[-1]["dro_expect"]
                                    >= rows[-1]["emp_mean"] - 1e-9),
                "cvar": bool(rows[-1]["dro_cvar"] >= emp_cvar - 1e-9),
            }
        manifest["timings_s"]["dro_s"] = time.perf_counter() - t0
        manifest["coverage_by_k"] = coverage_by_k
        write_results_csv(paths["results"], rows)

        stage = "fit"
        t0 = time.perf_counter()
        fits = fit_report_series(rows, config, phi0=ws.phi0)
        manifest["timings_s"]["fit_s"] = time.perf_counter() - t0
        with open(paths["rates"], "w") as f:
            json.dump(fits, f, indent=2)
            f.write("\n")

        manifest["status"] = "complete"
        _write_manifest(paths["manifest"], manifest)
        return ExperimentReport(rows=rows, fits=fits, crossval=crossval,
                                manifest=manifest, paths=paths)
    except Exception as exc:
        manifest["status"] = "failed"
        manifest["failed_stage"] = stage
        manifest["error"] = f"{type(exc).__name__}: {exc}"
        _write_manifest(paths["manifest"], manifest)
        raise


def fit_report_series(rows, config, phi0=None):
    """Rate fits for each bound/empirical series in a results table."""
    opts = dict(config.fit_options)
    min_k = int(opts.pop("min_k", 0))
    fits = []
    for series in ("wc_bound", "dro_expect", "dro_cvar", "emp_mean",
                   "emp_cvar"):
        pts = [(r["K"], r[series]) for r in rows
               if r["K"] >= min_k and r[series] > 0]
        if len(pts) < 3:
            log.info("skipping fit of %s: %d usable points", series, len(pts))
            continue
        scale = phi0 if phi0 else max(p for _, p in pts)
        try:
            fit = fit_rate(pts, phi0=scale, **opts)
        except (ValueError, SolverFailure) as exc:
            log.warning("fit of %s failed: %s", series, exc)
            continue
        fits.append({"series": series, "C": fit.C, "rho": fit.rho,
                     "gamma": fit.gamma, "omega": fit.omega,
                     "residual": fit.residual})
    return fits


def _versions():
    import clarabel
    import scipy
    return {
        "pepdist": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "clarabel": getattr(clarabel, "__version__", "unknown"),
    }


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def write_results_csv(path, rows):
    _write_csv(path, RESULT_COLUMNS, rows)


def write_sweep_csv(path, rows):
    _write_csv(path, SWEEP_COLUMNS, rows)


def _write_csv(path, columns, rows):
    with open(path, "w") as f:
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(row[c]) for c in columns) + "\n")


def read_results_csv(path):
    """Rows of a results table, numbers parsed, K as int."""
    with open(path) as f:
        header = f.readline().strip().split(",")
        rows = []
        for line in f:
            if not line.strip():
                continue
            vals = line.strip().split(",")
            row = dict(zip(header, (float(v) for v in vals)))
            if "K" in row:
                row["K"] = int(row["K"])
            rows.append(row)
    return rows


def _write_manifest(path, manifest):
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
