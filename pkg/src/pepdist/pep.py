"""Symbolic unrolling in the Gram basis and worst-case bound programs.

Every iterate of a method is an affine combination of the basis columns
(initial offset plus recorded gradients), so points, gradients, metrics,
and interpolation inequalities all become affine forms in the lifted
pair (G, F).  The worst-case bound is the dual program over multipliers
on those forms, solved through the conic IR.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .algorithms import (
    AlgorithmSpec,
    fgm_momentum_strcvx,
    fgm_momentum_sublinear,
    fista_momentum,
)
from .conic import ConicProgram, pack_dim, pack_symmetric
from .lifting import composite_layout, smooth_layout

METRICS = ("fgap", "dist", "gradnorm")
CONDITIONS = ("dist", "fgap", "gradnorm")


@dataclass(frozen=True)
class FunctionClass:
    """Smooth strongly convex band [mu, L]; L may be inf (plain convex)."""
    mu: float = 0.0
    L: float = math.inf

    def __post_init__(self):
        if not (0 <= self.mu < self.L):
            raise ValueError("need 0 <= mu < L (mu = L is rejected)")


CCP = FunctionClass(mu=0.0, L=math.inf)


@dataclass(frozen=True)
class InitialCondition:
    kind: str
    r: float

    def __post_init__(self):
        if self.kind not in CONDITIONS:
            raise ValueError(f"unknown initial condition {self.kind!r}")
        if not self.r > 0:
            raise ValueError("radius must be > 0")


@dataclass(frozen=True)
class AffineForm:
    """<A, G> + b.F + c acting on a lifted sample."""
    A: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def evaluate(self, G, F):
        return float(np.tensordot(self.A, G)) + float(self.b @ F) + self.c


@dataclass
class ComponentTrace:
    """One function component's evaluation points in basis coordinates."""
    points: list          # coefficient vectors, one per evaluation point
    grads: list
    value_idx: list       # position of each point's value gap in F
    star_grad: np.ndarray  # gradient coefficients at the minimizer


@dataclass
class SymbolicTrace:
    spec: AlgorithmSpec
    layout: object
    components: list
    iterates: list        # x^0..x^K in basis coordinates
    metric_point: np.ndarray
    metric: str
    condition: object

    @property
    def n_basis(self):
        return self.layout.n_basis

    @property
    def m_vals(self):
        return self.layout.m_vals


def outer_sym(u, v):
    return (np.outer(u, v) + np.outer(v, u)) / 2.0


def _validate_pairing(spec, metric, condition):
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if spec.composite:
        if metric == "gradnorm":
            raise ValueError("gradnorm metric is undefined for composite runs")
        if condition.kind != "dist":
            raise ValueError("composite runs support the dist initial condition only")


def symbolic_unroll(spec, K=None, metric="fgap", condition=None):
    """Express the run's oracle points as basis coefficient vectors.

    K overrides spec.K when given (K=0 produces the degenerate trace
    whose only point is x^0).  The metric/condition pairing is validated
    here and recorded on the trace.
    """
    if condition is None:
        condition = InitialCondition("dist", 1.0)
    _validate_pairing(spec, metric, condition)
    K = spec.K if K is None else int(K)
    if K < 0:
        raise ValueError("K must be >= 0")
    if K > 0 and K != spec.K:
        spec = replace(spec, K=K)

    if spec.composite:
        if K == 0:
            raise ValueError("composite runs need K >= 1")
        return _unroll_composite(spec, metric, condition)
    return _unroll_smooth(spec, K, metric, condition)


def _unroll_smooth(spec, K, metric, condition):
    layout = smooth_layout(K)
    n = layout.n_basis
    e = np.eye(n)
    eta = spec.step_size

    if K == 0:
        comp = ComponentTrace(points=[e[0]], grads=[e[1]], value_idx=[0],
                              star_grad=np.zeros(n))
        return SymbolicTrace(spec=spec, layout=layout, components=[comp],
                             iterates=[e[0]], metric_point=e[0],
                             metric=metric, condition=condition)

    if spec.method == "FGM-strcvx":
        beta = fgm_momentum_strcvx(spec.q, K)
    elif spec.method == "FGM-k/(k+3)":
        beta = fgm_momentum_sublinear(K)
    else:
        beta = None

    iterates = [e[0]]
    oracle = []
    x = e[0]
    y = e[0]
    for k in range(K):
        z = x if beta is None else y
        oracle.append(z)
        x_new = z - eta * e[1 + k]
        if beta is not None:
            y = x_new + beta[k] * (x_new - x)
        x = x_new
        iterates.append(x)
    oracle.append(x)  # extra oracle point at x^K

    comp = ComponentTrace(points=oracle, grads=[e[1 + k] for k in range(K + 1)],
                          value_idx=list(range(K + 1)), star_grad=np.zeros(n))
    return SymbolicTrace(spec=spec, layout=layout, components=[comp],
                         iterates=iterates, metric_point=x,
                         metric=metric, condition=condition)


def _unroll_composite(spec, metric, condition):
    K = spec.K
    layout = composite_layout(K)
    n = layout.n_basis
    e = np.eye(n)
    eta = spec.step_size
    c_star = 1 + (K + 1)          # gh_star column
    c_sub = c_star + 1            # first l1 subgradient column (at x^1)

    beta = fista_momentum(K) if spec.method == "FISTA" else None

    iterates = [e[0]]
    oracle = []
    x = e[0]
    y = e[0]
    for k in range(K):
        z = x if beta is None else y
        oracle.append(z)
        x_new = z - eta * (e[1 + k] + e[c_sub + k])
        if beta is not None:
            y = x_new + beta[k] * (x_new - x)
        x = x_new
        iterates.append(x)
    oracle.append(x)

    smooth = ComponentTrace(points=oracle,
                            grads=[e[1 + k] for k in range(K + 1)],
                            value_idx=list(range(K + 1)),
                            star_grad=e[c_star])
    l1 = ComponentTrace(points=iterates[1:],
                        grads=[e[c_sub + k] for k in range(K)],
                        value_idx=list(range(K + 1, 2 * K + 1)),
                        star_grad=-e[c_star])
    return SymbolicTrace(spec=spec, layout=layout, components=[smooth, l1],
                         iterates=iterates, metric_point=x,
                         metric=metric, condition=condition)


def interpolation_matrices(fclass, component, m_vals):
    """One affine form per ordered pair of the component's index set.

    The index set is the minimizer followed by the evaluation points;
    each form is the <= 0 rewriting of the pairwise inequality
    characterizing membership in the class.
    """
    mu, L = fclass.mu, fclass.L
    n = component.star_grad.shape[0]
    zero = np.zeros(n)
    pts = [zero] + list(component.points)
    grads = [component.star_grad] + list(component.grads)
    vals = [None] + list(component.value_idx)

    def selector(idx):
        v = np.zeros(m_vals)
        if idx is not None:
            v[idx] = 1.0
        return v

    forms = []
    for i in range(len(pts)):
        for j in range(len(pts)):
            if i == j:
                continue
            dx = pts[i] - pts[j]
            dg = grads[i] - grads[j]
            A = outer_sym(grads[j], dx)
            if math.isinf(L):
                if mu > 0:
                    A = A + 0.5 * mu * outer_sym(dx, dx)
            else:
                fac = 1.0 / (2.0 * (1.0 - mu / L))
                A = A + fac * ((1.0 / L) * outer_sym(dg, dg)
                               + mu * outer_sym(dx, dx)
                               - (2.0 * mu / L) * outer_sym(dg, dx))
            b = selector(vals[j]) - selector(vals[i])
            forms.append(AffineForm(A=A, b=b, c=0.0))
    return forms


def all_interpolation_forms(trace, fclass):
    """Interpolation forms of every component; smooth part uses fclass,
    the l1 part of composite runs uses the plain convex class."""
    forms = interpolation_matrices(fclass, trace.components[0], trace.m_vals)
    for comp in trace.components[1:]:
        forms.extend(interpolation_matrices(CCP, comp, trace.m_vals))
    return forms


def metric_matrices(metric, trace):
    """Affine form whose value on a lifted sample is the metric."""
    n, m = trace.n_basis, trace.m_vals
    if metric == "fgap":
        b = np.zeros(m)
        for comp in trace.components:
            b[comp.value_idx[-1]] = 1.0
        return AffineForm(A=np.zeros((n, n)), b=b, c=0.0)
    if metric == "dist":
        v = trace.metric_point
        return AffineForm(A=np.outer(v, v), b=np.zeros(m), c=0.0)
    if metric == "gradnorm":
        if trace.spec.composite:
            raise ValueError("gradnorm metric is undefined for composite runs")
        w = trace.components[0].grads[-1]
        return AffineForm(A=np.outer(w, w), b=np.zeros(m), c=0.0)
    raise ValueError(f"unknown metric {metric!r}")


def initial_condition_matrices(condition, trace):
    """Affine form (A0, b0, c0) with <=0 encoding the start-state bound."""
    n, m = trace.n_basis, trace.m_vals
    e0 = np.zeros(n)
    e0[0] = 1.0
    if condition.kind == "dist":
        return AffineForm(A=np.outer(e0, e0), b=np.zeros(m), c=-condition.r**2)
    if trace.spec.composite:
        raise ValueError("composite runs support the dist initial condition only")
    if condition.kind == "fgap":
        b = np.zeros(m)
        b[trace.components[0].value_idx[0]] = 1.0
        return AffineForm(A=np.zeros((n, n)), b=b, c=-condition.r)
    g0 = trace.components[0].grads[0]
    return AffineForm(A=np.outer(g0, g0), b=np.zeros(m), c=-condition.r**2)


def worst_case_pep(trace, fclass, condition=None, metric=None,
                   tol=1e-9, return_solution=False):
    """Worst-case bound: smallest certified upper bound on the metric.

    Minimizes -c0 tau over tau >= 0 and interpolation multipliers y >= 0
    subject to sum_m y_m A_m + tau A0 - A_obj PSD and the matching value
    rows summing to zero.
    """
    condition = trace.condition if condition is None else condition
    metric = trace.metric if metric is None else metric
    forms = all_interpolation_forms(trace, fclass)
    obj = metric_matrices(metric, trace)
    init = initial_condition_matrices(condition, trace)
    n, m = trace.n_basis, trace.m_vals

    prog = ConicProgram()
    tau = prog.scalar("tau")
    y = prog.vector("y", len(forms))
    prog.add_cost(tau.index, -init.c)

    npack = pack_dim(n)
    rows = np.arange(npack)
    psd = prog.rows(npack)
    for mi, f in enumerate(forms):
        psd.add(rows, y.indices[mi], pack_symmetric(f.A))
    psd.add(rows, tau.index, pack_symmetric(init.A))
    psd.const[:] = -pack_symmetric(obj.A)
    prog.psd(psd, n)

    eq = prog.rows(m)
    vrows = np.arange(m)
    for mi, f in enumerate(forms):
        eq.add(vrows, y.indices[mi], f.b)
    eq.add(vrows, tau.index, init.b)
    eq.const[:] = -obj.b
    prog.zero(eq)

    pos = prog.rows(1 + len(forms))
    pos.add(0, tau.index, 1.0)
    pos.add(1 + np.arange(len(forms)), y.indices, 1.0)
    prog.nonneg(pos)

    sol = prog.solve_required(tol=tol, retry_tol=10.0 * tol)
    return (sol.objective, sol) if return_solution else sol.objective


def worst_case_pep_primal(trace, fclass, condition=None, metric=None, tol=1e-9):
    """Maximizing side of the worst-case bound over feasible (G, F).

    Returns (value, G, F); the maximizer realizes the bound and is used
    to build degenerate worst-case sample sets in tests and demos.
    """
    condition = trace.condition if condition is None else condition
    metric = trace.metric if metric is None else metric
    forms = all_interpolation_forms(trace, fclass)
    obj = metric_matrices(metric, trace)
    init = initial_condition_matrices(condition, trace)
    n, m = trace.n_basis, trace.m_vals

    prog = ConicProgram()
    G = prog.symmetric("G", n)
    F = prog.vector("F", m)
    prog.add_cost(G.indices, -pack_symmetric(obj.A))
    prog.add_cost(F.indices, -obj.b)

    for f in forms + [init]:
        blk = prog.rows(1)
        blk.add(0, G.indices, -pack_symmetric(f.A))
        blk.add(0, F.indices, -f.b)
        blk.const[0] = -f.c
        prog.nonneg(blk)

    psd = prog.rows(pack_dim(n))
    psd.add(np.arange(pack_dim(n)), G.indices, 1.0)
    prog.psd(psd, n)

    sol = prog.solve_required(tol=tol, retry_tol=10.0 * tol)
    return -sol.objective, sol.primal["G"], sol.primal["F"]
