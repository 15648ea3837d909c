"""Symbolic traces, interpolation forms, worst-case bounds."""

import math

import numpy as np
import pytest

from pepdist.algorithms import AlgorithmSpec, metric_value, run
from pepdist.instances import (
    make_lasso_dictionary,
    sample_lasso,
    sample_logistic,
    sample_mp_quadratic,
)
from pepdist.lifting import lift
from pepdist.pep import (
    CCP,
    AffineForm,
    FunctionClass,
    InitialCondition,
    all_interpolation_forms,
    initial_condition_matrices,
    interpolation_matrices,
    metric_matrices,
    symbolic_unroll,
    worst_case_pep,
    worst_case_pep_primal,
)


def test_function_class_validation():
    FunctionClass(0.0, 1.0)
    FunctionClass(0.0, math.inf)
    with pytest.raises(ValueError):
        FunctionClass(1.0, 1.0)
    with pytest.raises(ValueError):
        FunctionClass(2.0, 1.0)


def test_initial_condition_validation():
    with pytest.raises(ValueError):
        InitialCondition("dist", 0.0)
    with pytest.raises(ValueError):
        InitialCondition("nope", 1.0)


def test_gd_unroll_coefficients():
    spec = AlgorithmSpec("GD", 0.25, 1)
    tr = symbolic_unroll(spec, metric="fgap", condition=InitialCondition("dist", 1.0))
    assert tr.n_basis == 3 and tr.m_vals == 2
    # x^1 = (x^0 - x*) - eta g^0 in basis (dx0, g0, g1)
    assert np.allclose(tr.metric_point, [1.0, -0.25, 0.0], atol=0)
    comp = tr.components[0]
    assert np.allclose(comp.points[0], [1, 0, 0], atol=0)
    assert np.allclose(comp.points[1], tr.metric_point, atol=0)
    assert np.allclose(comp.grads[0], [0, 1, 0], atol=0)
    assert np.allclose(comp.grads[1], [0, 0, 1], atol=0)


def test_fgm_unroll_matches_numeric_recursion():
    q = 0.04
    spec = AlgorithmSpec("FGM-strcvx", 1.0 / 25.0, 4, q=q)
    tr = symbolic_unroll(spec, metric="dist", condition=InitialCondition("dist", 1.0))
    # replay the recursion on coefficient vectors independently
    from pepdist.algorithms import fgm_momentum_strcvx
    beta = fgm_momentum_strcvx(q, 4)
    n = tr.n_basis
    e = np.eye(n)
    x, y = e[0], e[0]
    for k in range(4):
        assert np.allclose(tr.components[0].points[k], y, atol=1e-14)
        x_new = y - spec.step_size * e[1 + k]
        y = x_new + beta[k] * (x_new - x)
        x = x_new
    assert np.allclose(tr.metric_point, x, atol=1e-14)


def test_unroll_k_zero():
    spec = AlgorithmSpec("GD", 0.5, 3)
    tr = symbolic_unroll(spec, K=0, metric="dist",
                         condition=InitialCondition("dist", 1.0))
    assert tr.n_basis == 2 and tr.m_vals == 1
    assert np.allclose(tr.metric_point, [1.0, 0.0], atol=0)
    assert len(tr.components[0].points) == 1


def test_unroll_pairing_validation():
    ista = AlgorithmSpec("ISTA", 0.1, 2)
    with pytest.raises(ValueError):
        symbolic_unroll(ista, metric="gradnorm",
                        condition=InitialCondition("dist", 1.0))
    with pytest.raises(ValueError):
        symbolic_unroll(ista, metric="fgap",
                        condition=InitialCondition("fgap", 1.0))
    with pytest.raises(ValueError):
        symbolic_unroll(ista, K=0, metric="fgap",
                        condition=InitialCondition("dist", 1.0))


def test_interpolation_form_count_and_symmetry():
    spec = AlgorithmSpec("GD", 0.5, 3)
    tr = symbolic_unroll(spec, metric="fgap", condition=InitialCondition("dist", 1.0))
    forms = all_interpolation_forms(tr, FunctionClass(0.0, 1.0))
    K = 3
    assert len(forms) == (K + 2) * (K + 1)
    for f in forms:
        assert np.allclose(f.A, f.A.T, atol=0)
        assert f.c == 0.0
    # both orientations: b vectors come in +/- pairs
    bs = {tuple(f.b) for f in forms}
    for f in forms:
        assert tuple(-f.b) in bs


def _direct_interp_value(fclass, xi, gi, fi, xj, gj, fj):
    # the <= 0 inequality evaluated on raw vectors, written independently
    mu, L = fclass.mu, fclass.L
    dx = xi - xj
    dg = gi - gj
    val = fj - fi + gj @ dx
    if math.isinf(L):
        val += 0.5 * mu * (dx @ dx)
    else:
        fac = 1.0 / (2.0 * (1.0 - mu / L))
        val += fac * ((dg @ dg) / L + mu * (dx @ dx) - (2.0 * mu / L) * (dg @ dx))
    return val


@pytest.mark.parametrize("mu,L", [(0.0, 25.0), (1.0, 25.0)])
def test_forms_encode_pairwise_inequality_exactly(mu, L):
    # symbolic evaluation on a lifted run == direct vector arithmetic
    fclass = FunctionClass(mu, L)
    q = sample_mp_quadratic(mu, L, 30, seed=3)
    rng = np.random.default_rng(0)
    x0 = rng.normal(size=q.dim)
    spec = AlgorithmSpec("GD", 1.0 / L, 3, )
    traj = run(spec, q, x0)
    s = lift(traj)
    tr = symbolic_unroll(spec, metric="fgap", condition=InitialCondition("dist", 1.0))
    comp = tr.components[0]
    forms = interpolation_matrices(fclass, comp, tr.m_vals)

    # index set [star, z_0..z_K] with raw data from the trajectory
    xs = [traj.reference.x_star] + traj.points
    gs = [np.zeros(q.dim)] + traj.grads
    fs = [traj.reference.f_star] + traj.values
    scale = max(1.0, max(abs(v) for v in fs))
    idx = 0
    for i in range(len(xs)):
        for j in range(len(xs)):
            if i == j:
                continue
            direct = _direct_interp_value(fclass, xs[i], gs[i], fs[i],
                                          xs[j], gs[j], fs[j])
            symbolic = forms[idx].evaluate(s.G, s.F)
            assert abs(direct - symbolic) < 1e-9 * scale
            assert symbolic <= 1e-7
            idx += 1


def test_mu0_forms_reduce_to_smooth_convex_shape():
    # at mu=0 the quadratic part is only the (1/2L) gradient-difference term
    spec = AlgorithmSpec("GD", 1.0, 1)
    tr = symbolic_unroll(spec, metric="fgap", condition=InitialCondition("dist", 1.0))
    comp = tr.components[0]
    L = 4.0
    forms = interpolation_matrices(FunctionClass(0.0, L), comp, tr.m_vals)
    ccp = interpolation_matrices(CCP, comp, tr.m_vals)
    pts = [np.zeros(3)] + list(comp.points)
    grads = [np.zeros(3)] + list(comp.grads)
    k = 0
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            dg = grads[i] - grads[j]
            extra = (np.outer(dg, dg)) / (2.0 * L)
            assert np.allclose(forms[k].A, ccp[k].A + extra, atol=1e-14)
            assert np.array_equal(forms[k].b, ccp[k].b)
            k += 1


def test_lifted_runs_satisfy_forms_all_families():
    rng = np.random.default_rng(42)
    cases = []
    for seed in range(4):
        q = sample_mp_quadratic(0.0, 1.0, 25, seed=seed)
        x0 = rng.normal(size=q.dim)
        cases.append((AlgorithmSpec("GD", 1.0, 3), q, x0, FunctionClass(0.0, 1.0)))
    li = sample_logistic(n=60, d=8, p=0.5, sigma_A=1.0, xtilde_max=1.0,
                         lambda_reg=0.05, seed=1)
    cases.append((AlgorithmSpec("FGM-strcvx", 1.0 / li.L, 3, q=li.mu / li.L),
                  li, rng.normal(size=li.dim), FunctionClass(li.mu, li.L)))
    A = make_lasso_dictionary(30, 45, density=0.4, seed=2)
    la = sample_lasso(A, p=0.3, sigma_eps=1e-3, lambda_reg=0.1, seed=3)
    cases.append((AlgorithmSpec("FISTA", 1.0 / la.L, 3), la,
                  rng.normal(size=la.dim), FunctionClass(0.0, la.L)))

    for spec, instance, x0, fclass in cases:
        traj = run(spec, instance, x0)
        s = lift(traj)
        tr = symbolic_unroll(spec, metric="dist" if spec.composite else "fgap",
                             condition=InitialCondition("dist", 1.0))
        scale = max(1.0, np.abs(s.F).max(), np.abs(np.diag(s.G)).max())
        for f in all_interpolation_forms(tr, fclass):
            assert f.evaluate(s.G, s.F) <= 1e-7 * scale
        assert np.linalg.eigvalsh(s.G)[0] >= -1e-9 * scale


def test_metric_forms_match_direct_values():
    rng = np.random.default_rng(7)
    q = sample_mp_quadratic(1.0, 25.0, 30, seed=5)
    x0 = rng.normal(size=q.dim)
    for method, qq in (("GD", None), ("FGM-strcvx", 1.0 / 25.0)):
        spec = AlgorithmSpec(method, 1.0 / 25.0, 4, q=qq)
        traj = run(spec, q, x0)
        s = lift(traj)
        tr = symbolic_unroll(spec, metric="fgap",
                             condition=InitialCondition("dist", 1.0))
        for metric in ("fgap", "dist", "gradnorm"):
            form = metric_matrices(metric, tr)
            direct = metric_value(traj, metric)
            got = form.evaluate(s.G, s.F)
            assert abs(got - direct) <= 1e-8 * max(1.0, abs(direct))


def test_metric_forms_composite():
    A = make_lasso_dictionary(30, 45, density=0.4, seed=4)
    la = sample_lasso(A, p=0.3, sigma_eps=1e-3, lambda_reg=0.1, seed=5)
    rng = np.random.default_rng(8)
    x0 = rng.normal(size=la.dim)
    spec = AlgorithmSpec("ISTA", 1.0 / la.L, 3)
    traj = run(spec, la, x0)
    s = lift(traj)
    tr = symbolic_unroll(spec, metric="fgap", condition=InitialCondition("dist", 1.0))
    for metric in ("fgap", "dist"):
        form = metric_matrices(metric, tr)
        direct = metric_value(traj, metric)
        assert abs(form.evaluate(s.G, s.F) - direct) <= 1e-8 * max(1.0, abs(direct))
    with pytest.raises(ValueError):
        metric_matrices("gradnorm", tr)


def test_initial_condition_forms():
    spec = AlgorithmSpec("GD", 0.5, 2)
    tr = symbolic_unroll(spec, metric="fgap", condition=InitialCondition("dist", 1.0))
    f = initial_condition_matrices(InitialCondition("dist", 10.0), tr)
    assert f.c == -100.0
    A = np.zeros((4, 4))
    A[0, 0] = 1.0
    assert np.array_equal(f.A, A)
    f = initial_condition_matrices(InitialCondition("fgap", 2.0), tr)
    assert f.c == -2.0
    assert f.b[0] == 1.0 and np.all(f.b[1:] == 0.0)
    f = initial_condition_matrices(InitialCondition("gradnorm", 3.0), tr)
    assert f.c == -9.0
    assert f.A[1, 1] == 1.0 and np.sum(np.abs(f.A)) == 1.0


def test_worst_case_gd_known_values():
    # smooth convex GD with eta = 1/L: L r^2 / (2(2K eta L + 1)) at eta=1/L
    spec1 = AlgorithmSpec("GD", 1.0, 1)
    cond = InitialCondition("dist", 1.0)
    fc = FunctionClass(0.0, 1.0)
    for K, expect in ((1, 1.0 / 6.0), (2, 1.0 / 10.0), (5, 1.0 / 22.0)):
        tr = symbolic_unroll(spec1, K=K, metric="fgap", condition=cond)
        val = worst_case_pep(tr, fc)
        assert abs(val - expect) <= 1e-5 * expect


def test_worst_case_gd_large_step():
    cond = InitialCondition("dist", 1.0)
    fc = FunctionClass(0.0, 1.0)
    spec = AlgorithmSpec("GD", 1.5, 1)
    for K, expect in ((1, 0.125), (5, 0.03125)):
        tr = symbolic_unroll(spec, K=K, metric="fgap", condition=cond)
        val = worst_case_pep(tr, fc)
        assert abs(val - expect) <= 1e-5 * expect


def test_worst_case_k0_values():
    cond = InitialCondition("dist", 1.0)
    spec = AlgorithmSpec("GD", 1.0, 1)
    tr = symbolic_unroll(spec, K=0, metric="fgap", condition=cond)
    # f(x0) - f* <= (L/2) ||x0 - x*||^2
    val = worst_case_pep(tr, FunctionClass(0.0, 1.0))
    assert abs(val - 0.5) <= 1e-6
    tr = symbolic_unroll(spec, K=0, metric="dist", condition=cond)
    val = worst_case_pep(tr, FunctionClass(0.0, 1.0))
    assert abs(val - 1.0) <= 1e-6


def test_worst_case_monotone_in_k():
    spec = AlgorithmSpec("GD", 1.0 / 25.0, 1)
    cond = InitialCondition("dist", 1.0)
    fc = FunctionClass(0.0, 25.0)
    vals = []
    for K in range(1, 6):
        tr = symbolic_unroll(spec, K=K, metric="fgap", condition=cond)
        vals.append(worst_case_pep(tr, fc))
    assert all(b <= a + 1e-8 for a, b in zip(vals, vals[1:]))


def test_worst_case_dist_constant_when_not_strongly_convex():
    spec = AlgorithmSpec("GD", 1.0 / 25.0, 1)
    cond = InitialCondition("dist", 1.0)
    fc = FunctionClass(0.0, 25.0)
    for K in (1, 2, 3):
        tr = symbolic_unroll(spec, K=K, metric="dist", condition=cond)
        assert abs(worst_case_pep(tr, fc) - 1.0) <= 1e-4


def test_worst_case_fgm_strongly_convex_contracts():
    q = 1.0 / 25.0
    spec = AlgorithmSpec("FGM-strcvx", 1.0 / 25.0, 8, q=q)
    cond = InitialCondition("dist", 1.0)
    fc = FunctionClass(1.0, 25.0)
    tr8 = symbolic_unroll(spec, K=8, metric="dist", condition=cond)
    tr9 = symbolic_unroll(spec, K=9, metric="dist", condition=cond)
    v8 = worst_case_pep(tr8, fc)
    v9 = worst_case_pep(tr9, fc)
    assert 0.62 <= v9 / v8 <= 0.9


def test_primal_matches_dual_and_is_feasible():
    spec = AlgorithmSpec("GD", 1.0, 1)
    cond = InitialCondition("dist", 1.0)
    fc = FunctionClass(0.0, 1.0)
    tr = symbolic_unroll(spec, K=2, metric="fgap", condition=cond)
    dual = worst_case_pep(tr, fc)
    primal, G, F = worst_case_pep_primal(tr, fc)
    assert abs(primal - dual) <= 1e-5 * max(1.0, abs(dual))
    assert np.linalg.eigvalsh(G)[0] >= -1e-7
    for f in all_interpolation_forms(tr, fc):
        assert f.evaluate(G, F) <= 1e-6
    init = initial_condition_matrices(cond, tr)
    assert init.evaluate(G, F) <= 1e-6


def test_composite_worst_case_matches_known_fista_shape():
    # ISTA/FISTA dual PEP should be finite and below the smooth-only bound scale
    spec = AlgorithmSpec("ISTA", 1.0, 2)
    cond = InitialCondition("dist", 1.0)
    tr = symbolic_unroll(spec, metric="fgap", condition=cond)
    val = worst_case_pep(tr, FunctionClass(0.0, 1.0))
    # classical proximal-gradient guarantee: L r^2 / (2 ... ) scale
    assert 0.0 < val <= 0.5
    spec_f = AlgorithmSpec("FISTA", 1.0, 2)
    tr_f = symbolic_unroll(spec_f, metric="fgap", condition=cond)
    val_f = worst_case_pep(tr_f, FunctionClass(0.0, 1.0))
    assert 0.0 < val_f <= val + 1e-8


def test_affine_form_evaluate():
    f = AffineForm(A=np.array([[1.0, 0.5], [0.5, 2.0]]),
                   b=np.array([3.0]), c=-1.0)
    G = np.array([[2.0, 1.0], [1.0, 4.0]])
    F = np.array([0.5])
    assert abs(f.evaluate(G, F) - (2 + 0.5 + 0.5 + 8 + 1.5 - 1)) < 1e-14
