"""Robust bound programs over an empirical set of lifted runs.

Given N lifted samples and the affine forms of a symbolic trace, the
programs here certify an upper bound on the mean or tail risk of the
metric over every distribution within a transport-cost radius of the
empirical one.  Each sample contributes a block of multipliers tied to
the others only through the shared radius multiplier (and, for the tail
form, the shared quantile threshold); the dual-norm constraint on each
block is one second-order-cone row on rescaled packed entries.

At radius zero the value collapses to the in-sample mean or tail
average; as the radius grows the value increases monotonically toward
the worst-case bound.  The certified bound is meaningful when every
sample satisfies the initial condition attached to the trace.
"""

from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProgram, pack_dim, pack_symmetric, packed_positions
from .lifting import identity_preconditioner, scaled_norm
from .pep import (
    AffineForm,
    all_interpolation_forms,
    initial_condition_matrices,
    metric_matrices,
)

RISK_FORMS = ("expectation", "cvar")


@dataclass(frozen=True)
class DroSpec:
    """One robust-bound problem: samples, forms, radius, risk functional."""

    samples: tuple
    interpolation: tuple
    initial: AffineForm
    objective: AffineForm
    epsilon: float
    form: str = "expectation"
    alpha: float = 1.0
    scaling: object = None

    def __post_init__(self):
        if len(self.samples) < 1:
            raise ValueError("need at least one sample")
        if self.epsilon < 0:
            raise ValueError("radius must be nonnegative")
        if self.form not in RISK_FORMS:
            raise ValueError(f"unknown risk form {self.form!r}")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "interpolation", tuple(self.interpolation))
        n, m = self.n_basis, self.m_vals
        layout = self.samples[0].layout
        for s in self.samples:
            if s.layout != layout:
                raise ValueError("samples mix layouts")
        if layout.n_basis != n or layout.m_vals != m:
            raise ValueError("sample layout does not match the forms")
        if self.initial.A.shape != (n, n) or self.objective.A.shape != (n, n):
            raise ValueError("form matrix sizes disagree")
        scaling = self.scaling
        if scaling is None:
            scaling = identity_preconditioner(layout)
            object.__setattr__(self, "scaling", scaling)
        if scaling.d_g.shape != (n,) or scaling.d_f.shape != (m,):
            raise ValueError("scaling dimensions do not match the layout")

    @property
    def n_basis(self):
        return self.interpolation[0].A.shape[0]

    @property
    def m_vals(self):
        return self.interpolation[0].b.shape[0]

    @property
    def n_samples(self):
        return len(self.samples)

    @property
    def n_blocks(self):
        """Multiplier blocks per sample: one for the mean, two for cvar."""
        return 1 if self.form == "expectation" else 2

    @classmethod
    def from_trace(cls, samples, trace, fclass, epsilon, form="expectation",
                   alpha=1.0, scaling=None, condition=None, metric=None):
        condition = trace.condition if condition is None else condition
        metric = trace.metric if metric is None else metric
        if condition is None:
            raise ValueError("trace carries no initial condition")
        return cls(
            samples=tuple(samples),
            interpolation=tuple(all_interpolation_forms(trace, fclass)),
            initial=initial_condition_matrices(condition, trace),
            objective=metric_matrices(metric, trace),
            epsilon=epsilon,
            form=form,
            alpha=alpha,
            scaling=scaling,
        )


@dataclass
class DroSolution:
    """Optimal value plus the per-block multipliers, for diagnostics."""

    objective: float
    lam: float
    s: np.ndarray
    t: float
    tau: np.ndarray           # (N, J)
    y: list                   # y[i][j], each of length |M|
    X: list                   # X[i][j], symmetric n_basis matrices
    Y: list                   # Y[i][j], length m_vals
    status: str
    solve_time: float
    iterations: int
    spec: DroSpec = field(repr=False, default=None)


def adjoint_S(y, interpolation):
    """Negative y-weighted sum of the interpolation forms."""
    y = np.asarray(y, dtype=float)
    if y.shape != (len(interpolation),):
        raise ValueError("multiplier length does not match the form count")
    n = interpolation[0].A.shape[0]
    m = interpolation[0].b.shape[0]
    A = np.zeros((n, n))
    b = np.zeros(m)
    for w, f in zip(y, interpolation):
        A -= w * f.A
        b -= w * f.b
    return A, b


def dual_norm_weights(scaling):
    """Entrywise weights making the dual scaled norm a plain 2-norm.

    Returns (w_G, w_F) such that the Euclidean norm of
    (w_G * pack(X), w_F * Y) equals the norm of
    (D_G^{-1/2} X D_G^{-1/2}, D_F^{-1} Y).
    """
    n = scaling.d_g.shape[0]
    rows, cols = packed_positions(n)
    w_g = 1.0 / np.sqrt(scaling.d_g[rows] * scaling.d_g[cols])
    w_f = 1.0 / scaling.d_f
    return w_g, w_f


def _objective_blocks(spec):
    """(A_obj, b_obj, c_obj) per block j of the chosen risk functional."""
    obj = spec.objective
    if spec.form == "expectation":
        return [(obj.A, obj.b, 0.0)]
    ainv = 1.0 / spec.alpha
    zero = (np.zeros_like(obj.A), np.zeros_like(obj.b), 1.0)
    return [(ainv * obj.A, ainv * obj.b, 1.0 - ainv), zero]


def build_dro(spec):
    """Assemble the bound program for either risk form.

    Layout per sample i and block j: multiplier tau_ij on the initial
    condition, a vector y_ij over the interpolation forms, a symmetric
    slack X_ij and vector slack Y_ij whose scaled dual norm is capped by
    the shared radius multiplier.  The objective averages the per-sample
    epigraph variables s_i.
    """
    forms = spec.interpolation
    init = spec.initial
    n, m = spec.n_basis, spec.m_vals
    N, J = spec.n_samples, spec.n_blocks
    npack = pack_dim(n)
    M = len(forms)

    S_pack = np.column_stack([pack_symmetric(f.A) for f in forms])
    B = np.column_stack([f.b for f in forms])
    sp_rows, sp_cols = np.nonzero(S_pack)
    sp_vals = S_pack[sp_rows, sp_cols]
    b_rows, b_cols = np.nonzero(B)
    b_vals = B[b_rows, b_cols]
    p_init = pack_symmetric(init.A)
    pi_nz = np.nonzero(p_init)[0]
    bi_nz = np.nonzero(init.b)[0]
    blocks = _objective_blocks(spec)
    packed_obj = [pack_symmetric(A) for A, _, _ in blocks]
    w_g, w_f = dual_norm_weights(spec.scaling)
    packed_hats = [pack_symmetric(s.G) for s in spec.samples]

    prog = ConicProgram()
    lam = prog.scalar("lam")
    s = prog.vector("s", N)
    t = prog.scalar("t") if spec.form == "cvar" else None
    tau = [[prog.scalar(f"tau_{i}_{j}") for j in range(J)] for i in range(N)]
    y = [[prog.vector(f"y_{i}_{j}", M) for j in range(J)] for i in range(N)]
    X = [[prog.symmetric(f"X_{i}_{j}", n) for j in range(J)] for i in range(N)]
    Y = [[prog.vector(f"Y_{i}_{j}", m) for j in range(J)] for i in range(N)]

    prog.add_cost(s.indices, np.full(N, 1.0 / N))

    nonneg = prog.rows(1 + N * J * (1 + M))
    nonneg.add(0, lam.index, 1.0)
    pos = 1

    for i in range(N):
        for j in range(J):
            A_obj, b_obj, c_obj = blocks[j]

            # matrix part: sum_m y_m A_m - X + tau A0 - A_obj is PSD
            psd = prog.rows(npack)
            psd.add(sp_rows, y[i][j].indices[sp_cols], sp_vals)
            psd.add(np.arange(npack), X[i][j].indices, -1.0)
            if pi_nz.size:
                psd.add(pi_nz, tau[i][j].index, p_init[pi_nz])
            psd.const[:] = -packed_obj[j]
            prog.psd(psd, n)

            # vector part pinned to zero
            eq = prog.rows(m)
            eq.add(b_rows, y[i][j].indices[b_cols], b_vals)
            eq.add(np.arange(m), Y[i][j].indices, -1.0)
            if bi_nz.size:
                eq.add(bi_nz, tau[i][j].index, init.b[bi_nz])
            eq.const[:] = -b_obj
            prog.zero(eq)

            # epigraph row: s_i covers the block value at this sample
            row = prog.rows(1)
            row.add(0, s.indices[i], 1.0)
            row.add(0, tau[i][j].index, init.c)
            row.add(0, X[i][j].indices, packed_hats[i])
            row.add(0, Y[i][j].indices, spec.samples[i].F)
            row.add(0, lam.index, -spec.epsilon)
            if t is not None and c_obj != 0.0:
                row.add(0, t.index, -c_obj)
            prog.nonneg(row)

            # scaled dual norm of (X, Y) capped by lam
            soc = prog.rows(1 + npack + m)
            soc.add(0, lam.index, 1.0)
            soc.add(1 + np.arange(npack), X[i][j].indices, w_g)
            soc.add(1 + npack + np.arange(m), Y[i][j].indices, w_f)
            prog.soc(soc)

            nonneg.add(pos, tau[i][j].index, 1.0)
            nonneg.add(pos + 1 + np.arange(M), y[i][j].indices, 1.0)
            pos += 1 + M
    prog.nonneg(nonneg)
    return prog


def build_dro_expectation(spec):
    if spec.form != "expectation":
        raise ValueError("spec is not an expectation problem")
    return build_dro(spec)


def build_dro_cvar(spec):
    if spec.form != "cvar":
        raise ValueError("spec is not a cvar problem")
    return build_dro(spec)


def solve_dro(spec, tol=1e-8, threads=1, verbose=False):
    """Build, solve, and unpack one robust bound problem."""
    prog = build_dro(spec)
    sol = prog.solve_required(tol=tol, retry_tol=100.0 * tol,
                              threads=threads, verbose=verbose)
    N, J = spec.n_samples, spec.n_blocks
    tau = np.array([[sol.primal[f"tau_{i}_{j}"] for j in range(J)]
                    for i in range(N)])
    return DroSolution(
        objective=sol.objective,
        lam=sol.primal["lam"],
        s=np.asarray(sol.primal["s"]).reshape(N),
        t=sol.primal["t"] if spec.form == "cvar" else None,
        tau=tau,
        y=[[sol.primal[f"y_{i}_{j}"] for j in range(J)] for i in range(N)],
        X=[[sol.primal[f"X_{i}_{j}"] for j in range(J)] for i in range(N)],
        Y=[[sol.primal[f"Y_{i}_{j}"] for j in range(J)] for i in range(N)],
        status=sol.status,
        solve_time=sol.solve_time,
        iterations=sol.iterations,
        spec=spec,
    )


def in_sample_values(spec):
    """Metric value of each sample under the objective form."""
    return np.array([spec.objective.evaluate(s.G, s.F) for s in spec.samples])


def sample_scaled_distance(spec, G, F, i):
    """Scaled transport cost from sample i to the pair (G, F)."""
    s = spec.samples[i]
    return scaled_norm(G - s.G, F - s.F, spec.scaling)
