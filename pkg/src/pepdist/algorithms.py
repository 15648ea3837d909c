"""First-order method execution with oracle-call bookkeeping.

Runs GD, two fast-gradient variants, ISTA, and FISTA on sampled
instances and records the exact points where the gradient oracle was
called, plus one extra call at the final iterate, so every run exposes
K+2 basis directions.  Composite runs additionally record the implicit
l1 subgradient defined by each prox step.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .instances import LassoInstance, Reference, reference_solution, soft_threshold

SMOOTH_METHODS = ("GD", "FGM-strcvx", "FGM-k/(k+3)")
COMPOSITE_METHODS = ("ISTA", "FISTA")
METHODS = SMOOTH_METHODS + COMPOSITE_METHODS


class DivergenceError(Exception):
    """An iterate became non-finite."""

    def __init__(self, iteration):
        self.iteration = iteration
        super().__init__(f"non-finite iterate at iteration {iteration}")


@dataclass(frozen=True)
class AlgorithmSpec:
    """What to run: method name, step size, horizon, momentum parameter.

    q = mu/L drives the strongly-convex momentum recursion and must be
    given for FGM-strcvx only.  composite is derived from the method when
    left as None.
    """
    method: str
    step_size: float
    K: int
    composite: bool = None
    q: float = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        is_comp = self.method in COMPOSITE_METHODS
        if self.composite is None:
            object.__setattr__(self, "composite", is_comp)
        elif self.composite != is_comp:
            raise ValueError(f"{self.method} requires composite={is_comp}")
        if self.method == "FGM-strcvx":
            if self.q is None or not (0 <= self.q < 1):
                raise ValueError("FGM-strcvx needs q = mu/L in [0, 1)")
        elif self.q is not None:
            raise ValueError("q is only meaningful for FGM-strcvx")


@dataclass
class Trajectory:
    """Oracle record of one run.

    points[k] is the k-th oracle point (x^k for GD/ISTA, y^k for the
    momentum methods, and always x^K last), grads/values the smooth
    oracle answers there.  iterates is the main sequence x^0..x^K.  For
    composite runs l1_subgrads[k] is the prox-implied subgradient at
    x^{k+1}, normalized to lie in the unit-l1-ball subdifferential, and
    l1_values[k] the l1 component value at x^{k+1}.
    """
    spec: AlgorithmSpec
    instance: object
    reference: Reference
    x0: np.ndarray
    points: list
    grads: list
    values: list
    iterates: list
    l1_subgrads: list = field(default_factory=list)
    l1_values: list = field(default_factory=list)
    h_star: float = 0.0
    r_star: float = 0.0
    gh_star: np.ndarray = None

    @property
    def final(self):
        return self.iterates[-1]


def fgm_momentum_strcvx(q, k_max):
    """Momentum for the strongly convex fast gradient method.

    alpha_0 = 0, alpha_1 = 1/(1-q); each next alpha is the larger root of
    (a' - a)^2 = a' + q a'^2, and beta_k follows the closed rational form.
    """
    if not (0 <= q < 1):
        raise ValueError("q must lie in [0, 1)")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    alpha = np.empty(k_max + 2)
    alpha[0] = 0.0
    alpha[1] = 1.0 / (1.0 - q)
    for k in range(k_max):
        a = alpha[k + 1]
        disc = (2 * a + 1) ** 2 - 4 * (1 - q) * a * a
        alpha[k + 2] = ((2 * a + 1) + math.sqrt(disc)) / (2 * (1 - q))
    beta = np.empty(k_max)
    for k in range(k_max):
        a0, a1, a2 = alpha[k], alpha[k + 1], alpha[k + 2]
        num = (a2 - a1) * (a1 * (1 - q) - a0 - 1)
        den = a2 * (2 * q * a1 + 1) - q * a1 * a1
        beta[k] = num / den
    return beta


def fgm_momentum_sublinear(k_max):
    """beta_k = k/(k+3)."""
    k = np.arange(k_max, dtype=float)
    return k / (k + 3)


def fista_momentum(k_max):
    """beta_k = (alpha_k - 1)/alpha_{k+1} with alpha_{k+1} = (1+sqrt(1+4a^2))/2."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    beta = np.empty(k_max)
    alpha = 1.0
    for k in range(k_max):
        alpha_next = (1.0 + math.sqrt(1.0 + 4.0 * alpha * alpha)) / 2.0
        beta[k] = (alpha - 1.0) / alpha_next
        alpha = alpha_next
    return beta


def _check_finite(x, k):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(k)


def run(spec, instance, x0, reference=None):
    """Execute the method and record oracle calls; see Trajectory."""
    x0 = np.asarray(x0, dtype=float)
    dim = instance.dim
    if x0.shape != (dim,):
        raise ValueError(f"x0 has shape {x0.shape}, instance dimension is {dim}")
    eta, K = spec.step_size, spec.K
    L = instance.L
    if spec.method == "GD":
        if not eta < 2.0 / L:
            raise ValueError("GD needs step_size < 2/L")
    elif not eta <= 1.0 / L * (1 + 1e-12):
        raise ValueError(f"{spec.method} needs step_size <= 1/L")
    if spec.composite != isinstance(instance, LassoInstance):
        raise ValueError("composite methods run on Lasso instances only, "
                         "smooth methods on smooth instances only")
    if reference is None:
        reference = reference_solution(instance)

    if spec.composite:
        value, grad = instance.smooth_value, instance.smooth_grad
    else:
        value, grad = instance.value, instance.grad

    if spec.method == "FGM-strcvx":
        beta = fgm_momentum_strcvx(spec.q, K)
    elif spec.method == "FGM-k/(k+3)":
        beta = fgm_momentum_sublinear(K)
    elif spec.method == "FISTA":
        beta = fista_momentum(K)
    else:
        beta = None

    lam = instance.lambda_reg if spec.composite else 0.0
    delta = lam * eta

    points, grads, values, iterates = [], [], [], [x0.copy()]
    l1_subgrads, l1_values = [], []
    x = x0.copy()
    y = x0.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K):
            z = x if spec.method in ("GD", "ISTA") else y
            g = grad(z)
            points.append(z.copy())
            grads.append(g)
            values.append(value(z))
            if spec.composite:
                v = z - eta * g
                x_new = soft_threshold(v, delta)
                l1_subgrads.append((v - x_new) / (eta * lam))
                l1_values.append(lam * float(np.abs(x_new).sum()))
            else:
                x_new = z - eta * g
            _check_finite(x_new, k + 1)
            if beta is not None:
                y = x_new + beta[k] * (x_new - x)
            x = x_new
            iterates.append(x.copy())

        # extra oracle call at the metric point x^K
        points.append(x.copy())
        grads.append(grad(x))
        values.append(value(x))

    traj = Trajectory(
        spec=spec, instance=instance, reference=reference, x0=x0.copy(),
        points=points, grads=grads, values=values, iterates=iterates,
        l1_subgrads=l1_subgrads, l1_values=l1_values,
    )
    if spec.composite:
        xs = reference.x_star
        traj.h_star = instance.smooth_value(xs)
        traj.r_star = lam * float(np.abs(xs).sum())
        traj.gh_star = instance.smooth_grad(xs)
    return traj


def metric_value(traj, metric):
    """Evaluate a performance metric at the final iterate.

    fgap: full objective gap; dist: squared distance to the reference
    minimizer; gradnorm: squared gradient norm (smooth runs only).
    """
    xK = traj.final
    ref = traj.reference
    if metric == "fgap":
        return float(traj.instance.value(xK) - ref.f_star)
    if metric == "dist":
        d = xK - ref.x_star
        return float(d @ d)
    if metric == "gradnorm":
        if traj.spec.composite:
            raise ValueError("gradnorm metric is undefined for composite runs")
        g = traj.grads[-1]
        return float(g @ g)
    raise ValueError(f"unknown metric {metric!r}")


def dump_trajectory(traj, path):
    """One JSON line per oracle point, for eyeballing runs."""
    with open(path, "w") as fh:
        for k, (p, g, v) in enumerate(zip(traj.points, traj.grads, traj.values)):
            rec = {"k": k, "point": p.tolist(), "grad": g.tolist(), "value": v}
            if traj.spec.composite and 1 <= k <= len(traj.l1_subgrads):
                rec["l1_subgrad"] = traj.l1_subgrads[k - 1].tolist()
                rec["l1_value"] = traj.l1_values[k - 1]
            fh.write(json.dumps(rec) + "\n")
