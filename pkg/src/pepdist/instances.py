"""Problem-instance sampling and high-accuracy reference solutions.

Three instance families: random quadratics with spectrum controlled by a
Marchenko-Pastur law, l2-regularized logistic regression with a latent
threshold label model, and Lasso over a shared sparse dictionary.  Each
instance evaluates its objective and gradient (smooth part only for
Lasso) and can produce a reference minimizer accurate enough that
reference error is negligible next to conic-solver tolerance.
"""

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit


class SamplingError(Exception):
    """Rejection budget exhausted while drawing an instance."""


class ReferenceAccuracyError(Exception):
    """Reference solve stopped before reaching the requested tolerance."""


def hash64(*parts):
    """Deterministic 64-bit hash of a tuple of ints (for seed derivation)."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(int(p).to_bytes(8, "little", signed=False))
    return int.from_bytes(h.digest(), "little")


# -- instance types --------------------------------------------------------


@dataclass(frozen=True)
class QuadraticInstance:
    Q: np.ndarray
    mu: float
    L: float

    @property
    def dim(self):
        return self.Q.shape[0]

    def value(self, x):
        return 0.5 * float(x @ (self.Q @ x))

    def grad(self, x):
        return self.Q @ x


@dataclass(frozen=True)
class LogisticInstance:
    A: np.ndarray
    b: np.ndarray
    lambda_reg: float
    L: float
    mu: float

    @property
    def dim(self):
        return self.A.shape[1]

    def value(self, x):
        z = self.A @ x
        # -(1/n) sum [b log sig(z) + (1-b) log(1-sig(z))] = mean(log(1+e^z) - b z)
        loss = np.logaddexp(0.0, z) - self.b * z
        return float(loss.mean() + 0.5 * self.lambda_reg * (x @ x))

    def grad(self, x):
        z = self.A @ x
        return self.A.T @ (expit(z) - self.b) / len(self.b) + self.lambda_reg * x


@dataclass(frozen=True)
class LassoInstance:
    A: np.ndarray
    b: np.ndarray
    lambda_reg: float
    L: float

    @property
    def dim(self):
        return self.A.shape[1]

    def smooth_value(self, x):
        r = self.A @ x - self.b
        return 0.5 * float(r @ r)

    def smooth_grad(self, x):
        return self.A.T @ (self.A @ x - self.b)

    def value(self, x):
        return self.smooth_value(x) + self.lambda_reg * float(np.abs(x).sum())


@dataclass(frozen=True)
class Reference:
    x_star: np.ndarray
    f_star: float
    residual: float


# -- sampling --------------------------------------------------------------


def mp_aspect(mu, L):
    """Column/row ratio putting the spectrum edges at mu and L."""
    return (math.sqrt(L) - math.sqrt(mu)) ** 2 / (math.sqrt(L) + math.sqrt(mu)) ** 2


def mp_density(lam, mu, L):
    """Limiting eigenvalue density of the sampled quadratics on [mu, L]."""
    arr = np.atleast_1d(np.asarray(lam, dtype=float))
    n = mp_aspect(mu, L)
    sigma2 = ((math.sqrt(L) + math.sqrt(mu)) / 2.0) ** 2
    inside = (arr > mu) & (arr < L)
    out = np.zeros_like(arr)
    lo = arr[inside]
    out[inside] = np.sqrt((L - lo) * (lo - mu)) / (2.0 * np.pi * sigma2 * n * lo)
    return float(out[0]) if np.isscalar(lam) or np.ndim(lam) == 0 else out


def sample_mp_quadratic(mu, L, d, seed, max_retries=100):
    """Quadratic with spectrum in [mu, L], drawn from a scaled Wishart.

    The Gram factor has d rows and ceil(aspect*d) columns, entries
    N(0, sigma^2) with sigma = (sqrt(L)+sqrt(mu))/2, so the bulk edges sit
    exactly at mu and L; draws with an eigenvalue escaping the band are
    rejected.
    """
    if not (0 <= mu < L):
        raise ValueError("need 0 <= mu < L")
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = np.random.default_rng(seed)
    n = mp_aspect(mu, L)
    cols = math.ceil(n * d)
    sigma = (math.sqrt(L) + math.sqrt(mu)) / 2.0
    for _ in range(max_retries):
        A = rng.normal(scale=sigma, size=(d, cols))
        Q = A.T @ A / d
        Q = (Q + Q.T) / 2.0
        w = np.linalg.eigvalsh(Q)
        if w[0] >= mu - 1e-9 and w[-1] <= L + 1e-9:
            return QuadraticInstance(Q=Q, mu=float(mu), L=float(L))
    raise SamplingError(
        f"no draw with spectrum in [{mu}, {L}] after {max_retries} tries"
    )


def sample_logistic(n, d, p, sigma_A, xtilde_max, lambda_reg, seed):
    """Regularized logistic instance with latent-threshold labels.

    Features are Gaussian except an all-ones last column; the planted
    coefficient vector is zero with probability 1-p per entry; a label is
    1 exactly when the noisy latent score is positive.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    if not (0 <= p <= 1):
        raise ValueError("p must lie in [0, 1]")
    if sigma_A <= 0 or xtilde_max <= 0 or lambda_reg <= 0:
        raise ValueError("sigma_A, xtilde_max, lambda_reg must be > 0")
    rng = np.random.default_rng(seed)
    A = np.ones((n, d))
    if d > 1:
        A[:, :-1] = rng.normal(scale=sigma_A, size=(n, d - 1))
    mask = rng.random(d) < p
    vals = rng.uniform(-xtilde_max, xtilde_max, size=d)
    xtilde = np.where(mask, vals, 0.0)
    eps = rng.standard_normal(n)
    b = (A @ xtilde + eps > 0).astype(float)
    lam_max = float(np.linalg.eigvalsh(A.T @ A)[-1])
    L = lam_max / (4.0 * n) + lambda_reg
    return LogisticInstance(
        A=A, b=b, lambda_reg=float(lambda_reg), L=L, mu=float(lambda_reg)
    )


def make_lasso_dictionary(n, d, density, seed):
    """Sparse Gaussian dictionary with unit-norm columns, shared per experiment."""
    rng = np.random.default_rng(seed)
    A = rng.normal(scale=1.0 / math.sqrt(n), size=(n, d))
    A[rng.random(size=(n, d)) >= density] = 0.0
    norms = np.linalg.norm(A, axis=0)
    for j in np.nonzero(norms == 0.0)[0]:
        # vanishing columns are essentially impossible at working sizes,
        # but keep the unit-norm invariant airtight
        A[:, j] = rng.normal(size=n)
        norms[j] = np.linalg.norm(A[:, j])
    return A / norms


def sample_lasso(A_shared, p, sigma_eps, lambda_reg, seed, L=None):
    """Lasso instance over a fixed dictionary: b = A xtilde + noise.

    Pass a precomputed L (largest eigenvalue of A^T A) to skip recomputing
    it per instance; it depends on the dictionary only.
    """
    if not (0 <= p <= 1):
        raise ValueError("p must lie in [0, 1]")
    if sigma_eps < 0 or lambda_reg <= 0:
        raise ValueError("sigma_eps must be >= 0, lambda_reg > 0")
    A = np.asarray(A_shared, dtype=float)
    norms = np.linalg.norm(A, axis=0)
    if np.abs(norms - 1.0).max() > 1e-12:
        raise ValueError("dictionary columns must have unit norm")
    n, d = A.shape
    rng = np.random.default_rng(seed)
    mask = rng.random(d) < p
    vals = rng.standard_normal(d)
    xtilde = np.where(mask, vals, 0.0)
    eps = sigma_eps * rng.standard_normal(n)
    b = A @ xtilde + eps
    if L is None:
        L = float(np.linalg.eigvalsh(A.T @ A)[-1])
    return LassoInstance(A=A, b=b, lambda_reg=float(lambda_reg), L=float(L))


# -- reference solutions ---------------------------------------------------


def soft_threshold(v, delta):
    """Elementwise min(v + delta, max(v - delta, 0))."""
    return np.minimum(v + delta, np.maximum(v - delta, 0.0))


def _reference_logistic(inst, tol, max_iter):
    # constant-momentum accelerated gradient for strongly convex objectives
    L, mu = inst.L, inst.mu
    beta = (1 - math.sqrt(mu / L)) / (1 + math.sqrt(mu / L))
    x = np.zeros(inst.dim)
    y = x.copy()
    for _ in range(max_iter):
        g = inst.grad(y)
        x_new = y - g / L
        y = x_new + beta * (x_new - x)
        x = x_new
        res = float(np.linalg.norm(inst.grad(x)))
        if res <= tol:
            return Reference(x_star=x, f_star=inst.value(x), residual=res)
    raise ReferenceAccuracyError(
        f"gradient norm {res:.3e} > tol {tol:.1e} after {max_iter} iterations"
    )


def _reference_lasso(inst, tol, max_iter):
    eta = 1.0 / inst.L
    delta = inst.lambda_reg * eta
    x = np.zeros(inst.dim)
    y = x.copy()
    alpha = 1.0
    for _ in range(max_iter):
        x_new = soft_threshold(y - eta * inst.smooth_grad(y), delta)
        alpha_new = (1.0 + math.sqrt(1.0 + 4.0 * alpha * alpha)) / 2.0
        y = x_new + ((alpha - 1.0) / alpha_new) * (x_new - x)
        x, alpha = x_new, alpha_new
        step = x - soft_threshold(x - eta * inst.smooth_grad(x), delta)
        res = float(np.linalg.norm(step)) / eta
        if res <= tol:
            return Reference(x_star=x, f_star=inst.value(x), residual=res)
    raise ReferenceAccuracyError(
        f"prox residual {res:.3e} > tol {tol:.1e} after {max_iter} iterations"
    )


def reference_solution(instance, tol=None, max_iter=200000):
    """High-accuracy minimizer for any instance family.

    Quadratics are exact at the origin; logistic runs an accelerated
    method until the gradient norm meets tol; Lasso runs FISTA until the
    prox-gradient residual meets tol.  Fails loudly rather than return a
    low-accuracy reference.
    """
    if isinstance(instance, QuadraticInstance):
        return Reference(x_star=np.zeros(instance.dim), f_star=0.0, residual=0.0)
    if isinstance(instance, LogisticInstance):
        return _reference_logistic(instance, 1e-9 if tol is None else tol, max_iter)
    if isinstance(instance, LassoInstance):
        return _reference_lasso(instance, 1e-9 if tol is None else tol, max_iter)
    raise TypeError(f"unknown instance type {type(instance).__name__}")


# -- persistence -----------------------------------------------------------


def instance_to_dict(instance):
    if isinstance(instance, QuadraticInstance):
        return {"kind": "quadratic", "Q": instance.Q.tolist(),
                "mu": instance.mu, "L": instance.L}
    if isinstance(instance, LogisticInstance):
        return {"kind": "logistic", "A": instance.A.tolist(), "b": instance.b.tolist(),
                "lambda_reg": instance.lambda_reg, "L": instance.L, "mu": instance.mu}
    if isinstance(instance, LassoInstance):
        return {"kind": "lasso", "A": instance.A.tolist(), "b": instance.b.tolist(),
                "lambda_reg": instance.lambda_reg, "L": instance.L}
    raise TypeError(f"unknown instance type {type(instance).__name__}")


def instance_from_dict(data):
    kind = data["kind"]
    if kind == "quadratic":
        return QuadraticInstance(Q=np.array(data["Q"]), mu=data["mu"], L=data["L"])
    if kind == "logistic":
        return LogisticInstance(A=np.array(data["A"]), b=np.array(data["b"]),
                                lambda_reg=data["lambda_reg"],
                                L=data["L"], mu=data["mu"])
    if kind == "lasso":
        return LassoInstance(A=np.array(data["A"]), b=np.array(data["b"]),
                             lambda_reg=data["lambda_reg"], L=data["L"])
    raise ValueError(f"unknown instance kind {kind!r}")


def save_instance(instance, path):
    with open(path, "w") as fh:
        json.dump(instance_to_dict(instance), fh)


def load_instance(path):
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
