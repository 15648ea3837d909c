"""Gram lifting of trajectories and the data-driven scaling matrices.

A run is summarized by the Gram matrix G = P^T P of its basis directions
(initial offset and every recorded gradient) together with the vector F
of function-value gaps.  All downstream programs act on (G, F) pairs
only, so two runs with identical pairwise inner products are
indistinguishable here regardless of ambient dimension.
"""

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Layout:
    """Ordered labels of basis columns and value entries for one run shape."""
    basis: tuple
    values: tuple
    composite: bool
    K: int

    @property
    def n_basis(self):
        return len(self.basis)

    @property
    def m_vals(self):
        return len(self.values)


def smooth_layout(K):
    """Basis (x0 offset, g^0..g^K), values (f-gaps at the K+1 oracle points)."""
    basis = ("dx0",) + tuple(f"g{k}" for k in range(K + 1))
    values = tuple(f"f{k}" for k in range(K + 1))
    return Layout(basis=basis, values=values, composite=False, K=K)


def composite_layout(K):
    """Split-function layout for prox runs.

    Basis: x0 offset, smooth gradients at the K+1 oracle points, the
    smooth gradient at the minimizer (the l1 subgradient there is its
    negative and shares the column), then the l1 subgradients at the prox
    outputs x^1..x^K.  Values: smooth-part gaps at oracle points, then
    l1-part gaps at prox outputs.
    """
    if K < 1:
        raise ValueError("composite runs need K >= 1")
    basis = (("dx0",) + tuple(f"gh{k}" for k in range(K + 1)) + ("gh_star",)
             + tuple(f"s{k}" for k in range(1, K + 1)))
    values = (tuple(f"h{k}" for k in range(K + 1))
              + tuple(f"l1_{k}" for k in range(1, K + 1)))
    return Layout(basis=basis, values=values, composite=True, K=K)


def layout_for(spec):
    return composite_layout(spec.K) if spec.composite else smooth_layout(spec.K)


@dataclass(frozen=True)
class LiftedSample:
    G: np.ndarray
    F: np.ndarray
    layout: Layout
    seed: int = 0


@dataclass(frozen=True)
class Preconditioner:
    """Positive diagonal scalings for the Gram block and the value block."""
    d_g: np.ndarray
    d_f: np.ndarray


def lift(trajectory):
    """Build the (G, F) pair of one trajectory; see module docstring."""
    spec = trajectory.spec
    layout = layout_for(spec)
    ref = trajectory.reference
    cols = [trajectory.x0 - ref.x_star]
    cols.extend(trajectory.grads)
    if spec.composite:
        lam = trajectory.instance.lambda_reg
        cols.append(trajectory.gh_star)
        cols.extend(lam * s for s in trajectory.l1_subgrads)
        gaps = [v - trajectory.h_star for v in trajectory.values]
        gaps.extend(v - trajectory.r_star for v in trajectory.l1_values)
    else:
        gaps = [v - ref.f_star for v in trajectory.values]
    P = np.column_stack(cols)
    if P.shape[1] != layout.n_basis or len(gaps) != layout.m_vals:
        raise ValueError("trajectory does not match its declared layout")
    G = P.T @ P
    G = (G + G.T) / 2.0
    return LiftedSample(G=G, F=np.array(gaps, dtype=float), layout=layout)


def preconditioner(samples):
    """Per-column inverse scaling built from the samples themselves.

    Gram side: inverse square of the average column norm, normalized by
    the basis size; value side: inverse of the average gap, normalized by
    the value count.  Vanishing column sums are floored at 1e-12 times
    the largest sum so the scaling stays positive definite; composite
    value gaps enter through their absolute value since split-component
    gaps may be negative.
    """
    if not samples:
        raise ValueError("need at least one sample")
    layout = samples[0].layout
    N = len(samples)
    g_sums = np.zeros(layout.n_basis)
    f_sums = np.zeros(layout.m_vals)
    for s in samples:
        if s.layout != layout:
            raise ValueError("samples mix layouts")
        g_sums += np.sqrt(np.maximum(np.diag(s.G), 0.0))
        f_sums += np.abs(s.F)
    d_g = (N * N / layout.n_basis) / np.square(_floored(g_sums))
    d_f = (N / layout.m_vals) / _floored(f_sums)
    return Preconditioner(d_g=d_g, d_f=d_f)


def _floored(sums):
    top = sums.max()
    floor = 1e-12 * top if top > 0 else 1.0
    return np.maximum(sums, floor)


def identity_preconditioner(layout):
    return Preconditioner(d_g=np.ones(layout.n_basis), d_f=np.ones(layout.m_vals))


def scaled_norm(G, F, D):
    """sqrt of ||D_G^{1/2} G D_G^{1/2}||_F^2 + ||D_F F||^2 for diagonal D."""
    root = np.sqrt(D.d_g)
    GS = G * np.outer(root, root)
    return float(np.sqrt(np.sum(GS * GS) + np.sum(np.square(D.d_f * F))))


def factor_gram(G, tol=0.0):
    """A matrix P with P^T P = G (eigenvalue square root, negatives clipped)."""
    w, V = np.linalg.eigh((G + G.T) / 2.0)
    w = np.maximum(w, tol)
    return (V * np.sqrt(w)) @ V.T


def save_samples(samples, path):
    """JSON-lines persistence: raw lower triangle of G (row-major), F, layout."""
    with open(path, "w") as fh:
        for s in samples:
            n = s.layout.n_basis
            lower = [float(s.G[a, b]) for a in range(n) for b in range(a + 1)]
            rec = {
                "G_lower": lower,
                "F": [float(v) for v in s.F],
                "layout": {"kind": "composite" if s.layout.composite else "smooth",
                           "K": s.layout.K},
                "seed": int(s.seed),
            }
            fh.write(json.dumps(rec) + "\n")


def load_samples(path):
    samples = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            K = rec["layout"]["K"]
            layout = (composite_layout(K) if rec["layout"]["kind"] == "composite"
                      else smooth_layout(K))
            n = layout.n_basis
            G = np.zeros((n, n))
            it = iter(rec["G_lower"])
            for a in range(n):
                for b in range(a + 1):
                    v = next(it)
                    G[a, b] = v
                    G[b, a] = v
            samples.append(LiftedSample(G=G, F=np.array(rec["F"], dtype=float),
                                        layout=layout, seed=rec.get("seed", 0)))
    return samples
