"""Conic-program intermediate representation and solver adapter.

A ConicProgram is built over named scalar / vector / symmetric-matrix
variables.  Constraints are affine row blocks placed in one of four cones
(zero, nonnegative, second-order, positive semidefinite).  `assemble`
lowers the program to deterministic standard-form data (cost vector,
sparse constraint matrix, cone list); `solve` hands that to Clarabel.

Bit-level conventions (the contract builders rely on):
  - variables are laid out in declaration order;
  - symmetric matrices are packed as their lower triangle in column-major
    order with off-diagonal entries scaled by sqrt(2), so that
    pack(A) @ pack(B) == <A, B> and ||pack(A)|| == ||A||_F;
  - assembled rows are grouped zero, nonneg, soc, psd, preserving
    insertion order inside each group.

The solver backend is an implementation detail of `solve`; builders only
ever see the IR.  Clarabel packs PSD triangles upper-column-major, so the
adapter permutes packed rows on the way in and out.
"""

import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

SQRT2 = np.sqrt(2.0)


class ConicError(Exception):
    """Malformed program (dimension mismatch, undeclared variable)."""


class SolverFailure(Exception):
    """A solve that callers required to be optimal was not."""

    def __init__(self, solution):
        self.solution = solution
        super().__init__(
            f"conic solve ended with status {solution.status!r} "
            f"(raw {solution.raw_status!r}, r_prim={solution.r_prim:.2e}, "
            f"r_dual={solution.r_dual:.2e})"
        )


def pack_dim(n):
    return n * (n + 1) // 2


@lru_cache(maxsize=None)
def _tril_colmajor(n):
    """(rows, cols) of the lower triangle in column-major order."""
    cols = np.repeat(np.arange(n), np.arange(n, 0, -1))
    rows = np.concatenate([np.arange(j, n) for j in range(n)]) if n else np.empty(0, int)
    return rows, cols


def packed_positions(n):
    """(row, col) matrix entry held by each packed slot."""
    return _tril_colmajor(n)


@lru_cache(maxsize=None)
def _pack_permutation_to_upper(n):
    """Map lower-column-major packed position -> upper-column-major position.

    perm[p_lower] = p_upper for the same unordered matrix entry.  Used by
    the Clarabel adapter; both layouts carry the same sqrt(2) scaling so a
    pure permutation suffices.
    """
    i, j = _tril_colmajor(n)  # i >= j
    # upper-column-major position of entry (j, i): sum over columns < i plus j
    return (i * (i + 1)) // 2 + j


def pack_symmetric(M):
    """svec: lower triangle, column-major, off-diagonals times sqrt(2)."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    i, j = _tril_colmajor(n)
    v = M[i, j].copy()
    v[i != j] *= SQRT2
    return v


def unpack_symmetric(v, n):
    """Inverse of pack_symmetric."""
    v = np.asarray(v, dtype=float)
    if v.shape != (pack_dim(n),):
        raise ConicError(f"packed vector has length {v.shape}, expected {pack_dim(n)}")
    i, j = _tril_colmajor(n)
    w = v.copy()
    w[i != j] /= SQRT2
    M = np.zeros((n, n))
    M[i, j] = w
    M[j, i] = w
    return M


@dataclass(frozen=True)
class Var:
    name: str
    kind: str          # "scalar" | "vector" | "symmetric"
    indices: np.ndarray
    n: int = 0         # matrix size for symmetric variables

    @property
    def index(self):
        """Scalar convenience accessor."""
        if self.kind != "scalar":
            raise ConicError(f"{self.name} is not a scalar")
        return int(self.indices[0])


class RowBlock:
    """nrows affine rows over the program variables: value = T u + const."""

    def __init__(self, nrows):
        self.nrows = int(nrows)
        self.const = np.zeros(self.nrows)
        self._rows = []
        self._cols = []
        self._vals = []

    def add(self, rows, cols, vals):
        """Scatter coefficients; rows/cols/vals broadcast together."""
        rows, cols, vals = np.broadcast_arrays(
            np.asarray(rows), np.asarray(cols), np.asarray(vals, dtype=float)
        )
        self._rows.append(rows.ravel().astype(np.int64))
        self._cols.append(cols.ravel().astype(np.int64))
        self._vals.append(vals.ravel().astype(np.float64))

    def triplets(self):
        if not self._rows:
            z = np.empty(0, dtype=np.int64)
            return z, z.copy(), np.empty(0)
        return (
            np.concatenate(self._rows),
            np.concatenate(self._cols),
            np.concatenate(self._vals),
        )


@dataclass
class _Constraint:
    cone: str            # "zero" | "nonneg" | "soc" | "psd"
    block: RowBlock
    n: int = 0           # matrix size for psd
    row_start: int = -1  # filled in by assemble


@dataclass(frozen=True)
class StandardForm:
    """Assembled program: minimize q@u + constant s.t. (T u + const) in cones."""
    q: np.ndarray
    T: sp.csc_matrix
    const: np.ndarray
    cones: tuple          # ("zero", rows) | ("nonneg", rows) | ("soc", rows) | ("psd", n)
    constant: float
    num_vars: int


@dataclass
class Solution:
    status: str            # optimal | primal-infeasible | dual-infeasible | numerical-limit
    raw_status: str
    objective: float
    primal: dict           # variable name -> float / vector / full symmetric matrix
    dual: list             # per constraint, in insertion order (IR row layout)
    solve_time: float
    iterations: int
    r_prim: float
    r_dual: float
    rel_gap: float

    @property
    def optimal(self):
        return self.status == "optimal"


class ConicProgram:
    """Builder for a conic program; immutable once assembled."""

    def __init__(self):
        self._vars = []
        self._by_name = {}
        self.num_vars = 0
        self._cost_cols = []
        self._cost_vals = []
        self.cost_constant = 0.0
        self._constraints = []
        self._assembled = None

    # -- variables ---------------------------------------------------------

    def _declare(self, name, size, kind, n=0):
        if self._assembled is not None:
            raise ConicError("program already assembled")
        if name in self._by_name:
            raise ConicError(f"variable {name!r} declared twice")
        idx = np.arange(self.num_vars, self.num_vars + size)
        v = Var(name=name, kind=kind, indices=idx, n=n)
        self.num_vars += size
        self._vars.append(v)
        self._by_name[name] = v
        return v

    def scalar(self, name):
        return self._declare(name, 1, "scalar")

    def vector(self, name, size):
        if size < 1:
            raise ConicError("vector size must be >= 1")
        return self._declare(name, size, "vector")

    def symmetric(self, name, n):
        """Symmetric n x n matrix variable, stored packed (see module doc)."""
        if n < 1:
            raise ConicError("matrix size must be >= 1")
        return self._declare(name, pack_dim(n), "symmetric", n=n)

    # -- objective ---------------------------------------------------------

    def add_cost(self, cols, vals):
        cols, vals = np.broadcast_arrays(np.asarray(cols), np.asarray(vals, dtype=float))
        self._cost_cols.append(cols.ravel().astype(np.int64))
        self._cost_vals.append(vals.ravel().astype(np.float64))

    # -- constraints -------------------------------------------------------

    def rows(self, nrows):
        return RowBlock(nrows)

    def _push(self, cone, block, n=0):
        if self._assembled is not None:
            raise ConicError("program already assembled")
        for c in block._cols:
            if c.size and (c.min() < 0 or c.max() >= self.num_vars):
                raise ConicError("constraint references undeclared variable index")
        self._constraints.append(_Constraint(cone=cone, block=block, n=n))
        return len(self._constraints) - 1

    def zero(self, block):
        """Rows constrained to equal zero; returns a constraint index."""
        return self._push("zero", block)

    def nonneg(self, block):
        """Rows constrained to be >= 0; returns a constraint index."""
        return self._push("nonneg", block)

    def soc(self, block):
        """(t, u) rows with t >= ||u||; first row is the bound."""
        if block.nrows < 2:
            raise ConicError("second-order cone needs at least 2 rows")
        return self._push("soc", block)

    def psd(self, block, n):
        """Packed rows (lower-column-major, sqrt2 off-diagonal) of a PSD matrix."""
        if block.nrows != pack_dim(n):
            raise ConicError(
                f"psd block for size {n} needs {pack_dim(n)} rows, got {block.nrows}"
            )
        return self._push("psd", block, n=n)

    # -- lowering ----------------------------------------------------------

    def assemble(self):
        """Deterministic standard form; cached after first call."""
        if self._assembled is not None:
            return self._assembled

        q = np.zeros(self.num_vars)
        for cols, vals in zip(self._cost_cols, self._cost_vals):
            np.add.at(q, cols, vals)

        order = {"zero": 0, "nonneg": 1, "soc": 2, "psd": 3}
        ordered = sorted(
            range(len(self._constraints)),
            key=lambda k: (order[self._constraints[k].cone], k),
        )

        offset = 0
        cones = []
        rr, cc, vv = [], [], []
        consts = []
        pending = None  # merge consecutive zero / nonneg rows into one cone entry
        for k in ordered:
            con = self._constraints[k]
            con.row_start = offset
            r, c, v = con.block.triplets()
            rr.append(r + offset)
            cc.append(c)
            vv.append(v)
            consts.append(con.block.const)
            offset += con.block.nrows
            if con.cone in ("zero", "nonneg"):
                if pending is not None and pending[0] == con.cone:
                    pending = (con.cone, pending[1] + con.block.nrows)
                else:
                    if pending is not None:
                        cones.append(pending)
                    pending = (con.cone, con.block.nrows)
            else:
                if pending is not None:
                    cones.append(pending)
                    pending = None
                cones.append((con.cone, con.block.nrows if con.cone == "soc" else con.n))
        if pending is not None:
            cones.append(pending)

        nrows = offset
        if rr:
            T = sp.coo_matrix(
                (np.concatenate(vv), (np.concatenate(rr), np.concatenate(cc))),
                shape=(nrows, self.num_vars),
            ).tocsc()
        else:
            T = sp.csc_matrix((nrows, self.num_vars))
        const = np.concatenate(consts) if consts else np.zeros(0)

        self._assembled = StandardForm(
            q=q, T=T, const=const, cones=tuple(cones),
            constant=self.cost_constant, num_vars=self.num_vars,
        )
        return self._assembled

    def dump(self, path):
        """Write the assembled program in a plain sparse text format.

        Header lines give dimensions and the cone list; the body is COO
        triplets of the constraint matrix followed by the constant vector,
        all float64 decimal.  Meant for cross-solver debugging.
        """
        asm = self.assemble()
        T = asm.T.tocoo()
        with open(path, "w") as fh:
            fh.write("pepdist-conic 1\n")
            fh.write(f"vars {asm.num_vars}\n")
            fh.write(f"rows {asm.T.shape[0]}\n")
            fh.write(f"cost_constant {asm.constant!r}\n")
            fh.write(f"cones {len(asm.cones)}\n")
            for kind, size in asm.cones:
                fh.write(f"  {kind} {size}\n")
            nz = np.nonzero(asm.q)[0]
            fh.write(f"cost {len(nz)}\n")
            for c in nz:
                fh.write(f"  {c} {asm.q[c]!r}\n")
            fh.write(f"A {T.nnz}\n")
            for r, c, v in zip(T.row, T.col, T.data):
                fh.write(f"  {r} {c} {v!r}\n")
            fh.write(f"b {len(asm.const)}\n")
            for v in asm.const:
                fh.write(f"  {v!r}\n")

    # -- solving -----------------------------------------------------------

    def solve(self, tol=1e-8, max_iter=200, verbose=False, threads=1):
        """Solve via Clarabel and map the result back onto IR variables."""
        import clarabel

        asm = self.assemble()
        nrows = asm.T.shape[0]

        # solver form: A u + s = b, s in K  =>  A = -T, b = const,
        # with PSD packed rows permuted into Clarabel's upper-column-major order.
        perm = np.arange(nrows)
        cones = []
        row = 0
        for kind, size in asm.cones:
            if kind == "zero":
                cones.append(clarabel.ZeroConeT(size))
                row += size
            elif kind == "nonneg":
                cones.append(clarabel.NonnegativeConeT(size))
                row += size
            elif kind == "soc":
                cones.append(clarabel.SecondOrderConeT(size))
                row += size
            else:
                cones.append(clarabel.PSDTriangleConeT(size))
                p = _pack_permutation_to_upper(size)
                block = np.arange(row, row + pack_dim(size))
                perm[row + p] = block
                row += pack_dim(size)

        A = (-asm.T).tocsr()[perm].tocsc()
        b = asm.const[perm]

        settings = clarabel.DefaultSettings()
        settings.verbose = bool(verbose)
        settings.max_iter = int(max_iter)
        settings.tol_gap_abs = tol
        settings.tol_gap_rel = tol
        settings.tol_feas = tol
        settings.max_threads = int(threads)

        P = sp.csc_matrix((self.num_vars, self.num_vars))
        t0 = time.perf_counter()
        solver = clarabel.DefaultSolver(P, asm.q, A, b, cones, settings)
        result = solver.solve()
        elapsed = time.perf_counter() - t0

        raw = str(result.status)
        status = {
            "Solved": "optimal",
            "PrimalInfeasible": "primal-infeasible",
            "DualInfeasible": "dual-infeasible",
        }.get(raw, "numerical-limit")

        x = np.asarray(result.x)
        primal = {}
        for v in self._vars:
            if v.kind == "scalar":
                primal[v.name] = float(x[v.indices[0]])
            elif v.kind == "vector":
                primal[v.name] = x[v.indices].copy()
            else:
                primal[v.name] = unpack_symmetric(x[v.indices], v.n)

        # undo the row permutation so duals line up with IR row layout
        z = np.empty(nrows)
        z[perm] = np.asarray(result.z) if nrows else np.empty(0)
        inv_order = sorted(range(len(self._constraints)),
                           key=lambda k: self._constraints[k].row_start)
        dual = [None] * len(self._constraints)
        for k in inv_order:
            con = self._constraints[k]
            dual[k] = z[con.row_start:con.row_start + con.block.nrows].copy()

        pobj = float(result.obj_val) + asm.constant
        dobj = float(result.obj_val_dual) + asm.constant
        rel_gap = abs(pobj - dobj) / max(1.0, abs(pobj), abs(dobj))

        return Solution(
            status=status,
            raw_status=raw,
            objective=pobj,
            primal=primal,
            dual=dual,
            solve_time=elapsed,
            iterations=int(result.iterations),
            r_prim=float(result.r_prim),
            r_dual=float(result.r_dual),
            rel_gap=rel_gap,
        )

    def solve_required(self, retry_tol=None, **kwargs):
        """Solve and raise SolverFailure unless the result is optimal.

        retry_tol, if given, allows one retry at that looser tolerance
        when the first attempt stalls just short of the target.
        """
        sol = self.solve(**kwargs)
        if not sol.optimal and retry_tol is not None:
            sol = self.solve(**{**kwargs, "tol": retry_tol})
        if not sol.optimal:
            raise SolverFailure(sol)
        return sol
