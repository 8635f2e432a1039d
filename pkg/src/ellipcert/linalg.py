"""Sparse CSR matrices and nonsymmetric Krylov solvers.

Storage and the Krylov iterations are delegated to scipy.sparse, which is
deterministic for fixed inputs; this module adds the assembly builder, the
residual post-check, and hard errors on breakdown or non-convergence (the
drift term makes the systems nonsymmetric, so CG is deliberately absent).
"""

import io
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse
import scipy.sparse.linalg

from .errors import SolveError

METHODS = ("bicgstab", "gmres")
PRECONDITIONERS = ("none", "diagonal", "ilu0")


@dataclass(frozen=True)
class SolveOptions:
    method: str = "bicgstab"
    rtol: float = 1e-10
    maxiter: int = 20_000
    restart: int = 60
    preconditioner: str = "diagonal"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0.0 < self.rtol < 1.0:
            raise ValueError(f"rtol must lie in (0, 1), got {self.rtol}")
        if self.maxiter < 1:
            raise ValueError("maxiter must be >= 1")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"preconditioner must be one of {PRECONDITIONERS}")


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    residual: float
    method: str
    preconditioner: str


class SparseMatrix:
    """Square CSR matrix; immutable once built (use `builder` to assemble)."""

    def __init__(self, csr: scipy.sparse.csr_array):
        if csr.shape[0] != csr.shape[1]:
            raise ValueError("matrix must be square")
        csr.sum_duplicates()
        csr.sort_indices()
        csr.eliminate_zeros()
        self._csr = csr
        self.n = csr.shape[0]

    @classmethod
    def from_coo(cls, n: int, rows, cols, values) -> "SparseMatrix":
        coo = scipy.sparse.coo_array(
            (np.asarray(values, dtype=float), (np.asarray(rows), np.asarray(cols))),
            shape=(n, n),
        )
        return cls(coo.tocsr())

    @property
    def indptr(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def data(self) -> np.ndarray:
        return self._csr.data

    @property
    def nnz(self) -> int:
        return int(self._csr.nnz)

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self._csr.T.tocsr())

    def with_replaced_row(self, row: int, cols, values) -> "SparseMatrix":
        """Copy with one row replaced (used to pin a normalization equation)."""
        lil = self._csr.tolil()
        lil[row, :] = 0.0
        for c, v in zip(cols, values):
            lil[row, c] = v
        return SparseMatrix(lil.tocsr())

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"dimension mismatch: matrix is {self.n}, vector is {x.shape}")
        return self._csr @ x

    def to_matrix_market(self) -> str:
        buf = io.BytesIO()
        scipy.io.mmwrite(buf, self._csr.tocoo())
        return buf.getvalue().decode("ascii")


def matvec(matrix: SparseMatrix, x: np.ndarray) -> np.ndarray:
    return matrix.matvec(x)


def _build_preconditioner(matrix: SparseMatrix, kind: str):
    if kind == "none":
        return None
    if kind == "diagonal":
        diag = matrix._csr.diagonal()
        if np.any(diag == 0.0):
            raise SolveError("diagonal preconditioner: zero diagonal entry")
        inv = 1.0 / diag
        return scipy.sparse.linalg.LinearOperator(
            (matrix.n, matrix.n), matvec=lambda v: inv * v
        )
    ilu = scipy.sparse.linalg.spilu(
        matrix._csr.tocsc(), drop_tol=0.0, fill_factor=1.0
    )
    return scipy.sparse.linalg.LinearOperator((matrix.n, matrix.n), matvec=ilu.solve)


def solve(
    matrix: SparseMatrix,
    rhs: np.ndarray,
    opts: SolveOptions | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveStats]:
    """Solve A x = b to ||Ax-b|| <= rtol*||b||; raises SolveError otherwise."""
    opts = opts or SolveOptions()
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (matrix.n,):
        raise ValueError(f"dimension mismatch: matrix is {matrix.n}, rhs is {rhs.shape}")

    b_norm = float(np.linalg.norm(rhs))
    if b_norm == 0.0:
        return np.zeros(matrix.n), SolveStats(0, 0.0, opts.method, opts.preconditioner)

    try:
        precond = _build_preconditioner(matrix, opts.preconditioner)
    except SolveError:
        raise
    except RuntimeError as exc:
        raise SolveError(f"preconditioner setup failed: {exc}") from None

    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    # The Krylov recurrences track the true residual only approximately, so
    # ask for an extra margin and enforce the contract on ||Ax - b|| itself.
    inner_rtol = max(opts.rtol * 0.05, 1e-15)
    a = matrix._csr
    if opts.method == "bicgstab":
        x, info = scipy.sparse.linalg.bicgstab(
            a, rhs, x0=x0, rtol=inner_rtol, atol=0.0,
            maxiter=opts.maxiter, M=precond, callback=count,
        )
    else:
        x, info = scipy.sparse.linalg.gmres(
            a, rhs, x0=x0, rtol=inner_rtol, atol=0.0,
            restart=opts.restart, maxiter=opts.maxiter, M=precond,
            callback=count, callback_type="pr_norm",
        )

    residual = float(np.linalg.norm(a @ x - rhs))
    if info < 0:
        raise SolveError(
            f"{opts.method}: breakdown or illegal input (info={info})",
            iterations=iterations, residual=residual,
        )
    if not np.isfinite(residual) or (info > 0 and residual > opts.rtol * b_norm):
        raise SolveError(
            f"{opts.method}: no convergence within {opts.maxiter} iterations "
            f"(relative residual {residual / b_norm:.3e})",
            iterations=iterations, residual=residual,
        )
    if residual > opts.rtol * b_norm:
        raise SolveError(
            f"{opts.method}: residual check failed ({residual / b_norm:.3e} > {opts.rtol:.1e})",
            iterations=iterations, residual=residual,
        )
    return x, SolveStats(iterations, residual, opts.method, opts.preconditioner)
