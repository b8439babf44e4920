"""Dense vectors and linear operators.

Vectors are plain 1-D ``float64`` numpy arrays; :func:`as_vector` is the
single validation gate. Operators wrap a read-only dense matrix and cache
their spectral norm, which feeds every Lipschitz constant downstream.
"""

from __future__ import annotations

import logging
import math
import threading
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, InputError, ZeroOperatorError

logger = logging.getLogger(__name__)

#: Relative margin added to estimated (non-analytic) norms before they are
#: used as Lipschitz constants.
NORM_SAFETY = 1e-6

#: Inflation applied to a power-iteration estimate that did not converge.
UNCONVERGED_INFLATION = 1.01


def as_vector(x, dim: Optional[int] = None, name: str = "x") -> np.ndarray:
    """Validate and copy ``x`` into a finite 1-D float array."""
    arr = np.array(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise InputError(f"{name} must have positive dimension")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    if dim is not None and arr.size != dim:
        raise InputError(f"{name} has dimension {arr.size}, expected {dim}")
    return arr


class LinearOperator:
    """Dense real matrix acting as a map from ``R^cols`` to ``R^rows``.

    The matrix is copied and frozen on construction. ``cached_norm`` may be
    supplied when the spectral norm is known in closed form; it is then
    treated as exact.
    """

    def __init__(self, matrix, cached_norm: Optional[float] = None):
        mat = np.array(matrix, dtype=float)
        if mat.ndim == 1:
            mat = mat.reshape(1, -1)
        if mat.ndim != 2:
            raise InputError(f"operator matrix must be 2-D, got shape {mat.shape}")
        if mat.shape[0] == 0 or mat.shape[1] == 0:
            raise InputError(f"degenerate operator shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise InputError("operator matrix has non-finite entries")
        mat.setflags(write=False)
        self._matrix = mat
        self._lock = threading.Lock()
        self._norm: Optional[float] = None
        self._norm_exact = False
        self.norm_converged = True
        if cached_norm is not None:
            if cached_norm < 0:
                raise InputError("cached_norm must be nonnegative")
            self._norm = float(cached_norm)
            self._norm_exact = True
        elif _is_diagonal(mat):
            self._norm = float(np.max(np.abs(np.diagonal(mat))))
            self._norm_exact = True

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def rows(self) -> int:
        return self._matrix.shape[0]

    @property
    def cols(self) -> int:
        return self._matrix.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._matrix.shape

    @property
    def cached_norm(self) -> Optional[float]:
        return self._norm

    @property
    def norm_is_exact(self) -> bool:
        return self._norm_exact

    def is_zero(self) -> bool:
        return not np.any(self._matrix)

    def apply(self, x) -> np.ndarray:
        x = as_vector(x, self.cols)
        return self._matrix @ x

    def adjoint(self, u) -> np.ndarray:
        u = as_vector(u, self.rows, name="u")
        return self._matrix.T @ u

    def norm(self) -> float:
        """Spectral norm, exact when known and estimated otherwise."""
        return operator_norm(self)

    def norm_bound(self) -> float:
        """Upper bound on the spectral norm suitable for step-size rules."""
        if self.is_zero():
            return 0.0
        sigma = operator_norm(self)
        return sigma if self._norm_exact else sigma * (1.0 + NORM_SAFETY)

    def __matmul__(self, x):
        if isinstance(x, LinearOperator):
            return compose(self, x)
        return self.apply(x)

    def __repr__(self) -> str:
        return f"LinearOperator(shape={self.shape})"


def _is_diagonal(mat: np.ndarray) -> bool:
    if mat.shape[0] != mat.shape[1]:
        return False
    return not np.any(mat - np.diag(np.diagonal(mat)))


def apply(L: LinearOperator, x) -> np.ndarray:
    return L.apply(x)


def adjoint_apply(L: LinearOperator, u) -> np.ndarray:
    return L.adjoint(u)


def identity(n: int) -> LinearOperator:
    if n < 1:
        raise InputError("dimension must be positive")
    return LinearOperator(np.eye(n), cached_norm=1.0)


def diag(entries) -> LinearOperator:
    d = as_vector(entries, name="entries")
    return LinearOperator(np.diag(d), cached_norm=float(np.max(np.abs(d))))


def scaled(L: LinearOperator, alpha: float) -> LinearOperator:
    norm = None
    if L.norm_is_exact:
        norm = abs(alpha) * L.cached_norm
    return LinearOperator(alpha * L.matrix, cached_norm=norm)


def compose(A: LinearOperator, B: LinearOperator) -> LinearOperator:
    """Return ``A∘B``."""
    if A.cols != B.rows:
        raise InputError(f"cannot compose {A.shape} with {B.shape}")
    return LinearOperator(A.matrix @ B.matrix)


def hstack(ops: Sequence[LinearOperator]) -> LinearOperator:
    """Map ``(x_1, ..., x_m) -> sum_i A_i x_i`` on the product space."""
    if not ops:
        raise InputError("need at least one operator")
    rows = {op.rows for op in ops}
    if len(rows) != 1:
        raise InputError(f"row dimensions differ: {sorted(rows)}")
    return LinearOperator(np.hstack([op.matrix for op in ops]))


def vstack(ops: Sequence[LinearOperator]) -> LinearOperator:
    """Map ``x -> (A_1 x, ..., A_p x)``."""
    if not ops:
        raise InputError("need at least one operator")
    cols = {op.cols for op in ops}
    if len(cols) != 1:
        raise InputError(f"column dimensions differ: {sorted(cols)}")
    return LinearOperator(np.vstack([op.matrix for op in ops]))


def sum_operator(m: int, space_dim: int) -> LinearOperator:
    """The summation map ``(x_1, ..., x_m) -> x_1 + ... + x_m``.

    Its adjoint replicates a vector ``m`` times and its norm is ``sqrt(m)``.
    """
    if m < 1 or space_dim < 1:
        raise InputError("m and space_dim must be positive")
    mat = np.hstack([np.eye(space_dim)] * m)
    return LinearOperator(mat, cached_norm=math.sqrt(m))


def power_iteration(matrix: np.ndarray, tol: float = 1e-9,
                    max_iter: int = 10000) -> tuple[float, bool]:
    """Largest singular value of ``matrix`` by power iteration on ``AᵀA``.

    Starts from the normalized all-ones vector. When the iteration stalls
    (start vector in the null space, or converged inside a non-dominant
    eigenspace) the vector is perturbed with a fixed-seed direction and the
    iteration resumes; the larger estimate wins.

    Returns ``(sigma, converged)``.
    """
    A = np.asarray(matrix, dtype=float)
    # work on a unit-scale copy so tiny or huge entries neither underflow nor overflow
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    if scale == 0.0:
        return 0.0, True
    A = A / scale
    n = A.shape[1]
    rng = np.random.default_rng(0)
    v = np.ones(n) / math.sqrt(n)

    def run(v):
        lam_old = -1.0
        for _ in range(max_iter):
            w = A.T @ (A @ v)
            lam = float(v @ w)
            nw = np.linalg.norm(w)
            if nw == 0.0:
                return 0.0, v, True
            v = w / nw
            if abs(lam - lam_old) <= tol * lam:
                return float(v @ (A.T @ (A @ v))), v, True
            lam_old = lam
        return lam_old, v, False

    lam, v, converged = run(v)
    # Restart check: a dominant direction missed by the start vector shows up
    # as growth after perturbation.
    for _ in range(3):
        r = rng.standard_normal(n)
        trial = v + 1e-2 * r / np.linalg.norm(r)
        lam2, v2, conv2 = run(trial / np.linalg.norm(trial))
        if lam2 <= lam * (1.0 + 10 * tol):
            break
        lam, v, converged = lam2, v2, conv2
    return scale * math.sqrt(max(lam, 0.0)), converged


def operator_norm(L: LinearOperator, tol: float = 1e-9,
                  max_iter: int = 10000) -> float:
    """Spectral norm of ``L``; the first result is cached on the operator.

    A non-converged estimate is inflated by 1% and ``L.norm_converged`` is
    set to False, since callers only need an upper bound.
    """
    if tol <= 0:
        raise ConfigError("tol must be positive")
    if L.is_zero():
        raise ZeroOperatorError("operator is identically zero")
    with L._lock:
        if L._norm is not None:
            return L._norm
        sigma, converged = power_iteration(L.matrix, tol, max_iter)
        if not converged:
            logger.warning("power iteration did not converge in %d steps", max_iter)
            sigma *= UNCONVERGED_INFLATION
        L.norm_converged = converged
        L._norm = sigma
        return sigma


class BlockOperator:
    """Grid of operators ``L_ki`` from ``H_1 x ... x H_m`` to ``G_1 x ... x G_p``.

    ``blocks[k][i]`` is a :class:`LinearOperator` or ``None`` for a zero
    block. Dimensions of all-``None`` rows or columns must be given.
    """

    def __init__(self, blocks, row_dims: Optional[Sequence[int]] = None,
                 col_dims: Optional[Sequence[int]] = None):
        grid = [list(row) for row in blocks]
        if not grid or not grid[0]:
            raise ConfigError("block grid must be non-empty")
        m = len(grid[0])
        if any(len(row) != m for row in grid):
            raise ConfigError("block grid rows have different lengths")
        p = len(grid)
        rdims = list(row_dims) if row_dims is not None else [None] * p
        cdims = list(col_dims) if col_dims is not None else [None] * m
        if len(rdims) != p or len(cdims) != m:
            raise ConfigError("row_dims/col_dims do not match the grid")
        for k, row in enumerate(grid):
            for i, op in enumerate(row):
                if op is None:
                    continue
                if not isinstance(op, LinearOperator):
                    op = LinearOperator(op)
                    row[i] = op
                if rdims[k] is None:
                    rdims[k] = op.rows
                if cdims[i] is None:
                    cdims[i] = op.cols
                if op.rows != rdims[k] or op.cols != cdims[i]:
                    raise ConfigError(
                        f"block ({k},{i}) has shape {op.shape}, "
                        f"expected ({rdims[k]}, {cdims[i]})")
        if any(d is None for d in rdims) or any(d is None for d in cdims):
            raise ConfigError("dimensions of empty block rows/columns must be given")
        self.blocks = grid
        self.row_dims = tuple(int(d) for d in rdims)
        self.col_dims = tuple(int(d) for d in cdims)

    @property
    def p(self) -> int:
        return len(self.row_dims)

    @property
    def m(self) -> int:
        return len(self.col_dims)

    def apply(self, xs: Sequence) -> list[np.ndarray]:
        """``(sum_i L_ki x_i)_k``."""
        xs = self._check(xs, self.col_dims, "x")
        out = []
        for k in range(self.p):
            acc = np.zeros(self.row_dims[k])
            for i, op in enumerate(self.blocks[k]):
                if op is not None:
                    acc = acc + op.matrix @ xs[i]
            out.append(acc)
        return out

    def adjoint(self, us: Sequence) -> list[np.ndarray]:
        """``(sum_k L_ki^* u_k)_i``."""
        us = self._check(us, self.row_dims, "u")
        out = []
        for i in range(self.m):
            acc = np.zeros(self.col_dims[i])
            for k in range(self.p):
                op = self.blocks[k][i]
                if op is not None:
                    acc = acc + op.matrix.T @ us[k]
            out.append(acc)
        return out

    def row_energy(self) -> list[float]:
        """``sum_i ||L_ki||^2`` for each output block ``k``."""
        return [sum(op.norm_bound() ** 2 for op in row if op is not None)
                for row in self.blocks]

    def to_dense(self) -> LinearOperator:
        """The stacked matrix acting on concatenated block vectors."""
        rows = []
        for k in range(self.p):
            rows.append([op.matrix if op is not None
                         else np.zeros((self.row_dims[k], self.col_dims[i]))
                         for i, op in enumerate(self.blocks[k])])
        return LinearOperator(np.block(rows))

    @staticmethod
    def _check(vs, dims, name):
        if len(vs) != len(dims):
            raise InputError(f"expected {len(dims)} blocks of {name}, got {len(vs)}")
        return [as_vector(v, d, name=f"{name}[{j}]") for j, (v, d) in enumerate(zip(vs, dims))]


def split(x, dims: Sequence[int]) -> list[np.ndarray]:
    """Cut a concatenated vector into blocks of the given sizes."""
    x = as_vector(x, sum(dims))
    return np.split(x, np.cumsum(dims)[:-1])
