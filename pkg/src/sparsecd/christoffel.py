"""Moment matrices and Christoffel polynomials.

The Christoffel polynomial of degree ``n`` is the quadratic form
``v(z)^T M^{-1} v(z)`` with ``v`` the monomial vector and ``M`` the moment
matrix on the same basis. It is evaluated as ``||L^{-1} v(z)||^2`` from the
Cholesky factor ``M = L L^T``; no inverse is ever formed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InvalidArgumentError, SingularMomentMatrixError
from .moments import MomentTable
from .multiindex import (
    Mode,
    MultiIndexBasis,
    averaged_monomial_vector,
    enumerate_basis,
    monomial_vector,
    scaled_monomial_vector,
)

DEFAULT_MAX_DEGREE = 12
RCOND_WARNING = 1e-12


class IllConditionedWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class MomentMatrix:
    basis: MultiIndexBasis
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def assemble(table: MomentTable, degree: int, mode=Mode.COORD) -> MomentMatrix:
    """``M[alpha, beta] = table[alpha + beta]`` over the degree-``n`` basis."""
    mode = Mode.parse(mode)
    if degree < 0:
        raise InvalidArgumentError("degree must be nonnegative")
    if 2 * degree > table.degree:
        raise InvalidArgumentError(
            f"moment table of degree {table.degree} cannot supply a degree-{degree} "
            f"moment matrix (needs {2 * degree})"
        )
    basis = enumerate_basis(table.vars, degree, mode)
    idx = basis.indices.astype(np.intp)
    summed = idx[:, None, :] + idx[None, :, :]
    M = table.entries[tuple(np.moveaxis(summed, -1, 0))]
    return MomentMatrix(basis, np.array(M, dtype=float))


@dataclass(frozen=True)
class ChristoffelFactor:
    """Cholesky factor of a (jittered) moment matrix, evaluable at points."""

    basis: MultiIndexBasis
    lower: np.ndarray
    rcond: float
    jitter: float = 0.0

    @property
    def vars(self) -> tuple[int, ...]:
        return self.basis.vars

    @property
    def degree(self) -> int:
        return self.basis.degree

    @property
    def mode(self) -> Mode:
        return self.basis.mode

    @property
    def size(self) -> int:
        return self.basis.size

    def _whiten(self, vectors: np.ndarray) -> np.ndarray:
        return solve_triangular(self.lower, vectors.T, lower=True, check_finite=False)

    def evaluate(self, z):
        return evaluate(self, z)

    def log_evaluate(self, z):
        return log_evaluate(self, z)


def factorize(M: MomentMatrix, jitter: float = 0.0) -> ChristoffelFactor:
    if jitter < 0:
        raise InvalidArgumentError("jitter must be nonnegative")
    A = np.asarray(M.matrix, dtype=float)
    if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
        raise InvalidArgumentError("moment matrix is not symmetric")
    A = (A + A.T) / 2 + jitter * np.eye(A.shape[0])
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        L = None
    if L is None or not np.all(np.isfinite(L)) or np.any(np.diag(L) <= 0):
        raise SingularMomentMatrixError(
            f"moment matrix of size {A.shape[0]} over variables {M.basis.vars} is not "
            "positive definite; lower the degree, supply more samples than the basis "
            "size, or raise the jitter (data on an algebraic variety is always singular)"
        )
    rcond = _rcond(A, L)
    if rcond < RCOND_WARNING:
        warnings.warn(
            f"moment matrix over {M.basis.vars} (degree {M.basis.degree}) has reciprocal "
            f"condition estimate {rcond:.1e}; values may be inaccurate",
            IllConditionedWarning,
            stacklevel=2,
        )
    L.setflags(write=False)
    return ChristoffelFactor(M.basis, L, rcond, float(jitter))


def _rcond(A: np.ndarray, L: np.ndarray) -> float:
    if A.shape[0] <= 1500:
        eig = np.linalg.eigvalsh(A)
        return float(max(eig[0], 0.0) / eig[-1])
    diag = np.diag(L)
    return float((diag.min() / diag.max()) ** 2)


def fit_factor(table: MomentTable, degree: int, mode=Mode.COORD, jitter: float = 0.0) -> ChristoffelFactor:
    return factorize(assemble(table, degree, mode), jitter)


def _log_sumsq(Y: np.ndarray) -> np.ndarray:
    # log of column sums of squares, safe against overflow of the squares
    scale = np.abs(Y).max(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return 2 * np.log(scale) + np.log(np.sum((Y / scale) ** 2, axis=0))


def _finish(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


def evaluate(f: ChristoffelFactor, z):
    """Christoffel polynomial at ``z`` (one point or one point per row)."""
    single = np.ndim(z) == 1
    V = np.atleast_2d(monomial_vector(f.basis, z))
    Y = f._whiten(V)
    return _finish(np.sum(Y**2, axis=0), single)


def log_evaluate(f: ChristoffelFactor, z):
    """Natural log of the Christoffel polynomial; finite even where the value overflows."""
    single = np.ndim(z) == 1
    V, log_scale = scaled_monomial_vector(f.basis, z)
    return _finish(_log_sumsq(f._whiten(V)) + 2 * log_scale, single)


def evaluate_regularized(f: ChristoffelFactor, z, epsilon):
    """Regularized polynomial: the quadratic form at the box-averaged monomial vector."""
    single = np.ndim(z) == 1
    V = np.atleast_2d(averaged_monomial_vector(f.basis, z, epsilon))
    return _finish(np.sum(f._whiten(V) ** 2, axis=0), single)


def log_evaluate_regularized(f: ChristoffelFactor, z, epsilon):
    single = np.ndim(z) == 1
    V, log_scale = scaled_monomial_vector(f.basis, z, epsilon)
    return _finish(_log_sumsq(f._whiten(V)) + 2 * log_scale, single)


def reconstruction_error(f: ChristoffelFactor, M: MomentMatrix) -> float:
    """Relative Frobenius error of ``L L^T`` against ``M + jitter I``."""
    target = M.matrix + f.jitter * np.eye(M.size)
    return float(np.linalg.norm(f.lower @ f.lower.T - target) / np.linalg.norm(target))


def evaluate_variational_oracle(table: MomentTable, degree: int, mode, z) -> float:
    """Solve ``min p^T M p  s.t.  p^T v(z) = 1`` via its KKT system; return the reciprocal.

    Uses a general LU solve of the bordered system, independent of the
    Cholesky path. Test oracle only.
    """
    M = assemble(table, degree, mode)
    v = monomial_vector(M.basis, z)
    m = M.size
    K = np.zeros((m + 1, m + 1))
    K[:m, :m] = 2 * M.matrix
    K[:m, m] = v
    K[m, :m] = v
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMomentMatrixError(str(exc)) from None
    p = sol[:m]
    return float(1.0 / (p @ M.matrix @ p))


def legendre_christoffel(n: int, x, lo: float = -1.0, hi: float = 1.0):
    """Christoffel polynomial of the uniform law on ``[lo, hi]`` by three-term recurrence.

    ``sum_{k<=n} (2k + 1) P_k(t)^2`` with ``t`` the standardized point and
    ``P_k`` the Legendre polynomials. Independent of any moment matrix.
    """
    t = (2 * np.asarray(x, dtype=float) - (lo + hi)) / (hi - lo)
    p_prev = np.ones_like(t)
    total = p_prev.copy()
    if n >= 1:
        p = t.copy()
        total = total + 3 * p**2
        for k in range(1, n):
            p_prev, p = p, ((2 * k + 1) * t * p - k * p_prev) / (k + 1)
            total = total + (2 * (k + 1) + 1) * p**2
    return total if total.ndim else float(total)


def check_degree(degree: int, max_degree: int | None = DEFAULT_MAX_DEGREE) -> None:
    if degree < 0:
        raise InvalidArgumentError("degree must be nonnegative")
    if max_degree is not None and degree > max_degree:
        raise InvalidArgumentError(
            f"degree {degree} exceeds the double-precision guardrail {max_degree} for "
            "monomial moment matrices; pass a larger max_degree to override"
        )
