"""Dense numerical kernels shared by every solver module.

Small least-squares solves, the leading singular triple, and the squared
Frobenius reconstruction objective. Everything operates on float64 numpy
arrays and is deterministic: fixed power-iteration start, fixed sign
convention, no environment-dependent branching.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

log = logging.getLogger(__name__)

# Gram matrices with a worse condition estimate than this get a small ridge
# before the Cholesky solve.
COND_LIMIT = 1e12
RIDGE_SCALE = 1e-10


class NumericalError(RuntimeError):
    """A solve broke down numerically and could not be rescued."""


@dataclass(frozen=True)
class SingularTriple:
    """Leading singular triple (sigma, u, v) of a matrix.

    ``u`` and ``v`` are unit vectors and ``sigma >= 0``. The sign is pinned
    deterministically: the largest-magnitude entry of ``u`` is positive, and
    ``v`` carries the compensating sign so ``sigma * outer(u, v)`` is
    unaffected. ``converged`` is False when the power iteration hit its
    iteration cap; the best iterate is still returned.
    """

    sigma: float
    u: np.ndarray
    v: np.ndarray
    converged: bool = True


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Validate and return ``a`` as a finite 1-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def solve_gram(G: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``G Z = B`` for a (near) positive semidefinite Gram matrix G.

    Cholesky on the normal equations; if the condition estimate of G exceeds
    ``COND_LIMIT`` a ridge of ``RIDGE_SCALE * trace(G) / k`` is added first.
    Raises NumericalError, carrying the condition estimate, when even the
    ridged system cannot be factorized.
    """
    G = np.asarray(G, dtype=np.float64)
    k = G.shape[0]
    if k == 0:
        return np.zeros_like(B)
    cond = np.linalg.cond(G)
    ridged = False
    if not np.isfinite(cond) or cond > COND_LIMIT:
        lam = RIDGE_SCALE * np.trace(G) / k
        G = G + lam * np.eye(k)
        ridged = True
        log.debug("gram solve: cond=%.3e, ridge %.3e applied", cond, lam)
    try:
        return cho_solve(cho_factor(G, lower=True), B)
    except np.linalg.LinAlgError:
        pass
    if not ridged:
        lam = RIDGE_SCALE * np.trace(G) / k
        try:
            return cho_solve(cho_factor(G + lam * np.eye(k), lower=True), B)
        except np.linalg.LinAlgError:
            pass
    raise NumericalError(
        f"gram matrix is rank-deficient beyond ridge rescue (cond estimate {cond:.3e})"
    )


def least_squares(A, y) -> np.ndarray:
    """Solve ``min_x ||y - A x||_2`` by normal equations with Cholesky.

    Supports are small in every caller (k << m), so the Gram matrix is tiny;
    ill-conditioned Grams fall back to a ridge via :func:`solve_gram`.
    """
    A = as_matrix(A, "A")
    y = as_vector(y, "y")
    m, k = A.shape
    if y.shape[0] != m:
        raise ValueError(f"dimension mismatch: A is {m}x{k}, y has length {y.shape[0]}")
    if k == 0:
        return np.zeros(0)
    return solve_gram(A.T @ A, A.T @ y)


def rank1_svd(M, tol: float = 1e-10, max_iter: int = 500) -> SingularTriple:
    """Leading singular triple of M by power iteration on ``M M^T``.

    The start vector is the normalized all-ones vector; a start that lands in
    the null space of ``M^T`` restarts from successive basis vectors. Stops
    once ``||M v - sigma u|| <= tol * ||M||_F``; after ``max_iter`` sweeps the
    best iterate is returned with ``converged=False``.
    """
    M = as_matrix(M, "M")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    if not M.any():
        raise ValueError("all-zero matrix has no leading singular triple")
    m = M.shape[0]
    fnorm = np.linalg.norm(M)
    u = np.full(m, 1.0 / np.sqrt(m))
    basis_next = 0
    converged = False
    for _ in range(max_iter):
        w = M.T @ u
        wn = np.linalg.norm(w)
        if wn == 0.0:
            # start orthogonal to the row space: restart from a basis vector
            u = np.zeros(m)
            u[basis_next % m] = 1.0
            basis_next += 1
            continue
        v = w / wn
        z = M @ v
        sigma = np.linalg.norm(z)
        if np.linalg.norm(z - sigma * u) <= tol * fnorm:
            converged = True
            u = z / sigma
            break
        u = z / sigma
    # make the returned triple self-consistent: sigma and v derived from u
    w = M.T @ u
    sigma = float(np.linalg.norm(w))
    v = w / sigma
    idx = int(np.argmax(np.abs(u)))
    if u[idx] < 0:
        u = -u
        v = -v
    return SingularTriple(sigma, u, v, converged)


def objective(Y, A, X) -> float:
    """Squared Frobenius reconstruction error ``||Y - A X||_F^2``.

    ``X`` may be a dense array or anything exposing ``to_dense()`` (the
    sparse coefficient matrix).
    """
    Y = as_matrix(Y, "Y")
    A = as_matrix(A, "A")
    Xd = X.to_dense() if hasattr(X, "to_dense") else as_matrix(X, "X")
    m, p = Y.shape
    if A.shape[0] != m or A.shape[1] != Xd.shape[0] or Xd.shape[1] != p:
        raise ValueError(
            f"shape mismatch: Y {Y.shape}, A {A.shape}, X {Xd.shape}"
        )
    R = Y - A @ Xd
    return float(np.dot(R.ravel(), R.ravel()))
