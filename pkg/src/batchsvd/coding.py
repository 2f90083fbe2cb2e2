"""Greedy sparse coding over sample batches.

The coefficient matrix keeps explicit row and column supports so the
switching procedures can relocate structural nonzeros without ever losing
track of the global budget. Coding itself is greedy pursuit: classic
per-sample OMP, and a batchwise variant that spends a single nonzero budget
across all samples at once.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, as_vector, least_squares, solve_gram

log = logging.getLogger(__name__)

UNIT_NORM_TOL = 1e-8
# residuals below this (relative to the input norm, floored at 1) count as zero
ZERO_RESIDUAL_RTOL = 1e-12


class SparseCoeff:
    """Sparse n x p coefficient matrix with explicit row and column supports.

    Entries are structural: a stored value may be numerically zero and still
    counts toward the nonzero budget. Row and column views are updated
    together by every mutator, so the two are cross-consistent at all times
    (``audit`` verifies this in tests).
    """

    __slots__ = ("n", "p", "_rows", "_cols")

    def __init__(self, n: int, p: int):
        n = int(n)
        p = int(p)
        if n < 1 or p < 1:
            raise ValueError(f"SparseCoeff needs n >= 1 and p >= 1, got {n}x{p}")
        self.n = n
        self.p = p
        self._rows: list[dict] = [{} for _ in range(n)]  # col -> value
        self._cols: list[set] = [set() for _ in range(p)]  # row indices

    @classmethod
    def from_dense(cls, arr) -> "SparseCoeff":
        """Build from a dense array; structural support = exact nonzeros."""
        arr = as_matrix(arr, "coefficient matrix")
        X = cls(arr.shape[0], arr.shape[1])
        for i, j in zip(*np.nonzero(arr)):
            X.set(int(i), int(j), float(arr[i, j]))
        return X

    def _check(self, i: int, j: int):
        if not (0 <= i < self.n and 0 <= j < self.p):
            raise ValueError(f"index ({i}, {j}) out of range for {self.n}x{self.p}")

    def set(self, i: int, j: int, value: float):
        """Insert or overwrite the structural entry at (i, j)."""
        self._check(i, j)
        self._rows[i][j] = float(value)
        self._cols[j].add(i)

    def unset(self, i: int, j: int):
        self._check(i, j)
        if j not in self._rows[i]:
            raise ValueError(f"no structural entry at ({i}, {j})")
        del self._rows[i][j]
        self._cols[j].discard(i)

    def has(self, i: int, j: int) -> bool:
        self._check(i, j)
        return j in self._rows[i]

    def get(self, i: int, j: int) -> float:
        self._check(i, j)
        return self._rows[i].get(j, 0.0)

    @property
    def nnz(self) -> int:
        return sum(len(r) for r in self._rows)

    def row_size(self, i: int) -> int:
        return len(self._rows[i])

    def col_size(self, j: int) -> int:
        return len(self._cols[j])

    def row_support(self, i: int) -> list:
        return sorted(self._rows[i])

    def col_support(self, j: int) -> list:
        return sorted(self._cols[j])

    def row_entries(self, i: int):
        """Return (cols, values) for row i, sorted by column index."""
        cols = sorted(self._rows[i])
        vals = [self._rows[i][c] for c in cols]
        return np.asarray(cols, dtype=np.intp), np.asarray(vals, dtype=np.float64)

    def col_entries(self, j: int):
        rows = sorted(self._cols[j])
        vals = [self._rows[r][j] for r in rows]
        return np.asarray(rows, dtype=np.intp), np.asarray(vals, dtype=np.float64)

    def set_row(self, i: int, cols, values):
        """Replace the whole support of row i."""
        cols = [int(c) for c in cols]
        values = [float(v) for v in values]
        if len(cols) != len(values):
            raise ValueError("cols and values length mismatch")
        if len(set(cols)) != len(cols):
            raise ValueError(f"duplicate columns in row {i} support")
        for c in cols:
            if not (0 <= c < self.p):
                raise ValueError(f"column {c} out of range")
        for c in self._rows[i]:
            self._cols[c].discard(i)
        self._rows[i] = dict(zip(cols, values))
        for c in cols:
            self._cols[c].add(i)

    def set_col(self, j: int, rows, values):
        """Replace the whole support of column j."""
        rows = [int(r) for r in rows]
        values = [float(v) for v in values]
        if len(rows) != len(values):
            raise ValueError("rows and values length mismatch")
        if len(set(rows)) != len(rows):
            raise ValueError(f"duplicate rows in column {j} support")
        for r in rows:
            if not (0 <= r < self.n):
                raise ValueError(f"row {r} out of range")
        for r in self._cols[j]:
            del self._rows[r][j]
        self._cols[j] = set(rows)
        for r, v in zip(rows, values):
            self._rows[r][j] = v

    def scale_row(self, i: int, factor: float):
        factor = float(factor)
        for c in self._rows[i]:
            self._rows[i][c] *= factor

    def permute_rows(self, order):
        """Reorder rows so that new row k is old row ``order[k]``."""
        order = [int(i) for i in order]
        if sorted(order) != list(range(self.n)):
            raise ValueError("order must be a permutation of the row indices")
        self._rows = [self._rows[i] for i in order]
        inverse = {old: new for new, old in enumerate(order)}
        self._cols = [{inverse[r] for r in s} for s in self._cols]

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.p))
        for i, row in enumerate(self._rows):
            for j, v in row.items():
                out[i, j] = v
        return out

    def copy(self) -> "SparseCoeff":
        out = SparseCoeff(self.n, self.p)
        out._rows = [dict(r) for r in self._rows]
        out._cols = [set(s) for s in self._cols]
        return out

    def entries(self):
        """Yield (row, col, value) sorted by (col, row), the serialization order."""
        for j in range(self.p):
            for i in sorted(self._cols[j]):
                yield i, j, self._rows[i][j]

    def support_set(self) -> frozenset:
        return frozenset((i, j) for i, row in enumerate(self._rows) for j in row)

    def audit(self):
        """Verify the row and column views describe the same entry set."""
        from_rows = {(i, j) for i, row in enumerate(self._rows) for j in row}
        from_cols = {(i, j) for j, col in enumerate(self._cols) for i in col}
        if from_rows != from_cols:
            raise AssertionError(
                f"support views inconsistent: {len(from_rows)} row entries vs "
                f"{len(from_cols)} column entries"
            )

    def __eq__(self, other):
        if not isinstance(other, SparseCoeff):
            return NotImplemented
        return (
            self.n == other.n
            and self.p == other.p
            and self._rows == other._rows
        )

    def __repr__(self):
        return f"SparseCoeff({self.n}x{self.p}, nnz={self.nnz})"


@dataclass(frozen=True)
class LearnConfig:
    """Hyperparameters for the batchwise solver and the benchmark pipeline.

    ``budget`` is the total structural nonzero count across the whole batch.
    ``pair_fraction`` controls how many row pairs the inter-row phase visits:
    None means all pairs for up to 64 atoms and ``2/(n-1)`` beyond that.
    """

    budget: int
    init_iters: int = 80
    inner_sweeps: int = 3
    amplitude_iters: int = 10
    epsilon: float = 0.0
    trigger: float = 0.05
    pair_fraction: float | None = None
    seed: int = 0
    max_outer: int = 20

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        for name in ("init_iters", "inner_sweeps", "amplitude_iters", "max_outer"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if self.trigger < 0:
            raise ValueError("trigger must be nonnegative")
        if self.pair_fraction is not None and not (0.0 < self.pair_fraction <= 1.0):
            raise ValueError("pair_fraction must lie in (0, 1]")

    def effective_pair_fraction(self, n_atoms: int) -> float:
        if self.pair_fraction is not None:
            return self.pair_fraction
        if n_atoms <= 64:
            return 1.0
        return 2.0 / (n_atoms - 1)


def _residual_is_zero(res_norm: float, ref_norm: float) -> bool:
    return res_norm <= ZERO_RESIDUAL_RTOL * max(1.0, ref_norm)


def omp(y, A, k: int):
    """Orthogonal matching pursuit for a single sample.

    Greedily adds the atom with the largest |correlation| against the current
    residual (ties break toward the smaller atom index), then refits all
    selected coefficients by least squares. Returns the selected indices in
    selection order and the matching coefficients; fewer than ``k`` indices
    come back when the residual reaches zero early.
    """
    A = as_matrix(A, "A")
    y = as_vector(y, "y")
    m, n = A.shape
    if y.shape[0] != m:
        raise ValueError(f"dimension mismatch: A is {m}x{n}, y has length {y.shape[0]}")
    if not (1 <= k <= min(m, n)):
        raise ValueError(f"k must satisfy 1 <= k <= min(m, n) = {min(m, n)}, got {k}")
    col_norms = np.linalg.norm(A, axis=0)
    if np.any(col_norms == 0.0):
        raise ValueError("dictionary has an all-zero column")

    ynorm = np.linalg.norm(y)
    residual = y.copy()
    support: list[int] = []
    coeffs = np.zeros(0)
    for _ in range(k):
        if _residual_is_zero(np.linalg.norm(residual), ynorm):
            break
        scores = np.abs(A.T @ residual)
        scores[support] = -1.0
        pick = int(np.argmax(scores))  # first max: smallest index wins ties
        support.append(pick)
        coeffs = least_squares(A[:, support], y)
        residual = y - A[:, support] @ coeffs
    return np.asarray(support, dtype=np.intp), coeffs


def block_omp(Y, A, budget: int) -> SparseCoeff:
    """Batchwise OMP: one greedy budget shared across all samples.

    Equivalent to OMP on the stacked sample vector with the block-diagonal
    dictionary (one copy of A per sample) but never materializes it. Each
    step selects the globally largest |correlation| over all (atom, sample)
    pairs not yet selected (ties break toward the smaller sample index, then
    the smaller atom index) and refits only that sample's coefficients on
    its enlarged support.
    """
    A = as_matrix(A, "A")
    Y = as_matrix(Y, "Y")
    m, n = A.shape
    if Y.shape[0] != m:
        raise ValueError(f"dimension mismatch: A is {m}x{n}, Y is {Y.shape[0]}x{Y.shape[1]}")
    p = Y.shape[1]
    if not (1 <= budget <= n * p):
        raise ValueError(f"budget must satisfy 1 <= budget <= n*p = {n * p}, got {budget}")
    if np.any(np.abs(np.linalg.norm(A, axis=0) - 1.0) > UNIT_NORM_TOL):
        raise ValueError("dictionary columns must be unit-normalized")

    ynorm = np.linalg.norm(Y)
    R = Y.copy()
    selected = np.zeros((n, p), dtype=bool)
    supports: list[list[int]] = [[] for _ in range(p)]
    coeffs: list[np.ndarray] = [np.zeros(0) for _ in range(p)]

    # per-column best candidate cache; only the refit column changes per step
    scores = np.abs(A.T @ R)
    best_vals = scores.max(axis=0)
    best_rows = scores.argmax(axis=0)
    col_sq = np.sum(R * R, axis=0)

    for _ in range(budget):
        if _residual_is_zero(np.sqrt(max(col_sq.sum(), 0.0)), ynorm):
            break
        j = int(np.argmax(best_vals))  # first max: smallest sample index
        i = int(best_rows[j])
        selected[i, j] = True
        supports[j].append(i)
        coeffs[j] = least_squares(A[:, supports[j]], Y[:, j])
        R[:, j] = Y[:, j] - A[:, supports[j]] @ coeffs[j]
        col_sq[j] = float(np.dot(R[:, j], R[:, j]))
        col_scores = np.abs(A.T @ R[:, j])
        col_scores[selected[:, j]] = -1.0
        best_vals[j] = col_scores.max()
        best_rows[j] = col_scores.argmax()

    X = SparseCoeff(n, p)
    for j in range(p):
        if supports[j]:
            X.set_col(j, supports[j], coeffs[j])
    return X


def initial_dictionary(Y, n_atoms: int, rng: np.random.Generator) -> np.ndarray:
    """Seed dictionary: distinct sample columns, Gaussian fill-ins, unit norms.

    Picks ``n_atoms`` distinct columns of Y uniformly at random and
    normalizes them; zero columns are skipped and any shortfall (including
    p < n_atoms) is filled with normalized Gaussian atoms.
    """
    Y = as_matrix(Y, "Y")
    if n_atoms < 1:
        raise ValueError("n_atoms must be at least 1")
    m, p = Y.shape
    A = np.empty((m, n_atoms))
    count = 0
    for j in rng.permutation(p):
        nrm = np.linalg.norm(Y[:, j])
        if nrm > 0.0:
            A[:, count] = Y[:, j] / nrm
            count += 1
            if count == n_atoms:
                break
    while count < n_atoms:
        g = rng.standard_normal(m)
        nrm = np.linalg.norm(g)
        if nrm > 0.0:
            A[:, count] = g / nrm
            count += 1
    return A


def reseed_dead_atoms(A: np.ndarray, dead_rows, Y, residual) -> int:
    """Replace unused atoms in-place with the worst-represented samples.

    Dead atoms point at the sample columns with the largest residual norms
    (normalized, distinct per call, skipping zero samples). Falls back to a
    basis vector in the pathological case where no usable sample remains.
    Returns the number of atoms replaced.
    """
    dead_rows = sorted(int(i) for i in dead_rows)
    if not dead_rows:
        return 0
    m = A.shape[0]
    order = np.argsort(-np.linalg.norm(residual, axis=0), kind="stable")
    candidates = iter(order)
    for i in dead_rows:
        atom = None
        for j in candidates:
            nrm = np.linalg.norm(Y[:, j])
            if nrm > 0.0:
                atom = Y[:, j] / nrm
                break
        if atom is None:
            atom = np.zeros(m)
            atom[i % m] = 1.0
        A[:, i] = atom
        log.debug("re-seeded dead atom %d", i)
    return len(dead_rows)


def dict_approx_init(Y, A0, budget: int, iters: int):
    """Alternating warm start: batchwise OMP then a dictionary least squares.

    Runs ``iters`` rounds of {X <- block_omp(Y, A, budget); A <- argmin
    ||Y - A X||_F^2 over the atoms with nonempty rows}, re-normalizing atoms
    (with compensating row rescales) after every dictionary update. Returns
    the final pair plus the objective recorded after every half-step; the
    recorded sequence carries no monotonicity guarantee. Atoms whose rows
    stayed empty through every round are re-seeded at the end.
    """
    Y = as_matrix(Y, "Y")
    A0 = as_matrix(A0, "A0")
    if iters < 1:
        raise ValueError("iters must be at least 1")
    if np.any(np.abs(np.linalg.norm(A0, axis=0) - 1.0) > UNIT_NORM_TOL):
        raise ValueError("A0 columns must be unit-normalized")
    m, p = Y.shape
    n = A0.shape[1]
    A = A0.copy()
    X = SparseCoeff(n, p)
    trace: list[float] = []
    used_ever = np.zeros(n, dtype=bool)

    for _ in range(iters):
        X = block_omp(Y, A, budget)
        Xd = X.to_dense()
        trace.append(_objective_dense(Y, A, Xd))

        used = np.asarray([X.row_size(i) > 0 for i in range(n)])
        used_ever |= used
        if used.any():
            Xu = Xd[used, :]
            Z = solve_gram(Xu @ Xu.T, Xu @ Y.T)
            A[:, used] = Z.T
        # re-normalize so the next coding round sees unit atoms; the
        # compensating row rescale keeps the product A X unchanged
        for i in np.flatnonzero(used):
            nrm = np.linalg.norm(A[:, i])
            if nrm > 0.0:
                A[:, i] /= nrm
                X.scale_row(i, nrm)
                Xd[i, :] *= nrm
        trace.append(_objective_dense(Y, A, Xd))

    dead = np.flatnonzero(~used_ever)
    if dead.size:
        reseed_dead_atoms(A, dead, Y, Y - A @ X.to_dense())
        log.info("dictionary init: re-seeded %d never-used atoms", dead.size)
    return A, X, trace


def _objective_dense(Y, A, Xd) -> float:
    R = Y - A @ Xd
    return float(np.dot(R.ravel(), R.ravel()))
