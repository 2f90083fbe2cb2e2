"""Batchwise monotone dictionary learning.

The solver alternates three phases that each provably never increase the
squared reconstruction error while the total structural nonzero count stays
fixed: inner-row switching (relocate one row's nonzeros among columns),
inter-row switching (exchange nonzeros between row pairs on their unique
columns), and amplitude adjustment (alternating least squares with the
support frozen). A standard K-SVD baseline with a per-sample budget lives
here too for equal-budget comparisons.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .coding import SparseCoeff, LearnConfig, UNIT_NORM_TOL, omp, reseed_dead_atoms
from .linalg import NumericalError, as_matrix, least_squares, rank1_svd, solve_gram

log = logging.getLogger(__name__)

PHASES = ("inner", "inter", "amplitude", "outer")
# phases whose consecutive trace values must never increase
MONOTONE_PHASES = frozenset({"inner", "inter", "amplitude"})


class ObjectiveTrace:
    """Ordered (phase, objective) samples recorded during a solver run."""

    def __init__(self):
        self._entries: list[tuple[str, float]] = []

    def append(self, phase: str, value: float):
        if phase not in PHASES:
            raise ValueError(f"unknown phase {phase!r}")
        value = float(value)
        if not np.isfinite(value):
            raise NumericalError(f"non-finite objective recorded in phase {phase!r}")
        self._entries.append((phase, value))

    def entries(self) -> list:
        return list(self._entries)

    def values(self, phase: str | None = None) -> list:
        if phase is None:
            return [v for _, v in self._entries]
        return [v for ph, v in self._entries if ph == phase]

    def to_list(self) -> list:
        return [[ph, v] for ph, v in self._entries]

    def __len__(self):
        return len(self._entries)

    @staticmethod
    def _increases(seq, rtol):
        bad = []
        for a, b in zip(seq, seq[1:]):
            if b - a > rtol * max(abs(a), abs(b)):
                bad.append((a, b))
        return bad

    def phase_violations(self, rtol: float = 1e-9) -> list:
        """Monotonicity breaks within contiguous runs of a monotone phase."""
        bad = []
        for (ph_a, a), (ph_b, b) in zip(self._entries, self._entries[1:]):
            if ph_a == ph_b and ph_b in MONOTONE_PHASES:
                if b - a > rtol * max(abs(a), abs(b)):
                    bad.append((ph_b, a, b))
        return bad

    def outer_violations(self, rtol: float = 1e-9) -> list:
        """Monotonicity breaks across the outer objective sequence."""
        return self._increases(self.values("outer"), rtol)


@dataclass
class RowWorkspace:
    """One coefficient row mid-update.

    ``residual`` is the batch residual with this row's own contribution added
    back (None when the caller passes the shared residual separately, as the
    pairwise switch does). ``support`` and ``values`` are aligned; the
    support is what the nonzero budget counts.
    """

    row_index: int
    residual: np.ndarray | None
    atom: np.ndarray
    support: np.ndarray
    values: np.ndarray
    degenerate: bool = field(default=False)


def inner_row_switch(ws: RowWorkspace, n_iters: int):
    """Alternate rank-1 refits with support re-selection for one row.

    Each round replaces the atom by the leading left singular vector of the
    residual restricted to the current support, then re-selects the support
    as the ``k`` columns with the largest |projection| onto that atom over
    all columns (ties to the smaller column index) and sets the coefficients
    to those projections. The support size ``k`` never changes.

    Returns the updated workspace and the local objective recorded at entry
    and after every half-step; the sequence is non-increasing.
    """
    if ws.residual is None:
        raise ValueError("workspace must carry the residual")
    if n_iters < 1:
        raise ValueError("n_iters must be at least 1")
    Yt = ws.residual
    supp = np.asarray(ws.support, dtype=np.intp)
    vals = np.asarray(ws.values, dtype=np.float64)
    k = supp.size
    if k < 1:
        raise ValueError("inner-row switching needs a nonempty support")
    if vals.size != k:
        raise ValueError("support and values length mismatch")
    a = np.asarray(ws.atom, dtype=np.float64).copy()

    fnorm_sq = float(np.dot(Yt.ravel(), Yt.ravel()))
    c_supp = Yt[:, supp].T @ a
    entry_obj = (
        fnorm_sq - 2.0 * float(vals @ c_supp) + float(a @ a) * float(vals @ vals)
    )
    locals_ = [entry_obj]
    degenerate = False

    for _ in range(n_iters):
        block = Yt[:, supp]
        if not block.any():
            # nothing to fit on this support: zero the row, keep the atom
            vals = np.zeros(k)
            degenerate = True
            locals_.append(fnorm_sq)
            break
        triple = rank1_svd(block)
        # monotonicity guard: keep the incoming atom if the (possibly
        # unconverged) power iteration returned a weaker direction
        a_norm = np.linalg.norm(a)
        if a_norm > 0.0:
            a_unit = a / a_norm
            old_energy = float(np.sum((block.T @ a_unit) ** 2))
            a = triple.u if triple.sigma**2 >= old_energy else a_unit
        else:
            a = triple.u
        proj = Yt.T @ a
        locals_.append(fnorm_sq - float(np.sum(proj[supp] ** 2)))
        order = np.argsort(-np.abs(proj), kind="stable")
        supp = np.sort(order[:k])
        vals = proj[supp]
        locals_.append(fnorm_sq - float(np.sum(vals**2)))

    out = RowWorkspace(ws.row_index, ws.residual, a, supp, vals, degenerate)
    return out, locals_


def inter_row_switch(residual, row_i: RowWorkspace, row_j: RowWorkspace):
    """Exchange structural nonzeros between two rows, count preserved.

    ``residual`` is the batch residual with both rows' contributions removed.
    Every column outside the two rows' shared support is a candidate; each
    candidate column offers its better-|projection| row (ties to the first
    row), and the strongest candidates, as many as the symmetric difference
    of the two supports, become the new support on those columns with the
    projection values as coefficients. Shared-support columns keep their old
    entries, so the combined nonzero count of the two rows is exactly
    preserved and the joint local objective never increases.
    """
    Yt = as_matrix(residual, "residual")
    p = Yt.shape[1]
    a_i = np.asarray(row_i.atom, dtype=np.float64)
    a_j = np.asarray(row_j.atom, dtype=np.float64)
    if a_i.shape[0] != Yt.shape[0] or a_j.shape[0] != Yt.shape[0]:
        raise ValueError("atom length does not match the residual row count")
    for name, atom in (("first", a_i), ("second", a_j)):
        if abs(np.linalg.norm(atom) - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"{name} atom must have unit norm")
    set_i = {int(c) for c in row_i.support}
    set_j = {int(c) for c in row_j.support}
    if any(c >= p or c < 0 for c in set_i | set_j):
        raise ValueError("support column out of range: column count mismatch")
    shared = set_i & set_j
    unique_count = len(set_i | set_j) - len(shared)
    if unique_count == 0:
        return row_i, row_j

    cand_cols = np.asarray(sorted(set(range(p)) - shared), dtype=np.intp)
    M = np.vstack((a_i, a_j)) @ Yt[:, cand_cols]
    absM = np.abs(M)
    pick_first = absM[0] >= absM[1]  # ties go to the first row
    best = np.where(pick_first, absM[0], absM[1])
    order = np.argsort(-best, kind="stable")[:unique_count]

    val_i = dict(zip((int(c) for c in row_i.support), row_i.values))
    val_j = dict(zip((int(c) for c in row_j.support), row_j.values))
    new_i = {c: val_i[c] for c in shared}
    new_j = {c: val_j[c] for c in shared}
    for t in order:
        col = int(cand_cols[t])
        if pick_first[t]:
            new_i[col] = float(M[0, t])
        else:
            new_j[col] = float(M[1, t])

    def _pack(ws, entries):
        cols = np.asarray(sorted(entries), dtype=np.intp)
        vals = np.asarray([entries[c] for c in cols], dtype=np.float64)
        return RowWorkspace(ws.row_index, ws.residual, ws.atom, cols, vals)

    return _pack(row_i, new_i), _pack(row_j, new_j)


def amplitude_adjust(Y, A, X: SparseCoeff, n_iters: int):
    """Alternating least squares on amplitudes with the support frozen.

    Each round recomputes the used atoms by an unconstrained least squares
    against the fixed coefficients, then refits every column's coefficients
    on its fixed support. Structural positions of X are bit-identical before
    and after; the objective never increases at either half-step. Atoms whose
    rows are empty are left untouched (a singular coefficient Gram falls back
    to a ridge inside the solve).
    """
    Y = as_matrix(Y, "Y")
    A = as_matrix(A, "A").copy()
    if n_iters < 1:
        raise ValueError("n_iters must be at least 1")
    m, p = Y.shape
    n = A.shape[1]
    if X.n != n or X.p != p or A.shape[0] != m:
        raise ValueError(f"shape mismatch: Y {Y.shape}, A {A.shape}, X {X.n}x{X.p}")
    X = X.copy()

    for _ in range(n_iters):
        used = [i for i in range(n) if X.row_size(i) > 0]
        if used:
            Xd = X.to_dense()
            Xu = Xd[used, :]
            Z = solve_gram(Xu @ Xu.T, Xu @ Y.T)
            A[:, used] = Z.T
        for j in range(p):
            rows = X.col_support(j)
            if not rows:
                continue
            coef = least_squares(A[:, rows], Y[:, j])
            for r, c in zip(rows, coef):
                X.set(r, j, c)
    return A, X


def _sample_pairs(n: int, fraction: float, rng: np.random.Generator) -> list:
    pairs = list(itertools.combinations(range(n), 2))
    if not pairs:
        return []
    count = min(len(pairs), int(np.ceil(fraction * len(pairs))))
    if count >= len(pairs):
        return pairs
    chosen = rng.choice(len(pairs), size=count, replace=False)
    return [pairs[t] for t in sorted(chosen)]


def batch_svd(Y, A, X: SparseCoeff, cfg: LearnConfig):
    """Monotone batchwise solver: switching plus amplitude refinement.

    Rows are ordered once by descending support size, then each outer round
    sweeps every nonempty row with :func:`inner_row_switch`, rescales atoms
    to unit norm, runs :func:`inter_row_switch` over a seeded sample of row
    pairs whenever the inner phase improved by less than ``cfg.trigger``, and
    finishes with ``cfg.amplitude_iters`` amplitude alternations. Stops when
    an outer round improves by at most ``cfg.epsilon`` or after
    ``cfg.max_outer`` rounds.

    Returns the updated dictionary and coefficients (atoms unit-normalized)
    together with the recorded objective trace. The structural nonzero count
    of X is identical before and after.
    """
    Y = as_matrix(Y, "Y")
    A = as_matrix(A, "A").copy()
    m, p = Y.shape
    n = A.shape[1]
    if X.n != n or X.p != p or A.shape[0] != m:
        raise ValueError(f"shape mismatch: Y {Y.shape}, A {A.shape}, X {X.n}x{X.p}")
    X = X.copy()
    nnz_total = X.nnz

    # visit heavier rows first; the order is fixed for the whole run
    sizes = np.asarray([X.row_size(i) for i in range(n)])
    order = np.argsort(-sizes, kind="stable")
    A = A[:, order]
    X.permute_rows(order)

    rng = np.random.default_rng(cfg.seed)
    trace = ObjectiveTrace()
    R = Y - A @ X.to_dense()
    obj = float(np.dot(R.ravel(), R.ravel()))
    trace.append("outer", obj)

    for _ in range(cfg.max_outer):
        # refresh the residual to cap incremental drift
        R = Y - A @ X.to_dense()
        obj = float(np.dot(R.ravel(), R.ravel()))
        outer_start = obj

        # --- inner-row phase ---
        for i in range(n):
            if X.row_size(i) == 0:
                continue
            supp, vals = X.row_entries(i)
            R[:, supp] += np.outer(A[:, i], vals)
            ws = RowWorkspace(i, R, A[:, i], supp, vals)
            ws, local = inner_row_switch(ws, cfg.inner_sweeps)
            A[:, i] = ws.atom
            X.set_row(i, ws.support, ws.values)
            R[:, ws.support] -= np.outer(ws.atom, ws.values)
            obj = local[-1]
            trace.append("inner", obj)
        inner_decrement = outer_start - obj

        # --- rescale atoms to unit norm (objective-neutral) ---
        for i in range(n):
            nrm = np.linalg.norm(A[:, i])
            if nrm > 0.0 and nrm != 1.0:
                A[:, i] /= nrm
                X.scale_row(i, nrm)

        # --- inter-row phase, only when the inner phase stalls ---
        if inner_decrement < cfg.trigger:
            fraction = cfg.effective_pair_fraction(n)
            for i, j in _sample_pairs(n, fraction, rng):
                si, vi = X.row_entries(i)
                sj, vj = X.row_entries(j)
                if set(si) == set(sj):
                    continue  # empty symmetric difference: no-op
                olds = np.asarray(sorted(set(si) | set(sj)), dtype=np.intp)
                sq_old = float(np.sum(R[:, olds] ** 2))
                R[:, si] += np.outer(A[:, i], vi)
                R[:, sj] += np.outer(A[:, j], vj)
                wi = RowWorkspace(i, None, A[:, i], si, vi)
                wj = RowWorkspace(j, None, A[:, j], sj, vj)
                wi, wj = inter_row_switch(R, wi, wj)
                news = sorted((set(wi.support) | set(wj.support)) - set(olds))
                if news:
                    sq_old += float(np.sum(R[:, np.asarray(news, dtype=np.intp)] ** 2))
                R[:, wi.support] -= np.outer(wi.atom, wi.values)
                R[:, wj.support] -= np.outer(wj.atom, wj.values)
                X.set_row(i, wi.support, wi.values)
                X.set_row(j, wj.support, wj.values)
                touched = np.asarray(sorted(set(olds) | set(news)), dtype=np.intp)
                obj += float(np.sum(R[:, touched] ** 2)) - sq_old
                trace.append("inter", obj)

        # --- re-seed unused atoms (objective-neutral: their rows are zero) ---
        dead = [i for i in range(n) if X.row_size(i) == 0]
        if dead:
            reseed_dead_atoms(A, dead, Y, R)

        # --- amplitude phase ---
        for _ in range(cfg.amplitude_iters):
            A, X = amplitude_adjust(Y, A, X, 1)
            R = Y - A @ X.to_dense()
            obj = float(np.dot(R.ravel(), R.ravel()))
            trace.append("amplitude", obj)

        trace.append("outer", obj)
        assert X.nnz == nnz_total, "nonzero budget violated"
        if outer_start - obj <= cfg.epsilon:
            break

    # unit-norm atoms on the way out (objective-neutral)
    for i in range(n):
        nrm = np.linalg.norm(A[:, i])
        if nrm > 0.0 and nrm != 1.0:
            A[:, i] /= nrm
            X.scale_row(i, nrm)
    return A, X, trace


def ksvd(Y, A0, k: int, iters: int):
    """Classic K-SVD with a fixed per-sample budget.

    Codes every sample independently with OMP (at most ``k`` atoms each),
    then updates atoms one at a time by a rank-1 fit of the residual
    restricted to the samples using that atom. Unused atoms are re-seeded
    from the worst-represented samples. The recorded objective trace is not
    guaranteed monotone: the greedy coding step can increase it.
    """
    Y = as_matrix(Y, "Y")
    A0 = as_matrix(A0, "A0")
    m, p = Y.shape
    n = A0.shape[1]
    if A0.shape[0] != m:
        raise ValueError(f"dimension mismatch: Y is {m}x{p}, A0 is {A0.shape[0]}x{n}")
    if not (1 <= k <= min(m, n)):
        raise ValueError(f"k must satisfy 1 <= k <= min(m, n) = {min(m, n)}, got {k}")
    if np.any(np.abs(np.linalg.norm(A0, axis=0) - 1.0) > UNIT_NORM_TOL):
        raise ValueError("A0 columns must be unit-normalized")
    if iters < 1:
        raise ValueError("iters must be at least 1")

    A = A0.copy()
    trace = ObjectiveTrace()
    Xd = np.zeros((n, p))
    row_users: list[list[int]] = [[] for _ in range(n)]

    for _ in range(iters):
        # sparse coding
        Xd[:] = 0.0
        row_users = [[] for _ in range(n)]
        for j in range(p):
            supp, coef = omp(Y[:, j], A, k)
            Xd[supp, j] = coef
            for i in supp:
                row_users[int(i)].append(j)
        R = Y - A @ Xd
        trace.append("outer", float(np.dot(R.ravel(), R.ravel())))

        # atom-by-atom rank-1 updates
        for i in range(n):
            users = row_users[i]
            if not users:
                reseed_dead_atoms(A, [i], Y, Y - A @ Xd)
                continue
            cols = np.asarray(users, dtype=np.intp)
            E = Y[:, cols] - A @ Xd[:, cols] + np.outer(A[:, i], Xd[i, cols])
            if not E.any():
                Xd[i, cols] = 0.0
                continue
            triple = rank1_svd(E)
            A[:, i] = triple.u
            Xd[i, cols] = triple.sigma * triple.v
        R = Y - A @ Xd
        trace.append("outer", float(np.dot(R.ravel(), R.ravel())))

    X = SparseCoeff(n, p)
    for i in range(n):
        if row_users[i]:
            X.set_row(i, row_users[i], Xd[i, np.asarray(row_users[i], dtype=np.intp)])
    return A, X, trace
