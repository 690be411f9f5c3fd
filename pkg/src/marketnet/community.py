"""Marcenko-Pastur filtering of correlation matrices and modularity maximisation.

A correlation matrix is split into a noise part (eigenvalues up to the upper
Marcenko-Pastur edge), a market mode (largest eigenvalue) and a group part
(everything strictly in between).  Two objectives are maximised:

* ``Q2`` scores a partition against ``C - C_noise``;
* ``Q3`` scores it against the group part alone.

Both are normalised by the signed sum of ``C``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import MarketNetError

OBJECTIVES = ("Q2", "Q3")
BRUTE_FORCE_MAX_N = 12
DEFAULT_RESTARTS = 8


@dataclass
class RmtDecomposition:
    lambda_minus: float
    lambda_plus: float
    Cr: np.ndarray
    Cg: np.ndarray
    Cm: np.ndarray
    eigenvalues: np.ndarray
    T: int

    @property
    def Cs(self) -> np.ndarray:
        return self.Cg + self.Cm

    @property
    def has_group(self) -> bool:
        return self.n_group > 0

    @property
    def n_group(self) -> int:
        lam = self.eigenvalues[:-1]
        return int(np.count_nonzero(lam > self.lambda_plus))


@dataclass
class CommunityPartition:
    assignment: np.ndarray
    modularity: float
    objective: str
    Cnorm: float

    @property
    def n_communities(self) -> int:
        return int(self.assignment.max()) + 1 if self.assignment.size else 0

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment)


def mp_bounds(n: int, T: int) -> tuple[float, float]:
    """Edges ``(1 -/+ sqrt(n/T))^2`` of the Marcenko-Pastur support."""
    if n < 0 or T < 1:
        raise ValueError("need n >= 0 and T >= 1")
    q = math.sqrt(n / T)
    return (1.0 - q) ** 2, (1.0 + q) ** 2


def rmt_decompose(C: np.ndarray, T: int) -> RmtDecomposition:
    """Split ``C`` into noise, group and market components.

    Eigenvalues are taken in increasing order.  The largest goes to the
    market mode; of the rest, those ``<= lambda_plus`` form the noise part and
    those above it the group part.  The three parts sum back to ``C``.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2:
        raise ValueError("C must be a symmetric square matrix")
    n = C.shape[0]
    if C.shape != (n, n) or not np.allclose(C, C.T, atol=1e-12, rtol=0):
        raise ValueError("C must be a symmetric square matrix")
    if not np.allclose(np.diag(C), 1.0, atol=1e-8):
        raise ValueError("C must have a unit diagonal")
    lm, lp = mp_bounds(n, T)
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    parts = {"r": np.zeros((n, n)), "g": np.zeros((n, n)), "m": np.zeros((n, n))}
    for i in range(n):
        key = "m" if i == n - 1 else ("r" if w[i] <= lp else "g")
        parts[key] += w[i] * np.outer(V[:, i], V[:, i])
    return RmtDecomposition(lm, lp, parts["r"], parts["g"], parts["m"], w, T)


def modularity_matrix(decomp: RmtDecomposition, objective: str) -> np.ndarray:
    if objective == "Q2":
        return decomp.Cs
    if objective == "Q3":
        if not decomp.has_group:
            raise MarketNetError("no mesoscopic component: the group matrix is null, Q3 is undefined")
        return decomp.Cg
    raise ValueError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")


def c_norm(C: np.ndarray) -> float:
    total = float(np.sum(C))
    if not total > 0:
        raise MarketNetError(f"degenerate normalizer: sum of C is {total:.3g}")
    return total


def _evaluate(B: np.ndarray, s: np.ndarray, norm: float) -> float:
    s = np.asarray(s)
    same = s[:, None] == s[None, :]
    return float(np.sum(B[same]) / norm)


def modularity_q2(C: np.ndarray, decomp: RmtDecomposition, s: Sequence[int]) -> float:
    """Within-community sum of ``C - C_noise`` over ``sum(C)``."""
    return _evaluate(modularity_matrix(decomp, "Q2"), np.asarray(s), c_norm(C))


def modularity_q3(C: np.ndarray, decomp: RmtDecomposition, s: Sequence[int]) -> float:
    """Within-community sum of the group component over ``sum(C)``."""
    return _evaluate(modularity_matrix(decomp, "Q3"), np.asarray(s), c_norm(C))


def evaluate(C, decomp, s, objective: str) -> float:
    return modularity_q2(C, decomp, s) if objective == "Q2" else modularity_q3(C, decomp, s)


def relabel(s: Sequence[int]) -> np.ndarray:
    """Contiguous ids from 0 in order of first appearance."""
    mapping: dict[int, int] = {}
    out = np.empty(len(s), dtype=int)
    for i, c in enumerate(s):
        out[i] = mapping.setdefault(int(c), len(mapping))
    return out


def _local_moves(A: np.ndarray, order: np.ndarray) -> tuple[np.ndarray, bool]:
    """One Louvain level: greedily move nodes of the aggregate matrix ``A``.

    ``Q`` (un-normalised) is the sum of ``A`` over same-community pairs, so
    moving node ``u`` from ``c`` to ``d`` changes it by
    ``2 (w_u(d) - w_u(c minus u))`` with ``w_u(X) = sum_{v in X} A_uv``.
    Candidates are the communities of ``u``'s non-zero neighbours plus an
    empty one.  Ties go to the lowest community id.
    """
    k = A.shape[0]
    comm = np.arange(k)
    eps = 1e-13 * max(1.0, float(np.max(np.abs(A))) if A.size else 1.0)
    moved_any = False
    improved = True
    while improved:
        improved = False
        for u in order:
            cu = comm[u]
            row = A[u]
            w = np.bincount(comm, weights=row, minlength=k)
            stay = w[cu] - row[u]
            nbr = np.unique(comm[(row != 0) & (np.arange(k) != u)])
            empty = np.setdiff1d(np.arange(k), comm, assume_unique=False)
            best_c, best_gain = cu, eps
            cands = set(nbr.tolist())
            if empty.size:
                cands.add(int(empty[0]))
            cands.discard(int(cu))
            # ascending ids with a strict comparison: lowest id wins ties
            for d in sorted(cands):
                gain = 2.0 * (w[d] - stay)
                if gain > best_gain:
                    best_c, best_gain = d, gain
            if best_c != cu:
                comm[u] = best_c
                improved = True
                moved_any = True
    return relabel(comm), moved_any


def _louvain_once(B: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = B.shape[0]
    membership = np.arange(n)
    A = B.copy()
    while True:
        order = rng.permutation(A.shape[0])
        comm, moved = _local_moves(A, order)
        if not moved:
            break
        membership = comm[membership]
        k = int(comm.max()) + 1
        H = np.zeros((A.shape[0], k))
        H[np.arange(A.shape[0]), comm] = 1.0
        A = H.T @ A @ H
        if k == 1:
            break
    return relabel(membership)


def louvain_maximize(
    C: np.ndarray,
    decomp: RmtDecomposition,
    objective: str = "Q2",
    seed: int = 0,
    restarts: int = DEFAULT_RESTARTS,
) -> CommunityPartition:
    """Louvain-style maximisation of ``Q2`` or ``Q3``.

    Aggregation sums entries of the filtered matrix itself over groups; no
    degree-based null model is rebuilt between levels.  Node order at each
    level is shuffled from ``seed``; ``restarts`` independent runs are made
    with seeds ``seed, seed+1, ...`` and the best kept (earliest on ties).
    """
    B = modularity_matrix(decomp, objective)
    norm = c_norm(C)
    n = B.shape[0]
    if n == 0:
        raise ValueError("empty matrix")
    best = None
    for r in range(max(1, restarts)):
        rng = np.random.default_rng(seed + r)
        s = _louvain_once(B, rng)
        q = _evaluate(B, s, norm)
        if best is None or q > best[0] + 1e-15:
            best = (q, s)
    q, s = best
    return CommunityPartition(assignment=s, modularity=q, objective=objective, Cnorm=norm)


def _set_partitions_best(B: np.ndarray) -> tuple[float, np.ndarray]:
    """Exhaustive search over restricted-growth strings with incremental scores."""
    n = B.shape[0]
    s = np.zeros(n, dtype=int)
    best = [-math.inf, None]
    diag = np.diag(B)
    # score of a block grows by 2 * sum_{j<i in block} B_ij + B_ii when i joins
    members: list[list[int]] = []

    def rec(i: int, score: float):
        if i == n:
            if score > best[0] + 1e-15:
                best[0] = score
                best[1] = s.copy()
            return
        for b in range(len(members) + 1):
            if b == len(members):
                members.append([i])
                inc = diag[i]
            else:
                inc = 2.0 * float(B[i, members[b]].sum()) + diag[i]
                members[b].append(i)
            s[i] = b
            rec(i + 1, score + inc)
            members[b].pop()
            if not members[b]:
                members.pop()

    rec(0, 0.0)
    return best[0], best[1]


def brute_force_partition(C: np.ndarray, decomp: RmtDecomposition, objective: str = "Q2") -> CommunityPartition:
    """Exact maximiser by enumerating all set partitions (``n <= 12``)."""
    B = modularity_matrix(decomp, objective)
    n = B.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force refused for n={n} > {BRUTE_FORCE_MAX_N}")
    norm = c_norm(C)
    _, s = _set_partitions_best(B)
    return CommunityPartition(assignment=s, modularity=_evaluate(B, s, norm), objective=objective, Cnorm=norm)


def modularity_unweighted(A: np.ndarray, s: Sequence[int]) -> float:
    """Newman modularity ``sum_ij (A_ij - k_i k_j / 2m) delta(s_i, s_j)``, un-normalised."""
    A = np.asarray(A, dtype=float)
    if A.shape[0] != A.shape[1] or not np.array_equal(A, A.T):
        raise ValueError("A must be symmetric")
    if not np.all((A == 0) | (A == 1)):
        raise ValueError("A must be binary")
    k = A.sum(axis=1)
    two_m = float(k.sum())
    if two_m == 0:
        raise ValueError("graph has no edges (m = 0)")
    s = relabel(s)
    same = s[:, None] == s[None, :]
    # sum_c K_c^2 / 2m equals the null-model term and is exact for integer degrees
    K = np.bincount(s, weights=k)
    return float(np.sum(A[same]) - np.sum(K * K) / two_m)


def detect(C: np.ndarray, T: int, objectives: Sequence[str] = OBJECTIVES, seed: int = 0,
           restarts: int = DEFAULT_RESTARTS) -> tuple[RmtDecomposition, dict[str, CommunityPartition]]:
    """Decompose once and run every objective that is defined for ``C``."""
    dec = rmt_decompose(C, T)
    out = {}
    for obj in objectives:
        if obj == "Q3" and not dec.has_group:
            continue
        out[obj] = louvain_maximize(C, dec, obj, seed=seed, restarts=restarts)
    return dec, out
