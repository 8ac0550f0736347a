"""Codebooks, partitions, and the two-part expected codelength.

The objective evaluated here is

    I(P) = - sum_j q_j log q_j - sum_j sum_{x in P_j} r(x) log p_n(x | theta_j)

with q_j the marginal mass of cell j.  It splits exactly into the assertion
entropy H(q) plus the weighted cross-entropies of the normalized cellwise
distributions against the codepoints, which is what `decompose` returns.

Assertion probabilities are always recomputed from the partition; a codebook
whose stored q disagrees with its partition is rejected unless it was built
in fixed-codebook mode, in which case the assertion term becomes the
cross-entropy of the partition masses against the stored code distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import InvariantViolation
from .models import DataSpace, ExponentialFamily, MarginalTable

__all__ = [
    "TIE_TOL",
    "Codebook",
    "Partition",
    "CellSummary",
    "cell_masses",
    "cell_from_members",
    "cell_summary",
    "cell_summaries",
    "entropy",
    "codelength",
    "decompose",
    "assign_cost",
    "assignment_costs",
    "best_assignment",
    "partition_from_assignment",
    "synchronized_codebook",
]

# Cost differences below this many nats count as assignment ties (broken
# toward the smaller cell index); exact-arithmetic boundary ties land around
# 1e-16 in floats, well inside.
TIE_TOL = 1e-9


@dataclass(frozen=True)
class Codebook:
    """Codepoints with their assertion probabilities.

    fixed=True marks a codebook whose q is prescribed externally (polyhedral
    experiments) rather than synchronized with a partition.
    """

    codepoints: np.ndarray  # (k, p)
    assertion_probs: np.ndarray  # (k,)
    fixed: bool = False

    def __post_init__(self):
        cp = np.atleast_2d(np.asarray(self.codepoints, dtype=float))
        q = np.asarray(self.assertion_probs, dtype=float)
        if q.ndim != 1 or cp.shape[0] != q.shape[0]:
            raise InvariantViolation("codepoints and q must align")
        if np.any(q <= 0.0) or not np.all(np.isfinite(q)):
            raise InvariantViolation("assertion probabilities must be positive")
        if abs(q.sum() - 1.0) > 1e-9:
            raise InvariantViolation("assertion probabilities must sum to 1")
        object.__setattr__(self, "codepoints", cp)
        object.__setattr__(self, "assertion_probs", q)

    @property
    def k(self) -> int:
        return self.assertion_probs.shape[0]


@dataclass(frozen=True)
class Partition:
    """Cell labels in {0..k-1} for every point of a data space."""

    assignment: np.ndarray  # (m,)
    k: int

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=int)
        if a.ndim != 1:
            raise InvariantViolation("assignment must be one-dimensional")
        if a.size and (a.min() < 0 or a.max() >= self.k):
            raise InvariantViolation("cell labels outside 0..k-1")
        present = np.bincount(a, minlength=self.k) > 0
        if not present.all():
            missing = [int(j) for j in np.flatnonzero(~present)]
            raise InvariantViolation(f"empty cells {missing}")
        object.__setattr__(self, "assignment", a)

    def members(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == j)


@dataclass(frozen=True)
class CellSummary:
    """Everything a projection needs to know about one cell.

    q is the cell's marginal mass, stat_sum = sum r(x) T(x), weights the
    normalized within-cell distribution, log_pbar its log.  Member statistic
    rows and base measures are carried along so cost evaluations need no
    further space lookups.
    """

    index: int
    member_idx: np.ndarray
    stats: np.ndarray  # (m_j, d)
    log_base: np.ndarray  # (m_j,)
    q: float
    stat_sum: np.ndarray  # (d,)
    weights: np.ndarray  # (m_j,)
    log_pbar: np.ndarray  # (m_j,)


def cell_masses(partition: Partition, marginal: MarginalTable) -> np.ndarray:
    """q_j = sum of marginal mass per cell, computed in log domain."""
    q = np.empty(partition.k)
    for j in range(partition.k):
        q[j] = np.exp(logsumexp(marginal.log_r[partition.members(j)]))
    return q


def cell_from_members(
    marginal: MarginalTable, members: np.ndarray, index: int = 0
) -> CellSummary:
    """Summary of an arbitrary point subset treated as one cell."""
    idx = np.asarray(members, dtype=int)
    log_r = marginal.log_r[idx]
    log_q = float(logsumexp(log_r))
    log_pbar = log_r - log_q
    r = marginal.r[idx]
    stats = marginal.space.stats[idx]
    return CellSummary(
        index=index,
        member_idx=idx,
        stats=stats,
        log_base=marginal.space.log_base[idx],
        q=float(np.exp(log_q)),
        stat_sum=r @ stats,
        weights=np.exp(log_pbar),
        log_pbar=log_pbar,
    )


def cell_summary(
    partition: Partition, marginal: MarginalTable, j: int
) -> CellSummary:
    return cell_from_members(marginal, partition.members(j), index=j)


def cell_summaries(partition: Partition, marginal: MarginalTable):
    return [cell_summary(partition, marginal, j) for j in range(partition.k)]


def entropy(q: np.ndarray) -> float:
    q = np.asarray(q, dtype=float)
    return float(-(q * np.log(q)).sum())


def _check_shapes(codebook: Codebook, partition: Partition, marginal):
    if codebook.k != partition.k:
        raise InvariantViolation(
            f"codebook has {codebook.k} cells, partition {partition.k}"
        )
    if partition.assignment.shape[0] != len(marginal.space):
        raise InvariantViolation("partition does not cover the space")


def codelength(
    codebook: Codebook,
    partition: Partition,
    marginal: MarginalTable,
    model: ExponentialFamily,
) -> float:
    """Expected two-part codelength in nats."""
    _check_shapes(codebook, partition, marginal)
    q_part = cell_masses(partition, marginal)
    if codebook.fixed:
        assertion = float(-(q_part * np.log(codebook.assertion_probs)).sum())
    else:
        if np.max(np.abs(q_part - codebook.assertion_probs)) > 1e-9:
            raise InvariantViolation(
                "codebook desynchronized from partition (rebuild q or use "
                "fixed-codebook mode)"
            )
        assertion = entropy(q_part)
    detail = 0.0
    for j in range(partition.k):
        idx = partition.members(j)
        log_p = model.log_pmf_stats(
            codebook.codepoints[j],
            marginal.space.stats[idx],
            marginal.space.log_base[idx],
        )
        detail -= float(marginal.r[idx] @ log_p)
    return assertion + detail


def decompose(
    codebook: Codebook,
    partition: Partition,
    marginal: MarginalTable,
    model: ExponentialFamily,
) -> tuple:
    """Split I(P) into (assertion entropy, weighted detail cross-entropy).

    The second term is sum_j q_j H(pbar_j, p_{theta_j}); the two add back to
    `codelength` exactly in synchronized mode.
    """
    _check_shapes(codebook, partition, marginal)
    q_part = cell_masses(partition, marginal)
    detail = 0.0
    for j in range(partition.k):
        cell = cell_summary(partition, marginal, j)
        log_p = model.log_pmf_stats(
            codebook.codepoints[j], cell.stats, cell.log_base
        )
        detail += cell.q * float(-(cell.weights @ log_p))
    return entropy(q_part), detail


def assign_cost(
    model: ExponentialFamily, codebook: Codebook, key, j: int
) -> float:
    """Lambda_j(x) = -log q_j - log p_n(x | theta_j), in nats."""
    log_p = float(
        model.log_pmf_stats(
            codebook.codepoints[j], model.suff_stat(key), model.log_base(key)
        )
    )
    return -float(np.log(codebook.assertion_probs[j])) - log_p


def assignment_costs(
    model: ExponentialFamily, space: DataSpace, codebook: Codebook
) -> np.ndarray:
    """Matrix of Lambda_j(x) over the whole space, shape (m, k)."""
    k = codebook.k
    etas = np.stack([model.natural_map(t) for t in codebook.codepoints])
    a = np.array([model.log_partition(e) for e in etas])
    log_p = space.log_base[:, None] + space.stats @ etas.T - a[None, :]
    return -np.log(codebook.assertion_probs)[None, :] - log_p


def best_assignment(
    model: ExponentialFamily,
    space: DataSpace,
    codebook: Codebook,
    tie_tol: float = TIE_TOL,
) -> np.ndarray:
    """Pointwise argmin_j Lambda_j(x); ties toward the smallest index.

    Costs within tie_tol nats of the minimum count as tied.  Pass 0.0 for
    the raw float argmin (used inside Lloyd to keep descent exact).
    """
    costs = assignment_costs(model, space, codebook)
    if tie_tol <= 0.0:
        return np.argmin(costs, axis=1)
    best = costs.min(axis=1)
    return np.argmax(costs <= (best + tie_tol)[:, None], axis=1)


def partition_from_assignment(assignment: np.ndarray, k: int) -> Partition:
    return Partition(assignment=np.asarray(assignment, dtype=int), k=k)


def synchronized_codebook(
    codepoints: np.ndarray, partition: Partition, marginal: MarginalTable
) -> Codebook:
    """Codebook whose q is the partition's cell masses."""
    return Codebook(
        codepoints=codepoints,
        assertion_probs=cell_masses(partition, marginal),
    )
