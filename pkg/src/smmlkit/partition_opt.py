"""Partition optimizers and the closed-form cell description.

Three routes to a codebook:

* `dp_exact_1d`: exact minimizer over interval partitions of an ordered
  scalar statistic, by dynamic programming on (cells, prefix).
* `lloyd_solve` / `lloyd_multistart`: alternating reassignment (pointwise
  cheapest cell, ties to the smallest index) and codepoint/mass updates;
  monotone in the two-part codelength, seeded multi-start driver.
* `resync_codebook`: frozen codepoints, alternate assignment and mass
  updates only (used for externally supplied sites, e.g. meshes).

For a fixed codebook the optimal cells are intersections of half-spaces in
statistic space: cell j keeps t iff for every l

    (eta_j - eta_l)' t >= log q_l - log q_j + A(eta_j) - A(eta_l),

which is the same comparison as argmin_j Lambda_j(x).  `polyhedral_cells`
materializes those half-spaces (antisymmetrically, so margins negate
exactly) and `polyhedral_assign` assigns through them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .codebook import (
    TIE_TOL,
    Codebook,
    Partition,
    best_assignment,
    cell_from_members,
    cell_masses,
    cell_summaries,
    codelength,
    partition_from_assignment,
)
from .errors import DomainError, InvariantViolation, UnsupportedDimensionError
from .models import ExponentialFamily, FisherMetric, MarginalTable
from .projection import kl_projection

__all__ = [
    "SolveResult",
    "dp_exact_1d",
    "lloyd_solve",
    "lloyd_multistart",
    "resync_codebook",
    "PolyhedralCell",
    "polyhedral_cells",
    "polyhedral_assign",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SolveResult:
    """A solved codebook with its partition and iteration trace.

    trace rows are (sweep, codelength, k); for the DP route there is one row
    per candidate cell count instead of per sweep.
    """

    partition: Partition
    codebook: Codebook
    codelength: float
    k: int
    method: str
    trace: tuple
    meta: dict = field(default_factory=dict)


def _project_codepoints(model, partition, marginal) -> np.ndarray:
    points = [
        kl_projection(cell, model).theta
        for cell in cell_summaries(partition, marginal)
    ]
    return np.stack(points)


# ---------------------------------------------------------------------------
# exact 1-D dynamic program


def dp_exact_1d(
    model: ExponentialFamily,
    marginal: MarginalTable,
    k_range: Sequence[int],
) -> SolveResult:
    """Exact optimum over interval partitions of the ordered statistic.

    Evaluates every candidate cell count in k_range and returns the best
    codelength, ties toward smaller k.  Cell costs already include the
    projected codepoint, so the recursion is exact for the full objective.
    """
    space = marginal.space
    if space.dim != 1:
        raise UnsupportedDimensionError("interval DP needs a scalar statistic")
    k_range = sorted(set(int(k) for k in k_range))
    if not k_range or k_range[0] < 1:
        raise DomainError("k_range must contain positive cell counts")
    m = len(space)
    order = np.argsort(space.stats[:, 0], kind="stable")
    k_range = [k for k in k_range if k <= m]
    if not k_range:
        raise DomainError("every requested k exceeds the number of points")
    kmax = k_range[-1]

    # cost of the interval cell [i..j] in sorted order
    cost = np.full((m, m), np.inf)
    for i in range(m):
        for j in range(i, m):
            members = order[i : j + 1]
            cell = cell_from_members(marginal, members)
            theta = kl_projection(cell, model).theta
            eta = model.natural_map(theta)
            a = model.log_partition(eta)
            detail = -(
                float(eta @ cell.stat_sum)
                - cell.q * a
                + float(marginal.r[members] @ space.log_base[members])
            )
            cost[i, j] = -cell.q * math.log(cell.q) + detail

    best = np.full((kmax, m), np.inf)
    back = np.zeros((kmax, m), dtype=int)
    best[0, :] = cost[0, :]
    for t in range(1, kmax):
        for j in range(t, m):
            cand = best[t - 1, t - 1 : j] + cost[t : j + 1, j]
            i = int(np.argmin(cand))
            best[t, j] = cand[i]
            back[t, j] = t + i

    per_k = {k: float(best[k - 1, m - 1]) for k in k_range}
    k_best = k_range[0]
    for k in k_range[1:]:
        if per_k[k] < per_k[k_best]:
            k_best = k

    # reconstruct boundaries for k_best
    bounds = []
    j = m - 1
    for t in range(k_best - 1, 0, -1):
        i = back[t, j]
        bounds.append(i)
        j = i - 1
    bounds = [0] + bounds[::-1] + [m]
    assignment = np.empty(m, dtype=int)
    for cell_idx in range(k_best):
        assignment[order[bounds[cell_idx] : bounds[cell_idx + 1]]] = cell_idx
    partition = partition_from_assignment(assignment, k_best)
    codepoints = _project_codepoints(model, partition, marginal)
    codebook = Codebook(
        codepoints=codepoints, assertion_probs=cell_masses(partition, marginal)
    )
    total = codelength(codebook, partition, marginal, model)
    trace = tuple((0, per_k[k], k) for k in k_range)
    return SolveResult(
        partition=partition,
        codebook=codebook,
        codelength=total,
        k=k_best,
        method="dp",
        trace=trace,
        meta={"per_k": per_k},
    )


# ---------------------------------------------------------------------------
# Lloyd alternation


def _compress(assignment: np.ndarray, codepoints: np.ndarray):
    """Relabel to drop empty cells, preserving index order."""
    present = np.unique(assignment)
    if present.size == codepoints.shape[0]:
        return assignment, codepoints, False
    remap = -np.ones(codepoints.shape[0], dtype=int)
    remap[present] = np.arange(present.size)
    return remap[assignment], codepoints[present], True


def lloyd_solve(
    model: ExponentialFamily,
    marginal: MarginalTable,
    init: Codebook,
    max_sweeps: int = 100,
    tol: float = 1e-12,
) -> SolveResult:
    """Alternate exact reassignment and codepoint/mass updates.

    Each sweep reassigns every point to its cheapest cell (raw argmin, ties
    to the smallest index), drops emptied cells, then re-synchronizes masses
    and re-projects codepoints.  The synchronized codelength is recorded
    after every sweep and never increases; iteration stops once the
    improvement falls below tol.
    """
    space = marginal.space
    codepoints = np.atleast_2d(init.codepoints)
    q = init.assertion_probs
    trace = []
    prev = np.inf
    partition = None
    codebook = None
    sweeps = 0
    for sweep in range(1, max_sweeps + 1):
        sweeps = sweep
        working = Codebook(codepoints=codepoints, assertion_probs=q, fixed=True)
        assignment = best_assignment(model, space, working, tie_tol=0.0)
        assignment, codepoints, dropped = _compress(assignment, codepoints)
        if dropped:
            log.info(
                "lloyd: dropped empty cells at sweep %d (k now %d)",
                sweep,
                codepoints.shape[0],
            )
        partition = partition_from_assignment(assignment, codepoints.shape[0])
        codepoints = _project_codepoints(model, partition, marginal)
        q = cell_masses(partition, marginal)
        codebook = Codebook(codepoints=codepoints, assertion_probs=q)
        value = codelength(codebook, partition, marginal, model)
        trace.append((sweep, value, codepoints.shape[0]))
        if prev - value < tol:
            break
        prev = value
    return SolveResult(
        partition=partition,
        codebook=codebook,
        codelength=trace[-1][1],
        k=codepoints.shape[0],
        method="lloyd",
        trace=tuple(trace),
        meta={"sweeps": sweeps},
    )


def _marginal_quantile_stat(marginal: MarginalTable, level: float) -> np.ndarray:
    """Componentwise marginal quantile of the statistic under r."""
    space = marginal.space
    out = np.empty(space.dim)
    for axis in range(space.dim):
        vals = space.stats[:, axis]
        order = np.argsort(vals, kind="stable")
        cum = np.cumsum(marginal.r[order])
        idx = int(np.searchsorted(cum, level * cum[-1], side="left"))
        out[axis] = vals[order[min(idx, len(vals) - 1)]]
    return out


def _axis_counts(k: int, dim: int):
    if dim == 1:
        return [k]
    k0 = max(1, int(round(math.sqrt(k))))
    while k % k0 != 0 and k0 > 1:
        k0 -= 1
    return [k0, k // k0]


def _quantile_init(model, marginal, k: int, rng) -> np.ndarray:
    """Codepoints at marginal statistic quantiles (perturbable)."""
    dim = marginal.space.dim
    counts = _axis_counts(k, dim)
    axis_levels = []
    for k_axis in counts:
        levels = (np.arange(k_axis) + 0.5) / k_axis
        if rng is not None:
            levels = levels + rng.uniform(-0.25, 0.25, size=k_axis) / k_axis
        axis_levels.append(np.clip(levels, 1e-3, 1.0 - 1e-3))
    points = []
    if dim == 1:
        for lev in axis_levels[0]:
            stat = _marginal_quantile_stat(marginal, float(lev))
            mu, _ = model.clamp_mean(stat)
            points.append(model.theta_from_mean(mu))
    else:
        for l0 in axis_levels[0]:
            for l1 in axis_levels[1]:
                s0 = _marginal_quantile_stat(marginal, float(l0))[0]
                s1 = _marginal_quantile_stat(marginal, float(l1))[1]
                mu, _ = model.clamp_mean(np.array([s0, s1]))
                points.append(model.theta_from_mean(mu))
    return np.stack(points[:k])


def _mesh_init(model, marginal, k: int, rng) -> np.ndarray:
    """Codepoints arc-equispaced over the marginal's bulk region."""
    metric = FisherMetric.from_model(model)
    dim = marginal.space.dim
    counts = _axis_counts(k, dim)
    lo_mu, _ = model.clamp_mean(_marginal_quantile_stat(marginal, 0.01))
    hi_mu, _ = model.clamp_mean(_marginal_quantile_stat(marginal, 0.99))
    lo_th = model.theta_from_mean(lo_mu)
    hi_th = model.theta_from_mean(hi_mu)
    lo_th, hi_th = np.minimum(lo_th, hi_th), np.maximum(lo_th, hi_th)
    span = hi_th - lo_th
    center = 0.5 * (lo_th + hi_th)
    axis_sites = []
    for axis, k_axis in enumerate(counts):
        if span[axis] <= 0:
            axis_sites.append(np.full(k_axis, lo_th[axis]))
            continue
        ts = np.linspace(lo_th[axis], hi_th[axis], 513)
        dens = np.empty_like(ts)
        for i, t in enumerate(ts):
            point = center.copy()
            point[axis] = t
            dens[i] = math.sqrt(metric.info(point)[axis, axis])
        arc = np.concatenate(
            [[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(ts))]
        )
        targets = (np.arange(k_axis) + 0.5) * arc[-1] / k_axis
        sites = np.interp(targets, arc, ts)
        if rng is not None:
            gap = span[axis] / k_axis
            tiny = 1e-3 * max(span[axis], 1e-6)
            sites = sites + rng.uniform(-0.3, 0.3, size=k_axis) * gap
            sites = np.clip(sites, lo_th[axis] + tiny, hi_th[axis] - tiny)
        axis_sites.append(np.sort(sites))
    if dim == 1:
        return axis_sites[0][:, None]
    g0, g1 = np.meshgrid(axis_sites[0], axis_sites[1], indexing="ij")
    return np.column_stack([g0.ravel(), g1.ravel()])[:k]


def lloyd_multistart(
    model: ExponentialFamily,
    marginal: MarginalTable,
    k: int,
    restarts: int = 20,
    seed: int = 0,
    max_sweeps: int = 100,
    tol: float = 1e-12,
) -> SolveResult:
    """Best of `restarts` seeded Lloyd runs from mesh and quantile starts.

    Restart 0 is the plain quantile start, restart 1 the plain mesh start,
    later restarts jitter them with a counter-derived stream.  The winner is
    lexicographic (codelength, k, restart).
    """
    if restarts < 1:
        raise DomainError("need at least one restart")
    best = None
    best_key = None
    history = []
    for restart in range(restarts):
        rng = (
            None
            if restart < 2
            else np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(restart,))
            )
        )
        builder = _quantile_init if restart % 2 == 0 else _mesh_init
        codepoints = builder(model, marginal, k, rng)
        init = Codebook(
            codepoints=codepoints,
            assertion_probs=np.full(k, 1.0 / k),
            fixed=True,
        )
        result = lloyd_solve(
            model, marginal, init, max_sweeps=max_sweeps, tol=tol
        )
        history.append(
            {
                "restart": restart,
                "codelength": result.codelength,
                "k": result.k,
                "sweeps": result.meta["sweeps"],
            }
        )
        key = (result.codelength, result.k, restart)
        if best is None or key < best_key:
            best, best_key = result, key
    meta = dict(best.meta)
    meta["restarts"] = history
    meta["seed"] = seed
    return SolveResult(
        partition=best.partition,
        codebook=best.codebook,
        codelength=best.codelength,
        k=best.k,
        method="lloyd",
        trace=best.trace,
        meta=meta,
    )


def resync_codebook(
    model: ExponentialFamily,
    marginal: MarginalTable,
    codepoints: np.ndarray,
    max_rounds: int = 100,
):
    """Fit assertion probabilities to frozen codepoints.

    Alternates cheapest-cell assignment and mass resynchronization until the
    partition stabilizes; codepoints are never moved, but cells that end up
    empty are dropped.  Returns (codebook, partition).
    """
    codepoints = np.atleast_2d(np.asarray(codepoints, dtype=float))
    k = codepoints.shape[0]
    q = np.full(k, 1.0 / k)
    space = marginal.space
    prev = None
    for _ in range(max_rounds):
        working = Codebook(codepoints=codepoints, assertion_probs=q, fixed=True)
        assignment = best_assignment(model, space, working, tie_tol=0.0)
        assignment, codepoints, dropped = _compress(assignment, codepoints)
        if dropped:
            log.info("resync: dropped empty cells (k now %d)", codepoints.shape[0])
        partition = partition_from_assignment(assignment, codepoints.shape[0])
        q = cell_masses(partition, marginal)
        if prev is not None and prev.shape == assignment.shape and np.array_equal(
            prev, assignment
        ):
            break
        prev = assignment
    return Codebook(codepoints=codepoints, assertion_probs=q), partition


# ---------------------------------------------------------------------------
# closed-form cells for a fixed codebook


@dataclass(frozen=True, eq=False)
class PolyhedralCell:
    """Half-space description of one cell in statistic space.

    Cell `index` keeps t iff normals @ t >= offsets (up to the assignment
    tie tolerance) against every other cell, with normals eta_j - eta_l and
    offsets log q_l - log q_j + A_j - A_l.
    """

    index: int
    others: np.ndarray  # (k-1,)
    normals: np.ndarray  # (k-1, d)
    offsets: np.ndarray  # (k-1,)

    def margins(self, t: np.ndarray) -> np.ndarray:
        return self.normals @ np.atleast_1d(np.asarray(t, dtype=float)) - self.offsets

    def contains(self, t: np.ndarray, tie_tol: float = TIE_TOL) -> bool:
        if self.others.size == 0:
            return True
        return bool(self.margins(t).min() >= -tie_tol)


def polyhedral_cells(codebook: Codebook, model: ExponentialFamily) -> list:
    """Materialize every cell's half-spaces for a fixed codebook."""
    k = codebook.k
    etas = np.stack([model.natural_map(t) for t in codebook.codepoints])
    a = np.array([model.log_partition(e) for e in etas])
    logq = np.log(codebook.assertion_probs)
    d = etas.shape[1]
    normals = np.zeros((k, k, d))
    offsets = np.zeros((k, k))
    for j in range(k):
        for l in range(j + 1, k):
            normals[j, l] = etas[j] - etas[l]
            offsets[j, l] = (logq[l] - logq[j]) + (a[j] - a[l])
            normals[l, j] = -normals[j, l]
            offsets[l, j] = -offsets[j, l]
    cells = []
    for j in range(k):
        others = np.array([l for l in range(k) if l != j], dtype=int)
        cells.append(
            PolyhedralCell(
                index=j,
                others=others,
                normals=normals[j, others],
                offsets=offsets[j, others],
            )
        )
    return cells


def polyhedral_assign(
    codebook: Codebook,
    model: ExponentialFamily,
    t: np.ndarray,
    tie_tol: float = TIE_TOL,
    cells: Optional[list] = None,
) -> int:
    """Smallest cell index whose polyhedron accepts the statistic t.

    Algebraically identical to argmin_j Lambda_j with the same tie rule.
    """
    if cells is None:
        cells = polyhedral_cells(codebook, model)
    for cell in cells:
        if cell.contains(t, tie_tol):
            return cell.index
    raise InvariantViolation(
        "no polyhedral cell accepted the point; tie tolerance too small"
    )
