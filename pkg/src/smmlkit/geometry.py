"""Quantization geometry: Fisher-Rao distances, weighted cells, meshes.

Large-sample structure of optimal codebooks: cells look like additively
weighted Voronoi cells in the Fisher-Rao metric with per-cell offsets
omega_j = -(2/n) log q_j, and codepoint spacing on the order of n^(-1/2).
This module provides the quadratic-form distance surrogate, the weighted
assignment rule, boundary location, and Jeffreys-density meshes with that
spacing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq

from .errors import DomainError, UnsupportedDimensionError
from .models import EPS_CLAMP, FisherMetric

__all__ = [
    "fr_distance_sq",
    "bernoulli_fr_distance",
    "WeightedVoronoi",
    "voronoi_assign",
    "pairwise_boundary",
    "MeshPlan",
    "jeffreys_mesh",
    "arc_equispaced_sites",
    "tessellation_summary",
]


def fr_distance_sq(
    metric: FisherMetric, theta1: np.ndarray, theta2: np.ndarray
) -> float:
    """Squared Fisher-Rao distance via the midpoint quadratic form.

    Second-order accurate surrogate for the geodesic distance:
    (t1 - t2)' J1((t1 + t2)/2) (t1 - t2).  Raises DomainError off the
    interior.
    """
    t1 = np.atleast_1d(np.asarray(theta1, dtype=float))
    t2 = np.atleast_1d(np.asarray(theta2, dtype=float))
    for t in (t1, t2):
        if not metric.is_interior(t):
            raise DomainError(f"point {t} outside the metric's interior")
    diff = t1 - t2
    mid = 0.5 * (t1 + t2)
    return float(diff @ metric.info(mid) @ diff)


def bernoulli_fr_distance(p1: float, p2: float) -> float:
    """Exact Bernoulli geodesic distance 2|arcsin sqrt(p1) - arcsin sqrt(p2)|."""
    if not (0.0 <= p1 <= 1.0 and 0.0 <= p2 <= 1.0):
        raise DomainError("Bernoulli parameters must lie in [0, 1]")
    return 2.0 * abs(math.asin(math.sqrt(p1)) - math.asin(math.sqrt(p2)))


@dataclass(frozen=True)
class WeightedVoronoi:
    """Additively weighted Voronoi diagram in the Fisher-Rao metric."""

    sites: np.ndarray  # (k, p)
    weights: np.ndarray  # (k,)
    n: int
    metric: FisherMetric

    def __post_init__(self):
        sites = np.atleast_2d(np.asarray(self.sites, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (sites.shape[0],):
            raise DomainError("weights must align with sites")
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "weights", weights)

    @property
    def k(self) -> int:
        return self.sites.shape[0]

    @classmethod
    def from_codebook(cls, codebook, n: int, metric: FisherMetric):
        """Diagram with offsets omega_j = -(2/n) log q_j."""
        return cls(
            sites=codebook.codepoints,
            weights=-2.0 / n * np.log(codebook.assertion_probs),
            n=n,
            metric=metric,
        )


def _vor_scores(vor: WeightedVoronoi, theta: np.ndarray) -> np.ndarray:
    return np.array(
        [
            fr_distance_sq(vor.metric, theta, vor.sites[j]) + vor.weights[j]
            for j in range(vor.k)
        ]
    )


def voronoi_assign(vor: WeightedVoronoi, theta_hat: np.ndarray) -> int:
    """Cell of theta_hat: argmin_j d_F^2(theta_hat, s_j) + omega_j."""
    return int(np.argmin(_vor_scores(vor, theta_hat)))


def pairwise_boundary(
    vor: WeightedVoronoi, j: int, l: int, lo: float, hi: float
) -> float:
    """Root of the offset equation between cells j and l on [lo, hi] (1-D).

    Solves d^2(theta, s_j) + omega_j = d^2(theta, s_l) + omega_l, i.e.
    (n/2)(d^2_j - d^2_l) = log(q_j / q_l).
    """
    if vor.sites.shape[1] != 1:
        raise UnsupportedDimensionError("boundary bisection is 1-D only")

    def gap(t: float) -> float:
        th = np.array([t])
        return (
            fr_distance_sq(vor.metric, th, vor.sites[j]) + vor.weights[j]
            - fr_distance_sq(vor.metric, th, vor.sites[l]) - vor.weights[l]
        )

    return float(brentq(gap, lo, hi, xtol=1e-13, rtol=1e-15))


# ---------------------------------------------------------------------------
# meshes


@dataclass(frozen=True)
class MeshPlan:
    """Codepoints laid out at Fisher-Rao gaps of order constant / sqrt(n)."""

    region: tuple  # ((lo, hi), ...) per axis
    n: int
    constant: float
    target_delta: float
    density: Callable[[np.ndarray], float]
    codepoints: np.ndarray  # (k, p)
    k: int
    realized_diameters: np.ndarray  # (k,)
    edges: Optional[tuple] = None  # per-axis cell edge arrays (1-D / product)


def _normalize_region(region, dim: int):
    region = np.asarray(region, dtype=float)
    if region.ndim == 1:
        region = region[None, :]
    if region.shape != (dim, 2):
        raise DomainError(f"region must give (lo, hi) for each of {dim} axes")
    for lo, hi in region:
        if not lo < hi:
            raise DomainError("region bounds must satisfy lo < hi")
    return [(float(lo), float(hi)) for lo, hi in region]


def _interior_region(metric: FisherMetric, region, center):
    """Shrink axis bounds that touch the boundary of the parameter region."""
    fixed = []
    shrunk = False
    for axis, (lo, hi) in enumerate(region):
        probe_lo = center.copy()
        probe_lo[axis] = lo
        probe_hi = center.copy()
        probe_hi[axis] = hi
        if not metric.is_interior(probe_lo):
            lo += EPS_CLAMP
            shrunk = True
        if not metric.is_interior(probe_hi):
            hi -= EPS_CLAMP
            shrunk = True
        if not lo < hi:
            raise DomainError("region collapsed after boundary shrink")
        fixed.append((lo, hi))
    if shrunk:
        warnings.warn(
            "mesh region touched the parameter boundary; shrunk by "
            f"{EPS_CLAMP}",
            stacklevel=3,
        )
    return fixed


def _axis_arc_table(metric: FisherMetric, region, axis: int, grid: int = 4097):
    """Cumulative arc length along one axis through the region center."""
    center = np.array([0.5 * (lo + hi) for lo, hi in region])
    lo, hi = region[axis]
    ts = np.linspace(lo, hi, grid)
    dens = np.empty(grid)
    for i, t in enumerate(ts):
        point = center.copy()
        point[axis] = t
        dens[i] = math.sqrt(metric.info(point)[axis, axis])
    u = cumulative_trapezoid(dens, ts, initial=0.0)
    return ts, u


def arc_equispaced_sites(
    metric: FisherMetric, lo: float, hi: float, k: int
) -> np.ndarray:
    """k points at arc-length midpoints of [lo, hi] (1-D), shape (k, 1)."""
    ts, u = _axis_arc_table(metric, [(lo, hi)], 0)
    total = u[-1]
    targets = (np.arange(k) + 0.5) * total / k
    return np.interp(targets, u, ts)[:, None]


def _axis_arc_targets(total: float, h: float, anchor_u: Optional[float]):
    """Site and edge positions (arc units) along one axis.

    Without an anchor the axis is split into ceil(total / h) equal gaps
    with sites at gap midpoints.  With an anchor, sites sit at
    anchor_u + j h for integer j, truncated at the axis ends; edge cells
    absorb the slack (at most half a gap beyond the interior half-width,
    keeping diameters under 1.5 h).
    """
    if anchor_u is None:
        k = max(1, math.ceil(total / h))
        gap = total / k
        sites = (np.arange(k) + 0.5) * gap
        edges = np.arange(k + 1) * gap
        return sites, edges
    m_lo = int(math.floor(anchor_u / h))
    m_hi = int(math.floor((total - anchor_u) / h))
    if m_lo + m_hi < 0:
        # lattice misses the axis range (region narrower than one gap)
        return np.array([0.5 * total]), np.array([0.0, total])
    sites = anchor_u + h * np.arange(-m_lo, m_hi + 1)
    inner = 0.5 * (sites[:-1] + sites[1:])
    edges = np.concatenate(([0.0], inner, [total]))
    return sites, edges


def jeffreys_mesh(
    metric: FisherMetric,
    region,
    n: int,
    constant: float = 1.0,
    anchor=None,
    anchor_phase: float = 0.0,
) -> MeshPlan:
    """Mesh with codepoint density proportional to sqrt(det J1).

    1-D: arc-length equispacing under sqrt(J1) with gaps of h = constant *
    n^(-1/2) (exact when anchored, else L / ceil(L / h)).  2-D: product
    mesh in per-axis arc-length coordinates; the per-axis gap is shrunk
    for metric cross terms so the conservative cell-diagonal estimate
    stays within 1.5 h.

    anchor (1-D only) pins the mesh phase at a parameter point so it does
    not drift with n: with anchor_phase 0.0 a site sits exactly on the
    anchor, with 0.5 the anchor falls midway between two sites.
    """
    if metric.dim > 2:
        raise UnsupportedDimensionError("meshes implemented for p <= 2")
    if n < 1 or constant <= 0.0:
        raise DomainError("need n >= 1 and a positive mesh constant")
    region = _normalize_region(region, metric.dim)
    center = np.array([0.5 * (lo + hi) for lo, hi in region])
    region = _interior_region(metric, region, center)
    h = constant / math.sqrt(n)
    if anchor is not None:
        if metric.dim != 1:
            raise UnsupportedDimensionError(
                "anchored meshes are one-dimensional (product-mesh edge "
                "cells would exceed the diameter band)"
            )
        anchor = np.atleast_1d(np.asarray(anchor, dtype=float))
        if anchor.shape != (metric.dim,):
            raise DomainError("anchor dimension does not match the metric")
        if not 0.0 <= anchor_phase < 1.0:
            raise DomainError("anchor_phase must lie in [0, 1)")
        for axis, (lo, hi) in enumerate(region):
            if not lo <= anchor[axis] <= hi:
                raise DomainError("anchor must lie inside the region")

    if metric.dim == 1:
        ts, u = _axis_arc_table(metric, region, 0)
        anchor_u = (
            None
            if anchor is None
            else float(np.interp(anchor[0], ts, u)) + anchor_phase * h
        )
        targets, edge_targets = _axis_arc_targets(u[-1], h, anchor_u)
        codepoints = np.interp(targets, u, ts)[:, None]
        edges = (np.interp(edge_targets, u, ts),)
        return MeshPlan(
            region=tuple(region),
            n=n,
            constant=constant,
            target_delta=h,
            density=lambda th: math.sqrt(
                float(np.linalg.det(metric.info(np.atleast_1d(th))))
            ),
            codepoints=codepoints,
            k=codepoints.shape[0],
            realized_diameters=np.diff(edge_targets),
            edges=edges,
        )

    # product mesh: bound the worst metric correlation over the region
    probe = 21
    rho_max = 0.0
    for t0 in np.linspace(*region[0], probe)[1:-1]:
        for t1 in np.linspace(*region[1], probe)[1:-1]:
            j = metric.info(np.array([t0, t1]))
            rho = abs(j[0, 1]) / math.sqrt(j[0, 0] * j[1, 1])
            rho_max = max(rho_max, rho)
    h_axis = min(h, 1.45 * h / math.sqrt(2.0 * (1.0 + rho_max)))

    axis_points, axis_gaps, axis_edges = [], [], []
    for axis in range(2):
        ts, u = _axis_arc_table(metric, region, axis)
        targets, edge_targets = _axis_arc_targets(u[-1], h_axis, None)
        axis_points.append(np.interp(targets, u, ts))
        axis_gaps.append(
            float(targets[1] - targets[0]) if targets.size > 1 else h_axis
        )
        axis_edges.append(np.interp(edge_targets, u, ts))
    g0, g1 = axis_gaps
    diam = math.sqrt((1.0 + rho_max) * (g0 * g0 + g1 * g1))
    grid0, grid1 = np.meshgrid(axis_points[0], axis_points[1], indexing="ij")
    codepoints = np.column_stack([grid0.ravel(), grid1.ravel()])
    k = codepoints.shape[0]
    return MeshPlan(
        region=tuple(region),
        n=n,
        constant=constant,
        target_delta=h,
        density=lambda th: math.sqrt(
            float(np.linalg.det(metric.info(np.atleast_1d(th))))
        ),
        codepoints=codepoints,
        k=k,
        realized_diameters=np.full(k, diam),
        edges=tuple(axis_edges),
    )


def tessellation_summary(vor: WeightedVoronoi, region) -> list:
    """Per-cell rows (cell, site..., q, omega, realized diameter).

    1-D: realized diameter is the Fisher-Rao arc length of the cell clipped
    to the region, with boundaries located by the offset equation between
    neighboring sites.  Higher dimensions report NaN diameters.
    """
    q = np.exp(-0.5 * vor.n * vor.weights)
    rows = []
    if vor.sites.shape[1] != 1:
        for j in range(vor.k):
            rows.append(
                {
                    "cell": j,
                    "site": vor.sites[j].tolist(),
                    "q": float(q[j]),
                    "omega": float(vor.weights[j]),
                    "diameter": float("nan"),
                }
            )
        return rows
    region = _normalize_region(region, 1)
    lo, hi = region[0]
    order = np.argsort(vor.sites[:, 0], kind="stable")
    cuts = [lo]
    for a, b in zip(order[:-1], order[1:]):
        s_a, s_b = float(vor.sites[a, 0]), float(vor.sites[b, 0])
        try:
            cuts.append(pairwise_boundary(vor, int(a), int(b), s_a, s_b))
        except ValueError:
            # no sign change between the sites: dominated neighbor
            cuts.append(0.5 * (s_a + s_b))
    cuts.append(hi)
    ts, u = _axis_arc_table(vor.metric, region, 0)
    for rank, j in enumerate(order):
        a = min(max(cuts[rank], lo), hi)
        b = min(max(cuts[rank + 1], lo), hi)
        width = float(
            np.interp(b, ts, u) - np.interp(a, ts, u)
        )
        rows.append(
            {
                "cell": int(j),
                "site": vor.sites[j].tolist(),
                "q": float(q[j]),
                "omega": float(vor.weights[j]),
                "diameter": max(width, 0.0),
            }
        )
    rows.sort(key=lambda row: row["cell"])
    return rows
