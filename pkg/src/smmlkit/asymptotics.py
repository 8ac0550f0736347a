"""Seeded experiments probing the large-sample behavior of codebooks.

Four claims are exercised on an increasing sample-size grid:

* agreement: the exact cell of a data set (argmin of assertion + detail
  cost) coincides, with probability growing in n, with the weighted
  Fisher-Voronoi cell of its MLE;
* rate: the codepoint asserted for a data set is a root-n consistent
  estimator, with the scaled codepoint-to-MLE gap bounded by the mesh band;
* residual: each codepoint equals the cell's marginal-weighted average of
  member MLEs up to a residual that vanishes faster than n^(-1/2)
  (exactly zero when the parameterization is the mean itself);
* remainder: the observed information along MLE-to-codepoint segments
  approaches the expected information at the codepoint as cells shrink.

Monte Carlo statistics are drawn from per-(stream, grid-index) generators
spawned off one master seed, so reports are bit-identical across runs.
Trend assertions are one-sided: a monotonicity claim fails only when the
bootstrap slope distribution puts 95% of its mass on the wrong side of
zero; exactly summed statistics use the plain fitted slope instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .codebook import (
    CellSummary,
    Codebook,
    Partition,
    best_assignment,
    cell_from_members,
    cell_summaries,
)
from .errors import DomainError, InvariantViolation
from .geometry import WeightedVoronoi, jeffreys_mesh, voronoi_assign
from .models import (
    ExponentialFamily,
    FisherMetric,
    MarginalTable,
    PriorSpec,
    binomial_model,
    fisher_info,
    loglik_hess,
    marginal_table,
    mle_from_stat,
    multinomial_model,
    truncated_poisson_model,
)
from .partition_opt import dp_exact_1d, lloyd_multistart, resync_codebook
from .projection import kl_projection

__all__ = [
    "ExperimentConfig",
    "ExperimentLab",
    "AgreementResult",
    "RateResult",
    "ResidualResult",
    "RemainderCheck",
    "RemainderTrendResult",
    "AsymptoticsReport",
    "agreement_experiment",
    "rate_experiment",
    "residual_experiment",
    "remainder_experiment",
    "observed_info_check",
    "wide_cell_check",
    "run_asymptotics",
    "rng_for",
    "ols_slope",
    "loglog_slope",
    "bootstrap_slopes",
    "confidently_increasing",
    "confidently_decreasing",
]

# RNG stream ids; each (stream, grid-index) pair owns an independent child
# of the master seed so experiments never share draws.
STREAM_AGREE_DRAW = 0
STREAM_AGREE_BOOT = 1
STREAM_RATE_DRAW = 2
STREAM_TREND_BOOT = 3
STREAM_LLOYD = 4

SEGMENT_FRACTIONS = (0.0, 0.25, 0.5, 0.75, 1.0)
BOOTSTRAP_DEFAULT = 1000
# slice of the parameter region (per axis) whose codepoints count as central
CENTRAL_BAND = 0.8


def rng_for(seed: int, *key: int) -> np.random.Generator:
    """Deterministic child generator for a (stream, counter, ...) key."""
    ss = np.random.SeedSequence(
        entropy=int(seed), spawn_key=tuple(int(k) for k in key)
    )
    return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment campaign: model family, truth, grid, and codebooks.

    theta0 and region are given in per-observation mean coordinates so the
    same config describes the same experiment under every parameterization
    of the family.  codebook_source picks how the per-n codebook is built:
    a Jeffreys mesh with spacing mesh_constant / sqrt(n) (masses then
    resynchronized), the exact interval DP over k_range, or multistart
    Lloyd at k = max(k_range).
    """

    model_family: str = "binomial"
    param: str = "mean"
    prior_family: str = "beta"
    prior_params: tuple = (1.0, 1.0)
    theta0: tuple = (0.3,)
    n_grid: tuple = (50, 100, 200, 400, 800, 1600)
    replicates: int = 2000
    seed: int = 0
    codebook_source: str = "jeffreys_mesh"
    mesh_constant: float = 1.0
    region: tuple = ((0.01, 0.99),)
    k_range: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    restarts: int = 20
    exclude_clamped: bool = True

    def __post_init__(self):
        if self.model_family not in (
            "binomial",
            "multinomial",
            "truncated_poisson",
        ):
            raise DomainError(f"unknown model family {self.model_family!r}")
        if self.codebook_source not in ("jeffreys_mesh", "dp", "lloyd"):
            raise DomainError(
                f"unknown codebook source {self.codebook_source!r}"
            )
        grid = tuple(int(n) for n in self.n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise DomainError("n_grid must be strictly increasing")
        if grid[0] < 1:
            raise DomainError("sample sizes must be positive")
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(
            self, "theta0", tuple(float(t) for t in self.theta0)
        )
        region = tuple(
            (float(lo), float(hi)) for lo, hi in np.atleast_2d(self.region)
        )
        object.__setattr__(self, "region", region)
        object.__setattr__(
            self, "k_range", tuple(int(k) for k in self.k_range)
        )
        if self.replicates < 1:
            raise DomainError("need at least one replicate")
        if self.mesh_constant <= 0.0:
            raise DomainError("mesh_constant must be positive")
        if self.restarts < 1:
            raise DomainError("restarts must be positive")
        # theta0 must be interior for the smallest model on the grid
        model = self.model_for(grid[0])
        theta0 = model.theta_from_obs_mean(np.asarray(self.theta0))
        if not model.is_interior(theta0):
            raise DomainError(f"theta0 {self.theta0} is not interior")

    def prior_spec(self) -> PriorSpec:
        return PriorSpec(self.prior_family, tuple(self.prior_params))

    def model_for(self, n: int) -> ExponentialFamily:
        if self.model_family == "binomial":
            return binomial_model(n, self.param)
        if self.model_family == "multinomial":
            return multinomial_model(len(self.theta0) + 1, n)
        return truncated_poisson_model(n, self.prior_spec())


def _region_theta(model: ExponentialFamily, region_mean) -> tuple:
    """Map an axis-aligned mean-coordinate region into model coordinates."""
    center = np.array([0.5 * (lo + hi) for lo, hi in region_mean])
    out = []
    for axis, (lo, hi) in enumerate(region_mean):
        a, b = center.copy(), center.copy()
        a[axis], b[axis] = lo, hi
        ta = float(model.theta_from_obs_mean(a)[axis])
        tb = float(model.theta_from_obs_mean(b)[axis])
        out.append((min(ta, tb), max(ta, tb)))
    return tuple(out)


# ---------------------------------------------------------------------------
# per-n state, shared across experiments


class _Bundle:
    """Everything the experiments need at one grid point n.

    All per-lattice-point quantities are precomputed once: the exact cell
    of every data set, its MLE in model and mean coordinates, the clamped
    flag, and the weighted-Voronoi cell of the MLE.  Monte Carlo then only
    samples lattice indices.
    """

    def __init__(self, config: ExperimentConfig, n: int):
        self.config = config
        self.n = int(n)

    @cached_property
    def model(self) -> ExponentialFamily:
        return self.config.model_for(self.n)

    @cached_property
    def space(self):
        return self.model.default_space()

    @cached_property
    def marginal(self) -> MarginalTable:
        return marginal_table(self.model, self.config.prior_spec(), self.space)

    @cached_property
    def metric(self) -> FisherMetric:
        return FisherMetric.from_model(self.model)

    @cached_property
    def region_theta(self) -> tuple:
        return _region_theta(self.model, self.config.region)

    @cached_property
    def solve(self) -> tuple:
        """(codebook, partition) from the configured source."""
        cfg = self.config
        if cfg.codebook_source == "jeffreys_mesh":
            # anchoring the mesh phase at theta0 keeps the truth's position
            # relative to the lattice fixed across n, so error quantiles
            # compare like against like on the grid.  Phase 0.5 puts theta0
            # on a cell boundary: the two flanking codepoints then split the
            # draw mass and the median error stays a stable multiple of the
            # gap, whereas a site exactly on theta0 leaves the median
            # teetering between 0 and one gap.  One synchronization pass
            # then sets q to the marginal masses of the sites' detail-cost
            # cells; iterating the assignment to its fixed point would
            # coarsen the spacing well past the advertised c / sqrt(n) band.
            anchor = self.theta0_model if self.model.dim_theta == 1 else None
            mesh = jeffreys_mesh(
                self.metric,
                self.region_theta,
                self.n,
                cfg.mesh_constant,
                anchor=anchor,
                anchor_phase=0.5,
            )
            return resync_codebook(
                self.model, self.marginal, mesh.codepoints, max_rounds=1
            )
        if cfg.codebook_source == "dp":
            res = dp_exact_1d(self.model, self.marginal, cfg.k_range)
        else:
            child = rng_for(cfg.seed, STREAM_LLOYD, self.n)
            res = lloyd_multistart(
                self.model,
                self.marginal,
                max(cfg.k_range),
                restarts=cfg.restarts,
                seed=int(child.integers(np.iinfo(np.int64).max)),
            )
        return res.codebook, res.partition

    @property
    def codebook(self) -> Codebook:
        return self.solve[0]

    @property
    def partition(self) -> Partition:
        return self.solve[1]

    @cached_property
    def vor(self) -> WeightedVoronoi:
        return WeightedVoronoi.from_codebook(self.codebook, self.n, self.metric)

    @cached_property
    def theta0_model(self) -> np.ndarray:
        return self.model.theta_from_obs_mean(np.asarray(self.config.theta0))

    @cached_property
    def sampling_probs(self) -> np.ndarray:
        p = np.exp(self.model.log_pmf(self.theta0_model, self.space))
        return p / p.sum()

    @cached_property
    def exact_cell(self) -> np.ndarray:
        return best_assignment(self.model, self.space, self.codebook, tie_tol=0.0)

    @cached_property
    def _mle_table(self):
        thetas = np.empty((len(self.space), self.model.dim_theta))
        means = np.empty((len(self.space), self.model.dim_theta))
        clamped = np.empty(len(self.space), dtype=bool)
        for i in range(len(self.space)):
            res = mle_from_stat(self.model, self.space.stats[i])
            thetas[i] = res.theta
            means[i] = self.model.obs_mean_from_theta(res.theta)
            clamped[i] = res.clamped
        return thetas, means, clamped

    @property
    def mle_theta(self) -> np.ndarray:
        return self._mle_table[0]

    @property
    def mle_mean(self) -> np.ndarray:
        return self._mle_table[1]

    @property
    def clamped(self) -> np.ndarray:
        return self._mle_table[2]

    @cached_property
    def voro_cell(self) -> np.ndarray:
        out = np.empty(len(self.space), dtype=int)
        for i in range(len(self.space)):
            out[i] = voronoi_assign(self.vor, self.mle_theta[i])
        return out

    @cached_property
    def codepoint_mean(self) -> np.ndarray:
        return np.stack(
            [
                self.model.obs_mean_from_theta(cp)
                for cp in self.codebook.codepoints
            ]
        )

    @cached_property
    def central_cells(self) -> np.ndarray:
        """Cells whose codepoint sits in the middle band of the region."""
        mask = np.ones(self.codebook.k, dtype=bool)
        margin = 0.5 * (1.0 - CENTRAL_BAND)
        for axis, (lo, hi) in enumerate(self.region_theta):
            clo = lo + margin * (hi - lo)
            chi = hi - margin * (hi - lo)
            cp = self.codebook.codepoints[:, axis]
            mask &= (cp >= clo) & (cp <= chi)
        return mask

    @cached_property
    def cells(self) -> list:
        return cell_summaries(self.partition, self.marginal)

    @cached_property
    def projected_codepoints(self) -> np.ndarray:
        """KL projection of every induced cell.

        Mesh-sourced codebooks keep their codepoints frozen at the mesh
        sites; the weighted-average and information-remainder claims are
        stationarity properties of projected codepoints, so those
        experiments re-project each cell first.  For DP and Lloyd sources
        this reproduces the stored codepoints.
        """
        return np.stack(
            [kl_projection(cell, self.model).theta for cell in self.cells]
        )

    @cached_property
    def projected_codepoint_mean(self) -> np.ndarray:
        return np.stack(
            [
                self.model.obs_mean_from_theta(cp)
                for cp in self.projected_codepoints
            ]
        )


class ExperimentLab:
    """Per-n bundle cache shared by the experiments of one campaign."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self._bundles: dict = {}

    def bundle(self, n: int) -> _Bundle:
        if n not in self._bundles:
            self._bundles[n] = _Bundle(self.config, n)
        return self._bundles[n]


def _lab_for(config: ExperimentConfig, lab: Optional[ExperimentLab]):
    if lab is None:
        return ExperimentLab(config)
    if lab.config is not config:
        raise DomainError("lab was built for a different config")
    return lab


# ---------------------------------------------------------------------------
# trend machinery


def ols_slope(x: np.ndarray, y: np.ndarray) -> tuple:
    """Least-squares slope of y on x with its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise DomainError("slope fit needs at least 3 aligned points")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ y) / sxx
    resid = y - y.mean() - slope * xc
    dof = x.size - 2
    se = math.sqrt(max(float(resid @ resid), 0.0) / dof / sxx) if dof else 0.0
    return slope, se


def loglog_slope(ns, values) -> tuple:
    """Slope and SE of log(values) against log(ns)."""
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0.0):
        raise DomainError("log-log fit needs positive values")
    return ols_slope(np.log(np.asarray(ns, dtype=float)), np.log(values))


def bootstrap_slopes(
    samples,
    ns,
    stat_fn,
    rng: np.random.Generator,
    num_boot: int = BOOTSTRAP_DEFAULT,
) -> np.ndarray:
    """Slope distribution of a resampled per-n statistic against log n.

    samples is one array of replicate-level values per grid point; each
    bootstrap round resamples every array with replacement, applies
    stat_fn, and fits the statistic on log n.
    """
    ns = np.asarray(ns, dtype=float)
    if len(samples) != ns.size:
        raise DomainError("one sample array per grid point required")
    logn = np.log(ns)
    out = np.empty(num_boot)
    for b in range(num_boot):
        stats = np.empty(ns.size)
        for i, arr in enumerate(samples):
            arr = np.asarray(arr)
            idx = rng.integers(0, arr.size, arr.size)
            stats[i] = stat_fn(arr[idx])
        out[b], _ = ols_slope(logn, stats)
    return out


def confidently_increasing(slopes: np.ndarray, level: float = 0.95) -> bool:
    """True when the slope distribution is positive at one-sided `level`."""
    return float(np.quantile(slopes, 1.0 - level)) > 0.0


def confidently_decreasing(slopes: np.ndarray, level: float = 0.95) -> bool:
    """True when the slope distribution is negative at one-sided `level`."""
    return float(np.quantile(slopes, level)) < 0.0


def _draw_indices(bundle: _Bundle, rng: np.random.Generator) -> np.ndarray:
    return rng.choice(
        len(bundle.space),
        size=bundle.config.replicates,
        p=bundle.sampling_probs,
    )


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class AgreementResult:
    """Exact-cell vs Voronoi-cell agreement rates over the n grid.

    indicators holds the post-exclusion per-replicate agreement booleans
    for each grid point, so trend tests can bootstrap over replicates.
    """

    config: ExperimentConfig
    rows: tuple
    indicators: tuple


def agreement_experiment(
    config: ExperimentConfig, lab: Optional[ExperimentLab] = None
) -> AgreementResult:
    """Fraction of replicates whose exact and geometric cells coincide."""
    lab = _lab_for(config, lab)
    rows, indicators = [], []
    for i, n in enumerate(config.n_grid):
        bundle = lab.bundle(n)
        idx = _draw_indices(bundle, rng_for(config.seed, STREAM_AGREE_DRAW, i))
        keep = (
            ~bundle.clamped[idx]
            if config.exclude_clamped
            else np.ones(idx.size, dtype=bool)
        )
        agree = (bundle.exact_cell[idx] == bundle.voro_cell[idx])[keep]
        if agree.size:
            rate = float(agree.mean())
            boot = rng_for(config.seed, STREAM_AGREE_BOOT, i)
            picks = boot.integers(0, agree.size, (BOOTSTRAP_DEFAULT, agree.size))
            se = float(agree[picks].mean(axis=1).std(ddof=1))
        else:
            rate, se = float("nan"), float("nan")
        rows.append(
            {
                "n": int(n),
                "k": int(bundle.codebook.k),
                "agreement": rate,
                "agreement_se": se,
                "excluded_fraction": float(1.0 - keep.mean()),
                "uninformative": bool(bundle.codebook.k == 1),
            }
        )
        indicators.append(agree.astype(float))
    return AgreementResult(config=config, rows=tuple(rows), indicators=tuple(indicators))


@dataclass(frozen=True)
class RateResult:
    """Error quantiles against the truth and the MLE, with fitted slopes.

    Errors are Euclidean norms in per-observation mean coordinates; the
    asserted estimate for a replicate is its cell's KL-projected
    codepoint.  gap_samples keeps the per-replicate sqrt(n) *
    codepoint-to-MLE gaps for bootstrap trend tests.  Slopes are None
    below 3 grid points.
    """

    config: ExperimentConfig
    rows: tuple
    gap_samples: tuple
    slope: Optional[float]
    slope_se: Optional[float]
    mle_slope: Optional[float]
    mle_slope_se: Optional[float]


def rate_experiment(
    config: ExperimentConfig, lab: Optional[ExperimentLab] = None
) -> RateResult:
    """Consistency rate of asserted codepoints, with an MLE control arm."""
    if config.replicates < 100:
        raise DomainError("rate fits need at least 100 replicates")
    lab = _lab_for(config, lab)
    theta0 = np.asarray(config.theta0)
    rows, gap_samples = [], []
    for i, n in enumerate(config.n_grid):
        bundle = lab.bundle(n)
        idx = _draw_indices(bundle, rng_for(config.seed, STREAM_RATE_DRAW, i))
        keep = (
            ~bundle.clamped[idx]
            if config.exclude_clamped
            else np.ones(idx.size, dtype=bool)
        )
        idx = idx[keep]
        # assert each cell's KL projection: the optimal codepoint for the
        # induced partition.  Raw mesh sites differ from it by a lattice
        # rounding that leaves a small-n transient in the gap medians.
        mu_code = bundle.projected_codepoint_mean[bundle.exact_cell[idx]]
        mu_hat = bundle.mle_mean[idx]
        err = np.linalg.norm(mu_code - theta0, axis=1)
        err_mle = np.linalg.norm(mu_hat - theta0, axis=1)
        gap = math.sqrt(n) * np.linalg.norm(mu_code - mu_hat, axis=1)
        rows.append(
            {
                "n": int(n),
                "k": int(bundle.codebook.k),
                "median_err": float(np.median(err)),
                "q90_err": float(np.quantile(err, 0.9)),
                "median_err_mle": float(np.median(err_mle)),
                "q90_err_mle": float(np.quantile(err_mle, 0.9)),
                "median_sqrt_n_gap": float(np.median(gap)),
                "q90_sqrt_n_gap": float(np.quantile(gap, 0.9)),
                "excluded_fraction": float(1.0 - keep.mean()),
            }
        )
        gap_samples.append(gap)
    slope = slope_se = mle_slope = mle_slope_se = None
    if len(config.n_grid) >= 3:
        ns = np.asarray(config.n_grid, dtype=float)
        slope, slope_se = loglog_slope(ns, [r["median_err"] for r in rows])
        mle_slope, mle_slope_se = loglog_slope(
            ns, [r["median_err_mle"] for r in rows]
        )
    return RateResult(
        config=config,
        rows=tuple(rows),
        gap_samples=tuple(gap_samples),
        slope=slope,
        slope_se=slope_se,
        mle_slope=mle_slope,
        mle_slope_se=mle_slope_se,
    )


@dataclass(frozen=True)
class ResidualResult:
    """Codepoint-minus-weighted-MLE residuals, summed exactly per cell.

    cell_tables carries, per grid point, the per-cell scaled residual norm
    together with central/excluded flags; slope is the fitted trend of the
    central max against log n (None below 3 grid points).
    """

    config: ExperimentConfig
    rows: tuple
    cell_tables: tuple
    slope: Optional[float]


def residual_experiment(
    config: ExperimentConfig, lab: Optional[ExperimentLab] = None
) -> ResidualResult:
    """Exact sqrt(n)-scaled residual of every cell's weighted-MLE average.

    Cells come from the configured codebook; the codepoint entering the
    residual is the cell's KL projection (see projected_codepoints).
    """
    lab = _lab_for(config, lab)
    rows, tables = [], []
    for n in config.n_grid:
        bundle = lab.bundle(n)
        table = []
        central_vals, all_vals, excluded = [], [], 0
        for cell in bundle.cells:
            j = cell.index
            is_central = bool(bundle.central_cells[j])
            if bundle.clamped[cell.member_idx].any():
                excluded += 1
                table.append(
                    {
                        "cell": j,
                        "sqrt_n_eps": float("nan"),
                        "central": is_central,
                        "excluded": True,
                    }
                )
                continue
            eps = bundle.projected_codepoints[j] - (
                cell.weights @ bundle.mle_theta[cell.member_idx]
            )
            val = math.sqrt(n) * float(np.linalg.norm(eps))
            table.append(
                {
                    "cell": j,
                    "sqrt_n_eps": val,
                    "central": is_central,
                    "excluded": False,
                }
            )
            all_vals.append(val)
            if is_central:
                central_vals.append(val)
        rows.append(
            {
                "n": int(n),
                "k": int(bundle.codebook.k),
                "max_sqrt_n_eps_central": (
                    max(central_vals) if central_vals else float("nan")
                ),
                "max_sqrt_n_eps_all": (
                    max(all_vals) if all_vals else float("nan")
                ),
                "excluded_cells": excluded,
                "central_cells": int(bundle.central_cells.sum()),
            }
        )
        tables.append(tuple(table))
    slope = None
    if len(config.n_grid) >= 3:
        vals = np.array([r["max_sqrt_n_eps_central"] for r in rows])
        if np.all(np.isfinite(vals)):
            # raw values on log n: the statistic may be exactly zero
            slope, _ = ols_slope(np.log(np.asarray(config.n_grid, float)), vals)
    return ResidualResult(
        config=config, rows=tuple(rows), cell_tables=tuple(tables), slope=slope
    )


@dataclass(frozen=True)
class RemainderCheck:
    """Worst observed-vs-expected information gap over one cell."""

    max_remainder: float
    checked: int
    excluded: int


def observed_info_check(
    model: ExponentialFamily,
    cell: CellSummary,
    codepoint: np.ndarray,
    n: Optional[int] = None,
) -> RemainderCheck:
    """Max spectral gap between segment observed info and J1 at the codepoint.

    For each interior-MLE member the scaled negative log-likelihood Hessian
    is evaluated at 5 points on the segment from the member's MLE to the
    codepoint; members with clamped MLEs are skipped and counted.
    """
    n = model.sample_size if n is None else int(n)
    theta_star = np.atleast_1d(np.asarray(codepoint, dtype=float))
    j_star = fisher_info(model, theta_star)
    worst, checked, excluded = 0.0, 0, 0
    for stat in cell.stats:
        res = mle_from_stat(model, stat)
        if res.clamped:
            excluded += 1
            continue
        for t in SEGMENT_FRACTIONS:
            theta_t = res.theta + t * (theta_star - res.theta)
            obs = -loglik_hess(model, stat, theta_t) / n
            worst = max(worst, float(np.linalg.norm(obs - j_star, 2)))
        checked += 1
    return RemainderCheck(max_remainder=worst, checked=checked, excluded=excluded)


@dataclass(frozen=True)
class RemainderTrendResult:
    """Central-cell information remainders over the n grid."""

    config: ExperimentConfig
    rows: tuple
    slope: Optional[float]


def remainder_experiment(
    config: ExperimentConfig, lab: Optional[ExperimentLab] = None
) -> RemainderTrendResult:
    """Worst central-cell information remainder at each grid point."""
    lab = _lab_for(config, lab)
    rows = []
    for n in config.n_grid:
        bundle = lab.bundle(n)
        worst, checked, excluded = 0.0, 0, 0
        for cell in bundle.cells:
            if not bundle.central_cells[cell.index]:
                continue
            res = observed_info_check(
                bundle.model, cell, bundle.projected_codepoints[cell.index], n
            )
            worst = max(worst, res.max_remainder)
            checked += res.checked
            excluded += res.excluded
        rows.append(
            {
                "n": int(n),
                "k": int(bundle.codebook.k),
                "max_remainder_central": worst,
                "remainder_checked": checked,
                "remainder_excluded": excluded,
            }
        )
    slope = None
    if len(config.n_grid) >= 3:
        vals = np.array([r["max_remainder_central"] for r in rows])
        slope, _ = ols_slope(np.log(np.asarray(config.n_grid, float)), vals)
    return RemainderTrendResult(config=config, rows=tuple(rows), slope=slope)


def wide_cell_check(
    config: ExperimentConfig,
    diameter: float,
    n: Optional[int] = None,
    lab: Optional[ExperimentLab] = None,
) -> RemainderCheck:
    """Negative control: information remainder of an artificially wide cell.

    Builds one cell from every lattice point whose per-observation
    statistic average lies within diameter/2 of theta0 (mean coordinates),
    projects it, and runs the observed-information check on it.
    """
    if diameter <= 0.0:
        raise DomainError("diameter must be positive")
    lab = _lab_for(config, lab)
    n = config.n_grid[0] if n is None else int(n)
    bundle = lab.bundle(n)
    obs_avg = bundle.space.stats / n
    dist = np.max(
        np.abs(obs_avg - np.asarray(config.theta0)[None, :]), axis=1
    )
    members = np.flatnonzero(dist <= 0.5 * diameter)
    if members.size < 2:
        raise DomainError("wide cell needs at least two lattice points")
    cell = cell_from_members(bundle.marginal, members)
    codepoint = kl_projection(cell, bundle.model).theta
    return observed_info_check(bundle.model, cell, codepoint, n)


# ---------------------------------------------------------------------------
# combined report


@dataclass(frozen=True)
class AsymptoticsReport:
    """Merged per-n rows plus fitted slopes from all four experiments."""

    config: ExperimentConfig
    rows: tuple
    slopes: dict
    agreement: AgreementResult
    rate: RateResult
    residual: ResidualResult
    remainder: RemainderTrendResult

    def __post_init__(self):
        for row in self.rows:
            rate = row["agreement"]
            if not math.isnan(rate) and not 0.0 <= rate <= 1.0:
                raise InvariantViolation(f"agreement rate {rate} outside [0,1]")
        for name, value in self.slopes.items():
            if value is not None and not math.isfinite(value):
                raise InvariantViolation(f"slope {name} is not finite")


def run_asymptotics(
    config: ExperimentConfig, lab: Optional[ExperimentLab] = None
) -> AsymptoticsReport:
    """Run all four experiments on a shared lab and merge their rows."""
    lab = _lab_for(config, lab)
    agreement = agreement_experiment(config, lab)
    rate = rate_experiment(config, lab)
    residual = residual_experiment(config, lab)
    remainder = remainder_experiment(config, lab)

    rows = []
    for i, n in enumerate(config.n_grid):
        row = {"n": int(n), "k": agreement.rows[i]["k"]}
        for src in (agreement.rows[i], rate.rows[i], residual.rows[i],
                    remainder.rows[i]):
            for key, value in src.items():
                if key in ("n", "k"):
                    continue
                row[key] = value
        rows.append(row)

    # agreement trend excludes the first grid point by convention
    agreement_slope = None
    tail = [r["agreement"] for r in agreement.rows[1:]]
    if len(tail) >= 3 and not any(math.isnan(v) for v in tail):
        agreement_slope, _ = ols_slope(
            np.log(np.asarray(config.n_grid[1:], float)), np.array(tail)
        )
    slopes = {
        "err_vs_n": rate.slope,
        "err_vs_n_se": rate.slope_se,
        "mle_err_vs_n": rate.mle_slope,
        "mle_err_vs_n_se": rate.mle_slope_se,
        "agreement_vs_log_n": agreement_slope,
        "residual_vs_log_n": residual.slope,
        "remainder_vs_log_n": remainder.slope,
    }
    return AsymptoticsReport(
        config=config,
        rows=tuple(rows),
        slopes=slopes,
        agreement=agreement,
        rate=rate,
        residual=residual,
        remainder=remainder,
    )
