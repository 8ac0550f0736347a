"""Monte Carlo experiments: cell agreement, rates, residuals, information."""

import math

import numpy as np
import pytest

from smmlkit import (
    DomainError,
    PriorSpec,
    binomial_model,
    cell_from_members,
    loglik_hess,
    marginal_table,
    mle_from_stat,
)
from smmlkit.asymptotics import (
    STREAM_TREND_BOOT,
    ExperimentConfig,
    ExperimentLab,
    agreement_experiment,
    bootstrap_slopes,
    confidently_decreasing,
    confidently_increasing,
    loglog_slope,
    observed_info_check,
    ols_slope,
    rate_experiment,
    remainder_experiment,
    residual_experiment,
    rng_for,
    run_asymptotics,
    wide_cell_check,
)

# frozen from the seeded default campaign (binomial, theta0=0.3, mesh c=1)
DEFAULT_K = [20, 28, 39, 55, 77, 109]
DEFAULT_AGREEMENT = [1.0, 1.0, 0.941, 1.0, 0.9725, 1.0]
DEFAULT_REMAINDER = [
    0.5250677506775059,
    0.7448076268300685,
    0.8966065145840307,
    0.6254785072945506,
    0.38890891978916464,
    0.3275887833033586,
]
LOGIT_EPS = [0.41605, 0.203978, 0.132674, 0.080447, 0.053593, 0.047657]


@pytest.fixture(scope="module")
def default_report():
    config = ExperimentConfig()
    lab = ExperimentLab(config)
    return run_asymptotics(config, lab), lab


# ---------------------------------------------------------------------------
# plumbing


def test_rng_streams_are_reproducible_and_distinct():
    a = rng_for(7, 2, 3).standard_normal(8)
    b = rng_for(7, 2, 3).standard_normal(8)
    assert np.array_equal(a, b)
    c = rng_for(7, 2, 4).standard_normal(8)
    d = rng_for(8, 2, 3).standard_normal(8)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_config_validation():
    with pytest.raises(DomainError):
        ExperimentConfig(model_family="gaussian")
    with pytest.raises(DomainError):
        ExperimentConfig(codebook_source="annealing")
    with pytest.raises(DomainError):
        ExperimentConfig(n_grid=(100, 100))
    with pytest.raises(DomainError):
        ExperimentConfig(n_grid=())
    with pytest.raises(DomainError):
        ExperimentConfig(theta0=(0.0,))
    with pytest.raises(DomainError):
        ExperimentConfig(replicates=0)
    with pytest.raises(DomainError):
        ExperimentConfig(mesh_constant=0.0)
    with pytest.raises(DomainError):
        ExperimentConfig(restarts=0)


def test_rate_experiment_needs_replicates():
    config = ExperimentConfig(n_grid=(50, 100, 200), replicates=99)
    with pytest.raises(DomainError):
        rate_experiment(config)


def test_foreign_lab_is_rejected():
    config_a = ExperimentConfig(n_grid=(50, 100), replicates=100)
    config_b = ExperimentConfig(n_grid=(50, 100), replicates=100, seed=1)
    lab = ExperimentLab(config_a)
    with pytest.raises(DomainError):
        agreement_experiment(config_b, lab)


def test_slope_helpers():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    slope, se = ols_slope(x, 2.0 * x + 1.0)
    assert abs(slope - 2.0) < 1e-12
    assert se < 1e-9
    with pytest.raises(DomainError):
        ols_slope(x[:2], x[:2])
    slope, _ = loglog_slope([10.0, 100.0, 1000.0], [1.0, 0.1, 0.01])
    assert abs(slope + 1.0) < 1e-12
    with pytest.raises(DomainError):
        loglog_slope([10.0, 100.0, 1000.0], [1.0, 0.0, 0.01])


def test_bootstrap_trend_calls():
    rng = np.random.default_rng(3)
    ns = np.array([50.0, 100.0, 200.0, 400.0])
    rising = [rng.normal(math.log(n), 0.05, size=400) for n in ns]
    slopes = bootstrap_slopes(rising, ns, np.mean, np.random.default_rng(0))
    assert slopes.shape == (1000,)
    assert confidently_increasing(slopes)
    assert not confidently_decreasing(slopes)
    flat = [rng.normal(1.0, 0.5, size=400) for _ in ns]
    slopes = bootstrap_slopes(flat, ns, np.mean, np.random.default_rng(0))
    assert not confidently_increasing(slopes)
    assert not confidently_decreasing(slopes)


# ---------------------------------------------------------------------------
# agreement


def test_single_cell_codebook_is_flagged_uninformative():
    config = ExperimentConfig(
        codebook_source="dp",
        k_range=(1,),
        n_grid=(50, 100, 200),
        replicates=300,
    )
    res = agreement_experiment(config)
    for row in res.rows:
        assert row["k"] == 1
        assert row["agreement"] == 1.0
        assert row["uninformative"] is True


def test_two_seeds_agree_within_bootstrap_error():
    results = []
    for seed in (11, 12):
        config = ExperimentConfig(
            seed=seed, n_grid=(50, 100, 200), replicates=500
        )
        results.append(agreement_experiment(config, ExperimentLab(config)))
    for ra, rb in zip(results[0].rows, results[1].rows):
        diff = abs(ra["agreement"] - rb["agreement"])
        band = 3.0 * math.hypot(ra["agreement_se"], rb["agreement_se"])
        assert diff <= band + 1e-12


def test_reports_are_bit_reproducible():
    config = ExperimentConfig(n_grid=(50, 100), replicates=200)
    first = agreement_experiment(config, ExperimentLab(config))
    second = agreement_experiment(config, ExperimentLab(config))
    assert first.rows == second.rows
    for a, b in zip(first.indicators, second.indicators):
        assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# default campaign


def test_default_campaign_structure(default_report):
    report, _ = default_report
    assert [row["k"] for row in report.rows] == DEFAULT_K
    agreement = [row["agreement"] for row in report.rows]
    assert np.max(np.abs(np.array(agreement) - DEFAULT_AGREEMENT)) < 1e-12
    assert all(0.0 <= row["agreement"] <= 1.0 for row in report.rows)
    assert all(row["excluded_fraction"] < 0.01 for row in report.rows)


def test_default_campaign_rates(default_report):
    report, _ = default_report
    assert -0.6 <= report.slopes["err_vs_n"] <= -0.4
    assert -0.6 <= report.slopes["mle_err_vs_n"] <= -0.4
    assert abs(report.slopes["err_vs_n"] - (-0.546007)) < 1e-4
    assert abs(report.slopes["mle_err_vs_n"] - (-0.461656)) < 1e-4
    # A7 band: median sqrt(n) gap below 1.5 c / sqrt(min Fisher info)
    for row in report.rows:
        assert row["median_sqrt_n_gap"] <= 0.75


def test_default_campaign_gap_has_no_upward_trend(default_report):
    report, _ = default_report
    ns = np.asarray(report.config.n_grid, dtype=float)
    slopes = bootstrap_slopes(
        report.rate.gap_samples,
        ns,
        np.median,
        rng_for(report.config.seed, STREAM_TREND_BOOT),
    )
    assert not confidently_increasing(slopes)


def test_default_campaign_agreement_tail_weakly_increases(default_report):
    report, _ = default_report
    ns = np.asarray(report.config.n_grid, dtype=float)
    slopes = bootstrap_slopes(
        report.agreement.indicators[1:],
        ns[1:],
        np.mean,
        rng_for(report.config.seed, STREAM_TREND_BOOT, 1),
    )
    assert not confidently_decreasing(slopes)


def test_default_campaign_affine_residuals_vanish(default_report):
    # mean parameterization: codepoints are exactly weighted MLE averages
    report, _ = default_report
    for row in report.rows:
        assert row["max_sqrt_n_eps_central"] < 1e-12
    assert abs(report.slopes["residual_vs_log_n"]) < 1e-12


def test_default_campaign_remainder_decays(default_report):
    report, _ = default_report
    got = [row["max_remainder_central"] for row in report.rows]
    assert np.max(np.abs(np.array(got) - DEFAULT_REMAINDER)) < 1e-9
    assert report.slopes["remainder_vs_log_n"] < 0.0


# ---------------------------------------------------------------------------
# residuals off the affine case


def test_logit_residuals_decrease():
    config = ExperimentConfig(param="logit")
    lab = ExperimentLab(config)
    res = residual_experiment(config, lab)
    got = [row["max_sqrt_n_eps_central"] for row in res.rows]
    assert np.max(np.abs(np.array(got) - LOGIT_EPS)) < 1e-5
    assert all(b < a for a, b in zip(got, got[1:]))
    assert res.slope < 0.0

    # singleton cells average a single MLE: residual identically zero
    bundle = lab.bundle(50)
    singles = {c.index for c in bundle.cells if c.member_idx.size == 1}
    assert singles
    checked = 0
    for row in res.cell_tables[0]:
        if row["cell"] in singles and not row["excluded"]:
            assert row["sqrt_n_eps"] < 1e-12
            checked += 1
    assert checked >= 1


# ---------------------------------------------------------------------------
# rate controls


def test_finer_mesh_shrinks_the_gap():
    gaps = {}
    for c in (1.0, 0.25):
        config = ExperimentConfig(
            mesh_constant=c, n_grid=(200,), replicates=600, seed=5
        )
        res = rate_experiment(config, ExperimentLab(config))
        gaps[c] = res.rows[0]["median_sqrt_n_gap"]
        assert res.slope is None  # below 3 grid points
    assert gaps[0.25] < gaps[1.0]


# ---------------------------------------------------------------------------
# observed information


def test_canonical_observed_info_is_data_free():
    model = binomial_model(20, "logit")
    eta = np.array([0.4])
    values = [loglik_hess(model, np.array([float(s)]), eta) for s in range(21)]
    for v in values[1:]:
        assert np.max(np.abs(v - values[0])) < 1e-12


def test_remainder_zero_at_matching_codepoint():
    model = binomial_model(30)
    marg = marginal_table(model, PriorSpec("beta", (1.0, 1.0)))
    cell = cell_from_members(marg, np.array([12]))
    theta_hat = mle_from_stat(model, np.array([12.0])).theta
    check = observed_info_check(model, cell, theta_hat, 30)
    assert check.checked == 1
    assert check.excluded == 0
    assert check.max_remainder < 1e-9


def test_wide_cell_is_a_negative_control(default_report):
    report, lab = default_report
    config = report.config
    check = wide_cell_check(config, 0.3, n=50, lab=lab)
    assert abs(check.max_remainder - 2.678571428571426) < 1e-9
    assert check.max_remainder > report.rows[0]["max_remainder_central"]
    with pytest.raises(DomainError):
        wide_cell_check(config, -1.0, n=50, lab=lab)
    with pytest.raises(DomainError):
        wide_cell_check(config, 1e-6, n=50, lab=lab)
