"""Two-part codelength, its decomposition, and assignment costs."""

import math

import numpy as np
import pytest

import oracles
from smmlkit import (
    Codebook,
    DataSpace,
    InvariantViolation,
    MarginalTable,
    Partition,
    PriorSpec,
    assign_cost,
    assignment_costs,
    best_assignment,
    binomial_model,
    cell_masses,
    cell_summary,
    codelength,
    decompose,
    entropy,
    marginal_table,
    mle,
    moment_match,
    multinomial_model,
    partition_from_assignment,
    synchronized_codebook,
    truncated_poisson_model,
)

SEED = 20260823
GAMMA = PriorSpec("gamma", (2.0, 1.5))
FLAT = PriorSpec("beta", (1.0, 1.0))


def random_interior_theta(model, rng):
    if model.family == "binomial":
        p = rng.uniform(0.05, 0.95)
        return model.theta_from_obs_mean(np.array([p]))
    if model.family == "multinomial":
        raw = rng.uniform(0.2, 1.0, size=model.dim_theta + 1)
        return (raw / raw.sum())[:-1]
    return np.array([rng.uniform(0.2, 5.0)])


def random_partition(m, k, rng):
    # one forced member per cell keeps every cell non-empty by construction
    labels = rng.integers(0, k, size=m)
    seeds = rng.choice(m, size=k, replace=False)
    labels[seeds] = np.arange(k)
    return partition_from_assignment(labels, k)


def random_synchronized(model, marginal, k, rng):
    part = random_partition(len(marginal.space), k, rng)
    theta = np.stack([random_interior_theta(model, rng) for _ in range(k)])
    return synchronized_codebook(theta, part, marginal), part


def all_models():
    return [
        binomial_model(7, "mean"),
        binomial_model(7, "logit"),
        binomial_model(7, "arcsin"),
        multinomial_model(3, 5),
        truncated_poisson_model(4, GAMMA),
    ]


# ---------------------------------------------------------------------------
# codelength


def test_single_cell_binomial_is_log2():
    model = binomial_model(1)
    marg = marginal_table(model, FLAT)
    part = partition_from_assignment([0, 0], 1)
    cb = synchronized_codebook(np.array([[0.5]]), part, marg)
    value = codelength(cb, part, marg, model)
    assert abs(value - math.log(2)) < 1e-12
    assertion, detail = decompose(cb, part, marg, model)
    assert assertion == 0.0
    assert abs(detail - math.log(2)) < 1e-12


class _PointMassModel:
    """Degenerate one-point model: p_n(x | theta) = 1 for every theta."""

    def log_pmf_stats(self, theta, stats, log_base):
        return np.zeros(np.shape(log_base))


def test_point_mass_code_is_free():
    space = DataSpace(keys=(0,), stats=np.zeros((1, 1)), log_base=np.zeros(1))
    marg = MarginalTable(space=space, log_r=np.zeros(1), raw_mass=1.0)
    part = partition_from_assignment([0], 1)
    cb = Codebook(codepoints=np.zeros((1, 1)), assertion_probs=np.ones(1))
    assert codelength(cb, part, marg, _PointMassModel()) == 0.0


def test_two_cell_codelength_matches_resummation_oracle():
    model = binomial_model(2)
    marg = marginal_table(model, FLAT)
    part = partition_from_assignment([0, 0, 1], 2)
    theta = np.stack(
        [moment_match(cell_summary(part, marg, j), model).theta for j in (0, 1)]
    )
    cb = synchronized_codebook(theta, part, marg)
    value = codelength(cb, part, marg, model)
    oracle = oracles.binomial_codelength_fixed(
        2,
        marg.r,
        [[0, 1], [2]],
        [float(t[0]) for t in theta],
        cb.assertion_probs,
    )
    assert abs(value - oracle) < 1e-12
    assert abs(theta[0, 0] - 0.25) < 1e-9


# ---------------------------------------------------------------------------
# decompose


def test_entropy_values():
    assert abs(entropy(np.full(4, 0.25)) - math.log(4)) < 1e-12
    assert abs(entropy(np.array([0.25, 0.75])) - 0.5623351446188083) < 1e-9
    assert entropy(np.array([1.0])) == 0.0


def test_single_cell_decomposition():
    model = binomial_model(5)
    marg = marginal_table(model, PriorSpec("beta", (2.0, 3.0)))
    part = partition_from_assignment([0] * 6, 1)
    cb = synchronized_codebook(np.array([[0.4]]), part, marg)
    assertion, detail = decompose(cb, part, marg, model)
    assert assertion == 0.0
    assert abs(detail - codelength(cb, part, marg, model)) < 1e-12


# ---------------------------------------------------------------------------
# assign_cost


def test_assign_cost_value():
    model = binomial_model(2)
    cb = Codebook(
        codepoints=np.array([[0.25], [0.75]]),
        assertion_probs=np.array([0.5, 0.5]),
    )
    cost = assign_cost(model, cb, 0, 0)
    assert abs(cost - (-math.log(0.5) - math.log(0.5625))) < 1e-12
    assert abs(cost - 1.2685113254635072) < 1e-6


def test_equal_codepoints_are_ordered_by_assertion_mass():
    model = binomial_model(6)
    cb = Codebook(
        codepoints=np.array([[0.4], [0.4]]),
        assertion_probs=np.array([0.7, 0.3]),
    )
    costs = assignment_costs(model, model.default_space(), cb)
    assert np.all(costs[:, 0] < costs[:, 1])


def test_unit_assertion_mass_leaves_only_the_detail_term():
    model = binomial_model(4)
    theta = mle(model, 1).theta
    cb = Codebook(codepoints=theta[None, :], assertion_probs=np.array([1.0]))
    cost = assign_cost(model, cb, 1, 0)
    assert abs(cost - (-oracles.binom_logpmf(1, 4, theta[0]))) < 1e-12


# ---------------------------------------------------------------------------
# randomized invariants

_RANDOM_CASES = [(m, k) for m in all_models() for k in (2, 3, 4)]


@pytest.mark.parametrize("model,k", _RANDOM_CASES, ids=str)
def test_decomposition_identity_randomized(model, k):
    rng = np.random.default_rng(SEED + k)
    prior = GAMMA if model.family == "poisson" else _prior_for(model)
    marg = marginal_table(model, prior)
    for _ in range(100 // len(all_models()) + 10):
        cb, part = random_synchronized(model, marg, k, rng)
        total = codelength(cb, part, marg, model)
        assertion, detail = decompose(cb, part, marg, model)
        assert abs(total - (assertion + detail)) < 1e-10
        assert assertion <= math.log(cb.k) + 1e-12


def _prior_for(model):
    if model.family == "binomial":
        return PriorSpec("beta", (1.5, 2.0))
    return PriorSpec("dirichlet", (1.0, 1.5, 2.0))


@pytest.mark.parametrize("model", all_models(), ids=str)
def test_cell_summary_invariants_randomized(model):
    rng = np.random.default_rng(SEED + 7)
    prior = GAMMA if model.family == "poisson" else _prior_for(model)
    marg = marginal_table(model, prior)
    for _ in range(20):
        part = random_partition(len(marg.space), 3, rng)
        for j in range(3):
            cell = cell_summary(part, marg, j)
            assert abs(cell.weights.sum() - 1.0) < 1e-12
            assert abs(np.exp(cell.log_pbar).sum() - 1.0) < 1e-12
            mean = cell.stat_sum / cell.q
            lo = cell.stats.min(axis=0) - 1e-12
            hi = cell.stats.max(axis=0) + 1e-12
            assert np.all(mean >= lo) and np.all(mean <= hi)


@pytest.mark.parametrize("model", all_models(), ids=str)
def test_cross_entropy_dominates_cell_entropy(model):
    rng = np.random.default_rng(SEED + 11)
    prior = GAMMA if model.family == "poisson" else _prior_for(model)
    marg = marginal_table(model, prior)
    for _ in range(20):
        part = random_partition(len(marg.space), 2, rng)
        cell = cell_summary(part, marg, 0)
        theta = random_interior_theta(model, rng)
        log_p = model.log_pmf_stats(theta, cell.stats, cell.log_base)
        cross = -float(cell.weights @ log_p)
        plain = -float(cell.weights @ cell.log_pbar)
        assert cross - plain >= -1e-12  # KL(pbar || p_theta) >= 0


@pytest.mark.parametrize("model", all_models(), ids=str)
def test_reassignment_never_increases_codelength(model):
    rng = np.random.default_rng(SEED + 13)
    prior = GAMMA if model.family == "poisson" else _prior_for(model)
    marg = marginal_table(model, prior)
    space = marg.space
    for _ in range(20):
        cb, part = random_synchronized(model, marg, 3, rng)
        before = codelength(cb, part, marg, model)
        costs = assignment_costs(model, space, cb)
        relaxed = float(marg.r @ costs.min(axis=1))
        assert relaxed <= before + 1e-12
        labels = best_assignment(model, space, cb, tie_tol=0.0)
        if len(np.unique(labels)) == cb.k:
            new_part = partition_from_assignment(labels, cb.k)
            resync = synchronized_codebook(cb.codepoints, new_part, marg)
            after = codelength(resync, new_part, marg, model)
            assert after <= before + 1e-12


def test_reassignment_with_cell_collapse():
    # two cells share a codepoint; exact argmin drains the lighter one
    model = binomial_model(4)
    marg = marginal_table(model, FLAT)
    part = partition_from_assignment([0, 1, 1, 2, 2], 3)
    theta = np.array([[0.5], [0.5], [0.9]])
    cb = synchronized_codebook(theta, part, marg)
    before = codelength(cb, part, marg, model)
    labels = best_assignment(model, marg.space, cb, tie_tol=0.0)
    kept = np.unique(labels)
    assert kept.size == 2
    compact = np.searchsorted(kept, labels)
    new_part = partition_from_assignment(compact, kept.size)
    resync = synchronized_codebook(cb.codepoints[kept], new_part, marg)
    after = codelength(resync, new_part, marg, model)
    assert after < before - 1e-12


# ---------------------------------------------------------------------------
# invariant violations


def test_codebook_rejects_bad_assertion_probs():
    with pytest.raises(InvariantViolation):
        Codebook(np.array([[0.5]]), np.array([0.9]))
    with pytest.raises(InvariantViolation):
        Codebook(np.array([[0.5], [0.6]]), np.array([1.0, -0.0]))
    with pytest.raises(InvariantViolation):
        Codebook(np.array([[0.5]]), np.array([0.5, 0.5]))


def test_partition_rejects_empty_cells():
    with pytest.raises(InvariantViolation):
        Partition(assignment=np.array([0, 0, 0]), k=2)
    with pytest.raises(InvariantViolation):
        Partition(assignment=np.array([0, 2]), k=2)


def test_desynchronized_codebook_is_rejected():
    model = binomial_model(2)
    marg = marginal_table(model, FLAT)
    part = partition_from_assignment([0, 0, 1], 2)
    stale = Codebook(
        codepoints=np.array([[0.25], [0.9]]),
        assertion_probs=np.array([0.5, 0.5]),
    )
    with pytest.raises(InvariantViolation):
        codelength(stale, part, marg, model)
    fixed = Codebook(
        codepoints=stale.codepoints,
        assertion_probs=stale.assertion_probs,
        fixed=True,
    )
    value = codelength(fixed, part, marg, model)
    q_part = cell_masses(part, marg)
    oracle = oracles.binomial_codelength_fixed(
        2, marg.r, [[0, 1], [2]], [0.25, 0.9], np.array([0.5, 0.5])
    )
    assert abs(value - oracle) < 1e-12
    assert q_part[0] > 0.5  # genuinely desynchronized
