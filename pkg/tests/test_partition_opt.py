"""Partition optimizers: interval DP, Lloyd descent, polyhedral cells."""

import math

import numpy as np
import pytest

import oracles
from smmlkit import (
    Codebook,
    DomainError,
    FisherMetric,
    PriorSpec,
    UnsupportedDimensionError,
    best_assignment,
    binomial_model,
    cell_masses,
    codelength,
    dp_exact_1d,
    jeffreys_mesh,
    kl_projection,
    lloyd_multistart,
    lloyd_solve,
    marginal_table,
    multinomial_model,
    cell_from_members,
    polyhedral_assign,
    polyhedral_cells,
    resync_codebook,
    truncated_poisson_model,
)

SEED = 20260823
FLAT = PriorSpec("beta", (1.0, 1.0))

# frozen against the exhaustive interval oracle below
DP10_VALUE = 2.527636280145437
DP10_ASSIGNMENT = [0, 1, 1, 1, 1, 2, 2, 2, 2, 2, 3]
MULTI_BEST = 3.5623985499715047


# ---------------------------------------------------------------------------
# interval DP


def test_dp_single_bernoulli_point():
    model = binomial_model(1)
    marg = marginal_table(model, FLAT)
    res = dp_exact_1d(model, marg, range(1, 3))
    assert res.k == 1
    assert abs(res.codelength - math.log(2)) < 1e-12
    per_k = res.meta["per_k"]
    assert abs(per_k[1] - math.log(2)) < 1e-12
    # splitting the two points pays the clamp: codepoints sit at 1e-6
    assert abs(per_k[2] - (math.log(2) + 1.0000005e-6)) < 1e-9


def test_dp_matches_exhaustive_interval_oracle():
    model = binomial_model(10)
    marg = marginal_table(model, FLAT)
    res = dp_exact_1d(model, marg, range(1, 9))
    oracle_value, oracle_cells = oracles.best_interval_partition(10, marg.r)
    assert abs(res.codelength - oracle_value) < 1e-10
    assert abs(res.codelength - DP10_VALUE) < 1e-12
    assert list(res.partition.assignment) == DP10_ASSIGNMENT
    assert [sorted(res.partition.members(j)) for j in range(res.k)] == [
        sorted(c) for c in oracle_cells
    ]


@pytest.mark.parametrize("n", [5, 8])
def test_interval_optimum_is_unrestricted_optimum(n):
    # subset DP over all partitions confirms the interval restriction is free
    model = binomial_model(n)
    marg = marginal_table(model, FLAT)
    res = dp_exact_1d(model, marg, range(1, n + 2))
    free_value = oracles.best_unrestricted_partition(n, marg.r)
    assert abs(res.codelength - free_value) < 1e-12


def test_dp_single_cell_is_full_projection():
    model = binomial_model(10)
    marg = marginal_table(model, FLAT)
    res = dp_exact_1d(model, marg, [1])
    assert res.k == 1
    assert np.all(res.partition.assignment == 0)
    full = kl_projection(cell_from_members(marg, np.arange(11)), model)
    assert np.max(np.abs(res.codebook.codepoints[0] - full.theta)) < 1e-12
    recomputed = codelength(res.codebook, res.partition, marg, model)
    assert abs(res.codelength - recomputed) < 1e-10


def test_dp_rejections():
    marg2 = marginal_table(
        multinomial_model(3, 4), PriorSpec("dirichlet", (1.0, 1.0, 1.0))
    )
    with pytest.raises(UnsupportedDimensionError):
        dp_exact_1d(multinomial_model(3, 4), marg2, [2])
    model = binomial_model(4)
    marg = marginal_table(model, FLAT)
    with pytest.raises(DomainError):
        dp_exact_1d(model, marg, [])
    with pytest.raises(DomainError):
        dp_exact_1d(model, marg, [0, 2])
    with pytest.raises(DomainError):
        dp_exact_1d(model, marg, [9])


# ---------------------------------------------------------------------------
# Lloyd


def test_lloyd_at_dp_optimum_is_a_fixed_point():
    model = binomial_model(10)
    marg = marginal_table(model, FLAT)
    dp = dp_exact_1d(model, marg, range(1, 9))
    res = lloyd_solve(model, marg, dp.codebook)
    assert abs(res.codelength - dp.codelength) < 1e-12
    assert list(res.partition.assignment) == list(dp.partition.assignment)
    values = [row[1] for row in res.trace]
    assert all(abs(v - dp.codelength) < 1e-12 for v in values)


def test_lloyd_from_coarse_mesh_descends_toward_dp():
    model = binomial_model(10)
    marg = marginal_table(model, FLAT)
    metric = FisherMetric.from_model(model)
    plan = jeffreys_mesh(metric, ((0.1, 0.9),), 10, constant=2.0)
    assert plan.k == 3
    init = Codebook(
        codepoints=plan.codepoints,
        assertion_probs=np.full(plan.k, 1.0 / plan.k),
        fixed=True,
    )
    res = lloyd_solve(model, marg, init)
    dp = dp_exact_1d(model, marg, range(1, 9))
    values = [row[1] for row in res.trace]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    assert res.codelength >= dp.codelength - 1e-12
    assert abs(res.codelength - 2.598606898823369) < 1e-9


def test_multistart_on_trinomial_and_perturbation_audit():
    model = multinomial_model(3, 6)
    marg = marginal_table(model, PriorSpec("dirichlet", (1.0, 1.0, 1.0)))
    res = lloyd_multistart(model, marg, k=4, restarts=20, seed=0)
    assert abs(res.codelength - MULTI_BEST) < 1e-9
    assert res.meta["seed"] == 0
    history = res.meta["restarts"]
    assert len(history) == 20
    assert {row["restart"] for row in history} == set(range(20))
    assert min(row["codelength"] for row in history) >= res.codelength - 1e-12
    recomputed = codelength(res.codebook, res.partition, marg, model)
    assert abs(res.codelength - recomputed) < 1e-10

    # no single Lloyd sweep from a nearby start lands below the winner
    rng = np.random.default_rng(7)
    base = res.codebook.codepoints
    for _ in range(30):
        jittered = base + rng.normal(0.0, 0.02, size=base.shape)
        jittered = np.clip(jittered, 0.02, 0.96)
        sums = jittered.sum(axis=1)
        over = sums >= 0.98
        jittered[over] *= (0.96 / sums[over])[:, None]
        init = Codebook(
            codepoints=jittered,
            assertion_probs=np.full(base.shape[0], 1.0 / base.shape[0]),
            fixed=True,
        )
        one = lloyd_solve(model, marg, init, max_sweeps=1)
        assert one.codelength >= res.codelength - 1e-9


def test_multistart_needs_a_restart():
    model = binomial_model(4)
    marg = marginal_table(model, FLAT)
    with pytest.raises(DomainError):
        lloyd_multistart(model, marg, k=2, restarts=0)


def test_resync_returns_synchronized_codebook():
    model = binomial_model(10)
    marg = marginal_table(model, FLAT)
    cb, part = resync_codebook(model, marg, np.array([[0.3], [0.5]]))
    assert np.max(np.abs(cb.assertion_probs - cell_masses(part, marg))) < 1e-12
    again, part2 = resync_codebook(model, marg, cb.codepoints)
    assert list(part2.assignment) == list(part.assignment)


# ---------------------------------------------------------------------------
# polyhedral cells


def test_binomial_polyhedral_assignments_and_tie():
    model = binomial_model(2)
    cb = Codebook(
        codepoints=np.array([[0.25], [0.75]]),
        assertion_probs=np.array([0.5, 0.5]),
    )
    assert polyhedral_assign(cb, model, np.array([0.0])) == 0
    # s=1 is an exact-arithmetic tie; it resolves to the smaller index
    assert polyhedral_assign(cb, model, np.array([1.0])) == 0
    assert polyhedral_assign(cb, model, np.array([2.0])) == 1
    cells = polyhedral_cells(cb, model)
    margin = cells[0].margins(np.array([1.0]))
    assert abs(margin[0]) < 1e-12


def test_identical_codepoints_fall_to_the_heavier_cell():
    model = binomial_model(6)
    cb = Codebook(
        codepoints=np.array([[0.4], [0.4]]),
        assertion_probs=np.array([0.9, 0.1]),
    )
    for s in range(7):
        assert polyhedral_assign(cb, model, np.array([float(s)])) == 0


def test_trinomial_boundary_count_identity():
    # on a cell boundary the count-weighted log-probability ratios balance
    # the assertion-mass ratio; margins must equal that combination exactly
    model = multinomial_model(3, 6)
    cb = Codebook(
        codepoints=np.array([[0.5, 0.3], [0.2, 0.5], [0.3, 0.3]]),
        assertion_probs=np.array([0.5, 0.3, 0.2]),
    )
    cells = polyhedral_cells(cb, model)
    probs = np.column_stack([cb.codepoints, 1.0 - cb.codepoints.sum(axis=1)])
    logq = np.log(cb.assertion_probs)
    space = model.default_space()
    for key, t in zip(space.keys, space.stats):
        counts = np.asarray(key, dtype=float)
        for cell in cells:
            j = cell.index
            for pos, l in enumerate(cell.others):
                direct = float(
                    counts @ np.log(probs[j] / probs[l])
                ) + (logq[j] - logq[l])
                assert abs(cell.margins(t)[pos] - direct) < 1e-10


@pytest.mark.parametrize(
    "model,prior",
    [
        (binomial_model(12), PriorSpec("beta", (1.5, 2.0))),
        (multinomial_model(3, 5), PriorSpec("dirichlet", (1.0, 1.5, 2.0))),
        (truncated_poisson_model(3, PriorSpec("gamma", (2.0, 1.5))),
         PriorSpec("gamma", (2.0, 1.5))),
    ],
    ids=["binomial", "trinomial", "poisson"],
)
def test_polyhedral_matches_cost_argmin(model, prior):
    rng = np.random.default_rng(SEED + 21)
    marg = marginal_table(model, prior)
    space = marg.space
    for _ in range(5):
        k = int(rng.integers(2, 5))
        if model.family == "binomial":
            theta = np.sort(rng.uniform(0.05, 0.95, size=k))[:, None]
        elif model.family == "multinomial":
            raw = rng.uniform(0.1, 1.0, size=(k, 3))
            theta = (raw / raw.sum(axis=1, keepdims=True))[:, :2]
        else:
            theta = np.sort(rng.uniform(0.3, 4.0, size=k))[:, None]
        q = rng.dirichlet(np.full(k, 2.0))
        cb = Codebook(codepoints=theta, assertion_probs=q, fixed=True)
        want = best_assignment(model, space, cb)
        cells = polyhedral_cells(cb, model)
        got = [
            polyhedral_assign(cb, model, t, cells=cells) for t in space.stats
        ]
        assert list(want) == got
