import math

import numpy as np
import pytest

from freewalk.errors import MalformedInputError, ResourceLimitError
from freewalk.walks import (
    DrivingMeasure,
    LengthDistribution,
    MC_BLOCK,
    TrajectoryStats,
    estimate_escape_rate,
    estimate_spectral_radius,
    exact_length_dist_bruteforce,
    monte_carlo_length_dist,
    return_probability,
    sample_trajectory,
    splitmix64,
    srw_birth_death_dist,
    srw_tree_dist,
    uniform_srw_measure,
)
from freewalk.words import GroupContext, IntegerFactor, ReducedWord


def _max_diff(d1: LengthDistribution, d2: LengthDistribution) -> float:
    keys = set(d1.mass) | set(d2.mass)
    return max(abs(d1.probability(k) - d2.probability(k)) for k in keys)


def test_measure_validation(free2):
    with pytest.raises(MalformedInputError):
        DrivingMeasure(((free2.parse_word("a"), 0.5),))  # does not sum to one
    with pytest.raises(MalformedInputError):
        DrivingMeasure(
            ((free2.parse_word("a"), 0.5), (free2.parse_word("a"), 0.5))
        )


def test_srw_classification(free2, z2z3, z2z3_nn):
    assert uniform_srw_measure(free2).as_uniform_srw(free2) == (2, 0.0)
    lazy = uniform_srw_measure(free2, 0.25)
    assert lazy.as_uniform_srw(free2) == (2, 0.25)
    assert z2z3_nn.as_uniform_srw(z2z3) is None
    skew = DrivingMeasure(
        (
            (free2.parse_word("a"), 0.4),
            (free2.parse_word("a^-1"), 0.2),
            (free2.parse_word("b"), 0.2),
            (free2.parse_word("b^-1"), 0.2),
        )
    )
    assert skew.as_uniform_srw(free2) is None


def test_sample_trajectory_point_masses(free2):
    rng = np.random.default_rng(0)
    mu_a = DrivingMeasure(((free2.parse_word("a"), 1.0),))
    assert sample_trajectory(mu_a, free2, 3, rng) == [0, 1, 2, 3]
    mu_e = DrivingMeasure(((ReducedWord(), 1.0),))
    assert sample_trajectory(mu_e, free2, 4, rng) == [0, 0, 0, 0, 0]


def test_sample_trajectory_increments(free2, srw2):
    rng = np.random.default_rng(11)
    traj = sample_trajectory(srw2, free2, 200, rng)
    for prev, cur in zip(traj, traj[1:]):
        if prev == 0:
            assert cur == 1
        else:
            assert abs(cur - prev) == 1


def test_bruteforce_small_laws(free2, srw2):
    d2 = exact_length_dist_bruteforce(srw2, free2, 2)
    assert d2.mass == pytest.approx({0: 0.25, 2: 0.75})
    d3 = exact_length_dist_bruteforce(srw2, free2, 3)
    assert d3.mass == pytest.approx({1: 7 / 16, 3: 9 / 16})
    mu_a = DrivingMeasure(((free2.parse_word("a"), 1.0),))
    for n in (0, 1, 5):
        d = exact_length_dist_bruteforce(mu_a, free2, n)
        assert d.mass == {n: 1.0}


def test_bruteforce_cap(free2, srw2):
    with pytest.raises(ResourceLimitError):
        exact_length_dist_bruteforce(srw2, free2, 10, cap=100)


def test_bruteforce_pruning_accounts_mass(free2, srw2):
    d = exact_length_dist_bruteforce(srw2, free2, 8, prune_threshold=1e-4)
    assert d.pruned_mass > 0.0
    exact = exact_length_dist_bruteforce(srw2, free2, 8)
    for k, p in d.mass.items():
        assert p <= exact.probability(k) + 1e-15
        assert exact.probability(k) - p <= d.pruned_mass + 1e-15
    assert math.fsum(d.mass.values()) + d.pruned_mass == pytest.approx(1.0, abs=1e-9)


def test_birth_death_matches_bruteforce_small(free2, srw2):
    ctx1 = GroupContext((IntegerFactor("a"),))
    mu1 = uniform_srw_measure(ctx1)
    for r, ctx, mu in ((1, ctx1, mu1), (2, free2, srw2)):
        for lazy in (0.0, 0.25):
            m = uniform_srw_measure(ctx, lazy)
            dists = exact_length_dist_bruteforce(m, ctx, 8, all_steps=True)
            bds = srw_birth_death_dist(r, 8, lazy, all_steps=True)
            for n in range(9):
                assert _max_diff(dists[n], bds[n]) <= 1e-12


def test_birth_death_z_line():
    d = srw_birth_death_dist(1, 2)
    assert d.mass == pytest.approx({0: 0.5, 2: 0.5})


def test_tree_engine_matches_bruteforce(free2):
    for r in (2, 3):
        names = "abc"[:r]
        ctx = GroupContext(tuple(IntegerFactor(n) for n in names))
        for lazy in (0.0, 0.25):
            mu = uniform_srw_measure(ctx, lazy)
            for n in (0, 1, 3, 6):
                bf = exact_length_dist_bruteforce(mu, ctx, n)
                tr = srw_tree_dist(r, n, lazy)
                assert _max_diff(bf, tr) <= 1e-12


def test_parity(free2, srw2):
    dists = exact_length_dist_bruteforce(srw2, free2, 9, all_steps=True)
    for n in range(10):
        assert all(k % 2 == n % 2 for k in dists[n].mass)


def test_support_bound(free2):
    mu = DrivingMeasure(
        ((free2.parse_word("a b"), 0.5), (free2.parse_word("b^-1"), 0.5))
    )
    l_max = mu.max_support_length(free2)
    assert l_max == 2
    dists = exact_length_dist_bruteforce(mu, free2, 7, all_steps=True)
    for n in range(8):
        assert dists[n].max_length() <= n * l_max


def test_splitmix_is_avalanching():
    seeds = {splitmix64(1, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert splitmix64(1, 0) != splitmix64(2, 0)


def test_mc_reduces_to_trajectory(free2, srw2):
    stats = monte_carlo_length_dist(srw2, free2, 15, 1, master_seed=3)
    assert stats.sample_count == 1
    assert sum(stats.counts.values()) == 1


def test_mc_worker_determinism(z2z3, z2z3_nn):
    n_samples = 2 * MC_BLOCK + 123
    s1 = monte_carlo_length_dist(z2z3_nn, z2z3, 12, n_samples, master_seed=5, workers=1)
    s2 = monte_carlo_length_dist(z2z3_nn, z2z3, 12, n_samples, master_seed=5, workers=4)
    assert s1.counts == s2.counts
    s3 = monte_carlo_length_dist(z2z3_nn, z2z3, 12, n_samples, master_seed=6, workers=1)
    assert s3.counts != s1.counts


def test_mc_consistency_with_exact(free2, srw2):
    n, n_samples = 20, 40_000
    exact = srw_birth_death_dist(2, n)  # cross-validated against brute force above
    stats = monte_carlo_length_dist(srw2, free2, n, n_samples, master_seed=101)
    for k, p in exact.mass.items():
        if p < 1e-3:
            continue
        se = math.sqrt(p * (1 - p) / n_samples)
        emp = stats.counts.get(k, 0) / n_samples
        assert abs(emp - p) <= 4 * se


def test_trajectory_stats_validation():
    with pytest.raises(MalformedInputError):
        TrajectoryStats(3, 5, {1: 2, 3: 2}, seed=0)


def test_return_probability(free2, srw2):
    assert return_probability(srw2, free2, 2) == pytest.approx(0.25)
    assert return_probability(srw2, free2, 5) == 0.0
    mu_e = DrivingMeasure(((ReducedWord(), 1.0),))
    assert return_probability(mu_e, free2, 4) == pytest.approx(1.0)


def test_spectral_radius_point_mass_at_identity(free2):
    mu_e = DrivingMeasure(((ReducedWord(), 1.0),))
    est = estimate_spectral_radius(mu_e, free2, 10)
    assert est.estimate == pytest.approx(1.0)


def test_spectral_radius_z_line():
    ctx = GroupContext((IntegerFactor("a"),))
    mu = uniform_srw_measure(ctx)
    est = estimate_spectral_radius(mu, ctx, 2000)
    assert est.estimate >= 0.99
    assert est.sequence[-1][0] == 2000


def test_spectral_radius_free2(free2, srw2):
    est = estimate_spectral_radius(srw2, free2, 400)
    assert est.estimate == pytest.approx(math.sqrt(3) / 2, abs=0.02)
    # the even-step root sequence trends upward toward the limit
    vals = [v for _, v in est.sequence]
    assert vals[-1] > vals[0]


def test_escape_rate_point_mass(free2):
    mu_a = DrivingMeasure(((free2.parse_word("a"), 1.0),))
    est = estimate_escape_rate(mu_a, free2, 50, 200, seed=1)
    assert est.lambda_hat == pytest.approx(1.0)
    assert est.std_error == 0.0


def test_escape_rate_z_line():
    # the walk on the line is recurrent; the finite-n mean of |S_n|/n decays
    # like sqrt(2/(pi n)), about 0.04 at n = 400
    ctx = GroupContext((IntegerFactor("a"),))
    mu = uniform_srw_measure(ctx)
    est = estimate_escape_rate(mu, ctx, 400, 400, seed=9)
    assert abs(est.lambda_hat) < 0.07


def test_length_distribution_validation():
    with pytest.raises(MalformedInputError):
        LengthDistribution(3, {0: 0.5, 1: 0.2})
    with pytest.raises(MalformedInputError):
        LengthDistribution(3, {-1: 0.5, 1: 0.5})
