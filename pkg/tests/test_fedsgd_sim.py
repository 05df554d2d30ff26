from dataclasses import replace

import numpy as np
import pytest

from fedldp.errors import ConfigError, DomainError, GradBoundExceededError
from fedldp.fedsgd_sim import (
    QuadraticProblem,
    RoundState,
    SimConfig,
    aggregate_noise_sq,
    clip_gradient,
    local_gradient,
    make_quadratic_problem,
    perturb,
    poisson_sample,
    quadratic_loss,
    run_round,
    run_simulation,
)

SMALL = SimConfig(
    users=3, dim=8, per_user_data=60, q=0.15, sigma=0.5, clip=1.0, rounds=50,
    grad_bound=6.0, seed=424242, repetitions=4, data_radius=2.0,
    validate_grad_bound=False,
)


def _round_rngs(cfg: SimConfig, rep: int = 0) -> list[np.random.Generator]:
    return [
        np.random.default_rng(np.random.SeedSequence([cfg.seed, 3, rep, k]))
        for k in range(cfg.users)
    ]


class TestConfig:
    def test_missing_required_field_is_named(self):
        doc = dict(users=2, dim=4, per_user_data=10, q=0.2, sigma=0.0, clip=1.0,
                   grad_bound=4.0, seed=1, repetitions=1)
        with pytest.raises(ConfigError, match="rounds"):
            SimConfig.from_dict(doc)

    def test_unknown_field_is_named(self):
        doc = dict(users=2, dim=4, per_user_data=10, q=0.2, sigma=0.0, clip=1.0,
                   rounds=5, grad_bound=4.0, seed=1, repetitions=1, turbo=True)
        with pytest.raises(ConfigError, match="turbo"):
            SimConfig.from_dict(doc)

    def test_lambda_key_maps_to_lam(self):
        doc = dict(users=2, dim=4, per_user_data=10, q=0.2, sigma=0.0, clip=1.0,
                   rounds=5, grad_bound=4.0, seed=1, repetitions=1)
        doc["lambda"] = 1.0
        assert SimConfig.from_dict(doc).lam == 1.0

    @pytest.mark.parametrize(
        "patch",
        [
            dict(clip=2.0, grad_bound=1.0),
            dict(q=1.5),
            dict(sigma=-0.1),
            dict(rounds=0),
            dict(lam=2.0),
            dict(seed=-1),
        ],
    )
    def test_domain_violations(self, patch):
        with pytest.raises(DomainError):
            replace(SMALL, **patch)

    def test_per_user_sequences(self):
        cfg = replace(SMALL, per_user_data=(10, 20, 30), q=(0.1, 0.2, 0.3),
                      sigma=(0.0, 0.5, 1.0))
        assert cfg.per_user_data == (10, 20, 30)
        with pytest.raises(DomainError):
            replace(SMALL, q=(0.1, 0.2))  # wrong length

    def test_default_radius_is_half_the_gradient_bound(self):
        cfg = replace(SMALL, data_radius=None)
        assert cfg.radius == pytest.approx(SMALL.grad_bound / 2.0)


class TestProblem:
    def test_optimum_is_the_pooled_mean(self):
        problem = make_quadratic_problem(SMALL)
        pooled = problem.pooled()
        assert np.allclose(problem.optimum, pooled.mean(axis=0), rtol=1e-10, atol=0)
        assert problem.loss_gap(problem.optimum) == pytest.approx(0.0, abs=1e-24)

    def test_full_batch_gradient_vanishes_at_the_optimum(self):
        problem = make_quadratic_problem(SMALL)
        g = local_gradient(problem.optimum, problem.pooled())
        assert float(np.linalg.norm(g)) <= 1e-10

    def test_points_respect_the_radius(self):
        problem = make_quadratic_problem(SMALL)
        for data in problem.datasets:
            assert np.linalg.norm(data, axis=1).max() <= SMALL.radius + 1e-12

    def test_identical_points_pin_the_optimum(self):
        x0 = np.array([1.0, -2.0, 0.5])
        problem = QuadraticProblem.from_datasets([np.tile(x0, (7, 1))], radius=3.0)
        assert np.array_equal(problem.optimum, x0)
        assert problem.loss_gap(x0) == 0.0

    def test_loss_gap_identity(self):
        problem = make_quadratic_problem(SMALL)
        w = np.linspace(-1.0, 1.0, SMALL.dim)
        direct = quadratic_loss(w, problem.pooled()) - quadratic_loss(
            problem.optimum, problem.pooled()
        )
        assert problem.loss_gap(w) == pytest.approx(direct, rel=1e-12)


class TestLocalGradient:
    def test_single_point(self):
        w = np.array([1.0, 2.0])
        x = np.array([[0.5, -1.0]])
        assert np.allclose(local_gradient(w, x), w - x[0], rtol=0, atol=0)

    def test_matches_central_finite_differences(self):
        rng = np.random.default_rng(7)
        points = rng.standard_normal((20, 5))
        w = rng.standard_normal(5)
        g = local_gradient(w, points)
        step = 1e-5
        for i in range(5):
            e = np.zeros(5)
            e[i] = step
            fd = (quadratic_loss(w + e, points) - quadratic_loss(w - e, points)) / (2 * step)
            assert fd == pytest.approx(g[i], rel=1e-6, abs=1e-9)

    def test_empty_sample_rejected(self):
        with pytest.raises(DomainError):
            local_gradient(np.zeros(3), np.empty((0, 3)))


class TestClipGradient:
    def test_below_threshold_unchanged(self):
        g = np.array([0.3, 0.4])  # norm 0.5
        assert np.array_equal(clip_gradient(g, 1.0), g)

    def test_above_threshold_scaled_to_exactly_c(self):
        g = np.array([3.0, 4.0])  # norm 5
        clipped = clip_gradient(g, 2.5)
        assert float(np.linalg.norm(clipped)) == pytest.approx(2.5, rel=1e-12)
        assert np.allclose(clipped, g / 2.0, rtol=1e-12, atol=0)

    def test_pairwise_distance_is_at_most_two_c(self):
        rng = np.random.default_rng(11)
        c = 1.7
        for _ in range(200):
            a = clip_gradient(rng.standard_normal(6) * 10, c)
            b = clip_gradient(rng.standard_normal(6) * 10, c)
            assert float(np.linalg.norm(a - b)) <= 2.0 * c + 1e-12


class TestPoissonSample:
    def test_near_certain_inclusion(self):
        rng = np.random.default_rng(0)
        data = np.arange(30.0).reshape(10, 3)
        assert len(poisson_sample(data, 1.0 - 1e-15, rng)) == 10

    def test_mean_subset_size(self):
        rng = np.random.default_rng(123)
        data = np.zeros((100, 2))
        sizes = [len(poisson_sample(data, 0.3, rng)) for _ in range(100_000)]
        assert np.mean(sizes) == pytest.approx(30.0, rel=0.01)

    def test_empty_subset_frequency(self):
        rng = np.random.default_rng(321)
        data = np.zeros((40, 1))
        q = 0.05
        empties = sum(len(poisson_sample(data, q, rng)) == 0 for _ in range(20_000))
        expected = (1.0 - q) ** 40
        assert empties / 20_000 == pytest.approx(expected, abs=0.01)

    def test_q_domain(self):
        with pytest.raises(DomainError):
            poisson_sample(np.zeros((5, 1)), 0.0, np.random.default_rng(0))


class TestPerturb:
    def test_zero_sigma_is_identity_and_draws_nothing(self):
        rng = np.random.default_rng(5)
        before = rng.bit_generator.state["state"]["state"]
        g = np.ones(4)
        assert perturb(g, 2.0, 0.0, rng) is g
        assert rng.bit_generator.state["state"]["state"] == before

    def test_per_dimension_variance(self):
        rng = np.random.default_rng(99)
        clip, sigma = 2.0, 1.5
        noise = perturb(np.zeros((100_000, 4)), clip, sigma, rng)
        var = noise.var(axis=0, ddof=1)
        assert np.all(np.abs(var - clip**2 * sigma**2) / (clip**2 * sigma**2) < 0.05)


class TestRunRound:
    def test_plain_gradient_descent_step(self):
        # One user, near-certain sampling, no noise, inactive clipping: the
        # round is exactly w - eta_1 * (w - mean(sample)).
        cfg = SimConfig(users=1, dim=4, per_user_data=20, q=1 - 1e-12, sigma=0.0,
                        clip=50.0, rounds=5, grad_bound=50.0, seed=7, repetitions=1,
                        data_radius=2.0)
        problem = make_quadratic_problem(cfg)
        w = np.full(4, 3.0)
        state = run_round(RoundState(w.copy()), problem, cfg, 1, _round_rngs(cfg))
        eta1 = cfg.grad_bound / (cfg.clip * cfg.lam * 1)
        expected = w - eta1 * (w - problem.datasets[0].mean(axis=0))
        assert np.allclose(state.weights, expected, rtol=1e-12, atol=1e-14)

    def test_identical_data_closed_form(self):
        x0 = np.array([1.0, -1.0])
        data = np.tile(x0, (10, 1))
        problem = QuadraticProblem.from_datasets([data, data, data], radius=2.0)
        cfg = SimConfig(users=3, dim=2, per_user_data=10, q=1 - 1e-12, sigma=0.0,
                        clip=100.0, rounds=5, grad_bound=100.0, seed=13, repetitions=1)
        w = np.array([4.0, 4.0])
        state = run_round(RoundState(w.copy()), problem, cfg, 1, _round_rngs(cfg))
        eta1 = cfg.grad_bound / (cfg.clip * cfg.lam)
        assert np.allclose(state.weights, w - eta1 * (w - x0), rtol=1e-12, atol=1e-14)

    def test_weighted_aggregation_matches_pooled_gradient(self):
        # Clipping inactive and every point sampled: the round's update
        # direction equals the pooled full-batch gradient.
        cfg = SimConfig(users=3, dim=5, per_user_data=(10, 25, 40), q=1 - 1e-12,
                        sigma=0.0, clip=1e6, rounds=5, grad_bound=1e6, seed=21,
                        repetitions=1, data_radius=2.0)
        problem = make_quadratic_problem(cfg)
        w = np.full(5, 1.5)
        state = run_round(RoundState(w.copy()), problem, cfg, 2, _round_rngs(cfg))
        eta2 = cfg.grad_bound / (cfg.clip * cfg.lam * 2)
        implied_gradient = (w - state.weights) / eta2
        pooled = local_gradient(w, problem.pooled())
        assert np.allclose(implied_gradient, pooled, rtol=1e-10, atol=1e-12)

    def test_all_empty_round_applies_no_update(self):
        cfg = replace(SMALL, q=1e-12)
        problem = make_quadratic_problem(cfg)
        w = np.ones(SMALL.dim)
        state = run_round(RoundState(w.copy()), problem, cfg, 3, _round_rngs(cfg))
        assert np.array_equal(state.weights, w)

    def test_round_index_starts_at_one(self):
        problem = make_quadratic_problem(SMALL)
        with pytest.raises(DomainError):
            run_round(RoundState(np.zeros(SMALL.dim)), problem, SMALL, 0, _round_rngs(SMALL))


class TestRunSimulation:
    def test_bit_identical_repetition(self):
        a = run_simulation(SMALL)
        b = run_simulation(SMALL)
        assert np.array_equal(a.mean_loss_gap, b.mean_loss_gap)
        assert np.array_equal(a.stderr_mse, b.stderr_mse)
        assert np.array_equal(a.per_rep_final_loss_gap, b.per_rep_final_loss_gap)
        assert a.empirical_utility == b.empirical_utility
        assert a.realized_grad_norm_max == b.realized_grad_norm_max

    def test_noiseless_run_beats_the_explicit_gap_bound(self):
        cfg = SimConfig(users=2, dim=5, per_user_data=50, q=0.2, sigma=0.0, clip=1.0,
                        rounds=10_000, grad_bound=6.0, seed=3, repetitions=2,
                        data_radius=2.0)
        result = run_simulation(cfg)
        bound = 2.0 * cfg.mu * cfg.grad_bound**2 / (cfg.lam**2 * cfg.rounds)
        assert result.mean_loss_gap[-1] <= bound
        assert result.empirical_utility >= 1.0 / bound

    def test_monotone_harm_of_noise(self):
        # Same seeds, rising sigma: empirical utility must not rise.
        base = replace(SMALL, users=3, per_user_data=100, q=0.1, rounds=800,
                       grad_bound=8.0, repetitions=20)
        utils = [
            run_simulation(replace(base, sigma=s)).empirical_utility
            for s in (0.0, 0.5, 1.0, 2.0)
        ]
        assert all(a >= b for a, b in zip(utils, utils[1:]))

    def test_recurrence_inequality_when_the_premise_holds(self):
        # Config chosen so realized gradient norms stay below grad_bound,
        # which is the premise of the per-round contraction; then
        # mse(t+1) <= (1 - 2/t) mse(t) + G^2 (1 + d sigma_agg^2) / t^2
        # must hold for all t >= 3 up to 3 standard errors.
        cfg = SimConfig(users=5, dim=5, per_user_data=80, q=0.15, sigma=0.05,
                        clip=1.0, rounds=400, grad_bound=1.0, seed=424242,
                        repetitions=60, data_radius=0.05, validate_grad_bound=True)
        res = run_simulation(cfg)
        d_sig = cfg.dim * aggregate_noise_sq(cfg)
        g2 = cfg.grad_bound**2
        for i in range(2, cfg.rounds):
            t = i + 1
            lhs = res.mean_mse[i + 1]
            rhs = (1.0 - 2.0 / t) * res.mean_mse[i] + g2 * (1.0 + d_sig) / (t * t)
            margin = 3.0 * (res.stderr_mse[i + 1] + (1.0 - 2.0 / t) * res.stderr_mse[i])
            assert lhs <= rhs + margin, f"recurrence violated at t={t}"

    def test_grad_bound_validation_raises(self):
        cfg = replace(SMALL, grad_bound=2.0, clip=1.0, sigma=2.0,
                      validate_grad_bound=True)
        with pytest.raises(GradBoundExceededError):
            run_simulation(cfg)

    def test_disabled_validation_records_the_excess(self):
        cfg = replace(SMALL, grad_bound=2.0, clip=1.0, sigma=2.0,
                      validate_grad_bound=False)
        result = run_simulation(cfg)
        assert result.realized_grad_norm_max > cfg.grad_bound

    def test_trajectory_shapes_and_indexing(self):
        result = run_simulation(SMALL)
        assert result.round_index[0] == 1
        assert result.round_index[-1] == SMALL.rounds + 1
        assert len(result.mean_mse) == SMALL.rounds + 1
        assert result.mean_loss_gap[0] == pytest.approx(0.5 * result.mean_mse[0], rel=1e-14)
        assert result.empirical_utility == pytest.approx(
            1.0 / result.mean_loss_gap[-1], rel=1e-14
        )


class TestAggregateNoiseSq:
    def test_homogeneous(self):
        cfg = replace(SMALL, sigma=1.5)
        assert aggregate_noise_sq(cfg) == pytest.approx(1.5**2 / SMALL.users, rel=1e-12)

    def test_noiseless(self):
        assert aggregate_noise_sq(replace(SMALL, sigma=0.0)) == 0.0
