import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fedldp.accountants import Method
from fedldp.errors import DomainError
from fedldp.privacy_core import PrivacyBudget
from fedldp.tradeoff import (
    LossRegularity,
    UserSpec,
    aggregate_sigma,
    default_eps_grid,
    rate_upper_bound,
    sweep,
    utility_lower_bound,
    validity_caps,
)

BUDGET = PrivacyBudget(0.3, 1e-4)


class TestAggregateSigma:
    def test_homogeneous_fleet_divides_by_k(self):
        users = [UserSpec(500, 1e-3, 7.5, BUDGET)] * 100
        assert aggregate_sigma(users) == pytest.approx(7.5**2 / 100.0, rel=1e-12)

    def test_single_user(self):
        assert aggregate_sigma([UserSpec(10, 0.1, 3.0)]) == pytest.approx(9.0, rel=1e-14)

    def test_common_dataset_scaling_is_invisible(self):
        base = [UserSpec(100, 0.01, 2.0), UserSpec(300, 0.02, 1.0), UserSpec(50, 0.3, 4.0)]
        scaled = [UserSpec(7 * u.dataset_size, u.q, u.sigma) for u in base]
        assert aggregate_sigma(scaled) == pytest.approx(aggregate_sigma(base), rel=1e-12)

    def test_heterogeneous_hand_value(self):
        users = [UserSpec(100, 0.01, 2.0), UserSpec(200, 0.05, 1.0)]
        num = (100 * 0.01 * 2.0) ** 2 + (200 * 0.05 * 1.0) ** 2
        den = (100 * 0.01 + 200 * 0.05) ** 2
        assert aggregate_sigma(users) == pytest.approx(num / den, rel=1e-14)

    def test_empty_fleet_rejected(self):
        with pytest.raises(DomainError):
            aggregate_sigma([])


class TestUtilityLowerBound:
    def test_study_caps(self, study_reg):
        # sigma_agg^2 = 39.0625 is the validity cap split over 100 users.
        assert utility_lower_bound(70_000, study_reg, 39.0625) == pytest.approx(
            2800.0 / 390_626.0, rel=1e-12
        )
        assert utility_lower_bound(700_000, study_reg, 39.0625) == pytest.approx(
            28_000.0 / 390_626.0, rel=1e-12
        )

    def test_noiseless_branch(self, study_reg):
        t = 1000
        assert utility_lower_bound(t, study_reg, 0.0) == pytest.approx(
            t / (2.0 * 25.0), rel=1e-14
        )

    def test_min_switch_is_at_d_sigma_sq_equal_one(self, study_reg):
        t = 1000
        noiseless = utility_lower_bound(t, study_reg, 0.0)
        at_switch = 1.0 / study_reg.dim
        assert utility_lower_bound(t, study_reg, at_switch * 0.999) == noiseless
        assert utility_lower_bound(t, study_reg, at_switch * 1.001) < noiseless

    @given(s1=st.floats(0.0, 100.0), bump=st.floats(0.001, 100.0))
    def test_non_increasing_in_noise(self, s1, bump):
        reg = LossRegularity(mu=1.0, lam=1.0, grad_bound=5.0, clip=1.0, dim=10_000)
        lo = utility_lower_bound(100, reg, s1 + bump)
        hi = utility_lower_bound(100, reg, s1)
        assert lo <= hi

    def test_linear_in_rounds(self, study_reg):
        one = utility_lower_bound(1000, study_reg, 2.0)
        three = utility_lower_bound(3000, study_reg, 2.0)
        assert three == pytest.approx(3.0 * one, rel=1e-14)


class TestRateUpperBound:
    def test_zero_bits_when_the_argument_is_one(self):
        reg = LossRegularity(mu=1.0, lam=1.0, grad_bound=5.0, clip=1.0, dim=1)
        sigma = 1.0 / (2.0 * math.pi * math.e)
        assert rate_upper_bound(reg, sigma) == pytest.approx(0.0, abs=1e-12)

    def test_study_cap_value(self, study_reg):
        rate = rate_upper_bound(study_reg, 62.5)
        expected = 1e4 * math.log2(2.0 * math.pi * math.e * 62.5 / 100.0)
        assert rate == pytest.approx(expected, rel=1e-14)
        assert rate == pytest.approx(34161.19265248645, rel=1e-12)

    def test_monotone_in_sigma(self, study_reg):
        values = [rate_upper_bound(study_reg, s) for s in (0.5, 1.0, 5.0, 62.5)]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_negative_rates_are_reported_as_is(self):
        reg = LossRegularity(mu=1.0, lam=1.0, grad_bound=5.0, clip=1.0, dim=10)
        assert rate_upper_bound(reg, 1e-3) < 0.0


class TestValidityCaps:
    def test_sigma_sq_cap_exact(self, study_reg):
        caps = validity_caps(1e-3, 70_000, study_reg, 100)
        assert abs(caps.sigma_sq_cap - 3906.25) <= 1e-9

    def test_utility_and_rate_caps(self, study_reg):
        caps = validity_caps(1e-3, 70_000, study_reg, 100)
        assert caps.utility_cap == pytest.approx(2800.0 / 390_626.0, rel=1e-12)
        assert caps.rate_cap_bits == pytest.approx(34161.19265248645, rel=1e-12)

    def test_cap_blows_up_as_q_vanishes(self, study_reg):
        assert validity_caps(1e-6, 1, study_reg, 1).sigma_sq_cap == pytest.approx(
            3.90625e9, rel=1e-12
        )


class TestSweep:
    def test_default_grid_row_count_and_order(self, study_reg):
        rows = sweep(
            list(Method), default_eps_grid(), 1e-4, 1e-3, [70_000, 700_000], 100, study_reg
        )
        assert len(rows) == 152
        keys = [(list(Method).index(r.method), r.rounds, r.epsilon) for r in rows]
        assert keys == sorted(keys)

    def test_rows_recompute_from_stored_inputs(self, study_reg):
        rows = sweep(
            list(Method), default_eps_grid(), 1e-4, 1e-3, [70_000], 100, study_reg
        )
        for row in rows:
            assert not row.error
            assert row.sigma_agg_sq == pytest.approx(row.sigma_k_sq / 100.0, rel=1e-12)
            assert row.utility_lb == pytest.approx(
                utility_lower_bound(row.rounds, study_reg, row.sigma_agg_sq), rel=1e-14
            )
            assert row.rate_ub_bits == pytest.approx(
                rate_upper_bound(study_reg, math.sqrt(row.sigma_k_sq)), rel=1e-14
            )

    def test_calibration_failure_yields_an_error_row(self, study_reg):
        # epsilon = 0.002 is inside the vacuous-bracket regime of the refined
        # method; its row must carry the error code while others calibrate.
        rows = sweep(list(Method), [0.002], 1e-4, 1e-3, [70_000], 100, study_reg)
        assert len(rows) == 4
        by_method = {r.method: r for r in rows}
        bad = by_method[Method.PROPOSED]
        assert bad.error == "nonpositive_bracket"
        assert bad.sigma_k_sq is None and bad.utility_lb is None
        assert by_method[Method.MA].error == ""

    def test_empty_grid_rejected(self, study_reg):
        with pytest.raises(DomainError):
            sweep(list(Method), [], 1e-4, 1e-3, [70_000], 100, study_reg)


class TestLossRegularity:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(mu=1.0, lam=2.0, grad_bound=5.0, clip=1.0, dim=10),
            dict(mu=1.0, lam=1.0, grad_bound=0.5, clip=1.0, dim=10),
            dict(mu=1.0, lam=1.0, grad_bound=5.0, clip=1.0, dim=0),
        ],
    )
    def test_invariants(self, kwargs):
        with pytest.raises(DomainError):
            LossRegularity(**kwargs)


class TestDefaultEpsGrid:
    def test_nineteen_snapped_points(self):
        grid = default_eps_grid()
        assert len(grid) == 19
        assert grid[0] == 0.1 and grid[-1] == 1.0
        assert grid[1] == 0.15
