import numpy as np
import pytest

from rarelab.decomp import decompose
from rarelab.domain import DomainSpec, Field, make_grid
from rarelab.ineqlab import (
    GNParams,
    chain_rule_power_gradient,
    derivative_interpolation_ratio,
    dilated_gn_ratio,
    dilated_line_field,
    dilated_sobolev_ratio,
    dilation_slope,
    extreme_case_checks,
    gaussian_bump,
    gn_ratio,
    hat_bump,
    interpolation_ratio,
    solve_theta,
)

DILATIONS = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0]


def bump_times_mode(spec, k=1):
    grid = make_grid(spec)
    mesh = np.meshgrid(grid.x1, *grid.torus, indexing="ij")
    vals = np.exp(-mesh[0] ** 2)
    for ax in range(1, spec.n):
        vals = vals * np.sin(2 * np.pi * k * mesh[ax])
    return Field(spec, vals)


class TestSolveTheta:
    def test_textbook_case(self):
        assert solve_theta(0, 1, 2.0, 1.0, 2.0, 0) == pytest.approx(1.0 / 3.0, abs=1e-14)

    def test_identity_case_gives_zero(self):
        for k in (0, 1, 2):
            assert solve_theta(0, 1, 3.0, 3.0, 3.0, k) == pytest.approx(0.0, abs=1e-14)

    def test_matching_derivative_orders_pin_theta(self):
        # j = m - 1 with everything in L^2 forces the midpoint weight
        assert solve_theta(1, 2, 2.0, 2.0, 2.0, 0) == pytest.approx(0.5)

    def test_round_trip_reproduces_relation(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            j, m = 0, int(rng.integers(1, 3))
            k = int(rng.integers(0, 3))
            p, q, r = rng.uniform(1.0, 8.0, 3)
            theta = solve_theta(j, m, p, q, r, k)
            if theta is None:
                continue
            dim = k + 1
            lhs = 1.0 / p
            rhs = j / dim + (1.0 / r - m / dim) * theta + (1.0 - theta) / q
            assert abs(lhs - rhs) <= 1e-12

    def test_out_of_range_infeasible(self):
        # q between p and r forces a negative weight
        assert solve_theta(0, 1, 1.0, 2.0, 4.0, 0) is None

    def test_decay_guard(self):
        # j=0, r m < k+1, q = inf: needs the decay flag
        assert solve_theta(0, 1, 4.0, np.inf, 1.0, 1) is None
        assert solve_theta(0, 1, 4.0, np.inf, 1.0, 1, decay_at_infinity=True) is not None

    def test_theta_one_integer_gap_guard(self):
        # theta = 1 with 1 < r < inf and m - j - (k+1)/r a non-negative integer
        assert solve_theta(0, 1, np.inf, 5.0, 2.0, 1) is None

    def test_degenerate_consistent_relation(self):
        # coefficient of the weight vanishes with matching constants
        theta = solve_theta(0, 2, 2.0, 2.0, 1.0, 0)
        assert theta == pytest.approx(0.0)

    def test_params_validation(self):
        assert GNParams.solve(0, 1, 2.0, 1.0, 2.0, 0).theta_k == pytest.approx(1 / 3)
        with pytest.raises(ValueError):
            GNParams(j=0, m=1, p=2.0, q=1.0, r=2.0, k=0, theta_k=0.5)
        assert GNParams.solve(0, 1, 1.0, 2.0, 4.0, 0) is None


class TestGNRatio:
    def test_zero_field_all_zero(self):
        spec = DomainSpec(n=2, L=4.0, n1=32, n_torus=(8,))
        res = gn_ratio(Field(spec, np.zeros(spec.shape)), 0, 1, 2.0, 1.0, 2.0)
        assert all(v == 0.0 for v in res["ratios"].values())

    def test_tiled_bump_only_level_zero(self):
        f1 = dilated_line_field(4.0)
        spec = DomainSpec(n=2, L=f1.spec.L, n1=f1.spec.n1, n_torus=(8,))
        u = Field(spec, np.broadcast_to(f1.values[:, None], spec.shape))
        res = gn_ratio(u, 0, 1, 2.0, 1.0, 2.0)
        assert res["ratios"][1] == 0.0
        assert 0.0 < res["ratios"][0] < 3.0

    def test_level_zero_ratio_dilation_free(self):
        # the level-resolved quotient must not blow up under dilation,
        # unlike the naive full-dimension one
        ratios = []
        for d in DILATIONS:
            f1 = dilated_line_field(d)
            spec = DomainSpec(n=2, L=f1.spec.L, n1=f1.spec.n1, n_torus=(8,))
            u = Field(spec, np.broadcast_to(f1.values[:, None], spec.shape))
            ratios.append(gn_ratio(u, 0, 1, 2.0, 1.0, 2.0)["ratios"][0])
        assert max(ratios) / min(ratios) < 1.0 + 1e-10

    def test_scale_invariance(self):
        spec = DomainSpec(n=2, L=4.0, n1=64, n_torus=(16,))
        u = bump_times_mode(spec)
        a = gn_ratio(u, 0, 1, 2.0, 1.0, 2.0)["ratios"]
        b = gn_ratio(Field(spec, 3.7 * u.values), 0, 1, 2.0, 1.0, 2.0)["ratios"]
        for k in a:
            assert abs(a[k] - b[k]) <= 1e-12 * max(1.0, a[k])

    def test_corpus_maximum_stable(self):
        # regression guard: corpus max recorded from the reference run of
        # this seeded corpus; the bound asserts no blow-up, not a constant
        rng = np.random.default_rng(100)
        spec = DomainSpec(n=2, L=4.0, n1=48, n_torus=(12,))
        grid = make_grid(spec)
        mesh = np.meshgrid(grid.x1, *grid.torus, indexing="ij")
        worst = 0.0
        for _ in range(60):
            vals = np.zeros(spec.shape)
            for _ in range(4):
                envelope = np.exp(-((mesh[0] / rng.uniform(0.5, 2.0)) ** 2))
                vals += (rng.standard_normal() * envelope
                         * np.cos(2 * np.pi * rng.integers(0, 3) * mesh[1]
                                  + rng.uniform(0, 2 * np.pi)))
            res = gn_ratio(Field(spec, vals), 0, 1, 2.0, 1.0, 2.0)
            worst = max(worst, max(res["ratios"].values()))
        baseline = 1.62  # recorded corpus maximum at these exponents
        assert worst <= 3.0 * baseline


class TestInterpolationRatio:
    def test_exponent_bookkeeping(self):
        spec = DomainSpec(n=2, L=4.0, n1=64, n_torus=(16,))
        res = interpolation_ratio(bump_times_mode(spec), 2.0, 1.0)
        assert res["detail"][0]["gamma"] == pytest.approx(0.25)
        assert res["detail"][1]["gamma"] == pytest.approx(0.5)
        assert res["detail"][0]["grad_exponent"] == pytest.approx(1.0 / 3.0)

    def test_collapsed_exponents(self):
        # p = q: every weight vanishes and the sum is n copies of the norm
        spec = DomainSpec(n=2, L=4.0, n1=64, n_torus=(16,))
        res = interpolation_ratio(bump_times_mode(spec), 2.0, 2.0)
        assert res["ratio"] == pytest.approx(1.0 / spec.n, rel=1e-12)

    def test_dilated_family_bounded(self):
        ratios = []
        for d in DILATIONS:
            f1 = dilated_line_field(d, points=2001)
            spec = DomainSpec(n=2, L=f1.spec.L, n1=f1.spec.n1, n_torus=(6,))
            u = Field(spec, np.broadcast_to(f1.values[:, None], spec.shape))
            ratios.append(interpolation_ratio(u, 2.0, 1.0)["ratio"])
        assert max(ratios) <= 1.0  # the level-0 summand alone controls it

    def test_scale_invariance(self):
        spec = DomainSpec(n=2, L=4.0, n1=48, n_torus=(12,))
        u = bump_times_mode(spec)
        r1 = interpolation_ratio(u, 4.0, 2.0)["ratio"]
        r2 = interpolation_ratio(Field(spec, 0.31 * u.values), 4.0, 2.0)["ratio"]
        assert abs(r1 - r2) <= 1e-12 * max(1.0, r1)

    def test_parameter_guards(self):
        spec = DomainSpec(n=2, L=2.0, n1=16, n_torus=(8,))
        u = Field(spec, np.ones(spec.shape))
        with pytest.raises(ValueError):
            interpolation_ratio(u, 1.5, 1.0)
        with pytest.raises(ValueError):
            interpolation_ratio(u, 2.0, 3.0)


class TestDerivativeInterpolationRatio:
    def test_pure_mode_saturates_at_one(self):
        # single transverse mode: both sides evaluate in closed form and
        # the quotient is exactly 1; the grid sees it to O(h^2)
        spec = DomainSpec(n=2, L=3.0, n1=24, n_torus=(128,))
        grid = make_grid(spec)
        u = Field(spec, np.broadcast_to(np.sin(2 * np.pi * grid.torus[0])[None, :],
                                        spec.shape))
        res = derivative_interpolation_ratio(u, 2, 2.0)
        assert res["ratio"] == pytest.approx(1.0, abs=5e-3)

    def test_constant_gives_zero(self):
        spec = DomainSpec(n=2, L=2.0, n1=16, n_torus=(8,))
        res = derivative_interpolation_ratio(Field(spec, np.ones(spec.shape)), 2, 2.0)
        assert res["ratio"] == 0.0

    def test_refinement_stability(self):
        vals = []
        for m in (48, 96):
            spec = DomainSpec(n=2, L=4.0, n1=m, n_torus=(m,))
            u = bump_times_mode(spec)
            vals.append(derivative_interpolation_ratio(u, 2, 4.0)["ratio"])
        assert abs(vals[1] - vals[0]) <= 0.02 * vals[0]

    def test_scale_invariance(self):
        spec = DomainSpec(n=2, L=4.0, n1=48, n_torus=(24,))
        u = bump_times_mode(spec)
        a = derivative_interpolation_ratio(u, 1, 2.0)["ratio"]
        b = derivative_interpolation_ratio(Field(spec, 7.3 * u.values), 1, 2.0)["ratio"]
        assert abs(a - b) <= 1e-12 * max(1.0, a)

    def test_parameter_guards(self):
        spec = DomainSpec(n=2, L=2.0, n1=16, n_torus=(8,))
        u = Field(spec, np.ones(spec.shape))
        with pytest.raises(ValueError):
            derivative_interpolation_ratio(u, 2, 1.0)
        with pytest.raises(ValueError):
            derivative_interpolation_ratio(u, 3, 2.0)


class TestChainRulePowerGradient:
    def test_matches_smooth_formula(self):
        x = np.linspace(-2, 2, 401)
        v = np.sin(x)
        dv = np.cos(x)
        got = chain_rule_power_gradient(v, [dv], 2.0)[0]
        assert np.allclose(got, 2 * np.abs(v) * np.sign(v) * dv, atol=1e-14)

    def test_zero_convention(self):
        v = np.array([0.0, 1.0, -2.0])
        dv = np.array([5.0, 1.0, 1.0])
        got = chain_rule_power_gradient(v, [dv], 1.5)[0]
        assert got[0] == 0.0


class TestExtremeCases:
    def test_pointwise_product_bound_holds(self):
        spec = DomainSpec(n=2, L=4.0, n1=64, n_torus=(32,))
        rep = extreme_case_checks(bump_times_mode(spec))
        assert not rep["precondition"]
        assert rep["pointwise_ok"]
        assert rep["pointwise_margin"] <= 0.0

    def test_zero_field(self):
        spec = DomainSpec(n=2, L=2.0, n1=16, n_torus=(8,))
        rep = extreme_case_checks(Field(spec, np.zeros(spec.shape)))
        assert rep["pointwise_margin"] == 0.0

    def test_nonzero_average_flagged(self):
        spec = DomainSpec(n=2, L=2.0, n1=16, n_torus=(8,))
        grid = make_grid(spec)
        vals = np.broadcast_to(1.0 + np.sin(2 * np.pi * grid.torus[0])[None, :],
                               spec.shape)
        rep = extreme_case_checks(Field(spec, vals))
        assert any("direction 2" in msg for msg in rep["precondition"])

    def test_projection_through_decomposition_clears_precondition(self):
        spec = DomainSpec(n=3, L=3.0, n1=24, n_torus=(8, 8))
        rng = np.random.default_rng(17)
        grid = make_grid(spec)
        mesh = np.meshgrid(grid.x1, *grid.torus, indexing="ij")
        vals = np.exp(-mesh[0] ** 2) * (0.3 + np.cos(2 * np.pi * mesh[1])
                                        * np.sin(2 * np.pi * mesh[2]))
        d = decompose(Field(spec, vals))
        top = Field(spec, d.broadcast((2, 3)))
        rep = extreme_case_checks(top)
        assert not rep["precondition"]
        assert rep["pointwise_ok"]

    def test_line_ratios_reported_per_direction(self):
        spec = DomainSpec(n=2, L=4.0, n1=64, n_torus=(32,))
        rep = extreme_case_checks(bump_times_mode(spec))
        assert set(rep["line_ratios"]) == {1, 2}
        # p = r = q = 2 makes both line bounds integration-by-parts facts
        assert rep["line_ratios"][1] <= 1.0 + 1e-8
        assert rep["line_ratios"][2] <= 1.0 + 1e-8

    def test_exponent_relation_enforced(self):
        spec = DomainSpec(n=2, L=2.0, n1=16, n_torus=(8,))
        with pytest.raises(ValueError):
            extreme_case_checks(Field(spec, np.zeros(spec.shape)), p=2.0, r=2.0, q=4.0)


class TestDilationStudies:
    def test_gaussian_constant_matches_closed_form(self):
        # |f|_{L2} = (pi/2)^(1/4), |f'|_{L1} = 2 for f = exp(-x^2)
        res = dilated_sobolev_ratio(1.0)
        exact = (np.pi / 2.0) ** 0.25 / 2.0
        assert res["measured"] == pytest.approx(exact, abs=1e-3)

    def test_hat_constant_cross_check(self):
        # |f|_{L2}^2 = 2/3, |f'|_{L1} = 2 exactly; the kink costs accuracy
        res = dilated_sobolev_ratio(1.0, profile=hat_bump)
        assert res["measured"] == pytest.approx(np.sqrt(2.0 / 3.0) / 2.0, rel=5e-3)

    def test_sobolev_slope(self):
        meas = [dilated_sobolev_ratio(d)["measured"] for d in DILATIONS]
        assert dilation_slope(DILATIONS, meas) == pytest.approx(0.5, abs=1e-3)

    def test_quotient_diverges_with_dilation(self):
        meas = [dilated_sobolev_ratio(d)["measured"] for d in (1.0, 4.0, 16.0, 64.0)]
        assert all(b > a for a, b in zip(meas[:-1], meas[1:]))

    @pytest.mark.parametrize("theta", [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])
    def test_two_norm_scaling_exponent(self, theta):
        meas = [dilated_gn_ratio(d, theta)["measured"] for d in DILATIONS]
        expect = 0.5 * (3.0 * theta - 1.0)
        assert dilation_slope(DILATIONS, meas) == pytest.approx(expect, abs=1e-3)

    def test_flat_only_at_one_third(self):
        for theta, flat in ((1.0 / 3.0, True), (0.25, False), (0.5, False)):
            meas = [dilated_gn_ratio(d, theta)["measured"] for d in DILATIONS]
            slope = dilation_slope(DILATIONS, meas)
            assert (abs(slope) <= 1e-3) == flat

    def test_predicted_column_tracks_measured(self):
        for d in (2.0, 8.0):
            res = dilated_sobolev_ratio(d)
            assert res["measured"] == pytest.approx(res["predicted"], rel=1e-9)

    def test_fat_tails_rejected(self):
        with pytest.raises(ValueError):
            dilated_line_field(1.0, profile=lambda x: 1.0 / (1.0 + x**2), halfwidth=8.0)

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            dilated_line_field(-1.0)
        with pytest.raises(ValueError):
            dilated_gn_ratio(1.0, 1.5)
        with pytest.raises(ValueError):
            dilation_slope([1.0], [1.0])
