import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from skolab.errors import BadParameter, DimensionMismatch, HorizonMismatch
from skolab.metrics import (
    MetricOptions,
    consecutive_increment,
    halfline_distance,
    increment_count,
    j1_distance,
    m1_distance,
    oscillation,
    uniform_distance,
    v_tilde,
    w_dprime,
    w_prime,
    weak_m1_distance,
)
from skolab.paths import StepPath, amalgamate, constant_path, indicator_path, make_step_path, scale
from skolab.processes import deterministic_example, deterministic_limit
from strategies import path_pairs, step_paths

IND = indicator_path(1.0, 2.0)
ZERO = constant_path(0.0, 2.0)


@st.composite
def one_jump_paths(draw):
    t = draw(st.integers(1, 63)) / 32
    a, b = draw(st.integers(-8, 8)) / 4, draw(st.integers(-8, 8)) / 4
    return StepPath([0.0, t], [[a], [b]], 2.0)


class TestUniform:
    def test_indicator_vs_zero(self):
        assert uniform_distance(IND, ZERO, 2.0) == 1.0

    def test_self(self):
        assert uniform_distance(IND, IND) == 0.0

    def test_fig6_integrand_to_limit(self):
        H, _ = deterministic_example("fig6", 4)
        Hlim, _ = deterministic_limit("fig6")
        assert uniform_distance(H, Hlim, 2.0) == 0.25

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            uniform_distance(IND, constant_path([0.0, 0.0], 2.0))

    def test_horizon_mismatch(self):
        with pytest.raises(HorizonMismatch):
            uniform_distance(IND, constant_path(0.0, 3.0))

    @given(path_pairs())
    def test_matches_oracle(self, pair):
        x, y = pair
        assert uniform_distance(x, y) == pytest.approx(oracles.uniform(x, y, 2.0), abs=1e-12)


class TestJ1:
    def test_shifted_indicator(self):
        assert j1_distance(IND, indicator_path(1.1, 2.0), 2.0) == pytest.approx(0.1, abs=1e-12)

    def test_self(self):
        assert j1_distance(IND, IND) == 0.0

    def test_height_mismatch(self):
        assert j1_distance(IND, scale(IND, 0.5), 2.0) == pytest.approx(0.5, abs=1e-12)

    @given(one_jump_paths(), one_jump_paths())
    def test_one_jump_oracle(self, x, y):
        assert j1_distance(x, y) == pytest.approx(oracles.j1_one_jump(x, y, 2.0), abs=1e-12)

    @settings(max_examples=60)
    @given(path_pairs(max_breaks=5))
    def test_grid_upper_bound_dominates(self, pair):
        x, y = pair
        exact = j1_distance(x, y)
        ub = j1_distance(x, y, opts=MetricOptions(mode="upper_bound", tolerance=1 / 64))
        assert exact <= ub + 1e-12


class TestM1:
    def test_self(self):
        assert m1_distance(IND, IND) == 0.0

    @pytest.mark.parametrize("n", [4, 16, 64])
    def test_half_step_approach(self, n):
        x = make_step_path(1, 2, [0, 1 - 1 / n, 1], [[0], [0.5], [1]])
        assert m1_distance(x, IND, 2.0) <= 1 / n + 1e-6

    @pytest.mark.parametrize("n", [4, 16, 64])
    def test_joint_pair_stays_apart(self, n):
        H, X = deterministic_example("zigzag", n)
        Hl, Xl = deterministic_limit("zigzag")
        assert m1_distance(amalgamate(H, X), amalgamate(Hl, Xl), 2.0) >= 0.5

    @pytest.mark.parametrize("n", [4, 16, 64])
    def test_weak_m1_goes_to_zero_for_zigzag(self, n):
        H, X = deterministic_example("zigzag", n)
        Hl, Xl = deterministic_limit("zigzag")
        assert weak_m1_distance(amalgamate(H, X), amalgamate(Hl, Xl), 2.0) <= 2 / n + 1e-6

    @settings(max_examples=25)
    @given(path_pairs(max_breaks=3))
    def test_dense_frechet_oracle(self, pair):
        x, y = pair
        per_unit = 40
        assert m1_distance(x, y) == pytest.approx(oracles.m1(x, y, 2.0, per_unit), abs=2 / per_unit + 1e-6)


class TestHalfline:
    def test_zero_vs_one(self):
        assert halfline_distance(ZERO, constant_path(1.0, 2.0)) == pytest.approx(1.0, abs=1e-3)

    def test_self(self):
        assert halfline_distance(IND, IND) == 0.0

    def test_late_indicator(self):
        y = indicator_path(math.log(2), 2.0)
        assert halfline_distance(ZERO, y) == pytest.approx(0.5, abs=2e-3)

    def test_error_estimate_covers_error(self):
        y = indicator_path(math.log(2), 2.0)
        v, err = halfline_distance(ZERO, y, return_error=True)
        assert abs(v - 0.5) <= err

    def test_j1_base(self):
        y = indicator_path(1.1, 2.0)
        v = halfline_distance(IND, y, MetricOptions(base_metric="J1"))
        # rho_T is 0 for T < 1, 1 while only x has jumped, 0.1 after both
        exact = math.exp(-1.0) * (1 - math.exp(-0.1)) + 0.1 * math.exp(-1.1)
        assert v == pytest.approx(exact, abs=2e-3)


class TestModuli:
    def test_constant(self):
        c = constant_path(2.0, 1.0)
        assert w_prime(c, 0.1) == 0.0 and w_dprime(c, 0.1) == 0.0

    def test_alternating_coarse_theta(self):
        assert w_prime(deterministic_example("alternating", 2), 1 / 8) == 0.0

    def test_monotone_three_point_term(self):
        _, X = deterministic_example("fig6", 8)
        assert v_tilde(X, 0.5) == 0.0

    def test_bad_theta(self):
        with pytest.raises(BadParameter):
            w_prime(IND, 0.0)
        with pytest.raises(BadParameter):
            w_dprime(IND, 3.0)

    def test_oscillation(self):
        assert oscillation(IND, 0.5, 1.0) == 1.0
        assert oscillation(IND, 0.5, 0.99) == 0.0

    @settings(max_examples=40)
    @given(step_paths(max_breaks=5), st.sampled_from([1 / 16, 1 / 8, 1 / 4, 1 / 2]))
    def test_three_point_oracle(self, x, theta):
        assert v_tilde(x, theta) == pytest.approx(oracles.v_tilde(x, theta, 2.0), abs=1e-7)

    @settings(max_examples=40)
    @given(step_paths(dim=1, max_breaks=5), st.sampled_from([1 / 16, 1 / 8, 1 / 4]))
    def test_j1_modulus_below_partition_oracle(self, x, theta):
        assert w_prime(x, theta) <= oracles.w_prime_upper(x, theta, 2.0, 1 / 64) + 1e-9

    @given(step_paths(), st.sampled_from([1 / 16, 1 / 8, 1 / 4]))
    def test_moduli_bounded_by_range(self, x, theta):
        vals = x.values
        diam = max(float(np.linalg.norm(a - b)) for a in vals for b in vals)
        assert 0.0 <= w_prime(x, theta) <= diam + 1e-12
        assert 0.0 <= w_dprime(x, theta) <= diam + 1e-12

    @given(step_paths(), st.sampled_from([1 / 16, 1 / 8]), st.sampled_from([2.0, 4.0]))
    def test_monotone_in_theta(self, x, theta, k):
        assert w_prime(x, theta) <= w_prime(x, theta * k) + 1e-9
        assert w_dprime(x, theta) <= w_dprime(x, theta * k) + 1e-9


class TestIncrements:
    def test_constant_integrand(self):
        assert consecutive_increment(constant_path(1.0, 2.0), IND, 0.5) == 0.0

    @pytest.mark.parametrize("delta", [0.25, 0.5, 1.0])
    def test_fig6_pair(self, delta):
        H, X = deterministic_example("fig6", 8)
        assert consecutive_increment(H, X, delta, 2.0) == 0.25

    def test_separated_jumps(self):
        h = indicator_path(0.5, 2.0)
        x = indicator_path(1.5, 2.0)
        assert consecutive_increment(h, x, 0.9, 2.0) == 0.0
        assert consecutive_increment(h, x, 1.1, 2.0) == 1.0

    def test_count_indicator(self):
        assert increment_count(IND, 0.5) == 1

    def test_count_alternating(self):
        assert increment_count(deterministic_example("alternating", 2), 0.5, 1.0) == 4

    def test_count_constant(self):
        assert increment_count(constant_path(1.0, 1.0), 0.1) == 0

    @settings(max_examples=60)
    @given(path_pairs(max_breaks=4), st.sampled_from([1 / 8, 1 / 4, 1 / 2, 1.0]))
    def test_consecutive_oracle(self, pair, delta):
        h, x = pair
        assert consecutive_increment(h, x, delta) == pytest.approx(oracles.consecutive_increment(h, x, delta, 2.0), abs=1e-12)

    @given(step_paths(max_breaks=6), st.sampled_from([1 / 8, 1 / 4, 1 / 2, 1.0]))
    def test_count_oracle(self, x, delta):
        assert increment_count(x, delta) == oracles.increment_count(x, delta, 2.0)


class TestMetricProperties:
    @settings(max_examples=60)
    @given(path_pairs(max_breaks=5))
    def test_ordering(self, pair):
        x, y = pair
        u = uniform_distance(x, y)
        j = j1_distance(x, y)
        m = m1_distance(x, y)
        assert j <= u + 1e-12
        assert m <= j + 1e-6

    @settings(max_examples=60)
    @given(path_pairs(max_breaks=5))
    def test_symmetry(self, pair):
        x, y = pair
        assert j1_distance(x, y) == j1_distance(y, x)
        assert m1_distance(x, y) == pytest.approx(m1_distance(y, x), abs=2e-6)
