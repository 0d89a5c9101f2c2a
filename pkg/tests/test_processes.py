import math

import numpy as np
import pytest
from scipy import integrate, stats

from skolab.errors import BadParameter, MissingInternals, NotUncorrelated, UnknownConstruction, UnknownId
from skolab.integrals import dot_integral, simple_integral
from skolab.metrics import increment_count
from skolab.paths import evaluate, jumps, sup_norm, total_variation
from skolab.processes import (
    CONSTRUCTIONS,
    CtrwConfig,
    InnovationModel,
    compensator_path,
    construct,
    crossing_pair,
    ctrw_decompose,
    ctrw_path,
    delayed_readout_integrand,
    deterministic_example,
    exploding_pair,
    inverse_subordinator_path,
    martingale_value,
    moving_average_path,
    sample_innovations,
    single_jump_martingale,
    truncated_mean,
)
from skolab.rng import Seed, generator


class TestSeeding:
    def test_streams_are_keyed(self):
        a = generator(1, 2, "x").random(4)
        assert np.array_equal(a, generator(1, 2, "x").random(4))
        assert not np.array_equal(a, generator(1, 3, "x").random(4))
        assert not np.array_equal(a, generator(1, 2, "y").random(4))

    def test_bad_seed(self):
        with pytest.raises(BadParameter):
            Seed(-1)
        with pytest.raises(BadParameter):
            Seed(0, -2)

    def test_draw_independent_of_call_order(self):
        m = InnovationModel.pareto_rademacher(1.5)
        first = sample_innovations(m, 5, Seed(7, 3))
        sample_innovations(m, 5, Seed(7, 2))
        assert np.array_equal(first, sample_innovations(m, 5, Seed(7, 3)))


class TestInnovations:
    def test_constant(self):
        assert sample_innovations(InnovationModel.constant(2.5), 3).tolist() == [2.5, 2.5, 2.5]

    def test_pareto_support_and_signs(self):
        x = sample_innovations(InnovationModel.pareto_rademacher(1.5, x_min=2.0), 5000, 1)
        assert np.all(np.abs(x) >= 2.0)
        assert 0.45 < np.mean(x > 0) < 0.55

    def test_pareto_tail_index(self):
        x = np.abs(sample_innovations(InnovationModel.pareto_rademacher(1.5), 20000, 2))
        # P(|X| > t) = t^-alpha
        for t in (2.0, 4.0, 8.0):
            assert np.mean(x > t) == pytest.approx(t**-1.5, rel=0.1)

    def test_pareto_positive(self):
        x = sample_innovations(InnovationModel.pareto_positive(0.8), 20000, 3)
        assert np.all(x >= 1.0)
        assert np.mean(x > 10.0) == pytest.approx(10.0**-0.8, rel=0.1)

    def test_rademacher(self):
        x = sample_innovations(InnovationModel.rademacher(), 1000, 4)
        assert set(np.unique(x)) == {-1.0, 1.0}

    @pytest.mark.parametrize("alpha,skew", [(1.5, 0.0), (1.5, 0.5), (0.8, -0.3), (1.0, 0.4)])
    def test_stable_matches_reference_law(self, alpha, skew):
        x = sample_innovations(InnovationModel.stable(alpha, skew), 1500, 5)
        ref = stats.levy_stable(alpha, skew)
        ref.dist.parameterization = "S1"
        assert stats.kstest(x, ref.cdf).pvalue > 1e-3

    def test_stable_alpha_two_is_gaussian(self):
        x = sample_innovations(InnovationModel.stable(2.0), 20000, 6)
        assert np.std(x) == pytest.approx(math.sqrt(2), rel=0.03)

    def test_bad_models(self):
        with pytest.raises(BadParameter):
            InnovationModel.pareto_rademacher(2.5)
        with pytest.raises(BadParameter):
            InnovationModel.pareto_positive(1.2)
        with pytest.raises(BadParameter):
            InnovationModel("cauchy")
        with pytest.raises(BadParameter):
            sample_innovations(InnovationModel.rademacher(), 0)

    def test_truncated_means(self):
        assert truncated_mean(InnovationModel.pareto_rademacher(1.5), 0.1) == 0.0
        assert truncated_mean(InnovationModel.constant(2.0), 0.25) == 0.5
        assert truncated_mean(InnovationModel.constant(2.0), 1.0) == 0.0
        # E[a W 1{a W <= 1}] for W Pareto(b): a b (a^(b-1) - 1) / (1 - b)
        a, b = 0.1, 0.8
        assert truncated_mean(InnovationModel.pareto_positive(b), a) == pytest.approx(a * b * (a ** (b - 1) - 1) / (1 - b), rel=1e-12)


class TestMovingAverage:
    def test_constant_staircase(self):
        cfg = CtrwConfig(alpha=1.5, coeffs=(1.0,), scale_n=4, innovation=InnovationModel.constant(1.0))
        x = moving_average_path(cfg)
        j = jumps(x)
        assert j.times.tolist() == [0.25, 0.5, 0.75, 1.0]
        assert np.allclose(j.sizes[:, 0], 4 ** (-1 / 1.5), rtol=0, atol=1e-15)

    def test_brute_force_moving_sum(self):
        cfg = CtrwConfig(alpha=1.5, coeffs=(1.0, 0.5, 0.25), scale_n=50, normalize=False)
        s = moving_average_path(cfg, Seed(0, 1), return_internals=True)
        th = s.theta
        J = 2
        zeta = [sum(cfg.coeffs[j] * th[J + i - j] for j in range(3)) for i in range(s.zeta.size)]
        assert np.allclose(s.zeta, zeta, atol=1e-12)
        assert np.allclose(np.diff(s.path.values[:, 0]), 50 ** (-1 / 1.5) * np.array(zeta), atol=1e-12)

    def test_unit_waits_equal_moving_average(self):
        cfg = CtrwConfig(alpha=1.5, coeffs=(1.0, 1.0), scale_n=200)
        assert ctrw_path(cfg, 3).path == moving_average_path(cfg, 3)

    def test_random_waits_rejected(self):
        with pytest.raises(BadParameter):
            moving_average_path(CtrwConfig(alpha=1.5, beta=0.8))

    def test_config_validation(self):
        with pytest.raises(BadParameter):
            CtrwConfig(alpha=1.5, coupling="coupled")
        with pytest.raises(BadParameter):
            CtrwConfig(alpha=1.5, coeffs=(0.0, 1.0))
        with pytest.raises(BadParameter):
            CtrwConfig(alpha=3.0)

    def test_config_roundtrip(self):
        cfg = CtrwConfig(alpha=1.5, beta=0.8, coeffs=(1.0, 0.5), coupling="coupled", scale_n=30)
        assert CtrwConfig.from_dict(cfg.to_dict()) == cfg


class TestCtrw:
    def test_epochs_and_count(self):
        cfg = CtrwConfig(alpha=1.5, beta=0.8, scale_n=500)
        s = ctrw_path(cfg, 4)
        assert np.all(np.diff(s.epochs) > 0) and s.epochs[-1] <= 1.0
        assert np.allclose(np.cumsum(s.waits) / 500, s.epochs)
        assert evaluate(s.count, 1.0)[0] == s.epochs.size

    def test_coupled_magnitudes_follow_waits(self):
        cfg = CtrwConfig(alpha=1.5, beta=0.8, scale_n=500, coupling="coupled")
        s = ctrw_path(cfg, 5)
        assert np.allclose(np.abs(s.theta), s.waits ** (0.8 / 1.5), rtol=1e-12)

    def test_symmetric_drift_is_zero(self):
        cfg = CtrwConfig(alpha=1.5, beta=0.8, scale_n=1000)
        d = ctrw_decompose(cfg, ctrw_path(cfg, 6))
        assert d.drift_per_step == 0.0 and sup_norm(d.drift) == 0.0

    def test_small_jumps_have_no_large_part(self):
        cfg = CtrwConfig(alpha=1.5, scale_n=100, innovation=InnovationModel.rademacher())
        d = ctrw_decompose(cfg, ctrw_path(cfg, 7))
        assert sup_norm(d.large) == 0.0

    def test_recombination(self):
        cfg = CtrwConfig(alpha=1.5, beta=0.8, scale_n=1000, innovation=InnovationModel.pareto_positive(0.9))
        s = ctrw_path(cfg, 8)
        d = ctrw_decompose(cfg, s)
        total = d.martingale.values + d.large.values + d.drift.values
        assert np.allclose(total, s.path.values, atol=1e-12)
        assert d.drift_per_step > 0

    def test_correlated_rejected(self):
        cfg = CtrwConfig(alpha=1.5, coeffs=(1.0, 1.0))
        with pytest.raises(NotUncorrelated):
            ctrw_decompose(cfg, ctrw_path(cfg))

    def test_needs_internals(self):
        cfg = CtrwConfig(alpha=1.5)
        with pytest.raises(MissingInternals):
            ctrw_decompose(cfg, ctrw_path(cfg).path)


class TestSingleJumpMartingale:
    def test_no_jump_when_tau_is_T(self):
        for r in range(40):
            s = single_jump_martingale(100, seed=Seed(0, r))
            if s.tau == 1.0:
                t = s.path.breakpoints
                assert np.allclose(s.path.values[:, 0], martingale_value(t, 1.0, 100))
                return
        pytest.fail("no tau = T draw")

    @pytest.mark.parametrize("n", [1000, 10000])
    def test_compensator_total_variation(self, n):
        lam = compensator_path(n)
        bound = 2 * math.pi * sum(range(math.ceil(math.sqrt(n) / (2 * math.pi)), math.floor(n / (2 * math.pi)) + 1))
        tv = total_variation(lam).total
        # the grid resolves every half period, so it sees about (2/pi) * ln(sqrt n) of variation
        assert tv == pytest.approx(2 / math.pi * math.log(math.sqrt(n)), rel=0.05)
        assert tv < bound

    def test_mean_at_T_matches_quadrature(self):
        # P(tau in dt) = (1-eps) dt/T on [0, T) plus an atom eps at T
        n, eps = 1000, 0.5
        f = lambda s: float(martingale_value(1.0, s, n, 1.0, eps))
        t0 = 1 + 1 / n - n**-0.5
        # the integrand oscillates fast near T, so cut the window finely
        cuts = np.linspace(t0, 1.0, 4001)
        cont = integrate.quad(f, 0, t0, limit=200)[0]
        cont += sum(integrate.quad(f, a, b, limit=200)[0] for a, b in zip(cuts, cuts[1:]))
        cont *= 1 - eps
        atom = eps * f(1.0)
        phi = lambda x: x * math.sin(1 / x)
        closed = eps * phi(1 / n) - phi(n**-0.5) * ((1 - eps) * (1 - t0) + eps)
        assert cont + atom == pytest.approx(closed, abs=1e-9)
        assert closed != 0.0

    def test_validation(self):
        with pytest.raises(BadParameter):
            single_jump_martingale(3)
        with pytest.raises(BadParameter):
            single_jump_martingale(100, eps=1.0)
        with pytest.raises(BadParameter):
            compensator_path(100, per_half_period=3)


class TestExplodingPair:
    @pytest.mark.parametrize("n", [100, 1000])
    def test_integrand_bound(self, n):
        H, _ = exploding_pair(n, seed=1)
        assert sup_norm(H) <= n**-0.25

    def test_integrand_rule_oracle(self):
        s = exploding_pair(500, seed=2, return_internals=True)
        a = 500**-0.25
        sg = np.sign(s.Z)
        h = [0.0, 0.0]
        for k in range(2, s.Z.size):
            if sg[k] == sg[k - 1]:
                h.append(h[-1])
            elif h[-1] == -a * sg[k - 1]:
                h.append(0.0)
            else:
                h.append(-a * sg[k])
        assert np.array_equal(s.H.values[:, 0], h)

    def test_summand_identity(self):
        s = exploding_pair(2000, seed=3, return_internals=True)
        h, Z = s.H.values[:, 0], s.Z
        a = 2000**-0.25
        k = np.arange(2, Z.size)
        change = np.sign(Z[k]) != np.sign(Z[k - 1])
        lhs = Z[k] * (h[k - 1] - h[k])
        assert np.allclose(lhs[change], a * np.abs(Z[k][change]), rtol=1e-12)
        assert np.all(lhs[~change] == 0.0)

    def test_adapted(self):
        # changing innovations after step k leaves h[0..k] unchanged
        s1 = exploding_pair(300, seed=Seed(0, 1), return_internals=True)
        s2 = exploding_pair(300, seed=Seed(0, 2), return_internals=True)
        # compare against the rule run on a spliced innovation sequence
        k = 120
        Z = np.concatenate([s1.Z[: k + 1], s2.Z[k + 1 :]])
        sg = np.sign(Z)
        a = 300**-0.25
        h = [0.0, 0.0]
        for j in range(2, Z.size):
            h.append(h[-1] if sg[j] == sg[j - 1] else (0.0 if h[-1] == -a * sg[j - 1] else -a * sg[j]))
        assert np.array_equal(s1.H.values[: k + 1, 0], h[: k + 1])

    def test_median_magnitude_grows(self):
        meds = []
        for n in (100, 1000, 10000):
            vals = [dot_integral(*exploding_pair(n, seed=Seed(0, r)), 1.0)[0] for r in range(200)]
            meds.append(abs(float(np.median(vals))))
        assert meds[0] < meds[1] < meds[2]

    def test_validation(self):
        with pytest.raises(BadParameter):
            exploding_pair(100, alpha=1.5, epsilon=0.4)
        with pytest.raises(BadParameter):
            exploding_pair(100, alpha=2.5)


def _crossing_rhs(s, n, signed):
    X = s.X
    base = s.r / math.sqrt(n)
    if s.last_start is None:
        return base
    x_start = float(evaluate(X, s.last_start / n)[0])
    x_cap = float(evaluate(X, s.cap)[0])
    if not signed:
        return base + (x_cap - x_start)
    return base - math.copysign(1.0, x_start if x_start != 0 else 1.0) * (x_cap - x_start)


class TestCrossingPair:
    def test_integrand_shape(self):
        for r in range(20):
            s = crossing_pair(400, seed=Seed(0, r), return_internals=True)
            assert sup_norm(s.H) <= 1.0
            assert np.all(s.H.values[s.H.breakpoints >= s.cap] == 0.0)

    def test_signed_identity(self):
        n = 400
        for r in range(50):
            s = crossing_pair(n, seed=Seed(0, r), return_internals=True)
            lhs = float(simple_integral(s.H, s.X, 1.0)[0])
            assert lhs == pytest.approx(_crossing_rhs(s, n, True), abs=1e-12)

    @pytest.mark.xfail(strict=True, reason="unsigned remainder term misses the integrand's sign on the last window")
    def test_unsigned_identity(self):
        n = 400
        for r in range(50):
            s = crossing_pair(n, seed=Seed(0, r), return_internals=True)
            lhs = float(simple_integral(s.H, s.X, 1.0)[0])
            assert lhs == pytest.approx(_crossing_rhs(s, n, False), abs=1e-12)

    def test_large_increment_count_grows(self):
        q = []
        for n in (100, 10000):
            counts = [increment_count(crossing_pair(n, seed=Seed(0, r))[0], 1.0, 1.0) for r in range(200)]
            q.append(np.quantile(counts, 0.95))
        assert q[0] < q[1]

    @pytest.mark.xfail(strict=True, reason="zero count before the cap grows like n^(3/8), so r/sqrt(n) shrinks")
    def test_median_integral_grows(self):
        meds = []
        for n in (100, 10000, 1000000):
            vals = [float(simple_integral(*crossing_pair(n, seed=Seed(0, r))[:2], 1.0)[0]) for r in range(200)]
            meds.append(float(np.median(vals)))
        assert meds[0] < meds[1] < meds[2]

    def test_validation(self):
        with pytest.raises(BadParameter):
            crossing_pair(8)


class TestDeterministic:
    @pytest.mark.parametrize("n", [4, 10, 50])
    def test_alternating_sup(self, n):
        x = deterministic_example("alternating", n)
        assert sup_norm(x, 1.0) == pytest.approx(1 / n, abs=1e-15)

    def test_unknown(self):
        with pytest.raises(UnknownId):
            deterministic_example("spiral", 4)


class TestDelayedReadout:
    def _sample(self):
        return ctrw_path(CtrwConfig(alpha=1.5, scale_n=10), 1)

    def test_long_delay_reads_sentinel(self):
        s = self._sample()
        H = delayed_readout_integrand(s, [0.0, 0.5], J=100, x0minus=-7.0)
        assert np.all(H.values == -7.0)

    def test_zero_function(self):
        H = delayed_readout_integrand(self._sample(), [0.1, 0.5], g=lambda t, x: 0.0)
        assert sup_norm(H) == 0.0

    def test_reads_delayed_level(self):
        s = self._sample()
        H = delayed_readout_integrand(s, [0.55], J=2)
        # jumps at k/10; the last one at or before 0.55 is the 5th, two back is the 3rd
        assert evaluate(H, 0.6)[0] == s.path.values[3, 0]

    def test_needs_internals(self):
        with pytest.raises(MissingInternals):
            delayed_readout_integrand(self._sample().path, [0.5])


class TestInverseSubordinator:
    def test_unit_waits(self):
        E = inverse_subordinator_path(None, 10)
        for t in (0.0, 0.05, 0.1, 0.55, 0.99):
            assert evaluate(E, t)[0] == pytest.approx((math.floor(10 * t) + 1) / 10, abs=1e-15)

    def test_random_waits_monotone(self):
        E = inverse_subordinator_path(0.8, 200, seed=1)
        assert np.allclose(np.diff(E.values[:, 0]), 1 / 200, rtol=0, atol=1e-12)


class TestRegistry:
    def test_every_construction_builds(self):
        params = {"moving-average": {"alpha": 1.5, "coeffs": [1.0, 1.0]}, "ctrw": {"alpha": 1.5, "beta": 0.8}}
        for cid in CONSTRUCTIONS:
            c = construct(cid, 100, 0, **params.get(cid, {}))
            assert c.paths

    def test_unknown(self):
        with pytest.raises(UnknownConstruction):
            construct("spiral", 4)

    def test_bad_keyword(self):
        with pytest.raises(BadParameter):
            construct("fig6", 4, 0, colour=1)
