import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from skolab.errors import BadParameter, InsufficientData, SinkError, UnknownConstruction
from skolab.montecarlo import (
    DiagnosticsReport,
    ExperimentSpec,
    Functional,
    avci_estimate,
    convergence_trend,
    f_conditions_report,
    gd_diagnostics,
    median_interval,
    restart_increment_estimate,
    restart_increments,
    run_experiment,
    stopped_jump,
    thread_count,
    tightness_report,
    wilson_interval,
)
from skolab.paths import StepPath


def _spec(**kw):
    d = {
        "construction": "sawtooth",
        "n_grid": [4],
        "replicas": 3,
        "functionals": [{"name": "integral_at", "t": 1.0}],
    }
    d.update(kw)
    return d


class TestStatistics:
    def test_constant_values_have_zero_width(self):
        r = DiagnosticsReport()
        for k in range(20):
            r.add(10, k, "f", 2.5)
        st_ = r.stats(10, "f")
        assert st_["mean"] == st_["mean_lo"] == st_["mean_hi"] == 2.5
        assert st_["median"] == st_["median_lo"] == st_["median_hi"] == 2.5
        assert st_["std"] == 0.0

    def test_wilson_reference_values(self):
        # z = 1.96, 5 successes out of 10
        lo, hi = wilson_interval(5, 10)
        assert (lo, hi) == pytest.approx((0.2366, 0.7634), abs=1e-4)
        assert wilson_interval(0, 50)[0] == 0.0
        assert wilson_interval(50, 50)[1] == 1.0

    def test_wilson_needs_samples(self):
        with pytest.raises(InsufficientData):
            wilson_interval(0, 0)

    @given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=60))
    def test_median_interval_brackets_median(self, xs):
        s = np.sort(np.array(xs))
        lo, hi = median_interval(s)
        assert lo <= np.median(s) <= hi

    def test_median_interval_coverage(self):
        rng = np.random.default_rng(0)
        hits = 0
        for _ in range(2000):
            lo, hi = median_interval(np.sort(rng.standard_normal(41)))
            hits += lo <= 0.0 <= hi
        assert hits / 2000 >= 0.93

    def test_indicator_cell(self):
        r = DiagnosticsReport()
        for k in range(10):
            r.add(5, k, "hit", float(k < 3), kind="indicator")
        assert r.probability(5, "hit") == 0.3
        assert r.stats(5, "hit")["successes"] == 3

    def test_duplicate_replica_rejected(self):
        r = DiagnosticsReport()
        r.add(1, 0, "f", 1.0)
        with pytest.raises(BadParameter):
            r.add(1, 0, "f", 2.0)
        with pytest.raises(BadParameter):
            r.add(1, 1, "f", 1.0, kind="indicator")

    def test_missing_cell(self):
        with pytest.raises(InsufficientData):
            DiagnosticsReport().stats(1, "f")


class TestThreads:
    def test_default(self, monkeypatch):
        monkeypatch.delenv("SKOLAB_THREADS", raising=False)
        assert 1 <= thread_count() <= 8

    def test_override(self, monkeypatch):
        monkeypatch.setenv("SKOLAB_THREADS", "3")
        assert thread_count() == 3

    @pytest.mark.parametrize("raw", ["0", "many"])
    def test_bad(self, monkeypatch, raw):
        monkeypatch.setenv("SKOLAB_THREADS", raw)
        with pytest.raises(BadParameter):
            thread_count()


class TestExperiment:
    def test_sawtooth_integral_at_n4(self):
        r = run_experiment(_spec())
        assert np.allclose(r.values(4, "integral_at(t=1.0)"), 1.0, rtol=0, atol=1e-12)

    def test_deterministic_across_threads(self, monkeypatch):
        spec = _spec(construction="exploding-pair", n_grid=[50, 200], replicas=16,
                     functionals=[{"name": "integral_at", "t": 1.0}, {"name": "sup_norm", "path": "H"}])
        monkeypatch.setenv("SKOLAB_THREADS", "1")
        a = run_experiment(spec).to_json()
        monkeypatch.setenv("SKOLAB_THREADS", "6")
        b = run_experiment(spec).to_json()
        assert a == b

    def test_common_random_numbers(self):
        # replica r at every n uses the same seed
        from skolab.processes import construct
        from skolab.rng import Seed

        assert construct("single-jump-martingale", 100, Seed(0, 2)).extra["tau"] == \
            construct("single-jump-martingale", 400, Seed(0, 2)).extra["tau"]

    def test_merge_is_order_independent(self):
        a = run_experiment(_spec(construction="exploding-pair", n_grid=[30], replicas=4))
        b = run_experiment(_spec(construction="exploding-pair", n_grid=[30], replicas=4, replica_offset=4))
        whole = run_experiment(_spec(construction="exploding-pair", n_grid=[30], replicas=8))
        assert a.merge(b) == b.merge(a) == whole
        assert whole.meta["replicas"] == [[0, 8]]  # half-open

    def test_merge_rejects_overlap_and_foreign(self):
        a = run_experiment(_spec(construction="exploding-pair", n_grid=[30], replicas=4))
        with pytest.raises(BadParameter):
            a.merge(a)
        other = run_experiment(_spec(construction="exploding-pair", n_grid=[30], replicas=4, seed=1, replica_offset=4))
        with pytest.raises(BadParameter):
            a.merge(other)

    def test_json_roundtrip(self):
        r = run_experiment(_spec(construction="exploding-pair", n_grid=[30, 60], replicas=5))
        back = DiagnosticsReport.from_json(r.to_json())
        assert back == r
        assert back.to_json() == r.to_json()
        assert "runtime" not in r.to_json()

    def test_csv_layout(self):
        r = run_experiment(_spec(construction="exploding-pair", n_grid=[30], replicas=5,
                                 functionals=[{"name": "integral_at", "t": 1.0},
                                              {"name": "sup_norm", "path": "H", "exceeds": 0.1}]))
        lines = r.to_csv().splitlines()
        assert lines[0] == "n,param,functional,stat,value,lo,hi"
        stats = [ln.split(",")[3] for ln in lines[1:]]
        assert stats.count("p") == 1 and stats.count("median") == 1 and "q95" in stats
        med = [ln for ln in lines if ",median," in ln][0].split(",")
        assert float(med[4]) == r.median(30, "integral_at(t=1.0)")

    def test_write_sinks(self, tmp_path):
        r = run_experiment(_spec())
        r.write(str(tmp_path / "r.json"))
        r.write(str(tmp_path / "r.csv"))
        assert DiagnosticsReport.from_json((tmp_path / "r.json").read_text()) == r
        assert (tmp_path / "r.csv").read_text() == r.to_csv()
        with pytest.raises(SinkError):
            r.write(str(tmp_path / "missing" / "r.json"))

    def test_experiment_spec_sink(self, tmp_path):
        out = tmp_path / "s.json"
        run_experiment(_spec(sink=str(out)))
        assert json.loads(out.read_text())["meta"]["construction"] == "sawtooth"

    def test_experiment_spec_validation(self):
        with pytest.raises(UnknownConstruction):
            ExperimentSpec("spiral", (4,))
        with pytest.raises(BadParameter):
            ExperimentSpec("sawtooth", (16, 4))
        with pytest.raises(BadParameter):
            ExperimentSpec("sawtooth", (4,), replicas=0)
        with pytest.raises(BadParameter):
            ExperimentSpec.from_dict({**_spec(), "colour": 1})
        with pytest.raises(BadParameter):
            Functional.from_dict({"name": "energy"})

    def test_experiment_spec_hash(self):
        a = ExperimentSpec.from_dict(_spec())
        assert a.spec_hash == ExperimentSpec.from_dict(_spec(replicas=50, replica_offset=3)).spec_hash
        assert a.spec_hash != ExperimentSpec.from_dict(_spec(seed=1)).spec_hash
        assert ExperimentSpec.from_dict(a.to_dict()) == a

    def test_functional_label(self):
        f = Functional.from_dict({"name": "w_hat", "T": 2, "delta": 0.25, "exceeds": 0.1})
        assert f.label == "w_hat(T=2,delta=0.25)>0.1"
        assert f.kind == "indicator"
        assert Functional.from_dict(f.to_dict()) == f


class TestAnalyses:
    def test_gd_trivial_when_finite_variation_part_vanishes(self):
        r = gd_diagnostics("constant", 1.0, [1.0], [0.5, 2.0], [10, 20], replicas=5)
        for n in (10, 20):
            assert r.probability(n, "tv_exceeds", 0.5) == 0.0
            assert r.stats(n, "stopped_jump", 1.0)["max"] == 0.0

    def test_gd_ctrw(self):
        src = ("ctrw", {"alpha": 1.5, "beta": 0.8})
        r = gd_diagnostics(src, 1.0, [1.0], [1.0], [100], replicas=10)
        assert r.stats(100, "stopped_jump", 1.0)["count"] == 10

    def test_avci_constant_integrand(self):
        r = avci_estimate("constant", [0.1], 0.01, 1.0, [10], replicas=4)
        assert r.probability(10, "w_hat_exceeds", 0.1) == 0.0

    def test_avci_fig6(self):
        r = avci_estimate("fig6", [0.25], 0.2, 2.0, [8, 64], replicas=2)
        assert r.probability(8, "w_hat_exceeds", 0.25) == 1.0

    def test_f_conditions_flags(self):
        r = f_conditions_report("exploding-pair", [0.5], 1.0, [50, 200], replicas=20)
        assert r.flags["sup_norm"] is False
        assert r.stats(200, "sup_norm")["max"] <= 200**-0.25
        r = f_conditions_report("crossing-pair", [1.0], 1.0, [100, 10000], replicas=40)
        assert r.flags["n_delta(1.0)"] is True

    def test_restart_unit_staircase(self):
        # sawtooth is a staircase: every epoch moves it, but by less than lam
        r = restart_increment_estimate("sawtooth", [0.05], 10.0, 1.0, [16], replicas=2)
        assert r.probability(16, "restart_worst", 0.05) == 0.0

    def test_restart_increments_oracle(self):
        X = StepPath([0.0, 0.2, 0.4, 0.6], [[0.0], [1.0], [3.0], [2.0]], 1.0)
        inc = restart_increments(X, np.array([0.2, 0.4, 0.6]), 0.25, 1.0)
        # level on [sigma_k, sigma_{k+1}) against levels within 0.25 after sigma_{k+1}
        assert inc.tolist() == [3.0, 2.0, 1.0, 0.0]

    def test_tightness_rademacher(self):
        src = ("moving-average", {"alpha": 2.0, "innovation": {"kind": "rademacher"}})
        r = tightness_report(src, [0.05], 1.0, [100, 400], replicas=10)
        assert r.stats(400, "w_dprime", 0.05)["median"] > 0

    def test_stopped_jump(self):
        M = StepPath([0.0, 0.3, 0.6], [[0.0], [0.5], [3.5]], 1.0)
        assert stopped_jump(M, 1.0, 1.0) == 3.0
        assert stopped_jump(M, 0.1, 1.0) == 0.5
        assert stopped_jump(M, 10.0, 1.0) == 0.0
        assert stopped_jump(M, 1.0, 0.5) == 0.0


class TestTrend:
    def test_flat(self):
        t = convergence_trend({10: 1.0, 100: 1.0, 1000: 1.0})["value"]
        assert t.verdict == "flat" and t.slope == pytest.approx(0.0, abs=1e-12)

    def test_sawtooth_slope(self):
        r = run_experiment(_spec(n_grid=[4, 16, 64]))
        t = convergence_trend(r)["integral_at(t=1.0)"]
        assert t.verdict == "increasing"
        assert t.slope == pytest.approx(0.5, abs=1e-12)

    def test_overlapping_intervals_inconclusive(self):
        rng = np.random.default_rng(1)
        t = convergence_trend({10: rng.normal(0, 1, 30), 20: rng.normal(0.01, 1, 30), 30: rng.normal(0.02, 1, 30)})
        assert t["value"].verdict == "inconclusive"

    def test_decreasing(self):
        t = convergence_trend({n: np.full(20, 1 / n) for n in (10, 100, 1000)})["value"]
        assert t.verdict == "decreasing" and t.slope == pytest.approx(-1.0)

    def test_needs_three(self):
        with pytest.raises(InsufficientData):
            convergence_trend({1: 1.0, 2: 2.0})
        with pytest.raises(InsufficientData):
            convergence_trend(run_experiment(_spec(n_grid=[4, 16])))


def test_heavy_tailed_delay_keeps_j1_modulus():
    # a large innovation enters the single-delay average as two steps 1/n apart,
    # so w' at 2/n does not vanish
    src = ("moving-average", {"alpha": 1.5, "coeffs": [1.0, 1.0]})
    med = [tightness_report(src, [2 / n], 1.0, [n], replicas=100).median(n, "w_prime", 2 / n) for n in (100, 1000, 10000)]
    assert min(med) >= 0.5 * med[0] > 0
