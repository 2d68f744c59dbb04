import math
import warnings

import numpy as np
import pytest

from stein_tc.bounds import bm_modulus_bounds, bound_thm1, bound_thm3
from stein_tc.errors import ConfigError, DomainError
from stein_tc.functionals import m_norm_bound, parse_functional
from stein_tc.harness import (
    SAMPLERS,
    STEP_THIRD_MOMENT,
    SamplerSpec,
    check_coupling,
    draw,
    draw_batch,
    draw_pair,
    estimate_gap,
    fit_rate,
    pair_bound,
    path_values,
    rate_csv,
    rate_sweep,
)
from stein_tc.bounds import POISSON_ABS3, poisson_abs3_moment
from stein_tc.paths import TimeChange
from stein_tc.streams import StreamKey, keys

SIN_AVG = parse_functional("sin_avg")


class TestSamplers:
    @pytest.mark.parametrize("sid", SAMPLERS)
    def test_every_sampler_draws_a_path_deterministically(self, sid):
        spec = SamplerSpec(n=8, nu1=1.0, nu2=1.0, dt=1e-2, grid_points=17)
        a, b = draw(sid, spec, StreamKey(1, sid)), draw(sid, spec, StreamKey(1, sid))
        assert a.times[0] == 0.0 and a.times[-1] == 1.0
        assert np.array_equal(a.values, b.values)

    @pytest.mark.parametrize("sid", ["wright_fisher", "M", "wf_marginal", "moran_marginal", "scaled_rw:rademacher"])
    def test_batch_matches_single(self, sid):
        spec = SamplerSpec(n=8, nu1=1.0, nu2=0.5, dt=1e-2, grid_points=9)
        ks = keys(2, sid, 5)
        for k, p in zip(ks, draw_batch(sid, spec, ks)):
            q = draw(sid, spec, k)
            assert np.array_equal(p.times, q.times) and np.array_equal(p.values, q.values)

    def test_unknown_sampler(self):
        with pytest.raises(ConfigError):
            draw("levy", SamplerSpec(), StreamKey(0, "x"))

    def test_third_moments(self):
        assert STEP_THIRD_MOMENT["centered_poisson1"] == POISSON_ABS3 == pytest.approx(poisson_abs3_moment())


class TestCoupling:
    @pytest.mark.parametrize("a,b,c", [
        ("scaled_rw:rademacher", "discretized_bm", "common_random"),
        ("moran", "wright_fisher", "lookdown"),
        ("discretized_bm", "time_changed_bm", "lookdown"),
        ("sin", "time_changed_bm", "independent"),
        ("discretized_bm", "time_changed_bm", "antithetic"),
    ])
    def test_invalid_pairs(self, a, b, c):
        with pytest.raises(ConfigError):
            check_coupling(a, b, c)

    def test_valid_pairs_either_order(self):
        for a, b in (("discretized_bm", "time_changed_bm"), ("compensated_poisson", "scaled_rw:centered_poisson1")):
            check_coupling(a, b, "common_random")
            check_coupling(b, a, "common_random")
        check_coupling("wf_marginal", "moran_marginal", "lookdown")

    def test_reversed_pair_swaps_outputs(self):
        spec = SamplerSpec(n=16, grid_points=17)
        p, q = draw_pair("discretized_bm", "time_changed_bm", spec, "common_random", 3, 0)
        q2, p2 = draw_pair("time_changed_bm", "discretized_bm", spec, "common_random", 3, 0)
        assert np.array_equal(p.values, p2.values) and np.array_equal(q.values, q2.values)

    def test_same_sampler_gives_exact_zero(self):
        gap = estimate_gap(SIN_AVG, "discretized_bm", "discretized_bm", 500, "common_random", 4, SamplerSpec(n=16))
        assert gap.diff == 0.0 and gap.stderr == 0.0

    def test_coupled_gap_below_modulus_bound(self):
        spec = SamplerSpec(n=256, grid_points=257)
        gap = estimate_gap(SIN_AVG, "discretized_bm", "time_changed_bm", 1000, "common_random", 5, spec)
        assert abs(gap.diff) <= bm_modulus_bounds(256, 1.0)[0]
        assert pair_bound(SIN_AVG, "discretized_bm", "time_changed_bm", spec) == pytest.approx(
            m_norm_bound(SIN_AVG) * bm_modulus_bounds(256, 1.0)[0])

    def test_lookdown_agrees_with_independent(self):
        spec = SamplerSpec(n=16, nu1=1.0, nu2=1.0, dt=1e-2, grid_points=33)
        g = parse_functional("sin_avg")
        ld = estimate_gap(g, "moran_marginal", "wf_marginal", 10_000, "lookdown", 6, spec)
        ind = estimate_gap(g, "moran_marginal", "wf_marginal", 10_000, "independent", 6, spec)
        assert abs(ld.diff - ind.diff) <= 3 * math.hypot(ld.stderr, ind.stderr)

    @pytest.mark.parametrize("a,b,c,n", [
        ("discretized_bm", "time_changed_bm", "common_random", 64),
        ("scaled_rw:centered_poisson1", "compensated_poisson", "common_random", 64),
        ("moran_marginal", "wf_marginal", "lookdown", 32),
    ])
    def test_variance_reduction(self, a, b, c, n):
        spec = SamplerSpec(n=n, nu1=1.0, nu2=1.0, dt=1e-2, grid_points=65)
        coupled = estimate_gap(SIN_AVG, a, b, 2000, c, 7, spec)
        indep = estimate_gap(SIN_AVG, a, b, 2000, "independent", 7, spec)
        assert coupled.stderr <= indep.stderr

    def test_record_fields(self):
        gap = estimate_gap(SIN_AVG, "discretized_bm", "time_changed_bm", 50, "independent", 8, SamplerSpec(n=8))
        rec = gap.to_record()
        assert rec["ci95"] == 1.96 * rec["stderr"]
        assert rec["diff"] == rec["mean_a"] - rec["mean_b"]
        assert rec["functional"] == "sin_avg" and rec["n_paths"] == 50


class TestParallelDeterminism:
    def test_worker_and_chunk_invariance(self):
        spec = SamplerSpec(n=32, grid_points=33)
        base = path_values(SIN_AVG, "scaled_rw:rademacher", "time_changed_bm", spec, 300, "independent", 9)
        for workers, chunk in ((1, 7), (4, None), (3, 50)):
            got = path_values(SIN_AVG, "scaled_rw:rademacher", "time_changed_bm", spec, 300, "independent", 9,
                              workers=workers, chunk=chunk)
            assert all(np.array_equal(x, y) for x, y in zip(base, got))


class TestRates:
    def test_degenerate_sweep(self):
        pts = rate_sweep(SIN_AVG, "discretized_bm", "discretized_bm", "common_random", [4, 8, 16, 32], 50, 10)
        assert all(p.gap.diff == 0.0 and p.bound == 0.0 for p in pts)

    def test_sweep_validation(self):
        with pytest.raises(ConfigError):
            rate_sweep(SIN_AVG, "discretized_bm", "time_changed_bm", "independent", [4, 8, 16], 10, 0)
        with pytest.raises(ConfigError):
            rate_sweep(SIN_AVG, "discretized_bm", "time_changed_bm", "independent", [4, 8, 8, 16], 10, 0)

    def test_walk_sweep_dominated_and_bound_column_exact(self):
        n_list = [16, 32, 64, 128]
        pts = rate_sweep(SIN_AVG, "scaled_rw:centered_poisson1", "time_changed_bm", "independent", n_list, 500, 11,
                         SamplerSpec(grid_points=129))
        for p in pts:
            assert p.bound == bound_thm1(p.n, 1.0, POISSON_ABS3, m_norm_bound(SIN_AVG)).total
            assert abs(p.gap.diff) <= p.bound
        assert len({p.seed for p in pts}) == 4
        text = rate_csv(pts)
        assert text.splitlines()[0].startswith("n,seed,mean_a")
        assert len(text.splitlines()) == 5
        assert text == rate_csv(rate_sweep(SIN_AVG, "scaled_rw:centered_poisson1", "time_changed_bm", "independent",
                                           n_list, 500, 11, SamplerSpec(grid_points=129)))

    def test_exact_power_law(self):
        n = 2.0 ** np.arange(6, 13)
        fit = fit_rate(list(zip(n, n**-0.5)))
        assert abs(fit.slope + 0.5) <= 1e-12 and fit.points == 7

    def test_log_corrected_law(self):
        n = 2.0 ** np.arange(6, 13)
        fit = fit_rate(list(zip(n, n**-0.5 * np.sqrt(np.log(n)))))
        assert -0.5 < fit.slope < -0.35
        assert fit_rate(list(zip(n, n**-0.5 * np.sqrt(np.log(n)))), log_power=0.5).slope == pytest.approx(-0.5, abs=1e-12)

    def test_thm3_order(self):
        n = 10.0 ** np.arange(2, 7)
        fit = fit_rate([(k, bound_thm3(int(k), 1.0, 1.0).total) for k in n])
        assert abs(fit.slope + 0.25) <= 0.02

    def test_nonpositive_values_filtered(self):
        pts = [(4, 1.0), (8, 0.5), (16, 0.0), (32, 0.25), (64, 0.125)]
        with pytest.warns(UserWarning):
            fit = fit_rate(pts)
        assert fit.points == 4
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(DomainError):
                fit_rate([(4, 1.0), (8, 0.0), (16, -1.0), (32, 0.5), (64, 0.2)])

    def test_bad_use(self):
        with pytest.raises(ConfigError):
            fit_rate([(1, 1)] * 4, use="median")


class TestPairBound:
    def test_catalogue(self):
        spec = SamplerSpec(n=64, nu1=1.0, nu2=1.0, Sn=TimeChange.linear(1.1))
        assert pair_bound(SIN_AVG, "scaled_rw:rademacher", "time_changed_bm", spec) == bound_thm1(64, 1.0, 1.0, 4.0).total
        assert pair_bound(SIN_AVG, "Mn", "M", spec) == bound_thm3(64, 1.0, 1.0, 4.0).total
        assert pair_bound(SIN_AVG, "compensated_poisson", "time_changed_bm", spec) > 0
        assert pair_bound(SIN_AVG, "moran", "wright_fisher", spec) is None
