import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stein_tc.errors import DomainError, StructuralError
from stein_tc.functionals import random_path
from stein_tc.paths import (
    LINEAR,
    STEP,
    GridPath,
    TimeChange,
    combine,
    eval_path,
    integral,
    integrated_rate,
    inverse_tc,
    left_limit,
    path_from_csv,
    path_from_json,
    path_to_csv,
    path_to_json,
    sup_norm,
    uniform_distance,
)
from stein_tc.process_sim import sim_moran, ModelParams, sim_scaled_rw
from stein_tc.streams import StreamKey

finite = st.floats(-1e6, 1e6, allow_nan=False)


@st.composite
def paths(draw, kind=None):
    size = draw(st.integers(2, 30))
    inner = draw(st.lists(st.floats(1e-6, 1 - 1e-6), min_size=size - 2, max_size=size - 2, unique=True))
    times = np.array([0.0, *sorted(inner), 1.0])
    times = np.unique(times)
    values = draw(st.lists(finite, min_size=times.size, max_size=times.size))
    return GridPath(times, values, kind or draw(st.sampled_from([STEP, LINEAR])))


class TestGridPath:
    def test_rejects_malformed_grids(self):
        with pytest.raises(StructuralError):
            GridPath([0.0, 0.6, 0.5, 1.0], [0, 1, 2, 3])
        with pytest.raises(StructuralError):
            GridPath([0.1, 1.0], [0, 1])
        with pytest.raises(StructuralError):
            GridPath([0.0, 1.0], [0, 1, 2])
        with pytest.raises(StructuralError):
            GridPath([0.0, 0.5, 0.5, 1.0], [0, 1, 2, 3], STEP)

    def test_linear_path_may_repeat_a_breakpoint_once(self):
        p = GridPath([0.0, 0.5, 0.5, 1.0], [0.0, 1.0, 2.0, 2.0], LINEAR)
        assert left_limit(p, 0.5) == 1.0
        assert eval_path(p, 0.5) == 2.0
        with pytest.raises(StructuralError):
            GridPath([0.0, 0.5, 0.5, 0.5, 1.0], [0, 1, 2, 3, 3], LINEAR)

    def test_arrays_are_read_only(self):
        p = GridPath.constant(1.0)
        with pytest.raises(ValueError):
            p.values[0] = 3.0


class TestSupNorm:
    def test_zero_path(self):
        assert sup_norm(GridPath.zero()) == 0.0

    def test_max_abs(self):
        assert sup_norm(GridPath([0, 0.3, 1], [1, -3, 2], STEP)) == 3.0

    def test_random_walk_matches_dense_sampling(self):
        p = sim_scaled_rw(50, "rademacher", TimeChange.identity(), StreamKey(1, "sup"))
        dense = eval_path(p, np.linspace(0, 1, 10_001))
        jumps = eval_path(p, p.times)
        assert sup_norm(p) == max(np.abs(dense).max(), np.abs(jumps).max())
        assert sup_norm(p) == np.abs(jumps).max()

    @given(paths(), paths(), st.floats(-5, 5))
    def test_norm_axioms(self, p, q, a):
        assert np.isclose(sup_norm(p.scaled(a)), abs(a) * sup_norm(p), rtol=1e-12, atol=0)
        if p.kind == q.kind:
            assert sup_norm(combine(1, p, 1, q)) <= (sup_norm(p) + sup_norm(q)) * (1 + 1e-12)


class TestEval:
    def test_constant(self):
        assert eval_path(GridPath.constant(2.5), 0.77) == 2.5

    def test_right_continuity(self):
        p = GridPath([0, 0.5, 1], [0.0, 1.0, 1.0], STEP)
        assert eval_path(p, 0.5) == 1.0
        assert left_limit(p, 0.5) == 0.0

    def test_linear_interpolation(self):
        p = GridPath([0, 1], [0, 2], LINEAR)
        assert eval_path(p, 0.25) == 0.5

    def test_domain(self):
        with pytest.raises(DomainError):
            eval_path(GridPath.zero(), 1.5)
        with pytest.raises(DomainError):
            eval_path(GridPath.zero(), -0.1)


class TestCombine:
    @given(paths())
    def test_self_difference_is_zero(self, p):
        assert sup_norm(combine(1, p, -1, p)) == 0.0

    def test_zero_plus_scaled(self, rng):
        q = random_path(rng)
        r = combine(2, GridPath.zero(q.kind), 3, q)
        t = rng.uniform(0, 1, 200)
        np.testing.assert_allclose(eval_path(r, t), 3 * eval_path(q, t), rtol=1e-13, atol=1e-13)

    def test_bilinear_at_random_times(self, rng):
        for _ in range(20):
            p, q = random_path(rng), random_path(rng)
            a, b = rng.normal(size=2)
            r = combine(a, p, b, q)
            t = rng.uniform(0, 1, 1000)
            np.testing.assert_allclose(eval_path(r, t), a * eval_path(p, t) + b * eval_path(q, t), atol=1e-12)

    def test_mixed_kinds_promote_and_keep_jumps(self):
        step = GridPath([0, 0.5, 1], [0.0, 1.0, 1.0], STEP)
        lin = GridPath([0, 1], [0.0, 1.0], LINEAR)
        r = combine(1, step, 1, lin)
        assert r.kind == LINEAR
        assert eval_path(r, 0.5) == pytest.approx(1.5)
        assert left_limit(r, 0.5) == pytest.approx(0.5)


class TestIntegral:
    def test_step_and_linear(self):
        assert integral(GridPath([0, 0.5, 1], [1.0, 3.0, 0.0], STEP)) == 2.0
        assert integral(GridPath([0, 1], [0.0, 2.0], LINEAR)) == 1.0


class TestTimeChange:
    def test_inverse_examples(self):
        assert inverse_tc(TimeChange.identity(), 0.3) == 0.3
        assert inverse_tc(TimeChange.linear(2.0), 1.0) == 0.5
        s = integrated_rate(GridPath.constant(0.5), "R1_limit")
        assert inverse_tc(s, 1 / 16) == pytest.approx(0.5, abs=1e-15)

    def test_inverse_domain(self):
        with pytest.raises(DomainError):
            inverse_tc(TimeChange.linear(2.0), 2.5)
        with pytest.raises(DomainError):
            inverse_tc(TimeChange.identity(), -0.1)

    def test_flat_stretch_resolves_leftmost(self):
        s = TimeChange.tabulated([0, 0.25, 0.75, 1.0], [0, 0.5, 0.5, 1.0])
        assert inverse_tc(s, 0.5) == 0.25

    # fractions are kept away from the subnormal range, where t = y^(1/alpha) underflows
    @given(st.floats(0.1, 4), st.floats(0.1, 3), st.just(0.0) | st.floats(1e-12, 1))
    def test_inverse_round_trip(self, alpha, c, frac):
        for s in (TimeChange.power(alpha, c), TimeChange.linear(c)):
            y = frac * s.total
            assert s(inverse_tc(s, y)) == pytest.approx(y, rel=1e-12, abs=1e-300)

    def test_parse_round_trip(self):
        for text in ("identity", "linear:2.5", "power:1.5:2.0"):
            assert str(TimeChange.parse(text)) == text
        with pytest.raises(StructuralError):
            TimeChange.parse("cubic:2")

    def test_closed_forms_must_increase(self):
        with pytest.raises(StructuralError):
            TimeChange.linear(0.0)
        with pytest.raises(StructuralError):
            TimeChange.tabulated([0, 0.5, 1], [0, 0.6, 0.5])


class TestUniformDistance:
    def test_examples(self):
        assert uniform_distance(TimeChange.identity(), TimeChange.identity()) == 0.0
        assert uniform_distance(TimeChange.identity(), TimeChange.linear(2.0)) == 1.0

    def test_curved_matches_dense_grid(self):
        s, s2 = TimeChange.power(2.0), TimeChange.identity()
        assert uniform_distance(s, s2) == pytest.approx(0.25, abs=1e-12)

    def test_rate_integrals_match_dense_oracle(self):
        x = sim_moran(ModelParams(32, 1.0, 1.0, 0.5), StreamKey(4, "ud"))
        r, rn = integrated_rate(x, "R1_limit"), integrated_rate(x, "R1", 32, 1.0, 1.0)
        t = np.union1d(np.linspace(0, 1, 100_001), x.times)
        assert uniform_distance(r, rn) == pytest.approx(np.abs(r(t) - rn(t)).max(), rel=1e-10, abs=1e-15)


class TestIntegratedRate:
    def test_half_gives_t_over_eight(self):
        s = integrated_rate(GridPath.constant(0.5), "R1_limit")
        assert s.total == 0.125
        assert s(0.5) == 0.0625

    def test_zero_state_mutation_only(self):
        s = integrated_rate(GridPath.constant(0.0), "R1", n=10, nu2=3.0)
        assert s(0.4) == pytest.approx(3.0 * 0.4 / 10)

    def test_riemann_oracle(self, rng):
        n, nu1, nu2 = 20, 0.7, 1.3
        for _ in range(5):
            times = np.unique(np.concatenate(([0, 1], rng.uniform(size=15))))
            x = GridPath(times, rng.uniform(size=times.size), STEP)
            m = 100_000
            mid = (np.arange(m) + 0.5) / m
            xv = eval_path(x, mid)
            for kind, f in (
                ("R1", (0.5 * xv + nu2 / n) * (1 - xv)),
                ("Rm1", (0.5 * (1 - xv) + nu1 / n) * xv),
                ("R1_limit", 0.5 * xv * (1 - xv)),
            ):
                got = integrated_rate(x, kind, n, nu1, nu2).total
                # the midpoint sum is exact except on the panels containing breakpoints
                assert got == pytest.approx(f.sum() / m, rel=1e-4)
            exact = sum((0.5 * v + nu2 / n) * (1 - v) * dt for v, dt in zip(x.values[:-1], np.diff(times)))
            assert integrated_rate(x, "R1", n, nu1, nu2).total == pytest.approx(exact, rel=1e-10)

    def test_linear_path_is_exact(self):
        x = GridPath([0, 1], [0.0, 1.0], LINEAR)
        # int_0^1 t(1-t)/2 dt = 1/12
        assert integrated_rate(x, "R1_limit").total == pytest.approx(1 / 12, rel=1e-14)

    def test_signed_kinds_return_paths(self):
        x = GridPath.constant(1.0)
        drift = integrated_rate(x, "In", nu1=1.0, nu2=0.5)
        assert isinstance(drift, GridPath)
        assert drift.values[-1] == pytest.approx(-1.0)

    @given(paths(STEP), st.integers(1, 500), st.floats(0, 5))
    def test_r1_total_bounded(self, p, n, nu2):
        x = GridPath(p.times, np.clip(np.abs(p.values) / (1 + np.abs(p.values)), 0, 1), STEP)
        s = integrated_rate(x, "R1", n, 0.0, nu2)
        assert np.all(np.diff(s.table.values) >= 0)
        assert s.total <= 1 / 8 + nu2 / n + 1e-15

    def test_domain(self):
        with pytest.raises(DomainError):
            integrated_rate(GridPath.constant(1.5), "R1_limit")


class TestSerialization:
    @given(paths())
    def test_round_trips_bit_exact(self, p):
        for q in (path_from_csv(path_to_csv(p)), path_from_json(path_to_json(p))):
            assert q.kind == p.kind
            assert np.array_equal(q.times, p.times) and np.array_equal(q.values, p.values)

    def test_json_record_shape(self):
        rec = json.loads(path_to_json(GridPath.zero()))
        assert set(rec) == {"times", "values", "kind"}
