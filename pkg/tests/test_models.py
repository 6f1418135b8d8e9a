import numpy as np
import pytest

from qlpp.events import EventStream
from qlpp.models import (
    HawkesModel,
    HawkesParams,
    HawkesState,
    LinearLOBModel,
    LinearLOBParams,
    LOBState,
    ParamBox,
    PoissonModel,
    PoissonParams,
    branching_matrix,
    hawkes_compensator,
    hawkes_evolve,
    hawkes_intensity,
    hawkes_spectral_radius,
    lob_intensity,
    poisson_intensity,
)
from qlpp.rng import rng_stream

from helpers import brute_intensity, random_hawkes_params, random_schedule


def one_d(nu, c, a):
    return HawkesParams(
        nu=np.array([nu]), c=np.array([[c]]), a=np.array([[a]])
    )


class TestHawkesParams:
    def test_shapes_enforced(self):
        with pytest.raises(ValueError):
            HawkesParams(nu=np.array([1.0]), c=np.zeros((2, 2)), a=np.ones((2, 2)))

    def test_nu_positive(self):
        with pytest.raises(ValueError):
            one_d(0.0, 1.0, 1.0)

    def test_decay_positive(self):
        with pytest.raises(ValueError):
            one_d(1.0, 1.0, 0.0)

    def test_amplitudes_nonnegative(self):
        with pytest.raises(ValueError):
            one_d(1.0, -0.1, 1.0)

    def test_zero_amplitude_allowed(self):
        p = one_d(1.0, 0.0, 1.0)
        assert p.c[0, 0] == 0.0

    def test_masked_entries_must_be_zero(self):
        mask = np.array([[False, True], [False, False]])
        with pytest.raises(ValueError):
            HawkesParams(
                nu=np.ones(2), c=np.ones((2, 2)), a=np.ones((2, 2)),
                sparsity_mask=mask,
            )
        ok = HawkesParams(
            nu=np.ones(2),
            c=np.array([[1.0, 0.0], [1.0, 1.0]]),
            a=np.ones((2, 2)),
            sparsity_mask=mask,
        )
        assert ok.c[0, 1] == 0.0


class TestHawkesIntensity:
    def test_zero_state_gives_baseline(self):
        p = one_d(1.3, 2.0, 1.0)
        lam = hawkes_intensity(HawkesState.zero(1), p)
        assert np.array_equal(lam, [1.3])

    def test_single_event_closed_form(self):
        # one jump of size 2, decay 1, observed one time unit later
        p = one_d(1.0, 2.0, 1.0)
        s = HawkesState.zero(1)
        s = hawkes_evolve(s, p, 0.5, jump_mark=0)
        s = hawkes_evolve(s, p, 1.0)
        lam = hawkes_intensity(s, p)
        assert np.isclose(lam[0], 1.0 + 2.0 * np.exp(-1.0), rtol=1e-14)
        assert np.isclose(lam[0], 1.7357589, atol=5e-8)

    def test_intensity_never_below_baseline(self):
        gen = rng_stream(3)
        p = random_hawkes_params(gen, 2)
        s = HawkesState.zero(2)
        for _ in range(50):
            s = hawkes_evolve(s, p, gen.uniform(0.0, 1.0), jump_mark=int(gen.integers(0, 2)))
            assert np.all(hawkes_intensity(s, p) >= p.nu)


class TestHawkesEvolve:
    def test_zero_dt_is_identity(self):
        p = one_d(1.0, 2.0, 1.5)
        s = hawkes_evolve(HawkesState.zero(1), p, 0.7, jump_mark=0)
        s2 = hawkes_evolve(s, p, 0.0)
        assert np.array_equal(s2.exc, s.exc)
        assert np.array_equal(s2.exc_age, s.exc_age)

    def test_negative_dt_rejected(self):
        p = one_d(1.0, 2.0, 1.5)
        with pytest.raises(ValueError):
            hawkes_evolve(HawkesState.zero(1), p, -0.1)

    def test_unit_decay_example(self):
        # excitation 2 with decay 1 halves to 2/e after one time unit and the
        # age-weighted channel picks up exactly the same value
        p = one_d(1.0, 2.0, 1.0)
        s = HawkesState(exc=np.array([[2.0]]), exc_age=np.array([[0.0]]))
        out = hawkes_evolve(s, p, 1.0)
        assert np.isclose(out.exc[0, 0], 2.0 * np.exp(-1.0), rtol=1e-14)
        assert np.isclose(out.exc_age[0, 0], 2.0 * np.exp(-1.0), rtol=1e-14)
        assert np.isclose(out.exc[0, 0], 0.7357589, atol=5e-8)

    def test_jump_adds_amplitude_column(self):
        p = HawkesParams(
            nu=np.ones(2),
            c=np.array([[0.3, 0.7], [0.2, 0.5]]),
            a=np.ones((2, 2)),
        )
        s = hawkes_evolve(HawkesState.zero(2), p, 1.0, jump_mark=1)
        assert np.allclose(s.exc[:, 1], p.c[:, 1])
        assert np.allclose(s.exc[:, 0], 0.0)

    def test_age_channel_is_decay_derivative(self):
        # exc_age must equal -d exc / d a entrywise, checked by central FD
        gen = rng_stream(17)
        for _ in range(30):
            p = random_hawkes_params(gen, 1)
            times, marks = random_schedule(gen, 1, 5.0, 12)

            def final_exc(a_val):
                q = one_d(p.nu[0], p.c[0, 0], a_val)
                s = HawkesState.zero(1)
                prev = 0.0
                for t, k in zip(times, marks):
                    s = hawkes_evolve(s, q, t - prev, jump_mark=int(k))
                    prev = t
                s = hawkes_evolve(s, q, 5.0 - prev)
                return s.exc[0, 0]

            h = 1e-6 * p.a[0, 0]
            fd = (final_exc(p.a[0, 0] + h) - final_exc(p.a[0, 0] - h)) / (2 * h)

            q = p
            s = HawkesState.zero(1)
            prev = 0.0
            for t, k in zip(times, marks):
                s = hawkes_evolve(s, q, t - prev, jump_mark=int(k))
                prev = t
            s = hawkes_evolve(s, q, 5.0 - prev)
            assert np.isclose(s.exc_age[0, 0], -fd, rtol=1e-6, atol=1e-10)

    def test_state_recursion_matches_direct_sum(self):
        # 300 random schedules here; the full-scale sweep lives in the
        # acceptance suite
        gen = rng_stream(23)
        for _ in range(300):
            d = int(gen.integers(1, 4))
            p = random_hawkes_params(gen, d)
            times, marks = random_schedule(gen, d, 10.0, int(gen.integers(5, 40)))
            s = HawkesState.zero(d)
            prev = 0.0
            for t, k in zip(times, marks):
                lam_rec = hawkes_intensity(hawkes_evolve(s, p, t - prev), p)
                lam_direct = brute_intensity(p, times, marks, t)
                assert np.allclose(lam_rec, lam_direct, rtol=1e-10, atol=1e-12)
                s = hawkes_evolve(s, p, t - prev, jump_mark=int(k))
                prev = t


class TestCompensator:
    def test_no_events_is_linear(self):
        p = one_d(0.7, 1.0, 1.0)
        s = EventStream(times=np.array([]), marks=np.array([], dtype=np.int64), d=1, horizon=6.0)
        assert np.isclose(hawkes_compensator(s, p, 4.0)[0], 0.7 * 4.0, rtol=1e-14)

    def test_single_event_closed_form(self):
        # baseline 0.5 over [0, 3] plus one kernel integrated over age 2
        p = one_d(0.5, 2.0, 1.0)
        s = EventStream(
            times=np.array([1.0]), marks=np.array([0], dtype=np.int64), d=1, horizon=3.0
        )
        val = hawkes_compensator(s, p, 3.0)[0]
        expected = 0.5 * 3.0 + 2.0 * (1.0 - np.exp(-2.0))
        assert np.isclose(val, expected, rtol=1e-14)
        assert np.isclose(val, 3.2293294, atol=5e-8)

    def test_matches_quadrature(self):
        from scipy import integrate

        gen = rng_stream(29)
        p = random_hawkes_params(gen, 2)
        times, marks = random_schedule(gen, 2, 8.0, 25)
        s = EventStream(times=times, marks=marks, d=2, horizon=8.0)
        knots = np.concatenate([[0.0], times, [8.0]])
        for comp in range(2):
            total = 0.0
            for lo, hi in zip(knots[:-1], knots[1:]):
                v, _ = integrate.quad(
                    lambda u: brute_intensity(p, times, marks, u)[comp],
                    lo, hi, epsabs=1e-12, epsrel=1e-12,
                )
                total += v
            assert np.isclose(hawkes_compensator(s, p, 8.0)[comp], total, rtol=1e-8)

    def test_monotone_in_t(self):
        gen = rng_stream(31)
        p = random_hawkes_params(gen, 1)
        times, marks = random_schedule(gen, 1, 10.0, 20)
        s = EventStream(times=times, marks=marks, d=1, horizon=10.0)
        grid = np.linspace(0.0, 10.0, 60)
        vals = np.array([hawkes_compensator(s, p, t)[0] for t in grid])
        assert np.all(np.diff(vals) >= 0.0)

    def test_t_outside_window_rejected(self):
        p = one_d(1.0, 1.0, 1.0)
        s = EventStream(times=np.array([]), marks=np.array([], dtype=np.int64), d=1, horizon=2.0)
        with pytest.raises(ValueError):
            hawkes_compensator(s, p, 3.0)


class TestBranching:
    def test_matrix_entries(self):
        p = HawkesParams(
            nu=np.ones(2),
            c=np.array([[0.5, 0.2], [0.3, 0.4]]),
            a=np.array([[2.0, 1.0], [1.0, 4.0]]),
        )
        assert np.allclose(branching_matrix(p), [[0.25, 0.2], [0.3, 0.1]])

    def test_radius_zero_without_excitation(self):
        p = one_d(1.0, 0.0, 1.0)
        assert hawkes_spectral_radius(p) == 0.0

    def test_radius_scalar_case(self):
        assert np.isclose(hawkes_spectral_radius(one_d(1.0, 1.0, 2.0)), 0.5, rtol=1e-14)

    def test_radius_two_by_two(self):
        p = HawkesParams(
            nu=np.ones(2),
            c=np.array([[0.5, 0.2], [0.3, 0.4]]),
            a=np.ones((2, 2)),
        )
        assert np.isclose(hawkes_spectral_radius(p), 0.7, rtol=1e-12)


class TestPoisson:
    def test_rate_must_be_positive(self):
        with pytest.raises(ValueError):
            PoissonParams(rate=np.array([1.0, 0.0]))

    def test_intensity_is_the_rate(self):
        p = PoissonParams(rate=np.array([0.5, 2.5]))
        assert np.array_equal(poisson_intensity(p), [0.5, 2.5])


class TestLOB:
    def params(self, m=2):
        return LinearLOBParams(
            limit_rates=np.full(m, 1.0),
            cancel_coeffs=np.full(m, 0.4),
            market_rate_bid=0.3,
            market_rate_ask=0.2,
        )

    def test_cancel_rate_proportional_to_depth(self):
        st = LOBState(queues=np.array([-3, 2]))
        lam = lob_intensity(st, self.params())
        assert np.isclose(lam[2], 0.4 * 3, rtol=1e-14)  # 1.2 at depth 3
        assert np.isclose(lam[3], 0.4 * 2, rtol=1e-14)

    def test_cancel_rate_exactly_zero_on_empty_level(self):
        st = LOBState(queues=np.array([0, 2]))
        lam = lob_intensity(st, self.params())
        assert lam[2] == 0.0

    def test_market_rates_are_nominal_arrival_rates(self):
        # lob_intensity reports arrival rates; suppression of non-actionable
        # arrivals happens in the simulator and the likelihood replay
        p = self.params()
        both = lob_intensity(LOBState(queues=np.array([-1, 1])), p)
        assert both[4] == 0.3 and both[5] == 0.2
        empty = lob_intensity(LOBState.empty(2), p)
        assert empty[4] == 0.3 and empty[5] == 0.2

    def test_limit_rates_state_free(self):
        p = self.params()
        a = lob_intensity(LOBState(queues=np.array([-5, 7])), p)
        b = lob_intensity(LOBState.empty(2), p)
        assert np.array_equal(a[:2], b[:2])

    def test_best_levels(self):
        st = LOBState(queues=np.array([-2, 0, 0, 3]))
        assert st.n_bid == 2
        assert st.best_bid() == 0
        assert st.best_ask() == 3
        assert LOBState.empty(4).best_bid() is None
        assert LOBState.empty(4).best_ask() is None

    def test_sign_convention_enforced(self):
        with pytest.raises(ValueError):
            LOBState(queues=np.array([2, 1]))  # positive depth on the bid side

    def test_depth_is_absolute(self):
        st = LOBState(queues=np.array([-2, 5]))
        assert np.array_equal(st.depth(), [2, 5])

    def test_negative_rates_rejected(self):
        with pytest.raises(ValueError):
            LinearLOBParams(
                limit_rates=np.array([1.0, -1.0]),
                cancel_coeffs=np.array([0.4, 0.4]),
                market_rate_bid=0.0,
                market_rate_ask=0.0,
            )


class TestParamBox:
    def test_bounds_must_be_ordered_and_positive(self):
        with pytest.raises(ValueError):
            ParamBox(lower=np.array([0.0]), upper=np.array([1.0]))
        with pytest.raises(ValueError):
            ParamBox(lower=np.array([2.0]), upper=np.array([1.0]))

    def test_contains_and_clip(self):
        box = ParamBox(lower=np.array([0.5, 0.5]), upper=np.array([2.0, 2.0]))
        assert box.contains(np.array([1.0, 1.0]))
        assert not box.contains(np.array([1.0, 3.0]))
        assert np.array_equal(box.clip(np.array([0.1, 5.0])), [0.5, 2.0])

    def test_log_bounds(self):
        box = ParamBox(lower=np.array([0.5]), upper=np.array([2.0]))
        lo, hi = box.log_bounds()
        assert np.isclose(lo[0], np.log(0.5))
        assert np.isclose(hi[0], np.log(2.0))


class TestModelPacking:
    def test_hawkes_round_trip(self):
        gen = rng_stream(5)
        p = random_hawkes_params(gen, 3)
        m = HawkesModel(3)
        assert m.dim == 3 + 2 * 9
        back = m.unpack(m.pack(p))
        assert np.array_equal(back.nu, p.nu)
        assert np.array_equal(back.c, p.c)
        assert np.array_equal(back.a, p.a)

    def test_hawkes_masked_round_trip(self):
        mask = np.array([[False, True], [False, False]])
        m = HawkesModel(2, mask)
        assert m.dim == 2 + 2 * 3
        p = HawkesParams(
            nu=np.array([1.0, 2.0]),
            c=np.array([[0.5, 0.0], [0.3, 0.4]]),
            a=np.array([[2.0, 1.0], [1.5, 2.5]]),
            sparsity_mask=mask,
        )
        th = m.pack(p)
        assert th.size == 8
        back = m.unpack(th)
        assert back.c[0, 1] == 0.0
        assert np.array_equal(back.c[m._active], p.c[m._active])

    def test_hawkes_param_names_skip_masked(self):
        mask = np.array([[False, True], [False, False]])
        m = HawkesModel(2, mask)
        names = m.param_names()
        assert "c[0,1]" not in names
        assert "c[1,0]" in names
        assert names[0] == "nu[0]"
        assert len(names) == m.dim

    def test_natural_indices_consistent_with_pack(self):
        mask = np.array([[False, True], [True, False]])
        m = HawkesModel(2, mask)
        p = HawkesParams(
            nu=np.array([1.0, 2.0]),
            c=np.array([[0.5, 0.0], [0.0, 0.4]]),
            a=np.array([[2.0, 1.0], [1.0, 2.5]]),
            sparsity_mask=mask,
        )
        full = np.concatenate([p.nu, p.c.ravel(), p.a.ravel()])
        assert np.array_equal(full[m.natural_indices()], m.pack(p))

    def test_poisson_round_trip(self):
        m = PoissonModel(2)
        p = PoissonParams(rate=np.array([0.5, 1.5]))
        assert np.array_equal(m.unpack(m.pack(p)).rate, p.rate)
        assert m.param_names() == ["rate[0]", "rate[1]"]

    def test_lob_round_trip(self):
        m = LinearLOBModel(2)
        p = LinearLOBParams(
            limit_rates=np.array([1.0, 1.1]),
            cancel_coeffs=np.array([0.4, 0.5]),
            market_rate_bid=0.3,
            market_rate_ask=0.2,
        )
        th = m.pack(p)
        assert th.size == m.dim == 6
        back = m.unpack(th)
        assert np.array_equal(back.limit_rates, p.limit_rates)
        assert back.market_rate_ask == 0.2
        assert len(m.param_names()) == 6

    def test_lob_needs_two_levels(self):
        with pytest.raises(ValueError):
            LinearLOBModel(1)

    def test_default_boxes_contain_reference_points(self):
        m = HawkesModel(2)
        gen = rng_stream(8)
        p = random_hawkes_params(gen, 2)
        assert m.default_box().contains(m.pack(p))
        assert PoissonModel(3).default_box().contains(np.array([0.5, 1.0, 2.0]))
