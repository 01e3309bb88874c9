import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neuroslam.attractor import (AttractorConfig, Cue, NetworkState, RingBump, TorusBump,
                                 estimate_phase, fuse_circular, global_inhibition, inject_cue,
                                 mutual_inhibition, path_integrate_ring, path_integrate_torus,
                                 step, torus_distance)
from neuroslam.geometry import PlanarVelocity
from oracles import TWO_PI, ring_error, ring_fusion_argmax

phase = st.floats(0, TWO_PI, exclude_max=True)
weight = st.floats(0.01, 100)
sigma_weight = st.floats(1.0 / (math.pi / 3) ** 2, 1e4)  # sigma below pi/3


class TestFusion:
    def test_symmetric_example(self):
        assert fuse_circular((0.0, 1.0), (0.0, 1.0)) == (0.0, 2.0)

    def test_weighted_mean(self):
        mu, w = fuse_circular((1.0, 1.0), (2.0, 3.0))
        assert (mu, w) == (pytest.approx(1.75), 4.0)

    def test_wrap_point(self):
        mu, _ = fuse_circular((6.2, 1.0), (0.1, 1.0), TWO_PI)
        # frozen from the 10^6-bin ring oracle
        assert mu == pytest.approx(0.0084073464, abs=2 * TWO_PI / 1e6)
        assert ring_error(mu, ring_fusion_argmax(6.2, 1.0, 0.1, 1.0)) < 2 * TWO_PI / 1e6

    @given(phase, weight, phase, weight)
    def test_swap_symmetry(self, ma, wa, mb, wb):
        # antipodal means have two equally near representatives
        if abs(ring_error(ma, mb) - math.pi) < 1e-6:
            return
        a = fuse_circular((ma, wa), (mb, wb))
        b = fuse_circular((mb, wb), (ma, wa))
        assert ring_error(a[0], b[0]) < 1e-12
        assert a[1] == b[1]

    @given(phase, weight, phase, weight)
    def test_mean_in_range_and_weights_add(self, ma, wa, mb, wb):
        mu, w = fuse_circular((ma, wa), (mb, wb))
        assert 0.0 <= mu < TWO_PI
        assert w == wa + wb

    @given(phase, sigma_weight, phase, sigma_weight)
    def test_ring_oracle(self, ma, wa, mb, wb):
        if abs(ring_error(ma, mb) - math.pi) < 1e-3:
            return
        mu, _ = fuse_circular((ma, wa), (mb, wb))
        assert ring_error(mu, ring_fusion_argmax(ma, wa, mb, wb)) <= 2 * TWO_PI / 1e6


class TestInhibition:
    def test_global_example(self):
        assert global_inhibition(3.0, 1.0, 2.0) == (1.5, 0.5)

    @given(st.floats(1e-3, 1e3), st.floats(0.1, 10))
    def test_global_symmetric(self, w, E):
        a, b = global_inhibition(w, w, E)
        assert a == pytest.approx(E / 2) and b == pytest.approx(E / 2)

    def test_global_fixed_point(self):
        assert global_inhibition(1.0, 1.0, 2.0) == (1.0, 1.0)

    @given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6), st.floats(0.1, 10))
    def test_global_sum(self, a, b, E):
        x, y = global_inhibition(a, b, E)
        assert abs((x + y) - E) <= 2 * np.spacing(E)

    def test_mutual_example(self):
        a, b = mutual_inhibition(2.0, 1.0, 0.1, 0.3, 1e-6)
        assert (a, b) == (pytest.approx(1.9), pytest.approx(0.4))

    def test_mutual_zero_deltas(self):
        assert mutual_inhibition(2.0, 1.0, 0.0, 0.0, 1e-6) == (2.0, 1.0)

    def test_mutual_floor(self):
        a, _ = mutual_inhibition(0.1, 10.0, 0.5, 0.1, 1e-6)
        assert a == 1e-6


class TestPathIntegration:
    def test_ring_wrap(self):
        b = path_integrate_ring(RingBump(6.0, 1.0), 0.5, 1.0)
        assert b.mu == pytest.approx(6.5 - TWO_PI)
        assert b.weight == 1.0

    def test_ring_zero(self):
        b = RingBump(1.0, 2.0)
        assert path_integrate_ring(b, 0.0, 0.1) == b

    @given(phase, st.integers(1, 200))
    def test_ring_full_turn(self, mu, n):
        b = RingBump(mu, 1.0)
        for _ in range(n):
            b = path_integrate_ring(b, TWO_PI / n, 1.0)
        assert ring_error(b.mu, mu) < 1e-9

    def test_torus_example(self):
        b = path_integrate_torus(TorusBump(0.0, 0.0, 1.0, 1.0), 0.0, 1.0, 1.0, TWO_PI / 10)
        assert (b.mu_x, b.mu_y) == (pytest.approx(0.6283185307), 0.0)

    def test_torus_zero_speed(self):
        b = TorusBump(1.0, 2.0, 1.0, 3.0)
        assert path_integrate_torus(b, 0.7, 0.0, 1.0, 0.1) == b

    def test_torus_north(self):
        b = path_integrate_torus(TorusBump(0.0, 0.0, 1.0, 1.0), math.pi / 2, 1.0, 1.0, 0.5)
        assert b.mu_x == pytest.approx(0.0, abs=1e-15) and b.mu_y == pytest.approx(0.5)

    @given(phase, weight, st.floats(-10, 10), st.floats(0.01, 1))
    def test_weights_preserved(self, mu, w, om, dt):
        assert path_integrate_ring(RingBump(mu, w), om, dt).weight == w
        t = path_integrate_torus(TorusBump(mu, mu, w, 2 * w), om, 3.0, dt, 0.2)
        assert (t.weight_x, t.weight_y) == (w, 2 * w)


class TestCueAndEstimate:
    def test_inject_at_mean(self):
        b = inject_cue(RingBump(1.2, 1.0), 1.2, 5.0)
        assert b.mu == pytest.approx(1.2) and b.weight == 6.0

    def test_inject_example(self):
        b = inject_cue(RingBump(1.0, 1.0), 2.0, 3.0)
        assert (b.mu, b.weight) == (pytest.approx(1.75), 4.0)

    def test_inject_wrap(self):
        b = inject_cue(RingBump(6.2, 1.0), 0.1, 1.0)
        assert b.mu == pytest.approx(0.0084073464, abs=1e-6)

    def test_inject_torus(self):
        b = inject_cue(TorusBump(1.0, 6.2, 1.0, 1.0), (2.0, 0.1), 3.0)
        assert b.mu_x == pytest.approx(1.75)
        assert ring_error(b.mu_y, 0.1 - (0.1 + TWO_PI - 6.2) / 4) < 1e-9

    def test_inject_rejects_non_positive(self):
        with pytest.raises(ValueError):
            inject_cue(RingBump(0.0, 1.0), 0.0, 0.0)

    def test_equal_bumps_familiar(self):
        mu, w, fam = estimate_phase(RingBump(2.0, 1.0), RingBump(2.0, 1.0), 0.1)
        assert fam and mu == pytest.approx(2.0) and w == 2.0

    def test_opposite_bumps_unfamiliar(self):
        _, _, fam = estimate_phase(RingBump(0.0, 1.0), RingBump(math.pi, 1.0), 0.1)
        assert not fam

    @given(phase, weight, phase, weight)
    def test_large_threshold_always_familiar(self, ma, wa, mb, wb):
        assert estimate_phase(RingBump(ma, wa), RingBump(mb, wb), math.pi + 1e-9)[2]


class TestStep:
    cfg = AttractorConfig()

    def test_zero_velocity_redistributes_weight(self):
        s = NetworkState(RingBump(1.0, 3.0), RingBump(1.0, 0.5),
                         TorusBump(2.0, 3.0, 1.5, 0.2), TorusBump(2.0, 3.0, 0.7, 0.7))
        res = step(s, self.cfg, PlanarVelocity(0.0, 0.0, 0.1))
        assert res.state.hd_integrator.mu == pytest.approx(1.0)
        assert res.state.grid_integrator.mu == pytest.approx((2.0, 3.0))
        assert res.state.hd_integrator.weight + res.state.hd_calibration.weight == \
            pytest.approx(self.cfg.total_energy, abs=1e-15)

    def test_symmetric_state_is_fixed(self):
        s = NetworkState.initial(self.cfg, 0.5, (1.0, 2.0))
        res = step(s, self.cfg, PlanarVelocity(0.0, 0.0, 0.1))
        assert res.state.hd_integrator.weight == pytest.approx(1.0)
        assert res.state.hd_calibration.weight == pytest.approx(1.0)
        assert not res.loop_closed

    def test_full_rotation_returns(self):
        s = NetworkState.initial(self.cfg, 0.3)
        n = 97
        for _ in range(n):
            s = step(s, self.cfg, PlanarVelocity(TWO_PI / (n * 0.1), 0.0, 0.1)).state
        res = step(s, self.cfg, PlanarVelocity(0.0, 0.0, 0.1))
        assert ring_error(res.hd_estimate, 0.3) < 1e-6

    def test_cue_at_current_phase_closes_loop(self):
        s = NetworkState.initial(self.cfg, 1.0, (2.0, 3.0))
        res = step(s, self.cfg, PlanarVelocity(0.0, 0.0, 0.1), Cue(1.0, (2.0, 3.0), 50.0))
        assert res.loop_closed and res.hd_familiar and res.grid_familiar

    def test_distant_cue_does_not_close(self):
        s = NetworkState.initial(self.cfg, 1.0, (2.0, 3.0))
        res = step(s, self.cfg, PlanarVelocity(0.0, 0.0, 0.1), Cue(4.0, (5.0, 0.5), 1.0))
        assert not res.loop_closed

    def test_no_cue_never_closes(self):
        s = NetworkState.initial(self.cfg)
        assert not step(s, self.cfg, PlanarVelocity(0.0, 0.0, 0.1)).loop_closed

    @given(st.lists(st.tuples(st.floats(-2, 2), st.floats(0, 3), st.booleans(), phase, phase,
                              st.floats(0.1, 100)), min_size=1, max_size=40))
    def test_invariants_over_random_runs(self, seq):
        s = NetworkState.initial(self.cfg)
        E, floor = self.cfg.total_energy, self.cfg.weight_floor
        for om, v, has_cue, ph, gp, w in seq:
            cue = Cue(ph, (gp, ph), w) if has_cue else None
            res = step(s, self.cfg, PlanarVelocity(om, v, 0.1), cue)
            s = res.state
            assert abs(s.hd_integrator.weight + s.hd_calibration.weight - E) <= 2 * np.spacing(E)
            assert abs(s.grid_integrator.weight_x + s.grid_calibration.weight_x - E) \
                <= 2 * np.spacing(E)
            assert abs(s.grid_integrator.weight_y + s.grid_calibration.weight_y - E) \
                <= 2 * np.spacing(E)
            for b in (s.hd_integrator, s.hd_calibration):
                assert 0 <= b.mu < TWO_PI and b.weight >= floor
            for b in (s.grid_integrator, s.grid_calibration):
                assert 0 <= b.mu_x < TWO_PI and 0 <= b.mu_y < TWO_PI
                assert min(b.weight_x, b.weight_y) >= floor
            assert 0 <= res.hd_estimate < TWO_PI


def test_config_validation():
    with pytest.raises(ValueError):
        AttractorConfig(total_energy=0.0)
    with pytest.raises(ValueError):
        AttractorConfig(delta_inte=1.0)
    with pytest.raises(ValueError):
        AttractorConfig(grid_gain=-1.0)


def test_torus_distance():
    assert torus_distance((0.1, 0.0), (TWO_PI - 0.1, 0.0)) == pytest.approx(0.2)
    assert torus_distance((0.0, 0.0), (0.3, 0.4)) == pytest.approx(0.5)
