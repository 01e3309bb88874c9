import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neuroslam.experience_map import (Experience, ExperienceLink, MapGraph, add_experience,
                                      close_loop, export_csv, export_json, load_experiences_csv,
                                      optimize, residual, robust_cost)
from oracles import noisy_odometry, square_truth

poses_st = st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50),
                              st.floats(-math.pi, math.pi - 1e-9)), min_size=2, max_size=12)


def _chain(poses):
    g = MapGraph()
    add_experience(g, poses[0])
    for i, p in enumerate(poses[1:]):
        add_experience(g, p, prev_id=i)
    return g


def _square_graph(seed, n=40, closure=True):
    truth, turns, step = square_truth(n)
    odo = noisy_odometry(turns, step, np.random.default_rng(seed))
    g = _chain(odo)
    if closure:
        # exact closure link from the last node back to the start
        xi, yi, ti = truth[-1]
        dx, dy = truth[0, 0] - xi, truth[0, 1] - yi
        g.links.append(ExperienceLink(n - 1, 0, math.hypot(dx, dy),
                                      math.atan2(dy, dx) - ti, -ti, loop_closure=True))
    return g, truth


class TestAddExperience:
    def test_root(self):
        g = MapGraph()
        e, link = add_experience(g, (0.0, 0.0, 0.0))
        assert (e.id, e.x, e.y, e.theta) == (0, 0.0, 0.0, 0.0) and link is None

    def test_forward(self):
        g = _chain([(0, 0, 0), (1, 0, 0)])
        l = g.links[0]
        assert (l.d, l.heading_rad, l.facing_rad) == (1.0, 0.0, 0.0)

    def test_sideways_then_turn(self):
        g = _chain([(0, 0, 0), (0, 1, math.pi / 2)])
        l = g.links[0]
        assert l.d == 1.0
        assert l.heading_rad == pytest.approx(math.pi / 2)
        assert l.facing_rad == pytest.approx(math.pi / 2)

    def test_theta_wrapped(self):
        g = _chain([(0, 0, 0), (1, 0, 3 * math.pi)])
        assert g.experiences[1].theta == -math.pi

    def test_prev_required(self):
        g = _chain([(0, 0, 0)])
        with pytest.raises(ValueError):
            add_experience(g, (1, 0, 0))

    @given(poses_st)
    def test_own_links_have_zero_residual(self, poses):
        g = _chain(poses)
        assert [e.id for e in g.experiences] == list(range(len(poses)))
        for l in g.links:
            r = residual(g.experiences[l.from_id], g.experiences[l.to_id], l)
            assert np.allclose(r, 0.0, atol=1e-9)

    def test_link_invariants(self):
        with pytest.raises(ValueError):
            ExperienceLink(1, 1, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            ExperienceLink(0, 1, -1.0, 0.0, 0.0)


class TestResidual:
    def test_angle_wrap(self):
        link = ExperienceLink(0, 1, 0.0, 0.0, 0.3)
        r = residual(Experience(0, 0, 0, 3.0), Experience(1, 0, 0, -3.0), link)
        assert r[2] == pytest.approx(-6.3 + 2 * math.pi, abs=1e-12)
        assert r[2] == pytest.approx(-0.01681469282, abs=1e-10)

    def test_translation_error(self):
        link = ExperienceLink(0, 1, 1.0, 0.0, 0.0)
        r = residual(Experience(0, 0, 0, 0), Experience(1, 1.2, 0, 0), link)
        assert np.allclose(r, (0.2, 0.0, 0.0))


class TestCloseLoop:
    def test_zero_distance_link(self):
        g = _chain([(0, 0, 0), (5, 0, 0)])
        l = close_loop(g, 1, 0, 0.0)
        assert (l.from_id, l.to_id, l.d, l.heading_rad, l.facing_rad) == (0, 1, 0.0, 0.0, 0.0)

    def test_idempotent(self):
        g = _chain([(0, 0, 0), (5, 0, 0)])
        close_loop(g, 1, 0, 0.1)
        assert close_loop(g, 1, 0, 0.1) is None
        assert sum(l.loop_closure for l in g.links) == 1

    def test_missing_ids(self):
        g = _chain([(0, 0, 0)])
        with pytest.raises(IndexError):
            close_loop(g, 3, 0)

    def test_two_nodes_pulled_together(self):
        g = MapGraph(experiences=[Experience(0, 0.0, 0.0, 0.0), Experience(1, 5.0, 0.0, 0.0)])
        close_loop(g, 1, 0, 0.0)
        optimize(g)
        e0, e1 = g.experiences
        assert math.hypot(e1.x - e0.x, e1.y - e0.y) < 0.5

    def test_chain_pulled_together(self):
        # ten 0.5 m links; a quadratic share leaves 5/11 m between the ends
        g = _chain([(0.5 * i, 0.0, 0.0) for i in range(11)])
        close_loop(g, 10, 0, 0.0)
        optimize(g)
        e0, e10 = g.experiences[0], g.experiences[10]
        assert math.hypot(e10.x - e0.x, e10.y - e0.y) < 0.5


class TestOptimize:
    def test_zero_residual_unchanged(self):
        truth, _, _ = square_truth(40)
        g = _chain([tuple(p) for p in truth])
        close_loop(g, 39, 0, 0.0)
        g.links[-1] = ExperienceLink(39, 0, 2.5, 0.0, math.pi / 2, loop_closure=True)
        before = g.poses()
        res = optimize(g)
        assert np.abs(g.poses() - before).max() < 1e-9
        assert res.final_cost <= res.initial_cost

    def test_single_node(self):
        g = _chain([(1, 2, 0.3)])
        assert optimize(g).converged

    @pytest.mark.parametrize("seed", range(3))
    def test_gauge_bitwise(self, seed):
        g, _ = _square_graph(seed)
        g.experiences[0].x, g.experiences[0].y, g.experiences[0].theta = 0.1, -0.2, 0.3
        before = (g.experiences[0].x, g.experiences[0].y, g.experiences[0].theta)
        optimize(g)
        assert (g.experiences[0].x, g.experiences[0].y, g.experiences[0].theta) == before

    @pytest.mark.parametrize("seed", range(3))
    def test_cost_not_increased(self, seed):
        g, _ = _square_graph(seed)
        c0 = robust_cost(g)
        res = optimize(g)
        assert res.initial_cost == pytest.approx(c0)
        assert res.final_cost <= res.initial_cost
        assert robust_cost(g) == pytest.approx(res.final_cost)

    @given(st.integers(0, 10**6), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
    def test_translation_equivariance(self, seed, dx, dy):
        a, _ = _square_graph(seed, n=16)
        b, _ = _square_graph(seed, n=16)
        for e in b.experiences:
            e.x += dx
            e.y += dy
        optimize(a)
        optimize(b)
        pa, pb = a.poses(), b.poses()
        assert np.allclose(pb[:, :2] - pa[:, :2], (dx, dy), atol=1e-6)
        assert np.allclose(pb[:, 2], pa[:, 2], atol=1e-9)

    @given(st.integers(0, 10**6))
    def test_thetas_in_range(self, seed):
        g, _ = _square_graph(seed, n=12)
        optimize(g)
        th = g.poses()[:, 2]
        assert np.all((th >= -math.pi) & (th < math.pi))

    def test_max_iterations_respected(self):
        g, _ = _square_graph(0)
        assert optimize(g, max_iterations=1).iterations == 1


def test_export_round_trip(tmp_path):
    g = _chain([(0, 0, 0), (1.5, 0.25, 0.1), (2.0, 1.0, -3.0)])
    close_loop(g, 2, 0, 0.2)
    export_csv(g, tmp_path / "e.csv", tmp_path / "l.csv")
    export_json(g, tmp_path / "m.json")
    back = load_experiences_csv(tmp_path / "e.csv")
    assert np.array_equal(back.poses(), g.poses())
    rows = (tmp_path / "l.csv").read_text().splitlines()
    assert rows[0] == "from,to,d,heading_rad,facing_rad" and len(rows) == 1 + len(g.links)
