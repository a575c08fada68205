import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rsle.dyson import DrivingPath, calogero_flow, equally_spaced, simulate_dyson
from rsle.errors import DomainError, SingularEvaluation
from rsle.loewner import evolve, hull_mask, loewner_field, reverse_flow

BRANCH_TOL = 1e-8
ORIGIN_TOL = 1e-6
SELF_CONV_TOL = 1e-6
CONJ_TOL = 1e-9
ROUND_TRIP_TOL = 1e-6
ORDER_BAND = 0.5
TIP_TOL = 0.05

POINTS = np.array([0.3 + 0.2j, -0.4j, 0.1 - 0.5j, -0.6 + 0.1j])


@pytest.fixture(scope="module")
def stochastic_path():
    return simulate_dyson(3, 4.0, equally_spaced(3), 0.1, 1e-4, 5)


@pytest.fixture(scope="module")
def calogero_path():
    return calogero_flow(np.array([-0.5, 0.4, 1.5]), 0.3, 1e-3)


def _constant_path(horizon, dt, angle=0.0):
    k = int(round(horizon / dt)) + 1
    return DrivingPath(times=np.linspace(0.0, horizon, k), states=np.full((k, 1), angle),
                       velocities=np.zeros((k, 1)))


class TestField:
    def test_origin(self):
        x = np.exp(1j * np.array([0.1, 2.0, -1.3]))
        v, m, _ = loewner_field(np.array([0j]), x)
        assert v[0] == 0
        assert m[0] == pytest.approx(3.0, abs=1e-14)

    @given(st.floats(-math.pi, math.pi), st.floats(0.05, 0.95), st.floats(-math.pi, math.pi))
    @settings(max_examples=100, deadline=None)
    def test_single_slit_closed_form(self, a, r, phi):
        x = np.array([np.exp(1j * a)])
        g = np.array([r * np.exp(1j * phi)])
        v, m, _ = loewner_field(g, x)
        assert v[0] == pytest.approx(-g[0] * (g[0] + x[0]) / (g[0] - x[0]), rel=1e-12, abs=1e-12)


class TestEvolve:
    def test_origin_fixed_and_derivative_growth(self, stochastic_path):
        res = evolve([0j], stochastic_path)
        assert np.all(res.g[:, 0] == 0)
        nt = 3 * res.times
        assert np.all(np.abs(res.log_dg[:, 0].real - nt) <= ORIGIN_TOL * np.maximum(nt, 1e-300))

    def test_branch_consistency(self, stochastic_path):
        pts = evolve(POINTS, stochastic_path, record=False).points
        x = np.exp(1j * stochastic_path.states[-1])
        for p in pts:
            assert not p.swallowed
            assert abs(np.exp(p.log_g) - p.g) <= BRANCH_TOL * abs(p.g)
            assert np.abs(np.exp(p.log_diffs) - (p.g - x)).max() <= BRANCH_TOL * np.abs(p.g - x).min()

    def test_constant_driving_self_convergence(self):
        coarse = evolve(POINTS, _constant_path(0.5, 0.01), frac=10.0, record=False).points
        fine = evolve(POINTS, _constant_path(0.5, 0.001), frac=10.0, record=False).points
        for a, b in zip(coarse, fine):
            assert abs(a.g - b.g) <= SELF_CONV_TOL * abs(b.g)

    @pytest.mark.parametrize("scheme, order", [("euler", 1.0), ("rk4", 4.0)])
    def test_step_size_order(self, scheme, order):
        init = np.array([-0.5, 0.4, 1.5])

        def final(dt, sch, frac):
            p = calogero_flow(init, 0.3, dt, gap_cfl=None)
            return np.array([q.g for q in evolve(POINTS, p, scheme=sch, frac=frac, record=False).points])

        ref = final(1.25e-5, "rk4", 0.01)
        errs = [np.abs(final(dt, scheme, 10.0) - ref).max() for dt in (0.02, 0.01, 0.005)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(np.abs(orders - order) <= ORDER_BAND)

    def test_conjugation_symmetry(self):
        p = calogero_flow(np.array([-1.0, -0.3, 0.3, 1.0]), 0.2, 1e-3)
        a = evolve(POINTS, p, record=False).points
        b = evolve(np.conj(POINTS), p, record=False).points
        for u, v in zip(a, b):
            assert abs(v.g - np.conj(u.g)) <= CONJ_TOL

    def test_swallowed_point_freezes(self):
        p = simulate_dyson(1, 4.0, [0.0], 0.05, 1e-4, 1)
        res = evolve([0.999], p)
        k = np.flatnonzero(res.swallowed[:, 0])
        assert k.size and res.points[0].swallowed
        assert np.all(res.g[k, 0] == res.g[k[0], 0])
        assert res.points[0].swallowed_at <= p.horizon

    def test_rejects_outside_points(self, stochastic_path):
        with pytest.raises(DomainError):
            evolve([1.2], stochastic_path)
        with pytest.raises(DomainError):
            evolve([0.1], stochastic_path, t_end=1.0)

    def test_trajectory_csv(self, stochastic_path, tmp_path):
        res = evolve(POINTS[:2], stochastic_path)
        f = tmp_path / "traj.csv"
        res.trajectory_to_csv(f, 1)
        lines = f.read_text().splitlines()
        assert lines[0] == "t,re_g,im_g,re_logdg,im_logdg,swallowed"
        assert len(lines) == res.times.size + 1


class TestReverseFlow:
    def test_identity_at_time_zero(self, stochastic_path):
        assert reverse_flow(0.3 + 0.1j, stochastic_path, 0.0) == 0.3 + 0.1j

    def test_round_trip_deterministic(self, calogero_path):
        g = np.array([q.g for q in evolve(POINTS, calogero_path, record=False).points])
        back = reverse_flow(g, calogero_path, calogero_path.horizon)
        assert np.abs(back - POINTS).max() <= ROUND_TRIP_TOL

    def test_round_trip_stochastic(self, stochastic_path):
        g = np.array([q.g for q in evolve(POINTS, stochastic_path, scheme="rk4", record=False).points])
        back = reverse_flow(g, stochastic_path, stochastic_path.horizon)
        assert np.abs(back - POINTS).max() <= ROUND_TRIP_TOL

    def test_round_trip_intermediate_time(self, calogero_path):
        res = evolve(POINTS, calogero_path, t_end=0.15, record=False)
        back = reverse_flow(np.array([q.g for q in res.points]), calogero_path, 0.15)
        assert np.abs(back - POINTS).max() <= ROUND_TRIP_TOL

    @pytest.mark.parametrize("n, seed", [(1, 0), (1, 1), (2, 0), (2, 1), (2, 2)])
    def test_trace_tip_cauchy(self, n, seed):
        p = simulate_dyson(n, 4.0, equally_spaced(n), 0.05, 1e-4, seed)
        x = np.exp(1j * p.states[-1])
        tip3 = reverse_flow((1 - 1e-3) * x, p, p.horizon)
        tip4 = reverse_flow((1 - 1e-4) * x, p, p.horizon)
        assert np.abs(tip3 - tip4).max() <= TIP_TOL

    def test_errors(self, stochastic_path):
        with pytest.raises(DomainError):
            reverse_flow(1.5, stochastic_path, 0.05)
        with pytest.raises(DomainError):
            reverse_flow(0.1, stochastic_path, 1.0)
        # the last interval is driven by its left-endpoint state
        x = np.exp(1j * stochastic_path.states[-2][0])
        with pytest.raises(SingularEvaluation):
            reverse_flow((1 - 1e-14) * x, stochastic_path, stochastic_path.horizon)


class TestHullMask:
    @pytest.fixture(scope="class")
    @staticmethod
    def path():
        return simulate_dyson(2, 4.0, [-0.5, 0.5], 0.1, 1e-4, 8)

    def test_time_zero_empty(self, path):
        m = hull_mask(17, path, 0.0)
        assert np.all(m.inside)

    def test_origin_inside(self, path):
        m = hull_mask(33, path, 0.1)
        k = np.flatnonzero(m.z == 0)
        assert k.size == 1 and m.inside[k[0]]

    def test_nesting(self, path):
        a = hull_mask(33, path, 0.05)
        b = hull_mask(33, path, 0.1)
        assert np.all(~a.inside <= ~b.inside)
        assert np.nanmax(a.swallow_time) <= 0.05 and np.nanmax(b.swallow_time) <= 0.1
        both = ~a.inside
        assert np.array_equal(a.swallow_time[both], b.swallow_time[both])
        assert (~b.inside).sum() > (~a.inside).sum()

    def test_resolution_floor(self, path):
        with pytest.raises(DomainError):
            hull_mask(8, path, 0.1)

    def test_csv(self, path, tmp_path):
        m = hull_mask(17, path, 0.1)
        f = tmp_path / "mask.csv"
        m.to_csv(f)
        rows = f.read_text().splitlines()
        assert rows[0] == "re_z,im_z,swallow_time"
        assert len(rows) == m.z.size + 1
        assert sum(r.endswith(",") for r in rows[1:]) == int(m.inside.sum())
