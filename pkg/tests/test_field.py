import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from ham_levy.errors import EmptyTargets, OutsideWindow, TiedTimes
from ham_levy.field import (
    AtomCloud,
    AverageTarget,
    PointTarget,
    SpaceTimeWindow,
    green,
    green_mass,
    lemma24_report,
    phi,
    sample_cloud,
    window_for_targets,
)
from ham_levy.levy import PowerDensity, SymmetricTwoPoint


def phi_brute(t, R, r, y, n=200_001):
    """Midpoint rule over [-R, R] of the propagator; step function so error is O(1/n)."""
    x = -R + (np.arange(n) + 0.5) * (2 * R / n)
    return float(np.sum(green(t - r, x - y)) * (2 * R / n))


class TestGreen:
    def test_inside(self):
        assert green(1.0, 0.5) == 0.5

    def test_negative_time(self):
        assert green(-1.0, 0.0) == 0.0
        assert green(0.0, 0.0) == 0.0

    def test_boundary_excluded(self):
        assert green(1.0, 1.0) == 0.0
        assert green(1.0, -1.0) == 0.0

    def test_vectorised(self):
        out = green(np.array([1.0, 1.0, -1.0]), np.array([0.0, 2.0, 0.0]))
        np.testing.assert_array_equal(out, [0.5, 0.0, 0.0])

    @pytest.mark.parametrize("t", [0.1, 1.0, 3.7])
    def test_mass(self, t):
        assert green_mass(t) == t
        # Closed form: the indicator of (-t, t) times 1/2 has mass t.
        assert phi(t, 10 * t, 0.0, 0.0) == pytest.approx(t)


class TestPhi:
    def test_full_cone(self):
        assert phi(1, 2, 0, 0) == 1.0

    def test_partial_overlap(self):
        assert phi(1, 1, 0, 1.5) == pytest.approx(0.25)

    def test_after_target(self):
        assert phi(1, 1, 1, 0) == 0.0
        assert phi(1, 1, 2, 0) == 0.0

    @pytest.mark.parametrize("args", [(1, 1, 0, 1.5), (2, 0.5, 0.3, 0.2), (1.5, 3, 0.2, -3.4), (0.7, 0.2, 0.1, 0.0)])
    def test_against_brute_force(self, args):
        assert phi(*args) == pytest.approx(phi_brute(*args), abs=1e-4)

    @settings(max_examples=300, deadline=None)
    @given(
        t=st.floats(0, 5), dt=st.floats(0, 3), R=st.floats(0.01, 5), dR=st.floats(0, 3),
        r=st.floats(0, 5), y=st.floats(-10, 10),
    )
    def test_monotone_and_increment_bound(self, t, dt, R, dR, r, y):
        base = phi(t, R, r, y)
        later = phi(t + dt, R, r, y)
        wider = phi(t, R + dR, r, y)
        assert later >= base - 1e-12
        assert wider >= base - 1e-12
        assert later - base <= dt + 1e-12
        assert 0 <= base <= max(min(t - r, R), 0) + 1e-12


class TestWindow:
    def test_area(self):
        w = SpaceTimeWindow(2.0, 3.0)
        assert w.area() == pytest.approx(2 * 3 * 2 + 4)

    def test_point_target(self):
        w = window_for_targets([PointTarget(1.0, 0.0)])
        assert (w.t_max, w.y0) == (1.0, 0.0)
        assert w.half_width_at(0.25) == 0.75

    def test_average_target(self):
        w = window_for_targets([AverageTarget(1.0, 2.0)])
        assert w.half_width_at(0.0) == 3.0
        assert w.half_width_at(0.4) == pytest.approx(2.0 + 0.6)

    def test_union(self):
        targets = [PointTarget(1.0, 5.0), AverageTarget(2.0, 1.0)]
        w = window_for_targets(targets)
        for s in np.linspace(0, 1, 11):
            assert w.half_width_at(s) >= max(5 + 1 - s, 1 + 2 - s) - 1e-12
        assert all(w.covers_point(t, x) for t, x in [(1.0, 5.0), (2.0, 1.0), (2.0, -1.0)])

    def test_empty(self):
        with pytest.raises(EmptyTargets):
            window_for_targets([])

    @settings(max_examples=200, deadline=None)
    @given(T=st.floats(0.1, 3), y0=st.floats(0, 5), fs=st.floats(0, 1), fy=st.floats(-1, 1), back=st.floats(0, 1), fy2=st.floats(-1, 1))
    def test_backward_cone_closure(self, T, y0, fs, fy, back, fy2):
        w = SpaceTimeWindow(T, y0)
        s = fs * T
        y = fy * w.half_width_at(s)
        s2 = s * (1 - back)
        y2 = y + fy2 * (s - s2)
        assert w.contains(s2, y2)

    def test_covers(self):
        w = SpaceTimeWindow(1.0, 2.0)
        assert w.covers_point(1.0, 2.0)
        assert not w.covers_point(1.0, 2.1)
        assert w.covers_average(0.5, 2.5)
        with pytest.raises(OutsideWindow):
            w.require_average(1.0, 3.0)


class TestCloud:
    def test_zero_rate_window_gives_empty_cloud(self):
        # no admissible zero-rate law: use a window so thin the Poisson mean underflows to 0
        law = SymmetricTwoPoint(1.0, 1e-320)
        cloud = sample_cloud(SpaceTimeWindow(1e-10), law, np.random.default_rng(0))
        assert len(cloud) == 0

    def test_poisson_count_moments(self):
        law = SymmetricTwoPoint(1.0, 1.0)
        w = SpaceTimeWindow(1.0, 0.0)
        assert w.area() == 1.0
        n = 100_000
        rng = np.random.default_rng(11)
        k = np.array([len(sample_cloud(w, law, rng)) for _ in range(n)])
        assert abs(k.mean() - 1.0) <= 5 / math.sqrt(n)
        # Var of the sample variance of Poisson(1): (mu4 - sigma^4) / n = 3 / n
        assert abs(k.var(ddof=1) - 1.0) <= 5 * math.sqrt(3 / n)

    def test_determinism(self):
        law = PowerDensity(eps=0.2, b=4.0)
        w = SpaceTimeWindow(1.5, 2.0)
        a = sample_cloud(w, law, np.random.default_rng(42))
        b = sample_cloud(w, law, np.random.default_rng(42))
        np.testing.assert_array_equal(a.s, b.s)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(a.z, b.z)

    def test_sorted_and_inside(self):
        w = SpaceTimeWindow(2.0, 3.0)
        cloud = sample_cloud(w, SymmetricTwoPoint(1.0, 5.0), np.random.default_rng(1))
        assert len(cloud) > 20
        assert np.all(np.diff(cloud.s) > 0)
        assert all(w.contains(a.s, a.y) for a in cloud.atoms)

    def test_uniform_positions(self):
        # time marginal density is proportional to the half-width y0 + T - s
        w = SpaceTimeWindow(1.0, 0.5)
        rng = np.random.default_rng(2)
        cloud = sample_cloud(w, SymmetricTwoPoint(1.0, 50_000 / w.area()), rng)
        T, y0 = w.t_max, w.y0

        def cdf(s):
            return (y0 * s + T * s - 0.5 * s * s) / (y0 * T + 0.5 * T * T)

        assert stats.kstest(cloud.s, cdf).pvalue > 1e-3
        rel = cloud.y / (y0 + T - cloud.s)
        assert stats.kstest(rel, stats.uniform(-1, 2).cdf).pvalue > 1e-3

    def test_disjoint_counts_independent(self):
        law = SymmetricTwoPoint(1.0, 2.0)
        w = SpaceTimeWindow(1.0, 1.0)
        rng = np.random.default_rng(12)
        n = 100_000
        ca = np.empty(n, dtype=int)
        cb = np.empty(n, dtype=int)
        for i in range(n):
            c = sample_cloud(w, law, rng)
            ca[i] = np.count_nonzero((c.s < 0.5) & (c.y < -0.2) & (c.y > -1.2))
            cb[i] = np.count_nonzero((c.s > 0.5) & (c.y > 0.0) & (c.y < 1.0))
        ca = np.minimum(ca, 4)
        cb = np.minimum(cb, 3)
        table = np.zeros((5, 4))
        np.add.at(table, (ca, cb), 1)
        assert stats.chi2_contingency(table).pvalue > 1e-3

    def test_with_atom(self):
        w = SpaceTimeWindow(1.0, 1.0)
        cloud = AtomCloud.from_atoms(w, [(0.2, 0.0, 1.0), (0.6, 0.1, -1.0)])
        bigger = cloud.with_atom(0.4, 0.3, 2.0)
        np.testing.assert_array_equal(bigger.s, [0.2, 0.4, 0.6])
        with pytest.raises(TiedTimes):
            cloud.with_atom(0.2, 0.5, 1.0)
        with pytest.raises(OutsideWindow):
            cloud.with_atom(0.5, 5.0, 1.0)

    def test_ties_rejected(self):
        with pytest.raises(TiedTimes):
            AtomCloud(SpaceTimeWindow(1.0), [0.1, 0.1], [0.0, 0.5], [1.0, 1.0])


class TestPhiIntegrals:
    def test_difference_integral(self):
        rep = lemma24_report(2.0, 1.0, 3.0, r=0.5)
        assert abs(rep.diff_integral - 6.0) <= 1e-10

    @pytest.mark.parametrize("R", [0.3, 1.0, 4.0])
    def test_unit_interval_square_bound(self, R):
        rep = lemma24_report(1.0, 0.0, R)
        assert rep.diff_integral is None
        assert rep.sq_integral <= 4 * R / 3

    def test_square_closed_form(self):
        # int phi^2 dy = 2 R a^2 - 2 a^3 / 3 for a = t - r <= R, integrated over a in [0, t - s]
        t, s, R = 1.5, 0.5, 3.0
        h = t - s
        rep = lemma24_report(t, s, R)
        assert rep.sq_integral == pytest.approx(2 * R * h**3 / 3 - h**4 / 6, abs=1e-10)

    def test_degenerate(self):
        rep = lemma24_report(1.0, 1.0, 2.0)
        assert rep.diff_integral == 0.0 and rep.sq_integral == 0.0 and rep.fourth_integral == 0.0
