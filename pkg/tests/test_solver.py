import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ham_levy import _fallback, kernels
from ham_levy.errors import NonCenteredLaw, OutsideWindow, TiedTimes
from ham_levy.field import AtomCloud, SpaceTimeWindow, green, sample_cloud
from ham_levy.levy import Discrete, SymmetricTwoPoint, builtin_laws
from ham_levy.rng import path_generator
from ham_levy.solver import (
    add_one_cost,
    add_two_cost,
    eval_u,
    eval_v,
    half_identity_residual,
    solve,
    solve_delta,
    spatial_average,
    spatial_average_quadrature,
    spatial_averages,
)

LAW = SymmetricTwoPoint(1.0, 1.0)
W = SpaceTimeWindow(2.0, 3.0)

try:
    from ham_levy import _kernels as compiled
except ImportError:  # pragma: no cover - pure-Python install
    compiled = None


def brute_u(cloud):
    """Direct O(K^2) evaluation of the defining recursion."""
    u = []
    for i in range(len(cloud)):
        acc = 1.0
        for j in range(i):
            if abs(cloud.y[i] - cloud.y[j]) < cloud.s[i] - cloud.s[j]:
                acc += 0.5 * cloud.z[j] * u[j]
        u.append(acc)
    return np.array(u)


def random_cloud(seed, rate=5.0, window=W):
    return sample_cloud(window, SymmetricTwoPoint(1.0, rate), np.random.default_rng(seed))


class TestSolveExamples:
    def test_empty(self):
        sol = solve(AtomCloud.from_atoms(W, []), LAW)
        assert eval_u(sol, 1.0, 0.3) == 1.0
        assert spatial_average(sol, 1.0, 1.0) == 0.0

    def test_one_atom(self):
        sol = solve(AtomCloud.from_atoms(W, [(0.2, 0.0, 1.0)]), LAW)
        assert eval_u(sol, 1.0, 0.5) == 1.5
        assert eval_u(sol, 1.0, 0.8) == 1.0  # on the cone boundary
        assert eval_u(sol, 0.2, 0.0) == 1.0

    def test_two_atoms(self):
        z1, z2 = 1.0, -1.0
        sol = solve(AtomCloud.from_atoms(W, [(0.1, 0.0, z1), (0.5, 0.1, z2)]), LAW)
        assert sol.u_at_atoms[1] == 1 + 0.5 * z1
        assert eval_u(sol, 1.0, 0.0) == 1 + 0.5 * z1 + 0.5 * z2 * (1 + 0.5 * z1)

    def test_initial_condition(self):
        sol = solve(random_cloud(1), LAW)
        assert eval_u(sol, 0.0, 0.0) == 1.0

    def test_matches_atom_value_from_above(self):
        cloud = random_cloud(2)
        sol = solve(cloud, LAW)
        i = len(cloud) // 2
        # at the atom itself the strict cone excludes atom i
        assert eval_u(sol, cloud.s[i], cloud.y[i]) == pytest.approx(sol.u_at_atoms[i], abs=1e-14)
        # just above, atom i enters with its own jump
        above = eval_u(sol, cloud.s[i] + 1e-13, cloud.y[i])
        assert above == pytest.approx(sol.u_at_atoms[i] * (1 + 0.5 * cloud.z[i]), abs=1e-13)

    def test_non_centered(self):
        with pytest.raises(NonCenteredLaw):
            solve(AtomCloud.from_atoms(W, []), Discrete(((1.0, 1.0),)))
        with pytest.raises(NonCenteredLaw):
            solve_delta(AtomCloud.from_atoms(W, []), Discrete(((1.0, 1.0),)), 0.0, 0.0, 1.0)

    def test_outside_window(self):
        sol = solve(AtomCloud.from_atoms(SpaceTimeWindow(1.0, 0.0), []), LAW)
        with pytest.raises(OutsideWindow):
            eval_u(sol, 1.0, 0.5)
        with pytest.raises(OutsideWindow):
            spatial_average(sol, 1.0, 0.5)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force(self, seed):
        cloud = random_cloud(seed)
        np.testing.assert_allclose(solve(cloud, LAW).u_at_atoms, brute_u(cloud), rtol=0, atol=1e-13)


class TestDelta:
    def test_empty(self):
        d = solve_delta(AtomCloud.from_atoms(W, []), LAW, 0.2, 0.0, 3.0)
        assert eval_v(d, 1.0, 0.5) == 1.5
        assert eval_v(d, 1.0, 0.8) == 0.0

    def test_one_atom_in_cone(self):
        z, z1 = 2.0, -1.0
        d = solve_delta(AtomCloud.from_atoms(W, [(0.5, 0.1, z1)]), LAW, 0.2, 0.0, z)
        assert eval_v(d, 1.0, 0.0) == 0.5 * z + 0.5 * z1 * (0.5 * z)

    def test_support_and_linearity(self):
        cloud = random_cloud(3)
        r, y = 0.3, 0.2
        d1 = solve_delta(cloud, LAW, r, y, 1.7)
        d2 = solve_delta(cloud, LAW, r, y, 3.4)
        np.testing.assert_array_equal(d2.v_at_atoms, 2 * d1.v_at_atoms)
        outside = np.abs(cloud.y - y) >= cloud.s - r
        assert np.all(d1.v_at_atoms[outside] == 0.0)
        assert eval_v(d1, 1.0, y + 0.7) == 0.0

    def test_half_identity_fuzz(self):
        worst = 0.0
        for i in range(10_000):
            rng = path_generator(99, i)
            cloud = AtomCloud.from_atoms(W, [])
            if i % 10 == 0:
                cloud = sample_cloud(SpaceTimeWindow(2.0, 3.0), SymmetricTwoPoint(1.0, 3.0), rng)
            r = rng.uniform(0, 1.5)
            y = rng.uniform(-1, 1)
            t = rng.uniform(r, 2.0)
            x = rng.uniform(-3, 3) * (1 - t / 2.0)
            x = float(np.clip(x, -W.half_width_at(t), W.half_width_at(t)))
            d = solve_delta(cloud, LAW, r, y, rng.normal())
            if t > r:
                worst = max(worst, abs(half_identity_residual(d, t, x)))
        assert worst == 0.0


class TestDerivatives:
    def test_empty_cloud_add_one(self):
        cloud = AtomCloud.from_atoms(W, [])
        assert add_one_cost(cloud, LAW, (0.2, 0.0, 3.0), 1.0, 0.5) == green(0.8, 0.5) * 3.0

    def test_support(self):
        cloud = random_cloud(4)
        assert add_one_cost(cloud, LAW, (0.2, 0.0, 1.0), 1.0, 0.8) == 0.0
        assert add_one_cost(cloud, LAW, (0.2, 0.0, 1.0), 1.0, -0.9) == 0.0

    def test_two_cost_incompatible_cones(self):
        cloud = random_cloud(5)
        # |y2 - y1| >= r2 - r1 and the target only sees the second atom
        assert add_two_cost(cloud, LAW, (0.2, -1.0, 1.0), (0.5, 0.5, -1.0), 1.0, 0.5) == 0.0

    def test_two_cost_symmetric(self):
        cloud = random_cloud(6)
        a, b = (0.2, 0.0, 1.0), (0.4, 0.1, -1.0)
        assert add_two_cost(cloud, LAW, a, b, 1.0, 0.05) == add_two_cost(cloud, LAW, b, a, 1.0, 0.05)

    def test_two_cost_ties(self):
        with pytest.raises(TiedTimes):
            add_two_cost(random_cloud(7), LAW, (0.2, 0.0, 1.0), (0.2, 0.5, 1.0), 1.0, 0.0)

    @pytest.mark.parametrize("name,law", list(builtin_laws().items()))
    def test_fuzz_small(self, name, law):
        from ham_levy.fuzz import identity_fuzz

        rep = identity_fuzz(law, cases=100, seed=3, name=name)
        assert rep.passed, (rep.max_one_residual, rep.max_two_residual, rep.max_outside, rep.max_half)


class TestCausality:
    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000), frac=st.floats(0.05, 0.95), y=st.floats(-0.9, 0.9), z=st.floats(0.1, 3) | st.floats(-3, -0.1))
    def test_late_atom_does_not_change_past(self, seed, frac, y, z):
        cloud = random_cloud(seed, rate=3.0)
        s = frac * W.t_max
        if np.any(cloud.s == s):
            return
        base = solve(cloud, LAW)
        bumped = solve(cloud.with_atom(s, y, z), LAW)
        early = cloud.s <= s
        np.testing.assert_array_equal(bumped.u_at_atoms[: early.sum()], base.u_at_atoms[early])
        for x in (-0.5, 0.0, 0.5):
            t = min(s, 1.0)
            assert eval_u(bumped, t, x) == eval_u(base, t, x)


class TestBackends:
    @pytest.mark.skipif(compiled is None, reason="compiled extension not built")
    @pytest.mark.parametrize("seed", range(4))
    def test_compiled_equals_fallback(self, seed):
        cloud = random_cloud(seed, rate=40.0)
        src = np.ones(len(cloud))
        a = compiled.cone_recursion(cloud.s, cloud.y, cloud.z, src, 4096)
        b = _fallback.cone_recursion(cloud.s, cloud.y, cloud.z, src, 4096)
        np.testing.assert_array_equal(a, b)
        assert compiled.cone_sum(cloud.s, cloud.y, cloud.z, a, 2.0, 0.1) == _fallback.cone_sum(
            cloud.s, cloud.y, cloud.z, b, 2.0, 0.1
        )

    @pytest.mark.parametrize("seed", range(4))
    def test_indexed_equals_naive(self, seed):
        cloud = random_cloud(seed, rate=40.0)
        naive = solve(cloud, LAW, index_threshold=10**9)
        indexed = solve(cloud, LAW, index_threshold=1)
        np.testing.assert_array_equal(naive.u_at_atoms, indexed.u_at_atoms)
        d1 = solve_delta(cloud, LAW, 0.1, 0.0, 1.0, index_threshold=10**9)
        d2 = solve_delta(cloud, LAW, 0.1, 0.0, 1.0, index_threshold=1)
        np.testing.assert_array_equal(d1.v_at_atoms, d2.v_at_atoms)

    def test_indexed_equals_naive_many_cells(self):
        cloud = random_cloud(9, rate=100.0, window=SpaceTimeWindow(1.0, 30.0))
        assert len(cloud) > 5000
        naive = solve(cloud, LAW, index_threshold=10**9)
        indexed = solve(cloud, LAW, index_threshold=1)
        np.testing.assert_array_equal(naive.u_at_atoms, indexed.u_at_atoms)

    def test_indexed_on_lattice(self):
        # exact cone-boundary ties: |y_i - y_j| == s_i - s_j must be excluded by both paths
        w = SpaceTimeWindow(1.0, 4.0)
        atoms = [(k / 64, ((k * 37) % 64) / 16 - 2, 1.0 if k % 3 else -1.0) for k in range(1, 64)]
        cloud = AtomCloud.from_atoms(w, atoms)
        np.testing.assert_array_equal(
            solve(cloud, LAW, index_threshold=10**9).u_at_atoms, solve(cloud, LAW, index_threshold=1).u_at_atoms
        )
        np.testing.assert_array_equal(solve(cloud, LAW).u_at_atoms, brute_u(cloud))

    def test_backend_flag(self):
        assert kernels.BACKEND in ("cython", "python")

    def test_pure_python_switch(self):
        import os
        import subprocess
        import sys

        env = dict(os.environ, HAM_LEVY_PURE_PYTHON="1")
        out = subprocess.run(
            [sys.executable, "-c", "from ham_levy import kernels; print(kernels.BACKEND)"],
            capture_output=True, text=True, env=env, check=True,
        )
        assert out.stdout.strip() == "python"


class TestSpatialAverage:
    def test_single_atom(self):
        sol = solve(AtomCloud.from_atoms(W, [(0.2, 0.4, -1.0)]), LAW)
        # phi(1, 1, 0.2, 0.4) = |(-1, 1) cap (-0.4, 1.2)| / 2 = 0.7
        assert spatial_average(sol, 1.0, 1.0) == pytest.approx(-0.7, abs=1e-15)

    @pytest.mark.parametrize("seed", range(6))
    def test_against_quadrature(self, seed):
        sol = solve(random_cloud(seed, rate=3.0), LAW)
        for t, R in [(1.0, 1.0), (2.0, 3.0), (1.5, 0.4)]:
            assert abs(spatial_average(sol, t, R) - spatial_average_quadrature(sol, t, R)) <= 1e-9

    def test_vectorised(self):
        sol = solve(random_cloud(8), LAW)
        many = spatial_averages(sol, [1.0, 2.0], [2.0, 3.0])
        assert many[0] == spatial_average(sol, 1.0, 2.0)
        assert many[1] == spatial_average(sol, 2.0, 3.0)


def test_pathwise_mean():
    n = 100_000
    w = SpaceTimeWindow(1.0, 0.0)
    vals = np.empty(n)
    for i in range(n):
        sol = solve(sample_cloud(w, LAW, path_generator(5, i)), LAW)
        vals[i] = eval_u(sol, 1.0, 0.0)
    se = vals.std(ddof=1) / math.sqrt(n)
    assert abs(vals.mean() - 1.0) <= 5 * se
