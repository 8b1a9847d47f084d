"""Exact path-wise solution of the hyperbolic Anderson model on an atom cloud.

For a finite cloud and a centred jump law the stochastic integral in the
mild equation is a finite sum over atoms, so the solution at atom ``i`` is

    u_i = 1 + sum_{j < i, |y_i - y_j| < s_i - s_j} z_j u_j / 2

and every other value of ``u`` follows by one more cone sum. The same
recursion with source ``G_{s_i - r}(y_i - y) z`` gives the solution ``v`` of
the wave equation started at time ``r`` with initial velocity ``z delta_y``.
Add-one-cost derivatives are computed by re-solving augmented clouds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NonCenteredLaw, TiedTimes
from .field import AtomCloud, green, phi
from .levy import JumpLaw, is_centered
from .quadrature import integrate_steps

# Above this many atoms the recursion prunes candidates with an index of y-cells.
INDEX_THRESHOLD = 4096


def _require_centered(law: JumpLaw) -> None:
    if not is_centered(law):
        raise NonCenteredLaw(
            f"{law.family} law has non-zero mean jump; the atom recursion would miss the compensator drift"
        )


@dataclass(frozen=True, eq=False)
class FieldSolution:
    cloud: AtomCloud
    u_at_atoms: np.ndarray

    def eval(self, t: float, x: float) -> float:
        return eval_u(self, t, x)


@dataclass(frozen=True, eq=False)
class DeltaSolution:
    """``v`` started at ``(r, y)`` with velocity ``z``; zero at atoms with ``s_i <= r``."""

    r: float
    y: float
    z: float
    cloud: AtomCloud
    v_at_atoms: np.ndarray

    def eval(self, t: float, x: float) -> float:
        return eval_v(self, t, x)


def solve(cloud: AtomCloud, law: JumpLaw, index_threshold: int = INDEX_THRESHOLD) -> FieldSolution:
    _require_centered(law)
    u = kernels.cone_recursion(cloud.s, cloud.y, cloud.z, np.ones(len(cloud)), index_threshold)
    u.setflags(write=False)
    return FieldSolution(cloud, u)


def eval_u(sol: FieldSolution, t: float, x: float) -> float:
    """``u(t, x) = 1 + sum over atoms in the backward cone of z_i u_i / 2``."""
    if t <= 0:
        return 1.0
    c = sol.cloud
    c.window.require_point(t, x)
    return 1.0 + kernels.cone_sum(c.s, c.y, c.z, sol.u_at_atoms, t, x)


def solve_delta(
    cloud: AtomCloud, law: JumpLaw, r: float, y: float, z: float, index_threshold: int = INDEX_THRESHOLD
) -> DeltaSolution:
    _require_centered(law)
    if r < 0:
        raise ValueError(f"start time must be >= 0, got {r}")
    source = green(cloud.s - r, cloud.y - y) * z
    v = kernels.cone_recursion(cloud.s, cloud.y, cloud.z, source, index_threshold)
    v.setflags(write=False)
    return DeltaSolution(r, y, z, cloud, v)


def eval_v(delta: DeltaSolution, t: float, x: float) -> float:
    if t <= delta.r:
        return 0.0
    c = delta.cloud
    c.window.require_point(t, x)
    return green(t - delta.r, x - delta.y) * delta.z + kernels.cone_sum(c.s, c.y, c.z, delta.v_at_atoms, t, x)


def half_identity_residual(delta: DeltaSolution, t: float, x: float) -> float:
    """``G_{t-r}(x - y) v(t, x) - v(t, x) / 2``; identically zero since ``v`` lives in the cone."""
    v = eval_v(delta, t, x)
    return green(t - delta.r, x - delta.y) * v - 0.5 * v


def add_one_cost(cloud: AtomCloud, law: JumpLaw, xi: tuple[float, float, float], t: float, x: float) -> float:
    """``u^{N + delta_xi}(t, x) - u^N(t, x)`` by solving both clouds."""
    r, y, z = xi
    base = solve(cloud, law)
    bumped = solve(cloud.with_atom(r, y, z), law)
    return eval_u(bumped, t, x) - eval_u(base, t, x)


def add_one_factorized(cloud: AtomCloud, law: JumpLaw, xi: tuple[float, float, float], t: float, x: float) -> float:
    """``u(r, y) * v^{(r, y, z)}(t, x)`` on the unperturbed cloud."""
    r, y, z = xi
    return eval_u(solve(cloud, law), r, y) * eval_v(solve_delta(cloud, law, r, y, z), t, x)


def _time_ordered(xi1, xi2):
    if xi1[0] == xi2[0]:
        raise TiedTimes(f"both added atoms sit at time {xi1[0]}")
    return (xi1, xi2) if xi1[0] < xi2[0] else (xi2, xi1)


def add_two_cost(cloud: AtomCloud, law: JumpLaw, xi1, xi2, t: float, x: float) -> float:
    """Iterated difference ``u^{N+d1+d2} - u^{N+d1} - u^{N+d2} + u^N`` at ``(t, x)``.

    The pair is put in time order first so swapping the arguments gives the
    identical float.
    """
    first, second = _time_ordered(xi1, xi2)
    u0 = eval_u(solve(cloud, law), t, x)
    c1 = cloud.with_atom(*first)
    u1 = eval_u(solve(c1, law), t, x)
    u2 = eval_u(solve(cloud.with_atom(*second), law), t, x)
    u12 = eval_u(solve(c1.with_atom(*second), law), t, x)
    return ((u12 - u1) - u2) + u0


def add_two_factorized(cloud: AtomCloud, law: JumpLaw, xi1, xi2, t: float, x: float) -> float:
    """``u(r1, y1) v^{xi1}(r2, y2) v^{xi2}(t, x)`` with ``r1 < r2``."""
    first, second = _time_ordered(xi1, xi2)
    sol = solve(cloud, law)
    v1 = solve_delta(cloud, law, *first)
    v2 = solve_delta(cloud, law, *second)
    return eval_u(sol, first[0], first[1]) * eval_v(v1, second[0], second[1]) * eval_v(v2, t, x)


def spatial_averages(sol: FieldSolution, times, radii) -> np.ndarray:
    """``F_R(t)`` for paired arrays of times and radii.

    Exchanging the x-integral with the atom sum gives
    ``F_R(t) = sum_i phi(t, R, s_i, y_i) z_i u_i``.
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    c = sol.cloud
    for t, R in zip(times, radii):
        c.window.require_average(t, R)
    if len(c) == 0:
        return np.zeros(len(times))
    weights = c.z * sol.u_at_atoms
    kernel = phi(times[:, None], radii[:, None], c.s[None, :], c.y[None, :])
    return np.sum(kernel * weights[None, :], axis=1)


def spatial_average(sol: FieldSolution, t: float, R: float) -> float:
    return float(spatial_averages(sol, [t], [R])[0])


def spatial_average_quadrature(sol: FieldSolution, t: float, R: float) -> float:
    """``int_{-R}^{R} (u(t, x) - 1) dx`` by exact integration of the step function ``x -> u(t, x)``."""
    c = sol.cloud
    c.window.require_average(t, R)
    live = c.s < t
    reach = t - c.s[live]
    bps = np.concatenate([c.y[live] - reach, c.y[live] + reach])
    return integrate_steps(lambda x: eval_u(sol, t, x) - 1.0, -R, R, bps.tolist())
