"""Randomised check of the derivative factorisations on small clouds.

For every case a random trapezoid (expected atom count at most
``max_mean_atoms``) is filled with a Poisson cloud, one or two extra atoms
are drawn inside it and a target point is chosen, half of the time inside
the forward cone of the first added atom. Each case records

* ``one``: |add-one cost - u(r, y) v(t, x)| / (1 + |u(r, y) v(t, x)|),
* ``two``: the same for the second-order difference and its triple product,
* ``outside``: |add-one cost| at a target outside the added atom's cone
  (must be exactly 0),
* ``half``: |G v - v / 2| at the target (must be exactly 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import SpaceTimeWindow, green, sample_cloud
from .levy import JumpLaw, sample_jumps
from .rng import path_generator
from .solver import (
    add_one_cost,
    add_one_factorized,
    add_two_cost,
    add_two_factorized,
    half_identity_residual,
    solve_delta,
)

ONE_COST_TOL = 1e-12
TWO_COST_TOL = 1e-12


@dataclass(frozen=True)
class FuzzCase:
    index: int
    atoms: int
    one_cost: float
    one_factorized: float
    one_residual: float
    two_cost: float
    two_factorized: float
    two_residual: float
    outside_value: float
    half_residual: float


@dataclass(frozen=True)
class FuzzReport:
    law: str
    cases: tuple[FuzzCase, ...]

    @property
    def max_one_residual(self) -> float:
        return max(c.one_residual for c in self.cases)

    @property
    def max_two_residual(self) -> float:
        return max(c.two_residual for c in self.cases)

    @property
    def max_outside(self) -> float:
        return max(abs(c.outside_value) for c in self.cases)

    @property
    def max_half(self) -> float:
        return max(abs(c.half_residual) for c in self.cases)

    @property
    def nontrivial(self) -> int:
        return sum(1 for c in self.cases if c.one_factorized != 0 and c.two_factorized != 0)

    @property
    def passed(self) -> bool:
        return (
            self.max_one_residual <= ONE_COST_TOL
            and self.max_two_residual <= TWO_COST_TOL
            and self.max_outside == 0.0
            and self.max_half == 0.0
        )


def _random_window(law: JumpLaw, rng: np.random.Generator, max_mean_atoms: float) -> SpaceTimeWindow:
    T = rng.uniform(0.5, 2.0)
    y0 = rng.uniform(0.0, 3.0)
    budget = rng.uniform(1.0, max_mean_atoms) / law.total_rate
    w = SpaceTimeWindow(T, y0)
    if w.area() > budget:
        scale = np.sqrt(budget / w.area())
        w = SpaceTimeWindow(T * scale, y0 * scale)
    return w


def _point_in(window: SpaceTimeWindow, rng, s_lo: float = 0.0) -> tuple[float, float]:
    s = rng.uniform(s_lo, window.t_max)
    return s, rng.uniform(-1.0, 1.0) * window.half_width_at(s)


def _point_in_cone(window: SpaceTimeWindow, rng, r: float, y: float) -> tuple[float, float]:
    t = rng.uniform(r, window.t_max)
    half = window.half_width_at(t)
    lo, hi = max(-half, y - (t - r)), min(half, y + (t - r))
    return t, rng.uniform(lo, hi)


def _point_outside_cone(window: SpaceTimeWindow, rng, r: float, y: float) -> tuple[float, float]:
    for _ in range(1000):
        t, x = _point_in(window, rng)
        if green(t - r, x - y) == 0.0:
            return t, x
    return r, y  # the source point itself is never strictly inside its cone


def identity_fuzz(
    law: JumpLaw, cases: int = 1000, seed: int = 0, max_mean_atoms: float = 50.0, name: str | None = None
) -> FuzzReport:
    out = []
    for i in range(cases):
        rng = path_generator(seed, i, stream=7)
        window = _random_window(law, rng, max_mean_atoms)
        cloud = sample_cloud(window, law, rng)
        z1, z2 = sample_jumps(law, rng, 2)
        r1, y1 = _point_in(window, rng, 0.0)
        r1 *= 0.8
        y1 = np.clip(y1, -window.half_width_at(r1), window.half_width_at(r1))
        if rng.random() < 0.5:
            r2, y2 = _point_in_cone(window, rng, r1, y1)
        else:
            r2, y2 = _point_in(window, rng)
        while r2 == r1 or np.any(cloud.s == r1) or np.any(cloud.s == r2):
            r2 = rng.uniform(0, window.t_max)
            y2 = rng.uniform(-1, 1) * window.half_width_at(r2)
        xi1, xi2 = (r1, y1, z1), (r2, y2, z2)
        later = max(r1, r2)
        if rng.random() < 0.5:
            anchor = xi1 if r1 > r2 else xi2
            t, x = _point_in_cone(window, rng, anchor[0], anchor[1])
        else:
            t, x = _point_in(window, rng, later)

        d1 = add_one_cost(cloud, law, xi1, t, x)
        f1 = add_one_factorized(cloud, law, xi1, t, x)
        d2 = add_two_cost(cloud, law, xi1, xi2, t, x)
        f2 = add_two_factorized(cloud, law, xi1, xi2, t, x)
        to, xo = _point_outside_cone(window, rng, r1, y1)
        outside = add_one_cost(cloud, law, xi1, to, xo)
        delta = solve_delta(cloud, law, *xi1)
        half = half_identity_residual(delta, t, x) if t > r1 else 0.0
        out.append(
            FuzzCase(
                i, len(cloud),
                d1, f1, abs(d1 - f1) / (1.0 + abs(f1)),
                d2, f2, abs(d2 - f2) / (1.0 + abs(f2)),
                outside, half,
            )
        )
    return FuzzReport(name or law.family, tuple(out))
