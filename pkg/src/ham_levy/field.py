"""Light-cone geometry of the 1D wave propagator and Poisson atom clouds.

The fundamental solution is ``G_t(x) = 1/2 * 1{|x| < t}`` (zero for
``t <= 0``). Simulations live on trapezoidal windows
``{(s, y): 0 <= s <= t_max, |y| <= Y0 + t_max - s}`` which are closed under
taking backward light cones, so every atom that can influence a target is
sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import EmptyTargets, OutsideWindow, TiedTimes
from .levy import JumpLaw, sample_jumps
from .quadrature import DEFAULT_QUAD, QuadConfig, integrate

# Relative slack when checking that a cone fits inside a window; absorbs the
# rounding in Y0 = |x| + t - t_max.
_COVER_RTOL = 1e-12


def green(t, x):
    """Wave propagator ``1/2 * 1{|x| < t}``; vectorises over numpy inputs."""
    if np.ndim(t) == 0 and np.ndim(x) == 0:
        return 0.5 if (t > 0 and abs(x) < t) else 0.0
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.where((t > 0) & (np.abs(x) < t), 0.5, 0.0)


def green_mass(t: float) -> float:
    """``int G_t(y) dy``, equal to ``t`` for ``t > 0``."""
    return max(t, 0.0)


def phi(t, R, r, y):
    """Spatially integrated propagator ``int_{-R}^{R} G_{t-r}(x - y) dx``.

    Half the length of ``[-R, R]`` intersected with the forward cone
    section ``(y - (t - r), y + (t - r))``; zero when ``r >= t``.
    """
    a = np.subtract(t, r)
    lo = np.maximum(-R, np.subtract(y, a))
    hi = np.minimum(R, np.add(y, a))
    out = 0.5 * np.maximum(hi - lo, 0.0)
    out = np.where(a > 0, out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def phi_breakpoints(t: float, R: float, r: float) -> tuple[float, ...]:
    """Kinks of ``y -> phi(t, R, r, y)``; the function is linear in between."""
    a = t - r
    if a <= 0:
        return ()
    return (-R - a, -abs(R - a), abs(R - a), R + a)


@dataclass(frozen=True)
class SpaceTimeWindow:
    """Symmetric trapezoid with half-width ``y0 + t_max - s`` at time ``s``."""

    t_max: float
    y0: float = 0.0

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError(f"t_max must be positive, got {self.t_max}")
        if self.y0 < 0:
            raise ValueError(f"base half-width must be >= 0, got {self.y0}")

    def half_width_at(self, s: float) -> float:
        return self.y0 + (self.t_max - s)

    def area(self) -> float:
        return 2.0 * self.y0 * self.t_max + self.t_max**2

    def contains(self, s: float, y: float) -> bool:
        return 0.0 <= s <= self.t_max and abs(y) <= self.half_width_at(s)

    def covers_point(self, t: float, x: float) -> bool:
        """Whether the backward cone of ``(t, x)`` lies inside the window."""
        if t <= 0:
            return True
        reach = self.y0 + self.t_max
        return t <= self.t_max * (1 + _COVER_RTOL) and abs(x) + t <= reach * (1 + _COVER_RTOL)

    def covers_average(self, t: float, R: float) -> bool:
        """Whether the support of ``phi(t, R, ., .)`` lies inside the window."""
        return self.covers_point(t, R)

    def require_point(self, t: float, x: float) -> None:
        if not self.covers_point(t, x):
            raise OutsideWindow(f"backward cone of (t={t}, x={x}) leaves {self}")

    def require_average(self, t: float, R: float) -> None:
        if not self.covers_average(t, R):
            raise OutsideWindow(f"support of the R={R} average at t={t} leaves {self}")


class Atom(NamedTuple):
    s: float
    y: float
    z: float


class PointTarget(NamedTuple):
    t: float
    x: float


class AverageTarget(NamedTuple):
    t: float
    R: float


def window_for_targets(targets: Iterable[PointTarget | AverageTarget]) -> SpaceTimeWindow:
    """Smallest symmetric trapezoid covering every target's domain of dependence."""
    targets = list(targets)
    if not targets:
        raise EmptyTargets("at least one target is required")
    t_max = max(tg.t for tg in targets)
    reach = 0.0
    for tg in targets:
        if tg.t <= 0:
            raise ValueError(f"target times must be positive, got {tg.t}")
        if isinstance(tg, AverageTarget):
            if tg.R <= 0:
                raise ValueError(f"averaging radius must be positive, got {tg.R}")
            reach = max(reach, tg.R + tg.t)
        else:
            reach = max(reach, abs(tg.x) + tg.t)
    return SpaceTimeWindow(t_max, max(reach - t_max, 0.0))


@dataclass(frozen=True, eq=False)
class AtomCloud:
    """Atoms of one Poisson realisation, strictly increasing in time.

    ``s``, ``y``, ``z`` are read-only float arrays of equal length.
    """

    window: SpaceTimeWindow
    s: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for name in ("s", "y", "z"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.s) == len(self.y) == len(self.z)):
            raise ValueError("s, y, z must have equal length")
        if len(self.s) > 1 and not np.all(np.diff(self.s) > 0):
            raise TiedTimes("atom times must be strictly increasing")

    @classmethod
    def from_atoms(cls, window: SpaceTimeWindow, atoms: Sequence[tuple[float, float, float]]) -> "AtomCloud":
        atoms = sorted(atoms, key=lambda a: a[0])
        arr = np.array(atoms, dtype=float).reshape(-1, 3)
        for s, y, z in arr:
            if not window.contains(s, y):
                raise OutsideWindow(f"atom ({s}, {y}) lies outside {window}")
            if z == 0:
                raise ValueError("jump sizes must be non-zero")
        return cls(window, arr[:, 0], arr[:, 1], arr[:, 2])

    def __len__(self) -> int:
        return len(self.s)

    @property
    def atoms(self) -> list[Atom]:
        return [Atom(*v) for v in zip(self.s.tolist(), self.y.tolist(), self.z.tolist())]

    def with_atom(self, s: float, y: float, z: float) -> "AtomCloud":
        """New cloud with one extra atom inserted in time order."""
        if not self.window.contains(s, y):
            raise OutsideWindow(f"atom ({s}, {y}) lies outside {self.window}")
        if z == 0:
            raise ValueError("jump sizes must be non-zero")
        k = int(np.searchsorted(self.s, s))
        if (k < len(self.s) and self.s[k] == s) or (k > 0 and self.s[k - 1] == s):
            raise TiedTimes(f"an atom already sits at time {s}")
        return AtomCloud(
            self.window,
            np.insert(self.s, k, s),
            np.insert(self.y, k, y),
            np.insert(self.z, k, z),
        )


def _sample_times(window: SpaceTimeWindow, u: np.ndarray) -> np.ndarray:
    # Density of s is proportional to y0 + (t_max - s); invert in w = t_max - s.
    T, y0 = window.t_max, window.y0
    mass = y0 * T + 0.5 * T * T
    w = np.sqrt(y0 * y0 + 2.0 * u * mass) - y0
    return T - np.minimum(w, T)


def sample_cloud(window: SpaceTimeWindow, law: JumpLaw, rng: np.random.Generator) -> AtomCloud:
    """Poisson(``total_rate * area``) atoms placed uniformly on the window."""
    mean = law.total_rate * window.area()
    k = int(rng.poisson(mean)) if mean > 0 else 0
    s = _sample_times(window, rng.random(k))
    y = (2.0 * rng.random(k) - 1.0) * (window.y0 + window.t_max - s)
    z = sample_jumps(law, rng, k)
    order = np.argsort(s, kind="stable")
    # Exact time ties break the strict ordering: re-draw the later-sampled atom.
    while k > 1:
        ss = s[order]
        dup = np.nonzero(np.diff(ss) == 0)[0]
        if len(dup) == 0:
            break
        for i in dup:
            j = max(order[i], order[i + 1])
            s[j] = _sample_times(window, rng.random(1))[0]
            y[j] = (2.0 * rng.random() - 1.0) * (window.y0 + window.t_max - s[j])
        order = np.argsort(s, kind="stable")
    return AtomCloud(window, s[order], y[order], z[order])


@dataclass(frozen=True)
class PhiIntegralReport:
    t: float
    s: float
    R: float
    r: float | None
    diff_integral: float | None
    diff_exact: float | None
    sq_integral: float
    sq_bound: float
    fourth_integral: float
    fourth_bound: float

    @property
    def ok(self) -> bool:
        tol = 1e-9
        eq = self.diff_integral is None or abs(self.diff_integral - self.diff_exact) <= tol
        return eq and self.sq_integral <= self.sq_bound + tol and self.fourth_integral <= self.fourth_bound + tol


def _phi_power_slice(t: float, R: float, r: float, power: int, quad: QuadConfig) -> float:
    bps = phi_breakpoints(t, R, r)
    if not bps:
        return 0.0
    return integrate(lambda y: phi(t, R, r, y) ** power, bps[0], bps[-1], bps, quad)


def lemma24_report(
    t: float, s: float, R: float, r: float | None = None, quad: QuadConfig = DEFAULT_QUAD
) -> PhiIntegralReport:
    """Quadrature values of three ``phi`` integrals against their closed forms.

    * ``int_R [phi_{t,R} - phi_{s,R}](r, y) dy`` (equals ``2 (t - s) R`` for ``0 < r <= s``),
    * ``int_s^t int_R phi_{t,R}^2`` (at most ``4/3 R (t - s)^3``),
    * ``int_s^t int_R phi_{t,R}^4`` (at most ``2 R^2 (t - s)^4``).

    ``r`` defaults to ``s / 2``; the first item is skipped when ``s == 0``.
    """
    if not (0 <= s <= t and R > 0):
        raise ValueError("need 0 <= s <= t and R > 0")
    diff = exact = None
    if s > 0:
        r = s / 2 if r is None else r
        if not 0 < r <= s:
            raise ValueError("r must lie in (0, s]")
        bps = sorted(set(phi_breakpoints(t, R, r)) | set(phi_breakpoints(s, R, r)))
        diff = integrate(lambda y: phi(t, R, r, y) - phi(s, R, r, y), bps[0], bps[-1], bps, quad)
        exact = 2.0 * (t - s) * R
    else:
        r = None
    # y-integral is piecewise polynomial in r with a kink where t - r = R.
    kinks = [t - R] if s < t - R < t else []
    sq = integrate(lambda rr: _phi_power_slice(t, R, rr, 2, quad), s, t, kinks, quad)
    fourth = integrate(lambda rr: _phi_power_slice(t, R, rr, 4, quad), s, t, kinks, quad)
    return PhiIntegralReport(
        t, s, R, r, diff, exact,
        sq, 4.0 / 3.0 * R * (t - s) ** 3,
        fourth, 2.0 * R**2 * (t - s) ** 4,
    )
