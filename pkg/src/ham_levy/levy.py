"""Finite-activity jump intensity measures and their moment functionals.

A law here is a measure ``nu`` on the non-zero reals describing how often
(per unit space-time area) jumps of each size arrive. Moments are returned
as extended reals: a divergent integral is ``math.inf``, never an error.

Finiteness of the tail moment ``M_p`` is equivalent to the noise having a
finite ``p``-th moment, so ``tail_moment_M(law, p) < inf`` is the check to
run before asking for ``p``-th moment statistics of the solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np

from .errors import DivergentFirstMoment, InfiniteActivity, SchemaError

# Relative tolerance for the zero-mean check required by the solver.
CENTERED_RTOL = 1e-12


class JumpLaw:
    """Common interface of the built-in families."""

    family: ClassVar[str]

    @property
    def total_rate(self) -> float:
        """Total mass of the measure, events per unit space-time area."""
        raise NotImplementedError

    def moment_m(self, p: float) -> float:
        raise NotImplementedError

    def tail_moment_M(self, p: float) -> float:
        raise NotImplementedError

    def signed_first_moment(self) -> float:
        raise NotImplementedError

    @property
    def truncated_variance(self) -> float:
        """Small-jump variance discarded by a cutoff (zero unless one is applied)."""
        return 0.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class SymmetricTwoPoint(JumpLaw):
    """Jumps of size ``+a`` or ``-a`` with equal probability, total rate ``rate``."""

    a: float
    rate: float = 1.0
    family: ClassVar[str] = "symmetric-two-point"

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ValueError(f"a must be positive and finite, got {self.a}")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be positive and finite, got {self.rate}")

    @property
    def total_rate(self) -> float:
        return self.rate

    def moment_m(self, p):
        return self.rate * self.a**p

    def tail_moment_M(self, p):
        return self.rate * self.a**p if self.a > 1 else 0.0

    def signed_first_moment(self):
        return 0.0

    def sample(self, rng, size):
        signs = rng.random(size) < 0.5
        return np.where(signs, self.a, -self.a)

    def to_dict(self):
        return {"family": self.family, "a": self.a, "lambda": self.rate}


@dataclass(frozen=True)
class CenteredTwoPoint(JumpLaw):
    """Jump ``+a_plus`` with probability ``p_up``, else ``-a_minus``.

    The parameters must satisfy ``p_up * a_plus == (1 - p_up) * a_minus`` so
    that the mean jump vanishes; use :meth:`from_up` to derive ``a_minus``.
    """

    a_plus: float
    a_minus: float
    p_up: float
    rate: float = 1.0
    family: ClassVar[str] = "centered-two-point"

    def __post_init__(self):
        if not (self.a_plus > 0 and self.a_minus > 0):
            raise ValueError("a_plus and a_minus must be positive")
        if not 0 < self.p_up < 1:
            raise ValueError(f"p_up must lie in (0, 1), got {self.p_up}")
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be positive and finite, got {self.rate}")
        up = self.p_up * self.a_plus
        down = (1.0 - self.p_up) * self.a_minus
        if abs(up - down) > CENTERED_RTOL * max(up, down):
            raise ValueError(
                f"mean jump must vanish: p_up*a_plus={up!r} != (1-p_up)*a_minus={down!r}"
            )

    @classmethod
    def from_up(cls, a_plus: float, p_up: float, rate: float = 1.0) -> "CenteredTwoPoint":
        return cls(a_plus, p_up * a_plus / (1.0 - p_up), p_up, rate)

    @property
    def total_rate(self):
        return self.rate

    def moment_m(self, p):
        return self.rate * (self.p_up * self.a_plus**p + (1.0 - self.p_up) * self.a_minus**p)

    def tail_moment_M(self, p):
        total = 0.0
        if self.a_plus > 1:
            total += self.p_up * self.a_plus**p
        if self.a_minus > 1:
            total += (1.0 - self.p_up) * self.a_minus**p
        return self.rate * total

    def signed_first_moment(self):
        return self.rate * (self.p_up * self.a_plus - (1.0 - self.p_up) * self.a_minus)

    def sample(self, rng, size):
        up = rng.random(size) < self.p_up
        return np.where(up, self.a_plus, -self.a_minus)

    def to_dict(self):
        return {
            "family": self.family,
            "a_plus": self.a_plus,
            "a_minus": self.a_minus,
            "p_up": self.p_up,
            "lambda": self.rate,
        }


@dataclass(frozen=True)
class Discrete(JumpLaw):
    """Finitely many jump sizes ``z_k`` each arriving at its own rate ``rate_k``."""

    atoms: tuple[tuple[float, float], ...]
    family: ClassVar[str] = "discrete"
    _z: np.ndarray = field(init=False, repr=False, compare=False)
    _w: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        atoms = tuple((float(z), float(r)) for z, r in self.atoms)
        if not atoms:
            raise ValueError("discrete law needs at least one atom")
        for z, r in atoms:
            if z == 0 or not math.isfinite(z):
                raise ValueError(f"jump sizes must be finite and non-zero, got {z}")
            if not (r > 0 and math.isfinite(r)):
                raise ValueError(f"atom rates must be positive and finite, got {r}")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "_z", np.array([z for z, _ in atoms]))
        object.__setattr__(self, "_w", np.array([r for _, r in atoms]))

    @property
    def total_rate(self):
        return math.fsum(self._w)

    def moment_m(self, p):
        return math.fsum(r * abs(z) ** p for z, r in self.atoms)

    def tail_moment_M(self, p):
        return math.fsum(r * abs(z) ** p for z, r in self.atoms if abs(z) > 1)

    def signed_first_moment(self):
        return math.fsum(r * z for z, r in self.atoms)

    def sample(self, rng, size):
        cdf = np.cumsum(self._w) / self.total_rate
        idx = np.searchsorted(cdf, rng.random(size), side="right")
        return self._z[np.minimum(idx, len(self._z) - 1)]

    def to_dict(self):
        return {"family": self.family, "atoms": [[z, r] for z, r in self.atoms]}


def _small_piece(c: float, e: float, eps: float) -> float:
    """``2 c * int_eps^1 z^(e-1) dz`` as an extended real."""
    if c == 0:
        return 0.0
    if e > 0:
        return 2.0 * c * (1.0 - eps**e) / e
    if eps == 0:
        return math.inf
    if e == 0:
        return -2.0 * c * math.log(eps)
    return 2.0 * c * (eps**e - 1.0) / (-e)


def _tail_piece(c: float, e: float) -> float:
    """``2 c * int_1^inf z^(e-1) dz`` as an extended real."""
    if c == 0:
        return 0.0
    return 2.0 * c / (-e) if e < 0 else math.inf


@dataclass(frozen=True)
class PowerDensity(JumpLaw):
    """Symmetric density ``c1 |z|^(-a-1)`` on ``eps <= |z| <= 1`` and ``c2 |z|^(-b-1)`` beyond.

    The cutoff ``eps`` only trims the small-jump piece. With ``a >= 0`` and
    ``eps = 0`` the measure has infinite mass: moments are still available
    but the law cannot be sampled.
    """

    c1: float = 1.0
    a: float = 0.5
    c2: float = 1.0
    b: float = 3.0
    eps: float = 0.0
    family: ClassVar[str] = "power-density"

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 0 or (self.c1 == 0 and self.c2 == 0):
            raise ValueError("c1, c2 must be non-negative and not both zero")
        if not self.a < 2:
            raise ValueError(f"small-jump exponent a must be < 2, got {self.a}")
        if not self.b > 0:
            raise ValueError(f"tail exponent b must be > 0, got {self.b}")
        if not 0 <= self.eps < 1:
            raise ValueError(f"cutoff eps must lie in [0, 1), got {self.eps}")

    @property
    def small_rate(self) -> float:
        return _small_piece(self.c1, -self.a, self.eps)

    @property
    def tail_rate(self) -> float:
        return _tail_piece(self.c2, -self.b)

    @property
    def total_rate(self):
        return self.small_rate + self.tail_rate

    def moment_m(self, p):
        return _small_piece(self.c1, p - self.a, self.eps) + _tail_piece(self.c2, p - self.b)

    def small_moment(self, p: float) -> float:
        """``int_{|z| <= 1} |z|^p nu(dz)`` for the (cut-off) measure."""
        return _small_piece(self.c1, p - self.a, self.eps)

    def tail_moment_M(self, p):
        return _tail_piece(self.c2, p - self.b)

    def signed_first_moment(self):
        if math.isinf(self.moment_m(1.0)):
            raise DivergentFirstMoment("first absolute moment of the power density is infinite")
        return 0.0

    @property
    def truncated_variance(self):
        if self.c1 == 0 or self.eps == 0:
            return 0.0
        return 2.0 * self.c1 * self.eps ** (2.0 - self.a) / (2.0 - self.a)

    def sample(self, rng, size):
        lam_small, lam_tail = self.small_rate, self.tail_rate
        if math.isinf(lam_small):
            raise InfiniteActivity("power density with a >= 0 needs eps > 0 to be sampled")
        piece = rng.random(size)
        u = 1.0 - rng.random(size)  # in (0, 1]
        sign = np.where(rng.random(size) < 0.5, 1.0, -1.0)
        small = piece * (lam_small + lam_tail) < lam_small
        mag = np.empty_like(u)
        us = u[small]
        if self.a == 0:
            mag[small] = self.eps ** (1.0 - us)
        else:
            lo = self.eps ** (-self.a)
            # inverse CDF of z^(-a-1) on [eps, 1]; us = 1 maps to eps
            mag[small] = (1.0 + us * (lo - 1.0)) ** (-1.0 / self.a)
        mag[~small] = u[~small] ** (-1.0 / self.b)
        return sign * mag

    def to_dict(self):
        return {
            "family": self.family,
            "c1": self.c1,
            "exp_a": self.a,
            "c2": self.c2,
            "exp_b": self.b,
            "eps": self.eps,
        }


JumpLawSpec = JumpLaw


def moment_m(law: JumpLaw, p: float) -> float:
    """``int |z|^p nu(dz)`` for ``p >= 1``; ``math.inf`` when divergent."""
    if p < 1:
        raise ValueError(f"moment order must be >= 1, got {p}")
    return law.moment_m(p)


def tail_moment_M(law: JumpLaw, p: float) -> float:
    """``int_{|z|>1} |z|^p nu(dz)`` for ``p > 0``; ``math.inf`` when divergent."""
    if p <= 0:
        raise ValueError(f"tail moment order must be > 0, got {p}")
    return law.tail_moment_M(p)


def mean_jump(law: JumpLaw) -> float:
    """``int z nu(dz)``. Raises :class:`DivergentFirstMoment` if ``m_1`` is infinite."""
    if math.isinf(law.moment_m(1.0)):
        raise DivergentFirstMoment(f"{law.family}: m_1 is infinite")
    return law.signed_first_moment()


def is_centered(law: JumpLaw) -> bool:
    try:
        mu = mean_jump(law)
    except DivergentFirstMoment:
        return False
    return abs(mu) <= CENTERED_RTOL * max(1.0, law.moment_m(1.0))


@dataclass(frozen=True)
class AssumptionReport:
    m2_finite: bool
    clt_ok: bool
    centered: bool


def check_assumptions(law: JumpLaw, alpha: float) -> AssumptionReport:
    """Moment conditions behind the quantitative CLT at exponent ``alpha``."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    m2 = law.moment_m(2.0)
    clt = math.isfinite(law.moment_m(2.0 + 2.0 * alpha)) and math.isfinite(
        law.moment_m(1.0 + alpha)
    )
    return AssumptionReport(m2_finite=0 < m2 < math.inf, clt_ok=clt, centered=is_centered(law))


def sample_jumps(law: JumpLaw, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` i.i.d. draws from ``nu / total_rate``."""
    if not math.isfinite(law.total_rate):
        raise InfiniteActivity(f"{law.family} has infinite total rate")
    return law.sample(rng, size)


def sample_jump(law: JumpLaw, rng: np.random.Generator) -> float:
    return float(sample_jumps(law, rng, 1)[0])


_LAW_KEYS = {
    "symmetric-two-point": {"a", "lambda"},
    "centered-two-point": {"a_plus", "a_minus", "p_up", "lambda"},
    "discrete": {"atoms"},
    "power-density": {"c1", "exp_a", "c2", "exp_b", "eps"},
}


def law_from_dict(block: dict[str, Any], path: tuple = ("law",)) -> JumpLaw:
    """Build a law from its configuration block; raises :class:`SchemaError`."""
    family = block.get("family")
    if family not in _LAW_KEYS:
        raise SchemaError(f"unknown family {family!r}", (*path, "family"))
    extra = set(block) - _LAW_KEYS[family] - {"family"}
    if extra:
        raise SchemaError(f"unknown key {sorted(extra)[0]!r} for family {family}", (*path, sorted(extra)[0]))
    try:
        if family == "symmetric-two-point":
            return SymmetricTwoPoint(block.get("a", 1.0), block.get("lambda", 1.0))
        if family == "centered-two-point":
            if "a_minus" in block:
                return CenteredTwoPoint(
                    block["a_plus"], block["a_minus"], block["p_up"], block.get("lambda", 1.0)
                )
            return CenteredTwoPoint.from_up(block["a_plus"], block["p_up"], block.get("lambda", 1.0))
        if family == "discrete":
            return Discrete(tuple(tuple(pair) for pair in block["atoms"]))
        return PowerDensity(
            block.get("c1", 1.0),
            block.get("exp_a", 0.5),
            block.get("c2", 1.0),
            block.get("exp_b", 3.0),
            block.get("eps", 0.0),
        )
    except KeyError as exc:
        raise SchemaError(f"missing key {exc.args[0]!r}", (*path, exc.args[0])) from None
    except (TypeError, ValueError) as exc:
        raise SchemaError(str(exc), path) from None


def builtin_laws() -> dict[str, JumpLaw]:
    """One centred, finite-activity representative of each family."""
    return {
        "symmetric-two-point": SymmetricTwoPoint(1.0, 1.0),
        "centered-two-point": CenteredTwoPoint.from_up(1.0, 0.3, 1.0),
        "discrete": Discrete(((2.0, 1.0), (-1.0, 2.0))),
        "power-density": PowerDensity(c1=1.0, a=0.5, c2=1.0, b=4.5, eps=0.1),
    }
