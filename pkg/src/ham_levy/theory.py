"""Deterministic targets: limiting covariance, cosh second moment, chaos terms.

Second moments of the solution depend on the noise only through
``m2 = int z^2 nu(dz)``, so they coincide with those of the Gaussian
equation ``U_tt = U_xx + sqrt(m2) U W'``. That gives

* ``E[u(t, x)^2] = cosh(t sqrt(m2 / 2))``,
* ``Cov(F_R(t), F_R(s)) / R -> 2 m2 int_0^{t^s} (t-r)(s-r) cosh(r sqrt(m2/2)) dr``,
* at finite ``R`` the exact covariance
  ``m2 int_0^{t^s} cosh(r sqrt(m2/2)) int_R phi_{t,R} phi_{s,R} dy dr``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import phi, phi_breakpoints
from .levy import JumpLaw
from .quadrature import DEFAULT_QUAD, QuadConfig, integrate


@dataclass(frozen=True)
class CovarianceModel:
    m2: float
    quad: QuadConfig = DEFAULT_QUAD

    def __post_init__(self):
        if not 0 < self.m2 < math.inf:
            raise ValueError(f"m2 must lie in (0, inf), got {self.m2}")

    @classmethod
    def from_law(cls, law: JumpLaw, quad: QuadConfig = DEFAULT_QUAD) -> "CovarianceModel":
        return cls(law.moment_m(2.0), quad)

    @property
    def rate(self) -> float:
        """Growth rate ``sqrt(m2 / 2)`` of the cosh moment."""
        return math.sqrt(self.m2 / 2.0)


def sigma_limit(model: CovarianceModel, t: float, s: float) -> float:
    """Limit of ``Cov(F_R(t), F_R(s)) / R`` as ``R -> inf``."""
    if t < 0 or s < 0:
        raise ValueError("times must be non-negative")
    top = min(t, s)
    if top == 0:
        return 0.0
    k = model.rate
    val = integrate(lambda r: (t - r) * (s - r) * math.cosh(r * k), 0.0, top, (), model.quad)
    return 2.0 * model.m2 * val


def second_moment_theory(model: CovarianceModel, t: float) -> float:
    """``E[u(t, x)^2]``, independent of ``x``."""
    if t < 0:
        raise ValueError("time must be non-negative")
    return math.cosh(t * model.rate)


def _phi_product_slice(t: float, s: float, R: float, r: float, quad: QuadConfig) -> float:
    bps = sorted(set(phi_breakpoints(t, R, r)) | set(phi_breakpoints(s, R, r)))
    if not bps:
        return 0.0
    return integrate(lambda y: phi(t, R, r, y) * phi(s, R, r, y), bps[0], bps[-1], bps, quad)


def finite_r_covariance(model: CovarianceModel, t: float, s: float, R: float) -> float:
    """Exact ``Cov(F_R(t), F_R(s))`` at finite ``R`` (not divided by ``R``)."""
    top = min(t, s)
    if top <= 0:
        return 0.0
    k = model.rate
    kinks = [c for c in (t - R, s - R) if 0 < c < top]
    val = integrate(
        lambda r: math.cosh(r * k) * _phi_product_slice(t, s, R, r, model.quad), 0.0, top, kinks, model.quad
    )
    return model.m2 * val


@dataclass(frozen=True)
class ChaosTermEstimate:
    n: int
    t: float
    estimate: float
    std_error: float
    n_samples: int


def chaos_term_exact(model: CovarianceModel, n: int, t: float) -> float:
    """Taylor coefficient ``m2^n t^(2n) / (2^n (2n)!)`` of the cosh moment."""
    return model.m2**n * t ** (2 * n) / (2.0**n * math.factorial(2 * n))


def chaos_term_norm(
    model: CovarianceModel, n: int, t: float, mc: int = 1_000_000, rng: np.random.Generator | None = None
) -> ChaosTermEstimate:
    """Monte Carlo estimate of the ``n``-th chaos contribution to ``E[u(t, 0)^2]``.

    The kernel is supported on one ordering of the times, so the
    symmetrised norm times ``n!`` equals the plain ``L^2`` norm over the
    simplex ``0 < r_1 < ... < r_n < t``. The space integrals are done in
    closed form, each propagator square contributing half its time gap;
    times are drawn as sorted uniforms (simplex volume ``t^n / n!``).
    ``n = 1`` is integrated exactly.
    """
    if n < 1:
        raise ValueError("chaos order must be >= 1")
    if t <= 0:
        return ChaosTermEstimate(n, t, 0.0, 0.0, 0)
    if n == 1:
        return ChaosTermEstimate(1, t, model.m2 * t * t / 4.0, 0.0, 0)
    if rng is None:
        rng = np.random.default_rng()
    times = np.sort(rng.random((mc, n)), axis=1) * t
    ends = np.concatenate([times[:, 1:], np.full((mc, 1), t)], axis=1)
    weights = np.prod(0.5 * (ends - times), axis=1)
    scale = model.m2**n * t**n / math.factorial(n)
    est = scale * float(np.mean(weights))
    se = scale * float(np.std(weights, ddof=1)) / math.sqrt(mc)
    return ChaosTermEstimate(n, t, est, se, mc)


def cosh_tail_bound(model: CovarianceModel, t: float, n_min: int) -> float:
    """Upper bound for ``sum_{n >= n_min}`` of the cosh Taylor terms (Lagrange remainder)."""
    x = t * model.rate
    return x ** (2 * n_min) / math.factorial(2 * n_min) * math.cosh(x)


def clt_rate_prediction(alpha: float) -> float:
    """Exponent ``alpha / (1 + alpha)`` of the predicted ``R^-exponent`` CLT rate."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return alpha / (1.0 + alpha)


# Poincare-type spatial kernels. With psi(y) = int_{-R}^{R} G_t(x - y) dx
# (= phi(t, R, 0, y)) and J(y1) = int psi(y2)^2 G_t(y1 - y2) dy2:
#   I1 = int J(y1)^(1 + alpha) dy1          (bounded by 2 t^(3 + 3 alpha) R)
#   I2 = int J(y1) dy1                       (the same kernel with the power removed)
#   I3 = int psi(y)^(q + 1) dy, q = 1 + 2 alpha (alpha <= 1/2) else 2
# The remaining kernels of the bound reduce to these up to constants.


@dataclass(frozen=True)
class PoincareReport:
    t: float
    R: float
    alpha: float
    I1: float
    I2: float
    I3: float
    I1_bound: float
    ratio_I1: float
    ratio_I2: float
    ratio_I3: float


def _psi_sq_cumulative(t: float, R: float, quad: QuadConfig):
    bps = list(phi_breakpoints(t, R, 0.0))
    lo, hi = bps[0], bps[-1]
    pieces = [integrate(lambda y: phi(t, R, 0.0, y) ** 2, a, b, (), quad) for a, b in zip(bps[:-1], bps[1:])]
    prefix = np.concatenate([[0.0], np.cumsum(pieces)])

    def Q(y: float) -> float:
        if y <= lo:
            return 0.0
        if y >= hi:
            return float(prefix[-1])
        k = int(np.searchsorted(bps, y, side="right")) - 1
        return float(prefix[k]) + integrate(lambda w: phi(t, R, 0.0, w) ** 2, bps[k], y, (), quad)

    return Q, bps


def _poincare_values(t: float, R: float, alpha: float, quad: QuadConfig) -> tuple[float, float, float]:
    Q, bps = _psi_sq_cumulative(t, R, quad)

    def J(y1: float) -> float:
        return 0.5 * (Q(y1 + t) - Q(y1 - t))

    outer = sorted({b + d for b in bps for d in (-t, t)})
    lo, hi = outer[0], outer[-1]
    I1 = integrate(lambda y: J(y) ** (1.0 + alpha), lo, hi, outer, quad)
    I2 = integrate(J, lo, hi, outer, quad)
    q = 1.0 + 2.0 * alpha if alpha <= 0.5 else 2.0
    I3 = integrate(lambda y: phi(t, R, 0.0, y) ** (q + 1.0), bps[0], bps[-1], bps, quad)
    return I1, I2, I3


def poincare_scaling_integrals(
    t: float, R: float, alpha: float, quad: QuadConfig = DEFAULT_QUAD
) -> PoincareReport:
    """The three spatial kernels at ``R`` and ``2R`` and their doubling ratios."""
    if not (t > 0 and R > 0):
        raise ValueError("t and R must be positive")
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    a = _poincare_values(t, R, alpha, quad)
    b = _poincare_values(t, 2.0 * R, alpha, quad)
    return PoincareReport(
        t, R, alpha, *a,
        I1_bound=2.0 * t ** (3.0 + 3.0 * alpha) * R,
        ratio_I1=b[0] / a[0], ratio_I2=b[1] / a[1], ratio_I3=b[2] / a[2],
    )
