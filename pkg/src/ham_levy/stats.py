"""Monte Carlo harness and the statistical diagnostics run on its output.

Every path draws its cloud from its own keyed Philox stream (see ``rng``),
so a :class:`SampleSet` is a pure function of its :class:`McConfig`, no
matter how many worker threads produced it.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special, stats as sps

from .errors import DegenerateSample, NonCenteredLaw
from .field import AverageTarget, PointTarget, sample_cloud, window_for_targets
from .levy import JumpLaw, is_centered
from .rng import path_generator
from .solver import eval_u, solve, spatial_averages
from .theory import CovarianceModel, finite_r_covariance, sigma_limit

# sd of the limiting Kolmogorov distribution: Var = pi^2/12 - pi/2 (ln 2)^2
KOLMOGOROV_SD = math.sqrt(math.pi**2 / 12.0 - 0.5 * math.pi * math.log(2.0) ** 2)

_CHUNK = 256


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("HAM_LEVY_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class McConfig:
    master_seed: int
    n_paths: int
    law: JumpLaw
    times: tuple[float, ...] = ()
    radii: tuple[float, ...] = ()
    point_probes: tuple[tuple[float, float], ...] = ()
    threads: int = 1
    stream: int = 0

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        object.__setattr__(self, "point_probes", tuple((float(t), float(x)) for t, x in self.point_probes))
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if any(t <= 0 for t in self.times) or any(r <= 0 for r in self.radii):
            raise ValueError("target times and radii must be positive")
        if any(t <= 0 for t, _ in self.point_probes):
            raise ValueError("probe times must be positive")
        if bool(self.times) != bool(self.radii):
            raise ValueError("spatial averages need both times and radii")

    @property
    def average_targets(self) -> list[AverageTarget]:
        return [AverageTarget(t, R) for R in self.radii for t in self.times]

    @property
    def point_targets(self) -> list[PointTarget]:
        return [PointTarget(t, x) for t, x in self.point_probes]


def _fmt(v: float) -> str:
    return format(v, "g")


def average_column(t: float, R: float) -> str:
    return f"F_t{_fmt(t)}_R{_fmt(R)}"


def probe_column(t: float, x: float) -> str:
    return f"u_t{_fmt(t)}_x{_fmt(x)}"


@dataclass(frozen=True, eq=False)
class SampleSet:
    """One row per path: ``F_R(t)`` for every (t, R) then ``u(t, x)`` for every probe."""

    config: McConfig
    columns: tuple[str, ...]
    data: np.ndarray
    mean_atoms: float = field(default=0.0)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def F(self, t: float, R: float) -> np.ndarray:
        return self.column(average_column(t, R))

    def u(self, t: float, x: float) -> np.ndarray:
        return self.column(probe_column(t, x))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(["path", *self.columns])
        for i, row in enumerate(self.data):
            writer.writerow([i, *(format(v, ".17g") for v in row)])
        return buf.getvalue()


def run_mc(cfg: McConfig) -> SampleSet:
    """Simulate ``cfg.n_paths`` independent clouds and record every target."""
    if not is_centered(cfg.law):
        raise NonCenteredLaw(f"{cfg.law.family} law is not centred")
    avg = cfg.average_targets
    pts = cfg.point_targets
    window = window_for_targets([*avg, *pts])
    a_t = np.array([a.t for a in avg])
    a_R = np.array([a.R for a in avg])
    columns = tuple(
        [average_column(a.t, a.R) for a in avg] + [probe_column(p.t, p.x) for p in pts]
    )
    data = np.empty((cfg.n_paths, len(columns)))
    atoms = np.zeros(cfg.n_paths, dtype=np.int64)

    def work(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            rng = path_generator(cfg.master_seed, i, cfg.stream)
            cloud = sample_cloud(window, cfg.law, rng)
            sol = solve(cloud, cfg.law)
            row = data[i]
            if len(avg):
                row[: len(avg)] = spatial_averages(sol, a_t, a_R)
            for k, p in enumerate(pts):
                row[len(avg) + k] = eval_u(sol, p.t, p.x)
            atoms[i] = len(cloud)

    chunks = [(lo, min(lo + _CHUNK, cfg.n_paths)) for lo in range(0, cfg.n_paths, _CHUNK)]
    threads = max(1, int(cfg.threads))
    if threads == 1:
        for lo, hi in chunks:
            work(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for fut in [pool.submit(work, lo, hi) for lo, hi in chunks]:
                fut.result()
    return SampleSet(cfg, columns, data, float(atoms.mean()))


# -- jackknife -----------------------------------------------------------------


def _loo_mean(x: np.ndarray) -> np.ndarray:
    n = len(x)
    return (x.sum() - x) / (n - 1)


def jackknife_se(loo_values: np.ndarray) -> float:
    """Delete-one jackknife standard error from the leave-one-out estimates."""
    n = len(loo_values)
    return math.sqrt((n - 1) / n * float(np.sum((loo_values - loo_values.mean()) ** 2)))


def mean_with_se(x) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def _loo_cov(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    n = len(x)
    xc = x - x.mean()
    yc = y - y.mean()
    mx, my, mxy = _loo_mean(xc), _loo_mean(yc), _loo_mean(xc * yc)
    return (mxy - mx * my) * (n - 1) / (n - 2)


def covariance_with_se(x, y) -> tuple[float, float]:
    """Unbiased sample covariance and its jackknife standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise DegenerateSample("need at least 3 paths for a jackknife covariance")
    full = float(np.cov(x, y, ddof=1)[0, 1])
    return full, jackknife_se(_loo_cov(x, y))


def variance_with_se(x) -> tuple[float, float]:
    return covariance_with_se(x, x)


def variance_ratio_with_se(x, y, scale: float = 1.0) -> tuple[float, float]:
    """``scale * Var(x) / Var(y)`` for paired samples, with jackknife SE."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    full = scale * float(np.var(x, ddof=1) / np.var(y, ddof=1))
    return full, jackknife_se(scale * _loo_cov(x, x) / _loo_cov(y, y))


# -- distances to the standard normal -----------------------------------------


@dataclass(frozen=True)
class DistanceReport:
    d_kol: float
    d_w1: float
    normalization: str
    n: int

    @property
    def kol_se(self) -> float:
        return ks_standard_error(self.n)


def ks_standard_error(n: int) -> float:
    return KOLMOGOROV_SD / math.sqrt(n)


def _standardize(samples, normalization: str, sd: float | None) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if len(x) < 2:
        raise DegenerateSample("need at least 2 samples")
    if normalization == "sample-sd":
        spread = float(x.std(ddof=1))
        if spread == 0:
            raise DegenerateSample("sample standard deviation is zero")
        return (x - x.mean()) / spread
    if normalization == "theoretical-sd":
        if sd is None or not sd > 0:
            raise ValueError("theoretical-sd normalisation needs a positive sd")
        return x / sd
    raise ValueError(f"unknown normalisation {normalization!r}")


def ks_distance(samples, normalization: str = "sample-sd", sd: float | None = None) -> float:
    """``sup_x |F_n(x) - Phi(x)|`` of the standardised sample, evaluated exactly at the jumps."""
    x = np.sort(_standardize(samples, normalization, sd))
    n = len(x)
    cdf = special.ndtr(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def _phi_antiderivative(x):
    # d/dx [x Phi(x) + phi(x)] = Phi(x)
    return x * special.ndtr(x) + np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def w1_distance(samples, normalization: str = "sample-sd", sd: float | None = None) -> float:
    """``int |F_n(x) - Phi(x)| dx`` integrated exactly between consecutive order statistics."""
    x = np.sort(_standardize(samples, normalization, sd))
    n = len(x)
    left = float(_phi_antiderivative(x[0]))
    right = float(_phi_antiderivative(-x[-1]))
    a, b = x[:-1], x[1:]
    c = np.arange(1, n) / n
    cross = np.clip(special.ndtri(c), a, b)
    Pa, Pb, Pc = _phi_antiderivative(a), _phi_antiderivative(b), _phi_antiderivative(cross)
    below = c * (cross - a) - (Pc - Pa)
    above = (Pb - Pc) - c * (b - cross)
    return left + right + math.fsum(below) + math.fsum(above)


def distance_report(samples, normalization: str = "sample-sd", sd: float | None = None) -> DistanceReport:
    return DistanceReport(
        ks_distance(samples, normalization, sd),
        w1_distance(samples, normalization, sd),
        normalization,
        len(samples),
    )


def shape_stats(samples) -> tuple[float, float]:
    """Sample skewness and excess kurtosis."""
    x = np.asarray(samples, dtype=float)
    return float(sps.skew(x)), float(sps.kurtosis(x))


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` on ``log x``."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])


# -- diagnostics ---------------------------------------------------------------


def variance_diagnostic(sset: SampleSet, model: CovarianceModel) -> list[dict]:
    """Variance, covariance and LLN rows for every recorded (t, R).

    Columns: ``kind`` (var / cov / lln), ``t``, ``s``, ``R``, ``estimate``,
    ``se``, ``target`` (R -> inf limit, or the 1/R prediction for ``lln``),
    ``finite_r_target`` (exact at this R) and ``z = (estimate - target) / se``.
    """
    cfg = sset.config
    if len(cfg.radii) < 2:
        raise ValueError("variance diagnostic needs at least two radii")
    rows = []
    times = sorted(cfg.times)
    for R in cfg.radii:
        for i, t in enumerate(times):
            Ft = sset.F(t, R)
            var, se = variance_with_se(Ft)
            lim = sigma_limit(model, t, t)
            rows.append(_row("var", t, t, R, var / R, se / R, lim, finite_r_covariance(model, t, t, R) / R))
            rows.append(_row("lln", t, t, R, var / R**2, se / R**2, lim / R, finite_r_covariance(model, t, t, R) / R**2))
            for s in times[i + 1:]:
                cov, cse = covariance_with_se(Ft, sset.F(s, R))
                rows.append(
                    _row("cov", t, s, R, cov / R, cse / R, sigma_limit(model, t, s), finite_r_covariance(model, t, s, R) / R)
                )
    return rows


def _row(kind, t, s, R, est, se, target, finite):
    return {
        "kind": kind,
        "t": t,
        "s": s,
        "R": R,
        "estimate": est,
        "se": se,
        "target": target,
        "finite_r_target": finite,
        "z": (est - target) / se if se > 0 else math.nan,
    }


def lln_halving(sset: SampleSet, t: float, R: float, R2: float) -> tuple[float, float]:
    """``Var(F_R(t)/R) / Var(F_R2(t)/R2)`` with jackknife SE; about ``R2 / R`` under the LLN."""
    return variance_ratio_with_se(sset.F(t, R), sset.F(t, R2), (R2 / R) ** 2)


def increment_moment(sset: SampleSet, t: float, s: float, R: float) -> tuple[float, float]:
    """``E|F_R(t) - F_R(s)|^2`` and its standard error."""
    d = sset.F(t, R) - sset.F(s, R)
    return mean_with_se(d * d)


@dataclass(frozen=True)
class HolderFit:
    R: float
    anchor: float
    gaps: tuple[float, ...]
    moments: tuple[float, ...]
    moment_se: tuple[float, ...]
    slope: float
    slope_se: float


def holder_diagnostic(sset: SampleSet, R: float, anchor: float | None = None, max_gap_fraction: float = 0.25) -> HolderFit:
    """Slope of ``log E|F_R(anchor) - F_R(anchor - h)|^2`` against ``log h`` over dyadic ``h``.

    ``h`` runs over ``anchor * 2^-m`` for every grid time that realises it,
    with ``h <= max_gap_fraction * anchor``; the fit is weighted by the
    inverse variance of each log-moment. Increments scale like ``R h^2``.
    """
    times = sorted(sset.config.times)
    if len(times) < 4:
        raise ValueError("holder diagnostic needs at least four grid times")
    anchor = times[-1] if anchor is None else anchor
    gaps, moms, ses = [], [], []
    m = 0
    while True:
        h = anchor * 2.0**-m
        m += 1
        if h > max_gap_fraction * anchor:
            continue
        s = anchor - h
        match = [u for u in times if abs(u - s) <= 1e-12 * anchor]
        if not match:
            break
        mom, se = increment_moment(sset, anchor, match[0], R)
        gaps.append(h)
        moms.append(mom)
        ses.append(se)
    if len(gaps) < 2:
        raise ValueError("grid realises fewer than two dyadic gaps")
    lx = np.log(gaps)
    ly = np.log(moms)
    w = (np.asarray(moms) / np.asarray(ses)) ** 2
    X = np.column_stack([np.ones_like(lx), lx])
    cov = np.linalg.inv(X.T @ (w[:, None] * X))
    beta = cov @ (X.T @ (w * ly))
    return HolderFit(R, anchor, tuple(gaps), tuple(moms), tuple(ses), float(beta[1]), float(math.sqrt(cov[1, 1])))


@dataclass(frozen=True)
class StationarityReport:
    statistic: float
    pvalue: float
    level: float

    @property
    def rejected(self) -> bool:
        return self.pvalue < self.level


def stationarity_check(a, b, level: float = 1e-3) -> StationarityReport:
    """Two-sample Kolmogorov-Smirnov test of equal laws for two independent probe columns."""
    res = sps.ks_2samp(np.asarray(a, float), np.asarray(b, float))
    return StationarityReport(float(res.statistic), float(res.pvalue), level)
