"""Intra-annual distributions, growth slopes, logistic fit and correlation.

Months are 1-based throughout.  Percent values are on a 0-100 scale.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from typing import Iterable, Sequence

import numpy as np
from scipy import stats
from scipy.special import expit

DEFAULT_THRESHOLD = 79.0
THRESHOLD_TOLERANCE = 1e-9
YEAR_ORIGIN = 2021  # t = year - YEAR_ORIGIN, so 2022 -> 1


class EmptyYearError(ValueError):
    pass


class UndefinedSlopeError(ZeroDivisionError):
    pass


class LogisticFitError(RuntimeError):
    def __init__(self, message: str, trace: list[dict] | None = None):
        super().__init__(message)
        self.trace = trace or []


class UndefinedCorrelationError(ValueError):
    pass


@dataclass
class MonthlyMatrix:
    counts: dict[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        for (year, month), c in self.counts.items():
            if not 1 <= month <= 12:
                raise ValueError(f"month out of range: {year}-{month}")
            if c < 0:
                raise ValueError(f"negative count for {year}-{month}")

    @classmethod
    def from_dates(cls, days: Iterable[date]) -> "MonthlyMatrix":
        return cls(dict(Counter((d.year, d.month) for d in days)))

    @property
    def years(self) -> list[int]:
        return sorted({y for y, _ in self.counts})

    @property
    def totals(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for (y, _), c in self.counts.items():
            out[y] = out.get(y, 0) + c
        return out

    def row(self, year: int) -> list[int]:
        return [self.counts.get((year, m), 0) for m in range(1, 13)]

    def active_months(self, year: int) -> int:
        return sum(1 for c in self.row(year) if c)


@dataclass
class YearDistribution:
    year: int
    p: list[float]
    p_hat: list[float]
    m_star: int | None = None
    a_v: float | None = None

    def cumulative(self, month: int) -> float:
        return self.p_hat[month - 1]


def monthly_distribution(matrix: MonthlyMatrix, year: int) -> YearDistribution:
    counts = matrix.row(year)
    total = sum(counts)
    if total <= 0:
        raise EmptyYearError(f"no counts for year {year}")
    p = [100.0 * c / total for c in counts]
    # cumulative from integer partial sums keeps the last entry exactly 100
    running = np.cumsum(counts)
    p_hat = [100.0 * float(r) / total for r in running]
    return YearDistribution(year, p, p_hat)


def threshold_month(dist: YearDistribution, threshold_percent: float = DEFAULT_THRESHOLD) -> int:
    """Smallest month whose cumulative share reaches ``threshold_percent``."""
    for m, value in enumerate(dist.p_hat, 1):
        if value >= threshold_percent - THRESHOLD_TOLERANCE:
            return m
    return 12


def growth_slope(dist: YearDistribution, m_star: int | None = None) -> float:
    """Mean monthly rise of the cumulative share from January to the threshold month."""
    m = m_star if m_star is not None else dist.m_star
    if m is None:
        raise ValueError("threshold month not set")
    if m <= 1:
        raise UndefinedSlopeError("growth slope undefined when the threshold month is January")
    return (dist.cumulative(m) - dist.cumulative(1)) / (m - 1)


def year_summary(matrix: MonthlyMatrix, year: int, threshold_percent: float = DEFAULT_THRESHOLD) -> YearDistribution:
    dist = monthly_distribution(matrix, year)
    dist.m_star = threshold_month(dist, threshold_percent)
    if dist.m_star > 1:
        dist.a_v = growth_slope(dist)
    return dist


def analysis_years(matrix: MonthlyMatrix, include_partial: bool = False, min_months: int = 2,
                   exclude: Sequence[int] = ()) -> list[int]:
    """Years eligible for intra-annual analysis.

    A year seen in fewer than ``min_months`` months (the disclosure month of
    2021, say) is partial and skipped unless ``include_partial``.
    """
    years = []
    for y in matrix.years:
        if y in exclude:
            continue
        if not include_partial and matrix.active_months(y) < min_months:
            continue
        if matrix.totals.get(y, 0) > 0:
            years.append(y)
    return years


# -- logistic fit ------------------------------------------------------------

@dataclass
class LogisticParams:
    L: float
    k: float
    t0: float
    covariance: np.ndarray
    sse: float = 0.0
    dof: int = 0
    iterations: int = 0
    eval_t: np.ndarray = field(default_factory=lambda: np.empty(0))
    ci95: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    trace: list[dict] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return np.array([self.L, self.k, self.t0])

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    def standard_error(self, t) -> np.ndarray:
        g = _jacobian(self.values, np.atleast_1d(np.asarray(t, dtype=float)))
        return np.sqrt(np.clip(np.einsum("ij,jk,ik->i", g, self.covariance, g), 0, None))

    def interval(self, t, z: float = 1.96) -> tuple[np.ndarray, np.ndarray]:
        """Normal-approximation band: mean +- z * standard error at each ``t``."""
        mean = logistic_eval(self, np.atleast_1d(np.asarray(t, dtype=float)))
        se = self.standard_error(t)
        return mean - z * se, mean + z * se


def logistic(t, L: float, k: float, t0: float):
    return L * expit(k * (np.asarray(t, dtype=float) - t0))


def logistic_eval(params: LogisticParams, t):
    value = logistic(t, params.L, params.k, params.t0)
    return float(value) if np.ndim(value) == 0 else value


def _jacobian(theta: np.ndarray, t: np.ndarray) -> np.ndarray:
    L, k, t0 = theta
    s = expit(k * (t - t0))
    ds = s * (1.0 - s)
    return np.column_stack([s, L * (t - t0) * ds, -L * k * ds])


def fit_logistic(points: Sequence[tuple[float, float]], max_iter: int = 200, tol: float = 1e-10,
                 eval_t: Sequence[float] | None = None) -> LogisticParams:
    """Least-squares logistic fit by damped Gauss-Newton.

    Starts from L = 2 * max(value), k = 1, t0 = median(t).  Each Gauss-Newton
    step is halved until the residual sum of squares decreases; iteration
    stops once the accepted step norm falls below ``tol``.  Parameter
    covariance is s^2 (J^T J)^-1 at the optimum with s^2 = SSE / (n - 3).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError("need at least 3 (t, value) points")
    t, y = pts[:, 0], pts[:, 1]
    if np.any(y <= 0):
        raise ValueError("logistic fit needs positive values")

    theta = np.array([2.0 * y.max(), 1.0, float(np.median(t))])
    resid = y - logistic(t, *theta)
    sse = float(resid @ resid)
    trace: list[dict] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = _jacobian(theta, t)
        if np.linalg.matrix_rank(J) < 3:
            trace.append({"iter": it, "theta": theta.tolist(), "sse": sse, "event": "rank-deficient"})
            raise LogisticFitError("singular Jacobian", trace)
        step, *_ = np.linalg.lstsq(J, resid, rcond=None)
        alpha = 1.0
        for _ in range(60):
            trial = theta + alpha * step
            r_trial = y - logistic(t, *trial)
            sse_trial = float(r_trial @ r_trial)
            if np.isfinite(sse_trial) and sse_trial <= sse:
                break
            alpha *= 0.5
        else:
            # no descent along the Gauss-Newton direction: numerically at the minimum
            trace.append({"iter": it, "theta": theta.tolist(), "sse": sse, "event": "no-descent"})
            converged = float(np.linalg.norm(step)) < 1e-6 * (1.0 + float(np.linalg.norm(theta)))
            break
        moved = alpha * step
        theta, resid, sse = trial, r_trial, sse_trial
        trace.append({"iter": it, "theta": theta.tolist(), "sse": sse, "alpha": alpha,
                      "step_norm": float(np.linalg.norm(moved))})
        if not np.all(np.isfinite(theta)):
            raise LogisticFitError("fit diverged", trace)
        if np.linalg.norm(moved) < tol:
            converged = True
            break
    if not converged:
        raise LogisticFitError(f"no convergence after {it} iterations", trace)

    L, k, t0 = theta
    if L <= 0 or k <= 0:
        raise LogisticFitError(f"fit rejected: L={L:g}, k={k:g} must be positive", trace)
    J = _jacobian(theta, t)
    dof = len(t) - 3
    s2 = sse / dof if dof > 0 else 0.0
    try:
        cov = s2 * np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError as exc:
        raise LogisticFitError("singular normal matrix at optimum", trace) from exc

    params = LogisticParams(float(L), float(k), float(t0), cov, sse, dof, it, trace=trace)
    grid = np.asarray(eval_t, dtype=float) if eval_t is not None else np.linspace(t.min(), t.max() + 3, 61)
    lo, hi = params.interval(grid)
    params.eval_t = grid
    params.ci95 = np.column_stack([lo, hi])
    return params


@dataclass
class ThresholdInterval:
    low: float
    mean: float
    high: float
    degenerate: bool = False


def predict_threshold_interval(p_hat_1: float, mean_slope: float, slope_low: float, slope_high: float,
                               target: float = 80.0) -> ThresholdInterval:
    """Month by which the cumulative share reaches ``target`` given a January share and slopes.

    The steepest slope gives the earliest month, the shallowest the latest.
    """
    if min(mean_slope, slope_low, slope_high) <= 0:
        raise ValueError("slope bounds must be positive")
    if p_hat_1 >= target:
        return ThresholdInterval(1.0, 1.0, 1.0, degenerate=True)
    lo_slope, hi_slope = min(slope_low, slope_high), max(slope_low, slope_high)
    gap = target - p_hat_1
    return ThresholdInterval(1 + gap / hi_slope, 1 + gap / mean_slope, 1 + gap / lo_slope)


def threshold_interval_from_fit(params: LogisticParams, t_target: float, p_hat_1: float,
                                target: float = 80.0) -> ThresholdInterval:
    mean = logistic_eval(params, t_target)
    lo, hi = params.interval([t_target])
    return predict_threshold_interval(p_hat_1, mean, float(lo[0]), float(hi[0]), target)


# -- correlation -------------------------------------------------------------

@dataclass
class CorrelationResult:
    r: float
    p_value: float
    n: int


def pearson(a: Sequence[float], b: Sequence[float]) -> CorrelationResult:
    """Product-moment r with a two-sided Student-t p-value on n - 2 degrees of freedom."""
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("series must be 1-D and of equal length")
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 paired samples")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("zero variance series")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        p = 0.0
    else:
        tstat = r * math.sqrt((n - 2) / (1 - r * r))
        p = float(2 * stats.t.sf(abs(tstat), n - 2))
    return CorrelationResult(r, p, n)
