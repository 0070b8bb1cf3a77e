"""Aggregate statistics: learning curves, AULC, tests, and lag correlations.

Everything here is pure aggregation over immutable result tables. The t
distribution tail is evaluated through the regularized incomplete beta
function rather than lookup tables, and bootstrap resampling uses the same
counter-based seeding as the rest of the toolkit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import betainc

from . import seeding
from .errors import DataError

log = logging.getLogger(__name__)

DEFAULT_LAGS = tuple(range(-3, 6))


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int


@dataclass(frozen=True)
class LagPoint:
    lag_s: int
    mean_rho: float
    sd_rho: float
    n_sessions: int


@dataclass(frozen=True)
class WinCount:
    a_wins: int
    b_wins: int
    ties: int

    @property
    def n(self) -> int:
        return self.a_wins + self.b_wins + self.ties


def aulc(values: Sequence[float], budgets: Sequence[float] | None = None, mode: str = "mean") -> float:
    """Area under the learning curve.

    The reported statistic is the arithmetic mean of the per-budget values;
    ``mode="trapezoid"`` integrates over the budget fractions instead and
    normalizes by their span.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DataError("aulc needs at least one value")
    if mode == "mean":
        return float(np.mean(values))
    if mode == "trapezoid":
        if budgets is None or len(budgets) != values.size:
            raise DataError("trapezoid aulc needs one budget per value")
        budgets = np.asarray(budgets, dtype=np.float64)
        if np.any(np.diff(budgets) <= 0):
            raise DataError("budgets must be strictly increasing")
        return float(np.trapezoid(values, budgets) / (budgets[-1] - budgets[0]))
    raise DataError(f"unknown aulc mode {mode!r}")


def bootstrap_ci(
    values: Sequence[float],
    resamples: int = 1000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean, deterministic per seed."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise DataError("bootstrap needs at least one value")
    rng = seeding.generator("bootstrap", seed)
    idx = rng.integers(0, values.size, size=(resamples, values.size))
    means = values[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(means, [100.0 * alpha, 100.0 * (1.0 - alpha)])
    return float(lo), float(hi)


def t_sf_two_sided(t: float, df: int) -> float:
    """P(|T_df| >= |t|) via the regularized incomplete beta function."""
    if df <= 0:
        raise DataError("df must be positive")
    if not np.isfinite(t):
        return 0.0
    if t == 0.0:
        return 1.0
    x = df / (df + t * t)
    return float(betainc(df / 2.0, 0.5, x))


def one_sample_t(samples: Sequence[float], mu0: float) -> TTestResult:
    """Two-sided one-sample t-test of the sample mean against mu0."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.size
    if n < 2:
        raise DataError("t-test needs at least two samples")
    mean = float(np.mean(samples))
    sd = float(np.std(samples, ddof=1))
    df = n - 1
    if sd == 0.0:
        if mean == mu0:
            return TTestResult(0.0, 1.0, df)
        return TTestResult(float(np.sign(mean - mu0)) * np.inf, 0.0, df)
    t = (mean - mu0) / (sd / np.sqrt(n))
    return TTestResult(float(t), t_sf_two_sided(t, df), df)


def cohens_d(samples: Sequence[float], mu0: float) -> float:
    """Standardized mean difference (mean - mu0)/sd; NaN when sd = 0."""
    samples = np.asarray(samples, dtype=np.float64)
    sd = float(np.std(samples, ddof=1))
    if sd == 0.0:
        return float("nan")
    return float((np.mean(samples) - mu0) / sd)


def bonferroni(p_values: Sequence[float], m: int = 4, alpha: float = 0.05) -> np.ndarray:
    """Significance flags at the Bonferroni-adjusted threshold alpha/m."""
    if m < 1:
        raise DataError("m must be at least 1")
    p = np.asarray(p_values, dtype=np.float64)
    return p < (alpha / m)


def feature_change(embeddings: np.ndarray) -> np.ndarray:
    """One minus cosine similarity of consecutive rows; first entry NaN.

    Zero-norm rows make the cosine undefined, so both adjacent changes are
    NaN (and logged).
    """
    E = np.asarray(embeddings, dtype=np.float64)
    if E.ndim != 2:
        raise DataError("embeddings must be a 2-D matrix")
    n = E.shape[0]
    out = np.full(n, np.nan)
    if n < 2:
        return out
    norms = np.linalg.norm(E, axis=1)
    zero = norms == 0.0
    if np.any(zero):
        log.warning("feature_change: %d zero-norm embedding row(s)", int(zero.sum()))
    dots = np.sum(E[1:] * E[:-1], axis=1)
    denom = norms[1:] * norms[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = dots / denom
    out[1:] = 1.0 - cos
    out[1:][denom == 0.0] = np.nan
    return out


def average_ranks(x: np.ndarray) -> np.ndarray:
    """Ranks (1-based) with ties sharing their average rank."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size, dtype=np.float64)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation; NaN pairs dropped pairwise, ties averaged."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size:
        raise DataError("spearman needs equal-length inputs")
    keep = np.isfinite(x) & np.isfinite(y)
    x, y = x[keep], y[keep]
    if x.size < 2:
        return float("nan")
    rx = average_ranks(x)
    ry = average_ranks(y)
    sx = rx.std()
    sy = ry.std()
    if sx == 0.0 or sy == 0.0:
        return float("nan")
    return float(np.mean((rx - rx.mean()) * (ry - ry.mean())) / (sx * sy))


def lag_profile(
    signals: Mapping[str, np.ndarray],
    deltas: Mapping[str, np.ndarray],
    lags: Sequence[int] = DEFAULT_LAGS,
    min_pairs: int = 3,
) -> list[LagPoint]:
    """Per-lag mean +- sd of per-session Spearman(signal[t+lag], delta[t]).

    Assumes the 1 fps frame clock so a lag of L seconds is an index shift of
    L. Sessions shorter than |lag|+2 frames (or with too few finite pairs)
    are skipped for that lag.
    """
    points = []
    for lag in lags:
        rhos = []
        for sid in sorted(signals):
            sig = np.asarray(signals[sid], dtype=np.float64)
            dl = np.asarray(deltas[sid], dtype=np.float64)
            if sig.size != dl.size:
                raise DataError(f"session {sid}: signal/delta length mismatch")
            n = sig.size
            if n < abs(lag) + 2:
                continue
            if lag >= 0:
                a, b = dl[: n - lag], sig[lag:]
            else:
                a, b = dl[-lag:], sig[: n + lag]
            keep = np.isfinite(a) & np.isfinite(b)
            if int(keep.sum()) < min_pairs:
                continue
            rho = spearman(a, b)
            if np.isfinite(rho):
                rhos.append(rho)
        arr = np.asarray(rhos, dtype=np.float64)
        mean = float(arr.mean()) if arr.size else float("nan")
        sd = float(arr.std(ddof=1)) if arr.size > 1 else float("nan")
        points.append(LagPoint(lag_s=int(lag), mean_rho=mean, sd_rho=sd, n_sessions=arr.size))
    return points


def win_count(a: Mapping, b: Mapping) -> WinCount:
    """Count cells where a's value beats b's over their shared keys."""
    keys = sorted(set(a) & set(b))
    if not keys:
        raise DataError("win_count needs at least one shared cell")
    a_wins = sum(1 for k in keys if a[k] > b[k])
    b_wins = sum(1 for k in keys if b[k] > a[k])
    return WinCount(a_wins=a_wins, b_wins=b_wins, ties=len(keys) - a_wins - b_wins)
