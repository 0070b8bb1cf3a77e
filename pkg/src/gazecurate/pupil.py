"""Session-level pupil cleaning and the per-frame score table.

The raw pupil series is dominated by the light reflex and slow arousal
drift, so a three-step pipeline runs per session: regress out scene
brightness, subtract a 10 s rolling median, then normalize with median/MAD.
The magnitude of the cleaned signal is the novelty score; its derivative
feeds the mechanistic lag analysis. ``score_session`` ties this together
with the gaze quality score into one row per frame, for both the centered
and the forward-shifted (delayed) pupil windows.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from . import gaze as gaze_mod
from .ingest import EyeStream, FrameRecord, WindowAggregate, _window_from_slice, window_slices

log = logging.getLogger(__name__)

SCORE_COLUMNS = (
    "frame_id",
    "session_id",
    "t",
    "g",
    "f",
    "c",
    "p_centered",
    "p_delayed",
    "nov_centered",
    "nov_delayed",
    "deriv",
    "flags",
)

# Flags that can appear (semicolon-joined) in a score row.
FLAG_GAZE_DROPOUT = "gaze_dropout"
FLAG_NO_PUPIL_CENTERED = "no_pupil_centered"
FLAG_NO_PUPIL_DELAYED = "no_pupil_delayed"


@dataclass(frozen=True)
class ScoreParams:
    """Knobs of the scoring pipeline; defaults follow the method definition."""

    half_width_s: float = 0.050
    delayed_lo_s: float = 0.300
    delayed_hi_s: float = 1.500
    v_thresh: float = 0.5
    ramp_s: float = 0.150
    poly_degree: int = 2
    rolling_window_s: float = 10.0
    mad_consistency: float = 1.0


@dataclass
class PupilSeries:
    """One session's pupil signals on the frame clock, for one window variant."""

    frame_ids: list[str]
    raw_mm: np.ndarray
    brightness: np.ndarray
    cleaned: np.ndarray
    novelty: np.ndarray
    deriv: np.ndarray
    scale_mode: str = "mad"
    lum_coeffs: tuple[float, ...] | None = None
    lum_fallback: bool = False


@dataclass(frozen=True)
class LuminanceFit:
    residuals: np.ndarray
    coeffs: tuple[float, ...] | None
    fallback: bool


def frame_pupil(window: WindowAggregate) -> float:
    """Mean of the non-NaN pupil diameters in the window; NaN if none."""
    vals = window.pupil_mm[np.isfinite(window.pupil_mm)]
    return float(np.mean(vals)) if vals.size else float("nan")


def luminance_correct(raw: np.ndarray, brightness: np.ndarray, degree: int = 2) -> LuminanceFit:
    """Residual of a least-squares polynomial fit of pupil on brightness.

    The fit uses valid (non-NaN) points only; NaN inputs stay NaN in the
    residual. With fewer than degree+2 valid points the step falls back to
    mean subtraction and flags itself. Rank-deficient designs (e.g. constant
    brightness) degrade gracefully to the mean via the least-squares solve.
    """
    raw = np.asarray(raw, dtype=np.float64)
    brightness = np.asarray(brightness, dtype=np.float64)
    valid = np.isfinite(raw) & np.isfinite(brightness)
    if int(valid.sum()) < degree + 2:
        mean = float(np.mean(raw[valid])) if valid.any() else 0.0
        return LuminanceFit(raw - mean, coeffs=None, fallback=True)
    design = np.vander(brightness[valid], degree + 1)
    coef, *_ = np.linalg.lstsq(design, raw[valid], rcond=None)
    fitted = np.polyval(coef, brightness)
    return LuminanceFit(raw - fitted, coeffs=tuple(float(c) for c in coef), fallback=False)


def rolling_median_detrend(
    values: np.ndarray, times: np.ndarray, window_s: float = 10.0
) -> np.ndarray:
    """Subtract the centered rolling median over [t-w/2, t+w/2] per point.

    The window shrinks at session edges; NaN inputs map to NaN outputs and
    never contribute to any median.
    """
    values = np.asarray(values, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    half = window_s / 2.0
    lo = np.searchsorted(times, times - half, side="left")
    hi = np.searchsorted(times, times + half, side="right")
    out = np.full(values.shape, np.nan)
    for i in range(values.size):
        if not np.isfinite(values[i]):
            continue
        window = values[lo[i] : hi[i]]
        window = window[np.isfinite(window)]
        out[i] = values[i] - np.median(window)
    return out


def robust_zscore(
    values: np.ndarray, consistency: float = 1.0, eps: float = 1e-9
) -> tuple[np.ndarray, str]:
    """Median/MAD z-score; returns (z, scale_mode).

    scale_mode is "mad" normally, "iqr" when the MAD degenerates and the
    interquartile range takes over, and "degenerate" when both collapse (the
    output is then all zeros on valid entries and the session must be
    flagged). No 1.4826 consistency factor is applied unless requested.
    """
    values = np.asarray(values, dtype=np.float64)
    valid = np.isfinite(values)
    out = np.full(values.shape, np.nan)
    vals = values[valid]
    if vals.size < 2 or np.unique(vals).size < 2:
        out[valid] = 0.0
        return out, "degenerate"
    med = float(np.median(vals))
    dev = values - med
    scale = float(np.median(np.abs(vals - med))) * consistency
    mode = "mad"
    if scale < eps:
        q75, q25 = np.percentile(vals, [75.0, 25.0])
        scale = (float(q75) - float(q25)) / 1.349
        mode = "iqr"
        if scale < eps:
            out[valid] = 0.0
            return out, "degenerate"
    out[valid] = dev[valid] / scale
    return out, mode


def novelty(cleaned: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Absolute value of the cleaned signal; NaN maps to 0 with a dropout mask.

    A frame without pupil data carries no novelty evidence, so it ranks at
    the bottom rather than propagating NaN into the selection stage.
    """
    cleaned = np.asarray(cleaned, dtype=np.float64)
    dropout = ~np.isfinite(cleaned)
    out = np.abs(cleaned)
    out[dropout] = 0.0
    return out, dropout


def pupil_derivative(cleaned: np.ndarray, times: np.ndarray) -> np.ndarray:
    """|dp/dt| via central differences, one-sided at the edges.

    NaN neighbors yield NaN; a series shorter than two frames is all NaN.
    """
    cleaned = np.asarray(cleaned, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    n = cleaned.size
    out = np.full(n, np.nan)
    if n < 2:
        return out
    out[1:-1] = np.abs(cleaned[2:] - cleaned[:-2]) / (times[2:] - times[:-2])
    out[0] = abs(cleaned[1] - cleaned[0]) / (times[1] - times[0])
    out[-1] = abs(cleaned[-1] - cleaned[-2]) / (times[-1] - times[-2])
    return out


def clean_pupil_series(
    raw: np.ndarray,
    brightness: np.ndarray,
    times: np.ndarray,
    frame_ids: Sequence[str],
    params: ScoreParams = ScoreParams(),
) -> PupilSeries:
    """Run the full cleaning pipeline on a frame-clock pupil series."""
    fit = luminance_correct(raw, brightness, degree=params.poly_degree)
    detrended = rolling_median_detrend(fit.residuals, times, window_s=params.rolling_window_s)
    cleaned, mode = robust_zscore(detrended, consistency=params.mad_consistency)
    nov, _ = novelty(cleaned)
    deriv = pupil_derivative(cleaned, times)
    return PupilSeries(
        frame_ids=list(frame_ids),
        raw_mm=np.asarray(raw, dtype=np.float64),
        brightness=np.asarray(brightness, dtype=np.float64),
        cleaned=cleaned,
        novelty=nov,
        deriv=deriv,
        scale_mode=mode,
        lum_coeffs=fit.coeffs,
        lum_fallback=fit.fallback,
    )


@dataclass
class SessionBundle:
    """Everything score_session needs for one session."""

    session_id: str
    eye: EyeStream
    frames: list[FrameRecord]


def score_session(bundle: SessionBundle, params: ScoreParams = ScoreParams()) -> tuple[pd.DataFrame, dict]:
    """Score one session: gaze quality plus both pupil variants per frame.

    Returns the score table (one row per frame, SCORE_COLUMNS) and a QC dict
    with dropout rates, luminance-fit coefficients, and degenerate-scale
    flags for the session report.
    """
    frames = sorted(bundle.frames, key=lambda fr: (fr.t, fr.frame_id))
    frame_ts = np.array([fr.t for fr in frames], dtype=np.float64)
    brightness = np.array([fr.brightness for fr in frames], dtype=np.float64)
    frame_ids = [fr.frame_id for fr in frames]
    n = len(frames)

    c_lo, c_hi = window_slices(bundle.eye.t, frame_ts, -params.half_width_s, params.half_width_s)
    d_lo, d_hi = window_slices(bundle.eye.t, frame_ts, params.delayed_lo_s, params.delayed_hi_s)

    g = np.zeros(n)
    f = np.zeros(n)
    c = np.zeros(n)
    raw_centered = np.full(n, np.nan)
    raw_delayed = np.full(n, np.nan)
    gaze_dropout = np.zeros(n, dtype=bool)
    for i in range(n):
        cw = _window_from_slice(
            bundle.eye, frame_ts[i], -params.half_width_s, params.half_width_s, int(c_lo[i]), int(c_hi[i])
        )
        gq = gaze_mod.gaze_quality(cw, v_thresh=params.v_thresh, ramp_s=params.ramp_s)
        g[i], f[i], c[i] = gq.g, gq.f, gq.c
        gaze_dropout[i] = gq.dropout
        raw_centered[i] = frame_pupil(cw)
        dw = _window_from_slice(
            bundle.eye, frame_ts[i], params.delayed_lo_s, params.delayed_hi_s, int(d_lo[i]), int(d_hi[i])
        )
        raw_delayed[i] = frame_pupil(dw)

    centered = clean_pupil_series(raw_centered, brightness, frame_ts, frame_ids, params)
    delayed = clean_pupil_series(raw_delayed, brightness, frame_ts, frame_ids, params)
    no_pupil_c = ~np.isfinite(centered.cleaned)
    no_pupil_d = ~np.isfinite(delayed.cleaned)

    flags = []
    for i in range(n):
        toks = []
        if gaze_dropout[i]:
            toks.append(FLAG_GAZE_DROPOUT)
        if no_pupil_c[i]:
            toks.append(FLAG_NO_PUPIL_CENTERED)
        if no_pupil_d[i]:
            toks.append(FLAG_NO_PUPIL_DELAYED)
        flags.append(";".join(toks))

    df = pd.DataFrame(
        {
            "frame_id": frame_ids,
            "session_id": bundle.session_id,
            "t": frame_ts,
            "g": g,
            "f": f,
            "c": c,
            "p_centered": centered.cleaned,
            "p_delayed": delayed.cleaned,
            "nov_centered": centered.novelty,
            "nov_delayed": delayed.novelty,
            "deriv": centered.deriv,
            "flags": flags,
        }
    )

    qc = {
        "session_id": bundle.session_id,
        "n_frames": n,
        "n_samples": len(bundle.eye),
        "gaze_dropout_rate": float(np.mean(gaze_dropout)) if n else 0.0,
        "pupil_missing_centered": float(np.mean(no_pupil_c)) if n else 0.0,
        "pupil_missing_delayed": float(np.mean(no_pupil_d)) if n else 0.0,
        "lum_coeffs_centered": centered.lum_coeffs,
        "lum_coeffs_delayed": delayed.lum_coeffs,
        "lum_fallback_centered": centered.lum_fallback,
        "lum_fallback_delayed": delayed.lum_fallback,
        "scale_mode_centered": centered.scale_mode,
        "scale_mode_delayed": delayed.scale_mode,
    }
    return df, qc


def write_score_table(df: pd.DataFrame, path: str | Path, header: str | None = None) -> None:
    """Write a score table CSV, prefixed with an optional comment header line."""
    path = Path(path)
    with path.open("w") as fh:
        if header:
            fh.write(f"# {header}\n")
        df.to_csv(fh, index=False, float_format="%.12g")


def read_score_table(path: str | Path) -> pd.DataFrame:
    """Read one scores CSV, or concatenate all ``*.csv`` in a directory."""
    path = Path(path)
    if path.is_dir():
        parts = [read_score_table(p) for p in sorted(path.glob("*.csv"))]
        if not parts:
            raise FileNotFoundError(f"no score CSVs under {path}")
        return pd.concat(parts, ignore_index=True)
    df = pd.read_csv(
        path, comment="#", dtype={"frame_id": str, "session_id": str, "flags": str}
    )
    df["flags"] = df["flags"].fillna("")
    return df
