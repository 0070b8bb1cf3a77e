"""Per-frame gaze quality: a soft fixation indicator times tracker confidence.

The quality score multiplies two window statistics: the fraction of
low-velocity gaze samples (ramped by how long the gaze actually dwelt below
threshold) and the mean tracker confidence. Frames whose window holds fewer
than two samples score zero and are flagged as dropouts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooFewSamples
from .ingest import WindowAggregate

# Velocity below this (normalized screen units per second) counts as fixation.
DEFAULT_V_THRESH = 0.5
# Dwell time needed for full fixation credit.
DEFAULT_RAMP_S = 0.150


@dataclass(frozen=True)
class GazeQuality:
    """Quality score g = f * c plus its ingredients for one frame."""

    g: float
    f: float
    c: float
    low_vel_fraction: float
    low_vel_duration_s: float
    dropout: bool
    frame_id: str | None = None


def _velocities(window: WindowAggregate) -> tuple[np.ndarray, np.ndarray]:
    """Per-pair velocities and in-window dwell times.

    The preceding out-of-window sample, when available, supplies the first
    pair so the first in-window sample still gets a velocity. That pair's
    dwell time is clipped at the window's lower bound, which keeps the total
    low-velocity duration bounded by the window width.
    """
    t, gx, gy = window.t, window.gaze_x, window.gaze_y
    if window.prev is not None:
        t = np.concatenate(([window.prev.t], t))
        gx = np.concatenate(([window.prev.gaze_x], gx))
        gy = np.concatenate(([window.prev.gaze_y], gy))
    dt = np.diff(t)
    dist = np.hypot(np.diff(gx), np.diff(gy))
    with np.errstate(divide="ignore", invalid="ignore"):
        v = dist / dt
    # coincident timestamps: moving pair is "infinitely fast", duplicate is still
    v = np.where(dt > 0, v, np.where(dist > 0, np.inf, 0.0))
    dwell = dt.copy()
    if window.prev is not None and dwell.size:
        dwell[0] = min(dwell[0], float(t[1] - (window.frame_t + window.lo_s)))
    return v, dwell


def gaze_velocity(window: WindowAggregate) -> np.ndarray:
    """Velocities between consecutive gaze points, assigned to the later sample.

    Raises TooFewSamples for windows with fewer than two samples; callers map
    that to a zero fixation indicator.
    """
    if window.n < 2:
        raise TooFewSamples(f"window at t={window.frame_t} has {window.n} sample(s)")
    v, _ = _velocities(window)
    return v


def fixation_indicator(
    window: WindowAggregate,
    v_thresh: float = DEFAULT_V_THRESH,
    ramp_s: float = DEFAULT_RAMP_S,
) -> tuple[float, float, float]:
    """Soft fixation indicator (f, low-velocity fraction, dwell duration).

    f scales the below-threshold fraction by min(1, duration/ramp_s) so brief
    glances earn proportionally less credit than sustained fixation.
    Single-sample and empty windows return all zeros.
    """
    if window.n < 2:
        return 0.0, 0.0, 0.0
    v, dwell = _velocities(window)
    below = v < v_thresh
    fraction = float(np.mean(below))
    duration = float(np.sum(dwell[below]))
    f = fraction * min(1.0, duration / ramp_s)
    return f, fraction, duration


def gaze_quality(
    window: WindowAggregate,
    v_thresh: float = DEFAULT_V_THRESH,
    ramp_s: float = DEFAULT_RAMP_S,
    frame_id: str | None = None,
) -> GazeQuality:
    """Quality score for one frame window: g = f * c.

    c is the mean tracker confidence over the window (0 when empty). Windows
    with fewer than two samples yield g = 0 with the dropout flag set.
    """
    c = float(np.mean(window.confidence)) if window.n else 0.0
    if window.n < 2:
        return GazeQuality(0.0, 0.0, c, 0.0, 0.0, dropout=True, frame_id=frame_id)
    f, fraction, duration = fixation_indicator(window, v_thresh, ramp_s)
    return GazeQuality(f * c, f, c, fraction, duration, dropout=False, frame_id=frame_id)
