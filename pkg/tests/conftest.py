from __future__ import annotations

import numpy as np
import pytest

from gazecurate.ingest import EyeStream


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_stream(
    t, gaze_x=None, gaze_y=None, confidence=None, pupil_mm=None
) -> EyeStream:
    """Build an EyeStream from arrays, defaulting the unspecified columns."""
    t = np.asarray(t, dtype=float)
    n = t.size
    return EyeStream(
        t=t,
        gaze_x=np.full(n, 0.5) if gaze_x is None else np.asarray(gaze_x, dtype=float),
        gaze_y=np.full(n, 0.5) if gaze_y is None else np.asarray(gaze_y, dtype=float),
        confidence=np.ones(n) if confidence is None else np.asarray(confidence, dtype=float),
        pupil_mm=np.full(n, 3.5) if pupil_mm is None else np.asarray(pupil_mm, dtype=float),
    )


@pytest.fixture
def stream_120hz():
    """60 s of 120 Hz samples with a slow gaze drift."""
    t = np.arange(0.0, 60.0, 1.0 / 120.0)
    gx = 0.5 + 0.001 * np.sin(t)
    gy = 0.5 + 0.001 * np.cos(t)
    return make_stream(t, gaze_x=gx, gaze_y=gy)
