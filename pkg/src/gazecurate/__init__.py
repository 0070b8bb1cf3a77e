"""Capture-time frame curation from eye-tracker side channels.

Scores egocentric video frames on two axes available at recording time
(gaze stability as quality, pupil response as novelty), selects frame
subsets under a data budget, and evaluates selections with a frozen-feature
linear probe plus a statistical harness and synthetic-data oracle.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, GazecurateError
from .gaze import GazeQuality, fixation_indicator, gaze_quality, gaze_velocity
from .ingest import (
    EmbeddingMatrix,
    EyeSample,
    EyeStream,
    FrameRecord,
    WindowAggregate,
    centered_window,
    delayed_window,
    load_embeddings,
    parse_eye_stream,
    parse_frames,
    write_embeddings,
)
from .probe import ProbeConfig, SplitPlan, macro_f1, run_cell, session_split, train
from .pupil import (
    PupilSeries,
    ScoreParams,
    SessionBundle,
    frame_pupil,
    luminance_correct,
    novelty,
    pupil_derivative,
    robust_zscore,
    rolling_median_detrend,
    score_session,
)
from .selection import SelectionManifest, StrategySpec, gate, rank_select, select, stratified_select
from .stats import (
    aulc,
    bonferroni,
    bootstrap_ci,
    cohens_d,
    feature_change,
    lag_profile,
    one_sample_t,
    spearman,
    win_count,
)
from .synth import SynthConfig, generate_dataset, generate_session, generate_sessions

__all__ = [
    "__version__",
    "ConfigError",
    "DataError",
    "GazecurateError",
    "EyeSample",
    "EyeStream",
    "FrameRecord",
    "EmbeddingMatrix",
    "WindowAggregate",
    "parse_eye_stream",
    "parse_frames",
    "load_embeddings",
    "write_embeddings",
    "centered_window",
    "delayed_window",
    "GazeQuality",
    "gaze_velocity",
    "fixation_indicator",
    "gaze_quality",
    "PupilSeries",
    "ScoreParams",
    "SessionBundle",
    "frame_pupil",
    "luminance_correct",
    "rolling_median_detrend",
    "robust_zscore",
    "novelty",
    "pupil_derivative",
    "score_session",
    "StrategySpec",
    "SelectionManifest",
    "gate",
    "rank_select",
    "select",
    "stratified_select",
    "ProbeConfig",
    "SplitPlan",
    "session_split",
    "train",
    "macro_f1",
    "run_cell",
    "aulc",
    "bootstrap_ci",
    "one_sample_t",
    "cohens_d",
    "bonferroni",
    "feature_change",
    "spearman",
    "lag_profile",
    "win_count",
    "SynthConfig",
    "generate_session",
    "generate_sessions",
    "generate_dataset",
]
