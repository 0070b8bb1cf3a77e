"""Synthetic multi-session datasets with ground truth for every pipeline claim.

Each generated session contains: piecewise-constant scene states whose
embeddings jump at transitions, an eye stream alternating fixations and
saccades with blinks and occasional confidence dropouts, and a raw pupil
trace built from a lagged, smoothed brightness response plus a delayed
dilation bump after every transition, slow drift, sustained wander inside
busy episodes, and measurement noise.

Several modeling choices encode the causal structure the scoring pipeline
is supposed to exploit; they are intentional test fixtures rather than
facts about any real recording:

* the class signal is context-dependent (one direction per activity-scene
  pair) and much stronger in the frames shortly after a transition, so a
  novelty-ranked training set genuinely teaches more per frame;
* static stretches show a frozen view: frames within a segment share one
  embedding-noise draw, so uniform sampling wastes budget on duplicates,
  while post-transition frames each carry a fresh draw;
* frames captured mid-saccade or mid-blink are "blurred": their embeddings
  collapse toward a shared blur centroid and lose the class signal, giving
  the quality gate something real to remove;
* transitions arrive in busy episodes separated by calm stretches, so
  feature change and pupil activity co-elevate over several seconds, which
  is what the lag analysis looks for.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import pandas as pd
import pyarrow as pa
import pyarrow.csv as pacsv

from . import seeding
from .errors import ConfigError, DataError
from .ingest import ACTIVITY_CLASSES, SCENE_CLASSES, EyeStream, FrameRecord, write_embeddings

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthConfig:
    n_sessions: int = 6
    session_length_s: float = 120.0
    eye_rate_hz: float = 120.0
    n_activity_classes: int = 4
    n_scene_classes: int = 4
    embed_dim: int = 32
    transition_rate_per_min: float = 3.0
    pupil_latency_s: float = 0.8
    seed: int = 0

    # noise levels
    gaze_jitter: float = 0.0012
    pupil_noise_mm: float = 0.02
    brightness_noise: float = 0.01
    # embedding noise: static stretches show a frozen view, so frames within
    # a segment share one noise draw plus per-frame jitter; dynamic frames
    # (post-transition, while the view settles) each get a fresh draw
    embed_noise: float = 0.7
    static_noise: float = 0.8
    micro_noise: float = 0.2

    # embedding geometry
    scene_centroid_scale: float = 3.0
    clusters_per_scene: int = 3
    session_offset_scale: float = 0.0
    activity_offset_weak: float = 0.55
    activity_offset_strong: float = 3.0
    informative_window_s: float = 2.0
    turbulence_window_s: float = 4.0
    corrupt_noise_mult: float = 6.0
    blur_pull: float = 0.8
    saccade_blur_prob: float = 0.7

    # eye stream structure
    fixation_mean_s: float = 1.4
    saccade_duration_s: float = 0.05
    saccade_burst_s: float = 1.2
    blink_interval_s: float = 9.0
    blink_duration_s: float = 0.22
    conf_dip_rate: float = 0.10
    conf_dip_level: float = 0.30

    # pupil structure
    pupil_base_mm: float = 3.6
    pupil_event_amp_mm: float = 0.55
    pupil_event_width_s: float = 1.5
    brightness_pupil_gain_mm: float = 0.8
    light_reflex_latency_s: float = 0.5
    light_reflex_tau_s: float = 0.8
    busy_pupil_wander_mm: float = 0.08
    drift_amp_mm: float = 0.12
    min_segment_s: float = 5.0
    frame_offset_s: float = 0.5

    def __post_init__(self) -> None:
        if self.eye_rate_hz <= 0 or self.session_length_s <= 0 or self.n_sessions <= 0:
            raise ConfigError("session count, length and eye rate must be positive")
        if self.transition_rate_per_min < 0:
            raise ConfigError("transition rate cannot be negative")
        if not (0.3 <= self.pupil_latency_s <= 1.5):
            raise ConfigError("pupil latency must lie in the 0.3-1.5 s physiological band")
        if self.n_activity_classes < 2 or self.n_scene_classes < 1:
            raise ConfigError("need at least two activity classes and one scene class")
        if self.informative_window_s > self.turbulence_window_s:
            raise ConfigError("informative window cannot exceed the turbulence window")


@dataclass
class GroundTruth:
    """Everything the generator knows that the pipeline must rediscover."""

    session_id: str
    activity: int
    scene: int
    fixations: list[tuple[float, float]]
    blinks: list[tuple[float, float]]
    transitions: list[float]
    pupil_events: list[float]
    informative_frames: list[str]
    corrupted_frames: list[str]
    frame_kinds: list[str]  # fixation / saccade / blink, by frame instant


@dataclass
class SessionData:
    session_id: str
    eye: EyeStream
    frames: list[FrameRecord]
    embeddings: np.ndarray
    truth: GroundTruth


@dataclass(frozen=True)
class DatasetDirections:
    """Embedding geometry shared by all sessions of one dataset.

    The class signal is context-dependent: each (activity, scene) pair owns
    its own direction, orthonormal across pairs where the embedding
    dimension allows. The same activity therefore "looks different" in each
    scene, which is what makes small training samples context-starved and
    high-signal frames genuinely more instructive per sample.
    """

    centroids: np.ndarray  # (scenes, clusters, dim)
    activity_dirs: np.ndarray  # (activities, scenes, dim)
    blur_centroid: np.ndarray  # (dim,)


def dataset_directions(config: SynthConfig) -> DatasetDirections:
    rng = seeding.generator("synth-global", config.seed)
    d = config.embed_dim
    A, S = config.n_activity_classes, config.n_scene_classes
    centroids = rng.normal(
        0.0,
        config.scene_centroid_scale / math.sqrt(d),
        size=(S, config.clusters_per_scene, d),
    )
    raw = rng.normal(size=(d, d))
    q, _ = np.linalg.qr(raw)
    # A*S <= d gives fully orthonormal context directions; larger grids wrap
    # around and accept the resulting interference (shape presets only)
    cols = np.array([q[:, i % d] for i in range(A * S)])
    activity_dirs = cols.reshape(A, S, d)
    blur = rng.normal(0.0, config.scene_centroid_scale / math.sqrt(d), size=d)
    return DatasetDirections(centroids=centroids, activity_dirs=activity_dirs, blur_centroid=blur)


def _interval_mask(times: np.ndarray, intervals: list[tuple[float, float]]) -> np.ndarray:
    mask = np.zeros(times.size, dtype=bool)
    for s, e in intervals:
        i0 = np.searchsorted(times, s, side="left")
        i1 = np.searchsorted(times, e, side="left")
        mask[i0:i1] = True
    return mask


def _point_in_intervals(t: float, intervals: list[tuple[float, float]]) -> bool:
    for s, e in intervals:
        if s <= t < e:
            return True
    return False


def _segments(
    rng: np.random.Generator, config: SynthConfig
) -> tuple[list[tuple[float, float]], list[tuple[float, float]]]:
    """Piecewise scene-state segments; transitions cluster into busy episodes.

    Returns (segments, busy_intervals). Each session gets close to
    rate * length transitions (+-1) packed into two busy episodes separated
    by calm stretches, so the per-session novelty supply is comparable
    across sessions while feature change and pupil activity still co-elevate
    in sustained episodes.
    """
    L = config.session_length_s
    if config.transition_rate_per_min <= 0:
        return [(0.0, L)], []
    n_tr = max(1, int(round(config.transition_rate_per_min * L / 60.0)) + int(rng.integers(-1, 2)))
    n_windows = 1 if L < 60.0 else 2
    span = L / n_windows
    per_w = n_tr / n_windows
    win_len = min(0.45 * span, max(12.0, 1.35 * per_w * config.min_segment_s))
    windows = []
    for w in range(n_windows):
        lo = w * span + 0.08 * span
        hi = (w + 1) * span - 0.12 * span - win_len
        start = rng.uniform(lo, max(lo + 0.01, hi))
        windows.append((start, start + win_len))
    # spread transitions over the busy windows, respecting the minimum gap
    per_window = [n_tr // n_windows + (1 if w < n_tr % n_windows else 0) for w in range(n_windows)]
    transitions: list[float] = []
    for (ws, we), n_w in zip(windows, per_window):
        n_w = min(n_w, int((we - ws) / config.min_segment_s))
        if n_w <= 0:
            continue
        slack = (we - ws) - n_w * config.min_segment_s
        offsets = np.sort(rng.uniform(0.0, slack, size=n_w))
        times = ws + offsets + config.min_segment_s * np.arange(n_w)
        transitions.extend(float(x) for x in times)
    transitions = sorted(tr for tr in transitions if 1.0 < tr < L - 1.0)
    bounds = [0.0] + transitions + [L]
    segs = [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]
    return segs, windows


def _gamma_bump(tau: np.ndarray, width_s: float) -> np.ndarray:
    """Fast-rise slow-decay unit-peak bump supported on [0, ~width_s]."""
    tau_peak = width_s / 4.0
    x = np.clip(tau / tau_peak, 0.0, None)
    return np.where(tau >= 0.0, (x**2) * np.exp(2.0 * (1.0 - x)), 0.0)


def _exp_smooth(values: np.ndarray, dt: float, tau: float) -> np.ndarray:
    """First-order exponential smoothing with time constant tau, started
    settled at the first value."""
    if tau <= 0:
        return values
    from scipy.signal import lfilter

    alpha = dt / (tau + dt)
    out, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], values, zi=[(1.0 - alpha) * values[0]])
    return out


def generate_session(
    config: SynthConfig,
    session_index: int,
    directions: DatasetDirections | None = None,
) -> SessionData:
    """Generate one session deterministically from (config.seed, index)."""
    if directions is None:
        directions = dataset_directions(config)
    rng = seeding.generator("synth-session", config.seed, session_index)
    sid = f"s{session_index:03d}"
    L = config.session_length_s
    activity = session_index % config.n_activity_classes
    scene = (session_index // config.n_activity_classes) % config.n_scene_classes

    segs, busy_spans = _segments(rng, config)
    transitions = [s for s, _ in segs[1:]]
    clusters = []
    prev_cluster = -1
    for _ in segs:
        choices = [c for c in range(config.clusters_per_scene) if c != prev_cluster]
        cluster = int(rng.choice(choices)) if choices else 0
        clusters.append(cluster)
        prev_cluster = cluster
    # brightness walks with a forced minimum step so every session exposes
    # enough luminance range for the pupil regression to be well-posed
    seg_brightness = np.empty(len(segs))
    level = float(rng.uniform(0.3, 0.75))
    for i in range(len(segs)):
        seg_brightness[i] = level
        step = float(rng.uniform(0.12, 0.35))
        if level + step > 0.85:
            level -= step
        elif level - step < 0.20:
            level += step
        else:
            level += step if rng.random() < 0.5 else -step

    # ---- eye stream -------------------------------------------------------
    n_samples = int(round(L * config.eye_rate_hz))
    t = np.arange(n_samples, dtype=np.float64) / config.eye_rate_hz

    burst_windows = [(tr, tr + config.saccade_burst_s) for tr in transitions]
    fixations: list[tuple[float, float]] = []
    fix_points: list[np.ndarray] = []
    saccades: list[tuple[float, float, np.ndarray, np.ndarray]] = []
    cursor = 0.0
    point = rng.uniform(0.15, 0.85, size=2)
    while cursor < L:
        if _point_in_intervals(cursor, burst_windows):
            fdur = rng.uniform(0.12, 0.30)
        else:
            fdur = config.fixation_mean_s * rng.uniform(0.5, 1.5)
        fend = min(L, cursor + fdur)
        fixations.append((cursor, fend))
        fix_points.append(point.copy())
        if fend >= L:
            break
        sdur = config.saccade_duration_s * rng.uniform(0.7, 1.3)
        send = min(L, fend + sdur)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        hop = rng.uniform(0.12, 0.40)
        new_point = np.clip(point + hop * np.array([np.cos(angle), np.sin(angle)]), 0.05, 0.95)
        saccades.append((fend, send, point.copy(), new_point.copy()))
        point = new_point
        cursor = send

    blinks: list[tuple[float, float]] = []
    tb = rng.uniform(2.0, config.blink_interval_s)
    while tb < L:
        dur = config.blink_duration_s * rng.uniform(0.8, 1.2)
        blinks.append((tb, min(L, tb + dur)))
        tb += config.blink_interval_s * rng.uniform(0.7, 1.3)

    dips: list[tuple[float, float]] = []
    if config.conf_dip_rate > 0:
        mean_dur = 0.7
        mean_gap = mean_dur / config.conf_dip_rate
        td = rng.exponential(mean_gap)
        while td < L:
            dur = rng.uniform(0.4, 1.0)
            dips.append((td, min(L, td + dur)))
            td += dur + rng.exponential(mean_gap)

    gx = np.zeros(n_samples)
    gy = np.zeros(n_samples)
    conf = np.full(n_samples, 0.85)
    for (s, e), p in zip(fixations, fix_points):
        i0, i1 = np.searchsorted(t, [s, e])
        gx[i0:i1] = p[0]
        gy[i0:i1] = p[1]
        conf[i0:i1] = 0.93 + 0.03 * rng.standard_normal(i1 - i0)
    for fs, fe, p0, p1 in saccades:
        i0, i1 = np.searchsorted(t, [fs, fe])
        if i1 > i0:
            frac = (t[i0:i1] - fs) / max(fe - fs, 1e-9)
            gx[i0:i1] = p0[0] + frac * (p1[0] - p0[0])
            gy[i0:i1] = p0[1] + frac * (p1[1] - p0[1])
            conf[i0:i1] = 0.78 + 0.05 * rng.standard_normal(i1 - i0)
    gx += config.gaze_jitter * rng.standard_normal(n_samples)
    gy += config.gaze_jitter * rng.standard_normal(n_samples)

    dip_mask = _interval_mask(t, dips)
    conf[dip_mask] = config.conf_dip_level + 0.05 * np.abs(rng.standard_normal(int(dip_mask.sum())))
    blink_mask = _interval_mask(t, blinks)
    conf[blink_mask] = 0.05 + 0.02 * np.abs(rng.standard_normal(int(blink_mask.sum())))
    conf = np.clip(conf, 0.0, 1.0)

    # ---- pupil ------------------------------------------------------------
    seg_starts = np.array([s for s, _ in segs])
    # light reflex lags brightness and ramps with a short time constant, so a
    # brightness jump does not leak into pre-transition delayed windows
    t_lagged = t - config.light_reflex_latency_s
    seg_idx_lagged = np.clip(np.searchsorted(seg_starts, t_lagged, side="right") - 1, 0, len(segs) - 1)
    b_seen = _exp_smooth(seg_brightness[seg_idx_lagged], 1.0 / config.eye_rate_hz, config.light_reflex_tau_s)
    gain = config.brightness_pupil_gain_mm
    pupil = config.pupil_base_mm - gain * b_seen - 0.3 * gain * b_seen**2

    if config.busy_pupil_wander_mm > 0 and busy_spans:
        # sustained arousal wander inside busy episodes: a few slow sinusoids
        wander = np.zeros(n_samples)
        for _ in range(3):
            period = rng.uniform(2.0, 7.0)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            wander += np.sin(2.0 * np.pi * t / period + phase)
        wander *= config.busy_pupil_wander_mm / np.sqrt(3.0)
        pupil += wander * _interval_mask(t, busy_spans)

    events: list[float] = []
    for tr in transitions:
        ev = tr + config.pupil_latency_s + rng.normal(0.0, 0.03)
        events.append(float(ev))
        i0 = np.searchsorted(t, ev)
        i1 = np.searchsorted(t, ev + config.pupil_event_width_s)
        if i1 > i0:
            amp = config.pupil_event_amp_mm * rng.uniform(0.85, 1.15)
            pupil[i0:i1] += amp * _gamma_bump(t[i0:i1] - ev, config.pupil_event_width_s)

    phase = rng.uniform(0.0, 2.0 * np.pi)
    pupil += config.drift_amp_mm * np.sin(2.0 * np.pi * t / 83.0 + phase)
    noise = config.pupil_noise_mm * rng.standard_normal(n_samples)
    sac_mask = _interval_mask(t, [(fs, fe) for fs, fe, _, _ in saccades])
    noise[sac_mask] *= 3.0
    pupil += noise
    pupil[blink_mask] = np.nan

    eye = EyeStream(t, gx, gy, conf, pupil)

    # ---- frames and embeddings -------------------------------------------
    n_frames = int(math.floor(L))
    ft = config.frame_offset_s + np.arange(n_frames, dtype=np.float64)
    ft = ft[ft <= L - config.frame_offset_s + 1e-9]
    n_frames = ft.size
    frame_seg = np.clip(np.searchsorted(seg_starts, ft, side="right") - 1, 0, len(segs) - 1)
    brightness = seg_brightness[frame_seg]
    if config.brightness_noise > 0:
        brightness = brightness + rng.normal(0.0, config.brightness_noise, size=n_frames)
    brightness = np.clip(brightness, 0.0, 1.0)

    tr_arr = np.asarray(transitions)
    if tr_arr.size:
        last_idx = np.searchsorted(tr_arr, ft, side="right") - 1
        since = np.where(last_idx >= 0, ft - tr_arr[np.clip(last_idx, 0, None)], np.inf)
    else:
        since = np.full(n_frames, np.inf)
    informative = since <= config.informative_window_s
    turbulent = since <= config.turbulence_window_s

    kinds = []
    corrupted = np.zeros(n_frames, dtype=bool)
    sac_intervals = [(fs, fe) for fs, fe, _, _ in saccades]
    for i, tf in enumerate(ft):
        if _point_in_intervals(tf, blinks):
            kinds.append("blink")
            corrupted[i] = True
        elif _point_in_intervals(tf, sac_intervals):
            kinds.append("saccade")
            corrupted[i] = rng.random() < config.saccade_blur_prob
        else:
            kinds.append("fixation")

    d = config.embed_dim
    u = directions.activity_dirs[activity, scene]
    base = directions.centroids[scene, clusters]  # (n_segs, dim) via fancy index
    sqd = math.sqrt(d)
    E = base[frame_seg].astype(np.float64)
    if config.session_offset_scale > 0:
        E += rng.normal(0.0, config.session_offset_scale / sqd, size=d)
    E += config.activity_offset_weak * u
    E += (config.activity_offset_strong * informative[:, None]) * u
    # frozen view inside a segment: one shared draw plus per-frame jitter;
    # dynamic (settling) frames get fresh independent draws instead
    static_draws = rng.normal(0.0, config.static_noise / sqd, size=(len(segs), d))
    micro = rng.normal(0.0, config.micro_noise / sqd, size=(n_frames, d))
    fresh = rng.normal(0.0, config.embed_noise / sqd, size=(n_frames, d))
    dynamic = turbulent  # includes the informative window by construction
    E += np.where(dynamic[:, None], fresh, static_draws[frame_seg] + micro)
    if corrupted.any():
        rows = np.flatnonzero(corrupted)
        E[rows] = (
            0.5 * base[frame_seg[rows]]
            + config.blur_pull * directions.blur_centroid
            + rng.normal(0.0, config.corrupt_noise_mult * config.embed_noise / sqd, size=(rows.size, d))
        )

    frame_ids = [f"{sid}_{k:05d}" for k in range(n_frames)]
    frames = [
        FrameRecord(
            frame_id=frame_ids[k],
            session_id=sid,
            t=float(ft[k]),
            brightness=float(brightness[k]),
            activity=activity,
            scene=scene,
            embedding_row=k,
        )
        for k in range(n_frames)
    ]

    truth = GroundTruth(
        session_id=sid,
        activity=activity,
        scene=scene,
        fixations=[(float(s), float(e)) for s, e in fixations],
        blinks=[(float(s), float(e)) for s, e in blinks],
        transitions=[float(x) for x in transitions],
        pupil_events=events,
        informative_frames=[frame_ids[k] for k in np.flatnonzero(informative)],
        corrupted_frames=[frame_ids[k] for k in np.flatnonzero(corrupted)],
        frame_kinds=kinds,
    )
    return SessionData(
        session_id=sid,
        eye=eye,
        frames=frames,
        embeddings=E.astype(np.float32),
        truth=truth,
    )


def generate_sessions(config: SynthConfig) -> list[SessionData]:
    """All sessions of a dataset, in memory."""
    directions = dataset_directions(config)
    return [generate_session(config, i, directions) for i in range(config.n_sessions)]


def _write_csv_fast(df: pd.DataFrame, path: Path) -> None:
    """CSV writer for the bulky generated tables.

    Arrow's writer emits shortest round-trip float representations an order
    of magnitude faster than per-value formatting, which is what keeps
    recording-scale datasets inside the generation time budget.
    """
    pacsv.write_csv(pa.Table.from_pandas(df, preserve_index=False), str(path))


def class_names(n: int, base: tuple[str, ...], prefix: str) -> list[str]:
    if n <= len(base):
        return list(base[:n])
    return [f"{prefix}_{i:02d}" for i in range(n)]


def generate_dataset(config: SynthConfig, out_dir: str | Path, force: bool = False) -> dict:
    """Generate a dataset on disk in the ingest formats, plus ground truth.

    Returns a summary dict including a SHA-256 checksum over all emitted
    data files; identical configs produce byte-identical trees.
    """
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()):
        if not force:
            raise DataError(f"output directory {out} is not empty (use force to overwrite)")
    (out / "eye").mkdir(parents=True, exist_ok=True)
    (out / "embeddings").mkdir(parents=True, exist_ok=True)

    act_names = class_names(config.n_activity_classes, ACTIVITY_CLASSES, "activity")
    scn_names = class_names(config.n_scene_classes, SCENE_CLASSES, "scene")

    sessions = generate_sessions(config)
    frame_rows = []
    with (out / "ground_truth.jsonl").open("w") as gt:
        for ses in sessions:
            eye_df = pd.DataFrame(
                {
                    "t": ses.eye.t,
                    "gaze_x": ses.eye.gaze_x,
                    "gaze_y": ses.eye.gaze_y,
                    "confidence": ses.eye.confidence,
                    "pupil_mm": ses.eye.pupil_mm,
                }
            )
            _write_csv_fast(eye_df, out / "eye" / f"{ses.session_id}.csv")
            write_embeddings(out / "embeddings" / f"{ses.session_id}.emb", ses.embeddings)
            for fr in ses.frames:
                frame_rows.append(
                    {
                        "frame_id": fr.frame_id,
                        "session_id": fr.session_id,
                        "t": fr.t,
                        "brightness": fr.brightness,
                        "activity": act_names[fr.activity],
                        "scene": scn_names[fr.scene],
                        "embedding_row": fr.embedding_row,
                    }
                )
            gt.write(json.dumps(_truth_dict(ses.truth, act_names, scn_names), sort_keys=True) + "\n")

    _write_csv_fast(pd.DataFrame(frame_rows), out / "frames.csv")
    (out / "labels.json").write_text(
        json.dumps({"activity": act_names, "scene": scn_names}, indent=2, sort_keys=True) + "\n"
    )

    checksum = dataset_checksum(out)
    summary = {
        "checksum": checksum,
        "seed": config.seed,
        "n_sessions": config.n_sessions,
        "n_frames": sum(len(s.frames) for s in sessions),
        "config": asdict(config),
    }
    (out / "dataset_manifest.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def dataset_checksum(out_dir: str | Path) -> str:
    """SHA-256 over all data files (sorted by relative path)."""
    out = Path(out_dir)
    digest = hashlib.sha256()
    for path in sorted(out.rglob("*")):
        if path.is_file() and path.name != "dataset_manifest.json":
            digest.update(str(path.relative_to(out)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


def _truth_dict(truth: GroundTruth, act_names: list[str], scn_names: list[str]) -> dict:
    return {
        "session_id": truth.session_id,
        "activity": truth.activity,
        "activity_label": act_names[truth.activity],
        "scene": truth.scene,
        "scene_label": scn_names[truth.scene],
        "fixations": [[s, e] for s, e in truth.fixations],
        "blinks": [[s, e] for s, e in truth.blinks],
        "transitions": truth.transitions,
        "pupil_events": truth.pupil_events,
        "informative_frames": truth.informative_frames,
        "corrupted_frames": truth.corrupted_frames,
        "frame_kinds": truth.frame_kinds,
    }


# Recording-scale preset: session count and class structure of a real-world
# multi-hour egocentric corpus (~155k frames at 1 fps).
VEDB_SHAPE = dict(
    n_sessions=119,
    session_length_s=1138.0,
    n_activity_classes=12,
    n_scene_classes=16,
    embed_dim=32,
)

# Golden dataset: the fixed-seed oracle used by the acceptance suite.
GOLDEN_SHAPE = dict(
    n_sessions=36,
    session_length_s=210.0,
    n_activity_classes=6,
    n_scene_classes=2,
    embed_dim=32,
    transition_rate_per_min=3.5,
    pupil_latency_s=1.1,
    pupil_event_amp_mm=0.8,
    pupil_noise_mm=0.15,
    busy_pupil_wander_mm=0.06,
    activity_offset_weak=0.8,
    activity_offset_strong=2.5,
    scene_centroid_scale=0.5,
    corrupt_noise_mult=3.0,
    blur_pull=0.5,
    embed_noise=0.6,
    static_noise=0.8,
    micro_noise=0.1,
)

# Small and fast, for unit tests and examples.
TINY_SHAPE = dict(
    n_sessions=4,
    session_length_s=60.0,
    n_activity_classes=3,
    n_scene_classes=2,
    embed_dim=16,
)


def preset_config(name: str, seed: int = 0, **overrides) -> SynthConfig:
    presets = {"vedb-shape": VEDB_SHAPE, "golden": GOLDEN_SHAPE, "tiny": TINY_SHAPE}
    if name not in presets:
        raise ConfigError(f"unknown preset {name!r} (have: {', '.join(sorted(presets))})")
    kwargs = dict(presets[name])
    kwargs.update(overrides)
    return SynthConfig(seed=seed, **kwargs)
