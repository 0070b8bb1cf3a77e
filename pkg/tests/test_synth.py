from __future__ import annotations

import numpy as np
import pytest

from gazecurate.errors import ConfigError, DataError
from gazecurate.ingest import load_embeddings, parse_eye_stream, parse_frames
from gazecurate.probe import macro_f1, predict, train
from gazecurate.pupil import SessionBundle, score_session
from gazecurate.stats import feature_change
from gazecurate.synth import (
    GOLDEN_SHAPE,
    SynthConfig,
    dataset_checksum,
    generate_dataset,
    generate_session,
    generate_sessions,
    preset_config,
)

TINY = dict(n_sessions=3, session_length_s=45.0, n_activity_classes=3, n_scene_classes=2, embed_dim=16)

NOISELESS = dict(
    gaze_jitter=0.0,
    pupil_noise_mm=0.0,
    brightness_noise=0.0,
    embed_noise=0.0,
    static_noise=0.0,
    micro_noise=0.0,
    busy_pupil_wander_mm=0.0,
    activity_offset_strong=0.0,
    saccade_blur_prob=0.0,
    blink_interval_s=1e9,
)


def test_config_validation():
    with pytest.raises(ConfigError):
        SynthConfig(pupil_latency_s=2.0)
    with pytest.raises(ConfigError):
        SynthConfig(n_sessions=0)
    with pytest.raises(ConfigError):
        SynthConfig(informative_window_s=5.0, turbulence_window_s=4.0)


def test_dataset_determinism(tmp_path):
    cfg = SynthConfig(**TINY, seed=11)
    a = generate_dataset(cfg, tmp_path / "a")
    b = generate_dataset(cfg, tmp_path / "b")
    assert a["checksum"] == b["checksum"]
    files_a = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(tmp_path / "b") for p in (tmp_path / "b").rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_dataset_different_seeds_differ(tmp_path):
    a = generate_dataset(SynthConfig(**TINY, seed=1), tmp_path / "a")
    b = generate_dataset(SynthConfig(**TINY, seed=2), tmp_path / "b")
    assert a["checksum"] != b["checksum"]


def test_dataset_refuses_nonempty_dir(tmp_path):
    out = tmp_path / "data"
    out.mkdir()
    (out / "junk.txt").write_text("x")
    with pytest.raises(DataError):
        generate_dataset(SynthConfig(**TINY, seed=0), out)
    generate_dataset(SynthConfig(**TINY, seed=0), out, force=True)
    assert (out / "frames.csv").exists()


def test_dataset_files_parse_through_ingest(tmp_path):
    cfg = SynthConfig(**TINY, seed=4)
    generate_dataset(cfg, tmp_path / "d")
    frames = parse_frames(tmp_path / "d" / "frames.csv")
    assert len(frames) == cfg.n_sessions
    sid = sorted(frames)[0]
    stream = parse_eye_stream(tmp_path / "d" / "eye" / f"{sid}.csv")
    assert len(stream) == int(cfg.session_length_s * cfg.eye_rate_hz)
    emb = load_embeddings(tmp_path / "d" / "embeddings" / f"{sid}.emb")
    assert emb.rows == len(frames[sid])
    assert emb.dim == cfg.embed_dim
    assert (tmp_path / "d" / "ground_truth.jsonl").exists()
    assert (tmp_path / "d" / "labels.json").exists()


def test_zero_noise_single_transition_delta():
    # with all stochastic and time-varying amplitudes off, feature change is
    # nonzero at exactly the transition frames
    for seed in range(8):
        cfg = SynthConfig(
            n_sessions=1, session_length_s=45.0, n_activity_classes=2, n_scene_classes=1,
            embed_dim=16, transition_rate_per_min=1.3, seed=seed, **NOISELESS,
        )
        ses = generate_session(cfg, 0)
        if len(ses.truth.transitions) != 1:
            continue
        delta = feature_change(ses.embeddings)
        nonzero = np.flatnonzero(np.nan_to_num(delta) > 1e-9)
        assert nonzero.size == 1
        tr = ses.truth.transitions[0]
        assert abs(ses.frames[nonzero[0]].t - tr) < 1.0
        return
    pytest.fail("no single-transition session found across seeds")


def test_zero_transitions_salience_false_alarm_rate():
    from scipy.stats import norm

    cfg = SynthConfig(
        n_sessions=2, session_length_s=120.0, n_activity_classes=2, n_scene_classes=1,
        embed_dim=16, transition_rate_per_min=0.0, seed=3,
    )
    for i in range(cfg.n_sessions):
        ses = generate_session(cfg, i)
        assert ses.truth.transitions == []
        df, _ = score_session(SessionBundle(ses.session_id, ses.eye, ses.frames))
        nov = df["nov_centered"].to_numpy()
        rate = float(np.mean(nov > 2.0))
        # quantile bound from the generator's noise mixture: on the plain-MAD
        # scale |p| > 2 means |x| > 1.349 sigma for quiet frames, and saccade
        # windows carry 3x measurement noise
        sac_share = np.mean([k != "fixation" for k in ses.truth.frame_kinds])
        quiet = 2.0 * norm.sf(2.0 * 0.6745)
        noisy = 2.0 * norm.sf(2.0 * 0.6745 / 3.0)
        bound = (1.0 - sac_share) * quiet + sac_share * noisy + 0.08  # drift margin
        assert rate < bound


def test_fixation_gaze_quality_ratio_low_noise():
    cfg = SynthConfig(
        n_sessions=3, session_length_s=90.0, n_activity_classes=3, n_scene_classes=1,
        embed_dim=16, seed=5, gaze_jitter=0.0005, conf_dip_rate=0.0,
    )
    g_fix, g_other = [], []
    for i in range(cfg.n_sessions):
        ses = generate_session(cfg, i)
        df, _ = score_session(SessionBundle(ses.session_id, ses.eye, ses.frames))
        for g, kind in zip(df["g"], ses.truth.frame_kinds):
            (g_fix if kind == "fixation" else g_other).append(float(g))
    assert np.mean(g_fix) >= 3.0 * np.mean(g_other)


def test_event_alignment_rate():
    cfg = SynthConfig(**{**GOLDEN_SHAPE, "n_sessions": 8}, seed=0)
    hits = total = 0
    for i in range(cfg.n_sessions):
        ses = generate_session(cfg, i)
        df, _ = score_session(SessionBundle(ses.session_id, ses.eye, ses.frames))
        ft = df["t"].to_numpy()
        nv = df["nov_delayed"].to_numpy()
        for tr in ses.truth.transitions:
            m = (ft >= tr - 2) & (ft <= tr + 2)
            if m.sum() < 2:
                continue
            best = ft[m][np.argmax(nv[m])]
            total += 1
            hits += tr <= best <= tr + 2
    assert total >= 20
    assert hits / total >= 0.90


def test_ground_truth_intervals_well_formed():
    ses = generate_session(SynthConfig(**TINY, seed=7), 1)
    for intervals in (ses.truth.fixations, ses.truth.blinks):
        for (s0, e0), (s1, _) in zip(intervals, intervals[1:]):
            assert e0 <= s1 + 1e-9
            assert s0 < e0
    # transitions coincide with embedding centroid switches
    delta = feature_change(ses.embeddings)
    ft = np.array([fr.t for fr in ses.frames])
    for tr in ses.truth.transitions:
        k = int(np.searchsorted(ft, tr))
        assert np.nanmax(np.abs(delta[max(1, k - 1) : k + 2])) > 1e-6


def test_label_recoverability_fit_on_all():
    cfg = SynthConfig(**{**GOLDEN_SHAPE, "n_sessions": 12}, seed=0)
    sessions = generate_sessions(cfg)
    X = np.vstack([s.embeddings for s in sessions]).astype(float)
    y = np.concatenate([[fr.activity] * 1 for s in sessions for fr in s.frames])
    model = train(X, y)
    assert macro_f1(predict(model, X), y, classes=np.unique(y)) >= 0.9


def test_preset_config():
    cfg = preset_config("vedb-shape", seed=3)
    assert cfg.n_sessions == 119
    assert cfg.n_activity_classes == 12
    assert cfg.n_scene_classes == 16
    assert cfg.seed == 3
    with pytest.raises(ConfigError):
        preset_config("nope")


def test_frozen_tiny_checksum(tmp_path):
    # regression pin: the tiny fixed-seed dataset must not drift
    generate_dataset(SynthConfig(**TINY, seed=99), tmp_path / "d")
    assert dataset_checksum(tmp_path / "d") == FROZEN_TINY_CHECKSUM


# computed once from the generator at seed 99 and pinned (see test above)
FROZEN_TINY_CHECKSUM = "5f09810f5824e70bae4950da02afeda1ec741a5a20c9fbef284602954245fc1b"


@pytest.mark.slow
def test_recording_scale_generation_time(tmp_path):
    import time

    cfg = preset_config("vedb-shape", seed=0)
    start = time.perf_counter()
    summary = generate_dataset(cfg, tmp_path / "big")
    elapsed = time.perf_counter() - start
    assert summary["n_sessions"] == 119
    assert elapsed < 60.0
