from __future__ import annotations

import numpy as np
import pytest

from gazecurate.ingest import WindowAggregate
from gazecurate.pupil import (
    SessionBundle,
    clean_pupil_series,
    frame_pupil,
    luminance_correct,
    novelty,
    pupil_derivative,
    read_score_table,
    robust_zscore,
    rolling_median_detrend,
    score_session,
    write_score_table,
)
from gazecurate.synth import SynthConfig, generate_session


def pupil_window(values):
    values = np.asarray(values, dtype=float)
    n = values.size
    return WindowAggregate(
        0.0, -0.05, 0.05, np.linspace(-0.04, 0.04, n), np.full(n, 0.5), np.full(n, 0.5),
        np.ones(n), values,
    )


# ---------------------------------------------------------------------------
# frame_pupil


def test_frame_pupil_mean():
    assert frame_pupil(pupil_window([3.0, 3.2])) == pytest.approx(3.1)


def test_frame_pupil_all_nan():
    assert np.isnan(frame_pupil(pupil_window([np.nan, np.nan])))


def test_frame_pupil_skips_nan():
    assert frame_pupil(pupil_window([np.nan, 4.0])) == pytest.approx(4.0)


# ---------------------------------------------------------------------------
# luminance correction


def test_luminance_exact_quadratic():
    b = np.linspace(0.1, 0.9, 40)
    raw = 2.0 - 1.5 * b + 0.8 * b**2
    fit = luminance_correct(raw, b)
    assert np.max(np.abs(fit.residuals)) < 1e-9
    assert not fit.fallback


def test_luminance_constant_brightness_degrades_to_mean():
    b = np.full(20, 0.4)
    raw = np.sin(np.arange(20.0))
    fit = luminance_correct(raw, b)
    assert np.allclose(fit.residuals, raw - raw.mean(), atol=1e-9)


def normal_equations_residual(raw, b, degree):
    """Independent least-squares oracle via explicit normal equations."""
    X = np.vander(b, degree + 1)
    coef = np.linalg.solve(X.T @ X, X.T @ raw)
    return raw - X @ coef


def test_luminance_matches_normal_equations_oracle(rng):
    b = rng.uniform(0.1, 0.9, 60)
    noise = rng.normal(0, 0.05, 60)
    raw = 3.0 - 1.2 * b + 0.5 * b**2 + noise
    fit = luminance_correct(raw, b)
    want = normal_equations_residual(raw, b, 2)
    assert np.allclose(fit.residuals, want, atol=1e-9)


def test_luminance_insufficient_data_fallback():
    raw = np.array([3.0, 3.2, np.nan])
    b = np.array([0.2, 0.6, 0.3])
    fit = luminance_correct(raw, b, degree=2)
    assert fit.fallback
    assert np.allclose(fit.residuals[:2], raw[:2] - np.nanmean(raw), equal_nan=True)
    assert np.isnan(fit.residuals[2])


def test_luminance_nan_stays_nan():
    b = np.linspace(0.1, 0.9, 20)
    raw = 2.0 - b
    raw[5] = np.nan
    fit = luminance_correct(raw, b)
    assert np.isnan(fit.residuals[5])
    assert np.isfinite(np.delete(fit.residuals, 5)).all()


# ---------------------------------------------------------------------------
# rolling median detrend


def test_detrend_constant_series():
    t = np.arange(30.0)
    out = rolling_median_detrend(np.full(30, 5.0), t)
    assert np.allclose(out, 0.0)


def test_detrend_impulse_passes_through():
    # 7 points at 1 fps, 10 s window: every median is 0, output equals input
    x = np.array([0.0, 0.0, 0.0, 10.0, 0.0, 0.0, 0.0])
    out = rolling_median_detrend(x, np.arange(7.0))
    assert np.allclose(out, x)


def naive_detrend(values, times, window_s):
    out = np.full(values.shape, np.nan)
    for i, (v, ti) in enumerate(zip(values, times)):
        if not np.isfinite(v):
            continue
        sel = values[(times >= ti - window_s / 2) & (times <= ti + window_s / 2)]
        out[i] = v - np.median(sel[np.isfinite(sel)])
    return out


def test_detrend_linear_ramp_bounded_and_matches_oracle(rng):
    t = np.arange(120.0)
    slope = 0.03
    x = slope * t
    out = rolling_median_detrend(x, t, window_s=10.0)
    assert np.max(np.abs(out)) <= 5.0 * slope + 1e-12
    assert np.allclose(out, naive_detrend(x, t, 10.0))
    # random series against the same per-point oracle
    y = rng.normal(0, 1, 120)
    y[rng.integers(0, 120, 10)] = np.nan
    assert np.allclose(
        rolling_median_detrend(y, t), naive_detrend(y, t, 10.0), equal_nan=True
    )


def test_detrend_commutes_with_constant_shift(rng):
    t = np.sort(rng.uniform(0, 60, 80))
    x = rng.normal(0, 1, 80)
    a = rolling_median_detrend(x, t)
    b = rolling_median_detrend(x + 7.25, t)
    assert np.allclose(a, b, atol=1e-9)


# ---------------------------------------------------------------------------
# robust z-score


def test_zscore_hand_example():
    z, mode = robust_zscore(np.array([1.0, 2.0, 3.0, 4.0, 5.0]))
    assert mode == "mad"
    assert np.allclose(z, [-2, -1, 0, 1, 2])


def test_zscore_constant_degenerate():
    z, mode = robust_zscore(np.full(10, 3.3))
    assert mode == "degenerate"
    assert np.allclose(z, 0.0)


def test_zscore_outlier_marked_salient():
    # bulk spans [-1, 1] (MAD 0.5) so every bulk |z| <= 2; the outlier sits
    # at 100x the bulk scale and lands far beyond the salience threshold
    bulk = np.linspace(-1.0, 1.0, 101)
    series = np.concatenate([bulk, [100.0]])
    z, mode = robust_zscore(series)
    assert mode == "mad"
    assert abs(z[-1]) > 2.0
    assert np.all(np.abs(z[:-1]) <= 2.0 + 1e-9)


def test_zscore_iqr_fallback():
    # majority at one value makes MAD collapse while the IQR survives
    series = np.array([0.0] * 6 + [1.0, 2.0, 3.0])
    z, mode = robust_zscore(series)
    assert mode == "iqr"
    assert np.isfinite(z).all()


def test_zscore_median_zero_mad_one(rng):
    for _ in range(10):
        x = rng.normal(0, rng.uniform(0.5, 5), 101)
        z, mode = robust_zscore(x)
        assert mode == "mad"
        assert abs(np.median(z)) < 1e-9
        assert abs(np.median(np.abs(z - np.median(z))) - 1.0) < 1e-9


# ---------------------------------------------------------------------------
# novelty and derivative


def test_novelty_values():
    nov, dropout = novelty(np.array([-2.5, 0.0, np.nan]))
    assert nov == pytest.approx([2.5, 0.0, 0.0])
    assert list(dropout) == [False, False, True]


def test_derivative_hand_example():
    d = pupil_derivative(np.array([0.0, 1.0, 2.0, 3.0]), np.arange(4.0))
    assert np.allclose(d, 1.0)


def test_derivative_constant_is_zero():
    d = pupil_derivative(np.full(10, 2.0), np.arange(10.0))
    assert np.allclose(d, 0.0)


def naive_derivative(p, t):
    n = len(p)
    out = np.full(n, np.nan)
    for i in range(n):
        if i == 0:
            out[i] = abs(p[1] - p[0]) / (t[1] - t[0])
        elif i == n - 1:
            out[i] = abs(p[-1] - p[-2]) / (t[-1] - t[-2])
        else:
            out[i] = abs(p[i + 1] - p[i - 1]) / (t[i + 1] - t[i - 1])
    return out


def test_derivative_matches_bruteforce(rng):
    p = rng.normal(0, 1, 50)
    t = np.sort(rng.uniform(0, 100, 50))
    assert np.allclose(pupil_derivative(p, t), naive_derivative(p, t))


def test_derivative_nan_neighbors():
    p = np.array([0.0, np.nan, 2.0, 3.0])
    d = pupil_derivative(p, np.arange(4.0))
    assert np.isnan(d[0]) and np.isnan(d[2])  # both touch the NaN
    assert np.isfinite(d[3])


# ---------------------------------------------------------------------------
# pipeline invariants


def test_pipeline_affine_invariance(rng):
    t = np.arange(200.0)
    b = rng.uniform(0.2, 0.8, 200)
    raw = 3.5 - 1.2 * b + rng.normal(0, 0.05, 200)
    ids = [f"f{i}" for i in range(200)]
    base = clean_pupil_series(raw, b, t, ids)
    scaled = clean_pupil_series(4.7 * raw + 11.0, b, t, ids)
    assert np.allclose(base.cleaned, scaled.cleaned, atol=1e-9)


def test_novelty_and_derivative_sign_flip_invariance(rng):
    p = rng.normal(0, 1, 60)
    t = np.arange(60.0)
    assert np.allclose(novelty(p)[0], novelty(-p)[0])
    assert np.allclose(pupil_derivative(p, t), pupil_derivative(-p, t))


# ---------------------------------------------------------------------------
# score_session


def make_session(cfg: SynthConfig, index: int = 0) -> SessionBundle:
    data = generate_session(cfg, index)
    return SessionBundle(data.session_id, data.eye, data.frames)


def test_score_session_pupil_pure_brightness_function():
    # pupil depends on recorded brightness only: luminance correction
    # removes everything and the z-score degenerates to zeros
    cfg = SynthConfig(
        n_sessions=1,
        session_length_s=120.0,
        pupil_noise_mm=0.0,
        brightness_noise=0.0,
        pupil_event_amp_mm=0.0,
        drift_amp_mm=0.0,
        transition_rate_per_min=2.0,
        seed=5,
    )
    df, qc = score_session(make_session(cfg))
    valid = df["p_centered"].dropna().to_numpy()
    assert np.max(np.abs(valid)) < 1e-6
    assert qc["scale_mode_centered"] == "degenerate"


def test_score_session_delayed_sees_late_dilation():
    cfg = SynthConfig(
        n_sessions=1,
        session_length_s=600.0,
        transition_rate_per_min=4.0,
        pupil_latency_s=0.8,
        seed=7,
    )
    data = generate_session(cfg, 0)
    assert len(data.truth.transitions) >= 10
    df, _ = score_session(SessionBundle(data.session_id, data.eye, data.frames))
    ft = df["t"].to_numpy()
    at_transition = np.zeros(len(df), dtype=bool)
    for tr in data.truth.transitions:
        k = int(np.argmin(np.abs(ft - tr)))
        at_transition[k] = True
    nov_d = df["nov_delayed"].to_numpy()[at_transition]
    nov_c = df["nov_centered"].to_numpy()[at_transition]
    assert nov_d.mean() > nov_c.mean()


def test_score_session_short_session_fallback():
    cfg = SynthConfig(n_sessions=1, session_length_s=3.0, transition_rate_per_min=0.0, seed=2)
    df, qc = score_session(make_session(cfg))
    assert len(df) == 3
    assert qc["lum_fallback_centered"]


def test_score_table_round_trip(tmp_path):
    cfg = SynthConfig(n_sessions=1, session_length_s=30.0, seed=3)
    df, _ = score_session(make_session(cfg))
    path = tmp_path / "scores.csv"
    write_score_table(df, path, header="test header")
    back = read_score_table(path)
    assert list(back.columns) == list(df.columns)
    assert len(back) == len(df)
    assert np.allclose(back["g"], df["g"], atol=1e-9)
    assert (back["flags"] == df["flags"]).all()
