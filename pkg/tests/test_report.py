from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from gazecurate import report
from gazecurate.configfile import StatsSettings
from gazecurate.stats import LagPoint


def results_table(rng, budgets=(0.05, 0.10, 0.25, 0.50, 0.75, 1.00)):
    """Cell table with one deterministic and two stochastic strategies."""
    rows = []
    base = {0.05: 0.18, 0.10: 0.19, 0.25: 0.20, 0.50: 0.21, 0.75: 0.215, 1.00: 0.22}
    for b in budgets:
        rows.append(dict(task="activity", strategy="dual", budget=b, gate=0.75,
                         pupil_variant="delayed", seed=0, split_seed=0,
                         f1=base[b] + 0.03, n_train_frames=100))
        for seed in range(10):
            rows.append(dict(task="activity", strategy="gate_random", budget=b, gate=0.75,
                             pupil_variant="delayed", seed=seed, split_seed=0,
                             f1=base[b] + 0.01 + rng.normal(0, 0.01), n_train_frames=100))
            rows.append(dict(task="activity", strategy="random", budget=b, gate=1.0,
                             pupil_variant="delayed", seed=seed, split_seed=0,
                             f1=base[b] + rng.normal(0, 0.01), n_train_frames=100))
    return pd.DataFrame(rows)


def test_curves_mean_sd(rng):
    results = results_table(rng)
    curves = report.summarize_curves(results)
    dual = curves[curves["strategy"] == "dual"]
    assert (dual["sd_f1"] == 0.0).all()
    assert (dual["n_seeds"] == 1).all()
    gr10 = curves[(curves["strategy"] == "gate_random") & (curves["budget"] == 0.10)].iloc[0]
    raw = results[(results["strategy"] == "gate_random") & (results["budget"] == 0.10)]["f1"]
    assert gr10["mean_f1"] == pytest.approx(raw.mean())
    assert gr10["sd_f1"] == pytest.approx(raw.std(ddof=1))
    assert gr10["n_seeds"] == 10


def test_aulc_table_and_delta_additivity(rng):
    results = results_table(rng)
    table = report.summarize_aulc(results, StatsSettings())
    by = {row["strategy"]: row for _, row in table.iterrows()}
    assert np.isnan(by["random"]["delta_vs_random"])
    assert by["dual"]["ci_lo"] == by["dual"]["ci_hi"] == by["dual"]["aulc"]
    assert by["gate_random"]["ci_lo"] <= by["gate_random"]["aulc"] <= by["gate_random"]["ci_hi"]
    # the emitted deltas decompose additively through the ablation chain:
    # (dual - random) = (gate_random - random) + (dual - gate_random)
    lhs = by["dual"]["delta_vs_random"]
    rhs = by["gate_random"]["delta_vs_random"] + (by["dual"]["aulc"] - by["gate_random"]["aulc"])
    assert lhs == pytest.approx(rhs, abs=1e-12)
    # deterministic-vs-stochastic p comes from the 10-seed t-test
    assert 0.0 <= by["dual"]["p_value"] <= 1.0


def test_ablation_table_hand_check(rng):
    results = results_table(rng)
    ablation = report.summarize_ablation(results, gate=0.75)
    row = ablation[ablation["budget"] == 0.10].iloc[0]
    dual_f1 = float(results[(results["strategy"] == "dual") & (results["budget"] == 0.10)]["f1"].iloc[0])
    ctrl = results[(results["strategy"] == "gate_random") & (results["budget"] == 0.10)]["f1"].to_numpy()
    assert row["dual_f1"] == pytest.approx(dual_f1)
    assert row["gate_random_mean"] == pytest.approx(ctrl.mean())
    assert row["delta_f1"] == pytest.approx(dual_f1 - ctrl.mean())
    want_d = (dual_f1 - ctrl.mean()) / ctrl.std(ddof=1)
    assert row["cohens_d"] == pytest.approx(want_d)
    assert row["n_seeds"] == 10


def test_ablation_zero_variance_gives_nan_d():
    rows = []
    for b in (0.10, 0.50):
        rows.append(dict(task="activity", strategy="dual", budget=b, gate=0.75,
                         pupil_variant="delayed", seed=0, split_seed=0, f1=0.5, n_train_frames=10))
        for seed in range(3):
            rows.append(dict(task="activity", strategy="gate_random", budget=b, gate=0.75,
                             pupil_variant="delayed", seed=seed, split_seed=0, f1=0.5, n_train_frames=10))
    ablation = report.summarize_ablation(pd.DataFrame(rows), gate=0.75)
    assert np.isnan(ablation["cohens_d"]).all()  # sd = 0 -> undefined effect size


def test_lag_table_shape():
    pts = {"pupil_deriv": [LagPoint(-1, 0.1, 0.02, 5), LagPoint(0, 0.2, 0.03, 5)]}
    table = report.lag_table(pts)
    assert list(table.columns) == ["signal", "lag_s", "mean_rho", "sd_rho", "n_sessions"]
    assert len(table) == 2


def test_render_figures(tmp_path, rng):
    results = results_table(rng)
    curves = report.summarize_curves(results)
    aulc_df = report.summarize_aulc(results, StatsSettings())
    lags = report.lag_table(
        {
            "pupil_deriv": [LagPoint(l, 0.05, 0.01, 6) for l in range(-3, 6)],
            "gaze_quality": [LagPoint(l, -0.04, 0.01, 6) for l in range(-3, 6)],
        }
    )
    written = report.render_figures(tmp_path, curves=curves, aulc_df=aulc_df, lags=lags)
    assert all(p.exists() and p.stat().st_size > 0 for p in written)
    names = {p.name for p in written}
    assert "learning_curves_activity.png" in names
    assert "aulc_activity.png" in names
    assert "lag_profile.png" in names


def test_csv_header_and_round_trip(tmp_path, rng):
    results = results_table(rng)
    path = tmp_path / "results.csv"
    report.write_csv(results, path, config_hash="abc123")
    first = path.read_text().splitlines()[0]
    assert first.startswith("# gazecurate") and "config=abc123" in first
    back = report.read_csv(path)
    assert len(back) == len(results)
    assert np.allclose(back["f1"], results["f1"], atol=1e-9)
