"""Result aggregation into report tables, plot-data JSON, and figures.

Consumes the per-cell ``results.csv`` rows and emits the summary tables
(AULC with bootstrap CIs and tests against random, the per-budget
dual-vs-gate+random ablation, learning curves, lag profiles) plus rendered
learning-curve / lag / gate-sweep figures for quick inspection.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from . import __version__, stats
from .configfile import StatsSettings
from .errors import DataError

log = logging.getLogger(__name__)

RESULT_COLUMNS = (
    "task",
    "strategy",
    "budget",
    "gate",
    "pupil_variant",
    "seed",
    "split_seed",
    "f1",
    "n_train_frames",
)

_KEY = ["task", "strategy", "gate", "pupil_variant"]


def meta_line(config_hash: str) -> str:
    return f"gazecurate {__version__} config={config_hash}"


def write_csv(df: pd.DataFrame, path: str | Path, config_hash: str) -> None:
    """Write a report CSV with the version/config header comment line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write(f"# {meta_line(config_hash)}\n")
        df.to_csv(fh, index=False, float_format="%.10g")


def read_csv(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


# ---------------------------------------------------------------------------
# aggregation


def summarize_curves(results: pd.DataFrame) -> pd.DataFrame:
    """Learning curve table: mean/sd F1 per strategy cell and budget."""
    rows = []
    for key, grp in results.groupby(_KEY + ["budget"], sort=True):
        f1 = grp["f1"].to_numpy(dtype=float)
        rows.append(
            {
                "task": key[0],
                "strategy": key[1],
                "gate": key[2],
                "pupil_variant": key[3],
                "budget": key[4],
                "mean_f1": float(np.mean(f1)),
                "sd_f1": float(np.std(f1, ddof=1)) if f1.size > 1 else 0.0,
                "n_seeds": int(f1.size),
            }
        )
    return pd.DataFrame(rows)


def per_seed_aulc(results: pd.DataFrame, budgets: Sequence[float] | None = None) -> pd.DataFrame:
    """Per-seed AULC (mean F1 across the budget grid) for every strategy cell."""
    if budgets is None:
        budgets = sorted(results["budget"].unique())
    budgets = list(budgets)
    rows = []
    for key, grp in results.groupby(_KEY + ["seed"], sort=True):
        have = sorted(grp["budget"].unique())
        if have != sorted(budgets):
            log.warning("AULC: skipping %s, budgets %s != grid %s", key, have, budgets)
            continue
        by_budget = grp.set_index("budget")["f1"]
        rows.append(
            {
                "task": key[0],
                "strategy": key[1],
                "gate": key[2],
                "pupil_variant": key[3],
                "seed": key[4],
                "aulc": stats.aulc([float(by_budget[b]) for b in budgets]),
            }
        )
    return pd.DataFrame(rows)


def _p_vs_baseline(
    vals: np.ndarray,
    seeds: np.ndarray,
    base_vals: np.ndarray,
    base_seeds: np.ndarray,
) -> float:
    """Two-sided p for a strategy against the random baseline.

    Deterministic-vs-stochastic comparisons use a one-sample t against the
    deterministic value; stochastic-vs-stochastic pairs seeds and tests the
    differences against zero.
    """
    if vals.size == 1 and base_vals.size > 1:
        return stats.one_sample_t(base_vals, float(vals[0])).p
    if vals.size > 1 and base_vals.size == 1:
        return stats.one_sample_t(vals, float(base_vals[0])).p
    if vals.size > 1 and base_vals.size > 1:
        common = sorted(set(seeds) & set(base_seeds))
        if len(common) >= 2:
            a = {s: v for s, v in zip(seeds, vals)}
            b = {s: v for s, v in zip(base_seeds, base_vals)}
            diffs = np.array([a[s] - b[s] for s in common])
            if np.all(diffs == diffs[0]) and diffs[0] == 0.0:
                return 1.0
            return stats.one_sample_t(diffs, 0.0).p
    return float("nan")


def summarize_aulc(results: pd.DataFrame, settings: StatsSettings) -> pd.DataFrame:
    """AULC table with bootstrap CI, delta vs random, p, and Bonferroni flag."""
    seed_aulc = per_seed_aulc(results)
    if seed_aulc.empty:
        raise DataError("no complete strategy cells for AULC")
    rows = []
    for task, task_df in seed_aulc.groupby("task", sort=True):
        base = task_df[task_df["strategy"] == "random"]
        base_vals = base["aulc"].to_numpy(dtype=float)
        base_seeds = base["seed"].to_numpy()
        base_mean = float(np.mean(base_vals)) if base_vals.size else float("nan")
        for key, grp in task_df.groupby(["strategy", "gate", "pupil_variant"], sort=True):
            vals = grp["aulc"].to_numpy(dtype=float)
            seeds = grp["seed"].to_numpy()
            mean = float(np.mean(vals))
            lo, hi = stats.bootstrap_ci(
                vals,
                resamples=settings.bootstrap_resamples,
                level=settings.level,
                seed=settings.bootstrap_seed,
            )
            if key[0] == "random":
                delta, p = float("nan"), float("nan")
            else:
                delta = mean - base_mean
                p = _p_vs_baseline(vals, seeds, base_vals, base_seeds)
            rows.append(
                {
                    "task": task,
                    "strategy": key[0],
                    "gate": key[1],
                    "pupil_variant": key[2],
                    "n_seeds": int(vals.size),
                    "aulc": mean,
                    "ci_lo": lo,
                    "ci_hi": hi,
                    "delta_vs_random": delta,
                    "p_value": p,
                    "significant": bool(p < settings.alpha / settings.bonferroni_m)
                    if np.isfinite(p)
                    else False,
                }
            )
    df = pd.DataFrame(rows)
    return df.sort_values(["task", "aulc"], ascending=[True, False]).reset_index(drop=True)


def summarize_ablation(
    results: pd.DataFrame, gate: float = 0.75, pupil_variant: str | None = None
) -> pd.DataFrame:
    """Per-budget dual vs gate+random comparison (delta, t, p, Cohen's d)."""
    rows = []
    sel = results
    if pupil_variant is not None:
        sel = sel[sel["pupil_variant"] == pupil_variant]
    for task, task_df in sel.groupby("task", sort=True):
        dual = task_df[(task_df["strategy"] == "dual") & (np.isclose(task_df["gate"], gate))]
        ctrl = task_df[(task_df["strategy"] == "gate_random") & (np.isclose(task_df["gate"], gate))]
        if dual.empty or ctrl.empty:
            continue
        for budget in sorted(dual["budget"].unique()):
            d_vals = dual[dual["budget"] == budget]["f1"].to_numpy(dtype=float)
            c_vals = ctrl[ctrl["budget"] == budget]["f1"].to_numpy(dtype=float)
            if d_vals.size == 0 or c_vals.size == 0:
                continue
            dual_f1 = float(np.mean(d_vals))
            mean = float(np.mean(c_vals))
            sd = float(np.std(c_vals, ddof=1)) if c_vals.size > 1 else 0.0
            if c_vals.size > 1:
                tt = stats.one_sample_t(c_vals, dual_f1)
                t_stat, p = -tt.t, tt.p  # orient t toward "dual minus control"
            else:
                t_stat, p = float("nan"), float("nan")
            d_eff = (dual_f1 - mean) / sd if sd > 0 else float("nan")
            rows.append(
                {
                    "task": task,
                    "budget": budget,
                    "gate": gate,
                    "dual_f1": dual_f1,
                    "gate_random_mean": mean,
                    "gate_random_sd": sd,
                    "delta_f1": dual_f1 - mean,
                    "t": t_stat,
                    "p_value": p,
                    "cohens_d": d_eff,
                    "n_seeds": int(c_vals.size),
                }
            )
    return pd.DataFrame(rows)


def lag_table(points_by_signal: Mapping[str, Sequence[stats.LagPoint]]) -> pd.DataFrame:
    rows = []
    for signal in sorted(points_by_signal):
        for pt in points_by_signal[signal]:
            rows.append(
                {
                    "signal": signal,
                    "lag_s": pt.lag_s,
                    "mean_rho": pt.mean_rho,
                    "sd_rho": pt.sd_rho,
                    "n_sessions": pt.n_sessions,
                }
            )
    return pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# plot-data JSON and figures


def write_report_json(tables: Mapping[str, pd.DataFrame], path: str | Path, config_hash: str) -> None:
    payload = {
        "tool_version": __version__,
        "config_hash": config_hash,
        "tables": {
            name: json.loads(df.to_json(orient="records")) for name, df in sorted(tables.items())
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _strategy_label(row) -> str:
    name = row["strategy"]
    if name in ("dual", "gate_random") and not np.isclose(row["gate"], 0.75):
        name = f"{name} (k={row['gate']:g})"
    return name


def plot_learning_curves(curves: pd.DataFrame, task: str, path: str | Path) -> None:
    sub = curves[curves["task"] == task]
    if sub.empty:
        return
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for key, grp in sub.groupby(["strategy", "gate", "pupil_variant"], sort=True):
        grp = grp.sort_values("budget")
        label = _strategy_label(grp.iloc[0])
        ax.plot(grp["budget"], grp["mean_f1"], marker="o", ms=3, label=label)
        ax.fill_between(
            grp["budget"],
            grp["mean_f1"] - grp["sd_f1"],
            grp["mean_f1"] + grp["sd_f1"],
            alpha=0.15,
        )
    ax.set_xlabel("data budget (fraction of training frames)")
    ax.set_ylabel("macro F1")
    ax.set_title(f"learning curves: {task}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={})
    plt.close(fig)


def plot_lag_profile(lags: pd.DataFrame, path: str | Path) -> None:
    if lags.empty:
        return
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for signal, grp in lags.groupby("signal", sort=True):
        grp = grp.sort_values("lag_s")
        ax.errorbar(grp["lag_s"], grp["mean_rho"], yerr=grp["sd_rho"].fillna(0.0), marker="o", ms=3, capsize=2, label=signal)
    ax.axhline(0.0, color="grey", lw=0.8)
    ax.set_xlabel("lag (s), positive = signal after feature change")
    ax.set_ylabel("mean Spearman rho across sessions")
    ax.set_title("signal vs. feature-change lag profile")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={})
    plt.close(fig)


def plot_aulc(aulc_df: pd.DataFrame, task: str, path: str | Path) -> None:
    sub = aulc_df[aulc_df["task"] == task]
    if sub.empty:
        return
    sub = sub.sort_values("aulc")
    labels = [_strategy_label(row) for _, row in sub.iterrows()]
    fig, ax = plt.subplots(figsize=(6.0, 0.5 + 0.4 * len(sub)))
    y = np.arange(len(sub))
    err = np.vstack([sub["aulc"] - sub["ci_lo"], sub["ci_hi"] - sub["aulc"]])
    ax.barh(y, sub["aulc"], xerr=err, height=0.6, capsize=3)
    ax.set_yticks(y, labels)
    ax.set_xlabel("AULC (mean macro F1 across budgets)")
    ax.set_title(f"AULC: {task}")
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={})
    plt.close(fig)


def plot_gate_sweep(curves: pd.DataFrame, task: str, path: str | Path) -> None:
    sub = curves[(curves["task"] == task) & (curves["strategy"] == "dual")]
    if sub["gate"].nunique() < 2:
        return
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for gate_k, grp in sub.groupby("gate", sort=True):
        grp = grp.sort_values("budget")
        ax.plot(grp["budget"], grp["mean_f1"], marker="o", ms=3, label=f"gate {gate_k:g}")
    ax.set_xlabel("data budget")
    ax.set_ylabel("macro F1")
    ax.set_title(f"gate sweep (dual): {task}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={})
    plt.close(fig)


def render_figures(
    out_dir: str | Path,
    curves: pd.DataFrame | None = None,
    aulc_df: pd.DataFrame | None = None,
    lags: pd.DataFrame | None = None,
) -> list[Path]:
    """Render every figure the available tables support; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if curves is not None and not curves.empty:
        for task in sorted(curves["task"].unique()):
            p = out / f"learning_curves_{task}.png"
            plot_learning_curves(curves, task, p)
            written.append(p)
            q = out / f"gate_sweep_{task}.png"
            plot_gate_sweep(curves, task, q)
            if q.exists():
                written.append(q)
    if aulc_df is not None and not aulc_df.empty:
        for task in sorted(aulc_df["task"].unique()):
            p = out / f"aulc_{task}.png"
            plot_aulc(aulc_df, task, p)
            written.append(p)
    if lags is not None and not lags.empty:
        p = out / "lag_profile.png"
        plot_lag_profile(lags, p)
        written.append(p)
    return written
