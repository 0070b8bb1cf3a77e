"""Command-line entry point wiring the pipeline into reproducible runs.

Subcommands: ``synth`` (generate a synthetic dataset), ``score`` (per-session
score tables), ``select`` (selection manifests for a grid or a single cell),
``eval`` (probe sweep + AULC/ablation tables), ``lags`` (signal vs.
feature-change lag profiles), and ``report`` (bundled CSV + plot-data JSON +
figures). Exit codes: 0 success, 2 config error, 3 data error, 4 a sweep
finished with failed cells.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__, report
from .configfile import (
    DETERMINISTIC_KINDS,
    RunConfig,
    SelectGrid,
    parse_config_file,
    run_config_from_mapping,
    synth_kwargs_from_mapping,
)
from .errors import ConfigError, DataError, GazecurateError
from .ingest import check_embedding_refs, load_embeddings, parse_eye_stream, parse_frames
from .probe import EvalDataset, run_cell, session_split
from .pupil import SessionBundle, read_score_table, score_session, write_score_table
from .selection import StrategySpec, select, write_manifest
from .stats import feature_change, lag_profile
from .synth import SynthConfig, generate_dataset, preset_config

log = logging.getLogger("gazecurate")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PARTIAL = 4


# ---------------------------------------------------------------------------
# helpers


def _load_mapping(args: argparse.Namespace) -> dict[str, str]:
    mapping = parse_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {
        "data_dir": "paths.data_dir",
        "out": "paths.out_dir",
        "scores": "paths.scores",
        "frames": "paths.frames",
        "jobs": None,  # not part of the config hash
    }
    for attr, key in overrides.items():
        val = getattr(args, attr, None)
        if val is not None and key is not None:
            mapping[key] = str(val)
    return mapping


def _run_config(args: argparse.Namespace) -> RunConfig:
    return run_config_from_mapping(_load_mapping(args))


def _labels_from_file(path: Path | None) -> tuple[tuple[str, ...] | None, tuple[str, ...] | None]:
    if path is None or not Path(path).exists():
        return None, None
    payload = json.loads(Path(path).read_text())
    return tuple(payload.get("activity", ())) or None, tuple(payload.get("scene", ())) or None


def _load_frames(cfg: RunConfig):
    act, scn = _labels_from_file(cfg.paths.labels)
    return parse_frames(cfg.paths.frames, activity_labels=act, scene_labels=scn)


def _eye_path(eye_dir: Path, session_id: str) -> Path:
    for ext in (".csv", ".jsonl"):
        p = eye_dir / f"{session_id}{ext}"
        if p.exists():
            return p
    raise DataError(f"no eye stream for session {session_id} under {eye_dir}")


def grid_cells(grid: SelectGrid, dedup_deterministic: bool) -> list[tuple[StrategySpec, float]]:
    """Expand the strategy grid into (spec, budget) cells, in a stable order."""
    cells: list[tuple[StrategySpec, float]] = []
    for kind in grid.strategies:
        gates = grid.gates if kind in ("dual", "gate_random") else (1.0,)
        variants = grid.pupil_variants if kind in ("pupil_abs", "fusion", "dual") else (grid.pupil_variants[0],)
        seeds = (grid.seeds[0],) if (dedup_deterministic and kind in DETERMINISTIC_KINDS) else grid.seeds
        for gate_k in gates:
            for variant in variants:
                for budget in grid.budgets:
                    for seed in seeds:
                        spec = StrategySpec(
                            kind=kind,
                            gate_k=gate_k,
                            fusion_weights=(grid.fusion_wg, grid.fusion_wp),
                            pupil_variant=variant,
                            stratified=grid.stratified,
                            seed=seed,
                            fusion_standardize=grid.fusion_standardize,
                        )
                        cells.append((spec, budget))
    return cells


def build_eval_dataset(frames_by_session: dict, embeddings_dir: Path, tasks: tuple[str, ...]) -> EvalDataset:
    fids: list[str] = []
    sids: list[str] = []
    feats: list[np.ndarray] = []
    labels: dict[str, list[int]] = {task: [] for task in tasks}
    for sid in sorted(frames_by_session):
        frames = frames_by_session[sid]
        emb_path = embeddings_dir / f"{sid}.emb"
        if not emb_path.exists():
            raise DataError(f"no embedding matrix for session {sid}: {emb_path}")
        matrix = load_embeddings(emb_path)
        check_embedding_refs(frames, matrix)
        for fr in frames:
            if fr.embedding_row is None:
                continue
            fids.append(fr.frame_id)
            sids.append(fr.session_id)
            feats.append(matrix.data[fr.embedding_row])
            for task in tasks:
                value = _task_label(fr, task)
                labels[task].append(value if value is not None else -1)
    if not feats:
        raise DataError("no frames with embeddings found")
    return EvalDataset(
        frame_ids=np.asarray(fids, dtype=str),
        session_ids=np.asarray(sids, dtype=str),
        features=np.vstack(feats).astype(np.float64),
        labels={task: np.asarray(vals, dtype=np.int64) for task, vals in labels.items()},
    )


def _task_label(fr, task: str):
    if task == "activity":
        return fr.activity
    if task == "scene":
        return fr.scene
    raise ConfigError(f"unknown task {task!r} (expected activity or scene)")


# ---------------------------------------------------------------------------
# synth


def cmd_synth(args: argparse.Namespace) -> int:
    mapping = _load_mapping(args)
    kwargs = synth_kwargs_from_mapping(mapping)
    if args.sessions is not None:
        kwargs["n_sessions"] = args.sessions
    if args.length is not None:
        kwargs["session_length_s"] = args.length
    if args.seed is not None:
        kwargs["seed"] = args.seed
    if args.preset:
        config = preset_config(args.preset, seed=kwargs.pop("seed", 0), **kwargs)
    else:
        config = SynthConfig(**kwargs)
    out = Path(args.out or mapping.get("paths.out_dir", "synth_data"))
    summary = generate_dataset(config, out, force=args.force)
    print(f"dataset checksum: {summary['checksum']}")
    print(f"sessions: {summary['n_sessions']}  frames: {summary['n_frames']}  out: {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# score


def cmd_score(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    frames_by_session = _load_frames(cfg)
    out = cfg.paths.out_dir
    (out / "scores").mkdir(parents=True, exist_ok=True)
    header = report.meta_line(cfg.hash)

    combined: list[pd.DataFrame] = []
    qc_all: dict[str, dict] = {}
    for sid in sorted(frames_by_session):
        t0 = time.perf_counter()
        try:
            eye = parse_eye_stream(_eye_path(cfg.paths.eye_dir, sid))
        except (DataError, FileNotFoundError) as exc:
            # a session without usable eye data is flagged, not fatal
            qc_all[sid] = {"session_id": sid, "flags": ["no_eye_stream"], "error": str(exc)}
            log.warning("session %s skipped: %s", sid, exc)
            continue
        bundle = SessionBundle(session_id=sid, eye=eye, frames=frames_by_session[sid])
        df, qc = score_session(bundle, cfg.scoring)
        write_score_table(df, out / "scores" / f"{sid}.csv", header=header)
        combined.append(df)
        qc_all[sid] = qc
        log.info("scored session=%s frames=%d wall_s=%.2f", sid, len(df), time.perf_counter() - t0)

    if not combined:
        raise DataError("no session could be scored")
    write_score_table(pd.concat(combined, ignore_index=True), out / "scores.csv", header=header)
    qc_payload = {"tool_version": __version__, "config_hash": cfg.hash, "sessions": qc_all}
    (out / "qc.json").write_text(json.dumps(qc_payload, indent=2, sort_keys=True) + "\n")
    print(f"scored {len(combined)} session(s) -> {out / 'scores.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# select


def _stratified_labels(scores: pd.DataFrame, frames_by_session: dict, task: str) -> np.ndarray:
    by_id = {}
    for frames in frames_by_session.values():
        for fr in frames:
            by_id[fr.frame_id] = _task_label(fr, task)
    vals = [by_id.get(fid) for fid in scores["frame_id"]]
    return np.asarray([v if v is not None else -1 for v in vals], dtype=np.int64)


def cmd_select(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    scores_path = cfg.paths.scores or (cfg.paths.out_dir / "scores.csv")
    scores = read_score_table(scores_path)

    labels = None
    if cfg.grid.stratified or args.stratified:
        frames_by_session = _load_frames(cfg)
        labels = _stratified_labels(scores, frames_by_session, cfg.grid.stratify_task)

    if args.strategy:
        spec = StrategySpec(
            kind=args.strategy,
            gate_k=args.gate if args.gate is not None else 0.75,
            fusion_weights=(cfg.grid.fusion_wg, cfg.grid.fusion_wp),
            pupil_variant=args.pupil or "delayed",
            stratified=bool(args.stratified),
            seed=args.seed if args.seed is not None else 0,
            fusion_standardize=cfg.grid.fusion_standardize,
        )
        budget = args.budget if args.budget is not None else 0.10
        manifest = select(spec, budget, scores, labels=labels)
        out_path = Path(args.out or "manifest.jsonl")
        write_manifest(manifest, out_path, tool_version=__version__, config_hash=cfg.hash)
        print(f"selected {len(manifest.selected)} / {manifest.pool_size} frames -> {out_path}")
        return EXIT_OK

    out_dir = cfg.paths.out_dir / "manifests"
    out_dir.mkdir(parents=True, exist_ok=True)
    n_written = n_skipped = 0
    for spec, budget in grid_cells(cfg.grid, dedup_deterministic=False):
        manifest = select(spec, budget, scores, labels=labels)
        name = (
            f"{spec.kind}_k{int(round(spec.gate_k * 100)):03d}_{spec.pupil_variant}"
            f"_b{int(round(budget * 100)):03d}_s{spec.seed:02d}.jsonl"
        )
        path = out_dir / name
        tmp = path.with_suffix(".jsonl.tmp")
        write_manifest(manifest, tmp, tool_version=__version__, config_hash=cfg.hash)
        if path.exists() and path.read_bytes() == tmp.read_bytes():
            tmp.unlink()
            n_skipped += 1
        else:
            tmp.replace(path)
            n_written += 1
    print(f"manifests: {n_written} written, {n_skipped} unchanged -> {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval


_POOL_CONTEXT: dict = {}


def _cell_worker(payload: tuple) -> tuple:
    task, spec, budget = payload
    ctx = _POOL_CONTEXT
    manifest = select(spec, budget, ctx["train_scores"][task], labels=ctx["labels"].get(task))
    res = run_cell(manifest, ctx["splits"][task], ctx["dataset"], task, ctx["probe"])
    return task, spec, budget, res.f1, res.n_train


def run_eval(cfg: RunConfig, jobs: int = 1) -> tuple[pd.DataFrame, list[str]]:
    """Run the full (task x strategy x budget x seed) probe sweep."""
    frames_by_session = _load_frames(cfg)
    dataset = build_eval_dataset(frames_by_session, cfg.paths.embeddings_dir, cfg.eval.tasks)
    scores_path = cfg.paths.scores or (cfg.paths.out_dir / "scores.csv")
    scores = read_score_table(scores_path)

    splits = {}
    train_scores = {}
    strat_labels: dict[str, np.ndarray] = {}
    for task in cfg.eval.tasks:
        y = dataset.labels[task]
        tallies: dict[str, dict[int, int]] = {}
        for sid in np.unique(dataset.session_ids):
            mask = (dataset.session_ids == sid) & (y >= 0)
            vals, counts = np.unique(y[mask], return_counts=True)
            tallies[str(sid)] = {int(v): int(c) for v, c in zip(vals, counts)}
        splits[task] = session_split(tallies, cfg.eval.test_fraction, cfg.eval.split_seed)
        mask = scores["session_id"].isin(splits[task].train_sessions)
        train_scores[task] = scores[mask].reset_index(drop=True)
        if cfg.grid.stratified:
            strat_labels[task] = _stratified_labels(
                train_scores[task], frames_by_session, cfg.grid.stratify_task
            )

    cells = [
        (task, spec, budget)
        for task in cfg.eval.tasks
        for spec, budget in grid_cells(cfg.grid, dedup_deterministic=True)
    ]

    _POOL_CONTEXT.clear()
    _POOL_CONTEXT.update(
        dataset=dataset,
        splits=splits,
        train_scores=train_scores,
        labels=strat_labels,
        probe=cfg.probe,
    )

    rows = []
    failures: list[str] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_cell_worker, cell): cell for cell in cells}
            for future, cell in futures.items():
                task, spec, budget = cell
                try:
                    _, _, _, f1, n_train = future.result()
                except GazecurateError as exc:
                    failures.append(
                        f"task={task} strategy={spec.kind} budget={budget:g} seed={spec.seed}: {exc}"
                    )
                    log.error("cell failed: %s", failures[-1])
                    continue
                rows.append(_result_row(task, spec, budget, cfg, f1, n_train))
    else:
        for cell in cells:
            task, spec, budget = cell
            t0 = time.perf_counter()
            try:
                _, _, _, f1, n_train = _cell_worker(cell)
            except GazecurateError as exc:
                failures.append(f"task={task} strategy={spec.kind} budget={budget:g} seed={spec.seed}: {exc}")
                log.error("cell failed: %s", failures[-1])
                continue
            rows.append(_result_row(task, spec, budget, cfg, f1, n_train))
            log.info(
                "cell task=%s strategy=%s gate=%g variant=%s budget=%g seed=%d f1=%.4f n_train=%d wall_s=%.2f",
                task, spec.kind, spec.gate_k, spec.pupil_variant, budget, spec.seed, f1, n_train,
                time.perf_counter() - t0,
            )

    results = pd.DataFrame(rows, columns=list(report.RESULT_COLUMNS))
    results = results.sort_values(
        ["task", "strategy", "gate", "pupil_variant", "budget", "seed"]
    ).reset_index(drop=True)
    return results, failures


def _result_row(task: str, spec: StrategySpec, budget: float, cfg: RunConfig, f1: float, n_train: int) -> dict:
    return {
        "task": task,
        "strategy": spec.kind,
        "budget": budget,
        "gate": spec.gate_k,
        "pupil_variant": spec.pupil_variant,
        "seed": spec.seed,
        "split_seed": cfg.eval.split_seed,
        "f1": f1,
        "n_train_frames": n_train,
    }


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    results, failures = run_eval(cfg, jobs=args.jobs)
    out = cfg.paths.out_dir
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(results, out / "results.csv", cfg.hash)
    if not results.empty:
        report.write_csv(report.summarize_aulc(results, cfg.stats), out / "aulc.csv", cfg.hash)
        ablation = report.summarize_ablation(results, gate=cfg.grid.gates[0])
        report.write_csv(ablation, out / "ablation.csv", cfg.hash)
    print(f"eval: {len(results)} cells ok, {len(failures)} failed -> {out / 'results.csv'}")
    if failures:
        for line in failures:
            print(f"  FAILED {line}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


# ---------------------------------------------------------------------------
# lags


def session_signals(cfg: RunConfig):
    """Per-session feature change, pupil-derivative and gaze-quality series."""
    frames_by_session = _load_frames(cfg)
    scores_path = cfg.paths.scores or (cfg.paths.out_dir / "scores.csv")
    scores = read_score_table(scores_path)
    deltas: dict[str, np.ndarray] = {}
    derivs: dict[str, np.ndarray] = {}
    gs: dict[str, np.ndarray] = {}
    for sid in sorted(frames_by_session):
        frames = frames_by_session[sid]
        if len(frames) < 3:
            log.warning("lags: session %s too short, skipped", sid)
            continue
        ts = np.array([fr.t for fr in frames])
        spacing = np.median(np.diff(ts))
        if abs(spacing - 1.0) > 0.05:
            raise DataError(
                f"lag analysis requires the 1 fps frame clock; session {sid} has {spacing:.3f} s spacing"
            )
        if any(fr.embedding_row is None for fr in frames):
            log.warning("lags: session %s lacks embedding rows for some frames, skipped", sid)
            continue
        emb_path = cfg.paths.embeddings_dir / f"{sid}.emb"
        matrix = load_embeddings(emb_path)
        check_embedding_refs(frames, matrix)
        E = matrix.data[[fr.embedding_row for fr in frames]]
        ses_scores = scores[scores["session_id"] == sid].sort_values("t")
        if len(ses_scores) != len(frames):
            raise DataError(f"lags: session {sid} has {len(ses_scores)} score rows for {len(frames)} frames")
        deltas[sid] = feature_change(E)
        derivs[sid] = ses_scores["deriv"].to_numpy(dtype=float)
        gs[sid] = ses_scores["g"].to_numpy(dtype=float)
    if not deltas:
        raise DataError("no sessions eligible for lag analysis")
    return deltas, derivs, gs


def cmd_lags(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    deltas, derivs, gs = session_signals(cfg)
    lags = cfg.stats.lags
    table = report.lag_table(
        {
            "pupil_deriv": lag_profile(derivs, deltas, lags=lags),
            "gaze_quality": lag_profile(gs, deltas, lags=lags),
        }
    )
    out = cfg.paths.out_dir
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(table, out / "lags.csv", cfg.hash)
    print(f"lag profile over {len(deltas)} session(s) -> {out / 'lags.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _run_config(args)
    out = cfg.paths.out_dir
    results_path = out / "results.csv"
    if not results_path.exists():
        raise DataError(f"no results.csv under {out}; run eval first")
    results = report.read_csv(results_path)
    results["strategy"] = results["strategy"].astype(str)

    curves = report.summarize_curves(results)
    aulc_df = report.summarize_aulc(results, cfg.stats)
    ablation = report.summarize_ablation(results, gate=cfg.grid.gates[0])
    report.write_csv(curves, out / "curves.csv", cfg.hash)
    report.write_csv(aulc_df, out / "aulc.csv", cfg.hash)
    report.write_csv(ablation, out / "ablation.csv", cfg.hash)

    tables = {"curves": curves, "aulc": aulc_df, "ablation": ablation}
    lags_path = out / "lags.csv"
    lags_df = None
    if lags_path.exists():
        lags_df = report.read_csv(lags_path)
        tables["lags"] = lags_df
    report.write_report_json(tables, out / "report.json", cfg.hash)
    figures = report.render_figures(out / "figures", curves=curves, aulc_df=aulc_df, lags=lags_df)
    print(f"report tables + {len(figures)} figure(s) -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gazecurate",
        description="Frame curation from eye-tracker side channels.",
    )
    parser.add_argument("--version", action="version", version=f"gazecurate {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="run configuration file (key = value lines)")
        p.add_argument("--data-dir", dest="data_dir", help="dataset root (frames.csv, eye/, embeddings/)")
        p.add_argument("--out", help="output directory (or file for single-cell select)")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    common(p)
    p.add_argument("--preset", choices=("vedb-shape", "golden", "tiny"))
    p.add_argument("--sessions", type=int)
    p.add_argument("--length", type=float, help="session length in seconds")
    p.add_argument("--seed", type=int)
    p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("score", help="compute per-session score tables")
    common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("select", help="build selection manifests")
    common(p)
    p.add_argument("--scores", help="scores.csv (or directory of per-session CSVs)")
    p.add_argument("--strategy", choices=("random", "gaze_only", "pupil_abs", "fusion", "dual", "gate_random"))
    p.add_argument("--budget", type=float)
    p.add_argument("--gate", type=float)
    p.add_argument("--pupil", choices=("centered", "delayed"))
    p.add_argument("--seed", type=int)
    p.add_argument("--stratified", action="store_true")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="run the probe sweep and summary statistics")
    common(p)
    p.add_argument("--scores", help="scores.csv (or directory)")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers over cells")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("lags", help="signal vs. feature-change lag profiles")
    common(p)
    p.add_argument("--scores", help="scores.csv (or directory)")
    p.set_defaults(func=cmd_lags)

    p = sub.add_parser("report", help="bundle CSV tables, plot-data JSON and figures")
    common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except GazecurateError as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
