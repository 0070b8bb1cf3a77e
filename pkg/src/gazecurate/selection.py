"""Frame selection strategies over a scored frame table.

Six strategy kinds are supported: uniform random, ranking by gaze quality,
ranking by pupil novelty, a weighted fusion of both, the two-stage gate+rank
curator (per-session gaze gate, then global novelty ranking), and its
gate+random ablation control. Every strategy is deterministic given a spec:
ties break by earlier timestamp then frame_id, and random draws come from a
counter-based generator keyed on (seed, budget) so sweeps reproduce
regardless of execution order.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Mapping

import numpy as np
import pandas as pd

from . import seeding
from .errors import DataError

log = logging.getLogger(__name__)

KINDS = ("random", "gaze_only", "pupil_abs", "fusion", "dual", "gate_random")
PUPIL_VARIANTS = ("centered", "delayed")

FLAG_CAPPED = "capped_by_gate"
FLAG_STRATIFIED_OFF_TARGET = "stratified_total_off_target"


@dataclass(frozen=True)
class StrategySpec:
    """Full description of one selection strategy."""

    kind: str
    gate_k: float = 0.75
    fusion_weights: tuple[float, float] = (0.5, 0.5)
    pupil_variant: str = "delayed"
    stratified: bool = False
    seed: int = 0
    fusion_standardize: bool = False

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise DataError(f"unknown strategy kind {self.kind!r}")
        if not (0.0 < self.gate_k <= 1.0):
            raise DataError(f"gate_k must lie in (0, 1], got {self.gate_k}")
        if self.pupil_variant not in PUPIL_VARIANTS:
            raise DataError(f"unknown pupil variant {self.pupil_variant!r}")
        w_g, w_p = self.fusion_weights
        if w_g < 0 or w_p < 0 or abs(w_g + w_p - 1.0) > 1e-9:
            raise DataError(f"fusion weights must be nonnegative and sum to 1, got {self.fusion_weights}")

    @property
    def gated(self) -> bool:
        return self.kind in ("dual", "gate_random")

    def label(self) -> str:
        """Short name used in file names and result rows."""
        return self.kind


@dataclass(frozen=True)
class SelectedFrame:
    frame_id: str
    session_id: str
    g: float
    nov: float
    rank: int


@dataclass
class SelectionManifest:
    """Which frames a (strategy, budget) pair keeps, plus provenance."""

    spec: StrategySpec
    budget_b: float
    selected: list[SelectedFrame]
    pool_size: int
    gated_size: int
    tau_k: dict[str, float] = field(default_factory=dict)
    flags: tuple[str, ...] = ()

    @property
    def selected_ids(self) -> list[str]:
        return [fr.frame_id for fr in self.selected]

    @property
    def selected_id_set(self) -> frozenset[str]:
        return frozenset(fr.frame_id for fr in self.selected)


def budget_size(budget_b: float, pool_total: int) -> int:
    """Target selection size: round-half-even of b * |pool|, at least 1."""
    return max(1, int(np.round(budget_b * pool_total)))


def _canonicalize(scores: pd.DataFrame, labels: np.ndarray | None):
    """Sort rows by (session_id, t, frame_id) and carry labels along."""
    sid = scores["session_id"].to_numpy(dtype=str)
    t = scores["t"].to_numpy(dtype=np.float64)
    fid = scores["frame_id"].to_numpy(dtype=str)
    perm = np.lexsort((fid, t, sid))
    scores = scores.iloc[perm].reset_index(drop=True)
    if labels is not None:
        labels = np.asarray(labels)[perm]
    return scores, labels


def gate(scores: pd.DataFrame, k: float) -> tuple[np.ndarray, dict[str, float]]:
    """Per-session gaze-quality gate: keep the ceil(k * n_s) highest-g frames.

    Returns the kept row indices in canonical order plus the per-session
    threshold (g of the last frame kept). Ties break by earlier timestamp
    then frame_id. Expects canonically ordered scores.
    """
    sid = scores["session_id"].to_numpy(dtype=str)
    t = scores["t"].to_numpy(dtype=np.float64)
    fid = scores["frame_id"].to_numpy(dtype=str)
    g = scores["g"].to_numpy(dtype=np.float64)
    kept_idx: list[np.ndarray] = []
    tau: dict[str, float] = {}
    for session in np.unique(sid):
        rows = np.flatnonzero(sid == session)
        n_keep = math.ceil(k * rows.size)
        order = np.lexsort((fid[rows], t[rows], -g[rows]))
        top = rows[order[:n_keep]]
        tau[str(session)] = float(g[top[-1]]) if n_keep else float("nan")
        kept_idx.append(top)
    kept = np.sort(np.concatenate(kept_idx)) if kept_idx else np.array([], dtype=int)
    return kept, tau


def rank_select(
    keys: np.ndarray, t: np.ndarray, frame_ids: np.ndarray, n: int
) -> np.ndarray:
    """Positions of the top-n entries by key, deterministic tie-break.

    Returns positions in rank order. n >= pool size returns the whole pool.
    """
    keys = np.asarray(keys, dtype=np.float64)
    if not np.all(np.isfinite(keys)):
        raise DataError("ranking keys must be finite")
    order = np.lexsort((frame_ids, t, -keys))
    return order[: max(0, n)]


def _uniform_rng(spec: StrategySpec, budget_b: float) -> np.random.Generator:
    # keyed on (seed, budget) only: the uniform stage is one shared primitive,
    # which is what makes gate_random at k = 1 coincide with plain random
    return seeding.generator("select-uniform", spec.seed, budget_b)


def select(
    spec: StrategySpec,
    budget_b: float,
    score_table: pd.DataFrame,
    labels: np.ndarray | None = None,
) -> SelectionManifest:
    """Build the selection manifest for one (strategy, budget) cell.

    ``labels`` (one class index per score row) is required only for
    stratified specs. Gated strategies compute the target size from the full
    pool and cap at the gate size with a flag when the budget exceeds it.
    """
    if not (0.0 < budget_b <= 1.0):
        raise DataError(f"budget must lie in (0, 1], got {budget_b}")
    if spec.stratified:
        if labels is None:
            raise DataError("stratified selection requires labels")
        return stratified_select(spec, budget_b, score_table, labels)

    scores, _ = _canonicalize(score_table, None)
    total = len(scores)
    if total == 0:
        raise DataError("empty score table")
    n = budget_size(budget_b, total)

    t = scores["t"].to_numpy(dtype=np.float64)
    fid = scores["frame_id"].to_numpy(dtype=str)
    g = scores["g"].to_numpy(dtype=np.float64)
    nov = scores[f"nov_{spec.pupil_variant}"].to_numpy(dtype=np.float64)

    flags: list[str] = []
    tau: dict[str, float] = {}
    gated_size = total
    if spec.gated:
        pool, tau = gate(scores, spec.gate_k)
        gated_size = pool.size
    else:
        pool = np.arange(total)

    if n > pool.size:
        flags.append(FLAG_CAPPED)
        n = pool.size

    if spec.kind in ("random", "gate_random"):
        rng = _uniform_rng(spec, budget_b)
        picks = pool[rng.choice(pool.size, size=n, replace=False)]
    else:
        key = _ranking_key(spec, g, nov)
        positions = rank_select(key[pool], t[pool], fid[pool], n)
        picks = pool[positions]

    selected = [
        SelectedFrame(
            frame_id=str(fid[i]),
            session_id=str(scores["session_id"].iat[i]),
            g=float(g[i]),
            nov=float(nov[i]),
            rank=r + 1,
        )
        for r, i in enumerate(picks)
    ]
    return SelectionManifest(
        spec=spec,
        budget_b=budget_b,
        selected=selected,
        pool_size=total,
        gated_size=gated_size,
        tau_k=tau,
        flags=tuple(flags),
    )


def _ranking_key(spec: StrategySpec, g: np.ndarray, nov: np.ndarray) -> np.ndarray:
    if spec.kind == "gaze_only":
        return g
    if spec.kind in ("pupil_abs", "dual"):
        return nov
    if spec.kind == "fusion":
        w_g, w_p = spec.fusion_weights
        if spec.fusion_standardize:
            g = _zscore_or_zero(g)
            nov = _zscore_or_zero(nov)
        return w_g * g + w_p * nov
    raise DataError(f"strategy {spec.kind!r} has no ranking key")


def _zscore_or_zero(x: np.ndarray) -> np.ndarray:
    sd = float(np.std(x))
    if sd < 1e-12:
        return np.zeros_like(x)
    return (x - float(np.mean(x))) / sd


def stratified_select(
    spec: StrategySpec,
    budget_b: float,
    score_table: pd.DataFrame,
    labels: np.ndarray,
) -> SelectionManifest:
    """Per-class proportional selection using the strategy's ranking rule.

    Class quotas start at round-half-even of b * n_c and are nudged by
    largest-remainder so the total matches the global target; classes too
    small to earn a slot are flagged as minority-starved.
    """
    scores, labels = _canonicalize(score_table, np.asarray(labels))
    if labels.shape[0] != len(scores):
        raise DataError("labels must align with the score table rows")
    if np.any(labels < 0):
        raise DataError(f"{int(np.sum(labels < 0))} frame(s) lack a label for the stratified task")
    total = len(scores)
    target = budget_size(budget_b, total)

    t = scores["t"].to_numpy(dtype=np.float64)
    fid = scores["frame_id"].to_numpy(dtype=str)
    g = scores["g"].to_numpy(dtype=np.float64)
    nov = scores[f"nov_{spec.pupil_variant}"].to_numpy(dtype=np.float64)

    flags: list[str] = []
    tau: dict[str, float] = {}
    gated_size = total
    if spec.gated:
        pool, tau = gate(scores, spec.gate_k)
        gated_size = pool.size
    else:
        pool = np.arange(total)
    in_pool = np.zeros(total, dtype=bool)
    in_pool[pool] = True

    classes = np.unique(labels)
    n_c = {int(c): int(np.sum(labels == c)) for c in classes}
    avail = {int(c): np.flatnonzero((labels == c) & in_pool) for c in classes}
    quotas = {c: min(int(np.round(budget_b * n)), avail[c].size) for c, n in n_c.items()}
    _largest_remainder_adjust(quotas, n_c, avail, budget_b, target)
    for c in classes:
        if n_c[int(c)] > 0 and quotas[int(c)] == 0:
            flags.append(f"minority_starved:{int(c)}")
    if sum(quotas.values()) != target:
        flags.append(FLAG_STRATIFIED_OFF_TARGET)

    picks: list[int] = []
    for c in sorted(quotas):
        quota = quotas[c]
        if quota == 0:
            continue
        rows = avail[c]
        if spec.kind in ("random", "gate_random"):
            rng = seeding.generator("select-uniform-stratified", spec.seed, budget_b, c)
            chosen = rows[rng.choice(rows.size, size=quota, replace=False)]
        else:
            key = _ranking_key(spec, g, nov)
            chosen = rows[rank_select(key[rows], t[rows], fid[rows], quota)]
        picks.extend(int(i) for i in chosen)

    selected = [
        SelectedFrame(
            frame_id=str(fid[i]),
            session_id=str(scores["session_id"].iat[i]),
            g=float(g[i]),
            nov=float(nov[i]),
            rank=r + 1,
        )
        for r, i in enumerate(picks)
    ]
    return SelectionManifest(
        spec=spec,
        budget_b=budget_b,
        selected=selected,
        pool_size=total,
        gated_size=gated_size,
        tau_k=tau,
        flags=tuple(flags),
    )


def _largest_remainder_adjust(
    quotas: dict[int, int],
    n_c: Mapping[int, int],
    avail: Mapping[int, np.ndarray],
    budget_b: float,
    target: int,
) -> None:
    diff = target - sum(quotas.values())
    if diff == 0:
        return
    remainder = {c: budget_b * n_c[c] - math.floor(budget_b * n_c[c]) for c in quotas}
    if diff > 0:
        order = sorted(quotas, key=lambda c: (-remainder[c], c))
        while diff > 0:
            progressed = False
            for c in order:
                if diff == 0:
                    break
                if quotas[c] < avail[c].size:
                    quotas[c] += 1
                    diff -= 1
                    progressed = True
            if not progressed:
                return
    else:
        order = sorted(quotas, key=lambda c: (remainder[c], c))
        while diff < 0:
            progressed = False
            for c in order:
                if diff == 0:
                    break
                if quotas[c] > 0:
                    quotas[c] -= 1
                    diff += 1
                    progressed = True
            if not progressed:
                return


# ---------------------------------------------------------------------------
# manifest serialization (JSON lines: one header object, one object per frame)


def write_manifest(
    manifest: SelectionManifest,
    path: str | Path,
    tool_version: str | None = None,
    config_hash: str | None = None,
) -> None:
    header = {
        "spec": _spec_dict(manifest.spec),
        "budget": manifest.budget_b,
        "pool_size": manifest.pool_size,
        "gated_size": manifest.gated_size,
        "tau_k": manifest.tau_k,
        "flags": list(manifest.flags),
    }
    if tool_version is not None:
        header["tool_version"] = tool_version
    if config_hash is not None:
        header["config_hash"] = config_hash
    with Path(path).open("w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for fr in manifest.selected:
            fh.write(
                json.dumps(
                    {
                        "frame_id": fr.frame_id,
                        "session_id": fr.session_id,
                        "g": fr.g,
                        "nov": fr.nov,
                        "rank": fr.rank,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_manifest(path: str | Path) -> SelectionManifest:
    with Path(path).open() as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines:
        raise DataError(f"{path}: empty manifest")
    header = lines[0]
    sd = dict(header["spec"])
    sd["fusion_weights"] = tuple(sd["fusion_weights"])
    spec = StrategySpec(**sd)
    selected = [
        SelectedFrame(
            frame_id=str(rec["frame_id"]),
            session_id=str(rec["session_id"]),
            g=float(rec["g"]),
            nov=float(rec["nov"]),
            rank=int(rec["rank"]),
        )
        for rec in lines[1:]
    ]
    return SelectionManifest(
        spec=spec,
        budget_b=float(header["budget"]),
        selected=selected,
        pool_size=int(header["pool_size"]),
        gated_size=int(header["gated_size"]),
        tau_k={str(k): float(v) for k, v in header.get("tau_k", {}).items()},
        flags=tuple(header.get("flags", ())),
    )


def _spec_dict(spec: StrategySpec) -> dict:
    d = asdict(spec)
    d["fusion_weights"] = list(spec.fusion_weights)
    return d
