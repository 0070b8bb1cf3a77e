"""Flat key-value run configuration with dotted sections.

Grammar (one assignment per line)::

    # comment
    section.key = value

Values are interpreted by the consumer: integers, floats, booleans
(true/false), bare strings, comma-separated lists, and integer ranges
written ``a..b`` (inclusive). CLI flags override file values; every report
embeds the hash of the effective mapping so outputs are traceable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping

from .errors import ConfigError
from .probe import ProbeConfig
from .pupil import ScoreParams

DEFAULT_BUDGETS = (0.05, 0.10, 0.25, 0.50, 0.75, 1.00)
DEFAULT_GATES = (0.75,)
GATE_SWEEP = (0.25, 0.50, 0.75, 0.90, 1.00)
DEFAULT_SEEDS = tuple(range(10))
DEFAULT_STRATEGIES = ("random", "gaze_only", "pupil_abs", "fusion", "dual", "gate_random")
DETERMINISTIC_KINDS = ("gaze_only", "pupil_abs", "fusion", "dual")


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        mapping[key] = value.strip()
    return mapping


def parse_config_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), source=str(path))


def config_hash(mapping: Mapping[str, str]) -> str:
    """Short stable hash of the effective configuration.

    Path keys are excluded so the same run emits identical outputs wherever
    the data happens to live.
    """
    canon = "\n".join(f"{k}={mapping[k]}" for k in sorted(mapping) if not k.startswith("paths."))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


# -- typed readers ----------------------------------------------------------


def get_str(m: Mapping[str, str], key: str, default: str | None = None) -> str:
    if key in m:
        return m[key]
    if default is None:
        raise ConfigError(f"missing required config key {key!r}")
    return default


def get_float(m: Mapping[str, str], key: str, default: float) -> float:
    try:
        return float(m.get(key, default))
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None


def get_int(m: Mapping[str, str], key: str, default: int) -> int:
    try:
        return int(str(m.get(key, default)))
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None


def get_bool(m: Mapping[str, str], key: str, default: bool) -> bool:
    raw = str(m.get(key, default)).strip().lower()
    if raw in ("true", "1", "yes", "on"):
        return True
    if raw in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"config key {key!r}: expected true/false, got {raw!r}")


def get_float_list(m: Mapping[str, str], key: str, default: tuple[float, ...]) -> tuple[float, ...]:
    if key not in m:
        return default
    try:
        return tuple(float(tok) for tok in m[key].split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None


def get_int_list(m: Mapping[str, str], key: str, default: tuple[int, ...]) -> tuple[int, ...]:
    if key not in m:
        return default
    out: list[int] = []
    for tok in m[key].split(","):
        tok = tok.strip()
        if not tok:
            continue
        if ".." in tok:
            a, b = tok.split("..", 1)
            try:
                out.extend(range(int(a), int(b) + 1))
            except ValueError as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from None
        else:
            try:
                out.append(int(tok))
            except ValueError as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from None
    return tuple(out)


def get_str_list(m: Mapping[str, str], key: str, default: tuple[str, ...]) -> tuple[str, ...]:
    if key not in m:
        return default
    return tuple(tok.strip() for tok in m[key].split(",") if tok.strip())


# -- structured run configuration -------------------------------------------


@dataclass(frozen=True)
class PathsConfig:
    frames: Path
    eye_dir: Path
    embeddings_dir: Path
    labels: Path | None
    out_dir: Path
    scores: Path | None = None


@dataclass(frozen=True)
class SelectGrid:
    strategies: tuple[str, ...] = DEFAULT_STRATEGIES
    gates: tuple[float, ...] = DEFAULT_GATES
    budgets: tuple[float, ...] = DEFAULT_BUDGETS
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    pupil_variants: tuple[str, ...] = ("delayed",)
    fusion_wg: float = 0.5
    fusion_wp: float = 0.5
    fusion_standardize: bool = False
    stratified: bool = False
    stratify_task: str = "activity"

    def __post_init__(self) -> None:
        if not self.strategies or not self.budgets or not self.seeds or not self.gates:
            raise ConfigError("selection grid must not be empty")


@dataclass(frozen=True)
class EvalSettings:
    tasks: tuple[str, ...] = ("activity", "scene")
    test_fraction: float = 0.30
    split_seed: int = 0


@dataclass(frozen=True)
class StatsSettings:
    bootstrap_resamples: int = 1000
    bootstrap_seed: int = 0
    level: float = 0.95
    bonferroni_m: int = 4
    alpha: float = 0.05
    aulc_mode: str = "mean"
    lag_min: int = -3
    lag_max: int = 5

    @property
    def lags(self) -> tuple[int, ...]:
        return tuple(range(self.lag_min, self.lag_max + 1))


@dataclass
class RunConfig:
    paths: PathsConfig
    scoring: ScoreParams
    grid: SelectGrid
    probe: ProbeConfig
    eval: EvalSettings
    stats: StatsSettings
    raw: dict[str, str] = field(default_factory=dict)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def run_config_from_mapping(m: Mapping[str, str]) -> RunConfig:
    data_dir = m.get("paths.data_dir")
    root = Path(data_dir) if data_dir else None

    def path_for(key: str, default_name: str | None) -> Path | None:
        if key in m:
            return Path(m[key])
        if root is not None and default_name is not None:
            return root / default_name
        return None

    frames = path_for("paths.frames", "frames.csv")
    eye_dir = path_for("paths.eye_dir", "eye")
    emb_dir = path_for("paths.embeddings_dir", "embeddings")
    labels = path_for("paths.labels", "labels.json")
    out_dir = Path(m.get("paths.out_dir", "out"))
    scores = path_for("paths.scores", None)
    if frames is None or eye_dir is None or emb_dir is None:
        raise ConfigError("paths.data_dir or explicit paths.frames/eye_dir/embeddings_dir required")

    scoring = ScoreParams(
        half_width_s=get_float(m, "scoring.half_width_s", 0.050),
        delayed_lo_s=get_float(m, "scoring.delayed_lo_s", 0.300),
        delayed_hi_s=get_float(m, "scoring.delayed_hi_s", 1.500),
        v_thresh=get_float(m, "scoring.v_thresh", 0.5),
        ramp_s=get_float(m, "scoring.ramp_s", 0.150),
        poly_degree=get_int(m, "scoring.poly_degree", 2),
        rolling_window_s=get_float(m, "scoring.rolling_window_s", 10.0),
        mad_consistency=get_float(m, "scoring.mad_consistency", 1.0),
    )
    grid = SelectGrid(
        strategies=get_str_list(m, "select.strategies", DEFAULT_STRATEGIES),
        gates=get_float_list(m, "select.gates", DEFAULT_GATES),
        budgets=get_float_list(m, "select.budgets", DEFAULT_BUDGETS),
        seeds=get_int_list(m, "select.seeds", DEFAULT_SEEDS),
        pupil_variants=get_str_list(m, "select.pupil_variants", ("delayed",)),
        fusion_wg=get_float(m, "select.fusion_wg", 0.5),
        fusion_wp=get_float(m, "select.fusion_wp", 0.5),
        fusion_standardize=get_bool(m, "select.fusion_standardize", False),
        stratified=get_bool(m, "select.stratified", False),
        stratify_task=get_str(m, "select.stratify_task", "activity"),
    )
    probe = ProbeConfig(
        l2_lambda=get_float(m, "probe.l2_lambda", 1.0),
        max_iters=get_int(m, "probe.max_iters", 1000),
        tol=get_float(m, "probe.tol", 1e-6),
        class_weighting=get_str(m, "probe.class_weighting", "uniform"),
    )
    eval_settings = EvalSettings(
        tasks=get_str_list(m, "eval.tasks", ("activity", "scene")),
        test_fraction=get_float(m, "probe.test_fraction", 0.30),
        split_seed=get_int(m, "probe.split_seed", 0),
    )
    stats_settings = StatsSettings(
        bootstrap_resamples=get_int(m, "stats.bootstrap_resamples", 1000),
        bootstrap_seed=get_int(m, "stats.bootstrap_seed", 0),
        level=get_float(m, "stats.level", 0.95),
        bonferroni_m=get_int(m, "stats.bonferroni_m", 4),
        alpha=get_float(m, "stats.alpha", 0.05),
        aulc_mode=get_str(m, "stats.aulc_mode", "mean"),
        lag_min=get_int(m, "stats.lag_min", -3),
        lag_max=get_int(m, "stats.lag_max", 5),
    )
    return RunConfig(
        paths=PathsConfig(
            frames=frames,
            eye_dir=eye_dir,
            embeddings_dir=emb_dir,
            labels=labels,
            out_dir=out_dir,
            scores=scores,
        ),
        scoring=scoring,
        grid=grid,
        probe=probe,
        eval=eval_settings,
        stats=stats_settings,
        raw=dict(m),
    )


def synth_kwargs_from_mapping(m: Mapping[str, str]) -> dict:
    """Extract synth.* overrides typed against SynthConfig's fields."""
    from .synth import SynthConfig

    kwargs: dict = {}
    type_by_name = {f.name: f.type for f in fields(SynthConfig)}
    for key, value in m.items():
        if not key.startswith("synth."):
            continue
        name = key[len("synth.") :]
        if name not in type_by_name:
            raise ConfigError(f"unknown synth config key {key!r}")
        ftype = str(type_by_name[name])
        try:
            if ftype == "int":
                kwargs[name] = int(value)
            elif ftype == "float":
                kwargs[name] = float(value)
            else:
                kwargs[name] = value
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from None
    return kwargs
