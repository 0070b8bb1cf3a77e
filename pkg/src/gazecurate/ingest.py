"""Readers and frame-clock alignment for eye-tracker side channels.

Covers the three capture-time inputs (eye stream, frame metadata, embedding
matrices) plus the windowing that aligns high-rate eye samples to the 1 fps
frame clock. All parsers are strict about format contracts and report row
numbers when they reject data.
"""

from __future__ import annotations

import json
import logging
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import (
    BadMagic,
    ChecksumMismatch,
    DataError,
    DimMismatch,
    DuplicateFrameId,
    EmptyStream,
    MissingColumn,
    NonMonotoneTimestamps,
    OutOfRangeField,
    TruncatedPayload,
    UnknownLabel,
)

log = logging.getLogger(__name__)

EYE_COLUMNS = ("t", "gaze_x", "gaze_y", "confidence", "pupil_mm")
FRAME_COLUMNS = (
    "frame_id",
    "session_id",
    "t",
    "brightness",
    "activity",
    "scene",
    "embedding_row",
)

# Default label dictionaries for the two session-level tasks.
ACTIVITY_CLASSES = (
    "walking",
    "cooking",
    "driving",
    "screen_use",
    "reading",
    "eating",
    "socializing",
    "shopping",
    "exercising",
    "playing_games",
    "grooming",
    "chores",
)
SCENE_CLASSES = (
    "kitchen",
    "office",
    "street",
    "store",
    "restaurant",
    "gym",
    "park",
    "bedroom",
    "living_room",
    "bathroom",
    "garage",
    "yard",
    "car_interior",
    "public_transit",
    "classroom",
    "other",
)

EMB_MAGIC = b"EMB1"
_EMB_HEADER = struct.Struct("<4sIII")

# Fraction of in-file timestamp regressions beyond which a stream is rejected.
MAX_REGRESSION_FRACTION = 0.001


@dataclass(frozen=True)
class EyeSample:
    """One eye-tracker reading; pupil_mm is NaN during blinks/dropouts."""

    t: float
    gaze_x: float
    gaze_y: float
    confidence: float
    pupil_mm: float


class EyeStream(Sequence):
    """Time-ordered eye samples for one session, stored column-wise.

    Behaves as an ordered sequence of :class:`EyeSample` while keeping the
    columns as flat float64 arrays, which is what every downstream window
    operation wants (and what keeps hour-long 120 Hz sessions cheap).
    """

    __slots__ = ("t", "gaze_x", "gaze_y", "confidence", "pupil_mm", "rejected_rows")

    def __init__(
        self,
        t: np.ndarray,
        gaze_x: np.ndarray,
        gaze_y: np.ndarray,
        confidence: np.ndarray,
        pupil_mm: np.ndarray,
        rejected_rows: tuple[int, ...] = (),
    ) -> None:
        self.t = np.asarray(t, dtype=np.float64)
        self.gaze_x = np.asarray(gaze_x, dtype=np.float64)
        self.gaze_y = np.asarray(gaze_y, dtype=np.float64)
        self.confidence = np.asarray(confidence, dtype=np.float64)
        self.pupil_mm = np.asarray(pupil_mm, dtype=np.float64)
        self.rejected_rows = rejected_rows

    @classmethod
    def from_samples(cls, samples: Sequence[EyeSample]) -> "EyeStream":
        cols = list(zip(*((s.t, s.gaze_x, s.gaze_y, s.confidence, s.pupil_mm) for s in samples))) or [
            (),
            (),
            (),
            (),
            (),
        ]
        stream = cls(*(np.asarray(c, dtype=np.float64) for c in cols))
        stream.sort_canonical()
        return stream

    def sort_canonical(self) -> None:
        """Stable sort by (t, gaze_x, gaze_y, confidence).

        The secondary keys make the ordering of same-timestamp samples
        independent of input permutation, so window scores are too.
        """
        order = np.lexsort((self.confidence, self.gaze_y, self.gaze_x, self.t))
        for name in ("t", "gaze_x", "gaze_y", "confidence", "pupil_mm"):
            setattr(self, name, getattr(self, name)[order])

    def __len__(self) -> int:
        return int(self.t.shape[0])

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return [self[i] for i in range(*idx.indices(len(self)))]
        return EyeSample(
            float(self.t[idx]),
            float(self.gaze_x[idx]),
            float(self.gaze_y[idx]),
            float(self.confidence[idx]),
            float(self.pupil_mm[idx]),
        )

    def __iter__(self) -> Iterator[EyeSample]:
        for i in range(len(self)):
            yield self[i]


@dataclass(frozen=True)
class FrameRecord:
    """Metadata for one 1 fps video frame; labels are class indices or None."""

    frame_id: str
    session_id: str
    t: float
    brightness: float
    activity: int | None
    scene: int | None
    embedding_row: int | None

    @property
    def unlabeled(self) -> bool:
        return self.activity is None and self.scene is None


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Row-major float32 matrix of per-frame features."""

    data: np.ndarray

    @property
    def rows(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])


@dataclass
class WindowAggregate:
    """Eye samples falling inside one frame-anchored time window.

    ``prev`` is the last sample strictly before the window, when one exists;
    velocity computations use it so the first in-window sample still gets a
    velocity instead of being silently dropped at the window edge.
    """

    frame_t: float
    lo_s: float
    hi_s: float
    t: np.ndarray
    gaze_x: np.ndarray
    gaze_y: np.ndarray
    confidence: np.ndarray
    pupil_mm: np.ndarray
    prev: EyeSample | None = None

    @property
    def n(self) -> int:
        return int(self.t.shape[0])

    @property
    def empty(self) -> bool:
        return self.n == 0

    @property
    def samples(self) -> list[EyeSample]:
        return [
            EyeSample(
                float(self.t[i]),
                float(self.gaze_x[i]),
                float(self.gaze_y[i]),
                float(self.confidence[i]),
                float(self.pupil_mm[i]),
            )
            for i in range(self.n)
        ]


# ---------------------------------------------------------------------------
# eye stream parsing


def _as_float_precise(col: pd.Series) -> np.ndarray:
    """Column to float64 without precision loss; unparsable/missing -> NaN.

    pandas' fast numeric coercion rounds past ~14 significant digits, so
    string entries are re-parsed through Python's exact float conversion.
    """
    if col.dtype.kind in "fiu":
        return col.to_numpy(dtype=np.float64)
    numeric = pd.to_numeric(col, errors="coerce").to_numpy(dtype=np.float64)
    good = np.isfinite(numeric)
    if good.any():
        numeric[good] = np.asarray([str(v) for v in col[good]], dtype=np.float64)
    return numeric


def parse_eye_stream(path: str | Path, format: str | None = None) -> EyeStream:
    """Parse a CSV or JSON-lines eye stream into a time-sorted EyeStream.

    Rows whose required fields cannot be parsed are rejected and reported by
    row number (1-based data rows) on ``EyeStream.rejected_rows``. Missing
    pupil values are carried as NaN. Raises MissingColumn, OutOfRangeField,
    NonMonotoneTimestamps or EmptyStream per the format contract.
    """
    path = Path(path)
    fmt = format or ("jsonl" if path.suffix in (".jsonl", ".ndjson") else "csv")
    if fmt == "csv":
        df = pd.read_csv(path, float_precision="round_trip")
    elif fmt in ("jsonl", "json-lines"):
        records = []
        with path.open() as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        df = pd.DataFrame.from_records(records) if records else pd.DataFrame()
    else:
        raise DataError(f"unknown eye stream format: {fmt!r}")

    missing = [c for c in EYE_COLUMNS if c not in df.columns]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")
    if len(df) == 0:
        raise EmptyStream(f"{path}: no samples")

    cols = {c: _as_float_precise(df[c]) for c in EYE_COLUMNS}
    t, gx, gy, conf, pupil = (cols[c] for c in EYE_COLUMNS)

    bad = ~np.isfinite(t) | ~np.isfinite(conf)
    # gaze must be finite whenever the tracker claims any confidence
    bad |= (conf > 0) & (~np.isfinite(gx) | ~np.isfinite(gy))
    rejected = tuple(int(i) + 1 for i in np.flatnonzero(bad))
    if rejected:
        log.warning("%s: rejected %d unparsable row(s): %s", path, len(rejected), rejected[:20])
    keep = ~bad
    t, gx, gy, conf, pupil = t[keep], gx[keep], gy[keep], conf[keep], pupil[keep]
    if t.size == 0:
        raise EmptyStream(f"{path}: no usable samples after rejecting {len(rejected)} row(s)")

    out_of_range = np.flatnonzero((conf < 0.0) | (conf > 1.0))
    if out_of_range.size:
        orig_rows = np.flatnonzero(keep)[out_of_range]
        row = int(orig_rows[0]) + 1
        raise OutOfRangeField("confidence", row, float(conf[out_of_range[0]]))

    n_regress = int(np.sum(np.diff(t) < 0))
    if t.size > 1 and n_regress / t.size > MAX_REGRESSION_FRACTION:
        raise NonMonotoneTimestamps(
            f"{path}: {n_regress} of {t.size} rows regress in time (> {MAX_REGRESSION_FRACTION:.1%})"
        )

    stream = EyeStream(t, gx, gy, conf, pupil, rejected_rows=rejected)
    stream.sort_canonical()
    return stream


def write_eye_stream(stream: EyeStream, path: str | Path, format: str = "csv") -> None:
    """Serialize a stream losslessly (full float64 precision) for round-trips."""
    path = Path(path)
    df = pd.DataFrame(
        {
            "t": stream.t,
            "gaze_x": stream.gaze_x,
            "gaze_y": stream.gaze_y,
            "confidence": stream.confidence,
            "pupil_mm": stream.pupil_mm,
        }
    )
    if format == "csv":
        df.to_csv(path, index=False, float_format="%.17g")
    elif format in ("jsonl", "json-lines"):
        with path.open("w") as fh:
            for rec in df.to_dict(orient="records"):
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    else:
        raise DataError(f"unknown eye stream format: {format!r}")


# ---------------------------------------------------------------------------
# frame metadata


def normalize_label(label: str) -> str:
    return label.strip().lower().replace(" ", "_")


def parse_frames(
    path: str | Path,
    activity_labels: Sequence[str] | None = None,
    scene_labels: Sequence[str] | None = None,
) -> dict[str, list[FrameRecord]]:
    """Parse frame metadata into per-session lists sorted by time.

    Labels are mapped through the given dictionaries (defaults: the built-in
    activity/scene class lists). Frames with empty labels are retained with
    None in that slot. Raises UnknownLabel or DuplicateFrameId.
    """
    path = Path(path)
    act_index = {normalize_label(name): i for i, name in enumerate(activity_labels or ACTIVITY_CLASSES)}
    scn_index = {normalize_label(name): i for i, name in enumerate(scene_labels or SCENE_CLASSES)}

    df = pd.read_csv(path, dtype=str, comment="#")
    missing = [c for c in FRAME_COLUMNS if c not in df.columns]
    if missing:
        raise MissingColumn(f"{path}: missing column(s) {', '.join(missing)}")

    dup = df["frame_id"][df["frame_id"].duplicated()]
    if len(dup):
        raise DuplicateFrameId(f"{path}: duplicate frame_id {dup.iloc[0]!r}")

    t = _as_float_precise(df["t"])
    brightness = _as_float_precise(df["brightness"])
    bad_bright = np.flatnonzero(~np.isfinite(brightness) | ~np.isfinite(t))
    if bad_bright.size:
        row = int(bad_bright[0]) + 1
        raise OutOfRangeField("brightness/t", row, df.iloc[bad_bright[0]].to_dict())

    def lookup(raw: object, index: Mapping[str, int], field: str, row: int) -> int | None:
        if raw is None or (isinstance(raw, float) and np.isnan(raw)) or str(raw).strip() == "":
            return None
        key = normalize_label(str(raw))
        if key not in index:
            raise UnknownLabel(f"{path}: unknown {field} label {raw!r} on row {row}")
        return index[key]

    sessions: dict[str, list[FrameRecord]] = {}
    for i, rec in enumerate(df.itertuples(index=False)):
        emb = rec.embedding_row
        emb_row: int | None
        if emb is None or (isinstance(emb, float) and np.isnan(emb)) or str(emb).strip() == "":
            emb_row = None
        else:
            emb_row = int(float(emb))
            if emb_row < 0:
                raise OutOfRangeField("embedding_row", i + 1, emb_row)
        frame = FrameRecord(
            frame_id=str(rec.frame_id),
            session_id=str(rec.session_id),
            t=float(t[i]),
            brightness=float(brightness[i]),
            activity=lookup(rec.activity, act_index, "activity", i + 1),
            scene=lookup(rec.scene, scn_index, "scene", i + 1),
            embedding_row=emb_row,
        )
        sessions.setdefault(frame.session_id, []).append(frame)

    for sid in sessions:
        sessions[sid].sort(key=lambda fr: (fr.t, fr.frame_id))
    return dict(sorted(sessions.items()))


# ---------------------------------------------------------------------------
# embedding matrices


def write_embeddings(path: str | Path, data: np.ndarray, checksum: bool = False) -> None:
    """Write a matrix in the binary embedding format.

    Header: magic "EMB1", u32-le rows, u32-le dim, u32-le reserved. The
    reserved word is 0, or the CRC32 of the payload when ``checksum`` is set.
    """
    arr = np.ascontiguousarray(np.asarray(data), dtype="<f4")
    if arr.ndim != 2:
        raise DataError("embedding matrix must be 2-D")
    payload = arr.tobytes()
    crc = zlib.crc32(payload) & 0xFFFFFFFF if checksum else 0
    with Path(path).open("wb") as fh:
        fh.write(_EMB_HEADER.pack(EMB_MAGIC, arr.shape[0], arr.shape[1], crc))
        fh.write(payload)


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Load a binary embedding matrix, verifying the payload checksum if set."""
    path = Path(path)
    with path.open("rb") as fh:
        header = fh.read(_EMB_HEADER.size)
        if len(header) < _EMB_HEADER.size:
            raise TruncatedPayload(f"{path}: header truncated")
        magic, rows, dim, reserved = _EMB_HEADER.unpack(header)
        if magic != EMB_MAGIC:
            raise BadMagic(f"{path}: bad magic {magic!r}")
        n_vals = rows * dim
        data = np.fromfile(fh, dtype="<f4", count=n_vals)
        if data.size < n_vals:
            raise TruncatedPayload(f"{path}: expected {n_vals} floats, got {data.size}")
        if fh.read(1):
            raise DataError(f"{path}: trailing bytes after payload")
    if reserved != 0:
        crc = zlib.crc32(data.tobytes()) & 0xFFFFFFFF
        if crc != reserved:
            raise ChecksumMismatch(f"{path}: payload CRC {crc:#010x} != header {reserved:#010x}")
    return EmbeddingMatrix(data.reshape(rows, dim).astype(np.float32))


def check_embedding_refs(frames: Sequence[FrameRecord], matrix: EmbeddingMatrix) -> None:
    """Raise DimMismatch if any frame references a row outside the matrix."""
    for fr in frames:
        if fr.embedding_row is not None and fr.embedding_row >= matrix.rows:
            raise DimMismatch(
                f"frame {fr.frame_id} references row {fr.embedding_row} of a {matrix.rows}-row matrix"
            )


# ---------------------------------------------------------------------------
# frame-clock windows


def window_slices(
    sample_t: np.ndarray, frame_ts: np.ndarray, lo_s: float, hi_s: float
) -> tuple[np.ndarray, np.ndarray]:
    """Index ranges of samples with frame_t+lo <= t <= frame_t+hi (closed bounds)."""
    frame_ts = np.asarray(frame_ts, dtype=np.float64)
    lo = np.searchsorted(sample_t, frame_ts + lo_s, side="left")
    hi = np.searchsorted(sample_t, frame_ts + hi_s, side="right")
    return lo, hi


def _window_from_slice(
    stream: EyeStream, frame_t: float, lo_s: float, hi_s: float, i0: int, i1: int
) -> WindowAggregate:
    prev = stream[i0 - 1] if i0 > 0 else None
    return WindowAggregate(
        frame_t=frame_t,
        lo_s=lo_s,
        hi_s=hi_s,
        t=stream.t[i0:i1],
        gaze_x=stream.gaze_x[i0:i1],
        gaze_y=stream.gaze_y[i0:i1],
        confidence=stream.confidence[i0:i1],
        pupil_mm=stream.pupil_mm[i0:i1],
        prev=prev,
    )


def centered_window(stream: EyeStream, frame_t: float, half_width_s: float = 0.050) -> WindowAggregate:
    """Samples within +-half_width_s of the frame timestamp."""
    lo, hi = window_slices(stream.t, np.asarray([frame_t]), -half_width_s, half_width_s)
    return _window_from_slice(stream, frame_t, -half_width_s, half_width_s, int(lo[0]), int(hi[0]))


def delayed_window(
    stream: EyeStream, frame_t: float, lo_s: float = 0.300, hi_s: float = 1.500
) -> WindowAggregate:
    """Samples in the forward-shifted window [frame_t+lo_s, frame_t+hi_s]."""
    lo, hi = window_slices(stream.t, np.asarray([frame_t]), lo_s, hi_s)
    return _window_from_slice(stream, frame_t, lo_s, hi_s, int(lo[0]), int(hi[0]))
