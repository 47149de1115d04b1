"""Detection and symbol sequence containers plus their on-disk formats.

Detections arrive as UTF-8 JSON Lines: a header object followed by one
object per frame. Symbol files are a JSON header line followed by one line
of space-separated integers per frame. Both formats round-trip exactly.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    EmptySequence,
    IoFailure,
    MalformedRecord,
    NonMonotoneFrames,
    OutOfGrid,
    SymbolOutOfRange,
    VersionMismatch,
)

DETECTIONS_VERSION = 1
SYMBOLS_VERSION = 1


class Part(enum.Enum):
    """Body part slots. The head-and-torso block is a single part (TORSO)."""

    HEAD = "head"
    TORSO = "torso"
    LEFT_ARM = "left_arm"
    RIGHT_ARM = "right_arm"
    LEFT_LEG = "left_leg"
    RIGHT_LEG = "right_leg"


# canonical sweep order of part slots
PART_ORDER = (Part.HEAD, Part.TORSO, Part.LEFT_ARM, Part.RIGHT_ARM, Part.LEFT_LEG, Part.RIGHT_LEG)

# part slots required by each model arity, in canonical order
ARITY_PARTS = {
    3: (Part.TORSO, Part.LEFT_ARM, Part.RIGHT_ARM),
    5: (Part.TORSO, Part.LEFT_ARM, Part.RIGHT_ARM, Part.LEFT_LEG, Part.RIGHT_LEG),
}


@dataclass(frozen=True)
class PartState:
    """One candidate placement of one part."""

    part: Part
    x: float
    y: float
    score: float


@dataclass(frozen=True)
class PersonDetections:
    person_id: int
    parts: dict[Part, tuple[PartState, ...]]


@dataclass(frozen=True)
class FrameDetections:
    frame_index: int
    persons: tuple[PersonDetections, ...]


@dataclass(frozen=True)
class DetectionSequence:
    sequence_id: str
    label: str | None
    grid: tuple[int, int]
    arity: int
    frames: tuple[FrameDetections, ...]

    @property
    def num_frames(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class Violation:
    frame_index: int | None
    code: str
    detail: str


@dataclass
class ValidationReport:
    entries: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.entries

    def add(self, frame_index, code, detail):
        self.entries.append(Violation(frame_index, code, detail))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


class SymbolSequence:
    """Per-frame multisets of `n` symbols over an alphabet of `p` letters.

    `frames` is an (M, n) integer matrix; column j holds realization j of
    the whole sequence, so realization pairing across frames is by column.
    """

    __slots__ = ("sequence_id", "label", "p", "n", "frames")

    def __init__(self, sequence_id: str, label: str | None, p: int, frames) -> None:
        frames = np.asarray(frames, dtype=np.int32)
        if frames.ndim != 2 or frames.shape[0] == 0:
            raise EmptySequence(f"{sequence_id!r}: need a non-empty (M, n) symbol matrix")
        if p < 1:
            raise SymbolOutOfRange(f"alphabet size must be >= 1, got {p}")
        if frames.min() < 0 or frames.max() >= p:
            raise SymbolOutOfRange(
                f"{sequence_id!r}: symbol values must lie in [0, {p})"
            )
        self.sequence_id = sequence_id
        self.label = label
        self.p = int(p)
        self.n = int(frames.shape[1])
        self.frames = frames

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    def window(self, start: int, width: int) -> "SymbolSequence":
        """Contiguous sub-sequence of `width` frames starting at `start`."""
        return SymbolSequence(self.sequence_id, self.label, self.p, self.frames[start : start + width])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymbolSequence):
            return NotImplemented
        return (
            self.sequence_id == other.sequence_id
            and self.label == other.label
            and self.p == other.p
            and self.n == other.n
            and np.array_equal(self.frames, other.frames)
        )

    def __repr__(self) -> str:
        return (
            f"SymbolSequence(id={self.sequence_id!r}, label={self.label!r}, "
            f"p={self.p}, n={self.n}, M={self.num_frames})"
        )


def _require(cond, message, line=None):
    if not cond:
        raise MalformedRecord(message, line=line)


def _as_int(value, what, line):
    """Strict integer field: JSON integers only, no floats, bools or strings."""
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedRecord(f"{what} must be an integer, got {value!r}", line=line)
    return value


def _read_lines(path: Path) -> list[str]:
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except UnicodeDecodeError:
        raise MalformedRecord("file is not valid UTF-8", line=1)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc.strerror or exc}")


def _parse_part_states(part: Part, raw, line) -> tuple[PartState, ...]:
    _require(isinstance(raw, list) and raw, f"part {part.value!r} needs a non-empty candidate list", line)
    out = []
    for cand in raw:
        _require(isinstance(cand, dict), f"part {part.value!r}: candidate must be an object", line)
        try:
            x, y, score = float(cand["x"]), float(cand["y"]), float(cand["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(f"part {part.value!r}: candidate needs numeric x, y, score ({exc})", line=line)
        _require(math.isfinite(x) and math.isfinite(y) and math.isfinite(score),
                 f"part {part.value!r}: non-finite candidate field", line)
        out.append(PartState(part, x, y, score))
    return tuple(out)


def load_detections(path) -> DetectionSequence:
    """Load one detection sequence from a JSONL file, sorting frames by index."""
    path = Path(path)
    lines = _read_lines(path)
    header = None
    frames: list[FrameDetections] = []
    grid = None
    arity = None
    for lineno, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"invalid JSON ({exc.msg})", line=lineno)
        _require(isinstance(obj, dict), "record must be a JSON object", lineno)
        if header is None:
            _require("sequence_id" in obj and "grid" in obj, "first record must be the sequence header", lineno)
            version = obj.get("version", DETECTIONS_VERSION)
            if version != DETECTIONS_VERSION:
                raise VersionMismatch(f"unsupported detections format version {version}")
            grid_raw = obj["grid"]
            _require(isinstance(grid_raw, list) and len(grid_raw) == 2, "grid must be [width, height]", lineno)
            grid = (_as_int(grid_raw[0], "grid width", lineno),
                    _as_int(grid_raw[1], "grid height", lineno))
            _require(grid[0] > 0 and grid[1] > 0, "grid dimensions must be positive", lineno)
            arity = _as_int(obj.get("model_arity", 5), "model_arity", lineno)
            _require(arity in ARITY_PARTS, f"model_arity must be one of {sorted(ARITY_PARTS)}", lineno)
            _require(isinstance(obj["sequence_id"], str), "sequence_id must be a string", lineno)
            label = obj.get("label")
            _require(label is None or isinstance(label, str), "label must be a string or null", lineno)
            header = {"sequence_id": obj["sequence_id"], "label": label}
            continue
        frames.append(_parse_frame(obj, arity, grid, lineno))
    if header is None:
        raise MalformedRecord("file has no header record", line=1)
    if not frames:
        raise EmptySequence(f"{header['sequence_id']!r} has no frame records")
    order = sorted(range(len(frames)), key=lambda i: frames[i].frame_index)
    indices = [frames[i].frame_index for i in order]
    if len(set(indices)) != len(indices):
        raise NonMonotoneFrames(f"duplicate frame indices in {header['sequence_id']!r}")
    return DetectionSequence(
        sequence_id=header["sequence_id"],
        label=header["label"],
        grid=grid,
        arity=arity,
        frames=tuple(frames[i] for i in order),
    )


def _parse_frame(obj, arity, grid, lineno) -> FrameDetections:
    _require("frame" in obj and "persons" in obj, "frame record needs 'frame' and 'persons'", lineno)
    frame_index = _as_int(obj["frame"], "'frame'", lineno)
    _require(frame_index >= 0, "'frame' must be non-negative", lineno)
    persons_raw = obj["persons"]
    _require(isinstance(persons_raw, list) and persons_raw, "frame needs a non-empty person list", lineno)
    required = ARITY_PARTS[arity]
    part_by_name = {p.value: p for p in required}
    persons = []
    seen_ids = set()
    for praw in persons_raw:
        _require(isinstance(praw, dict) and "id" in praw and "parts" in praw,
                 "person record needs 'id' and 'parts'", lineno)
        pid = _as_int(praw["id"], "person id", lineno)
        _require(pid not in seen_ids, f"duplicate person id {pid}", lineno)
        seen_ids.add(pid)
        parts_raw = praw["parts"]
        _require(isinstance(parts_raw, dict), "'parts' must be an object", lineno)
        unknown = set(parts_raw) - set(part_by_name)
        _require(not unknown, f"unknown part slots for {arity}-part model: {sorted(unknown)}", lineno)
        missing = set(part_by_name) - set(parts_raw)
        _require(not missing, f"missing part slots: {sorted(missing)}", lineno)
        parts = {}
        for name, part in part_by_name.items():
            cands = _parse_part_states(part, parts_raw[name], lineno)
            for c in cands:
                if not (0.0 <= c.x <= grid[0] and 0.0 <= c.y <= grid[1]):
                    raise OutOfGrid(
                        f"line {lineno}: frame {frame_index} part {name!r} at ({c.x}, {c.y}) "
                        f"outside grid {grid}"
                    )
            parts[part] = cands
        persons.append(PersonDetections(pid, parts))
    return FrameDetections(frame_index, tuple(persons))


def save_detections(seq: DetectionSequence, path) -> None:
    path = Path(path)
    rows = [
        json.dumps(
            {
                "sequence_id": seq.sequence_id,
                "label": seq.label,
                "grid": [seq.grid[0], seq.grid[1]],
                "model_arity": seq.arity,
                "version": DETECTIONS_VERSION,
            },
            sort_keys=True,
        )
    ]
    for frame in seq.frames:
        persons = []
        for person in frame.persons:
            parts = {
                part.value: [{"x": c.x, "y": c.y, "score": c.score} for c in cands]
                for part, cands in person.parts.items()
            }
            persons.append({"id": person.person_id, "parts": parts})
        rows.append(json.dumps({"frame": frame.frame_index, "persons": persons}, sort_keys=True))
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def validate(seq: DetectionSequence, model_arity: int) -> ValidationReport:
    """Report every invariant violation; never raises on bad content."""
    report = ValidationReport()
    required = ARITY_PARTS.get(model_arity)
    if required is None:
        report.add(None, "BadArity", f"model arity {model_arity} is not supported")
        return report
    if not seq.frames:
        report.add(None, "EmptySequence", "sequence has no frames")
        return report
    w, h = seq.grid
    prev = None
    for frame in seq.frames:
        if prev is not None and frame.frame_index <= prev:
            report.add(frame.frame_index, "NonMonotoneFrames",
                       f"frame index {frame.frame_index} after {prev}")
        prev = frame.frame_index
        seen = set()
        for person in frame.persons:
            if person.person_id in seen:
                report.add(frame.frame_index, "DuplicatePerson",
                           f"person id {person.person_id} repeated")
            seen.add(person.person_id)
            for part in required:
                cands = person.parts.get(part, ())
                if not cands:
                    report.add(frame.frame_index, "MissingPart",
                               f"person {person.person_id} missing {part.value!r}")
                    continue
                for c in cands:
                    if c.part is not part:
                        report.add(frame.frame_index, "PartMismatch",
                                   f"candidate tagged {c.part.value!r} under slot {part.value!r}")
                    if not (math.isfinite(c.x) and math.isfinite(c.y) and math.isfinite(c.score)):
                        report.add(frame.frame_index, "NonFinite",
                                   f"person {person.person_id} part {part.value!r}")
                    elif not (0.0 <= c.x <= w and 0.0 <= c.y <= h):
                        report.add(frame.frame_index, "OutOfGrid",
                                   f"person {person.person_id} part {part.value!r} at ({c.x}, {c.y})")
            extra = set(person.parts) - set(required)
            if extra:
                report.add(frame.frame_index, "UnknownPart",
                           f"person {person.person_id}: {sorted(p.value for p in extra)}")
    return report


def save_symbols(seq: SymbolSequence, path) -> None:
    path = Path(path)
    header = json.dumps(
        {
            "version": SYMBOLS_VERSION,
            "sequence_id": seq.sequence_id,
            "label": seq.label,
            "p": seq.p,
            "n": seq.n,
            "M": seq.num_frames,
        },
        sort_keys=True,
    )
    body = "\n".join(" ".join(str(v) for v in row) for row in seq.frames)
    path.write_text(header + "\n" + body + "\n", encoding="utf-8")


def load_symbols(path) -> SymbolSequence:
    path = Path(path)
    lines = _read_lines(path)
    if not lines or not lines[0].strip():
        raise MalformedRecord("missing symbol file header", line=1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"invalid JSON header ({exc.msg})", line=1)
    _require(isinstance(header, dict), "header must be a JSON object", 1)
    version = header.get("version", SYMBOLS_VERSION)
    if version != SYMBOLS_VERSION:
        raise VersionMismatch(f"unsupported symbols format version {version}")
    for key in ("p", "n", "M", "sequence_id"):
        _require(key in header, f"header missing {key!r}", 1)
    p = _as_int(header["p"], "header p", 1)
    n = _as_int(header["n"], "header n", 1)
    m = _as_int(header["M"], "header M", 1)
    _require(p >= 1, "header p must be >= 1", 1)
    _require(n >= 1, "header n must be >= 1", 1)
    if m <= 0:
        raise EmptySequence(f"{header['sequence_id']!r}: header declares M={m}")
    rows = []
    for lineno, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        try:
            row = np.array(text.split(), dtype=np.int32)
        except (ValueError, OverflowError):
            raise MalformedRecord("symbol row must be space-separated integers", line=lineno)
        _require(row.size == n, f"expected {n} symbols, found {row.size}", lineno)
        if row.min() < 0 or row.max() >= p:
            raise MalformedRecord(f"symbol outside alphabet [0, {p})", line=lineno)
        rows.append(row)
    if len(rows) != m:
        raise MalformedRecord(f"header declares M={m} but file has {len(rows)} frame rows")
    _require(isinstance(header["sequence_id"], str), "sequence_id must be a string", 1)
    label = header.get("label")
    _require(label is None or isinstance(label, str), "label must be a string or null", 1)
    return SymbolSequence(header["sequence_id"], label, p, np.vstack(rows))
