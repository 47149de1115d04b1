"""Synthetic detection sequences with plantable cross-sequence coupling.

Each part follows a reflecting random walk; every frame offers the true
placement plus lower-scored decoy candidates. Coupling replaces a frame's
candidate set with a noisy copy of the source sequence's set at a fixed
lag, so dependence enters at the detection level and must survive the
whole sampling and quantization pipeline to be measured. Truth metadata
records the exact coupled frames, which makes localization accuracy
checkable to within a frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec
from .ingest import (
    ARITY_PARTS,
    DetectionSequence,
    FrameDetections,
    Part,
    PartState,
    PersonDetections,
)
from .rng import STREAM_SYNTH, make_rng

TRUE_SCORE_RANGE = (0.8, 1.2)
DECOY_SCORE_RANGE = (-0.2, 0.4)
LIMB_RANGE = 2  # limbs wander at most this far from their torso offset


@dataclass(frozen=True)
class ClassTemplate:
    """One class's coupling and motion parameters."""

    label: str
    lag: int = 1
    coupling_strength: float = 0.9
    active: tuple[int, int] | None = None  # half-open frame range; None = all
    step_max: int = 1  # walk step per axis drawn from [-step_max, step_max]


@dataclass(frozen=True)
class CouplingSpec:
    """Corpus-level generator parameters plus per-class templates."""

    num_frames: int
    classes: tuple[ClassTemplate, ...] = (ClassTemplate("c0"),)
    grid: tuple[int, int] = (16, 16)
    arity: int = 3
    persons: int = 1
    n_candidates: int = 3
    noise: float = 0.5  # position jitter std of copied frames, grid units

    def __post_init__(self):
        if self.num_frames < 1:
            raise InvalidSpec("num_frames must be >= 1")
        if self.arity not in ARITY_PARTS:
            raise InvalidSpec(f"arity must be one of {sorted(ARITY_PARTS)}")
        if self.persons < 1:
            raise InvalidSpec("persons must be >= 1")
        if self.n_candidates < 1:
            raise InvalidSpec("n_candidates must be >= 1")
        if self.noise < 0:
            raise InvalidSpec("noise must be >= 0")
        if not self.classes:
            raise InvalidSpec("need at least one class template")
        labels = [t.label for t in self.classes]
        if len(set(labels)) != len(labels):
            raise InvalidSpec("class labels must be distinct")
        for t in self.classes:
            if not (0 <= t.lag < self.num_frames):
                raise InvalidSpec(f"lag {t.lag} must lie in [0, {self.num_frames})")
            if not (0.0 <= t.coupling_strength <= 1.0):
                raise InvalidSpec("coupling_strength must lie in [0, 1]")
            if t.step_max < 1:
                raise InvalidSpec("step_max must be >= 1")
            if t.active is not None:
                lo, hi = t.active
                if not (0 <= lo < hi <= self.num_frames):
                    raise InvalidSpec(
                        f"active window {t.active} outside [0, {self.num_frames})"
                    )


@dataclass(frozen=True)
class LabeledCorpus:
    sequences: tuple[DetectionSequence, ...]
    ground_truth: dict = field(default_factory=dict)  # sequence_id -> truth dict

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    def __len__(self):
        return len(self.sequences)

    def pair_truth(self, id_a: str, id_b: str) -> dict:
        """True relation between two corpus members.

        Members of one class copy the same hidden prototype, so same-class
        pairs share coupling through it; cross-class pairs are independent.
        """
        ta, tb = self.ground_truth[id_a], self.ground_truth[id_b]
        same = ta["label"] == tb["label"]
        return {
            "same_class": same,
            "label_a": ta["label"],
            "label_b": tb["label"],
            "shared_frames": sorted(set(ta["coupled_frames"]) & set(tb["coupled_frames"]))
            if same
            else [],
        }


def _reflect(values: np.ndarray, low: float, high: float) -> np.ndarray:
    """Fold coordinates back into [low, high]; works for ints and floats."""
    span = high - low
    if span == 0:
        return np.full_like(values, low)
    period = 2 * span
    v = np.mod(values - low, period)
    v = np.where(v > span, period - v, v)
    return v + low


def _walk(rng, steps: int, start: np.ndarray, low: np.ndarray, high: np.ndarray,
          step_max: int = 1) -> np.ndarray:
    moves = rng.integers(-step_max, step_max + 1, size=(steps, 2))
    path = start + np.cumsum(np.vstack([np.zeros((1, 2), dtype=np.int64), moves]), axis=0)
    for axis in range(2):
        path[:, axis] = _reflect(path[:, axis], int(low[axis]), int(high[axis]))
    return path


def _approach_schedule(num_frames: int) -> np.ndarray:
    """Blend weight per frame: rise, hold, fall over thirds of the sequence.

    Drives inter-person distance through a shrink-hold-grow profile so the
    pairwise interaction terms of the position model see real variation.
    """
    m = np.arange(num_frames)
    third = max(num_frames / 3.0, 1.0)
    rise = np.clip(m / third, 0.0, 1.0)
    fall = np.clip((num_frames - 1 - m) / third, 0.0, 1.0)
    return np.minimum(rise, fall)


def _true_positions(rng, spec: CouplingSpec, step_max: int) -> dict[tuple[int, Part], np.ndarray]:
    """One (M, 2) true-placement track per (person, part) site.

    Torsos walk the grid; the other parts ride a fixed offset from their
    torso plus a small walk of their own, so parts of one person stay
    spatially related. Additional persons drift toward person 0, hold, and
    separate again.
    """
    w, h = spec.grid
    lo = np.array([0, 0])
    hi = np.array([w, h])
    tracks = {}
    parts = ARITY_PARTS[spec.arity]
    blend = _approach_schedule(spec.num_frames)
    torso0 = None
    for q in range(spec.persons):
        start = rng.integers(0, [w + 1, h + 1])
        torso = _walk(rng, spec.num_frames - 1, start, lo, hi, step_max)
        if q == 0:
            torso0 = torso
        else:
            mixed = np.rint(blend[:, None] * torso0 + (1 - blend[:, None]) * torso)
            torso = mixed.astype(np.int64)
            torso[:, 0] = _reflect(torso[:, 0], 0, w)
            torso[:, 1] = _reflect(torso[:, 1], 0, h)
        for part in parts:
            if part is Part.TORSO:
                tracks[(q, part)] = torso
                continue
            offset = rng.integers(-LIMB_RANGE, LIMB_RANGE + 1, size=2)
            sway = _walk(rng, spec.num_frames - 1, np.zeros(2, dtype=np.int64),
                         np.array([-LIMB_RANGE, -LIMB_RANGE]), np.array([LIMB_RANGE, LIMB_RANGE]))
            track = torso + offset + sway
            track[:, 0] = _reflect(track[:, 0], 0, w)
            track[:, 1] = _reflect(track[:, 1], 0, h)
            tracks[(q, part)] = track
    return tracks


def _candidate_sets(rng, spec: CouplingSpec, tracks) -> list[dict]:
    """Per frame, per site: candidate (positions, scores); true placement first."""
    w, h = spec.grid
    frames = []
    parts = ARITY_PARTS[spec.arity]
    for m in range(spec.num_frames):
        sites = {}
        for q in range(spec.persons):
            for part in parts:
                pos = np.empty((spec.n_candidates, 2), dtype=np.float64)
                score = np.empty(spec.n_candidates)
                pos[0] = tracks[(q, part)][m]
                score[0] = rng.uniform(*TRUE_SCORE_RANGE)
                if spec.n_candidates > 1:
                    pos[1:, 0] = rng.integers(0, w + 1, size=spec.n_candidates - 1)
                    pos[1:, 1] = rng.integers(0, h + 1, size=spec.n_candidates - 1)
                    score[1:] = rng.uniform(*DECOY_SCORE_RANGE, size=spec.n_candidates - 1)
                sites[(q, part)] = (pos, score)
        frames.append(sites)
    return frames


def _copy_with_noise(rng, spec: CouplingSpec, sites: dict) -> dict:
    """Candidate positions plus gaussian jitter; scores copied exactly."""
    w, h = spec.grid
    out = {}
    for key, (pos, score) in sites.items():
        moved = pos + rng.normal(0.0, spec.noise, size=pos.shape)
        moved[:, 0] = _reflect(moved[:, 0], 0.0, float(w))
        moved[:, 1] = _reflect(moved[:, 1], 0.0, float(h))
        out[key] = (moved, score.copy())
    return out


def _to_sequence(spec: CouplingSpec, sequence_id: str, label: str | None, frames: list[dict]) -> DetectionSequence:
    parts = ARITY_PARTS[spec.arity]
    built = []
    for m, sites in enumerate(frames):
        persons = []
        for q in range(spec.persons):
            part_map = {}
            for part in parts:
                pos, score = sites[(q, part)]
                part_map[part] = tuple(
                    PartState(part, float(pos[c, 0]), float(pos[c, 1]), float(score[c]))
                    for c in range(len(score))
                )
            persons.append(PersonDetections(q, part_map))
        built.append(FrameDetections(m, tuple(persons)))
    return DetectionSequence(sequence_id, label, spec.grid, spec.arity, tuple(built))


def _coupled_frames(rng, spec: CouplingSpec, template: ClassTemplate,
                    source_frames: list[dict], own_frames: list[dict]):
    """Frames for the target plus the list of frame indices actually coupled."""
    lo, hi = template.active if template.active is not None else (0, spec.num_frames)
    out = []
    coupled = []
    for m in range(spec.num_frames):
        # the coupling coin and jitter always draw, so the stream position
        # does not depend on earlier outcomes
        coin = rng.random() < template.coupling_strength
        src = m - template.lag
        if coin and lo <= m < hi and 0 <= src < len(source_frames):
            out.append(_copy_with_noise(rng, spec, source_frames[src]))
            coupled.append(m)
        else:
            _copy_with_noise(rng, spec, own_frames[m])
            out.append(own_frames[m])
    return out, coupled


def _truth(template: ClassTemplate, spec: CouplingSpec, coupled: list[int],
           label: str | None = None, source: str | None = None) -> dict:
    return {
        "label": label,
        "source": source,
        "lag": template.lag,
        "coupling_strength": template.coupling_strength,
        "active": list(template.active) if template.active is not None
        else [0, spec.num_frames],
        "coupled_frames": list(coupled),
    }


def gen_coupled_pair(spec: CouplingSpec, seed: int,
                     ids: tuple[str, str] = ("x", "y"),
                     labels: tuple[str | None, str | None] = (None, None)):
    """A source sequence, a target whose active frames copy it at the first
    class template's lag, and the truth record of what was planted."""
    template = spec.classes[0]
    rng_x = make_rng(seed, STREAM_SYNTH, 0)
    rng_y = make_rng(seed, STREAM_SYNTH, 1)
    x_frames = _candidate_sets(rng_x, spec, _true_positions(rng_x, spec, template.step_max))
    y_frames = _candidate_sets(rng_y, spec, _true_positions(rng_y, spec, template.step_max))
    y_frames, coupled = _coupled_frames(rng_y, spec, template, x_frames, y_frames)
    return (
        _to_sequence(spec, ids[0], labels[0], x_frames),
        _to_sequence(spec, ids[1], labels[1], y_frames),
        _truth(template, spec, coupled, label=labels[1], source=ids[0]),
    )


def gen_corpus(spec: CouplingSpec, per_class: int, seed: int) -> LabeledCorpus:
    """Labeled corpus: members of one class are noisy lagged copies of one
    hidden prototype, so same-class pairs share strong symmetric DI while
    classes differ by lag, coupling strength, and walk step template."""
    if per_class < 1:
        raise InvalidSpec("need at least one member per class")
    sequences = []
    truth = {}
    for ci, template in enumerate(spec.classes):
        proto_rng = make_rng(seed, STREAM_SYNTH, 2, ci)
        proto = _candidate_sets(
            proto_rng, spec, _true_positions(proto_rng, spec, template.step_max)
        )
        for mi in range(per_class):
            rng = make_rng(seed, STREAM_SYNTH, 2, ci, mi)
            own = _candidate_sets(rng, spec, _true_positions(rng, spec, template.step_max))
            frames, coupled = _coupled_frames(rng, spec, template, proto, own)
            sid = f"{template.label}-{mi:02d}"
            sequences.append(_to_sequence(spec, sid, template.label, frames))
            truth[sid] = _truth(template, spec, coupled,
                                label=template.label, source=f"{template.label}-proto")
    return LabeledCorpus(tuple(sequences), truth)


def reverse_time(seq: DetectionSequence) -> DetectionSequence:
    """Frames in reverse order, reindexed 0..M-1. Applying it twice returns
    the original whenever the input was 0-based and contiguous."""
    reversed_frames = tuple(
        FrameDetections(i, frame.persons)
        for i, frame in enumerate(reversed(seq.frames))
    )
    return DetectionSequence(seq.sequence_id, seq.label, seq.grid, seq.arity, reversed_frames)
