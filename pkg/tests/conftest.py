"""Shared builders for hand-rolled detection frames and sequences."""

import numpy as np
import pytest

from soda.ingest import (
    DetectionSequence,
    FrameDetections,
    Part,
    PartState,
    PersonDetections,
    SymbolSequence,
)


def part_states(part, candidates):
    """candidates: list of (x, y, score) tuples."""
    return tuple(PartState(part, float(x), float(y), float(s)) for x, y, s in candidates)


def make_person(person_id, parts_map):
    """parts_map: {Part: [(x, y, score), ...]}."""
    return PersonDetections(person_id, {p: part_states(p, c) for p, c in parts_map.items()})


def make_frame(index, *persons_parts):
    persons = tuple(make_person(q, pm) for q, pm in enumerate(persons_parts))
    return FrameDetections(index, persons)


def make_sequence(frames, sequence_id="seq", label=None, grid=(16, 16), arity=3):
    return DetectionSequence(sequence_id, label, grid, arity, tuple(frames))


def symbols_from(frames, p, sequence_id="s", label=None):
    return SymbolSequence(sequence_id, label, p, np.asarray(frames, dtype=np.int32))


@pytest.fixture
def two_cell_frame():
    """One person, three parts; only the left arm has a real choice.

    Torso is pinned at the origin; the left arm picks between the torso
    cell (d2=0) and the neighbor cell (d2=1); the right arm is pinned at
    the origin too. With gamma1=1 the exact P(left arm at torso cell) is
    1 / (1 + e^-1).
    """
    return make_frame(
        0,
        {
            Part.TORSO: [(0, 0, 0.0)],
            Part.LEFT_ARM: [(0, 0, 0.0), (1, 0, 0.0)],
            Part.RIGHT_ARM: [(0, 0, 0.0)],
        },
    )
