"""Nearest-neighbor sequence classification on symmetrized directed information.

The pairwise matrix stores DI(i -> j) for every ordered pair; the
symmetrized matrix is its sum with its transpose, a similarity (larger
means more related). Train/test splits are stratified per label with
largest-remainder rounding so every class keeps at least one member on
each side.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ClassTooSmall, EmptyInput, IncompatibleAlphabets, NoTrainData, SodaError
from .estimators import directed_information
from .ingest import SymbolSequence
from .rng import STREAM_SPLIT, make_rng


@dataclass(frozen=True)
class DiMatrix:
    ids: tuple[str, ...]
    labels: tuple[str | None, ...]
    forward: np.ndarray  # forward[i, j] = DI(i -> j)
    sym: np.ndarray
    order_k: int


@dataclass(frozen=True)
class SplitResult:
    train: np.ndarray
    test: np.ndarray


@dataclass(frozen=True)
class Prediction:
    sequence_id: str
    truth: str
    predicted: str
    class_scores: dict[str, float]


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    labels: tuple[str, ...]
    confusion: np.ndarray  # rows: truth, cols: predicted
    average_precision: dict[str, float]


def pairwise_matrix(sequences, k: int = 1, lambda_mode="auto", threads: int = 1) -> DiMatrix:
    """All ordered-pair directed informations; threads only affect speed.

    threads=0 uses one worker per available core.
    """
    seqs: list[SymbolSequence] = list(sequences)
    if not seqs:
        raise EmptyInput("no sequences to compare")
    p = seqs[0].p
    if any(s.p != p for s in seqs):
        raise IncompatibleAlphabets("all sequences must share one codebook alphabet")
    n = len(seqs)
    forward = np.zeros((n, n))
    jobs = [(i, j) for i in range(n) for j in range(n)]
    workers = threads if threads > 0 else (os.cpu_count() or 1)

    def run(job):
        i, j = job
        try:
            return i, j, directed_information(seqs[i], seqs[j], k, lambda_mode).value
        except SodaError as exc:
            raise type(exc)(
                f"pair ({seqs[i].sequence_id} -> {seqs[j].sequence_id}): {exc}"
            ) from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for i, j, value in pool.map(run, jobs):
                forward[i, j] = value
    else:
        for job in jobs:
            i, j, value = run(job)
            forward[i, j] = value
    return DiMatrix(
        ids=tuple(s.sequence_id for s in seqs),
        labels=tuple(s.label for s in seqs),
        forward=forward,
        sym=forward + forward.T,
        order_k=k,
    )


def split(labels, ratio: float = 0.5, seed: int = 0) -> SplitResult:
    """Stratified split; class train counts by largest-remainder rounding.

    Every class needs at least two members and keeps at least one member in
    both train and test. Membership within a class is a seeded shuffle.
    """
    labels = list(labels)
    if not labels:
        raise EmptyInput("no labels to split")
    if not (0.0 < ratio < 1.0):
        raise ClassTooSmall(f"ratio must lie in (0, 1), got {ratio}")
    classes: dict[str, list[int]] = {}
    for i, label in enumerate(labels):
        if label is None:
            raise NoTrainData(f"sequence {i} has no label")
        classes.setdefault(label, []).append(i)
    for label, members in classes.items():
        if len(members) < 2:
            raise ClassTooSmall(f"class {label!r} has {len(members)} member(s); need >= 2")
    n = len(labels)
    names = list(classes)
    target = int(round(ratio * n))
    target = min(max(target, len(names)), n - len(names))
    base = {}
    frac = {}
    for name in names:
        share = ratio * len(classes[name])
        b = int(math.floor(share))
        base[name] = min(max(b, 1), len(classes[name]) - 1)
        frac[name] = share - math.floor(share)
    remaining = target - sum(base.values())
    if remaining > 0:
        for name in sorted(names, key=lambda c: (-frac[c], names.index(c))):
            if remaining == 0:
                break
            room = len(classes[name]) - 1 - base[name]
            take = min(room, remaining)
            base[name] += take
            remaining -= take
    elif remaining < 0:
        for name in sorted(names, key=lambda c: (frac[c], names.index(c))):
            if remaining == 0:
                break
            room = base[name] - 1
            give = min(room, -remaining)
            base[name] -= give
            remaining += give
    rng = make_rng(seed, STREAM_SPLIT)
    train, test = [], []
    for name in names:
        members = np.array(classes[name])
        perm = members[rng.permutation(members.size)]
        train.extend(perm[: base[name]])
        test.extend(perm[base[name] :])
    return SplitResult(train=np.array(sorted(train)), test=np.array(sorted(test)))


def nn_classify(matrix: DiMatrix, train, test, k_neighbors: int = 1) -> list[Prediction]:
    """Majority vote over the k most similar training sequences.

    Vote ties break by summed similarity, then by the lowest tied neighbor
    index. Each prediction also carries per-class mean similarity over all
    training members, for ranking-based evaluation.
    """
    train = np.asarray(train, dtype=np.int64)
    test = np.asarray(test, dtype=np.int64)
    if train.size == 0:
        raise NoTrainData("empty training set")
    if any(matrix.labels[i] is None for i in train):
        raise NoTrainData("every training sequence needs a label")
    k_neighbors = min(int(k_neighbors), train.size)
    if k_neighbors < 1:
        raise NoTrainData(f"k_neighbors must be >= 1, got {k_neighbors}")
    class_members: dict[str, np.ndarray] = {}
    for i in train:
        class_members.setdefault(matrix.labels[i], []).append(i)
    class_members = {c: np.array(v) for c, v in class_members.items()}
    out = []
    for i in test:
        sims = matrix.sym[i, train]
        order = sorted(range(train.size), key=lambda t: (-sims[t], int(train[t])))
        top = order[:k_neighbors]
        votes: dict[str, list[float]] = {}
        first_neighbor: dict[str, int] = {}
        for t in top:
            label = matrix.labels[train[t]]
            votes.setdefault(label, []).append(float(sims[t]))
            idx = int(train[t])
            first_neighbor[label] = min(first_neighbor.get(label, idx), idx)
        predicted = min(
            votes, key=lambda c: (-len(votes[c]), -sum(votes[c]), first_neighbor[c])
        )
        scores = {
            c: float(matrix.sym[i, members].mean())
            for c, members in class_members.items()
        }
        out.append(Prediction(
            sequence_id=matrix.ids[i],
            truth=matrix.labels[i],
            predicted=predicted,
            class_scores=scores,
        ))
    return out


def evaluate(predictions) -> EvalReport:
    """Accuracy, truth-by-predicted confusion counts, and per-class AP.

    A class's average precision ranks test items by that class's score and
    averages precision at each true positive. Classes absent from the test
    truths are left out of the AP map.
    """
    preds = list(predictions)
    if not preds:
        raise EmptyInput("no predictions to evaluate")
    labels = tuple(sorted({p.truth for p in preds} | {p.predicted for p in preds}))
    index = {c: i for i, c in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    hits = 0
    for p in preds:
        confusion[index[p.truth], index[p.predicted]] += 1
        hits += p.truth == p.predicted
    ap = {}
    for c in labels:
        rel = np.array([p.truth == c for p in preds])
        if not rel.any():
            continue
        scores = np.array([p.class_scores.get(c, -np.inf) for p in preds])
        order = np.argsort(-scores, kind="stable")
        rel = rel[order]
        ranks = np.nonzero(rel)[0] + 1
        precision_at = np.cumsum(rel)[rel.astype(bool)] / ranks
        ap[c] = float(precision_at.mean())
    return EvalReport(
        accuracy=hits / len(preds),
        labels=labels,
        confusion=confusion,
        average_precision=ap,
    )
