"""Turn sampled frame configurations into a small symbol alphabet.

A configuration's feature vector is the concatenated (x, y) of every
site's chosen candidate, divided by the grid dimensions. A seeded k-means
codebook maps features to symbols; the same codebook must encode every
sequence that will be compared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateData,
    DimensionMismatch,
    InsufficientSamples,
    LengthMismatch,
    SymbolOutOfRange,
)
from .ingest import DetectionSequence, FrameDetections, SymbolSequence
from .mrf import PictorialModel, SampleSet, frame_site_arrays
from .rng import make_rng

KMEANS_MAX_ITER = 100
KMEANS_REL_TOL = 1e-6
MAX_ALPHABET = 4096


def _pairwise_d2(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d2 = (x * x).sum(axis=1)[:, None] - 2.0 * (x @ c.T) + (c * c).sum(axis=1)[None, :]
    return np.maximum(d2, 0.0)


@dataclass(frozen=True)
class Codebook:
    p: int
    feature_dim: int
    centroids: np.ndarray  # (p, feature_dim)

    def __post_init__(self):
        if self.centroids.shape != (self.p, self.feature_dim):
            raise DimensionMismatch(
                f"centroids must be ({self.p}, {self.feature_dim}), got {self.centroids.shape}"
            )


@dataclass(frozen=True)
class JointHistogram:
    """Dense count tensor over a tuple of finite axes."""

    counts: np.ndarray
    total: int

    @property
    def dims(self) -> tuple[int, ...]:
        return self.counts.shape


def sample_features(
    model: PictorialModel, frame: FrameDetections, samples: SampleSet, grid
) -> np.ndarray:
    """(n, 2 * sites) feature block for one frame's recorded configurations."""
    positions, _ = frame_site_arrays(model, frame)
    idx = samples.samples
    if idx.shape[1] != len(positions):
        raise DimensionMismatch(
            f"samples cover {idx.shape[1]} sites, frame has {len(positions)}"
        )
    scale = np.array([float(grid[0]), float(grid[1])])
    cols = [positions[s][idx[:, s]] / scale for s in range(len(positions))]
    return np.concatenate(cols, axis=1)


def sequence_features(model: PictorialModel, seq: DetectionSequence, samplesets) -> np.ndarray:
    """(M * n, 2 * sites) features for a whole sequence, frame-major."""
    samplesets = list(samplesets)
    if len(samplesets) != len(seq.frames):
        raise LengthMismatch(
            f"{len(samplesets)} sample sets for {len(seq.frames)} frames"
        )
    blocks = [
        sample_features(model, frame, ss, seq.grid)
        for frame, ss in zip(seq.frames, samplesets)
    ]
    return np.concatenate(blocks, axis=0)


def fit_codebook(features: np.ndarray, p: int, seed: int, subsample: int | None = None) -> Codebook:
    """Seeded k-means on feature rows.

    Init is farthest-point: the first centroid is a seeded random row, each
    later one the row farthest from all chosen so far. Lloyd updates run
    until the relative inertia change drops below 1e-6 or 100 iterations;
    a cluster that empties keeps its previous centroid.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise DimensionMismatch(f"features must be 2-d, got shape {features.shape}")
    if not 1 <= p <= MAX_ALPHABET:
        raise SymbolOutOfRange(f"alphabet size must lie in [1, {MAX_ALPHABET}], got {p}")
    if subsample is not None and features.shape[0] > subsample:
        # deterministic thinning keeps the fit affordable on large corpora
        stride = features.shape[0] / subsample
        features = features[(np.arange(subsample) * stride).astype(np.int64)]
    n, dim = features.shape
    if n < p:
        raise InsufficientSamples(f"{n} feature rows cannot seed {p} centroids")
    rng = make_rng(seed)
    if p == 1:
        return Codebook(1, dim, features.mean(axis=0, keepdims=True))
    if np.unique(features, axis=0).shape[0] < p:
        raise DegenerateData(f"fewer than {p} distinct feature rows")

    centroids = np.empty((p, dim))
    centroids[0] = features[int(rng.integers(n))]
    d2 = ((features - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, p):
        centroids[j] = features[int(np.argmax(d2))]
        np.minimum(d2, ((features - centroids[j]) ** 2).sum(axis=1), out=d2)

    prev_inertia = np.inf
    for _ in range(KMEANS_MAX_ITER):
        d2all = _pairwise_d2(features, centroids)
        assign = np.argmin(d2all, axis=1)
        inertia = float(d2all[np.arange(n), assign].sum())
        for j in range(p):
            members = features[assign == j]
            if members.shape[0]:
                centroids[j] = members.mean(axis=0)
        if prev_inertia - inertia <= KMEANS_REL_TOL * max(prev_inertia, 1e-300):
            break
        prev_inertia = inertia
    return Codebook(p, dim, centroids)


def learn_codebook(
    model: PictorialModel,
    seq: DetectionSequence,
    samplesets,
    p: int,
    seed: int,
    subsample: int | None = None,
) -> Codebook:
    return fit_codebook(sequence_features(model, seq, samplesets), p, seed, subsample)


def encode_features(cb: Codebook, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.shape[1] != cb.feature_dim:
        raise DimensionMismatch(
            f"features have dim {features.shape[1]}, codebook expects {cb.feature_dim}"
        )
    return np.argmin(_pairwise_d2(features, cb.centroids), axis=1).astype(np.int32)


def encode(cb: Codebook, model: PictorialModel, frame: FrameDetections, samples: SampleSet, grid) -> np.ndarray:
    """Symbols for one frame's sample set; ties go to the lowest centroid index."""
    return encode_features(cb, sample_features(model, frame, samples, grid))


def encode_sequence(cb: Codebook, model: PictorialModel, seq: DetectionSequence, samplesets) -> SymbolSequence:
    samplesets = list(samplesets)
    if len(samplesets) != len(seq.frames):
        raise LengthMismatch(f"{len(samplesets)} sample sets for {len(seq.frames)} frames")
    rows = [
        encode(cb, model, frame, ss, seq.grid)
        for frame, ss in zip(seq.frames, samplesets)
    ]
    return SymbolSequence(seq.sequence_id, seq.label, cb.p, np.vstack(rows))


def joint_histogram(rows, dims) -> JointHistogram:
    """Dense joint counts: rows[r][j] is axis r's symbol in observation j."""
    rows = [np.asarray(r) for r in rows]
    dims = tuple(int(d) for d in dims)
    if len(rows) != len(dims):
        raise LengthMismatch(f"{len(rows)} symbol rows for {len(dims)} axes")
    if not rows:
        raise LengthMismatch("need at least one axis")
    n = rows[0].shape[0]
    for r, row in enumerate(rows):
        if row.shape != (n,):
            raise LengthMismatch(f"axis {r}: expected {n} observations, got {row.shape}")
        if row.size and (row.min() < 0 or row.max() >= dims[r]):
            raise SymbolOutOfRange(f"axis {r}: symbol outside [0, {dims[r]})")
    flat = np.ravel_multi_index(rows, dims)
    counts = np.bincount(flat, minlength=int(np.prod(dims))).reshape(dims)
    return JointHistogram(counts=counts, total=int(n))
