"""Star-structured part model over detection candidates, per frame.

Each (person, part) pair is one discrete variable whose states are that
part's candidate placements. Detector scores enter as log evidence. Star
edges tie each limb to its person's torso; inter-person edges tie torsos,
left arms and right arms pairwise across persons. Every edge contributes
-gamma * squared Euclidean distance between the chosen placements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DegenerateData,
    DimensionMismatch,
    InvalidAssignment,
    StateSpaceTooLarge,
)
from .ingest import ARITY_PARTS, DetectionSequence, FrameDetections, Part
from .rng import STREAM_FIT, make_rng

GAMMA_FLOOR = 1e-4
GAMMA_CEIL = 1e2
EXACT_STATE_LIMIT = 4096


@dataclass(frozen=True)
class PictorialModel:
    arity: int = 5
    persons: int = 1
    gamma1: float = 1.0
    gamma2: float = 1.0
    interaction_enabled: bool = True

    def __post_init__(self):
        if self.arity not in ARITY_PARTS:
            raise DimensionMismatch(f"arity must be one of {sorted(ARITY_PARTS)}, got {self.arity}")
        if self.persons < 1:
            raise DimensionMismatch(f"persons must be >= 1, got {self.persons}")
        if not (self.gamma1 > 0.0) or not (self.gamma2 >= 0.0):
            raise DimensionMismatch("gamma1 must be positive and gamma2 non-negative")

    @property
    def parts(self) -> tuple[Part, ...]:
        return ARITY_PARTS[self.arity]

    @property
    def sites(self) -> tuple[tuple[int, Part], ...]:
        """All variables, person-major, parts in canonical order."""
        return tuple((q, part) for q in range(self.persons) for part in self.parts)

    @property
    def edges(self) -> tuple[tuple[int, int, float], ...]:
        """(site_a, site_b, gamma) triples; site indices refer to `sites`."""
        parts = self.parts
        k = len(parts)
        out = []
        for q in range(self.persons):
            torso = q * k + parts.index(Part.TORSO)
            for j, part in enumerate(parts):
                if part is not Part.TORSO:
                    out.append((torso, q * k + j, self.gamma1))
        if self.interaction_enabled and self.gamma2 > 0.0:
            shared = [p for p in (Part.TORSO, Part.LEFT_ARM, Part.RIGHT_ARM) if p in parts]
            for a in range(self.persons):
                for b in range(a + 1, self.persons):
                    for part in shared:
                        j = parts.index(part)
                        out.append((a * k + j, b * k + j, self.gamma2))
        return tuple(out)


@dataclass(frozen=True)
class SampleSet:
    """Recorded Gibbs configurations for one frame: (n, sites) candidate indices."""

    frame_index: int
    samples: np.ndarray

    @property
    def n(self) -> int:
        return int(self.samples.shape[0])


@dataclass(frozen=True)
class DistributionTable:
    """Exact joint over all configurations of one frame."""

    states: np.ndarray  # (K, sites) candidate indices
    probs: np.ndarray  # (K,)


@dataclass(frozen=True)
class GammaFit:
    gamma1: float
    gamma2: float
    degenerate1: bool = False
    degenerate2: bool = False

    def __iter__(self):
        return iter((self.gamma1, self.gamma2))


def frame_site_arrays(model: PictorialModel, frame: FrameDetections):
    """Candidate positions and scores per site: ([(C, 2)], [(C,)])."""
    if len(frame.persons) != model.persons:
        raise DimensionMismatch(
            f"frame {frame.frame_index}: model expects {model.persons} persons, "
            f"found {len(frame.persons)}"
        )
    positions, scores = [], []
    for q in range(model.persons):
        person = frame.persons[q]
        for part in model.parts:
            cands = person.parts.get(part)
            if not cands:
                raise DimensionMismatch(
                    f"frame {frame.frame_index}: person {person.person_id} "
                    f"has no candidates for {part.value!r}"
                )
            positions.append(np.array([[c.x, c.y] for c in cands], dtype=np.float64))
            scores.append(np.array([c.score for c in cands], dtype=np.float64))
    return positions, scores


def _check_config(config, positions) -> np.ndarray:
    config = np.asarray(config, dtype=np.int64)
    if config.shape != (len(positions),):
        raise InvalidAssignment(
            f"configuration must assign all {len(positions)} sites, got shape {config.shape}"
        )
    for s, pos in enumerate(positions):
        if not (0 <= config[s] < len(pos)):
            raise InvalidAssignment(
                f"site {s}: candidate index {config[s]} outside [0, {len(pos)})"
            )
    return config


def log_potential(model: PictorialModel, frame: FrameDetections, config) -> float:
    """Unnormalized log-probability of a full frame configuration."""
    positions, scores = frame_site_arrays(model, frame)
    config = _check_config(config, positions)
    value = sum(float(scores[s][config[s]]) for s in range(len(scores)))
    for a, b, gamma in model.edges:
        d = positions[a][config[a]] - positions[b][config[b]]
        value -= gamma * float(d @ d)
    return value


def exact_joint(model: PictorialModel, frame: FrameDetections, limit: int = EXACT_STATE_LIMIT) -> DistributionTable:
    """Enumerate all configurations and normalize. States are row-major
    (last site varies fastest)."""
    positions, scores = frame_site_arrays(model, frame)
    counts = [len(p) for p in positions]
    total = math.prod(counts)
    if total > limit:
        raise StateSpaceTooLarge(f"{total} joint states exceeds limit {limit}")
    states = np.indices(counts).reshape(len(counts), -1).T  # (K, S)
    logp = _config_log_potentials(model, positions, scores, states)
    probs = np.exp(logp - logsumexp(logp))
    probs /= probs.sum()
    return DistributionTable(states=states, probs=probs)


def _config_log_potentials(model, positions, scores, states) -> np.ndarray:
    """Vectorized log potential for a (K, S) block of configurations."""
    logp = np.zeros(states.shape[0], dtype=np.float64)
    for s in range(states.shape[1]):
        logp += scores[s][states[:, s]]
    for a, b, gamma in model.edges:
        diff = positions[a][states[:, a]] - positions[b][states[:, b]]
        logp -= gamma * np.einsum("ij,ij->i", diff, diff)
    return logp


def gibbs_sample(model: PictorialModel, frame: FrameDetections, burnin: int, n: int, seed: int) -> SampleSet:
    """Single-chain Gibbs sweep sampler; one recorded configuration per sweep."""
    return gibbs_sample_frames(model, [frame], burnin, n, seed)[0]


def gibbs_sample_frames(
    model: PictorialModel,
    frames,
    burnin: int,
    n: int,
    seed: int,
    u_stream: np.ndarray | None = None,
) -> list[SampleSet]:
    """Run one independent Gibbs chain per frame, vectorized across frames.

    Each frame's chain consumes its own column of a (sweeps, sites, frames)
    uniform stream, so realization j of frame a and realization j of frame b
    are independent draws from their respective per-frame distributions.
    Within a frame the kernel is an exact Gibbs sweep (initial state:
    per-site score argmax; sweep order: site order of `model.sites`;
    candidate chosen by inverse CDF). Results are deterministic given the
    seed and the batch. Passing an explicit 2-D `u_stream` of shape
    (sweeps, sites) instead drives every frame with the same uniforms
    (common random numbers); a 3-D (sweeps, sites, frames) array gives
    per-frame control.
    """
    if burnin < 0 or n < 1:
        raise InvalidAssignment(f"need burnin >= 0 and n >= 1, got {burnin}, {n}")
    frames = list(frames)
    per_frame = [frame_site_arrays(model, f) for f in frames]
    sites = len(model.sites)
    m = len(frames)
    if u_stream is None:
        u_stream = make_rng(seed).random((burnin + n, sites, m))
    else:
        if u_stream.ndim == 2:
            u_stream = np.broadcast_to(u_stream[:, :, None], u_stream.shape + (m,))
        if u_stream.shape[0] < burnin + n or u_stream.shape[1] != sites or u_stream.shape[2] < m:
            raise DimensionMismatch(
                f"u_stream must be at least ({burnin + n}, {sites}, {m}), got {u_stream.shape}"
            )
    cmax = [max(len(pf[0][s]) for pf in per_frame) for s in range(sites)]
    pos = [np.zeros((m, cmax[s], 2)) for s in range(sites)]
    score = [np.full((m, cmax[s]), -np.inf) for s in range(sites)]
    ncand = np.zeros((m, sites), dtype=np.int64)
    for i, (positions, scores) in enumerate(per_frame):
        for s in range(sites):
            c = len(scores[s])
            pos[s][i, :c] = positions[s]
            score[s][i, :c] = scores[s]
            ncand[i, s] = c

    neighbors = [[] for _ in range(sites)]
    for a, b, gamma in model.edges:
        neighbors[a].append((b, gamma))
        neighbors[b].append((a, gamma))

    state = np.stack([np.argmax(score[s], axis=1) for s in range(sites)], axis=1)
    chosen = [pos[s][np.arange(m), state[:, s]] for s in range(sites)]
    out = np.empty((n, m, sites), dtype=np.int16)
    rows = np.arange(m)
    for t in range(burnin + n):
        for s in range(sites):
            logits = score[s].copy()
            for o, gamma in neighbors[s]:
                diff = pos[s] - chosen[o][:, None, :]
                logits -= gamma * np.einsum("mcx,mcx->mc", diff, diff)
            logits -= logits.max(axis=1, keepdims=True)
            w = np.exp(logits)
            cdf = np.cumsum(w, axis=1)
            cdf /= cdf[:, -1:]
            idx = (cdf < u_stream[t, s, :m, None]).sum(axis=1)
            np.minimum(idx, ncand[:, s] - 1, out=idx)
            state[:, s] = idx
            chosen[s] = pos[s][rows, idx]
        if t >= burnin:
            out[t - burnin] = state
    return [SampleSet(frames[i].frame_index, out[:, i, :].copy()) for i in range(m)]


def _golden_min(fun, lo: float, hi: float, tol: float = 1e-3) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def fit_gammas(
    model: PictorialModel,
    sequences,
    seed: int = 0,
    exact_limit: int = EXACT_STATE_LIMIT,
    importance_samples: int = 1024,
    tol: float = 1e-3,
    passes: int = 2,
) -> GammaFit:
    """Maximum-likelihood spring weights from observed placements.

    The observed configuration of each frame is the per-site score argmax.
    The likelihood is concave in (gamma1, gamma2), so coordinate-wise golden
    section search converges. log Z is exact when the state space is small
    enough to enumerate, otherwise estimated by importance sampling from the
    score-only product distribution with a fixed seeded sample. A gamma whose
    edge distances carry no variation is unidentifiable; it is pinned to the
    search floor and flagged.
    """
    if isinstance(sequences, DetectionSequence):
        sequences = [sequences]
    star_edges = []
    inter_edges = []
    k = len(model.parts)
    for q in range(model.persons):
        torso = q * k + model.parts.index(Part.TORSO)
        for j, part in enumerate(model.parts):
            if part is not Part.TORSO:
                star_edges.append((torso, q * k + j))
    if model.interaction_enabled:
        shared = [p for p in (Part.TORSO, Part.LEFT_ARM, Part.RIGHT_ARM) if p in model.parts]
        for a in range(model.persons):
            for b in range(a + 1, model.persons):
                for part in shared:
                    j = model.parts.index(part)
                    inter_edges.append((a * k + j, b * k + j))

    def edge_dists(positions, states, edges):
        d = np.zeros(states.shape[0])
        for a, b in edges:
            diff = positions[a][states[:, a]] - positions[b][states[:, b]]
            d += np.einsum("ij,ij->i", diff, diff)
        return d

    # per-frame sufficient statistics, grouped by state-block shape so the
    # likelihood evaluates as a few large array reductions
    exact_groups: dict[int, list] = {}
    is_groups: list = []
    obs_u = obs_d1 = obs_d2 = 0.0
    n_frames = 0
    d1_varies = d2_varies = False
    rng = make_rng(seed, STREAM_FIT)
    for seq in sequences:
        for frame in seq.frames:
            positions, scores = frame_site_arrays(model, frame)
            counts = [len(p) for p in positions]
            observed = np.array([int(np.argmax(s)) for s in scores])[None, :]
            obs_u += sum(float(scores[s][observed[0, s]]) for s in range(len(scores)))
            obs_d1 += float(edge_dists(positions, observed, star_edges)[0])
            obs_d2 += float(edge_dists(positions, observed, inter_edges)[0])
            n_frames += 1
            total = math.prod(counts)
            if total <= exact_limit:
                states = np.indices(counts).reshape(len(counts), -1).T
                u = np.zeros(total)
                for s in range(len(scores)):
                    u += scores[s][states[:, s]]
                d1 = edge_dists(positions, states, star_edges)
                d2 = edge_dists(positions, states, inter_edges)
                exact_groups.setdefault(total, []).append((u, d1, d2))
            else:
                draws = np.stack(
                    [rng.choice(counts[s], size=importance_samples,
                                p=_softmax(scores[s])) for s in range(len(scores))],
                    axis=1,
                )
                log_zu = sum(float(logsumexp(scores[s])) for s in range(len(scores)))
                d1 = edge_dists(positions, draws, star_edges)
                d2 = edge_dists(positions, draws, inter_edges)
                is_groups.append((log_zu, d1, d2))
            if d1.size and np.ptp(d1) > 1e-12:
                d1_varies = True
            if d2.size and np.ptp(d2) > 1e-12:
                d2_varies = True

    exact_stacked = [
        tuple(np.stack([g[i] for g in group]) for i in range(3))
        for group in exact_groups.values()
    ]
    if is_groups:
        is_log_zu = np.array([g[0] for g in is_groups])
        is_d1 = np.stack([g[1] for g in is_groups])
        is_d2 = np.stack([g[2] for g in is_groups])

    def nll(g1, g2):
        total = -(obs_u - g1 * obs_d1 - g2 * obs_d2)
        for u, d1, d2 in exact_stacked:
            total += float(logsumexp(u - g1 * d1 - g2 * d2, axis=1).sum())
        if is_groups:
            total += float(
                (is_log_zu + logsumexp(-g1 * is_d1 - g2 * is_d2, axis=1)).sum()
            ) - len(is_groups) * math.log(is_d1.shape[1])
        return total

    if n_frames == 0:
        raise DegenerateData("no frames to fit")
    degenerate1 = not d1_varies
    degenerate2 = not d2_varies
    g1, g2 = GAMMA_FLOOR, GAMMA_FLOOR
    for _ in range(passes):
        if not degenerate1:
            g1 = _golden_min(lambda g: nll(g, g2), GAMMA_FLOOR, GAMMA_CEIL, tol)
        if not degenerate2:
            g2 = _golden_min(lambda g: nll(g1, g), GAMMA_FLOOR, GAMMA_CEIL, tol)
    return GammaFit(gamma1=g1, gamma2=g2, degenerate1=degenerate1, degenerate2=degenerate2)


def _softmax(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - x.max())
    return z / z.sum()
