"""Shrinkage multinomial estimates and directed-information estimators.

All information quantities are in nats. Cell probabilities are estimated
once, on the full joint, by shrinking the maximum-likelihood frequencies
toward a target (uniform unless stated); every entropy entering a mutual
information term is read off that single shrunk joint, which keeps each
term non-negative by construction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import (
    EmptyHistogram,
    InvalidPmf,
    LengthMismatch,
    ShrinkageDegenerateWarning,
)
from .ingest import SymbolSequence
from .quantize import JointHistogram

LAMBDA_GRID = np.linspace(0.0, 1.0, 21)
CV_FOLDS = 10


@dataclass(frozen=True)
class MultinomialEstimate:
    """Shrunk cell probabilities plus everything they were built from."""

    probs: np.ndarray
    lam: float
    target: np.ndarray
    counts: np.ndarray
    n: float
    theta_ml: np.ndarray


@dataclass(frozen=True)
class DiResult:
    """Directed information with its per-step decomposition."""

    value: float
    per_step: np.ndarray
    lambdas: np.ndarray
    order_k: int


def shrinkage_lambda(counts, target=None) -> float:
    """Closed-form shrinkage intensity, clipped to [0, 1].

    With fewer than two observations, or when the frequencies already equal
    the target, the intensity is pinned to 1 and a warning is issued.
    """
    counts = np.asarray(counts, dtype=np.float64).ravel()
    n = counts.sum()
    if n <= 0:
        raise EmptyHistogram("cannot shrink an empty histogram")
    t = _resolve_target(target, counts.size)
    if n < 2:
        warnings.warn("single observation: shrinking fully to target", ShrinkageDegenerateWarning)
        return 1.0
    theta = counts / n
    denom = (n - 1.0) * ((t - theta) ** 2).sum()
    if denom <= 0.0:
        warnings.warn("frequencies equal the target: lambda pinned to 1", ShrinkageDegenerateWarning)
        return 1.0
    num = 1.0 - (theta**2).sum()
    return float(np.clip(num / denom, 0.0, 1.0))


def _resolve_target(target, size: int) -> np.ndarray:
    if target is None:
        return np.full(size, 1.0 / size)
    t = np.asarray(target, dtype=np.float64).ravel()
    if t.size != size:
        raise InvalidPmf(f"target has {t.size} cells, counts have {size}")
    if t.min() < 0.0 or abs(t.sum() - 1.0) > 1e-9:
        raise InvalidPmf("target must be a probability vector")
    return t


def shrink(counts, lam: float | None = None, target=None) -> MultinomialEstimate:
    """Convex combination of the target and the ML frequencies."""
    arr = np.asarray(counts, dtype=np.float64)
    flat = arr.ravel()
    n = flat.sum()
    if n <= 0:
        raise EmptyHistogram("cannot shrink an empty histogram")
    t = _resolve_target(target, flat.size)
    if lam is None:
        lam = shrinkage_lambda(flat, t)
    lam = float(lam)
    if not (0.0 <= lam <= 1.0):
        raise InvalidPmf(f"lambda must lie in [0, 1], got {lam}")
    theta = flat / n
    probs = lam * t + (1.0 - lam) * theta
    return MultinomialEstimate(
        probs=probs.reshape(arr.shape),
        lam=lam,
        target=t.reshape(arr.shape),
        counts=arr,
        n=float(n),
        theta_ml=theta.reshape(arr.shape),
    )


def entropy(est) -> float:
    """Plug-in entropy in nats; accepts an estimate or a probability array."""
    probs = est.probs if isinstance(est, MultinomialEstimate) else np.asarray(est, dtype=np.float64)
    return float(-xlogy(probs, probs).sum())


def _lambda_by_cv(codes: np.ndarray, n_cells: int, folds: int = CV_FOLDS) -> float:
    """Pick lambda from a fixed grid by 10-fold held-out log-likelihood.

    Folds are assigned by observation position modulo the fold count, so
    the choice is deterministic. Ties prefer the smaller lambda.
    """
    n = codes.size
    if n < 2:
        warnings.warn("single observation: shrinking fully to target", ShrinkageDegenerateWarning)
        return 1.0
    folds = min(folds, n)
    t = 1.0 / n_cells
    total = np.bincount(codes, minlength=n_cells)
    positions = np.arange(n) % folds
    nll = np.zeros(LAMBDA_GRID.size)
    for f in range(folds):
        held = codes[positions == f]
        if held.size == 0 or held.size == n:
            continue
        fold_counts = np.bincount(held, minlength=n_cells)
        theta = (total - fold_counts) / (n - held.size)
        v = theta[held]
        with np.errstate(divide="ignore"):
            nll += -np.log(LAMBDA_GRID[:, None] * t + (1.0 - LAMBDA_GRID[:, None]) * v[None, :]).sum(axis=1)
    return float(LAMBDA_GRID[int(np.argmin(nll))])


def _entropy_of(q: np.ndarray, drop_axes: tuple[int, ...]) -> float:
    marg = q.sum(axis=drop_axes) if drop_axes else q
    return float(-xlogy(marg, marg).sum())


def _cmi_from_counts(counts: np.ndarray, n_a: int, n_b: int, n_c: int,
                     lambda_mode, codes: np.ndarray | None = None) -> tuple[float, float]:
    n = counts.sum()
    if n <= 0:
        raise EmptyHistogram("joint histogram is empty")
    cells = counts.size
    if lambda_mode == "auto":
        lam = shrinkage_lambda(counts)
    elif lambda_mode == "grid":
        if codes is None:
            codes = np.repeat(np.arange(cells), counts.ravel().astype(np.int64))
        lam = _lambda_by_cv(codes, cells)
    else:
        lam = float(lambda_mode)
        if not (0.0 <= lam <= 1.0):
            raise InvalidPmf(f"lambda must lie in [0, 1], got {lam}")
    q = lam / cells + (1.0 - lam) * (counts / n)
    a_axes = tuple(range(n_a))
    b_axes = tuple(range(n_a, n_a + n_b))
    value = (
        _entropy_of(q, b_axes)
        + _entropy_of(q, a_axes)
        - _entropy_of(q, ())
        - _entropy_of(q, a_axes + b_axes)
    )
    return value, lam


def cond_mutual_info(joint, a_axes, b_axes, c_axes=(), lambda_mode="auto") -> float:
    """I(A; B | C) from one joint histogram, axes grouped by role.

    Every axis of the joint must appear in exactly one group. An empty C
    gives plain mutual information. `lambda_mode` is "auto" for the
    closed-form intensity, "grid" for the cross-validated grid, or a fixed
    value in [0, 1].
    """
    counts = joint.counts if isinstance(joint, JointHistogram) else np.asarray(joint)
    a_axes, b_axes, c_axes = tuple(a_axes), tuple(b_axes), tuple(c_axes)
    groups = a_axes + b_axes + c_axes
    if sorted(groups) != list(range(counts.ndim)):
        raise LengthMismatch(
            f"axis groups {groups} must partition all {counts.ndim} axes"
        )
    ordered = np.transpose(counts, groups)
    value, _ = _cmi_from_counts(ordered, len(a_axes), len(b_axes), len(c_axes), lambda_mode)
    return value


def cmi_of_rows(a_rows, b_rows, c_rows, p_a: int, p_b: int, p_c: int,
                lambda_mode="auto") -> tuple[float, float]:
    """I(A; B | C) where each group is a list of aligned symbol rows.

    Returns the estimate and the shrinkage intensity it used. Group alphabet
    sizes apply to every row in that group.
    """
    rows = list(a_rows) + list(b_rows) + list(c_rows)
    dims = (p_a,) * len(a_rows) + (p_b,) * len(b_rows) + (p_c,) * len(c_rows)
    if not rows:
        raise LengthMismatch("need at least one symbol row")
    n = rows[0].shape[0]
    for row in rows:
        if row.shape != (n,):
            raise LengthMismatch("all symbol rows must have equal length")
    codes = np.ravel_multi_index(rows, dims)
    cells = int(np.prod(dims))
    counts = np.bincount(codes, minlength=cells).reshape(dims)
    return _cmi_from_counts(counts, len(a_rows), len(b_rows), len(c_rows), lambda_mode, codes=codes)


def directed_information(x: SymbolSequence, y: SymbolSequence, k: int = 1,
                         lambda_mode="auto") -> DiResult:
    """Order-k directed information from x to y over min(M_x, M_y) frames.

    Step m contributes I(X_{m-e..m}; Y_m | Y_{m-e..m-1}) with e = min(m, k),
    so the first steps use however much past exists. The shrinkage intensity
    is chosen independently per step.
    """
    if x.n != y.n:
        raise LengthMismatch(f"x has n={x.n}, y has n={y.n}")
    if k < 0:
        raise LengthMismatch(f"order k must be >= 0, got {k}")
    m_total = min(x.num_frames, y.num_frames)
    per_step = np.zeros(m_total)
    lambdas = np.zeros(m_total)
    for m in range(m_total):
        e = min(m, k)
        a_rows = [x.frames[i] for i in range(m - e, m + 1)]
        b_rows = [y.frames[m]]
        c_rows = [y.frames[i] for i in range(m - e, m)]
        per_step[m], lambdas[m] = cmi_of_rows(a_rows, b_rows, c_rows, x.p, y.p, y.p, lambda_mode)
    return DiResult(value=float(per_step.sum()), per_step=per_step, lambdas=lambdas, order_k=k)


def _sequence_key(s: SymbolSequence):
    return (s.sequence_id, s.p, s.n, s.frames.tobytes())


def mutual_information(x: SymbolSequence, y: SymbolSequence, k: int = 1,
                       lambda_mode="auto") -> float:
    """Order-k mutual information rate proxy: sum over frames of
    I(X_m; Y_m | joint past of both). Arguments are ordered canonically
    first, so the result is identical, bit for bit, under swapping.
    """
    if _sequence_key(y) < _sequence_key(x):
        x, y = y, x
    if x.n != y.n:
        raise LengthMismatch(f"x has n={x.n}, y has n={y.n}")
    m_total = min(x.num_frames, y.num_frames)
    total = 0.0
    for m in range(m_total):
        e = min(m, k)
        past = [x.frames[i] for i in range(m - e, m)] + [y.frames[i] for i in range(m - e, m)]
        dims_past = (x.p,) * e + (y.p,) * e
        rows = [x.frames[m], y.frames[m]] + past
        dims = (x.p, y.p) + dims_past
        codes = np.ravel_multi_index(rows, dims)
        counts = np.bincount(codes, minlength=int(np.prod(dims))).reshape(dims)
        value, _ = _cmi_from_counts(counts, 1, 1, 2 * e, lambda_mode, codes=codes)
        total += value
    return total


def symmetrized_di(x: SymbolSequence, y: SymbolSequence, k: int = 1,
                   lambda_mode="auto") -> float:
    """Sum of the two directed informations; symmetric by construction."""
    fwd = directed_information(x, y, k, lambda_mode).value
    rev = directed_information(y, x, k, lambda_mode).value
    return fwd + rev
