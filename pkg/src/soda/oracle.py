"""Exact information quantities for small, fully specified joint processes.

A ProcessSpec pins down the joint law of (X_1..X_M, Y_1..Y_M) as one dense
pmf, which makes directed information, its delayed reverse, and mutual
information computable by direct marginalization. Useful as a reference
for the sample-based estimators and for decomposition identities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .errors import InvalidPmf
from .ingest import SymbolSequence
from .rng import make_rng


@dataclass(frozen=True)
class ProcessSpec:
    """Joint pmf with axes (x_1..x_M, y_1..y_M)."""

    num_frames: int
    p_x: int
    p_y: int
    pmf: np.ndarray

    def __post_init__(self):
        m = self.num_frames
        expected = (self.p_x,) * m + (self.p_y,) * m
        if self.pmf.shape != expected:
            raise InvalidPmf(f"pmf shape {self.pmf.shape} does not match {expected}")
        if self.pmf.min() < 0.0 or abs(self.pmf.sum() - 1.0) > 1e-9:
            raise InvalidPmf("pmf must be non-negative and sum to 1")


def random_process(num_frames: int, p_x: int, p_y: int, seed: int) -> ProcessSpec:
    """A dense random joint law; all cells strictly positive."""
    rng = make_rng(seed)
    shape = (p_x,) * num_frames + (p_y,) * num_frames
    pmf = rng.exponential(size=shape)
    pmf /= pmf.sum()
    return ProcessSpec(num_frames, p_x, p_y, pmf)


def _entropy_keeping(pmf: np.ndarray, keep: tuple[int, ...]) -> float:
    drop = tuple(i for i in range(pmf.ndim) if i not in keep)
    marg = pmf.sum(axis=drop) if drop else pmf
    return float(-xlogy(marg, marg).sum())


def exact_cmi(pmf: np.ndarray, a_axes, b_axes, c_axes) -> float:
    a, b, c = tuple(a_axes), tuple(b_axes), tuple(c_axes)
    if not a or not b:
        return 0.0
    return (
        _entropy_keeping(pmf, a + c)
        + _entropy_keeping(pmf, b + c)
        - _entropy_keeping(pmf, a + b + c)
        - _entropy_keeping(pmf, c)
    )


def exact_di(spec: ProcessSpec, reverse: bool = False, delayed: bool = False) -> float:
    """Exact directed information under the spec's joint law.

    Forward: sum over m of I(X^m; Y_m | Y^{m-1}). With `reverse` the roles
    of X and Y swap. With `delayed` the source past excludes the current
    frame: sum of I(source^{m-1}; dest_m | dest^{m-1}), the term that
    closes the decomposition of mutual information into the two directions.
    """
    m_total = spec.num_frames
    x_axes = tuple(range(m_total))
    y_axes = tuple(range(m_total, 2 * m_total))
    src, dst = (y_axes, x_axes) if reverse else (x_axes, y_axes)
    total = 0.0
    for m in range(1, m_total + 1):
        hi = m - 1 if delayed else m
        total += exact_cmi(spec.pmf, src[:hi], (dst[m - 1],), dst[: m - 1])
    return total


def exact_mi(spec: ProcessSpec) -> float:
    """Exact I(X_1..X_M; Y_1..Y_M)."""
    m_total = spec.num_frames
    return exact_cmi(
        spec.pmf, tuple(range(m_total)), tuple(range(m_total, 2 * m_total)), ()
    )


def sample_process(spec: ProcessSpec, n: int, seed: int,
                   ids: tuple[str, str] = ("x", "y")) -> tuple[SymbolSequence, SymbolSequence]:
    """Draw n joint realizations and split them into two symbol sequences."""
    rng = make_rng(seed)
    flat = rng.choice(spec.pmf.size, size=n, p=spec.pmf.ravel())
    coords = np.unravel_index(flat, spec.pmf.shape)
    m_total = spec.num_frames
    x = np.stack(coords[:m_total]).astype(np.int32)
    y = np.stack(coords[m_total:]).astype(np.int32)
    return (
        SymbolSequence(ids[0], None, spec.p_x, x),
        SymbolSequence(ids[1], None, spec.p_y, y),
    )
