"""Local directed-information surfaces and significance screening.

A surface cell (tau_x, tau_y) holds the directed information of the
`window`-frame block of X starting at tau_x into the block of Y starting
at tau_y. Each cell is a sum of per-step conditional MI terms along the
block diagonal, so all cells (and every circular-shift surrogate surface)
are read out of one set of per-step term tables. Cells are normalized
against the surrogate pool and screened by step-up false-discovery
control.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import ConfigError, EmptyInput, InvalidSpec, WindowTooLarge
from .estimators import cmi_of_rows
from .ingest import SymbolSequence
from .rng import STREAM_NULL, derive_seed, make_rng

SIGMA_FLOOR = 1e-12
MIN_NULL_REPS = 30


@dataclass(frozen=True)
class SurfaceSpec:
    """Windowing and calibration parameters for one surface analysis."""

    window: int = 7
    stride: int = 1
    order_k: int = 1
    null_reps: int = 200

    def __post_init__(self):
        if self.window < self.order_k + 2:
            raise WindowTooLarge(
                f"window {self.window} too short for order {self.order_k}; need >= k+2"
            )
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.null_reps < MIN_NULL_REPS:
            raise ConfigError(f"null_reps must be >= {MIN_NULL_REPS}, got {self.null_reps}")


@dataclass(frozen=True)
class DiSurface:
    """Local DI per block-start pair; pval, z, mu, sigma appear after calibration."""

    x_id: str
    y_id: str
    window: int
    order_k: int
    tau_x: np.ndarray  # block starts along X
    tau_y: np.ndarray  # block starts along Y
    di: np.ndarray  # (len(tau_x), len(tau_y))
    z: np.ndarray | None = None
    pval: np.ndarray | None = None
    mu: float | np.ndarray | None = None
    sigma: float | np.ndarray | None = None


@dataclass(frozen=True)
class NullModel:
    """Moments of circular-shift surrogate surfaces.

    mu and sigma are scalars pooled over all surrogate cells, or per-cell
    arrays when calibrated with per_cell=True.
    """

    mu: float | np.ndarray
    sigma: float | np.ndarray
    reps: int
    offsets: np.ndarray
    degenerate: bool


@dataclass(frozen=True)
class Peak:
    tau_x: int
    tau_y: int
    di: float
    z: float
    pval: float
    significant: bool


@dataclass(frozen=True)
class PeakList:
    peaks: tuple[Peak, ...]
    max_stat: float

    def __iter__(self):
        return iter(self.peaks)

    def __len__(self):
        return len(self.peaks)

    @property
    def any_significant(self) -> bool:
        return any(p.significant for p in self.peaks)


@dataclass(frozen=True)
class PairScreen:
    """Corpus-level screening record for one ordered pair."""

    x_id: str
    y_id: str
    max_stat: float
    max_stat_pval: float
    significant: bool  # FDR over all pairs' max-stat p-values
    any_significant_peak: bool  # within-pair peak screen


@dataclass(frozen=True)
class PairAnalysis:
    surface: DiSurface
    null: NullModel
    peaks: PeakList


def _check_window(x: SymbolSequence, y: SymbolSequence, spec: SurfaceSpec) -> None:
    if spec.window > min(x.num_frames, y.num_frames):
        raise WindowTooLarge(
            f"window {spec.window} exceeds min sequence length "
            f"{min(x.num_frames, y.num_frames)}"
        )


def _term_tables(x: SymbolSequence, y: SymbolSequence, k: int, lambda_mode) -> list[np.ndarray]:
    """tables[e][a, b] = I(X_{a-e..a}; Y_b | Y_{b-e..b-1}) with circular X rows.

    X indices wrap modulo M_x, so the same tables serve the observed surface
    (which never wraps) and every circular-shift surrogate.
    """
    mx, my = x.num_frames, y.num_frames
    tables = []
    for e in range(k + 1):
        w = np.full((mx, my), np.nan)
        for b in range(e, my):
            b_rows = [y.frames[b]]
            c_rows = [y.frames[i] for i in range(b - e, b)]
            for a in range(mx):
                a_rows = [x.frames[(a - e + i) % mx] for i in range(e + 1)]
                w[a, b], _ = cmi_of_rows(a_rows, b_rows, c_rows, x.p, y.p, y.p, lambda_mode)
        tables.append(w)
    return tables


def _tau_grid(m: int, window: int, stride: int) -> np.ndarray:
    return np.arange(0, m - window + 1, stride)


def _surface_from_tables(tables, spec: SurfaceSpec, mx: int, my: int, shift: int = 0) -> np.ndarray:
    tx = _tau_grid(mx, spec.window, spec.stride)
    ty = _tau_grid(my, spec.window, spec.stride)
    di = np.zeros((tx.size, ty.size))
    for s in range(spec.window):
        e = min(s, spec.order_k)
        a_idx = (tx + s + shift) % mx
        b_idx = ty + s
        di += tables[e][np.ix_(a_idx, b_idx)]
    return di


def local_di_surface(x: SymbolSequence, y: SymbolSequence, spec: SurfaceSpec = SurfaceSpec(),
                     lambda_mode="auto") -> DiSurface:
    """Observed local DI: cell (i, j) equals the whole-block directed
    information of X[tau_x[i] .. +window) into Y[tau_y[j] .. +window)."""
    _check_window(x, y, spec)
    tables = _term_tables(x, y, spec.order_k, lambda_mode)
    di = _surface_from_tables(tables, spec, x.num_frames, y.num_frames)
    return DiSurface(
        x.sequence_id, y.sequence_id, spec.window, spec.order_k,
        _tau_grid(x.num_frames, spec.window, spec.stride),
        _tau_grid(y.num_frames, spec.window, spec.stride),
        di,
    )


def null_calibrate(x: SymbolSequence, y: SymbolSequence, spec: SurfaceSpec = SurfaceSpec(),
                   seed: int = 0, lambda_mode="auto", per_cell: bool = False,
                   _tables=None) -> NullModel:
    """Circular-shift surrogate null, pooled over all surrogate surface cells.

    Each replicate advances every X block start by one random non-zero
    offset modulo M_x, which destroys block alignment while preserving each
    block's internal statistics. With per_cell=True, moments are kept per
    cell instead of pooled.
    """
    _check_window(x, y, spec)
    mx = x.num_frames
    if mx < 2:
        return NullModel(0.0, 0.0, spec.null_reps,
                         np.zeros(spec.null_reps, dtype=np.int64), True)
    rng = make_rng(seed, STREAM_NULL)
    offsets = rng.integers(1, mx, size=spec.null_reps)
    tables = _term_tables(x, y, spec.order_k, lambda_mode) if _tables is None else _tables
    values = np.stack([
        _surface_from_tables(tables, spec, mx, y.num_frames, shift=int(d))
        for d in offsets
    ])
    if per_cell:
        mu = values.mean(axis=0)
        sigma = values.std(axis=0, ddof=1)
        degenerate = bool((sigma < SIGMA_FLOOR).any())
    else:
        mu = float(values.mean())
        sigma = float(values.std(ddof=1))
        degenerate = sigma < SIGMA_FLOOR
    return NullModel(mu, sigma, spec.null_reps, offsets, degenerate=degenerate)


def p_values(surface: DiSurface, null: NullModel) -> DiSurface:
    """Upper-tail normal p-values, 1 - Phi(z), for each cell against the null.

    Phi is evaluated through the complementary error function (double
    precision, far below the 1e-10 accuracy requirement). A degenerate null
    fixes every p-value at 1.
    """
    if null.degenerate:
        z = np.zeros_like(surface.di)
        pv = np.ones_like(surface.di)
    else:
        z = (surface.di - null.mu) / null.sigma
        pv = 0.5 * erfc(z / np.sqrt(2.0))
    return DiSurface(surface.x_id, surface.y_id, surface.window, surface.order_k,
                     surface.tau_x, surface.tau_y, surface.di,
                     z=z, pval=pv, mu=null.mu, sigma=null.sigma)


def fdr_select(pvals, q: float = 0.1, method: str = "by") -> np.ndarray:
    """Step-up selection mask at false-discovery rate q.

    method "bh" uses the plain step-up thresholds i*q/m; "by" divides by
    the harmonic correction sum(1/j), valid under arbitrary dependence.
    """
    if not (0.0 < q < 1.0):
        raise ConfigError(f"q must lie in (0, 1), got {q}")
    if method not in ("bh", "by"):
        raise ConfigError(f"method must be 'bh' or 'by', got {method!r}")
    p = np.asarray(pvals, dtype=np.float64)
    shape = p.shape
    p = p.ravel()
    m = p.size
    if m == 0:
        raise EmptyInput("no p-values to select from")
    c = 1.0 if method == "bh" else float((1.0 / np.arange(1, m + 1)).sum())
    order = np.argsort(p, kind="stable")
    thresholds = np.arange(1, m + 1) * q / (m * c)
    ok = p[order] <= thresholds
    if not ok.any():
        return np.zeros(shape, dtype=bool)
    cutoff = p[order][np.nonzero(ok)[0][-1]]
    return (p <= cutoff).reshape(shape)


def _strict_maxima(di: np.ndarray) -> np.ndarray:
    padded = np.pad(di, 1, constant_values=-np.inf)
    nx, ny = di.shape
    mask = np.ones(di.shape, dtype=bool)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            mask &= di > padded[1 + dx : 1 + dx + nx, 1 + dy : 1 + dy + ny]
    return mask


def detect_peaks(surface: DiSurface, q: float = 0.1, method: str = "by",
                 top_n: int = 10) -> PeakList:
    """Strictly locally maximal cells, FDR-screened, best top_n by p-value.

    Boundary cells compare only their in-grid neighbors; plateaus yield no
    peak. FDR selection runs over all candidate maxima before truncation,
    so reported significance does not depend on top_n.
    """
    if surface.pval is None or surface.z is None:
        raise InvalidSpec("surface has no p-values; calibrate against a null first")
    if top_n < 1:
        raise ConfigError(f"top_n must be >= 1, got {top_n}")
    mask = _strict_maxima(surface.di)
    xs, ys = np.nonzero(mask)
    max_stat = float(surface.di.max())
    if xs.size == 0:
        return PeakList(peaks=(), max_stat=max_stat)
    pv = surface.pval[xs, ys]
    selected = fdr_select(pv, q, method)
    order = sorted(
        range(xs.size),
        key=lambda i: (pv[i], -surface.di[xs[i], ys[i]], int(xs[i]), int(ys[i])),
    )
    peaks = tuple(
        Peak(
            tau_x=int(surface.tau_x[xs[i]]),
            tau_y=int(surface.tau_y[ys[i]]),
            di=float(surface.di[xs[i], ys[i]]),
            z=float(surface.z[xs[i], ys[i]]),
            pval=float(pv[i]),
            significant=bool(selected[i]),
        )
        for i in order[:top_n]
    )
    return PeakList(peaks=peaks, max_stat=max_stat)


def analyze_pair(x: SymbolSequence, y: SymbolSequence, spec: SurfaceSpec = SurfaceSpec(),
                 *, q: float = 0.1, method: str = "by", top_n: int = 10,
                 seed: int = 0, lambda_mode="auto", per_cell: bool = False) -> PairAnalysis:
    """Surface, null calibration and peak screen for one ordered pair."""
    _check_window(x, y, spec)
    tables = _term_tables(x, y, spec.order_k, lambda_mode)
    di = _surface_from_tables(tables, spec, x.num_frames, y.num_frames)
    surface = DiSurface(
        x.sequence_id, y.sequence_id, spec.window, spec.order_k,
        _tau_grid(x.num_frames, spec.window, spec.stride),
        _tau_grid(y.num_frames, spec.window, spec.stride),
        di,
    )
    null = null_calibrate(x, y, spec, seed, lambda_mode, per_cell, _tables=tables)
    surface = p_values(surface, null)
    peaks = detect_peaks(surface, q, method, top_n)
    return PairAnalysis(surface=surface, null=null, peaks=peaks)


def screen_pairs(sequences, spec: SurfaceSpec = SurfaceSpec(), *, q: float = 0.1,
                 method: str = "by", top_n: int = 10, seed: int = 0,
                 lambda_mode="auto") -> list[PairScreen]:
    """Screen every ordered pair of distinct sequences at corpus level.

    Each pair contributes one max-statistic p-value (the calibrated p-value
    of its largest surface cell). `significant` applies FDR across this
    family of K*(K-1) hypotheses. The within-pair peak screen is reported
    alongside.
    """
    seqs = list(sequences)
    records = []
    for i, x in enumerate(seqs):
        for j, y in enumerate(seqs):
            if i == j:
                continue
            result = analyze_pair(
                x, y, spec, q=q, method=method, top_n=top_n,
                seed=derive_seed(seed, STREAM_NULL, i, j), lambda_mode=lambda_mode,
            )
            flat = int(np.argmax(result.surface.di))
            max_pval = float(result.surface.pval.ravel()[flat])
            records.append((x, y, result, max_pval))
    if not records:
        return []
    family = fdr_select(np.array([r[3] for r in records]), q, method)
    return [
        PairScreen(
            x_id=x.sequence_id,
            y_id=y.sequence_id,
            max_stat=result.peaks.max_stat,
            max_stat_pval=max_pval,
            significant=bool(family[idx]),
            any_significant_peak=result.peaks.any_significant,
        )
        for idx, (x, y, result, max_pval) in enumerate(records)
    ]
