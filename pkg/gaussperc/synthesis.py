"""
Sampling stationary Gaussian fields on regular grids.

Two samplers share one back end: both produce circulant eigenvalues on a padded
torus and colour complex white noise with them through an FFT. The circulant
sampler takes the eigenvalues from the exact covariance (exact in distribution
when they are nonnegative); the spectral sampler takes them from the spectral
density (approximate, but never fails).
"""

import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Literal, Optional, Sequence, TypedDict

import numpy as np
from scipy import fft

from .errors import EmbeddingError, GridMismatchError, OutOfRangeError, PreconditionError
from .kernels import KernelSpec, evaluate_kernel, excursion_radius, spectral_density
from .rng import rng_for

logger = logging.getLogger(__name__)

Method = Literal["circulant", "spectral"]

DEFAULT_PADDING = 2.0
# Negative eigenvalue mass below this fraction of the trace is clipped to zero.
CLIP_TOLERANCE = 1e-8
# Relative error of c(0) above which the spectral sampler warns.
SPECTRAL_TOLERANCE = 1e-3


@dataclass(frozen=True)
class GridSpec:
    """
    A regular grid of vertices centred on the physical origin.

    Axis k has cells[k] vertices at coordinates (i - cells[k] // 2) * spacing[k],
    so the origin is always the vertex cells // 2.
    """
    cells: tuple
    extent: tuple

    def __post_init__(self):
        cells = tuple(int(c) for c in self.cells)
        extent = tuple(float(e) for e in self.extent)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "extent", extent)
        if len(cells) not in (1, 2, 3):
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {len(cells)}")
        if len(extent) != len(cells):
            raise ValueError("cells and extent must have one entry per axis")
        if any(c < 1 for c in cells):
            raise ValueError("cells per axis must be positive")
        if any(not e > 0 for e in extent):
            raise ValueError("extent per axis must be positive")

    @classmethod
    def cube(cls, dimension: int, cells: int, extent: float) -> "GridSpec":
        return cls(cells=(cells,) * dimension, extent=(extent,) * dimension)

    @classmethod
    def from_spacing(cls, dimension: int, cells: int, spacing: float) -> "GridSpec":
        return cls(cells=(cells,) * dimension, extent=(cells * spacing,) * dimension)

    @property
    def dimension(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple:
        return self.cells

    @property
    def spacing(self) -> tuple:
        return tuple(e / c for e, c in zip(self.extent, self.cells))

    @property
    def origin_index(self) -> tuple:
        return tuple(c // 2 for c in self.cells)

    def axis_coordinates(self, axis: int) -> np.ndarray:
        n = self.cells[axis]
        return (np.arange(n) - n // 2) * self.spacing[axis]

    def coordinates(self) -> np.ndarray:
        """Physical vertex coordinates, shape (*cells, d)."""
        axes = [self.axis_coordinates(k) for k in range(self.dimension)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def nearest_vertex(self, point) -> tuple:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != (self.dimension,):
            raise ValueError(f"point must have {self.dimension} coordinates")
        index = tuple(int(round(p / h)) + o for p, h, o in zip(point, self.spacing, self.origin_index))
        if any(not 0 <= i < n for i, n in zip(index, self.cells)):
            raise OutOfRangeError(f"point {point.tolist()} lies outside the grid")
        return index

    def vertex_position(self, index) -> np.ndarray:
        return np.array([(i - o) * h for i, o, h in zip(index, self.origin_index, self.spacing)])

    def distance_from(self, point=None) -> np.ndarray:
        """Euclidean distance of every vertex from the vertex nearest to point (default origin)."""
        center = np.zeros(self.dimension) if point is None else self.vertex_position(self.nearest_vertex(point))
        axes = [self.axis_coordinates(k) - center[k] for k in range(self.dimension)]
        sq = np.zeros(self.shape)
        for k, a in enumerate(axes):
            shape = [1] * self.dimension
            shape[k] = -1
            sq = sq + a.reshape(shape) ** 2
        return np.sqrt(sq)

    def ball(self, radius: float, center=None) -> np.ndarray:
        """Discrete open ball: vertices at Euclidean distance < radius from the center vertex."""
        return self.distance_from(center) < radius

    def window(self, half_width: float) -> tuple:
        """
        Slices and sub-grid of the box [-half_width, half_width]^d.

        Returns:
            (slices, subgrid) where subgrid has 2K+1 vertices per axis with
            K = round(half_width / spacing), centred on the same origin.
        """
        slices, cells, extent = [], [], []
        for n, h, o in zip(self.cells, self.spacing, self.origin_index):
            K = int(round(half_width / h))
            if o - K < 0 or o + K > n - 1:
                raise OutOfRangeError(f"box of half-width {half_width:g} exceeds the grid")
            slices.append(slice(o - K, o + K + 1))
            cells.append(2 * K + 1)
            extent.append((2 * K + 1) * h)
        return tuple(slices), GridSpec(cells=tuple(cells), extent=tuple(extent))

    def covers(self, half_width: float) -> bool:
        try:
            self.window(half_width)
        except OutOfRangeError:
            return False
        return True


def grid_for_box(dimension: int, half_width: float, spacing: float, margin: int = 1) -> GridSpec:
    """Smallest odd-sized cube grid containing [-half_width, half_width]^d plus margin vertices."""
    K = int(round(half_width / spacing)) + margin
    return GridSpec.from_spacing(dimension, 2 * K + 1, spacing)


@dataclass(frozen=True, eq=False)
class FieldSample:
    """One realization of f at the vertices of a grid, with provenance."""
    grid: GridSpec
    values: np.ndarray
    kernel_id: str
    seed: int
    method: str
    antithetic: bool = False
    shifts: tuple = ()
    parent: Optional["FieldSample"] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if values.shape != self.grid.shape:
            raise GridMismatchError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def sample_id(self) -> str:
        tag = f"{self.kernel_id}/{self.method}/{self.seed}"
        if self.antithetic:
            tag += "/neg"
        for s in self.shifts:
            tag += f"+{s}"
        return tag

    def window(self, half_width: float) -> "FieldSample":
        """The sample restricted to the box [-half_width, half_width]^d."""
        slices, subgrid = self.grid.window(half_width)
        return FieldSample(
            grid=subgrid, values=self.values[slices], kernel_id=self.kernel_id, seed=self.seed,
            method=self.method, antithetic=self.antithetic, shifts=self.shifts,
        )


def fabricate_sample(grid: GridSpec, values, label: str = "fabricated") -> FieldSample:
    """Wrap a hand-built value array as a FieldSample (fixtures, file imports)."""
    return FieldSample(grid=grid, values=np.asarray(values, dtype=float), kernel_id=label, seed=0, method="fabricated")


def _torus_size(n: int, padding: float) -> int:
    return max(int(math.ceil(padding * n)), n)


def _torus_lags(grid: GridSpec, padding: float) -> np.ndarray:
    axes = []
    for n, h in zip(grid.cells, grid.spacing):
        m = _torus_size(n, padding)
        j = np.arange(m)
        axes.append(np.minimum(j, m - j) * h)
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


@functools.lru_cache(maxsize=32)
def circulant_eigenvalues(
    k: KernelSpec,
    grid: GridSpec,
    padding: float = DEFAULT_PADDING,
    clip_tolerance: float = CLIP_TOLERANCE,
) -> np.ndarray:
    """
    Eigenvalues of the covariance embedded in a torus of padding x the grid.

    Negative eigenvalues whose total mass is below clip_tolerance x trace are
    clipped to zero; more negative mass than that raises EmbeddingError.
    """
    if k.dimension != grid.dimension:
        raise GridMismatchError(f"kernel dimension {k.dimension} != grid dimension {grid.dimension}")
    row = evaluate_kernel(k, _torus_lags(grid, padding))
    eigenvalues = fft.fftn(row).real
    trace = float(eigenvalues.sum())
    negative_mass = float(-eigenvalues[eigenvalues < 0].sum())
    if negative_mass > clip_tolerance * trace:
        most_negative = float(eigenvalues.min())
        raise EmbeddingError(
            f"circulant embedding of {k.kernel_id} failed: negative eigenvalue mass "
            f"{negative_mass:.3e} (most negative {most_negative:.3e}); try padding {2 * padding:g}",
            most_negative_eigenvalue=most_negative,
            suggested_padding=2 * padding,
        )
    if negative_mass > 0:
        logger.debug("clipping negative eigenvalue mass %.3e (trace %.3e)", negative_mass, trace)
    eigenvalues = np.maximum(eigenvalues, 0.0)
    eigenvalues.flags.writeable = False
    return eigenvalues


@functools.lru_cache(maxsize=32)
def spectral_eigenvalues(k: KernelSpec, grid: GridSpec, padding: float = DEFAULT_PADDING) -> np.ndarray:
    """Torus eigenvalues rho(w_j) / prod(spacing) from the spectral density."""
    if k.dimension != grid.dimension:
        raise GridMismatchError(f"kernel dimension {k.dimension} != grid dimension {grid.dimension}")
    axes = [2 * math.pi * fft.fftfreq(_torus_size(n, padding), d=h) for n, h in zip(grid.cells, grid.spacing)]
    omega = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    if k.is_analytic:
        rho = spectral_density(k, omega)
    else:
        # one quadrature per distinct |w|
        norms = np.sqrt(np.sum(omega * omega, axis=-1))
        unique, inverse = np.unique(np.round(norms, 12), return_inverse=True)
        rho = spectral_density(k, unique)[inverse].reshape(norms.shape)
    eigenvalues = np.maximum(rho, 0.0) / float(np.prod(grid.spacing))
    eigenvalues.flags.writeable = False
    return eigenvalues


def spectral_truncation_error(k: KernelSpec, grid: GridSpec, padding: float = DEFAULT_PADDING) -> float:
    """Relative error of the spectral sampler's variance c(0) against kappa(0)."""
    eigenvalues = spectral_eigenvalues(k, grid, padding)
    return abs(float(eigenvalues.mean()) - k.value_at_zero()) / k.value_at_zero()


@functools.lru_cache(maxsize=64)
def check_resolution(k: KernelSpec, grid: GridSpec) -> bool:
    """Warn when the spacing is coarser than r0/4. Returns True when resolved."""
    try:
        r0, _ = excursion_radius(k)
    except OutOfRangeError:
        return True
    coarsest = max(grid.spacing)
    if coarsest > r0 / 4:
        logger.warning(
            "grid spacing %.4g is coarser than r0/4 = %.4g for %s; excursion topology may be under-resolved",
            coarsest, r0 / 4, k.kernel_id,
        )
        return False
    return True


def sample_stationary(
    eigenvalues: np.ndarray,
    grid: GridSpec,
    seed: int,
    kernel_id: str,
    method: str,
    antithetic: bool = False,
    workers: Optional[int] = None,
) -> FieldSample:
    """
    Colour white noise with torus eigenvalues and restrict to the grid.

    With complex noise z = a + ib (a, b iid standard normal) and M torus sites,
    the real part of FFT(sqrt(eigenvalues / M) * z) has covariance equal to the
    inverse FFT of the eigenvalues.

    Args:
        eigenvalues: Nonnegative torus eigenvalues; the torus must be at least the grid.
        grid: Target grid.
        seed: Seed of the Philox stream driving the noise.
        kernel_id: Provenance.
        method: Provenance ("circulant", "spectral", ...).
        antithetic: Negate the driving noise, which negates the sample exactly.
        workers: FFT worker threads.
    """
    if any(m < n for m, n in zip(eigenvalues.shape, grid.cells)):
        raise GridMismatchError("torus is smaller than the grid")
    rng = rng_for(seed)
    noise = rng.standard_normal(eigenvalues.shape) + 1j * rng.standard_normal(eigenvalues.shape)
    if antithetic:
        noise = -noise
    coloured = fft.fftn(np.sqrt(eigenvalues / eigenvalues.size) * noise, workers=workers)
    values = coloured.real[tuple(slice(0, n) for n in grid.cells)]
    return FieldSample(grid=grid, values=values, kernel_id=kernel_id, seed=int(seed), method=method, antithetic=antithetic)


def synthesize_circulant(
    k: KernelSpec,
    g: GridSpec,
    seed: int,
    padding: float = DEFAULT_PADDING,
    antithetic: bool = False,
    workers: Optional[int] = None,
) -> FieldSample:
    """
    Exact sample of the field on the grid by circulant embedding.

    Examples:
        >>> grid = GridSpec.from_spacing(2, 64, 0.5)
        >>> a = synthesize_circulant(bargmann_fock(2), grid, seed=3)
        >>> b = synthesize_circulant(bargmann_fock(2), grid, seed=3)
        >>> bool((a.values == b.values).all())
        True
    """
    check_resolution(k, g)
    eigenvalues = circulant_eigenvalues(k, g, float(padding))
    return sample_stationary(eigenvalues, g, seed, k.kernel_id, "circulant", antithetic, workers)


def synthesize_spectral(
    k: KernelSpec,
    g: GridSpec,
    seed: int,
    padding: float = DEFAULT_PADDING,
    antithetic: bool = False,
    workers: Optional[int] = None,
) -> FieldSample:
    """
    Approximate sample from the spectral density on the padded torus.

    The covariance error is the aliasing of rho beyond the Nyquist frequency plus
    the periodisation of kappa over the torus; its effect on the variance is
    logged when above SPECTRAL_TOLERANCE (see spectral_truncation_error).
    """
    check_resolution(k, g)
    eigenvalues = spectral_eigenvalues(k, g, float(padding))
    error = abs(float(eigenvalues.mean()) - k.value_at_zero()) / k.value_at_zero()
    if error > SPECTRAL_TOLERANCE:
        logger.warning("spectral synthesis of %s has variance error %.2e", k.kernel_id, error)
    return sample_stationary(eigenvalues, g, seed, k.kernel_id, "spectral", antithetic, workers)


def synthesize(k: KernelSpec, g: GridSpec, seed: int, method: Method = "circulant", **kwargs) -> FieldSample:
    if method == "circulant":
        return synthesize_circulant(k, g, seed, **kwargs)
    if method == "spectral":
        return synthesize_spectral(k, g, seed, **kwargs)
    raise ValueError(f"Unknown synthesis method {method!r}")


def _synthesize_task(args) -> FieldSample:
    k, g, seed, method, antithetic, padding = args
    return synthesize(k, g, seed, method=method, antithetic=antithetic, padding=padding)


def synthesize_ensemble(
    k: KernelSpec,
    g: GridSpec,
    seeds: Iterable[int],
    method: Method = "circulant",
    antithetic: bool = False,
    threads: int = 1,
    padding: float = DEFAULT_PADDING,
) -> list:
    """Synthesize one sample per seed, optionally across worker processes."""
    tasks = [(k, g, int(s), method, antithetic, float(padding)) for s in seeds]
    if threads <= 1 or len(tasks) < 2:
        return [_synthesize_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_synthesize_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))))


class CovarianceEstimate(TypedDict):
    """One row of empirical_covariance."""
    lag: tuple
    estimate: float
    standard_error: float
    n_samples: int
    degenerate: bool


def _lag_slices(shape: tuple, lag: tuple) -> tuple:
    first, second = [], []
    for n, o in zip(shape, lag):
        if abs(o) >= n:
            raise ValueError(f"lag {lag} does not fit in grid {shape}")
        if o >= 0:
            first.append(slice(0, n - o))
            second.append(slice(o, n))
        else:
            first.append(slice(-o, n))
            second.append(slice(0, n + o))
    return tuple(first), tuple(second)


def empirical_covariance(samples: Sequence[FieldSample], lags: Sequence) -> list:
    """
    Estimate E[f(x) f(x + lag)] from an ensemble.

    Each sample contributes the mean of f(x) f(x + lag) over all translations
    that fit in the grid (unbiased, since the field is centred); the estimate is
    the ensemble mean and the standard error the across-sample spread / sqrt(n).

    Args:
        samples: At least two samples on a common grid.
        lags: Grid offsets, one integer per axis.

    Returns:
        A list of CovarianceEstimate dicts, one per lag. A lag whose per-sample
        estimates are all identical (e.g. all-zero samples) is flagged degenerate.
    """
    if len(samples) < 2:
        raise PreconditionError("empirical_covariance needs at least two samples")
    grid = samples[0].grid
    if any(s.grid != grid for s in samples):
        raise GridMismatchError("samples are on different grids")

    rows = []
    for lag in lags:
        lag = tuple(int(o) for o in np.atleast_1d(lag))
        if len(lag) != grid.dimension:
            raise ValueError(f"lag {lag} must have {grid.dimension} entries")
        first, second = _lag_slices(grid.shape, lag)
        per_sample = np.array([float(np.mean(s.values[first] * s.values[second])) for s in samples])
        se = float(np.std(per_sample, ddof=1) / math.sqrt(len(per_sample)))
        rows.append(CovarianceEstimate(
            lag=lag,
            estimate=float(per_sample.mean()),
            standard_error=se,
            n_samples=len(per_sample),
            degenerate=bool(np.all(per_sample == per_sample[0])),
        ))
    return rows


def shift_sample(s: FieldSample, h, scale: float = 1.0, h_values: Optional[np.ndarray] = None) -> FieldSample:
    """
    Add a Cameron-Martin shift to a sample: values'(x) = values(x) + scale * h(x).

    The result records the shift and keeps the unshifted sample as its parent,
    so unshift_sample recovers it bit for bit. Pass h_values (h on the sample's
    grid) to reuse one evaluation across an ensemble.
    """
    # Import here to avoid circular dependency
    from .shift import shift_on_grid

    if h.kernel.dimension != s.grid.dimension:
        raise GridMismatchError("shift and sample dimensions differ")
    if h_values is None:
        h_values = shift_on_grid(h, s.grid)
    elif np.shape(h_values) != s.grid.shape:
        raise GridMismatchError("precomputed shift does not match the sample grid")
    shifted = s.values + scale * h_values
    return FieldSample(
        grid=s.grid, values=shifted, kernel_id=s.kernel_id, seed=s.seed, method=s.method,
        antithetic=s.antithetic, shifts=s.shifts + (h.shift_id,), parent=s,
    )


def unshift_sample(s: FieldSample) -> FieldSample:
    """Undo the most recent shift_sample by returning the recorded parent."""
    if s.parent is None:
        raise PreconditionError("sample has no recorded shift to undo")
    return s.parent
