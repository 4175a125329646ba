"""
Boundary-component and critical-point counts, and the Kac-Rice constant.

The sphere of radius L is replaced by the boundary shell of the box
[-L, L]^d on the grid; its intrinsic adjacency is the grid adjacency restricted
to shell vertices.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence, TypedDict, Union

import numpy as np
import pandas as pd
from scipy import linalg, stats

from .connectivity import Adjacency, ExcursionMask, _label_bits, excursion_mask, neighbour_offsets
from .errors import GridMismatchError, InvariantViolation, OutOfRangeError, PreconditionError, UnsupportedOrderError
from .kernels import KernelSpec
from .rng import KAC_RICE_STREAM, rng_for
from .synthesis import FieldSample, GridSpec, grid_for_box, synthesize

logger = logging.getLogger(__name__)

# relative offset of gradient component j is TIE_BREAK ** (j + 1)
TIE_BREAK = 2.0 ** -30


@dataclass(frozen=True, eq=False)
class BoundaryShell:
    """
    The discrete boundary of the box [-L, L]^d.

    slices crop the parent grid to the box; bits marks the shell vertices on the
    cropped sub-grid (Chebyshev index distance exactly K on some axis).
    """
    grid: GridSpec
    L: float
    slices: tuple
    subgrid: GridSpec
    bits: np.ndarray

    @property
    def size(self) -> int:
        return int(self.bits.sum())


def boundary_shell(grid: GridSpec, L: float) -> BoundaryShell:
    """
    Build the box shell at scale L.

    Raises:
        OutOfRangeError: if the box does not fit in the grid.
    """
    try:
        slices, subgrid = grid.window(L)
    except OutOfRangeError as exc:
        raise OutOfRangeError(f"shell at L={L:g} exceeds the grid") from exc
    bits = np.zeros(subgrid.shape, dtype=bool)
    for axis in range(subgrid.dimension):
        index = [slice(None)] * subgrid.dimension
        index[axis] = 0
        bits[tuple(index)] = True
        index[axis] = -1
        bits[tuple(index)] = True
    return BoundaryShell(grid=grid, L=float(L), slices=slices, subgrid=subgrid, bits=bits)


def count_boundary_components(m: ExcursionMask, L: float, adjacency: Adjacency = "faces") -> int:
    """
    Number of connected components of the mask on the box shell at scale L.

    Examples:
        >>> from gaussperc.connectivity import mask_from_bits
        >>> grid = GridSpec.cube(2, 9, 9.0)
        >>> count_boundary_components(mask_from_bits(grid, np.ones((9, 9))), 3.0)
        1
    """
    if m.kind == "nodal":
        raise ValueError("boundary components are counted on vertex masks")
    shell = boundary_shell(m.grid, L)
    return _label_bits(m.bits[shell.slices] & shell.bits, adjacency).count


def _central_gradient(values: np.ndarray, spacing: tuple) -> list:
    """Central differences at the interior vertices, one array per axis."""
    d = values.ndim
    interior = tuple(slice(1, n - 1) for n in values.shape)
    grads = []
    for axis in range(d):
        plus = list(interior)
        minus = list(interior)
        plus[axis] = slice(2, None)
        minus[axis] = slice(0, -2)
        grads.append((values[tuple(plus)] - values[tuple(minus)]) / (2.0 * spacing[axis]))
    return grads


def count_discrete_critical_points(s: FieldSample, region: Union[None, float, np.ndarray] = None) -> int:
    """
    Count zeros of the piecewise-linear interpolant of the discrete gradient.

    Gradients are central differences at interior vertices. Each cell (2^d
    interior vertices) is split into d! simplices along its main diagonal, and
    the gradient is interpolated linearly on each. A simplex counts when its
    linear gradient vanishes inside it. Only cells where every component takes
    both signs on the corners (">= 0" and "< 0") are solved. Each component is
    offset by a tiny axis-dependent amount first, so a gradient that vanishes
    exactly at a vertex is counted in one simplex only.

    Args:
        s: The sample.
        region: None for the whole grid, a half-width for the box [-L, L]^d, or a
            boolean array over the grid selecting vertices (a cell counts when all
            its corners are selected).

    Examples:
        >>> grid = GridSpec.cube(2, 21, 21.0)
        >>> x = grid.coordinates()
        >>> from gaussperc.synthesis import fabricate_sample
        >>> count_discrete_critical_points(fabricate_sample(grid, -np.sum(x ** 2, axis=-1)))
        1
    """
    selected = None
    if region is not None and np.ndim(region) == 0:
        s = s.window(float(region))
    elif region is not None:
        selected = np.asarray(region, dtype=bool)
        if selected.shape != s.grid.shape:
            raise GridMismatchError("region mask does not match the sample grid")

    values = s.values
    if any(n < 4 for n in values.shape):
        return 0
    d = values.ndim
    grads = _central_gradient(values, s.grid.spacing)
    scale = max(float(np.abs(g).max()) for g in grads) or 1.0
    grads = [g + scale * TIE_BREAK ** (axis + 1) for axis, g in enumerate(grads)]
    cell_shape = tuple(n - 3 for n in values.shape)
    candidate = np.ones(cell_shape, dtype=bool)
    for g in grads:
        positive = g >= 0
        any_pos = np.zeros(cell_shape, dtype=bool)
        any_neg = np.zeros(cell_shape, dtype=bool)
        for corner in itertools.product((0, 1), repeat=d):
            sl = tuple(slice(c, c + n) for c, n in zip(corner, cell_shape))
            any_pos |= positive[sl]
            any_neg |= ~positive[sl]
        candidate &= any_pos & any_neg

    if selected is not None:
        inner = selected[tuple(slice(1, n - 1) for n in values.shape)]
        all_in = np.ones(cell_shape, dtype=bool)
        for corner in itertools.product((0, 1), repeat=d):
            all_in &= inner[tuple(slice(c, c + n) for c, n in zip(corner, cell_shape))]
        candidate &= all_in
    return _simplex_zeros(grads, candidate)


def _simplex_zeros(grads: list, candidate: np.ndarray) -> int:
    d = len(grads)
    cells = np.nonzero(candidate)
    if len(cells[0]) == 0:
        return 0

    def at(corner) -> np.ndarray:
        return np.stack([g[tuple(i + c for i, c in zip(cells, corner))] for g in grads], axis=-1)

    base = at((0,) * d)
    zeros = 0
    for order in itertools.permutations(range(d)):
        corner = [0] * d
        columns = []
        for axis in order:
            corner[axis] = 1
            columns.append(at(tuple(corner)) - base)
        A = np.stack(columns, axis=-1)
        solvable = np.abs(np.linalg.det(A)) > 0
        if not solvable.any():
            continue
        # barycentric weights of the zero on the path simplex v0, v0 + e_a, ...
        weights = np.linalg.solve(A[solvable], -base[solvable][..., None])[..., 0]
        inside = np.all(weights >= 0, axis=1) & (weights.sum(axis=1) <= 1)
        zeros += int(inside.sum())
    return zeros


def count_shell_critical_points(s: FieldSample, L: float, adjacency: Adjacency = "faces") -> int:
    """
    Count local maxima and minima of f on the box shell's graph.

    Ties are broken by flat vertex index, so every shell component of {f >= l}
    contains a strict local maximum and the count bounds count_boundary_components
    from above for any level.
    """
    shell = boundary_shell(s.grid, L)
    values = s.values[shell.slices]
    bits = shell.bits
    flat = values.ravel()
    order = np.lexsort((np.arange(flat.size), flat))
    rank = np.empty(flat.size, dtype=np.int64)
    rank[order] = np.arange(flat.size)
    rank = rank.reshape(values.shape)

    is_max = bits.copy()
    is_min = bits.copy()
    half = neighbour_offsets(values.ndim, adjacency)
    for offset in half + [tuple(-c for c in o) for o in half]:
        src, dst = [], []
        for n, o in zip(values.shape, offset):
            src.append(slice(max(0, -o), n - max(0, o)))
            dst.append(slice(max(0, o), n - max(0, -o)))
        src, dst = tuple(src), tuple(dst)
        linked = bits[src] & bits[dst]
        is_max[src] &= ~linked | (rank[src] > rank[dst])
        is_min[src] &= ~linked | (rank[src] < rank[dst])
    return int(is_max.sum() + is_min.sum())


class KacRiceEstimate(TypedDict):
    """Result from kac_rice_density_mc."""
    density: float
    standard_error: float
    n_mc: int
    gradient_density_at_zero: float
    hessian_covariance: list


def _hessian_pairs(d: int) -> list:
    return [(i, j) for i in range(d) for j in range(i, d)]


def derivative_covariances(k: KernelSpec) -> tuple:
    """
    Joint covariance blocks of (grad f, vech Hess f) at one point.

    Returns:
        (grad_cov, cross_cov, hess_cov) with cov(d_i f, d_j f) = -kappa_ij(0),
        cov(d_i f, d_jk f) = kappa_ijk(0) = 0 and cov(d_ij f, d_kl f) = kappa_ijkl(0).
    """
    if not k.is_analytic:
        raise UnsupportedOrderError("Kac-Rice density needs analytic fourth derivatives of the kernel")
    d = k.dimension
    _, d1, d2 = k.derivatives_at_zero()
    delta = np.eye(d)
    grad_cov = -2.0 * d1 * delta
    pairs = _hessian_pairs(d)
    hess_cov = np.empty((len(pairs), len(pairs)))
    for a, (i, j) in enumerate(pairs):
        for b, (p, q) in enumerate(pairs):
            hess_cov[a, b] = 4.0 * d2 * (delta[i, j] * delta[p, q] + delta[i, p] * delta[j, q] + delta[i, q] * delta[j, p])
    cross_cov = np.zeros((d, len(pairs)))
    return grad_cov, cross_cov, hess_cov


def kac_rice_density_mc(k: KernelSpec, n_mc: int, seed: int = 0) -> KacRiceEstimate:
    """
    Monte Carlo estimate of the critical-point density E[|det Hess f| | grad f = 0] p_grad(0).

    The Hessian is drawn from its Gaussian law conditioned on grad f = 0
    (Schur complement of the joint covariance); p_grad(0) is the gradient's
    Gaussian density at the origin.

    Args:
        k: An analytic kernel.
        n_mc: Number of Hessian draws, at least 2.
        seed: Seed of the Kac-Rice random stream.

    Examples:
        >>> from gaussperc.kernels import bargmann_fock
        >>> est = kac_rice_density_mc(bargmann_fock(1), 200_000, seed=1)
        >>> abs(est["density"] - math.sqrt(3) / math.pi) < 4 * est["standard_error"]
        True
    """
    if n_mc < 2:
        raise ValueError("n_mc must be at least 2")
    d = k.dimension
    grad_cov, cross_cov, hess_cov = derivative_covariances(k)
    try:
        grad_factor = linalg.cho_factor(grad_cov)
    except linalg.LinAlgError as exc:
        raise PreconditionError("gradient covariance is degenerate") from exc
    conditional = hess_cov - cross_cov.T @ linalg.cho_solve(grad_factor, cross_cov)
    try:
        chol = linalg.cholesky(conditional, lower=True)
    except linalg.LinAlgError as exc:
        raise PreconditionError("conditional Hessian covariance is degenerate") from exc

    p0 = float((2.0 * math.pi) ** (-0.5 * d) / math.sqrt(linalg.det(grad_cov)))
    z = rng_for(seed, KAC_RICE_STREAM).standard_normal((n_mc, chol.shape[0]))
    entries = z @ chol.T
    hessians = np.empty((n_mc, d, d))
    for a, (i, j) in enumerate(_hessian_pairs(d)):
        hessians[:, i, j] = entries[:, a]
        hessians[:, j, i] = entries[:, a]
    dets = np.abs(np.linalg.det(hessians))
    return KacRiceEstimate(
        density=float(dets.mean() * p0),
        standard_error=float(dets.std(ddof=1) / math.sqrt(n_mc) * p0),
        n_mc=int(n_mc),
        gradient_density_at_zero=p0,
        hessian_covariance=conditional.tolist(),
    )


def rice_density(k: KernelSpec) -> float:
    """Closed-form critical-point density in d = 1: sqrt(kappa''''(0) / -kappa''(0)) / pi."""
    if k.dimension != 1 or not k.is_analytic:
        raise ValueError("the Rice formula here is for analytic kernels in d = 1")
    _, d1, d2 = k.derivatives_at_zero()
    return math.sqrt(12.0 * d2 / (-2.0 * d1)) / math.pi


class PowerLawFit(TypedDict):
    """Result from fit_power_law."""
    exponent: float
    constant: float
    exponent_stderr: float
    r_value: float


def fit_power_law(scales: Sequence[float], means: Sequence[float]) -> PowerLawFit:
    """
    Least-squares fit of log(means) = log(C) + exponent * log(scales).

    Examples:
        >>> fit = fit_power_law([1, 2, 4, 8], [3, 6, 12, 24])
        >>> round(fit["exponent"], 6), round(fit["constant"], 6)
        (1.0, 3.0)
    """
    x = np.log(np.asarray(scales, dtype=float))
    y = np.asarray(means, dtype=float)
    if len(x) < 2 or len(x) != len(y):
        raise ValueError("need at least two (scale, mean) pairs of equal length")
    if np.any(y <= 0):
        raise ValueError("power-law fit needs positive means")
    fit = stats.linregress(x, np.log(y))
    return PowerLawFit(
        exponent=float(fit.slope),
        constant=float(math.exp(fit.intercept)),
        exponent_stderr=float(fit.stderr),
        r_value=float(fit.rvalue),
    )


def boundary_count_table(
    k: KernelSpec,
    level: float,
    scales: Sequence[float],
    n_samples: int,
    seed: int = 0,
    spacing: float = 0.25,
    method: str = "circulant",
    adjacency: Adjacency = "faces",
) -> pd.DataFrame:
    """
    Boundary-component and shell critical-point counts per (L, sample).

    Each sample is synthesized once on a grid covering the largest L and counted
    at every scale. Every row is checked against N_boundary <= N_critical.

    Returns:
        DataFrame with columns L, sample_id, N_boundary, N_critical.
    """
    grid = grid_for_box(k.dimension, max(scales), spacing)
    rows = []
    for i in range(n_samples):
        s = synthesize(k, grid, seed + i, method=method)
        m = excursion_mask(s, level)
        for L in scales:
            n_boundary = count_boundary_components(m, L, adjacency)
            n_critical = count_shell_critical_points(s, L, adjacency)
            if n_boundary > n_critical:
                raise InvariantViolation(
                    f"{s.sample_id}: {n_boundary} boundary components exceed {n_critical} shell critical points at L={L:g}"
                )
            rows.append({"L": float(L), "sample_id": s.sample_id, "N_boundary": n_boundary, "N_critical": n_critical})
    logger.info("counted boundary components for %d samples at %d scales", n_samples, len(scales))
    return pd.DataFrame(rows, columns=["L", "sample_id", "N_boundary", "N_critical"])
