"""
Cameron-Martin shifts built from kernel translates.

A shift is h(x) = amplitude * sum_z kappa(x - z) over the centers
z in r0 Z^d within distance R + r0 of the origin, with amplitude = (M + l) / c0.
Since kappa >= c0 on B_{r0} and every point of B_R is within r0 of some center
(d <= 3), h >= M + l on B_R.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, TypedDict, Union

import numpy as np
from scipy import stats

from .errors import PreconditionError, ShiftVerificationError
from .kernels import KernelSpec, evaluate_kernel, excursion_radius_report, kernel_from_dict, max_gradient_norm
from .synthesis import GridSpec, grid_for_box, synthesize

logger = logging.getLogger(__name__)

# choose_floor_M refuses smaller ensembles.
MIN_FLOOR_SAMPLES = 50


@dataclass(frozen=True, eq=False)
class ShiftSpec:
    """
    An immutable shift h = amplitude * sum over centers of kappa(. - z).

    Attributes:
        kernel: Kernel whose translates make up h.
        level: Excursion level l.
        radius: R, the ball on which h >= M + l.
        floor: M >= 0.
        c0: Lower bound of kappa on B_{r0}.
        r0: Lattice spacing of the centers.
        centers: (n, d) array of centers.
        r0_conservative: r0 came from the grid-scan fallback for a profile that
            is not radially monotone near 0.
    """
    kernel: KernelSpec
    level: float
    radius: float
    floor: float
    c0: float
    r0: float
    centers: np.ndarray
    r0_conservative: bool = False

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float).reshape(-1, self.kernel.dimension)
        centers.flags.writeable = False
        object.__setattr__(self, "centers", centers)

    @property
    def amplitude(self) -> float:
        return (self.floor + self.level) / self.c0

    @property
    def shift_id(self) -> str:
        return f"h(l={self.level:g},R={self.radius:g},M={self.floor:g})"

    def to_dict(self) -> dict:
        return {
            "kernel_id": self.kernel.kernel_id,
            "kernel": self.kernel.to_dict(),
            "level": self.level,
            "radius": self.radius,
            "floor": self.floor,
            "c0": self.c0,
            "r0": self.r0,
            "amplitude": self.amplitude,
            "centers": self.centers.tolist(),
            "r0_conservative": self.r0_conservative,
        }


def shift_from_dict(obj: dict) -> ShiftSpec:
    return ShiftSpec(
        kernel=kernel_from_dict(obj["kernel"]), level=float(obj["level"]), radius=float(obj["radius"]),
        floor=float(obj["floor"]), c0=float(obj["c0"]), r0=float(obj["r0"]), centers=np.array(obj["centers"]),
        r0_conservative=bool(obj.get("r0_conservative", False)),
    )


def save_shift(h: ShiftSpec, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(h.to_dict(), indent=2))


def load_shift(path: Union[str, Path]) -> ShiftSpec:
    return shift_from_dict(json.loads(Path(path).read_text()))


def lattice_points(spacing: float, radius: float, dimension: int) -> np.ndarray:
    """
    Points of spacing * Z^d at distance strictly less than radius from the origin.

    Examples:
        >>> lattice_points(1.0, 1.5, 2).shape
        (9, 2)
    """
    if not spacing > 0:
        raise ValueError("lattice spacing must be positive")
    if radius <= 0:
        return np.zeros((0, dimension))
    n = int(math.ceil(radius / spacing))
    steps = range(-n, n + 1)
    points = np.array(list(itertools.product(steps, repeat=dimension)), dtype=float) * spacing
    return points[np.sqrt(np.sum(points ** 2, axis=1)) < radius]


class FloorChoice(TypedDict):
    """Result from choose_floor_M."""
    M: float
    quantile: float
    band_low: float
    band_high: float
    target_prob: float
    n_samples: int


def choose_floor_M(
    k: KernelSpec,
    g: GridSpec,
    R: float,
    target_prob: float = 0.75,
    n_samples: int = 200,
    seed: int = 0,
    method: str = "circulant",
) -> FloorChoice:
    """
    Pick M with P[inf over B_R of f >= -M] approximately >= target_prob.

    The target_prob-quantile of -inf_{B_R} f over n_samples synthesized samples is
    rounded up to the next 0.1 and floored at 0. The band is the distribution-free
    95% order-statistic interval for that quantile. The origin vertex always
    belongs to the ball, so R = 0 reduces to the one-point field value.

    Args:
        k: Kernel.
        g: Grid to synthesize on; must contain B_R.
        R: Ball radius.
        target_prob: Coverage probability in (0, 1).
        n_samples: Ensemble size, at least 50.
        seed: First seed; samples use seed, seed + 1, ...

    Returns:
        FloorChoice with the rounded M and the raw quantile with its band.
    """
    if not 0 < target_prob < 1:
        raise ValueError("target_prob must lie in (0, 1)")
    if n_samples < MIN_FLOOR_SAMPLES:
        raise PreconditionError(f"choose_floor_M needs at least {MIN_FLOOR_SAMPLES} samples, got {n_samples}")
    region = g.ball(R)
    region[g.origin_index] = True

    depths = np.empty(n_samples)
    for i in range(n_samples):
        s = synthesize(k, g, seed + i, method=method)
        depths[i] = -float(s.values[region].min())
    depths.sort()

    quantile = float(np.quantile(depths, target_prob))
    lo_rank = int(stats.binom.ppf(0.025, n_samples, target_prob))
    hi_rank = int(stats.binom.ppf(0.975, n_samples, target_prob))
    band_low = float(depths[max(lo_rank - 1, 0)])
    band_high = float(depths[min(hi_rank, n_samples - 1)])
    M = max(0.0, math.ceil(round(quantile * 10.0, 9)) / 10.0)
    logger.info("floor M=%.1f from %d samples (quantile %.4f, band [%.4f, %.4f])",
                M, n_samples, quantile, band_low, band_high)
    return FloorChoice(M=M, quantile=quantile, band_low=band_low, band_high=band_high,
                       target_prob=float(target_prob), n_samples=int(n_samples))


def _kernel_terms(k: KernelSpec, x: np.ndarray, order: str) -> np.ndarray:
    """kappa (or its gradient) at points x, taken as zero beyond a tabulated range."""
    if k.is_analytic:
        return evaluate_kernel(k, x, order)
    r = np.sqrt(np.sum(x * x, axis=-1))
    inside = r <= k.max_radius
    out = np.zeros(x.shape[:-1] if order == "value" else x.shape)
    if inside.any():
        out[inside] = evaluate_kernel(k, x[inside], order)
    return out


def evaluate_shift(h: ShiftSpec, x) -> np.ndarray:
    """
    Evaluate h at one point (d,) or a batch (..., d) by direct summation.

    Examples:
        >>> from gaussperc.kernels import bargmann_fock
        >>> h = build_shift(bargmann_fock(2), level=0.0, R=0.0, M=1.0)
        >>> float(evaluate_shift(h, [0.0, 0.0]))
        2.0
    """
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape[:-1])
    for z in h.centers:
        total = total + _kernel_terms(h.kernel, x - z, "value")
    return h.amplitude * total


def shift_gradient(h: ShiftSpec, x) -> np.ndarray:
    """Gradient of h: the amplitude times the sum of kernel gradients."""
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape)
    for z in h.centers:
        total = total + _kernel_terms(h.kernel, x - z, "gradient")
    return h.amplitude * total


def shift_on_grid(h: ShiftSpec, grid: GridSpec) -> np.ndarray:
    """h at every vertex of grid, shape grid.shape."""
    if grid.dimension != h.kernel.dimension:
        raise ValueError("grid and shift dimensions differ")
    return evaluate_shift(h, grid.coordinates())


def build_shift(
    k: KernelSpec,
    level: float,
    R: float,
    M: float,
    grid: Optional[GridSpec] = None,
) -> ShiftSpec:
    """
    Build the shift for (l, R, M) and verify its bounds on a grid.

    Args:
        k: Kernel.
        level: Excursion level l.
        R: Radius of the ball where h must reach M + l.
        M: Floor, M >= 0.
        grid: Verification grid; defaults to a box of half-width R + 2 r0 at
            spacing r0 / 4.

    Returns:
        The verified ShiftSpec.

    Raises:
        PreconditionError: if M + l < 0 or M < 0.
        ShiftVerificationError: if h < 0 somewhere on the grid or h < M + l somewhere on B_R.
    """
    if M < 0:
        raise PreconditionError(f"floor M must be nonnegative, got {M}")
    if M + level < 0:
        raise PreconditionError(f"M + l = {M + level:g} is negative; the shift amplitude would be negative")
    if R < 0:
        raise ValueError("R must be nonnegative")
    found = excursion_radius_report(k)
    r0, c0 = found["r0"], found["c0"]
    centers = lattice_points(r0, R + r0, k.dimension)
    h = ShiftSpec(
        kernel=k, level=float(level), radius=float(R), floor=float(M), c0=c0, r0=r0, centers=centers,
        r0_conservative=found["conservative"],
    )

    if grid is None:
        grid = grid_for_box(k.dimension, R + 2.0 * r0, r0 / 4.0)
    values = shift_on_grid(h, grid)
    if values.min() < 0:
        worst = np.unravel_index(int(np.argmin(values)), values.shape)
        raise ShiftVerificationError("shift is negative on the grid", tuple(int(i) for i in worst), float(values.min()))
    ball = grid.ball(R)
    ball[grid.origin_index] = True
    target = M + level
    if np.any(values[ball] < target):
        masked = np.where(ball, values, np.inf)
        worst = np.unravel_index(int(np.argmin(masked)), values.shape)
        raise ShiftVerificationError(
            f"shift falls below M + l = {target:g} on B_R", tuple(int(i) for i in worst), float(masked[worst]),
        )
    logger.debug("built shift with %d centers, amplitude %.4g", len(centers), h.amplitude)
    return h


class ShiftIntegrals(TypedDict):
    """Result from shift_integrability."""
    radii: list
    integral_by_radius: list
    gradient_integral_by_radius: list
    integral: float
    gradient_integral: float
    integrable: bool
    bound: float
    bound_ok: bool


def shift_integrability(
    h: ShiftSpec,
    quadrature_radius: Optional[float] = None,
    resolution: Optional[float] = None,
) -> ShiftIntegrals:
    """
    Riemann-sum estimates of the integrals of h and |grad h| over growing boxes.

    The estimates are taken over [-Q/4, Q/4]^d, [-Q/2, Q/2]^d and [-Q, Q]^d. The
    shift is flagged non-integrable when either estimate still grows by more
    than 1% between the last two boxes.

    Args:
        h: The shift.
        quadrature_radius: Q; defaults to R + r0 + 10 length scales.
        resolution: Grid spacing; defaults to min(r0, length scale) / 10.
    """
    k = h.kernel
    Q = quadrature_radius if quadrature_radius is not None else h.radius + h.r0 + 10.0 * k.length_scale
    step = resolution if resolution is not None else min(h.r0, k.length_scale) / 10.0
    grid = grid_for_box(k.dimension, Q, step, margin=0)
    points = grid.coordinates()
    cell = float(np.prod(grid.spacing))
    values = evaluate_shift(h, points)
    slopes = np.sqrt(np.sum(shift_gradient(h, points) ** 2, axis=-1))
    chebyshev = np.max(np.abs(points), axis=-1)

    radii = [Q / 4.0, Q / 2.0, Q]
    integrals, gradients = [], []
    for r in radii:
        inside = chebyshev <= r + 1e-12
        integrals.append(float(values[inside].sum() * cell))
        gradients.append(float(slopes[inside].sum() * cell))

    def grows(series):
        return series[-1] > 0 and (series[-1] - series[-2]) / series[-1] > 0.01

    integrable = not (grows(integrals) or grows(gradients))
    if not integrable:
        logger.warning("shift integrals still growing at Q=%g; flagging as non-integrable", Q)

    # per-center integral of kappa over the same box bounds each translate's share
    single = float(_kernel_terms(k, points, "value").sum() * cell)
    bound = abs(h.amplitude) * len(h.centers) * single
    return ShiftIntegrals(
        radii=radii,
        integral_by_radius=integrals,
        gradient_integral_by_radius=gradients,
        integral=integrals[-1],
        gradient_integral=gradients[-1],
        integrable=integrable,
        bound=bound,
        bound_ok=bool(integrals[-1] <= bound * (1 + 1e-9)),
    )


class SupNorms(TypedDict):
    """Result from shift_sup_norms."""
    sup_value: float
    sup_gradient: float
    bound: float
    bound_ok: bool


def shift_sup_norms(h: ShiftSpec, grid: Optional[GridSpec] = None) -> SupNorms:
    """
    max |h| and max |grad h| over a grid, against amplitude * |centers| * max(kappa(0), max |grad kappa|).
    """
    k = h.kernel
    if grid is None:
        grid = grid_for_box(k.dimension, h.radius + 2.0 * h.r0, h.r0 / 4.0)
    points = grid.coordinates()
    sup_value = float(np.max(np.abs(evaluate_shift(h, points))))
    sup_gradient = float(np.max(np.sqrt(np.sum(shift_gradient(h, points) ** 2, axis=-1))))
    bound = abs(h.amplitude) * len(h.centers) * max(k.value_at_zero(), max_gradient_norm(k))
    return SupNorms(
        sup_value=sup_value,
        sup_gradient=sup_gradient,
        bound=bound,
        bound_ok=bool(sup_value <= bound * (1 + 1e-9) and sup_gradient <= bound * (1 + 1e-9)),
    )
