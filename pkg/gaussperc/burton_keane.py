"""
Coarse trifurcations and the Burton-Keane counting bound.

A vertex x is an R-coarse trifurcation of a mask when its component reaches the
box boundary and splits into at least three boundary-touching branches once the
discrete ball B_R(x) is removed. The number T_L of trifurcations on the
4R-lattice must satisfy T_L <= max(0, N_boundary - 2); a mask that breaks it is
reported as an InvariantViolation.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy import ndimage
from scipy.spatial.distance import pdist

from .connectivity import Adjacency, ExcursionMask, Labeling, _label_bits, excursion_mask, label_components
from .counting import count_boundary_components
from .errors import InvariantViolation, OutOfRangeError, PreconditionError
from .kernels import KernelSpec
from .shift import lattice_points
from .synthesis import grid_for_box, synthesize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrifurcationVerdict:
    """Outcome of detect_trifurcation at one point; truthy when it is a trifurcation."""
    point: tuple
    vertex: tuple
    trifurcation: bool
    branches: tuple = ()
    reason: str = ""

    def __bool__(self) -> bool:
        return self.trifurcation


def _structure(d: int, adjacency: Adjacency) -> np.ndarray:
    return ndimage.generate_binary_structure(d, 1 if adjacency == "faces" else d)


def _check_margin(m: ExcursionMask, vertex: tuple, R: float) -> None:
    for i, n, h in zip(vertex, m.grid.shape, m.grid.spacing):
        distance = min(i, n - 1 - i) * h
        if distance < 2 * R:
            raise OutOfRangeError(f"ball of radius {R:g} at vertex {vertex} is too close to the grid boundary")


def _local_branch_bound(component: np.ndarray, ball: np.ndarray, vertex: tuple, R: float, m: ExcursionMask,
                        adjacency: Adjacency) -> int:
    """
    Upper bound on the number of branches from a window around the ball.

    Every branch contains a vertex adjacent to the ball, and ring vertices joined
    inside the window lie in one branch.
    """
    window = tuple(
        slice(max(0, i - int(math.ceil(R / h)) - 2), min(n, i + int(math.ceil(R / h)) + 3))
        for i, n, h in zip(vertex, m.grid.shape, m.grid.spacing)
    )
    local_ball = ball[window]
    rest = component[window] & ~local_ball
    ring = rest & ndimage.binary_dilation(local_ball, structure=_structure(m.grid.dimension, adjacency))
    local = _label_bits(rest, adjacency)
    return len(np.unique(local.labels[ring]))


def detect_trifurcation(
    m: ExcursionMask,
    x,
    R: float,
    labeling: Optional[Labeling] = None,
    adjacency: Adjacency = "faces",
) -> TrifurcationVerdict:
    """
    Decide whether x is an R-coarse trifurcation of the mask.

    Args:
        m: Vertex mask; its grid boundary plays the role of infinity.
        x: Physical point; snapped to the nearest vertex.
        R: Ball radius.
        labeling: Precomputed labeling of m with the same adjacency.
        adjacency: Grid adjacency.

    Returns:
        A TrifurcationVerdict; branches lists the branch ids in the labeling of
        the component with the ball removed.

    Raises:
        OutOfRangeError: if x lies closer than 2R to the grid boundary.
    """
    vertex = m.grid.nearest_vertex(x)
    point = tuple(float(c) for c in np.atleast_1d(x))
    _check_margin(m, vertex, R)
    if not m.bits[vertex]:
        return TrifurcationVerdict(point, vertex, False, reason="background")

    if labeling is None:
        labeling = label_components(m, adjacency)
    own = labeling.component_at(vertex)
    if not labeling.touches_boundary(own):
        return TrifurcationVerdict(point, vertex, False, reason="bounded")

    component = labeling.labels == own
    ball = m.grid.ball(R, center=x)
    if _local_branch_bound(component, ball, vertex, R, m, adjacency) < 3:
        return TrifurcationVerdict(point, vertex, False, reason="fewer than three local arms")

    rest = _label_bits(component & ~ball, adjacency)
    branches = tuple(int(c) for c in rest.boundary_components())
    if len(branches) < 3:
        return TrifurcationVerdict(point, vertex, False, branches, reason="fewer than three branches")
    return TrifurcationVerdict(point, vertex, True, branches)


@dataclass(frozen=True, eq=False)
class TrifurcationReport:
    """
    Trifurcation count on the lattice 4R Z^d within B_{L - 2R}, with the boundary count.

    inequality_ok is T <= max(0, N_boundary - 2).
    """
    L: float
    R: float
    level: float
    points: np.ndarray
    verdicts: list = field(default_factory=list)
    T: int = 0
    N_boundary: int = 0
    source_id: str = ""

    @property
    def inequality_ok(self) -> bool:
        return self.T <= max(0, self.N_boundary - 2)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {"point": v.point, "vertex": v.vertex, "trifurcation": v.trifurcation,
             "branches": len(v.branches), "reason": v.reason}
            for v in self.verdicts
        ], columns=["point", "vertex", "trifurcation", "branches", "reason"])


def trifurcation_lattice(m: ExcursionMask, R: float, L: float) -> np.ndarray:
    """
    Points of 4R Z^d inside B_{L - 2R}, checked to have pairwise disjoint balls on the grid.

    Raises:
        PreconditionError: if snapping to the grid brings two points closer than 2R.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    points = lattice_points(4.0 * R, L - 2.0 * R, m.grid.dimension)
    if len(points) > 1:
        snapped = np.array([m.grid.vertex_position(m.grid.nearest_vertex(p)) for p in points])
        if pdist(snapped).min() < 2.0 * R:
            raise PreconditionError(f"grid spacing {m.grid.spacing} is too coarse for disjoint balls of radius {R:g}")
    return points


def count_trifurcations(
    m: ExcursionMask,
    R: float,
    L: float,
    adjacency: Adjacency = "faces",
) -> TrifurcationReport:
    """
    Count trifurcations of the mask cropped to [-L, L]^d and compare with N_boundary.

    Examples:
        >>> from gaussperc.connectivity import mask_from_bits
        >>> from gaussperc.synthesis import GridSpec
        >>> grid = GridSpec.cube(2, 41, 41.0)
        >>> report = count_trifurcations(mask_from_bits(grid, np.zeros((41, 41))), R=2.0, L=20.0)
        >>> report.T, report.N_boundary, report.inequality_ok
        (0, 0, True)
    """
    box = m.window(L)
    points = trifurcation_lattice(box, R, L)
    labeling = label_components(box, adjacency)
    verdicts = [detect_trifurcation(box, p, R, labeling, adjacency) for p in points]
    return TrifurcationReport(
        L=float(L), R=float(R), level=m.level, points=points, verdicts=verdicts,
        T=sum(1 for v in verdicts if v), N_boundary=count_boundary_components(box, L, adjacency),
        source_id=m.source_id,
    )


def assert_burton_keane(report: TrifurcationReport) -> None:
    """Raise InvariantViolation unless T <= max(0, N_boundary - 2)."""
    if not report.inequality_ok:
        raise InvariantViolation(
            f"{report.source_id}: {report.T} trifurcations but only {report.N_boundary} boundary components "
            f"at L={report.L:g}, R={report.R:g}"
        )


def trifurcation_density_sweep(
    k: KernelSpec,
    level: float,
    R: float,
    scales: Sequence[float],
    n_samples: int,
    seed: int = 0,
    spacing: float = 0.25,
    method: str = "circulant",
    adjacency: Adjacency = "faces",
) -> pd.DataFrame:
    """
    Mean trifurcation density T_L / L^d and boundary density N_boundary / L^(d-1) per scale.

    Every sample is checked against the Burton-Keane bound. The upper 95% bound on
    the trifurcation density is the normal bound on the mean, or the rule of three
    when no trifurcation was seen.

    Returns:
        DataFrame with columns L, n_samples, mean_T, T_density, T_density_upper,
        mean_N_boundary, boundary_density.
    """
    d = k.dimension
    grid = grid_for_box(d, max(scales), spacing)
    counts = {L: ([], []) for L in scales}
    for i in range(n_samples):
        m = excursion_mask(synthesize(k, grid, seed + i, method=method), level)
        for L in scales:
            report = count_trifurcations(m, R, L, adjacency)
            assert_burton_keane(report)
            counts[L][0].append(report.T)
            counts[L][1].append(report.N_boundary)

    rows = []
    for L in scales:
        T = np.array(counts[L][0], dtype=float)
        N = np.array(counts[L][1], dtype=float)
        mean_T = float(T.mean())
        if T.any():
            upper = mean_T + 1.96 * float(T.std(ddof=1)) / math.sqrt(len(T))
        else:
            upper = 3.0 / len(T)
        rows.append({
            "L": float(L),
            "n_samples": int(n_samples),
            "mean_T": mean_T,
            "T_density": mean_T / L ** d,
            "T_density_upper": upper / L ** d,
            "mean_N_boundary": float(N.mean()),
            "boundary_density": float(N.mean()) / L ** (d - 1),
        })
        logger.info("L=%g: mean T=%.3f, mean N_boundary=%.2f", L, mean_T, N.mean())
    return pd.DataFrame(rows)
