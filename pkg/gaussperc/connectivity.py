"""
Excursion and nodal masks, connected-component labeling, and percolation
equivalence of nested sets.

Labeling uses union-find over the edge list of the mask (numba-compiled, with
path compression and union by rank). A breadth-first flood fill provides an
independent oracle with the same numbering convention: components are
numbered 1, 2, ... in the order of their smallest flat vertex index.
"""

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
import pandas as pd
from numba import njit
from scipy import ndimage

from .errors import GridMismatchError, InvariantViolation, PreconditionError
from .synthesis import FieldSample, GridSpec

logger = logging.getLogger(__name__)

Adjacency = Literal["faces", "faces_and_diagonals"]
Outcome = Literal["Equivalent", "Merging", "Emergence", "Explosion"]
MaskKind = Literal["excursion", "strict", "sublevel", "nodal", "derived"]


@dataclass(frozen=True, eq=False)
class ExcursionMask:
    """
    A boolean set on a grid with its provenance.

    Excursion, strict and sublevel masks live on the grid's vertices. Nodal masks
    live on its cells and have one entry fewer per axis.
    """
    grid: GridSpec
    bits: np.ndarray
    level: float
    source_id: str = ""
    kind: MaskKind = "excursion"

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool, order="C", copy=True)
        expected = self.grid.shape if self.kind != "nodal" else tuple(max(n - 1, 0) for n in self.grid.shape)
        if bits.shape != expected:
            raise GridMismatchError(f"mask shape {bits.shape} does not match expected {expected}")
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @property
    def shape(self) -> tuple:
        return self.bits.shape

    def derive(self, bits: np.ndarray, grid: Optional[GridSpec] = None, kind: Optional[MaskKind] = None) -> "ExcursionMask":
        """A new mask with the same provenance and different bits."""
        return ExcursionMask(
            grid=grid if grid is not None else self.grid, bits=bits, level=self.level,
            source_id=self.source_id, kind=kind if kind is not None else self.kind,
        )

    def window(self, half_width: float) -> "ExcursionMask":
        """The mask restricted to the box [-half_width, half_width]^d (vertex masks only)."""
        if self.kind == "nodal":
            raise ValueError("nodal masks cannot be windowed by vertex boxes")
        slices, subgrid = self.grid.window(half_width)
        return self.derive(self.bits[slices], grid=subgrid)


def mask_from_bits(grid: GridSpec, bits, level: float = 0.0, source_id: str = "fabricated") -> ExcursionMask:
    """Wrap a hand-built boolean array as a vertex mask."""
    return ExcursionMask(grid=grid, bits=np.asarray(bits, dtype=bool), level=level, source_id=source_id, kind="derived")


def excursion_mask(s: FieldSample, level: float, strict: bool = False) -> ExcursionMask:
    """
    The excursion set {f >= level} (or {f > level} when strict) at the vertices.

    Ties belong to the closed set, matching {f >= level}.
    """
    bits = s.values > level if strict else s.values >= level
    return ExcursionMask(grid=s.grid, bits=bits, level=float(level), source_id=s.sample_id,
                         kind="strict" if strict else "excursion")


def sublevel_mask(s: FieldSample, level: float) -> ExcursionMask:
    """The sublevel set {f <= level}, distributed as {f >= -level} for a centred field."""
    return ExcursionMask(grid=s.grid, bits=s.values <= level, level=float(level), source_id=s.sample_id, kind="sublevel")


def nodal_mask(s: FieldSample, level: float) -> ExcursionMask:
    """
    The discrete level set {f = level}: cells on whose vertices f - level takes
    both signs or vanishes.

    A cell is the unit hypercube spanned by 2^d neighbouring vertices, so the mask
    has cells - 1 entries per axis.
    """
    v = s.values - level
    d = s.grid.dimension
    lo = np.full(tuple(max(n - 1, 0) for n in v.shape), np.inf)
    hi = np.full_like(lo, -np.inf)
    for corner in itertools.product((0, 1), repeat=d):
        sl = tuple(slice(c, n - 1 + c) for c, n in zip(corner, v.shape))
        lo = np.minimum(lo, v[sl])
        hi = np.maximum(hi, v[sl])
    bits = (lo <= 0) & (hi >= 0)
    return ExcursionMask(grid=s.grid, bits=bits, level=float(level), source_id=s.sample_id, kind="nodal")


def neighbour_offsets(dimension: int, adjacency: Adjacency = "faces") -> list:
    """Half of the neighbour offsets (the other half are their negatives)."""
    if adjacency == "faces":
        return [tuple(1 if j == k else 0 for j in range(dimension)) for k in range(dimension)]
    if adjacency == "faces_and_diagonals":
        offsets = []
        for o in itertools.product((-1, 0, 1), repeat=dimension):
            nonzero = [c for c in o if c != 0]
            if nonzero and nonzero[0] > 0:
                offsets.append(o)
        return offsets
    raise ValueError(f"Unknown adjacency {adjacency!r}")


def _offset_slices(shape: tuple, offset: tuple) -> tuple:
    src, dst = [], []
    for n, o in zip(shape, offset):
        if o == 1:
            src.append(slice(0, n - 1))
            dst.append(slice(1, n))
        elif o == -1:
            src.append(slice(1, n))
            dst.append(slice(0, n - 1))
        else:
            src.append(slice(0, n))
            dst.append(slice(0, n))
    return tuple(src), tuple(dst)


def mask_edges(bits: np.ndarray, adjacency: Adjacency = "faces") -> tuple:
    """Flat index pairs (src, dst) of adjacent true vertices."""
    flat = np.arange(bits.size, dtype=np.int64).reshape(bits.shape)
    sources, targets = [], []
    for offset in neighbour_offsets(bits.ndim, adjacency):
        src, dst = _offset_slices(bits.shape, offset)
        both = bits[src] & bits[dst]
        sources.append(flat[src][both])
        targets.append(flat[dst][both])
    if not sources:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    return np.concatenate(sources), np.concatenate(targets)


@njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit(cache=True)
def _union_edges(parent, rank, sources, targets):
    for e in range(sources.shape[0]):
        ra = _find(parent, sources[e])
        rb = _find(parent, targets[e])
        if ra == rb:
            continue
        if rank[ra] < rank[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        if rank[ra] == rank[rb]:
            rank[ra] += 1


@njit(cache=True)
def _resolve_roots(parent):
    roots = np.empty_like(parent)
    for i in range(parent.shape[0]):
        roots[i] = _find(parent, i)
    return roots


@dataclass(frozen=True, eq=False)
class Labeling:
    """
    Connected-component decomposition of a mask.

    labels holds 0 on the background and 1..count on components; per-component
    arrays are indexed by id - 1. bbox[c] is (d, 2) inclusive index bounds and
    touches[c] is (d, 2): whether component c + 1 reaches the low/high face of
    each axis.
    """
    labels: np.ndarray
    count: int
    sizes: np.ndarray
    bbox: np.ndarray
    touches: np.ndarray
    adjacency: str = "faces"

    def touches_boundary(self, component: int) -> bool:
        return bool(self.touches[component - 1].any())

    def boundary_components(self) -> np.ndarray:
        """Ids of components that reach the box boundary."""
        return np.nonzero(self.touches.reshape(self.count, -1).any(axis=1))[0] + 1

    def component_at(self, index) -> int:
        return int(self.labels[tuple(index)])

    def to_frame(self) -> pd.DataFrame:
        """Component table: id, size and one touches flag per face."""
        d = self.labels.ndim
        table = pd.DataFrame({"component": np.arange(1, self.count + 1), "size": self.sizes})
        for axis in range(d):
            table[f"touches_axis{axis}_low"] = self.touches[:, axis, 0] if self.count else []
            table[f"touches_axis{axis}_high"] = self.touches[:, axis, 1] if self.count else []
        return table


def _finish_labeling(labels: np.ndarray, count: int, adjacency: str) -> Labeling:
    d = labels.ndim
    sizes = np.bincount(labels.ravel(), minlength=count + 1)[1:].astype(np.int64)
    bbox = np.zeros((count, d, 2), dtype=np.int64)
    for c, slices in enumerate(ndimage.find_objects(labels, max_label=count)):
        if slices is not None:
            bbox[c] = [(s.start, s.stop - 1) for s in slices]
    touches = np.zeros((count, d, 2), dtype=bool)
    for axis in range(d):
        for side, position in ((0, 0), (1, labels.shape[axis] - 1)):
            face = np.take(labels, position, axis=axis)
            ids = np.unique(face)
            ids = ids[ids > 0]
            touches[ids - 1, axis, side] = True
    return Labeling(labels=labels, count=count, sizes=sizes, bbox=bbox, touches=touches, adjacency=adjacency)


def _label_bits(bits: np.ndarray, adjacency: Adjacency) -> Labeling:
    n = bits.size
    labels = np.zeros(bits.shape, dtype=np.int32)
    if n == 0 or not bits.any():
        return _finish_labeling(labels, 0, adjacency)
    parent = np.arange(n, dtype=np.int64)
    rank = np.zeros(n, dtype=np.int64)
    sources, targets = mask_edges(bits, adjacency)
    _union_edges(parent, rank, sources, targets)
    roots = _resolve_roots(parent)

    true_index = np.flatnonzero(bits)
    unique_roots, first, inverse = np.unique(roots[true_index], return_index=True, return_inverse=True)
    # number components by their smallest vertex
    order = np.argsort(first, kind="stable")
    rank_of_root = np.empty_like(order)
    rank_of_root[order] = np.arange(len(order))
    labels.ravel()[true_index] = rank_of_root[inverse] + 1
    return _finish_labeling(labels, len(unique_roots), adjacency)


def label_components(m: ExcursionMask, adjacency: Adjacency = "faces") -> Labeling:
    """
    Label maximal connected sets of a mask with union-find.

    Args:
        m: The mask.
        adjacency: "faces" (2d neighbours) or "faces_and_diagonals" (3^d - 1).

    Returns:
        A Labeling whose ids follow the smallest contained vertex index.

    Examples:
        >>> grid = GridSpec.cube(2, 3, 3.0)
        >>> label_components(mask_from_bits(grid, np.ones((3, 3)))).count
        1
    """
    return _label_bits(m.bits, adjacency)


def flood_fill_oracle(m: ExcursionMask, adjacency: Adjacency = "faces") -> Labeling:
    """
    Breadth-first labeling, used as an independent oracle for label_components.

    Seeds are visited in flat index order, so the numbering convention matches.
    """
    bits = m.bits
    shape = bits.shape
    labels = np.zeros(shape, dtype=np.int32)
    half = neighbour_offsets(bits.ndim, adjacency)
    offsets = half + [tuple(-c for c in o) for o in half]
    count = 0
    for start in zip(*np.nonzero(bits)):
        if labels[start]:
            continue
        count += 1
        labels[start] = count
        queue = deque([start])
        while queue:
            here = queue.popleft()
            for o in offsets:
                there = tuple(h + c for h, c in zip(here, o))
                if all(0 <= t < n for t, n in zip(there, shape)) and bits[there] and not labels[there]:
                    labels[there] = count
                    queue.append(there)
    return _finish_labeling(labels, count, adjacency)


def same_partition(a: Labeling, b: Labeling) -> bool:
    """True when two labelings partition the same cells identically, up to renaming."""
    if a.labels.shape != b.labels.shape or a.count != b.count:
        return False
    if not np.array_equal(a.labels > 0, b.labels > 0):
        return False
    la = a.labels[a.labels > 0]
    lb = b.labels[b.labels > 0]
    pairs = np.unique(np.stack([la, lb]), axis=1)
    return pairs.shape[1] == a.count


def giant_components(l: Labeling, criterion: str = "touches_all_faces", axis: int = 0) -> list:
    """
    Components that serve as proxies for unbounded ones.

    Args:
        l: A labeling.
        criterion: "touches_all_faces" (meets every face of the box) or "crosses"
            (meets both faces orthogonal to axis).
        axis: Axis for the crossing criterion.

    Returns:
        Sorted list of component ids.
    """
    if l.count == 0:
        return []
    if criterion == "touches_all_faces":
        hit = l.touches.reshape(l.count, -1).all(axis=1)
    elif criterion in ("crosses", "crosses_axis"):
        if not 0 <= axis < l.labels.ndim:
            raise ValueError(f"axis {axis} out of range")
        hit = l.touches[:, axis, 0] & l.touches[:, axis, 1]
    else:
        raise ValueError(f"Unknown giant criterion {criterion!r}")
    return [int(c) for c in np.nonzero(hit)[0] + 1]


def inclusion_map(small: Labeling, large: Labeling) -> np.ndarray:
    """
    The map from components of a set onto components of a superset.

    Returns:
        Array whose entry c - 1 is the id of the large component containing small
        component c.

    Raises:
        InvariantViolation: if a small component is not inside a single large one.
    """
    if small.labels.shape != large.labels.shape:
        raise GridMismatchError("labelings are on different grids")
    if small.count == 0:
        return np.zeros(0, dtype=np.int64)
    inside = small.labels > 0
    pairs = np.unique(np.stack([small.labels[inside], large.labels[inside]]), axis=1)
    if np.any(pairs[1] == 0):
        raise InvariantViolation("small set is not contained in the large set")
    if pairs.shape[1] != small.count:
        raise InvariantViolation("a component of the small set meets several components of the large set")
    mapping = np.zeros(small.count, dtype=np.int64)
    mapping[pairs[0] - 1] = pairs[1]
    return mapping


@dataclass(frozen=True)
class EquivalenceVerdict:
    """
    Result of percolation_equivalence.

    outcome is the first failure found in the order Merging, Emergence,
    Explosion; witness describes it. All detected failures are kept in the
    per-type tuples.
    """
    outcome: Outcome
    witness: dict = field(default_factory=dict)
    merging: tuple = ()
    emergence: tuple = ()
    explosion: tuple = ()

    @property
    def equivalent(self) -> bool:
        return self.outcome == "Equivalent"


def percolation_equivalence(
    a: ExcursionMask,
    b: ExcursionMask,
    R: float,
    adjacency: Adjacency = "faces",
) -> EquivalenceVerdict:
    """
    Decide whether a and b are percolation equivalent outside the ball B_R.

    Both masks are restricted to the vertices at distance >= R from the origin.
    They are equivalent when every component of b contains exactly one component
    of a (no Merging, no Emergence) and no component of a that stays away from
    the box boundary sits in a component of b that reaches it (no Explosion).

    Args:
        a: The smaller set, e.g. {f >= l}.
        b: The larger set, e.g. {f + h >= l} with h >= 0.
        R: Radius of the excluded ball.
        adjacency: Adjacency for both labelings.

    Raises:
        PreconditionError: if a is not contained in b; witness is a vertex of a \\ b.
    """
    if a.grid != b.grid or a.shape != b.shape:
        raise GridMismatchError("masks are on different grids")
    escaped = a.bits & ~b.bits
    if escaped.any():
        witness = tuple(int(i) for i in np.argwhere(escaped)[0])
        raise PreconditionError(f"first mask is not contained in the second (vertex {witness})", witness=witness)

    outside = ~a.grid.ball(R)
    la = _label_bits(a.bits & outside, adjacency)
    lb = _label_bits(b.bits & outside, adjacency)
    mapping = inclusion_map(la, lb)

    per_b = np.bincount(mapping, minlength=lb.count + 1)[1:]
    merging = tuple(
        (int(c), tuple(int(x) for x in np.nonzero(mapping == c)[0] + 1))
        for c in np.nonzero(per_b >= 2)[0] + 1
    )
    emergence = tuple(
        (int(c), tuple(int(i) for i in np.argwhere(lb.labels == c)[0]))
        for c in np.nonzero(per_b == 0)[0] + 1
    )
    a_bounded = ~la.touches.reshape(la.count, -1).any(axis=1)
    b_touch = lb.touches.reshape(lb.count, -1).any(axis=1)
    explosion = tuple(
        (int(c), int(mapping[c - 1]))
        for c in np.nonzero(a_bounded & b_touch[mapping - 1])[0] + 1
    ) if la.count else ()

    if merging:
        outcome, witness = "Merging", {"component": merging[0][0], "merged": merging[0][1]}
    elif emergence:
        outcome, witness = "Emergence", {"component": emergence[0][0], "vertex": emergence[0][1]}
    elif explosion:
        outcome, witness = "Explosion", {"component": explosion[0][0], "into": explosion[0][1]}
    else:
        outcome, witness = "Equivalent", {}
    logger.debug("equivalence outside R=%g: %s", R, outcome)
    return EquivalenceVerdict(outcome=outcome, witness=witness, merging=merging, emergence=emergence, explosion=explosion)


@njit(cache=True)
def _bottleneck_level(values, order, shape, offsets, target):
    n = values.shape[0]
    d = shape.shape[0]
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int64)
    flags = np.zeros(n, dtype=np.int64)
    active = np.zeros(n, dtype=np.bool_)
    index = np.empty(d, dtype=np.int64)
    for t in range(n):
        v = order[t]
        active[v] = True
        rem = v
        for a in range(d - 1, -1, -1):
            index[a] = rem % shape[a]
            rem //= shape[a]
        f = 0
        for a in range(d):
            if index[a] == 0:
                f |= 1 << (2 * a)
            if index[a] == shape[a] - 1:
                f |= 1 << (2 * a + 1)
        flags[v] = f
        for o in range(offsets.shape[0]):
            inside = True
            w = 0
            for a in range(d):
                j = index[a] + offsets[o, a]
                if j < 0 or j >= shape[a]:
                    inside = False
                    break
                w = w * shape[a] + j
            if not inside or not active[w]:
                continue
            ra = _find(parent, v)
            rb = _find(parent, w)
            if ra == rb:
                continue
            if rank[ra] < rank[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            flags[ra] |= flags[rb]
            if rank[ra] == rank[rb]:
                rank[ra] += 1
        if flags[_find(parent, v)] & target == target:
            return values[v]
    return -np.inf


def crossing_level(
    s: FieldSample,
    criterion: str = "crosses",
    axis: int = 0,
    adjacency: Adjacency = "faces",
) -> float:
    """
    The largest level l at which {f >= l} has a giant component on the sample's grid.

    Vertices are switched on in decreasing order of f and merged with union-find
    until one component meets the required faces, so {f >= l} has a giant
    component exactly when l <= crossing_level.

    Args:
        s: The sample.
        criterion: "crosses" (both faces orthogonal to axis) or "touches_all_faces".
        axis: Axis for the crossing criterion.
        adjacency: Grid adjacency.
    """
    d = s.grid.dimension
    if criterion == "touches_all_faces":
        target = (1 << (2 * d)) - 1
    elif criterion in ("crosses", "crosses_axis"):
        if not 0 <= axis < d:
            raise ValueError(f"axis {axis} out of range")
        target = 3 << (2 * axis)
    else:
        raise ValueError(f"Unknown giant criterion {criterion!r}")
    values = s.values.ravel()
    order = np.argsort(-values, kind="stable").astype(np.int64)
    half = neighbour_offsets(d, adjacency)
    offsets = np.array(half + [tuple(-c for c in o) for o in half], dtype=np.int64)
    shape = np.array(s.grid.shape, dtype=np.int64)
    return float(_bottleneck_level(values, order, shape, offsets, target))
