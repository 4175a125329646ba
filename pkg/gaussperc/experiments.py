"""
Monte Carlo experiments on excursion-set percolation.

Every experiment takes an ExperimentConfig and returns an ExperimentReport whose
rows are plot-ready. Samples are synthesized once per seed on a grid covering
the largest box and reused for every level and scale (common random numbers).
Ensemble runs also check the Burton-Keane bound on every sample.
"""

import hashlib
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np
import pandas as pd
from scipy import stats

from .burton_keane import assert_burton_keane, count_trifurcations
from .connectivity import (
    crossing_level,
    excursion_mask,
    giant_components,
    inclusion_map,
    label_components,
    nodal_mask,
    percolation_equivalence,
    sublevel_mask,
)
from .counting import boundary_count_table, count_discrete_critical_points, fit_power_law, kac_rice_density_mc, rice_density
from .errors import InvariantViolation, PreconditionError
from .kernels import KernelSpec, kernel_from_dict
from .shift import ShiftSpec, build_shift, choose_floor_M, shift_on_grid
from .synthesis import FieldSample, GridSpec, grid_for_box, shift_sample, synthesize, synthesize_ensemble

logger = logging.getLogger(__name__)

EVENTS = ("giants_intersect_ball", "exceeds_level_in_ball", "int_and_floor")


@dataclass
class ExperimentConfig:
    """
    Everything that determines an experiment's random draws and outputs.

    Seeds seed, seed + 1, ... drive the samples; levels and scales are evaluated on
    the same samples.
    """
    kernel: dict = field(default_factory=lambda: {"family": "bargmann_fock", "params": {}, "dimension": 2})
    spacing: float = 0.25
    padding: float = 2.0
    method: str = "circulant"
    levels: list = field(default_factory=lambda: [0.0])
    scales: list = field(default_factory=lambda: [16.0])
    n_samples: int = 100
    seed: int = 0
    threads: int = 1
    adjacency: str = "faces"
    criterion: str = "crosses"
    axis: int = 0
    set_kind: str = "excursion"
    check_burton_keane: bool = True
    trif_radius: float = 2.0
    bracket: list = field(default_factory=lambda: [-0.5, 0.5])
    bisection_tolerance: float = 0.02
    shift_radius: float = 5.0
    floor: Optional[float] = None
    target_prob: float = 0.75
    floor_samples: int = 200
    radii: list = field(default_factory=list)
    event: str = "giants_intersect_ball"
    event_k: int = 1
    rice_length: float = 1.0e4
    n_mc: int = 200_000

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be positive")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if not self.scales or any(not L > 0 for L in self.scales):
            raise ValueError("scales must be a nonempty list of positive box half-widths")
        if not self.levels:
            raise ValueError("levels must not be empty")
        if self.set_kind not in ("excursion", "strict", "sublevel", "nodal"):
            raise ValueError(f"Unknown set kind {self.set_kind!r}")
        if self.event not in EVENTS:
            raise ValueError(f"Unknown event {self.event!r}; expected one of {EVENTS}")
        self.levels = [float(l) for l in self.levels]
        self.scales = sorted(float(L) for L in self.scales)

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"Unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self) -> str:
        # threads changes scheduling only, never the draws
        obj = self.to_dict()
        obj.pop("threads")
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:16]

    def kernel_spec(self) -> KernelSpec:
        return kernel_from_dict(self.kernel)

    def grid(self, half_width: Optional[float] = None) -> GridSpec:
        half_width = max(self.scales) if half_width is None else half_width
        return grid_for_box(self.kernel_spec().dimension, half_width, self.spacing)

    def seeds(self) -> range:
        return range(self.seed, self.seed + self.n_samples)


@dataclass
class ExperimentReport:
    """Rows of one experiment with the config echo and summary numbers."""
    experiment: str
    rows: list
    config: dict
    config_hash: str
    wall_clock: float
    version: str
    summary: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def to_json(self) -> str:
        return json.dumps(asdict(self), default=_json_default)

    def to_jsonl(self, path: Union[str, Path]) -> None:
        """Append this report as one JSON line."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a") as fh:
            fh.write(self.to_json() + "\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _version() -> str:
    # Import here to avoid circular dependency
    from . import __version__
    return __version__


def _report(name: str, cfg: ExperimentConfig, rows: list, started: float, summary: Optional[dict] = None) -> ExperimentReport:
    digest = cfg.config_hash
    for row in rows:
        row["config_hash"] = digest
    return ExperimentReport(
        experiment=name, rows=rows, config=cfg.to_dict(), config_hash=digest,
        wall_clock=time.perf_counter() - started, version=_version(), summary=summary or {},
    )


def wilson_interval(hits: int, n: int, confidence: float = 0.95) -> tuple:
    """
    Wilson score interval for a binomial proportion.

    Examples:
        >>> lo, hi = wilson_interval(0, 10)
        >>> round(lo, 4), round(hi, 4)
        (0.0, 0.2775)
    """
    if n <= 0:
        raise ValueError("need at least one trial")
    ci = stats.binomtest(int(hits), int(n)).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _proportion(hits: int, n: int) -> dict:
    lo, hi = wilson_interval(hits, n)
    return {"hits": int(hits), "n": int(n), "probability": hits / n, "ci_low": lo, "ci_high": hi}


def iter_samples(cfg: ExperimentConfig, grid: Optional[GridSpec] = None, chunk: int = 32) -> Iterator[FieldSample]:
    """Yield the config's samples in seed order, synthesized in chunks."""
    k = cfg.kernel_spec()
    grid = grid or cfg.grid()
    seeds = list(cfg.seeds())
    for start in range(0, len(seeds), chunk):
        for s in synthesize_ensemble(k, grid, seeds[start:start + chunk], method=cfg.method, threads=cfg.threads,
                                     padding=cfg.padding):
            yield s


def _set_mask(s: FieldSample, level: float, kind: str):
    if kind == "sublevel":
        return sublevel_mask(s, level)
    if kind == "nodal":
        return nodal_mask(s, level)
    return excursion_mask(s, level, strict=kind == "strict")


def _check_burton_keane(cfg: ExperimentConfig, s: FieldSample, level: float, L: float) -> None:
    if not cfg.check_burton_keane or L <= 2.0 * cfg.trif_radius:
        return
    mask = excursion_mask(s, level)
    assert_burton_keane(count_trifurcations(mask, cfg.trif_radius, L, cfg.adjacency))


def estimate_crossing_probability(cfg: ExperimentConfig) -> ExperimentReport:
    """
    Fraction of samples with a giant component, per (L, level), with Wilson intervals.

    The giant criterion is cfg.criterion ("crosses" along cfg.axis by default).
    """
    started = time.perf_counter()
    hits = {(L, l): 0 for L in cfg.scales for l in cfg.levels}
    for s in iter_samples(cfg):
        for L in cfg.scales:
            window = s.window(L)
            for l in cfg.levels:
                labeling = label_components(_set_mask(window, l, cfg.set_kind), cfg.adjacency)
                if giant_components(labeling, cfg.criterion, cfg.axis):
                    hits[(L, l)] += 1
                _check_burton_keane(cfg, window, l, L)
    rows = [
        {"L": L, "level": l, "set": cfg.set_kind, "criterion": cfg.criterion, **_proportion(hits[(L, l)], cfg.n_samples)}
        for L in cfg.scales for l in cfg.levels
    ]
    return _report("crossing", cfg, rows, started)


def critical_levels(cfg: ExperimentConfig, L: Optional[float] = None) -> np.ndarray:
    """
    Per-sample crossing levels at box scale L (default the largest).

    For sublevel sets the crossing level of -f is negated, so {f <= l} crosses
    exactly when l >= the returned value.
    """
    L = max(cfg.scales) if L is None else L
    out = []
    for s in iter_samples(cfg, cfg.grid(L)):
        window = s.window(L)
        if cfg.set_kind == "sublevel":
            flipped = FieldSample(grid=window.grid, values=-window.values, kernel_id=window.kernel_id,
                                  seed=window.seed, method=window.method, antithetic=True)
            out.append(-crossing_level(flipped, cfg.criterion, cfg.axis, cfg.adjacency))
        else:
            out.append(crossing_level(window, cfg.criterion, cfg.axis, cfg.adjacency))
    return np.array(out)


def estimate_level_threshold(cfg: ExperimentConfig) -> ExperimentReport:
    """
    Bisect on the level for crossing probability 1/2 at the largest box scale.

    Every bisection step uses the same samples. Bisection stops when the bracket is narrower
    than cfg.bisection_tolerance or the Wilson interval at the midpoint contains 1/2.
    The band joins the final bracket with the order-statistic 95% interval of the
    median crossing level.

    Raises:
        PreconditionError: if the crossing probability does not straddle 1/2 on cfg.bracket.
    """
    started = time.perf_counter()
    L = max(cfg.scales)
    levels = critical_levels(cfg, L)
    n = len(levels)
    sublevel = cfg.set_kind == "sublevel"

    def probability(l: float) -> int:
        return int(np.sum(levels <= l)) if sublevel else int(np.sum(levels >= l))

    lo, hi = (float(b) for b in cfg.bracket)
    p_lo, p_hi = probability(lo) / n, probability(hi) / n
    straddles = (p_lo <= 0.5 <= p_hi) if sublevel else (p_lo >= 0.5 >= p_hi)
    if not straddles:
        raise PreconditionError(
            f"bracket [{lo:g}, {hi:g}] does not straddle crossing probability 1/2 "
            f"(p={p_lo:.3f} and {p_hi:.3f})"
        )

    rows = []
    mid = 0.5 * (lo + hi)
    while True:
        mid = 0.5 * (lo + hi)
        row = {"L": L, "level": mid, "set": cfg.set_kind, **_proportion(probability(mid), n)}
        rows.append(row)
        logger.info("level %.4f: crossing probability %.3f", mid, row["probability"])
        if hi - lo < cfg.bisection_tolerance or row["ci_low"] <= 0.5 <= row["ci_high"]:
            break
        above = row["probability"] > 0.5
        if above != sublevel:
            lo = mid
        else:
            hi = mid

    spread = 1.96 * 0.5 / math.sqrt(n)
    q_lo, q_hi = np.quantile(levels, [max(0.0, 0.5 - spread), min(1.0, 0.5 + spread)])
    summary = {
        "threshold": mid,
        "band_low": float(min(lo, q_lo)),
        "band_high": float(max(hi, q_hi)),
        "bracket": [lo, hi],
        "L": L,
        "set": cfg.set_kind,
    }
    return _report("threshold", cfg, rows, started, summary)


def uniqueness_statistics(cfg: ExperimentConfig) -> ExperimentReport:
    """
    Distribution of the number of giant components per (L, level).

    cfg.set_kind selects the set: "excursion" (the default), "strict",
    "sublevel" or "nodal" (the discrete level set {f = l}). Reports
    P[>= 2 giants] with its Wilson interval; the summary records whether it is
    nonincreasing in L.
    """
    started = time.perf_counter()
    tallies = {(L, l): [] for L in cfg.scales for l in cfg.levels}
    for s in iter_samples(cfg):
        for L in cfg.scales:
            window = s.window(L)
            for l in cfg.levels:
                labeling = label_components(_set_mask(window, l, cfg.set_kind), cfg.adjacency)
                tallies[(L, l)].append(len(giant_components(labeling, cfg.criterion, cfg.axis)))
                _check_burton_keane(cfg, window, l, L)

    rows = []
    for (L, l), counts in tallies.items():
        counts = np.array(counts)
        row = {
            "L": L, "level": l, "set": cfg.set_kind, "criterion": cfg.criterion,
            "no_giant": int(np.sum(counts == 0)), "one_giant": int(np.sum(counts == 1)),
            "two_or_more": int(np.sum(counts >= 2)), "mean_giants": float(counts.mean()),
        }
        multi = _proportion(row["two_or_more"], len(counts))
        row.update({"p_two_or_more": multi["probability"], "ci_low": multi["ci_low"], "ci_high": multi["ci_high"]})
        rows.append(row)

    summary = {}
    for l in cfg.levels:
        trend = [r["p_two_or_more"] for r in rows if r["level"] == l]
        summary[f"nonincreasing_at_{l:g}"] = bool(all(b <= a for a, b in zip(trend, trend[1:])))
    return _report("uniqueness", cfg, rows, started, summary)


def shift_for(cfg: ExperimentConfig, level: Optional[float] = None) -> ShiftSpec:
    """Build the config's shift, choosing M empirically when cfg.floor is unset."""
    k = cfg.kernel_spec()
    level = cfg.levels[0] if level is None else level
    M = cfg.floor
    if M is None:
        floor_grid = grid_for_box(k.dimension, max(cfg.shift_radius, min(cfg.scales)), cfg.spacing)
        M = choose_floor_M(k, floor_grid, cfg.shift_radius, cfg.target_prob, cfg.floor_samples, cfg.seed,
                           cfg.method)["M"]
    return build_shift(k, level, cfg.shift_radius, M)


def global_equivalence_rate(cfg: ExperimentConfig, h: Optional[ShiftSpec] = None) -> ExperimentReport:
    """
    Rate of percolation equivalence of {f >= l} and {f + h >= l} outside B_R, per R.

    R runs over cfg.radii (default R_h, 2 R_h and 4 R_h). Every sampled pair is
    also checked for a well-defined component inclusion map. Failures are broken
    down into Merging, Emergence and Explosion.

    Raises:
        InvariantViolation: if {f >= l} is not inside {f + h >= l} or the inclusion map is not defined.
    """
    started = time.perf_counter()
    level = cfg.levels[0]
    h = h or shift_for(cfg, level)
    radii = [float(r) for r in cfg.radii] or [h.radius, 2.0 * h.radius, 4.0 * h.radius]
    L = max(cfg.scales)
    grid = cfg.grid(L)
    h_values = shift_on_grid(h, grid)

    outcomes = {R: {"Equivalent": 0, "Merging": 0, "Emergence": 0, "Explosion": 0} for R in radii}
    for s in iter_samples(cfg, grid):
        shifted = shift_sample(s, h, h_values=h_values)
        a = excursion_mask(s, level).window(L)
        b = excursion_mask(shifted, level).window(L)
        inclusion_map(label_components(a, cfg.adjacency), label_components(b, cfg.adjacency))
        for R in radii:
            try:
                verdict = percolation_equivalence(a, b, R, cfg.adjacency)
            except PreconditionError as exc:
                raise InvariantViolation(f"{s.sample_id}: shifted set does not contain the original ({exc})") from exc
            outcomes[R][verdict.outcome] += 1
        if cfg.check_burton_keane and L > 2.0 * cfg.trif_radius:
            assert_burton_keane(count_trifurcations(a, cfg.trif_radius, L, cfg.adjacency))
            assert_burton_keane(count_trifurcations(b, cfg.trif_radius, L, cfg.adjacency))

    rows = []
    for R in radii:
        tally = outcomes[R]
        rate = _proportion(tally["Equivalent"], cfg.n_samples)
        rows.append({
            "R": R, "L": L, "level": level,
            "equivalent": tally["Equivalent"], "merging": tally["Merging"],
            "emergence": tally["Emergence"], "explosion": tally["Explosion"],
            "failures": cfg.n_samples - tally["Equivalent"],
            "rate": rate["probability"], "ci_low": rate["ci_low"], "ci_high": rate["ci_high"],
        })
    summary = {"shift": h.to_dict(), "amplitude": h.amplitude, "centers": len(h.centers)}
    return _report("ge-rate", cfg, rows, started, summary)


def _event_occurs(event: str, s: FieldSample, level: float, R: float, k: int, M: float, cfg: ExperimentConfig) -> bool:
    ball = s.grid.ball(R)
    ball[s.grid.origin_index] = True
    if event == "exceeds_level_in_ball":
        return bool(np.any(s.values[ball] >= level))
    labeling = label_components(excursion_mask(s, level), cfg.adjacency)
    giants = giant_components(labeling, cfg.criterion, cfg.axis)
    hitting = set(np.unique(labeling.labels[ball])) & set(giants)
    if event == "giants_intersect_ball":
        return len(hitting) >= k
    # int_and_floor: every giant meets the ball, at least k of them, and f >= -M on the ball
    return len(giants) >= k and len(hitting) == len(giants) and bool(s.values[ball].min() >= -M)


def shift_event_frequency_compare(
    cfg: ExperimentConfig,
    event: Optional[str] = None,
    k: Optional[int] = None,
    h: Optional[ShiftSpec] = None,
) -> ExperimentReport:
    """
    Frequency of an event for f and for f + h on the same samples.

    Events, all on the box of the largest scale and the ball B_R with
    R = cfg.shift_radius:
        giants_intersect_ball: at least k giant components meet B_R.
        exceeds_level_in_ball: f >= l somewhere on B_R.
        int_and_floor: all giants meet B_R, there are at least k of them, and
            f >= -M on B_R.

    The summary flags the pair consistent when both frequencies are zero or
    both are positive.
    """
    started = time.perf_counter()
    event = event or cfg.event
    if event not in EVENTS:
        raise ValueError(f"Unknown event {event!r}; expected one of {EVENTS}")
    k = cfg.event_k if k is None else int(k)
    level = cfg.levels[0]
    h = h or shift_for(cfg, level)
    L = max(cfg.scales)
    grid = cfg.grid(L)
    h_values = shift_on_grid(h, grid)

    plain = shifted_hits = 0
    for s in iter_samples(cfg, grid):
        window = s.window(L)
        moved = shift_sample(s, h, h_values=h_values).window(L)
        plain += _event_occurs(event, window, level, h.radius, k, h.floor, cfg)
        shifted_hits += _event_occurs(event, moved, level, h.radius, k, h.floor, cfg)

    rows = [
        {"ensemble": "f", "event": event, "k": k, "level": level, "R": h.radius, **_proportion(plain, cfg.n_samples)},
        {"ensemble": "f+h", "event": event, "k": k, "level": level, "R": h.radius, **_proportion(shifted_hits, cfg.n_samples)},
    ]
    consistent = (plain == 0) == (shifted_hits == 0)
    if not consistent:
        logger.warning("event %s seen in only one ensemble (%d vs %d of %d)", event, plain, shifted_hits, cfg.n_samples)
    return _report("cm-compare", cfg, rows, started, {"consistent": consistent, "floor": h.floor})


def boundary_scaling(cfg: ExperimentConfig) -> ExperimentReport:
    """
    Mean boundary-component counts per L and the fitted exponent of N_boundary ~ C L^a.
    """
    started = time.perf_counter()
    level = cfg.levels[0]
    table = boundary_count_table(
        cfg.kernel_spec(), level, cfg.scales, cfg.n_samples, cfg.seed, cfg.spacing, cfg.method, cfg.adjacency,
    )
    grouped = table.groupby("L").agg(
        mean_N_boundary=("N_boundary", "mean"),
        sd_N_boundary=("N_boundary", "std"),
        mean_N_critical=("N_critical", "mean"),
        n=("N_boundary", "size"),
    ).reset_index()
    grouped["se_N_boundary"] = grouped["sd_N_boundary"] / np.sqrt(grouped["n"])
    rows = grouped.to_dict(orient="records")
    summary = {}
    if len(grouped) >= 2 and (grouped["mean_N_boundary"] > 0).all():
        summary = dict(fit_power_law(grouped["L"], grouped["mean_N_boundary"]))
        summary["expected_exponent"] = cfg.kernel_spec().dimension - 1
    return _report("boundary-scaling", cfg, rows, started, summary)


def rice_check(cfg: ExperimentConfig) -> ExperimentReport:
    """
    Critical-point density of a one-dimensional field three ways: discrete
    counting on long samples, the closed-form Rice value, and Kac-Rice Monte Carlo.
    """
    started = time.perf_counter()
    k = cfg.kernel_spec()
    if k.dimension != 1:
        raise ValueError("rice_check needs a one-dimensional kernel")
    cells = int(round(cfg.rice_length / cfg.spacing)) + 1
    grid = GridSpec.from_spacing(1, cells, cfg.spacing)
    length = (cells - 3) * cfg.spacing
    densities = np.array([
        count_discrete_critical_points(synthesize(k, grid, seed, method=cfg.method)) / length
        for seed in cfg.seeds()
    ])
    exact = rice_density(k)
    mc = kac_rice_density_mc(k, cfg.n_mc, cfg.seed)
    discrete = float(densities.mean())
    discrete_se = float(densities.std(ddof=1) / math.sqrt(len(densities))) if len(densities) > 1 else 0.0
    rows = [
        {"method": "discrete", "density": discrete, "standard_error": discrete_se},
        {"method": "rice", "density": exact, "standard_error": 0.0},
        {"method": "kac_rice_mc", "density": mc["density"], "standard_error": mc["standard_error"]},
    ]
    summary = {
        "discrete_relative_error": abs(discrete - exact) / exact,
        "discrete_within_5pct": abs(discrete - exact) <= 0.05 * exact,
        "mc_within_3se": abs(mc["density"] - discrete) <= 3.0 * math.hypot(mc["standard_error"], discrete_se),
    }
    return _report("rice-check", cfg, rows, started, summary)
