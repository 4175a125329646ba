"""
The gaussperc command line.

Exit codes: 0 on success, 1 on bad input or a failed precondition, 2 when a
deterministic invariant (Burton-Keane bound, shift bounds, monotone coupling)
fails.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .burton_keane import trifurcation_density_sweep
from .connectivity import excursion_mask, label_components
from .counting import kac_rice_density_mc
from .errors import GaussPercError, InvariantViolation, ShiftVerificationError
from .experiments import (
    ExperimentConfig,
    boundary_scaling,
    estimate_crossing_probability,
    estimate_level_threshold,
    global_equivalence_rate,
    rice_check,
    shift_event_frequency_compare,
    shift_for,
    uniqueness_statistics,
)
from .fileformats import read_field, write_field, write_mask
from .shift import save_shift
from .synthesis import GridSpec, synthesize_ensemble

logger = logging.getLogger(__name__)

SYNTH_BATCH = 32


def _floats(text: str) -> list:
    return [float(part) for part in text.split(",") if part.strip()]


def _seed_range(text: str) -> range:
    """Parse "a..b" as the seeds a, ..., b - 1 and a single integer as one seed."""
    first, sep, last = text.partition("..")
    try:
        seeds = range(int(first), int(last)) if sep else range(int(first), int(first) + 1)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a seed or a range a..b, got {text!r}") from None
    if len(seeds) == 0:
        raise argparse.ArgumentTypeError(f"seed range {text!r} is empty")
    return seeds


def _kernel_dict(args) -> Optional[dict]:
    if getattr(args, "kernel", None) is None:
        return None
    params = {}
    if args.alpha is not None:
        params["alpha"] = args.alpha
    if args.length_scale is not None:
        params["length_scale"] = args.length_scale
    return {"family": args.kernel, "params": params, "dimension": args.dim}


def load_config(args) -> ExperimentConfig:
    """The --config file (or defaults) with command-line flags layered on top."""
    base = json.loads(Path(args.config).read_text()) if args.config else {}
    overrides = {
        "seed": args.seed,
        "threads": args.threads,
        "kernel": _kernel_dict(args),
        "spacing": getattr(args, "spacing", None),
        "method": getattr(args, "method", None),
        "levels": getattr(args, "levels", None),
        "scales": getattr(args, "L", None),
        "n_samples": getattr(args, "n", None),
        "trif_radius": getattr(args, "R", None),
        "shift_radius": getattr(args, "radius", None),
        "target_prob": getattr(args, "prob", None),
        "floor": getattr(args, "floor", None),
        "radii": getattr(args, "radii", None),
        "set_kind": getattr(args, "set", None),
        "criterion": getattr(args, "criterion", None),
        "event": getattr(args, "event", None),
        "event_k": getattr(args, "k", None),
    }
    base.update({key: value for key, value in overrides.items() if value is not None})
    return ExperimentConfig.from_dict(base)


def _emit(report, out: Path, table_name: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    report.to_jsonl(out / "reports.jsonl")
    frame = report.to_frame()
    frame.to_csv(out / table_name, index=False)
    print(frame.to_string(index=False))
    if report.summary:
        print(json.dumps(report.summary, indent=2, default=str))


def cmd_synth(args) -> int:
    cfg = load_config(args)
    k = cfg.kernel_spec()
    if args.extent is not None:
        grid = GridSpec.cube(k.dimension, args.cells, args.extent)
    else:
        grid = GridSpec.from_spacing(k.dimension, args.cells, cfg.spacing)
    seeds = list(args.seeds) if args.seeds is not None else [cfg.seed]
    args.out.mkdir(parents=True, exist_ok=True)
    for start in range(0, len(seeds), SYNTH_BATCH):
        batch = synthesize_ensemble(
            k, grid, seeds[start:start + SYNTH_BATCH], method=cfg.method, threads=cfg.threads, padding=cfg.padding,
        )
        for s in batch:
            path = args.out / f"field_{s.seed}.gpf"
            write_field(s, path)
            logger.info("%s: min %.4f, max %.4f", s.sample_id, s.values.min(), s.values.max())
    print(f"wrote {len(seeds)} field(s) on a {'x'.join(map(str, grid.shape))} grid to {args.out}")
    return 0


def cmd_label(args) -> int:
    s = read_field(args.field)
    m = excursion_mask(s, args.level)
    labeling = label_components(m, args.adjacency)
    args.out.mkdir(parents=True, exist_ok=True)
    labeling.to_frame().to_csv(args.out / "components.csv", index=False)
    write_mask(m, args.out / "mask.gpm")
    print(f"{labeling.count} components at level {args.level:g}")
    return 0


def cmd_count(args) -> int:
    cfg = load_config(args)
    if args.what == "boundary":
        _emit(boundary_scaling(cfg), args.out, "boundary_counts.csv")
    elif args.what == "rice":
        _emit(rice_check(cfg), args.out, "rice_check.csv")
    else:
        estimate = kac_rice_density_mc(cfg.kernel_spec(), cfg.n_mc, cfg.seed)
        print(json.dumps({key: estimate[key] for key in ("density", "standard_error", "n_mc")}, indent=2))
    return 0


def cmd_shift(args) -> int:
    cfg = load_config(args)
    h = shift_for(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "shift.json"
    save_shift(h, path)
    print(f"{h.shift_id}: {len(h.centers)} centers, amplitude {h.amplitude:.4f}, wrote {path}")
    return 0


def cmd_trifurcate(args) -> int:
    cfg = load_config(args)
    table = trifurcation_density_sweep(
        cfg.kernel_spec(), cfg.levels[0], cfg.trif_radius, cfg.scales, cfg.n_samples,
        cfg.seed, cfg.spacing, cfg.method, cfg.adjacency,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    table.to_csv(args.out / "trifurcation_sweep.csv", index=False)
    print(table.to_string(index=False))
    return 0


def cmd_threshold(args) -> int:
    _emit(estimate_level_threshold(load_config(args)), args.out, "threshold_steps.csv")
    return 0


def cmd_crossing(args) -> int:
    _emit(estimate_crossing_probability(load_config(args)), args.out, "crossing.csv")
    return 0


def cmd_uniqueness(args) -> int:
    _emit(uniqueness_statistics(load_config(args)), args.out, "uniqueness.csv")
    return 0


def cmd_ge_rate(args) -> int:
    _emit(global_equivalence_rate(load_config(args)), args.out, "ge_rate.csv")
    return 0


def cmd_cm_compare(args) -> int:
    _emit(shift_event_frequency_compare(load_config(args)), args.out, "cm_compare.csv")
    return 0


def _add_field_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kernel", choices=["bf", "bargmann_fock", "cauchy"], help="kernel family")
    p.add_argument("--dim", type=int, default=2, help="dimension (with --kernel)")
    p.add_argument("--alpha", type=float, help="Cauchy decay exponent")
    p.add_argument("--length-scale", dest="length_scale", type=float)
    p.add_argument("--spacing", type=float)
    p.add_argument("--method", choices=["circulant", "spectral"])


def _add_ensemble_options(p: argparse.ArgumentParser) -> None:
    _add_field_options(p)
    p.add_argument("--levels", "--level", dest="levels", type=_floats, help="comma-separated levels")
    p.add_argument("--L", type=_floats, help="comma-separated box half-widths")
    p.add_argument("--n", type=int, help="samples per scale")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussperc", description="Excursion-set percolation experiments")
    parser.add_argument("--config", help="experiment config JSON")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--threads", type=int)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize fields to GPF1 files, one per seed")
    _add_field_options(p)
    p.add_argument("--cells", type=int, default=128, help="vertices per axis")
    p.add_argument("--extent", type=float, help="side length of the grid; overrides --spacing")
    p.add_argument("--seeds", type=_seed_range, help="seed range a..b (b excluded); defaults to --seed")
    p.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("label", help="label the excursion set of a GPF1 field")
    p.add_argument("--field", type=Path, required=True)
    p.add_argument("--level", type=float, default=0.0)
    p.add_argument("--adjacency", choices=["faces", "faces_and_diagonals"], default="faces")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("count", help="boundary-component scaling, Rice check or Kac-Rice density")
    _add_ensemble_options(p)
    p.add_argument("--what", choices=["boundary", "rice", "kac-rice"], default="boundary")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("shift", help="build and verify a Cameron-Martin shift")
    p.add_argument("action", choices=["build"])
    _add_ensemble_options(p)
    p.add_argument("--radius", type=float)
    p.add_argument("--prob", type=float)
    p.add_argument("--floor", type=float, help="fixed M instead of choosing it empirically")
    p.set_defaults(func=cmd_shift)

    p = sub.add_parser("trifurcate", help="trifurcation density sweep")
    _add_ensemble_options(p)
    p.add_argument("--R", type=float)
    p.set_defaults(func=cmd_trifurcate)

    p = sub.add_parser("crossing", help="crossing probability per level and scale")
    _add_ensemble_options(p)
    p.add_argument("--set", choices=["excursion", "strict", "sublevel"])
    p.add_argument("--criterion", choices=["crosses", "touches_all_faces"])
    p.set_defaults(func=cmd_crossing)

    p = sub.add_parser("threshold", help="bisect for the percolation threshold")
    _add_ensemble_options(p)
    p.add_argument("--set", choices=["excursion", "sublevel"])
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("uniqueness", help="number of giant components per scale")
    _add_ensemble_options(p)
    p.add_argument("--set", choices=["excursion", "strict", "sublevel", "nodal"])
    p.add_argument("--criterion", choices=["crosses", "touches_all_faces"])
    p.set_defaults(func=cmd_uniqueness)

    p = sub.add_parser("ge-rate", help="global equivalence rate of f and f + h")
    _add_ensemble_options(p)
    p.add_argument("--radius", type=float, help="shift radius R_h")
    p.add_argument("--radii", type=_floats, help="comma-separated exclusion radii")
    p.add_argument("--floor", type=float)
    p.set_defaults(func=cmd_ge_rate)

    p = sub.add_parser("cm-compare", help="event frequencies for f and f + h")
    _add_ensemble_options(p)
    p.add_argument("--radius", type=float)
    p.add_argument("--floor", type=float)
    p.add_argument("--event", choices=["giants_intersect_ball", "exceeds_level_in_ball", "int_and_floor"])
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_cm_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InvariantViolation, ShiftVerificationError) as exc:
        logger.error("invariant failed: %s", exc)
        return 2
    except (GaussPercError, ValueError) as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
