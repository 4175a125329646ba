"""
04_threshold.py

Percolation threshold by bisection on the left-right crossing probability.

1. d=2 Bargmann-Fock at L=64: the estimate should lie in [-0.05, 0.05].
2. d=2 sublevel sets: the threshold should be minus the one above.
3. d=3 Bargmann-Fock at L=32: the lower end of the band should be above 0.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from gaussperc.experiments import ExperimentConfig, estimate_level_threshold


def run(label: str, cfg: ExperimentConfig, out: Path) -> dict:
    print(f"\nRunning {label} ({cfg.n_samples} samples at L={max(cfg.scales):g})...")
    report = estimate_level_threshold(cfg)
    report.to_jsonl(out / "reports.jsonl")
    s = report.summary
    print(f"  threshold {s['threshold']:+.4f}, band [{s['band_low']:+.4f}, {s['band_high']:+.4f}]")
    return s


def main():
    project_root = Path(__file__).parent.parent
    out = project_root / "results"
    out.mkdir(parents=True, exist_ok=True)

    d2 = ExperimentConfig(scales=[64.0], n_samples=400, seed=0, check_burton_keane=False)
    d2_sub = ExperimentConfig(scales=[64.0], n_samples=400, seed=0, set_kind="sublevel", check_burton_keane=False)
    d3 = ExperimentConfig(
        kernel={"family": "bargmann_fock", "params": {}, "dimension": 3},
        scales=[32.0], spacing=0.5, padding=1.25, n_samples=400, seed=0, bracket=[-0.3, 0.6],
        check_burton_keane=False,
    )

    s2 = run("d=2 excursion", d2, out)
    s2_sub = run("d=2 sublevel", d2_sub, out)
    s3 = run("d=3 excursion", d3, out)

    print("\n" + "=" * 60)
    print("THRESHOLD ESTIMATES")
    print("=" * 60)
    print(f"d=2 within [-0.05, 0.05]:      {-0.05 <= s2['threshold'] <= 0.05}")
    print(f"d=2 sublevel mirrors excursion: {abs(s2['threshold'] + s2_sub['threshold']) <= s2['band_high'] - s2['band_low']}")
    print(f"d=3 band above 0:               {s3['band_low'] > 0}")


if __name__ == "__main__":
    main()
