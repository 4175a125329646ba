"""
02_boundary_scaling.py

Boundary components of {f >= 0} on the box shell, d=2 Bargmann-Fock.

For L in {8, 16, 32, 64} and 200 samples each, counts the components of the
excursion set on the boundary of [-L, L]^2 and fits mean N ~ C L^a. The
exponent should be 1.0 +- 0.3 (growth like L^(d-1)).
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from gaussperc.experiments import ExperimentConfig, boundary_scaling


def main():
    project_root = Path(__file__).parent.parent
    cfg = ExperimentConfig(levels=[0.0], scales=[8.0, 16.0, 32.0, 64.0], n_samples=200, seed=0)

    print(f"Counting boundary components for {cfg.n_samples} samples at L = {cfg.scales}...")
    report = boundary_scaling(cfg)
    table = report.to_frame()

    print("\n" + "=" * 60)
    print("BOUNDARY COMPONENTS: d=2, level 0")
    print("=" * 60)
    print(table[["L", "mean_N_boundary", "se_N_boundary", "mean_N_critical"]].to_string(index=False))
    fit = report.summary
    print(f"\nFitted exponent: {fit['exponent']:.3f} +- {fit['exponent_stderr']:.3f}")
    print(f"Fitted constant: {fit['constant']:.3f}")
    print(f"Exponent within 1.0 +- 0.3: {abs(fit['exponent'] - 1.0) <= 0.3}")

    out = project_root / "results"
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "boundary_scaling.csv", index=False)
    report.to_jsonl(out / "reports.jsonl")
    print(f"\nResults saved to: {out / 'boundary_scaling.csv'}")


if __name__ == "__main__":
    main()
