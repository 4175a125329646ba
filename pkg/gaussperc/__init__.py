"""
Excursion-set percolation of smooth stationary Gaussian fields.

This package synthesizes Gaussian fields on grids, labels the components of
their excursion and nodal sets, builds Cameron-Martin shifts, counts boundary
components, critical points and coarse trifurcations, and runs the Monte Carlo
experiments (crossing thresholds, uniqueness of the giant component, global
equivalence of shifted fields) that test uniqueness of the unbounded cluster.
"""

__version__ = "0.1.0"

from .kernels import (
    KernelSpec,
    bargmann_fock,
    cauchy,
    tabulated,
    evaluate_kernel,
    spectral_density,
    audit_assumptions,
    excursion_radius,
    excursion_radius_report,
)
from .synthesis import (
    GridSpec,
    FieldSample,
    synthesize,
    synthesize_circulant,
    synthesize_spectral,
    empirical_covariance,
    shift_sample,
    unshift_sample,
)
from .connectivity import (
    ExcursionMask,
    Labeling,
    EquivalenceVerdict,
    excursion_mask,
    sublevel_mask,
    nodal_mask,
    label_components,
    flood_fill_oracle,
    giant_components,
    inclusion_map,
    percolation_equivalence,
    crossing_level,
)
from .shift import ShiftSpec, choose_floor_M, build_shift, evaluate_shift, shift_integrability, shift_sup_norms
from .counting import (
    count_boundary_components,
    count_discrete_critical_points,
    count_shell_critical_points,
    kac_rice_density_mc,
    fit_power_law,
)
from .burton_keane import detect_trifurcation, count_trifurcations, trifurcation_density_sweep
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    estimate_crossing_probability,
    estimate_level_threshold,
    uniqueness_statistics,
    global_equivalence_rate,
    shift_event_frequency_compare,
    boundary_scaling,
    rice_check,
)

__all__ = [
    "KernelSpec",
    "bargmann_fock",
    "cauchy",
    "tabulated",
    "evaluate_kernel",
    "spectral_density",
    "audit_assumptions",
    "excursion_radius",
    "excursion_radius_report",
    "GridSpec",
    "FieldSample",
    "synthesize",
    "synthesize_circulant",
    "synthesize_spectral",
    "empirical_covariance",
    "shift_sample",
    "unshift_sample",
    "ExcursionMask",
    "Labeling",
    "EquivalenceVerdict",
    "excursion_mask",
    "sublevel_mask",
    "nodal_mask",
    "label_components",
    "flood_fill_oracle",
    "giant_components",
    "inclusion_map",
    "percolation_equivalence",
    "crossing_level",
    "ShiftSpec",
    "choose_floor_M",
    "build_shift",
    "evaluate_shift",
    "shift_integrability",
    "shift_sup_norms",
    "count_boundary_components",
    "count_discrete_critical_points",
    "count_shell_critical_points",
    "kac_rice_density_mc",
    "fit_power_law",
    "detect_trifurcation",
    "count_trifurcations",
    "trifurcation_density_sweep",
    "ExperimentConfig",
    "ExperimentReport",
    "estimate_crossing_probability",
    "estimate_level_threshold",
    "uniqueness_statistics",
    "global_equivalence_rate",
    "shift_event_frequency_compare",
    "boundary_scaling",
    "rice_check",
]
