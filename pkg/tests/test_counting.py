"""
Tests for boundary-component counts, critical-point counts and the Kac-Rice constant.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussperc.connectivity import excursion_mask, mask_from_bits, nodal_mask
from gaussperc.counting import (
    boundary_count_table,
    boundary_shell,
    count_boundary_components,
    count_discrete_critical_points,
    count_shell_critical_points,
    fit_power_law,
    kac_rice_density_mc,
    rice_density,
)
from gaussperc.errors import GridMismatchError, OutOfRangeError, UnsupportedOrderError
from gaussperc.kernels import bargmann_fock, cauchy, tabulated
from gaussperc.synthesis import GridSpec, fabricate_sample, grid_for_box, synthesize

RICE_BF = math.sqrt(3) / math.pi


class TestBoundaryShell:
    """Tests for boundary_shell function."""

    def test_square_shell_size(self):
        """The 7 x 7 box at L = 3 has 24 shell vertices."""
        shell = boundary_shell(GridSpec.cube(2, 9, 9.0), 3.0)
        assert shell.size == 24
        assert shell.subgrid.shape == (7, 7)

    def test_cube_shell_size(self):
        """5^3 - 3^3 = 98 shell vertices in d = 3."""
        assert boundary_shell(GridSpec.cube(3, 7, 7.0), 2.0).size == 98

    def test_out_of_range(self):
        """A shell beyond the grid is refused."""
        with pytest.raises(OutOfRangeError):
            boundary_shell(GridSpec.cube(2, 9, 9.0), 5.0)


class TestCountBoundaryComponents:
    """Tests for count_boundary_components function."""

    def test_full_mask(self):
        """The whole shell is one component."""
        grid = GridSpec.cube(2, 9, 9.0)
        assert count_boundary_components(mask_from_bits(grid, np.ones((9, 9))), 3.0) == 1

    def test_empty_mask(self):
        """No vertices, no components."""
        grid = GridSpec.cube(2, 9, 9.0)
        assert count_boundary_components(mask_from_bits(grid, np.zeros((9, 9))), 3.0) == 0

    def test_tripod(self, tripod):
        """Three arms meet the box boundary in three places."""
        assert count_boundary_components(tripod, 20.0) == 3

    def test_comb(self, comb):
        """Two spine ends plus five teeth."""
        assert count_boundary_components(comb, 20.0) == 7

    def test_inner_shell_of_tripod(self, tripod):
        """A smaller box cuts the same three arms."""
        assert count_boundary_components(tripod, 10.0) == 3

    def test_corner_adjacency_joins_diagonals(self):
        """Two shell vertices touching at a corner merge only under diagonal adjacency."""
        grid = GridSpec.cube(2, 9, 9.0)
        bits = np.zeros((9, 9), dtype=bool)
        bits[1, 2] = True
        bits[2, 1] = True
        m = mask_from_bits(grid, bits)
        assert count_boundary_components(m, 3.0, "faces") == 2
        assert count_boundary_components(m, 3.0, "faces_and_diagonals") == 1
        bits[1, 1] = True
        assert count_boundary_components(mask_from_bits(grid, bits), 3.0) == 1

    def test_nodal_mask_refused(self, bf2):
        """Nodal masks live on cells, not on the shell vertices."""
        s = synthesize(bf2, GridSpec.from_spacing(2, 32, 0.25), seed=0)
        with pytest.raises(ValueError):
            count_boundary_components(nodal_mask(s, 0.0), 2.0)


class TestCountDiscreteCriticalPoints:
    """Tests for count_discrete_critical_points function."""

    def test_linear_ramp(self):
        """A ramp has a nonvanishing gradient and no critical cells."""
        grid = GridSpec.cube(2, 21, 21.0)
        x = grid.coordinates()
        s = fabricate_sample(grid, 0.7 * x[..., 0])
        assert count_discrete_critical_points(s) == 0

    def test_paraboloid(self):
        """-|x - c|^2 has a single maximum at c, between vertices."""
        grid = GridSpec.cube(2, 21, 21.0)
        x = grid.coordinates()
        assert count_discrete_critical_points(fabricate_sample(grid, -np.sum((x - [0.3, 0.2]) ** 2, axis=-1))) == 1

    def test_maximum_on_a_vertex(self):
        """-|x|^2 vanishes exactly at the origin vertex and still counts once."""
        grid = GridSpec.cube(2, 21, 21.0)
        x = grid.coordinates()
        assert count_discrete_critical_points(fabricate_sample(grid, -np.sum(x ** 2, axis=-1))) == 1

    def test_three_dimensional_paraboloid(self):
        """One maximum among the six simplices of each cube."""
        grid = GridSpec.cube(3, 11, 11.0)
        x = grid.coordinates()
        assert count_discrete_critical_points(fabricate_sample(grid, -np.sum((x - [0.3, 0.2, 0.6]) ** 2, axis=-1))) == 1

    def test_cosine_lattice_in_two_dimensions(self):
        """cos(x + 0.13) + cos(y + 0.27) on [-10, 10]^2 has 7 x 7 critical points, crossings counted once."""
        grid = GridSpec.from_spacing(2, 201, 0.1)
        x = grid.coordinates()
        s = fabricate_sample(grid, np.cos(x[..., 0] + 0.13) + np.cos(x[..., 1] + 0.27))
        assert count_discrete_critical_points(s) == 49

    def test_cosine_wave_in_one_dimension(self):
        """cos(x + 0.05) on [-10, 10] has 7 critical points."""
        grid = GridSpec.from_spacing(1, 201, 0.1)
        x = grid.axis_coordinates(0) + 0.05
        assert count_discrete_critical_points(fabricate_sample(grid, np.cos(x))) == 7

    def test_region_half_width(self):
        """A box that excludes the maximum counts nothing."""
        grid = GridSpec.cube(2, 21, 21.0)
        x = grid.coordinates()
        s = fabricate_sample(grid, -np.sum((x - [6.3, 5.8]) ** 2, axis=-1))
        assert count_discrete_critical_points(s) == 1
        assert count_discrete_critical_points(s, 4.0) == 0

    def test_region_mask(self):
        """Cells need every corner inside a region mask."""
        grid = GridSpec.cube(2, 21, 21.0)
        x = grid.coordinates()
        s = fabricate_sample(grid, -np.sum((x - [0.3, 0.2]) ** 2, axis=-1))
        assert count_discrete_critical_points(s, np.ones(grid.shape, dtype=bool)) == 1
        assert count_discrete_critical_points(s, grid.ball(0.5)) == 0

    def test_region_mask_shape(self):
        """A region mask must match the grid."""
        s = fabricate_sample(GridSpec.cube(2, 8, 8.0), np.zeros((8, 8)))
        with pytest.raises(GridMismatchError):
            count_discrete_critical_points(s, np.ones((7, 7), dtype=bool))

    def test_tiny_grid(self):
        """Fewer than four vertices per axis leaves no interior cell."""
        s = fabricate_sample(GridSpec.cube(2, 3, 3.0), np.zeros((3, 3)))
        assert count_discrete_critical_points(s) == 0

    @pytest.mark.slow
    def test_rice_density_one_dimension(self):
        """Bargmann-Fock in d = 1 over length 10^4 at spacing 0.1: within 5% of sqrt(3) / pi."""
        k = bargmann_fock(1)
        grid = grid_for_box(1, 500.0, 0.1)
        counts = [count_discrete_critical_points(synthesize(k, grid, seed)) for seed in range(10)]
        length = 10 * (grid.shape[0] - 3) * grid.spacing[0]
        density = sum(counts) / length
        assert abs(density - RICE_BF) / RICE_BF < 0.05

    @pytest.mark.slow
    def test_kac_rice_density_two_dimensions(self, bf2):
        """Bargmann-Fock in d = 2 at spacing 0.05: the discrete count matches Kac-Rice within 3 SE."""
        grid = grid_for_box(2, 10.0, 0.05)
        area = float(np.prod([(n - 3) * h for n, h in zip(grid.shape, grid.spacing)]))
        counts = np.array([count_discrete_critical_points(synthesize(bf2, grid, seed)) for seed in range(8)])
        discrete = counts.mean() / area
        discrete_se = counts.std(ddof=1) / math.sqrt(len(counts)) / area
        est = kac_rice_density_mc(bf2, 200_000, seed=3)
        assert abs(est["density"] - 2 / (math.pi * math.sqrt(3))) < 3 * est["standard_error"]
        assert abs(discrete - est["density"]) < 3 * math.hypot(discrete_se, est["standard_error"])


class TestCountShellCriticalPoints:
    """Tests for count_shell_critical_points function."""

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), level=st.floats(-2, 2), L=st.sampled_from([3.0, 5.0, 7.0]))
    def test_bounds_boundary_components(self, seed, level, L):
        """Every shell component of {f >= l} holds a local maximum on the shell."""
        grid = GridSpec.cube(2, 17, 17.0)
        s = fabricate_sample(grid, np.random.default_rng(seed).normal(size=(17, 17)))
        assert count_boundary_components(excursion_mask(s, level), L) <= count_shell_critical_points(s, L)

    def test_bounds_on_synthesized_samples(self, bf2):
        """The bound holds at several levels and both adjacencies."""
        grid = grid_for_box(2, 6.0, 0.25)
        for seed in range(4):
            s = synthesize(bf2, grid, seed)
            for adjacency in ("faces", "faces_and_diagonals"):
                n_critical = count_shell_critical_points(s, 6.0, adjacency)
                for level in (-1.0, 0.0, 1.0):
                    assert count_boundary_components(excursion_mask(s, level), 6.0, adjacency) <= n_critical

    def test_single_bump(self):
        """A ring with one peak and one trough has two shell extrema."""
        grid = GridSpec.cube(2, 9, 9.0)
        x = grid.coordinates()
        s = fabricate_sample(grid, x[..., 0] + 0.1 * x[..., 1])
        assert count_shell_critical_points(s, 3.0) == 2


class TestKacRiceDensity:
    """Tests for kac_rice_density_mc and rice_density."""

    def test_rice_oracle(self):
        """sqrt(kappa''''(0) / -kappa''(0)) / pi = sqrt(3) / pi for Bargmann-Fock."""
        assert abs(rice_density(bargmann_fock(1)) - RICE_BF) < 1e-12

    def test_rice_length_scale(self):
        """Doubling the length scale halves the density."""
        assert abs(rice_density(bargmann_fock(1, length_scale=2.0)) - RICE_BF / 2) < 1e-12

    def test_rice_needs_one_dimension(self, bf2):
        """The closed form is only used in d = 1."""
        with pytest.raises(ValueError):
            rice_density(bf2)

    def test_one_dimension_within_three_standard_errors(self):
        """Monte Carlo agrees with the Rice formula."""
        est = kac_rice_density_mc(bargmann_fock(1), 200_000, seed=1)
        assert abs(est["density"] - RICE_BF) < 3 * est["standard_error"]
        assert est["n_mc"] == 200_000

    def test_cauchy_one_dimension(self):
        """Cauchy in d = 1: Monte Carlo agrees with the Rice formula."""
        k = cauchy(1, alpha=3.0)
        est = kac_rice_density_mc(k, 100_000, seed=2)
        assert abs(est["density"] - rice_density(k)) < 3 * est["standard_error"]

    def test_field_scaling_invariant(self, bf2):
        """Scaling f by a constant leaves the density unchanged."""
        plain = kac_rice_density_mc(bf2, 10_000, seed=4)
        scaled = kac_rice_density_mc(bf2.scaled(4.0), 10_000, seed=4)
        assert abs(scaled["density"] - plain["density"]) / plain["density"] < 1e-9

    def test_length_scale_in_two_dimensions(self, bf2):
        """Stretching space by 2 divides the planar density by 4."""
        plain = kac_rice_density_mc(bf2, 10_000, seed=4)
        wide = kac_rice_density_mc(bargmann_fock(2, length_scale=2.0), 10_000, seed=4)
        assert abs(wide["density"] - plain["density"] / 4) / plain["density"] < 1e-9

    def test_axis_relabeling(self):
        """Swapping the two axes leaves the conditional Hessian law unchanged."""
        est = kac_rice_density_mc(cauchy(2, alpha=4.0), 100, seed=0)
        cov = np.array(est["hessian_covariance"])
        swap = [2, 1, 0]
        assert np.allclose(cov, cov[np.ix_(swap, swap)])

    def test_tabulated_unsupported(self):
        """Tabulated kernels have no fourth derivatives."""
        k = tabulated(2, [0.0, 1.0, 2.0], [1.0, 0.5, 0.1])
        with pytest.raises(UnsupportedOrderError):
            kac_rice_density_mc(k, 100)

    def test_needs_two_draws(self, bf2):
        """A standard error needs at least two draws."""
        with pytest.raises(ValueError):
            kac_rice_density_mc(bf2, 1)


class TestFitPowerLaw:
    """Tests for fit_power_law function."""

    def test_exact_power_law(self):
        """means = 2 L^1.5 recovers exponent 1.5 and constant 2."""
        scales = [4.0, 8.0, 16.0, 32.0]
        fit = fit_power_law(scales, [2.0 * L ** 1.5 for L in scales])
        assert abs(fit["exponent"] - 1.5) < 1e-12
        assert abs(fit["constant"] - 2.0) / 2.0 < 1e-12
        assert abs(fit["r_value"] - 1.0) < 1e-12

    def test_nonpositive_means(self):
        """log of a zero mean is undefined."""
        with pytest.raises(ValueError):
            fit_power_law([1.0, 2.0], [0.0, 1.0])

    def test_length_mismatch(self):
        """Scales and means pair up."""
        with pytest.raises(ValueError):
            fit_power_law([1.0, 2.0, 3.0], [1.0, 2.0])


class TestBoundaryCountTable:
    """Tests for boundary_count_table function."""

    def test_table_shape(self, bf2):
        """One row per (L, sample), bounded by the shell critical count."""
        table = boundary_count_table(bf2, 0.0, [2.0, 4.0], n_samples=3, seed=0)
        assert list(table.columns) == ["L", "sample_id", "N_boundary", "N_critical"]
        assert len(table) == 6
        assert table["sample_id"].nunique() == 3
        assert (table["N_boundary"] <= table["N_critical"]).all()

    def test_reproducible(self, bf2):
        """The same seed gives the same table."""
        first = boundary_count_table(bf2, 0.5, [4.0], n_samples=2, seed=7)
        second = boundary_count_table(bf2, 0.5, [4.0], n_samples=2, seed=7)
        assert first.equals(second)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
