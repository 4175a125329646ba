"""
Tests for covariance kernels, spectral densities and the assumption audit.
"""

import math

import numpy as np
import pytest
from scipy import integrate, special

from gaussperc.errors import OutOfRangeError, UnsupportedOrderError
from gaussperc.kernels import (
    audit_assumptions,
    bargmann_fock,
    cauchy,
    evaluate_kernel,
    excursion_radius,
    excursion_radius_report,
    kernel_from_dict,
    load_kernel,
    load_tabulated_csv,
    radial_fourier_transform,
    save_kernel,
    spectral_density,
    tabulated,
)


def monochromatic_wave():
    """J0(|x|) in d = 2: a valid covariance that takes negative values."""
    r = np.linspace(0.0, 20.0, 401)
    return tabulated(2, r, special.j0(r))


class TestKernelSpec:
    """Tests for KernelSpec construction."""

    def test_cauchy_needs_alpha_above_dimension(self):
        """alpha <= d is rejected."""
        with pytest.raises(ValueError):
            cauchy(2, alpha=2.0)

    def test_tabulated_must_start_at_zero(self):
        """A radial table has to include the origin."""
        with pytest.raises(ValueError):
            tabulated(2, [0.5, 1.0], [1.0, 0.5])

    def test_tabulated_needs_positive_value_at_zero(self):
        """kappa(0) > 0."""
        with pytest.raises(ValueError):
            tabulated(2, [0.0, 1.0], [0.0, 0.0])

    def test_dict_aliases(self):
        """'bf' names the Bargmann-Fock family."""
        k = kernel_from_dict({"family": "bf", "params": {"length_scale": 2.0}, "dimension": 3})
        assert k == bargmann_fock(3, length_scale=2.0)

    def test_unknown_family(self):
        """Unknown families are rejected."""
        with pytest.raises(ValueError):
            kernel_from_dict({"family": "matern", "params": {}, "dimension": 2})

    def test_json_file(self, tmp_path):
        """A saved kernel loads back equal."""
        k = cauchy(2, alpha=4.0, length_scale=1.5)
        save_kernel(k, tmp_path / "k.json")
        assert load_kernel(tmp_path / "k.json") == k

    def test_tabulated_csv_with_header(self, tmp_path):
        """Two-column CSV with a header row."""
        path = tmp_path / "profile.csv"
        path.write_text("radius,value\n0,1.0\n1,0.6\n2,0.2\n3,0.0\n")
        k = load_tabulated_csv(path, dimension=2)
        assert k.radii == (0.0, 1.0, 2.0, 3.0)
        assert k.values[1] == 0.6


class TestEvaluateKernel:
    """Tests for evaluate_kernel function."""

    def test_bf_at_origin(self):
        """kappa(0) = 1 for the Bargmann-Fock kernel."""
        assert float(evaluate_kernel(bargmann_fock(2), [0.0, 0.0])) == 1.0

    def test_bf_half_height(self):
        """|x|^2 = 2 ln 2 gives 1/2."""
        x = [math.sqrt(2 * math.log(2)), 0.0]
        assert abs(float(evaluate_kernel(bargmann_fock(2), x)) - 0.5) < 1e-12

    def test_cauchy_unit_radius(self):
        """(1 + 1)^(-4/2) = 0.25."""
        assert abs(float(evaluate_kernel(cauchy(2, alpha=4), [0.0, 1.0])) - 0.25) < 1e-12

    def test_symmetry(self):
        """kappa(x) = kappa(-x) and grad kappa(-x) = -grad kappa(x)."""
        rng = np.random.default_rng(0)
        x = rng.normal(size=(50, 3))
        for k in (bargmann_fock(3), cauchy(3, alpha=4.5)):
            assert np.array_equal(evaluate_kernel(k, x), evaluate_kernel(k, -x))
            assert np.allclose(evaluate_kernel(k, -x, "gradient"), -evaluate_kernel(k, x, "gradient"))

    def test_gradient_matches_finite_differences(self):
        """Analytic gradient against central differences at 100 random points."""
        rng = np.random.default_rng(1)
        step = 1e-5
        for k in (bargmann_fock(2, length_scale=1.3), cauchy(2, alpha=3.5)):
            x = rng.uniform(-2.0, 2.0, size=(100, 2))
            grad = evaluate_kernel(k, x, "gradient")
            for axis in range(2):
                e = np.zeros(2)
                e[axis] = step
                fd = (evaluate_kernel(k, x + e) - evaluate_kernel(k, x - e)) / (2 * step)
                assert np.allclose(grad[:, axis], fd, rtol=1e-6, atol=1e-9)

    def test_hessian_at_origin(self):
        """Hess kappa(0) = -I / s^2 for Bargmann-Fock."""
        hess = evaluate_kernel(bargmann_fock(2, length_scale=2.0), [0.0, 0.0], "hessian")
        assert np.allclose(hess, -0.25 * np.eye(2))

    def test_tabulated_gradient(self):
        """Tabulated kernels give radial gradients."""
        k = tabulated(1, [0.0, 1.0, 2.0, 3.0], [1.0, 0.7, 0.3, 0.1])
        assert float(evaluate_kernel(k, [1.0], "gradient")[0]) < 0

    def test_tabulated_hessian_unsupported(self):
        """Tabulated kernels have no Hessian."""
        k = tabulated(2, [0.0, 1.0, 2.0], [1.0, 0.5, 0.1])
        with pytest.raises(UnsupportedOrderError):
            evaluate_kernel(k, [0.1, 0.0], "hessian")

    def test_tabulated_out_of_range(self):
        """Radii beyond the table are refused."""
        k = tabulated(2, [0.0, 1.0, 2.0], [1.0, 0.5, 0.1])
        with pytest.raises(OutOfRangeError):
            evaluate_kernel(k, [3.0, 0.0])

    def test_non_finite_point(self):
        """x must be finite."""
        with pytest.raises(ValueError):
            evaluate_kernel(bargmann_fock(2), [np.inf, 0.0])


class TestSpectralDensity:
    """Tests for spectral_density function."""

    def test_bf_at_zero(self):
        """rho(0) = (2 pi)^(d/2) = 2 pi in d = 2."""
        assert abs(float(spectral_density(bargmann_fock(2), [0.0, 0.0])) - 2 * math.pi) < 1e-12

    def test_bf_one_dimension(self):
        """rho(1) = sqrt(2 pi) e^(-1/2) ~ 1.5203 in d = 1."""
        expected = math.sqrt(2 * math.pi) * math.exp(-0.5)
        assert abs(float(spectral_density(bargmann_fock(1), 1.0)) - expected) < 1e-12

    def test_cauchy_at_zero_matches_quadrature(self):
        """rho(0) is the integral of kappa: pi for alpha = 4 in d = 2."""
        k = cauchy(2, alpha=4)
        direct, _ = integrate.quad(lambda r: 2 * math.pi * r * float(k.radial_value(r)), 0.0, np.inf)
        rho0 = float(spectral_density(k, [0.0, 0.0]))
        assert rho0 > 0
        assert abs(rho0 - math.pi) < 1e-9
        assert abs(rho0 - direct) / rho0 < 1e-6

    def test_nonnegative(self):
        """rho >= 0 on a frequency sweep."""
        w = np.linspace(0.0, 20.0, 200)
        for k in (bargmann_fock(2), cauchy(2, alpha=3.0), cauchy(3, alpha=5.0)):
            assert np.all(spectral_density(k, w) >= 0)

    @pytest.mark.parametrize("k", [bargmann_fock(2), cauchy(2, alpha=4.0)], ids=["bf", "cauchy"])
    def test_inverse_transform_recovers_kernel(self, k):
        """Transforming rho back gives kappa at sample lags within 1e-4."""
        for lag in np.linspace(0.0, 3.0, 20):
            back = radial_fourier_transform(lambda w: float(spectral_density(k, w)), 2, lag, inverse=True)
            assert abs(back - float(k.radial_value(lag))) < 1e-4

    def test_tabulated_numerical_transform(self):
        """A tabulated Gaussian profile transforms like the analytic one."""
        r = np.linspace(0.0, 10.0, 2001)
        k = tabulated(2, r, np.exp(-0.5 * r ** 2))
        assert abs(float(spectral_density(k, 0.0)) - 2 * math.pi) < 1e-3


class TestAuditAssumptions:
    """Tests for audit_assumptions function."""

    def test_bf_passes(self):
        """Bargmann-Fock is positive and nondegenerate."""
        report = audit_assumptions(bargmann_fock(2), probe_radius=10.0)
        assert report["positivity_ok"]
        assert report["nondegeneracy_ok"]
        assert report["smoothness_order"] >= 8

    def test_cauchy_integrability_converges(self):
        """Cauchy(alpha = d + 1): the truncated integral grows but settles."""
        k = cauchy(2, alpha=3.0)
        near = audit_assumptions(k, probe_radius=50.0)
        far = audit_assumptions(k, probe_radius=100.0)
        assert near["positivity_ok"]
        assert 0 <= near["integrability_estimate"] <= far["integrability_estimate"]
        assert (far["integrability_estimate"] - near["integrability_estimate"]) / far["integrability_estimate"] < 0.05

    def test_negative_sample_reported(self):
        """A tabulated profile with a negative entry fails positivity at that radius."""
        k = tabulated(2, [0.0, 1.0, 2.0, 3.0], [1.0, 0.5, -0.1, 0.0])
        report = audit_assumptions(k, probe_radius=3.0)
        assert not report["positivity_ok"]
        assert report["worst_radius"] == 2.0
        assert abs(report["worst_value"] + 0.1) < 1e-12
        assert report["smoothness_order"] is None

    def test_monochromatic_wave_rejected(self):
        """J0 dips below zero near its first root, so the audit flags it."""
        report = audit_assumptions(monochromatic_wave(), probe_radius=20.0)
        assert not report["positivity_ok"]
        assert 2.4 < report["worst_radius"] < 4.5

    def test_audit_radius_positive(self):
        """probe_radius must be positive."""
        with pytest.raises(ValueError):
            audit_assumptions(bargmann_fock(2), probe_radius=0.0)


class TestExcursionRadius:
    """Tests for excursion_radius function."""

    def test_bf(self):
        """r0 = sqrt(2 ln 2), c0 = 1/2."""
        r0, c0 = excursion_radius(bargmann_fock(2))
        assert abs(r0 - math.sqrt(2 * math.log(2))) < 1e-9
        assert c0 == 0.5

    def test_cauchy(self):
        """(1 + r^2)^-2 = 1/2 at r = sqrt(sqrt(2) - 1)."""
        r0, c0 = excursion_radius(cauchy(2, alpha=4))
        assert abs(r0 - math.sqrt(math.sqrt(2) - 1)) < 1e-9
        assert c0 == 0.5

    def test_postcondition_on_random_points(self):
        """kappa(y) >= c0 for 10^4 random |y| <= r0."""
        k = cauchy(3, alpha=4.5, length_scale=0.7)
        r0, c0 = excursion_radius(k)
        rng = np.random.default_rng(2)
        directions = rng.normal(size=(10_000, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        y = directions * (r0 * rng.uniform(0.0, 1.0, size=(10_000, 1)))
        assert np.all(evaluate_kernel(k, y) >= c0)

    def test_homogeneity(self):
        """Scaling the kernel by 3 keeps r0 and scales c0."""
        k = bargmann_fock(2)
        r0, c0 = excursion_radius(k)
        r0s, c0s = excursion_radius(k.scaled(3.0))
        assert abs(r0s - r0) < 1e-9
        assert abs(c0s - 3 * c0) < 1e-12

    def test_monotone_profile_not_flagged(self):
        """Bargmann-Fock needs no fallback."""
        found = excursion_radius_report(bargmann_fock(2))
        assert not found["conservative"]
        assert (found["r0"], found["c0"]) == excursion_radius(bargmann_fock(2))

    def test_dip_before_crossing_is_flagged(self):
        """A dip below kappa(0)/2 missed by the bracketing scan gives a flagged, smaller r0."""
        k = tabulated(
            2,
            [0.0, 0.25, 0.3, 0.33, 0.45, 0.48, 0.5, 0.75, 0.8, 2.0],
            [1.0, 0.95, 0.9, 0.45, 0.45, 0.9, 0.9, 0.8, 0.3, 0.1],
        )
        found = excursion_radius_report(k, scan_points=4)
        assert found["conservative"]
        assert found["r0"] < 0.33
        assert np.all(k.radial_value(np.linspace(0.0, found["r0"], 200)) >= found["c0"])

    def test_tabulated_never_halves(self):
        """A profile that stays above kappa(0)/2 has no excursion radius."""
        k = tabulated(2, [0.0, 1.0, 2.0], [1.0, 0.9, 0.8])
        with pytest.raises(OutOfRangeError):
            excursion_radius(k)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
