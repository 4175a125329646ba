"""
Stationary isotropic covariance kernels.

Every supported kernel is radial, kappa(x) = phi(|x|^2), which is what the
derivative formulas below rely on. Analytic families (Bargmann-Fock and Cauchy)
have closed-form values, gradients, Hessians and spectral densities; Tabulated
kernels interpolate a measured radial profile.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional, TypedDict, Union

import numpy as np
import pandas as pd
from scipy import integrate, optimize, special
from scipy.interpolate import PchipInterpolator

from .errors import OutOfRangeError, UnsupportedOrderError

logger = logging.getLogger(__name__)

Family = Literal["bargmann_fock", "cauchy", "tabulated"]
Order = Literal["value", "gradient", "hessian"]

FAMILY_ALIASES = {
    "bf": "bargmann_fock",
    "bargmann_fock": "bargmann_fock",
    "bargmann-fock": "bargmann_fock",
    "cauchy": "cauchy",
    "tabulated": "tabulated",
}

# Nominal smoothness reported for analytic families (assumption I asks for C^8).
ANALYTIC_SMOOTHNESS = 8


class AssumptionReport(TypedDict):
    """Result from audit_assumptions."""
    positivity_ok: bool
    worst_value: float
    worst_radius: float
    integrability_estimate: float
    integrability_radius: float
    integrability_converged: bool
    smoothness_order: Optional[int]
    nondegeneracy_ok: bool
    min_eigenvalue: float


class ExcursionRadius(TypedDict):
    """Result from excursion_radius_report."""
    r0: float
    c0: float
    conservative: bool


@dataclass(frozen=True)
class KernelSpec:
    """
    A stationary radial covariance kernel on R^d.

    Use the constructors bargmann_fock, cauchy and tabulated rather than building
    this directly. Instances are immutable and hashable so they can key caches.
    """
    family: Family
    dimension: int
    variance: float = 1.0
    length_scale: float = 1.0
    alpha: Optional[float] = None
    radii: tuple = ()
    values: tuple = ()
    _profile: Optional[PchipInterpolator] = field(default=None, compare=False, hash=False, repr=False)

    def __post_init__(self):
        if self.family not in ("bargmann_fock", "cauchy", "tabulated"):
            raise ValueError(f"Unknown kernel family {self.family!r}")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.dimension}")
        if not self.variance > 0:
            raise ValueError("variance must be positive (kappa(0) > 0)")
        if not self.length_scale > 0:
            raise ValueError("length_scale must be positive")
        if self.family == "cauchy":
            if self.alpha is None or not self.alpha > self.dimension:
                raise ValueError(f"Cauchy kernel needs alpha > d = {self.dimension}, got {self.alpha}")
        if self.family == "tabulated":
            r = np.asarray(self.radii, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if r.ndim != 1 or r.shape != v.shape or len(r) < 2:
                raise ValueError("Tabulated kernel needs matching radius/value lists of length >= 2")
            if r[0] != 0.0:
                raise ValueError("Tabulated radial profile must start at radius 0")
            if np.any(np.diff(r) <= 0):
                raise ValueError("Tabulated radii must be strictly increasing")
            if not v[0] > 0:
                raise ValueError("Tabulated kernel needs kappa(0) > 0")
            object.__setattr__(self, "_profile", PchipInterpolator(r, v, extrapolate=False))

    @property
    def kernel_id(self) -> str:
        """Short stable identifier used in provenance and file headers."""
        if self.family == "bargmann_fock":
            return f"bf(d={self.dimension},s={self.length_scale:g},v={self.variance:g})"
        if self.family == "cauchy":
            return f"cauchy(d={self.dimension},a={self.alpha:g},s={self.length_scale:g},v={self.variance:g})"
        return f"tabulated(d={self.dimension},n={len(self.radii)},rmax={self.radii[-1]:g})"

    @property
    def max_radius(self) -> float:
        """Largest radius at which the kernel can be evaluated."""
        return float(self.radii[-1]) if self.family == "tabulated" else math.inf

    @property
    def is_analytic(self) -> bool:
        return self.family != "tabulated"

    def value_at_zero(self) -> float:
        return float(self.variance if self.is_analytic else self.values[0])

    def scaled(self, factor: float) -> "KernelSpec":
        """Return the kernel multiplied by factor > 0 (the covariance of sqrt(factor)*f)."""
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        if self.is_analytic:
            return KernelSpec(
                family=self.family, dimension=self.dimension, variance=self.variance * factor,
                length_scale=self.length_scale, alpha=self.alpha,
            )
        return tabulated(self.dimension, self.radii, [v * factor for v in self.values])

    # Radial profile phi(q), q = |x|^2, and its first two q-derivatives.
    # The gradient is 2 phi'(q) x and the Hessian 2 phi'(q) I + 4 phi''(q) x x^T.

    def profile(self, q: np.ndarray) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.family == "bargmann_fock":
            return self.variance * np.exp(-0.5 * q / self.length_scale ** 2)
        if self.family == "cauchy":
            return self.variance * (1.0 + q / self.length_scale ** 2) ** (-0.5 * self.alpha)
        return self._radial_value(np.sqrt(q))

    def profile_derivatives(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (phi'(q), phi''(q)) for analytic families."""
        q = np.asarray(q, dtype=float)
        s2 = self.length_scale ** 2
        if self.family == "bargmann_fock":
            phi = self.profile(q)
            return -0.5 / s2 * phi, 0.25 / s2 ** 2 * phi
        if self.family == "cauchy":
            a = 0.5 * self.alpha
            u = 1.0 + q / s2
            d1 = -a / s2 * self.variance * u ** (-a - 1.0)
            d2 = a * (a + 1.0) / s2 ** 2 * self.variance * u ** (-a - 2.0)
            return d1, d2
        raise UnsupportedOrderError("Tabulated kernels have no analytic profile derivatives")

    def derivatives_at_zero(self) -> tuple[float, float, float]:
        """
        Return (phi(0), phi'(0), phi''(0)) in the q = |x|^2 variable.

        kappa_ij(0) = 2 phi'(0) delta_ij and
        kappa_ijkl(0) = 4 phi''(0) (d_ij d_kl + d_ik d_jl + d_il d_jk).
        """
        d1, d2 = self.profile_derivatives(np.array(0.0))
        return self.value_at_zero(), float(d1), float(d2)

    def _radial_value(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r > self.max_radius * (1 + 1e-12)):
            raise OutOfRangeError(
                f"radius {float(np.max(r)):g} outside tabulated range [0, {self.max_radius:g}]"
            )
        return self._profile(np.minimum(r, self.max_radius))

    def _radial_slope(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if np.any(r > self.max_radius * (1 + 1e-12)):
            raise OutOfRangeError(
                f"radius {float(np.max(r)):g} outside tabulated range [0, {self.max_radius:g}]"
            )
        return self._profile.derivative()(np.minimum(r, self.max_radius))

    def radial_value(self, r: np.ndarray) -> np.ndarray:
        """phi as a function of the radius |x|."""
        r = np.asarray(r, dtype=float)
        if self.is_analytic:
            return self.profile(r * r)
        return self._radial_value(r)

    def radial_slope(self, r: np.ndarray) -> np.ndarray:
        """d/dr of the radial profile."""
        r = np.asarray(r, dtype=float)
        if self.is_analytic:
            d1, _ = self.profile_derivatives(r * r)
            return 2.0 * r * d1
        return self._radial_slope(r)

    def to_dict(self) -> dict:
        """JSON-ready {family, params, dimension} object."""
        if self.family == "tabulated":
            params = {"radii": list(self.radii), "values": list(self.values)}
        else:
            params = {"variance": self.variance, "length_scale": self.length_scale}
            if self.family == "cauchy":
                params["alpha"] = self.alpha
        return {"family": self.family, "params": params, "dimension": self.dimension}


def bargmann_fock(dimension: int, length_scale: float = 1.0, variance: float = 1.0) -> KernelSpec:
    """
    The Bargmann-Fock kernel kappa(x) = variance * exp(-|x|^2 / (2 length_scale^2)).

    Examples:
        >>> float(evaluate_kernel(bargmann_fock(2), [0.0, 0.0]))
        1.0
    """
    return KernelSpec(family="bargmann_fock", dimension=dimension, variance=variance, length_scale=length_scale)


def cauchy(dimension: int, alpha: float, length_scale: float = 1.0, variance: float = 1.0) -> KernelSpec:
    """
    The Cauchy kernel kappa(x) = variance * (1 + |x|^2 / length_scale^2)^(-alpha/2), alpha > d.

    The exponent is negative: with a positive exponent the kernel would be unbounded
    and could not be integrable.

    Examples:
        >>> float(evaluate_kernel(cauchy(2, alpha=4), [1.0, 0.0]))
        0.25
    """
    return KernelSpec(family="cauchy", dimension=dimension, variance=variance, length_scale=length_scale, alpha=alpha)


def tabulated(dimension: int, radii, values) -> KernelSpec:
    """A radial kernel given by samples (radius, value), interpolated with monotone cubics."""
    return KernelSpec(
        family="tabulated", dimension=dimension,
        radii=tuple(float(r) for r in radii), values=tuple(float(v) for v in values),
    )


def kernel_from_dict(obj: dict) -> KernelSpec:
    """Inverse of KernelSpec.to_dict."""
    family = FAMILY_ALIASES.get(str(obj["family"]).lower())
    if family is None:
        raise ValueError(f"Unknown kernel family {obj['family']!r}")
    params = dict(obj.get("params", {}))
    dimension = int(obj["dimension"])
    if family == "bargmann_fock":
        return bargmann_fock(dimension, **params)
    if family == "cauchy":
        return cauchy(dimension, **params)
    return tabulated(dimension, params["radii"], params["values"])


def load_kernel(path: Union[str, Path]) -> KernelSpec:
    """Load a kernel from a JSON file."""
    return kernel_from_dict(json.loads(Path(path).read_text()))


def save_kernel(k: KernelSpec, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(k.to_dict(), indent=2))


def load_tabulated_csv(path: Union[str, Path], dimension: int) -> KernelSpec:
    """
    Load a Tabulated kernel from a two-column CSV of (radius, value).

    A header row is allowed; non-numeric rows are dropped.
    """
    table = pd.read_csv(path, header=None, comment="#")
    if table.shape[1] < 2:
        raise ValueError(f"{path}: expected two columns (radius, value)")
    table = table.iloc[:, :2].apply(pd.to_numeric, errors="coerce").dropna()
    return tabulated(dimension, table.iloc[:, 0].tolist(), table.iloc[:, 1].tolist())


def _as_points(k: KernelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 and k.dimension == 1:
        x = x.reshape(1)
    if x.shape[-1] != k.dimension:
        raise ValueError(f"points must have trailing dimension {k.dimension}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    return x


def evaluate_kernel(k: KernelSpec, x, order: Order = "value") -> np.ndarray:
    """
    Evaluate kappa, its gradient or its Hessian at one or many points.

    Args:
        k: The kernel.
        x: A point of shape (d,) or a batch of shape (..., d).
        order: "value", "gradient" or "hessian". Tabulated kernels support value
            and gradient only.

    Returns:
        Array of shape (...), (..., d) or (..., d, d).

    Examples:
        >>> k = bargmann_fock(2)
        >>> round(float(evaluate_kernel(k, [math.sqrt(2 * math.log(2)), 0.0])), 12)
        0.5
    """
    x = _as_points(k, x)
    q = np.sum(x * x, axis=-1)

    if order == "value":
        return k.profile(q)

    if order == "gradient":
        if k.is_analytic:
            d1, _ = k.profile_derivatives(q)
            return 2.0 * d1[..., None] * x
        r = np.sqrt(q)
        slope = k.radial_slope(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[..., None] > 0, x / r[..., None], 0.0)
        return slope[..., None] * unit

    if order == "hessian":
        if not k.is_analytic:
            raise UnsupportedOrderError("Tabulated kernels do not support the Hessian")
        d1, d2 = k.profile_derivatives(q)
        eye = np.eye(k.dimension)
        return 2.0 * d1[..., None, None] * eye + 4.0 * d2[..., None, None] * (x[..., :, None] * x[..., None, :])

    raise UnsupportedOrderError(f"Unknown order {order!r}")


def radial_fourier_transform(
    profile,
    dimension: int,
    frequency: float,
    upper: float = math.inf,
    inverse: bool = False,
) -> float:
    """
    Fourier transform of a radial function on R^d by one-dimensional quadrature.

    Forward: F(w) = (2 pi)^(d/2) w^(1-d/2) int_0^inf g(r) r^(d/2) J_(d/2-1)(w r) dr.
    The inverse carries the extra factor (2 pi)^(-d).

    Args:
        profile: Callable g(r) of the radius.
        dimension: d.
        frequency: |w| (or |x| for the inverse).
        upper: Integration cut-off, e.g. the end of a tabulated profile.
        inverse: Apply the (2 pi)^(-d) normalisation of the inverse transform.
    """
    d = dimension
    w = float(frequency)
    if w == 0.0:
        area = 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)
        value, _ = integrate.quad(lambda r: profile(r) * r ** (d - 1), 0.0, upper, limit=400)
        value *= area
    else:
        nu = d / 2 - 1

        def integrand(r):
            return profile(r) * r ** (d / 2) * special.jv(nu, w * r)

        if math.isinf(upper):
            value, _ = integrate.quad(integrand, 0.0, upper, limit=400)
        else:
            # split at Bessel half-periods so oscillations do not defeat quad
            edges = np.arange(0.0, upper, math.pi / w)
            edges = np.append(edges, upper)
            value = sum(integrate.quad(integrand, a, b, limit=100)[0] for a, b in zip(edges[:-1], edges[1:]))
        value *= (2 * math.pi) ** (d / 2) * w ** (1 - d / 2)
    if inverse:
        value /= (2 * math.pi) ** d
    return float(value)


def spectral_density(k: KernelSpec, omega) -> np.ndarray:
    """
    Spectral density rho(w) = int kappa(x) exp(-i <x, w>) dx.

    Closed form for the analytic families; Tabulated kernels fall back to a
    numerical Hankel transform over the tabulated range, accurate to the
    quadrature tolerance (about 1e-8 absolute) plus the mass of kappa beyond
    the last tabulated radius.

    Args:
        k: The kernel.
        omega: A frequency vector (d,), a batch (..., d), or for convenience a
            scalar |w|.

    Returns:
        Nonnegative densities with the batch shape.

    Examples:
        >>> round(float(spectral_density(bargmann_fock(2), [0.0, 0.0])), 10) == round(2 * math.pi, 10)
        True
    """
    w = np.asarray(omega, dtype=float)
    if w.ndim == 0:
        norm = np.abs(w)
    else:
        if w.shape[-1] != k.dimension:
            raise ValueError(f"frequencies must have trailing dimension {k.dimension}")
        norm = np.sqrt(np.sum(w * w, axis=-1))
    d = k.dimension
    s = k.length_scale

    if k.family == "bargmann_fock":
        return k.variance * (2 * math.pi * s * s) ** (d / 2) * np.exp(-0.5 * (s * norm) ** 2)

    if k.family == "cauchy":
        beta = 0.5 * k.alpha
        nu = beta - d / 2
        z = s * np.asarray(norm, dtype=float)
        at_zero = math.pi ** (d / 2) * math.gamma(nu) / math.gamma(beta)
        with np.errstate(invalid="ignore", over="ignore"):
            general = (
                (2 * math.pi) ** (d / 2) * 2 ** (1 - beta) / math.gamma(beta)
                * z ** nu * special.kv(nu, z)
            )
        rho = np.where(z < 1e-12, at_zero, np.nan_to_num(general, nan=0.0))
        return k.variance * s ** d * np.maximum(rho, 0.0)

    flat = np.atleast_1d(norm).ravel()
    out = np.array([
        radial_fourier_transform(lambda r: float(k.radial_value(r)), d, wi, upper=k.max_radius)
        for wi in flat
    ])
    return out.reshape(np.shape(norm))


def audit_assumptions(
    k: KernelSpec,
    probe_radius: float,
    quadrature_resolution: float = 0.01,
    tolerance: float = 1e-10,
) -> AssumptionReport:
    """
    Check the four standing assumptions on a kernel numerically.

    Positivity (III) is the minimum of the radial profile on a radial grid,
    integrability (IV) the truncated integral of |kappa| + |grad kappa| over the ball of
    radius probe_radius, non-degeneracy (II) the smallest eigenvalue of
    Cov(f(0), grad f(0)) = diag(kappa(0), -Hess kappa(0)), and smoothness (I) is
    nominal: 8 for analytic families, None (unknown) for Tabulated ones.
    Violations are reported, never raised.

    Args:
        k: The kernel.
        probe_radius: Radius of the audited ball. Tabulated kernels are checked up to
            min(probe_radius, last tabulated radius).
        quadrature_resolution: Radial step of the radial grid and the quadrature.
        tolerance: Eigenvalue floor for non-degeneracy.

    Examples:
        >>> report = audit_assumptions(bargmann_fock(2), probe_radius=10.0)
        >>> report["positivity_ok"], report["nondegeneracy_ok"]
        (True, True)
    """
    if not probe_radius > 0:
        raise ValueError("probe_radius must be positive")
    if not quadrature_resolution > 0:
        raise ValueError("quadrature_resolution must be positive")

    top = min(probe_radius, k.max_radius)
    r = np.arange(0.0, top + 0.5 * quadrature_resolution, quadrature_resolution)
    r[-1] = min(r[-1], top)
    if k.family == "tabulated":
        tab = np.asarray(k.radii)
        r = np.union1d(r, tab[tab <= top])
    phi = k.radial_value(r)
    worst = int(np.argmin(phi))

    d = k.dimension
    area = 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)
    integrand = (np.abs(phi) + np.abs(k.radial_slope(r))) * r ** (d - 1)
    cumulative = area * integrate.cumulative_trapezoid(integrand, r, initial=0.0)
    estimate = float(cumulative[-1])
    half = float(np.interp(0.5 * r[-1], r, cumulative))
    converged = estimate == 0.0 or (estimate - half) / estimate < 0.01

    if k.is_analytic:
        kappa0, d1, _ = k.derivatives_at_zero()
        gradient_variance = -2.0 * d1
        smoothness = ANALYTIC_SMOOTHNESS
    else:
        # -kappa''(0) from the interpolant; pchip is only C^1 so this is a rough estimate
        kappa0 = k.value_at_zero()
        gradient_variance = -float(k._profile.derivative(2)(0.0))
        smoothness = None
    eigenvalues = np.array([kappa0] + [gradient_variance] * d)
    min_eig = float(eigenvalues.min())

    return AssumptionReport(
        positivity_ok=bool(phi[worst] >= 0.0),
        worst_value=float(phi[worst]),
        worst_radius=float(r[worst]),
        integrability_estimate=estimate,
        integrability_radius=float(r[-1]),
        integrability_converged=bool(converged),
        smoothness_order=smoothness,
        nondegeneracy_ok=bool(min_eig > tolerance),
        min_eigenvalue=min_eig,
    )


def excursion_radius_report(k: KernelSpec, scan_points: int = 2000) -> ExcursionRadius:
    """
    Find (r0, c0) with kappa(y) >= c0 for all |y| <= r0.

    c0 is fixed at kappa(0)/2 and r0 is the first radius where the radial profile
    reaches c0, found by Brent bisection. If the profile dips below c0 before that
    crossing (not radially monotone near 0), a grid scan gives a conservative r0,
    a warning is logged and the result is flagged conservative.

    Examples:
        >>> found = excursion_radius_report(bargmann_fock(2))
        >>> round(found["r0"], 5), found["c0"], found["conservative"]
        (1.17741, 0.5, False)
    """
    c0 = 0.5 * k.value_at_zero()

    def gap(r):
        return float(k.radial_value(np.array(r))) - c0

    hi = min(k.length_scale, k.max_radius)
    while gap(hi) > 0:
        if hi >= k.max_radius:
            raise OutOfRangeError("kernel stays above kappa(0)/2 over the whole tabulated range")
        hi = min(2.0 * hi, k.max_radius)
    # bracket the first crossing so that non-monotone profiles still give a sign change
    scan = np.linspace(0.0, hi, scan_points + 1)
    first = int(np.nonzero(k.radial_value(scan) <= c0)[0][0])
    r0 = optimize.brentq(gap, scan[first - 1], scan[first], xtol=1e-14, rtol=8.9e-16)
    # brentq lands within xtol of the root; step inside so the bound is exact
    while float(k.radial_value(np.array(r0))) < c0:
        r0 = float(np.nextafter(r0, 0.0))

    conservative = False
    check = np.linspace(0.0, r0, scan_points + 1)
    values = k.radial_value(check)
    if np.any(values < c0):
        bad = int(np.nonzero(values < c0)[0][0])
        fallback = float(check[max(bad - 1, 0)])
        logger.warning(
            "radial profile of %s is not monotone near 0; using conservative r0=%g instead of %g",
            k.kernel_id, fallback, r0,
        )
        r0, conservative = fallback, True
    return ExcursionRadius(r0=float(r0), c0=float(c0), conservative=conservative)


def excursion_radius(k: KernelSpec, scan_points: int = 2000) -> tuple[float, float]:
    """
    (r0, c0) from excursion_radius_report.

    Examples:
        >>> r0, c0 = excursion_radius(bargmann_fock(2))
        >>> round(r0, 5), c0
        (1.17741, 0.5)
    """
    found = excursion_radius_report(k, scan_points)
    return found["r0"], found["c0"]


def max_gradient_norm(k: KernelSpec, scan_radius: Optional[float] = None, scan_points: int = 4000) -> float:
    """sup over r of |d phi / dr|, scanned on [0, scan_radius]."""
    top = scan_radius if scan_radius is not None else min(10.0 * k.length_scale, k.max_radius)
    r = np.linspace(0.0, top, scan_points + 1)
    return float(np.max(np.abs(k.radial_slope(r))))
