"""Poroelastic material parameters, derived frequency-dependent quantities and wavenumbers.

All quantities are dimensionless.  The coupled solid/fluid model is controlled
by the two Lame constants plus the poroelastic set (porosity, permeability,
densities, Skempton and Poisson coefficients); at a given angular frequency
``omega`` these produce the complex compressibility-type scalars ``beta``,
``q``, ``gamma``, ``epsilon`` and the four wavenumbers (shear ``k_s``,
compressional ``k_p``, fast/slow compressional ``k1``/``k2``).
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

__all__ = [
    "MaterialParams",
    "DerivedParams",
    "WaveNumbers",
    "SpectralConstant",
    "lame_lambda_from_poisson",
    "derive_params",
    "compute_wavenumbers",
    "spectral_constant",
]


def lame_lambda_from_poisson(mu: float, nu_p: float) -> float:
    """First Lame constant from the shear modulus and (drained) Poisson ratio."""
    if not -1.0 < nu_p < 0.5:
        raise ValueError(f"Poisson ratio must lie in (-1, 1/2), got {nu_p}")
    return 2.0 * mu * nu_p / (1.0 - 2.0 * nu_p)


@dataclass(frozen=True)
class MaterialParams:
    """Static poroelastic material constants.

    Parameters
    ----------
    lam, mu : float
        Lame constants; require ``mu > 0`` and ``3*lam + 2*mu > 0``.
    nu_p, nu_u : float
        Drained and undrained Poisson ratios.
    B : float
        Skempton pore-pressure coefficient.
    rho_s, rho_f : float
        Solid and fluid densities.
    added_mass_C : float
        Coefficient ``C`` in the apparent mass density ``rho_a = C*phi*rho_f``.
    phi : float
        Porosity, in (0, 1).
    kappa : float
        Permeability coefficient, positive.
    """

    lam: float
    mu: float
    nu_p: float
    nu_u: float
    B: float
    rho_s: float
    rho_f: float
    added_mass_C: float
    phi: float
    kappa: float

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if 3.0 * self.lam + 2.0 * self.mu <= 0.0:
            raise ValueError("3*lam + 2*mu must be positive")
        if not 0.0 < self.phi < 1.0:
            raise ValueError(f"porosity must lie in (0, 1), got {self.phi}")
        if self.kappa <= 0.0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.rho_s <= 0.0 or self.rho_f <= 0.0:
            raise ValueError("densities must be positive")

    @property
    def rho_a(self) -> float:
        """Apparent mass density ``C*phi*rho_f``."""
        return self.added_mass_C * self.phi * self.rho_f

    @property
    def rho(self) -> float:
        """Bulk density ``(1-phi)*rho_s + phi*rho_f``."""
        return (1.0 - self.phi) * self.rho_s + self.phi * self.rho_f

    @property
    def alpha(self) -> float:
        """Compressibility coefficient built from the two Poisson ratios and B."""
        return (
            3.0
            * (self.nu_u - self.nu_p)
            / (self.B * (1.0 - 2.0 * self.nu_p) * (1.0 + self.nu_u))
        )

    @property
    def R(self) -> float:
        """Constitutive coefficient of the pore-pressure equation."""
        num = (
            2.0
            * self.phi**2
            * self.mu
            * self.B**2
            * (1.0 - 2.0 * self.nu_p)
            * (1.0 + self.nu_u) ** 2
        )
        den = 9.0 * (self.nu_u - self.nu_p) * (1.0 - 2.0 * self.nu_u)
        return num / den

    @property
    def lam_2mu(self) -> float:
        return self.lam + 2.0 * self.mu


@dataclass(frozen=True)
class DerivedParams:
    """Frequency-dependent complex scalars of the coupled model."""

    omega: float
    beta: complex
    q: complex
    gamma: complex
    epsilon: complex


@dataclass(frozen=True)
class WaveNumbers:
    """The four complex wavenumbers at a fixed frequency."""

    k_p: complex
    k_s: complex
    k1: complex
    k2: complex

    @property
    def k1_sq(self) -> complex:
        return self.k1 * self.k1

    @property
    def k2_sq(self) -> complex:
        return self.k2 * self.k2

    @property
    def dk12(self) -> complex:
        """Denominator ``k1^2 - k2^2`` shared by all kernel formulas."""
        return self.k1_sq - self.k2_sq


@dataclass(frozen=True)
class SpectralConstant:
    """Eigenvalue accumulation constant ``mu / (2*(lam + 2*mu))``."""

    c_lm: float = field()

    def __post_init__(self):
        if not 0.0 < self.c_lm < 0.375:
            raise ValueError(f"spectral constant out of (0, 3/8): {self.c_lm}")


def _sqrt_radiation(z: complex) -> complex:
    """Principal square root flipped onto the closed upper half plane.

    Ties (purely real result) resolve to nonnegative real part, which gives a
    deterministic outgoing-wave branch choice.
    """
    w = cmath.sqrt(z)
    if w.imag < 0.0:
        w = -w
    if w.imag == 0.0 and w.real < 0.0:
        w = -w
    return w


def derive_params(mp: MaterialParams, omega: float) -> DerivedParams:
    """Compute ``beta``, ``q``, ``gamma``, ``epsilon`` at angular frequency ``omega``.

    At ``omega = 0`` the coupling shuts off exactly (``beta = 0``) and the
    remaining scalars are returned as zero placeholders; wavenumbers are only
    defined for ``omega > 0``.
    """
    if omega < 0.0:
        raise ValueError(f"omega must be nonnegative, got {omega}")
    if omega == 0.0:
        return DerivedParams(omega=0.0, beta=0.0, q=0.0, gamma=0.0, epsilon=0.0)

    phi2 = mp.phi**2
    beta = (omega * phi2 * mp.rho_f * mp.kappa) / (
        1j * phi2 + omega * mp.kappa * (mp.rho_a + mp.phi * mp.rho_f)
    )
    if beta == 0.0:
        raise ValueError("degenerate material: beta vanished at omega > 0")
    q = omega**2 * phi2 * mp.rho_f / (beta * mp.R)
    gamma = -1j * omega * mp.rho_f * (mp.alpha - beta) / beta
    epsilon = 1j * omega * gamma * (mp.alpha - beta) / (q * mp.lam_2mu)
    out = DerivedParams(
        omega=omega, beta=beta, q=q, gamma=gamma, epsilon=epsilon
    )
    for name in ("beta", "q", "gamma", "epsilon"):
        v = getattr(out, name)
        if not (cmath.isfinite(v)):
            raise ValueError(f"derived parameter {name} is not finite: {v}")
    return out


def compute_wavenumbers(mp: MaterialParams, dp: DerivedParams) -> WaveNumbers:
    """Shear/compressional wavenumbers and the fast/slow compressional pair.

    ``k1``, ``k2`` are square roots of the two roots of the quadratic in
    ``k^2`` fixed by the sum/product relations
    ``k1^2 + k2^2 = q*(1+eps) + k_p^2`` and ``k1^2*k2^2 = q*k_p^2``; the pair
    is ordered by ``|k1| >= |k2|`` and both carry ``Im >= 0``.
    """
    if dp.omega <= 0.0:
        raise ValueError("wavenumbers require omega > 0")
    omega = dp.omega
    rho_eff = mp.rho - dp.beta * mp.rho_f
    k_p = omega * _sqrt_radiation(rho_eff / mp.lam_2mu)
    k_s = omega * _sqrt_radiation(rho_eff / mp.mu)

    ssum = dp.q * (1.0 + dp.epsilon) + k_p * k_p
    prod = dp.q * k_p * k_p
    disc = cmath.sqrt(ssum * ssum - 4.0 * prod)
    # pick the sign avoiding cancellation in ssum + disc
    if (ssum.conjugate() * disc).real < 0.0:
        disc = -disc
    z_big = 0.5 * (ssum + disc)
    if z_big == 0.0:
        raise ValueError("degenerate wavenumbers: both quadratic roots vanish")
    z_small = prod / z_big

    if abs(z_big - z_small) <= 1e-12 * max(abs(z_big), abs(z_small)):
        raise ValueError("degenerate wavenumbers: k1^2 == k2^2")

    k1 = _sqrt_radiation(z_big)
    k2 = _sqrt_radiation(z_small)
    return WaveNumbers(k_p=k_p, k_s=k_s, k1=k1, k2=k2)


def spectral_constant(lam: float, mu: float) -> SpectralConstant:
    """Accumulation constant of the double-layer operator spectrum."""
    if mu <= 0.0 or 3.0 * lam + 2.0 * mu <= 0.0:
        raise ValueError("require mu > 0 and 3*lam + 2*mu > 0")
    return SpectralConstant(c_lm=mu / (2.0 * (lam + 2.0 * mu)))
