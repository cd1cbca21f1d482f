"""Many-spin and finite-temperature extensions.

Two models of a spin sample larger than one spin:

* a point column of ``N_S`` identically prepared spins, whose collective
  overlap factor ``D_S = <exp(2i theta sum_m sx_m(t0))>`` fixes both the net
  fringe phase (``arg D_S``) and the visibility (``|D_S|``);
* a classical paramagnetic sphere magnetised by the bias field.

For identically prepared spins the collective factor factorises into
``(cos 2theta + i <sx(t0)> sin 2theta)^N_S``. In particular a spin with
``<sx(t0)> = 0`` gives ``|D_S| = |cos 2theta|^N_S``. Printed derivations that
end in ``cos^N_S(theta)`` drop the factor 2 in the exponent; the brute-force
evaluation in :func:`ds_bruteforce` settles it in favour of ``2 theta``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from ._validation import check_count, check_positive
from .constants import CODATA2018
from .exceptions import CapacityError, DomainError
from .quantum import I2, sigma_x_at, sx_expectation

__all__ = [
    "SpinEnsemble",
    "MagnetizedSphere",
    "ds_factor",
    "ds_bruteforce",
    "ensemble_detection_probability",
    "ensemble_fisher_information",
    "ensemble_crb",
    "coherent_crb",
    "unpolarized_crb",
    "thermal_polarization",
    "high_temperature_ratio",
    "column_phase",
    "sphere_phase",
    "nuclear_theta",
    "BRUTEFORCE_MAX_SPINS",
    "BRUTEFORCE_MAX_MIXED_SPINS",
]

BRUTEFORCE_MAX_SPINS = 12
BRUTEFORCE_MAX_MIXED_SPINS = 8


@dataclass(frozen=True)
class SpinEnsemble:
    """``N_S`` spins at one point, all in the single-spin state ``single``."""

    N_S: int
    single: object
    species: object = None

    def __post_init__(self):
        object.__setattr__(self, "N_S", check_count(self.N_S, "N_S"))


def _theta(theta):
    return float(getattr(theta, "theta", theta))


def ds_factor(ens, theta, t0=0.0, field=None):
    """Collective overlap factor ``D_S`` via single-spin factorisation."""
    th = _theta(theta)
    sx = sx_expectation(ens.single, t0, field)
    return complex(math.cos(2 * th) + 1j * sx * math.sin(2 * th)) ** ens.N_S


def _collective_sx(n, sx1):
    """Sparse ``sum_m sx_m`` on ``n`` spins for a single-site operator ``sx1``."""
    site = sparse.csr_matrix(sx1)
    total = sparse.csr_matrix((2**n, 2**n), dtype=complex)
    for m in range(n):
        left = sparse.identity(2**m, dtype=complex, format="csr")
        right = sparse.identity(2 ** (n - m - 1), dtype=complex, format="csr")
        total = total + sparse.kron(sparse.kron(left, site), right, format="csr")
    return total


def ds_bruteforce(ens, theta, t0=0.0, field=None):
    """``D_S`` from the full ``2^N_S``-dimensional product state.

    Builds the collective operator explicitly and applies its exponential
    with ``expm_multiply``; no factorisation is used. Pure states are
    accepted up to :data:`BRUTEFORCE_MAX_SPINS` spins, mixed ones up to
    :data:`BRUTEFORCE_MAX_MIXED_SPINS`.
    """
    n = ens.N_S
    if n > BRUTEFORCE_MAX_SPINS:
        raise CapacityError(f"brute force limited to {BRUTEFORCE_MAX_SPINS} spins, got {n}")
    th = _theta(theta)
    gen = 2j * th * _collective_sx(n, sigma_x_at(t0, field))
    if ens.single.is_pure:
        ket1 = ens.single.ket()
        ket = np.ones(1, dtype=complex)
        for _ in range(n):
            ket = np.kron(ket, ket1)
        return complex(np.vdot(ket, expm_multiply(gen, ket)))
    if n > BRUTEFORCE_MAX_MIXED_SPINS:
        raise CapacityError(
            f"mixed-state brute force limited to {BRUTEFORCE_MAX_MIXED_SPINS} spins, got {n}"
        )
    rho = np.ones((1, 1), dtype=complex)
    for _ in range(n):
        rho = np.kron(rho, ens.single.rho)
    return complex(np.trace(expm_multiply(gen, rho)))


def ensemble_detection_probability(ds, phi):
    """``p+ = (1 + Re(e^{-i phi} D_S)) / 2``; reduces to the single-spin law."""
    return 0.5 * (1.0 + np.real(np.exp(-1j * np.asarray(phi)) * ds))


def _ds_and_derivative(n, sx, th):
    c = complex(math.cos(2 * th), sx * math.sin(2 * th))
    dc = complex(-2 * math.sin(2 * th), 2 * sx * math.cos(2 * th))
    return c**n, n * c ** (n - 1) * dc


def _fisher_at(n, sx, th, phi):
    ds, dds = _ds_and_derivative(n, sx, th)
    rot = complex(math.cos(phi), -math.sin(phi))
    z, dz = rot * ds, rot * dds
    # 4 p+ (1 - p+) = 1 - Re(z)^2 = (1 - |z|^2) + Im(z)^2, with
    # |z|^2 = (1 - a)^n and a = (1 - sx^2) sin^2 2theta, free of cancellation
    a = (1.0 - sx * sx) * math.sin(2 * th) ** 2
    denom = -math.expm1(n * math.log1p(-a)) + z.imag**2 if a < 1 else 1.0 - z.real**2
    return dz.real**2 / denom if denom > 0 else math.nan


def ensemble_fisher_information(ens, theta, phi, t0=0.0, field=None, limit_step=1e-5):
    """Single-electron Fisher information about ``theta`` for the spin column.

    Uses the analytic derivative of ``D_S``. Where ``p+`` hits 0 or 1 the
    expression is 0/0 and the symmetric limit ``(F(theta+h) + F(theta-h))/2``
    is returned instead.
    """
    th = _theta(theta)
    sx = sx_expectation(ens.single, t0, field)
    f = _fisher_at(ens.N_S, sx, th, phi)
    if not math.isnan(f):
        return f
    h = limit_step * max(1.0, abs(th))
    return 0.5 * (_fisher_at(ens.N_S, sx, th + h, phi) + _fisher_at(ens.N_S, sx, th - h, phi))


def ensemble_crb(ens, N_e, theta, phi, t0=0.0, field=None):
    """Cramer--Rao bound ``1 / (N_e F)`` on ``theta`` for a spin column."""
    N_e = check_count(N_e, "N_e")
    f = ensemble_fisher_information(ens, theta, phi, t0, field)
    return math.inf if f == 0 else 1.0 / (N_e * f)


def coherent_crb(N_e, N_S):
    """Bound ``1 / (4 N_e N_S^2)`` for spins aligned with ``sx(t0)``."""
    return 1.0 / (4.0 * check_count(N_e, "N_e") * check_count(N_S, "N_S") ** 2)


def unpolarized_crb(N_e, N_S, theta):
    """Bound at ``phi = 0`` for ``<sx(t0)> = 0``; tends to ``1/(4 N_e N_S)`` as theta -> 0."""
    N_e, N_S = check_count(N_e, "N_e"), check_count(N_S, "N_S")
    th = _theta(theta)
    c = math.cos(2 * th)
    if abs(th) < 1e-12:
        return 1.0 / (4.0 * N_e * N_S)
    den = N_e * (2 * N_S * math.sin(2 * th) * c ** (N_S - 1)) ** 2
    # 1 - cos^{2N}(2 theta) without cancellation: cos 2theta = 1 - 2 sin^2 theta
    s2 = 2 * math.sin(th) ** 2
    num = -math.expm1(2 * N_S * math.log1p(-s2)) if s2 < 1 else 1.0 - c ** (2 * N_S)
    return math.inf if den == 0 else num / den


def high_temperature_ratio(species, B0, T, constants=CODATA2018):
    """``gamma hbar B0 / (k_B T)``; the linear polarisation law needs this << 1."""
    T = check_positive(T, "T")
    return species.gamma * constants.hbar * B0 / (constants.k_B * T)


def thermal_polarization(species, B0, T, exact=False, constants=CODATA2018):
    """Net polarised fraction ``gamma hbar B0 / (2 k_B T)``.

    ``exact=True`` returns ``tanh`` of the same argument (spin-1/2 Gibbs state).
    """
    B0 = check_positive(B0, "B0", strict=False)
    x = 0.5 * high_temperature_ratio(species, B0, T, constants)
    return math.tanh(x) if exact else x


def _theta_for(species, d, constants):
    d = check_positive(d, "d")
    return constants.e * constants.mu0 * species.mu / (2 * math.pi * constants.hbar * d)


def column_phase(N_S, species, d, B0=None, T=None, polarization=None, differential=True,
                 constants=CODATA2018):
    """Phase of a point column of ``N_S`` partially polarised spins.

    The differential phase between the two normal orientations is
    ``4 theta N_S P``; ``differential=False`` gives the single-orientation
    ``2 theta N_S P``. ``P`` is ``polarization`` if given, else the thermal
    fraction at ``(B0, T)``.
    """
    N_S = check_count(N_S, "N_S")
    if polarization is None:
        if B0 is None or T is None:
            raise DomainError("need either polarization or both B0 and T")
        polarization = thermal_polarization(species, B0, T, constants=constants)
    if not 0 <= polarization <= 1:
        raise DomainError(f"polarization must lie in [0, 1], got {polarization!r}")
    factor = 4.0 if differential else 2.0
    return factor * _theta_for(species, d, constants) * N_S * polarization


@dataclass(frozen=True)
class MagnetizedSphere:
    """Uniform paramagnetic sphere of radius ``R`` holding ``N_S`` spins."""

    R: float
    N_S: float
    species: object
    B0: float
    T: float
    I: float = None

    def __post_init__(self):
        check_positive(self.R, "R")
        check_positive(self.N_S, "N_S")
        check_positive(self.T, "T")
        check_positive(self.B0, "B0", strict=False)
        if self.I is None:
            object.__setattr__(self, "I", self.species.I)

    @property
    def volume(self):
        return 4.0 / 3.0 * math.pi * self.R**3

    @property
    def n_S(self):
        return self.N_S / self.volume

    def susceptibility(self, constants=CODATA2018):
        """Curie susceptibility ``mu0 n_S gamma^2 hbar^2 I(I+1) / (3 k_B T)``."""
        g, I = self.species.gamma, self.I
        return (constants.mu0 * self.n_S * (g * constants.hbar) ** 2 * I * (I + 1)
                / (3 * constants.k_B * self.T))

    def induced_field(self, constants=CODATA2018):
        """Internal field of the magnetisation, ``(2/3) chi B0`` (chi << 1)."""
        return 2.0 / 3.0 * self.susceptibility(constants) * self.B0

    def flux(self, constants=CODATA2018):
        """Largest flux through the interferometer, ``pi R^2 B'_in``."""
        return math.pi * self.R**2 * self.induced_field(constants)


def sphere_phase(sphere, constants=CODATA2018):
    """Phase ``-(e/hbar) Phi`` of the magnetised sphere after a pi/2 pulse."""
    return -constants.e / constants.hbar * sphere.flux(constants)


def nuclear_theta(d, g_I, constants=CODATA2018):
    """Nuclear coupling ``mu0 e mu_N g_I / (4 pi hbar d)``; ``2 theta_I`` is the phase."""
    d = check_positive(d, "d")
    return constants.mu0 * constants.e * constants.mu_N * g_I / (4 * math.pi * constants.hbar * d)
