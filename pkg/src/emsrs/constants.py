"""Physical constants, spin species and relativistic beam kinematics.

Everything is SI. The constant table is CODATA 2018 (``scipy.constants``
ships a newer adjustment, so the values are pinned here instead).

Sign convention for magnetic moments: ``SpinSpecies.mu`` is the magnitude
``gamma * hbar * I``. The negative moment of the electron only flips the
orientation of the spin relative to its moment; every phase formula in this
package depends on ``|mu|`` and an orientation, so the sign is absorbed into
the orientation once, here.
"""

import math
from dataclasses import dataclass

from ._validation import check_positive
from .exceptions import DomainError

__all__ = [
    "PhysicalConstants",
    "CODATA2018",
    "SpinSpecies",
    "BeamKinematics",
    "electron_species",
    "proton_species",
    "custom_species",
    "species_by_name",
    "beam_kinematics",
]


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA 2018 recommended values (SI)."""

    e: float = 1.602176634e-19  # C, exact
    hbar: float = 1.054571817e-34  # J s
    mu0: float = 1.25663706212e-6  # N A^-2
    m_e: float = 9.1093837015e-31  # kg
    m_p: float = 1.67262192369e-27  # kg
    c: float = 299792458.0  # m s^-1, exact
    k_B: float = 1.380649e-23  # J K^-1, exact
    mu_B: float = 9.2740100783e-24  # J T^-1
    mu_N: float = 5.0507837461e-27  # J T^-1
    r_e: float = 2.8179403262e-15  # m
    g_s: float = 2.00231930436256  # |g| of the free electron
    gamma_e: float = 1.76085963023e11  # |gyromagnetic ratio|, rad s^-1 T^-1
    gamma_p: float = 2.6752218744e8  # rad s^-1 T^-1

    @property
    def m_e_c2_eV(self):
        """Electron rest energy in eV."""
        return self.m_e * self.c**2 / self.e


CODATA2018 = PhysicalConstants()

# Rounded gyromagnetic ratios quoted with the scheme ("paper" preset).
_NOMINAL_GAMMA = {
    "electron": 2 * math.pi * 28.0e9,
    "proton": 2 * math.pi * 42.6e6,
}


@dataclass(frozen=True)
class SpinSpecies:
    """A spin species characterised by its gyromagnetic ratio.

    ``gamma`` is stored as a positive magnitude and ``mu = gamma * hbar * I``
    is enforced at construction.
    """

    name: str
    gamma: float
    mu: float
    I: float = 0.5
    g: float = 2.0

    def __post_init__(self):
        check_positive(self.gamma, "gamma")
        check_positive(self.I, "I")
        expected = self.gamma * CODATA2018.hbar * self.I
        if not math.isclose(self.mu, expected, rel_tol=1e-9, abs_tol=0.0):
            raise DomainError(
                f"inconsistent species {self.name!r}: mu={self.mu!r} but "
                f"gamma*hbar*I={expected!r}"
            )

    @classmethod
    def from_gamma(cls, name, gamma, I=0.5, g=None, magneton=None):
        """Build a species from ``gamma``; ``g`` defaults to ``gamma*hbar/magneton``."""
        mu = gamma * CODATA2018.hbar * I
        if g is None:
            g = gamma * CODATA2018.hbar / (magneton or CODATA2018.mu_B)
        return cls(name=name, gamma=float(gamma), mu=mu, I=float(I), g=float(g))


def _check_preset(preset):
    if preset not in ("paper", "codata"):
        raise ValueError(f"preset must be 'paper' or 'codata', got {preset!r}")


def electron_species(preset="paper"):
    """Free-electron spin.

    ``preset="paper"`` uses gamma = 2 pi * 28 GHz/T, ``"codata"`` the CODATA
    2018 value. ``g`` is derived from ``gamma`` so that ``mu = g mu_B / 2``.
    """
    _check_preset(preset)
    gamma = _NOMINAL_GAMMA["electron"] if preset == "paper" else CODATA2018.gamma_e
    return SpinSpecies.from_gamma("electron", gamma, I=0.5, magneton=CODATA2018.mu_B)


def proton_species(preset="paper"):
    """Hydrogen nucleus; ``g`` is the nuclear g-factor (in units of mu_N)."""
    _check_preset(preset)
    gamma = _NOMINAL_GAMMA["proton"] if preset == "paper" else CODATA2018.gamma_p
    return SpinSpecies.from_gamma("proton", gamma, I=0.5, magneton=CODATA2018.mu_N)


def custom_species(gamma, g, I=0.5, name="custom"):
    return SpinSpecies(name=name, gamma=float(gamma), mu=gamma * CODATA2018.hbar * I,
                       I=float(I), g=float(g))


def species_by_name(name, preset="paper"):
    try:
        factory = {"electron": electron_species, "proton": proton_species,
                   "hydrogen": proton_species}[name.lower()]
    except KeyError:
        raise ValueError(f"unknown species {name!r}") from None
    return factory(preset)


@dataclass(frozen=True)
class BeamKinematics:
    """Kinetic energy [eV], speed [m/s] and Lorentz factor of the probe electron."""

    kinetic_energy: float
    v: float
    gamma_L: float

    @property
    def beta(self):
        return self.v / CODATA2018.c

    @property
    def momentum(self):
        """Longitudinal momentum ``m_e * gamma_L * v`` [kg m/s]."""
        return CODATA2018.m_e * self.gamma_L * self.v


def beam_kinematics(kinetic_energy, constants=CODATA2018):
    """Relativistic speed and Lorentz factor for a kinetic energy in eV."""
    kinetic_energy = check_positive(kinetic_energy, "kinetic_energy")
    x = kinetic_energy / constants.m_e_c2_eV
    gamma_L = 1.0 + x
    # beta^2 = x (x + 2) / (1 + x)^2 avoids cancellation as x -> 0
    v = constants.c * math.sqrt(x * (x + 2.0)) / gamma_L
    return BeamKinematics(kinetic_energy=kinetic_energy, v=v, gamma_L=gamma_L)
