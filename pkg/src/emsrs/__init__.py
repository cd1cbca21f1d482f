"""Electron-interferometric detection of single and few spins.

Submodules: :mod:`~emsrs.constants`, :mod:`~emsrs.magnetostatics`,
:mod:`~emsrs.quantum`, :mod:`~emsrs.ensemble`, :mod:`~emsrs.estimation`,
:mod:`~emsrs.config`, :mod:`~emsrs.protocols` and the :mod:`~emsrs.cli`.
"""

__version__ = "0.1.0"

from .constants import CODATA2018, beam_kinematics, electron_species, proton_species  # noqa: E402
from .exceptions import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DomainError,
    EmsrsError,
    QuadratureError,
)
from .magnetostatics import ab_phase_analytic, ab_phase_quadrature  # noqa: E402
from .quantum import SpinState, detection_probability, fringe_parameters  # noqa: E402

__all__ = [
    "__version__",
    "CODATA2018",
    "beam_kinematics",
    "electron_species",
    "proton_species",
    "EmsrsError",
    "ConfigError",
    "DomainError",
    "ConvergenceError",
    "QuadratureError",
    "ab_phase_analytic",
    "ab_phase_quadrature",
    "SpinState",
    "detection_probability",
    "fringe_parameters",
]
