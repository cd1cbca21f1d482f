"""Spin (x) path two-qubit model of one electron passing one spin-1/2.

Conventions
-----------
* Composite ordering is ``spin (x) path``; the path basis is ``(|R>, |L>)``
  and the output ports are ``|+-> = (|R> +- |L>)/sqrt(2)``.
* The adjustable external phase ``phi`` sits on the R arm,
  ``|phi> = (e^{i phi}|R> + |L>)/sqrt(2)``. With the passage unitary
  ``exp(-i theta sx(t0))|R><R| + exp(+i theta sx(t0))|L><L|`` this makes the
  port statistics read ``p+ = (1 + V cos(phi - dphi))/2`` exactly.
* Rotations follow the sense of a positive moment in a field along the
  rotation axis: the Bloch vector turns by ``-angle`` about the axis
  (propagator ``exp(+i angle n.sigma / 2)``). Larmor precession and
  microwave pulses share this convention, which gives
  ``sx(t0) = sx cos(w0 t0) + sy sin(w0 t0)`` for a field along ``e_z``.
* The Larmor frequency is ``w0 = gamma B0`` (level splitting ``hbar w0``).
* The passage is stroboscopic: ``sx`` is frozen at ``t0``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ._validation import check_positive, check_unit_vector
from .constants import CODATA2018
from .exceptions import DomainError

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "SpinState",
    "PathState",
    "CompositeState",
    "BiasField",
    "InteractionStrength",
    "FringeObservables",
    "rotation_unitary",
    "larmor_evolve",
    "mw_pulse",
    "thermal_excitation",
    "thermal_state",
    "sigma_x_at",
    "sx_expectation",
    "passage_unitary",
    "fringe_parameters",
    "detection_probability",
    "fringe_observables",
    "full_passage",
    "thermal_visibility_approx",
    "thermal_visibility_exact",
]

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)

_PROJ_R = np.diag([1.0, 0.0]).astype(complex)
_PROJ_L = np.diag([0.0, 1.0]).astype(complex)
_PORT_PLUS = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2)
_PORT_MINUS = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2)

_TOL = 1e-12


def _pauli_dot(n):
    return n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z


def _check_density(rho, dim, tol=_TOL):
    rho = np.array(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise DomainError(f"density matrix must be {dim}x{dim}, got {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=tol, rtol=0):
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise DomainError(f"density matrix trace is {np.trace(rho).real!r}, not 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise DomainError("density matrix is not positive semidefinite")
    rho.flags.writeable = False
    return rho


@dataclass(frozen=True, eq=False)
class SpinState:
    """Spin-1/2 density matrix; the Bloch vector is derived from it."""

    rho: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho", _check_density(self.rho, 2))

    @classmethod
    def from_bloch(cls, s):
        s = np.asarray(s, dtype=float)
        if s.shape != (3,) or np.linalg.norm(s) > 1 + _TOL:
            raise DomainError(f"Bloch vector must be a 3-vector with |s| <= 1, got {s!r}")
        return cls(0.5 * (I2 + _pauli_dot(s)))

    @classmethod
    def from_ket(cls, ket):
        ket = np.asarray(ket, dtype=complex).reshape(2)
        ket = ket / np.linalg.norm(ket)
        return cls(np.outer(ket, ket.conj()))

    @classmethod
    def along(cls, direction):
        """Pure state polarised along ``direction`` (normalised here)."""
        return cls.from_bloch(check_unit_vector(direction, "direction", normalize=True))

    @classmethod
    def maximally_mixed(cls):
        return cls(I2 / 2)

    @property
    def bloch(self):
        return np.array([np.trace(self.rho @ p).real for p in _PAULI])

    @property
    def purity(self):
        return float(np.trace(self.rho @ self.rho).real)

    @property
    def is_pure(self):
        return abs(np.linalg.norm(self.bloch) - 1.0) <= 1e-9

    def ket(self):
        """State vector of a pure state (dominant eigenvector)."""
        if not self.is_pure:
            raise DomainError("state is mixed; no state vector")
        w, v = np.linalg.eigh(self.rho)
        return v[:, np.argmax(w)]

    def expect(self, op):
        return float(np.trace(self.rho @ op).real)

    def evolve(self, unitary):
        return SpinState(unitary @ self.rho @ unitary.conj().T)

    def __repr__(self):
        s = np.round(self.bloch, 12)
        return f"SpinState(bloch=({s[0]}, {s[1]}, {s[2]}))"


@dataclass(frozen=True, eq=False)
class PathState:
    """Electron path qubit with amplitudes ``(c_R, c_L)``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if a.shape != (2,) or abs(np.vdot(a, a).real - 1.0) > _TOL:
            raise DomainError("path amplitudes must be a normalised pair (c_R, c_L)")
        a.flags.writeable = False
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def from_phase(cls, phi):
        """Beam-splitter output with external phase ``phi`` on the R arm."""
        return cls(np.array([np.exp(1j * phi), 1.0]) / math.sqrt(2))

    @property
    def rho(self):
        return np.outer(self.amplitudes, self.amplitudes.conj())


@dataclass(frozen=True, eq=False)
class CompositeState:
    """Joint spin (x) path density matrix."""

    rho4: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho4", _check_density(self.rho4, 4, tol=1e-10))

    def _blocks(self):
        return self.rho4.reshape(2, 2, 2, 2)  # (spin, path, spin', path')

    def spin_marginal(self):
        return SpinState(np.einsum("ajbj->ab", self._blocks()))

    def path_marginal(self):
        return np.einsum("iaib->ab", self._blocks())

    def port_probability(self, port="+"):
        ket = _PORT_PLUS if port == "+" else _PORT_MINUS
        proj = np.kron(I2, np.outer(ket, ket.conj()))
        return float(np.trace(self.rho4 @ proj).real)

    def entanglement_entropy(self):
        """Von Neumann entropy (bits) of the spin marginal."""
        w = np.linalg.eigvalsh(self.spin_marginal().rho)
        w = w[w > 1e-300]
        return float(-(w * np.log2(w)).sum())


@dataclass(frozen=True)
class BiasField:
    """Static bias field ``B0`` along unit ``axis`` with Larmor frequency ``omega0``."""

    B0: float
    axis: tuple
    omega0: float

    def __post_init__(self):
        check_positive(self.B0, "B0", strict=False)
        check_positive(self.omega0, "omega0", strict=False)
        object.__setattr__(self, "axis", tuple(check_unit_vector(self.axis, "axis")))

    @classmethod
    def for_species(cls, species, B0, axis=(0.0, 0.0, 1.0)):
        n = check_unit_vector(axis, "axis", normalize=True)
        return cls(B0=float(B0), axis=tuple(n), omega0=species.gamma * float(B0))

    def check_species(self, species, rtol=1e-9):
        if not math.isclose(self.omega0, species.gamma * self.B0, rel_tol=rtol, abs_tol=0.0):
            raise DomainError(
                f"omega0={self.omega0!r} inconsistent with gamma*B0 for {species.name}"
            )


@dataclass(frozen=True)
class InteractionStrength:
    """Dimensionless coupling ``theta = e mu0 mu / (2 pi hbar d)``."""

    theta: float
    d: float
    species: object

    @classmethod
    def from_geometry(cls, d, species, constants=CODATA2018):
        d = check_positive(d, "d")
        theta = constants.e * constants.mu0 * species.mu / (2 * math.pi * constants.hbar * d)
        return cls(theta=theta, d=d, species=species)

    def __float__(self):
        return float(self.theta)


@dataclass(frozen=True)
class FringeObservables:
    delta_phi: float
    visibility: float
    sx_expect: float


def _theta_value(theta):
    return float(theta.theta) if isinstance(theta, InteractionStrength) else float(theta)


def rotation_unitary(axis, angle):
    """Propagator ``exp(+i angle n.sigma / 2)``: Bloch vector turns by ``-angle``."""
    n = np.asarray(axis, dtype=float)
    return math.cos(angle / 2) * I2 + 1j * math.sin(angle / 2) * _pauli_dot(n)


def larmor_evolve(state, field, t):
    """Free precession for time ``t`` about the bias axis."""
    return state.evolve(rotation_unitary(field.axis, field.omega0 * t))


def mw_pulse(state, axis, angle):
    """Instantaneous microwave rotation by ``angle`` about unit ``axis``."""
    n = check_unit_vector(axis, "axis")
    return state.evolve(rotation_unitary(n, angle))


def thermal_excitation(omega0, T, constants=CODATA2018):
    """Excited-state population ``1 / (1 + exp(hbar omega0 / k_B T))``."""
    T = check_positive(T, "T")
    return float(expit(-constants.hbar * omega0 / (constants.k_B * T)))


def thermal_state(field, T, constants=CODATA2018):
    """Gibbs state in the bias field; polarised along ``+axis`` (the ground state)."""
    T = check_positive(T, "T")
    x = constants.hbar * field.omega0 / (constants.k_B * T)
    polarization = math.tanh(x / 2)  # = 1 - 2 n_T, accurate for small x
    return SpinState.from_bloch(polarization * np.asarray(field.axis))


def sigma_x_at(t0, field=None):
    """Heisenberg-picture ``sigma_x(t0)`` under free precession."""
    if field is None or t0 == 0:
        return SIGMA_X.copy()
    u = rotation_unitary(field.axis, field.omega0 * t0)
    return u.conj().T @ SIGMA_X @ u


def sx_expectation(state, t0=0.0, field=None):
    return state.expect(sigma_x_at(t0, field))


def passage_unitary(theta, t0=0.0, field=None):
    """4x4 unitary of one electron passage (block diagonal in the path basis)."""
    th = _theta_value(theta)
    sx = sigma_x_at(t0, field)
    minus = math.cos(th) * I2 - 1j * math.sin(th) * sx
    plus = math.cos(th) * I2 + 1j * math.sin(th) * sx
    return np.kron(minus, _PROJ_R) + np.kron(plus, _PROJ_L)


def fringe_parameters(theta, sx_expect):
    """Net fringe phase and visibility for a spin with ``<sx(t0)> = sx_expect``.

    ``dphi = arctan(sx tan 2theta)``, evaluated as
    ``atan2(sx sin 2theta, cos 2theta)`` so that it stays exact through
    ``theta = pi/4`` and beyond; ``V = sqrt(1 - (1 - sx^2) sin^2 2theta)``.
    Vectorised.
    """
    th = np.asarray(theta, dtype=float)
    sx = np.asarray(sx_expect, dtype=float)
    if np.any(np.abs(sx) > 1 + _TOL):
        raise DomainError("|<sigma_x>| must not exceed 1")
    s2, c2 = np.sin(2 * th), np.cos(2 * th)
    delta_phi = np.arctan2(sx * s2, c2)
    visibility = np.sqrt(np.clip(1.0 - (1.0 - sx * sx) * s2 * s2, 0.0, None))
    if delta_phi.ndim == 0:
        return float(delta_phi), float(visibility)
    return delta_phi, visibility


def detection_probability(theta, phi, sx_expect):
    """Probability ``p+ = (1 + V cos(phi - dphi)) / 2`` of the ``+`` port.

    ``p-`` is ``1 - p+``. Vectorised over all arguments.
    """
    delta_phi, visibility = fringe_parameters(theta, sx_expect)
    p = 0.5 * (1.0 + visibility * np.cos(np.asarray(phi) - delta_phi))
    return float(p) if np.ndim(p) == 0 else p


def fringe_observables(spin, theta, t0=0.0, field=None):
    sx = sx_expectation(spin, t0, field)
    delta_phi, visibility = fringe_parameters(_theta_value(theta), sx)
    return FringeObservables(delta_phi=delta_phi, visibility=visibility, sx_expect=sx)


def full_passage(spin, path, theta, t0=0.0, field=None):
    """Apply the passage unitary to ``spin (x) path`` and return the joint state."""
    u = passage_unitary(theta, t0, field)
    rho = np.kron(spin.rho, path.rho)
    return CompositeState(u @ rho @ u.conj().T)


def _check_normal_bias(field):
    if not np.allclose(np.abs(field.axis), (1.0, 0.0, 0.0), atol=1e-12):
        raise DomainError("thermal visibility formula needs the bias along e_x")


def thermal_visibility_approx(theta, field, T, constants=CODATA2018):
    """Small-coupling visibility ``1 - 8 n_T (1 - n_T) theta^2`` for a bias along ``e_x``."""
    _check_normal_bias(field)
    n = thermal_excitation(field.omega0, T, constants)
    th = _theta_value(theta)
    return 1.0 - 8.0 * n * (1.0 - n) * th * th


def thermal_visibility_exact(theta, field, T, constants=CODATA2018):
    """Fringe visibility of the thermally averaged detection probability."""
    _check_normal_bias(field)
    sx = sx_expectation(thermal_state(field, T, constants))
    return fringe_parameters(_theta_value(theta), sx)[1]
