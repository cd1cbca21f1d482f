import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emsrs.constants import CODATA2018, electron_species
from emsrs.exceptions import DomainError
from emsrs.quantum import (
    SIGMA_X,
    BiasField,
    InteractionStrength,
    PathState,
    SpinState,
    detection_probability,
    fringe_observables,
    fringe_parameters,
    full_passage,
    larmor_evolve,
    mw_pulse,
    passage_unitary,
    rotation_unitary,
    sx_expectation,
    thermal_excitation,
    thermal_state,
    thermal_visibility_approx,
    thermal_visibility_exact,
)

ELECTRON = electron_species()
Z_FIELD = BiasField.for_species(ELECTRON, 1.8, (0, 0, 1))
X, Y, Z = np.eye(3)


def unit_vectors():
    return st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: 0.1 < np.linalg.norm(v))


def test_state_validation():
    with pytest.raises(DomainError):
        SpinState.from_bloch((1.0, 1.0, 0.0))
    with pytest.raises(DomainError):
        SpinState(np.array([[1.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(DomainError):
        SpinState(np.array([[1.2, 0.0], [0.0, -0.2]]))
    with pytest.raises(DomainError):
        PathState(np.array([1.0, 1.0]))
    assert SpinState.along((0, 0, 2)).is_pure
    assert not SpinState.maximally_mixed().is_pure
    with pytest.raises(DomainError):
        SpinState.maximally_mixed().ket()


def test_larmor_quarter_turn_convention():
    t = (math.pi / 2) / Z_FIELD.omega0
    s = larmor_evolve(SpinState.along(X), Z_FIELD, t).bloch
    # the Bloch vector turns by -omega0 t about the field axis
    np.testing.assert_allclose(s, -Y, atol=1e-12)


def test_larmor_identity_and_period():
    state = SpinState.from_bloch((0.3, -0.5, 0.6))
    np.testing.assert_allclose(larmor_evolve(state, Z_FIELD, 0.0).bloch, state.bloch, atol=1e-15)
    period = 2 * math.pi / Z_FIELD.omega0
    np.testing.assert_allclose(larmor_evolve(state, Z_FIELD, period).bloch, state.bloch, atol=1e-12)


@settings(max_examples=50)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 2 * math.pi))
def test_heisenberg_sigma_x(sx, sy, phase):
    if sx * sx + sy * sy > 1:
        return
    state = SpinState.from_bloch((sx, sy, 0.0))
    t0 = phase / Z_FIELD.omega0
    expected = sx * math.cos(phase) + sy * math.sin(phase)
    assert sx_expectation(state, t0, Z_FIELD) == pytest.approx(expected, abs=1e-12)


def test_pulses():
    np.testing.assert_allclose(mw_pulse(SpinState.along(X), Z, math.pi).bloch, -X, atol=1e-12)
    np.testing.assert_allclose(mw_pulse(SpinState.along(X), Z, 0.0).bloch, X, atol=1e-15)
    tipped = mw_pulse(SpinState.from_bloch(0.7 * Z), X, math.pi / 2)
    np.testing.assert_allclose(np.abs(tipped.bloch), 0.7 * Y, atol=1e-12)
    for phase in np.linspace(0, 2 * math.pi, 9):
        got = sx_expectation(tipped, phase / Z_FIELD.omega0, Z_FIELD)
        assert got == pytest.approx(0.7 * math.sin(phase), abs=1e-12)


def test_thermal_state_limits():
    assert np.linalg.norm(thermal_state(Z_FIELD, 1e-6).bloch) == pytest.approx(1.0, abs=1e-12)
    hot = thermal_state(Z_FIELD, 1e12).bloch
    assert np.linalg.norm(hot) < 1e-9
    x = CODATA2018.hbar * Z_FIELD.omega0 / (CODATA2018.k_B * 300.0)
    s = thermal_state(Z_FIELD, 300.0).bloch
    np.testing.assert_allclose(s / np.linalg.norm(s), Z, atol=1e-12)
    assert np.linalg.norm(s) == pytest.approx(x / 2, rel=1e-4)
    n = thermal_excitation(Z_FIELD.omega0, 300.0)
    assert np.linalg.norm(s) == pytest.approx(1 - 2 * n, rel=1e-12)
    with pytest.raises(DomainError):
        thermal_state(Z_FIELD, 0.0)


def test_passage_unitary_identity_and_unitarity():
    np.testing.assert_allclose(passage_unitary(0.0), np.eye(4), atol=0)
    rng = np.random.default_rng(3)
    for theta in rng.uniform(0, 2 * math.pi, 20):
        u = passage_unitary(theta, rng.uniform(0, 1e-11), Z_FIELD)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-12)


def test_eigenstate_gets_relative_phase_2theta():
    theta = 0.123
    joint = full_passage(SpinState.along(X), PathState.from_phase(0.0), theta)
    assert joint.entanglement_entropy() < 1e-12
    rho_path = joint.path_marginal()
    # coherence rho_RL = c_R c_L^*, phase(R) - phase(L) = -2 theta
    assert np.angle(rho_path[0, 1]) == pytest.approx(-2 * theta, abs=1e-12)
    assert abs(rho_path[0, 1]) == pytest.approx(0.5, abs=1e-12)


def test_maximal_entanglement():
    joint = full_passage(SpinState.along(Z), PathState.from_phase(0.3), math.pi / 4)
    assert joint.entanglement_entropy() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(joint.path_marginal(), np.eye(2) / 2, atol=1e-12)


def test_zero_coupling_keeps_product_state():
    spin, path = SpinState.from_bloch((0.1, 0.2, 0.3)), PathState.from_phase(1.0)
    joint = full_passage(spin, path, 0.0)
    np.testing.assert_allclose(joint.rho4, np.kron(spin.rho, path.rho), atol=1e-15)


def test_detection_probability_examples():
    phi = np.linspace(0, 2 * math.pi, 13)
    np.testing.assert_allclose(detection_probability(0.0, phi, 0.4), 0.5 * (1 + np.cos(phi)),
                               atol=1e-15)
    for sx in (1.0, -1.0):
        dphi, vis = fringe_parameters(0.2, sx)
        assert vis == pytest.approx(1.0, abs=1e-15)
        assert dphi == pytest.approx(sx * 0.4, abs=1e-15)
        assert detection_probability(0.2, dphi, sx) == pytest.approx(1.0, abs=1e-15)
    dphi, vis = fringe_parameters(0.2, 0.0)
    assert dphi == 0.0 and vis == pytest.approx(abs(math.cos(0.4)), abs=1e-15)
    with pytest.raises(DomainError):
        fringe_parameters(0.1, 1.5)


def test_phase_through_quarter_coupling():
    dphi, _ = fringe_parameters(math.pi / 4, 0.5)
    assert dphi == pytest.approx(math.pi / 2, abs=1e-15)
    dphi, _ = fringe_parameters(math.pi / 4, -0.5)
    assert dphi == pytest.approx(-math.pi / 2, abs=1e-15)


def test_fringe_observables_fig2_points():
    theta = InteractionStrength.from_geometry(0.1e-9, ELECTRON)
    along = fringe_observables(SpinState.along(X), theta)
    assert 2 * along.delta_phi * 1e3 == pytest.approx(0.11, rel=0.03)
    assert along.visibility == pytest.approx(1.0, abs=1e-15)
    perp = fringe_observables(SpinState.along(Z), theta)
    assert perp.delta_phi == pytest.approx(0.0, abs=1e-20)
    assert perp.visibility == pytest.approx(abs(math.cos(2 * theta.theta)), abs=1e-15)
    anti = fringe_observables(SpinState.along(-X), theta)
    assert anti.delta_phi == pytest.approx(-2 * theta.theta, rel=1e-9)


def test_fig2_symmetries():
    # phase is even about beta = pi and odd about pi/2; visibility is even about both
    theta = 0.2
    beta = np.linspace(0, 2 * math.pi, 73)
    def obs(b):
        return fringe_parameters(theta, np.cos(b))
    dphi, vis = obs(beta)
    dphi_m, vis_m = obs(2 * math.pi - beta)
    np.testing.assert_allclose(dphi, dphi_m, atol=1e-14)
    np.testing.assert_allclose(vis, vis_m, atol=1e-14)
    dphi_r, vis_r = obs(math.pi - beta)
    np.testing.assert_allclose(dphi, -dphi_r, atol=1e-14)
    np.testing.assert_allclose(vis, vis_r, atol=1e-14)


def test_mixture_linearity():
    rng = np.random.default_rng(9)
    for _ in range(50):
        a, b = (SpinState.along(rng.normal(size=3)) for _ in range(2))
        w = rng.uniform()
        mix = SpinState(w * a.rho + (1 - w) * b.rho)
        theta, phi = rng.uniform(0, 1), rng.uniform(0, 2 * math.pi)
        p_mix = detection_probability(theta, phi, sx_expectation(mix))
        p_lin = w * detection_probability(theta, phi, sx_expectation(a)) + \
            (1 - w) * detection_probability(theta, phi, sx_expectation(b))
        assert p_mix == pytest.approx(p_lin, abs=1e-13)


@settings(max_examples=100, deadline=None)
@given(unit_vectors(), st.floats(0, 1), st.floats(0, math.pi), st.floats(0, 2 * math.pi),
       st.floats(0, 1e-10))
def test_composite_matches_closed_form(direction, length, theta, phi, t0):
    spin = SpinState.from_bloch(np.asarray(direction) / np.linalg.norm(direction) * length)
    joint = full_passage(spin, PathState.from_phase(phi), theta, t0, Z_FIELD)
    p = detection_probability(theta, phi, sx_expectation(spin, t0, Z_FIELD))
    assert joint.port_probability("+") == pytest.approx(p, abs=1e-12)
    assert joint.port_probability("+") + joint.port_probability("-") == pytest.approx(1, abs=1e-14)
    assert np.trace(joint.rho4).real == pytest.approx(1, abs=1e-12)


def _field_with_excitation(n_bar):
    omega0 = 1e10
    T = CODATA2018.hbar * omega0 / (CODATA2018.k_B * math.log((1 - n_bar) / n_bar))
    return BiasField(B0=1.0, axis=(1.0, 0.0, 0.0), omega0=omega0), T


def test_thermal_visibility():
    field, T = _field_with_excitation(0.25)
    assert thermal_excitation(field.omega0, T) == pytest.approx(0.25, rel=1e-12)
    approx = thermal_visibility_approx(1e-3, field, T)
    assert approx == pytest.approx(thermal_visibility_exact(1e-3, field, T), abs=1e-9)
    assert thermal_visibility_approx(0.05, field, 1e-9) == 1.0
    hot = BiasField(B0=1.0, axis=(1.0, 0.0, 0.0), omega0=1.0)
    assert thermal_visibility_approx(0.01, hot, 300.0) == pytest.approx(1 - 2e-4, rel=1e-9)
    with pytest.raises(DomainError):
        thermal_visibility_approx(0.01, Z_FIELD, 300.0)


def test_rotation_unitary_is_su2():
    u = rotation_unitary((0.0, 0.6, 0.8), 1.1)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(2), atol=1e-15)
    assert np.linalg.det(u) == pytest.approx(1.0)
    assert SpinState.along(X).expect(SIGMA_X) == pytest.approx(1.0)
