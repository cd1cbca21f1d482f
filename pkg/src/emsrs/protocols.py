"""Pump-probe protocols, parameter sweeps and tabulated outputs.

Every runner takes a :class:`~emsrs.config.ScenarioConfig` and returns a
:class:`RunResult`: fixed columns, ordered rows, a summary dict and run
metadata. Shot counts for row ``i`` come from random stream ``i`` of the
configured seed, so results do not depend on evaluation order.
"""

import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .config import Pulse, dump_config
from .constants import beam_kinematics, species_by_name
from .ensemble import (
    SpinEnsemble,
    column_phase,
    ds_factor,
    ensemble_crb,
    ensemble_detection_probability,
)
from .estimation import FringeFitter, mle_study
from .exceptions import ConfigError, DomainError
from .magnetostatics import (
    BeamGeometry,
    DipoleSource,
    ab_phase_analytic,
    ab_phase_quadrature,
    deflection_analytic,
    deflection_quadrature,
    validity_limits,
)
from .quantum import (
    BiasField,
    InteractionStrength,
    SpinState,
    fringe_observables,
    mw_pulse,
    sx_expectation,
    thermal_state,
)
from .rng import binomial_count

__all__ = [
    "RunResult",
    "LifetimeWarning",
    "TableRow",
    "prepared_spin",
    "run_protocol_a",
    "run_protocol_b",
    "fringe_sweep",
    "resonance_scan",
    "resonance_signal",
    "beta_sweep",
    "default_table_rows",
    "phase_table",
    "phase_report",
    "validity_report",
    "estimate_study",
]

PI_PULSE = Pulse((0.0, 1.0, 0.0), math.pi)
HALF_PI_PULSE = Pulse((1.0, 0.0, 0.0), math.pi / 2)
_ANGLE_TOL = 1e-9


class LifetimeWarning(UserWarning):
    """The protocol outlasts the configured spin lifetime ``t_life``."""


def _format_cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def _json_value(value):
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_json_value(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


@dataclass
class RunResult:
    """Tabular output of one run."""

    columns: tuple
    rows: list
    summary: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def column(self, name):
        i = self.columns.index(name)
        return np.array([row[i] for row in self.rows])

    def to_csv(self, fh=None):
        """Write CSV (12 significant digits, ``\\n`` line ends); return the text."""
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(_format_cell(v) for v in row) + "\n")
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    def to_dict(self):
        return {
            "columns": list(self.columns),
            "rows": [dict(zip(self.columns, _json_value(list(r)))) for r in self.rows],
            "summary": _json_value(self.summary),
            "metadata": _json_value(self.metadata),
        }

    def to_json(self, fh=None):
        """JSON with the rows, the summary and metadata; non-finite numbers become null."""
        text = json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"
        if fh is not None:
            fh.write(text)
        return text


def _metadata(cfg, kind, **extra):
    meta = {
        "command": kind,
        "seed": cfg.seed,
        "config_hash": cfg.config_hash(),
        "config": dump_config(cfg),
        "versions": {"emsrs": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "warnings": [],
    }
    meta.update(extra)
    return meta


def _setup(cfg):
    species = cfg.spin_species()
    field_ = BiasField.for_species(species, cfg.B0, cfg.bias_axis)
    theta = InteractionStrength.from_geometry(cfg.d, species)
    return species, field_, theta


def prepared_spin(cfg, field_):
    """Initial single-spin state: polarised along the bias axis.

    A pure spin has unit Bloch vector; otherwise the Gibbs state at
    ``cfg.temperature`` is used. ``cfg.polarization`` overrides the length.
    """
    axis = np.asarray(field_.axis)
    if cfg.polarization is not None:
        return SpinState.from_bloch(cfg.polarization * axis)
    if cfg.pure:
        return SpinState.along(axis)
    return thermal_state(field_, cfg.temperature)


def _apply_pulses(state, pulses):
    for p in pulses:
        state = mw_pulse(state, p.axis, p.angle)
    return state


def _pulse_kind(pulses, allowed, protocol):
    if len(pulses) != 1:
        raise ConfigError(f"{protocol} takes exactly one pulse, got {len(pulses)}")
    angle = math.remainder(pulses[0].angle, 2 * math.pi)
    for name, target in (("pi", math.pi), ("pi/2", math.pi / 2)):
        if name in allowed and abs(abs(angle) - target) < _ANGLE_TOL:
            return name
    raise ConfigError(f"{protocol} needs a {' or '.join(allowed)} pulse, got {angle!r} rad")


def _check_axis(field_, index, protocol):
    axis = np.abs(field_.axis)
    if abs(axis[index] - 1.0) > 1e-12:
        got = [round(float(c), 6) for c in field_.axis]
        raise ConfigError(f"{protocol} needs the bias along {'xyz'[index]}, got {got}")


def _t0_seconds(cfg, field_):
    phases = np.asarray(cfg.t0_grid, dtype=float)
    if field_.omega0 == 0:
        if np.any(phases != 0):
            raise DomainError("Larmor-phase t0 grid needs B0 > 0")
        return phases
    return phases / field_.omega0


def _lifetime_gate(cfg, duration, meta):
    if cfg.t_life is not None and duration > cfg.t_life:
        msg = f"protocol lasts {duration:.3g} s, longer than t_life = {cfg.t_life:.3g} s"
        warnings.warn(msg, LifetimeWarning, stacklevel=3)
        meta["warnings"].append(msg)


_RUN_COLUMNS = ("stage", "t0_phase_rad", "t0_s", "phi_rad", "sx_expect", "p_plus_model",
                "n_plus", "n_minus", "delta_phi_model", "visibility_model",
                "delta_phi_fit", "visibility_fit", "delta_phi_fit_sigma", "crb")


def _scan(cfg, stages, theta, field_, max_workers=None):
    """Fringe scans for each ``(stage, t0)``; returns rows and per-group fits."""
    t0s = _t0_seconds(cfg, field_)
    phis = np.asarray(cfg.phi_grid, dtype=float)
    rows, groups = [], {}
    index = 0
    for stage, state in stages:
        ens = SpinEnsemble(cfg.N_S, state)
        for phase, t0 in zip(cfg.t0_grid, t0s):
            ds = ds_factor(ens, theta, t0, field_)
            sx = sx_expectation(state, t0, field_)
            p = ensemble_detection_probability(ds, phis)
            counts = []
            for k, phi in enumerate(phis):
                n_plus = binomial_count(cfg.N_e, p[k], cfg.seed, index, max_workers)
                counts.append(n_plus)
                index += 1
            fit = FringeFitter().fit(phis, np.array(counts) / cfg.N_e,
                                     sample_weight=np.full(len(phis), cfg.N_e))
            sigma = math.sqrt(fit.covariance_[0, 0]) if fit.phase_identifiable_ else math.inf
            groups[(stage, phase)] = (float(np.angle(ds)), abs(ds), fit.delta_phi_, fit.visibility_,
                                      sigma)
            for k, phi in enumerate(phis):
                crb = ensemble_crb(ens, cfg.N_e, theta, phi, t0, field_)
                rows.append((stage, phase, float(t0), float(phi), sx, float(p[k]), counts[k],
                             cfg.N_e - counts[k], float(np.angle(ds)), abs(ds),
                             fit.delta_phi_, fit.visibility_, sigma, crb))
    return rows, groups, float(np.max(t0s))


def run_protocol_a(cfg, max_workers=None):
    """Constant-phase detection with the bias along the interferometer normal.

    Fringes are scanned before and after a single pulse. For a pi pulse the
    summary ``differential_phase`` is ``phase(before) - phase(after)``, which
    for one spin is ``2 arctan(s_x tan 2theta)``. For a pi/2 pulse it is the
    null phase measured after the pulse, expected to vanish.
    """
    species, field_, theta = _setup(cfg)
    _check_axis(field_, 0, "protocol-a")
    pulses = cfg.pulses or (PI_PULSE,)
    variant = _pulse_kind(pulses, ("pi", "pi/2"), "protocol-a")
    spin = prepared_spin(cfg, field_)
    stages = [("before", spin), ("after", _apply_pulses(spin, pulses))]
    rows, groups, duration = _scan(cfg, stages, theta, field_, max_workers)
    meta = _metadata(cfg, "protocol-a", variant=variant)
    _lifetime_gate(cfg, duration, meta)

    first = cfg.t0_grid[0]
    b_model, b_vis, b_fit, b_vfit, b_sig = groups[("before", first)]
    a_model, a_vis, a_fit, a_vfit, a_sig = groups[("after", first)]
    if variant == "pi":
        diff_model, diff_fit = b_model - a_model, b_fit - a_fit
        diff_sigma = math.hypot(b_sig, a_sig)
    else:
        diff_model, diff_fit, diff_sigma = a_model, a_fit, a_sig
    summary = {
        "variant": variant,
        "theta": theta.theta,
        "s_x": spin.bloch[0],
        "differential_phase_model": diff_model,
        "differential_phase_fit": diff_fit,
        "differential_phase_sigma": diff_sigma,
        "visibility_before_model": b_vis,
        "visibility_after_model": a_vis,
        "visibility_before_fit": b_vfit,
        "visibility_after_fit": a_vfit,
    }
    return RunResult(_RUN_COLUMNS, rows, summary, meta)


def run_protocol_b(cfg, max_workers=None):
    """Precession readout with the bias along ``z`` and a pi/2 pulse.

    Before the pulse ``<sx(t0)> = 0``: no phase, visibility
    ``|cos 2theta|^N_S``. After it ``<sx(t0)> = s_z sin(omega0 t0)`` and the
    phase oscillates with extrema ``+-N_S arctan(s_z tan 2theta)``.
    """
    species, field_, theta = _setup(cfg)
    _check_axis(field_, 2, "protocol-b")
    if field_.omega0 == 0:
        raise DomainError("protocol-b needs B0 > 0 for Larmor precession")
    pulses = cfg.pulses or (HALF_PI_PULSE,)
    _pulse_kind(pulses, ("pi/2",), "protocol-b")
    spin = prepared_spin(cfg, field_)
    stages = [("before", spin), ("after", _apply_pulses(spin, pulses))]
    rows, groups, duration = _scan(cfg, stages, theta, field_, max_workers)
    meta = _metadata(cfg, "protocol-b")
    _lifetime_gate(cfg, duration, meta)

    after = [groups[("after", ph)] for ph in cfg.t0_grid]
    before = [groups[("before", ph)] for ph in cfg.t0_grid]
    summary = {
        "theta": theta.theta,
        "s_z": float(spin.bloch @ np.asarray(field_.axis)),
        "phase_before_model": before[0][0],
        "visibility_before_model": before[0][1],
        "visibility_before_fit": before[0][3],
        "phase_amplitude_model": max(abs(g[0]) for g in after),
        "phase_amplitude_fit": max(abs(g[2]) for g in after),
        "visibility_after_model": [g[1] for g in after],
    }
    return RunResult(_RUN_COLUMNS, rows, summary, meta)


def fringe_sweep(cfg):
    """Net fringe phase and visibility versus Larmor phase ``omega0 t0``.

    Uses the prepared spin after the configured pulses (if any).
    """
    species, field_, theta = _setup(cfg)
    spin = _apply_pulses(prepared_spin(cfg, field_), cfg.pulses)
    ens = SpinEnsemble(cfg.N_S, spin)
    rows = []
    for phase, t0 in zip(cfg.t0_grid, _t0_seconds(cfg, field_)):
        ds = ds_factor(ens, theta, t0, field_)
        rows.append((phase, float(t0), sx_expectation(spin, t0, field_),
                     float(np.angle(ds)), abs(ds)))
    cols = ("t0_phase_rad", "t0_s", "sx_expect", "delta_phi_rad", "visibility")
    return RunResult(cols, rows, {"theta": theta.theta}, _metadata(cfg, "fringe"))


def resonance_signal(cfg, omega_e, mode="magnitude", n_pulses=50, lock_phase=math.pi / 2):
    """Integrated phase signal of a train of electron pulses at rate ``omega_e``.

    Pulse ``k`` arrives at ``t_k = (lock_phase + 2 pi k) / omega_e``. Mode
    ``"magnitude"`` averages ``|arg D_S(t_k)|``; ``"coherent"`` takes
    ``|arg mean_k D_S(t_k)|``.
    """
    species, field_, theta = _setup(cfg)
    spin = _apply_pulses(prepared_spin(cfg, field_), cfg.pulses or (HALF_PI_PULSE,))
    return _resonance_signal(cfg, spin, theta, field_, omega_e, mode, n_pulses, lock_phase)


def _resonance_signal(cfg, spin, theta, field_, omega_e, mode, n_pulses, lock_phase):
    if not omega_e > 0:
        raise DomainError("omega_e must be positive")
    ens = SpinEnsemble(cfg.N_S, spin)
    t = (lock_phase + 2 * math.pi * np.arange(n_pulses)) / omega_e
    ds = np.array([ds_factor(ens, theta, tk, field_) for tk in t])
    if mode == "magnitude":
        return float(np.mean(np.abs(np.angle(ds))))
    if mode == "coherent":
        return float(abs(np.angle(np.mean(ds))))
    raise ConfigError(f"resonance mode must be magnitude or coherent, got {mode!r}")


def resonance_scan(cfg, omega_e_grid, mode="magnitude", n_pulses=50, lock_phase=math.pi / 2):
    """Integrated signal versus pulse rate; peaks at ``omega_e = omega0``.

    Odd subharmonics ``omega0 / (2m + 1)`` are equally exact resonances of a
    phase-locked train, so ties are resolved towards the highest rate.
    """
    species, field_, theta = _setup(cfg)
    _check_axis(field_, 2, "resonance")
    pulses = cfg.pulses or (HALF_PI_PULSE,)
    _pulse_kind(pulses, ("pi/2",), "resonance")
    spin = _apply_pulses(prepared_spin(cfg, field_), pulses)
    grid = np.asarray(omega_e_grid, dtype=float)
    if grid.size == 0:
        raise ConfigError("omega_e grid is empty")
    signal = np.array([_resonance_signal(cfg, spin, theta, field_, w, mode, n_pulses, lock_phase)
                       for w in grid])
    top = np.flatnonzero(signal >= signal.max() * (1 - 1e-12))
    best = top[np.argmax(grid[top])]
    rows = [(float(w), float(w - field_.omega0), float(s)) for w, s in zip(grid, signal)]
    meta = _metadata(cfg, "resonance", mode=mode, n_pulses=n_pulses)
    _lifetime_gate(cfg, float(((lock_phase + 2 * math.pi * (n_pulses - 1)) / grid).max()), meta)
    summary = {"omega0": field_.omega0, "argmax_omega_e": float(grid[best]),
               "peak_signal": float(signal[best]), "mode": mode}
    return RunResult(("omega_e_rad_s", "detuning_rad_s", "signal_rad"), rows, summary, meta)


def beta_sweep(cfg, beta_grid):
    """Phase and visibility for a pure spin tilted by ``beta`` from the normal ``e_x``.

    The Bloch vector is ``(cos beta, 0, sin beta)``.
    """
    if not cfg.pure or cfg.polarization is not None or cfg.N_S != 1:
        raise ConfigError("beta-sweep needs a single pure spin")
    theta = InteractionStrength.from_geometry(cfg.d, cfg.spin_species())
    rows = []
    for beta in np.asarray(beta_grid, dtype=float):
        spin = SpinState.from_bloch((math.cos(beta), 0.0, math.sin(beta)))
        obs = fringe_observables(spin, theta)
        rows.append((float(beta), obs.delta_phi, obs.visibility))
    summary = {"theta": theta.theta, "min_visibility": min(r[2] for r in rows)}
    return RunResult(("beta_rad", "delta_phi_rad", "visibility"), rows, summary,
                     _metadata(cfg, "beta-sweep"))


@dataclass(frozen=True)
class TableRow:
    scenario: str
    species: str
    d: float
    N_S: int
    polarization: float


def default_table_rows():
    """The four scenario classes at ``d`` = 0.1 nm and 1 nm."""
    classes = [
        ("single electron", "electron", 1, 1.0),
        ("single H nucleus", "proton", 1, 1.0),
        ("electron column", "electron", 1000, 0.12),
        ("hyperpolarized H column", "proton", 1000, 0.10),
    ]
    return [TableRow(name, sp, d, n, p) for name, sp, n, p in classes for d in (0.1e-9, 1e-9)]


def phase_table(rows=None, preset="paper", cfg=None):
    """Differential phase ``2 dphi_S`` between the two spin orientations per row."""
    rows = default_table_rows() if rows is None else rows
    out = []
    for r in rows:
        species = species_by_name(r.species, preset)
        phase = column_phase(r.N_S, species, r.d, polarization=r.polarization)
        out.append((r.scenario, r.species, r.d, r.N_S, r.polarization, phase, phase * 1e3))
    cols = ("scenario", "species", "d_m", "N_S", "polarization", "two_delta_phi_rad",
            "two_delta_phi_mrad")
    meta = _metadata(cfg, "table") if cfg is not None else {"command": "table"}
    return RunResult(cols, out, {}, meta)


def phase_report(cfg):
    """AB phase (closed form and quadrature) and beam deflection at ``cfg.d``."""
    species = cfg.spin_species()
    kin = beam_kinematics(cfg.beam_energy)
    geometry = BeamGeometry.at_distance(cfg.d, kinematics=kin)
    source = DipoleSource(mu=species.mu)
    analytic = ab_phase_analytic(cfg.d, species.mu)
    quad = ab_phase_quadrature(geometry, source)
    alpha = deflection_analytic(cfg.d, analytic, kin)
    kick = deflection_quadrature(geometry, source)
    alpha_quad = float(np.hypot(*kick)) / kin.momentum
    row = (cfg.d, analytic, quad, 2 * analytic, alpha, alpha_quad)
    cols = ("d_m", "delta_phi_analytic_rad", "delta_phi_quadrature_rad", "two_delta_phi_rad",
            "alpha_analytic_rad", "alpha_quadrature_rad")
    summary = {"two_delta_phi_mrad": 2e3 * analytic, "alpha_nrad": alpha * 1e9}
    return RunResult(cols, [row], summary, _metadata(cfg, "phase"))


def validity_report(cfg, margin=10.0):
    species = cfg.spin_species()
    kin = beam_kinematics(cfg.beam_energy)
    rep = validity_limits(cfg.d, species, species.gamma * cfg.B0, kin, cfg.dz, cfg.dr_perp, margin)
    cols = ("delta_y_max_m", "kick_ratio", "kick_ok", "distance_ratio", "distance_ok", "ok")
    row = (rep.delta_y_max, rep.kick_ratio, rep.kick_ok, rep.distance_ratio, rep.distance_ok,
           rep.ok)
    return RunResult(cols, [row], {"ok": rep.ok, "margin": margin}, _metadata(cfg, "check"))


def estimate_study(cfg, theta, phi, sx_expect, trials, max_workers=None):
    """Monte Carlo MLE study against the Cramer--Rao bound."""
    res = mle_study(theta, phi, sx_expect, cfg.N_e, trials, cfg.seed, max_workers)
    ratio = res.variance / res.crb
    row = (theta, phi, sx_expect, cfg.N_e, trials, res.theta_hat, res.variance, res.crb, ratio,
           res.variance * 4 * cfg.N_e, res.clamped)
    cols = ("theta_true_rad", "phi_rad", "sx_expect", "N_e", "trials", "theta_hat_mean_rad",
            "variance_rad2", "crb_rad2", "variance_over_crb", "variance_times_4Ne", "clamped")
    summary = {"variance_over_crb": ratio, "crb": res.crb}
    return RunResult(cols, [row], summary, _metadata(cfg, "estimate"))
