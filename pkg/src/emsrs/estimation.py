"""Shot statistics, precision bounds and estimators for the coupling theta.

Each electron is a Bernoulli trial on the two output ports with success
probability ``p+ = (1 + cos(phi) cos(2theta) + <sx> sin(phi) sin(2theta)) / 2``.
This module provides the Fisher information and Cramer--Rao bound of that
trial, reproducible shot sampling, closed-form maximum-likelihood inversion
of a count record, and least-squares fringe fitting.

Two scikit-learn compatible estimators wrap the fitting steps:
:class:`FringeFitter` (regression of port fractions against ``phi``) and
:class:`ThetaMLE` (theta from port counts).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

from ._validation import check_count, check_positive
from .exceptions import DomainError, FringeFitError
from .quantum import detection_probability
from .rng import binomial_count

__all__ = [
    "ShotRecord",
    "EstimatorResult",
    "FringeFit",
    "fisher_information",
    "crb",
    "sample_shots",
    "invert_probability",
    "estimate_theta_mle",
    "mle_study",
    "fit_fringe",
    "electrons_for_phase",
    "FringeFitter",
    "ThetaMLE",
]


def _amplitude_phase(phi, sx):
    """``R, delta`` with ``2 p+ - 1 = R cos(2 theta - delta)``."""
    R = np.hypot(np.cos(phi), sx * np.sin(phi))
    delta = np.arctan2(sx * np.sin(phi), np.cos(phi))
    return R, delta


def fisher_information(theta, phi, sx_expect):
    """Fisher information ``(d p+/d theta)^2 / (p+ (1 - p+))`` of one electron.

    Written as ``4 R^2 sin^2 u / ((1 - R^2) + R^2 sin^2 u)`` with
    ``u = 2 theta - delta``; where ``p+`` reaches 0 or 1 (``R = 1``,
    ``sin u = 0``) the analytic limit 4 is returned. Vectorised.
    """
    R, delta = _amplitude_phase(np.asarray(phi, float), np.asarray(sx_expect, float))
    u = 2 * np.asarray(theta, float) - delta
    num = 4 * R**2 * np.sin(u) ** 2
    den = (1 - R**2) + R**2 * np.sin(u) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(den > 0, num / np.where(den > 0, den, 1.0), 4.0)
    return float(f) if f.ndim == 0 else f


def crb(theta, phi, sx_expect, N_e):
    """Cramer--Rao bound on ``Var[theta]`` from ``N_e`` electrons.

    Closed form ``[1 - (cos phi cos 2th + sx sin phi sin 2th)^2] /
    (4 N_e (cos phi sin 2th - sx sin phi cos 2th)^2)``. Returns ``inf`` when
    theta is not identifiable at this setting (zero Fisher information).
    """
    N_e = check_count(N_e, "N_e")
    s2, c2 = math.sin(2 * theta), math.cos(2 * theta)
    cp, sp = math.cos(phi), math.sin(phi)
    slope = cp * s2 - sx_expect * sp * c2
    R2 = cp * cp + (sx_expect * sp) ** 2
    # 1 - (2p - 1)^2 = (1 - R^2) + slope^2 avoids cancellation near p = 0, 1
    num = (1.0 - R2) + slope * slope
    if slope == 0:
        return 1.0 / (4.0 * N_e) if num <= 1e-300 else math.inf
    return num / (4.0 * N_e * slope * slope)


@dataclass(frozen=True)
class ShotRecord:
    """Port counts from ``N_e`` electrons at external phase ``phi``."""

    n_plus: int
    n_minus: int
    phi: float
    seed: int
    model_params: tuple  # (theta, sx_expect)
    stream: int = 0

    @property
    def N_e(self):
        return self.n_plus + self.n_minus


def sample_shots(theta, phi, sx_expect, N_e, seed, stream=0, max_workers=None):
    """Draw ``N_e`` port outcomes; bit-reproducible for ``(seed, stream, N_e)``."""
    N_e = check_count(N_e, "N_e")
    p = detection_probability(theta, phi, sx_expect)
    n_plus = binomial_count(N_e, p, seed, stream, max_workers)
    return ShotRecord(n_plus=n_plus, n_minus=N_e - n_plus, phi=float(phi), seed=int(seed),
                      model_params=(float(theta), float(sx_expect)), stream=int(stream))


def invert_probability(p_plus, phi, sx_expect):
    """Closed-form theta from ``p+`` at setting ``(phi, sx)``.

    ``2 p+ - 1 = R cos(2 theta - delta)`` is solved on the monotone branch that
    contains ``theta = 0`` (``theta >= 0`` when ``delta = 0``). Returns
    ``(theta, clamped)``; ``clamped`` is set when ``p+`` lies outside the
    achievable range and was pulled onto its edge.
    """
    R, delta = _amplitude_phase(float(phi), float(sx_expect))
    if R == 0:
        raise DomainError("theta is not identifiable at this setting")
    c = (2.0 * p_plus - 1.0) / R
    clamped = not -1.0 <= c <= 1.0
    c = min(max(c, -1.0), 1.0)
    # arccos near c = 1 loses half the digits; use the half-angle form
    half = math.asin(math.sqrt(max(0.0, (1.0 - c) / 2.0)))
    acos = 2.0 * half if c > 0 else math.acos(c)
    two_theta = delta - acos if delta > 0 else delta + acos
    return 0.5 * two_theta, clamped


@dataclass(frozen=True)
class EstimatorResult:
    """Point estimate with its variance and the CRB it is compared against.

    For a single record ``variance`` is the asymptotic plug-in value
    ``1/(N_e F(theta_hat))``; for a repeated-trial study it is the empirical
    variance across trials.
    """

    theta_hat: float
    variance: float
    n_trials: int
    crb: float
    clamped: bool = False
    estimates: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def efficiency_ratio(self):
        return self.variance / self.crb


def estimate_theta_mle(record, phi=None, sx_expect=None):
    """Maximum-likelihood theta from one count record."""
    phi = record.phi if phi is None else phi
    sx = record.model_params[1] if sx_expect is None else sx_expect
    theta_hat, clamped = invert_probability(record.n_plus / record.N_e, phi, sx)
    bound = crb(theta_hat, phi, sx, record.N_e)
    return EstimatorResult(theta_hat=theta_hat, variance=bound, n_trials=1, crb=bound,
                           clamped=clamped)


def mle_study(theta, phi, sx_expect, N_e, trials, seed, max_workers=None):
    """Repeat sampling and MLE ``trials`` times; trial ``i`` uses stream ``i``."""
    trials = check_count(trials, "trials", minimum=2)
    est = np.empty(trials)
    clamped = False
    for i in range(trials):
        rec = sample_shots(theta, phi, sx_expect, N_e, seed, stream=i, max_workers=max_workers)
        res = estimate_theta_mle(rec)
        est[i] = res.theta_hat
        clamped |= res.clamped
    return EstimatorResult(theta_hat=float(est.mean()), variance=float(est.var(ddof=1)),
                           n_trials=trials, crb=crb(theta, phi, sx_expect, N_e),
                           clamped=clamped, estimates=est)


def electrons_for_phase(delta_phi, snr=1.0, visibility=1.0):
    """Electrons needed to resolve ``delta_phi`` at the projection-noise limit.

    Uses ``sigma_phi = 1 / (V sqrt(N_e))``, i.e. ``N_e = (snr / (V dphi))^2``.
    """
    delta_phi = check_positive(delta_phi, "delta_phi")
    snr = check_positive(snr, "snr")
    visibility = check_positive(visibility, "visibility")
    return (snr / (visibility * delta_phi)) ** 2


class FringeFitter(RegressorMixin, BaseEstimator):
    """Linear least-squares fit of ``p+(phi) = 1/2 + a cos(phi) + b sin(phi)``.

    ``X`` holds the phases ``phi`` (one column), ``y`` the observed port
    fraction ``n+/N``. Pass the electron count per point as
    ``sample_weight`` to get binomial weights and a shot-noise covariance;
    without it the covariance comes from the residual scatter.

    After fitting, ``delta_phi_ = atan2(b, a)`` and ``visibility_ = 2
    sqrt(a^2 + b^2)``, with ``covariance_`` for ``(delta_phi_, visibility_)``.
    ``phase_identifiable_`` is False when the visibility is not resolved
    from zero.
    """

    def __init__(self, min_span=math.pi):
        self.min_span = min_span

    def _design(self, phi):
        return np.column_stack([np.cos(phi), np.sin(phi)])

    def fit(self, X, y, sample_weight=None):
        X = check_array(X, ensure_2d=False, dtype=float)
        phi = X.reshape(-1) if X.ndim == 1 or X.shape[1] == 1 else None
        if phi is None:
            raise ValueError("FringeFitter expects a single phase column")
        y = column_or_1d(y).astype(float)
        if y.shape != phi.shape:
            raise ValueError("X and y have inconsistent lengths")
        distinct = np.unique(np.mod(phi, 2 * np.pi))
        if distinct.size < 3 or _circular_span(distinct) <= self.min_span:
            raise FringeFitError(
                f"need >= 3 distinct phases spanning more than {self.min_span:.3g} rad"
            )
        A = self._design(phi)
        r = y - 0.5
        if sample_weight is None:
            w = np.ones_like(y)
            coef, cov = _wls(A, r, w)
            dof = max(len(y) - 2, 1)
            resid = r - A @ coef
            cov = cov * float(resid @ resid) / dof
        else:
            n = column_or_1d(sample_weight).astype(float)
            coef, _ = _wls(A, r, n)
            # reweight with the binomial variance of the fitted model
            p = np.clip(0.5 + A @ coef, 0.0, 1.0)
            var = np.maximum(p * (1 - p), 1.0 / n**2) / n
            coef, cov = _wls(A, r, 1.0 / var)
        a, b = coef
        amp = math.hypot(a, b)
        self.coef_ = coef
        self.coef_covariance_ = cov
        self.delta_phi_ = math.atan2(b, a)
        self.visibility_ = 2.0 * amp
        if amp > 0:
            J = np.array([[-b / amp**2, a / amp**2], [2 * a / amp, 2 * b / amp]])
            self.covariance_ = J @ cov @ J.T
        else:
            self.covariance_ = np.full((2, 2), np.nan)
        sigma_v = math.sqrt(max(self.covariance_[1, 1], 0.0)) if amp > 0 else math.inf
        self.phase_identifiable_ = bool(amp > 1e-12 and self.visibility_ > 3 * sigma_v)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        phi = check_array(X, ensure_2d=False, dtype=float).reshape(-1)
        return 0.5 + self._design(phi) @ self.coef_


def _circular_span(angles):
    """Length of the shortest arc covering all ``angles`` in [0, 2pi)."""
    a = np.sort(angles)
    gaps = np.diff(np.concatenate([a, [a[0] + 2 * np.pi]]))
    return 2 * np.pi - gaps.max()


def _wls(A, r, w):
    Aw = A * w[:, None]
    normal = A.T @ Aw
    if np.linalg.matrix_rank(normal) < 2:
        raise FringeFitError("fringe design matrix is rank deficient")
    cov = np.linalg.inv(normal)
    return cov @ (Aw.T @ r), cov


@dataclass(frozen=True)
class FringeFit:
    delta_phi: float
    visibility: float
    covariance: np.ndarray = field(repr=False)
    phase_identifiable: bool = True

    @property
    def delta_phi_sigma(self):
        return math.sqrt(self.covariance[0, 0])

    @property
    def visibility_sigma(self):
        return math.sqrt(self.covariance[1, 1])


def fit_fringe(scan):
    """Fit a phase scan given as ``(phi, n_plus, n_minus)`` triples."""
    scan = np.asarray(scan, dtype=float)
    if scan.ndim != 2 or scan.shape[1] != 3:
        raise ValueError("scan must be a sequence of (phi, n_plus, n_minus)")
    n = scan[:, 1] + scan[:, 2]
    if np.any(n <= 0):
        raise DomainError("every scan point needs at least one electron")
    model = FringeFitter().fit(scan[:, 0], scan[:, 1] / n, sample_weight=n)
    return FringeFit(delta_phi=model.delta_phi_, visibility=model.visibility_,
                     covariance=model.covariance_,
                     phase_identifiable=model.phase_identifiable_)


class ThetaMLE(TransformerMixin, BaseEstimator):
    """Closed-form maximum-likelihood estimate of theta from port counts.

    ``X`` rows are ``(n_plus, n_minus)``. ``fit`` pools all rows into one
    estimate (``theta_``, ``crb_``); ``transform`` returns one estimate per
    row.
    """

    def __init__(self, phi=0.0, sx_expect=1.0):
        self.phi = phi
        self.sx_expect = sx_expect

    def _counts(self, X):
        X = check_array(X, dtype=float)
        if X.shape[1] != 2 or np.any(X < 0):
            raise ValueError("X must hold non-negative (n_plus, n_minus) pairs")
        return X

    def fit(self, X, y=None):
        X = self._counts(X)
        n_plus, n_minus = X.sum(axis=0)
        total = int(n_plus + n_minus)
        self.theta_, self.clamped_ = invert_probability(n_plus / total, self.phi, self.sx_expect)
        self.crb_ = crb(self.theta_, self.phi, self.sx_expect, total)
        self.n_electrons_ = total
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "theta_")
        X = self._counts(X)
        p = X[:, 0] / X.sum(axis=1)
        return np.array([[invert_probability(pi, self.phi, self.sx_expect)[0]] for pi in p])
