"""Mask-weighted covariance estimation and distortionless beamforming.

Two filter forms are supported per frequency bin: a trace-normalized form
that needs no explicit steering vector, and the standard distortionless
form built from a steering vector estimated by power iteration on the
noise-whitened target covariance.  The minimized power is weighted either
by the noise mask (MVDR) or by the reciprocal of the target's
time-varying power (wMPDR); everything else is shared.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DegenerateSignalError, SingularMatrixError
from .linalg import csolve, diag_load, hermitize, power_iter_maxeig_stack
from .validation import as_spectrogram, as_weights

_SILENT_TRACE = 1e-30

VARIANTS = ("mvdr", "wmpdr")
FORMULAS = ("with_sv", "without_sv")


def covariance(spec, weights):
    """Weighted spatial covariance per bin: normalized, then hermitized.

    spec: complex (T, F, C) tensor (or SpectroTensor); weights: (T, F)
    nonnegative.  Raises DegenerateSignalError when the weight sum at some
    bin is below 1e-30 (an all-zero mask that escaped flooring).
    """
    x = as_spectrogram(spec.data if hasattr(spec, "data") else spec)
    t, f, c = x.shape
    weights = as_weights(weights, t, f)
    wsum = weights.sum(axis=0)
    if np.any(wsum < 1e-30):
        raise DegenerateSignalError(
            "covariance weights sum to zero",
            frequency_bin=int(np.argmax(wsum < 1e-30)))
    weighted = (x * weights[:, :, None]).transpose(1, 2, 0)   # (F, C, T)
    phi = np.matmul(weighted, np.conj(x.transpose(1, 0, 2)))
    phi /= wsum[:, None, None]
    return hermitize(phi)


def _solve_loaded(phi, rhs, eps, stage):
    try:
        return csolve(diag_load(phi, eps), rhs)
    except SingularMatrixError as err:
        raise err.with_context(frequency_bin=err.batch_index,
                               stage=stage) from None


def steering_vector(phi_noise, phi_target, iters=2, diag_eps=1e-8,
                    seed_vec=None):
    """Per-bin steering vectors from the dominant noise-whitened direction.

    Runs power iteration on solve(phi_noise', phi_target) and maps the
    unit eigenvector back through phi_noise.  The seed defaults to the
    normalized all-ones vector, keeping runs deterministic.
    """
    phi_noise = np.asarray(phi_noise, dtype=np.complex128)
    phi_target = np.asarray(phi_target, dtype=np.complex128)
    c = phi_noise.shape[-1]
    if seed_vec is None:
        seed_vec = np.ones(c) / np.sqrt(c)
    whitened = _solve_loaded(phi_noise, phi_target, diag_eps,
                             "steering_vector")
    principal = power_iter_maxeig_stack(whitened, iters, seed_vec)
    return np.einsum("...ij,...j->...i", phi_noise, principal)


def filter_wo_sv(phi_n, phi_s, u, diag_eps=1e-8):
    """Trace-normalized filters without an explicit steering vector.

    Per bin: T = solve(phi_n', phi_s); w = (T / Trace(T)) @ u with ``u`` a
    one-hot reference-channel selector.  A trace below 1e-12 of the matrix
    norm signals degenerate target statistics.
    """
    phi_n = np.asarray(phi_n, dtype=np.complex128)
    phi_s = np.asarray(phi_s, dtype=np.complex128)
    u = np.asarray(u, dtype=np.complex128)
    ratio = _solve_loaded(phi_n, phi_s, diag_eps, "filter_wo_sv")
    trace = np.trace(ratio, axis1=-2, axis2=-1)
    norm = np.sqrt((np.abs(ratio) ** 2).sum(axis=(-2, -1)))
    bad = np.abs(trace) < 1e-12 * norm
    if np.any(bad):
        raise DegenerateSignalError(
            "near-zero trace in trace-normalized filter",
            frequency_bin=int(np.argmax(bad)), stage="filter_wo_sv")
    return np.einsum("...ij,j->...i", ratio, u) / trace[..., None]


def filter_with_sv(phi_n, steering, ref_channel, diag_eps=1e-8):
    """Distortionless filters from explicit steering vectors.

    Per bin: a = solve(phi_n', v); w = a / (v^H a) * conj(v[q]), which
    pins w^H v to v[q] exactly (unit response at the reference channel).
    """
    phi_n = np.asarray(phi_n, dtype=np.complex128)
    steering = np.asarray(steering, dtype=np.complex128)
    a = _solve_loaded(phi_n, steering, diag_eps, "filter_with_sv")
    denom = np.einsum("...i,...i->...", np.conj(steering), a)
    bad = np.abs(denom) < 1e-30
    if np.any(bad):
        raise DegenerateSignalError(
            "zero denominator in distortionless filter",
            frequency_bin=int(np.argmax(bad)), stage="filter_with_sv")
    ref = np.conj(steering[..., ref_channel])
    return a * (ref / denom)[..., None]


def apply_filter(spec, filters):
    """Beamform: out[t, f] = w_f^H x[t, f]; returns a (T, F) array."""
    x = as_spectrogram(spec.data if hasattr(spec, "data") else spec)
    filters = np.asarray(filters, dtype=np.complex128)
    if filters.shape != (x.shape[1], x.shape[2]):
        raise ValueError(
            f"filters shape {filters.shape} does not match (bins, channels)"
            f" = {x.shape[1:]}")
    return np.einsum("fc,tfc->tf", np.conj(filters), x)


class Beamformer(BaseEstimator, TransformerMixin):
    """Estimator wrapper around covariance estimation and filter design.

    ``fit`` takes a complex (T, F, C) tensor plus (T, F) target and noise
    weights (channel-averaged or frequency-constant masks) and computes
    per-bin filters; ``transform`` applies them, returning (T, F).  wMPDR
    additionally needs the target's time-varying ``power`` map, whose
    reciprocal weights the minimized covariance.

    ``ref_channel`` is 1-based, matching the pipeline configuration.
    Bins whose covariance trace is below 1e-30 (digital silence) get a
    zero filter instead of a singular solve.
    """

    def __init__(self, variant="mvdr", formula="with_sv", ref_channel=1,
                 diag_eps=1e-8, sv_power_iters=2):
        self.variant = variant
        self.formula = formula
        self.ref_channel = ref_channel
        self.diag_eps = diag_eps
        self.sv_power_iters = sv_power_iters

    def _check_params(self, channels):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.formula not in FORMULAS:
            raise ValueError(f"formula must be one of {FORMULAS}")
        if not 1 <= self.ref_channel <= channels:
            raise ValueError(
                f"ref_channel must be in [1, {channels}], got "
                f"{self.ref_channel}")
        if self.sv_power_iters < 1:
            raise ValueError("sv_power_iters must be >= 1")

    def fit(self, X, y=None, *, target_weights, noise_weights, power=None):
        x = as_spectrogram(X)
        t, f, c = x.shape
        self._check_params(c)
        q = self.ref_channel - 1
        phi_s = covariance(x, target_weights)
        phi_noise = covariance(x, noise_weights)
        if self.variant == "wmpdr":
            if power is None:
                raise ValueError("wMPDR requires the target power map")
            power = as_weights(power, t, f, "power")
            if np.any(power <= 0):
                raise ValueError("power map must be strictly positive")
            phi_n = covariance(x, 1.0 / power)
        else:
            phi_n = phi_noise
        active = ((np.abs(np.trace(phi_n, axis1=-2, axis2=-1))
                   > _SILENT_TRACE)
                  & (np.abs(np.trace(phi_s, axis1=-2, axis2=-1))
                     > _SILENT_TRACE))
        filters = np.zeros((f, c), dtype=np.complex128)
        steering = None
        if np.any(active):
            idx = np.flatnonzero(active)
            try:
                if self.formula == "with_sv":
                    steering = np.zeros((f, c), dtype=np.complex128)
                    sv = steering_vector(phi_noise[idx], phi_s[idx],
                                         self.sv_power_iters, self.diag_eps)
                    steering[idx] = sv
                    filters[idx] = filter_with_sv(phi_n[idx], sv, q,
                                                  self.diag_eps)
                else:
                    u = np.zeros(c, dtype=np.complex128)
                    u[q] = 1.0
                    filters[idx] = filter_wo_sv(phi_n[idx], phi_s[idx], u,
                                                self.diag_eps)
            except (SingularMatrixError, DegenerateSignalError) as err:
                if err.frequency_bin is not None:
                    raise err.with_context(
                        frequency_bin=int(idx[err.frequency_bin])) from None
                raise
        self.target_covariance_ = phi_s
        self.noise_covariance_ = phi_n
        self.steering_ = steering
        self.filters_ = filters
        return self

    def transform(self, X):
        if not hasattr(self, "filters_"):
            raise AttributeError("Beamformer is not fitted yet")
        return apply_filter(X, self.filters_)
