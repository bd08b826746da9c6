"""Mask-weighted multichannel linear-prediction dereverberation.

Per frequency bin, a delayed multichannel context of the input is used to
predict (and subtract) the late reverberation, with frames weighted by
the inverse of the speaker's time-varying power.  The correlation system
is hermitized, diagonally loaded, and solved through the stabilized real
embedding.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import SingularMatrixError
from .linalg import csolve, diag_load, hermitize
from .validation import as_spectrogram, as_weights

# Relative floor bounds the per-frequency inverse-power weight spread at
# 20 dB; without it, near-silent frames dominate the correlation and the
# prediction overfits unpredictable noise.
POWER_FLOOR_REL = 1e-2
POWER_FLOOR_ABS = 1e-15
_SILENT_TRACE = 1e-30


def _floor_power(power):
    """Per-frequency relative floor plus an absolute floor."""
    peak = power.max(axis=0, keepdims=True)
    return np.maximum(power, np.maximum(POWER_FLOOR_REL * peak,
                                        POWER_FLOOR_ABS))


def estimate_power(spec, mask):
    """Time-varying power of the desired signal from a weighted periodogram.

    Each channel's mask is normalized by its per-(bin, channel) time mean
    before weighting |Y|^2, so any constant mask scaling cancels; the
    channel mean of the weighted powers is returned, floored per frequency
    (relative 1e-2 to the peak) and absolutely at 1e-15.

    ``mask`` is per-channel (T, F, C), channel-shared (T, F), or a
    per-frame vector (T,) broadcast over bins and channels
    (frequency-constant masks).
    """
    x = as_spectrogram(spec.data if hasattr(spec, "data") else spec)
    t, f, c = x.shape
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim == 1:
        if mask.shape[0] != t:
            raise ValueError("per-frame mask length must equal frame count")
        mask = np.broadcast_to(mask[:, None, None], (t, f, c))
    elif mask.ndim == 2:
        if mask.shape != (t, f):
            raise ValueError(
                f"mask shape {mask.shape} does not match frames/bins "
                f"({t}, {f})")
        mask = np.broadcast_to(mask[:, :, None], (t, f, c))
    if mask.shape != (t, f, c):
        raise ValueError(f"mask shape {mask.shape} does not match {x.shape}")
    mean = mask.mean(axis=0, keepdims=True)
    mean = np.maximum(mean, 1e-300)
    power = ((mask / mean) * (x.real ** 2 + x.imag ** 2)).mean(axis=2)
    return _floor_power(power)


def delayed_context(x, taps, delay):
    """Stack delayed frames into the prediction context.

    x: (T, F, C) -> (T, F, taps*C) where block k holds the frames delayed
    by ``delay + k``; positions before the first frame are zero.
    """
    t, f, c = x.shape
    out = np.zeros((t, f, taps * c), dtype=x.dtype)
    for k in range(taps):
        d = delay + k
        if d < t:
            out[d:, :, k * c:(k + 1) * c] = x[:t - d]
    return out


def dereverb_filters(x, power, taps, delay, diag_eps):
    """One pass of the weighted prediction-filter computation.

    Builds the inverse-power-weighted correlation of the delayed context
    (R) and its cross-correlation with the current frame (P) per bin, and
    solves the hermitized, loaded system for the (taps*C, C) filters.
    Bins with no context energy get zero filters (pass-through); a solve
    failure is reported with its frequency bin.
    """
    t, f, c = x.shape
    context = delayed_context(x, taps, delay)
    weighted = context * (1.0 / power)[:, :, None]
    wgt_t = weighted.transpose(1, 2, 0)           # (F, KC, T)
    corr = np.matmul(wgt_t, np.conj(context.transpose(1, 0, 2)))
    cross = np.matmul(wgt_t, np.conj(x.transpose(1, 0, 2)))
    corr = diag_load(hermitize(corr), diag_eps)
    filters = np.zeros((f, taps * c, c), dtype=np.complex128)
    active = np.abs(np.trace(corr, axis1=-2, axis2=-1)) > _SILENT_TRACE
    if np.any(active):
        try:
            filters[active] = csolve(corr[active], cross[active])
        except SingularMatrixError as err:
            bins = np.flatnonzero(active)
            raise err.with_context(
                frequency_bin=int(bins[err.batch_index]),
                stage="wpe") from None
    return filters


def apply_dereverb_filters(x, filters, taps, delay):
    """Subtract the filtered delayed context: out_t = x_t - G^H ctx_t."""
    context = delayed_context(x, taps, delay)
    pred = np.matmul(context.transpose(1, 0, 2),
                     np.conj(filters))             # (F, T, C)
    return x - pred.transpose(1, 0, 2)


def wpe_filter(spec, power, taps=5, delay=3, iterations=1, diag_eps=1e-3):
    """Full dereverberation: filter computation plus application.

    When ``iterations`` > 1, the power map is re-estimated between passes
    from the channel-mean output magnitude (floored like the input map).
    Returns a SpectroTensor with the same shape as the input.
    """
    est = WpeDereverberator(taps=taps, delay=delay, iterations=iterations,
                            diag_eps=diag_eps)
    est.fit(spec.data, power=power)
    return spec.with_data(est.transform(spec.data))


class WpeDereverberator(BaseEstimator, TransformerMixin):
    """Estimator wrapper around the prediction-filter dereverberation.

    ``fit`` computes the per-frequency filters from a complex (T, F, C)
    tensor and its (T, F) power map; ``transform`` subtracts the predicted
    late reverberation from any tensor with matching layout.

    Parameters
    ----------
    taps : filter taps per channel (K).
    delay : prediction delay in frames; keeps the direct path and early
        reflections untouched.
    iterations : filter re-estimation passes; from the second pass the
        power map comes from the current output magnitude.
    diag_eps : diagonal-loading factor for the correlation solve.
    """

    def __init__(self, taps=5, delay=3, iterations=1, diag_eps=1e-3):
        self.taps = taps
        self.delay = delay
        self.iterations = iterations
        self.diag_eps = diag_eps

    def fit(self, X, y=None, *, power):
        x = as_spectrogram(X)
        if self.taps < 1 or self.delay < 1 or self.iterations < 1:
            raise ValueError("taps, delay, and iterations must be >= 1")
        if x.shape[0] <= self.delay + self.taps:
            raise ValueError(
                f"need more than delay + taps = {self.delay + self.taps} "
                f"frames, got {x.shape[0]}")
        power = as_weights(power, x.shape[0], x.shape[1], "power")
        out = x
        for it in range(self.iterations):
            if it > 0:
                power = _floor_power(
                    (out.real ** 2 + out.imag ** 2).mean(axis=2))
            self.filters_ = dereverb_filters(x, power, self.taps, self.delay,
                                             self.diag_eps)
            out = apply_dereverb_filters(x, self.filters_, self.taps,
                                         self.delay)
        return self

    def transform(self, X):
        if not hasattr(self, "filters_"):
            raise AttributeError("WpeDereverberator is not fitted yet")
        x = as_spectrogram(X)
        return apply_dereverb_filters(x, self.filters_, self.taps, self.delay)
