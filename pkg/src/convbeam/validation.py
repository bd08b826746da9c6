"""Input validation helpers used across the estimator and functional APIs."""

import numpy as np


def check_finite(arr, name="array"):
    """Raise ValueError if ``arr`` contains NaN or Inf."""
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def as_complex_stack(phi, name="phi"):
    """Coerce to a complex128 stack of square matrices (..., m, m)."""
    phi = np.asarray(phi, dtype=np.complex128)
    if phi.ndim < 2:
        raise ValueError(f"{name} must have at least 2 dimensions")
    if phi.shape[-1] != phi.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {phi.shape}")
    if phi.shape[-1] == 0:
        raise ValueError(f"{name} dimensions must be positive")
    check_finite(phi, name)
    return phi


def as_complex_vector(v, name="vector"):
    """Coerce to a finite complex128 1-D vector."""
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-D vector")
    check_finite(v, name)
    return v


def as_spectrogram(x, name="spectrogram"):
    """Coerce to a complex128 (frames, bins, channels) tensor."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim != 3:
        raise ValueError(
            f"{name} must have shape (frames, bins, channels), got {x.shape}")
    if min(x.shape) == 0:
        raise ValueError(f"{name} has an empty dimension: {x.shape}")
    return x


def as_weights(w, frames, bins, name="weights"):
    """Coerce to nonnegative float64 (frames, bins) weights."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (frames, bins):
        raise ValueError(
            f"{name} must have shape ({frames}, {bins}), got {w.shape}")
    check_finite(w, name)
    if np.any(w < 0):
        raise ValueError(f"{name} must be nonnegative")
    return w


def check_mask_values(values, name="mask"):
    """Validate mask values lie in [0, 1]; returns float64 view."""
    values = np.asarray(values, dtype=np.float64)
    check_finite(values, name)
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        bad = tuple(int(i) for i in np.unravel_index(
            int(np.argmax((values < 0.0) | (values > 1.0))), values.shape))
        raise ValueError(f"{name} value {values[bad]} at index {bad} is "
                         "outside [0, 1]")
    return values


def check_audio_data(data, name="audio"):
    """Coerce to float64 (samples, channels) with finite entries."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2:
        raise ValueError(f"{name} must be 1-D or (samples, channels)")
    check_finite(data, name)
    return data
