"""Mask computation, regularization, and file I/O.

Three mask families drive the pipeline per speaker: a dereverberation
mask (weights the time-varying power estimate), a beamformer target mask
and a beamformer noise mask (weight the spatial covariances).  The neural
estimator is replaced by oracle magnitude-ratio masks computed from
simulator ground truth, or by masks loaded from file.
"""

import dataclasses
import struct

import numpy as np

from .audio_io import AudioBuffer
from .errors import MaskFileError
from .stft import stft
from .validation import check_mask_values

ROLES = ("wpe", "bf_target", "bf_noise")

_MASK_MAGIC = b"CBMK"
_MAX_DIM = 1 << 24


@dataclasses.dataclass
class MaskSet:
    """Per-speaker mask triple, each of shape (frames, bins, channels)."""

    wpe: np.ndarray
    target: np.ndarray
    noise: np.ndarray
    speaker: int = 0


def oracle_masks(truth, mixture, delta=1e-10, vad=False):
    """Oracle masks from simulator ground truth.

    Per-channel time-frequency masks (the default) are magnitude ratios:
    each speaker's target mask is its early-image magnitude over the total
    component magnitude (all early images, summed late reverberation,
    noise, plus a small ``delta`` guard); the noise mask is its complement
    and the dereverberation mask targets the same direct+early energy.

    With ``vad=True`` the same ratio is computed on per-frame energies
    (|STFT|^2 summed over bins and channels), yielding one soft activity
    value per frame -- the oracle stand-in for an estimator that shares
    its value across the frequency axis.

    Returns a list of MaskSet, one per speaker, with the STFT framing of
    ``mixture``.
    """
    def grid(buf):
        return stft(buf, mixture.window_len, mixture.shift,
                    mixture.transform_len)

    if not truth.early:
        raise ValueError("truth contains no speakers")
    early_specs = [grid(e).data for e in truth.early]
    shape = mixture.data.shape
    if early_specs[0].shape != shape:
        raise ValueError(
            f"truth framing {early_specs[0].shape} does not match mixture "
            f"{shape}")
    late_sum = np.zeros(truth.late[0].data.shape)
    for part in truth.late:
        late_sum = late_sum + part.data
    late_spec = grid(AudioBuffer(late_sum, truth.late[0].sample_rate)).data
    noise_spec = grid(truth.noise).data
    sets = []
    if vad:
        early_pow = [np.sum(np.abs(s) ** 2, axis=(1, 2)) for s in early_specs]
        denom = sum(early_pow) + np.sum(np.abs(late_spec) ** 2, axis=(1, 2)) \
            + np.sum(np.abs(noise_spec) ** 2, axis=(1, 2)) + delta
        for j, pow_j in enumerate(early_pow):
            activity = np.clip(pow_j / denom, 0.0, 1.0)
            sets.append(MaskSet(wpe=activity.copy(), target=activity,
                                noise=1.0 - activity, speaker=j))
        return sets
    denom = (sum(np.abs(s) for s in early_specs) + np.abs(late_spec)
             + np.abs(noise_spec) + delta)
    for j, spec_j in enumerate(early_specs):
        target = np.clip(np.abs(spec_j) / denom, 0.0, 1.0)
        sets.append(MaskSet(wpe=target.copy(), target=target,
                            noise=1.0 - target, speaker=j))
    return sets


def floor_mask(values, xi):
    """Entrywise lower bound Maximum(values, xi); idempotent."""
    if not 0.0 <= xi < 1.0:
        raise ValueError("flooring factor must satisfy 0 <= xi < 1")
    values = check_mask_values(values)
    return np.maximum(values, xi)


def channel_average(values):
    """Average a per-channel (T, F, C) mask over channels -> (T, F)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 3:
        raise ValueError("channel_average expects a (T, F, C) mask")
    return values.mean(axis=2)


def vad_collapse(values):
    """Collapse a (T, F) or (T, F, C) mask to one soft value per frame.

    The per-frame value is the mean over frequency (and channels when
    present); broadcasting it back over frequency yields a mask that is
    constant along the frequency axis, which removes any per-frequency
    speaker permutation the mask could express.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 3:
        return values.mean(axis=(1, 2))
    if values.ndim == 2:
        return values.mean(axis=1)
    raise ValueError("vad_collapse expects a (T, F) or (T, F, C) mask")


def broadcast_vad(frame_values, bins):
    """Expand per-frame values (T,) to a frequency-constant (T, F) mask."""
    frame_values = np.asarray(frame_values, dtype=np.float64)
    if frame_values.ndim != 1:
        raise ValueError("expected per-frame values of shape (T,)")
    return np.repeat(frame_values[:, None], bins, axis=1)


def save_mask(path, values, role, speaker=0):
    """Write one mask tensor in the binary mask file format.

    Layout (little-endian): magic "CBMK", version u32 = 1, role u8
    (0 = wpe, 1 = bf_target, 2 = bf_noise), speaker u8, rank u8, the dims
    as u32 in (T, F, C) order as applicable, then float64 values in
    C-order (t-major, then f, then c).
    """
    if role not in ROLES:
        raise ValueError(f"role must be one of {ROLES}")
    values = check_mask_values(values)
    if values.ndim not in (1, 2, 3):
        raise ValueError("mask rank must be 1, 2, or 3")
    with open(path, "wb") as fh:
        fh.write(_MASK_MAGIC)
        fh.write(struct.pack("<IBBB", 1, ROLES.index(role), speaker,
                             values.ndim))
        fh.write(struct.pack(f"<{values.ndim}I", *values.shape))
        fh.write(values.astype("<f8").tobytes())


def load_mask(path):
    """Read a mask file; returns (values, role, speaker).

    Rejects bad magic, truncated payloads, oversized dims, and any value
    outside [0, 1] (the first offending index is named).
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 11:
        raise MaskFileError(f"{path}: truncated header")
    if raw[:4] != _MASK_MAGIC:
        raise MaskFileError(f"{path}: bad magic {raw[:4]!r}")
    version, role_id, speaker, rank = struct.unpack("<IBBB", raw[4:11])
    if version != 1:
        raise MaskFileError(f"{path}: unsupported version {version}")
    if role_id >= len(ROLES):
        raise MaskFileError(f"{path}: unknown role id {role_id}")
    if rank not in (1, 2, 3):
        raise MaskFileError(f"{path}: invalid rank {rank}")
    dim_end = 11 + 4 * rank
    if len(raw) < dim_end:
        raise MaskFileError(f"{path}: truncated dimension header")
    dims = struct.unpack(f"<{rank}I", raw[11:dim_end])
    if any(d == 0 or d > _MAX_DIM for d in dims):
        raise MaskFileError(f"{path}: dimension overflow {dims}")
    count = int(np.prod(dims, dtype=np.int64))
    if count > _MAX_DIM:
        raise MaskFileError(f"{path}: total size overflow {dims}")
    expected = dim_end + 8 * count
    if len(raw) != expected:
        raise MaskFileError(
            f"{path}: payload length {len(raw) - dim_end} does not match "
            f"dims {dims}")
    values = np.frombuffer(raw[dim_end:], dtype="<f8").reshape(dims)
    bad = (values < 0.0) | (values > 1.0) | ~np.isfinite(values)
    if bad.any():
        idx = tuple(int(i) for i in
                    np.unravel_index(int(np.argmax(bad)), values.shape))
        raise MaskFileError(
            f"{path}: value {values[idx]} at index {idx} outside [0, 1]")
    return values.copy(), ROLES[role_id], speaker
