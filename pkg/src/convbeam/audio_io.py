"""Audio containers and WAV / binary artifact I/O."""

import dataclasses
import struct

import numpy as np
from scipy.io import wavfile

from .errors import ConvbeamError
from .validation import check_audio_data

_STEER_MAGIC = b"CBSV"


@dataclasses.dataclass
class AudioBuffer:
    """Multichannel time-domain audio.

    data: float64 array of shape (samples, channels); sample_rate in Hz.
    """

    data: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.data = check_audio_data(self.data)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def num_samples(self):
        return self.data.shape[0]

    @property
    def channels(self):
        return self.data.shape[1]

    def channel(self, c):
        """Return channel ``c`` as a 1-D array."""
        return self.data[:, c]

    @classmethod
    def mono(cls, samples, sample_rate):
        samples = np.asarray(samples, dtype=np.float64)
        return cls(samples.reshape(-1, 1), sample_rate)


def read_wav(path):
    """Read a 16-bit PCM or 32/64-bit float WAV into an AudioBuffer."""
    rate, data = wavfile.read(path)
    if data.ndim == 1:
        data = data[:, None]
    if data.dtype == np.int16:
        data = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        data = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        data = data.astype(np.float64)
    else:
        raise ConvbeamError(f"unsupported WAV sample format {data.dtype}")
    return AudioBuffer(data, int(rate))


def write_wav(path, audio, fmt="float32"):
    """Write an AudioBuffer as float32 (default) or int16 WAV.

    int16 output is clipped, not dithered, so runs stay reproducible.
    """
    data = audio.data
    if fmt == "float32":
        wavfile.write(path, audio.sample_rate, data.astype(np.float32))
    elif fmt == "int16":
        scaled = np.clip(np.round(data * 32767.0), -32768, 32767)
        wavfile.write(path, audio.sample_rate, scaled.astype(np.int16))
    else:
        raise ConvbeamError(f"unknown WAV format {fmt!r}")


def write_steering_vectors(path, steering):
    """Write per-speaker steering vectors (J, F, C) complex128 to binary.

    Layout (little-endian): magic "CBSV", version u32 = 1, J/F/C as u32,
    then J*F*C (re, im) float64 pairs in speaker-major order.
    """
    steering = np.asarray(steering, dtype=np.complex128)
    if steering.ndim != 3:
        raise ValueError("steering must have shape (speakers, bins, channels)")
    j, f, c = steering.shape
    with open(path, "wb") as fh:
        fh.write(_STEER_MAGIC)
        fh.write(struct.pack("<IIII", 1, j, f, c))
        inter = np.empty(steering.shape + (2,), dtype="<f8")
        inter[..., 0] = steering.real
        inter[..., 1] = steering.imag
        fh.write(inter.tobytes())


def read_steering_vectors(path):
    """Inverse of :func:`write_steering_vectors`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _STEER_MAGIC:
            raise ConvbeamError(f"bad steering-vector magic {magic!r}")
        header = fh.read(16)
        if len(header) != 16:
            raise ConvbeamError("truncated steering-vector header")
        version, j, f, c = struct.unpack("<IIII", header)
        if version != 1:
            raise ConvbeamError(f"unsupported steering-vector version {version}")
        payload = fh.read()
    expected = j * f * c * 16
    if len(payload) != expected:
        raise ConvbeamError("truncated steering-vector payload")
    flat = np.frombuffer(payload, dtype="<f8").reshape(j, f, c, 2)
    return flat[..., 0] + 1j * flat[..., 1]
