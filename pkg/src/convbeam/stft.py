"""STFT analysis/synthesis between multichannel audio and the complex
time-frequency domain.

Analysis uses a periodic Hann window; frames start at multiples of the
shift and the tail is zero-padded so the frame count is ceil(len / shift).
The transform length may exceed the window length (zero-padded window),
e.g. a 400-sample window with a 512-point transform yields 257 bins.
Synthesis is weighted overlap-add with per-sample window-square
normalization, which reconstructs interior samples exactly.
"""

import dataclasses
import math

import numpy as np

from .audio_io import AudioBuffer


@dataclasses.dataclass
class SpectroTensor:
    """Complex STFT tensor indexed (frame, bin, channel) plus its framing.

    ``n_samples`` remembers the analyzed signal length so synthesis can
    trim the overlap-add tail.
    """

    data: np.ndarray
    sample_rate: int
    window_len: int
    shift: int
    transform_len: int
    n_samples: int | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 3:
            raise ValueError("data must have shape (frames, bins, channels)")
        if self.frames < 1 or self.channels < 1:
            raise ValueError("frames and channels must be >= 1")
        if self.bins != self.transform_len // 2 + 1:
            raise ValueError(
                f"bins {self.bins} inconsistent with transform length "
                f"{self.transform_len}")

    @property
    def frames(self):
        return self.data.shape[0]

    @property
    def bins(self):
        return self.data.shape[1]

    @property
    def channels(self):
        return self.data.shape[2]

    def with_data(self, data):
        """Same framing metadata around new (frames, bins, channels) data."""
        return dataclasses.replace(self, data=np.asarray(data,
                                                         dtype=np.complex128))


def periodic_hann(n):
    """Periodic (DFT-even) Hann window of length n."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft(audio, window_len=400, shift=160, transform_len=None):
    """Analyze an AudioBuffer into a SpectroTensor.

    transform_len defaults to window_len; when larger, the windowed frame
    is zero-padded before the transform (512 with a 400-sample window gives
    the 257-bin layout used throughout the pipeline).
    """
    if audio.num_samples == 0:
        raise ValueError("audio is empty")
    if shift < 1 or shift > window_len:
        raise ValueError("require window_len >= shift >= 1")
    if transform_len is None:
        transform_len = window_len
    if transform_len < window_len:
        raise ValueError("transform_len must be >= window_len")
    x = audio.data
    n = x.shape[0]
    frames = math.ceil(n / shift)
    padded_len = (frames - 1) * shift + window_len
    padded = np.zeros((padded_len, x.shape[1]))
    padded[:n] = x
    idx = np.arange(window_len)[None, :] + shift * np.arange(frames)[:, None]
    segments = padded[idx]                      # (T, window_len, C)
    windowed = segments * periodic_hann(window_len)[None, :, None]
    spec = np.fft.rfft(windowed, n=transform_len, axis=1)
    return SpectroTensor(spec, audio.sample_rate, window_len, shift,
                         transform_len, n_samples=n)


def istft(spec):
    """Synthesize a SpectroTensor back to an AudioBuffer.

    Weighted overlap-add: each inverse frame is re-windowed with the
    analysis window and the accumulated signal is divided by the
    overlapped window-square sum, i.e. the synthesis window is the
    analysis window normalized for unit overlap-add at this shift.
    """
    window = periodic_hann(spec.window_len)
    frames = np.fft.irfft(spec.data, n=spec.transform_len, axis=1)
    frames = frames[:, :spec.window_len, :] * window[None, :, None]
    out_len = (spec.frames - 1) * spec.shift + spec.window_len
    y = np.zeros((out_len, spec.channels))
    wsum = np.zeros(out_len)
    wsq = window * window
    for t in range(spec.frames):
        start = t * spec.shift
        y[start:start + spec.window_len] += frames[t]
        wsum[start:start + spec.window_len] += wsq
    live = wsum > 1e-12 * wsum.max()
    y[live] /= wsum[live, None]
    y[~live] = 0.0
    if spec.n_samples is not None:
        y = y[:spec.n_samples]
    return AudioBuffer(y, spec.sample_rate)
