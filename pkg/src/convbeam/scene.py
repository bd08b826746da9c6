"""Synthetic spatialized scenes with exact early/late ground truth.

Room impulse responses are built from a stochastic model rather than an
image-source engine: a fractional-delay direct path with inverse-distance
amplitude, sparse Poisson-arranged early reflections inside a 50 ms
window, and a dense exponentially-decaying noise tail gated 50 ms after
the direct arrival whose envelope hits -60 dB at T60.  Because images are
produced by convolving each dry source with the early and late RIR halves
separately, the early + late = image partition and the mixture identity
hold exactly by construction.
"""

import dataclasses
import math

import numpy as np
from scipy.signal import fftconvolve

from .audio_io import AudioBuffer
from .config import read_sections, write_sections
from .errors import ConfigError

SPEED_OF_SOUND = 343.0
EARLY_REFLECTION_WINDOW_S = 0.05
SINC_HALF_TAPS = 16                # 33-tap windowed-sinc interpolation
_LATE_LEVEL = 0.08                 # tail std relative to direct amplitude
_MEAN_REFLECTIONS = 8.0


@dataclasses.dataclass
class SceneSpec:
    """Geometry and acoustics of one synthetic scene."""

    speakers: int
    channels: int
    sample_rate: int
    room: tuple[float, float, float]
    t60: float
    source_positions: np.ndarray       # (speakers, 3) meters
    mic_positions: np.ndarray          # (channels, 3) meters
    noise_snr_db: float = math.inf
    early_window_ms: float = 50.0
    seed: int = 0

    def __post_init__(self):
        self.source_positions = np.asarray(self.source_positions, float)
        self.mic_positions = np.asarray(self.mic_positions, float)
        if self.speakers < 1 or self.channels < 1:
            raise ValueError("speakers and channels must be >= 1")
        if self.t60 < 0:
            raise ValueError("t60 must be >= 0")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.source_positions.shape != (self.speakers, 3):
            raise ValueError("source_positions must have shape (speakers, 3)")
        if self.mic_positions.shape != (self.channels, 3):
            raise ValueError("mic_positions must have shape (channels, 3)")
        room = np.asarray(self.room, float)
        for name, pos in (("source", self.source_positions),
                          ("mic", self.mic_positions)):
            if np.any(pos < 0) or np.any(pos > room):
                raise ValueError(f"{name} positions must lie inside the room")


@dataclasses.dataclass
class SceneTruth:
    """Rendered scene with its exact decomposition."""

    mixture: AudioBuffer
    early: list                        # per speaker, (n, C) AudioBuffer
    late: list
    noise: AudioBuffer
    dry: list                          # per speaker, mono AudioBuffer
    steering: np.ndarray               # (speakers, bins, channels)
    rirs: list                         # per speaker, (L, C) arrays
    split_samples: np.ndarray          # (speakers, channels) early/late split


def _rir_rng(spec, speaker, channel):
    return np.random.default_rng(
        np.random.SeedSequence(spec.seed, spawn_key=(0, speaker, channel)))


def _place_sinc(rir, delay_samples, amplitude):
    """Add a windowed-sinc fractional-delay impulse into ``rir``."""
    center = int(np.floor(delay_samples))
    offsets = np.arange(-SINC_HALF_TAPS, SINC_HALF_TAPS + 1)
    taps = np.sinc(offsets + center - delay_samples)
    taps *= np.hanning(2 * SINC_HALF_TAPS + 1)
    for off, tap in zip(offsets, taps):
        pos = center + off
        if 0 <= pos < rir.shape[0]:
            rir[pos] += amplitude * tap


def synth_rir(spec, speaker, channel):
    """Deterministic RIR for one (speaker, channel) pair.

    T60 = 0 yields the direct-path cluster only; otherwise sparse early
    reflections fill (direct, direct + 50 ms] and a noise tail with decay
    rate ln(1e-3)/T60 runs from direct + 50 ms until its envelope falls
    below -75 dB.
    """
    fs = spec.sample_rate
    rng = _rir_rng(spec, speaker, channel)
    dist = float(np.linalg.norm(spec.source_positions[speaker]
                                - spec.mic_positions[channel]))
    delay_s = dist / SPEED_OF_SOUND
    delay_samples = delay_s * fs
    direct_amp = 1.0 / max(dist, 0.1)
    tail_end_s = delay_s + (EARLY_REFLECTION_WINDOW_S + 1.25 * spec.t60
                            if spec.t60 > 0 else 0.0)
    length = int(np.ceil(tail_end_s * fs)) + SINC_HALF_TAPS + 2
    length = max(length, int(np.ceil(delay_samples)) + SINC_HALF_TAPS + 2)
    rir = np.zeros(length)
    _place_sinc(rir, delay_samples, direct_amp)
    if spec.t60 > 0:
        count = rng.poisson(_MEAN_REFLECTIONS)
        arrivals = np.sort(rng.uniform(delay_s + 0.002,
                                       delay_s + EARLY_REFLECTION_WINDOW_S,
                                       count))
        gains = rng.uniform(0.1, 0.45, count)
        signs = rng.choice((-1.0, 1.0), count)
        for arr, gain, sign in zip(arrivals, gains, signs):
            amp = sign * gain * direct_amp * np.exp(-(arr - delay_s) / 0.025)
            _place_sinc(rir, arr * fs, amp)
        gate = int(round((delay_s + EARLY_REFLECTION_WINDOW_S) * fs))
        if gate < length:
            t = (np.arange(gate, length) / fs) - delay_s
            envelope = np.exp(np.log(1e-3) * t / spec.t60)
            rir[gate:] += (direct_amp * _LATE_LEVEL * envelope
                           * rng.standard_normal(length - gate))
    return rir


def _split_index(spec, speaker, channel):
    dist = float(np.linalg.norm(spec.source_positions[speaker]
                                - spec.mic_positions[channel]))
    direct_idx = int(round(dist / SPEED_OF_SOUND * spec.sample_rate))
    return direct_idx + int(round(spec.early_window_ms / 1000.0
                                  * spec.sample_rate))


def _dtft_at_bins(h, bins, transform_len):
    """Exact transfer function of ``h`` (L, C) at the STFT bin frequencies."""
    n = np.arange(h.shape[0])
    phase = np.exp(-2j * np.pi * np.outer(bins, n) / transform_len)
    return phase @ h


def render(spec, dry_sources, transform_len=512):
    """Render a SceneTruth from mono dry sources.

    Shorter sources are zero-padded to the longest one.  Noise is white
    Gaussian scaled to ``noise_snr_db`` relative to the summed reverberant
    speech at channel 1 (infinite SNR disables it).  The true steering
    vectors are the early-RIR transfer functions evaluated at the
    ``transform_len``-point bin frequencies.
    """
    fs = spec.sample_rate
    sources = []
    for src in dry_sources:
        if isinstance(src, AudioBuffer):
            if src.sample_rate != fs:
                raise ValueError("dry source sample rate mismatch")
            if src.channels != 1:
                raise ValueError("dry sources must be mono")
            src = src.channel(0)
        src = np.asarray(src, dtype=np.float64)
        if src.ndim != 1 or src.size == 0:
            raise ValueError("dry sources must be nonempty 1-D signals")
        sources.append(src)
    if len(sources) != spec.speakers:
        raise ValueError(
            f"expected {spec.speakers} dry sources, got {len(sources)}")
    n = max(len(s) for s in sources)
    sources = [np.pad(s, (0, n - len(s))) for s in sources]

    bins = np.arange(transform_len // 2 + 1)
    early_imgs, late_imgs, rirs, splits = [], [], [], []
    steering = np.zeros((spec.speakers, len(bins), spec.channels),
                        dtype=np.complex128)
    for j in range(spec.speakers):
        chans = [synth_rir(spec, j, c) for c in range(spec.channels)]
        length = max(len(h) for h in chans)
        rir = np.zeros((length, spec.channels))
        for c, h in enumerate(chans):
            rir[:len(h), c] = h
        early = np.zeros((n, spec.channels))
        late = np.zeros((n, spec.channels))
        split_row = np.zeros(spec.channels, dtype=int)
        h_early_full = np.zeros_like(rir)
        for c in range(spec.channels):
            split = min(_split_index(spec, j, c), length)
            split_row[c] = split
            h_early_full[:split, c] = rir[:split, c]
            early[:, c] = fftconvolve(sources[j], rir[:split, c])[:n]
            if split < length and split < n:
                tail = fftconvolve(sources[j], rir[split:, c])
                late[split:, c] = tail[:n - split]
        steering[j] = _dtft_at_bins(h_early_full, bins, transform_len)
        early_imgs.append(early)
        late_imgs.append(late)
        rirs.append(rir)
        splits.append(split_row)

    speech = np.zeros((n, spec.channels))
    for early, late in zip(early_imgs, late_imgs):
        speech += early + late
    if math.isinf(spec.noise_snr_db):
        noise = np.zeros((n, spec.channels))
    else:
        rng = np.random.default_rng(
            np.random.SeedSequence(spec.seed, spawn_key=(1,)))
        ref_power = float(np.mean(speech[:, 0] ** 2))
        scale = math.sqrt(ref_power * 10.0 ** (-spec.noise_snr_db / 10.0))
        noise = scale * rng.standard_normal((n, spec.channels))
    mixture = speech + noise
    return SceneTruth(
        mixture=AudioBuffer(mixture, fs),
        early=[AudioBuffer(e, fs) for e in early_imgs],
        late=[AudioBuffer(l, fs) for l in late_imgs],
        noise=AudioBuffer(noise, fs),
        dry=[AudioBuffer.mono(s, fs) for s in sources],
        steering=steering,
        rirs=rirs,
        split_samples=np.stack(splits),
    )


def synthetic_source(duration, sample_rate, seed, kind="harmonic"):
    """Seeded speech-like test signal: voiced-style harmonics or noise bands.

    Both kinds are broadband and gated by an on/off burst envelope
    (raised-cosine ramps, variable segment lengths), so two-speaker scenes
    contain sole-activity and overlap regions; that temporal structure is
    what makes frequency-collapsed masks informative.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
    n = int(round(duration * sample_rate))
    if kind == "harmonic":
        f0 = rng.uniform(90.0, 220.0)
        rate = rng.uniform(0.2, 0.5)
        drift = 1.0 + 0.15 * np.sin(2.0 * np.pi * rate * np.arange(n)
                                    / sample_rate + rng.uniform(0.0, 6.0))
        phase = 2.0 * np.pi * np.cumsum(f0 * drift) / sample_rate
        carrier = np.zeros(n)
        for h in range(1, 24):
            carrier += np.sin(h * phase + rng.uniform(0.0, 6.0)) \
                / (1.0 + 0.35 * h)
    elif kind == "noiseband":
        white = rng.standard_normal(n)
        spec = np.fft.rfft(white)
        freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
        lo = rng.uniform(120.0, 300.0)
        hi = lo + rng.uniform(4000.0, 6000.0)
        spec[(freqs < lo) | (freqs > hi)] = 0.0
        carrier = np.fft.irfft(spec, n)
    else:
        raise ValueError(f"unknown source kind {kind!r}")

    envelope = np.zeros(n)
    ramp = int(0.02 * sample_rate)
    pos = 0
    while pos < n:
        seg = int(rng.uniform(0.25, 0.7) * sample_rate)
        if rng.uniform() < 0.6:
            end = min(pos + seg, n)
            envelope[pos:end] = 1.0
            rise = min(ramp, end - pos)
            envelope[pos:pos + rise] *= 0.5 - 0.5 * np.cos(
                np.pi * np.arange(rise) / max(rise, 1))
            fall = min(ramp, end - pos)
            envelope[end - fall:end] *= 0.5 + 0.5 * np.cos(
                np.pi * np.arange(fall) / max(fall, 1))
        pos += seg
    signal = carrier * envelope
    rms = np.sqrt(np.mean(signal ** 2))
    if rms > 0:
        signal = 0.05 * signal / rms
    return signal


def random_scene_spec(seed, speakers=2, channels=6, t60=0.4,
                      noise_snr_db=20.0, sample_rate=16000,
                      early_window_ms=50.0):
    """Seeded random geometry: compact mic array, well-separated sources."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(4,)))
    room = (6.0, 5.0, 3.0)
    center = np.array([3.0, 2.5, 1.5])
    angles = 2.0 * np.pi * np.arange(channels) / max(channels, 1)
    radius = 0.05
    mics = center + np.stack([radius * np.cos(angles),
                              radius * np.sin(angles),
                              np.zeros(channels)], axis=1)
    sources = np.zeros((speakers, 3))
    for j in range(speakers):
        for _ in range(100):
            pos = np.array([rng.uniform(0.8, room[0] - 0.8),
                            rng.uniform(0.8, room[1] - 0.8),
                            rng.uniform(1.0, 2.0)])
            far_from_mics = np.linalg.norm(pos - center) > 0.8
            far_from_sources = all(
                np.linalg.norm(pos - sources[i]) > 1.2 for i in range(j))
            if far_from_mics and far_from_sources:
                break
        sources[j] = pos
    return SceneSpec(speakers=speakers, channels=channels,
                     sample_rate=sample_rate, room=room, t60=t60,
                     source_positions=sources, mic_positions=mics,
                     noise_snr_db=noise_snr_db,
                     early_window_ms=early_window_ms, seed=seed)


def render_scene_manifest(spec):
    """Serialize a SceneSpec to the section text format."""
    sections = {
        "scene": {
            "speakers": str(spec.speakers),
            "channels": str(spec.channels),
            "sample_rate": str(spec.sample_rate),
            "t60": repr(float(spec.t60)),
            "noise_snr_db": repr(float(spec.noise_snr_db)),
            "early_window_ms": repr(float(spec.early_window_ms)),
            "seed": str(spec.seed),
        },
        "room": {"dimensions": " ".join(repr(float(v)) for v in spec.room)},
        "sources": {
            f"speaker{j + 1}": " ".join(repr(float(v)) for v in pos)
            for j, pos in enumerate(spec.source_positions)},
        "mics": {
            f"channel{c + 1}": " ".join(repr(float(v)) for v in pos)
            for c, pos in enumerate(spec.mic_positions)},
    }
    return write_sections(sections)


def parse_scene_manifest(text, source="<scene>"):
    """Parse scene manifest text back into a SceneSpec."""
    sections = read_sections(text, source)
    try:
        scene = sections["scene"]
        speakers = int(scene["speakers"])
        channels = int(scene["channels"])
        room = tuple(float(v) for v in sections["room"]["dimensions"].split())
        srcs = np.array([
            [float(v) for v in sections["sources"][f"speaker{j + 1}"].split()]
            for j in range(speakers)])
        mics = np.array([
            [float(v) for v in sections["mics"][f"channel{c + 1}"].split()]
            for c in range(channels)])
        return SceneSpec(
            speakers=speakers, channels=channels,
            sample_rate=int(scene["sample_rate"]), room=room, t60=float(
                scene["t60"]),
            source_positions=srcs, mic_positions=mics,
            noise_snr_db=float(scene["noise_snr_db"]),
            early_window_ms=float(scene["early_window_ms"]),
            seed=int(scene["seed"]))
    except KeyError as err:
        raise ConfigError(f"{source}: missing scene field {err}") from None
    except ValueError as err:
        raise ConfigError(f"{source}: bad scene value ({err})") from None


def load_scene_spec(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scene_manifest(fh.read(), source=str(path))
