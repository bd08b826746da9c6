"""End-to-end enhancement: masks -> power -> dereverberation -> beamforming.

Each speaker is processed independently: its dereverberation mask weights
the time-varying power estimate, the prediction filters remove late
reverberation from the full mixture, and the mask-weighted covariances
drive the chosen beamformer variant.  Mask flooring happens before any
channel averaging or frequency collapse.
"""

import dataclasses
import time

import numpy as np

from .audio_io import AudioBuffer
from .beamforming import Beamformer
from .masks import (broadcast_vad, channel_average, floor_mask, vad_collapse)
from .stft import istft, stft
from .wpe import WpeDereverberator, estimate_power


@dataclasses.dataclass
class EnhanceResult:
    """Per-speaker outputs plus the intermediates worth inspecting."""

    speakers: list                 # mono AudioBuffer per speaker
    mixture_spec: object
    wpe_filters: list              # (F, K*C, C) or None per speaker
    bf_filters: list               # (F, C) per speaker
    steering: list                 # (F, C) or None per speaker
    power_maps: list               # (T, F) per speaker
    timings: dict                  # stage -> seconds


def select_channels(audio, count):
    """First ``count`` channels (0 = all); validates availability."""
    if count == 0:
        return audio
    if count > audio.channels:
        raise ValueError(
            f"requested {count} channels but input has {audio.channels}")
    return AudioBuffer(audio.data[:, :count], audio.sample_rate)


def _beamformer_weights(values, xi, mask_type, bins):
    """Floor, then reduce a mask to the (T, F) weights used by covariances."""
    v = floor_mask(values, xi)
    if mask_type == "vad":
        frame = v if v.ndim == 1 else vad_collapse(v)
        return broadcast_vad(frame, bins)
    if v.ndim == 3:
        return channel_average(v)
    if v.ndim == 2:
        return v
    return broadcast_vad(v, bins)


def _power_mask(values, xi, mask_type):
    """Floor, then shape the dereverberation mask for the power estimate."""
    v = floor_mask(values, xi)
    if mask_type == "vad":
        return v if v.ndim == 1 else vad_collapse(v)
    return v


def enhance_mixture(mixture, config, mask_sets):
    """Run the full pipeline on a mixture given per-speaker mask triples.

    mixture: AudioBuffer (channels already selected); mask_sets: list of
    MaskSet whose tensors match the mixture STFT framing (per-channel,
    channel-averaged, or per-frame shapes all accepted).
    Returns an EnhanceResult with one mono AudioBuffer per speaker.
    """
    config.validate()
    timings = {}
    t0 = time.perf_counter()
    mix = select_channels(mixture, config.pipeline.channels_used)
    spec = stft(mix, config.stft.window_len, config.stft.shift,
                config.stft.transform_len)
    timings["stft"] = time.perf_counter() - t0

    outputs, wpe_filters, bf_filters, steering, powers = [], [], [], [], []
    timings.update({"power": 0.0, "wpe": 0.0, "beamform": 0.0, "istft": 0.0})
    for mask_set in mask_sets:
        t0 = time.perf_counter()
        power = estimate_power(
            spec, _power_mask(mask_set.wpe, config.wpe.xi,
                              config.pipeline.mask_type))
        timings["power"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        if config.wpe.enabled:
            derevb_est = WpeDereverberator(
                taps=config.wpe.taps, delay=config.wpe.delay,
                iterations=config.wpe.iterations, diag_eps=config.wpe.eps)
            derevb_est.fit(spec.data, power=power)
            derevb = spec.with_data(derevb_est.transform(spec.data))
            speaker_wpe_filters = derevb_est.filters_
        else:
            derevb = spec
            speaker_wpe_filters = None
        timings["wpe"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        target_w = _beamformer_weights(mask_set.target, config.beamformer.xi,
                                       config.pipeline.mask_type, spec.bins)
        noise_w = _beamformer_weights(mask_set.noise, config.beamformer.xi,
                                      config.pipeline.mask_type, spec.bins)
        bf = Beamformer(variant=config.beamformer.variant,
                        formula=config.beamformer.formula,
                        ref_channel=config.beamformer.ref_channel,
                        diag_eps=config.beamformer.eps,
                        sv_power_iters=config.beamformer.sv_power_iters)
        bf.fit(derevb.data, target_weights=target_w, noise_weights=noise_w,
               power=power)
        beamformed = bf.transform(derevb.data)
        timings["beamform"] += time.perf_counter() - t0

        t0 = time.perf_counter()
        mono = istft(spec.with_data(beamformed[:, :, None]))
        timings["istft"] += time.perf_counter() - t0

        outputs.append(mono)
        wpe_filters.append(speaker_wpe_filters)
        bf_filters.append(bf.filters_)
        steering.append(bf.steering_)
        powers.append(power)
    return EnhanceResult(speakers=outputs, mixture_spec=spec,
                         wpe_filters=wpe_filters, bf_filters=bf_filters,
                         steering=steering, power_maps=powers,
                         timings=timings)
