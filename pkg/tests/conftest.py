"""Shared fixtures: the seeded scene sets used by the acceptance suite."""

import time

import numpy as np
import pytest

from convbeam.config import default_config
from convbeam.masks import oracle_masks
from convbeam.metrics import pit_assign, trim_edges
from convbeam.pipeline import enhance_mixture
from convbeam.scene import random_scene_spec, render, synthetic_source
from convbeam.stft import stft

EDGE_MARGIN = 400
SEPARATION_SCENES = 20


def scene_deltas(result, truth, ref_channel=0):
    """PIT-aligned per-speaker SI-SDR improvement over the mixture."""
    n = truth.mixture.num_samples
    count = len(result.speakers)
    estimates = [trim_edges(a.channel(0)[:n], EDGE_MARGIN)
                 for a in result.speakers]
    references = [trim_edges(truth.early[j].channel(ref_channel)[:n],
                             EDGE_MARGIN) for j in range(count)]
    inputs = [trim_edges(truth.mixture.channel(ref_channel)[:n],
                         EDGE_MARGIN)] * count
    _, report = pit_assign(estimates, references, inputs=inputs)
    return np.array([s.delta_si_sdr for s in report.speakers])


@pytest.fixture(scope="session")
def separation_results():
    """Twenty seeded two-speaker scenes (T60 = 0.4 s, C = 6, 20 dB SNR)
    run through three pipeline configurations.

    Returns per-config delta arrays of shape (scenes, speakers) plus the
    wall-clock seconds attributable to the T-F runs and the VAD runs.
    """
    deltas = {"wpe_tf": [], "nowpe_tf": [], "wpe_vad": []}
    tf_elapsed = 0.0
    vad_elapsed = 0.0
    for seed in range(SEPARATION_SCENES):
        t0 = time.perf_counter()
        spec = random_scene_spec(seed, speakers=2, channels=6, t60=0.4,
                                 noise_snr_db=20.0)
        sources = [synthetic_source(4.0, 16000, 1000 + seed, "harmonic"),
                   synthetic_source(4.0, 16000, 2000 + seed, "noiseband")]
        truth = render(spec, sources)
        mix_spec = stft(truth.mixture, 400, 160, 512)
        sets_tf = oracle_masks(truth, mix_spec)

        cfg = default_config()
        deltas["wpe_tf"].append(scene_deltas(
            enhance_mixture(truth.mixture, cfg, sets_tf), truth))

        cfg_nowpe = default_config()
        cfg_nowpe.wpe.enabled = False
        deltas["nowpe_tf"].append(scene_deltas(
            enhance_mixture(truth.mixture, cfg_nowpe, sets_tf), truth))
        tf_elapsed += time.perf_counter() - t0

        t0 = time.perf_counter()
        sets_vad = oracle_masks(truth, mix_spec, vad=True)
        cfg_vad = default_config()
        cfg_vad.pipeline.mask_type = "vad"
        deltas["wpe_vad"].append(scene_deltas(
            enhance_mixture(truth.mixture, cfg_vad, sets_vad), truth))
        vad_elapsed += time.perf_counter() - t0
    return {
        "wpe_tf": np.array(deltas["wpe_tf"]),
        "nowpe_tf": np.array(deltas["nowpe_tf"]),
        "wpe_vad": np.array(deltas["wpe_vad"]),
        "tf_elapsed": tf_elapsed,
        "vad_elapsed": vad_elapsed,
    }
