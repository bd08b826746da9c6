"""convbeam: mask-weighted dereverberation and beamforming frontend.

The package provides a numerically stabilized multichannel speech
enhancement chain (prediction-error dereverberation followed by MVDR or
wMPDR beamforming), a synthetic spatialized-scene simulator with exact
early/late ground truth, separation metrics, and a CLI driver.
"""

__version__ = "0.1.0"

from .audio_io import AudioBuffer, read_wav, write_wav
from .beamforming import (Beamformer, apply_filter, covariance,
                          filter_with_sv, filter_wo_sv, steering_vector)
from .config import EnhanceConfig, default_config, load_config, parse_config
from .errors import (ConfigError, ConvbeamError, DegenerateSignalError,
                     MaskFileError, SingularMatrixError)
from .linalg import (cinv, csolve, diag_load, hermitize, power_iter_maxeig,
                     real_embed)
from .masks import (MaskSet, channel_average, floor_mask, load_mask,
                    oracle_masks, save_mask, vad_collapse)
from .metrics import ScoreReport, pit_assign, sdr_simple, si_sdr
from .pipeline import EnhanceResult, enhance_mixture
from .scene import SceneSpec, SceneTruth, render, synth_rir, synthetic_source
from .stft import SpectroTensor, istft, stft
from .wpe import WpeDereverberator, estimate_power, wpe_filter

__all__ = [
    "AudioBuffer", "Beamformer", "ConfigError", "ConvbeamError",
    "DegenerateSignalError", "EnhanceConfig", "EnhanceResult", "MaskFileError",
    "MaskSet", "SceneSpec", "SceneTruth", "ScoreReport", "SingularMatrixError",
    "SpectroTensor", "WpeDereverberator", "apply_filter", "channel_average",
    "cinv", "covariance", "csolve", "default_config", "diag_load",
    "enhance_mixture", "estimate_power", "filter_with_sv", "filter_wo_sv",
    "floor_mask", "hermitize", "istft", "load_config", "load_mask",
    "oracle_masks", "parse_config", "pit_assign", "power_iter_maxeig",
    "read_wav", "real_embed", "render", "save_mask", "sdr_simple", "si_sdr",
    "steering_vector", "stft", "synth_rir", "synthetic_source", "vad_collapse",
    "wpe_filter", "write_wav",
]
