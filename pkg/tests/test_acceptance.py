"""Acceptance suite: one test per criterion, each printing a PASS line
with its measured values and runtime (run with ``pytest -v -s``).

Thresholds for the scene-level criteria (7, 8, 10) were calibrated once
on the seeded reference scene sets defined here and in conftest.py, then
frozen; the measured values at calibration time are quoted in the
docstrings.  Everything else uses the stated tolerances directly.
"""

import time

import numpy as np
import pytest
from click.testing import CliRunner

from oracles import (charpoly_eigs, charpoly_eigvec, cofactor_inverse,
                     random_hermitian_psd, random_hermitian_with_gap)

from convbeam.audio_io import AudioBuffer
from convbeam.beamforming import Beamformer, filter_with_sv, filter_wo_sv
from convbeam.cli import main as cli_main
from convbeam.config import default_config
from convbeam.linalg import cinv, csolve, diag_load, power_iter_maxeig
from convbeam.masks import MaskSet, floor_mask, oracle_masks
from convbeam.metrics import si_sdr, trim_edges
from convbeam.pipeline import enhance_mixture
from convbeam.scene import random_scene_spec, render, synthetic_source
from convbeam.stft import istft, stft
from convbeam.wpe import estimate_power, wpe_filter


def report(number, label, elapsed, detail):
    print(f"\n[PASS] criterion {number:>2}: {label} ({elapsed:.2f}s) "
          f"-- {detail}")


def _psd_with_spectrum(rng, m, log_min):
    """Random Hermitian PSD with eigenvalues log-uniform in [10^log_min, 1]."""
    z = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    q, _ = np.linalg.qr(z)
    eigs = 10.0 ** rng.uniform(log_min, 0.0, m)
    eigs[int(rng.integers(0, m))] = 1.0
    phi = (q * eigs) @ q.conj().T
    return 0.5 * (phi + phi.conj().T)


def test_criterion_01_stable_inverse_correctness():
    """1,000 loaded PSD matrices: inverse/solve residuals and oracle match.

    Condition numbers span up to 1e6 (the residual guarantee's stated
    envelope); the cofactor-oracle comparison runs on the well-conditioned
    half, where the double-precision oracle itself is trustworthy at the
    1e-10 level."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1001)
    worst_residual = 0.0
    worst_oracle = 0.0
    for case in range(1000):
        m = 2 + case % 5
        well_conditioned = case % 2 == 1
        phi = diag_load(
            _psd_with_spectrum(rng, m, -2.0 if well_conditioned else -6.0),
            1e-8)
        eye = np.eye(m)
        inv = cinv(phi)
        solved = csolve(phi, eye.astype(complex))
        scale = np.abs(phi).max()
        worst_residual = max(
            worst_residual,
            np.abs(phi @ inv - eye).max() / scale,
            np.abs(phi @ solved - eye).max() / scale)
        if m <= 4 and well_conditioned:
            oracle = cofactor_inverse(phi)
            worst_oracle = max(worst_oracle,
                               np.abs(inv - oracle).max()
                               / np.abs(oracle).max())
    elapsed = time.perf_counter() - t0
    assert worst_residual <= 1e-9
    assert worst_oracle <= 1e-10
    assert elapsed < 5.0
    report(1, "stable inverse correctness", elapsed,
           f"max residual {worst_residual:.2e}, max oracle error "
           f"{worst_oracle:.2e}")


def test_criterion_02_diagonal_loading_conditioning():
    """Loaded condition number bounded by (1 + eps) / eps, singular inputs
    included; the stabilized inverse succeeds on every loaded matrix.

    The brute-force eigenvalues come from the characteristic polynomial of
    the unloaded matrix plus the exact shift eps * trace that loading adds
    to each eigenvalue; solving the loaded polynomial directly would lose
    the tiny smallest root to cancellation at eps = 1e-8."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1002)
    worst_margin = 0.0
    for case in range(300):
        m = 2 + case % 2
        rank = 1 + case % m                      # exactly singular ranks
        phi = random_hermitian_psd(rng, m, rank=rank)
        base_eigs = np.maximum(charpoly_eigs(phi), 0.0)
        trace = np.trace(phi).real
        for eps in (1e-8, 1e-3):
            loaded = diag_load(phi, eps)
            eigs = base_eigs + eps * trace
            cond = eigs[-1] / eigs[0]
            bound = (1.0 + eps) / eps
            worst_margin = max(worst_margin, cond / bound)
            assert cond <= bound * 1.01
            inv = cinv(loaded)
            assert np.all(np.isfinite(inv.view(float)))
    elapsed = time.perf_counter() - t0
    assert elapsed < 2.0
    report(2, "diagonal-loading conditioning", elapsed,
           f"max cond/bound {worst_margin:.4f} over 600 loaded matrices")


def test_criterion_03_power_iteration_accuracy():
    """500 Hermitian matrices with eigengap >= 2: 50 iterations align to
    the characteristic-polynomial oracle; 2 iterations keep median >= 0.9."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1003)
    worst = 1.0
    two_iter = []
    for _ in range(500):
        mat, _, _ = random_hermitian_with_gap(rng, 3)
        eigs = charpoly_eigs(mat)
        lam = eigs[np.argmax(np.abs(eigs))]
        v_true = charpoly_eigvec(mat, lam)
        seed = np.ones(3) / np.sqrt(3.0)
        v50 = power_iter_maxeig(mat, 50, seed)
        worst = min(worst, abs(np.vdot(v50, v_true)))
        v2 = power_iter_maxeig(mat, 2, seed)
        two_iter.append(abs(np.vdot(v2, v_true)))
    elapsed = time.perf_counter() - t0
    median2 = float(np.median(two_iter))
    assert worst >= 1.0 - 1e-8
    assert median2 >= 0.9
    assert elapsed < 5.0
    report(3, "power-iteration accuracy", elapsed,
           f"min 50-iter alignment {worst:.12f}, 2-iter median {median2:.3f}")


def test_criterion_04_distortionless_property():
    """1,000 (noise covariance, steering, reference) triples."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1004)
    cases = 1000
    c = 4
    phi = np.stack([random_hermitian_psd(rng, c) for _ in range(cases)])
    v = rng.standard_normal((cases, c)) + 1j * rng.standard_normal((cases, c))
    worst = 0.0
    for q in range(c):
        sel = slice(q, cases, c)
        w = filter_with_sv(phi[sel], v[sel], q, diag_eps=1e-8)
        response = np.einsum("fc,fc->f", np.conj(w), v[sel])
        worst = max(worst, np.abs(response - v[sel][:, q]).max())
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-6
    assert elapsed < 2.0
    report(4, "distortionless property", elapsed,
           f"max |w^H v - v_q| = {worst:.2e}")


def test_criterion_05_rank_one_equivalence():
    """Rank-one target covariance: both filter formulas coincide."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1005)
    cases = 1000
    c = 3
    worst = 0.0
    phi = np.stack([random_hermitian_psd(rng, c) for _ in range(cases)])
    v = rng.standard_normal((cases, c)) + 1j * rng.standard_normal((cases, c))
    phi_s = np.einsum("fi,fj->fij", v, np.conj(v))
    for q in range(c):
        sel = slice(q, cases, c)
        u = np.zeros(c, dtype=complex)
        u[q] = 1.0
        w_trace = filter_wo_sv(phi[sel], phi_s[sel], u, diag_eps=1e-8)
        w_sv = filter_with_sv(phi[sel], v[sel], q, diag_eps=1e-8)
        worst = max(worst, np.abs(w_trace - w_sv).max())
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-9
    assert elapsed < 2.0
    report(5, "rank-one formula equivalence", elapsed,
           f"max entrywise gap {worst:.2e}")


def test_criterion_06_stft_roundtrip():
    """100 seeded signals, interior reconstruction within 1e-6."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1006)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(8000, 20000))
        audio = AudioBuffer(0.5 * rng.standard_normal((n, 1)), 16000)
        back = istft(stft(audio, 400, 160, 512))
        err = np.abs(back.data[400:-400] - audio.data[400:-400]).max()
        worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-6
    assert elapsed < 5.0
    report(6, "analysis/synthesis round trip", elapsed,
           f"max interior error {worst:.2e}")


def test_criterion_07_dereverberation_gain():
    """20 single-speaker scenes (T60 = 0.5 s, C = 2, K = 5): mean SI-SDR
    gain of the dereverberated reference channel >= 3 dB (calibrated mean
    at freeze time: 3.64 dB; hard floor is a strictly positive mean)."""
    t0 = time.perf_counter()
    gains = []
    for seed in range(20):
        spec = random_scene_spec(seed, speakers=1, channels=2, t60=0.5,
                                 noise_snr_db=30.0)
        source = synthetic_source(4.0, 16000, 100 + seed, "noiseband")
        truth = render(spec, [source])
        mix_spec = stft(truth.mixture, 400, 160, 512)
        sets = oracle_masks(truth, mix_spec)
        power = estimate_power(mix_spec, floor_mask(sets[0].wpe, 1e-6))
        out = istft(wpe_filter(mix_spec, power, taps=5, delay=3,
                               iterations=1, diag_eps=1e-3))
        n = truth.mixture.num_samples
        ref = trim_edges(truth.early[0].channel(0)[:n], 400)
        gains.append(
            si_sdr(trim_edges(out.channel(0)[:n], 400), ref)
            - si_sdr(trim_edges(truth.mixture.channel(0)[:n], 400), ref))
    elapsed = time.perf_counter() - t0
    gains = np.array(gains)
    assert gains.mean() > 0.0                    # hard floor
    assert gains.mean() >= 3.0
    assert elapsed < 120.0
    report(7, "dereverberation gain", elapsed,
           f"mean gain {gains.mean():.2f} dB (min {gains.min():.2f})")


def test_criterion_08_full_pipeline_separation(separation_results):
    """20 two-speaker scenes (T60 = 0.4 s, C = 6, 20 dB SNR): PIT-aligned
    SI-SDR improvement with the default pipeline >= 5.5 dB mean
    (calibrated mean at freeze time: 6.63 dB), positive for both speakers
    in >= 18/20 scenes, and dereverberation must help on average."""
    wpe_deltas = separation_results["wpe_tf"]
    nowpe_deltas = separation_results["nowpe_tf"]
    elapsed = separation_results["tf_elapsed"]
    both_positive = int(np.sum(np.all(wpe_deltas > 0.0, axis=1)))
    assert wpe_deltas.mean() >= 5.5
    assert both_positive >= 18
    assert wpe_deltas.mean() > nowpe_deltas.mean()
    assert elapsed < 300.0
    report(8, "full-pipeline separation", elapsed,
           f"mean improvement {wpe_deltas.mean():.2f} dB vs "
           f"{nowpe_deltas.mean():.2f} dB without dereverberation; "
           f"both speakers positive in {both_positive}/20 scenes")


def test_criterion_09_adversarial_stability():
    """All-zero masks, silent mixtures, and single-frame inputs produce
    finite outputs or structured errors; never NaN/Inf."""
    t0 = time.perf_counter()
    cfg = default_config()

    spec = random_scene_spec(77, speakers=1, channels=3, t60=0.3,
                             noise_snr_db=20.0)
    truth = render(spec, [synthetic_source(1.5, 16000, 77, "harmonic")])
    frames = stft(truth.mixture, 400, 160, 512).frames
    zero = np.zeros((frames, 257, 3))
    zero_sets = [MaskSet(wpe=zero.copy(), target=zero.copy(),
                         noise=zero.copy(), speaker=0)]
    result = enhance_mixture(truth.mixture, cfg, zero_sets)
    assert np.all(np.isfinite(result.speakers[0].data))

    silent = AudioBuffer(np.zeros((8000, 3)), 16000)
    s_frames = stft(silent, 400, 160, 512).frames
    half = np.full((s_frames, 257, 3), 0.5)
    silent_sets = [MaskSet(wpe=half.copy(), target=half.copy(),
                           noise=half.copy(), speaker=0)]
    result = enhance_mixture(silent, cfg, silent_sets)
    assert np.all(np.isfinite(result.speakers[0].data))
    assert np.abs(result.speakers[0].data).max() <= 1e-12

    short = AudioBuffer(0.1 * np.random.default_rng(9)
                        .standard_normal((160, 3)), 16000)
    one = np.full((1, 257, 3), 0.5)
    short_sets = [MaskSet(wpe=one.copy(), target=one.copy(),
                          noise=one.copy(), speaker=0)]
    with pytest.raises(ValueError):
        enhance_mixture(short, cfg, short_sets)   # structured, no NaN
    cfg_nowpe = default_config()
    cfg_nowpe.wpe.enabled = False
    result = enhance_mixture(short, cfg_nowpe, short_sets)
    assert np.all(np.isfinite(result.speakers[0].data))

    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    report(9, "adversarial-input stability", elapsed,
           "zero masks, silence, and single frames all finite/structured")


def test_criterion_10_vad_mask_coherence(separation_results):
    """Frequency-collapsed masks are bit-constant across bins and stay
    within 3 dB of the time-frequency variant on the criterion-8 scenes
    (calibrated gap at freeze time: 2.6 dB)."""
    from convbeam.pipeline import _beamformer_weights
    t0 = time.perf_counter()
    rng = np.random.default_rng(1010)
    mask = rng.uniform(0.0, 1.0, (25, 257, 4))
    weights = _beamformer_weights(mask, 1e-2, "vad", bins=257)
    for t in range(weights.shape[0]):
        assert np.all(weights[t] == weights[t, 0])   # bit-equal across f
    check_elapsed = time.perf_counter() - t0

    vad = separation_results["wpe_vad"]
    tf = separation_results["wpe_tf"]
    gap = tf.mean() - vad.mean()
    elapsed = separation_results["vad_elapsed"] + check_elapsed
    assert gap <= 3.0
    assert elapsed < 300.0
    report(10, "frequency-coherent masks", elapsed,
           f"T-F mean {tf.mean():.2f} dB vs VAD mean {vad.mean():.2f} dB "
           f"(gap {gap:.2f} dB)")


def test_criterion_11_mvdr_wmpdr_equivalence():
    """With power built as a per-frequency constant over the noise
    weights, both beamformer variants produce identical filters."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(1011)
    frames, bins, channels = 24, 1000, 3         # one seeded case per bin
    x = rng.standard_normal((frames, bins, channels)) \
        + 1j * rng.standard_normal((frames, bins, channels))
    target = rng.uniform(0.05, 1.0, (frames, bins))
    noise = rng.uniform(0.05, 1.0, (frames, bins))
    kappa = rng.uniform(0.5, 2.0, bins)
    power = kappa[None, :] / noise
    worst = 0.0
    for formula in ("with_sv", "without_sv"):
        w_mvdr = Beamformer(variant="mvdr", formula=formula).fit(
            x, target_weights=target, noise_weights=noise).filters_
        w_wmpdr = Beamformer(variant="wmpdr", formula=formula).fit(
            x, target_weights=target, noise_weights=noise,
            power=power).filters_
        worst = max(worst, np.abs(w_mvdr - w_wmpdr).max())
    elapsed = time.perf_counter() - t0
    assert worst <= 1e-9
    assert elapsed < 2.0
    report(11, "MVDR/wMPDR equivalence", elapsed,
           f"max filter gap {worst:.2e} across 2000 bins")


def test_criterion_12_demo_determinism(tmp_path):
    """Two demo runs with one seed produce byte-identical WAVs and score
    reports.  Run manifests are excluded: they record wall-clock timings
    by design."""
    t0 = time.perf_counter()
    runner = CliRunner()
    outputs = []
    for tag in ("one", "two"):
        out = tmp_path / tag
        result = runner.invoke(cli_main, ["demo", "--out", str(out),
                                          "--seed", "1234"])
        assert result.exit_code == 0, result.output
        outputs.append(out)
    compared = 0
    for left in sorted(outputs[0].rglob("*")):
        if left.is_dir() or left.name == "run_manifest.json":
            continue
        right = outputs[1] / left.relative_to(outputs[0])
        assert right.exists(), right
        assert left.read_bytes() == right.read_bytes(), left.name
        compared += 1
    elapsed = time.perf_counter() - t0
    assert compared >= 8 * 4 + 10       # 8 grid cells + scene artifacts
    assert elapsed < 600.0
    report(12, "demo determinism", elapsed,
           f"{compared} files byte-identical across runs")
