"""Command-line pipeline driver: simulate, enhance, evaluate, demo."""

import dataclasses
import hashlib
import itertools
import json
import logging
import pathlib
import time

import click
import numpy as np

from . import __version__
from .audio_io import (AudioBuffer, read_wav, write_steering_vectors,
                       write_wav)
from .config import default_config, load_config, render_config
from .errors import ConvbeamError
from .masks import MaskSet, load_mask, oracle_masks
from .metrics import pit_assign, render_score_table, render_score_tsv, \
    trim_edges
from .pipeline import enhance_mixture, select_channels
from .scene import (load_scene_spec, render, render_scene_manifest,
                    synthetic_source)
from .stft import stft

log = logging.getLogger("convbeam")


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _versions():
    import scipy
    return {"convbeam": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__}


def _write_manifest(out_dir, command, *, seed=None, config_text=None,
                    inputs=(), timings=None):
    manifest = {
        "command": command,
        "seed": seed,
        "config": config_text,
        "input_hashes": {str(p): _sha256(p) for p in inputs},
        "timings_s": timings or {},
        "versions": _versions(),
    }
    path = pathlib.Path(out_dir) / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _fail(err):
    raise click.ClickException(str(err))


@click.group()
@click.option("--verbose", is_flag=True, help="Log stage progress to stderr.")
def main(verbose):
    """Multichannel dereverberation + beamforming frontend."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(name)s: %(message)s")


@main.command()
@click.option("--spec", "spec_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Scene manifest describing geometry and acoustics.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None,
              help="Override the manifest seed.")
@click.argument("sources", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
def simulate(spec_path, out_dir, seed, sources):
    """Render a spatialized scene from mono source WAVs."""
    t0 = time.perf_counter()
    try:
        spec = load_scene_spec(spec_path)
        if seed is not None:
            spec = dataclasses.replace(spec, seed=seed)
        drys = []
        for path in sources:
            buf = read_wav(path)
            if buf.channels != 1:
                raise ConvbeamError(f"{path}: source WAVs must be mono")
            if buf.sample_rate != spec.sample_rate:
                raise ConvbeamError(
                    f"{path}: sample rate {buf.sample_rate} != scene rate "
                    f"{spec.sample_rate}")
            drys.append(buf)
        truth = render(spec, drys)
    except (ConvbeamError, ValueError, OSError) as err:
        _fail(err)
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_wav(out / "mixture.wav", truth.mixture)
    write_wav(out / "noise.wav", truth.noise)
    for j in range(spec.speakers):
        write_wav(out / f"speaker{j + 1}_early.wav", truth.early[j])
        write_wav(out / f"speaker{j + 1}_late.wav", truth.late[j])
        write_wav(out / f"speaker{j + 1}_dry.wav", truth.dry[j])
    write_steering_vectors(out / "steering_vectors.bin", truth.steering)
    (out / "scene.manifest").write_text(render_scene_manifest(spec),
                                        encoding="utf-8")
    _write_manifest(out, "simulate", seed=spec.seed,
                    config_text=render_scene_manifest(spec),
                    inputs=list(sources),
                    timings={"simulate": time.perf_counter() - t0})
    log.info("scene written to %s", out)


@dataclasses.dataclass
class _TruthAudio:
    """Truth components loaded back from a simulate output directory."""

    mixture: AudioBuffer
    early: list
    late: list
    noise: AudioBuffer


def _load_truth_dir(truth_dir, channels_used=0):
    truth_dir = pathlib.Path(truth_dir)
    early_paths = sorted(truth_dir.glob("speaker*_early.wav"))
    if not early_paths:
        raise ConvbeamError(f"{truth_dir}: no speaker*_early.wav files")
    count = len(early_paths)

    def load(path):
        return select_channels(read_wav(path), channels_used)

    return _TruthAudio(
        mixture=load(truth_dir / "mixture.wav"),
        early=[load(truth_dir / f"speaker{j + 1}_early.wav")
               for j in range(count)],
        late=[load(truth_dir / f"speaker{j + 1}_late.wav")
              for j in range(count)],
        noise=load(truth_dir / "noise.wav"),
    )


def _mask_sets_from_files(paths):
    by_speaker = {}
    for path in paths:
        values, role, speaker = load_mask(path)
        by_speaker.setdefault(speaker, {})[role] = values
    sets = []
    for speaker in sorted(by_speaker):
        triple = by_speaker[speaker]
        missing = {"wpe", "bf_target", "bf_noise"} - set(triple)
        if missing:
            raise ConvbeamError(
                f"speaker {speaker}: missing mask roles {sorted(missing)}")
        sets.append(MaskSet(wpe=triple["wpe"], target=triple["bf_target"],
                            noise=triple["bf_noise"], speaker=speaker))
    return sets


def _enhance(mixture_path, config, truth_dir, mask_paths):
    mixture = read_wav(mixture_path)
    mix = select_channels(mixture, config.pipeline.channels_used)
    if config.pipeline.mask_source == "oracle":
        if truth_dir is None:
            raise ConvbeamError("oracle mask source requires --truth DIR")
        truth = _load_truth_dir(truth_dir, config.pipeline.channels_used)
        spec = stft(mix, config.stft.window_len, config.stft.shift,
                    config.stft.transform_len)
        mask_sets = oracle_masks(truth, spec,
                                 vad=config.pipeline.mask_type == "vad")
    else:
        if not mask_paths:
            raise ConvbeamError("file mask source requires --masks FILE...")
        mask_sets = _mask_sets_from_files(mask_paths)
    return enhance_mixture(mix, config, mask_sets)


@main.command()
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Pipeline config; defaults plus CONVBEAM_* overrides.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--truth", "truth_dir", default=None,
              type=click.Path(exists=True, file_okay=False),
              help="Simulate output directory (oracle mask source).")
@click.option("--masks", "mask_paths", multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Mask files (3 per speaker) for the file mask source.")
@click.argument("mixture", type=click.Path(exists=True, dir_okay=False))
def enhance(config_path, out_dir, truth_dir, mask_paths, mixture):
    """Dereverberate, separate, and denoise a multichannel mixture."""
    try:
        config = (load_config(config_path) if config_path
                  else default_config())
        result = _enhance(mixture, config, truth_dir, mask_paths)
    except (ConvbeamError, ValueError, OSError) as err:
        _fail(err)
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for j, audio in enumerate(result.speakers):
        write_wav(out / f"speaker{j + 1}_enhanced.wav", audio,
                  config.output.wav_format)
    inputs = [mixture] + list(mask_paths)
    _write_manifest(out, "enhance", config_text=render_config(config),
                    inputs=inputs, timings=result.timings)
    log.info("enhanced %d speakers -> %s", len(result.speakers), out)


def _evaluate(enhanced_paths, truth_dir, config):
    truth = _load_truth_dir(truth_dir)
    q = config.beamformer.ref_channel - 1
    margin = config.stft.window_len
    estimates = [read_wav(p).channel(0) for p in enhanced_paths]
    references = [buf.channel(q) for buf in truth.early]
    if len(estimates) != len(references):
        raise ConvbeamError(
            f"{len(estimates)} enhanced files but {len(references)} "
            "truth speakers")
    mix_ref = truth.mixture.channel(q)
    n = min(min(len(e) for e in estimates), min(len(r) for r in references),
            len(mix_ref))
    estimates = [trim_edges(e[:n], margin) for e in estimates]
    references = [trim_edges(r[:n], margin) for r in references]
    inputs = [trim_edges(mix_ref[:n], margin)] * len(references)
    _, report = pit_assign(estimates, references, inputs=inputs)
    return report


@main.command()
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--truth", "truth_dir", required=True,
              type=click.Path(exists=True, file_okay=False))
@click.argument("enhanced", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
def evaluate(config_path, out_dir, truth_dir, enhanced):
    """Score enhanced WAVs against the early-image references."""
    try:
        config = (load_config(config_path) if config_path
                  else default_config())
        report = _evaluate(enhanced, truth_dir, config)
    except (ConvbeamError, ValueError, OSError) as err:
        _fail(err)
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    table = render_score_table(report)
    (out / "scores.txt").write_text(table, encoding="utf-8")
    (out / "scores.tsv").write_text(render_score_tsv(report),
                                    encoding="utf-8")
    _write_manifest(out, "evaluate", inputs=list(enhanced))
    click.echo(table, nl=False)


DEMO_GRID = tuple(itertools.product(("mvdr", "wmpdr"),
                                    ("with_sv", "without_sv"),
                                    ("tf", "vad")))


def _demo_scene_spec(seed, channels):
    from .scene import random_scene_spec
    return random_scene_spec(seed, speakers=2, channels=channels, t60=0.4,
                             noise_snr_db=20.0)


@main.command()
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=1234, show_default=True)
@click.option("--channels", type=int, default=6, show_default=True)
@click.option("--duration", type=float, default=6.0, show_default=True,
              help="Source duration in seconds.")
def demo(out_dir, seed, channels, duration):
    """Self-contained demo: simulate, enhance over the full variant grid,
    and evaluate; writes a comparison table."""
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        spec = _demo_scene_spec(seed, channels)
        sources = [synthetic_source(duration, spec.sample_rate, seed + 1,
                                    "harmonic"),
                   synthetic_source(duration, spec.sample_rate, seed + 2,
                                    "noiseband")]
        truth = render(spec, sources)
        scene_dir = out / "scene"
        scene_dir.mkdir(exist_ok=True)
        write_wav(scene_dir / "mixture.wav", truth.mixture)
        write_wav(scene_dir / "noise.wav", truth.noise)
        for j in range(spec.speakers):
            write_wav(scene_dir / f"speaker{j + 1}_early.wav", truth.early[j])
            write_wav(scene_dir / f"speaker{j + 1}_late.wav", truth.late[j])
            write_wav(scene_dir / f"speaker{j + 1}_dry.wav", truth.dry[j])
        write_steering_vectors(scene_dir / "steering_vectors.bin",
                               truth.steering)
        (scene_dir / "scene.manifest").write_text(
            render_scene_manifest(spec), encoding="utf-8")

        rows = []
        for variant, formula, mask_type in DEMO_GRID:
            config = default_config()
            config.beamformer.variant = variant
            config.beamformer.formula = formula
            config.pipeline.mask_type = mask_type
            cell = f"{variant}_{formula}_{mask_type}"
            cell_dir = out / cell
            cell_dir.mkdir(exist_ok=True)
            log.info("demo cell %s", cell)
            result = _enhance(scene_dir / "mixture.wav", config,
                              scene_dir, ())
            enhanced_paths = []
            for j, audio in enumerate(result.speakers):
                path = cell_dir / f"speaker{j + 1}_enhanced.wav"
                write_wav(path, audio, config.output.wav_format)
                enhanced_paths.append(path)
            report = _evaluate(enhanced_paths, scene_dir, config)
            (cell_dir / "scores.txt").write_text(render_score_table(report),
                                                 encoding="utf-8")
            (cell_dir / "scores.tsv").write_text(render_score_tsv(report),
                                                 encoding="utf-8")
            si = np.mean([s.si_sdr for s in report.speakers])
            sdr = np.mean([s.sdr for s in report.speakers])
            dsi = np.mean([s.delta_si_sdr for s in report.speakers])
            rows.append((variant, formula, mask_type, si, sdr, dsi))
    except (ConvbeamError, ValueError, OSError) as err:
        _fail(err)
    lines = [f"{'variant':<8} {'formula':<12} {'mask':<5} "
             f"{'si_sdr':>8} {'sdr':>8} {'d_si_sdr':>9}"]
    for variant, formula, mask_type, si, sdr, dsi in rows:
        lines.append(f"{variant:<8} {formula:<12} {mask_type:<5} "
                     f"{si:8.2f} {sdr:8.2f} {dsi:9.2f}")
    summary = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    _write_manifest(out, "demo", seed=seed)
    click.echo(summary, nl=False)


if __name__ == "__main__":
    main()
