"""Pipeline configuration: dataclasses, the section-based text format, and
environment-variable overrides.

The config file is plain ``[section]`` / ``key = value`` text.  Unknown
sections or keys are hard errors so a misspelled epsilon can never pass
silently.  Every key can be overridden by an environment variable named
``CONVBEAM_<SECTION>_<KEY>`` (the dotted path with dots replaced by
underscores, uppercased).
"""

import dataclasses
import os

from .errors import ConfigError

ENV_PREFIX = "CONVBEAM_"


@dataclasses.dataclass
class WpeSettings:
    enabled: bool = True
    taps: int = 5
    delay: int = 3
    iterations: int = 1
    eps: float = 1e-3
    xi: float = 1e-6


@dataclasses.dataclass
class BeamformerSettings:
    variant: str = "mvdr"
    formula: str = "with_sv"
    ref_channel: int = 1
    ref_mode: str = "fixed_onehot"      # the one supported policy, kept
    eps: float = 1e-8                   # as an explicit extension point
    xi: float = 1e-2
    sv_power_iters: int = 2


@dataclasses.dataclass
class StftSettings:
    window_len: int = 400
    shift: int = 160
    transform_len: int = 512


@dataclasses.dataclass
class PipelineSettings:
    mask_type: str = "tf"
    mask_source: str = "oracle"
    channels_used: int = 0      # 0 = use every input channel


@dataclasses.dataclass
class OutputSettings:
    dir: str = "."
    wav_format: str = "float32"


@dataclasses.dataclass
class EnhanceConfig:
    pipeline: PipelineSettings = dataclasses.field(
        default_factory=PipelineSettings)
    wpe: WpeSettings = dataclasses.field(default_factory=WpeSettings)
    beamformer: BeamformerSettings = dataclasses.field(
        default_factory=BeamformerSettings)
    stft: StftSettings = dataclasses.field(default_factory=StftSettings)
    output: OutputSettings = dataclasses.field(default_factory=OutputSettings)

    def validate(self):
        if self.pipeline.mask_type not in ("tf", "vad"):
            raise ConfigError(
                f"pipeline.mask_type must be tf or vad, got "
                f"{self.pipeline.mask_type!r}")
        if self.pipeline.mask_source not in ("oracle", "file"):
            raise ConfigError(
                f"pipeline.mask_source must be oracle or file, got "
                f"{self.pipeline.mask_source!r}")
        if self.pipeline.channels_used < 0:
            raise ConfigError("pipeline.channels_used must be >= 0")
        if self.wpe.taps < 1 or self.wpe.delay < 1 or self.wpe.iterations < 1:
            raise ConfigError("wpe.taps, wpe.delay, wpe.iterations must be "
                              ">= 1")
        if self.wpe.eps < 0 or self.beamformer.eps < 0:
            raise ConfigError("diagonal loading eps must be >= 0")
        for name, xi in (("wpe.xi", self.wpe.xi),
                         ("beamformer.xi", self.beamformer.xi)):
            if not 0.0 <= xi < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1)")
        if self.beamformer.variant not in ("mvdr", "wmpdr"):
            raise ConfigError("beamformer.variant must be mvdr or wmpdr")
        if self.beamformer.formula not in ("with_sv", "without_sv"):
            raise ConfigError(
                "beamformer.formula must be with_sv or without_sv")
        if self.beamformer.ref_channel < 1:
            raise ConfigError("beamformer.ref_channel is 1-based (>= 1)")
        if self.beamformer.ref_mode != "fixed_onehot":
            raise ConfigError("beamformer.ref_mode supports only "
                              "fixed_onehot")
        if self.beamformer.sv_power_iters < 1:
            raise ConfigError("beamformer.sv_power_iters must be >= 1")
        if not 1 <= self.stft.shift <= self.stft.window_len:
            raise ConfigError("require stft.window_len >= stft.shift >= 1")
        if self.stft.transform_len < self.stft.window_len:
            raise ConfigError("stft.transform_len must be >= stft.window_len")
        if self.output.wav_format not in ("float32", "int16"):
            raise ConfigError("output.wav_format must be float32 or int16")
        return self


_SECTIONS = ("pipeline", "wpe", "beamformer", "stft", "output")


def _coerce(text, pytype, key):
    text = text.strip()
    try:
        if pytype is bool:
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        return pytype(text)
    except ValueError:
        raise ConfigError(
            f"cannot parse {key} = {text!r} as {pytype.__name__}") from None


def read_sections(text, source="<config>"):
    """Parse ``[section]`` / ``key = value`` text into nested dicts."""
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current in sections:
                raise ConfigError(f"{source}:{lineno}: duplicate section "
                                  f"[{current}]")
            sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        if current is None:
            raise ConfigError(f"{source}:{lineno}: key outside any section")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in sections[current]:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key}")
        sections[current][key] = value.strip()
    return sections


def write_sections(sections):
    """Render nested dicts back to the section text format."""
    lines = []
    for name, body in sections.items():
        lines.append(f"[{name}]")
        for key, value in body.items():
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(config):
    """Serialize an EnhanceConfig to config text (round-trips exactly)."""
    sections = {}
    for name in _SECTIONS:
        group = getattr(config, name)
        sections[name] = {
            field.name: _format_value(getattr(group, field.name))
            for field in dataclasses.fields(group)}
    return write_sections(sections)


def parse_config(text, source="<config>", env=None):
    """Parse config text, apply environment overrides, and validate.

    Unknown sections/keys are errors; so are unparseable values and
    unknown ``CONVBEAM_*`` variables.
    """
    sections = read_sections(text, source)
    config = EnhanceConfig()
    registry = {}
    for name in _SECTIONS:
        group = getattr(config, name)
        for field in dataclasses.fields(group):
            registry[(name, field.name)] = (group, field)
    for name, body in sections.items():
        if name not in _SECTIONS:
            raise ConfigError(f"{source}: unknown section [{name}]")
        for key, value in body.items():
            if (name, key) not in registry:
                raise ConfigError(f"{source}: unknown key {name}.{key}")
            group, field = registry[(name, key)]
            setattr(group, field.name,
                    _coerce(value, type(getattr(group, field.name)),
                            f"{name}.{key}"))
    _apply_env(config, registry, env)
    return config.validate()


def _apply_env(config, registry, env=None):
    env = os.environ if env is None else env
    lookup = {f"{ENV_PREFIX}{name}_{key}".upper().replace(".", "_"): (name,
                                                                      key)
              for (name, key) in registry}
    for var, value in env.items():
        if not var.startswith(ENV_PREFIX):
            continue
        if var not in lookup:
            raise ConfigError(f"unknown environment override {var}")
        name, key = lookup[var]
        group, field = registry[(name, key)]
        setattr(group, field.name,
                _coerce(value, type(getattr(group, field.name)),
                        f"{name}.{key} (from {var})"))


def load_config(path, env=None):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read(), source=str(path), env=env)


def default_config():
    return EnhanceConfig().validate()
