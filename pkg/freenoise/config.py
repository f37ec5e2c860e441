"""Run configuration: defaults, flat ``key = value`` files, validation.

A configuration file holds one ``key = value`` pair per line. Lines starting
with ``#`` are comments. The ``prompt`` key may be repeated, one line per
prompt segment, as ``text@frame`` where ``frame`` is the first frame of the
segment.
"""
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError, FormatError
from .io import load_weights
from .motion_injection import build_timeline, plan_transitions
from .sampler import SamplerConfig, make_diffusion_schedule
from .toy_videoldm import ModelConfig, ModelWeights, ToyVideoLDM

CODEC_CHANNELS = 12


def parse_bool(value):
    lowered = str(value).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean: %r" % value)


def parse_optional_int(value):
    if str(value).strip().lower() in ("", "none"):
        return None
    return int(value)


def parse_optional_str(value):
    value = str(value).strip()
    return None if value.lower() in ("", "none") else value


def parse_band(value):
    """Parse ``"a,b"`` into a pair of floats."""
    if isinstance(value, tuple):
        return value
    parts = str(value).split(",")
    if len(parts) != 2:
        raise ValueError("expected two comma-separated numbers, got %r"
                         % value)
    return float(parts[0]), float(parts[1])


def parse_prompt(value):
    """Parse ``text@frame`` into ``(text, frame)``; frame may be None.

    Only a trailing ``@`` followed by digits marks a start frame, so
    ``"a cat @ home"`` is a plain prompt.
    """
    if isinstance(value, tuple):
        return value
    text, sep, frame = str(value).rpartition("@")
    if sep and frame.strip().isdigit():
        frame = int(frame)
    else:
        text, frame = str(value), None
    text = text.strip().strip('"').strip("'").strip()
    return text, frame


def format_prompt(prompt):
    text, frame = prompt
    return text if frame is None else "%s@%d" % (text, frame)


@dataclass(frozen=True)
class RunConfig:
    """Every parameter of a generation run.

    Field names are the configuration file keys. Command-line flags use the
    same names with dashes.
    """
    # sampler
    mode: str = "freenoise"
    frames: int = 64
    n_train: int = 16
    unit: int = 4
    guidance: float = 15.0
    seed: int = 0
    genl_stride: int = None
    sliding_disjoint: bool = False
    latent_height: int = 8
    latent_width: int = 8
    # diffusion schedule
    timesteps: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 2e-2
    steps: int = 50
    eta: float = 0.0
    # model
    latent_channels: int = 12
    hidden_channels: int = 32
    num_blocks: int = 1
    levels: int = 2
    heads: int = 2
    head_dim: int = 16
    text_dim: int = 32
    text_tokens: int = 8
    weight_seed: int = 0
    temporal_conv: bool = True
    weights: str = None
    parallel: bool = False
    # prompts
    prompt: tuple = field(default_factory=tuple)
    transition: int = 8
    inject_band: tuple = (0.3, 0.7)
    decoder_layer: int = None
    injection: bool = True
    # outputs
    out: str = "video.fnv"
    export_frames: str = None
    export_hdf5: str = None

    @classmethod
    def from_mapping(cls, mapping, base=None):
        """Build a configuration from raw string values.

        Parameters
        ----------
        mapping : dict of str to str or list of str
            Raw values. ``prompt`` maps to a list of ``text@frame``
            strings.
        base : RunConfig or None
            Configuration providing the values of absent keys.
        """
        base = cls() if base is None else base
        known = {f.name for f in fields(cls)}
        values = {}
        for key, raw in mapping.items():
            if key not in known:
                raise ConfigError("unknown key", key=key)
            try:
                if key == "prompt":
                    raw = [raw] if isinstance(raw, str) else raw
                    values[key] = tuple(parse_prompt(item) for item in raw)
                else:
                    values[key] = CONVERTERS[key](raw)
            except ValueError as error:
                raise ConfigError("invalid value %r (%s)" % (raw, error),
                                  key=key)
        return replace(base, **values)

    @classmethod
    def from_text(cls, text, base=None):
        """Parse the content of a configuration file."""
        return cls.from_mapping(parse_config_text(text), base=base)

    @classmethod
    def from_file(cls, file_name, base=None):
        try:
            with open(file_name) as f:
                text = f.read()
        except OSError as error:
            raise ConfigError("cannot read %r (%s)" % (file_name, error),
                              key="config") from error
        return cls.from_text(text, base=base)

    def to_text(self):
        """Return a configuration file reproducing this run."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "prompt":
                lines += ["prompt = %s" % format_prompt(prompt)
                          for prompt in value]
            elif f.name == "inject_band":
                lines.append("inject_band = %r,%r" % value)
            elif value is None:
                lines.append("%s = none" % f.name)
            elif isinstance(value, bool):
                lines.append("%s = %s" % (f.name, str(value).lower()))
            else:
                lines.append("%s = %s" % (f.name, value))
        return "\n".join(lines) + "\n"

    # Derived configurations

    def sampler_config(self):
        return SamplerConfig(
            mode=self.mode, n_train=self.n_train, total=self.frames,
            unit=self.unit, guidance_scale=self.guidance, seed=self.seed,
            genl_stride=self.genl_stride,
            sliding_disjoint=self.sliding_disjoint,
            latent_height=self.latent_height, latent_width=self.latent_width)

    def model_config(self):
        return ModelConfig(
            latent_channels=self.latent_channels,
            hidden_channels=self.hidden_channels, num_blocks=self.num_blocks,
            levels=self.levels, heads=self.heads, head_dim=self.head_dim,
            text_dim=self.text_dim, text_tokens=self.text_tokens,
            weight_seed=self.weight_seed, temporal_conv=self.temporal_conv)

    def schedule(self):
        return make_diffusion_schedule(self.timesteps, self.beta_start,
                                       self.beta_end, self.steps, self.eta)

    def prompt_segments(self):
        """Return the prompt texts and the frame count of each segment."""
        if not self.prompt:
            raise ConfigError("at least one prompt is required", key="prompt")
        texts = [text for text, _ in self.prompt]
        starts = [0 if frame is None and index == 0 else frame
                  for index, (_, frame) in enumerate(self.prompt)]
        if any(not text.split() for text in texts):
            raise ConfigError("prompt text is empty", key="prompt")
        if None in starts:
            raise ConfigError("every prompt after the first needs a start "
                              "frame, as text@frame", key="prompt")
        if starts[0] != 0:
            raise ConfigError("the first prompt must start at frame 0",
                              key="prompt")
        bounds = starts + [self.frames]
        segments = np.diff(bounds).tolist()
        if any(frames < 1 for frames in segments):
            raise ConfigError("prompt start frames must increase and stay "
                              "below frames=%d, got %s"
                              % (self.frames, starts[1:]), key="prompt")
        return texts, segments

    def validate(self, require_prompt=True):
        """Check every parameter before any computation.

        Parameters
        ----------
        require_prompt : bool
            If False, an empty prompt list is accepted.

        Raises
        ------
        ConfigError
            Names the offending key.
        """
        self.sampler_config().validate()
        model_config = self.model_config().validate()
        self.schedule()
        if self.eta != 0:
            raise ConfigError("stochastic DDIM is not a sampling mode, "
                              "eta must be 0", key="eta")
        if self.latent_channels != CODEC_CHANNELS:
            raise ConfigError("the latent codec needs %d channels, got %d"
                              % (CODEC_CHANNELS, self.latent_channels),
                              key="latent_channels")
        factor = model_config.spatial_factor
        for key in ("latent_height", "latent_width"):
            if getattr(self, key) % factor:
                raise ConfigError("must be a multiple of %d with %d levels"
                                  % (factor, self.levels), key=key)
        if self.prompt or require_prompt:
            _, segments = self.prompt_segments()
            plan_transitions(segments, self.transition)
        t_alpha, t_beta = self.inject_band
        if not 0 <= t_alpha < t_beta <= 1:
            raise ConfigError("need 0 <= a < b <= 1, got %r,%r"
                              % (t_alpha, t_beta), key="inject_band")
        if self.decoder_layer is not None and not (
                0 <= self.decoder_layer <
                model_config.n_cross_attention_layers):
            raise ConfigError("must be in [0, %d), got %d"
                              % (model_config.n_cross_attention_layers,
                                 self.decoder_layer), key="decoder_layer")
        return self

    def build_model(self):
        """Network from the weights file if given, else freshly seeded."""
        if self.weights is None:
            weights = ModelWeights.generate(self.model_config())
        else:
            weights = load_weights(self.weights)
            if weights.config.latent_channels != CODEC_CHANNELS:
                raise FormatError("weights have %d latent channels, the codec "
                                  "needs %d" % (weights.config.latent_channels,
                                                CODEC_CHANNELS), offset=4)
        return ToyVideoLDM(weights, parallel=self.parallel)

    def build_timeline(self, model):
        texts, segments = self.prompt_segments()
        return build_timeline(
            texts, segments, model, n_timesteps=self.timesteps,
            transition_len=self.transition, t_alpha_frac=self.inject_band[0],
            t_beta_frac=self.inject_band[1],
            decoder_layer=self.decoder_layer, injection=self.injection)


CONVERTERS = {
    "mode": str, "frames": int, "n_train": int, "unit": int,
    "guidance": float, "seed": int, "genl_stride": parse_optional_int,
    "sliding_disjoint": parse_bool, "latent_height": int,
    "latent_width": int, "timesteps": int, "beta_start": float,
    "beta_end": float, "steps": int, "eta": float, "latent_channels": int,
    "hidden_channels": int, "num_blocks": int, "levels": int, "heads": int,
    "head_dim": int, "text_dim": int, "text_tokens": int, "weight_seed": int,
    "temporal_conv": parse_bool, "weights": parse_optional_str,
    "parallel": parse_bool, "prompt": parse_prompt, "transition": int,
    "inject_band": parse_band, "decoder_layer": parse_optional_int,
    "injection": parse_bool, "out": str, "export_frames": parse_optional_str,
    "export_hdf5": parse_optional_str,
}


def parse_config_text(text):
    """Split a configuration file into raw values.

    Returns
    -------
    mapping : dict of str to str
        ``prompt`` maps to the list of its values, in file order.
    """
    mapping = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError("line %d is not a key = value pair: %r"
                              % (number, line), key="config")
        if key == "prompt":
            mapping.setdefault("prompt", []).append(value)
        else:
            mapping[key] = value
    return mapping
