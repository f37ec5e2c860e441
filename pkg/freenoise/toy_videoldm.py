"""A small, seeded, untrained video latent diffusion network.

The network predicts the noise of a latent video of shape ``(C, M, H, W)``.
It is a U-Net whose every block applies, in order, a residual convolution
block conditioned on the timestep, a temporal convolution, a spatial
transformer (self-attention over the pixels of each frame, then
cross-attention to the prompt embedding, then an MLP), and a temporal
transformer (two self-attention layers along the frame axis, then an MLP).

Temporal attention has no positional encoding: the output of a frame
depends on its own query and on the set of keys only. Temporal self-attention
can be restricted to overlapping windows, whose outputs are fused with
:func:`freenoise.sampler.fuse_windows`.
"""
import hashlib
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, ModelError, ShapeError
from .numerics import (STREAM_TEXT, STREAM_WEIGHTS, Rng, as_array, avg_pool2,
                       conv_spatial, conv_temporal, layer_norm, linear,
                       matmul, rng_normal, silu, softmax, upsample2)
from .sampler import WindowPlan, fuse_windows

PAD_TOKEN = "<pad>"


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and seed of the toy network.

    Attributes
    ----------
    latent_channels : int
        Channels of the latent video.
    hidden_channels : int
        Width of every block, equal to ``heads * head_dim``.
    num_blocks : int
        Blocks per resolution level.
    levels : int
        Resolution levels. ``levels - 1`` down levels, one middle level, and
        ``levels - 1`` up levels.
    heads, head_dim : int
        Attention heads and their width.
    text_dim, text_tokens : int
        Prompt embedding size.
    weight_seed : int
        Seed of the weight streams.
    temporal_conv : bool
        If False, temporal convolutions are replaced by the identity.
    temporal_kernel : int
        Odd temporal convolution size.
    """
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
    temporal_kernel: int = 3

    def validate(self):
        """Raise ConfigError if the configuration is inconsistent."""
        for key in ("latent_channels", "hidden_channels", "num_blocks",
                    "levels", "heads", "head_dim", "text_dim", "text_tokens",
                    "temporal_kernel"):
            if getattr(self, key) < 1:
                raise ConfigError("must be >= 1, got %d" % getattr(self, key),
                                  key=key)
        if self.heads * self.head_dim != self.hidden_channels:
            raise ConfigError(
                "heads * head_dim = %d must equal hidden_channels = %d"
                % (self.heads * self.head_dim, self.hidden_channels),
                key="head_dim")
        if self.temporal_kernel % 2 == 0:
            raise ConfigError("must be odd, got %d" % self.temporal_kernel,
                              key="temporal_kernel")
        if not 0 <= self.weight_seed < 2 ** 64:
            raise ConfigError("must be a 64-bit unsigned integer",
                              key="weight_seed")
        return self

    @property
    def n_cross_attention_layers(self):
        return self.num_blocks * (2 * self.levels - 1)

    @property
    def n_encoder_layers(self):
        """Cross-attention layers of the down path and the middle level."""
        return self.num_blocks * self.levels

    @property
    def spatial_factor(self):
        """Latent height and width must be multiples of this factor."""
        return 2 ** (self.levels - 1)

    def block_names(self):
        """Names of the blocks in forward order."""
        names = []
        for level in range(self.levels - 1):
            names += ["down%d.block%d" % (level, bb)
                      for bb in range(self.num_blocks)]
        names += ["mid.block%d" % bb for bb in range(self.num_blocks)]
        for level in reversed(range(self.levels - 1)):
            names += ["up%d.block%d" % (level, bb)
                      for bb in range(self.num_blocks)]
        return names


@dataclass(frozen=True)
class AttentionMode:
    """Scope of temporal self-attention.

    ``AttentionMode()`` attends over all frames; ``AttentionMode(plan)``
    attends inside the windows of a :class:`~freenoise.sampler.WindowPlan`.
    """
    plan: WindowPlan = None

    @property
    def windowed(self):
        return self.plan is not None


GLOBAL = AttentionMode()

ParamSpec = namedtuple("ParamSpec", ["name", "shape", "init", "fan_in",
                                     "gain"])


def _norm_specs(name, width):
    return [ParamSpec(name + ".gain", (width, ), "ones", 0, 0.),
            ParamSpec(name + ".bias", (width, ), "zeros", 0, 0.)]


def _dense_specs(name, n_in, n_out, gain=1., bias=True):
    specs = [ParamSpec(name + ".weight", (n_in, n_out), "normal", n_in, gain)]
    if bias:
        specs.append(ParamSpec(name + ".bias", (n_out, ), "zeros", 0, 0.))
    return specs


def _attention_specs(name, width, kv_dim):
    return (_norm_specs(name + ".norm", width) +
            _dense_specs(name + ".q", width, width, bias=False) +
            _dense_specs(name + ".k", kv_dim, width, bias=False) +
            _dense_specs(name + ".v", kv_dim, width, bias=False) +
            _dense_specs(name + ".out", width, width, gain=0.2))


def _mlp_specs(name, width):
    return (_norm_specs(name + ".norm", width) +
            _dense_specs(name + ".fc1", width, 2 * width) +
            _dense_specs(name + ".fc2", 2 * width, width, gain=0.2))


def _block_specs(prefix, config):
    width = config.hidden_channels
    kernel = config.temporal_kernel
    specs = _norm_specs(prefix + ".res.norm1", width)
    specs += [
        ParamSpec(prefix + ".res.conv1.weight", (width, width, 3, 3),
                  "normal", width * 9, 1.),
        ParamSpec(prefix + ".res.conv1.bias", (width, ), "zeros", 0, 0.)]
    specs += _dense_specs(prefix + ".res.temb", width, width)
    specs += _norm_specs(prefix + ".res.norm2", width)
    specs += [
        ParamSpec(prefix + ".res.conv2.weight", (width, width, 3, 3),
                  "normal", width * 9, 0.2),
        ParamSpec(prefix + ".res.conv2.bias", (width, ), "zeros", 0, 0.)]

    specs += _norm_specs(prefix + ".tconv.norm", width)
    specs += [
        ParamSpec(prefix + ".tconv.weight", (width, width, kernel), "normal",
                  width * kernel, 0.2),
        ParamSpec(prefix + ".tconv.bias", (width, ), "zeros", 0, 0.)]

    for name, second_kv in ((".st", config.text_dim), (".tt", width)):
        specs += _norm_specs(prefix + name + ".norm", width)
        specs += _dense_specs(prefix + name + ".proj_in", width, width)
        specs += _attention_specs(prefix + name + ".attn1", width, width)
        specs += _attention_specs(prefix + name + ".attn2", width, second_kv)
        specs += _mlp_specs(prefix + name + ".mlp", width)
        specs += _dense_specs(prefix + name + ".proj_out", width, width,
                              gain=0.2)
    return specs


def parameter_specs(config):
    """List every parameter of the network in declared layer order.

    The position of a parameter in this list is its layer index, which
    selects its random stream.

    Returns
    -------
    specs : list of ParamSpec
        ``(name, shape, init, fan_in, gain)`` tuples. ``init`` is
        ``"normal"``, ``"zeros"`` or ``"ones"``.
    """
    width = config.hidden_channels
    specs = (_dense_specs("time.fc1", width, width) +
             _dense_specs("time.fc2", width, width))
    specs += [
        ParamSpec("conv_in.weight", (width, config.latent_channels, 3, 3),
                  "normal", config.latent_channels * 9, 1.),
        ParamSpec("conv_in.bias", (width, ), "zeros", 0, 0.)]
    for name in config.block_names():
        if name.startswith("up") and name.endswith(".block0"):
            specs += _dense_specs(name.split(".")[0] + ".merge", 2 * width,
                                  width)
        specs += _block_specs(name, config)
    specs += _norm_specs("out.norm", width)
    specs += [
        ParamSpec("out.conv.weight", (config.latent_channels, width, 3, 3),
                  "normal", width * 9, 1.),
        ParamSpec("out.conv.bias", (config.latent_channels, ), "zeros", 0,
                  0.)]
    return specs


class ModelWeights:
    """Parameters of the toy network.

    Parameters
    ----------
    config : ModelConfig
    params : dict of str to array
        One float32 array per entry of :func:`parameter_specs`.
    """

    def __init__(self, config, params):
        config.validate()
        self.config = config
        self.params = {}
        for spec in parameter_specs(config):
            if spec.name not in params:
                raise ShapeError("missing parameter %s" % spec.name)
            value = as_array(params[spec.name])
            if value.shape != spec.shape:
                raise ShapeError("parameter %s has shape %s, expected %s"
                                 % (spec.name, value.shape, spec.shape))
            if not np.isfinite(value).all():
                raise ModelError("parameter %s is not finite" % spec.name)
            self.params[spec.name] = value

    @classmethod
    def generate(cls, config):
        """Draw fan-in scaled normal weights from the weight streams."""
        config.validate()
        params = {}
        for index, spec in enumerate(parameter_specs(config)):
            if spec.init == "normal":
                rng = Rng(config.weight_seed, STREAM_WEIGHTS + index)
                scale = spec.gain / np.sqrt(spec.fan_in)
                params[spec.name] = rng_normal(rng, spec.shape) * np.float32(
                    scale)
            elif spec.init == "ones":
                params[spec.name] = np.ones(spec.shape, dtype=np.float32)
            else:
                params[spec.name] = np.zeros(spec.shape, dtype=np.float32)
        return cls(config, params)

    def to_flat(self):
        """Concatenate all parameters in declared layer order."""
        return np.concatenate([
            self.params[spec.name].ravel()
            for spec in parameter_specs(self.config)
        ])

    @classmethod
    def from_flat(cls, config, blob):
        """Split a flat parameter vector produced by :meth:`to_flat`."""
        blob = as_array(blob).ravel()
        specs = parameter_specs(config)
        expected = sum(int(np.prod(spec.shape)) for spec in specs)
        if blob.size != expected:
            raise ShapeError("parameter blob has %d values, expected %d"
                             % (blob.size, expected))
        params, offset = {}, 0
        for spec in specs:
            size = int(np.prod(spec.shape))
            params[spec.name] = blob[offset:offset + size].reshape(spec.shape)
            offset += size
        return cls(config, params)

    def replace(self, **params):
        """Return a copy with some parameters replaced."""
        merged = dict(self.params)
        merged.update(params)
        return ModelWeights(self.config, merged)


###############################################################################
# Text and latent codecs


def _token_row(token, position, text_dim):
    key = ("%d:%s" % (position, token)).encode("utf-8")
    seed = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(),
                          "little")
    return rng_normal(Rng(seed, STREAM_TEXT), (text_dim, ))


def embed_prompt(text, text_tokens=8, text_dim=32):
    """Deterministic pseudo text embedding.

    The prompt is split on whitespace, truncated or padded to
    ``text_tokens`` tokens, and each row is drawn from a stream seeded by a
    hash of the token and its position.

    Returns
    -------
    embedding : array of shape (text_tokens, text_dim)
    """
    tokens = text.split()
    if not tokens:
        raise InputError("prompt is empty")
    tokens = tokens[:text_tokens]
    tokens += [PAD_TOKEN] * (text_tokens - len(tokens))
    return as_array(np.stack([_token_row(token, position, text_dim)
                              for position, token in enumerate(tokens)]))


def unconditional_embedding(text_tokens=8, text_dim=32):
    """Embedding of the empty prompt, made of padding rows only."""
    return as_array(np.stack([_token_row(PAD_TOKEN, position, text_dim)
                              for position in range(text_tokens)]))


def encode(rgb):
    """Space-to-depth latent codec.

    Parameters
    ----------
    rgb : array of shape (3, H, W) or (3, M, H, W)
        H and W must be even.

    Returns
    -------
    latent : array of shape (12, H / 2, W / 2) or (12, M, H / 2, W / 2)
        Channel ``4 * c + 2 * dy + dx`` holds pixel ``(2 y + dy, 2 x + dx)``
        of color ``c``.
    """
    rgb = as_array(rgb)
    if rgb.ndim not in (3, 4) or rgb.shape[0] != 3:
        raise ShapeError("expected a (3, H, W) or (3, M, H, W) array, got %s"
                         % (rgb.shape, ))
    height, width = rgb.shape[-2:]
    if height % 2 or width % 2:
        raise ShapeError("image height and width must be even, got %d x %d"
                         % (height, width))
    frames = rgb.shape[1:-2]
    blocks = rgb.reshape((3, ) + frames + (height // 2, 2, width // 2, 2))
    if frames:
        blocks = blocks.transpose(0, 3, 5, 1, 2, 4)
    else:
        blocks = blocks.transpose(0, 2, 4, 1, 3)
    return as_array(blocks.reshape((12, ) + frames +
                                   (height // 2, width // 2)))


def decode(latent):
    """Exact inverse of :func:`encode`."""
    latent = as_array(latent)
    if latent.ndim not in (3, 4) or latent.shape[0] != 12:
        raise ShapeError("expected a (12, h, w) or (12, M, h, w) array, got "
                         "%s" % (latent.shape, ))
    height, width = latent.shape[-2:]
    frames = latent.shape[1:-2]
    blocks = latent.reshape((3, 2, 2) + frames + (height, width))
    if frames:
        blocks = blocks.transpose(0, 3, 4, 1, 5, 2)
    else:
        blocks = blocks.transpose(0, 3, 1, 4, 2)
    return as_array(blocks.reshape((3, ) + frames +
                                   (2 * height, 2 * width)))


def timestep_features(t, dim):
    """Sinusoidal features of a timestep."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half, 1))
    args = float(t) * freqs
    features = np.concatenate([np.cos(args), np.sin(args),
                               np.zeros(dim - 2 * half)])
    return as_array(features)


###############################################################################
# Network


def _attend(q, k, v, scale):
    scores = matmul(q * scale, as_array(k.transpose(0, 2, 1)))
    return matmul(softmax(scores, axis=-1), v)


def _canonical_order(k, v):
    """Sort the keys and values of each row lexicographically."""
    keys = np.concatenate([k, v], axis=2).transpose(2, 0, 1)[::-1]
    order = np.lexsort(keys, axis=-1)[..., None]
    return (as_array(np.take_along_axis(k, order, axis=1)),
            as_array(np.take_along_axis(v, order, axis=1)))


class ToyVideoLDM:
    """Noise prediction network.

    Parameters
    ----------
    weights : ModelWeights
    parallel : bool
        Use the multi-threaded numeric kernels.

    Attributes
    ----------
    unet_passes : int
        Number of :meth:`predict_noise` calls.
    temporal_attention_calls : int
        Number of temporal self-attention layer evaluations.
    temporal_attention_pairs : int
        Query-key pairs scored per spatial site, summed over calls.
    peak_frames : int
        Largest number of frames processed in one pass.
    """

    def __init__(self, weights, parallel=False):
        self.weights = weights
        self.config = weights.config
        self.parallel = parallel
        self.block_names = self.config.block_names()
        self._uncond = None
        self.reset_counters()

    @classmethod
    def from_config(cls, config=None, parallel=False):
        """Build a network with freshly generated weights."""
        config = ModelConfig() if config is None else config
        return cls(ModelWeights.generate(config), parallel=parallel)

    @property
    def n_cross_attention_layers(self):
        return self.config.n_cross_attention_layers

    @property
    def n_encoder_layers(self):
        return self.config.n_encoder_layers

    def reset_counters(self):
        self.unet_passes = 0
        self.temporal_attention_calls = 0
        self.temporal_attention_pairs = 0
        self.peak_frames = 0

    def embed_prompt(self, text):
        """Prompt embedding sized for this network."""
        return embed_prompt(text, self.config.text_tokens,
                            self.config.text_dim)

    def unconditional_embedding(self):
        """Empty-prompt embedding used by the unconditional branch."""
        if self._uncond is None:
            self._uncond = unconditional_embedding(self.config.text_tokens,
                                                   self.config.text_dim)
        return self._uncond

    # Layers

    def _p(self, name):
        return self.weights.params[name]

    def _norm(self, x, name, axis):
        return layer_norm(x, axis=axis, gain=self._p(name + ".gain"),
                          bias=self._p(name + ".bias"))

    def _dense(self, x, name, bias=True):
        return linear(x, self._p(name + ".weight"),
                      self._p(name + ".bias") if bias else None,
                      parallel=self.parallel)

    def _channel_dense(self, h, name):
        """Dense layer over the channel axis of a (C, M, H, W) array."""
        out = self._dense(h.transpose(1, 2, 3, 0), name)
        return as_array(out.transpose(3, 0, 1, 2))

    def _split_heads(self, x):
        n_batch, n_tokens, _ = x.shape
        heads, head_dim = self.config.heads, self.config.head_dim
        x = x.reshape(n_batch, n_tokens, heads, head_dim).transpose(0, 2, 1, 3)
        return as_array(x.reshape(n_batch * heads, n_tokens, head_dim))

    def _merge_heads(self, x, n_batch):
        _, n_tokens, head_dim = x.shape
        heads = self.config.heads
        x = x.reshape(n_batch, heads, n_tokens, head_dim).transpose(0, 2, 1, 3)
        return as_array(x.reshape(n_batch, n_tokens, heads * head_dim))

    def _scale(self):
        return np.float32(1.0 / np.sqrt(self.config.head_dim))

    def _attention(self, x, name, context=None):
        """Multi-head attention over the token axis of a (B, N, C) array."""
        h = self._norm(x, name + ".norm", axis=-1)
        context = h if context is None else context
        q = self._split_heads(linear(h, self._p(name + ".q.weight"),
                                     parallel=self.parallel))
        k = self._split_heads(linear(context, self._p(name + ".k.weight"),
                                     parallel=self.parallel))
        v = self._split_heads(linear(context, self._p(name + ".v.weight"),
                                     parallel=self.parallel))
        out = self._merge_heads(_attend(q, k, v, self._scale()), x.shape[0])
        return self._dense(out, name + ".out")

    def _temporal_attention(self, x, name, plan):
        """Self-attention along the frame axis of a (S, M, C) array."""
        n_sites, n_frames, _ = x.shape
        h = self._norm(x, name + ".norm", axis=-1)
        q, k, v = (self._split_heads(linear(h, self._p(name + part),
                                            parallel=self.parallel))
                   for part in (".q.weight", ".k.weight", ".v.weight"))
        if plan is None:
            k, v = _canonical_order(k, v)
            out = _attend(q, k, v, self._scale())
            self.temporal_attention_pairs += n_frames * n_frames
        else:
            outputs = []
            for start in plan.starts:
                window = slice(start, start + plan.window)
                k_win, v_win = _canonical_order(as_array(k[:, window]),
                                                as_array(v[:, window]))
                outputs.append(_attend(as_array(q[:, window]), k_win, v_win,
                                       self._scale()))
            out = fuse_windows(outputs, plan, axis=1)
            self.temporal_attention_pairs += plan.n_windows * plan.window ** 2
        self.temporal_attention_calls += 1
        return self._dense(self._merge_heads(out, n_sites), name + ".out")

    def _mlp(self, x, name):
        h = self._norm(x, name + ".norm", axis=-1)
        return self._dense(silu(self._dense(h, name + ".fc1")), name + ".fc2")

    def _res_block(self, h, prefix, t_emb):
        x = silu(self._norm(h, prefix + ".norm1", axis=0))
        x = conv_spatial(x, self._p(prefix + ".conv1.weight"),
                         parallel=self.parallel)
        x = x + self._p(prefix + ".conv1.bias")[:, None, None, None]
        t_proj = self._dense(silu(t_emb), prefix + ".temb")
        x = x + t_proj[:, None, None, None]
        x = silu(self._norm(x, prefix + ".norm2", axis=0))
        x = conv_spatial(x, self._p(prefix + ".conv2.weight"),
                         parallel=self.parallel)
        return h + (x + self._p(prefix + ".conv2.bias")[:, None, None, None])

    def _temporal_conv(self, h, prefix):
        if not self.config.temporal_conv:
            return h
        x = silu(self._norm(h, prefix + ".norm", axis=0))
        x = conv_temporal(x, self._p(prefix + ".weight"),
                          parallel=self.parallel)
        return h + (x + self._p(prefix + ".bias")[:, None, None, None])

    def _spatial_transformer(self, h, prefix, embeddings):
        channels, n_frames, height, width = h.shape
        x = as_array(h.transpose(1, 2, 3, 0)).reshape(
            n_frames, height * width, channels)
        x = self._dense(self._norm(x, prefix + ".norm", axis=-1),
                        prefix + ".proj_in")
        x = x + self._attention(x, prefix + ".attn1")
        x = x + self._attention(x, prefix + ".attn2", context=embeddings)
        x = x + self._mlp(x, prefix + ".mlp")
        x = self._dense(x, prefix + ".proj_out")
        x = x.reshape(n_frames, height, width, channels).transpose(3, 0, 1, 2)
        return as_array(h + x)

    def _temporal_transformer(self, h, prefix, plan):
        channels, n_frames, height, width = h.shape
        x = as_array(h.transpose(2, 3, 1, 0)).reshape(
            height * width, n_frames, channels)
        x = self._dense(self._norm(x, prefix + ".norm", axis=-1),
                        prefix + ".proj_in")
        x = x + self._temporal_attention(x, prefix + ".attn1", plan)
        x = x + self._temporal_attention(x, prefix + ".attn2", plan)
        x = x + self._mlp(x, prefix + ".mlp")
        x = self._dense(x, prefix + ".proj_out")
        x = x.reshape(height, width, n_frames, channels).transpose(3, 2, 0, 1)
        return as_array(h + x)

    # Conditioning

    def _frame_embeddings(self, cond, t, layer, frame_offset, n_frames):
        """Per-frame prompt embeddings of one cross-attention layer."""
        if hasattr(cond, "resolve_frames"):
            frames = range(frame_offset, frame_offset + n_frames)
            embeddings = cond.resolve_frames(t, layer, frames)
        else:
            embeddings = as_array(cond)
            if embeddings.ndim == 2:
                embeddings = np.broadcast_to(embeddings,
                                             (n_frames, ) + embeddings.shape)
        expected = (n_frames, self.config.text_tokens, self.config.text_dim)
        if embeddings.shape != expected:
            raise ShapeError("prompt embeddings have shape %s, expected %s"
                             % (embeddings.shape, expected))
        return as_array(embeddings)

    def _window_plan(self, mode, n_frames):
        plan = mode.plan if isinstance(mode, AttentionMode) else mode
        if plan is not None and plan.total != n_frames:
            raise ShapeError("window plan covers %d frames, input has %d"
                             % (plan.total, n_frames))
        return plan

    def _check_hidden(self, h):
        h = as_array(h)
        if h.ndim != 4 or h.shape[0] != self.config.hidden_channels:
            raise ShapeError("expected hidden features with %d channels, got "
                             "shape %s" % (self.config.hidden_channels,
                                           h.shape))
        return h

    # Public blocks

    def timestep_embedding(self, t):
        """Timestep embedding: sinusoidal features and a two-layer MLP."""
        features = timestep_features(t, self.config.hidden_channels)
        return self._dense(silu(self._dense(features, "time.fc1")),
                           "time.fc2")

    def spatial_block(self, h, t_emb, cond, layer=0):
        """Residual block and spatial transformer of block ``layer``.

        Parameters
        ----------
        h : array of shape (hidden_channels, M, H, W)
        t_emb : array of shape (hidden_channels, )
            Output of :meth:`timestep_embedding`.
        cond : array of shape (text_tokens, text_dim) or \
(M, text_tokens, text_dim)
            Prompt embedding, shared or per frame.
        layer : int
            Block index in forward order.

        Returns
        -------
        h : array of shape (hidden_channels, M, H, W)
        """
        h = self._check_hidden(h)
        prefix = self.block_names[layer]
        embeddings = self._frame_embeddings(cond, 0, layer, 0, h.shape[1])
        h = self._res_block(h, prefix + ".res", as_array(t_emb))
        return self._spatial_transformer(h, prefix + ".st", embeddings)

    def temporal_block(self, h, mode=GLOBAL, layer=0):
        """Temporal convolution and temporal transformer of block ``layer``.

        Parameters
        ----------
        h : array of shape (hidden_channels, M, H, W)
        mode : AttentionMode, WindowPlan or None
            Temporal attention scope. None attends over all frames.
        layer : int
            Block index in forward order.
        """
        h = self._check_hidden(h)
        prefix = self.block_names[layer]
        plan = self._window_plan(mode, h.shape[1])
        h = self._temporal_conv(h, prefix + ".tconv")
        return self._temporal_transformer(h, prefix + ".tt", plan)

    def _video_block(self, h, layer, t_emb, t, cond, frame_offset, plan):
        prefix = self.block_names[layer]
        h = self._res_block(h, prefix + ".res", t_emb)
        h = self._temporal_conv(h, prefix + ".tconv")
        embeddings = self._frame_embeddings(cond, t, layer, frame_offset,
                                            h.shape[1])
        h = self._spatial_transformer(h, prefix + ".st", embeddings)
        return self._temporal_transformer(h, prefix + ".tt", plan)

    def predict_noise(self, z_t, t, cond, mode=GLOBAL, frame_offset=0):
        """Predict the noise of a latent video.

        Parameters
        ----------
        z_t : array of shape (latent_channels, M, H, W)
            Noisy latent. H and W must be multiples of
            ``config.spatial_factor``.
        t : int
            Diffusion timestep.
        cond : array or ConditionResolver
            Prompt embedding of shape (text_tokens, text_dim), per-frame
            embeddings of shape (M, text_tokens, text_dim), or an object
            with a ``resolve_frames(t, layer, frames)`` method.
        mode : AttentionMode, WindowPlan or None
            Temporal attention scope.
        frame_offset : int
            Index of the first frame of ``z_t`` in the full video, passed to
            the resolver.

        Returns
        -------
        eps : array of shape (latent_channels, M, H, W)
        """
        config = self.config
        z_t = as_array(z_t)
        if z_t.ndim != 4 or z_t.shape[0] != config.latent_channels:
            raise ShapeError("expected a latent with %d channels, got shape %s"
                             % (config.latent_channels, z_t.shape))
        if (z_t.shape[2] % config.spatial_factor or
                z_t.shape[3] % config.spatial_factor):
            raise ShapeError("latent height and width must be multiples of "
                             "%d, got %s" % (config.spatial_factor,
                                             z_t.shape[2:]))
        n_frames = z_t.shape[1]
        plan = self._window_plan(mode, n_frames)
        self.unet_passes += 1
        self.peak_frames = max(self.peak_frames, n_frames)

        t_emb = self.timestep_embedding(t)
        h = conv_spatial(z_t, self._p("conv_in.weight"),
                         parallel=self.parallel)
        h = h + self._p("conv_in.bias")[:, None, None, None]

        layer, skips = 0, []
        args = (t_emb, t, cond, frame_offset, plan)
        for level in range(config.levels - 1):
            for _ in range(config.num_blocks):
                h = self._video_block(h, layer, *args)
                layer += 1
            skips.append(h)
            h = avg_pool2(h)
        for _ in range(config.num_blocks):
            h = self._video_block(h, layer, *args)
            layer += 1
        for level in reversed(range(config.levels - 1)):
            h = np.concatenate([upsample2(h), skips.pop()], axis=0)
            h = self._channel_dense(h, "up%d.merge" % level)
            for _ in range(config.num_blocks):
                h = self._video_block(h, layer, *args)
                layer += 1

        h = silu(self._norm(h, "out.norm", axis=0))
        eps = conv_spatial(h, self._p("out.conv.weight"),
                           parallel=self.parallel)
        eps = eps + self._p("out.conv.bias")[:, None, None, None]
        if not np.isfinite(eps).all():
            raise ModelError("non-finite noise prediction at t=%d" % t)
        return as_array(eps)
