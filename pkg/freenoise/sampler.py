"""DDIM sampling with classifier-free guidance, and long video modes.

Four inference modes are available:

- ``"direct"``: i.i.d. noise for all frames, global temporal attention.
- ``"sliding"``: i.i.d. noise, temporal attention inside overlapping windows
  of ``n_train`` frames, fused with center-distance weights.
- ``"genl"``: i.i.d. noise, a full network pass on each overlapping segment
  of ``n_train`` frames, the predicted noises averaged on overlaps.
- ``"freenoise"``: rescheduled noise and fused window attention.
"""
from dataclasses import dataclass, field, replace

import numpy as np
from himalaya.progress_bar import bar

from .errors import ConfigError, OrderError, ShapeError
from .motion_injection import ConditionResolver, PromptTimeline
from .noise_schedule import build_shuffle_plan, draw_noise, materialize_noise
from .numerics import DTYPE, STREAM_ETA, Rng, as_array, rng_normal

MODES = ("direct", "sliding", "genl", "freenoise")
WEIGHTINGS = ("center", "uniform")


###############################################################################
# Diffusion schedule


@dataclass(frozen=True)
class DiffusionSchedule:
    """Variance schedule and DDIM timestep subsequence.

    Tables have ``n_timesteps + 1`` entries. Index 0 is the clean state, with
    ``betas[0] = 0`` and ``alpha_bars[0] = 1``.

    Attributes
    ----------
    n_timesteps : int
    beta_start, beta_end : float
    ddim_steps : int
    eta : float
    betas, alphas, alpha_bars : array of shape (n_timesteps + 1, )
    timesteps : array of shape (ddim_steps, )
        Ascending DDIM timesteps. Sampling visits them in reverse.
    """
    n_timesteps: int
    beta_start: float
    beta_end: float
    ddim_steps: int
    eta: float
    betas: np.ndarray = field(repr=False)
    alphas: np.ndarray = field(repr=False)
    alpha_bars: np.ndarray = field(repr=False)
    timesteps: np.ndarray = field(repr=False)

    def sampling_pairs(self):
        """Return the list of ``(t, t_prev)`` pairs visited by DDIM."""
        descending = [int(t) for t in self.timesteps[::-1]]
        return list(zip(descending, descending[1:] + [0]))


def make_diffusion_schedule(n_timesteps=1000, beta_start=1e-4, beta_end=2e-2,
                            ddim_steps=50, eta=0.0):
    """Build a linear beta schedule and its DDIM subsequence.

    Parameters
    ----------
    n_timesteps : int
        Number of training timesteps T.
    beta_start, beta_end : float
        Linear beta range, ``0 < beta_start < beta_end < 1``.
    ddim_steps : int
        Number of sampling steps, ``ddim_steps <= n_timesteps``. The
        subsequence is ``c, 2c, ..., ddim_steps * c`` with
        ``c = n_timesteps // ddim_steps``.
    eta : float
        DDIM stochasticity. 0 gives deterministic sampling.

    Returns
    -------
    schedule : DiffusionSchedule
    """
    if n_timesteps < 1:
        raise ConfigError("must be >= 1, got %d" % n_timesteps,
                          key="timesteps")
    if not 0 < beta_start < beta_end < 1:
        raise ConfigError("need 0 < beta_start < beta_end < 1, got %r, %r"
                          % (beta_start, beta_end), key="beta_start")
    if not 1 <= ddim_steps <= n_timesteps:
        raise ConfigError("need 1 <= steps <= %d, got %d"
                          % (n_timesteps, ddim_steps), key="steps")
    if eta < 0:
        raise ConfigError("must be >= 0, got %r" % eta, key="eta")

    betas = np.zeros(n_timesteps + 1)
    betas[1:] = np.linspace(beta_start, beta_end, n_timesteps)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    stride = n_timesteps // ddim_steps
    timesteps = stride * np.arange(1, ddim_steps + 1)
    return DiffusionSchedule(n_timesteps, beta_start, beta_end, ddim_steps,
                             float(eta), betas, alphas, alpha_bars, timesteps)


def _check_timestep(t, schedule):
    if not 0 <= t <= schedule.n_timesteps:
        raise IndexError("timestep %d outside [0, %d]"
                         % (t, schedule.n_timesteps))


def q_sample(x0, t, eps, schedule):
    """Diffuse ``x0`` to timestep ``t`` with the noise ``eps``."""
    _check_timestep(t, schedule)
    x0, eps = as_array(x0), as_array(eps)
    if x0.shape != eps.shape:
        raise ShapeError("x0 %s and eps %s differ in shape"
                         % (x0.shape, eps.shape))
    alpha_bar = schedule.alpha_bars[t]
    return (DTYPE(np.sqrt(alpha_bar)) * x0 +
            DTYPE(np.sqrt(1.0 - alpha_bar)) * eps)


def ddim_step(x_t, eps_hat, t, t_prev, schedule, noise=None):
    """One DDIM update from timestep ``t`` to ``t_prev``.

    Parameters
    ----------
    x_t : array
        Current latent.
    eps_hat : array
        Predicted noise, same shape as ``x_t``.
    t, t_prev : int
        Timesteps, ``t > t_prev >= 0``.
    schedule : DiffusionSchedule
    noise : array or None
        Standard-normal noise for ``schedule.eta > 0``. If None, it is drawn
        from a stream keyed by ``t``.

    Returns
    -------
    x_prev : array
    """
    if t_prev >= t:
        raise OrderError("DDIM step needs t > t_prev, got t=%d, t_prev=%d"
                         % (t, t_prev))
    _check_timestep(t, schedule)
    _check_timestep(t_prev, schedule)
    x_t, eps_hat = as_array(x_t), as_array(eps_hat)

    ab_t = schedule.alpha_bars[t]
    ab_prev = schedule.alpha_bars[t_prev]
    x0 = (x_t - DTYPE(np.sqrt(1.0 - ab_t)) * eps_hat) / DTYPE(np.sqrt(ab_t))
    if schedule.eta == 0:
        return (DTYPE(np.sqrt(ab_prev)) * x0 +
                DTYPE(np.sqrt(1.0 - ab_prev)) * eps_hat)

    sigma = schedule.eta * np.sqrt(
        (1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - ab_t / ab_prev))
    if noise is None:
        noise = rng_normal(Rng(0, STREAM_ETA + t), x_t.shape)
    direction = np.sqrt(max(1.0 - ab_prev - sigma ** 2, 0.0))
    return (DTYPE(np.sqrt(ab_prev)) * x0 + DTYPE(direction) * eps_hat +
            DTYPE(sigma) * as_array(noise))


def cfg_combine(eps_uncond, eps_cond, scale):
    """Classifier-free guidance: ``eps_u + scale * (eps_c - eps_u)``."""
    eps_uncond, eps_cond = as_array(eps_uncond), as_array(eps_cond)
    return eps_uncond + DTYPE(scale) * (eps_cond - eps_uncond)


###############################################################################
# Windows


@dataclass(frozen=True)
class WindowPlan:
    """Overlapping temporal windows and their per-frame fusion weights.

    Attributes
    ----------
    total : int
        Number of frames M.
    window : int
        Window length U.
    stride : int
        Distance between consecutive window starts.
    weighting : str
        ``"center"`` or ``"uniform"``.
    starts : array of int of shape (n_windows, )
    raw_weights : array of shape (n_windows, window)
        Unnormalized weight of each window at each of its frames.
    weights : array of shape (n_windows, window)
        Float32 weights, normalized per frame over the covering windows.
    """
    total: int
    window: int
    stride: int
    weighting: str
    starts: np.ndarray
    raw_weights: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def n_windows(self):
        return len(self.starts)

    @property
    def centers(self):
        return self.starts + (self.window - 1) / 2

    @property
    def ends(self):
        return self.starts + self.window

    def covering(self, frame):
        """Return the indices of the windows covering ``frame``."""
        return np.flatnonzero((self.starts <= frame) & (frame < self.ends))

    def frame_weights(self, frame):
        """Return ``(windows, raw, normalized)`` weights of one frame."""
        windows = self.covering(frame)
        local = frame - self.starts[windows]
        return (windows, self.raw_weights[windows, local],
                self.weights[windows, local])

    def to_text(self):
        """Return the window table and per-frame weights as text."""
        lines = ["%d windows (total=%d, window=%d, stride=%d, weighting=%s)"
                 % (self.n_windows, self.total, self.window, self.stride,
                    self.weighting),
                 "window  start  center  end"]
        for jj, (start, center) in enumerate(zip(self.starts, self.centers)):
            lines.append("%6d %6d %7.1f %4d" %
                         (jj, start, center, start + self.window))
        lines.append("frame  window:weight ...")
        for frame in range(self.total):
            windows, _, normalized = self.frame_weights(frame)
            pairs = " ".join("%d:%.4f" % pair
                             for pair in zip(windows, normalized))
            lines.append("%5d  %s" % (frame, pairs))
        return "\n".join(lines)


def plan_windows(total, window, stride, weighting="center"):
    """Plan the overlapping windows covering ``total`` frames.

    Parameters
    ----------
    total : int
        Number of frames M, ``M >= U``.
    window : int
        Window length U.
    stride : int
        Distance between window starts; ``(M - U)`` must be a multiple.
    weighting : {"center", "uniform"}
        With ``"center"``, window ``j`` weighs frame ``i`` by
        ``U / 2 - floor(|i - c_j|)`` where ``c_j = start_j + (U - 1) / 2``.
        With ``"uniform"``, every covering window weighs the same.

    Returns
    -------
    plan : WindowPlan
    """
    if window < 1:
        raise ConfigError("window must be >= 1, got %d" % window,
                          key="n_train")
    if stride < 1:
        raise ConfigError("stride must be >= 1, got %d" % stride,
                          key="stride")
    if total < window:
        raise ConfigError("frames=%d must be >= window=%d" % (total, window),
                          key="frames")
    if (total - window) % stride:
        raise ConfigError(
            "alignment: frames - window = %d must be a multiple of the "
            "stride %d" % (total - window, stride), key="frames")
    if weighting not in WEIGHTINGS:
        raise ConfigError("weighting must be one of %s, got %r"
                          % (WEIGHTINGS, weighting), key="weighting")

    starts = np.arange(0, total - window + 1, stride)
    if weighting == "center":
        offsets = np.abs(np.arange(window) - (window - 1) / 2)
        raw = np.tile(window / 2 - np.floor(offsets), (len(starts), 1))
    else:
        raw = np.ones((len(starts), window))

    denominator = np.zeros(total)
    for start, row in zip(starts, raw):
        denominator[start:start + window] += row
    weights = np.stack([row / denominator[start:start + window]
                        for start, row in zip(starts, raw)]).astype(DTYPE)
    return WindowPlan(total, window, stride, weighting, starts, raw, weights)


def fuse_windows(outputs, plan, axis=1):
    """Blend per-window outputs into one sequence.

    Frame ``i`` of the result is the weighted sum, in window order, of the
    outputs of the windows covering it. A frame covered by one window is
    passed through unchanged.

    Parameters
    ----------
    outputs : list of arrays
        One array per window, each with ``plan.window`` entries along
        ``axis``.
    plan : WindowPlan
    axis : int
        Frame axis, 1 for ``(C, U, H, W)`` outputs.

    Returns
    -------
    fused : array
        Same shape as the outputs, with ``plan.total`` entries along
        ``axis``.
    """
    if len(outputs) != plan.n_windows:
        raise ShapeError("got %d window outputs for %d windows"
                         % (len(outputs), plan.n_windows))
    moved = [np.moveaxis(as_array(out), axis, 0) for out in outputs]
    inner = moved[0].shape[1:]
    for out in moved:
        if out.shape != (plan.window, ) + inner:
            raise ShapeError("window output has %d frames and shape %s, "
                             "expected %d frames and shape %s"
                             % (out.shape[0], out.shape[1:], plan.window,
                                inner))

    fused = np.empty((plan.total, ) + inner, dtype=DTYPE)
    covered = np.zeros(plan.total, dtype=bool)
    broadcast = (plan.window, ) + (1, ) * len(inner)
    for start, out, weight in zip(plan.starts, moved, plan.weights):
        term = out * weight.reshape(broadcast)
        view = fused[start:start + plan.window]
        new = ~covered[start:start + plan.window]
        view[new] = term[new]
        view[~new] += term[~new]
        covered[start:start + plan.window] = True
    return as_array(np.moveaxis(fused, 0, axis))


###############################################################################
# Sampling


@dataclass(frozen=True)
class SamplerConfig:
    """Parameters of one long video sampling run.

    Attributes
    ----------
    mode : {"direct", "sliding", "genl", "freenoise"}
    n_train : int
        Frames the model was trained on, also the window length U.
    total : int
        Frames to generate M.
    unit : int
        Shuffle unit S, also the window stride.
    guidance_scale : float
    seed : int
    genl_stride : int or None
        Segment stride of the ``"genl"`` mode. Defaults to ``unit``.
    sliding_disjoint : bool
        Use non-overlapping windows (stride U) in the ``"sliding"`` mode.
    latent_height, latent_width : int
        Spatial size of the latent video.
    """
    mode: str = "freenoise"
    n_train: int = 16
    total: int = 64
    unit: int = 4
    guidance_scale: float = 15.0
    seed: int = 0
    genl_stride: int = None
    sliding_disjoint: bool = False
    latent_height: int = 8
    latent_width: int = 8

    @property
    def stride(self):
        """Window or segment stride used by the mode."""
        if self.mode == "genl":
            return self.unit if self.genl_stride is None else self.genl_stride
        if self.mode == "sliding" and self.sliding_disjoint:
            return self.n_train
        return self.unit

    def validate(self):
        """Raise ConfigError if the configuration is inconsistent."""
        if self.mode not in MODES:
            raise ConfigError("must be one of %s, got %r" % (MODES, self.mode),
                              key="mode")
        for key in ("n_train", "total", "unit", "latent_height",
                    "latent_width"):
            if getattr(self, key) < 1:
                raise ConfigError("must be >= 1, got %d" % getattr(self, key),
                                  key=key)
        if self.mode == "direct":
            return self
        if self.n_train % self.unit:
            raise ConfigError("unit %d must divide n_train=%d"
                              % (self.unit, self.n_train), key="unit")
        if self.total < self.n_train:
            raise ConfigError("frames=%d must be >= n_train=%d"
                              % (self.total, self.n_train), key="frames")
        if self.stride < 1:
            raise ConfigError("must be >= 1, got %d" % self.stride,
                              key="genl_stride")
        if (self.total - self.n_train) % self.stride:
            raise ConfigError(
                "alignment: frames - n_train = %d must be a multiple of the "
                "stride %d" % (self.total - self.n_train, self.stride),
                key="frames")
        return self

    def window_plan(self):
        """Return the window plan of the mode, or None for ``"direct"``."""
        if self.mode == "direct":
            return None
        weighting = "uniform" if self.mode == "genl" else "center"
        return plan_windows(self.total, self.n_train, self.stride, weighting)

    def latent_shape(self, channels):
        return (channels, self.total, self.latent_height, self.latent_width)


def draw_initial_noise(config, channels):
    """Draw the initial latent noise of a sampling run.

    The ``"freenoise"`` mode draws ``n_train`` base frames and reschedules
    them. Other modes draw every frame independently; the first ``n_train``
    frames of this draw equal the base frames.
    """
    height, width = config.latent_height, config.latent_width
    if config.mode != "freenoise":
        return draw_noise(config.total, channels, height, width, config.seed)
    base = draw_noise(config.n_train, channels, height, width, config.seed)
    plan = build_shuffle_plan(config.n_train, config.unit, config.total,
                              config.seed)
    return materialize_noise(plan, base)


def guided_noise(model, z_t, t, config, plan, cond, uncond):
    """Predict the guided noise of one denoising step.

    Parameters
    ----------
    model : ToyVideoLDM
    z_t : array of shape (C, M, H, W)
    t : int
    config : SamplerConfig
    plan : WindowPlan or None
        Window plan of the mode.
    cond : ConditionResolver or array
        Conditional branch.
    uncond : array
        Unconditional prompt embedding.

    Returns
    -------
    eps : array of shape (C, M, H, W)
    """
    if config.mode == "genl":
        segments = []
        for start in plan.starts:
            segment = z_t[:, start:start + plan.window]
            eps_u = model.predict_noise(segment, t, uncond,
                                        frame_offset=int(start))
            eps_c = model.predict_noise(segment, t, cond,
                                        frame_offset=int(start))
            segments.append(cfg_combine(eps_u, eps_c, config.guidance_scale))
        return fuse_windows(segments, plan, axis=1)

    eps_u = model.predict_noise(z_t, t, uncond, plan)
    eps_c = model.predict_noise(z_t, t, cond, plan)
    return cfg_combine(eps_u, eps_c, config.guidance_scale)


def sample_video(config, timeline, model, schedule, initial_noise=None,
                 resolver=None, verbose=False):
    """Sample a latent video with DDIM and classifier-free guidance.

    Parameters
    ----------
    config : SamplerConfig
    timeline : PromptTimeline or array of shape (text_tokens, text_dim)
        Conditioning. A plain prompt embedding conditions every frame.
    model : ToyVideoLDM
    schedule : DiffusionSchedule
    initial_noise : array of shape (C, M, H, W) or None
        Starting latent. If None, drawn according to the mode.
    resolver : ConditionResolver or None
        Resolver recording the routing of ``timeline``. If None and
        ``timeline`` is a PromptTimeline, a fresh one is created.
    verbose : bool
        Show a progress bar over the denoising steps.

    Returns
    -------
    latent : array of shape (C, M, H, W)
    """
    config.validate()
    channels = model.config.latent_channels
    shape = config.latent_shape(channels)
    if initial_noise is None:
        z_t = draw_initial_noise(config, channels)
    else:
        z_t = as_array(initial_noise)
        if z_t.shape != shape:
            raise ShapeError("initial noise has shape %s, expected %s"
                             % (z_t.shape, shape))

    if isinstance(timeline, PromptTimeline):
        if timeline.total != config.total:
            raise ShapeError("prompt timeline covers %d frames, the run has "
                             "%d" % (timeline.total, config.total))
        cond = ConditionResolver(timeline) if resolver is None else resolver
    else:
        cond = as_array(timeline)
    uncond = model.unconditional_embedding()
    plan = config.window_plan()

    for t, t_prev in bar(schedule.sampling_pairs(), title="ddim",
                         use_it=verbose):
        eps = guided_noise(model, z_t, t, config, plan, cond, uncond)
        z_t = ddim_step(z_t, eps, t, t_prev, schedule)
    return z_t


def with_mode(config, mode):
    """Return a copy of ``config`` running in another mode."""
    return replace(config, mode=mode)
