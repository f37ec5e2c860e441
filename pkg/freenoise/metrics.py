"""Toy video quality metrics, compute accounting and benchmarking."""
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
from himalaya.progress_bar import bar
from sklearn.metrics.pairwise import polynomial_kernel

from .errors import BenchError, ConfigError, InputError
from .features import FrameFeatureExtractor, frames_to_pixels
from .sampler import MODES, guided_noise, sample_video
from .toy_videoldm import ModelConfig, ToyVideoLDM


def video_features(video, extractor=None):
    """Unit-norm features of every frame of a (C, M, H, W) video."""
    pixels = frames_to_pixels(video)
    if extractor is None:
        extractor = FrameFeatureExtractor().fit(pixels)
    return extractor.transform(pixels)


def _cosine(a, b):
    ab = np.sum(a * b, axis=1)
    aa = np.sum(a * a, axis=1)
    bb = np.sum(b * b, axis=1)
    denominator = np.sqrt(aa * bb)
    both_zero = (aa == 0) & (bb == 0)
    safe = np.where(denominator == 0, 1.0, denominator)
    return np.where(both_zero, 1.0, ab / safe)


def consistency_sim(video, lag=1, extractor=None):
    """Mean cosine similarity of frame features ``lag`` frames apart.

    With ``lag=1`` this is the adjacent-frame consistency. Larger lags, such
    as the training length, measure long-range consistency.

    Parameters
    ----------
    video : array of shape (C, M, H, W)
    lag : int
        Distance between the compared frames.
    extractor : FrameFeatureExtractor or None
        Fitted extractor. Defaults to a fresh ``FrameFeatureExtractor()``.

    Returns
    -------
    similarity : float in [-1, 1]
    """
    if lag < 1:
        raise ConfigError("must be >= 1, got %d" % lag, key="lag")
    video = np.asarray(video)
    if video.ndim != 4 or video.shape[1] <= lag:
        raise InputError("need more than %d frames, got video of shape %s"
                         % (lag, video.shape))
    features = video_features(video, extractor)
    cosines = _cosine(features[:-lag], features[lag:])
    return math.fsum(cosines) / len(cosines)


def _pooled_features(videos, extractor):
    if len(videos) == 0:
        raise InputError("video set is empty")
    if len(videos) < 2:
        raise InputError("video sets need at least 2 videos, got 1")
    pixels = np.concatenate([frames_to_pixels(video) for video in videos])
    if extractor is None:
        extractor = FrameFeatureExtractor().fit(pixels)
    return extractor.transform(pixels)


def frechet_distance(features_a, features_b, covariance="diag"):
    """Squared Frechet distance between Gaussians fitted to two feature sets.

    Parameters
    ----------
    features_a, features_b : array of shape (n_samples, n_features)
    covariance : {"diag", "full"}
        ``"diag"`` fits diagonal Gaussians,
        ``|mu_a - mu_b|^2 + sum_i (sd_a,i - sd_b,i)^2``. ``"full"`` uses
        full covariances and a matrix square root.

    Returns
    -------
    distance : float >= 0
    """
    features_a = np.asarray(features_a, dtype=np.float64)
    features_b = np.asarray(features_b, dtype=np.float64)
    mean_diff = features_a.mean(axis=0) - features_b.mean(axis=0)
    distance = np.sum(mean_diff * mean_diff)
    if covariance == "diag":
        sd_diff = np.sqrt(features_a.var(axis=0)) - np.sqrt(
            features_b.var(axis=0))
        distance += np.sum(sd_diff * sd_diff)
    elif covariance == "full":
        cov_a = np.cov(features_a, rowvar=False, bias=True)
        cov_b = np.cov(features_b, rowvar=False, bias=True)
        cross = scipy.linalg.sqrtm(cov_a @ cov_b).real
        distance += np.trace(cov_a) + np.trace(cov_b) - 2 * np.trace(cross)
    else:
        raise ConfigError("must be 'diag' or 'full', got %r" % covariance,
                          key="covariance")
    return float(max(distance, 0.0))


def frechet_feature_distance(set_a, set_b, covariance="diag", extractor=None):
    """Toy Frechet video distance between two sets of videos.

    Features of every frame are pooled per set.

    Parameters
    ----------
    set_a, set_b : list of arrays of shape (C, M, H, W)
        At least 2 videos each.
    covariance : {"diag", "full"}
    extractor : FrameFeatureExtractor or None

    Returns
    -------
    distance : float >= 0
    """
    return frechet_distance(_pooled_features(set_a, extractor),
                            _pooled_features(set_b, extractor),
                            covariance=covariance)


def kernel_distance(features_a, features_b, degree=3):
    """Unbiased squared MMD with the kernel ``(x.y / d + 1) ** degree``."""
    features_a = np.asarray(features_a, dtype=np.float64)
    features_b = np.asarray(features_b, dtype=np.float64)
    n_a, n_b = len(features_a), len(features_b)
    if n_a < 2 or n_b < 2:
        raise InputError("need at least 2 samples per set, got %d and %d"
                         % (n_a, n_b))
    kwargs = dict(degree=degree, gamma=1.0 / features_a.shape[1], coef0=1)
    k_aa = polynomial_kernel(features_a, features_a, **kwargs)
    k_bb = polynomial_kernel(features_b, features_b, **kwargs)
    k_ab = polynomial_kernel(features_a, features_b, **kwargs)
    return float((k_aa.sum() - np.trace(k_aa)) / (n_a * (n_a - 1)) +
                 (k_bb.sum() - np.trace(k_bb)) / (n_b * (n_b - 1)) -
                 2 * k_ab.mean())


def kernel_feature_distance(set_a, set_b, degree=3, extractor=None):
    """Toy kernel video distance between two sets of videos."""
    return kernel_distance(_pooled_features(set_a, extractor),
                           _pooled_features(set_b, extractor), degree=degree)


def split_into_clips(video, length):
    """Cut a (C, M, H, W) video into consecutive clips of ``length`` frames.

    Trailing frames that do not fill a clip are dropped.
    """
    if length < 1:
        raise ConfigError("must be >= 1, got %d" % length, key="length")
    video = np.asarray(video)
    n_clips = video.shape[1] // length
    if n_clips == 0:
        raise InputError("video of %d frames is shorter than one clip of %d"
                         % (video.shape[1], length))
    return [video[:, ii * length:(ii + 1) * length] for ii in range(n_clips)]


###############################################################################
# Compute accounting


_COUNTING_MODEL = ModelConfig(latent_channels=1, hidden_channels=2, heads=1,
                              head_dim=2, text_dim=2, text_tokens=1, levels=1)


def count_model_passes(config, model=None, t=1):
    """Count the network passes and attention pairs of one denoising step.

    Runs one guided step of ``config`` on a zero latent with instrumented
    counters. The counters do not depend on the network width, so the
    default single-level two-channel network gives the same counts as the
    full one.

    Parameters
    ----------
    config : SamplerConfig
    model : ToyVideoLDM or None
        Network to instrument. Defaults to a minimal network.
    t : int
        Timestep of the dry-run step.

    Returns
    -------
    passes_per_branch : int
        Network passes per step and guidance branch.
    attention_pair_ops : int
        Temporal query-key pairs per step and guidance branch, per spatial
        site and temporal attention layer.
    """
    config.validate()
    if model is None:
        model = ToyVideoLDM.from_config(_COUNTING_MODEL)
        config = replace(config, latent_height=1, latent_width=1)
    model.reset_counters()
    uncond = model.unconditional_embedding()
    z_t = np.zeros(config.latent_shape(model.config.latent_channels),
                   dtype=np.float32)
    guided_noise(model, z_t, t, config, config.window_plan(), uncond, uncond)
    passes = model.unet_passes // 2
    layers_per_pass = model.temporal_attention_calls // model.unet_passes
    pairs = model.temporal_attention_pairs // (2 * layers_per_pass)
    model.reset_counters()
    return passes, pairs


###############################################################################
# Benchmark


@dataclass
class BenchEntry:
    """Measurements of one inference mode."""
    mode: str
    wall_time_per_step: float
    total_wall_time: float
    passes_per_step: int
    attention_pair_ops: int
    peak_frames: int
    times: list = field(default_factory=list, repr=False)


@dataclass
class BenchReport:
    """Benchmark results, one entry per mode.

    Attributes
    ----------
    entries : dict of str to BenchEntry
    total : int
        Number of frames.
    n_train : int
    steps : int
        Number of DDIM steps.
    repetitions : int
        Timed repetitions per mode, after one discarded warm-up.
    parallel : bool
    """
    entries: dict
    total: int
    n_train: int
    steps: int
    repetitions: int
    parallel: bool = False

    def to_text(self):
        """Return the report as an aligned text table."""
        lines = ["frames=%d n_train=%d steps=%d repetitions=%d parallel=%s"
                 % (self.total, self.n_train, self.steps, self.repetitions,
                    self.parallel),
                 "%-10s %12s %12s %8s %10s %6s"
                 % ("mode", "s/step", "total s", "passes", "pairs", "peak")]
        for entry in self.entries.values():
            lines.append("%-10s %12.5f %12.4f %8d %10d %6d"
                         % (entry.mode, entry.wall_time_per_step,
                            entry.total_wall_time, entry.passes_per_step,
                            entry.attention_pair_ops, entry.peak_frames))
        return "\n".join(lines)

    def to_key_values(self):
        """Return the report as ``key = value`` lines."""
        lines = ["frames = %d" % self.total, "n_train = %d" % self.n_train,
                 "steps = %d" % self.steps,
                 "repetitions = %d" % self.repetitions,
                 "parallel = %s" % str(self.parallel).lower()]
        for entry in self.entries.values():
            for key in ("wall_time_per_step", "total_wall_time",
                        "passes_per_step", "attention_pair_ops",
                        "peak_frames"):
                lines.append("%s.%s = %r" % (entry.mode, key,
                                             getattr(entry, key)))
        return "\n".join(lines) + "\n"

    def ratio(self, mode_a, mode_b, key="total_wall_time"):
        """Ratio of a measurement between two modes."""
        return (getattr(self.entries[mode_a], key) /
                getattr(self.entries[mode_b], key))


def run_benchmark(modes, config, model, schedule, timeline=None,
                  repetitions=3, verbose=False):
    """Time full sampling runs of several inference modes.

    Each mode runs once as a warm-up, which also compiles the numeric
    kernels, then ``repetitions`` timed runs. The median is reported.

    Parameters
    ----------
    modes : list of str
    config : SamplerConfig
        Base configuration; its mode is replaced by each entry of ``modes``.
    model : ToyVideoLDM
    schedule : DiffusionSchedule
    timeline : PromptTimeline, array or None
        Conditioning. Defaults to the unconditional embedding.
    repetitions : int
        At least 3.
    verbose : bool

    Returns
    -------
    report : BenchReport
    """
    if repetitions < 3:
        raise ConfigError("must be >= 3, got %d" % repetitions,
                          key="repetitions")
    for mode in modes:
        if mode not in MODES:
            raise ConfigError("must be one of %s, got %r" % (MODES, mode),
                              key="mode")
    if timeline is None:
        timeline = model.unconditional_embedding()
    resolution = time.get_clock_info("perf_counter").resolution

    entries = {}
    n_steps = schedule.ddim_steps
    for mode in modes:
        mode_config = replace(config, mode=mode).validate()
        if verbose:
            print("Benchmarking %s..." % mode)
        sample_video(mode_config, timeline, model, schedule)
        times = []
        for _ in bar(range(repetitions), title=mode, use_it=verbose):
            model.reset_counters()
            start = time.perf_counter()
            sample_video(mode_config, timeline, model, schedule)
            times.append(time.perf_counter() - start)
        median = float(np.median(times))
        if min(times) <= 100 * resolution:
            raise BenchError("run of %g s is too short for the timer "
                             "resolution of %g s" % (min(times), resolution))
        passes = model.unet_passes // (2 * n_steps)
        layers = model.temporal_attention_calls // model.unet_passes
        pairs = model.temporal_attention_pairs // (2 * n_steps * layers)
        entries[mode] = BenchEntry(mode, median / n_steps, median, passes,
                                   pairs, model.peak_frames, times)
    model.reset_counters()
    return BenchReport(entries, config.total, config.n_train, n_steps,
                       repetitions, model.parallel)
