"""Rescheduled initial noise for long video sampling.

The first ``n_train`` frames get independent noise. Every later frame ``i``
reuses base noise ``i mod n_train``, and the order is shuffled inside each
unit of ``unit`` consecutive frames. Every window of ``n_train`` frames
starting at a multiple of ``unit`` therefore sees each base noise exactly
once.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .numerics import STREAM_NOISE, STREAM_SHUFFLE, Rng, as_array
from .numerics import rng_normal, rng_permutation


@dataclass(frozen=True)
class ShufflePlan:
    """Frame to base-noise index mapping.

    Attributes
    ----------
    n_train : int
        Number of base noise frames.
    unit : int
        Shuffle unit size, a divisor of ``n_train``.
    total : int
        Number of frames to generate.
    seed : int
        Seed of the shuffle streams.
    mapping : array of shape (total, )
        ``mapping[i]`` is the base-noise index of frame ``i``.
    """
    n_train: int
    unit: int
    total: int
    seed: int
    mapping: np.ndarray

    @property
    def n_units(self):
        """Number of shuffled units, counting a partial trailing unit."""
        return -(-(self.total - self.n_train) // self.unit)

    def with_mapping(self, mapping):
        """Return a copy of the plan with a different mapping."""
        mapping = np.asarray(mapping, dtype=np.int64)
        if mapping.shape != (self.total, ):
            raise ShapeError("mapping must have %d entries, got %d" %
                             (self.total, mapping.size))
        return ShufflePlan(self.n_train, self.unit, self.total, self.seed,
                           mapping)

    def to_text(self):
        """Return the mapping as text, one ``frame -> base`` pair per line."""
        return "\n".join("%d -> %d" % (frame, base)
                         for frame, base in enumerate(self.mapping))


def build_shuffle_plan(n_train, unit_size, total, seed):
    """Build the frame to base-noise mapping of the rescheduled noise.

    Parameters
    ----------
    n_train : int
        Number of frames the model was trained on.
    unit_size : int
        Shuffle unit size. Must divide ``n_train``.
    total : int
        Number of frames to generate, ``total >= n_train``.
    seed : int
        Seed. Unit ``u`` is shuffled with its own stream, so extending
        ``total`` never changes the earlier units.

    Returns
    -------
    plan : ShufflePlan
    """
    if n_train < 1:
        raise ConfigError("must be >= 1, got %d" % n_train, key="n_train")
    if unit_size < 1 or n_train % unit_size:
        raise ConfigError(
            "unit size %d must divide n_train=%d" % (unit_size, n_train),
            key="unit")
    if total < n_train:
        raise ConfigError(
            "total=%d must be >= n_train=%d" % (total, n_train), key="frames")

    mapping = np.empty(total, dtype=np.int64)
    mapping[:n_train] = np.arange(n_train)
    for uu, start in enumerate(range(n_train, total, unit_size)):
        stop = min(start + unit_size, total)
        block = np.arange(start, stop) % n_train
        order = rng_permutation(Rng(seed, STREAM_SHUFFLE + uu), stop - start)
        mapping[start:stop] = block[order]
    return ShufflePlan(n_train, unit_size, total, seed, mapping)


def draw_noise(n_frames, channels, height, width, seed):
    """Draw i.i.d. standard-normal latent noise from the noise stream.

    Samples are drawn frame-major, so the first ``k`` frames of a longer
    draw equal a draw of ``k`` frames.

    Returns
    -------
    noise : array of shape (channels, n_frames, height, width)
    """
    samples = rng_normal(Rng(seed, STREAM_NOISE),
                         (n_frames, channels, height, width))
    return as_array(samples.transpose(1, 0, 2, 3))


def materialize_noise(plan, base):
    """Expand base noise into the full rescheduled noise sequence.

    Parameters
    ----------
    plan : ShufflePlan
    base : array of shape (C, n_train, H, W)

    Returns
    -------
    noise : array of shape (C, total, H, W)
        Frame ``i`` is a copy of base frame ``plan.mapping[i]``.
    """
    base = as_array(base)
    if base.ndim != 4 or base.shape[1] != plan.n_train:
        raise ShapeError("base noise has shape %s, expected %d frames"
                         % (base.shape, plan.n_train))
    return as_array(base[:, plan.mapping])


def verify_window_coverage(plan, window_size, stride):
    """Check that every stride-aligned window covers all base noises.

    Parameters
    ----------
    plan : ShufflePlan
    window_size : int
        Window length. Must equal ``plan.n_train`` for the check to hold.
    stride : int
        Distance between window starts.

    Returns
    -------
    covered : bool
        True iff every window starting at ``0, stride, ..., total - U``
        holds each base index exactly once.
    """
    if window_size != plan.n_train or stride < 1:
        return False
    expected = np.arange(plan.n_train)
    for start in range(0, plan.total - window_size + 1, stride):
        window = np.sort(plan.mapping[start:start + window_size])
        if not np.array_equal(window, expected):
            return False
    return True
