"""Dense float32 array primitives used by the toy video diffusion model.

Arrays are C-contiguous ``numpy`` arrays of dtype float32. Every reduction
whose order matters accumulates in ascending index order, so that two calls
with equal inputs give bitwise-equal outputs, whatever the position of an
element inside the array. The heavy loops (matrix products and
convolutions) are compiled with ``numba``; each kernel is compiled twice,
once serial and once with ``parallel=True``. Both variants keep the same
per-element accumulation order.
"""
import os
import warnings
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange

from .errors import ConfigError, NumericError, ShapeError

DTYPE = np.float32

# High 32 bits of a stream id identify the consumer, low bits index within it.
STREAM_NOISE = 1 << 32
STREAM_SHUFFLE = 2 << 32
STREAM_WEIGHTS = 3 << 32
STREAM_TEXT = 4 << 32
STREAM_ETA = 5 << 32

_UINT64_MAX = 2 ** 64


def as_array(x):
    """Return ``x`` as a C-contiguous float32 array (no copy if possible)."""
    return np.ascontiguousarray(x, dtype=DTYPE)


###############################################################################
# Random numbers


@dataclass(frozen=True)
class Rng:
    """Counter-based random stream keyed by ``(seed, stream)``.

    The stream is a Philox generator whose 128-bit key is
    ``(stream << 64) | seed``. Two instances with equal fields always produce
    the same sequence, on every platform, and distinct streams are
    statistically independent.

    Parameters
    ----------
    seed : int
        64-bit unsigned seed.
    stream : int
        64-bit unsigned stream identifier.
    """
    seed: int
    stream: int = 0

    def __post_init__(self):
        for name in ("seed", "stream"):
            value = getattr(self, name)
            if not 0 <= int(value) < _UINT64_MAX:
                raise ConfigError("must be a 64-bit unsigned integer, got %r"
                                  % (value, ), key=name)

    def generator(self):
        """Return a fresh numpy Generator positioned at counter zero."""
        key = (int(self.stream) << 64) | int(self.seed)
        return np.random.Generator(np.random.Philox(key=key))


def rng_normal(rng, shape):
    """Draw standard-normal float32 samples with the Box-Muller transform.

    Samples are produced in row-major order from consecutive uniform pairs,
    so a smaller draw is always a prefix of a larger draw from the same
    stream.

    Parameters
    ----------
    rng : Rng
        Random stream.
    shape : tuple of int
        Output shape.

    Returns
    -------
    samples : array of shape ``shape``
    """
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    n_samples = int(np.prod(shape))
    n_pairs = (n_samples + 1) // 2
    uniform = rng.generator().random(2 * n_pairs)
    u1 = 1.0 - uniform[0::2]  # in (0, 1], keeps the log finite
    u2 = uniform[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    samples = np.empty(2 * n_pairs)
    samples[0::2] = radius * np.cos(angle)
    samples[1::2] = radius * np.sin(angle)
    return samples[:n_samples].astype(DTYPE).reshape(shape)


def rng_permutation(rng, n):
    """Return a uniform random permutation of ``range(n)`` (Fisher-Yates)."""
    if n < 1:
        raise ConfigError("permutation length must be >= 1, got %d" % n,
                          key="n")
    return rng.generator().permutation(int(n))


###############################################################################
# Compiled kernels


def _matmul_impl(a, b, out):
    n_batch, m, k = a.shape
    n = b.shape[2]
    for row in prange(n_batch * m):
        bb = row // m
        ii = row % m
        for jj in range(n):
            out[bb, ii, jj] = 0.0
        for kk in range(k):
            aik = a[bb, ii, kk]
            for jj in range(n):
                out[bb, ii, jj] += aik * b[bb, kk, jj]


def _conv_temporal_impl(x, kernel, out):
    c_out, c_in, k = kernel.shape
    n_frames = x.shape[1]
    n_sites = x.shape[2]
    half = k // 2
    for oo in prange(c_out):
        for ff in range(n_frames):
            for pp in range(n_sites):
                out[oo, ff, pp] = 0.0
            for cc in range(c_in):
                for tap in range(k):
                    src = ff + tap - half
                    if src < 0:
                        src = 0
                    elif src > n_frames - 1:
                        src = n_frames - 1
                    weight = kernel[oo, cc, tap]
                    for pp in range(n_sites):
                        out[oo, ff, pp] += weight * x[cc, src, pp]


def _conv_spatial_impl(x, kernel, out):
    c_out, c_in, kh, kw = kernel.shape
    n_frames, height, width = x.shape[1], x.shape[2], x.shape[3]
    ph = kh // 2
    pw = kw // 2
    for oo in prange(c_out):
        for ff in range(n_frames):
            for yy in range(height):
                for xx in range(width):
                    out[oo, ff, yy, xx] = 0.0
            for cc in range(c_in):
                for dy in range(kh):
                    oy = dy - ph
                    y0 = max(0, -oy)
                    y1 = min(height, height - oy)
                    for dx in range(kw):
                        ox = dx - pw
                        x0 = max(0, -ox)
                        x1 = min(width, width - ox)
                        weight = kernel[oo, cc, dy, dx]
                        for yy in range(y0, y1):
                            for xx in range(x0, x1):
                                out[oo, ff, yy, xx] += (
                                    weight * x[cc, ff, yy + oy, xx + ox])


# The parallel variants are not cached: numba keys its cache files on the
# function name, which both variants share.
_KERNELS = {
    "matmul": (njit(cache=True)(_matmul_impl),
               njit(parallel=True)(_matmul_impl)),
    "conv_temporal": (njit(cache=True)(_conv_temporal_impl),
                      njit(parallel=True)(_conv_temporal_impl)),
    "conv_spatial": (njit(cache=True)(_conv_spatial_impl),
                     njit(parallel=True)(_conv_spatial_impl)),
}


def _kernel(name, parallel):
    serial, threaded = _KERNELS[name]
    return threaded if parallel else serial


def configure_threads(n_threads=None):
    """Set the number of threads used by the parallel kernels.

    Parameters
    ----------
    n_threads : int or None
        Number of threads. If None, read the ``FREENOISE_THREADS``
        environment variable; if it is unset, keep numba's default.

    Returns
    -------
    n_threads : int
        Number of threads in use.
    """
    if n_threads is None:
        value = os.environ.get("FREENOISE_THREADS")
        if value is None:
            return numba.get_num_threads()
        try:
            n_threads = int(value)
        except ValueError:
            raise ConfigError("must be an integer, got %r" % value,
                              key="FREENOISE_THREADS")
    if n_threads < 1:
        raise ConfigError("must be >= 1, got %d" % n_threads,
                          key="FREENOISE_THREADS")
    maximum = numba.config.NUMBA_NUM_THREADS
    if n_threads > maximum:
        warnings.warn("FREENOISE_THREADS=%d exceeds the %d available threads."
                      % (n_threads, maximum))
        n_threads = maximum
    numba.set_num_threads(n_threads)
    return n_threads


###############################################################################
# Public operators


def matmul(a, b, parallel=False):
    """Matrix product with ascending-``k`` accumulation.

    Parameters
    ----------
    a : array of shape (m, k) or (n_batch, m, k)
    b : array of shape (k, n) or (n_batch, k, n)
    parallel : bool
        Use the multi-threaded kernel.

    Returns
    -------
    out : array of shape (m, n) or (n_batch, m, n)
    """
    a, b = as_array(a), as_array(b)
    if a.ndim != b.ndim or a.ndim not in (2, 3):
        raise ShapeError("matmul expects two 2-D or two 3-D arrays, got "
                         "shapes %s and %s" % (a.shape, b.shape))
    if a.shape[-1] != b.shape[-2] or a.shape[:-2] != b.shape[:-2]:
        raise ShapeError("matmul dimension mismatch: %s @ %s"
                         % (a.shape, b.shape))
    squeeze = a.ndim == 2
    if squeeze:
        a, b = a[None], b[None]
    out = np.empty((a.shape[0], a.shape[1], b.shape[2]), dtype=DTYPE)
    _kernel("matmul", parallel)(a, b, out)
    return out[0] if squeeze else out


def ordered_sum(x, axis=-1, keepdims=False):
    """Sum along ``axis`` in ascending index order."""
    x = as_array(x)
    moved = np.moveaxis(x, axis, 0)
    total = moved[0].copy()
    for kk in range(1, moved.shape[0]):
        total += moved[kk]
    if keepdims:
        total = np.expand_dims(total, axis)
    return total


def softmax(a, axis=-1):
    """Numerically stable softmax along ``axis``.

    The maximum is subtracted before exponentiation, and the normalizer is
    accumulated in ascending index order.
    """
    a = as_array(a)
    if np.isnan(a).any():
        raise NumericError("softmax input contains NaN")
    shifted = a - a.max(axis=axis, keepdims=True)
    exp = np.exp(shifted.astype(np.float64)).astype(DTYPE)
    return exp / ordered_sum(exp, axis=axis, keepdims=True)


def conv_temporal(x, kernel, padding="replicate", parallel=False):
    """1-D convolution along the frame axis, at each spatial site.

    Parameters
    ----------
    x : array of shape (C, M, H, W)
        Input video features.
    kernel : array of shape (C_out, C, k)
        Convolution taps, ``k`` odd. Tap ``k // 2`` is the current frame.
    padding : {"replicate"}
        Frames outside ``[0, M)`` are clamped to the nearest edge frame.
    parallel : bool
        Use the multi-threaded kernel.

    Returns
    -------
    out : array of shape (C_out, M, H, W)
    """
    if padding != "replicate":
        raise ConfigError("only 'replicate' padding is supported, got %r"
                          % padding, key="padding")
    x, kernel = as_array(x), as_array(kernel)
    if kernel.ndim != 3 or kernel.shape[2] % 2 == 0:
        raise ConfigError("temporal kernel size must be odd, got shape %s"
                          % (kernel.shape, ), key="kernel")
    if x.ndim != 4 or x.shape[0] != kernel.shape[1]:
        raise ShapeError("conv_temporal: input %s does not match kernel %s"
                         % (x.shape, kernel.shape))
    c_in, n_frames, height, width = x.shape
    flat = x.reshape(c_in, n_frames, height * width)
    out = np.empty((kernel.shape[0], n_frames, height * width), dtype=DTYPE)
    _kernel("conv_temporal", parallel)(flat, kernel, out)
    return out.reshape(kernel.shape[0], n_frames, height, width)


def conv_spatial(x, kernel, padding="same", parallel=False):
    """2-D convolution applied to every frame independently.

    Parameters
    ----------
    x : array of shape (C, M, H, W)
    kernel : array of shape (C_out, C, kh, kw)
        Odd kernel sizes; zero padding keeps H and W.
    padding : {"same"}
    parallel : bool

    Returns
    -------
    out : array of shape (C_out, M, H, W)
    """
    if padding != "same":
        raise ConfigError("only 'same' padding is supported, got %r"
                          % padding, key="padding")
    x, kernel = as_array(x), as_array(kernel)
    if kernel.ndim != 4 or not (kernel.shape[2] % 2 and kernel.shape[3] % 2):
        raise ConfigError("spatial kernel sizes must be odd, got shape %s"
                          % (kernel.shape, ), key="kernel")
    if x.ndim != 4 or x.shape[0] != kernel.shape[1]:
        raise ShapeError("conv_spatial: input %s does not match kernel %s"
                         % (x.shape, kernel.shape))
    out = np.empty((kernel.shape[0], ) + x.shape[1:], dtype=DTYPE)
    _kernel("conv_spatial", parallel)(x, kernel, out)
    return out


def layer_norm(x, axis=-1, gain=None, bias=None, eps=1e-6):
    """Normalize ``x`` to zero mean and unit variance along ``axis``.

    Parameters
    ----------
    x : array
    axis : int
    gain, bias : array of shape (x.shape[axis], ) or None
        Affine parameters applied after normalization.
    eps : float
        Added to the variance.
    """
    x = as_array(x)
    axis = axis % x.ndim
    size = DTYPE(x.shape[axis])
    mean = ordered_sum(x, axis=axis, keepdims=True) / size
    centered = x - mean
    var = ordered_sum(centered * centered, axis=axis, keepdims=True) / size
    out = centered / np.sqrt(var + DTYPE(eps))
    broadcast = [1] * x.ndim
    broadcast[axis] = x.shape[axis]
    if gain is not None:
        out = out * as_array(gain).reshape(broadcast)
    if bias is not None:
        out = out + as_array(bias).reshape(broadcast)
    return out


def silu(x):
    """Sigmoid-weighted linear unit, ``x * sigmoid(x)``."""
    x64 = as_array(x).astype(np.float64)
    with np.errstate(over="ignore"):
        out = x64 / (1.0 + np.exp(-x64))
    return out.astype(DTYPE)


def linear(x, weight, bias=None, parallel=False):
    """Affine map over the last axis: ``x @ weight + bias``.

    Parameters
    ----------
    x : array of shape (..., n_in)
    weight : array of shape (n_in, n_out)
    bias : array of shape (n_out, ) or None
    parallel : bool
    """
    x, weight = as_array(x), as_array(weight)
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError("linear: input width %d does not match weight %s"
                         % (x.shape[-1], weight.shape))
    out = matmul(x.reshape(-1, x.shape[-1]), weight, parallel=parallel)
    out = out.reshape(x.shape[:-1] + (weight.shape[1], ))
    if bias is not None:
        out = out + as_array(bias)
    return out


def avg_pool2(x):
    """Average 2x2 spatial blocks of a (C, M, H, W) array."""
    x = as_array(x)
    if x.shape[2] % 2 or x.shape[3] % 2:
        raise ShapeError("avg_pool2 needs even H and W, got %s" % (x.shape, ))
    total = x[:, :, 0::2, 0::2] + x[:, :, 1::2, 0::2]
    total = total + x[:, :, 0::2, 1::2]
    total = total + x[:, :, 1::2, 1::2]
    return as_array(total * DTYPE(0.25))


def upsample2(x):
    """Nearest-neighbor 2x spatial upsampling of a (C, M, H, W) array."""
    return as_array(np.repeat(np.repeat(x, 2, axis=2), 2, axis=3))
