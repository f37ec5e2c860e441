import os
import struct

import h5py
import numpy as np

from .errors import ConfigError, FormatError, ShapeError
from .numerics import as_array
from .toy_videoldm import ModelConfig, ModelWeights

VIDEO_MAGIC = b"FNV1"
WEIGHTS_MAGIC = b"FNW1"

_VIDEO_HEADER = struct.Struct("<4I")
# Integer fields of ModelConfig, the weight seed, the parameter count.
_WEIGHTS_HEADER = struct.Struct("<10IQQ")
_INT_FIELDS = ("latent_channels", "hidden_channels", "num_blocks", "levels",
               "heads", "head_dim", "text_dim", "text_tokens",
               "temporal_kernel", "temporal_conv")


def _read_bytes(file_name):
    with open(file_name, "rb") as f:
        return f.read()


def _check_magic(data, magic):
    if len(data) < len(magic):
        raise FormatError("file too short for the %r magic" % magic,
                          offset=len(data))
    if data[:len(magic)] != magic:
        raise FormatError("bad magic %r, expected %r"
                          % (data[:len(magic)], magic), offset=0)


def write_container(video, file_name):
    """Write a video to an FNV1 container.

    The file holds the magic ``b"FNV1"``, then the number of frames,
    channels, rows and columns as little-endian uint32, then the float32
    payload, frame-major then channel-major then row-major.

    Parameters
    ----------
    video : array of shape (n_channels, n_frames, height, width)
    file_name : str
    """
    video = as_array(video)
    if video.ndim != 4 or 0 in video.shape:
        raise ShapeError("expected a non-empty (C, M, H, W) video, got shape "
                         "%s" % (video.shape, ))
    n_channels, n_frames, height, width = video.shape
    payload = video.transpose(1, 0, 2, 3).astype("<f4").tobytes()

    print("Saving... ", end="", flush=True)
    with open(file_name, "wb") as f:
        f.write(VIDEO_MAGIC)
        f.write(_VIDEO_HEADER.pack(n_frames, n_channels, height, width))
        f.write(payload)
    print("Saved %s" % file_name)


def read_container(file_name):
    """Read a video from an FNV1 container.

    Returns
    -------
    video : array of shape (n_channels, n_frames, height, width)
    """
    data = _read_bytes(file_name)
    _check_magic(data, VIDEO_MAGIC)
    start = len(VIDEO_MAGIC)
    if len(data) < start + _VIDEO_HEADER.size:
        raise FormatError("truncated header", offset=len(data))
    n_frames, n_channels, height, width = _VIDEO_HEADER.unpack_from(
        data, start)
    for index, (name, value) in enumerate(
            zip(("frames", "channels", "height", "width"),
                (n_frames, n_channels, height, width))):
        if value == 0:
            raise FormatError("header declares zero %s" % name,
                              offset=start + 4 * index)

    start += _VIDEO_HEADER.size
    count = n_frames * n_channels * height * width
    end = start + 4 * count
    if len(data) < end:
        raise FormatError("truncated payload, expected %d bytes" % end,
                          offset=len(data))
    if len(data) > end:
        raise FormatError("%d trailing bytes after the payload"
                          % (len(data) - end), offset=end)
    payload = np.frombuffer(data, dtype="<f4", count=count, offset=start)
    payload = payload.reshape(n_frames, n_channels, height, width)
    return as_array(payload.transpose(1, 0, 2, 3))


def save_weights(weights, file_name):
    """Write model weights to an FNW1 file.

    The file holds the magic ``b"FNW1"``, the integer fields of the model
    configuration and the weight seed (little-endian), the number of
    parameters as uint64, then all parameters as float32 in declared layer
    order.

    Parameters
    ----------
    weights : ModelWeights
    file_name : str
    """
    config = weights.config
    blob = weights.to_flat()
    header = _WEIGHTS_HEADER.pack(
        *[int(getattr(config, name)) for name in _INT_FIELDS],
        config.weight_seed, blob.size)

    print("Saving... ", end="", flush=True)
    with open(file_name, "wb") as f:
        f.write(WEIGHTS_MAGIC)
        f.write(header)
        f.write(blob.astype("<f4").tobytes())
    print("Saved %s" % file_name)


def load_weights(file_name):
    """Read model weights written by :func:`save_weights`.

    Returns
    -------
    weights : ModelWeights
    """
    data = _read_bytes(file_name)
    _check_magic(data, WEIGHTS_MAGIC)
    start = len(WEIGHTS_MAGIC)
    if len(data) < start + _WEIGHTS_HEADER.size:
        raise FormatError("truncated header", offset=len(data))
    values = _WEIGHTS_HEADER.unpack_from(data, start)
    kwargs = dict(zip(_INT_FIELDS, values[:len(_INT_FIELDS)]))
    kwargs["temporal_conv"] = bool(kwargs["temporal_conv"])
    kwargs["weight_seed"] = values[-2]
    try:
        config = ModelConfig(**kwargs).validate()
    except ConfigError as error:
        raise FormatError("invalid model configuration (%s)" % error,
                          offset=start)

    start += _WEIGHTS_HEADER.size
    count = values[-1]
    end = start + 4 * count
    if len(data) != end:
        raise FormatError("parameter blob of %d bytes, expected %d"
                          % (len(data) - start, 4 * count),
                          offset=min(len(data), end))
    blob = np.frombuffer(data, dtype="<f4", count=count, offset=start)
    try:
        return ModelWeights.from_flat(config, blob)
    except ShapeError as error:
        raise FormatError(str(error), offset=start)


def export_frames(video, directory, prefix="frame"):
    """Write every frame of an RGB video as a binary PPM (P6) image.

    The video is min-max normalized over all its values, clamped to
    [0, 1], and scaled to 8 bits.

    Parameters
    ----------
    video : array of shape (3, n_frames, height, width)
    directory : str
        Output directory, created if needed.
    prefix : str
        File name prefix; frames are named ``<prefix>_0000.ppm``, ...

    Returns
    -------
    file_names : list of str
    """
    video = np.asarray(video, dtype=np.float64)
    if video.ndim != 4 or video.shape[0] != 3:
        raise ShapeError("expected a (3, M, H, W) video, got shape %s"
                         % (video.shape, ))
    low, high = video.min(), video.max()
    scaled = (video - low) / (high - low) if high > low else video * 0
    pixels = np.round(np.clip(scaled, 0, 1) * 255).astype(np.uint8)

    if not os.path.exists(directory):
        os.makedirs(directory)
    _, n_frames, height, width = video.shape
    file_names = []
    for frame in range(n_frames):
        file_name = os.path.join(directory, "%s_%04d.ppm" % (prefix, frame))
        with open(file_name, "wb") as f:
            f.write(b"P6\n%d %d\n255\n" % (width, height))
            f.write(pixels[:, frame].transpose(1, 2, 0).tobytes())
        file_names.append(file_name)
    print("Saved %d frames in %s" % (n_frames, directory))
    return file_names


def load_hdf5_array(file_name, key=None, slice=slice(0, None)):
    """Load arrays saved by :func:`save_hdf5_dataset`.

    Parameters
    ----------
    file_name : str
        HDF5 file name.
    key : str or None
        Dataset to load, such as ``"latents"`` or ``"noise_mapping"``. If
        None, every dataset is loaded.
    slice : slice or tuple of slices
        Part of each array to load, ``array[slice]``.

    Returns
    -------
    result : array or dict of arrays
    """
    with h5py.File(file_name, mode='r') as hf:
        if key is None:
            return {k: hf[k][slice] for k in hf.keys()}
        return hf[key][slice]


def save_hdf5_dataset(file_name, dataset, mode='w'):
    """Save a dataset of arrays, such as the latents and plans of a run.

    Parameters
    ----------
    file_name : str
        Full name of the file.
    dataset : dict of arrays
        Arrays to save, compressed with gzip.
    mode : str
        File opening model.
        Use 'w' to write from scratch, 'a' to add to existing file.
    """
    print("Saving... ", end="", flush=True)

    with h5py.File(file_name, mode=mode) as hf:
        for name, array in dataset.items():
            hf.create_dataset(name, data=np.asarray(array),
                              compression='gzip')

    print("Saved %s" % file_name)
