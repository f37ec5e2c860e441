import os
import struct
from tempfile import NamedTemporaryFile

import numpy as np
import pytest

from freenoise.errors import FormatError, ShapeError
from freenoise.io import (export_frames, load_hdf5_array, load_weights,
                          read_container, save_hdf5_dataset, save_weights,
                          write_container)
from freenoise.toy_videoldm import ModelConfig, ModelWeights

SMALL_MODEL = ModelConfig(latent_channels=4, hidden_channels=8, heads=2,
                          head_dim=4, text_dim=8, text_tokens=4)


def _video(shape=(3, 5, 4, 6)):
    return np.random.RandomState(0).randn(*shape).astype(np.float32)


def _write_bytes(tmp_path, data):
    file_name = str(tmp_path / "video.fnv")
    with open(file_name, "wb") as f:
        f.write(data)
    return file_name


def test_container_round_trip(tmp_path):
    video = _video()
    file_name = str(tmp_path / "video.fnv")
    write_container(video, file_name)
    np.testing.assert_array_equal(read_container(file_name), video)
    assert os.path.getsize(file_name) == 4 + 16 + 4 * video.size


def test_container_layout(tmp_path):
    video = np.arange(2 * 3 * 1 * 2, dtype=np.float32).reshape(2, 3, 1, 2)
    file_name = str(tmp_path / "video.fnv")
    write_container(video, file_name)
    with open(file_name, "rb") as f:
        data = f.read()
    assert data[:4] == b"FNV1"
    assert struct.unpack("<4I", data[4:20]) == (3, 2, 1, 2)
    payload = np.frombuffer(data[20:], dtype="<f4")
    # frame 0, channel 1 comes right after frame 0, channel 0
    np.testing.assert_array_equal(payload[2:4], video[1, 0, 0])


def test_container_bad_magic(tmp_path):
    file_name = _write_bytes(tmp_path, b"FNW1" + bytes(16))
    with pytest.raises(FormatError) as excinfo:
        read_container(file_name)
    assert excinfo.value.offset == 0

    with pytest.raises(FormatError):
        read_container(_write_bytes(tmp_path, b"FN"))


def test_container_truncated(tmp_path):
    header = b"FNV1" + struct.pack("<4I", 2, 1, 2, 2)
    with pytest.raises(FormatError) as excinfo:
        read_container(_write_bytes(tmp_path, header[:12]))
    assert excinfo.value.offset == 12

    data = header + bytes(4 * 7)
    with pytest.raises(FormatError) as excinfo:
        read_container(_write_bytes(tmp_path, data))
    assert excinfo.value.offset == len(data)


def test_container_zero_extent(tmp_path):
    data = b"FNV1" + struct.pack("<4I", 2, 0, 2, 2)
    with pytest.raises(FormatError) as excinfo:
        read_container(_write_bytes(tmp_path, data))
    assert excinfo.value.offset == 8
    assert "channels" in str(excinfo.value)


def test_container_trailing_bytes(tmp_path):
    data = b"FNV1" + struct.pack("<4I", 1, 1, 1, 1) + bytes(4) + b"x"
    with pytest.raises(FormatError) as excinfo:
        read_container(_write_bytes(tmp_path, data))
    assert excinfo.value.offset == 24


def test_write_container_errors(tmp_path):
    with pytest.raises(ShapeError):
        write_container(np.zeros((3, 0, 2, 2)), str(tmp_path / "video.fnv"))
    with pytest.raises(ShapeError):
        write_container(np.zeros((3, 2, 2)), str(tmp_path / "video.fnv"))


def test_weights_round_trip(tmp_path):
    weights = ModelWeights.generate(SMALL_MODEL)
    file_name = str(tmp_path / "weights.fnw")
    save_weights(weights, file_name)
    loaded = load_weights(file_name)
    assert loaded.config == SMALL_MODEL
    np.testing.assert_array_equal(loaded.to_flat(), weights.to_flat())


def test_weights_errors(tmp_path):
    weights = ModelWeights.generate(SMALL_MODEL)
    file_name = str(tmp_path / "weights.fnw")
    save_weights(weights, file_name)
    with open(file_name, "rb") as f:
        data = f.read()

    with pytest.raises(FormatError) as excinfo:
        load_weights(_write_bytes(tmp_path, data[:-4]))
    assert excinfo.value.offset == len(data) - 4

    with pytest.raises(FormatError) as excinfo:
        load_weights(_write_bytes(tmp_path, data + bytes(4)))
    assert excinfo.value.offset == len(data)

    with pytest.raises(FormatError) as excinfo:
        load_weights(_write_bytes(tmp_path, b"FNV1" + data[4:]))
    assert excinfo.value.offset == 0

    # zero hidden channels
    broken = data[:8] + struct.pack("<I", 0) + data[12:]
    with pytest.raises(FormatError) as excinfo:
        load_weights(_write_bytes(tmp_path, broken))
    assert excinfo.value.offset == 4


def test_export_frames(tmp_path):
    video = _video((3, 3, 2, 4))
    directory = str(tmp_path / "frames")
    file_names = export_frames(video, directory)
    assert [os.path.basename(ff) for ff in file_names] == [
        "frame_0000.ppm", "frame_0001.ppm", "frame_0002.ppm"]
    with open(file_names[1], "rb") as f:
        data = f.read()
    header = b"P6\n4 2\n255\n"
    assert data.startswith(header)
    assert len(data) == len(header) + 2 * 4 * 3

    pixels = np.frombuffer(data[len(header):], dtype=np.uint8)
    video = video.astype(np.float64)
    low, high = video.min(), video.max()
    expected = np.round((video[0, 1, 0, 0] - low) / (high - low) * 255)
    assert pixels[0] == expected

    with pytest.raises(ShapeError):
        export_frames(_video((4, 3, 2, 2)), directory)


def test_export_constant_frames(tmp_path):
    file_names = export_frames(np.ones((3, 1, 2, 2)), str(tmp_path))
    with open(file_names[0], "rb") as f:
        data = f.read()
    assert set(data[len(b"P6\n2 2\n255\n"):]) == {0}


def test_save_dataset_to_hdf5():
    tmp_file = NamedTemporaryFile(suffix='.hdf5')
    file_name = tmp_file.name

    dataset = {
        'latents': _video(),
        'noise_mapping': np.arange(16),
    }
    save_hdf5_dataset(file_name, dataset)

    latents = load_hdf5_array(file_name, 'latents')
    np.testing.assert_array_equal(latents, dataset['latents'])
    # test loading a slice
    mapping = load_hdf5_array(file_name, 'noise_mapping', slice=slice(2, 5))
    np.testing.assert_array_equal(mapping, [2, 3, 4])
    # test loading all keys
    loaded = load_hdf5_array(file_name)
    assert sorted(loaded) == ['latents', 'noise_mapping']
