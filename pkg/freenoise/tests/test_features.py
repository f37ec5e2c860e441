import pytest
import numpy as np

import sklearn.utils.estimator_checks

from freenoise.errors import ShapeError
from freenoise.features import FrameFeatureExtractor, frames_to_pixels


@sklearn.utils.estimator_checks.parametrize_with_checks(
    [FrameFeatureExtractor()])
def test_check_estimator(estimator, check):
    check(estimator)


@pytest.mark.parametrize('n_components', [4, 64, 200])
def test_unit_norm(n_components):
    X = np.random.randn(10, 64)
    Xt = FrameFeatureExtractor(n_components=n_components).fit_transform(X)
    assert Xt.shape == (10, n_components)
    np.testing.assert_allclose(np.linalg.norm(Xt, axis=1), 1, rtol=1e-10)


def test_zero_rows_stay_zero():
    X = np.random.randn(5, 16)
    X[2] = 0
    Xt = FrameFeatureExtractor(n_components=8).fit_transform(X)
    np.testing.assert_array_equal(Xt[2], 0)
    assert np.isfinite(Xt).all()


def test_projection_independent_of_data():
    first = FrameFeatureExtractor(random_state=3).fit(np.random.randn(4, 32))
    second = FrameFeatureExtractor(random_state=3).fit(np.random.randn(9, 32))
    np.testing.assert_array_equal(first.components_, second.components_)

    components = first.components_
    np.testing.assert_allclose(components.T @ components, np.eye(32),
                               atol=1e-10)


def test_frames_to_pixels():
    video = np.random.randn(3, 5, 8, 8)
    pixels = frames_to_pixels(video)
    assert pixels.shape == (5, 64)
    np.testing.assert_allclose(pixels[1], video[:, 1].mean(axis=0).ravel())

    assert frames_to_pixels(np.ones((3, 2, 16, 32))).shape == (2, 64)
    np.testing.assert_allclose(frames_to_pixels(np.ones((3, 2, 16, 32))), 1)

    with pytest.raises(ShapeError):
        frames_to_pixels(np.ones((5, 8, 8)))
