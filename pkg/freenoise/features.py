import numpy as np
import scipy.ndimage
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import (check_is_fitted, check_random_state,
                                      validate_data)

from .errors import ShapeError


class FrameFeatureExtractor(TransformerMixin, BaseEstimator):
    """Scikit-learn Transformer projecting frames on fixed random features.

    The projection is drawn from a seeded Gaussian and orthonormalized, so
    it does not depend on the training data, only on its number of
    features. Output rows are L2-normalized; an all-zero row stays zero.

    Parameters
    ----------
    n_components : int
        Number of output features.
    random_state : None | int | instance of RandomState
        Random state of the projection.

    Attributes
    ----------
    n_features_in_ : int
        Number of features seen during the fit.
    components_ : array of shape (n_components, n_features_in_)
        Projection. Rows are orthonormal when ``n_components <=
        n_features_in_``, columns otherwise.

    Example
    -------
    >>> from freenoise.features import FrameFeatureExtractor
    >>> from freenoise.features import frames_to_pixels
    >>> pixels = frames_to_pixels(video)
    >>> features = FrameFeatureExtractor().fit_transform(pixels)
    """

    def __init__(self, n_components=64, random_state=0):
        self.n_components = n_components
        self.random_state = random_state

    def fit(self, X, y=None):
        """Draw the projection.

        Parameters
        ----------
        X : array of shape (n_samples, n_features)
            Training data. Only its number of features is used.

        y : array of shape (n_samples,) or (n_samples, n_targets)
            Target values. Ignored.

        Returns
        -------
        self : returns an instance of self.
        """
        X = validate_data(self, X, dtype='numeric')
        self.n_features_in_ = X.shape[1]

        random_state = check_random_state(self.random_state)
        projection = random_state.standard_normal(
            (self.n_components, self.n_features_in_))
        if self.n_components <= self.n_features_in_:
            q, _ = np.linalg.qr(projection.T)
            self.components_ = q.T
        else:
            q, _ = np.linalg.qr(projection)
            self.components_ = q
        return self

    def transform(self, X):
        """Project and L2-normalize the input data X.

        Parameters
        ----------
        X : array of shape (n_samples, n_features)
            Input data.

        Returns
        -------
        Xt : array of shape (n_samples, n_components)
            Unit-norm features.
        """
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=np.float64)

        Xt = X @ self.components_.T
        norms = np.sqrt(np.sum(Xt * Xt, axis=1, keepdims=True))
        norms[norms == 0] = 1
        return Xt / norms


def frames_to_pixels(video, size=8):
    """Downsample every frame of a video to a small grayscale image.

    Parameters
    ----------
    video : array of shape (n_channels, n_frames, height, width)
        Video, pixel or latent.
    size : int
        Side of the downsampled frames.

    Returns
    -------
    pixels : array of shape (n_frames, size * size)
        Channel mean of each frame, linearly resampled.
    """
    video = np.asarray(video, dtype=np.float64)
    if video.ndim != 4:
        raise ShapeError("expected a (C, M, H, W) video, got shape %s"
                         % (video.shape, ))
    gray = video.mean(axis=0)
    n_frames, height, width = gray.shape
    if (height, width) != (size, size):
        gray = scipy.ndimage.zoom(gray, (1, size / height, size / width),
                                  order=1)
    return gray.reshape(n_frames, -1)
