"""Scikit-learn-style estimator facades over the functional pipeline.

``MinorityDetector`` is a fit/predict front end for Stage-1 detection;
``MahalanobisGanAugmenter`` exposes the full pipeline through the
imbalanced-learning ``fit_resample(X, y)`` convention. Both inherit
``get_params``/``set_params`` from :class:`sklearn.base.BaseEstimator`
so they compose with pipelines and search utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted, check_X_y

from .dataset import JointDataset, standardize
from .matching import MatchConfig
from .mahalanobis import squared_distances_from_mean
from .minority import detect_minority
from .pipeline import augment_dataset
from .wgan import GanConfig


def _joint(X, y) -> np.ndarray:
    X, y = check_X_y(X, y, dtype=np.float64, ensure_min_samples=2)
    return np.column_stack([X, y])


class MinorityDetector(BaseEstimator):
    """Flags joint feature-target rows whose squared Mahalanobis distance
    exceeds the mixture-intersection threshold.

    Attributes after ``fit``: ``threshold_``, ``minority_mask_`` (train
    rows), ``stats_``, ``mixture_``, ``standardizer_``.
    """

    def __init__(self, max_iter: int = 500, tol: float = 1e-8):
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        joint = _joint(X, y)
        data = JointDataset(joint)
        standardized, self.standardizer_ = standardize(data)
        self.mixture_, self.stats_ = detect_minority(
            standardized, max_iter=self.max_iter, tol=self.tol
        )
        self.threshold_ = self.mixture_.threshold
        self.minority_mask_ = self.mixture_.minority_mask.copy()
        self.n_features_in_ = X.shape[1] if hasattr(X, "shape") else joint.shape[1] - 1
        return self

    def score_samples(self, X, y) -> np.ndarray:
        """Squared Mahalanobis distances of joint rows under the fit."""
        check_is_fitted(self, "stats_")
        joint = self.standardizer_.transform(_joint(X, y))
        return squared_distances_from_mean(self.stats_, joint)

    def predict(self, X, y) -> np.ndarray:
        """Boolean minority flags: squared distance >= threshold."""
        return self.score_samples(X, y) >= self.threshold_

    def fit_predict(self, X, y) -> np.ndarray:
        return self.fit(X, y).minority_mask_


class MahalanobisGanAugmenter(BaseEstimator):
    """Full augmentation pipeline behind a ``fit_resample`` interface.

    ``fit_resample(X, y)`` returns the original samples followed by the
    matched synthetic ones, in original units. The run's artifacts stay
    available on ``artifacts_`` for diagnostics.
    """

    def __init__(
        self,
        latent_dim: int = 64,
        lambda_gp: float = 10.0,
        pool_size: int = 10_000,
        critic_steps_per_gen: int = 5,
        batch_size: int | None = None,
        total_gen_iterations: int = 2000,
        generator_hidden: tuple[int, ...] = (128, 256, 128),
        critic_hidden: tuple[int, ...] = (256, 256, 128),
        learning_rate: float = 1e-4,
        k: int = 3,
        n_pick: int = 1,
        without_replacement: bool = True,
        fall_through: bool = False,
        random_state: int = 0,
    ):
        self.latent_dim = latent_dim
        self.lambda_gp = lambda_gp
        self.pool_size = pool_size
        self.critic_steps_per_gen = critic_steps_per_gen
        self.batch_size = batch_size
        self.total_gen_iterations = total_gen_iterations
        self.generator_hidden = generator_hidden
        self.critic_hidden = critic_hidden
        self.learning_rate = learning_rate
        self.k = k
        self.n_pick = n_pick
        self.without_replacement = without_replacement
        self.fall_through = fall_through
        self.random_state = random_state

    def _configs(self) -> tuple[GanConfig, MatchConfig]:
        gan = GanConfig(
            latent_dim=self.latent_dim,
            lambda_gp=self.lambda_gp,
            pool_size=self.pool_size,
            critic_steps_per_gen=self.critic_steps_per_gen,
            batch_size=self.batch_size,
            total_gen_iterations=self.total_gen_iterations,
            seed=self.random_state,
            generator_hidden=tuple(self.generator_hidden),
            critic_hidden=tuple(self.critic_hidden),
            learning_rate=self.learning_rate,
        )
        match = MatchConfig(
            k=self.k,
            n_pick=self.n_pick,
            without_replacement=self.without_replacement,
            fall_through=self.fall_through,
        )
        return gan, match

    def fit_resample(self, X, y) -> tuple[np.ndarray, np.ndarray]:
        joint = _joint(X, y)
        data = JointDataset(joint)
        gan_config, match_config = self._configs()
        self.artifacts_ = augment_dataset(data, gan_config, match_config)
        self.n_features_in_ = joint.shape[1] - 1
        rows = self.artifacts_.augmented.rows
        return rows[:, :-1], rows[:, -1]

    # imblearn-style alias
    fit_sample = fit_resample

    def fit(self, X, y):
        """Run the pipeline for its artifacts without returning samples."""
        self.fit_resample(X, y)
        return self
