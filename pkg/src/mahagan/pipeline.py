"""End-to-end augmentation: standardize, detect minority rows, train the
generator, sample a candidate pool, filter by nearest-neighbour
matching, and append the de-standardized selections to the original
training rows.

All three stages run in standardized space (Mahalanobis distances are
affine-invariant, so detection is unaffected, while generator training
is scale-sensitive); only the final assembly maps back.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import JointDataset, Standardizer, standardize
from .mahalanobis import GaussianStats, squared_distances_from_mean
from .matching import MatchConfig, MatchResult, assemble_augmented, match
from .minority import MixtureSplit, detect_minority
from .wgan import GanConfig, TrainedGan, sample_pool, train


def pool_seed(seed: int) -> int:
    """Pool-sampling stream derived from the training seed by hash mix."""
    ss = np.random.SeedSequence((int(seed) & 0xFFFFFFFFFFFFFFFF, 1))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class AugmentationArtifacts:
    """Everything one augmentation run produced, for audit and diagnostics."""

    augmented: JointDataset
    standardizer: Standardizer
    stats: GaussianStats
    mixture: MixtureSplit
    gan: TrainedGan
    match_result: MatchResult
    squared_distances: np.ndarray
    minority_rows: np.ndarray  # original space
    synthetic_rows: np.ndarray  # original space, the refined set

    @property
    def threshold(self) -> float:
        return self.mixture.threshold


def augment_dataset(
    train_data: JointDataset,
    gan_config: GanConfig | None = None,
    match_config: MatchConfig | None = None,
    seed: int | None = None,
) -> AugmentationArtifacts:
    """Run the full three-stage pipeline on one training dataset.

    ``seed`` (when given) overrides the seed in ``gan_config``; the pool
    is drawn from a stream derived from that seed.
    """
    gan_config = gan_config or GanConfig()
    if seed is not None:
        gan_config = replace(gan_config, seed=int(seed))
    match_config = match_config or MatchConfig()

    standardized, scaler = standardize(train_data)
    mixture, stats = detect_minority(standardized)
    minority_std = standardized.rows[mixture.minority_mask]

    gan = train(minority_std, gan_config)
    pool = sample_pool(gan, gan_config.pool_size, pool_seed(gan_config.seed))
    result = match(minority_std, pool, stats, match_config)
    augmented = assemble_augmented(train_data, result, scaler)

    return AugmentationArtifacts(
        augmented=augmented,
        standardizer=scaler,
        stats=stats,
        mixture=mixture,
        gan=gan,
        match_result=result,
        squared_distances=squared_distances_from_mean(stats, standardized.rows),
        minority_rows=train_data.rows[mixture.minority_mask].copy(),
        synthetic_rows=augmented.rows[train_data.n :].copy(),
    )
