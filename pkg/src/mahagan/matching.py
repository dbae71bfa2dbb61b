"""Deterministic Mahalanobis nearest-neighbour filtering of the
synthetic pool, and assembly of the augmented dataset.

Real minority points are processed rarest-first (descending squared
distance from the joint mean, ties by index). Each collects its k
nearest pool candidates under the Stage-1 precision metric (ties by
pool index) and keeps the n_pick closest still-unused ones. Matching
runs in the space of its inputs (standardized, in the full pipeline);
de-standardization happens at assembly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import JointDataset, Standardizer
from .errors import DataError
from .mahalanobis import GaussianStats, cross_distances, squared_distances_from_mean


@dataclass
class MatchConfig:
    """Neighbour-matching knobs.

    Strict mode (default) only ever picks from the k-candidate shortlist,
    mirroring the selection-set definitions; ``fall_through=True`` lets a
    real point continue past the shortlist to the next-nearest unused
    candidate instead of going unmatched.
    """

    k: int = 3
    n_pick: int = 1
    without_replacement: bool = True
    fall_through: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise DataError("k must be >= 1")
        if not 1 <= self.n_pick <= self.k:
            raise DataError("n_pick must satisfy 1 <= n_pick <= k")


@dataclass
class MatchResult:
    """Selected pool rows plus the audit trail of assignments.

    ``selected_rows`` are pool rows in the same space ``match`` received
    (standardized, in the pipeline); ``assignments`` holds
    (real_index, pool_index, delta) triples in selection order.
    """

    selected_rows: np.ndarray
    assignments: list[tuple[int, int, float]] = field(default_factory=list)
    unmatched_real: list[int] = field(default_factory=list)

    @property
    def selected_pool_indices(self) -> np.ndarray:
        return np.array([a[1] for a in self.assignments], dtype=int)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("real_index,pool_index,delta\n")
            for r, j, delta in self.assignments:
                fh.write(f"{r},{j},{delta!r}\n")


def match(
    real_minority,
    pool,
    stats: GaussianStats,
    config: MatchConfig | None = None,
) -> MatchResult:
    """Greedy nearest-neighbour selection of pool rows for each real point."""
    config = config or MatchConfig()
    real = np.atleast_2d(np.asarray(real_minority, dtype=np.float64))
    pool = np.atleast_2d(np.asarray(pool, dtype=np.float64))
    if pool.shape[0] < 1:
        raise DataError("synthetic pool is empty")
    if real.shape[1] != pool.shape[1] or real.shape[1] != stats.p:
        raise DataError(
            f"dimension mismatch: real {real.shape}, pool {pool.shape}, stats p={stats.p}"
        )
    m = real.shape[0]

    d2 = squared_distances_from_mean(stats, real)
    order = np.lexsort((np.arange(m), -d2))
    deltas = cross_distances(stats, real, pool)

    used = np.zeros(pool.shape[0], dtype=bool)
    assignments: list[tuple[int, int, float]] = []
    unmatched: list[int] = []
    for r in order:
        candidates = np.argsort(deltas[r], kind="stable")
        if not config.fall_through:
            candidates = candidates[: config.k]
        picked = 0
        for j in candidates:
            if config.without_replacement and used[j]:
                continue
            assignments.append((int(r), int(j), float(deltas[r, j])))
            if config.without_replacement:
                used[j] = True
            picked += 1
            if picked == config.n_pick:
                break
        if picked == 0:
            unmatched.append(int(r))

    if assignments:
        selected = pool[[j for _, j, _ in assignments]].copy()
    else:
        selected = np.empty((0, pool.shape[1]))
    return MatchResult(selected, assignments, sorted(unmatched))


def assemble_augmented(
    train: JointDataset, refined: MatchResult, standardizer: Standardizer
) -> JointDataset:
    """Original training rows followed by the de-standardized selections."""
    if refined.selected_rows.shape[0] == 0:
        return train.with_rows(train.rows.copy())
    if refined.selected_rows.shape[1] != train.p:
        raise DataError(
            f"synthetic rows have {refined.selected_rows.shape[1]} columns, train has {train.p}"
        )
    synthetic = standardizer.inverse_transform(refined.selected_rows)
    return train.with_rows(np.vstack([train.rows, synthetic]))
