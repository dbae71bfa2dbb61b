"""Experiment orchestration: repeated splits, augmentation methods, a
built-in k-NN regressor, pairwise win/significance tables, and
diagnostics exports.

Augmentation only ever touches the train side of a split; the test
partition is checksummed before and after to enforce that. Failures in
one (method, split) cell are recorded and the run continues.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import chi2

from .dataset import JointDataset, load_csv, make_splits, split_seed
from .errors import DataError, MahaganError
from .matching import MatchConfig
from .metrics import (
    MetricReport,
    UtilityConfig,
    build_relevance,
    compute_report,
    wilcoxon_signed_rank,
)
from .minority import detect_minority
from .pipeline import AugmentationArtifacts, augment_dataset
from .wgan import GanConfig

METHOD_NONE = "none"
METHOD_RANDOM_OVERSAMPLE = "random_oversample"
METHOD_MAHALANOBIS_GAN = "mahalanobis_gan"
BUILTIN_METHODS = (METHOD_NONE, METHOD_RANDOM_OVERSAMPLE, METHOD_MAHALANOBIS_GAN)

# Lower is better for error metrics, higher for the F measure.
METRIC_DIRECTIONS = {"rmse": False, "sera": False, "f_phi1": True}
ALPHA = 0.05


@dataclass
class ExperimentConfig:
    """Everything one evaluation run needs; seed is mandatory."""

    seed: int
    data_path: str | None = None
    target_column: str | int | None = None
    n_splits: int = 25
    train_fraction: float = 0.8
    methods: tuple[str, ...] = (METHOD_NONE, METHOD_MAHALANOBIS_GAN)
    knn_k: int = 5
    ro_ratio: float = 1.0
    relevance_mode: str = "both_extremes"
    relevance_threshold: float = 0.8
    gan: GanConfig = field(default_factory=GanConfig)
    match: MatchConfig = field(default_factory=MatchConfig)
    external_prediction_files: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_splits < 1:
            raise DataError("n_splits must be >= 1")
        if not self.methods and not self.external_prediction_files:
            raise DataError("at least one method is required")
        for m in self.methods:
            if m not in BUILTIN_METHODS:
                raise DataError(f"unknown method {m!r}; built-ins are {BUILTIN_METHODS}")

    def all_method_names(self) -> list[str]:
        return list(self.methods) + sorted(self.external_prediction_files)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "data_path": self.data_path,
            "target_column": self.target_column,
            "n_splits": self.n_splits,
            "train_fraction": self.train_fraction,
            "methods": list(self.methods),
            "knn_k": self.knn_k,
            "ro_ratio": self.ro_ratio,
            "relevance_mode": self.relevance_mode,
            "relevance_threshold": self.relevance_threshold,
            "gan": self.gan.to_dict(),
            "match": {
                "k": self.match.k,
                "n_pick": self.match.n_pick,
                "without_replacement": self.match.without_replacement,
                "fall_through": self.match.fall_through,
            },
            "external_prediction_files": dict(self.external_prediction_files),
        }


def random_oversample(train: JointDataset, ratio: float, seed: int) -> JointDataset:
    """Duplicate Stage-1 minority rows uniformly at random with replacement.

    Appends round(ratio * minority_count) copies; the original rows are
    kept intact and first. ratio 0 is the identity.
    """
    if ratio < 0:
        raise DataError("oversampling ratio must be >= 0")
    if ratio == 0:
        return train.with_rows(train.rows.copy())
    from .dataset import standardize

    standardized, _ = standardize(train)
    mixture, _ = detect_minority(standardized)
    minority_idx = np.flatnonzero(mixture.minority_mask)
    if minority_idx.size == 0:
        raise DataError("no minority rows detected; nothing to oversample")
    n_new = int(round(ratio * minority_idx.size))
    rng = np.random.default_rng(seed)
    picks = rng.choice(minority_idx, size=n_new, replace=True)
    return train.with_rows(np.vstack([train.rows, train.rows[picks]]))


def knn_regressor_fit_predict(train: JointDataset, test_features, k: int) -> np.ndarray:
    """Mean target of the k nearest train rows by Euclidean distance on
    z-scored features; distance ties break by train row index."""
    if train.n < 1:
        raise DataError("empty training set")
    if k < 1 or k > train.n:
        raise DataError(f"k={k} out of range for {train.n} training rows")
    X = train.features
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    Xs = (X - mean) / std
    T = (np.atleast_2d(np.asarray(test_features, dtype=np.float64)) - mean) / std

    preds = np.empty(T.shape[0])
    targets = train.targets
    for i, row in enumerate(T):
        d2 = np.einsum("ij,ij->i", Xs - row, Xs - row)
        neighbours = np.argsort(d2, kind="stable")[:k]
        preds[i] = targets[neighbours].mean()
    return preds


def load_external_predictions(path) -> dict[tuple[int, int], float]:
    """Read (split_id, row_id, prediction) rows from a CSV file."""
    table: dict[tuple[int, int], float] = {}
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"split_id", "row_id", "prediction"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise DataError(
                    f"{path}: header must contain split_id,row_id,prediction"
                )
            for rec in reader:
                key = (int(rec["split_id"]), int(rec["row_id"]))
                table[key] = float(rec["prediction"])
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"{path}: malformed row ({exc})") from exc
    return table


@dataclass
class SplitOutcome:
    method: str
    split_index: int
    report: MetricReport | None
    error: str | None = None
    timings: dict[str, float] = field(default_factory=dict)


@dataclass
class PairwiseComparison:
    """Win counts and significance for one (method pair, metric)."""

    method_a: str
    method_b: str
    metric: str
    wins_a: int
    wins_b: int
    no_contests: int
    p_value: float | None
    significant: bool
    winner: str | None

    def to_dict(self) -> dict:
        return {
            "method_a": self.method_a,
            "method_b": self.method_b,
            "metric": self.metric,
            "wins_a": self.wins_a,
            "wins_b": self.wins_b,
            "no_contests": self.no_contests,
            "p_value": self.p_value,
            "significant": self.significant,
            "winner": self.winner,
        }


@dataclass
class EvalReport:
    """Per-split metric values plus pairwise win/significance tables."""

    config: dict
    outcomes: list[SplitOutcome]
    pairwise: list[PairwiseComparison]

    def metric_series(self, method: str, metric: str) -> list[float | None]:
        by_split: dict[int, float | None] = {}
        for o in self.outcomes:
            if o.method == method:
                by_split[o.split_index] = (
                    getattr(o.report, metric) if o.report is not None else None
                )
        return [by_split[i] for i in sorted(by_split)]

    @property
    def failures(self) -> list[tuple[str, int, str]]:
        return [(o.method, o.split_index, o.error) for o in self.outcomes if o.error]

    def to_dict(self, include_timings: bool = False) -> dict:
        return {
            "config": self.config,
            "outcomes": [
                {
                    "method": o.method,
                    "split_index": o.split_index,
                    "metrics": o.report.to_dict() if o.report is not None else None,
                    "error": o.error,
                    **({"timings": o.timings} if include_timings else {}),
                }
                for o in self.outcomes
            ],
            "pairwise": [p.to_dict() for p in self.pairwise],
        }

    def to_json(self, include_timings: bool = False) -> str:
        return json.dumps(self.to_dict(include_timings=include_timings), indent=2)


def _augment_for_method(
    method: str,
    train: JointDataset,
    config: ExperimentConfig,
    seed: int,
    timings: dict[str, float],
) -> tuple[JointDataset, AugmentationArtifacts | None]:
    if method == METHOD_NONE:
        return train, None
    if method == METHOD_RANDOM_OVERSAMPLE:
        t0 = time.perf_counter()
        augmented = random_oversample(train, config.ro_ratio, seed)
        timings["augment"] = time.perf_counter() - t0
        return augmented, None
    if method == METHOD_MAHALANOBIS_GAN:
        t0 = time.perf_counter()
        artifacts = augment_dataset(train, config.gan, config.match, seed=seed)
        timings["augment"] = time.perf_counter() - t0
        return artifacts.augmented, artifacts
    raise DataError(f"unknown method {method!r}")


def run_experiment(
    config: ExperimentConfig, dataset: JointDataset | None = None
) -> EvalReport:
    """Run every (method, split) cell and build the comparison tables."""
    if dataset is None:
        if config.data_path is None or config.target_column is None:
            raise DataError("config needs data_path and target_column, or pass a dataset")
        dataset = load_csv(config.data_path, config.target_column)

    externals = {
        name: load_external_predictions(path)
        for name, path in sorted(config.external_prediction_files.items())
    }
    plans = make_splits(dataset.n, config.n_splits, config.train_fraction, config.seed)

    outcomes: list[SplitOutcome] = []
    for i, plan in enumerate(plans):
        train = dataset.take(plan.train_indices)
        test = dataset.take(plan.test_indices)
        test_checksum = test.rows.copy()
        seed_i = split_seed(config.seed, i)

        try:
            relevance = build_relevance(train.targets, config.relevance_mode)
            util = UtilityConfig.from_relevance(relevance, config.relevance_threshold)
        except MahaganError as exc:
            for method in config.all_method_names():
                outcomes.append(SplitOutcome(method, i, None, f"relevance: {exc}"))
            continue

        for method in config.methods:
            timings: dict[str, float] = {}
            try:
                augmented, _ = _augment_for_method(method, train, config, seed_i, timings)
                t0 = time.perf_counter()
                preds = knn_regressor_fit_predict(augmented, test.features, config.knn_k)
                timings["fit_predict"] = time.perf_counter() - t0
                report = compute_report(test.targets, preds, util)
                outcomes.append(SplitOutcome(method, i, report, timings=timings))
            except MahaganError as exc:
                outcomes.append(SplitOutcome(method, i, None, str(exc), timings))

        for name, table in externals.items():
            try:
                preds = np.array(
                    [table[(i, int(row))] for row in plan.test_indices], dtype=np.float64
                )
            except KeyError as exc:
                outcomes.append(
                    SplitOutcome(name, i, None, f"missing prediction for (split, row) {exc}")
                )
                continue
            report = compute_report(test.targets, preds, util)
            outcomes.append(SplitOutcome(name, i, report))

        if not np.array_equal(test_checksum, dataset.rows[list(plan.test_indices)]):
            raise MahaganError("test partition was modified during the run")

    report = EvalReport(config.to_dict(), outcomes, [])
    report.pairwise = _pairwise_tables(report, config)
    return report


def _pairwise_tables(report: EvalReport, config: ExperimentConfig) -> list[PairwiseComparison]:
    methods = config.all_method_names()
    tables: list[PairwiseComparison] = []
    if len(methods) < 2:
        return tables
    for idx_a in range(len(methods)):
        for idx_b in range(idx_a + 1, len(methods)):
            a, b = methods[idx_a], methods[idx_b]
            for metric, higher_better in METRIC_DIRECTIONS.items():
                series_a = report.metric_series(a, metric)
                series_b = report.metric_series(b, metric)
                wins_a = wins_b = no_contest = 0
                paired_a, paired_b = [], []
                for va, vb in zip(series_a, series_b):
                    if va is None or vb is None or va == vb:
                        no_contest += 1
                        continue
                    better_a = va > vb if higher_better else va < vb
                    wins_a += int(better_a)
                    wins_b += int(not better_a)
                    paired_a.append(va)
                    paired_b.append(vb)
                p_value = None
                significant = False
                if len(paired_a) >= 5:
                    result = wilcoxon_signed_rank(
                        paired_a, paired_b, greater_is_better=higher_better
                    )
                    p_value = result.p_value
                    significant = (not result.no_contest) and result.p_value < ALPHA
                winner = a if wins_a > wins_b else b if wins_b > wins_a else None
                tables.append(
                    PairwiseComparison(
                        a, b, metric, wins_a, wins_b, no_contest, p_value, significant, winner
                    )
                )
    return tables


def summary_table(report: EvalReport) -> str:
    """Human-readable per-method means and pairwise win lines."""
    lines = []
    methods: dict[str, dict[str, list[float]]] = {}
    for o in report.outcomes:
        if o.report is None:
            continue
        per = methods.setdefault(o.method, {m: [] for m in METRIC_DIRECTIONS})
        for metric in METRIC_DIRECTIONS:
            per[metric].append(getattr(o.report, metric))
    lines.append(f"{'method':<24}{'rmse':>12}{'sera':>14}{'f_phi1':>10}{'splits':>8}")
    for method, per in methods.items():
        n = len(per["rmse"])
        lines.append(
            f"{method:<24}"
            f"{np.mean(per['rmse']):>12.5g}"
            f"{np.mean(per['sera']):>14.5g}"
            f"{np.mean(per['f_phi1']):>10.4f}"
            f"{n:>8d}"
        )
    if report.pairwise:
        lines.append("")
        lines.append("pairwise wins (A vs B; * = significant at 0.05):")
        for c in report.pairwise:
            star = "*" if c.significant else ""
            p_txt = f"p={c.p_value:.4g}" if c.p_value is not None else "p=n/a"
            lines.append(
                f"  {c.method_a} vs {c.method_b} [{c.metric}]: "
                f"{c.wins_a}-{c.wins_b} (nc {c.no_contests}) {p_txt}{star}"
            )
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Diagnostics bundle
# ---------------------------------------------------------------------------

def pearson_matrix(rows: np.ndarray) -> np.ndarray:
    """Pearson correlations with unit diagonal; constant columns give 0."""
    X = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if X.shape[0] == 0:
        return np.eye(X.shape[1])
    std = X.std(axis=0)
    safe = np.where(std == 0.0, 1.0, std)
    Z = (X - X.mean(axis=0)) / safe
    corr = Z.T @ Z / X.shape[0]
    corr[std == 0.0, :] = 0.0
    corr[:, std == 0.0] = 0.0
    np.fill_diagonal(corr, 1.0)
    corr = (corr + corr.T) / 2.0
    return np.clip(corr, -1.0, 1.0)


def _write_matrix_csv(path, matrix: np.ndarray, header: list[str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in np.atleast_2d(matrix):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def export_diagnostics(artifacts: AugmentationArtifacts, outdir) -> list[Path]:
    """Write the diagnostics bundle for one completed pipeline run.

    Files: squared distances with minority flags plus the fitted mixture
    and Gaussian parameters, chi-square Q-Q data, Pearson correlation
    matrices of real minority vs matched synthetic rows (and their
    difference), the raw row matrices for external embedding tools, the
    GAN loss history, and the match assignments.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def emit(name: str, writer) -> None:
        path = out / name
        writer(path)
        written.append(path)

    d2 = artifacts.squared_distances
    mask = artifacts.mixture.minority_mask

    def write_distances(path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("row_index,squared_distance,is_minority\n")
            for i, (d, m) in enumerate(zip(d2, mask)):
                fh.write(f"{i},{d!r},{int(m)}\n")

    emit("distances.csv", write_distances)
    emit("mixture.json", lambda p: Path(p).write_text(artifacts.mixture.to_json()))
    emit("gaussian.json", lambda p: Path(p).write_text(artifacts.stats.to_json()))

    order = np.argsort(d2, kind="stable")
    probs = (np.arange(1, d2.size + 1) - 0.5) / d2.size
    theoretical = chi2.ppf(probs, df=artifacts.stats.p)

    def write_qq(path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("empirical_quantile,theoretical_chi2_quantile,is_minority\n")
            for i, row in enumerate(order):
                fh.write(f"{d2[row]!r},{theoretical[i]!r},{int(mask[row])}\n")

    emit("qq.csv", write_qq)

    names = list(artifacts.augmented.column_names)
    corr_real = pearson_matrix(artifacts.minority_rows)
    corr_synth = pearson_matrix(artifacts.synthetic_rows)
    emit("correlation_real.csv", lambda p: _write_matrix_csv(p, corr_real, names))
    emit("correlation_synthetic.csv", lambda p: _write_matrix_csv(p, corr_synth, names))
    emit(
        "correlation_difference.csv",
        lambda p: _write_matrix_csv(p, corr_synth - corr_real, names),
    )
    emit("minority_rows.csv", lambda p: _write_matrix_csv(p, artifacts.minority_rows, names))
    emit("synthetic_rows.csv", lambda p: _write_matrix_csv(p, artifacts.synthetic_rows, names))
    emit("gan_losses.csv", lambda p: artifacts.gan.write_loss_csv(p))
    emit("matches.csv", lambda p: artifacts.match_result.write_csv(p))
    return written
