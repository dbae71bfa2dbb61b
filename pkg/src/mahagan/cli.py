"""Command-line interface.

Subcommands: ``detect`` (Stage 1 only), ``train-gan``, ``augment`` (full
pipeline, writes the augmented CSV), ``evaluate`` (repeated-split
experiment, writes an EvalReport JSON plus a summary table), and
``diagnostics``. Exit codes: 0 success, 1 usage error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .dataset import load_csv, make_splits, standardize, write_csv
from .errors import DataError, NumericalError
from .harness import (
    BUILTIN_METHODS,
    ExperimentConfig,
    export_diagnostics,
    run_experiment,
    summary_table,
)
from .matching import MatchConfig
from .minority import detect_minority
from .pipeline import augment_dataset
from .wgan import GanConfig, sample_pool, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; the contract here is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from None


def read_config_file(path) -> dict[str, str]:
    """Parse 'key = value' lines; '#' starts a comment, blanks ignored."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input CSV path (header mandatory)")
    p.add_argument("--target", required=True, help="target column name or 0-based index")
    p.add_argument("--config", help="key=value config file; flags override it")


def _add_gan_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--latent-dim", type=int, default=64)
    p.add_argument("--lambda-gp", type=float, default=10.0)
    p.add_argument("--pool-size", type=int, default=10_000)
    p.add_argument("--critic-steps", type=int, default=5)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--gan-iterations", type=int, default=2000)
    p.add_argument("--generator-hidden", default="128,256,128")
    p.add_argument("--critic-hidden", default="256,256,128")
    p.add_argument("--learning-rate", type=float, default=1e-4)


def _add_match_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--n-pick", type=int, default=1)
    p.add_argument("--with-replacement", action="store_true")
    p.add_argument("--fall-through", action="store_true")


def _resolve_target(value: str) -> str | int:
    try:
        return int(value)
    except ValueError:
        return value


def _gan_config(args, seed: int) -> GanConfig:
    return GanConfig(
        latent_dim=args.latent_dim,
        lambda_gp=args.lambda_gp,
        pool_size=args.pool_size,
        critic_steps_per_gen=args.critic_steps,
        batch_size=args.batch_size,
        total_gen_iterations=args.gan_iterations,
        seed=seed,
        generator_hidden=_parse_int_list(args.generator_hidden),
        critic_hidden=_parse_int_list(args.critic_hidden),
        learning_rate=args.learning_rate,
    )


def _match_config(args) -> MatchConfig:
    return MatchConfig(
        k=args.k,
        n_pick=args.n_pick,
        without_replacement=not args.with_replacement,
        fall_through=args.fall_through,
    )


def build_parser() -> tuple[_Parser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="mahagan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers: dict[str, argparse.ArgumentParser] = {}

    def add_parser(name: str, **kwargs) -> argparse.ArgumentParser:
        subparsers[name] = sub.add_parser(name, **kwargs)
        return subparsers[name]

    p = add_parser("detect", help="Stage 1 only: print the threshold and minority count")
    _add_data_args(p)
    p.add_argument("--json", dest="json_out", help="also write mixture parameters as JSON")

    p = add_parser("train-gan", help="Stages 1-2: train the generator, write a checkpoint")
    _add_data_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="checkpoint JSON path")
    p.add_argument("--loss-csv", help="also write the loss history CSV")
    _add_gan_args(p)

    p = add_parser("augment", help="full pipeline; write the augmented CSV")
    _add_data_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="augmented CSV path")
    _add_gan_args(p)
    _add_match_args(p)

    p = add_parser("evaluate", help="repeated-split experiment with win tables")
    _add_data_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="EvalReport JSON path")
    p.add_argument("--splits", type=int, default=25)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--methods", default="none,mahalanobis_gan",
                   help=f"comma list from {','.join(BUILTIN_METHODS)}")
    p.add_argument("--knn-k", type=int, default=5)
    p.add_argument("--ro-ratio", type=float, default=1.0)
    p.add_argument("--relevance-mode", default="both_extremes",
                   choices=("both_extremes", "high_only", "low_only"))
    p.add_argument("--relevance-threshold", type=float, default=0.8)
    p.add_argument("--import", dest="imports", action="append", default=[],
                   metavar="NAME=CSV",
                   help="external predictions (split_id,row_id,prediction); repeatable")
    p.add_argument("--timings", action="store_true", help="include timings in the JSON")
    _add_gan_args(p)
    _add_match_args(p)

    p = add_parser("diagnostics", help="run one split of the pipeline, export the bundle")
    _add_data_args(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--outdir", required=True)
    p.add_argument("--train-fraction", type=float, default=0.8)
    _add_gan_args(p)
    _add_match_args(p)
    return parser, subparsers


def _apply_config_file(subparser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Splice config-file values in ahead of explicit flags, which win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise UsageError("--config needs a file path")
    values = read_config_file(argv[idx + 1])
    known = set()
    for action in subparser._actions:
        for opt in action.option_strings:
            known.add(opt.lstrip("-").replace("-", "_"))
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"config file keys not recognised: {sorted(unknown)}")
    injected: list[str] = []
    for key, value in values.items():
        flag = "--" + key.replace("_", "-")
        if flag in argv:
            continue
        injected.extend([flag, value])
    return [argv[0], *injected, *argv[1:]]


def cmd_detect(args) -> int:
    data = load_csv(args.data, _resolve_target(args.target))
    standardized, _ = standardize(data)
    mixture, stats = detect_minority(standardized)
    print(f"threshold: {mixture.threshold:.6g}")
    print(f"minority-count: {int(mixture.minority_mask.sum())}")
    print(f"total-rows: {data.n}")
    print(f"fallback-used: {str(mixture.fallback_used).lower()}")
    print(f"ridge-used: {stats.ridge_used:.6g}")
    if args.json_out:
        payload = {"mixture": mixture.to_dict(), "gaussian": stats.to_dict()}
        Path(args.json_out).write_text(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_train_gan(args) -> int:
    data = load_csv(args.data, _resolve_target(args.target))
    standardized, _ = standardize(data)
    mixture, _ = detect_minority(standardized)
    gan = train(standardized.rows[mixture.minority_mask], _gan_config(args, args.seed))
    Path(args.out).write_text(gan.to_json())
    if args.loss_csv:
        gan.write_loss_csv(args.loss_csv)
    print(f"trained on {int(mixture.minority_mask.sum())} minority rows")
    print(f"checkpoint: {args.out}")
    return EXIT_OK


def cmd_augment(args) -> int:
    data = load_csv(args.data, _resolve_target(args.target))
    artifacts = augment_dataset(
        data, _gan_config(args, args.seed), _match_config(args), seed=args.seed
    )
    write_csv(artifacts.augmented, args.out)
    n_new = artifacts.augmented.n - data.n
    print(f"threshold: {artifacts.threshold:.6g}")
    print(f"minority-count: {int(artifacts.mixture.minority_mask.sum())}")
    print(f"synthetic-rows-added: {n_new}")
    print(f"augmented-rows: {artifacts.augmented.n}")
    print(f"written: {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    imports: dict[str, str] = {}
    for item in args.imports:
        if "=" not in item:
            raise UsageError(f"--import expects NAME=CSV, got {item!r}")
        name, path = item.split("=", 1)
        imports[name.strip()] = path.strip()
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    config = ExperimentConfig(
        seed=args.seed,
        data_path=args.data,
        target_column=_resolve_target(args.target),
        n_splits=args.splits,
        train_fraction=args.train_fraction,
        methods=methods,
        knn_k=args.knn_k,
        ro_ratio=args.ro_ratio,
        relevance_mode=args.relevance_mode,
        relevance_threshold=args.relevance_threshold,
        gan=_gan_config(args, args.seed),
        match=_match_config(args),
        external_prediction_files=imports,
    )
    report = run_experiment(config)
    Path(args.out).write_text(report.to_json(include_timings=args.timings))
    print(summary_table(report))
    if report.failures:
        print(f"\nfailures: {len(report.failures)} (see report JSON)")
    print(f"\nreport: {args.out}")
    return EXIT_OK


def cmd_diagnostics(args) -> int:
    data = load_csv(args.data, _resolve_target(args.target))
    plan = make_splits(data.n, 1, args.train_fraction, args.seed)[0]
    train_data = data.take(plan.train_indices)
    artifacts = augment_dataset(
        train_data, _gan_config(args, args.seed), _match_config(args), seed=args.seed
    )
    written = export_diagnostics(artifacts, args.outdir)
    print(f"threshold: {artifacts.threshold:.6g}")
    for path in written:
        print(f"written: {path}")
    return EXIT_OK


COMMANDS = {
    "detect": cmd_detect,
    "train-gan": cmd_train_gan,
    "augment": cmd_augment,
    "evaluate": cmd_evaluate,
    "diagnostics": cmd_diagnostics,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    try:
        if argv and argv[0] in COMMANDS:
            argv = _apply_config_file(subparsers[argv[0]], argv)
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
