"""Command-line entry point.

Subcommands: ``preprocess``, ``fit``, ``train``, ``evaluate``, ``predict``,
``report``. Global flags on every subcommand: ``--seed``, ``--threads``,
``--config`` (a flat key=value file mirroring the train/fit flags; explicit
flags override file values).

``--threads N`` pins the BLAS thread pools, which only works before numpy
is first imported; main() therefore pre-scans argv and sets the
environment up front, and the numeric modules are imported lazily inside
the command handlers. ``--threads 1`` makes runs bit-reproducible.

Every failure exits 1 with one machine-parsable line on stderr:
``stancekit: error [stage=<stage> code=<code>] <message>``.
"""

from __future__ import annotations

import argparse
import os
import sys

_THREAD_ENV_VARS = (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def apply_thread_limit(argv: list[str]) -> int:
    """Pre-scan argv for --threads and pin the BLAS pools via environment.

    Must run before numpy's first import. Returns the thread count
    (0 means: leave the environment alone).
    """
    threads = 0
    for i, arg in enumerate(argv):
        if arg == "--threads" and i + 1 < len(argv):
            raw = argv[i + 1]
        elif arg.startswith("--threads="):
            raw = arg[len("--threads=") :]
        else:
            continue
        try:
            threads = int(raw)
        except ValueError:
            return 0  # argparse will reject it with a proper message
    if threads > 0:
        for var in _THREAD_ENV_VARS:
            os.environ[var] = str(threads)
    return threads


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (default 0)")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="BLAS thread count; 1 gives bit-reproducible runs, 0 leaves the default",
    )
    parser.add_argument(
        "--config",
        default=None,
        metavar="FILE",
        help="flat key=value config file; explicit flags override its values",
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stancekit",
        description="Headline/body stance detection: TF-IDF, truncated SVD, "
        "soft cosine similarity, and a two-stage dense network.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser(
        "preprocess", help="write token-level views of the corpus for inspection"
    )
    p.add_argument("--bodies", required=True, help="bodies CSV")
    p.add_argument("--stances", required=True, help="labeled stances CSV")
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)

    p = sub.add_parser(
        "fit", help="fit the vectorizer and rank-selected SVD, no network"
    )
    _add_corpus_flags(p)
    _add_common(p)

    p = sub.add_parser("train", help="run the full training pipeline")
    _add_corpus_flags(p)
    p.add_argument("--feature-mode", default=None, choices=["scm_only", "concat", "concat_scm"])
    p.add_argument("--holdout-frac", type=float, default=None, help="held-out fraction (default 0.1)")
    p.add_argument("--batch-size", type=int, default=None, help="minibatch size (default 512)")
    p.add_argument("--epochs", type=int, default=None, help="stage-1 epochs (default 80)")
    p.add_argument("--learning-rate", type=float, default=None, help="stage-1 learning rate (default 1e-3)")
    p.add_argument("--optimizer", default=None, choices=["adam", "sgd"])
    p.add_argument("--stage2-epochs", type=int, default=None, help="fine-tuning epochs (default 20)")
    p.add_argument("--stage2-learning-rate", type=float, default=None, help="fine-tuning learning rate (default 1e-4)")
    p.add_argument(
        "--class-weighting",
        action="store_const",
        const=True,
        default=None,
        help="weight the loss by inverse class frequency",
    )
    p.add_argument(
        "--early-stop",
        type=int,
        default=None,
        metavar="PATIENCE",
        help="stop a stage after this many epochs without loss improvement (0 disables)",
    )
    _add_common(p)

    p = sub.add_parser("evaluate", help="evaluate a trained bundle on labeled pairs")
    p.add_argument("--bundle", required=True, help="bundle directory")
    p.add_argument("--stances", required=True, help="labeled stances CSV")
    p.add_argument("--bodies", required=True, help="bodies CSV")
    p.add_argument("--out", default=None, help="directory for report files and figures")
    p.add_argument(
        "--predictions", default=None, metavar="FILE", help="write per-pair predictions TSV"
    )
    p.add_argument("--split", default="eval", help="name used in report file names")
    _add_common(p)

    p = sub.add_parser("predict", help="classify one headline/body pair")
    p.add_argument("--bundle", required=True, help="bundle directory")
    p.add_argument("--headline", required=True, help="headline text")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--body", help="body text")
    group.add_argument("--body-file", help="file holding the body text")
    _add_common(p)

    p = sub.add_parser("report", help="re-render reports and figures from a bundle")
    p.add_argument("--bundle", required=True, help="bundle directory")
    p.add_argument("--out", default=None, help="directory to render figures into")
    _add_common(p)

    return parser


def _add_corpus_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bodies", default=None, help="bodies CSV")
    p.add_argument("--stances", default=None, help="labeled stances CSV")
    p.add_argument("--out", default=None, help="output directory (default: out)")
    p.add_argument("--k-max", type=int, default=None, help="decomposition rank cap (default 1024)")


def _read_config_file(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    from .bundle import read_kv

    return read_kv(path)


_FLAG_TO_FIELD = {
    "bodies": "bodies",
    "stances": "stances",
    "out": "out_dir",
    "k_max": "k_max",
    "feature_mode": "feature_mode",
    "seed": "seed",
    "holdout_frac": "holdout_frac",
    "batch_size": "batch_size",
    "epochs": "epochs",
    "learning_rate": "learning_rate",
    "optimizer": "optimizer",
    "stage2_epochs": "stage2_epochs",
    "stage2_learning_rate": "stage2_learning_rate",
    "class_weighting": "class_weighting",
    "early_stop": "early_stop_patience",
    "threads": "threads",
}


def _pipeline_config(args: argparse.Namespace):
    """Merge defaults < config file < explicit flags into a PipelineConfig."""
    from .pipeline import PipelineConfig

    entries = _read_config_file(args.config)
    config = PipelineConfig.from_kv(entries)
    for flag, field in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is None:
            continue
        if field == "early_stop_patience" and value == 0:
            value = None  # explicit 0 switches early stopping off
        setattr(config, field, value)
    return config


def _cmd_preprocess(args) -> int:
    from .pipeline import run_preprocess

    run_preprocess(args.bodies, args.stances, args.out)
    return 0


def _cmd_fit(args) -> int:
    from .pipeline import run_fit

    run_fit(_pipeline_config(args))
    return 0


def _cmd_train(args) -> int:
    from .pipeline import run_train

    run_train(_pipeline_config(args))
    return 0


def _cmd_evaluate(args) -> int:
    from .pipeline import run_evaluate

    run_evaluate(
        args.bundle,
        args.stances,
        args.bodies,
        out_dir=args.out,
        predictions_path=args.predictions,
        split_name=args.split,
    )
    return 0


def _cmd_predict(args) -> int:
    from .errors import ConfigError
    from .pipeline import run_predict

    if args.body_file is not None:
        try:
            body = open(args.body_file, encoding="utf-8").read()
        except OSError as exc:
            raise ConfigError(f"cannot read body file: {exc}", code="missing-path") from None
    else:
        body = args.body
    run_predict(args.bundle, args.headline, body)
    return 0


def _cmd_report(args) -> int:
    from .pipeline import run_report

    run_report(args.bundle, out_dir=args.out)
    return 0


_HANDLERS = {
    "preprocess": _cmd_preprocess,
    "fit": _cmd_fit,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "predict": _cmd_predict,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    apply_thread_limit(argv)
    parser = _build_parser()
    args = parser.parse_args(argv)

    from .errors import StanceKitError

    try:
        return _HANDLERS[args.command](args)
    except StanceKitError as exc:
        print(
            f"stancekit: error [stage={exc.stage} code={exc.code}] {exc}",
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
