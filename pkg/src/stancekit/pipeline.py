"""End-to-end pipeline: corpus to bundle, plus evaluate/predict/re-render.

A training run flows preprocess -> TF-IDF fit -> truncated SVD -> elbow
rank selection -> pair featurization -> stage-1 training -> weight
transfer -> stage-2 fine-tuning, then archives every fitted artifact in a
hash-manifested bundle directory together with delimited evaluation
reports, and renders figures next to it. Evaluation, single-pair
prediction, and report re-rendering all start from such a bundle.
"""

from __future__ import annotations

import shutil
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import bundle as bundle_io
from . import report as report_io
from .bundle import Bundle, load_bundle
from .corpus import (
    N_CLASSES,
    Stance,
    StancePair,
    join_pairs,
    load_bodies,
    load_stances,
)
from .errors import ConfigError
from .metrics import (
    ConfusionMatrix,
    EvaluationReport,
    evaluate_predictions,
    report_from_confusion,
)
from .neuralnet import (
    STAGE1_SPECS,
    NetworkModel,
    TrainConfig,
    TrainHistory,
    build,
    forward,
    forward_batch,
    train,
    transfer,
)
from .reducer import SvdModel, elbow, fit_svd, project, truncate
from .similarity import (
    FEATURE_MODES,
    TermSimilarityMatrix,
    build_term_similarity,
    embed_cosine,
    feature_dim,
)
from .textprep import preprocess
from .vectorizer import VectorizerModel, fit as fit_vectorizer, transform, transform_matrix

FIGURES_DIR_NAME = "figures"
BUNDLE_DIR_NAME = "bundle"


@dataclass
class PipelineConfig:
    """Everything one training run depends on; archived with its bundle."""

    bodies: str = ""
    stances: str = ""
    out_dir: str = "out"
    k_max: int = 1024
    feature_mode: str = "concat_scm"
    seed: int = 0
    holdout_frac: float = 0.1
    batch_size: int = 512
    epochs: int = 80
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    stage2_epochs: int = 20
    stage2_learning_rate: float = 1e-4
    class_weighting: bool = False
    early_stop_patience: int | None = None
    threads: int = 0  # 0 leaves the BLAS thread count alone

    def validate(self) -> None:
        if not self.bodies or not self.stances:
            raise ConfigError("bodies and stances paths are required", code="missing-path")
        if self.k_max < 1:
            raise ConfigError(f"k_max must be positive, got {self.k_max}", code="bad-value")
        if self.feature_mode not in FEATURE_MODES:
            raise ConfigError(
                f"feature_mode must be one of {FEATURE_MODES}, got {self.feature_mode!r}",
                code="bad-value",
            )
        if not 0.0 <= self.holdout_frac < 1.0:
            raise ConfigError(
                f"holdout_frac must be in [0, 1), got {self.holdout_frac}",
                code="bad-value",
            )
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive", code="bad-value")
        if self.epochs < 0 or self.stage2_epochs < 0:
            raise ConfigError("epoch counts must be nonnegative", code="bad-value")
        if self.learning_rate <= 0 or self.stage2_learning_rate <= 0:
            raise ConfigError("learning rates must be positive", code="bad-value")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(
                f"optimizer must be adam or sgd, got {self.optimizer!r}", code="bad-value"
            )
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ConfigError("early_stop_patience must be positive", code="bad-value")
        if self.threads < 0:
            raise ConfigError("threads must be nonnegative", code="bad-value")

    def to_kv(self) -> dict[str, str]:
        entries: dict[str, str] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                entries[f.name] = ""
            elif isinstance(value, bool):
                entries[f.name] = "true" if value else "false"
            elif isinstance(value, float):
                entries[f.name] = repr(value)
            else:
                entries[f.name] = str(value)
        return entries

    @classmethod
    def from_kv(cls, entries: dict[str, str]) -> "PipelineConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in entries.items():
            f = known.get(key)
            if f is None:
                raise ConfigError(f"unknown config key {key!r}", code="unknown-key")
            try:
                kwargs[key] = _parse_field(f.name, raw)
            except ValueError:
                raise ConfigError(
                    f"config key {key!r} has malformed value {raw!r}", code="bad-value"
                ) from None
        return cls(**kwargs)


_BOOL_FIELDS = {"class_weighting"}
_FLOAT_FIELDS = {"holdout_frac", "learning_rate", "stage2_learning_rate"}
_INT_FIELDS = {"k_max", "seed", "batch_size", "epochs", "stage2_epochs", "threads"}
_OPT_INT_FIELDS = {"early_stop_patience"}


def _parse_field(name: str, raw: str):
    if name in _BOOL_FIELDS:
        if raw not in ("true", "false"):
            raise ValueError(raw)
        return raw == "true"
    if name in _FLOAT_FIELDS:
        return float(raw)
    if name in _INT_FIELDS:
        return int(raw)
    if name in _OPT_INT_FIELDS:
        return int(raw) if raw else None
    return raw


# --- featurization ----------------------------------------------------------


class FeatureSpace:
    """Frozen featurization state with per-unique-text caching.

    Each distinct headline or body text is preprocessed, vectorized,
    projected, and embedded once; per-pair rows are then assembled from
    the cached parts with exactly the arithmetic of ``pair_feature``.
    """

    def __init__(self, vectorizer: VectorizerModel, svd: SvdModel, mode: str):
        self.vectorizer = vectorizer
        self.svd = svd
        self.tsm: TermSimilarityMatrix = build_term_similarity(svd)
        self.mode = mode
        self.dim = feature_dim(svd.k, mode)
        self._cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}

    def _doc(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        hit = self._cache.get(text)
        if hit is None:
            vec = transform(self.vectorizer, preprocess(text))
            hit = (project(self.svd, vec), self.tsm.embed(vec))
            self._cache[text] = hit
        return hit

    def pair_row(self, headline: str, body_text: str) -> tuple[np.ndarray, float]:
        """(feature row, scm) for one pair; scm is computed in every mode."""
        h_proj, h_emb = self._doc(headline)
        b_proj, b_emb = self._doc(body_text)
        scm = embed_cosine(h_emb, b_emb)
        if self.mode == "scm_only":
            return np.array([scm]), scm
        if self.mode == "concat":
            return np.concatenate([h_proj, b_proj]), scm
        return np.concatenate([h_proj, b_proj, [scm]]), scm


def featurize_pairs(
    pairs: list[StancePair], space: FeatureSpace
) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix (n_pairs x dim) and per-pair scm values."""
    features = np.zeros((len(pairs), space.dim))
    scms = np.zeros(len(pairs))
    for i, pair in enumerate(pairs):
        features[i], scms[i] = space.pair_row(pair.headline, pair.body_text)
    return features, scms


# --- training ----------------------------------------------------------------


def _load_pairs(config: PipelineConfig) -> tuple[list[StancePair], dict[int, str]]:
    bodies = load_bodies(config.bodies)
    stance_rows = load_stances(config.stances, labeled=True)
    return join_pairs(stance_rows, bodies), bodies


def _fit_models(
    config: PipelineConfig,
    pairs: list[StancePair],
    bodies: dict[int, str],
    out,
) -> tuple[VectorizerModel, SvdModel, np.ndarray, int]:
    """Fit TF-IDF and the rank-selected SVD over headlines plus bodies.

    The fitting corpus is each distinct headline (first-appearance order)
    followed by each body in ascending id order, so duplicated headlines
    do not skew document frequencies or the decomposition.
    """
    t0 = time.perf_counter()
    headlines: list[str] = []
    seen: set[str] = set()
    for pair in pairs:
        if pair.headline not in seen:
            seen.add(pair.headline)
            headlines.append(pair.headline)
    docs = [preprocess(h) for h in headlines]
    docs.extend(preprocess(bodies[body_id]) for body_id in sorted(bodies))
    vectorizer = fit_vectorizer(docs)
    matrix = transform_matrix(vectorizer, docs)
    print(
        f"vectorized {len(docs)} documents "
        f"({len(headlines)} headlines + {len(bodies)} bodies), "
        f"vocabulary {vectorizer.vocab_size} terms "
        f"[{time.perf_counter() - t0:.1f}s]",
        file=out,
    )

    t0 = time.perf_counter()
    min_dim = min(matrix.shape)
    pilot_rank = min(config.k_max, min_dim - 1)
    if pilot_rank < 3:
        raise ConfigError(
            f"corpus too small for rank selection: pilot rank {pilot_rank} < 3",
            code="corpus-too-small",
        )
    pilot = fit_svd(matrix, pilot_rank, seed=config.seed)
    curve = np.cumsum(pilot.explained_variance_ratio)
    k_star = elbow(curve)
    svd = truncate(pilot, k_star)
    print(
        f"decomposed at pilot rank {pilot_rank}, retained rank {k_star} "
        f"(cumulative explained variance {curve[k_star - 1]:.4f}) "
        f"[{time.perf_counter() - t0:.1f}s]",
        file=out,
    )
    return vectorizer, svd, curve, k_star


def _holdout_split(
    n_pairs: int, holdout_frac: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded permutation split; returns (train indices, holdout indices)."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_pairs)
    n_holdout = int(round(holdout_frac * n_pairs))
    if n_pairs - n_holdout < 1:
        raise ConfigError(
            f"holdout fraction {holdout_frac} leaves no training pairs",
            code="bad-value",
        )
    return perm[n_holdout:], perm[:n_holdout]


def _inverse_frequency_weights(labels: list[Stance]) -> np.ndarray:
    counts = np.zeros(N_CLASSES)
    for label in labels:
        counts[label.index] += 1
    return len(labels) / (N_CLASSES * np.maximum(counts, 1.0))


def _echo_epoch(out, stage: str):
    def callback(rec):
        print(
            f"  {stage} epoch {rec.epoch:3d}  loss {rec.loss:.6f}  "
            f"accuracy {rec.accuracy:.4f}",
            file=out,
        )

    return callback


@dataclass
class TrainResult:
    bundle: Bundle
    k_star: int
    report_train: EvaluationReport
    report_holdout: EvaluationReport | None
    history_stage1: TrainHistory
    history_stage2: TrainHistory


def run_train(config: PipelineConfig, out=None) -> TrainResult:
    """Full training pipeline; writes the bundle and figures under
    ``config.out_dir`` and prints per-epoch history plus both reports."""
    out = out if out is not None else sys.stdout
    config.validate()
    started = time.perf_counter()

    pairs, bodies = _load_pairs(config)
    if len(pairs) < 2:
        raise ConfigError("need at least two labeled pairs to train", code="corpus-too-small")
    print(f"loaded {len(pairs)} labeled pairs over {len(bodies)} bodies", file=out)

    vectorizer, svd, curve, k_star = _fit_models(config, pairs, bodies, out)

    t0 = time.perf_counter()
    space = FeatureSpace(vectorizer, svd, config.feature_mode)
    features, _ = featurize_pairs(pairs, space)
    labels = [pair.stance for pair in pairs]
    print(
        f"featurized {len(pairs)} pairs, input width {space.dim} "
        f"[{time.perf_counter() - t0:.1f}s]",
        file=out,
    )

    train_idx, holdout_idx = _holdout_split(len(pairs), config.holdout_frac, config.seed)
    train_labels = [labels[i] for i in train_idx]
    class_weights = (
        _inverse_frequency_weights(train_labels) if config.class_weighting else None
    )

    t0 = time.perf_counter()
    stage1_cfg = TrainConfig(
        batch_size=config.batch_size,
        epochs=config.epochs,
        learning_rate=config.learning_rate,
        optimizer=config.optimizer,
        seed=config.seed,
        class_weights=class_weights,
        early_stop_patience=config.early_stop_patience,
    )
    print(
        f"stage 1: training on {len(train_idx)} pairs "
        f"({len(holdout_idx)} held out)",
        file=out,
    )
    stage1 = build(space.dim, STAGE1_SPECS, seed=config.seed)
    stage1, history1 = train(
        stage1, features[train_idx], train_labels, stage1_cfg, on_epoch=_echo_epoch(out, "stage1")
    )

    stage2_cfg = TrainConfig(
        batch_size=config.batch_size,
        epochs=config.stage2_epochs,
        learning_rate=config.stage2_learning_rate,
        optimizer=config.optimizer,
        seed=config.seed + 1,
        class_weights=class_weights,
        early_stop_patience=config.early_stop_patience,
    )
    print("stage 2: transferring weights and fine-tuning", file=out)
    network = transfer(stage1, seed=config.seed + 1)
    network, history2 = train(
        network, features[train_idx], train_labels, stage2_cfg, on_epoch=_echo_epoch(out, "stage2")
    )
    print(f"trained both stages [{time.perf_counter() - t0:.1f}s]", file=out)

    report_train = _evaluate_split(network, features, labels, train_idx)
    report_holdout = (
        _evaluate_split(network, features, labels, holdout_idx)
        if len(holdout_idx) > 0
        else None
    )

    out_dir = Path(config.out_dir)
    bundle_dir = out_dir / BUNDLE_DIR_NAME
    if bundle_dir.exists():
        shutil.rmtree(bundle_dir)
    bundle_dir.mkdir(parents=True)
    bundle_io.save_vectorizer(bundle_dir, vectorizer)
    bundle_io.save_svd(bundle_dir, svd, curve)
    bundle_io.save_network(bundle_dir, network)
    report_io.write_history_tsv(bundle_dir / "history_stage1.tsv", history1)
    report_io.write_history_tsv(bundle_dir / "history_stage2.tsv", history2)
    _write_report_files(bundle_dir, "train", report_train)
    if report_holdout is not None:
        _write_report_files(bundle_dir, "holdout", report_holdout)
    bundle_io.write_manifest(bundle_dir, config.to_kv())

    fig_dir = out_dir / FIGURES_DIR_NAME
    fig_dir.mkdir(parents=True, exist_ok=True)
    report_io.save_variance_figure(fig_dir / "variance_elbow.png", curve, k_star)
    report_io.save_history_figure(
        fig_dir / "training_history.png",
        {"stage 1": history1, "stage 2": history2},
    )
    report_io.save_confusion_figure(
        fig_dir / "confusion_train.png", report_train, "Training split"
    )
    if report_holdout is not None:
        report_io.save_confusion_figure(
            fig_dir / "confusion_holdout.png", report_holdout, "Holdout split"
        )

    print("", file=out)
    print(report_io.format_report(report_train, "Training split"), file=out)
    if report_holdout is not None:
        print(report_io.format_report(report_holdout, "Holdout split"), file=out)
    print(f"bundle written to {bundle_dir}", file=out)
    print(f"figures written to {fig_dir}", file=out)
    print(f"total wall time {time.perf_counter() - started:.1f}s", file=out)

    loaded = Bundle(
        path=bundle_dir,
        config=config.to_kv(),
        vectorizer=vectorizer,
        svd=svd,
        evr_curve=curve,
        network=network,
    )
    return TrainResult(
        bundle=loaded,
        k_star=k_star,
        report_train=report_train,
        report_holdout=report_holdout,
        history_stage1=history1,
        history_stage2=history2,
    )


def _evaluate_split(
    network: NetworkModel, features: np.ndarray, labels: list[Stance], idx: np.ndarray
) -> EvaluationReport:
    probs = forward_batch(network, features[idx])
    preds = [Stance.from_index(int(i)) for i in np.argmax(probs, axis=1)]
    return evaluate_predictions([labels[i] for i in idx], preds)


def _write_report_files(dir_path: Path, split: str, report: EvaluationReport) -> None:
    report_io.write_report_tsv(dir_path / f"report_{split}.tsv", report)
    report_io.write_confusion_tsv(dir_path / f"confusion_{split}.tsv", report)
    report_io.write_summary_kv(dir_path / f"summary_{split}.kv", report)


# --- fit only ----------------------------------------------------------------


def run_fit(config: PipelineConfig, out=None) -> Bundle:
    """Fit the vectorizer and rank-selected SVD without training a network;
    writes a fit-only bundle plus the variance figure."""
    out = out if out is not None else sys.stdout
    config.validate()
    pairs, bodies = _load_pairs(config)
    if len(pairs) < 1:
        raise ConfigError("no labeled pairs", code="corpus-too-small")
    print(f"loaded {len(pairs)} labeled pairs over {len(bodies)} bodies", file=out)
    vectorizer, svd, curve, k_star = _fit_models(config, pairs, bodies, out)

    out_dir = Path(config.out_dir)
    bundle_dir = out_dir / BUNDLE_DIR_NAME
    if bundle_dir.exists():
        shutil.rmtree(bundle_dir)
    bundle_dir.mkdir(parents=True)
    bundle_io.save_vectorizer(bundle_dir, vectorizer)
    bundle_io.save_svd(bundle_dir, svd, curve)
    bundle_io.write_manifest(bundle_dir, config.to_kv())

    fig_dir = out_dir / FIGURES_DIR_NAME
    fig_dir.mkdir(parents=True, exist_ok=True)
    report_io.save_variance_figure(fig_dir / "variance_elbow.png", curve, k_star)
    print(f"fit-only bundle written to {bundle_dir}", file=out)
    return Bundle(
        path=bundle_dir,
        config=config.to_kv(),
        vectorizer=vectorizer,
        svd=svd,
        evr_curve=curve,
        network=None,
    )


# --- preprocessing inspection -------------------------------------------------


def run_preprocess(
    bodies_path: str, stances_path: str, out_dir: str, out=None
) -> tuple[int, int]:
    """Write token-level views of both input files for inspection.

    ``processed_stances.tsv`` holds one row per labeled pair (stance, body
    id, processed headline); ``processed_bodies.tsv`` one row per body.
    Returns (n_stance_rows, n_bodies).
    """
    out = out if out is not None else sys.stdout
    bodies = load_bodies(bodies_path)
    rows = load_stances(stances_path, labeled=True)
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)

    with (target / "processed_bodies.tsv").open("w", encoding="utf-8") as fh:
        fh.write("body_id\ttokens\n")
        for body_id in sorted(bodies):
            fh.write(f"{body_id}\t{' '.join(preprocess(bodies[body_id]))}\n")
    with (target / "processed_stances.tsv").open("w", encoding="utf-8") as fh:
        fh.write("stance\tbody_id\theadline_tokens\n")
        for row in rows:
            fh.write(
                f"{row.stance.value}\t{row.body_id}\t{' '.join(preprocess(row.headline))}\n"
            )
    print(
        f"wrote processed views of {len(rows)} stance rows and "
        f"{len(bodies)} bodies to {target}",
        file=out,
    )
    return len(rows), len(bodies)


# --- evaluation ----------------------------------------------------------------


def run_evaluate(
    bundle_path: str,
    stances_path: str,
    bodies_path: str,
    out_dir: str | None = None,
    predictions_path: str | None = None,
    split_name: str = "eval",
    out=None,
) -> EvaluationReport:
    """Evaluate a trained bundle on labeled pairs; optionally write report
    files, a confusion figure, and a per-pair predictions TSV."""
    out = out if out is not None else sys.stdout
    bundle = load_bundle(bundle_path)
    bodies = load_bodies(bodies_path)
    rows = load_stances(stances_path, labeled=True)
    pairs = join_pairs(rows, bodies)
    if not pairs:
        raise ConfigError("no labeled pairs to evaluate", code="corpus-too-small")

    space = FeatureSpace(bundle.vectorizer, bundle.svd, bundle.feature_mode)
    features, scms = featurize_pairs(pairs, space)
    probs = forward_batch(bundle.network, features)
    pred_idx = np.argmax(probs, axis=1)
    preds = [Stance.from_index(int(i)) for i in pred_idx]
    truths = [pair.stance for pair in pairs]
    report = evaluate_predictions(truths, preds)

    print(report_io.format_report(report, f"Evaluation ({split_name})"), file=out)

    if out_dir is not None:
        target = Path(out_dir)
        target.mkdir(parents=True, exist_ok=True)
        _write_report_files(target, split_name, report)
        fig_dir = target / FIGURES_DIR_NAME
        fig_dir.mkdir(parents=True, exist_ok=True)
        report_io.save_confusion_figure(
            fig_dir / f"confusion_{split_name}.png", report, f"Evaluation ({split_name})"
        )
        print(f"report files written to {target}", file=out)

    if predictions_path is not None:
        _write_predictions_tsv(predictions_path, pairs, preds, probs, scms)
        print(f"per-pair predictions written to {predictions_path}", file=out)
    return report


def _write_predictions_tsv(path, pairs, preds, probs, scms) -> None:
    header = (
        "pair\tbody_id\ttrue\tpredicted\tscm\t"
        "p_agree\tp_disagree\tp_discuss\tp_unrelated\n"
    )
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(header)
        for i, (pair, pred) in enumerate(zip(pairs, preds)):
            p = [float(v) for v in probs[i]]
            fh.write(
                f"{i}\t{pair.body_id}\t{pair.stance.value}\t{pred.value}\t{float(scms[i])!r}"
                f"\t{p[0]!r}\t{p[1]!r}\t{p[2]!r}\t{p[3]!r}\n"
            )


# --- single-pair prediction -----------------------------------------------------


def run_predict(
    bundle_path: str, headline: str, body: str, out=None
) -> tuple[Stance, np.ndarray, float]:
    """Classify one headline/body pair with a trained bundle."""
    out = out if out is not None else sys.stdout
    bundle = load_bundle(bundle_path)
    space = FeatureSpace(bundle.vectorizer, bundle.svd, bundle.feature_mode)
    feature, scm = space.pair_row(headline, body)
    probs = forward(bundle.network, feature)
    stance = Stance.from_index(int(np.argmax(probs)))
    print(f"stance: {stance.value}", file=out)
    print(
        "probabilities: "
        + " ".join(f"{s.value}={probs[s.index]:.4f}" for s in Stance),
        file=out,
    )
    print(f"scm: {scm:.6f}", file=out)
    return stance, probs, scm


# --- re-render ------------------------------------------------------------------


def run_report(bundle_path: str, out_dir: str | None = None, out=None) -> None:
    """Re-render reports and figures from an archived bundle, no corpus
    needed: confusion counts alone determine every emitted metric."""
    out = out if out is not None else sys.stdout
    bundle = load_bundle(bundle_path, require_network=False)
    bundle_dir = Path(bundle_path)

    splits = []
    for tsv in sorted(bundle_dir.glob("confusion_*.tsv")):
        split = tsv.stem[len("confusion_") :]
        counts = report_io.read_confusion_tsv(tsv)
        report = report_from_confusion(ConfusionMatrix(counts=counts))
        splits.append((split, report))
        print(report_io.format_report(report, f"Archived report ({split} split)"), file=out)

    histories: dict[str, TrainHistory] = {}
    for tsv in sorted(bundle_dir.glob("history_*.tsv")):
        label = tsv.stem[len("history_") :].replace("stage", "stage ")
        histories[label] = report_io.read_history_tsv(tsv)

    if not splits and not histories:
        print("bundle holds no archived reports (fit-only bundle)", file=out)

    if out_dir is not None:
        fig_dir = Path(out_dir) / FIGURES_DIR_NAME
        fig_dir.mkdir(parents=True, exist_ok=True)
        k_star = bundle.svd.k
        report_io.save_variance_figure(
            fig_dir / "variance_elbow.png", bundle.evr_curve, k_star
        )
        if histories:
            report_io.save_history_figure(fig_dir / "training_history.png", histories)
        for split, report in splits:
            report_io.save_confusion_figure(
                fig_dir / f"confusion_{split}.png",
                report,
                f"Archived report ({split} split)",
            )
        print(f"figures written to {fig_dir}", file=out)
