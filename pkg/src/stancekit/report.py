"""Evaluation reports: terminal tables, delimited files, and figures.

Delimited outputs are plain TSV with floats written via ``repr`` so that
identical runs produce byte-identical files. Figures are rendered with
matplotlib's object-oriented API straight to PNG files; matplotlib is
imported lazily so library users who never plot do not pay for it.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus import STANCE_ORDER
from .metrics import EvaluationReport
from .neuralnet import EpochRecord, TrainHistory

_STANCE_TITLES = {
    "agree": "Agree",
    "disagree": "Disagree",
    "discuss": "Discuss",
    "unrelated": "Unrelated",
}


def _pct(x: float) -> str:
    return f"{100.0 * x:6.2f}"


def format_report(report: EvaluationReport, title: str) -> str:
    """Human-readable per-stance table plus summary lines."""
    lines = [title, "=" * len(title), ""]
    header = f"{'Stance':<10} {'Accuracy':>9} {'Precision':>10} {'Recall':>8} {'F1':>8}"
    lines.append(header)
    lines.append("-" * len(header))
    for stance in STANCE_ORDER:
        m = report.per_class[stance]
        lines.append(
            f"{_STANCE_TITLES[stance.value]:<10} {_pct(m.accuracy):>9} "
            f"{_pct(m.precision):>10} {_pct(m.recall):>8} {_pct(m.f1):>8}"
        )
    lines.append("")
    lines.append(f"Pairs evaluated    : {report.n_pairs}")
    lines.append(f"Overall accuracy   : {_pct(report.overall_accuracy).strip()}%")
    lines.append(
        "Macro P/R/F1       : "
        f"{_pct(report.macro_precision).strip()}% / "
        f"{_pct(report.macro_recall).strip()}% / "
        f"{_pct(report.macro_f1).strip()}%"
    )
    lines.append(
        "Micro P/R          : "
        f"{_pct(report.micro_precision).strip()}% / "
        f"{_pct(report.micro_recall).strip()}%"
    )
    lines.append(
        "Weighted score     : "
        f"{report.fnc_points:.2f} / {report.fnc_max_points:.2f} "
        f"({_pct(report.fnc_relative).strip()}%)"
    )
    return "\n".join(lines) + "\n"


def write_report_tsv(path: str | Path, report: EvaluationReport) -> None:
    rows = ["stance\taccuracy\tprecision\trecall\tf1\tsupport\n"]
    for stance in STANCE_ORDER:
        m = report.per_class[stance]
        rows.append(
            f"{stance.value}\t{m.accuracy!r}\t{m.precision!r}"
            f"\t{m.recall!r}\t{m.f1!r}\t{m.support}\n"
        )
    Path(path).write_text("".join(rows), encoding="utf-8")


def write_confusion_tsv(path: str | Path, report: EvaluationReport) -> None:
    names = [s.value for s in STANCE_ORDER]
    rows = ["true\\pred\t" + "\t".join(names) + "\n"]
    for i, name in enumerate(names):
        counts = "\t".join(str(int(c)) for c in report.confusion.counts[i])
        rows.append(f"{name}\t{counts}\n")
    Path(path).write_text("".join(rows), encoding="utf-8")


def read_confusion_tsv(path: str | Path) -> np.ndarray:
    """Counts back from a written confusion TSV (row/column class order)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    counts = np.zeros((len(STANCE_ORDER), len(STANCE_ORDER)), dtype=np.int64)
    for i, line in enumerate(lines[1 : 1 + len(STANCE_ORDER)]):
        cells = line.split("\t")
        counts[i] = [int(c) for c in cells[1:]]
    return counts


def write_summary_kv(path: str | Path, report: EvaluationReport) -> None:
    from .bundle import write_kv

    write_kv(
        path,
        {
            "n_pairs": str(report.n_pairs),
            "overall_accuracy": repr(report.overall_accuracy),
            "macro_precision": repr(report.macro_precision),
            "macro_recall": repr(report.macro_recall),
            "macro_f1": repr(report.macro_f1),
            "micro_precision": repr(report.micro_precision),
            "micro_recall": repr(report.micro_recall),
            "weighted_points": repr(report.fnc_points),
            "weighted_max_points": repr(report.fnc_max_points),
            "weighted_relative": repr(report.fnc_relative),
        },
    )


def write_history_tsv(path: str | Path, history: TrainHistory) -> None:
    rows = ["epoch\tloss\taccuracy\n"]
    for rec in history:
        rows.append(f"{rec.epoch}\t{rec.loss!r}\t{rec.accuracy!r}\n")
    Path(path).write_text("".join(rows), encoding="utf-8")


def read_history_tsv(path: str | Path) -> TrainHistory:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    history: TrainHistory = []
    for line in lines[1:]:
        if not line:
            continue
        epoch, loss, accuracy = line.split("\t")
        history.append(
            EpochRecord(epoch=int(epoch), loss=float(loss), accuracy=float(accuracy))
        )
    return history


# --- figures ---------------------------------------------------------------


def _new_figure(width: float, height: float):
    # Object-oriented matplotlib only: no pyplot global state, safe headless.
    from matplotlib.figure import Figure

    return Figure(figsize=(width, height), dpi=120)


def save_confusion_figure(path: str | Path, report: EvaluationReport, title: str) -> None:
    fig = _new_figure(5.2, 4.4)
    ax = fig.add_subplot(111)
    counts = report.confusion.counts
    names = [_STANCE_TITLES[s.value] for s in STANCE_ORDER]
    image = ax.imshow(counts, cmap="Blues")
    threshold = counts.max() / 2.0 if counts.max() > 0 else 0.5
    for i in range(len(names)):
        for j in range(len(names)):
            color = "white" if counts[i, j] > threshold else "black"
            ax.text(j, i, str(int(counts[i, j])), ha="center", va="center", color=color)
    ax.set_xticks(range(len(names)), names, rotation=30, ha="right")
    ax.set_yticks(range(len(names)), names)
    ax.set_xlabel("Predicted stance")
    ax.set_ylabel("True stance")
    ax.set_title(title)
    fig.colorbar(image, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(path)


def save_history_figure(
    path: str | Path, histories: dict[str, TrainHistory]
) -> None:
    """Loss and accuracy curves, one line per training stage."""
    fig = _new_figure(7.2, 3.6)
    ax_loss = fig.add_subplot(121)
    ax_acc = fig.add_subplot(122)
    for label, history in histories.items():
        epochs = [rec.epoch for rec in history]
        ax_loss.plot(epochs, [rec.loss for rec in history], label=label)
        ax_acc.plot(epochs, [rec.accuracy for rec in history], label=label)
    ax_loss.set_xlabel("Epoch")
    ax_loss.set_ylabel("Mean cross-entropy")
    ax_loss.set_title("Training loss")
    ax_acc.set_xlabel("Epoch")
    ax_acc.set_ylabel("Accuracy")
    ax_acc.set_title("Training accuracy")
    ax_acc.set_ylim(0.0, 1.0)
    if histories:
        ax_loss.legend()
        ax_acc.legend()
    fig.tight_layout()
    fig.savefig(path)


def save_variance_figure(path: str | Path, evr_curve: np.ndarray, k_star: int) -> None:
    """Cumulative explained-variance curve with the selected rank marked."""
    curve = np.asarray(evr_curve, dtype=np.float64)
    fig = _new_figure(5.6, 3.8)
    ax = fig.add_subplot(111)
    ranks = np.arange(1, len(curve) + 1)
    ax.plot(ranks, curve, linewidth=1.5)
    if 1 <= k_star <= len(curve):
        ax.axvline(k_star, color="crimson", linestyle="--", linewidth=1.0)
        ax.plot([k_star], [curve[k_star - 1]], "o", color="crimson")
        ax.annotate(
            f"k = {k_star}",
            xy=(k_star, curve[k_star - 1]),
            xytext=(8, -12),
            textcoords="offset points",
            color="crimson",
        )
    ax.set_xlabel("Rank")
    ax.set_ylabel("Cumulative explained variance")
    ax.set_title("Truncation rank selection")
    ax.set_ylim(0.0, 1.05)
    fig.tight_layout()
    fig.savefig(path)
