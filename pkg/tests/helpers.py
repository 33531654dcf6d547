"""Reference oracles used by several test modules.

These are built independently of the library code: dense numpy SVD with
the same deterministic sign convention, and brute-force counting metrics.
"""

from __future__ import annotations

import numpy as np


def dense_svd_reference(matrix, k: int) -> tuple[np.ndarray, np.ndarray]:
    """(singular_values[:k], vt[:k]) from a dense brute-force SVD, with each
    right singular vector's largest-magnitude entry made positive."""
    dense = matrix.toarray() if hasattr(matrix, "toarray") else np.asarray(matrix)
    _, sigma, vt = np.linalg.svd(dense, full_matrices=False)
    pivot = np.argmax(np.abs(vt), axis=1)
    signs = np.sign(vt[np.arange(vt.shape[0]), pivot])
    signs[signs == 0] = 1.0
    vt = vt * signs[:, None]
    return sigma[:k], vt[:k]


def counting_class_metrics(truths: list[int], preds: list[int], cls: int) -> dict:
    """One-vs-rest metrics by direct enumeration over the pair list."""
    tp = sum(1 for t, p in zip(truths, preds) if t == cls and p == cls)
    fp = sum(1 for t, p in zip(truths, preds) if t != cls and p == cls)
    fn = sum(1 for t, p in zip(truths, preds) if t == cls and p != cls)
    tn = sum(1 for t, p in zip(truths, preds) if t != cls and p != cls)

    def ratio(num, den):
        return num / den if den > 0 else 0.0

    precision = ratio(tp, tp + fp)
    recall = ratio(tp, tp + fn)
    return {
        "precision": precision,
        "recall": recall,
        "f1": ratio(2 * precision * recall, precision + recall),
        "accuracy": ratio(tp + tn, tp + fp + fn + tn),
        "support": tp + fn,
    }


def chord_distance_elbow(curve: np.ndarray) -> int:
    """Brute-force knee: maximize point-to-chord distance over all indices.

    The perpendicular distance is |cross| / chord_length; the chord length
    is a shared positive constant, so the loop maximizes |cross| itself to
    keep float ties identical. First maximum wins (smallest index).
    """
    n = len(curve)
    x1, y1 = 1.0, float(curve[0])
    x2, y2 = float(n), float(curve[-1])
    best_idx, best = 1, -1.0
    for i in range(n):
        x, y = i + 1.0, float(curve[i])
        cross = abs((x2 - x1) * (y - y1) - (y2 - y1) * (x - x1))
        if cross > best:
            best = cross
            best_idx = i + 1
    return best_idx
