"""
Classification and regression metrics: accuracy, AUROC, MCC, MAE, MSE, Pearson.

Predictions are raw model outputs (logits); labels follow Dataset.labels().
"""
import logging
from typing import Dict

import numpy as np

from glycocc.errors import ShapeMismatch
from glycocc.models.run_config import TaskKind

logger = logging.getLogger(__name__)


def _binary_mcc(pred: np.ndarray, true: np.ndarray) -> float:
    tp = float(np.sum((pred == 1) & (true == 1)))
    tn = float(np.sum((pred == 0) & (true == 0)))
    fp = float(np.sum((pred == 1) & (true == 0)))
    fn = float(np.sum((pred == 0) & (true == 1)))
    denominator = np.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    if denominator == 0.0:
        return 0.0
    return (tp * tn - fp * fn) / denominator


def mcc_from_confusion(tp: float, tn: float, fp: float, fn: float) -> float:
    denominator = np.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return 0.0 if denominator == 0.0 else float((tp * tn - fp * fn) / denominator)


def _multiclass_mcc(pred: np.ndarray, true: np.ndarray, k: int) -> float:
    confusion = np.zeros((k, k))
    np.add.at(confusion, (true, pred), 1.0)
    t = confusion.sum(axis=1)
    p = confusion.sum(axis=0)
    c = np.trace(confusion)
    s = confusion.sum()
    denominator = np.sqrt((s * s - p @ p) * (s * s - t @ t))
    if denominator == 0.0:
        return 0.0
    return float((c * s - t @ p) / denominator)


def _binary_auroc(scores: np.ndarray, true: np.ndarray) -> float:
    """Mann-Whitney statistic with average ranks for ties."""
    n_pos = int(np.sum(true == 1))
    n_neg = len(true) - n_pos
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(len(scores))
    start = 0
    while start < len(scores):
        stop = start
        while stop + 1 < len(scores) and sorted_scores[stop + 1] == sorted_scores[start]:
            stop += 1
        ranks[order[start:stop + 1]] = (start + stop) / 2.0 + 1.0
        start = stop + 1
    return float((ranks[true == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _check(pred: np.ndarray, true: np.ndarray, task: TaskKind) -> None:
    if task is TaskKind.MULTICLASS:
        if pred.ndim != 2 or pred.shape[0] != true.shape[0]:
            raise ShapeMismatch(f"multiclass scores {pred.shape} vs labels {true.shape}")
    elif pred.reshape(pred.shape[0], -1).shape != true.reshape(true.shape[0], -1).shape:
        raise ShapeMismatch(f"{task.value} predictions {pred.shape} vs labels {true.shape}")


def accuracy(pred: np.ndarray, true: np.ndarray, task: TaskKind) -> float:
    pred, true = np.asarray(pred, dtype=np.float64), np.asarray(true)
    _check(pred, true, task)
    if task is TaskKind.MULTICLASS:
        return float(np.mean(pred.argmax(axis=1) == true))
    hard = (pred.reshape(true.shape) > 0).astype(int)
    if task is TaskKind.MULTILABEL:
        return float(np.mean([np.mean(hard[:, j] == true[:, j]) for j in range(true.shape[1])]))
    return float(np.mean(hard == true))


def mcc(pred: np.ndarray, true: np.ndarray, task: TaskKind) -> float:
    pred, true = np.asarray(pred, dtype=np.float64), np.asarray(true)
    _check(pred, true, task)
    if task is TaskKind.MULTICLASS:
        k = pred.shape[1]
        return _multiclass_mcc(pred.argmax(axis=1), true.astype(int), k)
    hard = (pred.reshape(true.shape) > 0).astype(int)
    if task is TaskKind.MULTILABEL:
        return float(np.mean([_binary_mcc(hard[:, j], true[:, j].astype(int)) for j in range(true.shape[1])]))
    return float(_binary_mcc(hard, true.astype(int)))


def auroc(pred: np.ndarray, true: np.ndarray, task: TaskKind) -> float:
    """Macro AUROC; labels (or classes) with a single class present are left out."""
    pred, true = np.asarray(pred, dtype=np.float64), np.asarray(true)
    _check(pred, true, task)
    if task is TaskKind.MULTICLASS:
        columns = [(pred[:, j], (true == j).astype(int)) for j in range(pred.shape[1])]
    elif task is TaskKind.MULTILABEL:
        columns = [(pred[:, j], true[:, j].astype(int)) for j in range(true.shape[1])]
    else:
        columns = [(pred.reshape(-1), true.reshape(-1).astype(int))]
    values = []
    skipped = 0
    for scores, labels in columns:
        if labels.min() == labels.max():
            skipped += 1
            continue
        values.append(_binary_auroc(scores, labels))
    if skipped:
        logger.info("AUROC: %d label(s) with a single class excluded", skipped)
    return float(np.mean(values)) if values else 0.0


def regression_metrics(pred: np.ndarray, true: np.ndarray) -> Dict[str, float]:
    pred, true = np.asarray(pred, dtype=np.float64).reshape(-1), np.asarray(true, dtype=np.float64).reshape(-1)
    if pred.shape != true.shape:
        raise ShapeMismatch(f"regression predictions {pred.shape} vs targets {true.shape}")
    diff = pred - true
    if pred.size > 1 and pred.std() > 0 and true.std() > 0:
        pearson = float(np.corrcoef(pred, true)[0, 1])
    else:
        pearson = 0.0
    return {"mae": float(np.mean(np.abs(diff))), "mse": float(np.mean(diff ** 2)), "pearson": pearson}


def compute_metrics(pred: np.ndarray, true: np.ndarray, task: TaskKind) -> Dict[str, float]:
    if task is TaskKind.REGRESSION:
        return regression_metrics(pred, true)
    return {
        "accuracy": accuracy(pred, true, task),
        "auroc": auroc(pred, true, task),
        "mcc": mcc(pred, true, task),
    }


def primary_metric(task: TaskKind) -> str:
    return "mae" if task is TaskKind.REGRESSION else "mcc"
