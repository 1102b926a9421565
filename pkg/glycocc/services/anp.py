"""
Accumulated normalized performance over a metric x dataset x model tensor.
"""
import logging
from typing import Dict, List, Sequence

import numpy as np

from glycocc.errors import FormatError, TooFewModels
from glycocc.models.dataset import PerformanceTensor

logger = logging.getLogger(__name__)

# metrics where smaller is better
LOWER_IS_BETTER = {"mae", "mse"}


def anp(P: PerformanceTensor) -> List[float]:
    """Per (metric, dataset) slice min-max normalise across models, then sum per model.

    A slice whose scores are all equal contributes 0 to every model. Error
    metrics are flipped so the best model still maps to 1.
    """
    if len(P.models) < 2:
        raise TooFewModels(f"ANP needs at least two models, got {len(P.models)}")
    totals = np.zeros(len(P.models))
    for m, metric in enumerate(P.metrics):
        for d in range(len(P.datasets)):
            scores = P.values[m, d]
            low, high = scores.min(), scores.max()
            if high == low:
                continue
            normalized = (scores - low) / (high - low)
            if metric.lower() in LOWER_IS_BETTER:
                normalized = 1.0 - normalized
            totals += normalized
    return totals.tolist()


def raw_scores(P: PerformanceTensor) -> List[float]:
    """Unnormalised per-model sums, with MCC mapped onto [0, 1] via (x + 1) / 2."""
    totals = np.zeros(len(P.models))
    for m, metric in enumerate(P.metrics):
        block = P.values[m]
        if metric.lower() == "mcc":
            block = (block + 1.0) / 2.0
        totals += block.sum(axis=0)
    return totals.tolist()


def build_tensor(records: Sequence[Dict], metrics: Sequence[str] = ("accuracy", "auroc", "mcc")) -> PerformanceTensor:
    """Assemble full-row report records (model, dataset, metric, value) into a tensor.

    Missing (metric, dataset, model) cells raise FormatError.
    """
    models = sorted({r["model"] for r in records})
    datasets = sorted({r["dataset"] for r in records})
    metrics = [m for m in metrics if any(r["metric"] == m for r in records)]
    values = np.full((len(metrics), len(datasets), len(models)), np.nan)
    for r in records:
        if r["metric"] not in metrics:
            continue
        values[metrics.index(r["metric"]), datasets.index(r["dataset"]), models.index(r["model"])] = float(r["value"])
    if np.isnan(values).any():
        m, d, k = np.argwhere(np.isnan(values))[0]
        raise FormatError(f"No {metrics[m]} score for model {models[k]} on {datasets[d]}")
    return PerformanceTensor(values=values, metrics=list(metrics), datasets=datasets, models=models)
