"""
Benchmark data shapes: glycan records, datasets, split assignments and
performance tensors.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from glycocc.models.glycan import GlycanTree
from glycocc.models.molecule import MolecularGraph
from glycocc.models.run_config import TaskKind


class Partition(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass
class GlycanRecord:
    id: str
    iupac: str
    label: np.ndarray
    tree: GlycanTree
    graph: Optional[MolecularGraph] = None
    protein_id: Optional[str] = None


@dataclass
class Dataset:
    name: str
    task: TaskKind
    records: List[GlycanRecord]
    n_outputs: int = 1
    label_names: List[str] = field(default_factory=list)
    proteins: Dict[str, np.ndarray] = field(default_factory=dict)
    dropped: int = 0

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> List[str]:
        return [r.id for r in self.records]

    def subset(self, ids: Sequence[str]) -> "Dataset":
        wanted = set(ids)
        return Dataset(
            name=self.name,
            task=self.task,
            records=[r for r in self.records if r.id in wanted],
            n_outputs=self.n_outputs,
            label_names=list(self.label_names),
            proteins=self.proteins,
        )

    def labels(self) -> np.ndarray:
        """Stacked label payloads: (n,) for binary/multiclass/regression, (n, k) for multilabel."""
        if not self.records:
            return np.zeros((0, self.n_outputs) if self.task is TaskKind.MULTILABEL else 0)
        return np.stack([r.label for r in self.records])

    def protein_matrix(self) -> Optional[np.ndarray]:
        if not self.proteins:
            return None
        return np.stack([self.proteins[r.protein_id] for r in self.records])


@dataclass
class SplitAssignment:
    partition: Dict[str, Partition]
    ood: Dict[str, bool] = field(default_factory=dict)

    def ids(self, part: Partition) -> List[str]:
        part = Partition(part)
        return [i for i, p in self.partition.items() if p is part]

    def sizes(self) -> Dict[str, int]:
        return {p.value: len(self.ids(p)) for p in Partition}


@dataclass
class PerformanceTensor:
    """Raw scores indexed [metric, dataset, model]."""

    values: np.ndarray
    metrics: List[str]
    datasets: List[str]
    models: List[str]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = (len(self.metrics), len(self.datasets), len(self.models))
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} does not match labels {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("performance tensor contains non-finite scores")
