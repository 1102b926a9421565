"""
Dataset ingestion, splitting, OOD flagging and label normalization.
"""
import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from glycocc.config import OOD_THRESHOLD
from glycocc.errors import BadFractions, DegenerateVariance, EmptyDataset, FormatError, GlycoccError
from glycocc.models.dataset import Dataset, GlycanRecord, Partition, SplitAssignment
from glycocc.models.run_config import TaskKind
from glycocc.services.assembly import assemble
from glycocc.services.fingerprints import max_similarities, mono_fingerprint
from glycocc.services.glycan_grammar import parse_iupac

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _read_rows(path: PathLike) -> List[List[str]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            return [row for row in csv.reader(f, delimiter="\t")]
    except OSError as e:
        raise FormatError(f"Cannot read file: {e}", path=str(path)) from e


def _parse_label(task: TaskKind, cells: List[str], n_classes: int, line: int, path: str) -> np.ndarray:
    try:
        if task is TaskKind.BINARY:
            value = int(cells[0])
            if value not in (0, 1):
                raise ValueError
            return np.array(value, dtype=np.float64)
        if task is TaskKind.MULTICLASS:
            value = int(cells[0])
            if not 0 <= value < n_classes:
                raise ValueError
            return np.array(value, dtype=np.int64)
        if task is TaskKind.MULTILABEL:
            values = [int(c) for c in cells]
            if any(v not in (0, 1) for v in values):
                raise ValueError
            return np.array(values, dtype=np.float64)
        return np.array(float(cells[0]), dtype=np.float64)
    except (ValueError, IndexError):
        raise FormatError(f"Bad {task.value} label {cells!r}", line=line, path=path)


def load_dataset(
    path: PathLike,
    task: TaskKind,
    n_classes: int = 2,
    protein_embeddings: Optional[PathLike] = None,
    zscore_values: bool = False,
    name: Optional[str] = None,
) -> Dataset:
    """Read a dataset TSV; glycans that fail to parse or assemble are dropped and counted."""
    path = str(path)
    rows = _read_rows(path)
    if not rows:
        raise EmptyDataset(f"{path} is empty")
    header = rows[0]
    if len(header) < 3 or header[0] != "id" or header[1] != "iupac":
        raise FormatError("Header must start with 'id<TAB>iupac'", line=1, path=path)
    has_protein = "protein_id" in header
    if has_protein and (header[2] != "protein_id" or task is not TaskKind.REGRESSION):
        raise FormatError("protein_id must be the third column of a regression file", line=1, path=path)
    label_names = header[3:] if has_protein else header[2:]
    if task is TaskKind.MULTILABEL:
        n_outputs = len(label_names)
    elif task is TaskKind.MULTICLASS:
        n_outputs = n_classes
    else:
        n_outputs = 1
        if len(label_names) != 1:
            raise FormatError(f"{task.value} files have exactly one label column", line=1, path=path)

    proteins = load_protein_embeddings(protein_embeddings) if protein_embeddings else {}
    if has_protein and not proteins:
        raise FormatError("Interaction files need a protein embedding table", path=path)

    records: List[GlycanRecord] = []
    seen = set()
    dropped = 0
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise FormatError(f"Expected {len(header)} columns, found {len(row)}", line=line, path=path)
        record_id, iupac = row[0], row[1]
        if record_id in seen:
            raise FormatError(f"Duplicate id '{record_id}'", line=line, path=path)
        seen.add(record_id)
        protein_id = row[2] if has_protein else None
        if protein_id is not None and protein_id not in proteins:
            raise FormatError(f"Unknown protein '{protein_id}'", line=line, path=path)
        label = _parse_label(task, row[3:] if has_protein else row[2:], n_classes, line, path)
        try:
            tree = parse_iupac(iupac)
            graph = assemble(tree)
        except GlycoccError as e:
            dropped += 1
            logger.debug("Dropping %s (%s): %s", record_id, iupac, e)
            continue
        records.append(GlycanRecord(id=record_id, iupac=iupac, label=label, tree=tree, graph=graph, protein_id=protein_id))

    if dropped:
        logger.info("Dropped %d glycan(s) that could not be parsed or assembled from %s", dropped, path)
    if not records:
        raise EmptyDataset(f"No usable records in {path}")
    if zscore_values and task is TaskKind.REGRESSION:
        normalized = zscore([float(r.label) for r in records])
        for record, value in zip(records, normalized):
            record.label = np.array(value)
    return Dataset(
        name=name or Path(path).stem,
        task=task,
        records=records,
        n_outputs=n_outputs,
        label_names=list(label_names),
        proteins=proteins,
        dropped=dropped,
    )


def load_protein_embeddings(path: PathLike) -> Dict[str, np.ndarray]:
    """protein_id followed by float columns; a header row is optional."""
    rows = _read_rows(path)
    table: Dict[str, np.ndarray] = {}
    width = None
    for line, row in enumerate(rows, start=1):
        if not row:
            continue
        if line == 1 and row[0] == "protein_id":
            continue
        try:
            vector = np.array([float(v) for v in row[1:]], dtype=np.float64)
        except ValueError:
            raise FormatError("Non-numeric embedding value", line=line, path=str(path))
        if width is None:
            width = len(vector)
        if len(vector) != width or width == 0:
            raise FormatError(f"Embedding has {len(vector)} values, expected {width}", line=line, path=str(path))
        table[row[0]] = vector
    if not table:
        raise EmptyDataset(f"No protein embeddings in {path}")
    return table


def random_split(ids: Union[Dataset, Sequence[str]], fractions: Sequence[float], seed: int = 0) -> SplitAssignment:
    """Seeded shuffle, then cut into train/val/test by ``fractions``."""
    ids = ids.ids if isinstance(ids, Dataset) else list(ids)
    fractions = [float(f) for f in fractions]
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise BadFractions(f"Fractions {fractions} must be three positive numbers summing to 1")
    order = np.random.default_rng(seed).permutation(len(ids))
    n_train = int(round(fractions[0] * len(ids)))
    n_val = min(int(round(fractions[1] * len(ids))), len(ids) - n_train)
    partition: Dict[str, Partition] = {}
    for position, index in enumerate(order):
        if position < n_train:
            part = Partition.TRAIN
        elif position < n_train + n_val:
            part = Partition.VAL
        else:
            part = Partition.TEST
        partition[ids[index]] = part
    return SplitAssignment(partition={i: partition[i] for i in ids})


def write_split(split: SplitAssignment, path: PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        writer.writerow(["id", "partition"])
        for record_id, part in split.partition.items():
            writer.writerow([record_id, part.value])


def read_split(path: PathLike) -> SplitAssignment:
    rows = _read_rows(path)
    if not rows or rows[0][:2] != ["id", "partition"]:
        raise FormatError("Split file header must be 'id<TAB>partition'", line=1, path=str(path))
    partition: Dict[str, Partition] = {}
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            partition[row[0]] = Partition(row[1])
        except (ValueError, IndexError):
            raise FormatError(f"Bad split row {row!r}", line=line, path=str(path))
    return SplitAssignment(partition=partition)


def ood_flags(train: Dataset, test: Dataset, threshold: float = OOD_THRESHOLD) -> Dict[str, bool]:
    """A test glycan is OOD when its best Tanimoto similarity to any train glycan is below ``threshold``."""
    reference = [mono_fingerprint(r.tree) for r in train.records]
    queries = [mono_fingerprint(r.tree) for r in test.records]
    best = max_similarities(reference, queries)
    return {r.id: bool(s < threshold) for r, s in zip(test.records, best)}


def assign_ood(dataset: Dataset, split: SplitAssignment, threshold: float = OOD_THRESHOLD) -> SplitAssignment:
    train = dataset.subset(split.ids(Partition.TRAIN))
    test = dataset.subset(split.ids(Partition.TEST))
    split.ood = ood_flags(train, test, threshold)
    flagged = sum(split.ood.values())
    logger.info("%d of %d test glycans are out of distribution (threshold %.2f)", flagged, len(test), threshold)
    return split


def zscore(values: Sequence[float]) -> np.ndarray:
    """Shift to mean 0 and scale to population standard deviation 1."""
    x = np.asarray(values, dtype=np.float64)
    if x.size < 2:
        raise DegenerateVariance("z-scoring needs at least two values")
    std = x.std()
    if std == 0.0:
        raise DegenerateVariance("z-scoring a constant series")
    return (x - x.mean()) / std


def dataset_stats(dataset: Dataset) -> Dict[str, float]:
    """Record count and mean monosaccharides / heavy atoms per glycan."""
    monos = [len(r.tree.nodes) for r in dataset.records]
    atoms = [r.graph.n_atoms if r.graph is not None else assemble(r.tree).n_atoms for r in dataset.records]
    return {
        "records": float(len(dataset.records)),
        "dropped": float(dataset.dropped),
        "mono_per_glycan": float(np.mean(monos)) if monos else 0.0,
        "atoms_per_glycan": float(np.mean(atoms)) if atoms else 0.0,
    }
