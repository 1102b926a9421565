"""
Training and evaluation loops for the GIFFLAR model and the fingerprint MLP baseline.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from glycocc.config import settings
from glycocc.errors import ConfigError, DegenerateBatch, EmptyDataset, NonFiniteLoss
from glycocc.models.complex import MAX_RANK
from glycocc.models.dataset import Dataset, GlycanRecord, Partition, SplitAssignment
from glycocc.models.run_config import BaselineConfig, ModelFamily, RunConfig, TaskKind
from glycocc.services import tensorcore as tc
from glycocc.services.checkpoint import load_checkpoint, save_checkpoint
from glycocc.services.complex_builder import build_cc
from glycocc.services.fingerprints import fnv1a_64, morgan_fingerprint
from glycocc.services.glycan_grammar import write_iupac
from glycocc.services.homp import ComplexFeatures, GifflarModel, build_model, collate, embed, featurize
from glycocc.services.metrics import compute_metrics, primary_metric
from glycocc.services.tensorcore import Module, Tensor

logger = logging.getLogger(__name__)

MLP_DROPOUT_ID = 2_000_000


def glycan_seed_key(record: GlycanRecord) -> int:
    """Per-glycan key for Laplacian sign draws, from the canonical IUPAC string."""
    return fnv1a_64(write_iupac(record.tree).encode("utf-8")) & 0x7FFFFFFF


def loss_for_task(task: TaskKind, outputs: Tensor, labels: np.ndarray) -> Tensor:
    if task is TaskKind.MULTICLASS:
        return tc.cross_entropy(outputs, labels)
    if task is TaskKind.REGRESSION:
        return tc.mse(outputs, labels)
    return tc.bce_with_logits(outputs, labels)


class FingerprintMLP(Module):
    """Morgan bits (plus optional protein vector) -> two hidden PReLU layers -> outputs."""

    def __init__(self, n_bits: int, hidden_dim: int, n_outputs: int, protein_dim: int = 0, dropout: float = 0.2, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.first = tc.Linear(n_bits + protein_dim, hidden_dim, rng)
        self.act1 = tc.PReLU(hidden_dim)
        self.drop1 = tc.Dropout(dropout, layer_id=MLP_DROPOUT_ID, seed=seed)
        self.second = tc.Linear(hidden_dim, hidden_dim, rng)
        self.act2 = tc.PReLU(hidden_dim)
        self.drop2 = tc.Dropout(dropout, layer_id=MLP_DROPOUT_ID + 1, seed=seed)
        self.out = tc.Linear(hidden_dim, n_outputs, rng)
        self.step = 0

    def set_step(self, step: int) -> None:
        self.step = step

    def __call__(self, x: Tensor) -> Tensor:
        h = self.drop1(self.act1(self.first(x)), self.step)
        h = self.drop2(self.act2(self.second(h)), self.step)
        return self.out(h)


class GifflarAdapter:
    """Feeds cached complex features of dataset records to a GifflarModel."""

    name = "GIFFLAR"

    def __init__(self, model: GifflarModel, run: RunConfig):
        self.module = model
        self.run = run
        self._cache: Dict[str, ComplexFeatures] = {}

    def _features(self, record: GlycanRecord) -> ComplexFeatures:
        opts = self.run.complex
        cc = build_cc(record.graph, min_2cell_size=opts.min_2cell_size, exhaustive_limit=opts.exhaustive_limit)
        return featurize(cc, self.module.config, seed_key=glycan_seed_key(record))

    def prepare(self, records: Sequence[GlycanRecord]) -> None:
        missing = [r for r in records if r.id not in self._cache]
        if not missing:
            return
        if settings.workers > 1:
            with ThreadPoolExecutor(max_workers=settings.workers) as pool:
                features = list(pool.map(self._features, missing))
        else:
            features = [self._features(r) for r in missing]
        for record, item in zip(missing, features):
            self._cache[record.id] = item

    def batch_ok(self, records: Sequence[GlycanRecord]) -> bool:
        sizes = {r: 0 for r in range(MAX_RANK + 1)}
        for record in records:
            for r, n in self._cache[record.id].sizes.items():
                sizes[r] += n
        return all(n != 1 for n in sizes.values())

    def forward(self, records: Sequence[GlycanRecord], proteins: Optional[np.ndarray]) -> Tensor:
        self.prepare(records)
        return self.module(collate([self._cache[r.id] for r in records], proteins))


class FingerprintAdapter:
    name = "FP-MLP"

    def __init__(self, module: FingerprintMLP, baseline: BaselineConfig):
        self.module = module
        self.baseline = baseline
        self._cache: Dict[str, np.ndarray] = {}

    def prepare(self, records: Sequence[GlycanRecord]) -> None:
        for record in records:
            if record.id not in self._cache:
                bits = morgan_fingerprint(record.graph, self.baseline.radius, self.baseline.n_bits)
                self._cache[record.id] = bits.astype(np.float64)

    def batch_ok(self, records: Sequence[GlycanRecord]) -> bool:
        return True

    def forward(self, records: Sequence[GlycanRecord], proteins: Optional[np.ndarray]) -> Tensor:
        self.prepare(records)
        x = np.stack([self._cache[r.id] for r in records])
        if proteins is not None:
            x = np.concatenate([x, proteins], axis=1)
        return self.module(Tensor(x))


def make_adapter(run: RunConfig, dataset: Dataset):
    protein_dim = next(iter(dataset.proteins.values())).shape[0] if dataset.proteins else 0
    if run.family is ModelFamily.FINGERPRINT_MLP:
        b = run.baseline
        module = FingerprintMLP(b.n_bits, b.hidden_dim, dataset.n_outputs, protein_dim, b.dropout, run.schedule.seed)
        adapter = FingerprintAdapter(module, b)
    else:
        model_config = run.model
        if model_config.head.protein_dim != protein_dim or model_config.head.n_outputs != dataset.n_outputs:
            head = model_config.head.model_copy(update={"protein_dim": protein_dim, "n_outputs": dataset.n_outputs, "task": dataset.task})
            model_config = model_config.model_copy(update={"head": head})
        adapter = GifflarAdapter(build_model(model_config), run)
    adapter.name = run.name
    return adapter


def _proteins(dataset: Dataset, records: Sequence[GlycanRecord]) -> Optional[np.ndarray]:
    if not dataset.proteins:
        return None
    return np.stack([dataset.proteins[r.protein_id] for r in records])


def _batches(adapter, records: List[GlycanRecord], batch_size: int) -> List[List[GlycanRecord]]:
    """Fixed-size chunks; a chunk that would leave batchnorm a single cell is merged into its neighbour."""
    chunks = [records[i:i + batch_size] for i in range(0, len(records), batch_size)]
    merged: List[List[GlycanRecord]] = []
    for chunk in chunks:
        if merged and not adapter.batch_ok(chunk):
            merged[-1] = merged[-1] + chunk
        else:
            merged.append(chunk)
    if len(merged) > 1 and not adapter.batch_ok(merged[0]):
        merged[1] = merged[0] + merged[1]
        merged.pop(0)
    if not adapter.batch_ok(merged[0]):
        raise DegenerateBatch("Training data is too small for batch normalization (a rank has a single cell)")
    return merged


def predict_outputs(adapter, dataset: Dataset, batch_size: int = 256) -> np.ndarray:
    """Eval-mode raw outputs for every record, in record order."""
    previous = adapter.module.training
    adapter.module.eval()
    outputs = []
    records = dataset.records
    try:
        for start in range(0, len(records), batch_size):
            chunk = records[start:start + batch_size]
            outputs.append(adapter.forward(chunk, _proteins(dataset, chunk)).data)
    finally:
        adapter.module.train(previous)
    if not outputs:
        return np.zeros((0, dataset.n_outputs))
    return np.concatenate(outputs, axis=0)


def _score(adapter, dataset: Dataset) -> Dict[str, float]:
    outputs = predict_outputs(adapter, dataset)
    labels = dataset.labels()
    if dataset.task is not TaskKind.MULTICLASS:
        outputs = outputs.reshape(labels.shape)
    return compute_metrics(outputs, labels, dataset.task)


@dataclass
class TrainResult:
    adapter: object
    epoch_log: List[Dict[str, float]] = field(default_factory=list)


def train(run: RunConfig, dataset: Dataset, split: SplitAssignment, adapter=None) -> TrainResult:
    """Mini-batch Adam training; deterministic for a fixed schedule seed."""
    schedule = run.schedule
    adapter = adapter or make_adapter(run, dataset)
    train_set = dataset.subset(split.ids(Partition.TRAIN))
    val_set = dataset.subset(split.ids(Partition.VAL))
    if not len(train_set):
        raise EmptyDataset("Training partition is empty")
    adapter.prepare(train_set.records)
    adapter.prepare(val_set.records)

    optimizer = tc.Adam(adapter.module.parameters(), lr=schedule.lr, betas=schedule.betas, eps=schedule.eps)
    metric = primary_metric(dataset.task)
    adapter.module.train()
    log: List[Dict[str, float]] = []
    step = 0
    for epoch in range(1, schedule.epochs + 1):
        order = np.random.default_rng([schedule.seed, epoch]).permutation(len(train_set))
        shuffled = [train_set.records[i] for i in order]
        losses = []
        for batch in _batches(adapter, shuffled, schedule.batch_size):
            step += 1
            adapter.module.set_step(step)
            optimizer.zero_grad()
            labels = np.stack([r.label for r in batch])
            outputs = adapter.forward(batch, _proteins(dataset, batch))
            if dataset.task is not TaskKind.MULTICLASS:
                labels = labels.reshape(outputs.shape)
            loss = loss_for_task(dataset.task, outputs, labels)
            if not np.isfinite(loss.item()):
                raise NonFiniteLoss(epoch, step)
            loss.backward()
            optimizer.step()
            losses.append(loss.item())

        if epoch % schedule.eval_every == 0 or epoch == schedule.epochs:
            row = {"epoch": float(epoch), "loss": float(np.mean(losses))}
            row[f"{metric}_train"] = _score(adapter, train_set)[metric]
            if len(val_set):
                row[f"{metric}_val"] = _score(adapter, val_set)[metric]
            log.append(row)
            logger.info(
                "epoch %d loss %.4f %s",
                epoch, row["loss"], " ".join(f"{k}={v:.4f}" for k, v in row.items() if k not in ("epoch", "loss")),
            )
    return TrainResult(adapter=adapter, epoch_log=log)


def evaluate(adapter, dataset: Dataset, split: SplitAssignment, subset: Partition = Partition.TEST) -> List[Dict]:
    """Metric rows for the subset, plus OOD rows for test subsets when flags exist."""
    subset = Partition(subset)
    part = dataset.subset(split.ids(subset))
    if not len(part):
        raise EmptyDataset(f"The {subset.value} partition is empty")
    rows = []
    for metric, value in _score(adapter, part).items():
        rows.append({"model": adapter.name, "dataset": dataset.name, "subset": subset.value, "rows": "full", "metric": metric, "value": value})
    if subset is Partition.TEST and split.ood:
        ood_ids = [i for i in split.ids(Partition.TEST) if split.ood.get(i)]
        if ood_ids:
            for metric, value in _score(adapter, dataset.subset(ood_ids)).items():
                rows.append({"model": adapter.name, "dataset": dataset.name, "subset": subset.value, "rows": "ood", "metric": metric, "value": value})
        else:
            logger.info("No OOD glycans in the test partition of %s", dataset.name)
    return rows


def fingerprint_mlp_baseline(dataset: Dataset, split: SplitAssignment, run: RunConfig, subset: Partition = Partition.TEST) -> List[Dict]:
    """Train the Morgan-fingerprint MLP with the run's schedule and report its metrics."""
    baseline_run = run.model_copy(update={"family": ModelFamily.FINGERPRINT_MLP, "name": "FP-MLP"})
    result = train(baseline_run, dataset, split)
    return evaluate(result.adapter, dataset, split, subset)


def embedding_rows(adapter, dataset: Dataset) -> List[List[str]]:
    """Rows of: glycan id, rank, cell id, monosaccharide name (rank 2), embedding values."""
    if not isinstance(adapter, GifflarAdapter):
        raise ConfigError("Embeddings are only defined for the GIFFLAR model family", "family")
    rows: List[List[str]] = []
    opts = adapter.run.complex
    for record in dataset.records:
        cc = build_cc(record.graph, min_2cell_size=opts.min_2cell_size, exhaustive_limit=opts.exhaustive_limit)
        states = embed(adapter.module, cc, seed_key=glycan_seed_key(record))
        for rank in range(MAX_RANK + 1):
            for local, cell in enumerate(cc.skeleton(rank)):
                name = cc.cell_classes[cell] if rank == 2 else ""
                rows.append([record.id, str(rank), str(cell), name] + [repr(float(v)) for v in states[rank][local]])
    return rows


def save_model(adapter, path) -> None:
    save_checkpoint(path, adapter.module.state_dict())


def load_model(run: RunConfig, dataset: Dataset, path):
    """Rebuild the adapter for ``run`` and load trained weights from a checkpoint."""
    adapter = make_adapter(run, dataset)
    adapter.module.load_state_dict(load_checkpoint(path))
    adapter.module.eval()
    return adapter
