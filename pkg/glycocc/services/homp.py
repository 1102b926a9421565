"""
Higher-order message passing over combinatorial complexes and the GIFFLAR model.

A generic layer updates every cell x of a rank covered by at least one
neighborhood spec k as

    h'_x = sigma( inter_k phi_k( (1 + eps) * h_x + intra_{y in N_k(x)} psi_k(h_y) ) )

The GIFFLAR layer uses sums for both aggregations, psi = identity, sigma =
identity and phi_k = Linear -> PReLU -> Dropout -> BatchNorm with separate
weights per spec and per layer.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from glycocc.errors import ConfigError, DimensionMismatch, EmptyComplex, MissingTheta, NonFiniteState
from glycocc.models.complex import MAX_RANK, CombinatorialComplex, NeighborhoodSpec
from glycocc.models.molecule import BondOrder
from glycocc.models.run_config import ModelConfig, PEKind, PoolingMode
from glycocc.services import tensorcore as tc
from glycocc.services.complex_builder import adjacency_matrices, message_index, rank0_adjacency
from glycocc.services.encodings import lap_pe, rw_pe
from glycocc.services.tensorcore import Module, Parameter, Tensor

logger = logging.getLogger(__name__)

ELEMENT_VOCAB = ("C", "N", "O", "S", "P", "F", "Cl", "Br", "I", "B")
BOND_VOCAB = tuple(order.value for order in BondOrder)
HEAD_DROPOUT_ID = 1_000_000

CellStates = Dict[int, Tensor]


def monosaccharide_vocab() -> Tuple[str, ...]:
    from glycocc.services.templates import template_library

    return tuple(template_library.names())


def class_vocabularies() -> Dict[int, Tuple[str, ...]]:
    return {0: ELEMENT_VOCAB, 1: BOND_VOCAB, 2: monosaccharide_vocab()}


@dataclass
class ComplexFeatures:
    """Model-ready view of one complex: class rows, message index pairs, PE rows."""

    classes: Dict[int, np.ndarray]
    messages: List[Tuple[np.ndarray, np.ndarray]]
    pe: np.ndarray
    spec_keys: Tuple[str, ...] = ()

    @property
    def sizes(self) -> Dict[int, int]:
        return {r: len(self.classes[r]) for r in range(MAX_RANK + 1)}


def positional_encoding(cc: CombinatorialComplex, config: ModelConfig, seed_key: int = 0) -> np.ndarray:
    """PE rows for the 0-cells per the model's PE settings."""
    kind, k = config.pe.kind, config.pe.k
    if kind is PEKind.NONE:
        return np.zeros((cc.n_atoms, 0))
    adjacency = rank0_adjacency(cc)
    parts = []
    if kind in (PEKind.RANDOM_WALK, PEKind.BOTH):
        parts.append(rw_pe(adjacency, k))
    if kind in (PEKind.LAPLACIAN, PEKind.BOTH):
        parts.append(lap_pe(adjacency, k, [config.seed, seed_key]))
    return np.concatenate(parts, axis=1)


def featurize(
    cc: CombinatorialComplex,
    config: ModelConfig,
    seed_key: int = 0,
    pe: Optional[np.ndarray] = None,
) -> ComplexFeatures:
    specs = config.specs()
    vocab = class_vocabularies()
    classes = {}
    for rank in range(MAX_RANK + 1):
        lookup = {name: i for i, name in enumerate(vocab[rank])}
        unknown = len(vocab[rank])
        classes[rank] = np.array(
            [lookup.get(cc.cell_classes[c], unknown) for c in cc.skeleton(rank)], dtype=np.int64
        )
    pairs = adjacency_matrices(cc, specs)
    messages = [message_index(cc, spec, p) for spec, p in zip(specs, pairs)]
    if pe is None:
        pe = positional_encoding(cc, config, seed_key)
    if pe.shape != (cc.n_atoms, config.pe.dim):
        raise DimensionMismatch(f"PE rows {pe.shape} do not match ({cc.n_atoms}, {config.pe.dim})")
    return ComplexFeatures(classes=classes, messages=messages, pe=pe, spec_keys=tuple(s.key for s in specs))


@dataclass
class ComplexBatch:
    """Disjoint union of several complexes with per-cell graph membership."""

    classes: Dict[int, np.ndarray]
    messages: List[Tuple[np.ndarray, np.ndarray]]
    pe: np.ndarray
    graph_of: Dict[int, np.ndarray]
    n_graphs: int
    spec_keys: Tuple[str, ...] = ()
    proteins: Optional[np.ndarray] = None

    @property
    def sizes(self) -> Dict[int, int]:
        return {r: len(self.classes[r]) for r in range(MAX_RANK + 1)}


def collate(items: Sequence[ComplexFeatures], proteins: Optional[np.ndarray] = None) -> ComplexBatch:
    if not items:
        raise EmptyComplex("Cannot batch zero complexes")
    keys = items[0].spec_keys
    if any(item.spec_keys != keys for item in items):
        raise DimensionMismatch("Complexes were featurized with different neighborhood sets")
    offsets = {r: 0 for r in range(MAX_RANK + 1)}
    classes = {r: [] for r in range(MAX_RANK + 1)}
    graph_of = {r: [] for r in range(MAX_RANK + 1)}
    targets = [[] for _ in keys]
    sources = [[] for _ in keys]
    pe_rows = []
    specs = [_parse_key(k) for k in keys]
    for g, item in enumerate(items):
        for s, ((t, src), (target_rank, message_rank)) in enumerate(zip(item.messages, specs)):
            targets[s].append(t + offsets[target_rank])
            sources[s].append(src + offsets[message_rank])
        for r in range(MAX_RANK + 1):
            classes[r].append(item.classes[r])
            graph_of[r].append(np.full(len(item.classes[r]), g, dtype=np.int64))
            offsets[r] += len(item.classes[r])
        pe_rows.append(item.pe)
    empty = np.zeros(0, dtype=np.int64)
    return ComplexBatch(
        classes={r: np.concatenate(classes[r]) if classes[r] else empty for r in classes},
        messages=[
            (np.concatenate(t) if t else empty, np.concatenate(s) if s else empty)
            for t, s in zip(targets, sources)
        ],
        pe=np.concatenate(pe_rows, axis=0),
        graph_of={r: np.concatenate(graph_of[r]) for r in graph_of},
        n_graphs=len(items),
        spec_keys=keys,
        proteins=proteins,
    )


def _parse_key(key: str) -> Tuple[int, int]:
    """(target rank, message rank) from a spec key."""
    kind, source, via = key.split(":")
    source, via = int(source), int(via)
    return source, source if kind.startswith("intra") else via


def homp_layer(
    states: CellStates,
    batch: ComplexBatch,
    specs: Sequence[NeighborhoodSpec],
    phis: Mapping[str, Callable[[Tensor], Tensor]],
    psis: Optional[Mapping[str, Callable[[Tensor], Tensor]]] = None,
    epsilon=0.0,
    intra: str = "sum",
    inter: str = "sum",
    sigma: Optional[Callable[[Tensor], Tensor]] = None,
    layer: int = 0,
) -> CellStates:
    """One generic higher-order message-passing step over a batch of complexes.

    Ranks that no spec targets keep their states. ``epsilon`` may be a float or
    a scalar Parameter.
    """
    if len(specs) != len(batch.messages):
        raise DimensionMismatch(f"{len(specs)} specs for {len(batch.messages)} message lists")
    sizes = batch.sizes
    eps = epsilon if isinstance(epsilon, Tensor) else Tensor(float(epsilon))
    per_rank: Dict[int, List[Tensor]] = {}
    for spec, (targets, sources) in zip(specs, batch.messages):
        phi = phis.get(spec.key)
        if phi is None:
            raise MissingTheta(f"No update function for neighborhood {spec.key}")
        rank = spec.source_rank
        if sizes[rank] == 0:
            continue
        h = states[rank]
        messages = tc.gather_rows(states[spec.message_rank], sources)
        if psis is not None and spec.key in psis:
            messages = psis[spec.key](messages)
        pooled = tc.scatter_rows(messages, targets, sizes[rank])
        if intra == "mean":
            counts = np.bincount(targets, minlength=sizes[rank]).astype(np.float64)
            pooled = pooled * Tensor(1.0 / np.clip(counts, 1.0, None)[:, None])
        elif intra != "sum":
            raise ConfigError(f"Unknown intra-neighborhood aggregator '{intra}'", "intra")
        per_rank.setdefault(rank, []).append(phi(h * (eps + 1.0) + pooled))

    updated: CellStates = {}
    for rank in range(MAX_RANK + 1):
        terms = per_rank.get(rank)
        if not terms:
            updated[rank] = states[rank]
            continue
        total = terms[0]
        for term in terms[1:]:
            total = total + term
        if inter == "mean":
            total = total * (1.0 / len(terms))
        elif inter != "sum":
            raise ConfigError(f"Unknown inter-neighborhood aggregator '{inter}'", "inter")
        updated[rank] = sigma(total) if sigma is not None else total
        if not np.all(np.isfinite(updated[rank].data)):
            raise NonFiniteState(layer, rank)
    return updated


class Theta(Module):
    """Linear -> PReLU -> Dropout -> BatchNorm."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, dropout: float, dropout_id: int, seed: int, bias: bool = True):
        self.linear = tc.Linear(d_in, d_out, rng, bias=bias)
        self.act = tc.PReLU(d_out)
        self.drop = tc.Dropout(dropout, layer_id=dropout_id, seed=seed)
        self.norm = tc.BatchNorm(d_out)
        self.step = 0

    def __call__(self, x: Tensor) -> Tensor:
        return self.norm(self.drop(self.act(self.linear(x)), self.step))


class GifflarLayer(Module):
    def __init__(self, index: int, d_in: int, d_out: int, specs: Sequence[NeighborhoodSpec], config: ModelConfig, rng: np.random.Generator):
        self.index = index
        self.specs = list(specs)
        self.thetas = {
            spec.key: Theta(d_in, d_out, rng, config.dropout, index * len(specs) + k, config.seed, config.bias)
            for k, spec in enumerate(self.specs)
        }
        self.epsilon = Parameter(np.array(config.epsilon)) if config.learn_epsilon else config.epsilon

    def set_step(self, step: int) -> None:
        for theta in self.thetas.values():
            theta.step = step

    def __call__(self, states: CellStates, batch: ComplexBatch) -> CellStates:
        return homp_layer(states, batch, self.specs, self.thetas, epsilon=self.epsilon, layer=self.index)


def gifflar_layer(states: CellStates, batch: ComplexBatch, layer: GifflarLayer) -> CellStates:
    return layer(states, batch)


class CellEmbedding(Module):
    """Frozen N(0, 1) class embeddings per rank; PE columns are appended to every rank."""

    def __init__(self, input_dim: int, pe_dim: int, seed: int):
        rng = np.random.default_rng([seed, 7])
        self.pe_dim = pe_dim
        self.buffers = {
            f"rank{r}": rng.standard_normal((len(vocab) + 1, input_dim))
            for r, vocab in sorted(class_vocabularies().items())
        }

    def __call__(self, batch: ComplexBatch) -> CellStates:
        states: CellStates = {}
        for r in range(MAX_RANK + 1):
            rows = self.buffers[f"rank{r}"][batch.classes[r]]
            if r == 0:
                pe = batch.pe
            else:
                pe = np.zeros((len(rows), self.pe_dim))
            if pe.shape[1] != self.pe_dim:
                raise DimensionMismatch(f"PE width {pe.shape[1]} != configured {self.pe_dim}")
            states[r] = Tensor(np.concatenate([rows, pe], axis=1))
        return states


class Readout(Module):
    """Graph-level pooling over cells of all ranks."""

    def __init__(self, mode: PoolingMode, hidden_dim: int, rng: np.random.Generator):
        self.mode = PoolingMode(mode)
        self.rank_weights = None
        self.gates = {}
        if self.mode in (PoolingMode.WEIGHTED_LOCAL_MEAN, PoolingMode.WEIGHTED_LOCAL_ATTENTION):
            self.rank_weights = Parameter(np.ones((MAX_RANK + 1, 1)))
        if self.mode is PoolingMode.GLOBAL_ATTENTION:
            self.gates = {"all": tc.Linear(hidden_dim, 1, rng)}
        elif self.mode in (PoolingMode.LOCAL_ATTENTION, PoolingMode.WEIGHTED_LOCAL_ATTENTION):
            self.gates = {str(r): tc.Linear(hidden_dim, 1, rng) for r in range(MAX_RANK + 1)}

    @staticmethod
    def _mean(h: Tensor, segments: np.ndarray, n_graphs: int) -> Tensor:
        counts = np.bincount(segments, minlength=n_graphs).astype(np.float64)
        total = tc.scatter_rows(h, segments, n_graphs)
        return total * Tensor(1.0 / np.clip(counts, 1.0, None)[:, None])

    @staticmethod
    def _attend(h: Tensor, gate: tc.Linear, segments: np.ndarray, n_graphs: int) -> Tensor:
        weights = tc.segment_softmax(gate(h), segments, n_graphs)
        return tc.scatter_rows(h * weights, segments, n_graphs)

    def __call__(self, states: CellStates, graph_of: Dict[int, np.ndarray], n_graphs: int) -> Tensor:
        present = [r for r in range(MAX_RANK + 1) if len(graph_of[r])]
        cells_per_graph = sum(np.bincount(graph_of[r], minlength=n_graphs) for r in range(MAX_RANK + 1))
        if np.any(cells_per_graph == 0):
            raise EmptyComplex("Readout over a complex without cells")

        if self.mode in (PoolingMode.GLOBAL_MEAN, PoolingMode.GLOBAL_ATTENTION):
            h = tc.concat([states[r] for r in present], axis=0)
            segments = np.concatenate([graph_of[r] for r in present])
            if self.mode is PoolingMode.GLOBAL_MEAN:
                return self._mean(h, segments, n_graphs)
            return self._attend(h, self.gates["all"], segments, n_graphs)

        ranks_per_graph = np.zeros(n_graphs)
        pooled = None
        for r in present:
            if self.mode in (PoolingMode.LOCAL_MEAN, PoolingMode.WEIGHTED_LOCAL_MEAN):
                part = self._mean(states[r], graph_of[r], n_graphs)
            else:
                part = self._attend(states[r], self.gates[str(r)], graph_of[r], n_graphs)
            if self.rank_weights is not None:
                part = part * tc.gather_rows(self.rank_weights, np.array([r]))
            ranks_per_graph += np.bincount(graph_of[r], minlength=n_graphs) > 0
            pooled = part if pooled is None else pooled + part
        return pooled * Tensor(1.0 / ranks_per_graph[:, None])


def readout(states: CellStates, graph_of: Dict[int, np.ndarray], n_graphs: int, pooling: Readout) -> Tensor:
    return pooling(states, graph_of, n_graphs)


class Head(Module):
    """Two-layer MLP on the graph embedding, optionally joined with a protein vector."""

    def __init__(self, hidden_dim: int, protein_dim: int, n_outputs: int, dropout: float, seed: int, rng: np.random.Generator, dropout_id: int = HEAD_DROPOUT_ID):
        self.protein_dim = protein_dim
        self.hidden = tc.Linear(hidden_dim + protein_dim, hidden_dim, rng)
        self.act = tc.PReLU(hidden_dim)
        self.drop = tc.Dropout(dropout, layer_id=dropout_id, seed=seed)
        self.out = tc.Linear(hidden_dim, n_outputs, rng)
        self.step = 0

    def __call__(self, x: Tensor, proteins: Optional[np.ndarray] = None) -> Tensor:
        if self.protein_dim:
            if proteins is None or proteins.shape != (x.shape[0], self.protein_dim):
                got = None if proteins is None else proteins.shape
                raise DimensionMismatch(f"Expected protein vectors of shape ({x.shape[0]}, {self.protein_dim}), got {got}")
            x = tc.concat([x, Tensor(proteins)], axis=1)
        return self.out(self.drop(self.act(self.hidden(x)), self.step))


class GifflarModel(Module):
    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        specs = config.specs()
        width = config.input_dim + config.pe.dim
        self.embedding = CellEmbedding(config.input_dim, config.pe.dim, config.seed)
        self.layers = []
        for index in range(config.layers):
            d_in = width if index == 0 else config.hidden_dim
            self.layers.append(GifflarLayer(index, d_in, config.hidden_dim, specs, config, rng))
        self.readout = Readout(config.pooling, config.hidden_dim, rng)
        self.head = Head(config.hidden_dim, config.head.protein_dim, config.head.n_outputs, config.dropout, config.seed, rng)

    def set_step(self, step: int) -> None:
        for layer in self.layers:
            layer.set_step(step)
        self.head.step = step

    def cell_states(self, batch: ComplexBatch) -> CellStates:
        states = self.embedding(batch)
        for layer in self.layers:
            states = gifflar_layer(states, batch, layer)
        return states

    def __call__(self, batch: ComplexBatch) -> Tensor:
        states = self.cell_states(batch)
        pooled = readout(states, batch.graph_of, batch.n_graphs, self.readout)
        return self.head(pooled, batch.proteins)


def build_model(config: ModelConfig) -> GifflarModel:
    specs = config.specs()
    if not specs:
        raise ConfigError("At least one neighborhood spec is required", "model.neighborhoods")
    keys = [s.key for s in specs]
    if len(set(keys)) != len(keys):
        raise ConfigError("Duplicate neighborhood specs", "model.neighborhoods")
    covered = {s.source_rank for s in specs}
    width = config.input_dim + config.pe.dim
    if covered != set(range(MAX_RANK + 1)) and width != config.hidden_dim:
        raise ConfigError(
            "Ranks without a neighborhood keep their states, so input and hidden widths must match",
            "model.neighborhoods",
        )
    model = GifflarModel(config)
    logger.debug("Built model with %d trainable parameters", param_count(model))
    return model


def param_count(model: Module) -> int:
    return int(sum(p.data.size for p in model.parameters()))


def parameter_ledger(model: Module) -> List[Tuple[str, int]]:
    """Trainable scalars grouped by component (layer/spec, readout, head)."""
    ledger: Dict[str, int] = {}
    for name, p in model.named_parameters():
        parts = name.split(".")
        if parts[0] == "layers":
            component = ".".join(parts[:4])
        else:
            component = parts[0]
        ledger[component] = ledger.get(component, 0) + int(p.data.size)
    return sorted(ledger.items())


def predict(
    model: GifflarModel,
    cc: CombinatorialComplex,
    pe: Optional[np.ndarray] = None,
    mode: str = "eval",
    protein: Optional[np.ndarray] = None,
    seed_key: int = 0,
) -> np.ndarray:
    """Raw outputs (logits or regression value) of one complex, shape (n_outputs,)."""
    features = featurize(cc, model.config, seed_key=seed_key, pe=pe)
    proteins = None if protein is None else np.asarray(protein, dtype=np.float64).reshape(1, -1)
    batch = collate([features], proteins)
    previous = model.training
    model.train(mode == "train")
    try:
        return model(batch).data[0].copy()
    finally:
        model.train(previous)


def embed(model: GifflarModel, cc: CombinatorialComplex, seed_key: int = 0) -> Dict[int, np.ndarray]:
    """Final-layer cell states per rank (eval mode)."""
    batch = collate([featurize(cc, model.config, seed_key=seed_key)])
    previous = model.training
    model.eval()
    try:
        states = model.cell_states(batch)
    finally:
        model.train(previous)
    return {r: states[r].data.copy() for r in range(MAX_RANK + 1)}
