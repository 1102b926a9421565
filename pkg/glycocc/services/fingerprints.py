"""
Circular (Morgan/ECFP-style) atom fingerprints and monosaccharide count fingerprints.
"""
import logging
import struct
from collections import Counter
from typing import Dict, Iterable, List, Mapping, Sequence, Union

import numpy as np

from glycocc.config import MORGAN_BITS, MORGAN_RADIUS
from glycocc.errors import ConfigError
from glycocc.models.glycan import GlycanTree
from glycocc.models.molecule import BondOrder, MolecularGraph
from glycocc.services.chemistry import ATOMIC_NUMBERS, ring_atoms

logger = logging.getLogger(__name__)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF

_BOND_CODES = {BondOrder.SINGLE: 1, BondOrder.DOUBLE: 2, BondOrder.TRIPLE: 3, BondOrder.AROMATIC: 4}

CountFingerprint = Dict[str, int]


def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK
    return h


def _hash_ints(values: Iterable[int]) -> int:
    return fnv1a_64(b"".join(struct.pack("<Q", v & _MASK) for v in values))


def atom_invariants(graph: MolecularGraph) -> List[int]:
    """Initial identifiers: atomic number, heavy degree, hydrogens, charge, ring membership."""
    in_ring = ring_atoms(graph)
    degrees = [len(nbs) for nbs in graph.neighbors()]
    return [
        _hash_ints((
            ATOMIC_NUMBERS.get(atom.element, 0),
            degrees[i],
            atom.hydrogens,
            atom.charge,
            1 if i in in_ring else 0,
        ))
        for i, atom in enumerate(graph.atoms)
    ]


def morgan_fingerprint(graph: MolecularGraph, radius: int = MORGAN_RADIUS, n_bits: int = MORGAN_BITS) -> np.ndarray:
    """Folded circular fingerprint as a 0/1 uint8 vector of length ``n_bits``."""
    if radius < 0:
        raise ConfigError(f"must be >= 0, got {radius}", "radius")
    if n_bits < 1:
        raise ConfigError(f"must be >= 1, got {n_bits}", "n_bits")
    bits = np.zeros(n_bits, dtype=np.uint8)
    identifiers = atom_invariants(graph)
    for ident in identifiers:
        bits[ident % n_bits] = 1
    adjacency = graph.neighbors()
    for round_index in range(1, radius + 1):
        updated = []
        for atom, nbs in enumerate(adjacency):
            env = sorted((_BOND_CODES[graph.bonds[b].order], identifiers[nb]) for nb, b in nbs)
            flat = [round_index, identifiers[atom]]
            for code, ident in env:
                flat.extend((code, ident))
            updated.append(_hash_ints(flat))
        identifiers = updated
        for ident in identifiers:
            bits[ident % n_bits] = 1
    return bits


def mono_fingerprint(tree: GlycanTree) -> CountFingerprint:
    """Counts of residue names and of 'Child(linkage)Parent' pairs."""
    counts: Counter = Counter(node.name for node in tree.nodes)
    for parent, child, linkage in tree.edges:
        counts[f"{tree.nodes[child].name}({linkage.token()}){tree.nodes[parent].name}"] += 1
    return dict(counts)


def _as_counts(fp: Union[Mapping[str, int], Iterable]) -> Mapping:
    if isinstance(fp, Mapping):
        return fp
    return {key: 1 for key in fp}


def tanimoto(a, b) -> float:
    """Σmin / Σmax over count vectors; plain sets count as 0/1 vectors. Empty vs empty is 0."""
    a, b = _as_counts(a), _as_counts(b)
    shared = 0
    for key, value in a.items():
        if key in b:
            shared += min(value, b[key])
    total = sum(a.values()) + sum(b.values()) - shared
    if total <= 0:
        return 0.0
    return shared / total


def max_similarities(reference: Sequence[CountFingerprint], queries: Sequence[CountFingerprint]) -> List[float]:
    """For each query, the highest Tanimoto similarity to any reference fingerprint.

    Only references sharing at least one feature can score above zero, so each
    query is compared against the union of its features' posting lists.
    """
    postings: Dict[str, List[int]] = {}
    for index, fp in enumerate(reference):
        for key in fp:
            postings.setdefault(key, []).append(index)
    best = []
    for fp in queries:
        candidates = set()
        for key in fp:
            candidates.update(postings.get(key, ()))
        best.append(max((tanimoto(fp, reference[c]) for c in candidates), default=0.0))
    return best
