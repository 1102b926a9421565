"""
Build combinatorial complexes from assembled molecular graphs and answer
neighborhood queries over them.
"""
import logging
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Set, Tuple

import numpy as np

from glycocc.config import EXHAUSTIVE_CHECK_LIMIT, MIN_TWO_CELL_SIZE
from glycocc.errors import MissingAttribution, RankMismatch, RankViolation
from glycocc.models.complex import MAX_RANK, CombinatorialComplex, NeighborhoodKind, NeighborhoodSpec
from glycocc.models.molecule import MolecularGraph

logger = logging.getLogger(__name__)

PairList = List[Tuple[int, int]]


def build_cc(
    graph: MolecularGraph,
    min_2cell_size: int = MIN_TWO_CELL_SIZE,
    exhaustive_limit: int = EXHAUSTIVE_CHECK_LIMIT,
) -> CombinatorialComplex:
    """Atoms become 0-cells, bonds 1-cells, monosaccharides 2-cells.

    A 2-cell holds the monomer's attributed atoms plus both endpoints of every
    glycosidic bond touching it, so a glycosidic 1-cell lies in both of its
    monosaccharides.
    """
    if graph.monomer_attribution is None:
        raise MissingAttribution("Molecular graph has no monomer attribution")

    cells: List[FrozenSet[int]] = []
    ranks: List[int] = []
    classes: List[str] = []
    for index, atom in enumerate(graph.atoms):
        cells.append(frozenset((index,)))
        ranks.append(0)
        classes.append(atom.element)
    glycosidic = set()
    for index, bond in enumerate(graph.bonds):
        if index in graph.linkage_bonds:
            glycosidic.add(len(cells))
        cells.append(frozenset((bond.i, bond.j)))
        ranks.append(1)
        classes.append(bond.order.value)

    members: Dict[int, Set[int]] = {}
    for atom, monomer in graph.monomer_attribution.items():
        members.setdefault(monomer, set()).add(atom)
    for bond_index in graph.linkage_bonds:
        bond = graph.bonds[bond_index]
        for monomer in {graph.monomer_attribution[bond.i], graph.monomer_attribution[bond.j]}:
            members[monomer].update((bond.i, bond.j))

    names = graph.monomer_names or []
    for monomer in sorted(members):
        cell = frozenset(members[monomer])
        name = names[monomer] if monomer < len(names) else str(monomer)
        if len(cell) < min_2cell_size:
            logger.warning(
                "Skipping 2-cell for monomer %d (%s): %d member(s) < %d", monomer, name, len(cell), min_2cell_size
            )
            continue
        cells.append(cell)
        ranks.append(2)
        classes.append(name)

    cc = CombinatorialComplex(
        n_atoms=graph.n_atoms, cells=tuple(cells), ranks=tuple(ranks),
        cell_classes=tuple(classes), glycosidic=frozenset(glycosidic),
    )
    if cc.n_cells <= exhaustive_limit:
        check_order_exhaustive(cc)
    else:
        check_order_reduced(cc)
    return cc


def check_order_exhaustive(cc: CombinatorialComplex) -> None:
    """Every proper inclusion x ⊂ y has rank(x) < rank(y); cells within a rank are distinct."""
    _check_singletons(cc)
    for a, b in combinations(range(cc.n_cells), 2):
        x, y = cc.cells[a], cc.cells[b]
        if x == y and cc.ranks[a] == cc.ranks[b]:
            raise RankViolation(f"Duplicate rank-{cc.ranks[a]} cells {a} and {b}")
        if x < y and cc.ranks[a] >= cc.ranks[b]:
            raise RankViolation(f"Cell {a} ⊂ cell {b} but rank {cc.ranks[a]} >= {cc.ranks[b]}")
        if y < x and cc.ranks[b] >= cc.ranks[a]:
            raise RankViolation(f"Cell {b} ⊂ cell {a} but rank {cc.ranks[b]} >= {cc.ranks[a]}")


def check_order_reduced(cc: CombinatorialComplex) -> None:
    """Same verdict as the exhaustive check, using the fixed sizes of 0- and 1-cells."""
    _check_singletons(cc)
    seen_bonds = set()
    for cell in cc.skeleton(1):
        members = cc.cells[cell]
        if len(members) != 2:
            raise RankViolation(f"1-cell {cell} has {len(members)} members")
        if members in seen_bonds:
            raise RankViolation(f"Duplicate 1-cell {cell}")
        seen_bonds.add(members)
    two_cells = cc.skeleton(2)
    for cell in two_cells:
        if len(cc.cells[cell]) < 2:
            raise RankViolation(f"2-cell {cell} is smaller than a bond")
    for a, b in combinations(two_cells, 2):
        x, y = cc.cells[a], cc.cells[b]
        if x <= y or y <= x:
            raise RankViolation(f"2-cells {a} and {b} are nested or equal")


def _check_singletons(cc: CombinatorialComplex) -> None:
    atoms = cc.skeleton(0)
    if [sorted(cc.cells[c]) for c in atoms] != [[i] for i in range(cc.n_atoms)]:
        raise RankViolation("0-cells are not exactly the atom singletons")
    if any(not cell for cell in cc.cells):
        raise RankViolation("Empty cell")


def _supersets(cc: CombinatorialComplex, members: FrozenSet[int], rank: int) -> Set[int]:
    if rank > MAX_RANK or not members:
        return set()
    atoms = iter(members)
    result = set(cc.cells_containing(next(atoms), rank))
    for atom in atoms:
        result.intersection_update(cc.cells_containing(atom, rank))
    return result


def _subsets(cc: CombinatorialComplex, members: FrozenSet[int], rank: int) -> Set[int]:
    result = set()
    for atom in members:
        for cell in cc.cells_containing(atom, rank):
            if cc.cells[cell] <= members:
                result.add(cell)
    return result


def neighborhood(cc: CombinatorialComplex, spec: NeighborhoodSpec, cell: int) -> Set[int]:
    """Cells sending messages to ``cell`` under ``spec``."""
    if cc.rank(cell) != spec.source_rank:
        raise RankMismatch(f"Cell {cell} has rank {cc.rank(cell)}, spec expects {spec.source_rank}")
    x = cc.cells[cell]
    i, j = spec.source_rank, spec.via_rank
    if spec.kind is NeighborhoodKind.UP_INCIDENCE:
        return _supersets(cc, x, j)
    if spec.kind is NeighborhoodKind.DOWN_INCIDENCE:
        return _subsets(cc, x, j)
    if spec.kind is NeighborhoodKind.INTRA_VIA_HIGHER:
        via = _supersets(cc, x, j)
        result = set()
        for z in via:
            result.update(_subsets(cc, cc.cells[z], i))
    else:
        via = _subsets(cc, x, j)
        result = set()
        for z in via:
            result.update(_supersets(cc, cc.cells[z], i))
    result.discard(cell)
    return result


def neighborhood_intra(cc: CombinatorialComplex, spec: NeighborhoodSpec, cell: int) -> Set[int]:
    if not spec.kind.is_intra:
        raise RankMismatch(f"{spec.kind.value} is not an intra-rank neighborhood")
    return neighborhood(cc, spec, cell)


def neighborhood_up(cc: CombinatorialComplex, spec: NeighborhoodSpec, cell: int) -> Set[int]:
    if spec.kind.is_intra:
        raise RankMismatch(f"{spec.kind.value} is not an incidence neighborhood")
    return neighborhood(cc, spec, cell)


def adjacency_matrices(cc: CombinatorialComplex, specs: Iterable[NeighborhoodSpec]) -> List[PairList]:
    """Per spec, all (target, source) message pairs sorted by target then source."""
    result = []
    for spec in specs:
        pairs = []
        for cell in cc.skeleton(spec.source_rank):
            pairs.extend((cell, source) for source in neighborhood(cc, spec, cell))
        pairs.sort()
        result.append(pairs)
    return result


def message_index(cc: CombinatorialComplex, spec: NeighborhoodSpec, pairs: PairList) -> Tuple[np.ndarray, np.ndarray]:
    """Pair list as local row indices into the target and message rank state matrices."""
    target_base = cc.offset(spec.source_rank)
    source_base = cc.offset(spec.message_rank)
    targets = np.fromiter((t - target_base for t, _ in pairs), dtype=np.int64, count=len(pairs))
    sources = np.fromiter((s - source_base for _, s in pairs), dtype=np.int64, count=len(pairs))
    return targets, sources


def rank0_adjacency(cc: CombinatorialComplex) -> np.ndarray:
    """Dense atom adjacency recovered from the 1-cells."""
    adjacency = np.zeros((cc.n_atoms, cc.n_atoms), dtype=np.float64)
    for cell in cc.skeleton(1):
        a, b = sorted(cc.cells[cell])
        adjacency[a, b] = adjacency[b, a] = 1.0
    return adjacency


def dump_complex(cc: CombinatorialComplex) -> str:
    """One line per cell: rank, cell id, comma-separated sorted members."""
    lines = [
        f"{cc.ranks[cell]}\t{cell}\t{','.join(str(m) for m in sorted(cc.cells[cell]))}"
        for cell in range(cc.n_cells)
    ]
    return "\n".join(lines) + ("\n" if lines else "")
