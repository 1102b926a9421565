"""
Combinatorial complex and neighborhood models.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

MAX_RANK = 2


class NeighborhoodKind(str, Enum):
    INTRA_VIA_HIGHER = "intra_via_higher"
    INTRA_VIA_LOWER = "intra_via_lower"
    UP_INCIDENCE = "up_incidence"
    DOWN_INCIDENCE = "down_incidence"

    @property
    def is_intra(self) -> bool:
        return self in (NeighborhoodKind.INTRA_VIA_HIGHER, NeighborhoodKind.INTRA_VIA_LOWER)


class NeighborhoodSpec(BaseModel):
    """Which cells of ``source_rank`` receive messages, and from where.

    Intra kinds connect cells of the source rank that share (higher) or
    contain a common (lower) cell of ``via_rank``. Incidence kinds connect a
    cell to the cells of ``via_rank`` containing it (up) or contained in it (down).
    """

    model_config = ConfigDict(frozen=True)

    kind: NeighborhoodKind
    source_rank: int = Field(ge=0, le=MAX_RANK)
    via_rank: int = Field(ge=0, le=MAX_RANK + 1)

    @model_validator(mode="after")
    def _check_direction(self) -> "NeighborhoodSpec":
        upward = self.kind in (NeighborhoodKind.INTRA_VIA_HIGHER, NeighborhoodKind.UP_INCIDENCE)
        if upward and self.via_rank <= self.source_rank:
            raise ValueError(f"{self.kind.value} needs via_rank > source_rank")
        if not upward and self.via_rank >= self.source_rank:
            raise ValueError(f"{self.kind.value} needs via_rank < source_rank")
        return self

    @property
    def key(self) -> str:
        return f"{self.kind.value}:{self.source_rank}:{self.via_rank}"

    @property
    def message_rank(self) -> int:
        """Rank of the cells whose states are sent along this neighborhood."""
        return self.source_rank if self.kind.is_intra else self.via_rank


def default_specs(alternative_bond_neighborhood: bool = False, reverse_incidence: bool = False) -> List[NeighborhoodSpec]:
    """The five-neighborhood set used by the GIFFLAR layer.

    Atoms via bonds, bonds via monosaccharides, monosaccharides via shared
    bonds, atoms from incident bonds, bonds from containing monosaccharides.
    """
    bond_intra = (
        NeighborhoodSpec(kind=NeighborhoodKind.INTRA_VIA_LOWER, source_rank=1, via_rank=0)
        if alternative_bond_neighborhood
        else NeighborhoodSpec(kind=NeighborhoodKind.INTRA_VIA_HIGHER, source_rank=1, via_rank=2)
    )
    if reverse_incidence:
        incidence = [
            NeighborhoodSpec(kind=NeighborhoodKind.DOWN_INCIDENCE, source_rank=1, via_rank=0),
            NeighborhoodSpec(kind=NeighborhoodKind.DOWN_INCIDENCE, source_rank=2, via_rank=1),
        ]
    else:
        incidence = [
            NeighborhoodSpec(kind=NeighborhoodKind.UP_INCIDENCE, source_rank=0, via_rank=1),
            NeighborhoodSpec(kind=NeighborhoodKind.UP_INCIDENCE, source_rank=1, via_rank=2),
        ]
    return [
        NeighborhoodSpec(kind=NeighborhoodKind.INTRA_VIA_HIGHER, source_rank=0, via_rank=1),
        bond_intra,
        NeighborhoodSpec(kind=NeighborhoodKind.INTRA_VIA_LOWER, source_rank=2, via_rank=1),
        *incidence,
    ]


@dataclass(frozen=True)
class CombinatorialComplex:
    """Ranked cells over the atom ground set.

    Cell ids are global: atoms first, then bonds, then monosaccharides, so each
    skeleton is a contiguous id range.
    """

    n_atoms: int
    cells: Tuple[FrozenSet[int], ...]
    ranks: Tuple[int, ...]
    cell_classes: Tuple[str, ...]
    glycosidic: FrozenSet[int] = frozenset()
    _contains: Dict[int, Tuple[Tuple[int, ...], ...]] = field(default=None, repr=False, compare=False)
    _offsets: Tuple[int, ...] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        # ground atom -> ids of cells of each rank containing it
        index: Dict[int, List[List[int]]] = {r: [[] for _ in range(self.n_atoms)] for r in range(MAX_RANK + 1)}
        for cell_id, members in enumerate(self.cells):
            for atom in members:
                index[self.ranks[cell_id]][atom].append(cell_id)
        frozen = {r: tuple(tuple(ids) for ids in lists) for r, lists in index.items()}
        object.__setattr__(self, "_contains", frozen)
        offsets = tuple(sum(1 for x in self.ranks if x < r) for r in range(MAX_RANK + 2))
        object.__setattr__(self, "_offsets", offsets)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def rank(self, cell: int) -> int:
        return self.ranks[cell]

    def skeleton(self, rank: int) -> List[int]:
        return [i for i, r in enumerate(self.ranks) if r == rank]

    def skeleton_sizes(self) -> Dict[int, int]:
        return {r: sum(1 for x in self.ranks if x == r) for r in range(MAX_RANK + 1)}

    def offset(self, rank: int) -> int:
        """Global id of the first cell of ``rank``."""
        return self._offsets[min(rank, MAX_RANK + 1)]

    def cells_containing(self, atom: int, rank: int) -> Sequence[int]:
        if rank > MAX_RANK:
            return ()
        return self._contains[rank][atom]

    def relabeled(self, orders: Dict[int, Sequence[int]]) -> "CombinatorialComplex":
        """Permute cells within each rank: new local k of rank r is old local orders[r][k].

        Permuting rank 0 also renames the ground set so that atom ids keep
        matching 0-cell ids.
        """
        sizes = self.skeleton_sizes()
        full = {r: list(orders.get(r, range(sizes[r]))) for r in range(MAX_RANK + 1)}
        new_atom = {old: new for new, old in enumerate(full[0])}
        cells, ranks, classes, glycosidic = [], [], [], set()
        for r in range(MAX_RANK + 1):
            base = self.offset(r)
            for old_local in full[r]:
                old_id = base + old_local
                if old_id in self.glycosidic:
                    glycosidic.add(len(cells))
                cells.append(frozenset(new_atom[a] for a in self.cells[old_id]))
                ranks.append(r)
                classes.append(self.cell_classes[old_id])
        return CombinatorialComplex(
            n_atoms=self.n_atoms, cells=tuple(cells), ranks=tuple(ranks),
            cell_classes=tuple(classes), glycosidic=frozenset(glycosidic),
        )
