"""
Molecular graph models: heavy atoms, bonds, and monomer templates.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple


class BondOrder(str, Enum):
    SINGLE = "single"
    DOUBLE = "double"
    TRIPLE = "triple"
    AROMATIC = "aromatic"

    @property
    def valence(self) -> float:
        return {"single": 1.0, "double": 2.0, "triple": 3.0, "aromatic": 1.5}[self.value]

    @property
    def symbol(self) -> str:
        return {"single": "", "double": "=", "triple": "#", "aromatic": ":"}[self.value]

    @classmethod
    def from_int(cls, order: int) -> "BondOrder":
        return {1: cls.SINGLE, 2: cls.DOUBLE, 3: cls.TRIPLE}[order]


@dataclass(frozen=True)
class Atom:
    element: str
    charge: int = 0
    hydrogens: int = 0


@dataclass(frozen=True)
class Bond:
    i: int
    j: int
    order: BondOrder = BondOrder.SINGLE

    @property
    def key(self) -> Tuple[int, int]:
        return (self.i, self.j) if self.i < self.j else (self.j, self.i)


@dataclass
class MolecularGraph:
    """Heavy-atom graph with optional monomer attribution.

    Bridge oxygens of glycosidic bonds belong to their donor monomer and are
    listed in ``bridge_atoms``.
    """

    atoms: List[Atom]
    bonds: List[Bond]
    monomer_attribution: Optional[Dict[int, int]] = None
    monomer_names: Optional[List[str]] = None
    linkage_bonds: FrozenSet[int] = frozenset()
    bridge_atoms: FrozenSet[int] = frozenset()
    labels: Optional[List[str]] = None

    def __post_init__(self):
        n = len(self.atoms)
        seen = set()
        for bond in self.bonds:
            if bond.i == bond.j:
                raise ValueError(f"bond with identical endpoints {bond.i}")
            if not (0 <= bond.i < n and 0 <= bond.j < n):
                raise ValueError(f"bond ({bond.i}, {bond.j}) references a missing atom")
            if bond.key in seen:
                raise ValueError(f"duplicate bond {bond.key}")
            seen.add(bond.key)
        if self.monomer_attribution is not None:
            missing = [a for a in range(n) if a not in self.monomer_attribution]
            if missing:
                raise ValueError(f"atoms without monomer attribution: {missing[:5]}")

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)

    @property
    def n_monomers(self) -> int:
        if self.monomer_attribution is None:
            return 0
        return len(set(self.monomer_attribution.values()))

    def neighbors(self) -> List[List[Tuple[int, int]]]:
        """Per atom: (neighbor atom, bond index) pairs."""
        adjacency: List[List[Tuple[int, int]]] = [[] for _ in self.atoms]
        for index, bond in enumerate(self.bonds):
            adjacency[bond.i].append((bond.j, index))
            adjacency[bond.j].append((bond.i, index))
        return adjacency

    def degree(self, atom: int) -> int:
        return sum(1 for b in self.bonds if b.i == atom or b.j == atom)

    def permuted(self, order: List[int]) -> "MolecularGraph":
        """Relabel atoms: new atom k is old atom order[k]."""
        new_of = {old: new for new, old in enumerate(order)}
        return MolecularGraph(
            atoms=[self.atoms[old] for old in order],
            bonds=[Bond(new_of[b.i], new_of[b.j], b.order) for b in self.bonds],
            monomer_attribution=(
                {new_of[a]: m for a, m in self.monomer_attribution.items()}
                if self.monomer_attribution is not None else None
            ),
            monomer_names=self.monomer_names,
            linkage_bonds=self.linkage_bonds,
            bridge_atoms=frozenset(new_of[a] for a in self.bridge_atoms),
            labels=[self.labels[old] for old in order] if self.labels else None,
        )


@dataclass(frozen=True)
class MonomerTemplate:
    name: str
    graph: MolecularGraph
    anomeric_position: int
    anomeric_oxygen: int
    position_oxygens: Dict[int, int]
    position_carbons: Dict[int, int]
    monomer_class: str = ""
    stereo: Dict[str, str] = field(default_factory=dict)

    def formula(self) -> str:
        counts: Dict[str, int] = {}
        for atom in self.graph.atoms:
            counts[atom.element] = counts.get(atom.element, 0) + 1
        hydrogens = sum(a.hydrogens for a in self.graph.atoms)
        ordered = ["C", "H", "N", "O"]
        counts["H"] = hydrogens
        parts = [f"{e}{counts[e]}" for e in ordered if counts.get(e)]
        parts += [f"{e}{c}" for e, c in sorted(counts.items()) if e not in ordered]
        return "".join(parts)
