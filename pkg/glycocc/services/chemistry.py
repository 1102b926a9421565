"""
Valence rules and ring bookkeeping for heavy-atom graphs.
"""
from typing import Dict, List, Sequence, Set, Tuple

from glycocc.models.molecule import BondOrder, MolecularGraph

STANDARD_VALENCES: Dict[str, Tuple[int, ...]] = {
    "B": (3,),
    "C": (4,),
    "N": (3, 5),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

ATOMIC_NUMBERS: Dict[str, int] = {
    "H": 1, "B": 5, "C": 6, "N": 7, "O": 8, "F": 9, "Na": 11, "Mg": 12, "Si": 14,
    "P": 15, "S": 16, "Cl": 17, "K": 19, "Ca": 20, "Fe": 26, "Zn": 30, "Se": 34,
    "Br": 35, "I": 53,
}


def implicit_hydrogens(element: str, orders: Sequence[BondOrder], aromatic: bool = False) -> int:
    """Hydrogens needed to reach the lowest standard valence at or above the bond sum."""
    valences = STANDARD_VALENCES.get(element)
    if not valences:
        return 0
    n_aromatic = sum(1 for o in orders if o is BondOrder.AROMATIC)
    if aromatic or n_aromatic:
        used = sum(o.valence for o in orders if o is not BondOrder.AROMATIC) + n_aromatic + 1
        return max(0, valences[0] - int(used))
    used = int(sum(o.valence for o in orders))
    for valence in valences:
        if valence >= used:
            return valence - used
    return 0


def components(graph: MolecularGraph) -> List[List[int]]:
    adjacency = graph.neighbors()
    seen: Set[int] = set()
    result: List[List[int]] = []
    for start in range(graph.n_atoms):
        if start in seen:
            continue
        stack = [start]
        seen.add(start)
        comp = []
        while stack:
            atom = stack.pop()
            comp.append(atom)
            for nb, _ in adjacency[atom]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        result.append(sorted(comp))
    return result


def cycle_rank(graph: MolecularGraph) -> int:
    """Number of independent rings: bonds - atoms + components."""
    return graph.n_bonds - graph.n_atoms + len(components(graph))


def bridge_bonds(graph: MolecularGraph) -> Set[int]:
    """Bond indices whose removal disconnects the graph (iterative lowlink)."""
    adjacency = graph.neighbors()
    n = graph.n_atoms
    discovery = [-1] * n
    low = [0] * n
    bridges: Set[int] = set()
    timer = 0
    for root in range(n):
        if discovery[root] != -1:
            continue
        discovery[root] = low[root] = timer
        timer += 1
        # frames: (atom, bond used to enter, neighbor iterator position)
        stack = [(root, -1, 0)]
        while stack:
            atom, via, pos = stack[-1]
            if pos < len(adjacency[atom]):
                stack[-1] = (atom, via, pos + 1)
                nb, bond = adjacency[atom][pos]
                if bond == via:
                    continue
                if discovery[nb] == -1:
                    discovery[nb] = low[nb] = timer
                    timer += 1
                    stack.append((nb, bond, 0))
                else:
                    low[atom] = min(low[atom], discovery[nb])
            else:
                stack.pop()
                if stack:
                    parent = stack[-1][0]
                    low[parent] = min(low[parent], low[atom])
                    if low[atom] > discovery[parent]:
                        bridges.add(via)
    return bridges


def ring_bonds(graph: MolecularGraph) -> Set[int]:
    bridges = bridge_bonds(graph)
    return {i for i in range(graph.n_bonds) if i not in bridges}


def ring_atoms(graph: MolecularGraph) -> Set[int]:
    """Atoms lying on at least one cycle."""
    atoms: Set[int] = set()
    for index in ring_bonds(graph):
        bond = graph.bonds[index]
        atoms.update((bond.i, bond.j))
    return atoms
