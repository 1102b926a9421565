"""
Template-based assembly of glycan trees into heavy-atom molecular graphs.
"""
import logging
from typing import Dict, List, Optional, Set, Tuple

from glycocc.errors import EmptyGlycan, InvalidPosition, OccupiedPosition
from glycocc.models.glycan import Anomer, GlycanTree
from glycocc.models.molecule import Atom, Bond, BondOrder, MolecularGraph, MonomerTemplate
from glycocc.services.chemistry import implicit_hydrogens
from glycocc.services.templates import TemplateLibrary, template_library

logger = logging.getLogger(__name__)


def _check_linkages(tree: GlycanTree, templates: List[MonomerTemplate]) -> Set[Tuple[int, int]]:
    """Validate every edge and return the (parent node, position) hydroxyls to remove."""
    removed: Set[Tuple[int, int]] = set()
    for parent, child, linkage in tree.edges:
        donor = templates[child]
        acceptor = templates[parent]
        if linkage.donor_position != donor.anomeric_position:
            raise InvalidPosition(
                f"{donor.name} links through position {donor.anomeric_position}, "
                f"not {linkage.donor_position} ({linkage.token()})"
            )
        position = linkage.acceptor_position
        if position not in acceptor.position_oxygens:
            raise InvalidPosition(
                f"{acceptor.name} has no free hydroxyl at position {position} ({linkage.token()})"
            )
        if position == acceptor.anomeric_position and parent != tree.root_index:
            raise OccupiedPosition(
                f"Position {position} of {acceptor.name} (node {parent}) is its own glycosidic linkage"
            )
        if (parent, position) in removed:
            raise OccupiedPosition(
                f"Two residues attached at position {position} of {acceptor.name} (node {parent})"
            )
        removed.add((parent, position))
    return removed


def assemble(tree: GlycanTree, library: Optional[TemplateLibrary] = None) -> MolecularGraph:
    """Condense the tree's monosaccharide templates into one molecular graph.

    Each linkage removes the acceptor's hydroxyl oxygen and bonds the donor's
    anomeric oxygen to the acceptor carbon. The bridge oxygen stays attributed
    to the donor and is listed in ``bridge_atoms``.
    """
    library = library or template_library
    if not tree.nodes:
        raise EmptyGlycan("Cannot assemble an empty glycan")

    templates = [library.get(node.name) for node in tree.nodes]
    removed = _check_linkages(tree, templates)
    unspecified = sum(1 for _, _, l in tree.edges if l.anomeric_config is Anomer.UNSPECIFIED)
    if unspecified:
        logger.warning("%d linkage(s) without anomeric configuration, assuming beta", unspecified)

    elements: List[str] = []
    charges: List[int] = []
    labels: List[str] = []
    attribution: Dict[int, int] = {}
    # (node, template atom index) -> graph atom index
    atom_map: Dict[Tuple[int, int], int] = {}

    for node_index, template in enumerate(templates):
        dropped = {template.position_oxygens[pos] for (n, pos) in removed if n == node_index}
        for local, atom in enumerate(template.graph.atoms):
            if local in dropped:
                continue
            new_index = len(elements)
            atom_map[(node_index, local)] = new_index
            elements.append(atom.element)
            charges.append(atom.charge)
            label = template.graph.labels[local] if template.graph.labels else str(local)
            labels.append(f"{node_index}:{label}")
            attribution[new_index] = node_index

    bonds: List[Bond] = []
    for node_index, template in enumerate(templates):
        for bond in template.graph.bonds:
            a = atom_map.get((node_index, bond.i))
            b = atom_map.get((node_index, bond.j))
            if a is None or b is None:
                continue
            bonds.append(Bond(a, b, bond.order))

    linkage_bonds = set()
    bridges = set()
    for parent, child, linkage in sorted(tree.edges, key=lambda e: e[1]):
        oxygen = atom_map[(child, templates[child].anomeric_oxygen)]
        carbon = atom_map[(parent, templates[parent].position_carbons[linkage.acceptor_position])]
        linkage_bonds.add(len(bonds))
        bridges.add(oxygen)
        bonds.append(Bond(carbon, oxygen, BondOrder.SINGLE))

    orders: List[List[BondOrder]] = [[] for _ in elements]
    for bond in bonds:
        orders[bond.i].append(bond.order)
        orders[bond.j].append(bond.order)
    atoms = [
        Atom(element=e, charge=charges[i], hydrogens=implicit_hydrogens(e, orders[i]))
        for i, e in enumerate(elements)
    ]
    return MolecularGraph(
        atoms=atoms,
        bonds=bonds,
        monomer_attribution=attribution,
        monomer_names=[node.name for node in tree.nodes],
        linkage_bonds=frozenset(linkage_bonds),
        bridge_atoms=frozenset(bridges),
        labels=labels,
    )
