"""
Shared fixtures: worked-example glycans, their graphs and complexes, and a
seeded generator of random valid glycan trees.
"""
import numpy as np
import pytest

from glycocc.models.glycan import Anomer, GlycanTree, Linkage, MonosaccharideNode
from glycocc.services.assembly import assemble
from glycocc.services.complex_builder import build_cc
from glycocc.services.glycan_grammar import parse_iupac
from glycocc.services.templates import template_library

LACTOSE = "Gal(b1-4)Glc"
BRANCHED_MANNOSE = "Man(a1-3)[Man(a1-6)]Man"


def random_tree(rng: np.random.Generator, max_nodes: int = 10, names=None, unspecified: float = 0.0) -> GlycanTree:
    """Random valid glycan: donors use the child's anomeric position, acceptors a free parent hydroxyl."""
    names = list(names or template_library.names())
    n = int(rng.integers(1, max_nodes + 1))
    nodes = []
    free = []
    edges = []
    for index in range(n):
        candidates = [i for i in range(index) if free[i]]
        if index and not candidates:
            break
        name = names[int(rng.integers(len(names)))]
        template = template_library.get(name)
        anomer = Anomer.ALPHA if rng.random() < 0.5 else Anomer.BETA
        if unspecified and rng.random() < unspecified:
            anomer = Anomer.UNSPECIFIED
        nodes.append(MonosaccharideNode(name=name, anomeric_config=anomer if index else Anomer.UNSPECIFIED))
        positions = sorted(p for p in template.position_oxygens if p != template.anomeric_position)
        free.append(positions)
        if index:
            parent = candidates[int(rng.integers(len(candidates)))]
            acceptor = free[parent].pop(int(rng.integers(len(free[parent]))))
            edges.append((parent, index, Linkage(
                anomeric_config=anomer, donor_position=template.anomeric_position, acceptor_position=acceptor,
            )))
    return GlycanTree(nodes=nodes, edges=edges, root_index=0)


@pytest.fixture
def lactose_tree():
    return parse_iupac(LACTOSE)


@pytest.fixture
def lactose_graph(lactose_tree):
    return assemble(lactose_tree)


@pytest.fixture
def lactose_cc(lactose_graph):
    return build_cc(lactose_graph)


@pytest.fixture
def glc_cc():
    return build_cc(assemble(parse_iupac("Glc")))


@pytest.fixture
def random_trees():
    """Factory: random_trees(count, max_nodes=10, seed=0, unspecified=0.0)."""
    def make(count: int, max_nodes: int = 10, seed: int = 0, unspecified: float = 0.0):
        rng = np.random.default_rng(seed)
        return [random_tree(rng, max_nodes, unspecified=unspecified) for _ in range(count)]
    return make
