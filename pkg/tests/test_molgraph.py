import numpy as np
import pytest

from glycocc.errors import ConfigError, EmptyGlycan, InvalidPosition, MissingTemplate, OccupiedPosition, SmilesSyntaxError, UnsupportedElement
from glycocc.models.glycan import GlycanTree
from glycocc.models.molecule import Atom, MolecularGraph
from glycocc.services.assembly import assemble
from glycocc.services.chemistry import components, cycle_rank, ring_atoms
from glycocc.services.fingerprints import morgan_fingerprint
from glycocc.services.glycan_grammar import parse_iupac
from glycocc.services.smiles import parse_smiles, write_smiles
from glycocc.services.templates import template_library


def isomorphic(a: MolecularGraph, b: MolecularGraph) -> bool:
    """Backtracking isomorphism on element, charge, hydrogens and bond order."""
    if a.n_atoms != b.n_atoms or a.n_bonds != b.n_bonds:
        return False
    adj_a = [{nb: a.bonds[bd].order for nb, bd in nbs} for nbs in a.neighbors()]
    adj_b = [{nb: b.bonds[bd].order for nb, bd in nbs} for nbs in b.neighbors()]
    mapping = {}
    used = set()

    def extend(i):
        if i == a.n_atoms:
            return True
        for j in range(b.n_atoms):
            if j in used or a.atoms[i] != b.atoms[j] or len(adj_a[i]) != len(adj_b[j]):
                continue
            if any(nb in mapping and adj_b[j].get(mapping[nb]) != order for nb, order in adj_a[i].items()):
                continue
            mapping[i] = j
            used.add(j)
            if extend(i + 1):
                return True
            del mapping[i]
            used.discard(j)
        return False

    return extend(0)


def test_single_carbon():
    graph = parse_smiles("C")
    assert graph.atoms == [Atom("C", 0, 4)]
    assert graph.bonds == []


def test_ethanol():
    graph = parse_smiles("CCO")
    assert graph.n_atoms == 3
    assert graph.n_bonds == 2
    assert [a.hydrogens for a in graph.atoms] == [3, 2, 1]


def test_oxane_has_one_ring():
    graph = parse_smiles("C1CCOCC1")
    assert [a.element for a in graph.atoms].count("C") == 5
    assert graph.n_bonds == 6
    assert cycle_rank(graph) == 1
    assert ring_atoms(graph) == set(range(6))


def test_bracket_atoms_and_components():
    graph = parse_smiles("[NH4+].[O-]C(=O)C")
    assert len(components(graph)) == 2
    assert graph.atoms[0] == Atom("N", 1, 4)
    assert graph.atoms[1].charge == -1


@pytest.mark.parametrize("text", ["C1CC", "C(C", "CC)", "C[Xx]", "C="])
def test_smiles_errors(text):
    with pytest.raises(SmilesSyntaxError):
        parse_smiles(text)


@pytest.mark.parametrize("text", ["C", "CCO", "C1CCOCC1", "CC(=O)NC1C(O)OC(CO)C(O)C1O", "OCC1OC(O)C(O)C(O)C1O"])
def test_smiles_round_trip(text):
    graph = parse_smiles(text)
    assert isomorphic(parse_smiles(write_smiles(graph)), graph)


def test_write_single_carbon():
    assert write_smiles(parse_smiles("C")) == "C"


def test_write_rejects_unsupported_element():
    with pytest.raises(UnsupportedElement):
        write_smiles(parse_smiles("CCl"))


def test_glc_template():
    graph = assemble(parse_iupac("Glc"))
    assert graph.n_atoms == 12
    assert graph.n_bonds == 12
    assert template_library.get("Glc").formula() == "C6H12O6"


def test_lactose_assembly(lactose_graph):
    assert lactose_graph.n_atoms == 23
    assert lactose_graph.n_bonds == 24
    assert lactose_graph.n_monomers == 2
    assert len(lactose_graph.linkage_bonds) == 1
    assert len(lactose_graph.bridge_atoms) == 1
    assert cycle_rank(lactose_graph) == 2


def test_assembled_smiles_round_trip(lactose_graph):
    assert isomorphic(parse_smiles(write_smiles(lactose_graph)), lactose_graph)


def test_all_templates_are_single_rings():
    for name in template_library.names():
        template = template_library.get(name)
        assert len(components(template.graph)) == 1
        assert cycle_rank(template.graph) == 1
        assert isomorphic(parse_smiles(write_smiles(template.graph)), template.graph)


def test_conservation_on_random_trees(random_trees):
    for tree in random_trees(100, max_nodes=10, seed=11):
        graph = assemble(tree)
        templates = [template_library.get(n.name) for n in tree.nodes]
        assert graph.n_atoms == sum(t.graph.n_atoms for t in templates) - len(tree.edges)
        assert cycle_rank(graph) == sum(cycle_rank(t.graph) for t in templates)
        classes = {}
        for atom, monomer in graph.monomer_attribution.items():
            classes.setdefault(monomer, set()).add(atom)
        assert sorted(classes) == list(range(len(tree.nodes)))
        assert all(classes.values())
        assert set().union(*classes.values()) == set(range(graph.n_atoms))


def test_empty_tree_rejected():
    with pytest.raises(EmptyGlycan):
        assemble(GlycanTree(nodes=[], edges=[]))
    assert issubclass(EmptyGlycan, MissingTemplate)


def test_wrong_donor_position():
    with pytest.raises(InvalidPosition):
        assemble(parse_iupac("Gal(b2-4)Glc"))


def test_missing_acceptor_hydroxyl():
    # GlcNAc carries nitrogen at position 2
    with pytest.raises(InvalidPosition):
        assemble(parse_iupac("Gal(b1-2)GlcNAc"))


def test_two_residues_on_one_position():
    with pytest.raises(OccupiedPosition):
        assemble(parse_iupac("Gal(b1-4)[Fuc(a1-4)]Glc"))


def test_unspecified_anomer_defaults_with_warning(caplog):
    graph = assemble(parse_iupac("Gal(?1-4)Glc"))
    assert graph.n_atoms == 23
    assert "assuming beta" in caplog.text


def test_fingerprint_deterministic_and_in_range(lactose_graph):
    a = morgan_fingerprint(lactose_graph)
    b = morgan_fingerprint(lactose_graph)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (1024,)
    assert set(np.unique(a)) <= {0, 1}
    assert a.sum() > 0


def test_fingerprint_ignores_atom_order():
    np.testing.assert_array_equal(
        morgan_fingerprint(parse_smiles("CCO")), morgan_fingerprint(parse_smiles("OCC"))
    )


def test_fingerprint_invariant_under_permutation(random_trees):
    rng = np.random.default_rng(5)
    for tree in random_trees(10, max_nodes=5, seed=2):
        graph = assemble(tree)
        order = list(rng.permutation(graph.n_atoms))
        np.testing.assert_array_equal(
            morgan_fingerprint(graph, 2, 512), morgan_fingerprint(graph.permuted(order), 2, 512)
        )


@pytest.mark.parametrize("radius, n_bits, field", [(-1, 1024, "radius"), (2, 0, "n_bits")])
def test_fingerprint_rejects_bad_parameters(lactose_graph, radius, n_bits, field):
    with pytest.raises(ConfigError) as info:
        morgan_fingerprint(lactose_graph, radius, n_bits)
    assert info.value.field == field
