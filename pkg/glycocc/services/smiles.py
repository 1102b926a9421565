"""
SMILES subset parser and writer for heavy-atom graphs.

Supported: organic-subset and bracket atoms (charge, hydrogen count; chirality
marks are accepted and ignored), single/double/triple/aromatic bonds, ring
closures (digits and %nn), branches and '.' separated components.
Not supported: isotopes, wildcard atoms, stereo output.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from glycocc.errors import SmilesSyntaxError, UnsupportedElement
from glycocc.models.molecule import Atom, Bond, BondOrder, MolecularGraph
from glycocc.services.chemistry import STANDARD_VALENCES, implicit_hydrogens

logger = logging.getLogger(__name__)

ORGANIC_SUBSET = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_SUBSET = {"b": "B", "c": "C", "n": "N", "o": "O", "p": "P", "s": "S"}
BRACKET_ELEMENTS = {
    "H", "B", "C", "N", "O", "F", "Na", "Mg", "Si", "P", "S", "Cl", "K", "Ca",
    "Fe", "Zn", "Se", "Br", "I",
}
WRITABLE_ELEMENTS = {"C", "O", "N", "S", "P"}

BOND_SYMBOLS: Dict[str, BondOrder] = {
    "-": BondOrder.SINGLE,
    "/": BondOrder.SINGLE,
    "\\": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
}


@dataclass
class _ParseState:
    elements: List[str] = field(default_factory=list)
    charges: List[int] = field(default_factory=list)
    explicit_h: List[Optional[int]] = field(default_factory=list)
    aromatic: List[bool] = field(default_factory=list)
    bonds: List[Bond] = field(default_factory=list)
    bond_keys: set = field(default_factory=set)
    # ring number -> (atom, bond order or None, offset)
    open_rings: Dict[int, Tuple[int, Optional[BondOrder], int]] = field(default_factory=dict)
    branches: List[Tuple[int, int]] = field(default_factory=list)
    prev: Optional[int] = None
    pending_bond: Optional[BondOrder] = None


class SmilesParser:
    """Character-level recursive-free SMILES reader."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.state = _ParseState()

    def fail(self, message: str, offset: Optional[int] = None):
        raise SmilesSyntaxError(message, self.text, self.pos if offset is None else offset)

    def parse(self) -> MolecularGraph:
        text, st = self.text, self.state
        while self.pos < len(text):
            ch = text[self.pos]
            if ch == "(":
                if st.prev is None:
                    self.fail("Branch without a preceding atom")
                st.branches.append((st.prev, self.pos))
                self.pos += 1
            elif ch == ")":
                if not st.branches:
                    self.fail("Unmatched ')'")
                st.prev, _ = st.branches.pop()
                st.pending_bond = None
                self.pos += 1
            elif ch in BOND_SYMBOLS:
                if st.pending_bond is not None:
                    self.fail("Two consecutive bond symbols")
                st.pending_bond = BOND_SYMBOLS[ch]
                self.pos += 1
            elif ch == ".":
                if st.pending_bond is not None:
                    self.fail("Bond symbol before '.'")
                st.prev = None
                self.pos += 1
            elif ch.isdigit() or ch == "%":
                self._ring_closure()
            elif ch == "[":
                self._bracket_atom()
            else:
                self._organic_atom()
        if st.branches:
            self.fail("Unclosed branch", st.branches[-1][1])
        if st.open_rings:
            number, (_, _, offset) = next(iter(st.open_rings.items()))
            self.fail(f"Unmatched ring bond {number}", offset)
        if st.pending_bond is not None:
            self.fail("Dangling bond symbol")
        return self._finish()

    def _add_atom(self, element: str, charge: int, hydrogens: Optional[int], aromatic: bool):
        st = self.state
        index = len(st.elements)
        st.elements.append(element)
        st.charges.append(charge)
        st.explicit_h.append(hydrogens)
        st.aromatic.append(aromatic)
        if st.prev is not None:
            order = st.pending_bond
            if order is None:
                both_aromatic = st.aromatic[st.prev] and aromatic
                order = BondOrder.AROMATIC if both_aromatic else BondOrder.SINGLE
            self._add_bond(st.prev, index, order)
        elif st.pending_bond is not None:
            self.fail("Bond symbol without a preceding atom")
        st.prev = index
        st.pending_bond = None

    def _add_bond(self, i: int, j: int, order: BondOrder):
        st = self.state
        if i == j:
            self.fail("Ring closure onto the same atom")
        key = (min(i, j), max(i, j))
        if key in st.bond_keys:
            self.fail("Duplicate bond")
        st.bond_keys.add(key)
        st.bonds.append(Bond(i, j, order))

    def _organic_atom(self):
        text = self.text
        two = text[self.pos:self.pos + 2]
        if two in ("Cl", "Br"):
            self._add_atom(two, 0, None, False)
            self.pos += 2
            return
        ch = text[self.pos]
        if ch in ORGANIC_SUBSET:
            self._add_atom(ch, 0, None, False)
        elif ch in AROMATIC_SUBSET:
            self._add_atom(AROMATIC_SUBSET[ch], 0, None, True)
        else:
            self.fail(f"Bad element token '{ch}'")
        self.pos += 1

    def _bracket_atom(self):
        text = self.text
        start = self.pos
        end = text.find("]", start)
        if end < 0:
            self.fail("Unclosed bracket atom", start)
        body = text[start + 1:end]
        i = 0
        if i < len(body) and body[i].isdigit():
            self.fail("Isotopes are not supported", start + 1)
        aromatic = False
        if body[i:i + 2] in BRACKET_ELEMENTS and len(body[i:i + 2]) == 2 and body[i + 1:i + 2].islower():
            element = body[i:i + 2]
            i += 2
        elif body[i:i + 1] in BRACKET_ELEMENTS:
            element = body[i]
            i += 1
        elif body[i:i + 1] in AROMATIC_SUBSET:
            element = AROMATIC_SUBSET[body[i]]
            aromatic = True
            i += 1
        else:
            self.fail(f"Bad element token '[{body}]'", start)
        while i < len(body) and body[i] == "@":
            i += 1
        hydrogens = 0
        if i < len(body) and body[i] == "H":
            i += 1
            digits = ""
            while i < len(body) and body[i].isdigit():
                digits += body[i]
                i += 1
            hydrogens = int(digits) if digits else 1
        charge = 0
        if i < len(body) and body[i] in "+-":
            sign = 1 if body[i] == "+" else -1
            i += 1
            digits = ""
            while i < len(body) and body[i].isdigit():
                digits += body[i]
                i += 1
            if digits:
                charge = sign * int(digits)
            else:
                charge = sign
                while i < len(body) and body[i] == ("+" if sign > 0 else "-"):
                    charge += sign
                    i += 1
        if i != len(body):
            self.fail(f"Unsupported bracket atom '[{body}]'", start)
        self.pos = end + 1
        self._add_atom(element, charge, hydrogens, aromatic)

    def _ring_closure(self):
        text, st = self.text, self.state
        start = self.pos
        if text[self.pos] == "%":
            digits = text[self.pos + 1:self.pos + 3]
            if len(digits) != 2 or not digits.isdigit():
                self.fail("Malformed %nn ring closure")
            number = int(digits)
            self.pos += 3
        else:
            number = int(text[self.pos])
            self.pos += 1
        if st.prev is None:
            self.fail("Ring closure without a preceding atom", start)
        if number in st.open_rings:
            other, order, _ = st.open_rings.pop(number)
            bond_order = st.pending_bond or order
            if st.pending_bond is not None and order is not None and st.pending_bond is not order:
                self.fail(f"Conflicting bond orders on ring closure {number}", start)
            if bond_order is None:
                both = st.aromatic[other] and st.aromatic[st.prev]
                bond_order = BondOrder.AROMATIC if both else BondOrder.SINGLE
            self._add_bond(other, st.prev, bond_order)
        else:
            st.open_rings[number] = (st.prev, st.pending_bond, start)
        st.pending_bond = None

    def _finish(self) -> MolecularGraph:
        st = self.state
        orders: List[List[BondOrder]] = [[] for _ in st.elements]
        for bond in st.bonds:
            orders[bond.i].append(bond.order)
            orders[bond.j].append(bond.order)
        atoms = []
        for index, element in enumerate(st.elements):
            hydrogens = st.explicit_h[index]
            if hydrogens is None:
                hydrogens = implicit_hydrogens(element, orders[index], st.aromatic[index])
            atoms.append(Atom(element=element, charge=st.charges[index], hydrogens=hydrogens))
        return MolecularGraph(atoms=atoms, bonds=list(st.bonds))


def parse_smiles(text: str) -> MolecularGraph:
    """Parse a SMILES string into a heavy-atom graph."""
    if not text or not text.strip():
        raise SmilesSyntaxError("Empty SMILES string", text or "", 0)
    return SmilesParser(text.strip()).parse()


def _atom_token(graph: MolecularGraph, index: int, orders: List[BondOrder]) -> str:
    atom = graph.atoms[index]
    if atom.element not in WRITABLE_ELEMENTS:
        raise UnsupportedElement(f"Element '{atom.element}' (atom {index}) cannot be written")
    bare_h = implicit_hydrogens(atom.element, orders)
    if atom.charge == 0 and atom.hydrogens == bare_h and atom.element in STANDARD_VALENCES:
        return atom.element
    token = atom.element
    if atom.hydrogens:
        token += "H" if atom.hydrogens == 1 else f"H{atom.hydrogens}"
    if atom.charge:
        sign = "+" if atom.charge > 0 else "-"
        token += sign if abs(atom.charge) == 1 else f"{sign}{abs(atom.charge)}"
    return f"[{token}]"


def write_smiles(graph: MolecularGraph) -> str:
    """Deterministic SMILES for the graph's atom ordering (no stereo marks)."""
    adjacency = graph.neighbors()
    for atom_neighbors in adjacency:
        atom_neighbors.sort()
    orders: List[List[BondOrder]] = [[graph.bonds[b].order for _, b in nbs] for nbs in adjacency]
    tokens = [_atom_token(graph, i, orders[i]) for i in range(graph.n_atoms)]

    visited = [False] * graph.n_atoms
    rank = [0] * graph.n_atoms
    tree_children: Dict[int, List[Tuple[int, int]]] = {}
    ring_bonds: List[int] = []
    roots: List[int] = []
    counter = 0

    # depth-first spanning forest in ascending neighbor order
    for start in range(graph.n_atoms):
        if visited[start]:
            continue
        roots.append(start)
        visited[start] = True
        rank[start] = counter
        counter += 1
        stack = [(start, -1, iter(adjacency[start]))]
        while stack:
            atom, via, it = stack[-1]
            advanced = False
            for nb, bond in it:
                if bond == via:
                    continue
                if not visited[nb]:
                    visited[nb] = True
                    rank[nb] = counter
                    counter += 1
                    tree_children.setdefault(atom, []).append((nb, bond))
                    stack.append((nb, bond, iter(adjacency[nb])))
                    advanced = True
                    break
                if bond not in ring_bonds and rank[nb] < rank[atom]:
                    ring_bonds.append(bond)
            if not advanced:
                stack.pop()

    # ring openings at the earlier-visited atom, closings at the later one
    events: Dict[int, List[Tuple[int, int, bool]]] = {}
    for bond in ring_bonds:
        b = graph.bonds[bond]
        first, second = (b.i, b.j) if rank[b.i] < rank[b.j] else (b.j, b.i)
        events.setdefault(first, []).append((rank[second], bond, True))
        events.setdefault(second, []).append((rank[first], bond, False))

    free_digits: List[int] = []
    next_digit = [1]
    assigned: Dict[int, int] = {}

    def ring_label(number: int) -> str:
        return str(number) if number < 10 else f"%{number:02d}"

    def emit(atom: int, out: List[str]):
        out.append(tokens[atom])
        for _, bond, opening in sorted(events.get(atom, []), key=lambda e: (not e[2], e[0], e[1])):
            if opening:
                if free_digits:
                    free_digits.sort()
                    number = free_digits.pop(0)
                else:
                    number = next_digit[0]
                    next_digit[0] += 1
                assigned[bond] = number
                out.append(graph.bonds[bond].order.symbol + ring_label(number))
            else:
                number = assigned.pop(bond)
                free_digits.append(number)
                out.append(ring_label(number))
        children = tree_children.get(atom, [])
        for position, (child, bond) in enumerate(children):
            symbol = graph.bonds[bond].order.symbol
            if position < len(children) - 1:
                out.append("(" + symbol)
                emit(child, out)
                out.append(")")
            else:
                out.append(symbol)
                emit(child, out)

    parts = []
    for root in roots:
        out: List[str] = []
        emit(root, out)
        parts.append("".join(out))
    return ".".join(parts)
