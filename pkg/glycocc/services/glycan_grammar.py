"""
IUPAC-condensed glycan notation: parser and canonical writer.

Grammar (EBNF, see docs/grammar.md):

    glycan   = item , { item } ;
    item     = residue , [ linkage ] | "[" , item , { item } , "]" ;
    residue  = name ;
    linkage  = "(" , [ anomer ] , digit , "-" , digit , ")" ;
    anomer   = "a" | "b" | "?" | "α" | "β" ;

A residue followed by a linkage is a child of the next residue at the same
bracket depth; a bracketed group hands its trailing linked residue to the
enclosing level as an extra child of that next residue.
"""
import logging
from typing import Collection, Dict, List, Optional, Tuple

from glycocc.errors import GlycanSyntaxError, UnknownMonosaccharide
from glycocc.models.glycan import Anomer, GlycanTree, Linkage, MonosaccharideNode

logger = logging.getLogger(__name__)

ANOMER_SYMBOLS: Dict[str, Anomer] = {
    "a": Anomer.ALPHA,
    "α": Anomer.ALPHA,
    "b": Anomer.BETA,
    "β": Anomer.BETA,
    "?": Anomer.UNSPECIFIED,
}

_NAME_CHARS = set("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789")


def default_vocabulary() -> Collection[str]:
    from glycocc.services.templates import template_library

    return template_library.names()


class _GlycanParser:
    """Single-use left-to-right parser with one pending list per bracket depth."""

    def __init__(self, text: str, vocabulary: Collection[str]):
        self.text = text
        self.vocabulary = vocabulary
        self.pos = 0
        self.nodes: List[MonosaccharideNode] = []
        self.edges: List[Tuple[int, int, Linkage]] = []
        # pending children per depth: (node index, linkage)
        self.pending: List[List[Tuple[int, Linkage]]] = [[]]
        self.open_brackets: List[int] = []
        self.last_unlinked: Optional[int] = None
        self.warnings: List[str] = []

    def fail(self, message: str, offset: Optional[int] = None):
        raise GlycanSyntaxError(message, self.text, self.pos if offset is None else offset)

    def parse(self) -> GlycanTree:
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if self.last_unlinked is not None:
                # only the root may stand without a linkage, and it must be last
                if ch == "]":
                    self.fail("Branch must end with a linkage")
                self.fail(f"Expected linkage or end of input, got '{ch}'")
            if ch == "[":
                self.open_brackets.append(self.pos)
                self.pending.append([])
                self.pos += 1
            elif ch == "]":
                self._close_branch()
            elif ch in _NAME_CHARS:
                self._residue()
            elif ch == "(":
                self.fail("Linkage without a preceding monosaccharide")
            else:
                self.fail(f"Unexpected character '{ch}'")
        if self.open_brackets:
            self.fail("Unbalanced '['", self.open_brackets[-1])
        if self.last_unlinked is None:
            self.fail("Glycan must end with the reducing-end monosaccharide")
        edges = sorted(self.edges, key=lambda e: e[1])
        return GlycanTree(
            nodes=self.nodes, edges=edges, root_index=self.last_unlinked,
            warnings=tuple(self.warnings),
        )

    def _close_branch(self):
        if not self.open_brackets:
            self.fail("Unbalanced ']'")
        start = self.open_brackets.pop()
        inner = self.pending.pop()
        if len(inner) != 1:
            self.fail("Branch must contain exactly one linked chain", start)
        self.pending[-1].extend(inner)
        self.pos += 1

    def _residue(self):
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] in _NAME_CHARS:
            self.pos += 1
        name = self.text[start:self.pos]
        if name not in self.vocabulary:
            raise UnknownMonosaccharide(name, self.text, start)

        index = len(self.nodes)
        for child, linkage in self.pending[-1]:
            self.edges.append((index, child, linkage))
        self.pending[-1] = []

        if self.pos < len(self.text) and self.text[self.pos] == "(":
            linkage = self._linkage()
            self.nodes.append(MonosaccharideNode(name=name, anomeric_config=linkage.anomeric_config))
            self.pending[-1].append((index, linkage))
        else:
            self.nodes.append(MonosaccharideNode(name=name))
            self.last_unlinked = index

    def _linkage(self) -> Linkage:
        start = self.pos
        end = self.text.find(")", start)
        if end < 0:
            self.fail("Unclosed linkage", start)
        body = self.text[start + 1:end]
        anomer = Anomer.UNSPECIFIED
        if body and body[0] in ANOMER_SYMBOLS:
            anomer = ANOMER_SYMBOLS[body[0]]
            body = body[1:]
        donor, sep, acceptor = body.partition("-")
        if not sep or not donor.isdigit() or not acceptor.isdigit():
            self.fail(f"Malformed linkage '{self.text[start:end + 1]}'", start)
        donor_pos, acceptor_pos = int(donor), int(acceptor)
        if not (1 <= donor_pos <= 9 and 1 <= acceptor_pos <= 9):
            self.fail(f"Linkage position out of range in '{self.text[start:end + 1]}'", start)
        if anomer is Anomer.UNSPECIFIED:
            self.warnings.append(f"unspecified anomeric configuration at offset {start}")
        self.pos = end + 1
        return Linkage(anomeric_config=anomer, donor_position=donor_pos, acceptor_position=acceptor_pos)


def parse_iupac(text: str, vocabulary: Optional[Collection[str]] = None) -> GlycanTree:
    """Parse IUPAC-condensed text; the rightmost residue becomes the root."""
    if not text or not text.strip():
        raise GlycanSyntaxError("Empty glycan string", text or "", 0)
    tree = _GlycanParser(text.strip(), vocabulary or default_vocabulary()).parse()
    if tree.warnings:
        logger.debug("Parsed %s with %d warning(s)", text, len(tree.warnings))
    return tree


def _subtree_strings(tree: GlycanTree) -> Dict[int, str]:
    children: Dict[int, List[Tuple[int, Linkage]]] = {i: [] for i in range(len(tree.nodes))}
    for p, c, l in tree.edges:
        children[p].append((c, l))

    memo: Dict[int, str] = {}

    def render(index: int) -> str:
        if index in memo:
            return memo[index]
        parts = []
        for position, (child, linkage) in enumerate(_sorted_children(children[index], render)):
            chunk = f"{render(child)}({linkage.token()})"
            parts.append(chunk if position == 0 else f"[{chunk}]")
        memo[index] = "".join(parts) + tree.nodes[index].name
        return memo[index]

    for i in range(len(tree.nodes)):
        render(i)
    return memo


def _sorted_children(children, render):
    return sorted(children, key=lambda cl: (cl[1].acceptor_position, render(cl[0])))


def canonical_order(tree: GlycanTree) -> List[int]:
    """Node indices in the order write_iupac emits them (children before parents)."""
    strings = _subtree_strings(tree)
    children: Dict[int, List[Tuple[int, Linkage]]] = {i: [] for i in range(len(tree.nodes))}
    for p, c, l in tree.edges:
        children[p].append((c, l))

    order: List[int] = []
    stack = [(tree.root_index, False)]
    while stack:
        index, expanded = stack.pop()
        if expanded:
            order.append(index)
            continue
        stack.append((index, True))
        ordered = sorted(children[index], key=lambda cl: (cl[1].acceptor_position, strings[cl[0]]))
        for child, _ in reversed(ordered):
            stack.append((child, False))
    return order


def write_iupac(tree: GlycanTree) -> str:
    """Deterministic IUPAC-condensed serialization."""
    if not tree.nodes:
        return ""
    return _subtree_strings(tree)[tree.root_index]
