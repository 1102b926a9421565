"""
Glycan topology models: monosaccharide nodes, linkages and rooted trees.
"""
from enum import Enum
from typing import Dict, List, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Anomer(str, Enum):
    ALPHA = "alpha"
    BETA = "beta"
    UNSPECIFIED = "unspecified"

    @property
    def symbol(self) -> str:
        return {"alpha": "a", "beta": "b", "unspecified": "?"}[self.value]


class Linkage(BaseModel):
    model_config = ConfigDict(frozen=True)

    anomeric_config: Anomer = Anomer.UNSPECIFIED
    donor_position: int = Field(ge=1, le=9)
    acceptor_position: int = Field(ge=1, le=9)

    def token(self) -> str:
        """The linkage as written inside IUPAC parentheses, e.g. 'b1-4'."""
        return f"{self.anomeric_config.symbol}{self.donor_position}-{self.acceptor_position}"


class MonosaccharideNode(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    anomeric_config: Anomer = Anomer.UNSPECIFIED


class GlycanTree(BaseModel):
    """Rooted tree of monosaccharides; the root is the reducing end."""

    model_config = ConfigDict(frozen=True)

    nodes: List[MonosaccharideNode]
    edges: List[Tuple[int, int, Linkage]] = Field(default_factory=list)
    root_index: int = 0
    warnings: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def _check_tree(self) -> "GlycanTree":
        n = len(self.nodes)
        if n == 0:
            if self.edges:
                raise ValueError("edges given for an empty tree")
            return self
        if not 0 <= self.root_index < n:
            raise ValueError(f"root_index {self.root_index} out of range")
        parents: Dict[int, int] = {}
        for parent, child, _ in self.edges:
            if not (0 <= parent < n and 0 <= child < n):
                raise ValueError(f"edge ({parent}, {child}) references a missing node")
            if parent == child:
                raise ValueError(f"self-edge on node {parent}")
            if child in parents:
                raise ValueError(f"node {child} has more than one parent")
            parents[child] = parent
        if self.root_index in parents:
            raise ValueError("the root cannot have a parent")
        if len(parents) != n - 1:
            raise ValueError("tree is not connected")
        # every node must reach the root
        for start in range(n):
            seen = set()
            node = start
            while node != self.root_index:
                if node in seen:
                    raise ValueError("cycle in glycan tree")
                seen.add(node)
                node = parents[node]
        return self

    def _structure(self) -> tuple:
        return tuple(self.nodes), tuple(self.edges), self.root_index

    # warnings carry source offsets, so they stay out of equality
    def __eq__(self, other) -> bool:
        if not isinstance(other, GlycanTree):
            return NotImplemented
        return self._structure() == other._structure()

    def __hash__(self) -> int:
        return hash(self._structure())

    @property
    def unspecified_anomers(self) -> bool:
        return any(l.anomeric_config is Anomer.UNSPECIFIED for _, _, l in self.edges)

    def children(self, index: int) -> List[Tuple[int, Linkage]]:
        return [(c, l) for p, c, l in self.edges if p == index]

    def normalized(self) -> "GlycanTree":
        """Reorder nodes into the canonical depth-first order used for serialization."""
        from glycocc.services.glycan_grammar import canonical_order

        if not self.nodes:
            return self
        order = canonical_order(self)
        new_index = {old: new for new, old in enumerate(order)}
        nodes = [self.nodes[old] for old in order]
        edges = sorted(
            ((new_index[p], new_index[c], l) for p, c, l in self.edges),
            key=lambda e: e[1],
        )
        return GlycanTree(
            nodes=nodes, edges=edges, root_index=new_index[self.root_index],
            warnings=self.warnings,
        )
