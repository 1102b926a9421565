"""
Monosaccharide template library backed by the packaged JSON data file.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional

from glycocc.config import settings
from glycocc.errors import MissingTemplate, TemplateError
from glycocc.models.molecule import Atom, Bond, BondOrder, MolecularGraph, MonomerTemplate
from glycocc.services.chemistry import components, implicit_hydrogens

logger = logging.getLogger(__name__)

TEMPLATE_FORMAT = "glycocc-templates"


class TemplateLibrary:
    """Lazily loaded, read-only collection of MonomerTemplates."""

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path is not None else settings.template_path
        self._templates: Optional[Dict[str, MonomerTemplate]] = None
        self.version = ""

    def _load(self) -> Dict[str, MonomerTemplate]:
        if self._templates is not None:
            return self._templates
        try:
            with open(self.path, "r", encoding="utf-8") as f:
                document = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise TemplateError(f"Cannot read template library {self.path}: {e}") from e
        if document.get("format") != TEMPLATE_FORMAT:
            raise TemplateError(f"{self.path} is not a {TEMPLATE_FORMAT} file")
        templates = {}
        for record in document.get("templates", []):
            template = _build_template(record)
            templates[template.name] = template
        self.version = str(document.get("version", ""))
        logger.debug("Loaded %d templates (version %s) from %s", len(templates), self.version, self.path)
        self._templates = templates
        return templates

    def names(self) -> List[str]:
        return sorted(self._load())

    def get(self, name: str) -> MonomerTemplate:
        templates = self._load()
        if name not in templates:
            raise MissingTemplate(f"No template for monosaccharide '{name}'")
        return templates[name]

    def __contains__(self, name: str) -> bool:
        return name in self._load()

    def describe(self) -> List[Dict]:
        """Name, class, anomeric position, heavy-atom counts and formula per template."""
        rows = []
        for name in self.names():
            t = self.get(name)
            rows.append({
                "name": name,
                "class": t.monomer_class,
                "anomeric_position": t.anomeric_position,
                "atoms": t.graph.n_atoms,
                "bonds": t.graph.n_bonds,
                "positions": sorted(t.position_oxygens),
                "formula": t.formula(),
            })
        return rows


def _build_template(record: Dict) -> MonomerTemplate:
    name = record.get("name", "?")
    try:
        labels = [label for label, _ in record["atoms"]]
        elements = [element for _, element in record["atoms"]]
        index = {label: i for i, label in enumerate(labels)}
        if len(index) != len(labels):
            raise TemplateError(f"{name}: duplicate atom labels")
        bonds = [Bond(index[a], index[b], BondOrder.from_int(order)) for a, b, order in record["bonds"]]
        anomeric_position = int(record["anomeric_position"])
        position_labels = {int(pos): label for pos, label in record["position_oxygens"].items()}
    except (KeyError, ValueError, TypeError) as e:
        raise TemplateError(f"{name}: malformed template record ({e})") from e

    orders: List[List[BondOrder]] = [[] for _ in labels]
    for bond in bonds:
        orders[bond.i].append(bond.order)
        orders[bond.j].append(bond.order)
    atoms = [Atom(element=e, hydrogens=implicit_hydrogens(e, orders[i])) for i, e in enumerate(elements)]
    graph = MolecularGraph(atoms=atoms, bonds=bonds, labels=labels)

    if len(components(graph)) != 1:
        raise TemplateError(f"{name}: template graph is not connected")

    bonded = {i: set() for i in range(len(labels))}
    for bond in bonds:
        bonded[bond.i].add(bond.j)
        bonded[bond.j].add(bond.i)

    position_oxygens: Dict[int, int] = {}
    position_carbons: Dict[int, int] = {}
    for pos, label in position_labels.items():
        carbon_label = f"C{pos}"
        if label not in index or carbon_label not in index:
            raise TemplateError(f"{name}: position {pos} references unknown atoms")
        oxygen, carbon = index[label], index[carbon_label]
        if elements[oxygen] != "O" or oxygen not in bonded[carbon]:
            raise TemplateError(f"{name}: {label} is not a hydroxyl oxygen on {carbon_label}")
        position_oxygens[pos] = oxygen
        position_carbons[pos] = carbon
    if anomeric_position not in position_oxygens:
        raise TemplateError(f"{name}: anomeric position {anomeric_position} has no oxygen")

    return MonomerTemplate(
        name=name,
        graph=graph,
        anomeric_position=anomeric_position,
        anomeric_oxygen=position_oxygens[anomeric_position],
        position_oxygens=position_oxygens,
        position_carbons=position_carbons,
        monomer_class=record.get("class", ""),
        stereo=dict(record.get("stereo", {})),
    )


template_library = TemplateLibrary()
