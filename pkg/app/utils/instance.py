import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional

from app.utils.errors import StructureError
from app.utils.gspace_core import (
    EquivariantMap,
    FiniteGroup,
    FiniteGSpace,
    FiniteMetric,
    GroupAction,
    PseudometricFamily,
    close_generators,
)
from app.utils.molecule import ADJOINED, INTERNAL, BasedSpace, Molecule
from app.utils.rationals import parse_rational

logger = logging.getLogger(__name__)

SELF = "self"


@dataclass
class Instance:
    """Eingelesenes Instanzdokument; Axiome werden erst von den Validatoren geprüft"""
    space: FiniteGSpace
    pseudometrics: Dict[str, FiniteMetric] = field(default_factory=dict)
    spaces: Dict[str, FiniteGSpace] = field(default_factory=dict)
    maps: Dict[str, EquivariantMap] = field(default_factory=dict)
    molecules: Dict[str, Molecule] = field(default_factory=dict)
    basepoint: Optional[str] = None
    star_distance: Optional[Fraction] = None

    def family(self) -> PseudometricFamily:
        family = PseudometricFamily(self.space)
        for name, mu in self.pseudometrics.items():
            family.add(name, mu)
        return family

    def map(self, name: str) -> EquivariantMap:
        try:
            return self.maps[name]
        except KeyError:
            raise StructureError(f"Unbekannte Abbildung: {name!r}", field="map", axiom="membership")

    def molecule(self, name: str, based: BasedSpace) -> Molecule:
        try:
            m = self.molecules[name]
        except KeyError:
            raise StructureError(f"Unbekanntes Molekül: {name!r}", field="molecule", axiom="membership")
        return Molecule.from_mapping(m.coeffs, based, field_name=f"molecules.{name}")

    def based(self, mode: Optional[str] = None, basepoint: Optional[str] = None,
              allow_nonfixed: bool = False) -> BasedSpace:
        """Basispunktwahl: Flags vor Dokument; Standard ist der adjungierte Punkt ★"""
        basepoint = basepoint or self.basepoint
        mode = mode or (INTERNAL if basepoint else ADJOINED)
        if mode == ADJOINED:
            return BasedSpace.adjoined(self.space, self.star_distance)
        if mode == INTERNAL:
            if not basepoint:
                raise StructureError("Interner Modus verlangt einen Basispunkt", field="basepoint", axiom="basepoint")
            return BasedSpace.internal(self.space, basepoint, allow_nonfixed=allow_nonfixed)
        raise StructureError(f"Unbekannter Basispunktmodus {mode!r}", field="mode", axiom="mode")


def _require(doc: Dict[str, Any], key: str, kind, where: str):
    if key not in doc:
        raise StructureError(f"Feld {key!r} fehlt", field=f"{where}{key}", axiom="required")
    value = doc[key]
    if not isinstance(value, kind):
        raise StructureError(f"Feld {key!r} hat den falschen Typ", field=f"{where}{key}", axiom="type")
    return value


def _section(doc: Dict[str, Any], key: str, kind=dict) -> Dict[str, Any]:
    value = doc.get(key) or {}
    if not isinstance(value, dict) or any(not isinstance(v, kind) for v in value.values()):
        raise StructureError(f"Abschnitt {key!r} muss ein Objekt benannter Einträge sein", field=key, axiom="type")
    return value


def _require_ids(values: Any, where: str) -> None:
    if any(not isinstance(v, str) for v in values):
        raise StructureError("Bezeichner müssen Zeichenketten sein", field=where, axiom="type")


def _parse_metric(points: List[str], rows: Any, where: str) -> FiniteMetric:
    if not isinstance(rows, list) or any(not isinstance(r, list) for r in rows):
        raise StructureError("Matrix muss eine Liste von Zeilen sein", field=where, axiom="type")
    parsed = [[parse_rational(v, f"{where}[{i}][{j}]") for j, v in enumerate(row)]
              for i, row in enumerate(rows)]
    return FiniteMetric.from_rows(points, parsed, field_name=where)


def _parse_points(doc: Dict[str, Any], where: str) -> List[str]:
    points = _require(doc, "points", list, where)
    _require_ids(points, f"{where}points")
    if not points:
        raise StructureError("Leere Punktmenge ist entartet", field=f"{where}points", axiom="nonempty")
    return points


def _parse_group(doc: Dict[str, Any], metric: FiniteMetric, cap: int):
    """Gruppe als Tabelle oder per Erzeugern; gibt (Gruppe, Permutationen oder None) zurück"""
    section = doc.get("group")
    if section is None:
        return FiniteGroup.from_table(["e"], [["e"]]), None
    if not isinstance(section, dict):
        raise StructureError("Gruppe muss ein Objekt sein", field="group", axiom="type")
    if "generators" in section:
        if "action" in doc:
            raise StructureError("Erzeugerdarstellung legt die Wirkung fest; 'action' ist unzulässig",
                                 field="action", axiom="conflict")
        gens = section["generators"]
        if not isinstance(gens, list):
            raise StructureError("Erzeuger müssen eine Liste sein", field="group.generators", axiom="type")
        return close_generators(gens, len(metric), cap)
    if "table" in section:
        table = section["table"]
        if not isinstance(table, dict):
            raise StructureError("Tabelle muss ein Objekt sein", field="group.table", axiom="type")
        elements = _require(table, "elements", list, "group.table.")
        rows = _require(table, "rows", list, "group.table.")
        _require_ids(elements, "group.table.elements")
        for i, row in enumerate(rows):
            if not isinstance(row, list):
                raise StructureError("Tabellenzeile muss eine Liste sein", field=f"group.table.rows[{i}]", axiom="type")
            _require_ids(row, f"group.table.rows[{i}]")
        return FiniteGroup.from_table(elements, rows), None
    raise StructureError("Gruppe braucht 'table' oder 'generators'", field="group", axiom="required")


def _parse_action(section: Any, group: FiniteGroup, metric: FiniteMetric, where: str) -> GroupAction:
    if section is None:
        return GroupAction.trivial(group, metric)
    if not isinstance(section, dict):
        raise StructureError("Wirkung muss ein Objekt sein", field=where, axiom="type")
    for g, perm in section.items():
        if not isinstance(perm, list):
            raise StructureError("Permutation muss eine Liste sein", field=f"{where}.{g}", axiom="type")
    return GroupAction.from_assignment(group, metric, section)


def parse_instance(doc: Any, group_order_cap: int = 10000) -> Instance:
    """Instanzdokument in Kernobjekte übersetzen (nur strukturelle Prüfungen)"""
    if not isinstance(doc, dict):
        raise StructureError("Dokument muss ein JSON-Objekt sein", field="$", axiom="type")
    points = _parse_points(doc, "")
    metric = _parse_metric(points, _require(doc, "metric", list, ""), "metric")
    group, perms = _parse_group(doc, metric, group_order_cap)
    if perms is not None:
        action = GroupAction(group, metric, perms)
    else:
        action = _parse_action(doc.get("action"), group, metric, "action")
    space = FiniteGSpace(metric, action)
    instance = Instance(space)

    for name, rows in _section(doc, "pseudometrics", list).items():
        instance.pseudometrics[name] = _parse_metric(points, rows, f"pseudometrics.{name}")

    instance.spaces[SELF] = space
    for name, section in _section(doc, "spaces").items():
        if name == SELF:
            raise StructureError("Raumname 'self' ist reserviert", field=f"spaces.{name}", axiom="distinct")
        where = f"spaces.{name}."
        target_points = _parse_points(section, where)
        target_metric = _parse_metric(target_points, _require(section, "metric", list, where), f"{where}metric")
        target_action = _parse_action(section.get("action"), group, target_metric, f"{where}action")
        instance.spaces[name] = FiniteGSpace(target_metric, target_action)

    for name, section in _section(doc, "maps").items():
        where = f"maps.{name}."
        target = section.get("target", SELF)
        _require_ids([target], f"{where}target")
        if target not in instance.spaces:
            raise StructureError(f"Unbekannter Zielraum {target!r}", field=f"{where}target", axiom="membership")
        image = _require(section, "image", dict, where)
        _require_ids(image.values(), f"{where}image")
        instance.maps[name] = EquivariantMap.from_mapping(space, instance.spaces[target], image, f"maps.{name}")

    for name, coeffs in _section(doc, "molecules").items():
        if not isinstance(coeffs, dict):
            raise StructureError("Molekül muss ein Objekt sein", field=f"molecules.{name}", axiom="type")
        parsed = {x: parse_rational(c, f"molecules.{name}.{x}") for x, c in coeffs.items()}
        instance.molecules[name] = Molecule.from_mapping(parsed, field_name=f"molecules.{name}")

    basepoint = doc.get("basepoint")
    if basepoint is not None:
        _require_ids([basepoint], "basepoint")
        metric.index(basepoint)
        instance.basepoint = basepoint
    if doc.get("star_distance") is not None:
        instance.star_distance = parse_rational(doc["star_distance"], "star_distance")
    logger.info(f"Instanz mit {len(points)} Punkten, Gruppenordnung {len(group)}, "
                f"{len(instance.pseudometrics)} Pseudometriken eingelesen")
    return instance


def load_instance(path: str, group_order_cap: int = 10000) -> Instance:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
    except json.JSONDecodeError as e:
        logger.error(f"JSON-Fehler in {path}: {e.msg}")
        raise StructureError(f"JSON-Fehler: {e.msg} (Zeile {e.lineno}, Spalte {e.colno})",
                             field=f"$:{e.lineno}:{e.colno}", axiom="json")
    except OSError as e:
        logger.error(f"Datei {path} nicht lesbar: {str(e)}")
        raise StructureError(f"Datei nicht lesbar: {path}", field="path", axiom="readable")
    return parse_instance(doc, group_order_cap)


def space_to_document(space: FiniteGSpace) -> Dict[str, Any]:
    """G-Raum als wieder einlesbares Instanzdokument (Gruppe in Tabellenform)"""
    return {
        "points": list(space.points),
        "metric": space.metric.to_rows(),
        "group": space.group.to_dict(),
        "action": space.action.to_dict(),
    }
