"""Gerichtete Indexmenge aus (Pseudometrik, Schlauchradius), Bindungen, Kegel und Export."""
import itertools
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx

from app.utils.ae_norm import distance_to_image, norm
from app.utils.errors import LimitExceededError, StructureError, UnverifiedError
from app.utils.gspace_core import (
    EquivariantMap,
    FiniteGSpace,
    FiniteMetric,
    PseudometricFamily,
    ValidationReport,
    pseudometric_join,
    pseudometric_leq,
)
from app.utils.instance import space_to_document
from app.utils.molecule import BasedSpace, Molecule, act, embed, sample_molecules
from app.utils.quotient import (
    BondMap,
    QuotientMap,
    bond,
    compose_bonds,
    factorize,
    linearize,
    quotient,
    verify_bond,
    verify_factorization,
    verify_quotient,
)
from app.utils.rationals import fmt_rational

logger = logging.getLogger(__name__)

DEFAULT_JOIN_CLOSURE_CAP = 64
DEFAULT_SAMPLE_COUNT = 64


def radius_leq(r: Optional[Fraction], r2: Optional[Fraction]) -> bool:
    """Ordnung auf Radien; None steht für unendlich"""
    if r2 is None:
        return True
    if r is None:
        return False
    return r <= r2


@dataclass(frozen=True)
class IndexEntry:
    mu: str
    radius: Optional[Fraction] = None

    @property
    def label(self) -> str:
        return f"({self.mu},{fmt_rational(self.radius)})"


@dataclass
class InverseSystem:
    space: FiniteGSpace
    family: PseudometricFamily
    entries: List[IndexEntry]
    quotients: Dict[str, QuotientMap]
    based: Dict[str, BasedSpace]
    bonds: Dict[Tuple[str, str], BondMap]
    cones: Dict[IndexEntry, Dict[str, Molecule]]
    samples: int = DEFAULT_SAMPLE_COUNT
    seed: int = 0
    report: Optional[ValidationReport] = field(default=None, compare=False)

    @property
    def verified(self) -> bool:
        return self.report is not None and self.report.ok

    def member_leq(self, a: str, b: str) -> bool:
        return pseudometric_leq(self.family.members[a], self.family.members[b])

    def leq(self, a: IndexEntry, b: IndexEntry) -> bool:
        """(mu, r) <= (mu', r') genau dann, wenn mu <= mu' und r' <= r"""
        return self.member_leq(a.mu, b.mu) and radius_leq(b.radius, a.radius)

    def entry(self, mu: str, radius: Optional[Fraction] = None) -> IndexEntry:
        wanted = IndexEntry(self.family.resolve(mu), radius)
        if wanted not in self.entries:
            raise StructureError(f"Kein Eintrag {wanted.label}", field="entry", axiom="membership")
        return wanted


def close_under_join(family: PseudometricFamily, cap: int = DEFAULT_JOIN_CLOSURE_CAP) -> PseudometricFamily:
    """Familie paarweise unter Suprema abschließen"""
    closed = family.copy()
    changed = True
    while changed:
        changed = False
        for a, b in itertools.combinations(list(closed.members), 2):
            joined = pseudometric_join(closed.members[a], closed.members[b])
            if any(joined == other for other in closed.members.values()):
                continue
            closed.add(f"join({a},{b})", joined)
            changed = True
            if len(closed.members) > cap:
                logger.error(f"Supremumsabschluss überschreitet die Obergrenze {cap}")
                raise LimitExceededError(f"Abschluss unter Suprema überschreitet {cap} Pseudometriken",
                                         cap=cap, field="pseudometrics")
    added = len(closed.members) - len(family.members)
    if added:
        logger.info(f"{added} Suprema zur Familie hinzugefügt")
    return closed


def build_system(space: FiniteGSpace, family: PseudometricFamily, radii: Sequence[Any],
                 join_cap: int = DEFAULT_JOIN_CLOSURE_CAP, samples: int = DEFAULT_SAMPLE_COUNT,
                 seed: int = 0) -> InverseSystem:
    """Inverses System {X_lambda, p_{lambda lambda'}} aufbauen und verifizieren"""
    if not family.members:
        raise StructureError("Leere Familie von Pseudometriken", field="pseudometrics", axiom="nonempty")
    radii = sorted({Fraction(r) for r in radii})
    if any(r <= 0 for r in radii):
        raise StructureError("Radien müssen positiv sein", field="radii", axiom="positive")

    family = close_under_join(family, join_cap)
    names = family.names()
    entries = [IndexEntry(name, r) for name in names for r in list(radii) + [None]]

    quotients = {name: quotient(space, family.members[name])[1] for name in names}
    based = {name: BasedSpace.adjoined(quotients[name].target.gspace) for name in names}
    bonds = {}
    for a in names:
        for b in names:
            if pseudometric_leq(family.members[a], family.members[b]):
                bonds[(a, b)] = bond(space, family.members[a], family.members[b], quotients[a], quotients[b])
    cones = {}
    for entry in entries:
        p = quotients[entry.mu]
        cones[entry] = {x: embed(p(x), based[entry.mu]) for x in space.points}

    system = InverseSystem(space, family, entries, quotients, based, bonds, cones, samples, seed)
    system.report = verify_system(system)
    logger.info(f"System mit {len(entries)} Einträgen und {len(bonds)} Bindungen aufgebaut, "
                f"{len(system.report.violations)} Verstöße")
    return system


def _check_order(system: InverseSystem, report: ValidationReport) -> None:
    entries = system.entries
    for a in entries:
        if not system.leq(a, a):
            report.add("order-reflexive", (a.label,))
    for a, b in itertools.permutations(entries, 2):
        if system.leq(a, b) and system.leq(b, a):
            report.add("order-antisymmetric", (a.label, b.label))
    for a, b, c in itertools.permutations(entries, 3):
        if system.leq(a, b) and system.leq(b, c) and not system.leq(a, c):
            report.add("order-transitive", (a.label, b.label, c.label))
    for a, b in itertools.combinations(entries, 2):
        if not any(system.leq(a, c) and system.leq(b, c) for c in entries):
            report.add("directedness", (a.label, b.label))


def _check_linearized(system: InverseSystem, report: ValidationReport) -> None:
    """Stichprobenprüfungen der linearen Fortsetzungen p̄_{mu mu'}"""
    names = system.family.names()
    strict = [(a, b) for (a, b) in system.bonds if a != b]
    group = system.space.group
    acting = group.generators or group.elements
    for k, (a, b) in enumerate(strict):
        src, tgt = system.based[b], system.based[a]
        p_bar = linearize(system.bonds[(a, b)], src, tgt)
        for s, m in enumerate(sample_molecules(src.points, system.samples, system.seed + k)):
            image = p_bar(m)
            witness = (a, b, f"m{s}")
            if distance_to_image(image, tgt)[0] > distance_to_image(m, src)[0]:
                report.add("tube-soundness", witness)
            if norm(image, tgt).value > norm(m, src).value:
                report.add("norm-contraction", witness)
            for g in acting:
                if p_bar(act(g, m, src)) != act(g, image, tgt):
                    report.add("linearized-equivariance", witness + (g,))
        for c in names:
            if c in (a, b) or (b, c) not in system.bonds:
                continue
            outer = p_bar
            inner = linearize(system.bonds[(b, c)], system.based[c], src)
            direct = linearize(system.bonds[(a, c)], system.based[c], tgt)
            for s, m in enumerate(sample_molecules(system.based[c].points, system.samples, system.seed + k)):
                if outer(inner(m)) != direct(m):
                    report.add("linearized-coherence-ii", (a, b, c, f"m{s}"))


def verify_system(system: InverseSystem) -> ValidationReport:
    """Ordnung, Gerichtetheit, Kohärenz (i)/(ii), 1-Lipschitz und Äquivarianz prüfen"""
    report = ValidationReport()
    _check_order(system, report)
    names = system.family.names()

    for name in names:
        p = system.quotients[name]
        report.extend(verify_quotient(system.family.members[name], p.target, p), f"quotient[{name}].")

    for a in names:
        for b in names:
            if not system.member_leq(a, b):
                continue
            if (a, b) not in system.bonds:
                report.add("bond-missing", (a, b))
                continue
            report.extend(verify_bond(system.bonds[(a, b)], system.quotients[a], system.quotients[b]),
                          f"bond[{a},{b}].")

    for a, b, c in itertools.product(names, repeat=3):
        if (a, b) in system.bonds and (b, c) in system.bonds and (a, c) in system.bonds:
            composed = compose_bonds(system.bonds[(a, b)], system.bonds[(b, c)])
            if composed.assignment != system.bonds[(a, c)].assignment:
                report.add("coherence-ii", (a, b, c))

    group = system.space.group
    for lower in system.entries:
        cone = system.cones[lower]
        based = system.based[lower.mu]
        for g in group.elements:
            for x in system.space.points:
                if cone[system.space.action.image(g, x)] != act(g, cone[x], based):
                    report.add("cone-equivariance", (lower.label, g, x))
        for upper in system.entries:
            if not system.leq(lower, upper) or (lower.mu, upper.mu) not in system.bonds:
                continue
            p_bar = linearize(system.bonds[(lower.mu, upper.mu)], system.based[upper.mu], based)
            for x in system.space.points:
                if p_bar(system.cones[upper][x]) != cone[x]:
                    report.add("coherence-i", (lower.label, upper.label, x))

    _check_linearized(system, report)
    return report


def tube_member(system: InverseSystem, entry: IndexEntry, m: Molecule) -> bool:
    """m liegt im offenen Schlauch vom Radius r um i(X_mu); für r = unendlich immer wahr"""
    if entry.radius is None:
        return True
    value, _ = distance_to_image(m, system.based[entry.mu])
    return value < entry.radius


def absorbs(system: InverseSystem, f: EquivariantMap,
            rho_y: Optional[FiniteMetric] = None) -> Tuple[Optional[IndexEntry], ValidationReport]:
    """Prüfen, ob (mu_f, unendlich) ein Eintrag ist und phi ∘ p_mu = f gilt"""
    fac = factorize(f, rho_y)
    report = verify_factorization(f, fac, rho_y)
    name = next((n for n, mu in system.family.members.items() if mu == fac.mu), None)
    entry = IndexEntry(name, None) if name is not None else None
    if entry is None or entry not in system.entries:
        report.add("absorbs", (), "Zurückgezogene Pseudometrik ist kein Familienmitglied")
        return None, report
    return entry, report


def _order_graph(system: InverseSystem) -> nx.DiGraph:
    """Kante lambda' -> lambda für lambda < lambda' (Richtung der Bindungen)"""
    graph = nx.DiGraph()
    graph.add_nodes_from(range(len(system.entries)))
    for i, lower in enumerate(system.entries):
        for j, upper in enumerate(system.entries):
            if i != j and system.leq(lower, upper):
                graph.add_edge(j, i)
    return graph


def export_system(system: InverseSystem, fmt: str = "dot") -> str:
    """Verifiziertes System als DOT (Überdeckungskanten) oder JSON (volle Relation)"""
    if not system.verified:
        raise UnverifiedError("Nur verifizierte Systeme werden exportiert", field="system", axiom="verified")
    graph = _order_graph(system)
    covering = sorted(nx.transitive_reduction(graph).edges())

    if fmt == "dot":
        lines = ["digraph inverse_system {"]
        for i, entry in enumerate(system.entries):
            lines.append(f"    n{i} [label={json.dumps(entry.label)}];")
        for j, i in covering:
            lines.append(f"    n{j} -> n{i};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    if fmt == "json":
        labels = [e.label for e in system.entries]
        points = system.space.points
        document = {
            "entries": [{"id": e.label, "mu": e.mu, "radius": fmt_rational(e.radius)} for e in system.entries],
            "order": [[labels[i], labels[j]] for j, i in sorted(graph.edges())],
            "covering": [[labels[i], labels[j]] for j, i in covering],
            "pseudometrics": {n: mu.to_rows() for n, mu in system.family.members.items()},
            "aliases": dict(system.family.aliases),
            "quotients": {n: dict(p.target.to_dict(), assignment=dict(p.assignment),
                                  space=space_to_document(p.target.gspace))
                          for n, p in system.quotients.items()},
            "bonds": [{"lower": a, "upper": b, "assignment": bm.to_dict()}
                      for (a, b), bm in system.bonds.items()],
            "cones": {e.label: {x: system.cones[e][x].to_dict(system.based[e.mu].points) for x in points}
                      for e in system.entries},
            "verification": system.report.to_dict(),
        }
        return json.dumps(document, indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    raise StructureError(f"Unbekanntes Exportformat {fmt!r}", field="format", axiom="format")
