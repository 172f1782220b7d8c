"""Endliche metrische G-Räume: Metriken, Gruppen, Wirkungen, invariante Pseudometriken.

Alle Einträge sind exakte rationale Zahlen (``fractions.Fraction``); Gleichheit
ist immer exakt, nie toleranzbasiert.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

from app.utils.errors import LimitExceededError, StructureError
from app.utils.rationals import fmt_rational

logger = logging.getLogger(__name__)

METRIC = "metric"
PSEUDOMETRIC = "pseudometric"


@dataclass(frozen=True)
class Violation:
    axiom: str
    witness: Tuple[str, ...]
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"axiom": self.axiom, "witness": list(self.witness), "detail": self.detail}


@dataclass
class ValidationReport:
    """Liste verletzter Axiome mit Zeugen; ein leerer Bericht bedeutet gültig"""
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, axiom: str, witness: Sequence[str], detail: str = "") -> None:
        self.violations.append(Violation(axiom, tuple(witness), detail))

    def extend(self, other: "ValidationReport", prefix: str = "") -> "ValidationReport":
        for v in other.violations:
            axiom = f"{prefix}{v.axiom}" if prefix else v.axiom
            self.violations.append(Violation(axiom, v.witness, v.detail))
        return self

    def axioms(self) -> List[str]:
        return [v.axiom for v in self.violations]

    def to_dict(self) -> Dict[str, Any]:
        return {"valid": self.ok, "violations": [v.to_dict() for v in self.violations]}


@dataclass(frozen=True)
class FiniteMetric:
    points: Tuple[str, ...]
    dist: Tuple[Tuple[Fraction, ...], ...]

    @classmethod
    def from_rows(cls, points: Sequence[str], rows: Sequence[Sequence[Any]],
                  field_name: str = "metric") -> "FiniteMetric":
        """Matrix strukturell prüfen (nichtleer, quadratisch, eindeutige Punkte)"""
        points = tuple(points)
        if not points:
            raise StructureError("Leere Punktmenge ist entartet", field="points", axiom="nonempty")
        if len(set(points)) != len(points):
            raise StructureError("Punktbezeichner sind nicht eindeutig", field="points", axiom="distinct")
        if len(rows) != len(points):
            raise StructureError(
                f"Matrix hat {len(rows)} Zeilen, erwartet {len(points)}",
                field=field_name, axiom="square")
        dist = []
        for i, row in enumerate(rows):
            if len(row) != len(points):
                raise StructureError(
                    f"Zeile {i} hat {len(row)} Einträge, erwartet {len(points)}",
                    field=f"{field_name}[{i}]", axiom="square")
            dist.append(tuple(Fraction(v) for v in row))
        return cls(points, tuple(dist))

    @classmethod
    def zero(cls, points: Sequence[str]) -> "FiniteMetric":
        n = len(points)
        return cls(tuple(points), tuple(tuple(Fraction(0) for _ in range(n)) for _ in range(n)))

    def __len__(self) -> int:
        return len(self.points)

    def index(self, x: str) -> int:
        try:
            return self._index[x]
        except KeyError:
            raise StructureError(f"Unbekannter Punkt: {x!r}", field="point", axiom="membership")

    @property
    def _index(self) -> Dict[str, int]:
        # Cache am eingefrorenen Objekt vorbei ablegen
        cache = self.__dict__.get("_index_cache")
        if cache is None:
            cache = {x: i for i, x in enumerate(self.points)}
            object.__setattr__(self, "_index_cache", cache)
        return cache

    def d(self, x: str, y: str) -> Fraction:
        return self.dist[self.index(x)][self.index(y)]

    def pairs(self) -> Iterator[Tuple[int, int]]:
        n = len(self.points)
        for i in range(n):
            for j in range(i + 1, n):
                yield i, j

    def diameter(self) -> Fraction:
        return max((self.dist[i][j] for i, j in self.pairs()), default=Fraction(0))

    def to_rows(self) -> List[List[str]]:
        return [[fmt_rational(v) for v in row] for row in self.dist]


@dataclass(frozen=True)
class FiniteGroup:
    elements: Tuple[str, ...]
    table: Dict[Tuple[str, str], str]
    identity: str
    inverse: Dict[str, str]
    generators: Tuple[str, ...] = ()

    @classmethod
    def from_table(cls, elements: Sequence[str], rows: Sequence[Sequence[str]]) -> "FiniteGroup":
        """Gruppe aus vollständiger Multiplikationstabelle aufbauen"""
        elements = tuple(elements)
        if not elements:
            raise StructureError("Gruppe ohne Elemente", field="group.table.elements", axiom="nonempty")
        if len(set(elements)) != len(elements):
            raise StructureError("Gruppenelemente sind nicht eindeutig",
                                 field="group.table.elements", axiom="distinct")
        if len(rows) != len(elements) or any(len(r) != len(elements) for r in rows):
            raise StructureError("Multiplikationstabelle ist nicht quadratisch",
                                 field="group.table.rows", axiom="square")
        known = set(elements)
        table = {}
        for i, a in enumerate(elements):
            for j, b in enumerate(elements):
                c = rows[i][j]
                if c not in known:
                    raise StructureError(f"Tabelleneintrag {c!r} ist kein Gruppenelement",
                                         field=f"group.table.rows[{i}][{j}]", axiom="closure")
                table[(a, b)] = c

        identity = next((e for e in elements
                         if all(table[(e, x)] == x and table[(x, e)] == x for x in elements)), None)
        if identity is None:
            raise StructureError("Tabelle besitzt kein neutrales Element",
                                 field="group.table.rows", axiom="identity")
        inverse = {}
        for a in elements:
            inv = next((b for b in elements
                        if table[(a, b)] == identity and table[(b, a)] == identity), None)
            if inv is None:
                raise StructureError(f"Element {a!r} besitzt kein Inverses",
                                     field="group.table.rows", axiom="inverse")
            inverse[a] = inv
        return cls(elements, table, identity, inverse)

    def __len__(self) -> int:
        return len(self.elements)

    def mul(self, a: str, b: str) -> str:
        try:
            return self.table[(a, b)]
        except KeyError:
            raise StructureError(f"Unbekanntes Gruppenelement in ({a!r}, {b!r})",
                                 field="group", axiom="membership")

    def inv(self, a: str) -> str:
        try:
            return self.inverse[a]
        except KeyError:
            raise StructureError(f"Unbekanntes Gruppenelement: {a!r}", field="group", axiom="membership")

    def check_element(self, g: str) -> str:
        if g not in self.inverse:
            raise StructureError(f"Unbekanntes Gruppenelement: {g!r}", field="group", axiom="membership")
        return g

    def to_dict(self) -> Dict[str, Any]:
        return {"table": {
            "elements": list(self.elements),
            "rows": [[self.table[(a, b)] for b in self.elements] for a in self.elements],
        }}


def validate_group(group: FiniteGroup) -> ValidationReport:
    """Assoziativität, neutrales Element und Inverse der Tabelle prüfen"""
    report = ValidationReport()
    els = group.elements
    e = group.identity
    for a in els:
        if group.mul(e, a) != a or group.mul(a, e) != a:
            report.add("identity", (a,), f"{e} ist kein beidseitiges Neutralelement für {a}")
        b = group.inv(a)
        if group.mul(a, b) != e or group.mul(b, a) != e:
            report.add("inverse", (a,), f"{b} ist kein beidseitiges Inverses von {a}")
    for a in els:
        for b in els:
            ab = group.mul(a, b)
            for c in els:
                if group.mul(ab, c) != group.mul(a, group.mul(b, c)):
                    report.add("associativity", (a, b, c))
    return report


def _check_permutation(perm: Sequence[int], n: int, field_name: str) -> Tuple[int, ...]:
    if not isinstance(perm, (list, tuple)):
        raise StructureError(f"Permutation muss eine Liste sein: {perm!r}", field=field_name, axiom="type")
    if len(perm) != n:
        raise StructureError(f"Permutation hat Länge {len(perm)}, erwartet {n}",
                             field=field_name, axiom="permutation")
    perm = tuple(perm)
    if any(isinstance(p, bool) or not isinstance(p, int) for p in perm) or sorted(perm) != list(range(n)):
        raise StructureError(f"Keine Permutation von 0..{n - 1}: {list(perm)}",
                             field=field_name, axiom="permutation")
    return perm


def compose(p: Tuple[int, ...], q: Tuple[int, ...]) -> Tuple[int, ...]:
    """(p∘q)(i) = p(q(i)), also erst q, dann p"""
    return tuple(p[i] for i in q)


def close_generators(generators: Sequence[Sequence[int]], n_points: int,
                     cap: int = 10000) -> Tuple[FiniteGroup, Dict[str, Tuple[int, ...]]]:
    """Abschluss von Permutationserzeugern per Breitensuche

    Elemente heißen ``e``, ``g1``, ``g2``, ... bzw. Worte wie ``g1*g2``.
    Gibt die Gruppe und die Zuordnung Element -> Permutation zurück.
    """
    gens = [_check_permutation(g, n_points, f"group.generators[{k}]") for k, g in enumerate(generators)]
    identity = tuple(range(n_points))

    names: Dict[Tuple[int, ...], str] = {identity: "e"}
    order: List[Tuple[int, ...]] = [identity]
    gen_names: List[str] = []
    for k, g in enumerate(gens):
        if g not in names:
            names[g] = f"g{k + 1}"
            order.append(g)
        if names[g] != "e" and names[g] not in gen_names:
            gen_names.append(names[g])

    queue = deque(order)
    while queue:
        h = queue.popleft()
        for g in gens:
            gh = compose(g, h)
            if gh in names:
                continue
            names[gh] = f"{names[g]}*{names[h]}"
            order.append(gh)
            queue.append(gh)
            if len(order) > cap:
                logger.error(f"Gruppenabschluss überschreitet die Obergrenze {cap}")
                raise LimitExceededError(f"Gruppenordnung überschreitet die Obergrenze {cap}",
                                         cap=cap, field="group.generators")

    elements = [names[p] for p in order]
    table = {(names[p], names[q]): names[compose(p, q)] for p in order for q in order}
    inverse = {}
    for p in order:
        inv = [0] * n_points
        for i, j in enumerate(p):
            inv[j] = i
        inverse[names[p]] = names[tuple(inv)]
    group = FiniteGroup(tuple(elements), table, "e", inverse, tuple(gen_names))
    logger.info(f"Gruppe mit {len(group)} Elementen aus {len(gens)} Erzeugern aufgebaut")
    return group, {names[p]: p for p in order}


@dataclass(frozen=True)
class GroupAction:
    group: FiniteGroup
    space: FiniteMetric
    perm: Dict[str, Tuple[int, ...]]

    @classmethod
    def from_assignment(cls, group: FiniteGroup, space: FiniteMetric,
                        assignment: Dict[str, Sequence[int]]) -> "GroupAction":
        perm = {}
        for g in group.elements:
            if g not in assignment:
                raise StructureError(f"Keine Permutation für Element {g!r}",
                                     field=f"action.{g}", axiom="permutation")
            perm[g] = _check_permutation(assignment[g], len(space), f"action.{g}")
        extra = set(assignment) - set(group.elements)
        if extra:
            raise StructureError(f"Permutationen für unbekannte Elemente: {sorted(extra)}",
                                 field="action", axiom="membership")
        return cls(group, space, perm)

    @classmethod
    def trivial(cls, group: FiniteGroup, space: FiniteMetric) -> "GroupAction":
        ident = tuple(range(len(space)))
        return cls(group, space, {g: ident for g in group.elements})

    def image_index(self, g: str, i: int) -> int:
        try:
            return self.perm[g][i]
        except KeyError:
            raise StructureError(f"Unbekanntes Gruppenelement: {g!r}", field="action", axiom="membership")

    def image(self, g: str, x: str) -> str:
        return self.space.points[self.image_index(g, self.space.index(x))]

    def acting_elements(self) -> Tuple[str, ...]:
        return self.group.generators or self.group.elements

    def to_dict(self) -> Dict[str, List[int]]:
        return {g: list(self.perm[g]) for g in self.group.elements}


def validate_action(action: GroupAction) -> ValidationReport:
    """Wirkungsaxiome g(hx)=(gh)x und ex=x prüfen"""
    n = len(action.space)
    for g in action.group.elements:
        _check_permutation(action.perm.get(g, ()), n, f"action.{g}")
    report = ValidationReport()
    group = action.group
    points = action.space.points
    e = action.perm[group.identity]
    for i in range(n):
        if e[i] != i:
            report.add("identity", (points[i],), f"e bildet {points[i]} auf {points[e[i]]} ab")
    for g in group.elements:
        for h in group.elements:
            gh = action.perm[group.mul(g, h)]
            pg, ph = action.perm[g], action.perm[h]
            for i in range(n):
                if pg[ph[i]] != gh[i]:
                    report.add("compatibility", (g, h, points[i]),
                               f"g(hx)={points[pg[ph[i]]]}, (gh)x={points[gh[i]]}")
    return report


def check_invariance(metric: FiniteMetric, action: GroupAction) -> ValidationReport:
    """Alle Tripel (g, x, x') mit m(gx, gx') != m(x, x') auflisten"""
    if metric.points != action.space.points:
        raise StructureError("Metrik und Wirkung leben auf verschiedenen Punktmengen",
                             field="metric", axiom="same-points")
    report = ValidationReport()
    for g in action.group.elements:
        p = action.perm[g]
        for i, j in metric.pairs():
            moved = metric.dist[p[i]][p[j]]
            if moved != metric.dist[i][j]:
                report.add("invariance", (g, metric.points[i], metric.points[j]),
                           f"{fmt_rational(moved)} != {fmt_rational(metric.dist[i][j])}")
    return report


def validate_metric(metric: FiniteMetric, mode: str = METRIC) -> ValidationReport:
    """Metrik- bzw. Pseudometrikaxiome mit Zeugen prüfen"""
    if not metric.points:
        raise StructureError("Leere Punktmenge ist entartet", field="points", axiom="nonempty")
    if mode not in (METRIC, PSEUDOMETRIC):
        raise StructureError(f"Unbekannter Modus {mode!r}", field="mode", axiom="mode")
    report = ValidationReport()
    pts, dist = metric.points, metric.dist
    n = len(pts)
    for i in range(n):
        if dist[i][i] != 0:
            report.add("diagonal", (pts[i],), f"d = {fmt_rational(dist[i][i])}")
        for j in range(n):
            if dist[i][j] < 0:
                report.add("nonnegativity", (pts[i], pts[j]), fmt_rational(dist[i][j]))
    for i, j in metric.pairs():
        if dist[i][j] != dist[j][i]:
            report.add("symmetry", (pts[i], pts[j]),
                       f"{fmt_rational(dist[i][j])} != {fmt_rational(dist[j][i])}")
        if mode == METRIC and dist[i][j] == 0:
            report.add("positivity", (pts[i], pts[j]), "Abstand 0 zwischen verschiedenen Punkten")
    # geordnete Paare; bei symmetrischem Eintrag genügt i < k
    for i in range(n):
        for k in range(n):
            if k == i or (k < i and dist[i][k] == dist[k][i]):
                continue
            for j in range(n):
                if j in (i, k):
                    continue
                if dist[i][k] > dist[i][j] + dist[j][k]:
                    report.add("triangle", (pts[i], pts[j], pts[k]),
                               f"{fmt_rational(dist[i][k])} > "
                               f"{fmt_rational(dist[i][j])} + {fmt_rational(dist[j][k])}")
    return report


@dataclass(frozen=True)
class FiniteGSpace:
    metric: FiniteMetric
    action: GroupAction

    @property
    def points(self) -> Tuple[str, ...]:
        return self.metric.points

    @property
    def group(self) -> FiniteGroup:
        return self.action.group

    def validate(self, mode: str = METRIC) -> ValidationReport:
        report = ValidationReport()
        report.extend(validate_metric(self.metric, mode), "metric.")
        report.extend(validate_action(self.action), "action.")
        report.extend(check_invariance(self.metric, self.action), "metric.")
        return report


@dataclass(frozen=True)
class EquivariantMap:
    source: FiniteGSpace
    target: FiniteGSpace
    image: Dict[str, str]

    @classmethod
    def from_mapping(cls, source: FiniteGSpace, target: FiniteGSpace,
                     image: Dict[str, str], field_name: str = "map") -> "EquivariantMap":
        missing = [x for x in source.points if x not in image]
        if missing:
            raise StructureError(f"Abbildung ist auf {missing} nicht definiert",
                                 field=f"{field_name}.image", axiom="total")
        known = set(target.points)
        for x in source.points:
            if image[x] not in known:
                raise StructureError(f"Bildpunkt {image[x]!r} liegt nicht im Ziel",
                                     field=f"{field_name}.image.{x}", axiom="membership")
        extra = set(image) - set(source.points)
        if extra:
            raise StructureError(f"Urbilder außerhalb der Quelle: {sorted(extra)}",
                                 field=f"{field_name}.image", axiom="membership")
        return cls(source, target, {x: image[x] for x in source.points})

    @classmethod
    def identity(cls, space: FiniteGSpace) -> "EquivariantMap":
        return cls(space, space, {x: x for x in space.points})

    def __call__(self, x: str) -> str:
        return self.image[x]


def check_equivariance(f: EquivariantMap) -> ValidationReport:
    """Alle (g, x) mit f(gx) != g f(x) auflisten"""
    if f.source.group != f.target.group:
        raise StructureError("Quelle und Ziel tragen verschiedene Gruppen",
                             field="map.target", axiom="same-group")
    report = ValidationReport()
    for g in f.source.group.elements:
        for x in f.source.points:
            lhs = f(f.source.action.image(g, x))
            rhs = f.target.action.image(g, f(x))
            if lhs != rhs:
                report.add("equivariance", (g, x), f"f(gx)={lhs}, g f(x)={rhs}")
    return report


def pullback_pseudometric(f: EquivariantMap, rho_y: Optional[FiniteMetric] = None) -> FiniteMetric:
    """mu(x, x') = rho_Y(f(x), f(x'))"""
    rho_y = rho_y or f.target.metric
    pts = f.source.points
    rows = [[rho_y.d(f(x), f(y)) for y in pts] for x in pts]
    return FiniteMetric.from_rows(pts, rows)


def _same_points(mu: FiniteMetric, nu: FiniteMetric) -> None:
    if mu.points != nu.points:
        raise StructureError("Pseudometriken auf verschiedenen Punktmengen",
                             field="pseudometrics", axiom="same-points")


def pseudometric_leq(mu: FiniteMetric, nu: FiniteMetric) -> bool:
    _same_points(mu, nu)
    return all(a <= b for ra, rb in zip(mu.dist, nu.dist) for a, b in zip(ra, rb))


def pseudometric_join(mu: FiniteMetric, nu: FiniteMetric) -> FiniteMetric:
    """Eintragsweises Maximum zweier Pseudometriken"""
    _same_points(mu, nu)
    rows = [[max(a, b) for a, b in zip(ra, rb)] for ra, rb in zip(mu.dist, nu.dist)]
    return FiniteMetric(mu.points, tuple(tuple(r) for r in rows))


def fixed_point_set(action: GroupAction) -> Tuple[str, ...]:
    """Punkte, die von allen (erzeugenden) Gruppenelementen fixiert werden"""
    pts = action.space.points
    acting = action.acting_elements()
    return tuple(x for i, x in enumerate(pts) if all(action.perm[g][i] == i for g in acting))


def lipschitz_constant(f: EquivariantMap, rho_x: Optional[FiniteMetric] = None,
                       rho_y: Optional[FiniteMetric] = None) -> Optional[Fraction]:
    """max d_Y(fx, fx') / d_X(x, x'); None, falls f Punkte mit Abstand 0 trennt"""
    rho_x = rho_x or f.source.metric
    rho_y = rho_y or f.target.metric
    best = Fraction(0)
    pts = rho_x.points
    for i, j in rho_x.pairs():
        dy = rho_y.d(f(pts[i]), f(pts[j]))
        dx = rho_x.dist[i][j]
        if dx == 0:
            if dy != 0:
                return None
            continue
        best = max(best, dy / dx)
    return best


@dataclass
class PseudometricFamily:
    """Endliche, deduplizierte Familie invarianter Pseudometriken auf einem G-Raum"""
    space: FiniteGSpace
    members: Dict[str, FiniteMetric] = field(default_factory=dict)
    aliases: Dict[str, str] = field(default_factory=dict)

    def add(self, name: str, metric: FiniteMetric, validate: bool = True) -> str:
        """Mitglied aufnehmen; gibt den kanonischen Namen zurück (Duplikate werden Aliase)"""
        if name in self.members or name in self.aliases:
            raise StructureError(f"Name {name!r} ist bereits vergeben",
                                 field=f"pseudometrics.{name}", axiom="distinct")
        _same_points(metric, self.space.metric)
        if validate:
            report = validate_metric(metric, PSEUDOMETRIC)
            report.extend(check_invariance(metric, self.space.action))
            if not report.ok:
                first = report.violations[0]
                raise StructureError(
                    f"Pseudometrik {name!r} verletzt {first.axiom} bei {list(first.witness)}",
                    field=f"pseudometrics.{name}", axiom=first.axiom)
        for existing, other in self.members.items():
            if other == metric:
                logger.info(f"Pseudometrik {name!r} ist identisch mit {existing!r}, wird zusammengelegt")
                self.aliases[name] = existing
                return existing
        self.members[name] = metric
        return name

    def resolve(self, name: str) -> str:
        if name in self.members:
            return name
        if name in self.aliases:
            return self.aliases[name]
        raise StructureError(f"Unbekannte Pseudometrik: {name!r}", field="mu", axiom="membership")

    def get(self, name: str) -> FiniteMetric:
        return self.members[self.resolve(name)]

    def names(self) -> List[str]:
        return list(self.members)

    def copy(self) -> "PseudometricFamily":
        return PseudometricFamily(self.space, dict(self.members), dict(self.aliases))
