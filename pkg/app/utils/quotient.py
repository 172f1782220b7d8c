"""Quotienten X_mu nach invarianten Pseudometriken, Bindungsabbildungen und Faktorisierung."""
import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

from networkx.utils import UnionFind

from app.utils.errors import StructureError
from app.utils.gspace_core import (
    METRIC,
    PSEUDOMETRIC,
    EquivariantMap,
    FiniteGSpace,
    FiniteMetric,
    GroupAction,
    ValidationReport,
    check_equivariance,
    check_invariance,
    pseudometric_leq,
    pullback_pseudometric,
    validate_action,
    validate_metric,
)
from app.utils.molecule import BasedSpace, Molecule, pushforward_map

logger = logging.getLogger(__name__)


def class_label(representative: str) -> str:
    return f"[{representative}]"


@dataclass(frozen=True)
class QuotientSpace:
    source: FiniteGSpace
    classes: Tuple[Tuple[str, ...], ...]
    gspace: FiniteGSpace

    @property
    def labels(self) -> Tuple[str, ...]:
        return self.gspace.points

    @property
    def metric(self) -> FiniteMetric:
        return self.gspace.metric

    @property
    def action(self) -> GroupAction:
        return self.gspace.action

    def members(self, label: str) -> Tuple[str, ...]:
        return self.classes[self.gspace.metric.index(label)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "partition": [list(c) for c in self.classes],
            "labels": list(self.labels),
            "metric": self.metric.to_rows(),
            "action": self.action.to_dict(),
        }


@dataclass(frozen=True)
class QuotientMap:
    source: FiniteGSpace
    target: QuotientSpace
    assignment: Dict[str, str]

    def __call__(self, x: str) -> str:
        return self.assignment[x]

    def as_map(self) -> EquivariantMap:
        return EquivariantMap(self.source, self.target.gspace, self.assignment)


def quotient(space: FiniteGSpace, mu: FiniteMetric) -> Tuple[QuotientSpace, QuotientMap]:
    """x ~ x' genau dann, wenn mu(x, x') = 0; Klassen per Union-Find"""
    report = validate_metric(mu, PSEUDOMETRIC)
    report.extend(check_invariance(mu, space.action))
    if not report.ok:
        first = report.violations[0]
        logger.error(f"Pseudometrik für Quotienten abgelehnt: {first.axiom} bei {list(first.witness)}")
        raise StructureError(f"Pseudometrik verletzt {first.axiom} bei {list(first.witness)}",
                             field="mu", axiom=first.axiom)

    points = space.points
    uf = UnionFind(points)
    for i, j in mu.pairs():
        if mu.dist[i][j] == 0:
            uf.union(points[i], points[j])

    by_leader: Dict[str, list] = {}
    for x in points:
        by_leader.setdefault(uf[x], []).append(x)
    # Reihenfolge der Klassen und Repräsentanten folgt der Eingabereihenfolge
    classes = tuple(tuple(members) for members in by_leader.values())

    for members in classes:
        for k, x in enumerate(members):
            for y in members[k + 1:]:
                if mu.d(x, y) != 0:
                    raise StructureError(f"Nullrelation nicht transitiv: mu({x}, {y}) != 0",
                                         field="mu", axiom="triangle")

    labels = tuple(class_label(c[0]) for c in classes)
    assignment = {x: labels[k] for k, members in enumerate(classes) for x in members}
    rows = [[mu.d(a[0], b[0]) for b in classes] for a in classes]
    metric = FiniteMetric(labels, tuple(tuple(r) for r in rows))
    index = {label: k for k, label in enumerate(labels)}
    perm = {}
    for g in space.group.elements:
        perm[g] = tuple(index[assignment[space.action.image(g, c[0])]] for c in classes)
    action = GroupAction(space.group, metric, perm)

    q = QuotientSpace(space, classes, FiniteGSpace(metric, action))
    logger.info(f"Quotient mit {len(classes)} Klassen aus {len(points)} Punkten gebildet")
    return q, QuotientMap(space, q, assignment)


def verify_quotient(mu: FiniteMetric, q: QuotientSpace, p: QuotientMap) -> ValidationReport:
    """Wohldefiniertheit von Metrik und Wirkung erschöpfend prüfen"""
    report = ValidationReport()
    space = q.source
    for k, a in enumerate(q.classes):
        for l, b in enumerate(q.classes):
            expected = q.metric.dist[k][l]
            for x in a:
                for y in b:
                    if mu.d(x, y) != expected:
                        report.add("well-defined-metric", (x, y))
    for g in space.group.elements:
        for k, members in enumerate(q.classes):
            target = q.labels[q.action.perm[g][k]]
            for x in members:
                if p(space.action.image(g, x)) != target:
                    report.add("well-defined-action", (g, x))
    report.extend(validate_metric(q.metric, METRIC), "class-metric.")
    report.extend(validate_action(q.action), "class-action.")
    report.extend(check_invariance(q.metric, q.action), "class-metric.")
    report.extend(check_equivariance(p.as_map()), "quotient-map.")
    missing = set(q.labels) - set(p.assignment.values())
    for label in sorted(missing):
        report.add("surjective", (label,))
    return report


@dataclass(frozen=True)
class BondMap:
    """p_{mu mu'}: X_mu' -> X_mu, [x]_mu' -> [x]_mu"""
    source: QuotientSpace
    target: QuotientSpace
    assignment: Dict[str, str]

    def __call__(self, label: str) -> str:
        return self.assignment[label]

    def as_map(self) -> EquivariantMap:
        return EquivariantMap(self.source.gspace, self.target.gspace, self.assignment)

    def to_dict(self) -> Dict[str, str]:
        return {c: self.assignment[c] for c in self.source.labels}


def bond(space: FiniteGSpace, mu: FiniteMetric, mu_prime: FiniteMetric,
         p_mu: Optional[QuotientMap] = None, p_mu_prime: Optional[QuotientMap] = None) -> BondMap:
    if not pseudometric_leq(mu, mu_prime):
        raise StructureError("Bindung verlangt mu <= mu'", field="mu", axiom="order")
    p_mu = p_mu or quotient(space, mu)[1]
    p_mu_prime = p_mu_prime or quotient(space, mu_prime)[1]
    upper = p_mu_prime.target
    assignment = {label: p_mu(upper.members(label)[0]) for label in upper.labels}
    return BondMap(upper, p_mu.target, assignment)


def verify_bond(b: BondMap, p_mu: QuotientMap, p_mu_prime: QuotientMap) -> ValidationReport:
    """Wohldefiniertheit, 1-Lipschitz, Äquivarianz und p_{mu mu'} p_mu' = p_mu"""
    report = ValidationReport()
    for label in b.source.labels:
        for x in b.source.members(label):
            if p_mu(x) != b(label):
                report.add("well-defined", (label, x))
    src, tgt = b.source.metric, b.target.metric
    for i, j in src.pairs():
        c, c2 = src.points[i], src.points[j]
        if tgt.d(b(c), b(c2)) > src.dist[i][j]:
            report.add("lipschitz", (c, c2))
    report.extend(check_equivariance(b.as_map()))
    for x in p_mu.source.points:
        if b(p_mu_prime(x)) != p_mu(x):
            report.add("coherence-i", (x,), f"{b(p_mu_prime(x))} != {p_mu(x)}")
    return report


def compose_bonds(outer: BondMap, inner: BondMap) -> BondMap:
    """outer ∘ inner: X_mu'' -> X_mu' -> X_mu"""
    if inner.target.labels != outer.source.labels:
        raise StructureError("Bindungen sind nicht verkettbar", field="bonds", axiom="composable")
    return BondMap(inner.source, outer.target, {c: outer(inner(c)) for c in inner.source.labels})


def linearize(b: BondMap, based_src: BasedSpace, based_tgt: BasedSpace) -> Callable[[Molecule], Molecule]:
    """Lineare Fortsetzung p̄_{mu mu'}: M(X_mu') -> M(X_mu)"""
    f = b.as_map()
    return lambda m: pushforward_map(f, m, based_src, based_tgt)


@dataclass(frozen=True)
class Factorization:
    mu: FiniteMetric
    quotient: QuotientSpace
    qmap: QuotientMap
    phi: Dict[str, str]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mu": self.mu.to_rows(),
            "quotient": self.quotient.to_dict(),
            "assignment": dict(self.qmap.assignment),
            "phi": {c: self.phi[c] for c in self.quotient.labels},
        }


def factorize(f: EquivariantMap, rho_y: Optional[FiniteMetric] = None) -> Factorization:
    """f = phi ∘ p_mu mit mu(x, x') = rho_Y(f(x), f(x'))"""
    mu = pullback_pseudometric(f, rho_y)
    q, p = quotient(f.source, mu)
    phi = {label: f(members[0]) for label, members in zip(q.labels, q.classes)}
    return Factorization(mu, q, p, phi)


def verify_factorization(f: EquivariantMap, fac: Factorization,
                         rho_y: Optional[FiniteMetric] = None) -> ValidationReport:
    rho_y = rho_y or f.target.metric
    report = ValidationReport()
    q, phi = fac.quotient, fac.phi
    for x in f.source.points:
        if phi[fac.qmap(x)] != f(x):
            report.add("factorization", (x,), f"phi(p(x))={phi[fac.qmap(x)]}, f(x)={f(x)}")
    for i, j in q.metric.pairs():
        c, c2 = q.labels[i], q.labels[j]
        if phi[c] == phi[c2]:
            report.add("injective", (c, c2))
        if rho_y.d(phi[c], phi[c2]) != q.metric.dist[i][j]:
            report.add("isometry", (c, c2))
    for g in f.source.group.elements:
        for c in q.labels:
            if phi[q.action.image(g, c)] != f.target.action.image(g, phi[c]):
                report.add("equivariance", (g, c))
    return report
