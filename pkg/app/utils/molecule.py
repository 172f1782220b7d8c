"""Der lineare Raum M(X) der Moleküle über einem punktierten G-Raum."""
import logging
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.utils.errors import StructureError
from app.utils.gspace_core import (
    FiniteGSpace,
    FiniteMetric,
    GroupAction,
    EquivariantMap,
    ValidationReport,
    fixed_point_set,
)
from app.utils.rationals import fmt_rational

logger = logging.getLogger(__name__)

STAR = "*"
INTERNAL = "internal"
ADJOINED = "adjoined"
PUSHFORWARD = "pushforward"
EQ3_LITERAL = "eq3_literal"

SAMPLE_COEFFICIENTS = (Fraction(1), Fraction(-1), Fraction(2), Fraction(-2), Fraction(1, 2), Fraction(-1, 2))


@dataclass(frozen=True)
class BasedSpace:
    """G-Raum mit Basispunkt: intern (G-fixer Punkt) oder adjungiert (formaler Punkt ★)"""
    space: FiniteGSpace
    mode: str
    basepoint: str
    extended: FiniteGSpace
    star_distance: Optional[Fraction] = None

    @classmethod
    def adjoined(cls, space: FiniteGSpace, star_distance: Optional[Fraction] = None) -> "BasedSpace":
        if STAR in space.points:
            raise StructureError(f"Punktbezeichner {STAR!r} ist für den adjungierten Basispunkt reserviert",
                                 field="points", axiom="distinct")
        diam = space.metric.diameter()
        c = Fraction(star_distance) if star_distance is not None else max(Fraction(1), diam)
        if c <= 0 or 2 * c < diam:
            raise StructureError(f"Abstand zu ★ muss positiv und mindestens diam/2 = {fmt_rational(diam / 2)} sein",
                                 field="star_distance", axiom="triangle")
        n = len(space.points)
        rows = [list(row) + [c] for row in space.metric.dist] + [[c] * n + [Fraction(0)]]
        metric = FiniteMetric(space.points + (STAR,), tuple(tuple(r) for r in rows))
        perm = {g: p + (n,) for g, p in space.action.perm.items()}
        action = GroupAction(space.group, metric, perm)
        return cls(space, ADJOINED, STAR, FiniteGSpace(metric, action), c)

    @classmethod
    def internal(cls, space: FiniteGSpace, basepoint: str, allow_nonfixed: bool = False) -> "BasedSpace":
        """Interner Basispunkt; nicht fixierte Punkte nur für den eq3_literal-Modus"""
        space.metric.index(basepoint)
        if not allow_nonfixed and basepoint not in fixed_point_set(space.action):
            raise StructureError(f"Basispunkt {basepoint!r} ist kein Fixpunkt der Wirkung",
                                 field="basepoint", axiom="fixed-basepoint")
        return cls(space, INTERNAL, basepoint, space)

    @property
    def points(self) -> Tuple[str, ...]:
        return self.extended.points

    @property
    def metric(self) -> FiniteMetric:
        return self.extended.metric

    @property
    def action(self) -> GroupAction:
        return self.extended.action

    @property
    def basepoint_fixed(self) -> bool:
        return self.basepoint in fixed_point_set(self.extended.action)

    def describe(self) -> Dict[str, Any]:
        return {"mode": self.mode, "basepoint": self.basepoint,
                "star_distance": fmt_rational(self.star_distance) if self.star_distance is not None else None}


@dataclass(frozen=True)
class Molecule:
    """Endlich getragene rationale Funktion mit Summe 0; Nullkoeffizienten werden entfernt"""
    coeffs: Dict[str, Fraction]

    @classmethod
    def from_mapping(cls, coeffs: Mapping[str, Any], based: Optional[BasedSpace] = None,
                     field_name: str = "molecule") -> "Molecule":
        pruned = {x: Fraction(c) for x, c in coeffs.items() if Fraction(c) != 0}
        if sum(pruned.values(), Fraction(0)) != 0:
            raise StructureError(f"Koeffizientensumme ist {fmt_rational(sum(pruned.values()))}, nicht 0",
                                 field=field_name, axiom="zero-sum")
        if based is not None:
            known = set(based.points)
            outside = sorted(x for x in pruned if x not in known)
            if outside:
                raise StructureError(f"Träger außerhalb des Raums: {outside}",
                                     field=field_name, axiom="support")
        return cls(pruned)

    @classmethod
    def zero(cls) -> "Molecule":
        return cls({})

    def __getitem__(self, x: str) -> Fraction:
        return self.coeffs.get(x, Fraction(0))

    def support(self) -> List[str]:
        return list(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def items(self, order: Optional[Sequence[str]] = None) -> List[Tuple[str, Fraction]]:
        if order is None:
            return sorted(self.coeffs.items())
        rank = {x: i for i, x in enumerate(order)}
        return sorted(self.coeffs.items(), key=lambda kv: (rank.get(kv[0], len(rank)), kv[0]))

    def to_dict(self, order: Optional[Sequence[str]] = None) -> Dict[str, str]:
        return {x: fmt_rational(c) for x, c in self.items(order)}


def _collect(pairs: Iterable[Tuple[str, Fraction]]) -> Molecule:
    acc: Dict[str, Fraction] = defaultdict(Fraction)
    for x, c in pairs:
        acc[x] += c
    return Molecule({x: c for x, c in acc.items() if c != 0})


@dataclass(frozen=True)
class BasisDecomposition:
    """Koordinaten bezüglich der Hamel-Basis {x - x0 : x != x0}"""
    terms: Dict[str, Fraction]
    basepoint: str


def embed(x: str, based: BasedSpace) -> Molecule:
    """i(x) = x - x0"""
    if x == STAR and based.mode == ADJOINED:
        raise StructureError("Der adjungierte Punkt ★ wird nicht eingebettet", field="point", axiom="membership")
    based.space.metric.index(x)
    if x == based.basepoint:
        return Molecule.zero()
    return Molecule({x: Fraction(1), based.basepoint: Fraction(-1)})


def combine(alpha: Any, m: Molecule, beta: Any, m2: Molecule) -> Molecule:
    """alpha*m + beta*m2, punktweise"""
    alpha, beta = Fraction(alpha), Fraction(beta)
    return _collect([(x, alpha * c) for x, c in m.coeffs.items()]
                    + [(x, beta * c) for x, c in m2.coeffs.items()])


def basis_decompose(m: Molecule, based: BasedSpace) -> BasisDecomposition:
    return BasisDecomposition({x: c for x, c in m.coeffs.items() if x != based.basepoint}, based.basepoint)


def reconstruct(decomposition: BasisDecomposition, based: BasedSpace) -> Molecule:
    """sum lambda_x (x - x0) zurückrechnen"""
    x0 = based.basepoint
    pairs = []
    for x, c in decomposition.terms.items():
        pairs.append((x, c))
        pairs.append((x0, -c))
    return _collect(pairs)


def act(g: str, m: Molecule, based: BasedSpace, mode: str = PUSHFORWARD) -> Molecule:
    """Lineare Wirkung von g auf M(X)

    pushforward: Koeffizient von x wandert nach gx (★ bleibt fix).
    eq3_literal: sum lambda_i (g x_i - x0) aus der Basiszerlegung, auch bei nicht fixiertem x0.
    """
    based.space.group.check_element(g)
    action = based.action
    if mode == PUSHFORWARD:
        return _collect((action.image(g, x), c) for x, c in m.coeffs.items())
    if mode == EQ3_LITERAL:
        x0 = based.basepoint
        pairs = []
        for x, c in basis_decompose(m, based).terms.items():
            pairs.append((action.image(g, x), c))
            pairs.append((x0, -c))
        return _collect(pairs)
    raise StructureError(f"Unbekannter Wirkungsmodus {mode!r}", field="action_mode", axiom="mode")


def check_action_axioms(based: BasedSpace, molecules: Sequence[Molecule],
                        mode: str = PUSHFORWARD) -> ValidationReport:
    """act(e, m) = m und act(g, act(h, m)) = act(gh, m) auf einer Molekülmenge prüfen"""
    report = ValidationReport()
    group = based.space.group
    for k, m in enumerate(molecules):
        if act(group.identity, m, based, mode) != m:
            report.add("identity", (group.identity, f"m{k}"))
        for g in group.elements:
            for h in group.elements:
                lhs = act(g, act(h, m, based, mode), based, mode)
                rhs = act(group.mul(g, h), m, based, mode)
                if lhs != rhs:
                    report.add("compatibility", (g, h, f"m{k}"),
                               f"g(hm)={lhs.to_dict(based.points)}, (gh)m={rhs.to_dict(based.points)}")
    if not report.ok:
        logger.info(f"Wirkungsaxiome im Modus {mode} verletzt ({len(report.violations)} Verstöße)")
    return report


def pushforward_map(f: EquivariantMap, m: Molecule, based_src: BasedSpace, based_tgt: BasedSpace) -> Molecule:
    """Lineare Fortsetzung f̄(sum lambda_i (x_i - x0)) = sum lambda_i (f(x_i) - y0)"""
    if f.source.points != based_src.space.points or f.target.points != based_tgt.space.points:
        raise StructureError("Abbildung passt nicht zu den punktierten Räumen", field="map", axiom="same-points")
    y0 = based_tgt.basepoint
    if based_src.mode == INTERNAL and f(based_src.basepoint) != y0:
        raise StructureError(
            f"f({based_src.basepoint}) = {f(based_src.basepoint)} ist nicht der Zielbasispunkt {y0}",
            field="basepoint", axiom="basepoint")
    pairs = []
    for x, c in basis_decompose(m, based_src).terms.items():
        pairs.append((f(x), c))
        pairs.append((y0, -c))
    return _collect(pairs)


def sample_molecules(points: Sequence[str], count: int, seed: int, max_support: int = 4) -> List[Molecule]:
    """Deterministische Stichprobe von Molekülen mit Koeffizienten aus {±1, ±2, ±1/2}

    Der letzte Koeffizient gleicht die Summe aus und kann daher außerhalb der Menge liegen.
    """
    rng = np.random.default_rng(seed)
    n = len(points)
    if n < 2:
        return [Molecule.zero() for _ in range(count)]
    top = min(max_support, n)
    result = []
    for _ in range(count):
        k = int(rng.integers(2, top + 1))
        chosen = sorted(int(i) for i in rng.choice(n, size=k, replace=False))
        coeffs = [SAMPLE_COEFFICIENTS[int(rng.integers(len(SAMPLE_COEFFICIENTS)))] for _ in range(k - 1)]
        coeffs.append(-sum(coeffs, Fraction(0)))
        result.append(_collect((points[i], c) for i, c in zip(chosen, coeffs)))
    return result
