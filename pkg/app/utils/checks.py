"""Eigenschaftssuiten aller Module gegen eine eingelesene Instanz (Befehl ``check``)."""
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Sequence

from app.utils.ae_norm import (
    DEFAULT_ORACLE_POINT_CAP,
    DEFAULT_ORACLE_SUPPORT_CAP,
    brute_force_norm,
    norm,
    verify_certificate,
)
from app.utils.errors import EquivariantError
from app.utils.gspace_core import (
    METRIC,
    PSEUDOMETRIC,
    FiniteMetric,
    PseudometricFamily,
    ValidationReport,
    check_equivariance,
    check_invariance,
    lipschitz_constant,
    pseudometric_join,
    pseudometric_leq,
    pullback_pseudometric,
    validate_action,
    validate_group,
    validate_metric,
)
from app.utils.instance import Instance
from app.utils.inverse_system import (
    DEFAULT_JOIN_CLOSURE_CAP,
    absorbs,
    build_system,
    tube_member,
)
from app.utils.molecule import (
    EQ3_LITERAL,
    PUSHFORWARD,
    BasedSpace,
    Molecule,
    act,
    basis_decompose,
    check_action_axioms,
    combine,
    embed,
    pushforward_map,
    reconstruct,
    sample_molecules,
)
from app.utils.quotient import factorize, verify_factorization

logger = logging.getLogger(__name__)

EQ3_BOUNDARY_NOTE = "bekannte Grenze: eq3_literal an nicht fixiertem Basispunkt verletzt die Wirkungsaxiome"


@dataclass
class CheckResult:
    name: str
    witnesses: int = 0
    failures: List[Dict[str, Any]] = field(default_factory=list)
    note: str = ""
    skipped: bool = False

    @property
    def passed(self) -> bool:
        return not self.failures

    def record(self, ok: bool, witness: Sequence[Any], detail: str = "") -> None:
        self.witnesses += 1
        if not ok:
            self.failures.append({"witness": [str(w) for w in witness], "detail": detail})

    def absorb(self, report: ValidationReport, witness_count: int = 1) -> None:
        self.witnesses += witness_count
        for v in report.violations:
            self.failures.append({"witness": [v.axiom] + list(v.witness), "detail": v.detail})

    def skip(self, note: str) -> "CheckResult":
        self.skipped = True
        self.note = note
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": self.passed, "witnesses": self.witnesses,
                "skipped": self.skipped, "note": self.note, "failures": self.failures}


@dataclass
class CheckSettings:
    samples: int = 16
    seed: int = 0
    action_mode: str = PUSHFORWARD
    radii: Sequence[Fraction] = (Fraction(1),)
    oracle_support_cap: int = DEFAULT_ORACLE_SUPPORT_CAP
    oracle_point_cap: int = DEFAULT_ORACLE_POINT_CAP
    join_cap: int = DEFAULT_JOIN_CLOSURE_CAP


def _equivariant_maps(instance: Instance):
    return {name: f for name, f in instance.maps.items() if check_equivariance(f).ok}


def default_family(instance: Instance, with_pullbacks: bool = True) -> PseudometricFamily:
    """Dokumentfamilie; ohne Angaben {0, rho}; optional um Zurückziehungen der Abbildungen ergänzt"""
    family = instance.family()
    if not family.members:
        family.add("zero", FiniteMetric.zero(instance.space.points))
        family.add("rho", instance.space.metric)
    if with_pullbacks:
        for name, f in _equivariant_maps(instance).items():
            family.add(f"pullback({name})", pullback_pseudometric(f))
    return family


def gspace_checks(instance: Instance) -> List[CheckResult]:
    space = instance.space
    results = []

    res = CheckResult("gspace_core.metric")
    res.absorb(validate_metric(space.metric, METRIC), len(space.points) ** 3)
    results.append(res)

    res = CheckResult("gspace_core.group")
    res.absorb(validate_group(space.group), len(space.group) ** 3)
    results.append(res)

    res = CheckResult("gspace_core.action")
    res.absorb(validate_action(space.action), len(space.group) ** 2 * len(space.points))
    results.append(res)

    res = CheckResult("gspace_core.invariance")
    res.absorb(check_invariance(space.metric, space.action))
    for name, mu in instance.pseudometrics.items():
        res.absorb(validate_metric(mu, PSEUDOMETRIC))
        res.absorb(check_invariance(mu, space.action))
    results.append(res)

    res = CheckResult("gspace_core.equivariance")
    for name, f in instance.maps.items():
        res.absorb(check_equivariance(f))
        res.absorb(validate_metric(f.target.metric, METRIC))
        res.absorb(check_invariance(f.target.metric, f.target.action))
    results.append(res)

    res = CheckResult("gspace_core.pullback")
    for name, f in _equivariant_maps(instance).items():
        mu = pullback_pseudometric(f)
        res.absorb(validate_metric(mu, PSEUDOMETRIC))
        res.absorb(check_invariance(mu, space.action))
    results.append(res)
    return results


def order_checks(family: PseudometricFamily) -> List[CheckResult]:
    members = family.members
    order = CheckResult("gspace_core.partial_order")
    for a in members:
        order.record(pseudometric_leq(members[a], members[a]), (a,), "nicht reflexiv")
    for a, b in itertools.permutations(members, 2):
        both = pseudometric_leq(members[a], members[b]) and pseudometric_leq(members[b], members[a])
        order.record(not both, (a, b), "nicht antisymmetrisch")
    for a, b, c in itertools.permutations(members, 3):
        if pseudometric_leq(members[a], members[b]) and pseudometric_leq(members[b], members[c]):
            order.record(pseudometric_leq(members[a], members[c]), (a, b, c), "nicht transitiv")

    join = CheckResult("gspace_core.join")
    for a, b in itertools.combinations(members, 2):
        j = pseudometric_join(members[a], members[b])
        join.record(validate_metric(j, PSEUDOMETRIC).ok and check_invariance(j, family.space.action).ok,
                    (a, b), "Supremum ist keine invariante Pseudometrik")
        join.record(pseudometric_leq(members[a], j) and pseudometric_leq(members[b], j), (a, b), "keine obere Schranke")
        for c, mu in members.items():
            if pseudometric_leq(members[a], mu) and pseudometric_leq(members[b], mu):
                join.record(pseudometric_leq(j, mu), (a, b, c), "nicht kleinste obere Schranke")
    return [order, join]


def molecule_checks(instance: Instance, based: BasedSpace, samples: List[Molecule],
                    settings: CheckSettings) -> List[CheckResult]:
    group = based.space.group
    mode = settings.action_mode
    results = []

    zero_sum = CheckResult("molecule.zero_sum")
    decomposition = CheckResult("molecule.decomposition")
    for k, m in enumerate(samples):
        outputs = [combine(2, m, Fraction(-1, 2), samples[k - 1])] + [act(g, m, based, mode) for g in group.elements]
        for out in outputs:
            zero_sum.record(sum(out.coeffs.values(), Fraction(0)) == 0, (f"m{k}",))
        decomposition.record(reconstruct(basis_decompose(m, based), based) == m, (f"m{k}",))
    results += [zero_sum, decomposition]

    axioms = CheckResult("molecule.action_axioms")
    axioms.absorb(check_action_axioms(based, samples, mode), len(samples) * len(group) ** 2)
    if not axioms.passed and mode == EQ3_LITERAL and not based.basepoint_fixed:
        axioms.note = EQ3_BOUNDARY_NOTE
    results.append(axioms)

    linearity = CheckResult("molecule.linearity")
    for k, m in enumerate(samples):
        m2 = samples[k - 1]
        for g in group.elements:
            lhs = act(g, combine(3, m, Fraction(-1, 2), m2), based, mode)
            rhs = combine(3, act(g, m, based, mode), Fraction(-1, 2), act(g, m2, based, mode))
            linearity.record(lhs == rhs, (g, f"m{k}"))
    results.append(linearity)

    embedding = CheckResult("molecule.embed_equivariance")
    agreement = CheckResult("molecule.mode_agreement")
    if based.basepoint_fixed:
        for g in group.elements:
            for x in based.space.points:
                gx = based.space.action.image(g, x)
                embedding.record(act(g, embed(x, based), based, mode) == embed(gx, based), (g, x))
            for k, m in enumerate(samples):
                agreement.record(act(g, m, based, PUSHFORWARD) == act(g, m, based, EQ3_LITERAL), (g, f"m{k}"))
    else:
        embedding.skip("Basispunkt nicht G-fix")
        agreement.skip("Basispunkt nicht G-fix")
    results += [embedding, agreement]

    extension = CheckResult("molecule.pushforward")
    for name, f in _equivariant_maps(instance).items():
        src, tgt = BasedSpace.adjoined(f.source), BasedSpace.adjoined(f.target)
        for x in f.source.points:
            extension.record(pushforward_map(f, embed(x, src), src, tgt) == embed(f(x), tgt), (name, x))
        for k, m in enumerate(sample_molecules(src.points, len(samples), settings.seed)):
            for g in group.elements:
                extension.record(pushforward_map(f, act(g, m, src), src, tgt) == act(g, pushforward_map(f, m, src, tgt), tgt),
                                 (name, g, f"m{k}"), "nicht äquivariant")
    results.append(extension)
    return results


def norm_checks(instance: Instance, based: BasedSpace, samples: List[Molecule],
                settings: CheckSettings) -> List[CheckResult]:
    metric = based.metric
    certificates = CheckResult("ae_norm.certificates")

    def certified(m: Molecule, b: BasedSpace = based):
        result = norm(m, b)
        certificates.absorb(verify_certificate(m, result, b))
        return result.value

    oracle = CheckResult("ae_norm.oracle")
    if len(metric.points) > settings.oracle_point_cap:
        oracle.skip(f"{len(metric.points)} Punkte über der Orakelgrenze {settings.oracle_point_cap}")
    else:
        for k, m in enumerate(samples):
            if len(m.support()) > min(4, settings.oracle_support_cap):
                continue
            oracle.record(certified(m) == brute_force_norm(m, based, settings.oracle_support_cap,
                                                           settings.oracle_point_cap), (f"m{k}",))

    isometry = CheckResult("ae_norm.isometry")
    for i, j in based.space.metric.pairs():
        x, y = based.space.points[i], based.space.points[j]
        value = certified(combine(1, embed(x, based), -1, embed(y, based)))
        isometry.record(value == based.space.metric.dist[i][j], (x, y))

    axioms = CheckResult("ae_norm.norm_axioms")
    for k, m in enumerate(samples):
        value = certified(m)
        axioms.record(value >= 0 and (value == 0) == m.is_zero(), (f"m{k}",), "Definitheit")
        for alpha in (Fraction(-2), Fraction(1, 3)):
            axioms.record(certified(combine(alpha, m, 0, m)) == abs(alpha) * value, (f"m{k}", alpha), "Homogenität")
        m2 = samples[k - 1]
        axioms.record(certified(combine(1, m, 1, m2)) <= value + certified(m2), (f"m{k}", f"m{k - 1}"), "Dreieck")

    invariance = CheckResult("ae_norm.equivariant_isometry")
    if based.basepoint_fixed:
        for k, m in enumerate(samples):
            value = certified(m)
            for g in based.space.group.elements:
                invariance.record(certified(act(g, m, based, settings.action_mode)) == value, (g, f"m{k}"))
    else:
        invariance.skip("Basispunkt nicht G-fix")

    contraction = CheckResult("ae_norm.pushforward_contraction")
    for name, f in _equivariant_maps(instance).items():
        lip = lipschitz_constant(f)
        if lip is None:
            continue
        src, tgt = BasedSpace.adjoined(f.source), BasedSpace.adjoined(f.target)
        # Mit ★ -> ★ muss auch d(x, ★) berücksichtigt werden
        lip = max(lip, tgt.star_distance / src.star_distance)
        for k, m in enumerate(sample_molecules(src.points, len(samples), settings.seed + 1)):
            contraction.record(certified(pushforward_map(f, m, src, tgt), tgt) <= lip * certified(m, src),
                               (name, f"m{k}"))
    return [oracle, isometry, axioms, invariance, contraction, certificates]


def system_checks(instance: Instance, family: PseudometricFamily, settings: CheckSettings) -> List[CheckResult]:
    space = instance.space
    verify = CheckResult("inverse_system.verify")
    system = build_system(space, family, settings.radii, settings.join_cap, settings.samples, settings.seed)
    verify.absorb(system.report, len(system.entries) ** 2)

    factorization = CheckResult("quotient.factorization")
    absorption = CheckResult("inverse_system.absorbs")
    for name, f in _equivariant_maps(instance).items():
        factorization.absorb(verify_factorization(f, factorize(f)))
        entry, report = absorbs(system, f)
        absorption.absorb(report)

    tubes = CheckResult("inverse_system.tube_monotonicity")
    for name in system.family.names():
        based = system.based[name]
        entries = [e for e in system.entries if e.mu == name]
        for k, m in enumerate(sample_molecules(based.points, settings.samples, settings.seed)):
            inside = [tube_member(system, e, m) for e in entries]
            # Einträge sind nach aufsteigendem Radius geordnet, unendlich zuletzt
            tubes.record(all(not a or b for a, b in zip(inside, inside[1:])), (name, f"m{k}"))
    return [verify, factorization, absorption, tubes]


def run_checks(instance: Instance, based: BasedSpace, settings: CheckSettings) -> List[CheckResult]:
    """Alle Eigenschaftssuiten ausführen; Reihenfolge und Inhalt sind deterministisch"""
    results = gspace_checks(instance)
    try:
        family = default_family(instance)
    except EquivariantError as e:
        failed = CheckResult("gspace_core.family")
        failed.record(False, (e.field or "",), e.message)
        logger.error(f"Familie ungültig, Systemprüfungen entfallen: {e.message}")
        return results + [failed]
    results += order_checks(family)

    samples = sample_molecules(based.points, settings.samples, settings.seed)
    results += molecule_checks(instance, based, samples, settings)
    results += norm_checks(instance, based, samples, settings)
    results += system_checks(instance, family, settings)
    failed = [r.name for r in results if not r.passed]
    logger.info(f"{len(results)} Prüfungen ausgeführt, {len(failed)} fehlgeschlagen")
    return results
