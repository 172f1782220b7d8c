"""Arens-Eells-Norm als exaktes Transportproblem mit dualem Zertifikat.

Die Norm eines Moleküls m ist der minimale Transportaufwand von m⁺ nach m⁻.
Gelöst wird mit dem Netzwerk-Simplex auf dem vollständigen bipartiten
Kostengraphen (Blands Regel, rationale Pivots). Das Zertifikat ist ein
1-Lipschitz-Potential u mit sum m(x) u(x) = Wert.
"""
import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Sequence, Tuple

import networkx as nx

from app.utils.errors import LimitExceededError
from app.utils.gspace_core import FiniteMetric, ValidationReport
from app.utils.molecule import BasedSpace, Molecule, combine, embed
from app.utils.rationals import fmt_rational

logger = logging.getLogger(__name__)

DEFAULT_ORACLE_SUPPORT_CAP = 5
DEFAULT_ORACLE_POINT_CAP = 6


@dataclass(frozen=True)
class Move:
    source: str
    sink: str
    mass: Fraction


@dataclass(frozen=True)
class TransportPlan:
    moves: Tuple[Move, ...] = ()

    def cost(self, metric: FiniteMetric) -> Fraction:
        return sum((mv.mass * metric.d(mv.source, mv.sink) for mv in self.moves), Fraction(0))

    def divergence(self) -> Dict[str, Fraction]:
        div: Dict[str, Fraction] = {}
        for mv in self.moves:
            div[mv.source] = div.get(mv.source, Fraction(0)) + mv.mass
            div[mv.sink] = div.get(mv.sink, Fraction(0)) - mv.mass
        return div


@dataclass(frozen=True)
class NormResult:
    value: Fraction
    plan: TransportPlan
    certificate: Dict[str, Fraction]

    def to_dict(self, order: Sequence[str] = ()) -> Dict[str, Any]:
        rank = {x: i for i, x in enumerate(order)}
        cert = sorted(self.certificate.items(), key=lambda kv: (rank.get(kv[0], len(rank)), kv[0]))
        return {
            "value": fmt_rational(self.value),
            "plan": [{"from": mv.source, "to": mv.sink, "mass": fmt_rational(mv.mass)}
                     for mv in self.plan.moves],
            "certificate": {x: fmt_rational(u) for x, u in cert},
        }


def _northwest_corner(supply: List[Fraction], demand: List[Fraction]) -> Dict[Tuple[int, int], Fraction]:
    """Startbasis mit genau ns + nt - 1 (ggf. entarteten) Basiszellen"""
    s, t = list(supply), list(demand)
    ns, nt = len(s), len(t)
    flow = {}
    i = j = 0
    while True:
        x = min(s[i], t[j])
        flow[(i, j)] = x
        s[i] -= x
        t[j] -= x
        if i == ns - 1 and j == nt - 1:
            return flow
        if s[i] == 0 and i < ns - 1:
            i += 1
        else:
            j += 1


def _basis_tree(cells) -> nx.Graph:
    """Basiszellen als Baum über Zeilen- ("r", i) und Spaltenknoten ("c", j)"""
    tree = nx.Graph()
    tree.add_edges_from((("r", i), ("c", j)) for i, j in cells)
    return tree


def _potentials(flow, cost, ns: int, nt: int) -> Tuple[List[Fraction], List[Fraction]]:
    """u_i + v_j = c_ij auf allen Basiszellen, u_0 = 0"""
    u: List[Any] = [None] * ns
    v: List[Any] = [None] * nt
    u[0] = Fraction(0)
    for (kind, k), (_, l) in nx.bfs_edges(_basis_tree(flow), ("r", 0)):
        if kind == "r":
            v[l] = cost[k][l] - u[k]
        else:
            u[l] = cost[l][k] - v[k]
    return u, v


def _cycle(flow, entering: Tuple[int, int]) -> List[Tuple[int, int]]:
    """Kreis aus Eintrittszelle und Baumpfad; gerade Positionen +, ungerade -"""
    a, b = entering
    path = nx.shortest_path(_basis_tree(flow), ("r", a), ("c", b))
    cells = [entering]
    for n1, n2 in zip(path, path[1:]):
        row = n1[1] if n1[0] == "r" else n2[1]
        col = n2[1] if n2[0] == "c" else n1[1]
        cells.append((row, col))
    return cells


def _transport_simplex(supply: List[Fraction], demand: List[Fraction], cost: List[List[Fraction]]):
    """Transportproblem exakt lösen; gibt Fluss und duale Potentiale (u, v) zurück"""
    ns, nt = len(supply), len(demand)
    flow = _northwest_corner(supply, demand)
    pivots = 0
    while True:
        u, v = _potentials(flow, cost, ns, nt)
        entering = next(((i, j) for i in range(ns) for j in range(nt)
                         if (i, j) not in flow and cost[i][j] - u[i] - v[j] < 0), None)
        if entering is None:
            logger.debug(f"Transportproblem {ns}x{nt} nach {pivots} Pivots optimal")
            return flow, u, v
        cycle = _cycle(flow, entering)
        minus = cycle[1::2]
        theta = min(flow[c] for c in minus)
        # Bland: kleinste austretende Zelle unter den Minimierern
        leaving = min(c for c in minus if flow[c] == theta)
        for k, c in enumerate(cycle):
            flow[c] = flow.get(c, Fraction(0)) + (theta if k % 2 == 0 else -theta)
        del flow[leaving]
        pivots += 1


def norm(m: Molecule, based: BasedSpace) -> NormResult:
    """Arens-Eells-Norm mit Transportplan und 1-Lipschitz-Zertifikat"""
    metric = based.metric
    if m.is_zero():
        return NormResult(Fraction(0), TransportPlan(), {})
    items = m.items(metric.points)
    sources = [(x, c) for x, c in items if c > 0]
    sinks = [(z, -c) for z, c in items if c < 0]

    if len(sources) == 1 and len(sinks) == 1:
        (x, mass), (z, _) = sources[0], sinks[0]
        d = metric.d(x, z)
        return NormResult(mass * d, TransportPlan((Move(x, z, mass),)), {x: d, z: Fraction(0)})

    cost = [[metric.d(x, z) for z, _ in sinks] for x, _ in sources]
    flow, u, v = _transport_simplex([c for _, c in sources], [c for _, c in sinks], cost)
    moves = tuple(Move(sources[i][0], sinks[j][0], f) for (i, j), f in sorted(flow.items()) if f > 0)
    plan = TransportPlan(moves)
    value = plan.cost(metric)

    # c-Transformation: f(x) = min_j (-v_j + d(x, z_j)) ist 1-Lipschitz und dual optimal
    certificate = {}
    for x, _ in sources + sinks:
        certificate[x] = min(-v[j] + metric.d(x, z) for j, (z, _) in enumerate(sinks))
    # Verschiebung um eine Konstante ändert weder Paarung noch Lipschitz-Bedingung
    floor = min(certificate.values())
    certificate = {x: u_x - floor for x, u_x in certificate.items()}
    return NormResult(value, plan, certificate)


def _spanning_trees(n: int):
    """Alle aufspannenden Bäume von K_n über ihre Prüfer-Folgen"""
    if n == 1:
        yield nx.empty_graph(1)
        return
    for seq in itertools.product(range(n), repeat=n - 2):
        yield nx.from_prufer_sequence(list(seq))


def _tree_flow_cost(tree: nx.Graph, supply: List[Fraction], dist) -> Fraction:
    """Eindeutiger Baumfluss mit Divergenz supply; Kosten sum |Fluss| * d"""
    parents = list(nx.bfs_predecessors(tree, 0))
    subtree = list(supply)
    total = Fraction(0)
    for node, p in reversed(parents):
        total += abs(subtree[node]) * dist[node][p]
        subtree[p] += subtree[node]
    return total


def brute_force_norm(m: Molecule, based: BasedSpace,
                     support_cap: int = DEFAULT_ORACLE_SUPPORT_CAP,
                     point_cap: int = DEFAULT_ORACLE_POINT_CAP) -> Fraction:
    """Orakel: Minimum über alle Basislösungen des Flusspolytops auf allen Punkten

    Basislösungen entsprechen aufspannenden Bäumen des vollständigen Graphen;
    Zwischenpunkte außerhalb des Trägers sind erlaubt.
    """
    metric = based.metric
    if len(m.support()) > support_cap:
        raise LimitExceededError(f"Träger {len(m.support())} überschreitet die Orakelgrenze {support_cap}",
                                 cap=support_cap, field="molecule")
    if len(metric.points) > point_cap:
        raise LimitExceededError(f"{len(metric.points)} Punkte überschreiten die Orakelgrenze {point_cap}",
                                 cap=point_cap, field="points")
    if m.is_zero():
        return Fraction(0)
    supply = [m[x] for x in metric.points]
    return min(_tree_flow_cost(tree, supply, metric.dist) for tree in _spanning_trees(len(supply)))


def distance_to_image(m: Molecule, based: BasedSpace) -> Tuple[Fraction, str]:
    """min_x ||m - i(x)|| über die Punkte des Raums; bei Gleichstand der erste Punkt"""
    best = None
    for x in based.space.points:
        value = norm(combine(1, m, -1, embed(x, based)), based).value
        if best is None or value < best[0]:
            best = (value, x)
    return best


def verify_certificate(m: Molecule, result: NormResult, based: BasedSpace) -> ValidationReport:
    """Divergenz, Kosten, Lipschitz-Bedingungen und Dualitätslücke unabhängig nachrechnen"""
    report = ValidationReport()
    metric = based.metric
    known = set(metric.points)
    for mv in result.plan.moves:
        if mv.source not in known or mv.sink not in known:
            report.add("plan", (mv.source, mv.sink), "Punkt außerhalb des Raums")
            return report
        if mv.mass <= 0:
            report.add("plan", (mv.source, mv.sink), f"Masse {fmt_rational(mv.mass)} nicht positiv")

    div = result.plan.divergence()
    for x in metric.points:
        if div.get(x, Fraction(0)) != m[x]:
            report.add("divergence", (x,),
                       f"Plan {fmt_rational(div.get(x, Fraction(0)))}, Molekül {fmt_rational(m[x])}")

    cost = result.plan.cost(metric)
    if cost != result.value:
        report.add("cost", (), f"Plankosten {fmt_rational(cost)} != Wert {fmt_rational(result.value)}")

    support = [x for x in metric.points if m[x] != 0]
    missing = [x for x in support if x not in result.certificate]
    for x in missing:
        report.add("certificate", (x,), "Potential fehlt")
    if missing:
        return report
    for i, x in enumerate(support):
        for y in support[i + 1:]:
            gap = abs(result.certificate[x] - result.certificate[y])
            if gap > metric.d(x, y):
                report.add("lipschitz", (x, y),
                           f"|u(x)-u(y)| = {fmt_rational(gap)} > {fmt_rational(metric.d(x, y))}")

    pairing = sum((m[x] * result.certificate[x] for x in support), Fraction(0))
    if pairing != result.value:
        report.add("duality", (), f"Dualwert {fmt_rational(pairing)} != Wert {fmt_rational(result.value)}")
    return report
