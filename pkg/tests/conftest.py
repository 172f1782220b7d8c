import json
from fractions import Fraction

import numpy as np
import pytest

from app import create_app
from app.utils.gspace_core import FiniteGSpace, FiniteMetric, GroupAction, PseudometricFamily
from app.utils.instance import parse_instance
from app.utils.rationals import fmt_rational
from config import Config


class TestConfig(Config):
    __test__ = False
    TESTING = True
    SAMPLE_COUNT = 8
    SAMPLE_SEED = 0
    REPORT_TIMING = False
    LOG_LEVEL = 'WARNING'


Z2_TABLE = {"table": {"elements": ["e", "g"], "rows": [["e", "g"], ["g", "e"]]}}

# X3 = {a, b, c}, d(a,b) = d(b,c) = 1, d(a,c) = 2, Z2 vertauscht a und c
X3_DOC = {
    "points": ["a", "b", "c"],
    "metric": [[0, 1, 2], [1, 0, 1], [2, 1, 0]],
    "group": Z2_TABLE,
    "action": {"e": [0, 1, 2], "g": [2, 1, 0]},
    "pseudometrics": {"mu1": [[0, 1, 0], [1, 0, 1], [0, 1, 0]]},
    "spaces": {"Y2": {"points": ["u", "v"], "metric": [[0, 1], [1, 0]]}},
    "maps": {
        "f": {"target": "Y2", "image": {"a": "u", "b": "v", "c": "u"}},
        "id": {"target": "self", "image": {"a": "a", "b": "b", "c": "c"}},
    },
    "molecules": {
        "m_abc": {"a": 1, "c": 1, "b": -2},
        "m_ac": {"a": 1, "c": -1},
        "zero": {},
    },
}

MU2 = [[0, "1/2", 1], ["1/2", 0, "1/2"], [1, "1/2", 0]]

# X2 = {a, b} mit Vertauschung; kein Punkt ist fix
X2_DOC = {
    "points": ["a", "b"],
    "metric": [[0, 1], [1, 0]],
    "group": {"generators": [[1, 0]]},
}

EQUILATERAL = [[0, 1, 1], [1, 0, 1], [1, 1, 0]]


def cycle_metric(n):
    return [[min(abs(i - j), n - abs(i - j)) for j in range(n)] for i in range(n)]


CATALOG_DOCS = {
    "x3_z2": X3_DOC,
    "x2_z2": X2_DOC,
    "triangle_z3": {"points": ["p", "q", "r"], "metric": EQUILATERAL,
                    "group": {"generators": [[1, 2, 0]]}},
    "triangle_s3": {"points": ["p", "q", "r"], "metric": EQUILATERAL,
                    "group": {"generators": [[1, 0, 2], [1, 2, 0]]}},
    "square_z2": {"points": ["s0", "s1", "s2", "s3"], "metric": cycle_metric(4),
                  "group": {"generators": [[2, 3, 0, 1]]}},
    "hexagon_z3": {"points": [f"h{i}" for i in range(6)], "metric": cycle_metric(6),
                   "group": {"generators": [[2, 3, 4, 5, 0, 1]]}},
}


@pytest.fixture
def app():
    return create_app(TestConfig)


@pytest.fixture
def runner(app):
    return app.test_cli_runner()


@pytest.fixture
def x3():
    return parse_instance(X3_DOC)


@pytest.fixture
def x3_space(x3):
    return x3.space


@pytest.fixture
def mu1(x3):
    return x3.pseudometrics["mu1"]


@pytest.fixture
def mu2(x3_space):
    return FiniteMetric.from_rows(x3_space.points, [[Fraction(v) for v in row] for row in MU2])


@pytest.fixture
def chain_family(x3_space, mu1):
    family = PseudometricFamily(x3_space)
    family.add("zero", FiniteMetric.zero(x3_space.points))
    family.add("mu1", mu1)
    family.add("rho", x3_space.metric)
    return family


@pytest.fixture(params=sorted(CATALOG_DOCS))
def catalog_space(request):
    return parse_instance(CATALOG_DOCS[request.param]).space


@pytest.fixture
def write_doc(tmp_path):
    """Instanzdokument als JSON-Datei ablegen und den Pfad zurückgeben"""
    def _write(doc, name="instance.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf-8")
        return str(path)
    return _write


def random_metric_rows(rng, n):
    """Zufällige Metrik mit Einträgen in [1, 10]; Dreiecksungleichung per Floyd-Warshall-Abschluss"""
    d = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d[i][j] = d[j][i] = Fraction(int(rng.integers(2, 21)), 2)
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i][k] + d[k][j] < d[i][j]:
                    d[i][j] = d[i][k] + d[k][j]
    return d


def random_space(seed, n_min=3, n_max=5):
    """Seeded metrischer Raum mit trivialer Gruppe"""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    rows = random_metric_rows(rng, n)
    doc = {"points": [f"x{i}" for i in range(n)],
           "metric": [[fmt_rational(v) for v in row] for row in rows]}
    return parse_instance(doc).space, rng


def trivial_target(group, points, rows):
    metric = FiniteMetric.from_rows(points, rows)
    return FiniteGSpace(metric, GroupAction.trivial(group, metric))
