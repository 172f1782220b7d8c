import copy
import json

import pytest

from app.utils.ae_norm import Move, NormResult, TransportPlan, verify_certificate
from app.utils.instance import load_instance
from app.utils.rationals import parse_rational
from conftest import X2_DOC, X3_DOC


def invoke(runner, *args):
    result = runner.invoke(args=list(args))
    return result, json.loads(result.stdout) if result.stdout.strip().startswith("{") else None


@pytest.fixture
def x3_path(write_doc):
    return write_doc(X3_DOC)


def check_names(report):
    return {c["name"]: c for c in report["checks"]}


def test_validate_fixture_passes(runner, x3_path):
    result, report = invoke(runner, "validate", x3_path)
    assert result.exit_code == 0
    assert report["success"] is True and report["outcome"] == "pass"
    assert report["timing"] is None
    names = check_names(report)
    assert names["maps.f"]["passed"] and names["invariance"]["passed"]


def test_validate_flags_non_equivariant_map(runner, write_doc):
    doc = copy.deepcopy(X3_DOC)
    doc["maps"]["bad"] = {"target": "Y2", "image": {"a": "u", "b": "v", "c": "v"}}
    result, report = invoke(runner, "validate", write_doc(doc))
    assert result.exit_code == 1
    failures = check_names(report)["maps.bad"]["failures"]
    assert [f["witness"] for f in failures] == [["equivariance", "g", "a"], ["equivariance", "g", "c"]]


def test_validate_reports_triangle_witness(runner, write_doc):
    doc = {"points": ["a", "b", "c"], "metric": [[0, 1, 3], [1, 0, 1], [3, 1, 0]]}
    result, report = invoke(runner, "validate", write_doc(doc))
    assert result.exit_code == 1
    failures = check_names(report)["metric"]["failures"]
    assert failures[0]["witness"] == ["triangle", "a", "b", "c"]


def test_validate_empty_points_is_structural(runner, write_doc):
    result, payload = invoke(runner, "validate", write_doc({"points": [], "metric": []}))
    assert result.exit_code == 1
    assert payload["error"] == "StructureError"
    assert payload["axiom"] == "nonempty"
    assert payload["command"]["name"] == "validate"


def test_malformed_json_reports_position(runner, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"points": [', encoding="utf-8")
    result, payload = invoke(runner, "validate", str(path))
    assert result.exit_code == 1
    assert payload["axiom"] == "json"
    assert payload["field"].startswith("$:1:")


def _with(**changes):
    doc = copy.deepcopy(X3_DOC)
    for dotted, value in changes.items():
        *parents, key = dotted.split("__")
        node = doc
        for p in parents:
            node = node[p]
        node[key] = value
    return doc


@pytest.mark.parametrize("doc, field", [
    (_with(group={"table": {"elements": [["e"], "g"], "rows": [["e", "g"], ["g", "e"]]}}),
     "group.table.elements"),
    (_with(group={"table": {"elements": ["e", "g"], "rows": [["e", ["g"]], ["g", "e"]]}}),
     "group.table.rows[0]"),
    (_with(action={"e": [0, 1, 2], "g": 1}), "action.g"),
    (_with(basepoint=["a"]), "basepoint"),
    (_with(maps__f__target=["Y2"]), "maps.f.target"),
    (_with(maps__f__image={"a": ["u"], "b": "v", "c": "u"}), "maps.f.image"),
    ({"points": ["a", "b"], "metric": [[0, 1], [1, 0]], "group": {"generators": [1]}},
     "group.generators[0]"),
])
def test_non_string_identifiers_are_structural(runner, write_doc, doc, field):
    result, payload = invoke(runner, "validate", write_doc(doc))
    assert result.exit_code == 1
    assert payload["error"] == "StructureError"
    assert payload["axiom"] == "type"
    assert payload["field"] == field


def test_norm_of_fixture_molecule(runner, x3_path):
    result, report = invoke(runner, "norm", x3_path, "--molecule", "m_abc", "--oracle")
    assert result.exit_code == 0
    assert report["result"]["norm"]["value"] == "2"
    assert report["result"]["oracle"] == "2"
    assert check_names(report)["oracle"]["passed"]


def test_norm_of_zero_molecule(runner, x3_path):
    result, report = invoke(runner, "norm", x3_path, "--molecule", "zero", "--mode", "internal",
                            "--basepoint", "b", "--distance")
    assert result.exit_code == 0
    assert report["result"]["norm"]["value"] == "0"
    assert report["result"]["distance_to_image"] == {"value": "0", "nearest": "b"}


def test_norm_oracle_refuses_beyond_cap(app, runner, x3_path):
    app.config["ORACLE_POINT_CAP"] = 3
    result, payload = invoke(runner, "norm", x3_path, "--molecule", "m_ac", "--oracle")
    assert result.exit_code == 1
    assert payload["error"] == "LimitExceededError"
    assert payload["cap"] == 3


def test_norm_unknown_molecule(runner, x3_path):
    result, payload = invoke(runner, "norm", x3_path, "--molecule", "nope")
    assert result.exit_code == 1
    assert payload["axiom"] == "membership"


def test_norm_non_fixed_internal_basepoint_is_refused(runner, x3_path):
    result, payload = invoke(runner, "norm", x3_path, "--molecule", "m_ac", "--mode", "internal",
                             "--basepoint", "a")
    assert result.exit_code == 1
    assert payload["axiom"] == "fixed-basepoint"


def test_quotient_artifact_reingests(runner, x3_path, tmp_path):
    result, report = invoke(runner, "quotient", x3_path, "--mu", "mu1")
    assert result.exit_code == 0
    assert report["result"]["partition"] == [["a", "c"], ["b"]]
    path = tmp_path / "quotient.json"
    path.write_text(json.dumps(report["result"]["space"]), encoding="utf-8")
    instance = load_instance(str(path))
    assert instance.space.points == ("[a]", "[b]")
    result, report = invoke(runner, "validate", str(path))
    assert result.exit_code == 0


def test_factorize_matches_mu1(runner, x3_path):
    result, report = invoke(runner, "factorize", x3_path, "--map", "f")
    assert result.exit_code == 0
    assert report["result"]["matches"] == ["mu1"]
    assert report["result"]["phi"] == {"[a]": "u", "[b]": "v"}


def test_factorize_rejects_non_equivariant(runner, write_doc):
    doc = copy.deepcopy(X3_DOC)
    doc["maps"]["bad"] = {"target": "Y2", "image": {"a": "u", "b": "v", "c": "v"}}
    result, report = invoke(runner, "factorize", write_doc(doc), "--map", "bad")
    assert result.exit_code == 1
    assert report["result"] is None


def test_system_writes_dot_artifact(runner, write_doc, tmp_path):
    doc = copy.deepcopy(X3_DOC)
    doc["pseudometrics"] = {"zero": [[0, 0, 0], [0, 0, 0], [0, 0, 0]],
                            "mu1": X3_DOC["pseudometrics"]["mu1"],
                            "rho": X3_DOC["metric"]}
    out = tmp_path / "system.dot"
    result, report = invoke(runner, "system", write_doc(doc), "--radii", "1", "--format", "dot",
                            "--out", str(out))
    assert result.exit_code == 0, result.stdout
    assert report["result"]["entries"][0] == "(zero,1)"
    assert out.read_text(encoding="utf-8").startswith("digraph inverse_system {")


def test_system_with_pullbacks(runner, x3_path):
    result, report = invoke(runner, "system", x3_path, "--with-pullbacks", "--samples", "4")
    assert result.exit_code == 0
    # die Zurückziehung von f fällt mit mu1 zusammen, die der Identität ist neu
    assert report["result"]["members"] == ["mu1", "pullback(id)"]


def test_export_is_byte_identical(runner, x3_path):
    first = runner.invoke(args=["export", x3_path, "--radii", "1,1/2", "--seed", "9"])
    second = runner.invoke(args=["export", x3_path, "--radii", "1/2,1", "--seed", "9"])
    assert first.exit_code == 0
    assert first.stdout == second.stdout
    assert '[label="(mu1,1/2)"]' in first.stdout


def test_export_json_format(runner, x3_path):
    result = runner.invoke(args=["export", x3_path, "--format", "json", "--samples", "4"])
    assert result.exit_code == 0
    assert json.loads(result.stdout)["verification"]["valid"] is True


def test_check_fixture_passes(runner, x3_path):
    result, report = invoke(runner, "check", x3_path, "--samples", "8", "--seed", "1")
    assert result.exit_code == 0, [c for c in report["checks"] if not c["passed"]]
    names = check_names(report)
    for name in ("ae_norm.oracle", "ae_norm.isometry", "molecule.action_axioms",
                 "quotient.factorization", "inverse_system.verify"):
        assert names[name]["passed"] and names[name]["witnesses"] > 0


def test_check_eq3_boundary_on_x2(runner, write_doc):
    path = write_doc(X2_DOC)
    result, report = invoke(runner, "check", path, "--mode", "internal", "--basepoint", "a",
                            "--action-mode", "eq3_literal", "--samples", "8")
    assert result.exit_code == 1
    axioms = check_names(report)["molecule.action_axioms"]
    assert not axioms["passed"]
    assert "eq3_literal" in axioms["note"]
    assert check_names(report)["molecule.embed_equivariance"]["skipped"]


def test_check_one_point_space(runner, write_doc):
    result, report = invoke(runner, "check", write_doc({"points": ["x"], "metric": [[0]]}))
    assert result.exit_code == 0
    assert report["success"] is True


def test_reports_are_deterministic(runner, x3_path):
    first = runner.invoke(args=["check", x3_path, "--samples", "4"])
    second = runner.invoke(args=["check", x3_path, "--samples", "4"])
    assert first.stdout == second.stdout


def test_timing_flag(runner, x3_path):
    _, report = invoke(runner, "validate", x3_path, "--timing")
    assert isinstance(report["timing"], float)


def test_norm_output_reingests_and_recertifies(runner, write_doc, x3_path):
    _, report = invoke(runner, "norm", x3_path, "--molecule", "m_abc")
    doc = copy.deepcopy(X3_DOC)
    doc["molecules"] = {"echo": report["result"]["molecule"]}
    path = write_doc(doc, "echo.json")
    result, again = invoke(runner, "norm", path, "--molecule", "echo")
    assert result.exit_code == 0
    assert again["result"]["norm"] == report["result"]["norm"]

    instance = load_instance(path)
    based = instance.based()
    emitted = report["result"]["norm"]
    plan = TransportPlan(tuple(Move(mv["from"], mv["to"], parse_rational(mv["mass"], "mass"))
                               for mv in emitted["plan"]))
    certificate = {x: parse_rational(u, x) for x, u in emitted["certificate"].items()}
    parsed = NormResult(parse_rational(emitted["value"], "value"), plan, certificate)
    assert verify_certificate(instance.molecule("echo", based), parsed, based).ok


def test_factorize_output_reingests(runner, write_doc, x3_path):
    _, report = invoke(runner, "factorize", x3_path, "--map", "f")
    result, _ = invoke(runner, "validate", write_doc(report["result"]["space"], "quotient.json"))
    assert result.exit_code == 0
    doc = copy.deepcopy(X3_DOC)
    doc["pseudometrics"] = {"pulled": report["result"]["mu"]}
    result, again = invoke(runner, "validate", write_doc(doc, "pulled.json"))
    assert result.exit_code == 0
    assert check_names(again)["pseudometrics.pulled"]["passed"]


def test_system_report_carries_json_artifact(runner, write_doc, x3_path):
    result, report = invoke(runner, "system", x3_path, "--samples", "4", "--seed", "2")
    assert result.exit_code == 0
    exported = runner.invoke(args=["export", x3_path, "--format", "json", "--samples", "4", "--seed", "2"])
    assert report["result"]["system"] == json.loads(exported.stdout)

    artifact = report["result"]["system"]
    for k, (name, q) in enumerate(sorted(artifact["quotients"].items())):
        result, _ = invoke(runner, "validate", write_doc(q["space"], f"quotient{k}.json"))
        assert result.exit_code == 0, name
    doc = copy.deepcopy(X3_DOC)
    doc["pseudometrics"] = {f"m{k}": rows for k, rows in enumerate(artifact["pseudometrics"].values())}
    result, _ = invoke(runner, "validate", write_doc(doc, "members.json"))
    assert result.exit_code == 0
