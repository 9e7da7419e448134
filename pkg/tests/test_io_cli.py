import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from tensionweb import cli, fixtures
from tensionweb.core import INTERNAL, Web
from tensionweb.io import (DocumentError, ProblemDocument, WebDocument, dumps, loads_problem, loads_web)
from tensionweb.render import render_svg
from tensionweb.webbuild import pairwise_web

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@st.composite
def problem_docs(draw):
    d = draw(st.sampled_from([2, 3]))
    n = draw(st.integers(2, 6))
    coords = st.floats(-1e12, 1e12, allow_nan=False)
    P = draw(st.lists(st.tuples(*[coords] * d), min_size=n, max_size=n, unique=True))
    P = [p for k, p in enumerate(P) if all(np.linalg.norm(np.subtract(p, q)) > 1e-6 for q in P[:k])]
    assume(len(P) >= 2)
    F = draw(st.lists(st.tuples(*[finite] * d), min_size=len(P), max_size=len(P)))
    tols = draw(st.none() | st.fixed_dictionaries({}, optional={
        "tol_feas": st.floats(1e-15, 1e-3), "tol_eq": st.floats(1e-15, 1e-3), "tol_geom": st.floats(1e-15, 1e-3)}))
    return ProblemDocument(d, tuple(P), tuple(F), tols)


@st.composite
def web_docs(draw):
    d = draw(st.sampled_from([2, 3]))
    n = draw(st.integers(2, 7))
    coords = st.floats(-1e6, 1e6, allow_nan=False)
    P = draw(st.lists(st.tuples(*[coords] * d), min_size=n, max_size=n, unique=True))
    P = [p for k, p in enumerate(P) if all(np.linalg.norm(np.subtract(p, q)) > 1e-6 for q in P[:k])]
    n = len(P)
    terms = draw(st.integers(0, n))
    roles = tuple(list(range(terms)) + [INTERNAL] * (n - terms))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    E = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs))) if pairs else []
    T = tuple(draw(st.none() | finite) for _ in E)
    return WebDocument(d, tuple(P), roles, tuple(sorted(E)), T)


@settings(max_examples=100, deadline=None)
@given(problem_docs())
def test_problem_round_trip_is_identity(doc):
    text = dumps(doc)
    back = loads_problem(text)
    assert back == doc
    assert dumps(back) == text


@settings(max_examples=100, deadline=None)
@given(web_docs())
def test_web_round_trip_is_identity(doc):
    text = dumps(doc)
    back = loads_web(text)
    assert back == doc
    assert dumps(back) == text


def test_unknown_and_missing_fields_are_rejected():
    obj = ProblemDocument.from_config(fixtures.square_radial()).to_obj()
    obj["colour"] = "red"
    with pytest.raises(DocumentError, match="unknown field"):
        loads_problem(json.dumps(obj))
    obj.pop("colour")
    obj["terminals"][0]["mass"] = 1
    with pytest.raises(DocumentError, match=r"terminals\[0\]"):
        loads_problem(json.dumps(obj))
    obj["terminals"][0].pop("mass")
    obj.pop("dimension")
    with pytest.raises(DocumentError, match="missing"):
        loads_problem(json.dumps(obj))


def test_schema_version_and_values_are_checked():
    obj = ProblemDocument.from_config(fixtures.square_radial()).to_obj()
    obj["schema_version"] = 2
    with pytest.raises(DocumentError, match="schema_version"):
        loads_problem(json.dumps(obj))
    obj["schema_version"] = 1
    obj["terminals"][0]["force"] = [1, "x"]
    with pytest.raises(DocumentError):
        loads_problem(json.dumps(obj))
    with pytest.raises(DocumentError):
        loads_problem('{"schema_version": 1, "dimension": 2, "terminals": [{"position": [NaN, 0], "force": [0, 0]}]}')


def test_malformed_json_reports_position():
    with pytest.raises(DocumentError, match="line 3, column"):
        loads_problem('{\n  "schema_version": 1,\n  "dimension" 2\n}')


def test_bad_web_roles_and_edges():
    good = WebDocument.from_web(Web([[0, 0], [1, 0]], [0, INTERNAL], [[0, 1]]), [1.0]).to_obj()
    bad = json.loads(json.dumps(good))
    bad["nodes"][1]["role"] = "hub"
    with pytest.raises(DocumentError, match="role"):
        loads_web(json.dumps(bad))
    bad = json.loads(json.dumps(good))
    bad["edges"][0]["j"] = 5
    with pytest.raises(DocumentError):
        loads_web(json.dumps(bad))


# ------------------------------------------------------------------ render

def test_render_is_deterministic_and_valid_svg():
    cfg = fixtures.figure1()
    web, t = pairwise_web(cfg)
    a, b = render_svg(web, t, cfg), render_svg(web, t, cfg)
    assert a.encode() == b.encode()
    root = ET.fromstring(a)
    assert root.tag.endswith("svg")
    assert len(root.findall(".//{http://www.w3.org/2000/svg}line")) == web.n_edges + cfg.n


def test_empty_web_renders():
    web = Web(np.zeros((0, 2)), [], np.zeros((0, 2), dtype=int))
    ET.fromstring(render_svg(web))


def test_3d_render_needs_projection():
    web = Web(fixtures.CUBE, list(range(8)), [[0, 1]])
    with pytest.raises(ValueError):
        render_svg(web)
    ET.fromstring(render_svg(web, projection="xz"))


# --------------------------------------------------------------------- cli

def _write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(dumps(doc))
    return str(p)


def test_cli_check_exit_codes(tmp_path, capsys):
    ok = _write(tmp_path, "ok.json", ProblemDocument.from_config(fixtures.stretch_pair()))
    bad = _write(tmp_path, "bad.json", ProblemDocument.from_config(fixtures.compress_pair()))
    assert cli.main(["check", ok]) == cli.OK
    out = json.loads(capsys.readouterr().out)
    assert out["admissible"] is True
    assert cli.main(["check", bad]) == cli.NEGATIVE
    out = json.loads(capsys.readouterr().out)
    assert out["admissible"] is False and "witness_displacement" in out
    assert cli.main(["check", str(tmp_path / "missing.json")]) == cli.BAD_INPUT
    (tmp_path / "broken.json").write_text("{")
    assert cli.main(["check", str(tmp_path / "broken.json")]) == cli.BAD_INPUT
    assert cli.main(["frobnicate"]) == cli.BAD_INPUT


def test_cli_stuck_reports_grid(tmp_path, capsys):
    p = _write(tmp_path, "arrow.json", ProblemDocument.from_config(fixtures.arrowhead()))
    assert cli.main(["stuck", p]) == cli.NEGATIVE
    out = json.loads(capsys.readouterr().out)
    assert out["classification"].startswith("completely_stuck")
    assert out["admissible_all_shifted"] == [False, False, False]


def test_cli_build_verify_render(tmp_path, capsys):
    prob = _write(tmp_path, "sq.json", ProblemDocument.from_config(fixtures.square_radial()))
    web = str(tmp_path / "web.json")
    assert cli.main(["build", prob, "--mode", "uniloadable", "--out", web]) == cli.OK
    assert cli.main(["verify", web, prob, "--uniloadable"]) == cli.OK
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] and out["checks"]["uniloadable"]["passed"]
    assert cli.main(["michell", web, prob]) == cli.OK
    out = json.loads(capsys.readouterr().out)
    assert out["cost"] == pytest.approx(out["work"])
    svg1, svg2 = tmp_path / "a.svg", tmp_path / "b.svg"
    assert cli.main(["render", web, "--problem", prob, "--out", str(svg1)]) == cli.OK
    assert cli.main(["render", web, "--problem", prob, "--out", str(svg2)]) == cli.OK
    assert svg1.read_bytes() == svg2.read_bytes()


def test_cli_simplify_loops(tmp_path, capsys):
    prob = _write(tmp_path, "sq.json", ProblemDocument.from_config(fixtures.square_radial()))
    web = str(tmp_path / "pair.json")
    simple = str(tmp_path / "simple.json")
    assert cli.main(["build", prob, "--out", web]) == cli.OK
    assert cli.main(["simplify", web, prob, "--out", simple]) == cli.OK
    assert "minimal loops: 0" in capsys.readouterr().err
    assert cli.main(["verify", simple, prob]) == cli.OK


def test_cli_render_3d_requires_projection(tmp_path):
    web = WebDocument.from_web(Web(fixtures.CUBE, list(range(8)), [[0, 1]]))
    p = _write(tmp_path, "cube.json", web)
    assert cli.main(["render", p]) == cli.BAD_INPUT
    assert cli.main(["render", p, "--project", "xy", "--out", str(tmp_path / "c.svg")]) == cli.OK


def test_cli_rejects_bad_tolerance(tmp_path):
    prob = _write(tmp_path, "sq.json", ProblemDocument.from_config(fixtures.square_radial()))
    assert cli.main(["check", prob, "--tol", "-1"]) == cli.BAD_INPUT


def test_tolerance_precedence(monkeypatch):
    doc = ProblemDocument.from_config(fixtures.square_radial(), {"tol_feas": 1e-7, "tol_geom": 1e-10})
    monkeypatch.delenv("TENSIONWEB_TOL", raising=False)
    tol = cli._tolerances(doc, None)
    assert tol.tol_feas == 1e-7 and tol.tol_geom == 1e-10
    monkeypatch.setenv("TENSIONWEB_TOL", "1e-5")
    tol = cli._tolerances(doc, None)
    assert tol.tol_feas == 1e-5 and tol.tol_eq == 1e-5 and tol.tol_geom == 1e-10
    tol = cli._tolerances(doc, 1e-3)
    assert tol.tol_feas == 1e-3
