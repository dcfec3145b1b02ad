import csv
import json

import pytest
from click.testing import CliRunner

from colombeau.cli import main
from colombeau.runner import REPORT_SCHEMA, Report, csv_rows, emit, load_report, run_scenario, text_summary
from colombeau.scenario import ScenarioError, bundled_names, bundled_path, load_scenario, parse_scenario
from oracle_values import PHI_Q_HALF_LINE

HEADER = 'schema = 1\nname = "t"\n[battery]\nq_max = 3\ngrid = { base = 0.5, start_exp = 4, end_exp = 20 }\n'


def test_bundled_scenarios_are_listed():
    assert {"delta_squared", "pointvalue_heaviside"} <= set(bundled_names())


@pytest.fixture(scope="module")
def delta_report():
    return run_scenario(load_scenario(bundled_path("delta_squared")))


def test_delta_squared_report(delta_report):
    t = {r.id: r for r in delta_report.tasks}
    slopes = t["delta_squared_order"].data["slopes"]
    assert all(abs(s + 2) <= 0.1 for s in slopes.values())
    neg = t["delta_squared_negligible"]
    assert neg.verdict["kind"] == "RefutedWithWitness"
    assert neg.replay["matches"]


def test_pointvalue_heaviside_report():
    rep = run_scenario(load_scenario(bundled_path("pointvalue_heaviside")))
    t = {r.id: r for r in rep.tasks}
    w = t["G_at_X"].verdict["witness"]
    assert t["G_at_X"].verdict["kind"] == "RefutedWithWitness"
    F = PHI_Q_HALF_LINE[w["q"]]
    assert w["magnitude"] == pytest.approx(abs(F * F - F), rel=1e-9)
    assert t["GX_strictly_nonzero"].verdict["kind"] == "SupportedUpTo"
    assert not rep.failed


def test_json_round_trip_and_csv_and_text(delta_report, tmp_path):
    files = emit(delta_report, tmp_path)
    text = (tmp_path / "report.json").read_text()
    back = load_report(tmp_path / "report.json")
    assert back.to_json() == text
    assert json.loads(text)["schema"] == REPORT_SCHEMA
    rows = list(csv.DictReader((tmp_path / "estimates.csv").open()))
    assert len(rows) == sum(len(t.estimates) for t in delta_report.tasks) == len(csv_rows(delta_report))
    lines = (tmp_path / "summary.txt").read_text().splitlines()
    for t in delta_report.tasks:
        assert sum(line.startswith(f"{t.id} [") for line in lines) == 1
    assert "RefutedWithWitness" in text_summary(delta_report)
    assert {p.name for p in files} == {"report.json", "timings.json", "estimates.csv", "summary.txt"}


def test_report_schema_is_checked():
    with pytest.raises(ValueError):
        Report.from_dict({"schema": "other/9"})


def test_empty_scenario(tmp_path):
    sc = parse_scenario('schema = 1\nname = "empty"\n')
    rep = run_scenario(sc)
    assert rep.tasks == [] and not rep.failed
    r = CliRunner().invoke(main, ["run", str(_write(tmp_path, 'schema = 1\n')), "--out", str(tmp_path / "o")])
    assert r.exit_code == 0


def _write(tmp_path, text, name="s.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


@pytest.mark.parametrize("body,msg", [
    ('[objects.A]\nkind = "efunc"\nexpr = "B"\n[objects.B]\nkind = "efunc"\nexpr = "A"\n', "cyclic"),
    ('[objects.A]\nkind = "efunc"\nexpr = "Z * 2"\n', "undefined name 'Z'"),
    ('[objects.r]\nkind = "number"\nsexpr = "(add (scale_of)"\n', "unclosed"),
    ('[[tasks]]\nkind = "ge_negligible"\nm_max = 99\n', "outside"),
    ('[[tasks]]\nkind = "ge_negligible"\ntarget = "nope"\n', "undefined name 'nope'"),
    ('[objects.A]\nkind = "efunc"\nexpr = "A +"\n', "column"),
])
def test_scenario_errors(body, msg):
    with pytest.raises(ScenarioError, match=msg):
        parse_scenario(HEADER + body)


def test_unsupported_schema_and_toml_errors():
    with pytest.raises(ScenarioError, match="unsupported scenario schema"):
        parse_scenario("schema = 7\n")
    with pytest.raises(ScenarioError, match="line"):
        parse_scenario("schema = = 1\n")


def test_task_errors_give_exit_code_one(tmp_path):
    body = HEADER + '[objects.d]\nkind = "delta"\n[[tasks]]\nid = "bad"\nkind = "no_such_kind"\ntarget = "d"\n'
    r = CliRunner().invoke(main, ["run", str(_write(tmp_path, body)), "--out", str(tmp_path / "o")])
    assert r.exit_code == 1
    rep = load_report(tmp_path / "o" / "report.json")
    assert rep.tasks[0].status == "error" and "unknown task kind" in rep.tasks[0].error


def test_refutation_is_not_a_failure(tmp_path):
    body = HEADER + ('[objects.d]\nkind = "delta"\n[objects.R]\nkind = "efunc"\nexpr = "d * d"\n'
                     '[[tasks]]\nkind = "ge_negligible"\ntarget = "R"\nK = [[0.0, 0.0]]\n')
    r = CliRunner().invoke(main, ["run", str(_write(tmp_path, body)), "--out", str(tmp_path / "o"), "--quiet"])
    assert r.exit_code == 0


def test_cli_overrides_env_and_formats(tmp_path, monkeypatch):
    monkeypatch.setenv("COLOMBEAU_OUT", str(tmp_path / "env"))
    r = CliRunner().invoke(main, ["run", "delta_squared", "--format", "json", "--q-max", "2",
                                  "--grid-exponents", "4:20", "--parallel"])
    assert r.exit_code == 0, r.output
    rep = json.loads((tmp_path / "env" / "report.json").read_text())
    assert rep["battery"]["id"] == "battery/n1/q2/r1.0/eps0.5^4..20"
    assert not (tmp_path / "env" / "estimates.csv").exists()
    assert CliRunner().invoke(main, ["run", "delta_squared", "--format", "xml"]).exit_code == 2
    assert CliRunner().invoke(main, ["run", "delta_squared", "--grid-exponents", "4-20"]).exit_code == 2
    assert CliRunner().invoke(main, ["run", "no_such_scenario"]).exit_code == 2


def test_parallel_matches_sequential(tmp_path):
    sc = load_scenario(bundled_path("delta_squared"))
    a = run_scenario(sc).to_json()
    b = run_scenario(load_scenario(bundled_path("delta_squared")), parallel=True).to_json()
    assert a == b


def test_list_command():
    r = CliRunner().invoke(main, ["list"])
    assert r.exit_code == 0 and "delta_squared" in r.output


ALL_KINDS = HEADER + '''
[domain]
n = 1
boxes = [[[-1.0, 1.0]]]
[objects.d]
kind = "delta"
[objects.id]
kind = "smooth"
expr = "x"
[objects.e]
kind = "number"
sexpr = "(scale_of)"
[objects.X]
kind = "point"
sexpr = "(point (const 0))"
support = [[0.0, 0.0]]
[objects.R]
kind = "efunc"
expr = "rho(e) + 0 * iota(id)"
[objects.A]
kind = "matrix"
rows = [["e", 0.0], [0.0, "e"]]
[objects.u]
kind = "net"
expr = "bump(x/eps - 1)"
[objects.xg]
kind = "gs_point"
components = ["eps"]
support = [[0.0, 0.75]]
[objects.net]
kind = "test_object_net"
q = 1
modulation = 0.25
[[tasks]]
kind = "order"
target = "d"
x = [0.0]
q = [0, 1]
[[tasks]]
kind = "characterization"
target = "d"
K = [[-0.25, 0.25]]
[[tasks]]
kind = "number_moderate"
target = "e"
[[tasks]]
kind = "invertible"
target = "R"
Ks = [[[0.0, 0.0]], [[-0.5, 0.5]]]
[[tasks]]
kind = "leq"
r = "e"
s = "e"
[[tasks]]
kind = "nondegenerate"
target = "A"
[[tasks]]
kind = "ge_constant"
target = "id"
point = "X"
K1 = [[-0.25, 0.25]]
K2 = [[-0.25, 0.25]]
K_points = 9
[[tasks]]
kind = "gs_moderate"
target = "u"
K = [[0.0, 0.75]]
[[tasks]]
kind = "gs_negligible"
target = "u"
K = [[0.0, 0.75]]
[[tasks]]
kind = "gs_constant"
target = "u"
K = [[0.25, 0.75]]
[[tasks]]
kind = "gs_witness"
target = "u"
K = [[0.0, 0.75]]
K_points = 1025
[[tasks]]
kind = "gs_point_eval"
target = "u"
point = "xg"
[[tasks]]
kind = "gd_moderate"
target = "d"
K = [[-0.25, 0.25]]
nets = ["net"]
[[tasks]]
kind = "gd_negligible"
target = "R"
K = [[-0.25, 0.25]]
'''


def test_every_task_kind_runs_and_witnesses_replay():
    rep = run_scenario(parse_scenario(ALL_KINDS))
    assert not rep.failed, [t.error for t in rep.tasks if t.error]
    for t in rep.tasks:
        if t.verdict and t.verdict["kind"] == "RefutedWithWitness":
            assert t.replay is not None and t.replay["matches"], t.id
    assert rep.to_json() == run_scenario(parse_scenario(ALL_KINDS)).to_json()
