import json
import shutil
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finapprox.actions import CosetActionSpec, circulant
from finapprox.cli import (
    EXIT,
    dump_spec,
    dump_table,
    export_csv,
    export_dot,
    main,
    parse_group,
    parse_spec,
    parse_table,
    run_job,
)
from finapprox.groups import Group, Subgroup
from finapprox.pseudonorm import PartialGPN, realize_metric

Z = Group.free_abelian(1)

TOUR = {"command": "approx-tournament", "group": {"free_abelian": 1}, "orbits": [{"lattice": [[3]]}],
        "in_arrows": [[1]]}


def run_main(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_approx_tournament_job_gives_three_cycle(capsys):
    code, out, err = run_main(capsys, "run", "--json", json.dumps(TOUR), "--format", "dot")
    assert code == 0
    assert out.count("->") == 3 and out.count("[orbit=0]") == 3
    assert json.loads(err)["status"] == "ok"


def test_status_and_exit_code_per_status(capsys):
    cases = {
        "ok": TOUR,
        "not-found": {"command": "approx-graph", "group": {"free_abelian": 2},
                      "orbits": [{"lattice": [[2, 0]]}, {"lattice": [[0, 2]]}], "in_arrows": [[], []],
                      "cross": {"0,1": [[0, 0]], "1,0": [[0, 0]]}, "window": [[1, 1]], "bound": 1},
        "precondition": {"command": "approx-tournament", "group": {"free_abelian": 1},
                         "orbits": [{"lattice": [[2]]}], "in_arrows": [[]]},
        "usage": {"command": "approx-tournament", "orbits": []},
    }
    for status, job in cases.items():
        code, out, _ = run_main(capsys, "run", "--json", json.dumps(job))
        rep = json.loads(out)
        assert rep["status"] == status, (status, rep["message"])
        assert code == EXIT[status]
    assert EXIT == {"ok": 0, "not-found": 2, "precondition": 3, "usage": 4}


def test_usage_message_points_at_field():
    rep = run_job({"command": "approx-tournament", "orbits": []})
    assert rep.status == "usage" and "group" in rep.message
    rep = run_job({"command": "approx-tournament", "group": {"free_abelian": 1}, "orbits": [{"lattice": [["x"]]}]})
    assert rep.status == "usage" and "orbits[0]" in rep.message
    assert run_job({"command": "nope"}).status == "usage"


def test_refute_job():
    rep = run_job({"command": "refute", "spec": "z2-counterexample", "bound": 6})
    assert rep.status == "ok" and rep.result["found"] is False
    assert all(ok for _, ok in rep.verification)


def test_rz_witness_job():
    rep = run_job({"command": "rz-witness", "group": {"free": 2}, "element": "ba",
                   "factors": [{"words": ["a"]}, {"words": ["b"]}]})
    assert rep.status == "ok" and rep.verification == [("certificate re-verifies", True)]


def test_good_job():
    rep = run_job({"command": "good", "group": {"free": 2}, "subgroup": {"words": ["aa"]}})
    assert rep.result["status"] == "not-good"


def test_gpn_jobs():
    rep = run_job({"command": "gpn-extend", "group": {"free_abelian": 1},
                   "table": [[1, 1, 1, "1"], [0, 1, 1, "0"]], "queries": [[5, 1, 1]]})
    assert rep.status == "ok" and rep.result["values"][0]["value"] == "5"
    rep = run_job({"command": "gpn-validate", "group": {"free_abelian": 1},
                   "table": [[1, 1, 1, 1], [3, 1, 1, 4], [0, 1, 1, 0]]})
    assert rep.result["valid"] is False
    rep = run_job({"command": "gpn-turbulence", "group": {"free_abelian": 1},
                   "alpha": {"table": [[1, 1, 1, "1"], [0, 1, 1, 0]]},
                   "beta": {"table": [[1, 1, 1, "3"], [0, 1, 1, 0]]}, "epsilon": "1/2"})
    assert rep.status == "ok" and rep.result["k"] == 6 and rep.result["delta"] == "2/5"
    rep = run_job({"command": "gpn-avoid", "group": {"free_abelian": 1},
                   "window": {"table": [[1, 1, 1, 1], [0, 1, 1, 0]]},
                   "lambda": [[n, 2] for n in range(-6, 7) if n], "tail": {"kind": "bounded", "bound": 2}})
    assert rep.status == "ok" and rep.result["margin"] == "1"


def test_out_file_and_byte_stability(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    job = {"command": "realize-metric", "group": {"free_abelian": 1}, "table": [[1, 1, 1, "1/2"], [0, 1, 1, 0]],
           "radius": 2}
    for path in (a, b):
        code, _, _ = run_main(capsys, "run", "--json", json.dumps(job), "--format", "csv", "--out", str(path))
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    rows = a.read_text().splitlines()
    assert len(rows) == 6 and rows[1].split(",")[1] == "0"
    assert "1/2" in rows[1]


def test_missing_artifact_format_is_usage(capsys):
    job = {"command": "good", "group": {"free_abelian": 1}, "subgroup": {"lattice": [[3]]}}
    code, out, _ = run_main(capsys, "run", "--json", json.dumps(job), "--format", "dot")
    assert code == 4 and json.loads(out)["status"] == "usage"


def test_batch_directory(tmp_path, capsys):
    (tmp_path / "1.json").write_text(json.dumps(TOUR))
    (tmp_path / "2.json").write_text(json.dumps({"command": "approx-tournament", "orbits": []}))
    code, out, _ = run_main(capsys, "run", str(tmp_path))
    reps = json.loads(out)
    assert [r["job"] for r in reps] == ["1.json", "2.json"]
    assert [r["status"] for r in reps] == ["ok", "usage"] and code == 4


def test_bad_json_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{")
    code, out, _ = run_main(capsys, "run", str(p))
    assert code == 4 and "invalid JSON" in json.loads(out)["message"]


def test_dot_export():
    text = export_dot(circulant(3, [1]))
    assert text.startswith("digraph window {") and text.count("->") == 3
    assert export_dot(circulant(3, [1])) == text


def test_metric_csv_square_with_zero_diagonal():
    mw = realize_metric(PartialGPN.single(Z, {(1,): 1}), 2)
    rows = [r.split(",") for r in export_csv(mw).splitlines()]
    assert len(rows) == 6 and all(len(r) == 6 for r in rows)
    for k in range(1, 6):
        assert rows[k][k] == "0"


def test_spec_round_trip():
    spec = parse_spec({"group": {"free_abelian": 1}, "orbits": [{"lattice": [[3]]}, {"lattice": [[0]]}],
                       "in_arrows": [[1], [1, 2]], "cross": {"0,1": [1]}}, "tournament")
    again = parse_spec(dump_spec(spec), "tournament")
    assert dump_spec(again) == dump_spec(spec)
    assert again.orbits == spec.orbits and again.in_arrows == spec.in_arrows and again.cross == spec.cross


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.fractions(0, 10, max_denominator=12)), max_size=6))
def test_table_round_trip(entries):
    grp = Z
    table = {((g,), 1, 1): v for g, v in entries if g != 0}
    table[((0,), 1, 1)] = 0
    try:
        p = PartialGPN.symmetric(grp, [1], table)
    except ValueError:
        return
    again = parse_table(grp, json.loads(json.dumps(dump_table(p))))
    assert again.table == p.table


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-8, 8), max_size=4), st.sampled_from([0, 3, 5, 7]))
def test_spec_round_trip_random(fs, d):
    spec = CosetActionSpec(Z, [Subgroup.generated(Z, [(d,)])], [[(f,) for f in fs]])
    again = parse_spec(json.loads(json.dumps(dump_spec(spec))), "tournament")
    assert dump_spec(again) == dump_spec(spec)


def test_group_literals():
    assert parse_group({"trivial": True}).rank == 0
    assert parse_group({"free": 2}).rank == 2
    assert parse_group({"permutations": [[1, 0, 2], [2, 1, 0]]}).order == 6


@pytest.mark.skipif(shutil.which("finapprox") is None, reason="console script not installed")
def test_console_script_exit_code():
    r = subprocess.run(["finapprox", "run", "--json", json.dumps({"command": "approx-tournament"})],
                       capture_output=True, text=True)
    assert r.returncode == 4
    r = subprocess.run([sys.executable, "-m", "finapprox.cli", "run", "--json", json.dumps(TOUR)],
                       capture_output=True, text=True)
    assert r.returncode == 0
