import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from arbgeom import cli
from oracles import random_reciprocal_graph


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def triangle(tmp_path):
    p = tmp_path / "tri.csv"
    p.write_text("from,to,rate\nA,B,1.2\nB,C,1.0\nC,A,1.0\n")
    return p


@pytest.fixture
def consistent(tmp_path):
    p = tmp_path / "ok.json"
    p.write_text(json.dumps({"edges": [
        {"from": "USD", "to": "EUR", "rate": 0.5},
        {"from": "EUR", "to": "USD", "rate": 2.0},
        {"from": "EUR", "to": "JPY", "rate": 4.0},
    ]}))
    return p


class TestArb:
    def test_triangle_exit_code(self, triangle):
        code, out, err = run("arb", str(triangle), "--format", "json")
        assert code == 2 and err == ""
        doc = json.loads(out)
        assert doc["cycle"] == ["A", "B", "C", "A"]
        assert doc["log_gain"] == pytest.approx(0.182322, abs=1e-6)

    def test_triangle_table(self, triangle):
        code, out, _ = run("arb", str(triangle))
        assert code == 2
        assert "A B C A" in out and "0.182321557" in out

    def test_triangle_scan(self, triangle):
        code, out, _ = run("arb", str(triangle), "--scan", "triangles", "--format", "csv")
        assert code == 2
        assert out.splitlines() == ["cycle,log_gain", "A B C A,0.182321557"]

    def test_consistent(self, consistent):
        code, out, _ = run("arb", str(consistent), "--format", "json")
        assert code == 0
        doc = json.loads(out)
        assert doc["consistent"] is True
        assert doc["potentials"]["JPY"] == pytest.approx(math.log(2.0), abs=1e-9)

    def test_consistent_table(self, consistent):
        code, out, _ = run("arb", str(consistent))
        assert code == 0 and out.startswith("consistent\n")

    def test_tolerance_override(self, tmp_path):
        p = tmp_path / "r.csv"
        p.write_text("from,to,rate\nA,B,1.001\nB,A,1.0\n")
        assert run("arb", str(p))[0] == 2
        assert run("arb", str(p), "--tolerance", "cycle=0.01")[0] == 0
        assert run("arb", str(p), "--tol", "0.01")[0] == 0

    @pytest.mark.parametrize("body,where", [
        ("from,to,rate\nA,B,1.0\nB,A,-1\n", "line 3, column 3"),
        ("from,to,rate\nA,B,abc\n", "line 2, column 3"),
        ("from,to,rate\nA,B\n", "line 2, column 3"),
        ("from,to,rate\nA,A,1.0\n", "line 2, column 1"),
        ("src,dst,r\nA,B,1.0\n", "line 1, column 1"),
        ("from,to,rate\nA,B,1.0\nA,B,2.0\n", "line 3"),
    ])
    def test_parse_errors(self, tmp_path, body, where):
        p = tmp_path / "bad.csv"
        p.write_text(body)
        code, out, err = run("arb", str(p))
        assert code == 1 and out == ""
        assert where in err

    def test_json_errors(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"edges": [{"from": "A", "to": "B", "rate": 1}, {"from": "A", "to": "B", "rate": 2}]}))
        code, _, err = run("arb", str(p))
        assert code == 1 and "edge 2: duplicate edge A->B" in err
        p.write_text("{not json")
        assert run("arb", str(p))[0] == 1

    def test_missing_file(self, tmp_path):
        code, _, err = run("arb", str(tmp_path / "nope.csv"))
        assert code == 1 and err.startswith("arbgeom: error:")


class TestBoyling:
    def test_record(self):
        code, out, _ = run("boyling", "--format", "json")
        assert code == 0
        doc = json.loads(out)
        assert doc["slope_lower"] == pytest.approx(-1.5, abs=0.05)
        assert doc["slope_upper"] == pytest.approx(-2.0, abs=0.05)
        assert doc["loop_gain"] == pytest.approx(-0.017578125, abs=1e-6)

    def test_curve_csv(self, tmp_path):
        path = tmp_path / "curve.csv"
        code, _, _ = run("boyling", "--curve-out", str(path), "--arclength", "0.1")
        assert code == 0
        rows = list(csv.DictReader(path.open()))
        assert len(rows) == 101
        assert all(abs(float(r["t"]) - 6.0) < 1e-6 for r in rows)

    def test_bad_gap(self):
        code, _, err = run("boyling", "--gap", "0.5")
        assert code == 1 and "arbgeom: error" in err


class TestExpfam:
    def test_bernoulli(self):
        code, out, _ = run("expfam", "--model", "bernoulli", "--theta", "0", "--format", "json")
        doc = json.loads(out)
        assert code == 0
        assert doc["psi"] == pytest.approx(math.log(2), abs=1e-8)
        assert doc["eta"] == [0.5]

    def test_categorical_dimension_mismatch(self):
        code, _, err = run("expfam", "--model", "categorical", "--theta", "0")
        assert code == 1 and "expected 2 value(s)" in err

    def test_model_file(self, tmp_path):
        p = tmp_path / "m.json"
        p.write_text(json.dumps({"kind": "poisson_truncated", "params": {"max_count": 30}}))
        code, out, _ = run("expfam", "--model-file", str(p), "--format", "json")
        assert code == 0 and json.loads(out)["eta"][0] == pytest.approx(1.0, abs=1e-8)


class TestSufficiency:
    @pytest.mark.parametrize("family,counts", [
        ("exp3", [3, 5, 7, 9, 11, 13]),
        ("mixture", [3, 6, 10, 15, 21, 28]),
        ("bernoulli", [2, 3, 4, 5, 6, 7]),
    ])
    def test_growth(self, family, counts):
        code, out, _ = run("sufficiency", "--family", family, "--format", "csv")
        assert code == 0
        rows = list(csv.DictReader(io.StringIO(out)))
        assert [int(r["class_count"]) for r in rows] == counts

    def test_unknown_family(self):
        assert run("sufficiency", "--family", "nope")[0] == 1


class TestFlow:
    def test_gaussian_csv(self):
        code, out, _ = run("flow", "--model", "gaussian", "--eta0", "1", "--dt", "0.01", "--steps", "100", "--format", "csv")
        assert code == 0
        last = out.splitlines()[-1].split(",")
        assert float(last[0]) == pytest.approx(1.0)
        assert float(last[1]) == pytest.approx(math.exp(-1), abs=1e-8)

    def test_requires_eta0(self):
        code, _, err = run("flow", "--model", "bernoulli")
        assert code == 1 and "--eta0" in err

    def test_outside_domain(self):
        assert run("flow", "--model", "bernoulli", "--eta0", "1.5")[0] == 1


class TestOnsager:
    def test_antisymmetric_circle(self):
        code, out, _ = run("onsager", "--matrix", "0,1;-1,0", "--format", "json")
        doc = json.loads(out)
        assert code == 0
        assert doc["round_trip_work"] == pytest.approx(-2 * math.pi, abs=1e-6)
        assert doc["symmetric"] is False

    def test_symmetric_random_loop(self):
        code, out, _ = run("onsager", "--matrix", "2,0.5;0.5,1", "--loop", "random", "--seed", "7", "--format", "json")
        doc = json.loads(out)
        assert code == 0 and abs(doc["round_trip_work"]) <= 1e-8 and doc["symmetric"] is True

    def test_seed_determinism(self):
        a = run("onsager", "--matrix", "1,2;0,1", "--loop", "random", "--seed", "3")[1]
        b = run("onsager", "--matrix", "1,2;0,1", "--loop", "random", "--seed", "3")[1]
        c = run("onsager", "--matrix", "1,2;0,1", "--loop", "random", "--seed", "4")[1]
        assert a == b and a != c

    def test_matrix_required(self):
        assert run("onsager")[0] == 1

    def test_ragged_matrix(self):
        assert run("onsager", "--matrix", "1,2;3")[0] == 1


class TestGeneral:
    def test_no_subcommand(self):
        code, _, err = run()
        assert code == 1 and "subcommand" in err

    def test_unknown_flag(self):
        assert run("boyling", "--bogus")[0] == 1

    def test_bad_tolerance_key(self):
        code, _, err = run("boyling", "--tolerance", "cycle=1e-3")
        assert code == 1 and "unknown tolerance key" in err

    def test_nonpositive_tolerance(self):
        assert run("arb", "x.csv", "--tol", "0")[0] == 1

    def test_out_file(self, tmp_path, triangle):
        dest = tmp_path / "o.json"
        code, out, _ = run("arb", str(triangle), "--format", "json", "--out", str(dest))
        assert code == 2 and out == ""
        assert json.loads(dest.read_text())["cycle"][0] == "A"

    def test_byte_deterministic(self):
        assert run("boyling")[1] == run("boyling")[1]

    def test_help(self):
        with pytest.raises(SystemExit) as exc:
            run("--help")
        assert exc.value.code == 0

    def test_run_config_validation(self):
        with pytest.raises(ValueError):
            cli.RunConfig("nope")
        with pytest.raises(ValueError):
            cli.RunConfig("arb", output_format="xml")
        cfg = cli.RunConfig("arb", tolerances={"tol": 1e-6, "cycle": 1e-3})
        assert cfg.tol("cycle", 1.0) == 1e-3
        assert cfg.tol("potential", 1.0) == 1e-6

    def test_module_entry_point(self, triangle):
        proc = subprocess.run([sys.executable, "-m", "arbgeom", "arb", str(triangle)], capture_output=True, text=True)
        assert proc.returncode == 2
        assert "0.182321557" in proc.stdout


def _write_both(tmp_path, edges):
    c = tmp_path / "g.csv"
    c.write_text("from,to,rate\n" + "".join(f"{a},{b},{r!r}\n" for a, b, r in edges))
    j = tmp_path / "g.json"
    j.write_text(json.dumps({"edges": [{"from": a, "to": b, "rate": r} for a, b, r in edges]}))
    return c, j


class TestFormatInvariants:
    @pytest.mark.parametrize("seed", range(8))
    @pytest.mark.parametrize("fmt", ["json", "csv", "table"])
    def test_csv_json_equivalence_and_exit_code(self, tmp_path, seed, fmt):
        g = random_reciprocal_graph(np.random.default_rng(seed), max_nodes=6)
        c, j = _write_both(tmp_path, g.edges)
        for scan in ("bellman-ford", "triangles"):
            rc, out_c, _ = run("arb", str(c), "--format", fmt, "--scan", scan)
            rj, out_j, _ = run("arb", str(j), "--format", fmt, "--scan", scan)
            assert (rc, out_c) == (rj, out_j)
            reported = "log_gain" in out_c
            assert (rc == 2) == reported
