import json

import numpy as np
import pytest

from mdpreduce.cli import dumps, main, run
from mdpreduce.modelfile import (ModelFileError, fixture_names, model_document, parse_model,
                                 parse_text, write_model)
from mdpreduce.models import build_inventory_mdp, fix_inv
from mdpreduce.oracle import random_transient_mdp


def same_model(a, b):
    return (a.states == b.states and a.actions == b.actions
            and all(np.array_equal(getattr(a, k), getattr(b, k))
                    for k in ("row_start", "indptr", "indices", "data", "cost")))


def test_fixtures_bundled():
    assert {"fix_a", "fix_r1", "fix_inv", "fix_inv_lost", "diverging"} <= set(fixture_names())


def test_parse_fix_a(fix_a):
    pm = parse_model("fix_a")
    assert pm.mdp.n_states == 2 and same_model(pm.mdp, fix_a)


def test_parse_remark1_block():
    pm = parse_model("fix_r1")
    assert pm.mdp.n_states == 5 and pm.ell == "ell"


def test_parse_inventory_block(fix_inv_mdp):
    pm = parse_model("fix_inv")
    assert same_model(pm.mdp, fix_inv_mdp) and pm.ell == "0_L"


@pytest.mark.parametrize("name", ["fix_a", "fix_r1", "fix_inv", "fix_inv_lost", "diverging"])
def test_round_trip_fixtures(tmp_path, name):
    pm = parse_model(name)
    path = tmp_path / "m.json"
    write_model(pm.mdp, path, pm.V, pm.ell)
    back = parse_model(path)
    assert same_model(pm.mdp, back.mdp) and back.ell == pm.ell


def test_round_trip_random(tmp_path, rng):
    for k in range(10):
        m = random_transient_mdp(rng)
        V = 1 + rng.random(m.n_states)
        p = tmp_path / f"r{k}.json"
        write_model(m, p, V)
        back = parse_model(p)
        assert same_model(m, back.mdp)
        assert np.array_equal(back.V.values, V)


def test_unknown_label_named():
    doc = model_document(parse_model("fix_a").mdp)
    doc["kernel"].append(["s0", "a0", "ghost", 0.1])
    with pytest.raises(ModelFileError, match=r"kernel\[2\].*'ghost'"):
        parse_text(json.dumps(doc))


def test_malformed_json_has_line():
    with pytest.raises(ModelFileError, match="line 3"):
        parse_text('{\n "states": ["a"],\n "actions": {,}\n}')


def test_generator_excludes_lists():
    with pytest.raises(ModelFileError, match="excludes explicit keys"):
        parse_text(json.dumps({"remark1": {"grid": [0.2]}, "states": ["x"]}))


def test_invalid_values_rejected():
    doc = model_document(parse_model("fix_a").mdp)
    doc["cost"][0][2] = -1.0
    with pytest.raises(ModelFileError, match="negative cost"):
        parse_text(json.dumps(doc))
    doc = model_document(parse_model("fix_a").mdp)
    doc["V"] = {"s0": 0.5}
    with pytest.raises(ModelFileError, match="V"):
        parse_text(json.dumps(doc))


def test_missing_cost_named():
    doc = model_document(parse_model("fix_a").mdp)
    doc["cost"].pop()
    with pytest.raises(ModelFileError, match="missing cost"):
        parse_text(json.dumps(doc))


def test_reduce_average_fix_inv(tmp_path):
    out = tmp_path / "r.json"
    csv_path = tmp_path / "h.csv"
    report, code = run(["reduce-average", "--model", "fix_inv", "--ell", "0_L",
                        "--out", str(out), "--csv", str(csv_path)])
    assert code == 0
    data = json.loads(out.read_text())
    assert data["status"] == "ok"
    acoe = next(c for c in data["checks"] if c["id"] == "acoe-residual")
    assert acoe["value"] <= 1e-8
    assert set(data["solution"]["h"]) == {"0", "1", "2", "3", "4", "0_L"}
    assert csv_path.read_text().splitlines()[0] == "state,value"


def test_remark1_demo(tmp_path):
    out = tmp_path / "r.json"
    _, code = run(["remark1-demo", "--out", str(out)])
    data = json.loads(out.read_text())
    assert code == 0
    assert data["discontinuity_gap"] >= 0.9
    assert abs(data["mu_ell"]["ell"] - 1.618033988749895) <= 1e-10


def test_certify_t_diverging(tmp_path):
    out = tmp_path / "r.json"
    _, code = run(["certify-t", "--model", "diverging", "--out", str(out)])
    assert code == 1
    assert "Assumption T appears violated" in json.loads(out.read_text())["message"]


def test_input_errors(tmp_path):
    assert run(["reduce-total", "--model", str(tmp_path / "none.json"),
                "--out", str(tmp_path / "a")])[1] == 2
    assert run(["solve", "--model", "fix_r1", "--out", str(tmp_path / "b")])[1] == 2
    assert run(["reduce-average", "--model", "fix_a", "--ell", "s0",
                "--out", str(tmp_path / "c")])[1] == 2
    assert run(["bogus-command"])[1] == 2


def test_reduce_total_with_oracle(tmp_path):
    out = tmp_path / "r.json"
    _, code = run(["reduce-total", "--model", "fix_a", "--oracle", "--out", str(out)])
    data = json.loads(out.read_text())
    assert code == 0
    assert data["solution"]["value"]["s0"] == pytest.approx(8 / 3)
    assert all(c["pass"] for c in data["checks"])


def test_reports_byte_identical(tmp_path):
    for k in range(2):
        run(["reduce-average", "--model", "fix_r1", "--out", str(tmp_path / f"{k}.json")])
    assert (tmp_path / "0.json").read_bytes() == (tmp_path / "1.json").read_bytes()


def test_dumps_formatting():
    text = dumps({"a": 0.1, "b": [1, 2.5], "c": float("inf"), "d": None, "e": True})
    assert '"a": 0.10000000000000001' in text
    assert json.loads(text)["c"] == "inf"


def test_main_entry(tmp_path):
    assert main(["validate", "--model", "fix_inv", "--out", str(tmp_path / "v.json")]) == 0


def test_inventory_block_generator_matches_builder(tmp_path):
    m = build_inventory_mdp(fix_inv())
    p = tmp_path / "inv.json"
    p.write_text(json.dumps({"inventory": {
        "capacity": 4, "max_order": 2, "demand_pmf": [[0, .3], [1, .3], [2, .2], [3, .2]],
        "fixed_cost": 5, "unit_cost": 1, "holding": [0, .5, 1, 1.5, 2]}}))
    assert same_model(parse_model(p).mdp, m)
