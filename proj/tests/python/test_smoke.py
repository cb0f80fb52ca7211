import json
import os
from pathlib import Path

import pytest

import pathflow

DATA = Path(os.environ.get("PATHFLOW_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


@pytest.fixture(scope="module")
def fig_ess():
    manifest = pathflow.load_manifest(DATA / "fig_ess" / "manifest.json")
    return manifest, pathflow.read_csv(DATA / "fig_ess" / "events.csv", manifest)


def test_manifest_validates(fig_ess):
    manifest, _ = fig_ess
    assert pathflow.validate_manifest(manifest) == []
    bad = json.loads(manifest.to_json())
    bad["types"][0]["color"] = "red"
    codes = [v["code"] for v in pathflow.validate_manifest(pathflow.manifest_from_dict(bad))]
    assert "bad-color" in codes


def test_fig_ess_tree(fig_ess):
    _, data = fig_ess
    assert len(data) == 2
    tree = pathflow.build(data)
    assert tree.patients == 2
    assert tree.node_count == 6
    assert tree.count([0, 1]) == 2
    assert tree.count([0, 1, 2]) == 1
    assert tree.count([0, 1, 3, 4]) == 1
    golden = pathflow.Tree.from_json((DATA / "fig_ess" / "tree.json").read_text())
    assert tree == golden
    assert pathflow.Tree.from_json(tree.to_json()) == tree


def test_progressive_matches_batch(fig_ess):
    _, data = fig_ess
    seen = []
    tree = pathflow.build_progressive(data, quantum_ms=10, workers=2, on_snapshot=seen.append)
    assert tree == pathflow.build(data)
    assert seen and seen[-1]["final"] is True
    assert seen[-1]["processed"] == seen[-1]["total"] == 2


def test_layout_and_hit_test(fig_ess):
    _, data = fig_ess
    rects = pathflow.layout(pathflow.build(data), vw=400, vh=200, mode="uniform")
    assert [r["height"] for r in rects] == [200, 200, 100, 100, 100]
    assert pathflow.hit_test(rects, 250, 150) == [0, 1, 3]
    assert pathflow.hit_test(rects, -1, -1) is None
    with pytest.raises(pathflow.ParamError):
        pathflow.layout(pathflow.build(data), mode="sideways")


def test_filters_distribution_and_diff(fig_ess):
    manifest, data = fig_ess
    spec = {"alignment": {"type": "d", "direction": "after"}}
    aligned = pathflow.build(data, spec)
    assert aligned.patients == 1
    assert aligned.count([3, 4]) == 1
    assert pathflow.normalize_filter(spec, manifest)["alignment"]["type"] == "d"
    with pytest.raises(pathflow.QueryError):
        pathflow.build(data, {"colour": 1})
    dist = pathflow.distribution(pathflow.build(data), [], "age")
    assert dist["bins"] == [{"lower": 30, "upper": 31, "count": 2}]
    older = pathflow.build(data, {"attributes": [{"attr": "age", "op": ">=", "value": 65}]})
    rows = pathflow.diff(pathflow.build(data), older)["rows"]
    assert older.patients == 0
    assert all(r["delta_count"] <= 0 for r in rows)


def test_history_persists(tmp_path, fig_ess):
    manifest, data = fig_ess
    path = tmp_path / "history.jsonl"
    history = pathflow.History(manifest, path)
    first = history.put(pathflow.build(data), label="all")
    second = history.put(pathflow.build(data, {"hidden_types": ["c"]}), {"hidden_types": ["c"]}, "no c")
    assert (first, second) == (1, 2)
    reopened = pathflow.History(manifest, path)
    assert len(reopened) == 2
    assert reopened.tree(1) == history.tree(1)
    assert reopened.get(2)["label"] == "no c"
    with pytest.raises(pathflow.NotFoundError):
        reopened.get(9)


def test_synthetic_is_deterministic():
    manifest = pathflow.load_manifest(DATA / "manifests" / "ed.json")
    params = json.loads((DATA / "synth" / "ed.json").read_text())
    params["patient_count"] = 2000
    a = pathflow.build(pathflow.synthetic(params, manifest))
    b = pathflow.build(pathflow.synthetic(params, manifest))
    assert a == b and a.patients == 2000


def test_csv_errors_are_counted(fig_ess):
    manifest, _ = fig_ess
    data = pathflow.read_csv_text("patient_id,type_name,start,end,age\n1,a,0,1,30\n1,zzz,1,2,30\n", manifest)
    assert len(data) == 1
    assert data.parse_errors == 1
    with pytest.raises(pathflow.ParseError):
        pathflow.read_csv_text("id,type\n", manifest)
