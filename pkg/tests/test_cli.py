import json

from multisem.cli import main
from multisem.dataset import read_manifest
from multisem.hierarchy import LabelHierarchy


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_build_fixtures(tmp_path, capsys, train_fixture, val_fixture, coco):
    out = tmp_path / "m.jsonl"
    code, stdout, _ = run(capsys, "build", "--coco", train_fixture, "--split", "train",
                          "--coco", val_fixture, "--split", "test", "--out", out)
    assert code == 0
    stats = json.loads(stdout)["total"]
    assert stats["kept"] + stats["excluded_mixed"] + stats["excluded_public_only"] + stats["excluded_empty"] == 23
    assert stats["kept"] == 15 == sum(stats["per_coarse"].values())
    records = read_manifest(out.read_bytes(), coco)
    assert sum(r.split == "test" for r in records) == 3


def test_build_errors(tmp_path, capsys, train_fixture):
    assert run(capsys, "build", "--coco", tmp_path / "missing.json", "--split", "train", "--out", tmp_path / "m")[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    code, _, err = run(capsys, "build", "--coco", bad, "--split", "train", "--out", tmp_path / "m")
    assert code == 2 and "bad.json" in err
    unknown = tmp_path / "unk.json"
    unknown.write_text(json.dumps({"images": [], "annotations": [], "categories": [{"id": 1, "name": "unicorn"}]}))
    assert run(capsys, "build", "--coco", unknown, "--split", "train", "--out", tmp_path / "m")[0] == 1
    assert run(capsys, "build", "--coco", train_fixture, "--out", tmp_path / "m")[0] == 1


def synth(tmp_path, capsys, tag="a", seed=7, n=400):
    paths = {k: tmp_path / f"{tag}_{k}" for k in ("manifest", "features", "hierarchy")}
    code, _, _ = run(capsys, "synth", "--n", n, "--seed", seed, "--out", paths["manifest"],
                     "--features", paths["features"], "--hierarchy-out", paths["hierarchy"])
    assert code == 0
    return paths


def test_synth_idempotent(tmp_path, capsys):
    a, b = synth(tmp_path, capsys, "a"), synth(tmp_path, capsys, "b")
    for k in a:
        assert a[k].read_bytes() == b[k].read_bytes()
    LabelHierarchy.from_json(a["hierarchy"].read_text())


def test_synth_bad_config(tmp_path, capsys):
    code, _, _ = run(capsys, "synth", "--t-fine", 2, "--m-coarse", 4, "--out", tmp_path / "m",
                     "--features", tmp_path / "f", "--hierarchy-out", tmp_path / "h")
    assert code == 1


def pipeline(tmp_path, capsys, tag, mode="two-level", fine_loss="focal", rule="topk"):
    d = synth(tmp_path, capsys, tag)
    model, trace, preds, report = (tmp_path / f"{tag}_{k}" for k in ("model", "trace", "preds", "report"))
    assert run(capsys, "train", "--manifest", d["manifest"], "--features", d["features"], "--hierarchy",
               d["hierarchy"], "--epochs", 20, "--seed", 3, "--mode", mode, "--fine-loss", fine_loss,
               "--out", model, "--trace", trace)[0] == 0
    assert run(capsys, "predict", "--model", model, "--features", d["features"], "--out", preds)[0] == 0
    code, stdout, _ = run(capsys, "eval", "--preds", preds, "--truth", d["manifest"], "--hierarchy", d["hierarchy"],
                          "--split", "test", "--rule", rule, "--out", report)
    assert code == 0 and stdout.startswith(f"eval[{rule}]")
    return [model, trace, preds, report]


def test_pipeline_byte_identical(tmp_path, capsys):
    first = pipeline(tmp_path, capsys, "x")
    second = pipeline(tmp_path, capsys, "y")
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()
    report = json.loads(first[3].read_text())
    assert report["rule"] == {"name": "topk"} and report["n"] == sum(report["counts"].values())


def test_coarse_only_pipeline(tmp_path, capsys):
    report = json.loads(pipeline(tmp_path, capsys, "c", mode="coarse-only")[3].read_text())
    assert report["coarse_accuracy"] > 0.8
    assert report["fine_accuracy"] < 0.5


def test_threshold_pipeline(tmp_path, capsys):
    report = json.loads(pipeline(tmp_path, capsys, "t", fine_loss="bce", rule="threshold")[3].read_text())
    assert report["rule"] == {"name": "threshold", "tau": 0.7}


def test_predict_dim_mismatch(tmp_path, capsys):
    d = synth(tmp_path, capsys)
    model = tmp_path / "model.json"
    run(capsys, "train", "--manifest", d["manifest"], "--features", d["features"], "--hierarchy", d["hierarchy"],
        "--epochs", 1, "--out", model)
    feats = tmp_path / "f5.jsonl"
    feats.write_text('{"id":"s000000","x":[1,2,3,4,5]}\n')
    assert run(capsys, "predict", "--model", model, "--features", feats, "--out", tmp_path / "p")[0] == 1
    assert run(capsys, "predict", "--model", tmp_path / "nope", "--features", feats, "--out", tmp_path / "p")[0] == 2


def test_eval_perfect_and_missing(tmp_path, capsys, coco):
    d = synth(tmp_path, capsys, n=60)
    h = LabelHierarchy.from_json(d["hierarchy"].read_text())
    records = read_manifest(d["manifest"].read_bytes(), h)
    preds = tmp_path / "perfect.jsonl"
    preds.write_text("".join(json.dumps({"id": r.id, "fine_pred": sorted(r.fine), "coarse_pred": r.coarse}) + "\n"
                             for r in records))
    report = tmp_path / "r.json"
    code, stdout, _ = run(capsys, "eval", "--preds", preds, "--truth", d["manifest"], "--hierarchy", d["hierarchy"],
                          "--out", report)
    doc = json.loads(report.read_text())
    assert code == 0 and doc["ia"] == doc["ir"] == doc["ip"] == doc["if"] == 1.0
    preds.write_text("\n".join(preds.read_text().splitlines()[1:]) + "\n")
    code, _, err = run(capsys, "eval", "--preds", preds, "--truth", d["manifest"], "--hierarchy", d["hierarchy"],
                       "--out", report)
    assert code == 1 and records[0].id in err
    assert run(capsys, "eval", "--preds", preds, "--truth", d["manifest"], "--hierarchy", d["hierarchy"],
               "--rule", "threshold", "--tau", "1.5", "--out", report)[0] == 1


def test_check_tables(capsys):
    code, stdout, _ = run(capsys, "check-tables")
    assert code == 0
    assert "0.85804" in stdout and "0.79750" in stdout
    assert "max deviation 0.0075" in stdout
