import json
import subprocess
import sys

import numpy as np
import pytest

from hiertext.cli import main
from hiertext.data import load_dataset, read_ids
from hiertext.model import load_model
from hiertext.predictions import read_predictions
from hiertext.taxonomy import Level, TaskALabel

FAST = ["--set", "featurizer.dimension=4096", "--profile", "desk"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def a_csv(corpus_csv):
    return corpus_csv(300, "A", seed=1)


@pytest.fixture
def trained(a_csv, tmp_path):
    out = tmp_path / "run"
    assert run("train", "--data", a_csv, "--out", out, *FAST) == 0
    return out


def test_train_writes_outputs(trained, a_csv):
    for name in ("model.htxm", "predictions.csv", "metrics.json", "metrics.txt", "run.json",
                 "train_ids.txt", "validation_ids.txt"):
        assert (trained / name).exists(), name
    report = json.loads((trained / "metrics.json").read_text())
    assert report["macro_f1"] > 0.9
    assert len(report["loss_trace"]) == 6
    train_ids, val_ids = read_ids(trained / "train_ids.txt"), read_ids(trained / "validation_ids.txt")
    assert len(train_ids) == 240 and len(val_ids) == 60
    assert set(train_ids).isdisjoint(val_ids)
    assert read_predictions(trained / "predictions.csv").example_ids == tuple(val_ids)


def test_train_flags_reach_the_model(a_csv, tmp_path):
    out = tmp_path / "focal"
    assert run("train", "--data", a_csv, "--out", out, "--level", "A", "--loss", "focal",
               "--alpha", "1.0", "--gamma", "2.0", "--class-weights", "balanced", *FAST) == 0
    cfg = load_model(out / "model.htxm").metadata["train_config"]
    assert cfg["loss"] == "focal" and cfg["focal"] == {"alpha": 1.0, "gamma": 2.0}
    assert cfg["class_weights"] == "balanced"


def test_config_file_and_set(a_csv, tmp_path):
    config = tmp_path / "cfg" / "run.json"
    config.parent.mkdir()
    config.write_text(json.dumps({"train_path": str(a_csv), "output_dir": "out",
                                  "train": {"epochs": 2}, "featurizer": {"dimension": 1024}}))
    assert run("train", "--config", config, "--set", "train.epochs=3") == 0
    run_cfg = json.loads((tmp_path / "cfg" / "out" / "run.json").read_text())
    assert run_cfg["train"]["epochs"] == 3
    assert run_cfg["featurizer"]["dimension"] == 1024
    assert run_cfg["train"]["learning_rate"] == 0.05


@pytest.mark.parametrize("extra", [
    ["--set", "train.epochs=-1"],
    ["--set", "bogus=1"],
    ["--set", "featurizer.dimension=1000"],
    ["--set", "noequals"],
])
def test_bad_config_exits_2(a_csv, tmp_path, extra):
    assert run("train", "--data", a_csv, "--out", tmp_path / "o", *extra) == 2


def test_unreadable_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("train", "--config", bad) == 2
    assert run("train", "--out", tmp_path / "o") == 2


def test_train_level_b_without_categories_exits_1(tmp_path, capsys):
    path = tmp_path / "a_only.csv"
    path.write_text("rewire_id,text,label_sexist\nx1,hello there,not sexist\nx2,bye now,sexist\n")
    assert run("train", "--data", path, "--level", "B", "--out", tmp_path / "o") == 1
    assert "error" in capsys.readouterr().err


def test_train_is_byte_deterministic(a_csv, tmp_path):
    for name in ("r1", "r2"):
        assert run("train", "--data", a_csv, "--out", tmp_path / name, *FAST) == 0
    for f in ("predictions.csv", "model.htxm", "metrics.json"):
        assert (tmp_path / "r1" / f).read_bytes() == (tmp_path / "r2" / f).read_bytes()


def test_cv_covers_every_example_once(corpus_csv, tmp_path):
    data = corpus_csv(200, "B", seed=2)
    out = tmp_path / "cv"
    assert run("cv", "--data", data, "--level", "B", "--k", 5, "--out", out, *FAST) == 0
    ds = load_dataset(data, Level.B)
    oof = read_predictions(out / "oof_predictions.csv")
    assert list(oof.example_ids) == list(ds.ids)
    fold_ids = [read_ids(out / f"fold_{i}_ids.txt") for i in range(5)]
    flat = [i for ids in fold_ids for i in ids]
    assert sorted(flat) == sorted(ds.ids)
    for i in range(5):
        assert load_model(out / f"fold_{i}.htxm").level is Level.B
    manifest = json.loads((out / "fold_manifest.json").read_text())
    for key in manifest["folds"][0]["class_counts"]:
        counts = [f["class_counts"][key] for f in manifest["folds"]]
        assert max(counts) - min(counts) <= 1
    report = json.loads((out / "cv_metrics.json").read_text())
    assert len(report["fold_macro_f1"]) == 5


def test_cv_parallel_matches_sequential(corpus_csv, tmp_path):
    data = corpus_csv(120, "A", seed=3)
    assert run("cv", "--data", data, "--k", 3, "--out", tmp_path / "seq", *FAST) == 0
    assert run("cv", "--data", data, "--k", 3, "--jobs", 2, "--out", tmp_path / "par", *FAST) == 0
    for name in ("oof_predictions.csv", "fold_0.htxm", "fold_2.htxm", "cv_metrics.json",
                 "fold_manifest.json"):
        assert (tmp_path / "seq" / name).read_bytes() == (tmp_path / "par" / name).read_bytes()


def test_cv_tiny_balanced(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("rewire_id,text,label_sexist\n"
                    "t1,alpha one,sexist\nt2,beta two,not sexist\n"
                    "t3,alpha three,sexist\nt4,beta four,not sexist\n")
    assert run("cv", "--data", path, "--k", 2, "--out", tmp_path / "o", *FAST) == 0
    assert sorted(read_predictions(tmp_path / "o" / "oof_predictions.csv").example_ids) == \
        ["t1", "t2", "t3", "t4"]


def test_cv_invalid_k(a_csv, tmp_path):
    assert run("cv", "--data", a_csv, "--k", 1, "--out", tmp_path / "o", *FAST) == 1


def test_predict_matches_in_process(trained, a_csv, tmp_path):
    out = tmp_path / "p.csv"
    assert run("predict", trained / "model.htxm", a_csv, out) == 0
    model = load_model(trained / "model.htxm")
    ds = load_dataset(a_csv, Level.A)
    expected = model.predict(ds.texts, ds.ids)
    assert read_predictions(out).same(expected)


def test_predict_missing_text_column(trained, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("rewire_id,label_sexist\nx,sexist\n")
    assert run("predict", trained / "model.htxm", bad, tmp_path / "p.csv") == 1


def test_predict_header_only(trained, tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("rewire_id,text\n")
    out = tmp_path / "p.csv"
    assert run("predict", trained / "model.htxm", empty, out) == 0
    assert out.read_text() == "rewire_id,label,prob_not_sexist,prob_sexist\n"
    assert len(read_predictions(out)) == 0


def test_predict_corrupt_model(a_csv, tmp_path):
    bad = tmp_path / "bad.htxm"
    bad.write_bytes(b"HTXM-nope")
    assert run("predict", bad, a_csv, tmp_path / "p.csv") == 1


def test_gated_prediction(corpus_csv, tmp_path):
    data = corpus_csv(300, "A", seed=5)
    assert run("train", "--data", data, "--out", tmp_path / "a", *FAST) == 0
    assert run("train", "--data", data, "--level", "B", "--out", tmp_path / "b", *FAST) == 0
    assert run("predict", tmp_path / "a" / "model.htxm", data, tmp_path / "pa.csv") == 0
    assert run("predict", tmp_path / "b" / "model.htxm", data, tmp_path / "pb.csv",
               "--gate-on", tmp_path / "pa.csv") == 0
    pa, pb = read_predictions(tmp_path / "pa.csv"), read_predictions(tmp_path / "pb.csv")
    flagged = [i for i, lab in pa.label_of().items() if lab is TaskALabel.SEXIST]
    assert list(pb.example_ids) == flagged
    assert run("predict", tmp_path / "b" / "model.htxm", data, tmp_path / "pg.csv",
               "--gate-on", "gold") == 0
    gold = load_dataset(data, Level.B)
    assert list(read_predictions(tmp_path / "pg.csv").example_ids) == list(gold.ids)
    assert run("evaluate", tmp_path / "pa.csv", tmp_path / "pb.csv", "--check-hierarchy",
               "--out", tmp_path / "h.json") == 0
    assert json.loads((tmp_path / "h.json").read_text())["hierarchy"]["violations"] == 0
    # an A model cannot be gated
    assert run("predict", tmp_path / "a" / "model.htxm", data, tmp_path / "x.csv",
               "--gate-on", "gold") == 2


def write_preds(path, rows):
    lines = ["rewire_id,label,prob_not_sexist,prob_sexist"]
    for id_, ns, sx in rows:
        label = "sexist" if sx > ns else "not sexist"
        lines.append(f"{id_},{label},{ns!r},{sx!r}")
    path.write_text("\n".join(lines) + "\n")


def test_ensemble_vote_of_copies(trained, tmp_path):
    src = trained / "predictions.csv"
    out = tmp_path / "vote.csv"
    assert run("ensemble", src, src, "--out", out) == 0
    assert out.read_bytes() == src.read_bytes()


def test_ensemble_weighted_needs_truth(trained, tmp_path):
    src = trained / "predictions.csv"
    assert run("ensemble", src, src, "--method", "weighted", "--out", tmp_path / "w.csv") == 2
    assert run("ensemble", src, "--out", tmp_path / "w.csv") == 2


def test_ensemble_weighted_picks_perfect_vertex(tmp_path):
    gold = tmp_path / "gold.csv"
    gold.write_text("rewire_id,text,label_sexist\n"
                    "g1,x,sexist\ng2,y,not sexist\ng3,z,sexist\ng4,w,not sexist\n")
    rng = np.random.default_rng(0)
    noisy = [(f"g{i}", *(lambda p: (1 - p, p))(float(rng.random()))) for i in range(1, 5)]
    perfect = [("g1", 0.1, 0.9), ("g2", 0.8, 0.2), ("g3", 0.3, 0.7), ("g4", 0.9, 0.1)]
    worst = [("g1", 0.9, 0.1), ("g2", 0.2, 0.8), ("g3", 0.7, 0.3), ("g4", 0.1, 0.9)]
    write_preds(tmp_path / "noisy.csv", noisy)
    write_preds(tmp_path / "perfect.csv", perfect)
    write_preds(tmp_path / "worst.csv", worst)
    out = tmp_path / "w.csv"
    assert run("ensemble", tmp_path / "worst.csv", tmp_path / "perfect.csv", "--method", "weighted",
               "--truth", gold, "--grid-step", 0.5, "--out", out) == 0
    report = json.loads((tmp_path / "w.metrics.json").read_text())
    assert report["weights"] == [0.0, 1.0]
    assert report["macro_f1"] == 1.0
    assert run("ensemble", tmp_path / "noisy.csv", tmp_path / "perfect.csv", tmp_path / "worst.csv",
               "--truth", gold, "--out", tmp_path / "v.csv", "--report", tmp_path / "v.json") == 0
    assert json.loads((tmp_path / "v.json").read_text())["method"] == "vote"


def test_ensemble_misaligned(tmp_path):
    write_preds(tmp_path / "a.csv", [("x", 0.5, 0.5)])
    write_preds(tmp_path / "b.csv", [("y", 0.5, 0.5)])
    assert run("ensemble", tmp_path / "a.csv", tmp_path / "b.csv", "--out", tmp_path / "o.csv") == 1


def test_ensemble_reorders_members(tmp_path):
    write_preds(tmp_path / "a.csv", [("x", 0.9, 0.1), ("y", 0.2, 0.8)])
    write_preds(tmp_path / "b.csv", [("y", 0.3, 0.7), ("x", 0.6, 0.4)])
    assert run("ensemble", tmp_path / "a.csv", tmp_path / "b.csv", "--out", tmp_path / "o.csv") == 0
    fused = read_predictions(tmp_path / "o.csv")
    assert fused.example_ids == ("x", "y")
    assert [lab.key for lab in fused.labels] == ["not_sexist", "sexist"]


def test_evaluate_gold_vs_gold(tmp_path):
    gold = tmp_path / "gold.csv"
    gold.write_text("rewire_id,text,label_sexist\ng1,x,sexist\ng2,y,not sexist\n")
    write_preds(tmp_path / "p.csv", [("g1", 0.0, 1.0), ("g2", 1.0, 0.0)])
    out = tmp_path / "r.json"
    assert run("evaluate", tmp_path / "p.csv", "--gold", gold, "--level", "A", "--out", out) == 0
    assert json.loads(out.read_text())["macro_f1"] == 1.0
    assert run("evaluate", tmp_path / "p.csv", "--gold", gold, "--level", "B") == 1
    assert run("evaluate", tmp_path / "p.csv") == 2


def test_evaluate_majority_baseline(tmp_path):
    gold = tmp_path / "gold.csv"
    rows = ["rewire_id,text,label_sexist"]
    rows += [f"n{i},t,not sexist" for i in range(10602)] + [f"s{i},t,sexist" for i in range(3398)]
    gold.write_text("\n".join(rows) + "\n")
    write_preds(tmp_path / "p.csv", [(r.split(",")[0], 1.0, 0.0) for r in rows[1:]])
    out = tmp_path / "r.json"
    assert run("evaluate", tmp_path / "p.csv", "--gold", gold, "--out", out) == 0
    assert json.loads(out.read_text())["macro_f1"] == pytest.approx(0.4309406, abs=1e-7)


def test_evaluate_hierarchy_mismatch(tmp_path):
    (tmp_path / "b.csv").write_text(
        "rewire_id,label,prob_1,prob_2,prob_3,prob_4\nq,2. derogation,0.1,0.7,0.1,0.1\n")
    c_header = "rewire_id,label," + ",".join(
        f"prob_{k}" for k in ["1.1", "1.2", "2.1", "2.2", "2.3", "3.1", "3.2", "3.3", "3.4", "4.1", "4.2"])
    (tmp_path / "c.csv").write_text(c_header + "\nq,3.1," + ",".join(
        ["0.0"] * 5 + ["1.0"] + ["0.0"] * 5) + "\n")
    out = tmp_path / "h.json"
    assert run("evaluate", tmp_path / "b.csv", tmp_path / "c.csv", "--check-hierarchy", "--out", out) == 0
    assert json.loads(out.read_text())["hierarchy"]["violations"] == 1


def test_taxonomy_dump(capsys):
    assert run("taxonomy", "dump") == 0
    tree = json.loads(capsys.readouterr().out)
    assert json.dumps(tree).count("1.1") >= 1


def test_synth_command(tmp_path):
    out = tmp_path / "s.csv"
    assert run("synth", "--n", 50, "--level", "C", "--seed", 3, "--out", out) == 0
    assert len(load_dataset(out, Level.C)) == 50


def test_console_entry_point(tmp_path):
    result = subprocess.run([sys.executable, "-m", "hiertext", "taxonomy", "dump"],
                            capture_output=True, text=True)
    assert result.returncode == 0 and "sexist" in result.stdout
    result = subprocess.run([sys.executable, "-m", "hiertext", "train", "--level", "Z"],
                            capture_output=True, text=True)
    assert result.returncode == 2
