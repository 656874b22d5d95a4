import io
import json

import pytest

from mimcr.catalog import load_catalog_dir
from mimcr.cli import main, parse_choice, run_demo
from mimcr.config import TrainConfig
from mimcr.dialog_state import init_state

SPEC = {"num_users": 25, "num_items": 50, "num_attr_instances": 14, "num_attr_types": 4}
CFG = {"episodes": 4, "batch_size": 4, "d": 8, "hidden": 8, "buffer_capacity": 50}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "spec.json").write_text(json.dumps(SPEC))
    (root / "cfg.json").write_text(json.dumps(CFG))
    (root / "pre.json").write_text(json.dumps({"d": 8, "epochs": 3}))
    assert main(["synth", "--spec", str(root / "spec.json"), "--seed", "2", "--out", str(root / "data")]) == 0
    assert main(["pretrain", "--data", str(root / "data"), "--config", str(root / "pre.json"),
                 "--out", str(root / "emb.ckpt")]) == 0
    assert main(["train", "--data", str(root / "data"), "--embeddings", str(root / "emb.ckpt"),
                 "--config", str(root / "cfg.json"), "--out", str(root / "run")]) == 0
    return root


def test_synth_deterministic_and_valid(workdir, tmp_path):
    assert main(["synth", "--spec", str(workdir / "spec.json"), "--seed", "2", "--out", str(tmp_path)]) == 0
    for name in ("interactions.tsv", "item_attrs.tsv", "attr_types.tsv"):
        assert (tmp_path / name).read_bytes() == (workdir / "data" / name).read_bytes()
    assert load_catalog_dir(tmp_path).num_items == 50


def test_synth_missing_field(tmp_path, capsys):
    (tmp_path / "bad.json").write_text(json.dumps({"num_users": 3}))
    assert main(["synth", "--spec", str(tmp_path / "bad.json"), "--out", str(tmp_path / "o")]) != 0
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: config:")


def test_pretrain_artifacts(workdir, tmp_path):
    assert (workdir / "emb.ckpt.loss.csv").read_text().count("\n") == 4
    (tmp_path / "zero.json").write_text(json.dumps({"d": 8, "epochs": 0}))
    assert main(["pretrain", "--data", str(workdir / "data"), "--config", str(tmp_path / "zero.json"),
                 "--out", str(tmp_path / "e.ckpt")]) == 0
    assert main(["pretrain", "--data", str(workdir / "data"), "--config", str(workdir / "pre.json"),
                 "--out", str(tmp_path / "again.ckpt")]) == 0
    assert (tmp_path / "again.ckpt").read_bytes() == (workdir / "emb.ckpt").read_bytes()


def test_train_artifacts(workdir):
    run = workdir / "run"
    for name in ("model.ckpt", "train_log.csv", "config.json", "embeddings.ckpt"):
        assert (run / name).exists()
    assert (run / "train_log.csv").read_text().splitlines()[0] == "episode,success,turns,reward,loss,epsilon"


def test_train_without_embeddings_warns(workdir, tmp_path, capsys):
    assert main(["train", "--data", str(workdir / "data"), "--config", str(workdir / "cfg.json"),
                 "--candidate-mode", "intersection", "--episodes", "1", "--out", str(tmp_path)]) == 0
    assert "random initialisation" in capsys.readouterr().err
    assert TrainConfig.load(tmp_path / "config.json").candidate_mode == "intersection"


def test_eval_model_and_baselines(workdir, capsys):
    assert main(["eval", "--data", str(workdir / "data"), "--model", str(workdir / "run" / "model.ckpt"),
                 "--episodes", "5"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert len(rep["sr_curve"]) == 15
    outs = []
    for seed in ("1", "2"):
        assert main(["eval", "--data", str(workdir / "data"), "--baseline", "max-entropy",
                     "--embeddings", str(workdir / "emb.ckpt"), "--config", str(workdir / "cfg.json"),
                     "--episodes", "6", "--seed", seed]) == 0
        outs.append(json.loads(capsys.readouterr().out))
    assert outs[0].keys() == outs[1].keys()


def test_eval_needs_one_source(workdir, capsys):
    assert main(["eval", "--data", str(workdir / "data")]) == 1
    assert capsys.readouterr().err.startswith("error: usage:")


def test_bad_checkpoint(workdir, tmp_path, capsys):
    (tmp_path / "junk.ckpt").write_bytes(b"junkjunkjunkjunk")
    assert main(["inspect", "--model", str(tmp_path / "junk.ckpt")]) == 1
    assert "magic" in capsys.readouterr().err


def test_inspect(workdir, capsys):
    assert main(["inspect", "--data", str(workdir / "data")]) == 0
    assert "items\t50" in capsys.readouterr().out


def test_bad_log_level(workdir, monkeypatch, capsys):
    monkeypatch.setenv("MIMCR_LOG", "loud")
    assert main(["inspect", "--data", str(workdir / "data")]) == 1


def test_parse_choice():
    assert parse_choice("", 3) == []
    assert parse_choice("2, 1,2", 3) == [1, 0]
    for bad in ("0", "4", "a", "1,,2"):
        with pytest.raises(ValueError):
            parse_choice(bad, 3)


class ScriptedAgent:
    """Asks about the first two candidate instances once, then recommends."""

    def __init__(self, catalog):
        self.catalog = catalog
        self.asked = False

    def act(self, state, rng=None):
        from mimcr.policy import Ask, Recommend
        if not self.asked:
            self.asked = True
            p = sorted(state.cand_attrs)[0]
            c = self.catalog.attr_type_of[p]
            same = [q for q in sorted(state.cand_attrs) if self.catalog.attr_type_of[q] == c][:2]
            return Ask(c, tuple(same))
        return Recommend(tuple(sorted(state.cand_items)[:3]))


def demo_session(workdir, script):
    cat = load_catalog_dir(workdir / "data")
    p0 = max(range(cat.num_attr_instances), key=lambda p: len(cat.items_with_attr[p]))
    out = io.StringIO()
    recs, ok = run_demo(ScriptedAgent(cat), cat, TrainConfig(), 0, p0, io.StringIO(script), out)
    return recs, ok, out.getvalue()


def test_demo_golden(workdir):
    recs, ok, text = demo_session(workdir, "9\n\nmaybe\n2\n")
    assert ok
    assert text.count("Sorry") == 2
    assert [r["action"] for r in recs] == ["ask", "recommend"]
    assert recs[0]["accepted"] == [] and len(recs[0]["rejected"]) == len(recs[0]["asked"])
    assert recs[1]["rank"] == 2
    again = demo_session(workdir, "9\n\nmaybe\n2\n")
    assert again[0] == recs and again[2] == text


def test_demo_eof_is_clean(workdir):
    with pytest.raises(EOFError):
        demo_session(workdir, "")


def test_demo_no_until_cap(workdir):
    recs, ok, _ = demo_session(workdir, "\n" + "no\n" * 30)
    assert not ok and recs[-1]["turn"] <= 15
