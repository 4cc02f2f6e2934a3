import hashlib
import json
import logging

import numpy as np
import pytest

from manifesto_attribution import artifact
from manifesto_attribution.cli import CONFIG_ENV, main
from manifesto_attribution.corpus import PartyLabel
from manifesto_attribution.features import FeatureConfig, build_vocabulary
from manifesto_attribution.model import Classifier, SoftmaxModel

FAST = ["--seed", "3"]


def write_config(path, **overrides):
    cfg = {"train": {"epochs": 15, "batch_size": 16}, "split": {"test_fraction": 0.3}}
    cfg.update(overrides)
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


@pytest.fixture
def config(tmp_path):
    return write_config(tmp_path / "config.json")


def run(*argv):
    return main([str(a) for a in argv])


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_dir(out, preset="three", backend="softmax", seed=3):
    return out / f"{preset.replace(':', '-')}-{backend}-seed{seed}"


class TestIngest:
    def test_writes_party_files_and_table(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "out"
        assert run("ingest", "--corpus", corpus_dir, "--out", out, *FAST) == 0
        base = run_dir(out) / "corpus"
        assert len(list(base.glob("party_*.jsonl"))) == 6
        printed = capsys.readouterr().out.splitlines()
        assert [c.strip() for c in printed[0].split("|")] == ["Party", "Document Length in Tokens", "Number of Paragraphs"]
        assert len(printed) == 7
        # The heading line of every file is dropped, 30 paragraphs remain.
        assert all(line.rstrip().endswith("30") for line in printed[1:])
        target = [json.loads(x) for x in (base / "target.jsonl").read_text().splitlines()]
        assert len(target) == 12

    def test_synthetic_golden_table(self, synthetic_dir, synthetic_expected, tmp_path):
        out = tmp_path / "out"
        assert run("ingest", "--corpus", synthetic_dir, "--out", out, *FAST) == 0
        rows = (run_dir(out) / "corpus" / "stats.csv").read_text().splitlines()[1:]
        assert [r.split(",") for r in rows] == [[n, str(t), str(c)] for n, t, c in synthetic_expected["table"]]

    def test_empty_directory(self, tmp_path):
        (tmp_path / "empty").mkdir()
        assert run("ingest", "--corpus", tmp_path / "empty", "--out", tmp_path / "out") == 2

    def test_missing_party_file_named(self, corpus_dir, tmp_path, caplog):
        (corpus_dir / "spd.txt").unlink()
        with caplog.at_level(logging.ERROR):
            assert run("ingest", "--corpus", corpus_dir, "--out", tmp_path / "out") == 2
        assert "spd.txt" in caplog.text

    def test_encoding_error(self, corpus_dir, tmp_path, caplog):
        (corpus_dir / "fdp.txt").write_bytes(b"Freiheit \xff\xfe kaputt")
        with caplog.at_level(logging.ERROR):
            assert run("ingest", "--corpus", corpus_dir, "--out", tmp_path / "out") == 3
        assert "byte offset 9" in caplog.text

    def test_rerun_identical(self, corpus_dir, tmp_path):
        out = tmp_path / "out"
        run("ingest", "--corpus", corpus_dir, "--out", out)
        first = {p.name: sha(p) for p in (run_dir(out, seed=0) / "corpus").iterdir()}
        run("ingest", "--corpus", corpus_dir, "--out", out)
        assert first == {p.name: sha(p) for p in (run_dir(out, seed=0) / "corpus").iterdir()}


@pytest.fixture
def ingested(corpus_dir, tmp_path, config):
    out = tmp_path / "out"
    for preset in ("six", "three", "ovr:Gruene"):
        assert run("ingest", "--corpus", corpus_dir, "--out", out, "--preset", preset, "--config", config, *FAST) == 0
    return out, config


class TestTrain:
    @pytest.mark.parametrize("preset,names", [
        ("six", ["AfD", "FDP", "Gruene", "Linke", "SPD", "Union"]),
        ("three", ["FDP", "Gruene", "SPD"]),
        ("ovr:Gruene", ["Gruene", "Rest"]),
    ])
    def test_presets(self, ingested, preset, names):
        out, config = ingested
        assert run("train", "--out", out, "--preset", preset, "--config", config, *FAST) == 0
        clf = artifact.load(run_dir(out, preset) / "model.bin")
        assert [lab.name for lab in clf.labels] == names
        split = json.loads((run_dir(out, preset) / "split.json").read_text())
        assert not set(split["train"]) & set(split["test"])

    def test_same_config_same_checksum(self, ingested):
        out, config = ingested
        run("train", "--out", out, "--config", config, *FAST)
        first = sha(run_dir(out) / "model.bin")
        run("train", "--out", out, "--config", config, *FAST)
        assert sha(run_dir(out) / "model.bin") == first

    def test_nb_backend(self, ingested, corpus_dir):
        out, config = ingested
        run("ingest", "--corpus", corpus_dir, "--out", out, "--backend", "nb", *FAST)
        assert run("train", "--out", out, "--backend", "nb", "--config", config, *FAST) == 0
        assert artifact.load(run_dir(out, backend="nb") / "model.bin").backend == "nb"

    def test_divergence_exit_code(self, ingested, tmp_path, caplog):
        out, _ = ingested
        cfg = write_config(
            tmp_path / "bad.json",
            train={"learning_rate": 1e306, "epochs": 3},
            features={"weighting": "counts", "min_doc_freq": 1},
        )
        with caplog.at_level(logging.ERROR):
            assert run("train", "--out", out, "--config", cfg, *FAST) == 4
        assert "epoch" in caplog.text

    def test_without_ingest(self, tmp_path, config):
        assert run("train", "--out", tmp_path / "nothing", "--config", config) == 2

    def test_unknown_preset(self, ingested):
        out, config = ingested
        assert run("train", "--out", out, "--preset", "seven", "--config", config) == 2


class TestEvaluate:
    def test_table_and_support(self, ingested, capsys):
        out, config = ingested
        run("train", "--out", out, "--config", config, *FAST)
        capsys.readouterr()
        assert run("evaluate", "--out", out, "--config", config, *FAST) == 0
        text = capsys.readouterr().out
        assert text.splitlines()[0].split() == ["precision", "recall", "f1-score", "support"]
        split = json.loads((run_dir(out) / "split.json").read_text())
        rows = [json.loads(x) for x in (run_dir(out) / "eval.jsonl").read_text().splitlines()]
        accuracy = next(r for r in rows if r.get("row") == "accuracy")
        assert accuracy["support"] == len(split["test"])
        heat = json.loads((run_dir(out) / "eval_confusion.jsonl").read_text())
        assert heat["kind"] == "heatmap"
        assert np.sum(heat["counts"]) == len(split["test"])

    def test_missing_split(self, ingested):
        out, config = ingested
        run("train", "--out", out, "--config", config, *FAST)
        (run_dir(out) / "split.json").unlink()
        assert run("evaluate", "--out", out, "--config", config, *FAST) == 5

    def test_train_split_needs_override(self, ingested):
        out, config = ingested
        run("train", "--out", out, "--config", config, *FAST)
        assert run("evaluate", "--out", out, "--config", config, "--split", "train", *FAST) == 2
        assert run("evaluate", "--out", out, "--config", config, "--split", "train", "--allow-train-eval", *FAST) == 0
        assert (run_dir(out) / "eval_train.txt").exists()


class TestAttribute:
    def test_records_and_summary(self, ingested):
        out, config = ingested
        run("train", "--out", out, "--config", config, *FAST)
        run("evaluate", "--out", out, "--config", config, *FAST)
        assert run("attribute", "--out", out, "--config", config, *FAST) == 0
        recs = (run_dir(out) / "attribution.jsonl").read_text().splitlines()
        target = (run_dir(out) / "corpus" / "target.jsonl").read_text().splitlines()
        assert len(recs) == len(target) == 12
        summary = json.loads((run_dir(out) / "attribution_summary.json").read_text())
        assert summary["certainty"]["high_threshold"] == 0.99
        assert "above_high" in summary["certainty"]
        assert sum(summary["certainty"]["histogram"]) == 12
        assert sum(summary["shares"].values()) == pytest.approx(1.0)
        assert set(summary["test_recall"]) == {"FDP", "Gruene", "SPD"}

    def test_always_first_party(self, ingested, tmp_path):
        out, config = ingested
        rd = run_dir(out)
        labs = (PartyLabel(0, "FDP"), PartyLabel(1, "Gruene"), PartyLabel(2, "SPD"))
        cfg = FeatureConfig(min_doc_freq=1)
        vocab = build_vocabulary(["irgendein text"], cfg)
        model = SoftmaxModel(np.zeros((3, len(vocab))), np.array([50.0, 0.0, 0.0]), labs)
        rd.mkdir(parents=True, exist_ok=True)
        artifact.save(Classifier(model, cfg, vocab), rd / "model.bin")
        ref = tmp_path / "ref.json"
        ref.write_text(json.dumps({"FDP": 0.2, "Gruene": 0.3, "SPD": 0.5}))
        assert run("attribute", "--out", out, "--config", config, "--reference-shares", ref, *FAST) == 0
        summary = json.loads((rd / "attribution_summary.json").read_text())
        assert summary["shares"] == {"FDP": 1.0, "Gruene": 0.0, "SPD": 0.0}
        assert summary["share_comparison"]["over"] == ["FDP"]
        assert summary["certainty"]["above_high"] == 12

    def test_empty_target(self, ingested, tmp_path):
        out, config = ingested
        run("train", "--out", out, "--config", config, *FAST)
        empty = tmp_path / "leer.txt"
        empty.write_text("Kurz.\n\nAuch kurz.\n", encoding="utf-8")
        assert run("attribute", "--out", out, "--config", config, "--target", empty, *FAST) == 6

    def test_explicit_target(self, ingested, synthetic_dir):
        out, config = ingested
        run("train", "--out", out, "--config", config, *FAST)
        assert run("attribute", "--out", out, "--config", config, "--target", synthetic_dir / "coalition.txt", *FAST) == 0
        assert len((run_dir(out) / "attribution.jsonl").read_text().splitlines()) == 3


def test_config_from_environment(corpus_dir, tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "env.json", corpus_dir=str(corpus_dir), out=str(tmp_path / "envout"), preset="six")
    monkeypatch.setenv(CONFIG_ENV, str(cfg))
    assert run("run", "--seed", "3") == 0
    assert (tmp_path / "envout" / "six-softmax-seed3" / "attribution_summary.json").exists()


def test_missing_config_file(tmp_path):
    assert run("train", "--config", tmp_path / "nope.json") == 2
