"""Command-line pipeline: ingest -> train -> evaluate -> attribute.

Every command works inside one run directory, ``<out>/<preset>-<backend>-seed<seed>``,
so repeated runs with the same configuration overwrite identical files.

Exit codes: 0 ok, 1 other failure, 2 missing input / usage, 3 encoding error,
4 training diverged, 5 missing split record, 6 empty target document.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import artifact
from .attribution import attribute_document, paragraph_records, share_comparison, summary_record
from .corpus import (
    DEFAULT_MIN_TOKENS,
    Corpus,
    PartyLabel,
    RawDocument,
    check_labels,
    clean_text,
    corpus_stats,
    decode_document,
    document_paragraphs,
    load_manifest,
    paragraph_record,
    paragraphs_from_records,
    segment_paragraphs,
)
from .errors import CorpusEncodingError, ManifestoError, TrainingDivergedError
from .evaluation import SplitConfig, confusion_matrix, evaluation_report, format_report, split_positions
from .features import FeatureConfig
from .model import TrainConfig, fit_classifier, one_vs_rest_corpus, with_metadata
from .report import emit_plot_data, emit_stats_table, jsonl

log = logging.getLogger("manifesto_attribution")

CONFIG_ENV = "MANIFESTO_ATTRIBUTION_CONFIG"
MANIFEST_NAME = "labels.json"
COALITION_PARTIES = ("FDP", "Gruene", "SPD")


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    corpus_dir: Path | None = None
    labels: Path | None = None
    out: Path = Path("runs")
    preset: str = "three"
    backend: str = "softmax"
    min_tokens: int = DEFAULT_MIN_TOKENS
    alpha: float = 1.0
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    coalition: tuple[str, ...] = COALITION_PARTIES
    reference_shares: dict | None = None

    @property
    def preset_slug(self) -> str:
        return self.preset.replace(":", "-")

    @property
    def run_dir(self) -> Path:
        return self.out / f"{self.preset_slug}-{self.backend}-seed{self.train.seed}"

    def fingerprint(self) -> str:
        """Hash of everything that shapes the model; paths are excluded."""
        blob = {
            "preset": self.preset,
            "backend": self.backend,
            "min_tokens": self.min_tokens,
            "alpha": self.alpha,
            "features": self.features.to_dict(),
            "train": self.train.to_dict(),
            "split": self.split.to_dict(),
            "coalition": list(self.coalition),
        }
        return hashlib.sha256(json.dumps(blob, sort_keys=True).encode()).hexdigest()[:16]


def _resolve(base: Path, value) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg_path = args.config or os.environ.get(CONFIG_ENV)
    data: dict = {}
    base = Path.cwd()
    if cfg_path:
        cfg_path = Path(cfg_path)
        if not cfg_path.is_file():
            raise CommandError(f"config file not found: {cfg_path}", 2)
        data = json.loads(cfg_path.read_text(encoding="utf-8"))
        base = cfg_path.parent
    train = dict(data.get("train", {}))
    split = dict(data.get("split", {}))
    if args.seed is not None:
        train["seed"] = split["seed"] = args.seed
    cfg = RunConfig(
        corpus_dir=_resolve(base, data.get("corpus_dir")),
        labels=_resolve(base, data.get("labels")),
        out=_resolve(base, data.get("out", "runs")),
        preset=data.get("preset", "three"),
        backend=data.get("backend", "softmax"),
        min_tokens=int(data.get("segmentation", {}).get("min_tokens", DEFAULT_MIN_TOKENS)),
        alpha=float(data.get("alpha", 1.0)),
        features=FeatureConfig.from_dict(data.get("features", {})),
        train=TrainConfig.from_dict(train),
        split=SplitConfig.from_dict(split),
        coalition=tuple(data.get("coalition", COALITION_PARTIES)),
        reference_shares=data.get("reference_shares"),
    )
    if getattr(args, "corpus", None):
        cfg.corpus_dir = Path(args.corpus)
    if getattr(args, "labels", None):
        cfg.labels = Path(args.labels)
    if args.out:
        cfg.out = Path(args.out)
    if args.preset:
        cfg.preset = args.preset
    if args.backend:
        cfg.backend = args.backend
    if cfg.preset not in ("six", "three") and not cfg.preset.startswith("ovr:"):
        raise CommandError(f"unknown preset {cfg.preset!r}; use six, three or ovr:<party>", 2)
    if cfg.preset.startswith("ovr:") and cfg.backend != "softmax":
        raise CommandError("one-vs-rest presets use the softmax backend", 2)
    return cfg


# -- file helpers --------------------------------------------------------------


def _write(path: Path, data: bytes | str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.write_bytes(data)
    return path


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _require(path: Path, code: int = 2, hint: str = "") -> Path:
    if not path.exists():
        raise CommandError(f"missing file: {path}{hint}", code)
    return path


def _read_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def _party_file(name: str) -> str:
    return "party_" + "".join(c if c.isalnum() else "_" for c in name) + ".jsonl"


# -- ingest ----------------------------------------------------------------------


def cmd_ingest(cfg: RunConfig) -> int:
    if cfg.corpus_dir is None:
        raise CommandError("no corpus directory given (--corpus or corpus_dir in config)", 2)
    if not cfg.corpus_dir.is_dir():
        raise CommandError(f"missing corpus directory: {cfg.corpus_dir}", 2)
    manifest_path = _require(cfg.labels or cfg.corpus_dir / MANIFEST_NAME)
    manifest = load_manifest(manifest_path)
    out = cfg.run_dir / "corpus"

    examples = []
    party_files = {}
    for fname, lab in manifest.parties:
        src = _require(cfg.corpus_dir / fname)
        paras = document_paragraphs(_load(src, lab), cfg.min_tokens)
        examples.extend((p, lab) for p in paras)
        party_files[lab.name] = _party_file(lab.name)
        _write(out / party_files[lab.name], jsonl(paragraph_record(p, lab) for p in paras))
    target = None
    if manifest.target:
        src = _require(cfg.corpus_dir / manifest.target)
        paras = document_paragraphs(_load(src), cfg.min_tokens)
        target = "target.jsonl"
        _write(out / target, jsonl(paragraph_record(p) for p in paras))

    corpus = Corpus(manifest.labels, tuple(examples))
    stats = corpus_stats(corpus)
    index = {
        "labels": [{"id": lab.id, "name": lab.name, "file": party_files[lab.name]} for lab in manifest.labels],
        "target": target,
        "min_tokens": cfg.min_tokens,
    }
    _write(out / "index.json", _dump_json(index))
    table = emit_stats_table(stats, "text")
    _write(out / "stats.txt", table)
    _write(out / "stats.csv", emit_stats_table(stats, "csv"))
    _write(out / "stats.jsonl", emit_stats_table(stats, "structured"))
    _write(out / "lengths_boxplot.jsonl", jsonl([emit_plot_data(stats).to_record()]))
    sys.stdout.write(table.decode("utf-8"))
    return 0


def _load(path: Path, label: PartyLabel | None = None) -> RawDocument:
    body = decode_document(path.read_bytes(), str(path))
    return RawDocument(path.stem, body, label)


def load_ingested(cfg: RunConfig) -> tuple[Corpus, list]:
    """Full labeled corpus and target paragraphs from the run's ingest output."""
    base = cfg.run_dir / "corpus"
    index = json.loads(_require(base / "index.json", hint=" (run `ingest` first)").read_text(encoding="utf-8"))
    labels = tuple(PartyLabel(e["id"], e["name"]) for e in index["labels"])
    check_labels(labels)
    examples = []
    for lab, e in zip(labels, index["labels"]):
        examples.extend((p, lab) for p in paragraphs_from_records(_read_jsonl(_require(base / e["file"]))))
    target = []
    if index.get("target"):
        target = paragraphs_from_records(_read_jsonl(_require(base / index["target"])))
    return Corpus(labels, tuple(examples)), target


def preset_corpus(cfg: RunConfig, corpus: Corpus) -> Corpus:
    if cfg.preset == "six":
        return corpus
    if cfg.preset == "three":
        return corpus.restrict(cfg.coalition)
    focus = cfg.preset.split(":", 1)[1]
    base = corpus.restrict(cfg.coalition) if focus in cfg.coalition else corpus
    return one_vs_rest_corpus(base, focus)


def _corpus_digest(corpus: Corpus) -> str:
    h = hashlib.sha256()
    for p, lab in corpus.examples:
        h.update(f"{lab.id}\t{p.doc_source_id}\t{p.index}\t{p.text}\n".encode("utf-8"))
    return h.hexdigest()


# -- train -------------------------------------------------------------------------


def cmd_train(cfg: RunConfig) -> int:
    corpus, _ = load_ingested(cfg)
    data = preset_corpus(cfg, corpus)
    train_pos, test_pos = split_positions(data, cfg.split)
    train = data.subset(train_pos)
    validation = None
    if cfg.backend == "softmax" and cfg.train.early_stop_patience > 0:
        vcfg = SplitConfig(test_fraction=0.1, seed=cfg.split.seed + 1, stratified=True)
        fit_pos, val_pos = split_positions(train, vcfg)
        train, validation = train.subset(fit_pos), train.subset(val_pos)
    try:
        clf = fit_classifier(train, cfg.features, cfg.train, cfg.backend, cfg.alpha, validation)
    except TrainingDivergedError as exc:
        raise CommandError(str(exc), 4) from exc
    clf = with_metadata(
        clf, preset=cfg.preset, backend=cfg.backend, seed=cfg.train.seed, config_fingerprint=cfg.fingerprint()
    )
    run = cfg.run_dir
    run.mkdir(parents=True, exist_ok=True)
    artifact.save(clf, run / "model.bin")
    split_record = {
        "preset": cfg.preset,
        "labels": [lab.name for lab in data.labels],
        "split": cfg.split.to_dict(),
        "corpus_sha256": _corpus_digest(data),
        "train": train_pos,
        "test": test_pos,
    }
    _write(run / "split.json", _dump_json(split_record))
    history = getattr(clf.model, "loss_history", ())
    _write(run / "train_log.jsonl", jsonl({"epoch": i, "train_loss": loss} for i, loss in enumerate(history)))
    sys.stdout.write(
        f"trained {cfg.backend} on {len(train)} paragraphs, {len(clf.labels)} labels "
        f"({', '.join(lab.name for lab in clf.labels)}), {len(clf.vocabulary)} features\n"
    )
    return 0


# -- evaluate ----------------------------------------------------------------------


def cmd_evaluate(cfg: RunConfig, side: str = "test", allow_train_eval: bool = False) -> int:
    run = cfg.run_dir
    if side == "train" and not allow_train_eval:
        raise CommandError("refusing to evaluate on the training split without --allow-train-eval", 2)
    clf = artifact.load(_require(run / "model.bin", hint=" (run `train` first)"))
    split_path = run / "split.json"
    if not split_path.exists():
        raise CommandError(f"missing split record: {split_path}", 5)
    split = json.loads(split_path.read_text(encoding="utf-8"))
    corpus, _ = load_ingested(cfg)
    data = preset_corpus(cfg, corpus)
    if _corpus_digest(data) != split["corpus_sha256"]:
        raise CommandError("ingested corpus changed since training; retrain before evaluating", 5)
    held = data.subset(split[side])
    preds = [clf.predict(p).argmax_label for p, _ in held.examples]
    cm = confusion_matrix([lab for _, lab in held.examples], preds, clf.labels)
    rep = evaluation_report(cm)
    if rep.total != len(split[side]):
        raise CommandError("report support does not match the recorded split size", 1)
    stem = "eval" if side == "test" else "eval_train"
    text = format_report(rep, "text")
    _write(run / f"{stem}.txt", text)
    _write(run / f"{stem}.csv", format_report(rep, "csv"))
    _write(run / f"{stem}.jsonl", format_report(rep, "structured"))
    heat = emit_plot_data(cm)
    if not np.allclose(heat.payload.sum(axis=1)[cm.supports() > 0], 1.0):
        raise CommandError("heatmap rows do not sum to 1", 1)
    _write(run / f"{stem}_confusion.jsonl", jsonl([{"counts": cm.counts.tolist(), **heat.to_record()}]))
    sys.stdout.write(text)
    for w in rep.warnings:
        log.warning(w)
    return 0


# -- attribute -------------------------------------------------------------------------


def cmd_attribute(cfg: RunConfig, target: Path | None = None, reference: Path | None = None) -> int:
    run = cfg.run_dir
    clf = artifact.load(_require(run / "model.bin", hint=" (run `train` first)"))
    if target is not None:
        body = decode_document(_require(target).read_bytes(), str(target))
        paragraphs = segment_paragraphs(clean_text(body), cfg.min_tokens, target.stem)
    else:
        _, paragraphs = load_ingested(cfg)
    if not paragraphs:
        raise CommandError("target document has no paragraphs after segmentation", 6)
    rep = attribute_document(clf, paragraphs)
    records = paragraph_records(rep)
    summary = summary_record(rep)
    summary["bar"] = emit_plot_data(rep).to_record()

    ref = cfg.reference_shares
    if reference is not None:
        ref = json.loads(_require(reference).read_text(encoding="utf-8"))
    if ref:
        cmp = share_comparison(rep, ref)
        summary["share_comparison"] = {"deltas": cmp.deltas, "over": list(cmp.over), "under": list(cmp.under)}
    eval_path = run / "eval.jsonl"
    if eval_path.exists():
        # Per-class recall sits next to the shares: a low-recall party can still win many paragraphs.
        rows = [r for r in _read_jsonl(eval_path) if "row" in r]
        summary["test_recall"] = {r["row"]: r["recall"] for r in rows if r["row"] in summary["shares"]}

    if len(records) != len(paragraphs) or abs(sum(rep.shares) - 1.0) > 1e-9:
        raise CommandError("attribution report failed its invariants", 1)
    if sum(rep.certainty.histogram) != len(paragraphs):
        raise CommandError("certainty histogram does not cover every paragraph", 1)
    _write(run / "attribution.jsonl", jsonl(records))
    _write(run / "attribution_summary.json", _dump_json(summary))
    lines = [f"{len(records)} paragraphs attributed"]
    for name, share in summary["shares"].items():
        lines.append(f"  {name:<10} {share:7.2%}  (soft {summary['soft_shares'][name]:7.2%})")
    c = summary["certainty"]
    lines.append(f"  certainty > {c['high_threshold']}: {c['above_high']}; < {c['low_threshold']:.4f}: {c['below_low']}")
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


# -- entry point -----------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"JSON run config (default: ${CONFIG_ENV})")
    common.add_argument("--seed", type=int, help="seed for splitting and training")
    common.add_argument("--preset", help="six | three | ovr:<party>")
    common.add_argument("--backend", choices=("softmax", "nb"))
    common.add_argument("--out", help="output root; runs go to <out>/<preset>-<backend>-seed<seed>")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="manifesto-attribution", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    ing = sub.add_parser("ingest", parents=[common], help="clean and segment the corpus, write statistics")
    sub.add_parser("train", parents=[common], help="split, train and save a model")
    ev = sub.add_parser("evaluate", parents=[common], help="metrics and confusion matrix on the held-out split")
    ev.add_argument("--split", choices=("test", "train"), default="test")
    ev.add_argument("--allow-train-eval", action="store_true")
    att = sub.add_parser("attribute", parents=[common], help="attribute the target document to parties")
    run = sub.add_parser("run", parents=[common], help="ingest, train, evaluate and attribute")
    for p in (ing, run):
        p.add_argument("--corpus", help="corpus directory with one text file per party")
        p.add_argument("--labels", help=f"labels manifest (default: <corpus>/{MANIFEST_NAME})")
    for p in (att, run):
        p.add_argument("--target", type=Path, help="plaintext document to attribute (default: manifest target)")
        p.add_argument("--reference-shares", type=Path, help="JSON mapping party -> reference share")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.split, args.allow_train_eval)
        if args.command == "attribute":
            return cmd_attribute(cfg, args.target, args.reference_shares)
        cmd_ingest(cfg)
        cmd_train(cfg)
        cmd_evaluate(cfg)
        return cmd_attribute(cfg, args.target, args.reference_shares)
    except CommandError as exc:
        log.error("%s", exc)
        return exc.code
    except CorpusEncodingError as exc:
        log.error("%s", exc)
        return 3
    except FileNotFoundError as exc:
        log.error("missing file: %s", exc.filename)
        return 2
    except (ManifestoError, KeyError, json.JSONDecodeError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
