import json
from pathlib import Path

import numpy as np
import pytest

from manifesto_attribution.corpus import Corpus, Paragraph, PartyLabel

DATA = Path(__file__).parent / "data"


def make_corpus(party_vocabs, n_per_party, seed=0, length=(8, 20)):
    """Random bag-of-words paragraphs, one vocabulary list per party."""
    rng = np.random.default_rng(seed)
    labels = tuple(PartyLabel(i, name) for i, name in enumerate(party_vocabs))
    examples = []
    for lab in labels:
        vocab = party_vocabs[lab.name]
        for j in range(n_per_party):
            words = rng.choice(vocab, size=int(rng.integers(*length)))
            text = " ".join(words)
            examples.append((Paragraph(lab.name, j, text, len(words)), lab))
    return Corpus(labels, tuple(examples))


def disjoint_vocabs(names=("A", "B", "C"), size=40):
    return {n: [f"{n.lower()}wort{i}" for i in range(size)] for n in names}


def shared_vocabs(names=("A", "B", "C"), size=120):
    common = [f"wort{i}" for i in range(size)]
    return {n: common for n in names}


def toy_separable():
    """Two classes that share no terms: 'rot' paragraphs vs 'blau' paragraphs."""
    rot, blau = PartyLabel(0, "rot"), PartyLabel(1, "blau")
    texts = [
        ("rot rot kirsche", rot),
        ("rot feuer rot", rot),
        ("kirsche feuer rot", rot),
        ("rot rot rot", rot),
        ("blau meer blau", blau),
        ("himmel blau blau", blau),
        ("meer himmel blau", blau),
        ("blau blau blau", blau),
    ]
    examples = tuple((Paragraph("toy", i, t, 3), lab) for i, (t, lab) in enumerate(texts))
    return Corpus((rot, blau), examples)


@pytest.fixture
def synthetic_dir():
    return DATA / "synthetic_corpus"


@pytest.fixture
def synthetic_expected():
    return json.loads((DATA / "synthetic_corpus_expected.json").read_text(encoding="utf-8"))


PARTIES = ("AfD", "FDP", "Gruene", "Linke", "SPD", "Union")


def write_corpus_dir(root, n_paragraphs=30, seed=0, target_paragraphs=12):
    """Six party files of generated paragraphs, a coalition target and labels.json."""
    rng = np.random.default_rng(seed)
    shared = [f"gemein{i}" for i in range(30)]
    vocab = {p: [f"{p.lower()}{i}" for i in range(30)] for p in PARTIES}
    root.mkdir(parents=True, exist_ok=True)

    def paragraph(words):
        n = int(rng.integers(10, 25))
        picks = [rng.choice(words) if rng.random() < 0.6 else rng.choice(shared) for _ in range(n)]
        return " ".join(picks).capitalize() + "."

    entries = []
    for i, party in enumerate(PARTIES):
        blocks = [f"Programm der {party}"] + [paragraph(vocab[party]) for _ in range(n_paragraphs)]
        (root / f"{party.lower()}.txt").write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
        entries.append({"file": f"{party.lower()}.txt", "name": party, "id": i})
    coalition = vocab["FDP"] + vocab["Gruene"] + vocab["SPD"]
    target = ["Mehr Fortschritt wagen"] + [paragraph(coalition) for _ in range(target_paragraphs)]
    (root / "koalition.txt").write_text("\n\n".join(target) + "\n", encoding="utf-8")
    (root / "labels.json").write_text(json.dumps({"parties": entries, "target": "koalition.txt"}), encoding="utf-8")
    return root


@pytest.fixture
def corpus_dir(tmp_path):
    return write_corpus_dir(tmp_path / "corpus")


# -- acceptance reporting: one PASS/FAIL line per criterion -------------------

_criteria: dict = {}
_SEVERITY = ["PASS", "SKIP", "FAIL"]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and not rep.failed and not rep.skipped):
        return
    number, title = marker.args
    status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
    prev = _criteria.get(number, (title, "PASS"))[1]
    _criteria[number] = (title, max(prev, status, key=_SEVERITY.index))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {title}")
