"""Versioned binary container for trained classifiers.

Layout::

    MAGIC (8 bytes) | version (u32 LE) | header length (u64 LE) | header JSON | array payload

The header (UTF-8 JSON, sorted keys) carries the backend tag, label set,
feature config, vocabulary triples, metadata, and for every array its dtype,
shape, byte offset and length inside the payload, plus a SHA-256 of the
payload.  Arrays are stored as raw little-endian float64, so a save/load
round trip reproduces parameters bit for bit.  No timestamps are written:
identical models serialize to identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .corpus import PartyLabel
from .errors import ArtifactFormatError
from .features import FeatureConfig, Vocabulary
from .model import Classifier, NaiveBayesModel, SoftmaxModel

MAGIC = b"MANIATTR"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")

_ARRAYS = {
    "softmax": ("weights", "bias"),
    "nb": ("log_likelihood", "log_prior"),
}


def dumps(clf: Classifier) -> bytes:
    model = clf.model
    if model.backend not in _ARRAYS:
        raise ArtifactFormatError(f"cannot serialize backend {model.backend!r}")
    payload = bytearray()
    arrays = {}
    for name in _ARRAYS[model.backend]:
        arr = np.ascontiguousarray(getattr(model, name), dtype="<f8")
        raw = arr.tobytes()
        arrays[name] = {"dtype": "<f8", "shape": list(arr.shape), "offset": len(payload), "nbytes": len(raw)}
        payload += raw
    header = {
        "backend": model.backend,
        "labels": [[lab.id, lab.name] for lab in model.labels],
        "feature_config": clf.feature_config.to_dict(),
        "vocabulary": {"n_docs": clf.vocabulary.n_docs, "terms": clf.vocabulary.to_records()},
        "arrays": arrays,
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "metadata": dict(clf.metadata),
    }
    if isinstance(model, SoftmaxModel):
        header["loss_history"] = [float(x).hex() for x in model.loss_history]
    else:
        header["alpha"] = float(model.alpha).hex()
    hbytes = json.dumps(header, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    return _PREFIX.pack(MAGIC, FORMAT_VERSION, len(hbytes)) + hbytes + bytes(payload)


def loads(data: bytes) -> Classifier:
    if len(data) < _PREFIX.size:
        raise ArtifactFormatError("artifact truncated before header")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ArtifactFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ArtifactFormatError(f"unsupported artifact version {version} (expected {FORMAT_VERSION})")
    start = _PREFIX.size + hlen
    if len(data) < start:
        raise ArtifactFormatError("artifact truncated inside header")
    try:
        header = json.loads(data[_PREFIX.size : start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArtifactFormatError(f"corrupt header: {exc}") from None
    payload = data[start:]
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise ArtifactFormatError("payload checksum mismatch")

    arrays = {}
    for name, spec in header["arrays"].items():
        chunk = payload[spec["offset"] : spec["offset"] + spec["nbytes"]]
        arrays[name] = np.frombuffer(chunk, dtype=spec["dtype"]).reshape(spec["shape"]).astype(np.float64)
    labels = tuple(PartyLabel(int(i), n) for i, n in header["labels"])
    backend = header["backend"]
    if backend == "softmax":
        history = tuple(float.fromhex(x) for x in header.get("loss_history", []))
        model = SoftmaxModel(arrays["weights"], arrays["bias"], labels, history)
    elif backend == "nb":
        model = NaiveBayesModel(arrays["log_prior"], arrays["log_likelihood"], labels, float.fromhex(header["alpha"]))
    else:
        raise ArtifactFormatError(f"unknown backend tag {backend!r}")
    vocab = Vocabulary.from_records(header["vocabulary"]["terms"], header["vocabulary"]["n_docs"])
    return Classifier(model, FeatureConfig.from_dict(header["feature_config"]), vocab, header.get("metadata", {}))


def save(clf: Classifier, path: str | Path) -> None:
    Path(path).write_bytes(dumps(clf))


def load(path: str | Path) -> Classifier:
    return loads(Path(path).read_bytes())
