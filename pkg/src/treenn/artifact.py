"""Model containers, run manifests, and input hashing.

A saved model is self-describing: an ASCII header (format version, model
kind, activation, task, dimensions, tensor manifest, vocabulary) followed
by raw little-endian float64 blocks, one per tensor, in header order.
Saving, loading, and saving again produces byte-identical files.

Layout:

    treenn-model 1
    kind lstm
    activation tanh
    task fine
    d 50
    d_w 100
    n_classes 5
    lowercase_fallback 1
    embeddings_trainable 1
    unk_index 19537
    vocab_size 19538
    tensor_count 31
    tensor W_i1_leaf 50 100
    ...                         (one line per tensor, canonical order)
    vocab
    <one token per line, vocab_size lines>
    end-header
    <tensor blocks: little-endian f8, C order, header order>

Run manifests are flat key=value text files (one pair per line) and are
the only output holding wall-clock or timestamp fields, keeping model and
history files byte-reproducible.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import fields
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingTable, Vocabulary
from .model import (
    MODEL_LSTM,
    MODEL_RNN,
    LstmParams,
    ModelParams,
    RnnParams,
    SoftmaxParams,
)
from .tensor import ACTIVATIONS
from .treebank import TASK_BINARY, TASK_FINE

MAGIC = "treenn-model"
FORMAT_VERSION = 1


class ArtifactError(ValueError):
    pass


def save_model(params: ModelParams, path: str | os.PathLike) -> None:
    tensors = list(params.tensor_items(include_embeddings=True))
    lines = [
        f"{MAGIC} {FORMAT_VERSION}",
        f"kind {params.kind}",
        f"activation {params.activation}",
        f"task {_task_for_classes(params.n_classes)}",
        f"d {params.d}",
        f"d_w {params.d_w}",
        f"n_classes {params.n_classes}",
        f"lowercase_fallback {int(params.lowercase_fallback)}",
        f"embeddings_trainable {int(params.embeddings.trainable)}",
        f"unk_index {params.vocab.unk_index}",
        f"vocab_size {len(params.vocab.tokens)}",
        f"tensor_count {len(tensors)}",
    ]
    for name, arr in tensors:
        dims = " ".join(str(n) for n in arr.shape)
        lines.append(f"tensor {name} {dims}")
    lines.append("vocab")
    lines.extend(params.vocab.tokens)
    lines.append("end-header")
    header = ("\n".join(lines) + "\n").encode("utf-8")

    with open(path, "wb") as fh:
        fh.write(header)
        for _, arr in tensors:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _task_for_classes(n_classes: int) -> str:
    return TASK_BINARY if n_classes == 2 else TASK_FINE


class _HeaderReader:
    """Line-at-a-time reader over the byte buffer; tracks the blob offset."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def line(self) -> str:
        end = self.data.find(b"\n", self.offset)
        if end < 0:
            raise ArtifactError("truncated header")
        raw = self.data[self.offset : end]
        self.offset = end + 1
        return raw.decode("utf-8")

    def keyed(self, key: str) -> str:
        line = self.line()
        prefix = key + " "
        if not line.startswith(prefix):
            raise ArtifactError(f"expected {key!r} line, found {line!r}")
        return line[len(prefix) :]


def load_model(path: str | os.PathLike) -> ModelParams:
    data = Path(path).read_bytes()
    rd = _HeaderReader(data)

    magic = rd.line()
    if magic != f"{MAGIC} {FORMAT_VERSION}":
        raise ArtifactError(
            f"unsupported model file (header {magic!r}, "
            f"expected {MAGIC!r} version {FORMAT_VERSION})"
        )
    kind = rd.keyed("kind")
    if kind not in (MODEL_RNN, MODEL_LSTM):
        raise ArtifactError(f"unknown model kind {kind!r}")
    activation = rd.keyed("activation")
    if activation not in ACTIVATIONS:
        raise ArtifactError(f"unknown activation {activation!r}")
    task = rd.keyed("task")
    d = int(rd.keyed("d"))
    d_w = int(rd.keyed("d_w"))
    n_classes = int(rd.keyed("n_classes"))
    lowercase_fallback = bool(int(rd.keyed("lowercase_fallback")))
    trainable = bool(int(rd.keyed("embeddings_trainable")))
    unk_index = int(rd.keyed("unk_index"))
    vocab_size = int(rd.keyed("vocab_size"))
    tensor_count = int(rd.keyed("tensor_count"))

    manifest: list[tuple[str, tuple[int, ...]]] = []
    for _ in range(tensor_count):
        parts = rd.keyed("tensor").split(" ")
        manifest.append((parts[0], tuple(int(p) for p in parts[1:])))

    if rd.line() != "vocab":
        raise ArtifactError("missing vocab section")
    tokens = [rd.line() for _ in range(vocab_size)]
    if rd.line() != "end-header":
        raise ArtifactError("missing end-header marker")

    tensors: dict[str, np.ndarray] = {}
    offset = rd.offset
    for name, shape in manifest:
        size = int(np.prod(shape)) if shape else 1
        nbytes = size * 8
        block = data[offset : offset + nbytes]
        if len(block) != nbytes:
            raise ArtifactError(f"tensor block {name!r} truncated")
        tensors[name] = (
            np.frombuffer(block, dtype="<f8").astype(np.float64).reshape(shape)
        )
        offset += nbytes
    if offset != len(data):
        raise ArtifactError("trailing bytes after tensor blocks")

    comp_cls = RnnParams if kind == MODEL_RNN else LstmParams
    comp_names = (
        ["W1_leaf", "W2_leaf", "W1_inner", "W2_inner", "b"]
        if kind == MODEL_RNN
        else [f.name for f in fields(LstmParams) if f.name != "activation"]
    )
    try:
        comp = comp_cls(
            activation=activation, **{n: tensors[n] for n in comp_names}
        )
        softmax = SoftmaxParams(
            W_leaf=tensors["softmax_W_leaf"],
            b_leaf=tensors["softmax_b_leaf"],
            W_inner=tensors["softmax_W_inner"],
            b_inner=tensors["softmax_b_inner"],
        )
        embedding = tensors["embedding"]
    except KeyError as exc:
        raise ArtifactError(f"model file is missing tensor {exc}") from None

    if embedding.shape != (vocab_size, d_w):
        raise ArtifactError(
            f"embedding block {embedding.shape} does not match "
            f"vocab_size={vocab_size}, d_w={d_w}"
        )
    vocab = Vocabulary(
        tokens=tokens,
        index={t: i for i, t in enumerate(tokens)},
        unk_index=unk_index,
    )
    table = EmbeddingTable(dim=d_w, vectors=embedding, trainable=trainable)
    params = ModelParams(
        kind=kind,
        composition=comp,
        softmax=softmax,
        vocab=vocab,
        embeddings=table,
        d=d,
        d_w=d_w,
        n_classes=n_classes,
        lowercase_fallback=lowercase_fallback,
    )
    if _task_for_classes(n_classes) != task:
        raise ArtifactError(f"task {task!r} inconsistent with {n_classes} classes")
    return params


def write_manifest(entries: dict[str, str], path: str | os.PathLike) -> None:
    lines = []
    for key, value in entries.items():
        key, value = str(key), str(value)
        if "=" in key or "\n" in key or "\n" in value:
            raise ValueError(f"manifest entry {key!r} not representable")
        lines.append(f"{key}={value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: str | os.PathLike) -> dict[str, str]:
    entries: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw:
            continue
        key, sep, value = raw.partition("=")
        if not sep:
            raise ValueError(f"malformed manifest line {raw!r}")
        entries[key] = value
    return entries


def content_hash(paths: list[str | os.PathLike]) -> str:
    """sha256 over the named files' bytes (name and length delimited)."""
    h = hashlib.sha256()
    for p in paths:
        data = Path(p).read_bytes()
        h.update(f"{Path(p).name} {len(data)}\n".encode("utf-8"))
        h.update(data)
    return h.hexdigest()
