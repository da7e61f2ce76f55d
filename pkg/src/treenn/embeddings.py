"""Word embeddings: GloVe text-format loading and seeded random tables.

Leaf nodes read their vectors from an EmbeddingTable through a Vocabulary.
Lookup never fails: exact token, then lowercased token, then the unknown
row. Tokens missing from the vector file get their own random row drawn
from [-1/sqrt(dim), 1/sqrt(dim)], like weight-matrix initialization.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

UNK_TOKEN = "<unk>"


@dataclass
class Vocabulary:
    tokens: list[str]
    index: dict[str, int] = field(repr=False)
    unk_index: int

    def __len__(self) -> int:
        return len(self.tokens)

    def row_for(self, token: str, lowercase_fallback: bool = True) -> int:
        """Row index for a token; falls back to lowercase, then unk."""
        idx = self.index.get(token)
        if idx is not None:
            return idx
        if lowercase_fallback:
            idx = self.index.get(token.lower())
            if idx is not None:
                return idx
        return self.unk_index


@dataclass
class EmbeddingTable:
    dim: int
    vectors: np.ndarray  # (len(vocab), dim) float64
    trainable: bool = True


def lookup(
    vocab: Vocabulary,
    table: EmbeddingTable,
    token: str,
    lowercase_fallback: bool = True,
) -> np.ndarray:
    return table.vectors[vocab.row_for(token, lowercase_fallback)]


def _random_rows(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(dim)
    return rng.uniform(-bound, bound, size=(count, dim))


def read_glove_rows(
    path: str | os.PathLike, expected_dim: int, retain: set[str]
) -> dict[str, np.ndarray]:
    """Parse a GloVe text file, keeping only tokens in ``retain``.

    Format: one token per line, then ``expected_dim`` space-separated
    decimal floats. Raises ValueError naming token and line on a
    dimension mismatch.
    """
    rows: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            token, _, rest = line.partition(" ")
            if token not in retain or token in rows:
                continue
            values = np.array(rest.split(), dtype=np.float64)
            if values.shape[0] != expected_dim:
                raise ValueError(
                    f"{path}: line {line_number}: token {token!r} has "
                    f"{values.shape[0]} values, expected {expected_dim}"
                )
            rows[token] = values
    return rows


def build_table(
    corpus_vocab: set[str],
    glove_rows: dict[str, np.ndarray],
    dim: int,
    seed: int,
    trainable: bool = True,
    lowercase_fallback: bool = True,
) -> tuple[Vocabulary, EmbeddingTable]:
    """Assemble the vocabulary and table for a corpus from parsed rows.

    Row order is canonical for reproducibility: file-found tokens in
    insertion order, then missing corpus tokens lexicographically (each
    with its own seeded random row), then the unk row.
    """
    tokens = [t for t in glove_rows if t in corpus_vocab]
    covered = set(tokens)
    missing = []
    for token in sorted(corpus_vocab):
        if token in covered:
            continue
        if lowercase_fallback and token.lower() in covered:
            continue  # resolved at lookup time through the fallback
        missing.append(token)

    rng = np.random.default_rng(seed)
    vectors = np.empty((len(tokens) + len(missing) + 1, dim), dtype=np.float64)
    for i, token in enumerate(tokens):
        vectors[i] = glove_rows[token]
    vectors[len(tokens):] = _random_rows(rng, len(missing) + 1, dim)

    tokens = tokens + missing + [UNK_TOKEN]
    index = {t: i for i, t in enumerate(tokens)}
    vocab = Vocabulary(tokens=tokens, index=index, unk_index=len(tokens) - 1)
    return vocab, EmbeddingTable(dim=dim, vectors=vectors, trainable=trainable)


def load_glove(
    path: str | os.PathLike,
    expected_dim: int,
    corpus_vocab: set[str],
    seed: int = 0,
    trainable: bool = True,
    lowercase_fallback: bool = True,
) -> tuple[Vocabulary, EmbeddingTable]:
    """Load pre-trained vectors for a corpus from a GloVe text file."""
    rows = read_glove_rows(path, expected_dim, corpus_vocab)
    return build_table(
        corpus_vocab, rows, expected_dim, seed,
        trainable=trainable, lowercase_fallback=lowercase_fallback,
    )


def random_embeddings(vocab_size: int, dim: int, seed: int) -> EmbeddingTable:
    """Uniform [-1/sqrt(dim), 1/sqrt(dim)] table, deterministic per seed."""
    if vocab_size <= 0 or dim <= 0:
        raise ValueError("vocab_size and dim must be positive")
    rng = np.random.default_rng(seed)
    return EmbeddingTable(dim=dim, vectors=_random_rows(rng, vocab_size, dim))


def random_table(
    corpus_vocab: set[str], dim: int, seed: int, trainable: bool = True
) -> tuple[Vocabulary, EmbeddingTable]:
    """Vocabulary + random table for a corpus (no pre-trained vectors)."""
    tokens = sorted(corpus_vocab) + [UNK_TOKEN]
    index = {t: i for i, t in enumerate(tokens)}
    vocab = Vocabulary(tokens=tokens, index=index, unk_index=len(tokens) - 1)
    table = random_embeddings(len(tokens), dim, seed)
    table.trainable = trainable
    return vocab, table
