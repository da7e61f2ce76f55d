"""Synthetic sentiment treebanks for tests.

Labels follow a compositional rule the models can actually learn: word
scores in [-2, 2] combine by clamped addition, and a negator child flips
the other child's score. Label = score + 2, giving the usual five classes
with real structure (negation requires composition, not just word lookup).
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from treenn.treebank import Dataset, TASK_FINE, Tree, print_tree

POS_WORDS = ["great", "lovely", "superb", "delightful", "brilliant"]
MILD_POS_WORDS = ["good", "fine", "decent", "pleasant"]
NEG_WORDS = ["awful", "dreadful", "boring", "tedious", "lousy"]
MILD_NEG_WORDS = ["bad", "weak", "dull", "flawed"]
NEU_WORDS = ["the", "movie", "film", "plot", "it", "story", "acting", "was", "quite"]
FLIP_WORDS = ["not", "never", "hardly"]

_LEAF_SCORE = {w: 2 for w in POS_WORDS}
_LEAF_SCORE.update({w: 1 for w in MILD_POS_WORDS})
_LEAF_SCORE.update({w: -2 for w in NEG_WORDS})
_LEAF_SCORE.update({w: -1 for w in MILD_NEG_WORDS})
_LEAF_SCORE.update({w: 0 for w in NEU_WORDS})
_LEAF_SCORE.update({w: 0 for w in FLIP_WORDS})


def _clamp(score: int) -> int:
    return max(-2, min(2, score))


def _build(tokens: list[str], rng: np.random.Generator) -> tuple[Tree, int]:
    if len(tokens) == 1:
        word = tokens[0]
        score = _LEAF_SCORE[word]
        return Tree(label=score + 2, token=word), score
    split = int(rng.integers(1, len(tokens)))
    left, ls = _build(tokens[:split], rng)
    right, rs = _build(tokens[split:], rng)
    # A negator leaf flips its sibling's sentiment; otherwise clamped sum.
    if left.is_leaf and left.token in FLIP_WORDS:
        score = _clamp(-rs)
    elif right.is_leaf and right.token in FLIP_WORDS:
        score = _clamp(-ls)
    else:
        score = _clamp(ls + rs)
    return Tree(label=score + 2, left=left, right=right), score


def sentiment_tree(
    rng: np.random.Generator, min_leaves: int = 3, max_leaves: int = 9
) -> Tree:
    n = int(rng.integers(min_leaves, max_leaves + 1))
    tokens = []
    for _ in range(n):
        roll = rng.random()
        if roll < 0.18:
            pool = POS_WORDS
        elif roll < 0.32:
            pool = MILD_POS_WORDS
        elif roll < 0.50:
            pool = NEG_WORDS
        elif roll < 0.64:
            pool = MILD_NEG_WORDS
        elif roll < 0.78:
            pool = FLIP_WORDS
        else:
            pool = NEU_WORDS
        tokens.append(pool[int(rng.integers(len(pool)))])
    tree, _ = _build(tokens, rng)
    return tree


def sentiment_dataset(
    seed: int,
    n_train: int = 500,
    n_dev: int = 120,
    n_test: int = 160,
    min_leaves: int = 3,
    max_leaves: int = 9,
) -> Dataset:
    rng = np.random.default_rng([seed, 101])

    def make(n: int) -> list[Tree]:
        return [sentiment_tree(rng, min_leaves, max_leaves) for _ in range(n)]

    return Dataset(train=make(n_train), dev=make(n_dev), test=make(n_test), task=TASK_FINE)


def write_dataset(dataset: Dataset, directory: str | os.PathLike) -> Path:
    """Write train/dev/test.txt in the one-tree-per-line format."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, trees in (
        ("train", dataset.train), ("dev", dataset.dev), ("test", dataset.test)
    ):
        text = "".join(print_tree(t) + "\n" for t in trees)
        (directory / f"{name}.txt").write_text(text, encoding="utf-8")
    return directory


def all_tokens() -> list[str]:
    return sorted(
        set(
            POS_WORDS + MILD_POS_WORDS + NEG_WORDS + MILD_NEG_WORDS
            + NEU_WORDS + FLIP_WORDS
        )
    )


def shaped_tree(rng: np.random.Generator, n_leaves: int, tokens: list[str]) -> Tree:
    """Random-labeled tree with a given leaf count (for cost/scale tests)."""
    from treenn.treebank import random_tree

    return random_tree(rng, n_leaves=n_leaves, n_classes=5, tokens=tokens)
