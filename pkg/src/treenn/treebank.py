"""Stanford Sentiment Treebank ingestion.

Each line of a split file is one binary parse tree in s-expression form,
``(label token)`` at the leaves and ``(label child child)`` above them,
with integer sentiment labels 0..4 on every node. The binary task is
derived from the fine-grained trees by dropping neutral-rooted sentences
and collapsing the remaining labels to negative/positive.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterator

import numpy as np

TASK_FINE = "fine"
TASK_BINARY = "binary"

MIN_LABEL = 0
MAX_LABEL = 4


def num_classes(task: str) -> int:
    if task == TASK_FINE:
        return 5
    if task == TASK_BINARY:
        return 2
    raise ValueError(f"unknown task {task!r}, expected 'fine' or 'binary'")


class TreeParseError(ValueError):
    """Malformed s-expression; carries 1-based column (and line, if known)."""

    def __init__(self, message: str, column: int, line: int | None = None):
        self.column = column
        self.line = line
        where = f"line {line}, " if line is not None else ""
        super().__init__(f"{where}column {column}: {message}")


@dataclass
class Tree:
    """Labeled binary constituency node; a leaf iff ``token`` is set."""

    label: int | None
    token: str | None = None
    left: Tree | None = None
    right: Tree | None = None

    @property
    def is_leaf(self) -> bool:
        return self.token is not None

    def nodes(self) -> Iterator[Tree]:
        """All nodes, bottom-up (children before parents)."""
        if not self.is_leaf:
            yield from self.left.nodes()
            yield from self.right.nodes()
        yield self

    def leaves(self) -> Iterator[Tree]:
        for node in self.nodes():
            if node.is_leaf:
                yield node

    def leaf_count(self) -> int:
        return sum(1 for _ in self.leaves())

    def inner_count(self) -> int:
        return sum(1 for n in self.nodes() if not n.is_leaf)

    def tokens(self) -> list[str]:
        return [leaf.token for leaf in self.leaves()]


@dataclass
class Dataset:
    train: list[Tree]
    dev: list[Tree]
    test: list[Tree]
    task: str = TASK_FINE

    @property
    def n_classes(self) -> int:
        return num_classes(self.task)


def parse_tree(line: str, line_number: int | None = None) -> Tree:
    """Parse one s-expression line into a Tree.

    Raises TreeParseError (with column, and line_number when given) on
    unbalanced parens, bad labels, unary nodes or >2 children.
    """
    pos = 0
    n = len(line)

    def err(message: str, at: int) -> TreeParseError:
        return TreeParseError(message, column=at + 1, line=line_number)

    def skip_ws() -> None:
        nonlocal pos
        while pos < n and line[pos].isspace():
            pos += 1

    def parse_node() -> Tree:
        nonlocal pos
        if pos >= n or line[pos] != "(":
            raise err("expected '('", pos)
        open_at = pos
        pos += 1
        skip_ws()
        start = pos
        while pos < n and not line[pos].isspace() and line[pos] not in "()":
            pos += 1
        raw = line[start:pos]
        try:
            label = int(raw)
        except ValueError:
            raise err(f"non-integer label {raw!r}", start) from None
        if not MIN_LABEL <= label <= MAX_LABEL:
            raise err(f"label {label} outside {MIN_LABEL}..{MAX_LABEL}", start)
        skip_ws()
        children: list[Tree] = []
        token: str | None = None
        while pos < n and line[pos] != ")":
            if line[pos] == "(":
                children.append(parse_node())
            else:
                start = pos
                while pos < n and not line[pos].isspace() and line[pos] not in "()":
                    pos += 1
                if token is not None or children:
                    raise err("token mixed with other children", start)
                token = line[start:pos]
            skip_ws()
        if pos >= n:
            raise err("unbalanced parentheses: missing ')'", open_at)
        pos += 1  # consume ')'
        if token is not None:
            return Tree(label=label, token=token)
        if len(children) == 0:
            raise err("node has no children", open_at)
        if len(children) == 1:
            raise err("unary inner node (exactly 2 children required)", open_at)
        if len(children) > 2:
            raise err(f"{len(children)} children (exactly 2 required)", open_at)
        return Tree(label=label, left=children[0], right=children[1])

    skip_ws()
    tree = parse_node()
    skip_ws()
    if pos != n:
        raise err("trailing content after tree", pos)
    return tree


def print_tree(tree: Tree) -> str:
    """Canonical s-expression; inverse of parse_tree for labeled trees."""
    if tree.label is None:
        raise ValueError("cannot print a tree with unlabeled nodes")
    if tree.is_leaf:
        return f"({tree.label} {tree.token})"
    return f"({tree.label} {print_tree(tree.left)} {print_tree(tree.right)})"


def load_split(path: str | os.PathLike) -> list[Tree]:
    trees = []
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            trees.append(parse_tree(line, line_number=line_number))
    return trees


def load_sst(directory: str | os.PathLike) -> Dataset:
    """Load trees/{train,dev,test}.txt from a directory, fine-grained task."""
    splits = {}
    for name in ("train", "dev", "test"):
        splits[name] = load_split(os.path.join(directory, f"{name}.txt"))
    return Dataset(task=TASK_FINE, **splits)


def _to_binary_tree(tree: Tree) -> Tree:
    label = tree.label
    if label == 2:
        new_label = None  # neutral phrase: structure kept, no supervision
    elif label in (0, 1):
        new_label = 0
    else:
        new_label = 1
    if tree.is_leaf:
        return Tree(label=new_label, token=tree.token)
    return Tree(
        label=new_label,
        left=_to_binary_tree(tree.left),
        right=_to_binary_tree(tree.right),
    )


def to_binary_task(trees: list[Tree]) -> list[Tree]:
    """Drop neutral-rooted sentences, map 0,1 -> 0 and 3,4 -> 1.

    Non-root neutral phrases stay in the tree but lose their label, so they
    contribute neither loss nor accuracy counts.
    """
    return [_to_binary_tree(t) for t in trees if t.label != 2]


def to_binary_dataset(dataset: Dataset) -> Dataset:
    if dataset.task != TASK_FINE:
        raise ValueError("binary task is derived from fine-grained trees")
    return Dataset(
        train=to_binary_task(dataset.train),
        dev=to_binary_task(dataset.dev),
        test=to_binary_task(dataset.test),
        task=TASK_BINARY,
    )


@dataclass
class TreeStats:
    sentence_count: int
    mean_leaf_count: float
    labeled_nodes: int
    unique_phrases: int
    total_leaves: int = 0


def tree_stats(trees: list[Tree]) -> TreeStats:
    """Census of a tree collection.

    ``labeled_nodes`` counts node instances carrying a label;
    ``unique_phrases`` counts distinct labeled phrase strings (the figure
    treebank documentation quotes, since repeated words/phrases share one
    dictionary entry).
    """
    total_leaves = 0
    labeled = 0
    phrases: set[str] = set()
    for tree in trees:
        total_leaves += tree.leaf_count()
        for node in tree.nodes():
            if node.label is not None:
                labeled += 1
                phrases.add(" ".join(node.tokens()))
    count = len(trees)
    return TreeStats(
        sentence_count=count,
        mean_leaf_count=total_leaves / count if count else 0.0,
        labeled_nodes=labeled,
        unique_phrases=len(phrases),
        total_leaves=total_leaves,
    )


def corpus_tokens(trees: list[Tree], include_lowercase: bool = True) -> set[str]:
    """Token set of a corpus, optionally widened with lowercase variants
    so embedding lookup's case fallback has rows to land on."""
    tokens: set[str] = set()
    for tree in trees:
        tokens.update(tree.tokens())
    if include_lowercase:
        tokens |= {t.lower() for t in tokens}
    return tokens


def random_tree(
    rng: np.random.Generator,
    n_leaves: int,
    n_classes: int,
    tokens: list[str] | None = None,
) -> Tree:
    """Random labeled binary tree, for gradient checks and synthetic data."""
    if n_leaves < 1:
        raise ValueError("need at least one leaf")
    if tokens is None:
        tokens = [f"w{i}" for i in range(max(4, n_leaves))]

    def build(k: int) -> Tree:
        label = int(rng.integers(n_classes))
        if k == 1:
            return Tree(label=label, token=tokens[int(rng.integers(len(tokens)))])
        split = int(rng.integers(1, k))
        return Tree(label=label, left=build(split), right=build(k - split))

    return build(n_leaves)
