"""Shared helpers: tiny models and random trees sized for exhaustive checks."""

from __future__ import annotations

import numpy as np

from treenn.embeddings import random_table
from treenn.training import TrainConfig, init_params
from treenn.treebank import TASK_FINE, Tree, random_tree

TOKEN_POOL = [f"w{i}" for i in range(8)]


def tiny_model(
    kind: str = "lstm",
    activation: str = "tanh",
    seed: int = 0,
    d: int = 4,
    d_w: int = 3,
    task: str = TASK_FINE,
):
    vocab, table = random_table(set(TOKEN_POOL), dim=d_w, seed=seed)
    config = TrainConfig(
        d=d, activation=activation, model_kind=kind, seed=seed, task=task
    )
    return init_params(config, vocab, table), config


def tiny_tree(seed: int = 0, n_leaves: int = 5, n_classes: int = 5) -> Tree:
    rng = np.random.default_rng([seed, 17])
    return random_tree(rng, n_leaves=n_leaves, n_classes=n_classes, tokens=TOKEN_POOL)


def tiny_batch(seed: int = 0, count: int = 3, n_classes: int = 5) -> list[Tree]:
    rng = np.random.default_rng([seed, 23])
    return [
        random_tree(
            rng,
            n_leaves=int(rng.integers(2, 7)),
            n_classes=n_classes,
            tokens=TOKEN_POOL,
        )
        for _ in range(count)
    ]
