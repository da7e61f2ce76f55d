"""Acceptance gate: one test per shipped criterion.

Each criterion runs at its stated tolerance; `pytest -v` therefore prints
one pass/fail/skip line per criterion. Criteria that require the real
treebank or pre-trained word vectors look for

    TREENN_SST_DIR      directory containing train.txt/dev.txt/test.txt
    TREENN_GLOVE_100D   path to the 100-dimensional GloVe text file

and skip with an explicit reason when those are absent (this sandbox has
no network access to fetch them). Criterion 4 is waived without GloVe by
its own terms, with criterion 5 governing the directional claim; criteria
5 and 6 then run on a synthetic corpus shaped like the real one.
"""

import math
import os
import time

import numpy as np
import pytest
import synth
from conftest import TOKEN_POOL

from treenn.cli import main as cli_main
from treenn.embeddings import random_table
from treenn.evaluation import evaluate, run_stats
from treenn.model import (
    MODEL_LSTM,
    MODEL_RNN,
    MatvecCounter,
    count_matvecs,
    forward,
)
from treenn.tensor import ACTIVATIONS, activation_derivative, apply_activation, softmax
from treenn.training import (
    TrainConfig,
    adagrad_step,
    gradient_check,
    init_adagrad,
    init_params,
    train,
)
from treenn.treebank import (
    TASK_BINARY,
    Dataset,
    corpus_tokens,
    load_sst,
    parse_tree,
    print_tree,
    random_tree,
    to_binary_dataset,
    tree_stats,
)

SST_DIR = os.environ.get("TREENN_SST_DIR")
GLOVE_100D = os.environ.get("TREENN_GLOVE_100D")

SST_SKIP = (
    "real treebank files not available (no network in this environment); "
    "set TREENN_SST_DIR to a directory with train/dev/test.txt to run"
)


def test_criterion_1_gradient_correctness():
    """Both model kinds x three activations x 5 seeds x two lambdas: every
    tensor's analytic gradient matches central differences (h=1e-5) with
    relative error < 1e-4."""
    worst_overall = 0.0
    failures = []
    for kind in (MODEL_RNN, MODEL_LSTM):
        for activation in ACTIVATIONS:
            for seed in range(5):
                rng = np.random.default_rng([seed, 41])
                tree = random_tree(
                    rng, n_leaves=int(rng.integers(3, 7)), n_classes=5,
                    tokens=TOKEN_POOL,
                )
                vocab, table = random_table(set(TOKEN_POOL), dim=3, seed=seed)
                config = TrainConfig(
                    d=4, activation=activation, model_kind=kind, seed=seed
                )
                params = init_params(config, vocab, table)
                for lam in (0.0, 1e-3):
                    worst = gradient_check([tree], params, lam=lam, h=1e-5)
                    top = max(worst.values())
                    worst_overall = max(worst_overall, top)
                    for name, err in worst.items():
                        if err >= 1e-4:
                            failures.append(
                                f"{kind}/{activation}/seed{seed}/lam{lam:g}: "
                                f"{name} {err:.3e}"
                            )
    assert not failures, failures
    print(f"criterion 1 PASS: worst relative error {worst_overall:.3e} < 1e-4")


@pytest.mark.skipif(SST_DIR is None, reason=SST_SKIP)
def test_criterion_2_dataset_census():
    """Loading the real treebank reproduces the published counts."""
    dataset = load_sst(SST_DIR)
    fine = (len(dataset.train), len(dataset.dev), len(dataset.test))
    assert fine == (8544, 1101, 2210)
    binary = to_binary_dataset(dataset)
    assert (len(binary.train), len(binary.dev), len(binary.test)) == (
        6920, 872, 1821,
    )
    everything = dataset.train + dataset.dev + dataset.test
    stats = tree_stats(everything)
    assert stats.sentence_count == 11_855
    assert stats.unique_phrases == 215_154
    assert abs(stats.mean_leaf_count - 19.1) <= 0.1
    print(
        "criterion 2 PASS: 8544/1101/2210 fine, 6920/872/1821 binary, "
        f"{stats.unique_phrases} phrases, mean length {stats.mean_leaf_count:.2f}"
    )


def _shaped_test_split(n_trees: int, seed: int, tokens) -> list:
    """Trees whose leaf counts follow 3 + Poisson(16.1), matching the real
    test split's mean sentence length of ~19.1."""
    rng = np.random.default_rng([seed, 77])
    return [
        random_tree(rng, n_leaves=3 + int(rng.poisson(16.1)), n_classes=5,
                    tokens=tokens)
        for _ in range(n_trees)
    ]


def test_criterion_3_complexity_model():
    """Instrumented multiply counts equal the closed forms exactly per
    tree; at d = d_w the LSTM/plain ratio over a test split of the real
    shape lies in [8.0, 8.6]."""
    if SST_DIR is not None:
        test_trees = load_sst(SST_DIR).test
        source = "real"
    else:
        test_trees = _shaped_test_split(2210, seed=3, tokens=TOKEN_POOL)
        source = "synthetic (shape-matched)"

    # exact per-tree equality of instrumented counts and closed forms
    vocab, table = random_table(
        corpus_tokens(test_trees), dim=8, seed=0, trainable=True
    )
    check_params = {
        kind: init_params(
            TrainConfig(d=8, model_kind=kind, seed=0), vocab, table
        )
        for kind in (MODEL_RNN, MODEL_LSTM)
    }
    for tree in test_trees:
        n = tree.leaf_count()
        for kind, closed in (
            (MODEL_RNN, n * 8 * 8 + (n - 2) * 8 * 8),
            (MODEL_LSTM, 6 * n * 8 * 8 + (n - 2) * 10 * 8 * 8 + (n - 1) * 8 * 8),
        ):
            counter = MatvecCounter()
            forward(tree, check_params[kind], counter=counter, classify_nodes=False)
            assert counter.count == closed == count_matvecs(tree, kind, 8, 8)

    # cost ratio at d = d_w over the whole split
    d = 50
    lstm_total = sum(count_matvecs(t, MODEL_LSTM, d, d) for t in test_trees)
    rnn_total = sum(count_matvecs(t, MODEL_RNN, d, d) for t in test_trees)
    ratio = lstm_total / rnn_total
    assert 8.0 <= ratio <= 8.6, ratio
    print(f"criterion 3 PASS: exact counts on {len(test_trees)} {source} trees, "
          f"ratio {ratio:.3f} in [8.0, 8.6]")


@pytest.mark.skipif(
    SST_DIR is None or GLOVE_100D is None,
    reason=(
        "waived: pre-trained 100-D vectors (and/or the real treebank) are "
        "unavailable in this environment, so criterion 5's directional claim "
        "governs; set TREENN_SST_DIR and TREENN_GLOVE_100D to run"
    ),
)
def test_criterion_4_accuracy_reproduction():
    """5-seed medians land within the published figures +-2.5."""
    from treenn.embeddings import load_glove

    dataset = load_sst(SST_DIR)
    for task, expected in ((dataset.task, 48.1), (TASK_BINARY, 86.2)):
        data = dataset if task != TASK_BINARY else to_binary_dataset(dataset)
        tokens = corpus_tokens(data.train + data.dev + data.test)
        accuracies = []
        for seed in range(5):
            config = TrainConfig(task=task, seed=seed)
            vocab, table = load_glove(
                GLOVE_100D, expected_dim=100, corpus_vocab=tokens, seed=seed
            )
            params, _ = train(config, data, vocab, table)
            accuracies.append(evaluate(params, data.test).root_accuracy)
        median = run_stats(accuracies).median
        assert abs(median - expected) <= 2.5, (task, median)
        print(f"criterion 4 [{task}] median {median:.1f} vs {expected} +-2.5")
    print("criterion 4 PASS")


def test_criterion_5_directional_claim():
    """Over 5 paired seeds with tanh and random embeddings, the gated
    model's median test accuracy exceeds the plain composition's median.

    Runs on the real treebank when available; otherwise on a synthetic
    5-class sentiment corpus with compositional labels (negation flips,
    clamped sums), which preserves the claim's substance: the task is
    solvable through composition and the memory cell has to earn the gap.
    """
    if SST_DIR is not None:
        data = load_sst(SST_DIR)
        config_base = dict(d=50, epochs=20)
        dim = 100
    else:
        data = synth.sentiment_dataset(seed=0, n_train=500, n_dev=120, n_test=160)
        config_base = dict(d=16, epochs=10)
        dim = 12

    tokens = corpus_tokens(data.train + data.dev + data.test)
    medians = {}
    for kind in (MODEL_LSTM, MODEL_RNN):
        accuracies = []
        for seed in range(5):
            config = TrainConfig(
                activation="tanh", model_kind=kind, seed=seed, **config_base
            )
            vocab, table = random_table(tokens, dim=dim, seed=seed)
            params, _ = train(config, data, vocab, table)
            accuracies.append(evaluate(params, data.test).root_accuracy)
        medians[kind] = run_stats(accuracies).median
    assert medians[MODEL_LSTM] > medians[MODEL_RNN], medians
    print(
        f"criterion 5 PASS: gated median {medians[MODEL_LSTM]:.1f} > "
        f"plain median {medians[MODEL_RNN]:.1f} (random embeddings, "
        f"{'real' if SST_DIR else 'synthetic'} data)"
    )


def test_criterion_6_runtime_envelope():
    """One full-scale 20-epoch run (d=50, d_w=100) within 30 minutes on one
    core; scoring a 2210-sentence test split within 10 seconds."""
    if SST_DIR is not None:
        data = load_sst(SST_DIR)
    else:
        pool = [f"t{i}" for i in range(19_500)]
        rng_sizes = {"train": 8544, "dev": 1101, "test": 2210}
        splits = {
            name: _shaped_test_split(count, seed=i, tokens=pool)
            for i, (name, count) in enumerate(rng_sizes.items())
        }
        data = Dataset(task="fine", **splits)

    tokens = corpus_tokens(data.train + data.dev + data.test)
    vocab, table = random_table(tokens, dim=100, seed=0)
    config = TrainConfig(d=50, epochs=20, seed=0)

    t0 = time.perf_counter()
    params, history = train(config, data, vocab, table)
    train_wall = time.perf_counter() - t0
    assert len(history) == 20

    t0 = time.perf_counter()
    report = evaluate(params, data.test)
    eval_wall = time.perf_counter() - t0

    assert train_wall <= 30 * 60, f"training took {train_wall:.0f}s"
    assert eval_wall <= 10.0, f"evaluation took {eval_wall:.2f}s"
    print(
        f"criterion 6 PASS: {len(data.train)}-tree training {train_wall:.0f}s "
        f"<= 1800s, {len(data.test)}-tree evaluation {eval_wall:.2f}s <= 10s "
        f"(root accuracy {report.root_accuracy:.1f})"
    )


def test_criterion_7_determinism(tmp_path):
    """Two `train` invocations with the same manifest and seed produce
    byte-identical model artifacts and history CSVs."""
    data_dir = tmp_path / "data"
    synth.write_dataset(
        synth.sentiment_dataset(seed=1, n_train=50, n_dev=12, n_test=12), data_dir
    )
    cfg = tmp_path / "run.cfg"
    cfg.write_text("d = 8\nepochs = 2\nseed = 3\nbatch_size = 5\n")
    outputs = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        code = cli_main(
            ["train", "--data", str(data_dir), "--out", str(out),
             "--config", str(cfg), "--embedding-dim", "6"]
        )
        assert code == 0
        outputs.append(out)
    a, b = outputs
    model_a = (a / "run0.model").read_bytes()
    assert model_a == (b / "run0.model").read_bytes()
    history_a = (a / "run0.history.csv").read_text()
    assert history_a == (b / "run0.history.csv").read_text()
    print(
        f"criterion 7 PASS: {len(model_a)}-byte artifacts and history CSVs "
        "byte-identical across invocations"
    )


def test_criterion_8_named_properties():
    """The spot-checks the suite is named after, in one place: softmax
    normalization and shift-invariance, activation derivatives against
    finite differences, treebank round-trip, leaf-memory-zero reduction,
    child-swap gate symmetry, and the AdaGrad two-step magnitude law."""
    rng = np.random.default_rng(2024)

    # softmax: normalization and shift invariance
    for _ in range(50):
        logits = rng.uniform(-30, 30, size=rng.integers(2, 9))
        p = softmax(logits)
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.allclose(p, softmax(logits + rng.uniform(-100, 100)), atol=1e-12)

    # activation derivatives vs central differences
    x = np.linspace(-5.0, 5.0, 100)
    for kind in ACTIVATIONS:
        numeric = (
            apply_activation(kind, x + 1e-6) - apply_activation(kind, x - 1e-6)
        ) / 2e-6
        rel = np.abs(activation_derivative(kind, x) - numeric) / np.maximum(
            np.abs(numeric), 1e-8
        )
        assert rel.max() < 1e-6

    # treebank round-trip
    for seed in range(100):
        t = random_tree(
            np.random.default_rng(seed), n_leaves=int(rng.integers(1, 10)),
            n_classes=5,
        )
        assert print_tree(parse_tree(print_tree(t))) == print_tree(t)

    # leaf-memory-zero reduction: with leaf children the cell is exactly
    # the activated candidate blend
    vocab, table = random_table(set(TOKEN_POOL), dim=3, seed=5)
    params = init_params(TrainConfig(d=4, seed=5), vocab, table)
    annotated = forward(parse_tree("(3 (2 w0) (4 w1))"), params)
    st = annotated.state
    expected = np.tanh(st.cand1 * st.i1 + st.cand2 * st.i2 + params.composition.b_c)
    assert np.array_equal(st.c, expected)

    # child-swap gate symmetry (bitwise for leaf children)
    from treenn.model import NodeState, lstm_compose

    xs = NodeState(h=rng.uniform(-1, 1, 3), c=np.zeros(4), is_leaf=True)
    ys = NodeState(h=rng.uniform(-1, 1, 3), c=np.zeros(4), is_leaf=True)
    ab = lstm_compose(xs, ys, params.composition)
    ba = lstm_compose(ys, xs, params.composition)
    assert np.array_equal(ab.i1, ba.i2) and np.array_equal(ab.f1, ba.f2)

    # AdaGrad two-step magnitude law: equal gradients shrink the second
    # step by sqrt(2)
    state = init_adagrad(params)
    g = {name: np.ones_like(arr) for name, arr in params.tensor_items()}
    snaps = [
        {name: arr.copy() for name, arr in params.tensor_items()}
    ]
    for _ in range(2):
        adagrad_step(params, g, state, lr=0.05)
        snaps.append({name: arr.copy() for name, arr in params.tensor_items()})
    first = snaps[0]["b_i"] - snaps[1]["b_i"]
    second = snaps[1]["b_i"] - snaps[2]["b_i"]
    assert np.allclose(second / first, 1 / math.sqrt(2), atol=1e-6)

    print("criterion 8 PASS: named unit/property spot-checks hold")
