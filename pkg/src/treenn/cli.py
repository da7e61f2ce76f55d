"""Command-line interface.

Subcommands: prepare (dataset/embedding sanity report), train, evaluate,
gradcheck (finite-difference audit of the analytic gradients), stats
(order statistics over per-run accuracies), complexity (matvec multiply
counts per tree and the LSTM/RNN cost ratio).

Configuration is a flat key=value file with TrainConfig field names
(`lambda` accepted for the L2 coefficient); command-line flags override
file values, which override defaults.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import artifact, evaluation, training
from .embeddings import load_glove, random_table, read_glove_rows
from .model import MODEL_LSTM, MODEL_RNN, ModelParams, count_matvecs
from .tensor import ACTIVATIONS
from .treebank import (
    TASK_BINARY,
    TASK_FINE,
    Dataset,
    TreeParseError,
    corpus_tokens,
    load_split,
    load_sst,
    random_tree,
    to_binary_task,
    to_binary_dataset,
    tree_stats,
)
from .training import TrainConfig


class CliError(Exception):
    pass


# config-file key -> (TrainConfig attribute, parser)
def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes"):
        return True
    if lowered in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


CONFIG_KEYS = {
    "d": ("d", int),
    "activation": ("activation", str),
    "learning_rate": ("learning_rate", float),
    "lambda": ("lam", float),
    "lam": ("lam", float),
    "batch_size": ("batch_size", int),
    "epochs": ("epochs", int),
    "seed": ("seed", int),
    "task": ("task", str),
    "model_kind": ("model_kind", str),
    "embeddings_trainable": ("embeddings_trainable", _parse_bool),
}


def load_config_file(path: str) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or key not in CONFIG_KEYS:
            raise CliError(f"{path}:{lineno}: unknown config line {raw!r}")
        attr, parse = CONFIG_KEYS[key]
        try:
            values[attr] = parse(value)
        except ValueError as exc:
            raise CliError(f"{path}:{lineno}: {exc}") from None
    return values


def resolve_config(args: argparse.Namespace) -> TrainConfig:
    config = TrainConfig()
    if getattr(args, "config", None):
        config = replace(config, **load_config_file(args.config))
    overrides = {}
    for attr in (
        "d", "activation", "learning_rate", "lam", "batch_size",
        "epochs", "seed", "task", "model_kind",
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[attr] = value
    if getattr(args, "freeze_embeddings", None):
        overrides["embeddings_trainable"] = False
    config = replace(config, **overrides)
    try:
        config.validate()
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return config


def _add_config_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="key=value config file")
    sp.add_argument("--model", dest="model_kind", choices=(MODEL_RNN, MODEL_LSTM))
    sp.add_argument("--activation", choices=ACTIVATIONS)
    sp.add_argument("--task", choices=(TASK_FINE, TASK_BINARY))
    sp.add_argument("--d", type=int, help="composition vector width")
    sp.add_argument("--lr", dest="learning_rate", type=float)
    sp.add_argument("--lambda", dest="lam", type=float, help="L2 coefficient")
    sp.add_argument("--batch-size", type=int, dest="batch_size")
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--seed", type=int)


def _add_embedding_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--embeddings", help="GloVe-format text file (optional)")
    sp.add_argument(
        "--embedding-dim", type=int, default=100, dest="embedding_dim",
        help="word vector width (validates the file; sizes random tables)",
    )
    sp.add_argument(
        "--freeze-embeddings", action="store_const", const=True, default=None,
        dest="freeze_embeddings", help="exclude word vectors from training",
    )
    sp.add_argument(
        "--lowercase", action=argparse.BooleanOptionalAction, default=True,
        help="fall back to lowercased tokens before <unk>",
    )


def _load_task_dataset(data_dir: str, task: str) -> Dataset:
    dataset = load_sst(data_dir)
    if task == TASK_BINARY:
        dataset = to_binary_dataset(dataset)
    return dataset


def _build_embeddings(args, config: TrainConfig, dataset: Dataset):
    vocab_tokens = corpus_tokens(
        dataset.train + dataset.dev + dataset.test,
        include_lowercase=args.lowercase,
    )
    if args.embeddings:
        return load_glove(
            args.embeddings,
            expected_dim=args.embedding_dim,
            corpus_vocab=vocab_tokens,
            seed=config.seed,
            trainable=config.embeddings_trainable,
            lowercase_fallback=args.lowercase,
        )
    return random_table(
        vocab_tokens, dim=args.embedding_dim, seed=config.seed,
        trainable=config.embeddings_trainable,
    )


def cmd_prepare(args: argparse.Namespace) -> int:
    dataset = load_sst(args.data)
    splits = [("train", dataset.train), ("dev", dataset.dev), ("test", dataset.test)]
    print("split sentences labeled_nodes mean_length")
    for name, trees in splits:
        st = tree_stats(trees)
        print(f"{name} {st.sentence_count} {st.labeled_nodes} {st.mean_leaf_count:.2f}")
    every = dataset.train + dataset.dev + dataset.test
    total = tree_stats(every)
    print(f"total sentences {total.sentence_count}")
    print(f"mean sentence length {total.mean_leaf_count:.2f}")
    print(f"unique labeled phrases {total.unique_phrases}")
    binary = to_binary_dataset(dataset)
    print(
        "binary sentences "
        f"{len(binary.train)} {len(binary.dev)} {len(binary.test)}"
    )
    if args.embeddings:
        tokens = corpus_tokens(every, include_lowercase=args.lowercase)
        rows = read_glove_rows(args.embeddings, args.embedding_dim, tokens)
        print(f"embedding tokens found {len(rows)} of {len(tokens)} in corpus")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if args.runs < 1:
        raise CliError("--runs must be at least 1")
    dataset = _load_task_dataset(args.data, config.task)
    vocab, table = _build_embeddings(args, config, dataset)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    input_files = [Path(args.data) / f"{s}.txt" for s in ("train", "dev", "test")]
    if args.embeddings:
        input_files.append(Path(args.embeddings))
    inputs_hash = artifact.content_hash(input_files)

    accuracies = []
    for run_idx in range(args.runs):
        run_config = replace(config, seed=config.seed + run_idx)
        t0 = time.perf_counter()

        def log(rec: training.EpochRecord) -> None:
            print(
                f"run {run_idx} epoch {rec.epoch}/{run_config.epochs} "
                f"loss {rec.train_loss:.4f} dev {rec.dev_accuracy:.2f} "
                f"({rec.wall_seconds:.1f}s)",
                flush=True,
            )

        params, history = training.train(
            run_config, dataset, vocab, table,
            log=log, lowercase_fallback=args.lowercase,
        )
        wall = time.perf_counter() - t0
        report = evaluation.evaluate(params, dataset.test)
        accuracies.append(report.root_accuracy)

        model_path = out_dir / f"run{run_idx}.model"
        artifact.save_model(params, model_path)
        (out_dir / f"run{run_idx}.history.csv").write_text(
            training.history_csv(history)
        )
        best = max(history, key=lambda r: r.dev_accuracy) if history else None
        manifest = {
            "format": "treenn-run 1",
            "model_kind": run_config.model_kind,
            "activation": run_config.activation,
            "task": run_config.task,
            "d": run_config.d,
            "d_w": table.dim,
            "learning_rate": run_config.learning_rate,
            "lambda": run_config.lam,
            "batch_size": run_config.batch_size,
            "epochs": run_config.epochs,
            "seed": run_config.seed,
            "embeddings_trainable": int(run_config.embeddings_trainable),
            "data": args.data,
            "embeddings": args.embeddings or "",
            "embedding_dim": table.dim,
            "inputs_sha256": inputs_hash,
            "model_file": model_path.name,
            "best_epoch": best.epoch if best else "",
            "best_dev_accuracy": repr(best.dev_accuracy) if best else "",
            "test_root_accuracy": repr(report.root_accuracy),
            "test_allnode_accuracy": repr(report.allnode_accuracy),
            "wall_seconds": f"{wall:.3f}",
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        artifact.write_manifest(manifest, out_dir / f"run{run_idx}.manifest.txt")
        print(
            f"run {run_idx} done: test root accuracy {report.root_accuracy:.2f} "
            f"-> {model_path}",
            flush=True,
        )

    stats = evaluation.run_stats(accuracies)
    (out_dir / "runs.csv").write_text(evaluation.run_stats_csv(stats))
    print(f"median test root accuracy {stats.median:.2f} over {args.runs} run(s)")
    return 0


def _guard_task(params: ModelParams, trees) -> list:
    """Match a split file's labels to the model's class count.

    Binary models accept raw 5-class files by collapsing labels (neutral
    nodes unlabeled, neutral-rooted sentences dropped). A 5-class model fed
    a file whose labels never leave {0,1} is a class-count mismatch.
    """
    max_label = max(
        label for t in trees for n in t.nodes() if (label := n.label) is not None
    )
    if params.n_classes == 2:
        if max_label > 1:
            return to_binary_task(trees)
        return trees
    if max_label <= 1:
        raise CliError(
            "class-count mismatch: model has 5 classes but the split "
            "looks binary (labels never exceed 1)"
        )
    return trees


def cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        params = artifact.load_model(args.model)
    except artifact.ArtifactError as exc:
        raise CliError(str(exc)) from None
    trees = load_split(args.data)
    if not trees:
        raise CliError(f"no trees in {args.data}")
    trees = _guard_task(params, trees)
    report = evaluation.evaluate(params, trees)
    text = evaluation.eval_report_csv(report)
    sys.stdout.write(text)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "eval.csv").write_text(text)
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    token_pool = [f"w{i}" for i in range(12)]
    worst_per_tensor: dict[str, float] = {}
    worst_overall = 0.0
    failed = []
    for model_kind in (MODEL_RNN, MODEL_LSTM):
        for activation in ACTIVATIONS:
            for seed in range(args.seeds):
                rng = np.random.default_rng([seed, 7])
                tree = random_tree(
                    rng,
                    n_leaves=int(rng.integers(3, 7)),
                    n_classes=5,
                    tokens=token_pool,
                )
                vocab, table = random_table(set(token_pool), dim=args.d_w, seed=seed)
                config = TrainConfig(
                    d=args.d,
                    activation=activation,
                    model_kind=model_kind,
                    seed=seed,
                    task=TASK_FINE,
                )
                params = training.init_params(config, vocab, table)
                for lam in (0.0, 1e-3):
                    worst = training.gradient_check([tree], params, lam=lam)
                    top_name = max(worst, key=worst.get)
                    top = worst[top_name]
                    print(
                        f"{model_kind} {activation} seed={seed} lam={lam:g} "
                        f"worst={top:.3e} ({top_name})"
                    )
                    worst_overall = max(worst_overall, top)
                    for name, err in worst.items():
                        worst_per_tensor[name] = max(
                            worst_per_tensor.get(name, 0.0), err
                        )
                        if err >= args.threshold and name not in failed:
                            failed.append(name)
    print("worst relative error per tensor:")
    for name in sorted(worst_per_tensor):
        print(f"  {name} {worst_per_tensor[name]:.3e}")
    if failed:
        print(
            f"gradcheck FAIL (threshold {args.threshold:g}): "
            + ", ".join(sorted(failed))
        )
        return 1
    print(f"gradcheck PASS (worst {worst_overall:.3e} < threshold {args.threshold:g})")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    lines = [ln for ln in Path(args.accuracies).read_text().splitlines() if ln.strip()]
    if not lines:
        raise CliError(f"no accuracies in {args.accuracies}")
    values = []
    if lines[0].startswith("run_id"):
        for line in lines[1:]:
            cells = line.split(",")
            if cells[0] == "summary":
                continue
            values.append(float(cells[1]))
    else:
        values = [float(ln) for ln in lines]
    if not values:
        raise CliError(f"no accuracy rows in {args.accuracies}")
    sys.stdout.write(evaluation.run_stats_csv(evaluation.run_stats(values)))
    return 0


def cmd_complexity(args: argparse.Namespace) -> int:
    data = Path(args.data)
    if data.is_dir():
        dataset = load_sst(data)
        splits = [
            ("train", dataset.train), ("dev", dataset.dev), ("test", dataset.test)
        ]
    else:
        splits = [(data.stem, load_split(data))]
    d, d_w = args.d, args.d_w
    print("split trees mean_leaves rnn_mean lstm_mean ratio")
    for name, trees in splits:
        rnn_counts = [count_matvecs(t, MODEL_RNN, d, d_w) for t in trees]
        lstm_counts = [count_matvecs(t, MODEL_LSTM, d, d_w) for t in trees]
        rnn_mean = sum(rnn_counts) / len(rnn_counts)
        lstm_mean = sum(lstm_counts) / len(lstm_counts)
        leaves = sum(t.leaf_count() for t in trees) / len(trees)
        ratio = lstm_mean / rnn_mean if rnn_mean else float("nan")
        print(
            f"{name} {len(trees)} {leaves:.2f} "
            f"{rnn_mean:.1f} {lstm_mean:.1f} {ratio:.3f}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treenn",
        description="Tree-structured sentiment models over binary parse trees",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("prepare", help="validate a dataset and print its census")
    sp.add_argument("--data", required=True, help="directory with train/dev/test.txt")
    _add_embedding_flags(sp)
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("train", help="train one or more runs")
    sp.add_argument("--data", required=True, help="directory with train/dev/test.txt")
    sp.add_argument("--out", default="runs", help="output directory")
    sp.add_argument("--runs", type=int, default=1, help="seeds seed, seed+1, ...")
    _add_config_flags(sp)
    _add_embedding_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="score a saved model on a split file")
    sp.add_argument("--model", required=True, help="saved model file")
    sp.add_argument("--data", required=True, help="treebank split file")
    sp.add_argument("--out", help="directory for eval.csv (stdout regardless)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser(
        "gradcheck", help="compare analytic gradients to finite differences"
    )
    sp.add_argument("--seeds", type=int, default=5)
    sp.add_argument("--threshold", type=float, default=1e-4)
    sp.add_argument("--d", type=int, default=4)
    sp.add_argument("--d-w", dest="d_w", type=int, default=3)
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("stats", help="order statistics over run accuracies")
    sp.add_argument(
        "accuracies", help="runs.csv or a file with one accuracy per line"
    )
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser(
        "complexity", help="composition multiply counts and the LSTM/RNN ratio"
    )
    sp.add_argument("--data", required=True, help="split file or dataset directory")
    sp.add_argument("--d", type=int, default=50)
    sp.add_argument("--d-w", dest="d_w", type=int, default=50)
    sp.set_defaults(func=cmd_complexity)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, TreeParseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
