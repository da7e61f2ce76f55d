"""Tree-structured sentiment models over binary parse trees.

A plain recursive composition and an LSTM composition (two input gates
and two forget gates per parent, one pair per child, with a memory cell),
trained by exact backpropagation through the tree with AdaGrad, evaluated
at root and phrase granularity on 5-class or binary sentiment.
"""

from .artifact import load_model, save_model
from .embeddings import (
    EmbeddingTable,
    Vocabulary,
    load_glove,
    random_table,
)
from .evaluation import EvalReport, RunStats, evaluate, run_stats
from .model import (
    MODEL_LSTM,
    MODEL_RNN,
    LstmParams,
    ModelParams,
    RnnParams,
    SoftmaxParams,
    count_matvecs,
    forward,
    lstm_compose,
    rnn_compose,
)
from .training import (
    AdaGradState,
    EpochRecord,
    TrainConfig,
    adagrad_step,
    backward,
    finite_difference_gradient,
    gradient_check,
    init_params,
    objective,
    train,
)
from .treebank import (
    Dataset,
    Tree,
    TreeParseError,
    load_split,
    load_sst,
    parse_tree,
    print_tree,
    to_binary_dataset,
    tree_stats,
)

__version__ = "0.1.0"

__all__ = [
    "AdaGradState",
    "Dataset",
    "EmbeddingTable",
    "EpochRecord",
    "EvalReport",
    "LstmParams",
    "MODEL_LSTM",
    "MODEL_RNN",
    "ModelParams",
    "RnnParams",
    "RunStats",
    "SoftmaxParams",
    "TrainConfig",
    "Tree",
    "TreeParseError",
    "Vocabulary",
    "adagrad_step",
    "backward",
    "count_matvecs",
    "evaluate",
    "finite_difference_gradient",
    "forward",
    "gradient_check",
    "init_params",
    "load_glove",
    "load_model",
    "load_split",
    "load_sst",
    "lstm_compose",
    "objective",
    "parse_tree",
    "print_tree",
    "random_table",
    "rnn_compose",
    "run_stats",
    "save_model",
    "to_binary_dataset",
    "train",
    "tree_stats",
]
