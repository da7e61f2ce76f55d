"""Tree composition models and per-node classification.

Two compositions over a binary parse tree:

* plain recursive net: ``p = g(W1 x + W2 y + b)``
* LSTM composition: each parent keeps a memory cell fed by both children.
  With children x, y (outputs) and c_x, c_y (memories):

      i1 = sigmoid(W_i1 x + W_i2 y + W_ci1 c_x + W_ci2 c_y + b_i)
      i2 = sigmoid(W_i1 y + W_i2 x + W_ci1 c_y + W_ci2 c_x + b_i)
      f1 = sigmoid(W_f1 x + W_f2 y + W_cf1 c_x + W_cf2 c_y + b_f)
      f2 = sigmoid(W_f1 y + W_f2 x + W_cf1 c_y + W_cf2 c_x + b_f)
      c_p = f1*c_x + f2*c_y + g(W_c1 x * i1 + W_c2 y * i2 + b_c)
      o  = sigmoid(W_o1 x + W_o2 y + W_co c_p + b_o)
      p  = o * g(c_p)

  (elementwise products written ``*``). Note the input gates multiply the
  candidate terms inside g's argument, and the second input/forget gates
  reuse the first pair's matrices with the children swapped. Gate
  nonlinearities are always sigmoid; g is configurable.

Leaf and inner links are untied: every child-output matrix has a d x d_w
leaf variant and a d x d inner variant. Leaf memory is identically zero,
so memory-matrix products against leaf children are skipped outright;
the operation counter relies on that.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .embeddings import EmbeddingTable, Vocabulary
from .tensor import Matrix, Vector, apply_activation, matvec, softmax
from .treebank import Tree

MODEL_RNN = "rnn"
MODEL_LSTM = "lstm"

# Matrix families whose leaf/inner variants multiply child outputs.
LSTM_CHILD_FAMILIES = ("i1", "i2", "f1", "f2", "c1", "c2", "o1", "o2")
# Memory matrices (always d x d).
LSTM_MEMORY_NAMES = ("W_ci1", "W_ci2", "W_cf1", "W_cf2", "W_co")
LSTM_BIAS_NAMES = ("b_i", "b_f", "b_c", "b_o")


class MatvecCounter:
    """Counts scalar multiplications of composition matrix-vector products."""

    __slots__ = ("count",)

    def __init__(self) -> None:
        self.count = 0

    def add(self, m: Matrix) -> None:
        self.count += m.shape[0] * m.shape[1]


def _mv(m: Matrix, v: Vector, counter: MatvecCounter | None) -> Vector:
    if counter is not None:
        counter.add(m)
    return matvec(m, v)


@dataclass
class RnnParams:
    W1_leaf: Matrix
    W2_leaf: Matrix
    W1_inner: Matrix
    W2_inner: Matrix
    b: Vector
    activation: str = "tanh"

    def w(self, side: int, child_is_leaf: bool) -> Matrix:
        name = f"W{side}_{'leaf' if child_is_leaf else 'inner'}"
        return getattr(self, name)

    def tensor_names(self) -> list[str]:
        return ["W1_leaf", "W2_leaf", "W1_inner", "W2_inner", "b"]


@dataclass
class LstmParams:
    """All LSTM composition weights; see the module docstring for roles."""

    W_i1_leaf: Matrix
    W_i2_leaf: Matrix
    W_f1_leaf: Matrix
    W_f2_leaf: Matrix
    W_c1_leaf: Matrix
    W_c2_leaf: Matrix
    W_o1_leaf: Matrix
    W_o2_leaf: Matrix
    W_i1_inner: Matrix
    W_i2_inner: Matrix
    W_f1_inner: Matrix
    W_f2_inner: Matrix
    W_c1_inner: Matrix
    W_c2_inner: Matrix
    W_o1_inner: Matrix
    W_o2_inner: Matrix
    W_ci1: Matrix
    W_ci2: Matrix
    W_cf1: Matrix
    W_cf2: Matrix
    W_co: Matrix
    b_i: Vector
    b_f: Vector
    b_c: Vector
    b_o: Vector
    activation: str = "tanh"

    def w(self, family: str, child_is_leaf: bool) -> Matrix:
        name = f"W_{family}_{'leaf' if child_is_leaf else 'inner'}"
        return getattr(self, name)

    def tensor_names(self) -> list[str]:
        return [f.name for f in fields(self) if f.name != "activation"]


@dataclass
class SoftmaxParams:
    W_leaf: Matrix   # |C| x d_w
    b_leaf: Vector
    W_inner: Matrix  # |C| x d
    b_inner: Vector

    def tensor_names(self) -> list[str]:
        return ["W_leaf", "b_leaf", "W_inner", "b_inner"]


@dataclass
class ModelParams:
    kind: str  # MODEL_RNN or MODEL_LSTM
    composition: RnnParams | LstmParams
    softmax: SoftmaxParams
    vocab: Vocabulary
    embeddings: EmbeddingTable
    d: int
    d_w: int
    n_classes: int
    lowercase_fallback: bool = True

    @property
    def activation(self) -> str:
        return self.composition.activation

    def tensor_items(self, include_embeddings: bool | None = None):
        """(name, array) pairs in canonical order.

        include_embeddings=None follows the table's trainable flag, which
        is the theta used by the objective and the optimizer.
        """
        for name in self.composition.tensor_names():
            yield name, getattr(self.composition, name)
        for name in self.softmax.tensor_names():
            yield "softmax_" + name, getattr(self.softmax, name)
        if include_embeddings is None:
            include_embeddings = self.embeddings.trainable
        if include_embeddings:
            yield "embedding", self.embeddings.vectors

    def tensor(self, name: str) -> np.ndarray:
        if name == "embedding":
            return self.embeddings.vectors
        if name.startswith("softmax_"):
            return getattr(self.softmax, name[len("softmax_"):])
        return getattr(self.composition, name)

    def copy(self) -> "ModelParams":
        comp_kwargs = {}
        for f in fields(self.composition):
            v = getattr(self.composition, f.name)
            comp_kwargs[f.name] = v.copy() if isinstance(v, np.ndarray) else v
        comp = type(self.composition)(**comp_kwargs)
        sm = SoftmaxParams(**{
            f.name: getattr(self.softmax, f.name).copy() for f in fields(SoftmaxParams)
        })
        table = EmbeddingTable(
            dim=self.embeddings.dim,
            vectors=self.embeddings.vectors.copy(),
            trainable=self.embeddings.trainable,
        )
        return ModelParams(
            kind=self.kind, composition=comp, softmax=sm, vocab=self.vocab,
            embeddings=table, d=self.d, d_w=self.d_w, n_classes=self.n_classes,
            lowercase_fallback=self.lowercase_fallback,
        )


@dataclass
class NodeState:
    """Per-node forward cache; the backward pass consumes every field."""

    h: Vector
    c: Vector
    is_leaf: bool
    embedding_row: int | None = None      # leaves: resolved vocabulary row
    a: Vector | None = None               # rnn: pre-activation
    i1: Vector | None = None              # lstm gate activations
    i2: Vector | None = None
    f1: Vector | None = None
    f2: Vector | None = None
    o: Vector | None = None
    u: Vector | None = None               # lstm candidate pre-activation
    cand1: Vector | None = None           # W_c1 x (cached for backprop)
    cand2: Vector | None = None           # W_c2 y
    class_distribution: Vector | None = None


@dataclass
class StateTree:
    """Tree of NodeStates mirroring the parse tree it annotates."""

    tree: Tree
    state: NodeState
    left: "StateTree | None" = None
    right: "StateTree | None" = None


def rnn_compose(
    x: NodeState,
    y: NodeState,
    params: RnnParams,
    counter: MatvecCounter | None = None,
) -> NodeState:
    a = (
        _mv(params.w(1, x.is_leaf), x.h, counter)
        + _mv(params.w(2, y.is_leaf), y.h, counter)
        + params.b
    )
    h = apply_activation(params.activation, a)
    return NodeState(h=h, c=np.zeros_like(a), is_leaf=False, a=a)


def lstm_compose(
    x: NodeState,
    y: NodeState,
    params: LstmParams,
    counter: MatvecCounter | None = None,
) -> NodeState:
    g = params.activation
    xh, yh = x.h, y.h

    a_i1 = _mv(params.w("i1", x.is_leaf), xh, counter) + _mv(params.w("i2", y.is_leaf), yh, counter) + params.b_i
    a_i2 = _mv(params.w("i1", y.is_leaf), yh, counter) + _mv(params.w("i2", x.is_leaf), xh, counter) + params.b_i
    a_f1 = _mv(params.w("f1", x.is_leaf), xh, counter) + _mv(params.w("f2", y.is_leaf), yh, counter) + params.b_f
    a_f2 = _mv(params.w("f1", y.is_leaf), yh, counter) + _mv(params.w("f2", x.is_leaf), xh, counter) + params.b_f

    # Memory products against a leaf child's zero memory contribute nothing
    # and are skipped, which the complexity model counts on.
    if not x.is_leaf:
        a_i1 = a_i1 + _mv(params.W_ci1, x.c, counter)
        a_i2 = a_i2 + _mv(params.W_ci2, x.c, counter)
        a_f1 = a_f1 + _mv(params.W_cf1, x.c, counter)
        a_f2 = a_f2 + _mv(params.W_cf2, x.c, counter)
    if not y.is_leaf:
        a_i1 = a_i1 + _mv(params.W_ci2, y.c, counter)
        a_i2 = a_i2 + _mv(params.W_ci1, y.c, counter)
        a_f1 = a_f1 + _mv(params.W_cf2, y.c, counter)
        a_f2 = a_f2 + _mv(params.W_cf1, y.c, counter)

    i1 = apply_activation("sigmoid", a_i1)
    i2 = apply_activation("sigmoid", a_i2)
    f1 = apply_activation("sigmoid", a_f1)
    f2 = apply_activation("sigmoid", a_f2)

    cand1 = _mv(params.w("c1", x.is_leaf), xh, counter)
    cand2 = _mv(params.w("c2", y.is_leaf), yh, counter)
    u = cand1 * i1 + cand2 * i2 + params.b_c
    c_p = f1 * x.c + f2 * y.c + apply_activation(g, u)

    a_o = (
        _mv(params.w("o1", x.is_leaf), xh, counter)
        + _mv(params.w("o2", y.is_leaf), yh, counter)
        + _mv(params.W_co, c_p, counter)
        + params.b_o
    )
    o = apply_activation("sigmoid", a_o)
    h = o * apply_activation(g, c_p)

    return NodeState(
        h=h, c=c_p, is_leaf=False,
        i1=i1, i2=i2, f1=f1, f2=f2, o=o, u=u, cand1=cand1, cand2=cand2,
    )


def classify(h: Vector, softmax_params: SoftmaxParams, node_is_leaf: bool) -> Vector:
    if node_is_leaf:
        return softmax(matvec(softmax_params.W_leaf, h) + softmax_params.b_leaf)
    return softmax(matvec(softmax_params.W_inner, h) + softmax_params.b_inner)


def forward(
    tree: Tree,
    params: ModelParams,
    counter: MatvecCounter | None = None,
    classify_nodes: bool = True,
) -> StateTree:
    """Bottom-up evaluation; returns the NodeState annotation of the tree."""
    if tree.is_leaf:
        row = params.vocab.row_for(tree.token, params.lowercase_fallback)
        state = NodeState(
            h=params.embeddings.vectors[row],
            c=np.zeros(params.d),
            is_leaf=True,
            embedding_row=row,
        )
        annotated = StateTree(tree=tree, state=state)
    else:
        left = forward(tree.left, params, counter, classify_nodes)
        right = forward(tree.right, params, counter, classify_nodes)
        if params.kind == MODEL_LSTM:
            state = lstm_compose(left.state, right.state, params.composition, counter)
        else:
            state = rnn_compose(left.state, right.state, params.composition, counter)
        annotated = StateTree(tree=tree, state=state, left=left, right=right)
    if classify_nodes and tree.label is not None:
        state.class_distribution = classify(state.h, params.softmax, state.is_leaf)
    return annotated


def iter_states(annotated: StateTree):
    """Yield every StateTree node bottom-up (children before their parent)."""
    if annotated.left is not None:
        yield from iter_states(annotated.left)
        yield from iter_states(annotated.right)
    yield annotated


def count_matvecs(tree: Tree, model_kind: str, d: int, d_w: int) -> int:
    """Exact scalar-multiply count of a forward pass's composition matvecs.

    Softmax products are excluded. Equals N*d*d_w + (N-2)*d*d for the plain
    composition and N*6*d*d_w + (N-2)*10*d*d + (N-1)*d*d for the LSTM, with
    N the leaf count (trees with a single leaf compose nothing: 0).
    """
    if tree.is_leaf:
        return 0
    total = 0
    for node in tree.nodes():
        if node.is_leaf:
            continue
        if model_kind == MODEL_LSTM:
            total += d * d  # W_co against the fresh parent memory
        for child in (node.left, node.right):
            in_dim = d_w if child.is_leaf else d
            if model_kind == MODEL_LSTM:
                total += 6 * d * in_dim
                if not child.is_leaf:
                    total += 4 * d * d  # memory peepholes into the four gates
            else:
                total += d * in_dim
    return total
