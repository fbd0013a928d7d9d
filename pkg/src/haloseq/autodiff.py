"""Reverse-mode automatic differentiation over dense float64 arrays.

Values are numpy arrays in row-major order, 64-bit floats throughout.
Operations build :class:`Node` objects that record their parents; a single
call to :func:`backward` walks the graph in reverse topological order and
accumulates ``d root / d node`` into ``Node.grad`` for every reachable node.

The operation set is intentionally small: matmul, add, mul (elementwise,
with size-1 broadcast), tanh, sigmoid, exp, log, neg, concat, slice, sum,
embedding lookup, and a max-shifted softmax. That is the closure needed for
an LSTM encoder-decoder with multiplicative attention and a partitioned
softmax output.

Gradients are never cleared implicitly. Callers zero them between training
steps with :func:`zero_grad`; calling :func:`backward` twice on the same
root is an error. Graphs are single-threaded; distinct graphs may live on
distinct threads.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Node",
    "add",
    "apply_unary",
    "backward",
    "concat",
    "embedding_lookup",
    "exp",
    "grad_check",
    "log",
    "matmul",
    "mul",
    "neg",
    "registered_ops",
    "sigmoid",
    "slice1d",
    "softmax_stable",
    "sum_all",
    "tanh",
    "zero_grad",
]


class Node:
    """One value in a computation graph.

    ``value`` is a float64 numpy array (0-d scalars allowed), ``parents``
    are the operation inputs, ``aux`` holds op-specific constants (slice
    bounds, lookup index). ``grad`` has the same shape as ``value`` once
    backward has run. Leaf nodes have ``op == "leaf"`` and no parents.
    """

    __slots__ = ("value", "op", "parents", "aux", "grad", "_ran_backward")

    def __init__(self, value, op: str = "leaf", parents: tuple = (), aux=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.op = op
        self.parents = parents
        self.aux = aux
        self.grad: np.ndarray | None = None
        self._ran_backward = False

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def __repr__(self) -> str:  # pragma: no cover
        return f"Node(op={self.op!r}, shape={self.value.shape})"


def _accumulate(node: Node, delta: np.ndarray) -> None:
    if node.grad is None:
        node.grad = np.array(delta, dtype=np.float64, copy=True)
    else:
        node.grad += delta


# ---------------------------------------------------------------------------
# forward ops
# ---------------------------------------------------------------------------


def matmul(a: Node, b: Node) -> Node:
    """Matrix product for 1-D and 2-D operands (vector dot included)."""
    av, bv = a.value, b.value
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2):
        raise ValueError(f"matmul: operands must be 1-D or 2-D, got shapes {av.shape} and {bv.shape}")
    if av.shape[-1] != bv.shape[0]:
        raise ValueError(f"matmul: inner dimensions disagree for shapes {av.shape} and {bv.shape}")
    return Node(av @ bv, "matmul", (a, b))


def add(a: Node, b: Node) -> Node:
    if a.value.shape != b.value.shape:
        raise ValueError(f"add: shapes differ, {a.value.shape} vs {b.value.shape}")
    return Node(a.value + b.value, "add", (a, b))


def mul(a: Node, b: Node) -> Node:
    """Elementwise product; one operand may be scalar-shaped (size 1)."""
    if a.value.shape != b.value.shape and a.value.size != 1 and b.value.size != 1:
        raise ValueError(f"mul: shapes differ, {a.value.shape} vs {b.value.shape}")
    return Node(a.value * b.value, "mul", (a, b))


def neg(x: Node) -> Node:
    return Node(-x.value, "neg", (x,))


def tanh(x: Node) -> Node:
    return Node(np.tanh(x.value), "tanh", (x,))


def sigmoid(x: Node) -> Node:
    # evaluated via expit-style split to avoid overflow warnings on large |x|
    v = x.value
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return Node(out, "sigmoid", (x,))


def exp(x: Node) -> Node:
    return Node(np.exp(x.value), "exp", (x,))


def log(x: Node) -> Node:
    v = x.value
    if np.any(v <= 0.0):
        idx = int(np.argmax(v.reshape(-1) <= 0.0))
        bad = v.reshape(-1)[idx]
        raise ValueError(f"log: non-positive entry {bad} at flat index {idx}")
    return Node(np.log(v), "log", (x,))


_UNARY = {"tanh": tanh, "sigmoid": sigmoid, "exp": exp, "log": log, "neg": neg}


def apply_unary(name: str, x: Node) -> Node:
    """Dispatch an elementwise op by name: tanh, sigmoid, exp, log, neg."""
    try:
        fn = _UNARY[name]
    except KeyError:
        raise ValueError(f"apply_unary: unknown op {name!r}") from None
    return fn(x)


def softmax_stable(logits: Node) -> Node:
    """Softmax of a 1-D vector, computed as exp(x - max(x)) / sum.

    Equal to the literal exp-then-normalize form wherever that does not
    overflow; entries are strictly positive and sum to 1.
    """
    v = logits.value
    if v.ndim != 1:
        raise ValueError(f"softmax_stable: expected 1-D logits, got shape {v.shape}")
    e = np.exp(v - v.max())
    return Node(e / e.sum(), "softmax", (logits,))


def concat(parts: Sequence[Node]) -> Node:
    """Concatenate 0-d or 1-d nodes into one 1-d vector."""
    if not parts:
        raise ValueError("concat: needs at least one input")
    pieces = [np.atleast_1d(p.value) for p in parts]
    offsets = np.cumsum([0] + [p.size for p in pieces])
    return Node(np.concatenate(pieces), "concat", tuple(parts), aux=offsets)


def slice1d(x: Node, start: int, stop: int) -> Node:
    """Contiguous sub-vector x[start:stop] of a 1-D node."""
    v = x.value
    if v.ndim != 1:
        raise ValueError(f"slice1d: expected 1-D input, got shape {v.shape}")
    if not (0 <= start < stop <= v.shape[0]):
        raise ValueError(f"slice1d: bounds [{start}, {stop}) invalid for length {v.shape[0]}")
    return Node(v[start:stop].copy(), "slice", (x,), aux=(start, stop))


def sum_all(x: Node) -> Node:
    """Sum of all entries, as a 0-d scalar node."""
    return Node(np.asarray(x.value.sum()), "sum", (x,))


def embedding_lookup(table: Node, index: int) -> Node:
    """Row ``index`` of a 2-D table; backward scatters into that row."""
    if table.value.ndim != 2:
        raise ValueError(f"embedding_lookup: table must be 2-D, got shape {table.value.shape}")
    idx = int(index)
    if not (0 <= idx < table.value.shape[0]):
        raise ValueError(f"embedding_lookup: index {idx} out of range for {table.value.shape[0]} rows")
    return Node(table.value[idx].copy(), "embed", (table,), aux=idx)


# ---------------------------------------------------------------------------
# backward rules
# ---------------------------------------------------------------------------


def _bw_matmul(node: Node, g: np.ndarray) -> None:
    a, b = node.parents
    av, bv = a.value, b.value
    if av.ndim == 2 and bv.ndim == 2:
        _accumulate(a, g @ bv.T)
        _accumulate(b, av.T @ g)
    elif av.ndim == 2 and bv.ndim == 1:
        _accumulate(a, np.outer(g, bv))
        _accumulate(b, av.T @ g)
    elif av.ndim == 1 and bv.ndim == 2:
        _accumulate(a, bv @ g)
        _accumulate(b, np.outer(av, g))
    else:
        _accumulate(a, g * bv)
        _accumulate(b, g * av)


def _bw_add(node: Node, g: np.ndarray) -> None:
    a, b = node.parents
    _accumulate(a, g)
    _accumulate(b, g)


def _sum_to_shape(g: np.ndarray, shape: tuple) -> np.ndarray:
    return np.asarray(g.sum()).reshape(shape)


def _bw_mul(node: Node, g: np.ndarray) -> None:
    a, b = node.parents
    ga = g * b.value
    gb = g * a.value
    _accumulate(a, ga if a.value.shape == ga.shape else _sum_to_shape(ga, a.value.shape))
    _accumulate(b, gb if b.value.shape == gb.shape else _sum_to_shape(gb, b.value.shape))


def _bw_neg(node: Node, g: np.ndarray) -> None:
    _accumulate(node.parents[0], -g)


def _bw_tanh(node: Node, g: np.ndarray) -> None:
    _accumulate(node.parents[0], g * (1.0 - node.value * node.value))


def _bw_sigmoid(node: Node, g: np.ndarray) -> None:
    _accumulate(node.parents[0], g * node.value * (1.0 - node.value))


def _bw_exp(node: Node, g: np.ndarray) -> None:
    _accumulate(node.parents[0], g * node.value)


def _bw_log(node: Node, g: np.ndarray) -> None:
    _accumulate(node.parents[0], g / node.parents[0].value)


def _bw_softmax(node: Node, g: np.ndarray) -> None:
    y = node.value
    _accumulate(node.parents[0], y * (g - np.dot(g, y)))


def _bw_concat(node: Node, g: np.ndarray) -> None:
    offsets = node.aux
    for i, p in enumerate(node.parents):
        piece = g[offsets[i]:offsets[i + 1]]
        _accumulate(p, piece if p.value.ndim == 1 else np.asarray(piece[0]))


def _bw_slice(node: Node, g: np.ndarray) -> None:
    (x,) = node.parents
    start, stop = node.aux
    if x.grad is None:
        x.grad = np.zeros_like(x.value)
    x.grad[start:stop] += g


def _bw_sum(node: Node, g: np.ndarray) -> None:
    (x,) = node.parents
    if x.grad is None:
        x.grad = np.zeros_like(x.value)
    x.grad += g


def _bw_embed(node: Node, g: np.ndarray) -> None:
    (table,) = node.parents
    if table.grad is None:
        table.grad = np.zeros_like(table.value)
    table.grad[node.aux] += g


_BACKWARD: dict[str, Callable[[Node, np.ndarray], None]] = {
    "matmul": _bw_matmul,
    "add": _bw_add,
    "mul": _bw_mul,
    "neg": _bw_neg,
    "tanh": _bw_tanh,
    "sigmoid": _bw_sigmoid,
    "exp": _bw_exp,
    "log": _bw_log,
    "softmax": _bw_softmax,
    "concat": _bw_concat,
    "slice": _bw_slice,
    "sum": _bw_sum,
    "embed": _bw_embed,
}


def registered_ops() -> list[str]:
    """Names of all ops that carry a backward rule."""
    return sorted(_BACKWARD)


# ---------------------------------------------------------------------------
# graph traversal
# ---------------------------------------------------------------------------


def _topo_order(root: Node) -> list[Node]:
    # iterative post-order: every node appears after all of its parents
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Node) -> None:
    """Accumulate d root / d node into every reachable node's ``grad``.

    ``root`` must be scalar-shaped (size 1). Contributions from multiple
    paths through shared subexpressions are summed. A second backward on the
    same root without rebuilding the graph is forbidden; rebuild the graph
    and zero leaf gradients instead.
    """
    if root.value.size != 1:
        raise ValueError(f"backward: root must be scalar-shaped, got shape {root.value.shape}")
    if root._ran_backward:
        raise RuntimeError("backward: already ran on this root; rebuild the graph before calling again")
    root._ran_backward = True

    order = _topo_order(root)
    if root.grad is None:
        root.grad = np.ones_like(root.value)
    else:
        root.grad += np.ones_like(root.value)
    rules = _BACKWARD
    for node in reversed(order):
        if node.op == "leaf":
            continue
        rules[node.op](node, node.grad)


def zero_grad(nodes: Sequence[Node]) -> None:
    """Drop accumulated gradients; call between training steps."""
    for n in nodes:
        n.grad = None


# ---------------------------------------------------------------------------
# numerical checking
# ---------------------------------------------------------------------------


def grad_check(f: Callable[[Node], Node], x: np.ndarray, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` maps a leaf node to a scalar node and must be smooth at ``x``.
    Per coordinate the error is |analytic - numeric| / max(1e-8,
    |analytic| + |numeric|); the maximum over coordinates is returned.
    """
    if eps <= 0:
        raise ValueError("grad_check: eps must be positive")
    x = np.asarray(x, dtype=np.float64)

    leaf = Node(x.copy())
    out = f(leaf)
    backward(out)
    analytic = np.zeros_like(x) if leaf.grad is None else leaf.grad

    flat = x.reshape(-1)
    numeric = np.zeros_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + eps
        hi = float(f(Node(bumped.reshape(x.shape))).value)
        bumped[i] = flat[i] - eps
        lo = float(f(Node(bumped.reshape(x.shape))).value)
        numeric[i] = (hi - lo) / (2.0 * eps)
    numeric = numeric.reshape(x.shape)

    denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / denom))
