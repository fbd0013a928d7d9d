"""LSTM encoder-decoder with multiplicative attention and residual input.

The decoder hidden state is the LSTM output o * tanh(c), so every entry
lies strictly inside (-1, 1); that open box is the space the neighborhood
regularizer samples in. The token distribution is a max-shifted softmax of
W @ h. The attention query at each step is the hidden state plus a linear
projection of the input embedding (the residual connection); the resulting
context vector is fed into the next step's LSTM input.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import (
    Node,
    add,
    concat,
    embedding_lookup,
    matmul,
    mul,
    sigmoid,
    slice1d,
    softmax_stable,
    tanh,
)
from .corpus import TaggedVocabulary

CHECKPOINT_FORMAT = "haloseq-ckpt-v1"


@dataclass
class ModelParams:
    """All trainable arrays, held as graph leaf nodes.

    Shapes (D hidden, E embedding, V_s/V_t vocab sizes):
      src_emb (V_s, E), tgt_emb (V_t, E),
      enc_w (4D, E+D), enc_b (4D,),
      dec_w (4D, E+2D), dec_b (4D,),   # input is [embedding; context]
      attn_w (D, D), resid_w (D, E), out_w (V_t, D).
    """

    hidden_dim: int
    embed_dim: int
    src_emb: Node
    tgt_emb: Node
    enc_w: Node
    enc_b: Node
    dec_w: Node
    dec_b: Node
    attn_w: Node
    resid_w: Node
    out_w: Node

    def named(self) -> list[tuple[str, Node]]:
        """Parameters in fixed checkpoint order."""
        return [
            ("src_emb", self.src_emb),
            ("tgt_emb", self.tgt_emb),
            ("enc_w", self.enc_w),
            ("enc_b", self.enc_b),
            ("dec_w", self.dec_w),
            ("dec_b", self.dec_b),
            ("attn_w", self.attn_w),
            ("resid_w", self.resid_w),
            ("out_w", self.out_w),
        ]

    def nodes(self) -> list[Node]:
        return [n for _, n in self.named()]

    def n_target(self) -> int:
        return self.out_w.value.shape[0]

    def copy_values(self) -> dict[str, np.ndarray]:
        return {name: node.value.copy() for name, node in self.named()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        for name, node in self.named():
            src = values[name]
            if src.shape != node.value.shape:
                raise ValueError(f"parameter {name}: shape {src.shape} != {node.value.shape}")
            node.value = np.array(src, dtype=np.float64, copy=True)


def init_params(
    vocab: TaggedVocabulary, hidden_dim: int, embed_dim: int, rng: np.random.Generator
) -> ModelParams:
    """Uniform(-0.08, 0.08) initialization, fully determined by the rng."""
    d, e = hidden_dim, embed_dim

    def u(*shape):
        return Node(rng.uniform(-0.08, 0.08, size=shape))

    return ModelParams(
        hidden_dim=d,
        embed_dim=e,
        src_emb=u(vocab.n_source, e),
        tgt_emb=u(vocab.n_target, e),
        enc_w=u(4 * d, e + d),
        enc_b=u(4 * d),
        dec_w=u(4 * d, e + 2 * d),
        dec_b=u(4 * d),
        attn_w=u(d, d),
        resid_w=u(d, e),
        out_w=u(vocab.n_target, d),
    )


@dataclass
class DecoderState:
    """Per-step decoder state: h strictly inside (-1,1)^D, cell, context."""

    h: Node
    c: Node
    context: Node


def _lstm_step(x_parts: list[Node], h_prev: Node, c_prev: Node, w: Node, b: Node, d: int):
    """One LSTM cell step on the concatenated input [x_parts; h_prev]."""
    z = add(matmul(w, concat(x_parts + [h_prev])), b)
    i = sigmoid(slice1d(z, 0, d))
    f = sigmoid(slice1d(z, d, 2 * d))
    g = tanh(slice1d(z, 2 * d, 3 * d))
    o = sigmoid(slice1d(z, 3 * d, 4 * d))
    c = add(mul(f, c_prev), mul(i, g))
    h = mul(o, tanh(c))
    return h, c


def encode(source: np.ndarray, params: ModelParams) -> list[Node]:
    """Run the encoder LSTM; returns one hidden-state node per position."""
    if len(source) == 0:
        raise ValueError("encode: empty source")
    d = params.hidden_dim
    h = Node(np.zeros(d))
    c = Node(np.zeros(d))
    states = []
    for tok in source:
        tok = int(tok)
        if not (0 <= tok < params.src_emb.value.shape[0]):
            raise ValueError(f"encode: source id {tok} out of range")
        x = embedding_lookup(params.src_emb, tok)
        h, c = _lstm_step([x], h, c, params.enc_w, params.enc_b, d)
        states.append(h)
    return states


def attention_keys(encoder_states: list[Node], attn_w: Node) -> list[Node]:
    """Precompute W_a @ enc_i once per example; reused at every step."""
    return [matmul(attn_w, s) for s in encoder_states]


def attend(h: Node, encoder_states: list[Node], attn_w: Node, keys: list[Node] | None = None) -> Node:
    """Multiplicative attention: scores h . (W_a enc_i), softmax, weighted sum."""
    if not encoder_states:
        raise ValueError("attend: no encoder states")
    if keys is None:
        keys = attention_keys(encoder_states, attn_w)
    scores = concat([matmul(h, k) for k in keys])
    weights = softmax_stable(scores)
    context = None
    for i, s in enumerate(encoder_states):
        term = mul(slice1d(weights, i, i + 1), s)
        context = term if context is None else add(context, term)
    return context


def initial_decoder_state(params: ModelParams) -> DecoderState:
    d = params.hidden_dim
    return DecoderState(h=Node(np.zeros(d)), c=Node(np.zeros(d)), context=Node(np.zeros(d)))


def decoder_step(
    prev_token_id: int,
    prev_state: DecoderState,
    encoder_states: list[Node],
    params: ModelParams,
    keys: list[Node] | None = None,
) -> DecoderState:
    """Advance the decoder by one token.

    The LSTM consumes [embedding(prev token); previous context]; the new h
    is the LSTM output (inside (-1,1)^D). The residual-augmented vector
    h + resid_w @ embedding forms the attention query, and the resulting
    context is carried to the next step.
    """
    tok = int(prev_token_id)
    if not (0 <= tok < params.tgt_emb.value.shape[0]):
        raise ValueError(f"decoder_step: target id {tok} out of range")
    d = params.hidden_dim
    e = embedding_lookup(params.tgt_emb, tok)
    h, c = _lstm_step([e, prev_state.context], prev_state.h, prev_state.c, params.dec_w, params.dec_b, d)
    query = add(h, matmul(params.resid_w, e))
    context = attend(query, encoder_states, params.attn_w, keys=keys)
    return DecoderState(h=h, c=c, context=context)


def project_distribution(h: Node, out_w: Node) -> Node:
    """Token distribution softmax(W @ h); positive entries summing to 1."""
    return softmax_stable(matmul(out_w, h))


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(params: ModelParams, vocab_hash: str, path: str | Path) -> None:
    """Self-describing header line, then little-endian float64 payloads."""
    header = {
        "format": CHECKPOINT_FORMAT,
        "hidden_dim": params.hidden_dim,
        "embed_dim": params.embed_dim,
        "vocab_hash": vocab_hash,
        "params": [[name, list(node.value.shape)] for name, node in params.named()],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for _, node in params.named():
            fh.write(np.ascontiguousarray(node.value, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path, vocab: TaggedVocabulary | None = None) -> ModelParams:
    """Rebuild parameters from disk; verifies the vocabulary hash if given."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} checkpoint")
        if vocab is not None and header["vocab_hash"] != vocab.content_hash():
            raise ValueError(f"{path}: checkpoint was trained with a different vocabulary")
        arrays = {}
        for name, shape in header["params"]:
            count = int(np.prod(shape))
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"{path}: truncated payload for parameter {name}")
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)

    d, e = int(header["hidden_dim"]), int(header["embed_dim"])
    kwargs = {name: Node(arr) for name, arr in arrays.items()}
    return ModelParams(hidden_dim=d, embed_dim=e, **kwargs)


def checkpoint_vocab_hash(path: str | Path) -> str:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
    return header["vocab_hash"]
