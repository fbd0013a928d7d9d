"""Shared helpers for the test suite."""

import numpy as np

from haloseq.autodiff import Node, backward, zero_grad
from haloseq.corpus import TaggedVocabulary, build_vocabulary
from haloseq.model import ModelParams


def toy_vocab(n_extra_pred: int = 3, n_extra_arg: int = 3, n_src: int = 5) -> TaggedVocabulary:
    """Small vocabulary with a controllable number of tagged types."""
    tgt = [f"p{i}:p" for i in range(n_extra_pred)] + [f"a{i}:a" for i in range(n_extra_arg)]
    pairs = [([f"s{j}" for j in range(n_src)], tgt)]
    return build_vocabulary(pairs, min_count=1)


def zero_params(vocab: TaggedVocabulary, hidden_dim: int, embed_dim: int) -> ModelParams:
    d, e = hidden_dim, embed_dim
    z = lambda *shape: Node(np.zeros(shape))
    return ModelParams(
        hidden_dim=d,
        embed_dim=e,
        src_emb=z(vocab.n_source, e),
        tgt_emb=z(vocab.n_target, e),
        enc_w=z(4 * d, e + d),
        enc_b=z(4 * d),
        dec_w=z(4 * d, e + 2 * d),
        dec_b=z(4 * d),
        attn_w=z(d, d),
        resid_w=z(d, e),
        out_w=z(vocab.n_target, d),
    )


def full_param_grad_check(params: ModelParams, loss_fn, eps: float = 1e-5) -> float:
    """Central-difference check of d loss / d theta over every parameter entry.

    ``loss_fn`` rebuilds the loss graph from the current parameter leaves;
    any randomness inside it must be re-seeded per call so that both sides
    of the difference see identical draws.
    """
    zero_grad(params.nodes())
    root = loss_fn()
    backward(root)
    analytic = {
        name: (node.grad.copy() if node.grad is not None else np.zeros_like(node.value))
        for name, node in params.named()
    }

    worst = 0.0
    for name, node in params.named():
        base = node.value.copy()
        flat = base.reshape(-1)
        ga = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            node.value = flat.reshape(base.shape)
            hi = loss_fn().value.item()
            flat[i] = orig - eps
            node.value = flat.reshape(base.shape)
            lo = loss_fn().value.item()
            flat[i] = orig
            node.value = flat.reshape(base.shape)
            numeric = (hi - lo) / (2.0 * eps)
            err = abs(ga[i] - numeric) / max(1e-8, abs(ga[i]) + abs(numeric))
            worst = max(worst, err)
        node.value = base
    return worst
