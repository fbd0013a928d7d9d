"""Batched training loop with clipping, SGD/Adam, and dev-set selection.

Batch losses are averaged per token, so sequences of different lengths
contribute proportionally. Two independent rng streams drive a run: the
model stream (parameter init and epoch shuffling, from ``seed``) and the
neighbor stream (from ``halo_seed``); keeping them separate is what makes
the regularizer's no-effect-on-the-recurrence property observable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Node, add, backward, mul, zero_grad
from .corpus import ClassPartition, ParallelExample, PartitionScheme, TaggedVocabulary, partition_classes
from .evaluation import EvalResult, evaluate_model
from .halo import HaloConfig, halo_sequence_loss
from .model import ModelParams


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    clip_norm: float = 5.0
    seed: int = 0
    dev_eval_every: int = 1
    patience: int = 5
    halo_seed: int = 17
    halo: HaloConfig = field(default_factory=HaloConfig)

    def validate(self) -> None:
        if self.epochs <= 0 or self.batch_size <= 0 or self.dev_eval_every <= 0:
            raise ValueError("epochs, batch_size and dev_eval_every must be positive")
        if self.learning_rate <= 0 or self.clip_norm <= 0:
            raise ValueError("learning_rate and clip_norm must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def clip_gradients(grads: list[np.ndarray], max_norm: float) -> list[np.ndarray]:
    """Scale all gradients by max_norm/g when the global L2 norm g exceeds it."""
    if max_norm <= 0:
        raise ValueError("clip_gradients: max_norm must be positive")
    sq = 0.0
    for g in grads:
        sq += float(np.dot(g.reshape(-1), g.reshape(-1)))
    norm = np.sqrt(sq)
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return [g * scale for g in grads]


@dataclass
class OptimizerState:
    kind: str
    step: int = 0
    m: list[np.ndarray] | None = None
    v: list[np.ndarray] | None = None


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def optimizer_step(
    params: list[Node], grads: list[np.ndarray], state: OptimizerState, learning_rate: float
) -> None:
    """Apply one SGD or Adam update; parameter values are rebound, not mutated."""
    if len(params) != len(grads):
        raise ValueError("optimizer_step: params and grads differ in length")
    if state.kind == "sgd":
        for p, g in zip(params, grads):
            p.value = p.value - learning_rate * g
        return
    if state.kind != "adam":
        raise ValueError(f"unknown optimizer {state.kind!r}")
    if state.m is None:
        state.m = [np.zeros_like(p.value) for p in params]
        state.v = [np.zeros_like(p.value) for p in params]
    state.step += 1
    t = state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * (g * g)
        m_hat = state.m[i] / (1.0 - ADAM_BETA1**t)
        v_hat = state.v[i] / (1.0 - ADAM_BETA2**t)
        p.value = p.value - learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


@dataclass
class EpochStats:
    epoch: int
    token_nll: float  # per-token means over the epoch
    halo_nll: float
    total: float
    seconds: float


@dataclass
class DevEval:
    epoch: int
    bleu: float
    f1_pred: float
    f1_arg: float


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    dev_evals: list[DevEval] = field(default_factory=list)
    best_epoch: int = -1
    best_bleu: float = -1.0
    stopped_early: bool = False

    def trajectory(self) -> tuple:
        """Deterministic view: everything except wall-clock timings."""
        return (
            [(e.epoch, e.token_nll, e.halo_nll, e.total) for e in self.epochs],
            [(d.epoch, d.bleu, d.f1_pred, d.f1_arg) for d in self.dev_evals],
            self.best_epoch,
            self.best_bleu,
        )


def batch_loss(
    params: ModelParams,
    batch: list[ParallelExample],
    partition: ClassPartition,
    halo_cfg: HaloConfig,
    halo_rng: np.random.Generator | None,
) -> tuple[Node, float, float, int]:
    """Mean per-token loss node over a batch, plus summed nll components."""
    total_node = None
    token_sum = 0.0
    halo_sum = 0.0
    n_tokens = 0
    for ex in batch:
        sl = halo_sequence_loss(params, ex, partition, halo_cfg, rng=halo_rng)
        total_node = sl.total_node if total_node is None else add(total_node, sl.total_node)
        token_sum += sl.breakdown.token_nll
        halo_sum += sl.breakdown.halo_nll
        n_tokens += sl.n_tokens
    root = mul(total_node, Node(np.float64(1.0 / n_tokens)))
    return root, token_sum, halo_sum, n_tokens


def train_step(
    params: ModelParams,
    batch: list[ParallelExample],
    partition: ClassPartition,
    config: TrainConfig,
    opt_state: OptimizerState,
    halo_rng: np.random.Generator | None,
) -> tuple[float, float, int]:
    """One optimizer update on a batch; returns summed nlls and token count."""
    nodes = params.nodes()
    zero_grad(nodes)
    root, token_sum, halo_sum, n_tokens = batch_loss(params, batch, partition, config.halo, halo_rng)
    backward(root)
    grads = [n.grad if n.grad is not None else np.zeros_like(n.value) for n in nodes]
    grads = clip_gradients(grads, config.clip_norm)
    optimizer_step(nodes, grads, opt_state, config.learning_rate)
    return token_sum, halo_sum, n_tokens


def train(
    params: ModelParams,
    train_set: list[ParallelExample],
    dev_set: list[ParallelExample],
    vocab: TaggedVocabulary,
    config: TrainConfig,
    log=None,
) -> tuple[TrainReport, dict[str, np.ndarray]]:
    """Train and select the best checkpoint by dev BLEU.

    Shuffling uses the model stream seeded from ``config.seed``; neighbor
    draws use a separate stream from ``config.halo_seed``. Stops early after
    ``patience`` consecutive dev evaluations without a BLEU improvement.
    Returns the report and the best parameter snapshot.
    """
    config.validate()
    _check_ids(train_set, dev_set, vocab)
    partition = partition_classes(vocab, PartitionScheme.parse(config.halo.partition))
    shuffle_rng = np.random.default_rng(config.seed)
    halo_rng = np.random.default_rng(config.halo_seed) if config.halo.enabled else None
    opt_state = OptimizerState(kind=config.optimizer)

    report = TrainReport()
    best_values = params.copy_values()
    bad_evals = 0

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(len(train_set))
        token_sum = 0.0
        halo_sum = 0.0
        n_tokens = 0
        for start in range(0, len(order), config.batch_size):
            batch = [train_set[i] for i in order[start : start + config.batch_size]]
            ts, hs, nt = train_step(params, batch, partition, config, opt_state, halo_rng)
            token_sum += ts
            halo_sum += hs
            n_tokens += nt
        stats = EpochStats(
            epoch=epoch,
            token_nll=token_sum / n_tokens,
            halo_nll=halo_sum / n_tokens,
            total=(token_sum + config.halo.weight * halo_sum) / n_tokens
            if config.halo.enabled
            else token_sum / n_tokens,
            seconds=time.perf_counter() - t0,
        )
        report.epochs.append(stats)
        if log:
            log(f"epoch {epoch}: token_nll/token = {stats.token_nll:.4f} halo_nll/token = {stats.halo_nll:.4f}")

        if epoch % config.dev_eval_every == 0:
            result = evaluate_model(params, dev_set, vocab)
            report.dev_evals.append(
                DevEval(epoch=epoch, bleu=result.bleu, f1_pred=result.f1_pred.f1, f1_arg=result.f1_arg.f1)
            )
            if log:
                log(f"epoch {epoch}: dev bleu = {result.bleu:.4f}")
            if result.bleu > report.best_bleu:
                report.best_bleu = result.bleu
                report.best_epoch = epoch
                best_values = params.copy_values()
                bad_evals = 0
            else:
                bad_evals += 1
                if bad_evals >= config.patience:
                    report.stopped_early = True
                    break

    if report.best_epoch < 0:
        # no dev evaluation ever ran; fall back to the final parameters
        report.best_epoch = len(report.epochs)
        best_values = params.copy_values()
    return report, best_values


def _check_ids(train_set, dev_set, vocab: TaggedVocabulary) -> None:
    for name, dataset in (("train", train_set), ("dev", dev_set)):
        if not dataset:
            raise ValueError(f"{name} set is empty")
        for ex in dataset:
            if ex.source.max() >= vocab.n_source or ex.target.max() >= vocab.n_target:
                raise ValueError(f"{name} set contains ids outside the vocabulary")
