"""Neighborhood regularizer on decoder hidden states.

At every decoding step the hidden state h lives strictly inside (-1,1)^D.
A neighbor h' = h + lambda * (h'' - h) is drawn with h'' uniform on the
box and lambda ~ Beta(alpha, beta), so h' stays inside the box and on the
segment between h and h''. The neighbor's token distribution is collapsed
onto the vocabulary partition (summing probabilities within each class),
and the loss asks that collapsed distribution to put mass on the class of
the true next token. The neighbor never enters the recurrence: the state
sequence is identical with the regularizer on or off.

Gradients flow from the neighbor term back into h through the convex
combination (d h'/d h scales by 1 - lambda); lambda and h'' are constants
of the draw. Set ``detach_neighbor`` to cut that path for ablations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Node, add, log, matmul, mul, neg, slice1d
from .corpus import BOS_ID, ClassPartition, ParallelExample
from .model import (
    ModelParams,
    attention_keys,
    decoder_step,
    encode,
    initial_decoder_state,
    project_distribution,
)


@dataclass
class BetaParams:
    """Beta(alpha, beta) mixing distribution; alpha + beta defaults to 20."""

    alpha: float = 1.0
    beta: float = 19.0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError(f"BetaParams: alpha and beta must be positive, got ({self.alpha}, {self.beta})")


@dataclass
class HaloConfig:
    enabled: bool = True
    alpha: float = 1.0
    beta: float = 19.0
    n_neighbors: int = 1
    weight: float = 1.0
    partition: str = "bytag"
    detach_neighbor: bool = False

    def beta_params(self) -> BetaParams:
        return BetaParams(self.alpha, self.beta)


def sample_lambda(params: BetaParams, rng: np.random.Generator) -> float:
    """One Beta draw, strictly inside (0,1); exact endpoints are redrawn."""
    lam = float(rng.beta(params.alpha, params.beta))
    while lam <= 0.0 or lam >= 1.0:
        lam = float(rng.beta(params.alpha, params.beta))
    return lam


def _uniform_open_box(rng: np.random.Generator, dim: int) -> np.ndarray:
    x = rng.uniform(-1.0, 1.0, size=dim)
    bad = (x <= -1.0) | (x >= 1.0)
    while bad.any():
        x[bad] = rng.uniform(-1.0, 1.0, size=int(bad.sum()))
        bad = (x <= -1.0) | (x >= 1.0)
    return x


@dataclass
class NeighborSample:
    """h' = h + lambda (h'' - h); all entries inside the open unit box."""

    h_prime: np.ndarray
    h_corner: np.ndarray
    lam: float


def sample_neighbor(
    h: np.ndarray,
    params: BetaParams,
    rng: np.random.Generator,
    lambda_override: float | None = None,
) -> NeighborSample:
    """Draw a random neighbor of ``h`` inside (-1,1)^D.

    ``h`` must lie strictly inside the box. ``lambda_override`` pins the
    mixing coefficient (test and limit-study hook; accepts the closed
    endpoints 0 and 1, which the sampler itself never returns).
    """
    h = np.asarray(h, dtype=np.float64)
    if np.any(np.abs(h) >= 1.0):
        worst = float(np.max(np.abs(h)))
        raise ValueError(f"sample_neighbor: h must lie strictly inside (-1,1)^D, max |h_d| = {worst}")
    if lambda_override is not None and not (0.0 <= lambda_override <= 1.0):
        raise ValueError("lambda_override must be in [0, 1]")
    while True:
        h_corner = _uniform_open_box(rng, h.size)
        if lambda_override is None:
            lam = sample_lambda(params, rng)
        else:
            lam = float(lambda_override)
        h_prime = h + lam * (h_corner - h)
        # convex combination of interior points; redraw on the (measure-zero)
        # event that rounding lands an entry on the boundary
        if np.all(np.abs(h_prime) < 1.0):
            return NeighborSample(h_prime, h_corner, lam)


def aggregate_tags(p: np.ndarray, partition: ClassPartition) -> np.ndarray:
    """Collapse a token distribution onto classes: q[c] = sum of p over class c."""
    p = np.asarray(p, dtype=np.float64)
    if p.size != partition.class_of.size:
        raise ValueError(
            f"aggregate_tags: distribution over {p.size} tokens does not match "
            f"partition over {partition.class_of.size}"
        )
    return np.bincount(partition.class_of, weights=p, minlength=partition.n_classes)


@dataclass
class LossBreakdown:
    """Per-sequence negated log-likelihoods: token term, neighbor term, sum."""

    token_nll: float
    halo_nll: float
    halo_weight: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.token_nll + self.halo_weight * self.halo_nll


@dataclass
class SequenceLoss:
    """Loss breakdown plus the graph nodes training differentiates."""

    breakdown: LossBreakdown
    token_node: Node
    halo_node: Node | None
    total_node: Node
    n_tokens: int
    states: list[np.ndarray] | None = None
    token_dists: list[np.ndarray] | None = None


def _neighbor_node(h: Node, sample: NeighborSample, detach: bool) -> Node:
    """Graph form of the convex combination; value equals (1-lam) h + lam h''."""
    if detach:
        return Node((1.0 - sample.lam) * h.value + sample.lam * sample.h_corner)
    scaled = mul(h, Node(np.float64(1.0 - sample.lam)))
    return add(scaled, Node(sample.lam * sample.h_corner))


def halo_sequence_loss(
    params: ModelParams,
    example: ParallelExample,
    partition: ClassPartition,
    cfg: HaloConfig,
    rng: np.random.Generator | None = None,
    lambda_override: float | None = None,
    collect_states: bool = False,
    collect_dists: bool = False,
) -> SequenceLoss:
    """Teacher-forced sequence loss with the optional neighbor term.

    Token term: sum over steps of -log p_t[y_t]. Neighbor term: at each
    step, average over ``cfg.n_neighbors`` draws of -log q'_t[c_t], where
    q' collapses the neighbor's token distribution onto the partition and
    c_t is the class of the true token. The draws consume only ``rng``
    (the dedicated neighbor stream) and never alter the state sequence.
    """
    if cfg.enabled and rng is None:
        raise ValueError("halo_sequence_loss: enabled config requires an rng stream")
    if cfg.n_neighbors < 1:
        raise ValueError("halo_sequence_loss: n_neighbors must be >= 1")
    beta_params = cfg.beta_params() if cfg.enabled else None
    class_of = partition.class_of
    indicator = Node(partition.indicator_matrix()) if cfg.enabled else None
    inv_n = np.float64(1.0 / cfg.n_neighbors)

    encoder_states = encode(example.source, params)
    keys = attention_keys(encoder_states, params.attn_w)
    state = initial_decoder_state(params)

    token_terms: Node | None = None
    halo_terms: Node | None = None
    states = [] if collect_states else None
    dists = [] if collect_dists else None

    targets = example.target
    prev_tok = BOS_ID
    for t in range(len(targets)):
        state = decoder_step(prev_tok, state, encoder_states, params, keys=keys)
        y = int(targets[t])
        if not (0 <= y < params.n_target()):
            raise ValueError(f"halo_sequence_loss: target id {y} out of range")
        if states is not None:
            states.append(state.h.value.copy())

        p = project_distribution(state.h, params.out_w)
        if dists is not None:
            dists.append(p.value.copy())
        term = neg(log(slice1d(p, y, y + 1)))
        token_terms = term if token_terms is None else add(token_terms, term)

        if cfg.enabled:
            c_t = int(class_of[y])
            step_halo: Node | None = None
            for _ in range(cfg.n_neighbors):
                sample = sample_neighbor(state.h.value, beta_params, rng, lambda_override=lambda_override)
                h_prime = _neighbor_node(state.h, sample, cfg.detach_neighbor)
                p_prime = project_distribution(h_prime, params.out_w)
                q_prime = matmul(indicator, p_prime)
                nterm = neg(log(slice1d(q_prime, c_t, c_t + 1)))
                step_halo = nterm if step_halo is None else add(step_halo, nterm)
            if cfg.n_neighbors > 1:
                step_halo = mul(step_halo, Node(inv_n))
            halo_terms = step_halo if halo_terms is None else add(halo_terms, step_halo)

        prev_tok = y

    token_nll = float(token_terms.value[0])
    if cfg.enabled:
        halo_nll = float(halo_terms.value[0])
        total_node = add(token_terms, mul(halo_terms, Node(np.float64(cfg.weight))))
    else:
        halo_nll = 0.0
        total_node = token_terms
    breakdown = LossBreakdown(
        token_nll=token_nll,
        halo_nll=halo_nll,
        halo_weight=cfg.weight if cfg.enabled else 0.0,
    )
    return SequenceLoss(
        breakdown=breakdown,
        token_node=token_terms,
        halo_node=halo_terms,
        total_node=total_node,
        n_tokens=len(targets),
        states=states,
        token_dists=dists,
    )
