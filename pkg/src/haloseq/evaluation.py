"""Greedy decoding and corpus metrics.

BLEU is corpus-level: clipped n-gram precisions aggregated over all pairs,
geometric mean over orders 1..4, times a brevity penalty min(1, e^(1-r/c)).
F1 is a corpus-level multiset overlap restricted to tokens of one semantic
tag, reported separately for predicates and arguments. The end-of-sequence
marker never counts toward either metric.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import BOS_ID, EOS_ID, ClassPartition, ParallelExample, SemanticTag, TaggedVocabulary, parse_tagged_token
from .halo import aggregate_tags
from .model import (
    ModelParams,
    attention_keys,
    decoder_step,
    encode,
    initial_decoder_state,
    project_distribution,
)


def default_max_len(source_len: int) -> int:
    """Decode-length cap used when no explicit limit is given."""
    return 2 * source_len + 5


def greedy_decode(params: ModelParams, source: np.ndarray, max_len: int) -> list[int]:
    """Argmax decoding; stops at EOS or ``max_len`` tokens.

    Ties take the lowest token id (first argmax). The returned ids exclude
    the EOS marker, so an immediate EOS yields an empty hypothesis.
    """
    if max_len < 1:
        raise ValueError("greedy_decode: max_len must be >= 1")
    encoder_states = encode(source, params)
    keys = attention_keys(encoder_states, params.attn_w)
    state = initial_decoder_state(params)
    out: list[int] = []
    prev = BOS_ID
    for _ in range(max_len):
        state = decoder_step(prev, state, encoder_states, params, keys=keys)
        p = project_distribution(state.h, params.out_w).value
        tok = int(np.argmax(p))
        if tok == EOS_ID:
            break
        out.append(tok)
        prev = tok
    return out


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hypotheses: list[list[str]], references: list[list[str]], max_n: int = 4) -> float:
    """Corpus BLEU in [0, 1]; zero whenever any n-gram precision is zero."""
    if len(hypotheses) != len(references):
        raise ValueError(f"corpus_bleu: {len(hypotheses)} hypotheses vs {len(references)} references")
    if not references:
        raise ValueError("corpus_bleu: empty corpus")

    matched = [0] * max_n
    total = [0] * max_n
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            hc = _ngram_counts(hyp, n)
            rc = _ngram_counts(ref, n)
            total[n - 1] += sum(hc.values())
            matched[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())

    if any(t == 0 or m == 0 for m, t in zip(matched, total)):
        return 0.0
    log_prec = sum(math.log(m / t) for m, t in zip(matched, total)) / max_n
    bp = min(1.0, math.exp(1.0 - ref_len / hyp_len))
    return bp * math.exp(log_prec)


# ---------------------------------------------------------------------------
# tag-restricted F1
# ---------------------------------------------------------------------------


@dataclass
class TagScore:
    precision: float
    recall: float
    f1: float


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0.0 else 2.0 * p * r / (p + r)


def tag_f1(hypotheses: list[list[str]], references: list[list[str]], tag: SemanticTag) -> TagScore:
    """Multiset token overlap over the corpus, restricted to one tag.

    matched = sum over pairs, over types, of min(hyp count, ref count);
    precision = matched / hyp tokens of the tag (0 on an empty side),
    recall likewise over the reference side.
    """
    if len(hypotheses) != len(references):
        raise ValueError(f"tag_f1: {len(hypotheses)} hypotheses vs {len(references)} references")

    matched = 0
    n_hyp = 0
    n_ref = 0
    for hyp, ref in zip(hypotheses, references):
        hc = Counter(t for t in hyp if parse_tagged_token(t)[1] is tag)
        rc = Counter(t for t in ref if parse_tagged_token(t)[1] is tag)
        n_hyp += sum(hc.values())
        n_ref += sum(rc.values())
        matched += sum(min(c, rc[t]) for t, c in hc.items())

    precision = matched / n_hyp if n_hyp else 0.0
    recall = matched / n_ref if n_ref else 0.0
    return TagScore(precision, recall, _f1(precision, recall))


@dataclass
class EvalResult:
    bleu: float
    f1_pred: TagScore
    f1_arg: TagScore


def evaluate_decodes(hypotheses: list[list[str]], references: list[list[str]]) -> EvalResult:
    return EvalResult(
        bleu=corpus_bleu(hypotheses, references),
        f1_pred=tag_f1(hypotheses, references, SemanticTag.PREDICATE),
        f1_arg=tag_f1(hypotheses, references, SemanticTag.ARGUMENT),
    )


def evaluate_model(
    params: ModelParams,
    examples: list[ParallelExample],
    vocab: TaggedVocabulary,
    max_len: int | None = None,
) -> EvalResult:
    """Greedy-decode every example and score against the references."""
    hyps = []
    refs = []
    for ex in examples:
        cap = max_len if max_len is not None else default_max_len(len(ex.source))
        ids = greedy_decode(params, ex.source, cap)
        hyps.append(vocab.target_surfaces(ids))
        refs.append(vocab.target_surfaces(ex.target))
    return evaluate_decodes(hyps, refs)


def tag_prediction_accuracy(
    params: ModelParams,
    examples: list[ParallelExample],
    partition: ClassPartition,
) -> float:
    """Teacher-forced class accuracy of the aggregated distribution.

    At each step the token distribution is collapsed onto the partition;
    the step counts as correct when the argmax class matches the class of
    the true token. Averaged over all steps of all examples.
    """
    correct = 0
    steps = 0
    for ex in examples:
        encoder_states = encode(ex.source, params)
        keys = attention_keys(encoder_states, params.attn_w)
        state = initial_decoder_state(params)
        prev = BOS_ID
        for y in ex.target:
            state = decoder_step(prev, state, encoder_states, params, keys=keys)
            p = project_distribution(state.h, params.out_w).value
            q = aggregate_tags(p, partition)
            correct += int(np.argmax(q)) == int(partition.class_of[int(y)])
            steps += 1
            prev = int(y)
    return correct / steps if steps else 0.0


def format_metrics(result: EvalResult) -> str:
    """Key-value text block; the canonical metric output format."""
    lines = [
        f"bleu = {result.bleu:.6f}",
        f"f1_pred.p = {result.f1_pred.precision:.6f}",
        f"f1_pred.r = {result.f1_pred.recall:.6f}",
        f"f1_pred.f1 = {result.f1_pred.f1:.6f}",
        f"f1_arg.p = {result.f1_arg.precision:.6f}",
        f"f1_arg.r = {result.f1_arg.recall:.6f}",
        f"f1_arg.f1 = {result.f1_arg.f1:.6f}",
    ]
    return "\n".join(lines) + "\n"
