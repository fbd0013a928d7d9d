"""Paired baseline-vs-regularizer comparison on synthetic data.

For each seed, two models start from identical parameters and train on the
same corpus: one plain, one with the neighbor loss (Beta(1,19), bytag
partition). Each run selects its checkpoint by dev BLEU; test-set tag F1
and teacher-forced tag accuracy are then compared pairwise across seeds.
The noise in the synthetic data replaces tokens within their own class, so
the class-level supervision stays clean while token supervision is noisy;
the regularizer is expected to help, and the comparison reports whether it
does.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import (
    PartitionScheme,
    SyntheticConfig,
    build_vocabulary,
    generate_synthetic,
    partition_classes,
)
from .evaluation import evaluate_model, tag_prediction_accuracy
from .halo import HaloConfig
from .model import init_params
from .training import TrainConfig, train


@dataclass
class ExperimentConfig:
    n_train: int = 500
    n_dev: int = 100
    n_test: int = 100
    noise_rate: float = 0.1
    data_seed: int = 7
    dict_seed: int = 11
    source_vocab_size: int = 80
    sentence_len_range: tuple[int, int] = (3, 8)
    min_count: int = 2
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    epochs: int = 30
    hidden_dim: int = 32
    embed_dim: int = 16
    batch_size: int = 16
    learning_rate: float = 2e-3
    dev_eval_every: int = 5
    halo_alpha: float = 1.0
    halo_beta: float = 19.0


@dataclass
class ComparisonResult:
    rows: list[dict] = field(default_factory=list)
    means: dict = field(default_factory=dict)
    n_seeds_tag_acc_non_worse: int = 0

    def gate_f1_arg(self) -> bool:
        return self.means["halo_f1_arg"] >= self.means["base_f1_arg"]

    def gate_f1_pred(self) -> bool:
        return self.means["halo_f1_pred"] >= self.means["base_f1_pred"]

    def gate_tag_acc_sign_test(self, required: int = 4) -> bool:
        return self.n_seeds_tag_acc_non_worse >= required

    def strict_tag_acc_improvement(self) -> bool:
        return self.means["halo_tag_acc"] > self.means["base_tag_acc"]

    def summary_lines(self) -> list[str]:
        m = self.means
        return [
            f"seeds = {len(self.rows)}",
            f"mean test F1-Pred: baseline = {m['base_f1_pred']:.4f} halo = {m['halo_f1_pred']:.4f}",
            f"mean test F1-Arg:  baseline = {m['base_f1_arg']:.4f} halo = {m['halo_f1_arg']:.4f}",
            f"mean test BLEU:    baseline = {m['base_bleu']:.4f} halo = {m['halo_bleu']:.4f}",
            f"mean tag accuracy: baseline = {m['base_tag_acc']:.4f} halo = {m['halo_tag_acc']:.4f}",
            f"tag accuracy non-worse on {self.n_seeds_tag_acc_non_worse}/{len(self.rows)} seeds",
            f"strict tag-accuracy improvement: {self.strict_tag_acc_improvement()}",
        ]


def make_datasets(cfg: ExperimentConfig):
    """Train/dev/test splits drawn sequentially from one generator stream."""
    synth = SyntheticConfig(
        n_pairs=cfg.n_train + cfg.n_dev + cfg.n_test,
        source_vocab_size=cfg.source_vocab_size,
        dict_seed=cfg.dict_seed,
        sentence_len_range=cfg.sentence_len_range,
        noise_rate=cfg.noise_rate,
    )
    pairs, dictionary = generate_synthetic(synth, cfg.data_seed)
    train_pairs = pairs[: cfg.n_train]
    dev_pairs = pairs[cfg.n_train : cfg.n_train + cfg.n_dev]
    test_pairs = pairs[cfg.n_train + cfg.n_dev :]
    vocab = build_vocabulary(train_pairs, min_count=cfg.min_count)
    encode = lambda ps: [vocab.encode_example(s, t) for s, t in ps]
    return vocab, encode(train_pairs), encode(dev_pairs), encode(test_pairs), dictionary


def _run_one(cfg: ExperimentConfig, vocab, train_set, dev_set, test_set, seed: int, halo_on: bool) -> dict:
    halo = HaloConfig(
        enabled=halo_on,
        alpha=cfg.halo_alpha,
        beta=cfg.halo_beta,
        n_neighbors=1,
        weight=1.0,
        partition="bytag",
    )
    tc = TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        optimizer="adam",
        clip_norm=5.0,
        seed=seed,
        dev_eval_every=cfg.dev_eval_every,
        patience=1000,  # selection only; no early stop inside the budget
        halo_seed=seed + 9000,
        halo=halo,
    )
    params = init_params(vocab, cfg.hidden_dim, cfg.embed_dim, np.random.default_rng(seed))
    report, best_values = train(params, train_set, dev_set, vocab, tc)
    params.load_values(best_values)

    partition = partition_classes(vocab, PartitionScheme.parse("bytag"))
    result = evaluate_model(params, test_set, vocab)
    tag_acc = tag_prediction_accuracy(params, test_set, partition)
    return {
        "bleu": result.bleu,
        "f1_pred": result.f1_pred.f1,
        "f1_arg": result.f1_arg.f1,
        "tag_acc": tag_acc,
        "best_epoch": report.best_epoch,
    }


def run_comparison(cfg: ExperimentConfig | None = None, out_dir: str | Path | None = None, log=None) -> ComparisonResult:
    """Run the full paired comparison; optionally write table and figure."""
    cfg = cfg or ExperimentConfig()
    vocab, train_set, dev_set, test_set, _ = make_datasets(cfg)

    rows = []
    for seed in cfg.seeds:
        base = _run_one(cfg, vocab, train_set, dev_set, test_set, seed, halo_on=False)
        halo = _run_one(cfg, vocab, train_set, dev_set, test_set, seed, halo_on=True)
        row = {"seed": seed}
        for key in ("bleu", "f1_pred", "f1_arg", "tag_acc"):
            row[f"base_{key}"] = base[key]
            row[f"halo_{key}"] = halo[key]
        rows.append(row)
        if log:
            log(
                f"seed {seed}: F1-pred {base['f1_pred']:.3f}->{halo['f1_pred']:.3f} "
                f"F1-arg {base['f1_arg']:.3f}->{halo['f1_arg']:.3f} "
                f"tag-acc {base['tag_acc']:.3f}->{halo['tag_acc']:.3f}"
            )

    means = {}
    for key in ("bleu", "f1_pred", "f1_arg", "tag_acc"):
        means[f"base_{key}"] = float(np.mean([r[f"base_{key}"] for r in rows]))
        means[f"halo_{key}"] = float(np.mean([r[f"halo_{key}"] for r in rows]))
    non_worse = sum(1 for r in rows if r["halo_tag_acc"] >= r["base_tag_acc"])
    result = ComparisonResult(rows=rows, means=means, n_seeds_tag_acc_non_worse=non_worse)

    if out_dir is not None:
        from .report import write_comparison_report

        write_comparison_report(rows, means, out_dir)
    return result
