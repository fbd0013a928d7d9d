"""Command-line entry point: gen-data, train, eval, decode, corpus-stats.

Exit codes: 0 success, 1 runtime error (message on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import corpus as corpusmod
from .evaluation import default_max_len, evaluate_model, format_metrics, greedy_decode
from .model import init_params, load_checkpoint, save_checkpoint
from .training import train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="haloseq", description="Tagged seq2seq trainer with a hidden-state neighborhood regularizer.")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("gen-data", help="write a synthetic train/dev/test corpus triple plus metadata")
    p.add_argument("--out-dir", required=True, help="directory for train.tsv, dev.tsv, test.tsv, metadata.txt")
    p.add_argument("--seed", type=int, default=7, help="generator stream for sentences")
    p.add_argument("--dict-seed", type=int, default=11, help="stream fixing the translation dictionary")
    p.add_argument("--n", type=int, required=True, help="training pairs")
    p.add_argument("--n-dev", type=int, default=None, help="dev pairs (default: n // 5, at least 1)")
    p.add_argument("--n-test", type=int, default=None, help="test pairs (default: n // 5, at least 1)")
    p.add_argument("--source-vocab-size", type=int, default=60, help="distinct source words")
    p.add_argument("--min-len", type=int, default=3, help="shortest source sentence")
    p.add_argument("--max-len", type=int, default=8, help="longest source sentence")
    p.add_argument("--noise-rate", type=float, default=0.1, help="fraction of target tokens replaced within their class")

    p = sub.add_parser("train", help="train a model and write checkpoint, vocabulary, report and figures")
    p.add_argument("--corpus", required=True, help="training corpus file")
    p.add_argument("--dev", required=True, help="dev corpus file for model selection")
    p.add_argument("--out-dir", required=True, help="directory for model.ckpt, vocab.txt, report.tsv, training_curves.png")
    p.add_argument("--config", default=None, help="key-value config file; flags below override it")
    for key in cfgmod.TRAIN_KEYS:
        p.add_argument(key.flag, type=str, default=None, metavar="V", help=f"{key.help} (default {key.default})")

    p = sub.add_parser("eval", help="score a checkpoint on a corpus and print metrics")
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--corpus", required=True, help="corpus file with references")
    p.add_argument("--vocab", default=None, help="vocabulary file (default: vocab.txt next to the checkpoint)")
    p.add_argument("--metrics-out", default=None, help="also write the metric block to this file")
    p.add_argument("--max-len", type=int, default=None, help="decode-length cap (default: 2*source+5)")

    p = sub.add_parser("decode", help="greedy-decode raw source lines from a file or '-' (stdin)")
    p.add_argument("--checkpoint", required=True, help="checkpoint file")
    p.add_argument("--vocab", default=None, help="vocabulary file (default: vocab.txt next to the checkpoint)")
    p.add_argument("--input", required=True, help="file of source token lines, or '-' for stdin")
    p.add_argument("--max-len", type=int, default=None, help="decode-length cap (default: 2*source+5)")

    p = sub.add_parser("corpus-stats", help="print pair counts, vocabulary sizes and token/type ratio")
    p.add_argument("--corpus", required=True, help="corpus file")

    return parser


def _require_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    return p


def _cmd_gen_data(args) -> int:
    n_dev = args.n_dev if args.n_dev is not None else max(1, args.n // 5)
    n_test = args.n_test if args.n_test is not None else max(1, args.n // 5)
    synth = corpusmod.SyntheticConfig(
        n_pairs=args.n + n_dev + n_test,
        source_vocab_size=args.source_vocab_size,
        dict_seed=args.dict_seed,
        sentence_len_range=(args.min_len, args.max_len),
        noise_rate=args.noise_rate,
    )
    pairs, dictionary = corpusmod.generate_synthetic(synth, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpusmod.write_corpus(out / "train.tsv", pairs[: args.n])
    corpusmod.write_corpus(out / "dev.tsv", pairs[args.n : args.n + n_dev])
    corpusmod.write_corpus(out / "test.tsv", pairs[args.n + n_dev :])
    corpusmod.write_synthetic_metadata(out / "metadata.txt", synth, args.seed, dictionary)
    print(f"wrote {args.n}/{n_dev}/{n_test} pairs under {out}")
    return 0


def _cmd_train(args) -> int:
    settings = cfgmod.read_config_file(_require_file(args.config)) if args.config else {}
    for key in cfgmod.TRAIN_KEYS:
        raw = getattr(args, key.flag.lstrip("-").replace("-", "_"))
        if raw is not None:
            settings[key.name] = key.parse(raw)
    tc, hidden_dim, embed_dim, min_count = cfgmod.build_train_config(settings)

    train_pairs = corpusmod.read_corpus(_require_file(args.corpus))
    dev_pairs = corpusmod.read_corpus(_require_file(args.dev))
    vocab = corpusmod.build_vocabulary(train_pairs, min_count=min_count)
    train_set = [vocab.encode_example(s, t) for s, t in train_pairs]
    dev_set = [vocab.encode_example(s, t) for s, t in dev_pairs]

    params = init_params(vocab, hidden_dim, embed_dim, np.random.default_rng(tc.seed))
    report, best_values = train(params, train_set, dev_set, vocab, tc, log=print)
    params.load_values(best_values)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpusmod.save_vocabulary(vocab, out / "vocab.txt")
    save_checkpoint(params, vocab.content_hash(), out / "model.ckpt")
    from .report import write_train_report

    tsv, fig = write_train_report(report, out)
    print(f"best epoch {report.best_epoch} (dev bleu {report.best_bleu:.4f})")
    print(f"wrote {out / 'model.ckpt'}, {out / 'vocab.txt'}, {tsv}, {fig}")
    return 0


def _load_model(args):
    ckpt = _require_file(args.checkpoint)
    vocab_path = Path(args.vocab) if args.vocab else ckpt.parent / "vocab.txt"
    vocab = corpusmod.load_vocabulary(_require_file(str(vocab_path)))
    params = load_checkpoint(ckpt, vocab=vocab)
    return params, vocab


def _cmd_eval(args) -> int:
    params, vocab = _load_model(args)
    pairs = corpusmod.read_corpus(_require_file(args.corpus))
    examples = [vocab.encode_example(s, t) for s, t in pairs]
    result = evaluate_model(params, examples, vocab, max_len=args.max_len)
    block = format_metrics(result)
    sys.stdout.write(block)
    print(f"bleu_x100 = {100.0 * result.bleu:.4f}")
    if args.metrics_out:
        Path(args.metrics_out).write_text(block, encoding="utf-8")
    return 0


def _cmd_decode(args) -> int:
    params, vocab = _load_model(args)
    if args.input == "-":
        lines = sys.stdin.read().splitlines()
    else:
        lines = _require_file(args.input).read_text(encoding="utf-8").splitlines()
    for line in lines:
        tokens = line.split()
        if not tokens:
            print()
            continue
        source = vocab.encode_source(tokens)
        cap = args.max_len if args.max_len is not None else default_max_len(len(source))
        ids = greedy_decode(params, source, cap)
        print(" ".join(vocab.target_surfaces(ids)))
    return 0


def _cmd_corpus_stats(args) -> int:
    pairs = corpusmod.read_corpus(_require_file(args.corpus))
    stats = corpusmod.corpus_stats(pairs)
    for key in ("pairs", "source_vocab", "target_vocab", "source_tokens", "target_tokens"):
        print(f"{key} = {stats[key]}")
    print(f"token_type_ratio = {stats['token_type_ratio']:.4f}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "decode": _cmd_decode,
    "corpus-stats": _cmd_corpus_stats,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return _COMMANDS[args.command](args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # runtime errors exit 1 with a message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
