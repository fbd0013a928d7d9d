"""Tagged vocabularies, corpus files, partition schemes, synthetic data.

Corpus files are UTF-8 text with one example per line: source tokens, a
single TAB, then target tokens, all space-separated. Target tokens carry a
semantic class suffix (":p" predicate, ":a" argument); untagged tokens are
legal and fall into the special class together with the sequence markers.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

BOS = "<s>"
EOS = "</s>"
OOV_PRED = "OOV:p"
OOV_ARG = "OOV:a"
OOV_SRC = "OOV:src"

_RESERVED_TARGET = (BOS, EOS, OOV_PRED, OOV_ARG)

# reserved ids are fixed by construction in build_vocabulary
BOS_ID = 0
EOS_ID = 1
OOV_PRED_ID = 2
OOV_ARG_ID = 3
OOV_SRC_ID = 0


class SemanticTag(Enum):
    PREDICATE = "p"
    ARGUMENT = "a"
    SPECIAL = "s"


def parse_tagged_token(surface: str) -> tuple[str, SemanticTag]:
    """Split a target token into (lemma, tag) by its ':p'/':a' suffix."""
    if not surface:
        raise ValueError("parse_tagged_token: empty token")
    if surface.endswith(":p"):
        return surface[:-2], SemanticTag.PREDICATE
    if surface.endswith(":a"):
        return surface[:-2], SemanticTag.ARGUMENT
    return surface, SemanticTag.SPECIAL


@dataclass
class ParallelExample:
    """Source ids paired with target ids; target excludes BOS, ends with EOS."""

    source: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        self.source = np.asarray(self.source, dtype=np.int64)
        self.target = np.asarray(self.target, dtype=np.int64)
        if self.source.size == 0 or self.target.size == 0:
            raise ValueError("ParallelExample: sequences must be non-empty")


@dataclass
class TaggedVocabulary:
    """Token/id maps for both sides plus the target-side semantic tags.

    Reserved ids are fixed: source 0 is the source OOV; target 0..3 are
    BOS, EOS, OOV:p, OOV:a. The per-class OOV symbols keep the
    predicate/argument partition total over the whole target vocabulary.
    """

    src_itos: list[str]
    tgt_itos: list[str]
    min_count: int
    src_stoi: dict[str, int] = field(init=False)
    tgt_stoi: dict[str, int] = field(init=False)
    tgt_tags: list[SemanticTag] = field(init=False)

    def __post_init__(self):
        self.src_stoi = {s: i for i, s in enumerate(self.src_itos)}
        self.tgt_stoi = {s: i for i, s in enumerate(self.tgt_itos)}
        self.tgt_tags = [parse_tagged_token(s)[1] for s in self.tgt_itos]

    # reserved ids
    @property
    def bos_id(self) -> int:
        return self.tgt_stoi[BOS]

    @property
    def eos_id(self) -> int:
        return self.tgt_stoi[EOS]

    @property
    def n_source(self) -> int:
        return len(self.src_itos)

    @property
    def n_target(self) -> int:
        return len(self.tgt_itos)

    def encode_source(self, tokens: list[str]) -> np.ndarray:
        oov = self.src_stoi[OOV_SRC]
        return np.array([self.src_stoi.get(t, oov) for t in tokens], dtype=np.int64)

    def encode_target(self, tokens: list[str]) -> np.ndarray:
        """Map target tokens to ids (per-class OOV fallback) and append EOS."""
        ids = []
        for t in tokens:
            i = self.tgt_stoi.get(t)
            if i is None:
                _, tag = parse_tagged_token(t)
                i = self.tgt_stoi[OOV_PRED if tag is SemanticTag.PREDICATE else OOV_ARG]
            ids.append(i)
        ids.append(self.eos_id)
        return np.array(ids, dtype=np.int64)

    def encode_example(self, src_tokens: list[str], tgt_tokens: list[str]) -> ParallelExample:
        return ParallelExample(self.encode_source(src_tokens), self.encode_target(tgt_tokens))

    def target_surfaces(self, ids, strip_eos: bool = True) -> list[str]:
        out = [self.tgt_itos[int(i)] for i in ids]
        if strip_eos:
            out = [t for t in out if t != EOS]
        return out

    def content_hash(self) -> str:
        """Stable hash of the full vocabulary; stored in checkpoints."""
        h = hashlib.sha256()
        h.update(f"min_count={self.min_count}\n".encode())
        for s in self.src_itos:
            h.update(b"S" + s.encode() + b"\n")
        for s in self.tgt_itos:
            h.update(b"T" + s.encode() + b"\n")
        return h.hexdigest()


def build_vocabulary(pairs: list[tuple[list[str], list[str]]], min_count: int = 1) -> TaggedVocabulary:
    """Count tokens and assign ids deterministically.

    Tokens seen fewer than ``min_count`` times are dropped and will encode
    to the OOV symbol of their class. Ids go to the most frequent tokens
    first, ties broken lexicographically, after the reserved symbols.
    """
    if min_count < 1:
        raise ValueError("build_vocabulary: min_count must be >= 1")
    if not pairs:
        raise ValueError("build_vocabulary: empty corpus")

    src_counts: Counter[str] = Counter()
    tgt_counts: Counter[str] = Counter()
    for src, tgt in pairs:
        src_counts.update(src)
        tgt_counts.update(tgt)

    def kept(counts: Counter[str], reserved: tuple[str, ...]) -> list[str]:
        items = [(s, c) for s, c in counts.items() if c >= min_count and s not in reserved]
        items.sort(key=lambda sc: (-sc[1], sc[0]))
        return [s for s, _ in items]

    src_itos = [OOV_SRC] + kept(src_counts, (OOV_SRC,))
    tgt_itos = list(_RESERVED_TARGET) + kept(tgt_counts, _RESERVED_TARGET)
    return TaggedVocabulary(src_itos, tgt_itos, min_count)


# ---------------------------------------------------------------------------
# partition schemes
# ---------------------------------------------------------------------------


@dataclass
class PartitionScheme:
    """How the target vocabulary splits into classes.

    ``kind`` is one of "bytag" (predicate / argument / special), "singleton"
    (every token its own class) or "custom" with an explicit surface-to-class
    mapping.
    """

    kind: str
    custom_map: dict[str, int] | None = None

    @classmethod
    def parse(cls, text: str) -> "PartitionScheme":
        """Parse a config value: bytag | singleton | custom(path)."""
        t = text.strip().lower()
        if t == "bytag":
            return cls("bytag")
        if t == "singleton":
            return cls("singleton")
        if t.startswith("custom(") and t.endswith(")"):
            path = text.strip()[len("custom("):-1]
            return cls("custom", custom_map=load_custom_partition(path))
        raise ValueError(f"unknown partition scheme {text!r}")


def load_custom_partition(path: str) -> dict[str, int]:
    """Read 'surface TAB class-index' lines for a custom partition."""
    mapping: dict[str, int] = {}
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}:{ln}: expected 'surface<TAB>class'")
        surface, cls = parts
        if surface in mapping:
            raise ValueError(f"{path}:{ln}: token {surface!r} assigned twice")
        mapping[surface] = int(cls)
    return mapping


BYTAG_CLASSES = {SemanticTag.PREDICATE: 0, SemanticTag.ARGUMENT: 1, SemanticTag.SPECIAL: 2}


@dataclass
class ClassPartition:
    """Concrete partition: target id -> class index, plus class count."""

    class_of: np.ndarray
    n_classes: int

    def indicator_matrix(self) -> np.ndarray:
        """(n_classes x |V|) 0/1 matrix M with M[c, v] = 1 iff v in class c."""
        m = np.zeros((self.n_classes, self.class_of.size), dtype=np.float64)
        m[self.class_of, np.arange(self.class_of.size)] = 1.0
        return m


def partition_classes(vocab: TaggedVocabulary, scheme: PartitionScheme) -> ClassPartition:
    """Materialize a scheme into an id -> class map covering the vocabulary."""
    n = vocab.n_target
    if scheme.kind == "bytag":
        class_of = np.array([BYTAG_CLASSES[t] for t in vocab.tgt_tags], dtype=np.int64)
        return ClassPartition(class_of, 3)
    if scheme.kind == "singleton":
        return ClassPartition(np.arange(n, dtype=np.int64), n)
    if scheme.kind == "custom":
        if scheme.custom_map is None:
            raise ValueError("custom partition requires a mapping")
        missing = [s for s in vocab.tgt_itos if s not in scheme.custom_map]
        if missing:
            raise ValueError(f"custom partition does not cover the vocabulary; missing {missing[:5]}")
        raw = np.array([scheme.custom_map[s] for s in vocab.tgt_itos], dtype=np.int64)
        if raw.min() < 0:
            raise ValueError("custom partition: negative class index")
        # relabel densely so classes are 0..K-1 with no empty classes
        labels = np.unique(raw)
        remap = {int(old): new for new, old in enumerate(labels)}
        class_of = np.array([remap[int(c)] for c in raw], dtype=np.int64)
        return ClassPartition(class_of, len(labels))
    raise ValueError(f"unknown partition scheme kind {scheme.kind!r}")


# ---------------------------------------------------------------------------
# corpus files
# ---------------------------------------------------------------------------


def read_corpus(path: str | Path) -> list[tuple[list[str], list[str]]]:
    """Parse a corpus file into (source tokens, target tokens) pairs."""
    pairs = []
    text = Path(path).read_text(encoding="utf-8")
    for ln, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}:{ln}: expected one TAB separating source and target")
        src = parts[0].split(" ")
        tgt = parts[1].split(" ")
        if not parts[0] or not parts[1]:
            raise ValueError(f"{path}:{ln}: empty side")
        pairs.append((src, tgt))
    return pairs


def write_corpus(path: str | Path, pairs: list[tuple[list[str], list[str]]]) -> None:
    lines = [" ".join(src) + "\t" + " ".join(tgt) for src, tgt in pairs]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def corpus_stats(pairs: list[tuple[list[str], list[str]]]) -> dict[str, float]:
    """Pair count, vocabulary sizes and token/type ratio for a corpus."""
    src_counts: Counter[str] = Counter()
    tgt_counts: Counter[str] = Counter()
    for src, tgt in pairs:
        src_counts.update(src)
        tgt_counts.update(tgt)
    n_tokens = sum(src_counts.values()) + sum(tgt_counts.values())
    n_types = len(src_counts) + len(tgt_counts)
    return {
        "pairs": len(pairs),
        "source_vocab": len(src_counts),
        "target_vocab": len(tgt_counts),
        "source_tokens": sum(src_counts.values()),
        "target_tokens": sum(tgt_counts.values()),
        "token_type_ratio": n_tokens / n_types if n_types else 0.0,
    }


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


@dataclass
class SyntheticConfig:
    n_pairs: int
    source_vocab_size: int = 60
    dict_seed: int = 0
    sentence_len_range: tuple[int, int] = (3, 8)
    noise_rate: float = 0.1

    def validate(self) -> None:
        if self.n_pairs <= 0 or self.source_vocab_size <= 0:
            raise ValueError("sizes must be positive")
        lo, hi = self.sentence_len_range
        if lo < 1 or hi < lo:
            raise ValueError("sentence_len_range must satisfy 1 <= lo <= hi")
        if not (0.0 <= self.noise_rate < 1.0):
            raise ValueError("noise_rate must be in [0, 1)")


@dataclass
class SyntheticDictionary:
    """Bijective source-word to tagged-target-lemma dictionary."""

    src_words: list[str]
    translation: dict[str, str]  # source word -> tagged target token
    word_class: dict[str, SemanticTag]

    def same_class_pool(self, tag: SemanticTag) -> list[str]:
        return [self.translation[w] for w in self.src_words if self.word_class[w] is tag]


def build_synthetic_dictionary(source_vocab_size: int, dict_seed: int) -> SyntheticDictionary:
    """Fixed random bijection between source words and tagged target lemmas.

    One third of the words (rounded down, at least one) behave like
    predicates, the rest like arguments; the class is a property of the
    source word and every translation carries the matching tag.
    """
    rng = np.random.default_rng(dict_seed)
    n = source_vocab_size
    src_words = [f"w{i:03d}" for i in range(n)]
    lemma_perm = rng.permutation(n)
    n_pred = max(1, n // 3)
    pred_slots = set(rng.permutation(n)[:n_pred].tolist())

    translation = {}
    word_class = {}
    for i, w in enumerate(src_words):
        tag = SemanticTag.PREDICATE if i in pred_slots else SemanticTag.ARGUMENT
        word_class[w] = tag
        translation[w] = f"g{lemma_perm[i]:03d}:{tag.value}"
    return SyntheticDictionary(src_words, translation, word_class)


def generate_synthetic(
    config: SyntheticConfig, seed: int, dictionary: SyntheticDictionary | None = None
) -> tuple[list[tuple[list[str], list[str]]], SyntheticDictionary]:
    """Sample parallel examples from the dictionary language.

    The source is a random word sequence; the target is the dictionary
    translation of the tokens at even positions (a deterministic
    subsequence), with each target token independently replaced by a random
    same-class token at rate ``noise_rate``. Fully determined by the seed.
    """
    config.validate()
    if dictionary is None:
        dictionary = build_synthetic_dictionary(config.source_vocab_size, config.dict_seed)
    rng = np.random.default_rng(seed)
    lo, hi = config.sentence_len_range
    pools = {
        SemanticTag.PREDICATE: dictionary.same_class_pool(SemanticTag.PREDICATE),
        SemanticTag.ARGUMENT: dictionary.same_class_pool(SemanticTag.ARGUMENT),
    }

    pairs = []
    n_words = len(dictionary.src_words)
    for _ in range(config.n_pairs):
        length = int(rng.integers(lo, hi + 1))
        src = [dictionary.src_words[int(i)] for i in rng.integers(0, n_words, size=length)]
        tgt = []
        for pos in range(0, length, 2):
            word = src[pos]
            token = dictionary.translation[word]
            if config.noise_rate > 0.0 and rng.random() < config.noise_rate:
                pool = pools[dictionary.word_class[word]]
                token = pool[int(rng.integers(0, len(pool)))]
            tgt.append(token)
        pairs.append((src, tgt))
    return pairs, dictionary


def write_synthetic_metadata(
    path: str | Path, config: SyntheticConfig, seed: int, dictionary: SyntheticDictionary
) -> None:
    """Sidecar with the generator settings and the ground-truth dictionary."""
    lines = [
        f"seed = {seed}",
        f"dict_seed = {config.dict_seed}",
        f"n_pairs = {config.n_pairs}",
        f"source_vocab_size = {config.source_vocab_size}",
        f"sentence_len_min = {config.sentence_len_range[0]}",
        f"sentence_len_max = {config.sentence_len_range[1]}",
        f"noise_rate = {config.noise_rate}",
    ]
    for w in dictionary.src_words:
        lines.append(f"dict.{w} = {dictionary.translation[w]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# vocabulary files
# ---------------------------------------------------------------------------

_VOCAB_HEADER = "haloseq-vocab-v1"


def save_vocabulary(vocab: TaggedVocabulary, path: str | Path) -> None:
    lines = [f"format = {_VOCAB_HEADER}", f"min_count = {vocab.min_count}", "[source]"]
    lines += [f"{i}\t{s}" for i, s in enumerate(vocab.src_itos)]
    lines.append("[target]")
    lines += [f"{i}\t{s}" for i, s in enumerate(vocab.tgt_itos)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_vocabulary(path: str | Path) -> TaggedVocabulary:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != f"format = {_VOCAB_HEADER}":
        raise ValueError(f"{path}: not a {_VOCAB_HEADER} file")
    min_count = int(lines[1].split("=", 1)[1])
    src_itos: list[str] = []
    tgt_itos: list[str] = []
    current: list[str] | None = None
    for line in lines[2:]:
        if line == "[source]":
            current = src_itos
        elif line == "[target]":
            current = tgt_itos
        elif line:
            if current is None:
                raise ValueError(f"{path}: entry before section header")
            idx, surface = line.split("\t", 1)
            if int(idx) != len(current):
                raise ValueError(f"{path}: ids out of order at {line!r}")
            current.append(surface)
    return TaggedVocabulary(src_itos, tgt_itos, min_count)
