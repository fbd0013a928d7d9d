"""Vocabulary, partition, corpus-file and synthetic-generator tests."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from haloseq import corpus as cp
from haloseq.corpus import (
    BOS,
    EOS,
    OOV_ARG,
    OOV_PRED,
    OOV_SRC,
    PartitionScheme,
    SemanticTag,
    SyntheticConfig,
    build_vocabulary,
    generate_synthetic,
    parse_tagged_token,
    partition_classes,
)


class TestParseTaggedToken:
    def test_argument_suffix(self):
        assert parse_tagged_token("SOLDIER:a") == ("SOLDIER", SemanticTag.ARGUMENT)
        assert parse_tagged_token("mortars:a") == ("mortars", SemanticTag.ARGUMENT)

    def test_predicate_suffix(self):
        assert parse_tagged_token("attacked:p") == ("attacked", SemanticTag.PREDICATE)

    def test_untagged_is_special(self):
        assert parse_tagged_token("hello") == ("hello", SemanticTag.SPECIAL)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            parse_tagged_token("")


def _pairs(*targets):
    return [([f"s{i}"], list(t)) for i, t in enumerate(targets)]


class TestBuildVocabulary:
    def test_min_count_replaces_rare_tokens(self):
        pairs = _pairs(["a:p"], ["a:p"], ["a:p"], ["b:a"])
        vocab = build_vocabulary(pairs, min_count=2)
        assert "a:p" in vocab.tgt_stoi
        assert "b:a" not in vocab.tgt_stoi
        ids = vocab.encode_target(["b:a"])
        assert ids[0] == vocab.tgt_stoi[OOV_ARG]

    def test_min_count_one_keeps_everything(self):
        pairs = _pairs(["a:p"], ["b:a"])
        vocab = build_vocabulary(pairs, min_count=1)
        assert "a:p" in vocab.tgt_stoi and "b:a" in vocab.tgt_stoi

    def test_deterministic_ids(self):
        pairs = _pairs(["x:p", "y:a"], ["y:a"], ["z:a"])
        v1 = build_vocabulary(pairs, min_count=1)
        v2 = build_vocabulary(pairs, min_count=1)
        assert v1.tgt_itos == v2.tgt_itos and v1.src_itos == v2.src_itos

    def test_reserved_symbols_always_present(self):
        vocab = build_vocabulary(_pairs(["a:p"]), min_count=1)
        for sym in (BOS, EOS, OOV_PRED, OOV_ARG):
            assert sym in vocab.tgt_stoi
        assert OOV_SRC in vocab.src_stoi
        assert vocab.bos_id == cp.BOS_ID and vocab.eos_id == cp.EOS_ID

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            build_vocabulary([], min_count=1)

    def test_roundtrip_without_oov(self):
        pairs = [(["s1", "s2"], ["run:p", "dog:a"])]
        vocab = build_vocabulary(pairs, min_count=1)
        ex = vocab.encode_example(*pairs[0])
        assert vocab.target_surfaces(ex.target) == ["run:p", "dog:a"]
        assert [vocab.src_itos[i] for i in ex.source] == ["s1", "s2"]

    def test_target_ends_with_eos(self):
        vocab = build_vocabulary(_pairs(["a:p"]), min_count=1)
        ids = vocab.encode_target(["a:p"])
        assert ids[-1] == vocab.eos_id


class TestPartitions:
    def _vocab(self):
        return build_vocabulary([(["s"], ["a:p", "b:p", "c:a"])], min_count=1)

    def test_bytag_groups_by_suffix(self):
        vocab = self._vocab()
        part = partition_classes(vocab, PartitionScheme.parse("bytag"))
        by_class = {}
        for tok, cls in zip(vocab.tgt_itos, part.class_of):
            by_class.setdefault(int(cls), set()).add(tok)
        preds = by_class[cp.BYTAG_CLASSES[SemanticTag.PREDICATE]]
        args = by_class[cp.BYTAG_CLASSES[SemanticTag.ARGUMENT]]
        special = by_class[cp.BYTAG_CLASSES[SemanticTag.SPECIAL]]
        assert preds == {"a:p", "b:p", OOV_PRED}
        assert args == {"c:a", OOV_ARG}
        assert special == {BOS, EOS}
        assert part.n_classes <= 3

    def test_singleton_gives_one_class_per_token(self):
        vocab = self._vocab()
        part = partition_classes(vocab, PartitionScheme.parse("singleton"))
        assert part.n_classes == vocab.n_target
        npt.assert_array_equal(np.sort(part.class_of), np.arange(vocab.n_target))

    def test_custom_missing_id_rejected(self):
        vocab = self._vocab()
        mapping = {s: 0 for s in vocab.tgt_itos[:-1]}  # drop one token
        with pytest.raises(ValueError, match="cover"):
            partition_classes(vocab, PartitionScheme("custom", custom_map=mapping))

    def test_custom_file_double_assignment_rejected(self, tmp_path):
        path = tmp_path / "part.tsv"
        path.write_text("a:p\t0\na:p\t1\n", encoding="utf-8")
        with pytest.raises(ValueError, match="twice"):
            cp.load_custom_partition(path)

    def test_custom_scheme_parses_and_applies(self, tmp_path):
        vocab = self._vocab()
        path = tmp_path / "part.tsv"
        lines = [f"{s}\t{i % 2}" for i, s in enumerate(vocab.tgt_itos)]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        scheme = PartitionScheme.parse(f"custom({path})")
        part = partition_classes(vocab, scheme)
        assert part.n_classes == 2

    def test_unknown_scheme_rejected(self):
        with pytest.raises(ValueError, match="unknown partition"):
            PartitionScheme.parse("bananas")


@settings(max_examples=30, deadline=None)
@given(
    tokens=st.lists(
        st.tuples(st.text(alphabet="abcdef", min_size=1, max_size=4), st.sampled_from([":p", ":a", ""])),
        min_size=1,
        max_size=12,
    ),
    kind=st.sampled_from(["bytag", "singleton"]),
)
def test_partition_is_disjoint_cover(tokens, kind):
    pairs = [(["s"], [f"{lemma}{suffix}" for lemma, suffix in tokens])]
    vocab = build_vocabulary(pairs, min_count=1)
    part = partition_classes(vocab, PartitionScheme.parse(kind))
    # indicator columns each sum to exactly one: disjoint and covering
    m = part.indicator_matrix()
    npt.assert_array_equal(m.sum(axis=0), np.ones(vocab.n_target))
    assert part.class_of.min() >= 0 and part.class_of.max() < part.n_classes


class TestSynthetic:
    def test_same_seed_identical(self):
        cfg = SyntheticConfig(n_pairs=20, source_vocab_size=12, dict_seed=3)
        a, _ = generate_synthetic(cfg, seed=9)
        b, _ = generate_synthetic(cfg, seed=9)
        assert a == b

    def test_n_pairs_exact(self):
        cfg = SyntheticConfig(n_pairs=100, source_vocab_size=12, dict_seed=3)
        pairs, _ = generate_synthetic(cfg, seed=1)
        assert len(pairs) == 100

    def test_zero_noise_matches_dictionary(self):
        cfg = SyntheticConfig(n_pairs=40, source_vocab_size=15, dict_seed=5, noise_rate=0.0)
        pairs, dictionary = generate_synthetic(cfg, seed=2)
        for src, tgt in pairs:
            expected = [dictionary.translation[src[i]] for i in range(0, len(src), 2)]
            assert tgt == expected

    def test_noise_preserves_class(self):
        cfg = SyntheticConfig(n_pairs=60, source_vocab_size=15, dict_seed=5, noise_rate=0.5)
        pairs, dictionary = generate_synthetic(cfg, seed=4)
        for src, tgt in pairs:
            aligned = [src[i] for i in range(0, len(src), 2)]
            for word, token in zip(aligned, tgt):
                _, tag = parse_tagged_token(token)
                assert tag == dictionary.word_class[word]

    def test_invalid_config_rejected(self):
        with pytest.raises(ValueError):
            generate_synthetic(SyntheticConfig(n_pairs=0), seed=1)
        with pytest.raises(ValueError):
            generate_synthetic(SyntheticConfig(n_pairs=1, noise_rate=1.0), seed=1)

    def test_dictionary_is_bijective_with_class_ratio(self):
        d = cp.build_synthetic_dictionary(30, dict_seed=8)
        lemmas = set(d.translation.values())
        assert len(lemmas) == 30
        n_pred = sum(1 for t in d.word_class.values() if t is SemanticTag.PREDICATE)
        assert n_pred == 10  # one third of the words


class TestCorpusFiles:
    def test_write_read_roundtrip(self, tmp_path):
        pairs = [(["s1", "s2"], ["a:p", "b:a"]), (["s3"], ["c:a"])]
        path = tmp_path / "corpus.tsv"
        cp.write_corpus(path, pairs)
        assert cp.read_corpus(path) == pairs

    def test_malformed_line_reports_position(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("no tab here\n", encoding="utf-8")
        with pytest.raises(ValueError, match="bad.tsv:1"):
            cp.read_corpus(path)

    def test_stats(self):
        pairs = [(["s1", "s1"], ["a:p"]), (["s2"], ["a:p", "b:a"])]
        stats = cp.corpus_stats(pairs)
        assert stats["pairs"] == 2
        assert stats["source_vocab"] == 2 and stats["target_vocab"] == 2
        assert stats["source_tokens"] == 3 and stats["target_tokens"] == 3
        npt.assert_allclose(stats["token_type_ratio"], 6 / 4)

    def test_metadata_sidecar(self, tmp_path):
        cfg = SyntheticConfig(n_pairs=5, source_vocab_size=6, dict_seed=1)
        pairs, dictionary = generate_synthetic(cfg, seed=3)
        path = tmp_path / "metadata.txt"
        cp.write_synthetic_metadata(path, cfg, 3, dictionary)
        text = path.read_text(encoding="utf-8")
        assert "seed = 3" in text and "dict.w000 = " in text


class TestVocabularyFiles:
    def test_save_load_roundtrip(self, tmp_path):
        vocab = build_vocabulary([(["s1", "s2"], ["a:p", "b:a"])], min_count=1)
        path = tmp_path / "vocab.txt"
        cp.save_vocabulary(vocab, path)
        loaded = cp.load_vocabulary(path)
        assert loaded.src_itos == vocab.src_itos
        assert loaded.tgt_itos == vocab.tgt_itos
        assert loaded.content_hash() == vocab.content_hash()

    def test_rejects_other_files(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("hello\n", encoding="utf-8")
        with pytest.raises(ValueError, match="not a"):
            cp.load_vocabulary(path)
